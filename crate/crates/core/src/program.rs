//! `min f(x) s.t. g_i(x) <= 0, h_j(x) = 0` over expressions.

use crate::error::{Error, Result};
use crate::expr::{eval, float_tol, Expr, Value};
use crate::num::{check_dim, fmt_vec, Rational};

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub dim: usize,
    pub objective: Expr,
    pub inequalities: Vec<Expr>,
    pub equalities: Vec<Expr>,
}

impl Program {
    pub fn new(dim: usize, objective: Expr, inequalities: Vec<Expr>, equalities: Vec<Expr>) -> Result<Self> {
        let p = Program {
            dim,
            objective,
            inequalities,
            equalities,
        };
        p.objective.check_dim(dim)?;
        for e in p.inequalities.iter().chain(&p.equalities) {
            e.check_dim(dim)?;
        }
        Ok(p)
    }

    pub fn unconstrained(dim: usize, objective: Expr) -> Result<Self> {
        Self::new(dim, objective, Vec::new(), Vec::new())
    }

    /// Verifies feasibility of `x` (exactly, or within the float tolerance on
    /// approximate values) and returns which inequalities are active.
    pub fn active_set(&self, x: &[Rational]) -> Result<Vec<bool>> {
        check_dim("point", x.len(), self.dim)?;
        let tol = float_tol();
        let mut active = Vec::with_capacity(self.inequalities.len());
        for (i, g) in self.inequalities.iter().enumerate() {
            let v = eval(g, x)?;
            let s = v.sign(tol);
            if s > 0 {
                return Err(infeasible(x, format!("inequality {i} has value {} > 0", v.render())));
            }
            active.push(s == 0);
        }
        for (j, h) in self.equalities.iter().enumerate() {
            let v = eval(h, x)?;
            if v.sign(tol) != 0 {
                return Err(infeasible(x, format!("equality {j} has value {} != 0", v.render())));
            }
        }
        Ok(active)
    }

    pub fn objective_value(&self, x: &[Rational]) -> Result<Value> {
        eval(&self.objective, x)
    }

    pub fn all_functions(&self) -> impl Iterator<Item = &Expr> {
        std::iter::once(&self.objective)
            .chain(&self.inequalities)
            .chain(&self.equalities)
    }
}

fn infeasible(x: &[Rational], why: String) -> Error {
    Error::precondition(format!("point ({}) is infeasible: {why}", fmt_vec(x).join(", ")))
}

/// Indices of the active inequalities.
pub(crate) fn active_indices(active: &[bool]) -> Vec<usize> {
    active.iter().enumerate().filter(|(_, a)| **a).map(|(i, _)| i).collect()
}
