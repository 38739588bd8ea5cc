//! Exact rational linear programming.
//!
//! Everything geometric in the crate reduces to [`solve_lp`]: a dense
//! two-phase simplex over [`Rational`] with Bland's pivot rule. Results carry
//! witnesses that can be checked with one matrix multiply: optimal points are
//! re-substituted, infeasible programs come with a Farkas combination of rows.

mod hull;
mod rank;
mod simplex;

pub use hull::{hull_membership, HullMode, Membership};
pub use rank::{kernel_vector, matrix_rank, transpose};

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::num::{dot, RVec, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: RVec,
    pub rhs: Rational,
    pub sense: Sense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Max,
    Min,
}

/// `optimize objective s.t. rows`, with variables free unless marked
/// nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub rows: Vec<Row>,
    pub objective: Option<(Direction, RVec)>,
    /// Variables constrained to be `>= 0` as bounds rather than rows.
    pub nonneg: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpResult {
    Optimal {
        solution: RVec,
        value: Rational,
    },
    /// `farkas[i]` multiplies row `i`; entries on `<=` rows are nonnegative,
    /// `sum farkas[i] * rhs[i] = -1`, and the combined coefficient vector is
    /// zero on free variables and nonnegative on sign-constrained ones.
    Infeasible {
        farkas: RVec,
    },
    /// A feasible point plus a recession direction that improves the objective
    /// without bound.
    Unbounded {
        point: RVec,
        ray: RVec,
    },
}

impl LpResult {
    pub fn is_optimal(&self) -> bool {
        matches!(self, LpResult::Optimal { .. })
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, LpResult::Infeasible { .. })
    }

    pub fn solution(&self) -> Option<&RVec> {
        match self {
            LpResult::Optimal { solution, .. } => Some(solution),
            _ => None,
        }
    }

    pub fn value(&self) -> Option<&Rational> {
        match self {
            LpResult::Optimal { value, .. } => Some(value),
            _ => None,
        }
    }
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            rows: Vec::new(),
            objective: None,
            nonneg: vec![false; num_vars],
        }
    }

    pub fn add_le(&mut self, coeffs: RVec, rhs: Rational) -> &mut Self {
        self.rows.push(Row {
            coeffs,
            rhs,
            sense: Sense::Le,
        });
        self
    }

    pub fn add_ge(&mut self, coeffs: RVec, rhs: Rational) -> &mut Self {
        let coeffs = coeffs.into_iter().map(|c| -c).collect();
        self.add_le(coeffs, -rhs)
    }

    pub fn add_eq(&mut self, coeffs: RVec, rhs: Rational) -> &mut Self {
        self.rows.push(Row {
            coeffs,
            rhs,
            sense: Sense::Eq,
        });
        self
    }

    pub fn set_nonneg(&mut self, var: usize) -> &mut Self {
        self.nonneg[var] = true;
        self
    }

    pub fn all_nonneg(&mut self) -> &mut Self {
        self.nonneg.iter_mut().for_each(|b| *b = true);
        self
    }

    pub fn maximize(&mut self, c: RVec) -> &mut Self {
        self.objective = Some((Direction::Max, c));
        self
    }

    pub fn minimize(&mut self, c: RVec) -> &mut Self {
        self.objective = Some((Direction::Min, c));
        self
    }

    fn validate(&self) -> Result<()> {
        if self.nonneg.len() != self.num_vars {
            return Err(Error::input("nonneg flags length differs from num_vars"));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != self.num_vars {
                return Err(Error::input(format!(
                    "row {i} has {} coefficients, program has {} variables",
                    row.coeffs.len(),
                    self.num_vars
                )));
            }
        }
        if let Some((_, c)) = &self.objective {
            if c.len() != self.num_vars {
                return Err(Error::input("objective dimension differs from num_vars"));
            }
        }
        Ok(())
    }

    /// Exact feasibility of a point, bounds included.
    pub fn is_feasible(&self, x: &[Rational]) -> bool {
        x.len() == self.num_vars
            && self
                .nonneg
                .iter()
                .zip(x)
                .all(|(nn, v)| !nn || !v.is_negative())
            && self.rows.iter().all(|row| {
                let lhs = dot(&row.coeffs, x);
                match row.sense {
                    Sense::Le => lhs <= row.rhs,
                    Sense::Eq => lhs == row.rhs,
                }
            })
    }

    /// Checks a Farkas certificate against this program in exact arithmetic.
    pub fn verify_farkas(&self, y: &[Rational]) -> bool {
        if y.len() != self.rows.len() {
            return false;
        }
        let mut combined = vec![Rational::zero(); self.num_vars];
        let mut rhs = Rational::zero();
        for (row, yi) in self.rows.iter().zip(y) {
            if row.sense == Sense::Le && yi.is_negative() {
                return false;
            }
            for (c, a) in combined.iter_mut().zip(&row.coeffs) {
                *c += yi * a;
            }
            rhs += yi * &row.rhs;
        }
        let coeffs_ok = combined
            .iter()
            .zip(&self.nonneg)
            .all(|(c, nn)| if *nn { !c.is_negative() } else { c.is_zero() });
        coeffs_ok && rhs.is_negative()
    }
}

/// Solves `lp` exactly. Deterministic for a fixed input.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpResult> {
    lp.validate()?;
    let res = simplex::solve(lp);
    debug_assert!(match &res {
        LpResult::Optimal { solution, .. } => lp.is_feasible(solution),
        LpResult::Infeasible { farkas } => lp.verify_farkas(farkas),
        LpResult::Unbounded { point, .. } => lp.is_feasible(point),
    });
    Ok(res)
}

/// Maximizes a slack `t` subject to `rows(x) + t * slack_coeffs` with `x` in the
/// unit box and `t <= 1`; returns the optimal `(x, t)`.
///
/// Callers encode strict systems `a_i x < b_i` as `a_i x + t <= b_i` and
/// declare strict feasibility iff the returned `t > 0`. The box keeps the
/// program bounded for homogeneous systems.
pub fn max_slack(num_vars: usize, strict: &[(RVec, Rational)], equal: &[(RVec, Rational)]) -> Result<Option<(RVec, Rational)>> {
    let n = num_vars + 1;
    let mut lp = LinearProgram::new(n);
    for (a, b) in strict {
        crate::num::check_dim("strict row", a.len(), num_vars)?;
        let mut row = a.clone();
        row.push(crate::num::one());
        lp.add_le(row, b.clone());
    }
    for (a, b) in equal {
        crate::num::check_dim("equality row", a.len(), num_vars)?;
        let mut row = a.clone();
        row.push(Rational::zero());
        lp.add_eq(row, b.clone());
    }
    for k in 0..n {
        let e = crate::num::unit(n, k);
        lp.add_le(e.clone(), crate::num::one());
        if k < num_vars {
            lp.add_ge(e, -crate::num::one());
        }
    }
    lp.maximize(crate::num::unit(n, num_vars));
    match solve_lp(&lp)? {
        LpResult::Optimal { mut solution, .. } => {
            let t = solution.pop().expect("slack variable");
            Ok(Some((solution, t)))
        }
        LpResult::Infeasible { .. } => Ok(None),
        LpResult::Unbounded { .. } => unreachable!("slack program is bounded"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{frac, int, rvec};

    #[test]
    fn single_bound_maximum() {
        let mut lp = LinearProgram::new(1);
        lp.add_le(rvec(&[1]), int(3)).maximize(rvec(&[1]));
        match solve_lp(&lp).unwrap() {
            LpResult::Optimal { solution, value } => {
                assert_eq!(solution, rvec(&[3]));
                assert_eq!(value, int(3));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn contradictory_bounds_give_unit_certificate() {
        let mut lp = LinearProgram::new(1);
        lp.add_ge(rvec(&[1]), int(1)).add_le(rvec(&[1]), int(0));
        match solve_lp(&lp).unwrap() {
            LpResult::Infeasible { farkas } => {
                assert_eq!(farkas, rvec(&[1, 1]));
                assert!(lp.verify_farkas(&farkas));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LinearProgram::new(1);
        lp.add_ge(rvec(&[1]), int(0)).maximize(rvec(&[1]));
        match solve_lp(&lp).unwrap() {
            LpResult::Unbounded { point, ray } => {
                assert!(lp.is_feasible(&point));
                assert!(ray[0] > int(0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_row_rejected() {
        let mut lp = LinearProgram::new(2);
        lp.add_le(rvec(&[1]), int(0));
        assert!(matches!(solve_lp(&lp), Err(Error::Input(_))));
    }

    #[test]
    fn equality_and_nonneg_mix() {
        // min x + y s.t. x + 2y = 4, x - y <= 1, x, y >= 0  ->  (2, 1)? no: minimize
        // x + y on the segment x + 2y = 4 gives y = 2, x = 0 with value 2.
        let mut lp = LinearProgram::new(2);
        lp.add_eq(rvec(&[1, 2]), int(4))
            .add_le(rvec(&[1, -1]), int(1))
            .all_nonneg()
            .minimize(rvec(&[1, 1]));
        let res = solve_lp(&lp).unwrap();
        assert_eq!(res.solution().unwrap(), &rvec(&[0, 2]));
        assert_eq!(res.value().unwrap(), &int(2));
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's classic cycling example under the textbook rule.
        let mut lp = LinearProgram::new(4);
        lp.add_le(vec![frac(1, 4), int(-60), frac(-1, 25), int(9)], int(0))
            .add_le(vec![frac(1, 2), int(-90), frac(-1, 50), int(3)], int(0))
            .add_le(rvec(&[0, 0, 1, 0]), int(1))
            .all_nonneg()
            .maximize(vec![frac(3, 4), int(-150), frac(1, 50), int(-6)]);
        let res = solve_lp(&lp).unwrap();
        assert_eq!(res.value().unwrap(), &frac(1, 20));
    }

    #[test]
    fn slack_detects_strict_feasibility() {
        // y1 < 0, y2 < 0 has slack 1 at y = (-1, -1) inside the unit box.
        let (y, t) = max_slack(2, &[(rvec(&[1, 0]), int(0)), (rvec(&[0, 1]), int(0))], &[])
            .unwrap()
            .unwrap();
        assert_eq!(t, int(1));
        assert_eq!(y, rvec(&[-1, -1]));
        // y1 < 0 and -y1 < 0 cannot both hold.
        let (_, t) = max_slack(1, &[(rvec(&[1]), int(0)), (rvec(&[-1]), int(0))], &[])
            .unwrap()
            .unwrap();
        assert_eq!(t, int(0));
    }
}
