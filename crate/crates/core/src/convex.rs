//! Subdifferentials of structurally convex expressions and the convex
//! Fritz-John rule.

use num_traits::Signed;

use crate::certificate::{Certificate, Mode, MultiplierSystem};
use crate::error::{Error, Result};
use crate::expr::{eval, Expr};
use crate::geometry::VPolytope;
use crate::lp::{hull_membership, HullMode};
use crate::num::{check_dim, dot, neg, zeros, Rational};
use crate::program::{active_indices, Program};

const FRAGMENT: &str = "not certified convex";

/// An expression built only from affine atoms, nonnegative multiples, sums,
/// finite max and abs of affine terms; convex by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexExpr {
    expr: Expr,
    dim: usize,
}

impl ConvexExpr {
    pub fn new(expr: Expr, dim: usize) -> Result<Self> {
        expr.check_dim(dim)?;
        check_fragment(&expr, dim)?;
        Ok(ConvexExpr { expr, dim })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

fn reject(reason: impl Into<String>) -> Error {
    Error::Fragment {
        fragment: FRAGMENT,
        reason: reason.into(),
    }
}

fn check_fragment(e: &Expr, n: usize) -> Result<()> {
    if e.as_affine(n).is_some() {
        return Ok(());
    }
    match e {
        Expr::Scale(c, a) if !c.is_negative() => check_fragment(a, n),
        Expr::Scale(..) => Err(reject("negative multiple of a non-affine term")),
        Expr::Sum(terms) | Expr::Max(terms) => terms.iter().try_for_each(|t| check_fragment(t, n)),
        Expr::Abs(a) if a.as_affine(n).is_some() => Ok(()),
        Expr::Abs(_) => Err(reject("abs of a non-affine term")),
        Expr::Min(_) => Err(reject("min node")),
        Expr::Product(..) | Expr::Power(..) => Err(reject("nonlinear product or power")),
        Expr::Exp(_) => Err(reject("exp node")),
        Expr::Recip(_) => Err(reject("reciprocal node")),
        Expr::Piecewise { .. } => Err(reject("piecewise node")),
        Expr::Const(_) | Expr::Var(_) => unreachable!("affine"),
    }
}

/// Exact `∂f(x)` by the sum (Minkowski), scaling and max (hull of active
/// branches) rules.
pub fn convex_subdifferential(e: &ConvexExpr, x: &[Rational]) -> Result<VPolytope> {
    check_dim("point", x.len(), e.dim)?;
    subdiff(&e.expr, x, e.dim)
}

fn subdiff(e: &Expr, x: &[Rational], n: usize) -> Result<VPolytope> {
    if let Some((a, _)) = e.as_affine(n) {
        return Ok(VPolytope::singleton(a));
    }
    match e {
        Expr::Scale(c, a) => Ok(subdiff(a, x, n)?.scale(c)),
        Expr::Sum(terms) => terms
            .iter()
            .try_fold(VPolytope::origin(n), |acc, t| acc.minkowski_sum(&subdiff(t, x, n)?)),
        Expr::Max(terms) => {
            let values: Vec<Rational> = terms.iter().map(|t| exact_value(t, x)).collect::<Result<_>>()?;
            let top = values.iter().max().expect("max has arguments").clone();
            let mut out: Option<VPolytope> = None;
            for (t, v) in terms.iter().zip(&values) {
                if *v == top {
                    let s = subdiff(t, x, n)?;
                    out = Some(match out {
                        None => s,
                        Some(acc) => acc.hull_union(&s)?,
                    });
                }
            }
            Ok(out.expect("some branch attains the max"))
        }
        Expr::Abs(a) => {
            let (g, b) = a.as_affine(n).expect("fragment checked");
            let v = dot(&g, x) + b;
            if v.is_positive() {
                Ok(VPolytope::singleton(g))
            } else if v.is_negative() {
                Ok(VPolytope::singleton(neg(&g)))
            } else {
                VPolytope::new(vec![g.clone(), neg(&g)])
            }
        }
        _ => Err(reject("unexpected node")),
    }
}

fn exact_value(e: &Expr, x: &[Rational]) -> Result<Rational> {
    eval(e, x)?
        .exact()
        .cloned()
        .ok_or_else(|| reject("approximate value in convex fragment"))
}

/// `0 ∈ ∂f(x)`, i.e. `x` is a global minimizer.
pub fn convex_stationarity(e: &ConvexExpr, x: &[Rational]) -> Result<bool> {
    let s = convex_subdifferential(e, x)?;
    Ok(hull_membership(&zeros(e.dim), s.vertices(), HullMode::Convex)?.is_inside())
}

/// Fritz-John multipliers over exact subdifferentials at a feasible point,
/// with inactive inequalities fixed at zero.
pub fn fritz_john_convex(p: &Program, x: &[Rational]) -> Result<Certificate> {
    let wrap = |e: &Expr| ConvexExpr::new(e.clone(), p.dim);
    let f = wrap(&p.objective)?;
    let gs: Vec<ConvexExpr> = p.inequalities.iter().map(wrap).collect::<Result<_>>()?;
    let hs: Vec<ConvexExpr> = p.equalities.iter().map(wrap).collect::<Result<_>>()?;
    let active = p.active_set(x)?;
    let df = convex_subdifferential(&f, x)?;
    let idx = active_indices(&active);
    let dg: Vec<(usize, VPolytope)> = idx
        .iter()
        .map(|&i| Ok((i, convex_subdifferential(&gs[i], x)?)))
        .collect::<Result<_>>()?;
    let dh: Vec<VPolytope> = hs.iter().map(|h| convex_subdifferential(h, x)).collect::<Result<_>>()?;
    let sys = MultiplierSystem {
        objective: &df,
        inequalities: dg.iter().map(|(i, s)| (*i, s)).collect(),
        num_inequalities: p.inequalities.len(),
        equalities: dh.iter().collect(),
    };
    let mut cert = sys.solve_with_patterns(Mode::FritzJohn)?;
    if !hs.is_empty() {
        cert.notes
            .push("equality constraints are convex functions with free multipliers".to_string());
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::Status;
    use crate::num::{frac, int, rvec};

    fn x() -> Expr {
        Expr::Var(0)
    }

    fn cx(e: Expr, n: usize) -> ConvexExpr {
        ConvexExpr::new(e, n).unwrap()
    }

    #[test]
    fn abs_at_zero() {
        let s = convex_subdifferential(&cx(Expr::abs(x()), 1), &[int(0)]).unwrap();
        assert!(s.same_set(&VPolytope::new(vec![rvec(&[-1]), rvec(&[1])]).unwrap()).unwrap());
    }

    #[test]
    fn affine_everywhere() {
        let e = cx(Expr::affine(&[int(2)], int(3)), 1);
        assert_eq!(convex_subdifferential(&e, &[frac(7, 3)]).unwrap(), VPolytope::singleton(rvec(&[2])));
    }

    #[test]
    fn l1_norm_is_square() {
        let e = cx(Expr::Sum(vec![Expr::abs(Expr::Var(0)), Expr::abs(Expr::Var(1))]), 2);
        let s = convex_subdifferential(&e, &rvec(&[0, 0])).unwrap();
        let square = VPolytope::new(vec![rvec(&[1, 1]), rvec(&[1, -1]), rvec(&[-1, 1]), rvec(&[-1, -1])]).unwrap();
        assert!(s.same_set(&square).unwrap());
    }

    #[test]
    fn stationarity() {
        assert!(convex_stationarity(&cx(Expr::abs(x()), 1), &[int(0)]).unwrap());
        let shifted = cx(Expr::abs(Expr::affine(&[int(1)], int(-1))), 1);
        assert!(!convex_stationarity(&shifted, &[int(0)]).unwrap());
        assert!(convex_stationarity(&cx(Expr::Const(int(4)), 1), &[int(9)]).unwrap());
    }

    #[test]
    fn fragment_rejects_products() {
        let err = ConvexExpr::new(Expr::pow(x(), 2), 1).unwrap_err();
        assert!(matches!(err, Error::Fragment { fragment: FRAGMENT, .. }));
        assert!(ConvexExpr::new(Expr::neg(Expr::abs(x())), 1).is_err());
    }

    #[test]
    fn fj_inactive_constraint() {
        let p = Program::new(1, Expr::abs(x()), vec![Expr::affine(&[int(1)], int(-1))], vec![]).unwrap();
        let c = fritz_john_convex(&p, &[int(0)]).unwrap();
        assert!(c.holds() && c.verify_witness());
        assert_eq!(c.lambda0, Some(int(1)));
        assert_eq!(c.lambdas, vec![int(0)]);
    }

    #[test]
    fn fj_active_constraint() {
        let p = Program::new(1, x(), vec![Expr::neg(x())], vec![]).unwrap();
        let c = fritz_john_convex(&p, &[int(0)]).unwrap();
        assert_eq!(c.lambda0, Some(frac(1, 2)));
        assert_eq!(c.lambdas, vec![frac(1, 2)]);
    }

    #[test]
    fn fj_degenerate() {
        let p = Program::new(1, x(), vec![x(), Expr::neg(x())], vec![]).unwrap();
        let c = fritz_john_convex(&p, &[int(0)]).unwrap();
        assert!(c.holds() && c.verify_witness());
        assert_eq!(c.lambda0, Some(int(0)));
        assert_eq!(c.lambdas, vec![frac(1, 2), frac(1, 2)]);
    }

    #[test]
    fn fj_fails_off_minimum() {
        // min x s.t. -x - 1 <= 0 at x = 0: constraint inactive, ∂f = {1}.
        let p = Program::new(1, x(), vec![Expr::affine(&[int(-1)], int(-1))], vec![]).unwrap();
        let c = fritz_john_convex(&p, &[int(0)]).unwrap();
        assert_eq!(c.status, Status::Fails);
        assert_eq!(c.refutations[0].direction, rvec(&[-1]));
    }

    #[test]
    fn fj_infeasible_point() {
        let p = Program::new(1, x(), vec![x()], vec![]).unwrap();
        assert!(matches!(fritz_john_convex(&p, &[int(1)]), Err(Error::Precondition(_))));
    }
}
