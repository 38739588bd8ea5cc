//! Quasidifferentials `[∂̲f, ∂̄f]` as pairs of polytopes, their calculus, and
//! the optimality checks built on them.

use num_traits::{Signed, Zero};

use crate::certificate::{Certificate, Mode, MultiplierSystem, Status};
use crate::error::{Error, Result};
use crate::expr::{eval, gradient, Expr, Value};
use crate::geometry::VPolytope;
use crate::lp::{solve_lp, LinearProgram, LpResult};
use crate::num::{check_dim, int, neg, one, unit, zeros, RVec, Rational};
use crate::program::{active_indices, Program};

const FRAGMENT: &str = "not in quasidifferential fragment";
const MAX_TUPLES: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiDifferential {
    /// Subdifferential `∂̲f(x)`.
    pub sub: VPolytope,
    /// Superdifferential `∂̄f(x)`.
    pub sup: VPolytope,
}

impl QuasiDifferential {
    pub fn new(sub: VPolytope, sup: VPolytope) -> Result<Self> {
        check_dim("superdifferential", sup.dim(), sub.dim())?;
        Ok(QuasiDifferential { sub, sup })
    }

    /// `[{g}, {0}]` for a differentiable function with gradient `g`.
    pub fn smooth(g: RVec) -> Self {
        let n = g.len();
        QuasiDifferential {
            sub: VPolytope::singleton(g),
            sup: VPolytope::origin(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.sub.dim()
    }

    /// Equality as set pairs (mutual containment on each side).
    pub fn same_pair(&self, other: &QuasiDifferential) -> Result<bool> {
        Ok(self.sub.same_set(&other.sub)? && self.sup.same_set(&other.sup)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QdOp {
    Add,
    Scale(Rational),
    /// `D(f1 f2) = f1 Df2 + f2 Df1` with the two values at the point.
    Product(Rational, Rational),
    /// `D(1/f1) = -(1/f1^2) Df1` with the value at the point.
    Reciprocal(Rational),
}

pub fn qd_combine(op: &QdOp, args: &[&QuasiDifferential]) -> Result<QuasiDifferential> {
    let arity = |k: usize| -> Result<()> {
        if args.len() == k {
            Ok(())
        } else {
            Err(Error::input(format!("{op:?} takes {k} quasidifferentials, got {}", args.len())))
        }
    };
    match op {
        QdOp::Add => {
            let first = args.first().ok_or_else(|| Error::input("sum of no quasidifferentials"))?;
            let mut acc = (*first).clone();
            for q in &args[1..] {
                acc = QuasiDifferential {
                    sub: acc.sub.minkowski_sum(&q.sub)?,
                    sup: acc.sup.minkowski_sum(&q.sup)?,
                };
            }
            Ok(acc)
        }
        QdOp::Scale(c) => {
            arity(1)?;
            Ok(scale_qd(c, args[0]))
        }
        QdOp::Product(f1, f2) => {
            arity(2)?;
            let a = scale_qd(f1, args[1]);
            let b = scale_qd(f2, args[0]);
            qd_combine(&QdOp::Add, &[&a, &b])
        }
        QdOp::Reciprocal(f1) => {
            arity(1)?;
            if f1.is_zero() {
                return Err(Error::precondition("reciprocal rule at a zero of the function"));
            }
            let c = -(f1 * f1).recip();
            Ok(scale_qd(&c, args[0]))
        }
    }
}

fn scale_qd(c: &Rational, q: &QuasiDifferential) -> QuasiDifferential {
    if c.is_negative() {
        QuasiDifferential {
            sub: q.sup.scale(c),
            sup: q.sub.scale(c),
        }
    } else {
        QuasiDifferential {
            sub: q.sub.scale(c),
            sup: q.sup.scale(c),
        }
    }
}

fn reject(reason: impl Into<String>) -> Error {
    Error::Fragment {
        fragment: FRAGMENT,
        reason: reason.into(),
    }
}

fn exact_value(e: &Expr, x: &[Rational]) -> Result<Rational> {
    match eval(e, x)? {
        Value::Exact(r) => Ok(r),
        Value::Approx(_) => Err(reject("approximate value (exp on the path) cannot feed the calculus rules")),
    }
}

/// Quasidifferential of `e` at `x` by the sum, scale, product, reciprocal
/// and max rules; min and abs are rewritten through max.
pub fn qd_of_expr(e: &Expr, x: &[Rational]) -> Result<QuasiDifferential> {
    e.check_dim(x.len())?;
    qd(e, x)
}

fn qd(e: &Expr, x: &[Rational]) -> Result<QuasiDifferential> {
    if e.is_smooth() {
        if e.contains_exp() {
            return Err(reject("exp node: gradients are only approximate"));
        }
        let g = gradient(e, x)?
            .into_iter()
            .map(|v| v.exact().cloned().expect("no exp on the path"))
            .collect();
        return Ok(QuasiDifferential::smooth(g));
    }
    match e {
        Expr::Sum(terms) => {
            let parts: Vec<QuasiDifferential> = terms.iter().map(|t| qd(t, x)).collect::<Result<_>>()?;
            qd_combine(&QdOp::Add, &parts.iter().collect::<Vec<_>>())
        }
        Expr::Scale(c, a) => qd_combine(&QdOp::Scale(c.clone()), &[&qd(a, x)?]),
        Expr::Product(a, b) => {
            let (fa, fb) = (exact_value(a, x)?, exact_value(b, x)?);
            qd_combine(&QdOp::Product(fa, fb), &[&qd(a, x)?, &qd(b, x)?])
        }
        Expr::Recip(a) => {
            let fa = exact_value(a, x)?;
            if fa.is_zero() {
                return Err(Error::precondition("reciprocal of a function vanishing at the point"));
            }
            qd_combine(&QdOp::Reciprocal(fa), &[&qd(a, x)?])
        }
        Expr::Power(a, k) => {
            // Chain rule with the smooth outer map t -> t^k.
            let fa = exact_value(a, x)?;
            let c = Rational::from_integer((*k).into()) * num_traits::pow(fa, (*k - 1) as usize);
            qd_combine(&QdOp::Scale(c), &[&qd(a, x)?])
        }
        Expr::Max(args) => max_rule(args, x),
        Expr::Min(args) => {
            let negated: Vec<Expr> = args.iter().cloned().map(Expr::neg).collect();
            Ok(scale_qd(&int(-1), &max_rule(&negated, x)?))
        }
        Expr::Abs(a) => max_rule(&[(**a).clone(), Expr::neg((**a).clone())], x),
        Expr::Exp(_) => Err(reject("exp of a nonsmooth argument")),
        Expr::Piecewise { .. } => Err(reject("piecewise node")),
        Expr::Const(_) | Expr::Var(_) => unreachable!("smooth"),
    }
}

fn max_rule(args: &[Expr], x: &[Rational]) -> Result<QuasiDifferential> {
    let values: Vec<Rational> = args.iter().map(|a| exact_value(a, x)).collect::<Result<_>>()?;
    let top = values.iter().max().ok_or_else(|| Error::input("max of no arguments"))?.clone();
    let active: Vec<QuasiDifferential> = args
        .iter()
        .zip(&values)
        .filter(|(_, v)| **v == top)
        .map(|(a, _)| qd(a, x))
        .collect::<Result<_>>()?;
    combine_max(&active)
}

/// `∂̲ = co ∪_k (∂̲f_k - Σ_{i≠k} ∂̄f_i)`, `∂̄ = Σ ∂̄f_i` over the given pairs.
fn combine_max(active: &[QuasiDifferential]) -> Result<QuasiDifferential> {
    let n = active[0].dim();
    let mut sup = VPolytope::origin(n);
    for q in active {
        sup = sup.minkowski_sum(&q.sup)?;
    }
    let mut sub: Option<VPolytope> = None;
    for (k, qk) in active.iter().enumerate() {
        let mut part = qk.sub.clone();
        for (i, qi) in active.iter().enumerate() {
            if i != k {
                part = part.minkowski_sum(&qi.sup.negate())?;
            }
        }
        sub = Some(match sub {
            None => part,
            Some(acc) => acc.hull_union(&part)?,
        });
    }
    Ok(QuasiDifferential {
        sub: sub.expect("at least one active branch"),
        sup,
    })
}

/// `f'(x; d) = max_{∂̲} <v, d> + min_{∂̄} <w, d>`.
pub fn qd_directional(q: &QuasiDifferential, d: &[Rational]) -> Result<Rational> {
    Ok(q.sub.support_value(d)? + q.sup.min_value(d)?)
}

/// `-∂̄f(x) ⊆ ∂̲f(x)`. On failure returns the offending vertex of `-∂̄f(x)`.
pub fn qd_unconstrained_check(q: &QuasiDifferential) -> Result<(bool, Option<RVec>)> {
    let c = q.sub.contains(&q.sup.negate())?;
    Ok((c.holds, c.witness.map(|w| w.0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct QdInclusion {
    pub holds: bool,
    pub lhs: VPolytope,
    pub rhs: VPolytope,
    /// Vertex of the left side outside the right side.
    pub witness: Option<RVec>,
    pub active: Vec<usize>,
}

fn reject_equalities(p: &Program) -> Result<()> {
    if p.equalities.is_empty() {
        Ok(())
    } else {
        Err(reject("equality-constrained programs are not supported"))
    }
}

/// The functions `f_0` and active `f_i` with their quasidifferentials.
fn active_qds(p: &Program, x: &[Rational]) -> Result<(Vec<usize>, Vec<QuasiDifferential>)> {
    reject_equalities(p)?;
    let active = active_indices(&p.active_set(x)?);
    let mut qds = vec![qd_of_expr(&p.objective, x)?];
    for &i in &active {
        qds.push(qd_of_expr(&p.inequalities[i], x)?);
    }
    Ok((active, qds))
}

/// `-Σ ∂̄f_i ⊆ co ∪_i (∂̲f_i - Σ_{j≠i} ∂̄f_j)` over `{0} ∪ I(x)`.
pub fn qd_constrained_check(p: &Program, x: &[Rational]) -> Result<QdInclusion> {
    let (active, qds) = active_qds(p, x)?;
    let combined = combine_max(&qds)?;
    let lhs = combined.sup.negate();
    let c = combined.sub.contains(&lhs)?;
    Ok(QdInclusion {
        holds: c.holds,
        lhs,
        rhs: combined.sub,
        witness: c.witness.map(|w| w.0),
        active,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakenedFj {
    pub status: Status,
    /// One certificate per enumerated tuple `(w_0, w_i...)` of superdifferential vertices.
    pub tuples: Vec<(Vec<RVec>, Certificate)>,
    pub active: Vec<usize>,
    pub label: &'static str,
}

impl WeakenedFj {
    pub fn failing(&self) -> Option<&(Vec<RVec>, Certificate)> {
        self.tuples.iter().find(|(_, c)| !c.holds())
    }
}

/// For every tuple of superdifferential vertices `w_i`, multipliers
/// `λ >= 0`, `Σλ = 1`, with `0 ∈ Σ λ_i (∂̲f_i + w_i)`. A failing tuple refutes
/// the rule; success on all vertex tuples is evidence only.
pub fn qd_weakened_fj(p: &Program, x: &[Rational]) -> Result<WeakenedFj> {
    let (active, qds) = active_qds(p, x)?;
    let choices: Vec<&[RVec]> = qds.iter().map(|q| q.sup.vertices()).collect();
    let total: usize = choices.iter().map(|c| c.len()).try_fold(1usize, |a, b| a.checked_mul(b)).unwrap_or(usize::MAX);
    if total > MAX_TUPLES {
        return Err(Error::Refused(format!(
            "{total} superdifferential vertex tuples exceed the bound of {MAX_TUPLES}"
        )));
    }
    let mut tuples = Vec::with_capacity(total);
    let mut counter = vec![0usize; choices.len()];
    loop {
        let w: Vec<RVec> = counter.iter().zip(&choices).map(|(&c, ch)| ch[c].clone()).collect();
        let shifted: Vec<VPolytope> = qds
            .iter()
            .zip(&w)
            .map(|(q, wi)| q.sub.translate(wi))
            .collect::<Result<_>>()?;
        let sys = MultiplierSystem {
            objective: &shifted[0],
            inequalities: active.iter().copied().zip(shifted[1..].iter()).collect(),
            num_inequalities: p.inequalities.len(),
            equalities: Vec::new(),
        };
        tuples.push((w, sys.solve_with_patterns(Mode::FritzJohn)?));
        // Odometer over the vertex choices.
        let mut pos = 0;
        loop {
            if pos == counter.len() {
                let status = if tuples.iter().all(|(_, c)| c.holds()) {
                    Status::Holds
                } else {
                    Status::Fails
                };
                return Ok(WeakenedFj {
                    status,
                    tuples,
                    active,
                    label: "verified on finite witness set",
                });
            }
            counter[pos] += 1;
            if counter[pos] < choices[pos].len() {
                break;
            }
            counter[pos] = 0;
            pos += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityRc {
    pub holds: bool,
    pub r_hat: RVec,
    /// Optimal slack; the condition holds iff it is positive.
    pub t: Rational,
    /// When the condition holds: does every tuple admitting multipliers also
    /// admit one with `λ0 > 0`?
    pub lambda0_nonzero: Option<bool>,
}

/// Searches `r̂` in the unit box with `max_{∂̲f_i} <z, r̂> + max_{∂̄f_i} <z, r̂> < 0`
/// for every active `i` by maximizing a common slack `t <= 1`.
pub fn qd_regularity_rc(p: &Program, x: &[Rational]) -> Result<RegularityRc> {
    let (active, qds) = active_qds(p, x)?;
    let n = p.dim;
    let k = active.len();
    // Columns: r̂ (n), a_i (k), b_i (k), t.
    let cols = n + 2 * k + 1;
    let t_col = cols - 1;
    let mut lp = LinearProgram::new(cols);
    let row = |r: &[Rational], extra: &[(usize, Rational)]| {
        let mut v = zeros(cols);
        v[..n].clone_from_slice(r);
        for (c, val) in extra {
            v[*c] = val.clone();
        }
        v
    };
    for (pos, q) in qds[1..].iter().enumerate() {
        let (a, b) = (n + pos, n + k + pos);
        for v in q.sub.vertices() {
            lp.add_le(row(v, &[(a, -one())]), Rational::zero());
        }
        for w in q.sup.vertices() {
            lp.add_le(row(w, &[(b, -one())]), Rational::zero());
        }
        lp.add_le(row(&zeros(n), &[(a, one()), (b, one()), (t_col, one())]), Rational::zero());
    }
    for c in 0..n {
        lp.add_le(unit(cols, c), one());
        lp.add_le(neg(&unit(cols, c)), one());
    }
    lp.add_le(unit(cols, t_col), one());
    lp.maximize(unit(cols, t_col));
    let (r_hat, t) = match solve_lp(&lp)? {
        LpResult::Optimal { solution, value } => (solution[..n].to_vec(), value),
        other => unreachable!("regularity program is feasible and bounded: {other:?}"),
    };
    let holds = t.is_positive();
    let lambda0_nonzero = if holds {
        let fj = qd_weakened_fj(p, x)?;
        Some(
            fj.tuples
                .iter()
                .filter(|(_, c)| c.holds())
                .all(|(_, c)| c.lambda0_max.as_ref().is_some_and(|v| v.is_positive())),
        )
    } else {
        None
    };
    Ok(RegularityRc {
        holds,
        r_hat,
        t,
        lambda0_nonzero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{frac, rvec};

    fn x() -> Expr {
        Expr::Var(0)
    }

    fn pt(v: i64) -> VPolytope {
        VPolytope::singleton(rvec(&[v]))
    }

    fn seg(a: i64, b: i64) -> VPolytope {
        VPolytope::new(vec![rvec(&[a]), rvec(&[b])]).unwrap()
    }

    #[test]
    fn combine_rules() {
        let q = QuasiDifferential::new(pt(1), pt(0)).unwrap();
        let s = qd_combine(&QdOp::Scale(int(-1)), &[&q]).unwrap();
        assert_eq!(s, QuasiDifferential::new(pt(0), pt(-1)).unwrap());
        let d1 = QuasiDifferential::new(pt(1), pt(0)).unwrap();
        let d2 = QuasiDifferential::new(pt(5), pt(0)).unwrap();
        let prod = qd_combine(&QdOp::Product(int(2), int(3)), &[&d1, &d2]).unwrap();
        assert_eq!(prod, QuasiDifferential::new(pt(13), pt(0)).unwrap());
        let sum = qd_combine(&QdOp::Add, &[&d1, &d2]).unwrap();
        assert_eq!(sum, QuasiDifferential::new(pt(6), pt(0)).unwrap());
        assert!(qd_combine(&QdOp::Reciprocal(int(0)), &[&d1]).is_err());
        let r = qd_combine(&QdOp::Reciprocal(int(2)), &[&d1]).unwrap();
        assert_eq!(r.sup, VPolytope::singleton(vec![frac(-1, 4)]));
    }

    #[test]
    fn expression_rules() {
        let q = qd_of_expr(&Expr::pow(x(), 2), &[int(1)]).unwrap();
        assert_eq!(q, QuasiDifferential::smooth(rvec(&[2])));
        let q = qd_of_expr(&Expr::abs(x()), &[int(0)]).unwrap();
        assert!(q.sub.same_set(&seg(-1, 1)).unwrap());
        assert_eq!(q.sup, pt(0));
        let q = qd_of_expr(&Expr::neg(Expr::abs(x())), &[int(0)]).unwrap();
        assert_eq!(q.sub, pt(0));
        assert!(q.sup.same_set(&seg(-1, 1)).unwrap());
    }

    #[test]
    fn directional_formula() {
        let q = |a: VPolytope, b: VPolytope| QuasiDifferential::new(a, b).unwrap();
        assert_eq!(qd_directional(&q(seg(-1, 1), pt(0)), &[int(1)]).unwrap(), int(1));
        assert_eq!(qd_directional(&q(pt(0), seg(-1, 1)), &[int(1)]).unwrap(), int(-1));
        assert_eq!(qd_directional(&q(pt(0), pt(0)), &[int(7)]).unwrap(), int(0));
    }

    #[test]
    fn unconstrained_inclusion() {
        let abs = qd_of_expr(&Expr::abs(x()), &[int(0)]).unwrap();
        assert!(qd_unconstrained_check(&abs).unwrap().0);
        let nabs = qd_of_expr(&Expr::neg(Expr::abs(x())), &[int(0)]).unwrap();
        let (ok, w) = qd_unconstrained_check(&nabs).unwrap();
        assert!(!ok);
        assert!(w.unwrap()[0].abs() == int(1));
        let sq = qd_of_expr(&Expr::pow(x(), 2), &[int(0)]).unwrap();
        assert!(qd_unconstrained_check(&sq).unwrap().0);
    }

    #[test]
    fn constrained_inclusion() {
        let p = Program::new(1, Expr::abs(x()), vec![Expr::affine(&[int(1)], int(-1))], vec![]).unwrap();
        assert!(qd_constrained_check(&p, &[int(0)]).unwrap().holds);

        let p = Program::new(1, x(), vec![Expr::neg(Expr::abs(x()))], vec![]).unwrap();
        let r = qd_constrained_check(&p, &[int(0)]).unwrap();
        assert!(!r.holds);
        assert!(r.lhs.same_set(&seg(-1, 1)).unwrap());
        assert!(r.rhs.same_set(&seg(0, 2)).unwrap());
        assert_eq!(r.witness, Some(rvec(&[-1])));

        let p = Program::unconstrained(1, Expr::pow(x(), 2)).unwrap();
        assert!(qd_constrained_check(&p, &[int(0)]).unwrap().holds);
    }

    #[test]
    fn weakened_fj_examples() {
        let p = Program::new(1, Expr::neg(x()), vec![x()], vec![]).unwrap();
        let r = qd_weakened_fj(&p, &[int(0)]).unwrap();
        assert_eq!(r.status, Status::Holds);
        assert_eq!(r.tuples.len(), 1);
        let c = &r.tuples[0].1;
        assert_eq!((c.lambda0.clone().unwrap(), c.lambdas[0].clone()), (frac(1, 2), frac(1, 2)));

        let p = Program::unconstrained(1, Expr::abs(x())).unwrap();
        let r = qd_weakened_fj(&p, &[int(0)]).unwrap();
        assert_eq!(r.status, Status::Holds);
        assert_eq!(r.tuples[0].1.lambda0, Some(int(1)));

        let p = Program::unconstrained(1, Expr::neg(Expr::abs(x()))).unwrap();
        let r = qd_weakened_fj(&p, &[int(0)]).unwrap();
        assert_eq!(r.status, Status::Fails);
        assert_eq!(r.tuples.len(), 2);
        assert!(r.tuples.iter().all(|(_, c)| !c.holds()));
    }

    #[test]
    fn regularity_condition() {
        let p = Program::new(1, Expr::neg(x()), vec![x()], vec![]).unwrap();
        let r = qd_regularity_rc(&p, &[int(0)]).unwrap();
        assert!(r.holds);
        assert_eq!((r.r_hat.clone(), r.t.clone()), (rvec(&[-1]), int(1)));
        assert_eq!(r.lambda0_nonzero, Some(true));

        let p = Program::new(1, Expr::neg(x()), vec![Expr::abs(x())], vec![]).unwrap();
        let r = qd_regularity_rc(&p, &[int(0)]).unwrap();
        assert!(!r.holds);
        assert_eq!(r.t, int(0));

        let p = Program::new(1, Expr::neg(x()), vec![Expr::affine(&[int(1)], int(-1))], vec![]).unwrap();
        assert!(qd_regularity_rc(&p, &[int(0)]).unwrap().holds);
    }
}
