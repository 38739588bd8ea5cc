//! Clarke generalized gradients of max/min-of-smooth expressions and the
//! Lipschitz Fritz-John rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certificate::{Certificate, Mode, MultiplierSystem, Status};
use crate::error::{Error, Result};
use crate::expr::{eval, gradient, Expr, Value};
use crate::geometry::VPolytope;
use crate::num::{add, check_dim, int, neg, norm_inf, pow2_neg, scale, to_f64, unit, RVec, Rational};
use crate::program::{active_indices, Program};

const FRAGMENT: &str = "not in Clarke fragment";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exactness {
    /// The set equals the generalized gradient.
    RegularEquality,
    /// The set contains the generalized gradient.
    InclusionOverapprox,
}

impl Exactness {
    pub fn as_str(self) -> &'static str {
        match self {
            Exactness::RegularEquality => "regular_equality",
            Exactness::InclusionOverapprox => "inclusion_overapprox",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClarkeGradient {
    pub set: VPolytope,
    pub exactness: Exactness,
}

fn reject(reason: impl Into<String>) -> Error {
    Error::Fragment {
        fragment: FRAGMENT,
        reason: reason.into(),
    }
}

fn exact_gradient(e: &Expr, x: &[Rational]) -> Result<RVec> {
    gradient(e, x)?
        .into_iter()
        .map(|v| match v {
            Value::Exact(r) => Ok(r),
            Value::Approx(_) => Err(reject("gradient is only known approximately (exp branch)")),
        })
        .collect()
}

fn exact_value(e: &Expr, x: &[Rational]) -> Result<Rational> {
    match eval(e, x)? {
        Value::Exact(r) => Ok(r),
        Value::Approx(_) => Err(reject("value is only known approximately (exp branch)")),
    }
}

/// `∂°f(x)` for smooth terms, finite max/min of smooth branches, abs of a
/// smooth term, scalar multiples and sums.
pub fn clarke_subdifferential(e: &Expr, x: &[Rational]) -> Result<ClarkeGradient> {
    e.check_dim(x.len())?;
    clarke(e, x)
}

fn clarke(e: &Expr, x: &[Rational]) -> Result<ClarkeGradient> {
    if e.is_smooth() {
        return Ok(ClarkeGradient {
            set: VPolytope::singleton(exact_gradient(e, x)?),
            exactness: Exactness::RegularEquality,
        });
    }
    match e {
        Expr::Max(branches) | Expr::Min(branches) => {
            let max = matches!(e, Expr::Max(_));
            if let Some(i) = branches.iter().position(|b| !b.is_smooth()) {
                return Err(reject(format!("max/min branch {i} is not smooth")));
            }
            let values: Vec<Rational> = branches.iter().map(|b| exact_value(b, x)).collect::<Result<_>>()?;
            let best = if max { values.iter().max() } else { values.iter().min() }
                .ok_or_else(|| Error::input("max/min of no arguments"))?
                .clone();
            let grads: Vec<RVec> = branches
                .iter()
                .zip(&values)
                .filter(|(_, v)| **v == best)
                .map(|(b, _)| exact_gradient(b, x))
                .collect::<Result<_>>()?;
            Ok(ClarkeGradient {
                set: VPolytope::new(grads)?,
                exactness: Exactness::RegularEquality,
            })
        }
        Expr::Abs(a) => {
            let rewritten = Expr::Max(vec![(**a).clone(), Expr::neg((**a).clone())]);
            clarke(&rewritten, x)
        }
        Expr::Scale(c, a) => {
            let inner = clarke(a, x)?;
            Ok(ClarkeGradient {
                set: inner.set.scale(c),
                exactness: inner.exactness,
            })
        }
        Expr::Sum(terms) => {
            let parts: Vec<ClarkeGradient> = terms.iter().map(|t| clarke(t, x)).collect::<Result<_>>()?;
            let mut set = VPolytope::origin(x.len());
            for p in &parts {
                set = set.minkowski_sum(&p.set)?;
            }
            // Adding a smooth term shifts the set exactly; two or more
            // nonsmooth terms only give an inclusion.
            let nonsmooth = terms.iter().filter(|t| !t.is_smooth()).count();
            let all_exact = parts.iter().all(|p| p.exactness == Exactness::RegularEquality);
            let exactness = if nonsmooth <= 1 && all_exact {
                Exactness::RegularEquality
            } else {
                Exactness::InclusionOverapprox
            };
            Ok(ClarkeGradient { set, exactness })
        }
        Expr::Piecewise { .. } => Err(reject("piecewise node (use the numeric probe instead)")),
        _ => Err(reject("nonsmooth node outside max/min/abs/sum/scale")),
    }
}

/// `f°(x; d)`: the support function of the generalized gradient.
pub fn clarke_directional(g: &ClarkeGradient, d: &[Rational]) -> Result<Rational> {
    g.set.support_value(d)
}

/// Sampled `limsup (f(y + t v) - f(y)) / t` over `y = x + t u`, `t = 2^-k`,
/// `k = 8..=24`. Returns the maximum quotient at the finest scale and the
/// spread of the per-scale maxima over the last 8 scales.
pub fn fo_numeric(e: &Expr, x: &[Rational], v: &[Rational]) -> Result<(f64, f64)> {
    e.check_dim(x.len())?;
    check_dim("direction", v.len(), x.len())?;
    let n = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0xc1a4e);
    let mut offsets: Vec<RVec> = vec![vec![int(0); n]];
    for i in 0..n {
        offsets.push(unit(n, i));
        offsets.push(neg(&unit(n, i)));
    }
    let vn = norm_inf(v);
    if vn != int(0) {
        let vh = scale(&vn.recip(), v);
        offsets.push(neg(&vh));
        offsets.push(vh);
    }
    while offsets.len() < 64 {
        let u: RVec = (0..n).map(|_| Rational::new(rng.gen_range(-64..=64).into(), 64.into())).collect();
        offsets.push(u);
    }
    let mut maxima = Vec::new();
    for k in 8..=24u32 {
        let t = pow2_neg(k);
        let tv = scale(&t, v);
        let mut best = f64::NEG_INFINITY;
        for u in &offsets {
            let y = add(x, &scale(&t, u));
            let fy = eval(e, &y)?;
            let fyt = eval(e, &add(&y, &tv))?;
            let q = match fyt.sub(&fy) {
                Value::Exact(d) => to_f64(&(d / &t)),
                Value::Approx(d) => d / to_f64(&t),
            };
            best = best.max(q);
        }
        maxima.push(best);
    }
    let tail = &maxima[maxima.len() - 8..];
    let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((*maxima.last().unwrap(), hi - lo))
}

/// Fritz-John multipliers over generalized gradients. A failure computed
/// from an over-approximated set refutes nothing and is reported as
/// inconclusive.
pub fn fritz_john_lipschitz(p: &Program, x: &[Rational]) -> Result<Certificate> {
    let active = p.active_set(x)?;
    let df = clarke_subdifferential(&p.objective, x)?;
    let dg: Vec<(usize, ClarkeGradient)> = active_indices(&active)
        .into_iter()
        .map(|i| Ok((i, clarke_subdifferential(&p.inequalities[i], x)?)))
        .collect::<Result<_>>()?;
    let dh: Vec<ClarkeGradient> = p
        .equalities
        .iter()
        .map(|h| clarke_subdifferential(h, x))
        .collect::<Result<_>>()?;
    let sys = MultiplierSystem {
        objective: &df.set,
        inequalities: dg.iter().map(|(i, g)| (*i, &g.set)).collect(),
        num_inequalities: p.inequalities.len(),
        equalities: dh.iter().map(|g| &g.set).collect(),
    };
    let mut cert = sys.solve_with_patterns(Mode::FritzJohn)?;
    let overapprox = std::iter::once(&df)
        .chain(dg.iter().map(|(_, g)| g))
        .chain(&dh)
        .any(|g| g.exactness == Exactness::InclusionOverapprox);
    if overapprox {
        cert.notes.push("some generalized gradients are over-approximated by the sum rule".to_string());
        if cert.status == Status::Fails {
            cert.status = Status::Inconclusive;
        }
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{frac, rvec};

    fn x() -> Expr {
        Expr::Var(0)
    }

    fn interval(a: i64, b: i64) -> VPolytope {
        VPolytope::new(vec![rvec(&[a]), rvec(&[b])]).unwrap()
    }

    #[test]
    fn abs_and_negated_abs() {
        let g = clarke_subdifferential(&Expr::Max(vec![x(), Expr::neg(x())]), &[int(0)]).unwrap();
        assert!(g.set.same_set(&interval(-1, 1)).unwrap());
        assert_eq!(g.exactness, Exactness::RegularEquality);
        let g = clarke_subdifferential(&Expr::neg(Expr::abs(x())), &[int(0)]).unwrap();
        assert!(g.set.same_set(&interval(-1, 1)).unwrap());
    }

    #[test]
    fn max_of_square_and_negation() {
        let e = Expr::Max(vec![Expr::pow(x(), 2), Expr::neg(x())]);
        let g = clarke_subdifferential(&e, &[int(0)]).unwrap();
        assert!(g.set.same_set(&interval(-1, 0)).unwrap());
    }

    #[test]
    fn directional_support() {
        let g = |s: VPolytope| ClarkeGradient { set: s, exactness: Exactness::RegularEquality };
        assert_eq!(clarke_directional(&g(interval(-1, 1)), &[int(1)]).unwrap(), int(1));
        assert_eq!(clarke_directional(&g(interval(0, 0)), &[int(5)]).unwrap(), int(0));
        assert_eq!(clarke_directional(&g(interval(-1, 0)), &[int(-1)]).unwrap(), int(1));
    }

    #[test]
    fn sampled_generalized_derivative() {
        let (est, _) = fo_numeric(&Expr::abs(x()), &[int(0)], &[int(1)]).unwrap();
        assert_eq!(est, 1.0);
        let (est, _) = fo_numeric(&Expr::neg(Expr::abs(x())), &[int(0)], &[int(1)]).unwrap();
        assert_eq!(est, 1.0);
        let (est, _) = fo_numeric(&Expr::pow(x(), 2), &[int(1)], &[int(1)]).unwrap();
        assert!((est - 2.0).abs() < 1e-4, "{est}");
    }

    #[test]
    fn sum_of_two_kinks_is_overapprox() {
        let e = Expr::Sum(vec![Expr::abs(x()), Expr::neg(Expr::abs(x()))]);
        let g = clarke_subdifferential(&e, &[int(0)]).unwrap();
        assert_eq!(g.exactness, Exactness::InclusionOverapprox);
        assert!(g.set.same_set(&interval(-2, 2)).unwrap());
        let shifted = Expr::Sum(vec![Expr::abs(x()), x()]);
        assert_eq!(clarke_subdifferential(&shifted, &[int(0)]).unwrap().exactness, Exactness::RegularEquality);
    }

    #[test]
    fn fj_examples() {
        let p = Program::new(1, Expr::neg(Expr::abs(x())), vec![Expr::affine(&[int(1)], int(-1))], vec![]).unwrap();
        let c = fritz_john_lipschitz(&p, &[int(1)]).unwrap();
        assert!(c.holds() && c.verify_witness());
        assert_eq!((c.lambda0.clone().unwrap(), c.lambdas[0].clone()), (frac(1, 2), frac(1, 2)));

        let p = Program::unconstrained(1, Expr::abs(x())).unwrap();
        let c = fritz_john_lipschitz(&p, &[int(0)]).unwrap();
        assert_eq!(c.lambda0, Some(int(1)));

        let p = Program::new(1, x(), vec![Expr::abs(x())], vec![]).unwrap();
        let c = fritz_john_lipschitz(&p, &[int(0)]).unwrap();
        assert!(c.holds() && c.verify_witness());
        assert_eq!(c.lambda0, Some(int(0)));
    }

    #[test]
    fn overapprox_failure_is_inconclusive() {
        // Two structurally nonsmooth summands: the sum rule only gives an inclusion.
        let e = Expr::Sum(vec![Expr::scale(int(5), x()), Expr::abs(x()), Expr::neg(Expr::abs(x()))]);
        let p = Program::unconstrained(1, e).unwrap();
        let c = fritz_john_lipschitz(&p, &[int(1)]).unwrap();
        assert_eq!(c.status, Status::Inconclusive);
    }

    #[test]
    fn piecewise_rejected() {
        let e = Expr::Piecewise { pieces: vec![], differentiable_at: vec![] };
        assert!(matches!(clarke_subdifferential(&e, &[int(0)]), Err(Error::Fragment { .. })));
    }
}
