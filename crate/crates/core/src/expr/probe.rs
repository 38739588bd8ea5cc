//! Numeric probes: difference quotients, continuity sampling and a Fréchet
//! remainder test. Everything here is evidence, never proof.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::eval::eval_unchecked;
use super::{Expr, Value};
use crate::error::{Error, Result};
use crate::num::{add, dot, fmt_vec, int, norm_inf, pow2_neg, scale, to_f64, vec_to_f64, RVec, Rational};

/// Last exponent used when an evaluation on the schedule is approximate:
/// beyond it float cancellation dominates the quotient.
const FLOAT_K_MAX: u32 = 26;

fn value_diff(a: &Value, b: &Value) -> Value {
    a.sub(b)
}

/// `(estimate, stability)` from quotients `(f(x + t d) - f(x)) / t`,
/// `t = 2^-k`, `k = 10..=40`. The estimate is the last quotient and the
/// stability the spread of the final 8.
///
/// When any evaluation is approximate the schedule stops at `k = 26`.
pub fn directional_derivative_numeric(e: &Expr, x: &[Rational], d: &[Rational]) -> Result<(f64, f64)> {
    e.check_dim(x.len())?;
    crate::num::check_dim("direction", d.len(), x.len())?;
    let fx = eval_unchecked(e, x)?;
    let mut quotients: Vec<(bool, f64)> = Vec::new();
    for k in 10..=40u32 {
        let t = pow2_neg(k);
        let y = add(x, &scale(&t, d));
        let fy = eval_unchecked(e, &y)?;
        let q = match value_diff(&fy, &fx) {
            Value::Exact(v) => (true, to_f64(&(v / &t))),
            Value::Approx(v) => (false, v / to_f64(&t)),
        };
        quotients.push(q);
    }
    let all_exact = quotients.iter().all(|q| q.0);
    let usable: Vec<f64> = if all_exact {
        quotients.iter().map(|q| q.1).collect()
    } else {
        quotients[..=(FLOAT_K_MAX - 10) as usize].iter().map(|q| q.1).collect()
    };
    let tail = &usable[usable.len() - 8..];
    let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((*usable.last().unwrap(), hi - lo))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscontinuityWitness {
    /// Ball radius `2^-k` (sup norm) around the probe point.
    pub k: u32,
    pub point: Vec<String>,
    /// Normal of the guard hyperplane the jump was observed across.
    pub normal: Vec<String>,
    pub jump: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub continuous_at_x: bool,
    /// Largest `|f(y) - f(x)|` over samples `y` at sup-distance `2^-k`, `k = 2..=20`.
    pub max_deviation: Vec<f64>,
    pub discontinuity_found_in_every_ball: bool,
    /// Strongest witness per radius.
    pub witnesses: Vec<DiscontinuityWitness>,
    pub frechet_ok: bool,
    pub candidate_gradient: Vec<f64>,
    pub fit_residual: f64,
    /// Max remainder ratio at radii `2^-k`, `k = 4, 6, ..., 30`.
    pub remainder_ratios: Vec<f64>,
    pub evidence: &'static str,
    pub notes: Vec<String>,
}

const K_RANGE: std::ops::RangeInclusive<u32> = 2..=20;

/// Samples continuity and Fréchet differentiability of `e` near `x`.
pub fn regularity_probe(e: &Expr, x: &[Rational]) -> RegularityReport {
    let mut notes = Vec::new();
    let n = x.len();
    let mut report = RegularityReport {
        continuous_at_x: false,
        max_deviation: Vec::new(),
        discontinuity_found_in_every_ball: false,
        witnesses: Vec::new(),
        frechet_ok: false,
        candidate_gradient: Vec::new(),
        fit_residual: f64::NAN,
        remainder_ratios: Vec::new(),
        evidence: "numeric evidence",
        notes: Vec::new(),
    };
    if let Err(err) = e.check_dim(n) {
        report.notes.push(err.to_string());
        return report;
    }
    let fx = match eval_unchecked(e, x) {
        Ok(v) => v,
        Err(err) => {
            report.notes.push(format!("undefined at the probe point: {err}"));
            return report;
        }
    };
    let dirs = sample_directions(n);

    // Continuity at x.
    for k in K_RANGE {
        let r = pow2_neg(k);
        let mut dev: f64 = 0.0;
        for u in &dirs {
            let y = add(x, &scale(&r, u));
            match eval_unchecked(e, &y) {
                Ok(v) => dev = dev.max(v.sub(&fx).to_f64().abs()),
                Err(err) => {
                    notes.push(format!("k = {k}: {err}"));
                    dev = f64::NAN;
                    break;
                }
            }
        }
        report.max_deviation.push(dev);
    }
    let final_dev = *report.max_deviation.last().unwrap();
    report.continuous_at_x = final_dev.is_finite() && final_dev < 1e-4 * fx.to_f64().abs().max(1.0);

    // Jumps across guard hyperplanes in shrinking balls.
    let mut atoms: Vec<(RVec, Rational)> = Vec::new();
    for a in e.guard_atoms() {
        if crate::num::is_zero_vec(&a.normal) {
            continue;
        }
        let key = (a.normal.clone(), a.rhs.clone());
        if !atoms.contains(&key) {
            atoms.push(key);
        }
    }
    let mut every = !atoms.is_empty();
    for k in K_RANGE {
        let best = jump_witness(e, x, &atoms, k);
        match best {
            Some(w) => report.witnesses.push(w),
            None => every = false,
        }
    }
    report.discontinuity_found_in_every_ball = every;

    // Fréchet: fit g from directional derivatives, then test the remainder.
    match frechet(e, x, &fx, &dirs) {
        Ok((g, residual, ratios)) => {
            let scale_g = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
            let last = *ratios.last().unwrap();
            report.frechet_ok = residual < 1e-6 * scale_g && last.is_finite() && last < 1e-5 * scale_g;
            report.candidate_gradient = g;
            report.fit_residual = residual;
            report.remainder_ratios = ratios;
        }
        Err(err) => notes.push(format!("Fréchet probe inconclusive: {err}")),
    }
    report.notes = notes;
    report
}

/// `±e_i` plus four fixed pseudo-random integer directions, sup-norm 1.
fn sample_directions(n: usize) -> Vec<RVec> {
    let mut dirs = Vec::new();
    for i in 0..n {
        let e = crate::num::unit(n, i);
        dirs.push(crate::num::neg(&e));
        dirs.push(e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    while dirs.len() < 2 * n + 4 {
        let v: RVec = (0..n).map(|_| int(rng.gen_range(-4..=4))).collect();
        let m = norm_inf(&v);
        if m == Rational::from_integer(0.into()) {
            continue;
        }
        dirs.push(v.iter().map(|c| c / &m).collect());
    }
    dirs
}

fn jump_witness(e: &Expr, x: &[Rational], atoms: &[(RVec, Rational)], k: u32) -> Option<DiscontinuityWitness> {
    let n = x.len();
    let r = pow2_neg(k);
    let delta = num_traits::pow(r.clone(), 4);
    let mut best: Option<DiscontinuityWitness> = None;
    for (normal, rhs) in atoms {
        let nn = dot(normal, normal);
        let shift = (rhs - dot(normal, x)) / &nn;
        let base = add(x, &scale(&shift, normal));
        if norm_inf(&crate::num::sub(&base, x)) > r {
            continue;
        }
        let m = norm_inf(normal);
        let nhat: RVec = normal.iter().map(|c| c / &m).collect();
        let mut offsets: Vec<RVec> = vec![crate::num::zeros(n)];
        for i in 0..n {
            let ei = crate::num::unit(n, i);
            let c = &normal[i] / &nn;
            let u = crate::num::sub(&ei, &scale(&c, normal));
            let um = norm_inf(&u);
            if um == Rational::from_integer(0.into()) {
                continue;
            }
            let u: RVec = u.iter().map(|c| c * &r / &um).collect();
            offsets.push(crate::num::neg(&u));
            offsets.push(u);
        }
        for off in offsets {
            let p = add(&base, &off);
            let Ok(fp) = eval_unchecked(e, &p) else { continue };
            for side in [1i64, -1] {
                let dir = scale(&int(side), &nhat);
                let (Ok(f1), Ok(f2)) = (
                    eval_unchecked(e, &add(&p, &scale(&delta, &dir))),
                    eval_unchecked(e, &add(&p, &scale(&(&delta / int(2)), &dir))),
                ) else {
                    continue;
                };
                let d1 = f1.sub(&fp);
                let d2 = f2.sub(&fp);
                let floor = if d1.is_exact() && d2.is_exact() {
                    0.0
                } else {
                    64.0 * f64::EPSILON * fp.to_f64().abs().max(1.0)
                };
                let (a1, a2) = (d1.to_f64().abs(), d2.to_f64().abs());
                if a1 > floor && a2 > 0.75 * a1 {
                    let better = best.as_ref().map_or(true, |b| a1 > b.jump);
                    if better {
                        best = Some(DiscontinuityWitness {
                            k,
                            point: fmt_vec(&p),
                            normal: fmt_vec(normal),
                            jump: a1,
                        });
                    }
                }
            }
        }
    }
    best
}

type FrechetFit = (Vec<f64>, f64, Vec<f64>);

fn frechet(e: &Expr, x: &[Rational], fx: &Value, dirs: &[RVec]) -> Result<FrechetFit> {
    let n = x.len();
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for d in dirs {
        let (est, _) = directional_derivative_numeric(e, x, d)?;
        rows.push((vec_to_f64(d), est));
    }
    // Normal equations of the least-squares fit <g, d_j> = D_j.
    let mut a = vec![vec![0.0; n + 1]; n];
    for (d, v) in &rows {
        for i in 0..n {
            for j in 0..n {
                a[i][j] += d[i] * d[j];
            }
            a[i][n] += d[i] * v;
        }
    }
    let g = solve_dense(a).ok_or_else(|| Error::input("degenerate sample directions"))?;
    let residual = rows
        .iter()
        .map(|(d, v)| (d.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() - v).abs())
        .fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(0xf4ec);
    let hs: Vec<RVec> = (0..8)
        .map(|_| loop {
            let v: RVec = (0..n).map(|_| int(rng.gen_range(-8..=8))).collect();
            let m = norm_inf(&v);
            if m != Rational::from_integer(0.into()) {
                break v.iter().map(|c| c / &m).collect();
            }
        })
        .collect();
    let mut ratios = Vec::new();
    for k in (4..=30u32).step_by(2) {
        let r = pow2_neg(k);
        let mut worst: f64 = 0.0;
        for u in hs.iter().chain(dirs) {
            let h = scale(&r, u);
            let fy = eval_unchecked(e, &add(x, &h))?;
            let hf = vec_to_f64(&h);
            let lin: f64 = hf.iter().zip(&g).map(|(a, b)| a * b).sum();
            let hnorm = hf.iter().map(|v| v * v).sum::<f64>().sqrt();
            let diff = match fy.sub(fx) {
                Value::Exact(v) => to_f64(&v),
                Value::Approx(v) => v,
            };
            worst = worst.max((diff - lin).abs() / hnorm);
        }
        ratios.push(worst);
    }
    Ok((g, residual, ratios))
}

/// Gaussian elimination with partial pivoting on an augmented `n x (n+1)` matrix.
fn solve_dense(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for j in c..=n {
                    a[r][j] -= f * a[c][j];
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Guard, GuardAtom, JunctionDerivative, Piece, Rel};
    use crate::num::{frac, rvec};

    fn atom(normal: &[i64], rel: Rel) -> GuardAtom {
        GuardAtom {
            normal: rvec(normal),
            rhs: int(0),
            rel,
        }
    }

    fn ex1() -> Expr {
        let x2 = || Expr::pow(Expr::Var(0), 2);
        Expr::Piecewise {
            pieces: vec![
                Piece {
                    guard: Guard { atoms: vec![atom(&[1, 0], Rel::Ge)] },
                    expr: Expr::Var(1),
                },
                Piece {
                    guard: Guard { atoms: vec![atom(&[1, 0], Rel::Lt), atom(&[0, 1], Rel::Le)] },
                    expr: Expr::Sum(vec![Expr::Var(1), Expr::neg(x2())]),
                },
                Piece {
                    guard: Guard { atoms: vec![atom(&[1, 0], Rel::Lt), atom(&[0, 1], Rel::Gt)] },
                    expr: Expr::Sum(vec![Expr::Var(1), x2()]),
                },
            ],
            differentiable_at: vec![JunctionDerivative {
                point: rvec(&[0, 0]),
                gradient: rvec(&[0, 1]),
            }],
        }
    }

    fn ex2() -> Expr {
        let y2 = || Expr::pow(Expr::Var(1), 2);
        let ex = || Expr::exp(Expr::Var(0));
        Expr::Piecewise {
            pieces: vec![
                Piece {
                    guard: Guard { atoms: vec![atom(&[0, 1], Rel::Ge)] },
                    expr: Expr::Var(0),
                },
                Piece {
                    guard: Guard { atoms: vec![atom(&[0, 1], Rel::Lt), atom(&[1, 0], Rel::Ge)] },
                    expr: Expr::Sum(vec![ex(), y2(), Expr::Const(int(-1))]),
                },
                Piece {
                    guard: Guard { atoms: vec![atom(&[0, 1], Rel::Lt), atom(&[1, 0], Rel::Lt)] },
                    expr: Expr::Sum(vec![ex(), Expr::neg(y2()), Expr::Const(int(-1))]),
                },
            ],
            differentiable_at: vec![JunctionDerivative {
                point: rvec(&[0, 0]),
                gradient: rvec(&[1, 0]),
            }],
        }
    }

    #[test]
    fn quotients_of_kinks() {
        let abs = Expr::abs(Expr::Var(0));
        assert_eq!(directional_derivative_numeric(&abs, &[int(0)], &[int(1)]).unwrap(), (1.0, 0.0));
        assert_eq!(directional_derivative_numeric(&abs, &[int(0)], &[int(-1)]).unwrap(), (1.0, 0.0));
        let m = Expr::Max(vec![Expr::Var(0), Expr::scale(int(2), Expr::Var(0))]);
        assert_eq!(directional_derivative_numeric(&m, &[int(0)], &[int(1)]).unwrap(), (2.0, 0.0));
    }

    #[test]
    fn exp_quotient_truncated() {
        let (est, stab) = directional_derivative_numeric(&Expr::exp(Expr::Var(0)), &[int(0)], &[int(1)]).unwrap();
        assert!((est - 1.0).abs() < 1e-6, "{est}");
        assert!(stab < 1e-5);
    }

    #[test]
    fn first_example_probe() {
        let rep = regularity_probe(&ex1(), &rvec(&[0, 0]));
        assert!(rep.frechet_ok, "{rep:?}");
        assert!((rep.candidate_gradient[0]).abs() < 1e-9 && (rep.candidate_gradient[1] - 1.0).abs() < 1e-9);
        assert!(rep.discontinuity_found_in_every_ball);
        assert_eq!(rep.witnesses.len(), 19);
        for w in &rep.witnesses {
            let r = crate::num::fmt_rational(&pow2_neg(w.k));
            assert_eq!(w.point, vec![format!("-{r}"), "0".to_string()]);
        }
        assert!(rep.continuous_at_x);
    }

    #[test]
    fn second_example_probe() {
        let rep = regularity_probe(&ex2(), &rvec(&[0, 0]));
        assert!(rep.frechet_ok, "{rep:?}");
        assert!((rep.candidate_gradient[0] - 1.0).abs() < 1e-6 && rep.candidate_gradient[1].abs() < 1e-6);
        assert!(rep.discontinuity_found_in_every_ball);
        for w in &rep.witnesses {
            let r = crate::num::fmt_rational(&pow2_neg(w.k));
            assert_eq!(w.point, vec!["0".to_string(), format!("-{r}")]);
        }
    }

    #[test]
    fn affine_is_regular() {
        let e = Expr::affine(&[int(2)], int(3));
        let rep = regularity_probe(&e, &[frac(1, 3)]);
        assert!(rep.continuous_at_x && rep.frechet_ok);
        assert!(rep.witnesses.is_empty() && !rep.discontinuity_found_in_every_ball);
        assert!((rep.candidate_gradient[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn jump_at_point_is_not_frechet() {
        let e = Expr::Piecewise {
            pieces: vec![
                Piece { guard: Guard { atoms: vec![atom(&[1], Rel::Ge)] }, expr: Expr::Const(int(1)) },
                Piece { guard: Guard::default(), expr: Expr::Const(int(0)) },
            ],
            differentiable_at: vec![],
        };
        let rep = regularity_probe(&e, &[int(0)]);
        assert!(!rep.continuous_at_x && !rep.frechet_ok);
        assert!(rep.discontinuity_found_in_every_ball);
    }
}
