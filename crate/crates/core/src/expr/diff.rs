use super::eval::{better, eval_unchecked};
use super::{float_tol, fmt_point, Expr, Value};
use crate::error::{Error, Result};
use crate::num::Rational;

/// Gradient of the active smooth branch of `e` at `x`.
///
/// Entries are exact except where an `exp` node is on the path. Kinks
/// (abs of zero, max/min ties, guard boundaries) are errors unless the
/// enclosing piecewise node declares a derivative at exactly `x`.
pub fn gradient(e: &Expr, x: &[Rational]) -> Result<Vec<Value>> {
    e.check_dim(x.len())?;
    Ok(forward(e, x, "root")?.1)
}

fn nonsmooth(path: &str, what: String) -> Error {
    Error::Nonsmooth {
        node: format!("{what} (node {path})"),
    }
}

fn forward(e: &Expr, x: &[Rational], path: &str) -> Result<(Value, Vec<Value>)> {
    let n = x.len();
    let zero_grad = || vec![Value::zero(); n];
    let child = |i: usize| format!("{path}.{i}");
    Ok(match e {
        Expr::Const(c) => (Value::Exact(c.clone()), zero_grad()),
        Expr::Var(i) => {
            let mut g = zero_grad();
            g[*i] = Value::Exact(crate::num::one());
            (Value::Exact(x[*i].clone()), g)
        }
        Expr::Sum(terms) => {
            let mut v = Value::zero();
            let mut g = zero_grad();
            for (k, t) in terms.iter().enumerate() {
                let (tv, tg) = forward(t, x, &child(k))?;
                v = v.add(&tv);
                g = g.iter().zip(&tg).map(|(a, b)| a.add(b)).collect();
            }
            (v, g)
        }
        Expr::Scale(c, a) => {
            let (v, g) = forward(a, x, &child(0))?;
            (v.scale(c), g.iter().map(|d| d.scale(c)).collect())
        }
        Expr::Product(a, b) => {
            let (av, ag) = forward(a, x, &child(0))?;
            let (bv, bg) = forward(b, x, &child(1))?;
            let g = ag.iter().zip(&bg).map(|(da, db)| da.mul(&bv).add(&db.mul(&av))).collect();
            (av.mul(&bv), g)
        }
        Expr::Power(a, k) => {
            let (v, g) = forward(a, x, &child(0))?;
            if *k == 0 {
                (Value::Exact(crate::num::one()), zero_grad())
            } else {
                let factor = v.powi(k - 1).scale(&Rational::from_integer((*k).into()));
                (v.powi(*k), g.iter().map(|d| d.mul(&factor)).collect())
            }
        }
        Expr::Exp(a) => {
            let (v, g) = forward(a, x, &child(0))?;
            let ev = v.exp();
            let gs = g.iter().map(|d| d.mul(&ev)).collect();
            (ev, gs)
        }
        Expr::Recip(a) => {
            let (v, g) = forward(a, x, &child(0))?;
            let r = v.recip().ok_or_else(|| Error::Undefined {
                point: format!("{}; reciprocal of zero", fmt_point(x)),
            })?;
            let factor = r.mul(&r).neg();
            (r, g.iter().map(|d| d.mul(&factor)).collect())
        }
        Expr::Abs(a) => {
            let (v, g) = forward(a, x, &child(0))?;
            match v.sign(float_tol()) {
                0 => return Err(nonsmooth(path, format!("abs: argument is 0 at ({})", fmt_point(x)))),
                1 => (v, g),
                _ => (v.neg(), g.iter().map(Value::neg).collect()),
            }
        }
        Expr::Max(args) | Expr::Min(args) => {
            let max = matches!(e, Expr::Max(_));
            let kind = if max { "max" } else { "min" };
            let mut vals = Vec::with_capacity(args.len());
            for (k, a) in args.iter().enumerate() {
                vals.push((k, eval_unchecked(a, x)?));
            }
            let (best_k, best) = vals
                .iter()
                .cloned()
                .reduce(|acc, cur| if better(&cur.1, &acc.1, max) { cur } else { acc })
                .ok_or_else(|| Error::input(format!("{kind} of no arguments")))?;
            let tie = vals.iter().find(|(k, v)| *k != best_k && ties(v, &best));
            if let Some((other, _)) = tie {
                return Err(nonsmooth(
                    path,
                    format!("{kind}: branches {best_k} and {other} tie at ({})", fmt_point(x)),
                ));
            }
            forward(&args[best_k], x, &child(best_k))?
        }
        Expr::Piecewise {
            pieces,
            differentiable_at,
        } => {
            let on_boundary = pieces
                .iter()
                .flat_map(|p| &p.guard.atoms)
                .any(|a| a.on_boundary(x));
            let (idx, piece) = pieces
                .iter()
                .enumerate()
                .find(|(_, p)| p.guard.holds(x))
                .ok_or_else(|| Error::Undefined { point: fmt_point(x) })?;
            if on_boundary {
                let Some(j) = differentiable_at.iter().find(|j| j.point.as_slice() == x) else {
                    return Err(nonsmooth(
                        path,
                        format!("piecewise: ({}) lies on a guard boundary", fmt_point(x)),
                    ));
                };
                let v = eval_unchecked(&piece.expr, x)?;
                (v, j.gradient.iter().cloned().map(Value::Exact).collect())
            } else {
                forward(&piece.expr, x, &child(idx))?
            }
        }
    })
}

fn ties(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Exact(p), Value::Exact(q)) => p == q,
        _ => (a.to_f64() - b.to_f64()).abs() <= float_tol(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Guard, GuardAtom, JunctionDerivative, Piece, Rel};
    use crate::num::{int, rvec};

    fn exact(g: Vec<Value>) -> Vec<Rational> {
        g.into_iter().map(|v| v.exact().cloned().expect("exact")).collect()
    }

    #[test]
    fn linear_gradient() {
        assert_eq!(exact(gradient(&Expr::Var(0), &rvec(&[0, 0])).unwrap()), rvec(&[1, 0]));
    }

    #[test]
    fn annotated_junction() {
        let atom = |normal: &[i64], rel| GuardAtom { normal: rvec(normal), rhs: int(0), rel };
        let e = Expr::Piecewise {
            pieces: vec![
                Piece {
                    guard: Guard { atoms: vec![atom(&[1, 0], Rel::Ge)] },
                    expr: Expr::Var(1),
                },
                Piece {
                    guard: Guard { atoms: vec![atom(&[1, 0], Rel::Lt)] },
                    expr: Expr::Sum(vec![Expr::Var(1), Expr::pow(Expr::Var(0), 2)]),
                },
            ],
            differentiable_at: vec![JunctionDerivative {
                point: rvec(&[0, 0]),
                gradient: rvec(&[0, 1]),
            }],
        };
        assert_eq!(exact(gradient(&e, &rvec(&[0, 0])).unwrap()), rvec(&[0, 1]));
        // Same boundary at another point has no annotation.
        assert!(matches!(gradient(&e, &rvec(&[0, 1])), Err(Error::Nonsmooth { .. })));
        assert_eq!(exact(gradient(&e, &rvec(&[-1, 0])).unwrap()), rvec(&[-2, 1]));
    }

    #[test]
    fn abs_kink() {
        match gradient(&Expr::abs(Expr::Var(0)), &[int(0)]) {
            Err(Error::Nonsmooth { node }) => assert!(node.starts_with("abs")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn max_tie_and_branch() {
        let e = Expr::Max(vec![Expr::Var(0), Expr::scale(int(2), Expr::Var(0))]);
        assert!(matches!(gradient(&e, &[int(0)]), Err(Error::Nonsmooth { .. })));
        assert_eq!(exact(gradient(&e, &[int(1)]).unwrap()), rvec(&[2]));
        assert_eq!(exact(gradient(&e, &[int(-1)]).unwrap()), rvec(&[1]));
    }

    #[test]
    fn product_power_recip() {
        // d/dx (x^3 * 1/x) = 2x
        let e = Expr::product(Expr::pow(Expr::Var(0), 3), Expr::recip(Expr::Var(0)));
        assert_eq!(exact(gradient(&e, &[int(3)]).unwrap()), rvec(&[6]));
    }

    #[test]
    fn exp_gradient_is_approximate() {
        let g = gradient(&Expr::exp(Expr::Var(0)), &[int(0)]).unwrap();
        assert_eq!(g, vec![Value::Approx(1.0)]);
    }
}
