use super::{fmt_point, Expr, Value};
use crate::error::{Error, Result};
use crate::num::Rational;

/// Evaluates `e` at `x`; exact unless an `exp` node lies on the path.
pub fn eval(e: &Expr, x: &[Rational]) -> Result<Value> {
    e.check_dim(x.len())?;
    eval_unchecked(e, x)
}

pub(crate) fn eval_unchecked(e: &Expr, x: &[Rational]) -> Result<Value> {
    Ok(match e {
        Expr::Const(c) => Value::Exact(c.clone()),
        Expr::Var(i) => Value::Exact(x[*i].clone()),
        Expr::Sum(terms) => {
            let mut acc = Value::zero();
            for t in terms {
                acc = acc.add(&eval_unchecked(t, x)?);
            }
            acc
        }
        Expr::Scale(c, a) => eval_unchecked(a, x)?.scale(c),
        Expr::Product(a, b) => eval_unchecked(a, x)?.mul(&eval_unchecked(b, x)?),
        Expr::Power(a, k) => eval_unchecked(a, x)?.powi(*k),
        Expr::Exp(a) => eval_unchecked(a, x)?.exp(),
        Expr::Recip(a) => eval_unchecked(a, x)?.recip().ok_or_else(|| Error::Undefined {
            point: format!("{}; reciprocal of zero", fmt_point(x)),
        })?,
        Expr::Abs(a) => eval_unchecked(a, x)?.abs(),
        Expr::Max(args) => extremum(args, x, true)?,
        Expr::Min(args) => extremum(args, x, false)?,
        Expr::Piecewise { pieces, .. } => {
            let piece = pieces.iter().find(|p| p.guard.holds(x)).ok_or_else(|| Error::Undefined {
                point: fmt_point(x),
            })?;
            eval_unchecked(&piece.expr, x)?
        }
    })
}

fn extremum(args: &[Expr], x: &[Rational], max: bool) -> Result<Value> {
    let mut best: Option<Value> = None;
    for a in args {
        let v = eval_unchecked(a, x)?;
        best = Some(match best {
            None => v,
            Some(b) => {
                if better(&v, &b, max) {
                    v
                } else {
                    b
                }
            }
        });
    }
    best.ok_or_else(|| Error::input(if max { "max of no arguments" } else { "min of no arguments" }))
}

/// Strict comparison `v > b` (or `<` for min), exact when both are exact.
pub(crate) fn better(v: &Value, b: &Value, max: bool) -> bool {
    match (v, b) {
        (Value::Exact(p), Value::Exact(q)) => {
            if max {
                p > q
            } else {
                p < q
            }
        }
        _ => {
            if max {
                v.to_f64() > b.to_f64()
            } else {
                v.to_f64() < b.to_f64()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Guard, GuardAtom, Piece, Rel};
    use crate::num::{frac, int, rvec};

    pub(crate) fn ex1_f1() -> Expr {
        // y - x^2 if x < 0 and y <= 0, else y.
        let y_minus_x2 = Expr::Sum(vec![Expr::Var(1), Expr::neg(Expr::pow(Expr::Var(0), 2))]);
        Expr::Piecewise {
            pieces: vec![
                Piece {
                    guard: Guard {
                        atoms: vec![
                            GuardAtom { normal: rvec(&[1, 0]), rhs: int(0), rel: Rel::Lt },
                            GuardAtom { normal: rvec(&[0, 1]), rhs: int(0), rel: Rel::Le },
                        ],
                    },
                    expr: y_minus_x2,
                },
                Piece {
                    guard: Guard::default(),
                    expr: Expr::Var(1),
                },
            ],
            differentiable_at: vec![],
        }
    }

    #[test]
    fn abs_value() {
        let e = Expr::abs(Expr::Var(0));
        assert_eq!(eval(&e, &[int(-2)]).unwrap(), Value::Exact(int(2)));
    }

    #[test]
    fn piecewise_branch() {
        assert_eq!(eval(&ex1_f1(), &rvec(&[-1, -1])).unwrap(), Value::Exact(int(-2)));
        assert_eq!(eval(&ex1_f1(), &rvec(&[-1, 1])).unwrap(), Value::Exact(int(1)));
    }

    #[test]
    fn exp_is_approximate() {
        let v = eval(&Expr::exp(Expr::Var(0)), &[int(0)]).unwrap();
        assert_eq!(v, Value::Approx(1.0));
    }

    #[test]
    fn uncovered_point_is_undefined() {
        let e = Expr::Piecewise {
            pieces: vec![Piece {
                guard: Guard {
                    atoms: vec![GuardAtom { normal: rvec(&[1]), rhs: int(0), rel: Rel::Gt }],
                },
                expr: Expr::Var(0),
            }],
            differentiable_at: vec![],
        };
        match eval(&e, &[frac(-1, 2)]) {
            Err(Error::Undefined { point }) => assert_eq!(point, "-1/2"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dimension_checked() {
        assert!(matches!(eval(&Expr::Var(2), &rvec(&[1, 2])), Err(Error::Input(_))));
    }

    #[test]
    fn reciprocal_of_zero() {
        assert!(matches!(eval(&Expr::recip(Expr::Var(0)), &[int(0)]), Err(Error::Undefined { .. })));
    }
}
