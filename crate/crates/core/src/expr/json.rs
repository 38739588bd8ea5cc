//! Tagged-object JSON form of expressions: `{"op": ..., "args": [...]}`.

use serde::{Deserialize, Serialize};

use super::{Expr, Guard, GuardAtom, JunctionDerivative, Piece, Rel};
use crate::error::{Error, Result};
use crate::num::{fmt_rational, fmt_vec, parse_rational, parse_vec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawExpr {
    pub op: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<RawExpr>,
    /// Constant value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    /// Variable by name (resolved against the declared variables) ...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// ... or by position.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<Vec<RawPiece>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub differentiable_at: Option<Vec<RawJunction>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPiece {
    #[serde(default)]
    pub guard: Vec<RawAtom>,
    pub expr: RawExpr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAtom {
    pub normal: Vec<String>,
    pub rel: String,
    pub rhs: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawJunction {
    pub point: Vec<String>,
    pub gradient: Vec<String>,
}

impl RawExpr {
    fn bare(op: &str) -> RawExpr {
        RawExpr {
            op: op.to_string(),
            args: Vec::new(),
            value: None,
            name: None,
            index: None,
            factor: None,
            exponent: None,
            pieces: None,
            differentiable_at: None,
        }
    }
}

fn at(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::input(format!("{path}: {msg}"))
}

fn rational_at(path: &str, s: &str) -> Result<crate::num::Rational> {
    parse_rational(s).map_err(|e| at(path, e))
}

fn vec_at(path: &str, items: &[String], dim: usize, what: &str) -> Result<crate::num::RVec> {
    if items.len() != dim {
        return Err(at(
            path,
            format!("dimension mismatch: {what} has {} entries, problem has {dim} variables", items.len()),
        ));
    }
    parse_vec(items).map_err(|e| at(path, e))
}

/// Converts the JSON form into an [`Expr`] over the variables `vars`.
/// Errors carry the JSON path of the offending node.
pub(crate) fn expr_from_raw(raw: &RawExpr, vars: &[String], path: &str) -> Result<Expr> {
    let dim = vars.len();
    let args = |min: usize, max: Option<usize>| -> Result<Vec<Expr>> {
        let k = raw.args.len();
        if k < min || max.is_some_and(|m| k > m) {
            let want = match max {
                Some(m) if m == min => format!("exactly {min}"),
                Some(m) => format!("{min} to {m}"),
                None => format!("at least {min}"),
            };
            return Err(at(path, format!("'{}' takes {want} args, got {k}", raw.op)));
        }
        raw.args
            .iter()
            .enumerate()
            .map(|(i, a)| expr_from_raw(a, vars, &format!("{path}.args[{i}]")))
            .collect()
    };
    let unary = || -> Result<Box<Expr>> { Ok(Box::new(args(1, Some(1))?.pop().unwrap())) };
    Ok(match raw.op.as_str() {
        "const" => {
            let v = raw.value.as_deref().ok_or_else(|| at(path, "const needs 'value'"))?;
            Expr::Const(rational_at(&format!("{path}.value"), v)?)
        }
        "var" => match (&raw.name, raw.index) {
            (Some(name), None) => Expr::Var(
                vars.iter()
                    .position(|v| v == name)
                    .ok_or_else(|| at(path, format!("unknown variable '{name}'")))?,
            ),
            (None, Some(i)) if i < dim => Expr::Var(i),
            (None, Some(i)) => return Err(at(path, format!("variable index {i} out of range for {dim} variables"))),
            _ => return Err(at(path, "var needs exactly one of 'name' or 'index'")),
        },
        "sum" => Expr::Sum(args(1, None)?),
        "scale" => {
            let f = raw.factor.as_deref().ok_or_else(|| at(path, "scale needs 'factor'"))?;
            Expr::Scale(rational_at(&format!("{path}.factor"), f)?, unary()?)
        }
        "product" => {
            let mut it = args(2, None)?.into_iter();
            let first = it.next().unwrap();
            it.fold(first, Expr::product)
        }
        "power" => {
            let k = raw.exponent.ok_or_else(|| at(path, "power needs 'exponent'"))?;
            if k == 0 {
                return Err(at(path, "exponent must be a positive integer"));
            }
            Expr::Power(unary()?, k)
        }
        "exp" => Expr::Exp(unary()?),
        "abs" => Expr::Abs(unary()?),
        "recip" => Expr::Recip(unary()?),
        "neg" => Expr::Scale(-crate::num::one(), unary()?),
        "max" => Expr::Max(args(1, None)?),
        "min" => Expr::Min(args(1, None)?),
        "piecewise" => {
            let raw_pieces = raw.pieces.as_ref().ok_or_else(|| at(path, "piecewise needs 'pieces'"))?;
            if raw_pieces.is_empty() {
                return Err(at(path, "piecewise needs at least one piece"));
            }
            let mut pieces = Vec::new();
            for (i, p) in raw_pieces.iter().enumerate() {
                let ppath = format!("{path}.pieces[{i}]");
                let mut atoms = Vec::new();
                for (j, a) in p.guard.iter().enumerate() {
                    let apath = format!("{ppath}.guard[{j}]");
                    let rel = Rel::parse(&a.rel)
                        .ok_or_else(|| at(&apath, format!("unknown relation '{}'", a.rel)))?;
                    atoms.push(GuardAtom {
                        normal: vec_at(&format!("{apath}.normal"), &a.normal, dim, "guard normal")?,
                        rhs: rational_at(&format!("{apath}.rhs"), &a.rhs)?,
                        rel,
                    });
                }
                pieces.push(Piece {
                    guard: Guard { atoms },
                    expr: expr_from_raw(&p.expr, vars, &format!("{ppath}.expr"))?,
                });
            }
            let mut differentiable_at = Vec::new();
            for (i, j) in raw.differentiable_at.iter().flatten().enumerate() {
                let jpath = format!("{path}.differentiable_at[{i}]");
                differentiable_at.push(JunctionDerivative {
                    point: vec_at(&format!("{jpath}.point"), &j.point, dim, "junction point")?,
                    gradient: vec_at(&format!("{jpath}.gradient"), &j.gradient, dim, "junction gradient")?,
                });
            }
            Expr::Piecewise {
                pieces,
                differentiable_at,
            }
        }
        other => return Err(at(path, format!("unknown node kind '{other}'"))),
    })
}

/// Inverse of [`expr_from_raw`]; variables are written by name when `vars`
/// covers them.
pub(crate) fn expr_to_raw(e: &Expr, vars: &[String]) -> RawExpr {
    let with_args = |op: &str, args: Vec<&Expr>| {
        let mut r = RawExpr::bare(op);
        r.args = args.into_iter().map(|a| expr_to_raw(a, vars)).collect();
        r
    };
    match e {
        Expr::Const(c) => {
            let mut r = RawExpr::bare("const");
            r.value = Some(fmt_rational(c));
            r
        }
        Expr::Var(i) => {
            let mut r = RawExpr::bare("var");
            match vars.get(*i) {
                Some(name) => r.name = Some(name.clone()),
                None => r.index = Some(*i),
            }
            r
        }
        Expr::Sum(v) => with_args("sum", v.iter().collect()),
        Expr::Scale(c, a) => {
            let mut r = with_args("scale", vec![a]);
            r.factor = Some(fmt_rational(c));
            r
        }
        Expr::Product(a, b) => with_args("product", vec![a, b]),
        Expr::Power(a, k) => {
            let mut r = with_args("power", vec![a]);
            r.exponent = Some(*k);
            r
        }
        Expr::Exp(a) => with_args("exp", vec![a]),
        Expr::Abs(a) => with_args("abs", vec![a]),
        Expr::Recip(a) => with_args("recip", vec![a]),
        Expr::Max(v) => with_args("max", v.iter().collect()),
        Expr::Min(v) => with_args("min", v.iter().collect()),
        Expr::Piecewise {
            pieces,
            differentiable_at,
        } => {
            let mut r = RawExpr::bare("piecewise");
            r.pieces = Some(
                pieces
                    .iter()
                    .map(|p| RawPiece {
                        guard: p
                            .guard
                            .atoms
                            .iter()
                            .map(|a| RawAtom {
                                normal: fmt_vec(&a.normal),
                                rel: a.rel.symbol().to_string(),
                                rhs: fmt_rational(&a.rhs),
                            })
                            .collect(),
                        expr: expr_to_raw(&p.expr, vars),
                    })
                    .collect(),
            );
            if !differentiable_at.is_empty() {
                r.differentiable_at = Some(
                    differentiable_at
                        .iter()
                        .map(|j| RawJunction {
                            point: fmt_vec(&j.point),
                            gradient: fmt_vec(&j.gradient),
                        })
                        .collect(),
                );
            }
            r
        }
    }
}

/// Parses a JSON expression over `vars`.
pub fn expr_from_json(text: &str, vars: &[String]) -> Result<Expr> {
    let raw: RawExpr = serde_json::from_str(text)
        .map_err(|e| Error::input(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    expr_from_raw(&raw, vars, "$")
}

pub fn expr_to_json(e: &Expr, vars: &[String]) -> String {
    serde_json::to_string(&expr_to_raw(e, vars)).expect("expression serializes")
}
