//! Symbolic expressions for objectives and constraints.
//!
//! Arithmetic is exact over rationals except across `exp`, which turns the
//! value on its path into an approximate, tagged `f64`.

mod diff;
mod eval;
mod json;
mod probe;

use std::sync::OnceLock;

pub use diff::gradient;
pub use eval::eval;
pub use json::{expr_from_json, expr_to_json, RawExpr};
pub use probe::{directional_derivative_numeric, regularity_probe, DiscontinuityWitness, RegularityReport};

pub(crate) use json::{expr_from_raw, expr_to_raw};

use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::num::{dot, fmt_vec, to_f64, RVec, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rel {
    Le,
    Lt,
    Eq,
    Ge,
    Gt,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Le => "<=",
            Rel::Lt => "<",
            Rel::Eq => "=",
            Rel::Ge => ">=",
            Rel::Gt => ">",
        }
    }

    pub fn parse(s: &str) -> Option<Rel> {
        Some(match s {
            "<=" => Rel::Le,
            "<" => Rel::Lt,
            "=" | "==" => Rel::Eq,
            ">=" => Rel::Ge,
            ">" => Rel::Gt,
            _ => return None,
        })
    }
}

/// `<normal, x> rel rhs`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GuardAtom {
    pub normal: RVec,
    pub rhs: Rational,
    pub rel: Rel,
}

impl GuardAtom {
    pub fn holds(&self, x: &[Rational]) -> bool {
        let lhs = dot(&self.normal, x);
        match self.rel {
            Rel::Le => lhs <= self.rhs,
            Rel::Lt => lhs < self.rhs,
            Rel::Eq => lhs == self.rhs,
            Rel::Ge => lhs >= self.rhs,
            Rel::Gt => lhs > self.rhs,
        }
    }

    pub fn on_boundary(&self, x: &[Rational]) -> bool {
        dot(&self.normal, x) == self.rhs
    }
}

/// Conjunction of atoms; the empty guard always holds.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Guard {
    pub atoms: Vec<GuardAtom>,
}

impl Guard {
    pub fn holds(&self, x: &[Rational]) -> bool {
        self.atoms.iter().all(|a| a.holds(x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub guard: Guard,
    pub expr: Expr,
}

/// Declared derivative of a piecewise node at a guard junction.
#[derive(Debug, Clone, PartialEq)]
pub struct JunctionDerivative {
    pub point: RVec,
    pub gradient: RVec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Rational),
    Var(usize),
    Sum(Vec<Expr>),
    Scale(Rational, Box<Expr>),
    Product(Box<Expr>, Box<Expr>),
    Power(Box<Expr>, u32),
    Exp(Box<Expr>),
    Recip(Box<Expr>),
    Abs(Box<Expr>),
    Max(Vec<Expr>),
    Min(Vec<Expr>),
    Piecewise {
        pieces: Vec<Piece>,
        differentiable_at: Vec<JunctionDerivative>,
    },
}

impl Expr {
    pub fn constant(c: Rational) -> Expr {
        Expr::Const(c)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    /// Affine form `<a, x> + b`.
    pub fn affine(a: &[Rational], b: Rational) -> Expr {
        let mut terms: Vec<Expr> = a
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| {
                if c == &crate::num::one() {
                    Expr::Var(i)
                } else {
                    Expr::Scale(c.clone(), Box::new(Expr::Var(i)))
                }
            })
            .collect();
        if !b.is_zero() || terms.is_empty() {
            terms.push(Expr::Const(b));
        }
        if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::Sum(terms)
        }
    }

    pub fn scale(c: Rational, e: Expr) -> Expr {
        Expr::Scale(c, Box::new(e))
    }

    pub fn neg(e: Expr) -> Expr {
        Expr::Scale(-crate::num::one(), Box::new(e))
    }

    pub fn abs(e: Expr) -> Expr {
        Expr::Abs(Box::new(e))
    }

    pub fn exp(e: Expr) -> Expr {
        Expr::Exp(Box::new(e))
    }

    pub fn pow(e: Expr, k: u32) -> Expr {
        Expr::Power(Box::new(e), k)
    }

    pub fn product(a: Expr, b: Expr) -> Expr {
        Expr::Product(Box::new(a), Box::new(b))
    }

    pub fn recip(e: Expr) -> Expr {
        Expr::Recip(Box::new(e))
    }

    /// Immediate subexpressions, piece bodies included.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Const(_) | Expr::Var(_) => Vec::new(),
            Expr::Sum(v) | Expr::Max(v) | Expr::Min(v) => v.iter().collect(),
            Expr::Scale(_, e) | Expr::Power(e, _) | Expr::Exp(e) | Expr::Recip(e) | Expr::Abs(e) => vec![e],
            Expr::Product(a, b) => vec![a, b],
            Expr::Piecewise { pieces, .. } => pieces.iter().map(|p| &p.expr).collect(),
        }
    }

    /// One more than the largest variable index used, guards included.
    pub fn min_dim(&self) -> usize {
        let own = match self {
            Expr::Var(i) => i + 1,
            Expr::Piecewise {
                pieces,
                differentiable_at,
            } => pieces
                .iter()
                .flat_map(|p| p.guard.atoms.iter().map(|a| a.normal.len()))
                .chain(differentiable_at.iter().map(|j| j.point.len()))
                .max()
                .unwrap_or(0),
            _ => 0,
        };
        self.children().into_iter().map(Expr::min_dim).fold(own, usize::max)
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        let need = self.min_dim();
        if need > n {
            return Err(Error::input(format!(
                "expression refers to dimension {need}, point has {n}"
            )));
        }
        if let Expr::Piecewise {
            pieces,
            differentiable_at,
        } = self
        {
            for a in pieces.iter().flat_map(|p| &p.guard.atoms) {
                crate::num::check_dim("guard normal", a.normal.len(), n)?;
            }
            for j in differentiable_at {
                crate::num::check_dim("junction point", j.point.len(), n)?;
                crate::num::check_dim("junction gradient", j.gradient.len(), n)?;
            }
        }
        self.children().into_iter().try_for_each(|c| c.check_dim(n))
    }

    /// No abs/max/min/piecewise anywhere in the tree.
    pub fn is_smooth(&self) -> bool {
        !matches!(
            self,
            Expr::Abs(_) | Expr::Max(_) | Expr::Min(_) | Expr::Piecewise { .. }
        ) && self.children().into_iter().all(Expr::is_smooth)
    }

    pub fn contains_exp(&self) -> bool {
        matches!(self, Expr::Exp(_)) || self.children().into_iter().any(Expr::contains_exp)
    }

    pub fn contains_piecewise(&self) -> bool {
        matches!(self, Expr::Piecewise { .. }) || self.children().into_iter().any(Expr::contains_piecewise)
    }

    /// `Some((a, b))` when the expression is structurally affine `<a, x> + b`.
    pub fn as_affine(&self, n: usize) -> Option<(RVec, Rational)> {
        match self {
            Expr::Const(c) => Some((crate::num::zeros(n), c.clone())),
            Expr::Var(i) if *i < n => Some((crate::num::unit(n, *i), Rational::zero())),
            Expr::Var(_) => None,
            Expr::Sum(v) => v.iter().try_fold((crate::num::zeros(n), Rational::zero()), |(a, b), e| {
                let (ea, eb) = e.as_affine(n)?;
                Some((crate::num::add(&a, &ea), b + eb))
            }),
            Expr::Scale(c, e) => {
                let (a, b) = e.as_affine(n)?;
                Some((crate::num::scale(c, &a), c * b))
            }
            Expr::Product(a, b) => {
                let (aa, ab) = a.as_affine(n)?;
                let (ba, bb) = b.as_affine(n)?;
                if crate::num::is_zero_vec(&aa) {
                    Some((crate::num::scale(&ab, &ba), ab * bb))
                } else if crate::num::is_zero_vec(&ba) {
                    Some((crate::num::scale(&bb, &aa), ab * bb))
                } else {
                    None
                }
            }
            Expr::Power(e, 1) => e.as_affine(n),
            Expr::Power(e, 0) => {
                let _ = e;
                Some((crate::num::zeros(n), crate::num::one()))
            }
            _ => None,
        }
    }

    /// All guard atoms of every piecewise node in the tree.
    pub fn guard_atoms(&self) -> Vec<&GuardAtom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a GuardAtom>) {
        if let Expr::Piecewise { pieces, .. } = self {
            out.extend(pieces.iter().flat_map(|p| &p.guard.atoms));
        }
        for c in self.children() {
            c.collect_atoms(out);
        }
    }
}

/// Exact rational, or an `f64` approximation once `exp` is on the path.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Exact(Rational),
    Approx(f64),
}

impl Value {
    pub fn zero() -> Value {
        Value::Exact(Rational::zero())
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Value::Exact(_))
    }

    pub fn exact(&self) -> Option<&Rational> {
        match self {
            Value::Exact(r) => Some(r),
            Value::Approx(_) => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Exact(r) => to_f64(r),
            Value::Approx(v) => *v,
        }
    }

    pub fn add(&self, o: &Value) -> Value {
        match (self, o) {
            (Value::Exact(a), Value::Exact(b)) => Value::Exact(a + b),
            _ => Value::Approx(self.to_f64() + o.to_f64()),
        }
    }

    pub fn sub(&self, o: &Value) -> Value {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Value) -> Value {
        match (self, o) {
            (Value::Exact(a), Value::Exact(b)) => Value::Exact(a * b),
            _ => Value::Approx(self.to_f64() * o.to_f64()),
        }
    }

    pub fn scale(&self, c: &Rational) -> Value {
        match self {
            Value::Exact(a) => Value::Exact(c * a),
            Value::Approx(v) => Value::Approx(to_f64(c) * v),
        }
    }

    pub fn neg(&self) -> Value {
        match self {
            Value::Exact(a) => Value::Exact(-a),
            Value::Approx(v) => Value::Approx(-v),
        }
    }

    pub fn abs(&self) -> Value {
        match self {
            Value::Exact(a) => Value::Exact(a.abs()),
            Value::Approx(v) => Value::Approx(v.abs()),
        }
    }

    pub fn powi(&self, k: u32) -> Value {
        match self {
            Value::Exact(a) => Value::Exact(num_traits::pow(a.clone(), k as usize)),
            Value::Approx(v) => Value::Approx(v.powi(k as i32)),
        }
    }

    pub fn exp(&self) -> Value {
        Value::Approx(self.to_f64().exp())
    }

    /// `None` at an exact zero.
    pub fn recip(&self) -> Option<Value> {
        match self {
            Value::Exact(a) if a.is_zero() => None,
            Value::Exact(a) => Some(Value::Exact(a.recip())),
            Value::Approx(v) => Some(Value::Approx(1.0 / v)),
        }
    }

    /// `0` when `|self| <= tol` in approximate mode, exact sign otherwise.
    pub fn sign(&self, tol: f64) -> i8 {
        match self {
            Value::Exact(a) => {
                if a.is_zero() {
                    0
                } else if a.is_positive() {
                    1
                } else {
                    -1
                }
            }
            Value::Approx(v) => {
                if v.abs() <= tol {
                    0
                } else if *v > 0.0 {
                    1
                } else {
                    -1
                }
            }
        }
    }

    pub fn render(&self) -> String {
        match self {
            Value::Exact(r) => crate::num::fmt_rational(r),
            Value::Approx(v) => format!("~{v:e}"),
        }
    }
}

/// Float tolerance for approximate values; `OPTCERT_FLOAT_TOL` overrides the
/// default `1e-9`.
pub fn float_tol() -> f64 {
    static TOL: OnceLock<f64> = OnceLock::new();
    *TOL.get_or_init(|| {
        std::env::var("OPTCERT_FLOAT_TOL")
            .ok()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite() && *v > 0.0)
            .unwrap_or(1e-9)
    })
}

pub(crate) fn fmt_point(x: &[Rational]) -> String {
    fmt_vec(x).join(", ")
}

#[allow(dead_code)]
pub(crate) fn rational_to_u32(r: &Rational) -> Option<u32> {
    if r.is_integer() {
        r.to_integer().to_u32()
    } else {
        None
    }
}
