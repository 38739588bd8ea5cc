use std::fmt;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::lp::{hull_membership, HullMode, Membership};
use crate::num::{add, check_dim, dot, fmt_vec, RVec, Rational};

/// Convex hull of a nonempty finite point list. Redundant (non-extreme)
/// points are allowed; every query goes through support values or the LP.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VPolytope {
    vertices: Vec<RVec>,
    dim: usize,
}

/// Outcome of an inclusion test `inner ⊆ outer`.
#[derive(Debug, Clone, PartialEq)]
pub struct Containment {
    pub holds: bool,
    /// On failure: the offending vertex of `inner` with an affine separator
    /// `<separator, v> <= offset` on `outer`, violated by the vertex.
    pub witness: Option<(RVec, RVec, Rational)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolyOp {
    MinkowskiSum,
    Scale(Rational),
    HullUnion,
}

impl VPolytope {
    pub fn new(vertices: Vec<RVec>) -> Result<Self> {
        let Some(first) = vertices.first() else {
            return Err(Error::input("polytope needs at least one vertex"));
        };
        let dim = first.len();
        for v in &vertices {
            check_dim("polytope vertex", v.len(), dim)?;
        }
        let mut out = VPolytope { vertices: Vec::new(), dim };
        for v in vertices {
            out.push_unique(v);
        }
        Ok(out)
    }

    pub fn singleton(v: RVec) -> Self {
        VPolytope {
            dim: v.len(),
            vertices: vec![v],
        }
    }

    pub fn origin(dim: usize) -> Self {
        Self::singleton(vec![Rational::zero(); dim])
    }

    fn push_unique(&mut self, v: RVec) {
        if !self.vertices.contains(&v) {
            self.vertices.push(v);
        }
    }

    pub fn vertices(&self) -> &[RVec] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `max <v, d>` over the vertex list.
    pub fn support_value(&self, direction: &[Rational]) -> Result<Rational> {
        check_dim("support direction", direction.len(), self.dim)?;
        Ok(self
            .vertices
            .iter()
            .map(|v| dot(v, direction))
            .max()
            .expect("nonempty"))
    }

    /// `min <v, d>` over the vertex list.
    pub fn min_value(&self, direction: &[Rational]) -> Result<Rational> {
        check_dim("direction", direction.len(), self.dim)?;
        Ok(self
            .vertices
            .iter()
            .map(|v| dot(v, direction))
            .min()
            .expect("nonempty"))
    }

    pub fn minkowski_sum(&self, other: &VPolytope) -> Result<VPolytope> {
        check_dim("minkowski operand", other.dim, self.dim)?;
        let mut out = VPolytope {
            vertices: Vec::with_capacity(self.vertices.len() * other.vertices.len()),
            dim: self.dim,
        };
        for a in &self.vertices {
            for b in &other.vertices {
                out.push_unique(add(a, b));
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: &Rational) -> VPolytope {
        let mut out = VPolytope {
            vertices: Vec::new(),
            dim: self.dim,
        };
        for v in &self.vertices {
            out.push_unique(v.iter().map(|x| c * x).collect());
        }
        out
    }

    pub fn negate(&self) -> VPolytope {
        self.scale(&-crate::num::one())
    }

    pub fn translate(&self, t: &[Rational]) -> Result<VPolytope> {
        self.minkowski_sum(&VPolytope::singleton(t.to_vec()))
    }

    pub fn hull_union(&self, other: &VPolytope) -> Result<VPolytope> {
        check_dim("hull operand", other.dim, self.dim)?;
        let mut out = self.clone();
        for v in &other.vertices {
            out.push_unique(v.clone());
        }
        Ok(out)
    }

    pub fn contains_point(&self, p: &[Rational]) -> Result<Membership> {
        check_dim("point", p.len(), self.dim)?;
        hull_membership(p, &self.vertices, HullMode::Convex)
    }

    /// `inner ⊆ self`, decided vertex by vertex.
    pub fn contains(&self, inner: &VPolytope) -> Result<Containment> {
        check_dim("inner polytope", inner.dim, self.dim)?;
        for v in &inner.vertices {
            if let Membership::Outside { separator, offset } = self.contains_point(v)? {
                return Ok(Containment {
                    holds: false,
                    witness: Some((v.clone(), separator, offset)),
                });
            }
        }
        Ok(Containment {
            holds: true,
            witness: None,
        })
    }

    /// Set equality by mutual inclusion.
    pub fn same_set(&self, other: &VPolytope) -> Result<bool> {
        Ok(self.contains(other)?.holds && other.contains(self)?.holds)
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        self.vertices.iter().map(|v| fmt_vec(v)).collect()
    }
}

impl fmt::Display for VPolytope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "conv{{")?;
        for (i, v) in self.vertices.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "({})", fmt_vec(v).join(", "))?;
        }
        write!(f, "}}")
    }
}

/// Minkowski sum and hull union fold over all arguments; scale takes exactly one.
pub fn poly_combine(op: &PolyOp, args: &[&VPolytope]) -> Result<VPolytope> {
    let (first, rest) = args
        .split_first()
        .ok_or_else(|| Error::input("poly_combine needs at least one polytope"))?;
    match op {
        PolyOp::Scale(c) => {
            if !rest.is_empty() {
                return Err(Error::input("scale takes a single polytope"));
            }
            Ok(first.scale(c))
        }
        PolyOp::MinkowskiSum => rest
            .iter()
            .try_fold((*first).clone(), |acc, p| acc.minkowski_sum(p)),
        PolyOp::HullUnion => rest
            .iter()
            .try_fold((*first).clone(), |acc, p| acc.hull_union(p)),
    }
}
