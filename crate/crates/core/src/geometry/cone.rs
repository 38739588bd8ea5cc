use num_traits::Zero;

use crate::error::{Error, Result};
use crate::lp::{hull_membership, solve_lp, HullMode, LinearProgram, LpResult, Membership};
use crate::num::{check_dim, dot, fmt_rational, fmt_vec, is_zero_vec, neg, unit, RVec, Rational};

/// `<normal, x> <= rhs` (or `= rhs` when stored as an equality).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Halfspace {
    pub normal: RVec,
    pub rhs: Rational,
}

impl Halfspace {
    pub fn new(normal: RVec, rhs: Rational) -> Self {
        Halfspace { normal, rhs }
    }

    pub fn homogeneous(normal: RVec) -> Self {
        Halfspace {
            normal,
            rhs: Rational::zero(),
        }
    }
}

/// Finite system of linear inequalities and equalities. May be empty,
/// unbounded, or the whole space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HPolyhedron {
    dim: usize,
    pub ineqs: Vec<Halfspace>,
    pub eqs: Vec<Halfspace>,
}

impl HPolyhedron {
    pub fn new(dim: usize, ineqs: Vec<Halfspace>, eqs: Vec<Halfspace>) -> Result<Self> {
        for h in ineqs.iter().chain(&eqs) {
            check_dim("half-space normal", h.normal.len(), dim)?;
        }
        Ok(HPolyhedron { dim, ineqs, eqs })
    }

    pub fn whole_space(dim: usize) -> Self {
        HPolyhedron {
            dim,
            ineqs: Vec::new(),
            eqs: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Describes the first row `x` violates, if any.
    pub fn violated_row(&self, x: &[Rational]) -> Option<String> {
        for (i, h) in self.ineqs.iter().enumerate() {
            let lhs = dot(&h.normal, x);
            if lhs > h.rhs {
                return Some(format!(
                    "inequality row {i}: <({}), x> = {} > {}",
                    fmt_vec(&h.normal).join(", "),
                    fmt_rational(&lhs),
                    fmt_rational(&h.rhs)
                ));
            }
        }
        for (j, h) in self.eqs.iter().enumerate() {
            let lhs = dot(&h.normal, x);
            if lhs != h.rhs {
                return Some(format!(
                    "equality row {j}: <({}), x> = {} != {}",
                    fmt_vec(&h.normal).join(", "),
                    fmt_rational(&lhs),
                    fmt_rational(&h.rhs)
                ));
            }
        }
        None
    }

    pub fn contains(&self, x: &[Rational]) -> Result<bool> {
        check_dim("point", x.len(), self.dim)?;
        Ok(self.violated_row(x).is_none())
    }

    fn to_lp(&self) -> LinearProgram {
        let mut lp = LinearProgram::new(self.dim);
        for h in &self.ineqs {
            lp.add_le(h.normal.clone(), h.rhs.clone());
        }
        for h in &self.eqs {
            lp.add_eq(h.normal.clone(), h.rhs.clone());
        }
        lp
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(solve_lp(&self.to_lp())?.is_infeasible())
    }

    /// `sup <c, x>` over the set; `None` when unbounded or empty.
    pub fn maximize(&self, c: &[Rational]) -> Result<Option<Rational>> {
        check_dim("objective", c.len(), self.dim)?;
        let mut lp = self.to_lp();
        lp.maximize(c.to_vec());
        Ok(match solve_lp(&lp)? {
            LpResult::Optimal { value, .. } => Some(value),
            _ => None,
        })
    }

    /// For homogeneous systems (cones): does every point of `self` satisfy
    /// every row of `other`?
    pub fn cone_subset_of(&self, other: &HPolyhedron) -> Result<bool> {
        check_dim("cone", other.dim, self.dim)?;
        let implied = |a: &RVec| -> Result<bool> {
            // A homogeneous cone is unbounded in a violating direction.
            Ok(matches!(self.maximize(a)?, Some(v) if v <= Rational::zero()))
        };
        for h in &other.ineqs {
            if !implied(&h.normal)? {
                return Ok(false);
            }
        }
        for h in &other.eqs {
            if !implied(&h.normal)? || !implied(&neg(&h.normal))? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// `cone(rays) + span(lines)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinitelyGeneratedCone {
    dim: usize,
    pub rays: Vec<RVec>,
    pub lines: Vec<RVec>,
}

impl FinitelyGeneratedCone {
    pub fn new(dim: usize, rays: Vec<RVec>, lines: Vec<RVec>) -> Result<Self> {
        for g in rays.iter().chain(&lines) {
            check_dim("cone generator", g.len(), dim)?;
        }
        Ok(FinitelyGeneratedCone { dim, rays, lines })
    }

    pub fn zero(dim: usize) -> Self {
        FinitelyGeneratedCone {
            dim,
            rays: Vec::new(),
            lines: Vec::new(),
        }
    }

    pub fn orthant(dim: usize) -> Self {
        FinitelyGeneratedCone {
            dim,
            rays: (0..dim).map(|i| unit(dim, i)).collect(),
            lines: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Rays together with both orientations of every line.
    pub fn all_generators(&self) -> Vec<RVec> {
        let mut g = self.rays.clone();
        for l in &self.lines {
            g.push(l.clone());
            g.push(neg(l));
        }
        g
    }

    /// Conic membership; on failure the separator lies in the polar cone.
    pub fn contains(&self, v: &[Rational]) -> Result<Membership> {
        check_dim("point", v.len(), self.dim)?;
        let gens = self.all_generators();
        if gens.is_empty() {
            // The trivial cone {0}: any nonzero v is separated by itself.
            return Ok(if is_zero_vec(v) {
                Membership::Inside {
                    coefficients: Vec::new(),
                }
            } else {
                let n2 = dot(v, v);
                Membership::Outside {
                    separator: v.iter().map(|x| x / &n2).collect(),
                    offset: Rational::zero(),
                }
            });
        }
        hull_membership(v, &gens, HullMode::Conic)
    }
}

/// Polar `{y : <a, y> <= 0 for rays a, <b, y> = 0 for lines b}`.
pub fn polar_cone(c: &FinitelyGeneratedCone) -> HPolyhedron {
    HPolyhedron {
        dim: c.dim,
        ineqs: c.rays.iter().cloned().map(Halfspace::homogeneous).collect(),
        eqs: c.lines.iter().cloned().map(Halfspace::homogeneous).collect(),
    }
}

/// Tangent and normal cones of a polyhedron at a feasible point, built from
/// the exactly-active rows.
pub fn tangent_normal_cones(s: &HPolyhedron, x: &[Rational]) -> Result<(HPolyhedron, FinitelyGeneratedCone)> {
    check_dim("point", x.len(), s.dim)?;
    if let Some(row) = s.violated_row(x) {
        return Err(Error::precondition(format!("point is infeasible: {row}")));
    }
    let active: Vec<RVec> = s
        .ineqs
        .iter()
        .filter(|h| dot(&h.normal, x) == h.rhs)
        .map(|h| h.normal.clone())
        .collect();
    let eq_normals: Vec<RVec> = s.eqs.iter().map(|h| h.normal.clone()).collect();
    let tangent = HPolyhedron {
        dim: s.dim,
        ineqs: active.iter().cloned().map(Halfspace::homogeneous).collect(),
        eqs: eq_normals.iter().cloned().map(Halfspace::homogeneous).collect(),
    };
    let normal = FinitelyGeneratedCone {
        dim: s.dim,
        rays: active,
        lines: eq_normals,
    };
    Ok((tangent, normal))
}

impl HPolyhedron {
    /// Bounding box rows `-bound <= x_k <= bound` appended to a copy.
    pub fn with_box(&self, bound: &Rational) -> HPolyhedron {
        let mut out = self.clone();
        for k in 0..self.dim {
            out.ineqs.push(Halfspace::new(unit(self.dim, k), bound.clone()));
            out.ineqs.push(Halfspace::new(neg(&unit(self.dim, k)), bound.clone()));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rvec;

    #[test]
    fn polar_of_orthant() {
        let c = FinitelyGeneratedCone::orthant(2);
        let p = polar_cone(&c);
        assert!(p.contains(&rvec(&[-1, -1])).unwrap());
        assert!(!p.contains(&rvec(&[1, 0])).unwrap());
        assert!(p.contains(&rvec(&[0, 0])).unwrap());
    }

    #[test]
    fn polar_of_line() {
        let c = FinitelyGeneratedCone::new(2, vec![], vec![rvec(&[0, 1])]).unwrap();
        let p = polar_cone(&c);
        assert!(p.contains(&rvec(&[1, 0])).unwrap());
        assert!(!p.contains(&rvec(&[0, 1])).unwrap());
    }

    fn nonneg_quadrant() -> HPolyhedron {
        HPolyhedron::new(
            2,
            vec![
                Halfspace::homogeneous(rvec(&[-1, 0])),
                Halfspace::homogeneous(rvec(&[0, -1])),
            ],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn cones_at_corner() {
        let (t, n) = tangent_normal_cones(&nonneg_quadrant(), &rvec(&[0, 0])).unwrap();
        assert!(t.contains(&rvec(&[1, 2])).unwrap());
        assert!(!t.contains(&rvec(&[-1, 0])).unwrap());
        assert_eq!(n.rays, vec![rvec(&[-1, 0]), rvec(&[0, -1])]);
        // N = T*: every normal generator is in the polar of T.
        for g in n.all_generators() {
            for d in [rvec(&[1, 0]), rvec(&[0, 1]), rvec(&[3, 5])] {
                assert!(dot(&g, &d) <= Rational::zero());
            }
        }
        assert!(n.contains(&rvec(&[-2, -3])).unwrap().is_inside());
    }

    #[test]
    fn cones_at_interior_point() {
        let (t, n) = tangent_normal_cones(&nonneg_quadrant(), &rvec(&[1, 1])).unwrap();
        assert!(t.ineqs.is_empty() && t.eqs.is_empty());
        assert!(n.all_generators().is_empty());
        assert!(n.contains(&rvec(&[0, 0])).unwrap().is_inside());
        assert!(!n.contains(&rvec(&[1, 0])).unwrap().is_inside());
    }

    #[test]
    fn cones_with_equality() {
        let s = HPolyhedron::new(2, vec![], vec![Halfspace::homogeneous(rvec(&[0, 1]))]).unwrap();
        let (t, n) = tangent_normal_cones(&s, &rvec(&[0, 0])).unwrap();
        assert!(t.contains(&rvec(&[5, 0])).unwrap());
        assert!(!t.contains(&rvec(&[0, 1])).unwrap());
        assert_eq!(n.lines, vec![rvec(&[0, 1])]);
        assert!(n.contains(&rvec(&[0, -4])).unwrap().is_inside());
    }

    #[test]
    fn infeasible_point_names_row() {
        let err = tangent_normal_cones(&nonneg_quadrant(), &rvec(&[-1, 0])).unwrap_err();
        match err {
            Error::Precondition(msg) => assert!(msg.contains("inequality row 0")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cone_inclusion() {
        let quad = nonneg_quadrant();
        let half = HPolyhedron::new(2, vec![Halfspace::homogeneous(rvec(&[-1, 0]))], vec![]).unwrap();
        assert!(quad.cone_subset_of(&half).unwrap());
        assert!(!half.cone_subset_of(&quad).unwrap());
    }
}
