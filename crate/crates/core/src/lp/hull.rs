use num_traits::{One, Zero};

use super::{solve_lp, LinearProgram, LpResult};
use crate::error::{Error, Result};
use crate::num::{check_dim, neg, RVec, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HullMode {
    /// `sum l_i = 1, l >= 0`.
    Convex,
    /// `l >= 0`.
    Conic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Membership {
    Inside {
        coefficients: RVec,
    },
    /// `<separator, v_i> <= offset` for every generator and
    /// `<separator, point> = offset + 1`. In conic mode `offset` is zero.
    Outside {
        separator: RVec,
        offset: Rational,
    },
}

impl Membership {
    pub fn is_inside(&self) -> bool {
        matches!(self, Membership::Inside { .. })
    }
}

/// Decides whether `point` is a convex (or conic) combination of `generators`.
pub fn hull_membership(point: &[Rational], generators: &[RVec], mode: HullMode) -> Result<Membership> {
    if generators.is_empty() {
        return Err(Error::input("hull membership needs at least one generator"));
    }
    let n = point.len();
    for g in generators {
        check_dim("generator", g.len(), n)?;
    }
    let m = generators.len();
    let mut lp = LinearProgram::new(m);
    lp.all_nonneg();
    for k in 0..n {
        lp.add_eq(generators.iter().map(|g| g[k].clone()).collect(), point[k].clone());
    }
    if mode == HullMode::Convex {
        lp.add_eq(vec![Rational::one(); m], Rational::one());
    }
    match solve_lp(&lp)? {
        LpResult::Optimal { solution, .. } => Ok(Membership::Inside {
            coefficients: solution,
        }),
        LpResult::Infeasible { farkas } => {
            let separator = neg(&farkas[..n]);
            let offset = match mode {
                HullMode::Convex => farkas[n].clone(),
                HullMode::Conic => Rational::zero(),
            };
            Ok(Membership::Outside { separator, offset })
        }
        LpResult::Unbounded { .. } => unreachable!("feasibility program has no objective"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{dot, frac, int, rvec};

    fn check_separator(point: &[Rational], gens: &[RVec], sep: &[Rational], off: &Rational) {
        for g in gens {
            assert!(dot(sep, g) <= *off);
        }
        assert_eq!(dot(sep, point), off + int(1));
    }

    #[test]
    fn midpoint_of_segment() {
        let m = hull_membership(&rvec(&[0]), &[rvec(&[-1]), rvec(&[1])], HullMode::Convex).unwrap();
        assert_eq!(
            m,
            Membership::Inside {
                coefficients: vec![frac(1, 2), frac(1, 2)]
            }
        );
    }

    #[test]
    fn orthant_cone_membership() {
        let gens = [rvec(&[1, 0]), rvec(&[0, 1])];
        let m = hull_membership(&rvec(&[1, 1]), &gens, HullMode::Conic).unwrap();
        assert_eq!(
            m,
            Membership::Inside {
                coefficients: rvec(&[1, 1])
            }
        );
    }

    #[test]
    fn orthant_cone_separator() {
        let gens = [rvec(&[1, 0]), rvec(&[0, 1])];
        let p = rvec(&[-1, 0]);
        match hull_membership(&p, &gens, HullMode::Conic).unwrap() {
            Membership::Outside { separator, offset } => {
                assert_eq!(offset, int(0));
                check_separator(&p, &gens, &separator, &offset);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn affine_separator_for_convex_mode() {
        let gens = [rvec(&[-1, 0]), rvec(&[1, 0]), rvec(&[0, 1])];
        let p = rvec(&[0, -1]);
        match hull_membership(&p, &gens, HullMode::Convex).unwrap() {
            Membership::Outside { separator, offset } => check_separator(&p, &gens, &separator, &offset),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_generators_rejected() {
        assert!(hull_membership(&rvec(&[0]), &[], HullMode::Conic).is_err());
    }
}
