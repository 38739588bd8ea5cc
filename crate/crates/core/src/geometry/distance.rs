use num_traits::{Signed, Zero};

use super::VPolytope;
use crate::error::{Error, Result};
use crate::num::{add, check_dim, dot, is_zero_vec, norm2, pow2_neg, scale, sub, to_f64, RVec, Rational};

#[derive(Debug, Clone, PartialEq)]
pub enum Tangency {
    Tangent,
    /// Final ratio `d(x + t v) / t` on the schedule.
    NotTangent { ratio: f64 },
    Inconclusive { reason: String },
}

/// Solves a small square system exactly; `None` when singular.
fn solve_square(mut a: Vec<RVec>, mut b: RVec) -> Option<RVec> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, p);
        b.swap(col, p);
        let inv = a[col][col].recip();
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = &a[r][col] * &inv;
            for c in col..n {
                let v = &f * &a[col][c];
                a[r][c] -= v;
            }
            let v = &f * &b[col];
            b[r] -= v;
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

fn subsets(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in start..n {
        cur.push(i);
        subsets(n, k, i + 1, cur, out);
        cur.pop();
    }
}

/// Exact squared Euclidean distance from `q` to the polytope, by projecting
/// onto the affine hull of every affinely independent vertex subset and
/// keeping the candidates that land inside their simplex. `None` above
/// dimension 3.
pub fn distance_squared(p: &VPolytope, q: &[Rational]) -> Result<Option<Rational>> {
    check_dim("point", q.len(), p.dim())?;
    if p.dim() > 3 {
        return Ok(None);
    }
    let verts = p.vertices();
    let max_k = (p.dim() + 1).min(verts.len());
    let mut best: Option<Rational> = None;
    for k in 1..=max_k {
        let mut idx = Vec::new();
        subsets(verts.len(), k, 0, &mut Vec::new(), &mut idx);
        for s in idx {
            let base = &verts[s[0]];
            let edges: Vec<RVec> = s[1..].iter().map(|&i| sub(&verts[i], base)).collect();
            let rel = sub(q, base);
            let mu = if edges.is_empty() {
                Vec::new()
            } else {
                let gram: Vec<RVec> = edges
                    .iter()
                    .map(|e| edges.iter().map(|f| dot(e, f)).collect())
                    .collect();
                let rhs: RVec = edges.iter().map(|e| dot(e, &rel)).collect();
                match solve_square(gram, rhs) {
                    Some(mu) => mu,
                    None => continue,
                }
            };
            let sum_mu: Rational = mu.iter().sum();
            if mu.iter().any(|m| m.is_negative()) || sum_mu > crate::num::one() {
                continue;
            }
            let mut proj = base.clone();
            for (m, e) in mu.iter().zip(&edges) {
                proj = add(&proj, &scale(m, e));
            }
            let d2 = norm2(&sub(q, &proj));
            if best.as_ref().map_or(true, |b| d2 < *b) {
                best = Some(d2);
            }
        }
    }
    Ok(best)
}

/// Decides `v ∈ T(P, x)` through the ratio `d_P(x + t v) / t` on
/// `t = 2^-k, k = 4..=24`: tangent iff the final ratio is below `1e-9`.
pub fn tangent_via_distance_oracle(p: &VPolytope, x: &[Rational], v: &[Rational]) -> Result<Tangency> {
    check_dim("direction", v.len(), p.dim())?;
    if !p.contains_point(x)?.is_inside() {
        return Err(Error::precondition("base point is not in the polytope"));
    }
    if is_zero_vec(v) {
        return Ok(Tangency::Tangent);
    }
    if p.dim() > 3 {
        return Ok(Tangency::Inconclusive {
            reason: format!("exact projection limited to dimension <= 3, got {}", p.dim()),
        });
    }
    // 1e-18 compared against ratio^2 = d^2 / t^2.
    let threshold = Rational::new(1.into(), num_bigint::BigInt::from(10).pow(18));
    let mut last = Rational::zero();
    for k in 4..=24 {
        let t = pow2_neg(k);
        let q = add(x, &scale(&t, v));
        let d2 = distance_squared(p, &q)?.expect("dimension checked");
        last = d2 / (&t * &t);
    }
    if last < threshold {
        Ok(Tangency::Tangent)
    } else {
        Ok(Tangency::NotTangent {
            ratio: to_f64(&last).sqrt(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{frac, int, rvec};

    fn segment() -> VPolytope {
        VPolytope::new(vec![rvec(&[0, 0]), rvec(&[1, 0])]).unwrap()
    }

    #[test]
    fn distances_to_segment() {
        let s = segment();
        assert_eq!(distance_squared(&s, &rvec(&[2, 0])).unwrap(), Some(int(1)));
        assert_eq!(distance_squared(&s, &[frac(1, 2), int(3)]).unwrap(), Some(int(9)));
        assert_eq!(distance_squared(&s, &[frac(1, 3), int(0)]).unwrap(), Some(int(0)));
    }

    #[test]
    fn distance_to_triangle_3d() {
        let tri = VPolytope::new(vec![rvec(&[0, 0, 0]), rvec(&[1, 0, 0]), rvec(&[0, 1, 0])]).unwrap();
        assert_eq!(
            distance_squared(&tri, &[frac(1, 4), frac(1, 4), int(2)]).unwrap(),
            Some(int(4))
        );
        // Nearest point (1/2, 1/2, 0) on the hypotenuse.
        assert_eq!(distance_squared(&tri, &rvec(&[1, 1, 0])).unwrap(), Some(frac(1, 2)));
    }

    #[test]
    fn oracle_cases() {
        let s = segment();
        let x = rvec(&[0, 0]);
        assert_eq!(tangent_via_distance_oracle(&s, &x, &rvec(&[1, 0])).unwrap(), Tangency::Tangent);
        match tangent_via_distance_oracle(&s, &x, &rvec(&[0, 1])).unwrap() {
            Tangency::NotTangent { ratio } => assert!((ratio - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert_eq!(tangent_via_distance_oracle(&s, &x, &rvec(&[0, 0])).unwrap(), Tangency::Tangent);
        assert!(tangent_via_distance_oracle(&s, &rvec(&[0, 1]), &rvec(&[1, 0])).is_err());
    }

    #[test]
    fn high_dimension_is_inconclusive() {
        let p = VPolytope::new(vec![rvec(&[0, 0, 0, 0]), rvec(&[1, 0, 0, 0])]).unwrap();
        let r = tangent_via_distance_oracle(&p, &rvec(&[0, 0, 0, 0]), &rvec(&[1, 0, 0, 0])).unwrap();
        assert!(matches!(r, Tangency::Inconclusive { .. }));
    }
}
