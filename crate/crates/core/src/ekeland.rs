//! Ekeland's variational principle on finite metric spaces, run as the
//! iteration from its proof.

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::num::{fmt_rational, one, Rational};

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    pub labels: Vec<String>,
    pub dist: Vec<Vec<Rational>>,
}

impl FiniteMetricSpace {
    /// Validates every metric axiom exactly.
    pub fn new(labels: Vec<String>, dist: Vec<Vec<Rational>>) -> Result<Self> {
        let m = FiniteMetricSpace { labels, dist };
        validate_metric_space(&m)?;
        Ok(m)
    }

    /// Points labelled `0, 1, ...`.
    pub fn unlabeled(dist: Vec<Vec<Rational>>) -> Result<Self> {
        let labels = (0..dist.len()).map(|i| i.to_string()).collect();
        Self::new(labels, dist)
    }

    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn d(&self, i: usize, j: usize) -> &Rational {
        &self.dist[i][j]
    }

    /// Parses `n` followed by `n` rows of `n` rationals. Optional labels may
    /// be given on the first line after `n`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let head = lines.next().ok_or_else(|| Error::input("empty metric-space file"))?;
        let mut head_tokens = head.split_whitespace();
        let n: usize = head_tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::input(format!("line 1: expected point count, got '{head}'")))?;
        let mut labels: Vec<String> = head_tokens.map(String::from).collect();
        if labels.is_empty() {
            labels = (0..n).map(|i| i.to_string()).collect();
        } else if labels.len() != n {
            return Err(Error::input(format!("line 1: {} labels for {n} points", labels.len())));
        }
        let mut dist = Vec::with_capacity(n);
        for r in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::input(format!("expected {n} matrix rows, found {r}")))?;
            let row: Vec<Rational> = line
                .split_whitespace()
                .map(crate::num::parse_rational)
                .collect::<Result<_>>()
                .map_err(|e| Error::input(format!("matrix row {r}: {e}")))?;
            if row.len() != n {
                return Err(Error::input(format!("matrix row {r} has {} entries, expected {n}", row.len())));
            }
            dist.push(row);
        }
        if lines.next().is_some() {
            return Err(Error::input(format!("trailing content after {n} matrix rows")));
        }
        Self::new(labels, dist)
    }
}

/// Exact check of the metric axioms; the error names the first violating
/// pair or triple.
pub fn validate_metric_space(m: &FiniteMetricSpace) -> Result<()> {
    let n = m.dist.len();
    if m.labels.len() != n {
        return Err(Error::input(format!("{} labels for {n} points", m.labels.len())));
    }
    if n == 0 {
        return Err(Error::input("metric space has no points"));
    }
    for (i, row) in m.dist.iter().enumerate() {
        if row.len() != n {
            return Err(Error::input(format!("distance matrix is not square: row {i} has {} entries", row.len())));
        }
    }
    for i in 0..n {
        if !m.dist[i][i].is_zero() {
            return Err(Error::input(format!("nonzero self-distance at ({i},{i})")));
        }
        for j in i + 1..n {
            if m.dist[i][j] != m.dist[j][i] {
                return Err(Error::input(format!("asymmetric ({i},{j})")));
            }
            if !m.dist[i][j].is_positive() {
                return Err(Error::input(format!("nonpositive distance at ({i},{j})")));
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                let via = &m.dist[i][k] + &m.dist[k][j];
                if m.dist[i][j] > via {
                    return Err(Error::input(format!(
                        "triangle ({i},{j}) via {k}: {} > {}",
                        fmt_rational(&m.dist[i][j]),
                        fmt_rational(&via)
                    )));
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub point: usize,
    /// `S_i`, as point indices in ascending order.
    pub set: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EkelandResult {
    pub y: usize,
    pub iterates: Vec<Iterate>,
    /// `d(z, y) <= λ`.
    pub within_radius: bool,
    /// `f(y) + (ε/λ) d(z, y) <= f(z)`.
    pub improves: bool,
    /// `f(x) + (ε/λ) d(x, y) >= f(y)` for every `x`.
    pub strict_minimizer: bool,
    /// `f(z_{i+1}) < f(z_i)` until the fixpoint.
    pub monotone: bool,
    /// `S_{i+1} ⊆ S_i`.
    pub nested: bool,
}

impl EkelandResult {
    pub fn all_checks(&self) -> bool {
        self.within_radius && self.improves && self.strict_minimizer && self.monotone && self.nested
    }
}

/// Runs `z_{i+1} = argmin f over S_i`, `S_i = {x : f(x) + (ε/λ) d(x, z_i) <= f(z_i)}`,
/// ties broken by lowest index, until `z_{i+1} = z_i`.
pub fn ekeland_point(
    m: &FiniteMetricSpace,
    f: &[Rational],
    z: usize,
    eps: &Rational,
    lambda: Option<&Rational>,
) -> Result<EkelandResult> {
    let n = m.len();
    if f.len() != n {
        return Err(Error::input(format!("{} function values for {n} points", f.len())));
    }
    if z >= n {
        return Err(Error::input(format!("start point {z} out of range")));
    }
    let lambda = lambda.cloned().unwrap_or_else(one);
    if !eps.is_positive() || !lambda.is_positive() {
        return Err(Error::input("epsilon and lambda must be positive"));
    }
    let inf = f.iter().min().expect("nonempty").clone();
    if f[z] >= &inf + eps {
        return Err(Error::precondition(format!(
            "f(z) = {} is not below inf f + eps = {}",
            fmt_rational(&f[z]),
            fmt_rational(&(&inf + eps))
        )));
    }
    let rate = eps / &lambda;
    let s_of = |c: usize| -> Vec<usize> { (0..n).filter(|&x| &f[x] + &rate * m.d(x, c) <= f[c]).collect() };

    let mut iterates = Vec::new();
    let mut cur = z;
    let mut monotone = true;
    let mut nested = true;
    loop {
        let set = s_of(cur);
        if let Some(prev) = iterates.last() {
            let prev: &Iterate = prev;
            nested &= set.iter().all(|x| prev.set.contains(x));
        }
        // S contains cur itself, so the argmin exists.
        let next = *set
            .iter()
            .min_by(|&&a, &&b| f[a].cmp(&f[b]).then(a.cmp(&b)))
            .expect("S_i contains z_i");
        iterates.push(Iterate { point: cur, set });
        if next == cur {
            break;
        }
        monotone &= f[next] < f[cur];
        cur = next;
    }
    let y = cur;
    let within_radius = m.d(z, y) <= &lambda;
    let improves = &f[y] + &rate * m.d(z, y) <= f[z];
    let strict_minimizer = (0..n).all(|x| &f[x] + &rate * m.d(x, y) >= f[y]);
    Ok(EkelandResult {
        y,
        iterates,
        within_radius,
        improves,
        strict_minimizer,
        monotone,
        nested,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{int, rvec};

    fn space(rows: &[&[i64]]) -> Result<FiniteMetricSpace> {
        FiniteMetricSpace::unlabeled(rows.iter().map(|r| rvec(r)).collect())
    }

    #[test]
    fn metric_validation() {
        assert!(space(&[&[0, 1], &[1, 0]]).is_ok());
        let err = space(&[&[0, 1], &[2, 0]]).unwrap_err().to_string();
        assert!(err.contains("asymmetric (0,1)"), "{err}");
        let err = space(&[&[0, 5, 1], &[5, 0, 1], &[1, 1, 0]]).unwrap_err().to_string();
        assert!(err.contains("triangle (0,1) via 2: 5 > 2"), "{err}");
        assert!(space(&[&[0, 0], &[0, 0]]).is_err());
    }

    #[test]
    fn already_minimal() {
        let m = space(&[&[0, 1], &[1, 0]]).unwrap();
        let r = ekeland_point(&m, &rvec(&[0, 10]), 0, &int(1), None).unwrap();
        assert_eq!(r.y, 0);
        assert!(r.all_checks());
    }

    #[test]
    fn penalty_keeps_start() {
        let m = space(&[&[0, 1], &[1, 0]]).unwrap();
        let r = ekeland_point(&m, &rvec(&[1, 0]), 0, &int(2), Some(&int(1))).unwrap();
        assert_eq!(r.iterates[0].set, vec![0]);
        assert_eq!(r.y, 0);
        assert!(r.all_checks());
    }

    #[test]
    fn chain_space() {
        let m = space(&[&[0, 1, 2], &[1, 0, 1], &[2, 1, 0]]).unwrap();
        let r = ekeland_point(&m, &rvec(&[3, 1, 0]), 0, &int(4), Some(&int(1))).unwrap();
        assert_eq!(r.iterates[0].set, vec![0]);
        assert_eq!(r.y, 0);
        assert!(r.all_checks());
    }

    #[test]
    fn moves_when_progress_is_possible() {
        let m = space(&[&[0, 1, 2], &[1, 0, 1], &[2, 1, 0]]).unwrap();
        // eps = 4, lambda = 8: rate 1/2.
        let r = ekeland_point(&m, &rvec(&[3, 1, 0]), 0, &int(4), Some(&int(8))).unwrap();
        assert_eq!(r.y, 2);
        assert!(r.all_checks());
    }

    #[test]
    fn hypothesis_enforced() {
        let m = space(&[&[0, 1], &[1, 0]]).unwrap();
        let err = ekeland_point(&m, &rvec(&[5, 0]), 0, &int(1), None).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn parse_file() {
        let m = FiniteMetricSpace::parse("2 a b\n0 1/2\n1/2 0\n").unwrap();
        assert_eq!(m.index_of("b"), Some(1));
        assert!(FiniteMetricSpace::parse("2\n0 1\n").is_err());
    }
}
