//! Multiplier certificates and the LP search shared by every multiplier rule.
//!
//! A rule asks for nonnegative `λ0, λ_i` (active inequalities) and free `μ_j`
//! with `0 ∈ λ0 ∂f + Σ λ_i ∂g_i + Σ μ_j ∂h_j`, where each `∂` is a polytope.
//! Points of a polytope are written as convex combinations of its vertices,
//! so the search is one LP per sign pattern of `μ`.

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::VPolytope;
use crate::lp::{kernel_vector, matrix_rank, solve_lp, LinearProgram, LpResult};
use crate::num::{add, fmt_rational, fmt_vec, neg, one, scale, zeros, RVec, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Holds,
    Fails,
    Inconclusive,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Holds => "holds",
            Status::Fails => "fails",
            Status::Inconclusive => "inconclusive",
        }
    }
}

/// Which function a witness term belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Objective,
    Inequality(usize),
    Equality(usize),
}

impl Role {
    pub fn label(self) -> String {
        match self {
            Role::Objective => "f".to_string(),
            Role::Inequality(i) => format!("g{i}"),
            Role::Equality(j) => format!("h{j}"),
        }
    }
}

/// `multiplier * vector`, with `vector` in the generalized derivative of `role`.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessTerm {
    pub role: Role,
    pub multiplier: Rational,
    pub vector: RVec,
}

/// A Farkas combination proving that one multiplier LP is infeasible, with
/// the direction it induces: `<v, direction> <= -1` for every vertex of every
/// set in the system (or `<= 0` beside the objective in KKT mode).
#[derive(Debug, Clone, PartialEq)]
pub struct Refutation {
    /// Signs of the equality multipliers for this LP; empty when `μ` is free.
    pub pattern: Vec<i8>,
    pub farkas: RVec,
    pub direction: RVec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub status: Status,
    pub lambda0: Option<Rational>,
    /// One entry per inequality; inactive ones are zero.
    pub lambdas: RVec,
    pub mus: RVec,
    pub witnesses: Vec<WitnessTerm>,
    pub refutations: Vec<Refutation>,
    pub normalization: String,
    /// Largest feasible `λ0` under the same normalization, when computed.
    pub lambda0_max: Option<Rational>,
    pub notes: Vec<String>,
}

impl Certificate {
    pub(crate) fn empty(status: Status, normalization: impl Into<String>) -> Self {
        Certificate {
            status,
            lambda0: None,
            lambdas: Vec::new(),
            mus: Vec::new(),
            witnesses: Vec::new(),
            refutations: Vec::new(),
            normalization: normalization.into(),
            lambda0_max: None,
            notes: Vec::new(),
        }
    }

    pub fn holds(&self) -> bool {
        self.status == Status::Holds
    }

    /// Exact re-check of a `holds` certificate: the weighted witness sum is
    /// zero and inequality multipliers are nonnegative.
    pub fn verify_witness(&self) -> bool {
        if self.witnesses.is_empty() {
            return false;
        }
        let n = self.witnesses[0].vector.len();
        let mut total = zeros(n);
        for w in &self.witnesses {
            if !matches!(w.role, Role::Equality(_)) && w.multiplier.is_negative() {
                return false;
            }
            total = add(&total, &scale(&w.multiplier, &w.vector));
        }
        crate::num::is_zero_vec(&total) && self.lambdas.iter().all(|l| !l.is_negative())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "status": self.status.as_str(),
            "lambda0": self.lambda0.as_ref().map(fmt_rational),
            "lambdas": fmt_vec(&self.lambdas),
            "mus": fmt_vec(&self.mus),
            "witnesses": self.witnesses.iter().map(|w| serde_json::json!({
                "function": w.role.label(),
                "multiplier": fmt_rational(&w.multiplier),
                "vector": fmt_vec(&w.vector),
            })).collect::<Vec<_>>(),
            "refutations": self.refutations.iter().map(|r| serde_json::json!({
                "pattern": r.pattern,
                "farkas": fmt_vec(&r.farkas),
                "direction": fmt_vec(&r.direction),
            })).collect::<Vec<_>>(),
            "normalization": self.normalization,
            "lambda0_max": self.lambda0_max.as_ref().map(fmt_rational),
            "notes": self.notes,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// `λ0 = 1`.
    Kkt,
    /// Multipliers not all zero, normalized to sum one.
    FritzJohn,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Kkt => "kkt",
            Mode::FritzJohn => "fj",
        }
    }
}

/// Generalized derivatives of the objective, the active inequalities (with
/// their original indices) and all equalities at one point.
pub(crate) struct MultiplierSystem<'a> {
    pub objective: &'a VPolytope,
    pub inequalities: Vec<(usize, &'a VPolytope)>,
    pub num_inequalities: usize,
    pub equalities: Vec<&'a VPolytope>,
}

pub(crate) const MAX_SIGN_PATTERNS_EQ: usize = 10;

struct Block {
    role: Role,
    sign: i8,
    vertices: Vec<RVec>,
}

impl MultiplierSystem<'_> {
    fn dim(&self) -> usize {
        self.objective.dim()
    }

    fn check_dims(&self) -> Result<()> {
        let n = self.dim();
        for (_, p) in &self.inequalities {
            crate::num::check_dim("inequality set", p.dim(), n)?;
        }
        for p in &self.equalities {
            crate::num::check_dim("equality set", p.dim(), n)?;
        }
        Ok(())
    }

    fn blocks(&self, pattern: &[i8]) -> Vec<Block> {
        let mut out = vec![Block {
            role: Role::Objective,
            sign: 1,
            vertices: self.objective.vertices().to_vec(),
        }];
        for (i, p) in &self.inequalities {
            out.push(Block {
                role: Role::Inequality(*i),
                sign: 1,
                vertices: p.vertices().to_vec(),
            });
        }
        for (j, (p, s)) in self.equalities.iter().zip(pattern).enumerate() {
            let vertices = if *s > 0 {
                p.vertices().to_vec()
            } else {
                p.vertices().iter().map(|v| neg(v)).collect()
            };
            out.push(Block {
                role: Role::Equality(j),
                sign: *s,
                vertices,
            });
        }
        out
    }

    /// Search with `μ_j ∂h_j = |μ_j| (±∂h_j)` enumerated over all sign patterns.
    pub fn solve_with_patterns(&self, mode: Mode) -> Result<Certificate> {
        self.check_dims()?;
        let m = self.equalities.len();
        if m > MAX_SIGN_PATTERNS_EQ {
            return Err(Error::Refused(format!(
                "{m} equality constraints exceed the sign-pattern bound of {MAX_SIGN_PATTERNS_EQ}"
            )));
        }
        let normalization = match mode {
            Mode::Kkt => "lambda0 = 1".to_string(),
            Mode::FritzJohn if m == 0 => "lambda0 + sum of active lambda_i = 1".to_string(),
            Mode::FritzJohn => "lambda0 + sum of active lambda_i + sum |mu_j| = 1, one LP per sign pattern of mu".to_string(),
        };
        let mut best: Option<(Rational, Certificate)> = None;
        let mut refutations = Vec::new();
        let mut lambda0_max: Option<Rational> = None;
        for code in 0..(1usize << m) {
            let pattern: Vec<i8> = (0..m).map(|j| if code >> j & 1 == 0 { 1 } else { -1 }).collect();
            let blocks = self.blocks(&pattern);
            let (lp, offsets) = self.pattern_lp(&blocks, mode);
            let mut lp_min = lp.clone();
            let obj_cols = objective_columns(&offsets, lp.num_vars);
            if mode == Mode::FritzJohn {
                lp_min.minimize(obj_cols.clone());
            }
            match solve_lp(&lp_min)? {
                LpResult::Optimal { solution, .. } => {
                    let cert = self.certificate_from(&blocks, &offsets, &solution, &normalization);
                    let l0 = cert.lambda0.clone().unwrap_or_default();
                    if best.as_ref().map_or(true, |(b, _)| l0 < *b) {
                        best = Some((l0, cert));
                    }
                    if mode == Mode::FritzJohn {
                        let mut lp_max = lp.clone();
                        lp_max.maximize(obj_cols);
                        if let Some(v) = solve_lp(&lp_max)?.value() {
                            if lambda0_max.as_ref().map_or(true, |b| v > b) {
                                lambda0_max = Some(v.clone());
                            }
                        }
                    }
                }
                LpResult::Infeasible { farkas } => {
                    let direction = neg(&farkas[..self.dim()]);
                    refutations.push(Refutation {
                        pattern: if m == 0 { Vec::new() } else { pattern.clone() },
                        farkas,
                        direction,
                    });
                }
                LpResult::Unbounded { .. } => unreachable!("multiplier LPs are bounded or have no objective"),
            }
        }
        Ok(match best {
            Some((_, mut cert)) => {
                cert.lambda0_max = lambda0_max;
                cert
            }
            None => {
                let mut cert = Certificate::empty(Status::Fails, normalization);
                cert.lambdas = zeros(self.num_inequalities);
                cert.mus = zeros(m);
                cert.refutations = refutations;
                cert
            }
        })
    }

    fn pattern_lp(&self, blocks: &[Block], mode: Mode) -> (LinearProgram, Vec<usize>) {
        let n = self.dim();
        let mut offsets = Vec::new();
        let mut total = 0;
        for b in blocks {
            offsets.push(total);
            total += b.vertices.len();
        }
        let mut lp = LinearProgram::new(total);
        lp.all_nonneg();
        for k in 0..n {
            let row: RVec = blocks.iter().flat_map(|b| b.vertices.iter().map(move |v| v[k].clone())).collect();
            lp.add_eq(row, Rational::zero());
        }
        let norm_row: RVec = match mode {
            Mode::FritzJohn => vec![one(); total],
            Mode::Kkt => objective_columns(&offsets, total),
        };
        lp.add_eq(norm_row, one());
        (lp, offsets)
    }

    fn certificate_from(&self, blocks: &[Block], offsets: &[usize], alpha: &[Rational], normalization: &str) -> Certificate {
        let mut cert = Certificate::empty(Status::Holds, normalization);
        cert.lambdas = zeros(self.num_inequalities);
        cert.mus = zeros(self.equalities.len());
        for (b, &off) in blocks.iter().zip(offsets) {
            let coeffs = &alpha[off..off + b.vertices.len()];
            let weight: Rational = coeffs.iter().sum();
            let multiplier = if b.sign < 0 { -weight.clone() } else { weight.clone() };
            match b.role {
                Role::Objective => cert.lambda0 = Some(multiplier.clone()),
                Role::Inequality(i) => cert.lambdas[i] = multiplier.clone(),
                Role::Equality(j) => cert.mus[j] = multiplier.clone(),
            }
            if weight.is_zero() {
                continue;
            }
            // Point of the block's set, un-negated for equality blocks.
            let mut point = zeros(self.dim());
            for (c, v) in coeffs.iter().zip(&b.vertices) {
                point = add(&point, &scale(c, v));
            }
            point = scale(&weight.recip(), &point);
            if b.sign < 0 {
                point = neg(&point);
            }
            cert.witnesses.push(WitnessTerm {
                role: b.role,
                multiplier,
                vector: point,
            });
        }
        cert
    }

    /// Search for singleton equality sets with `μ` free. In Fritz-John mode a
    /// dependent family `∇h` already gives multipliers with `λ = 0`;
    /// otherwise any nontrivial multiplier vector has some `λ > 0`, so the
    /// normalization `Σλ = 1` loses nothing.
    pub fn solve_free_mu(&self, mode: Mode) -> Result<Certificate> {
        self.check_dims()?;
        let n = self.dim();
        let single = |p: &VPolytope, what: &str| -> Result<RVec> {
            match p.vertices() {
                [v] => Ok(v.clone()),
                _ => Err(Error::input(format!("{what} must be a single gradient"))),
            }
        };
        let gf = single(self.objective, "objective derivative")?;
        let gi: Vec<(usize, RVec)> = self
            .inequalities
            .iter()
            .map(|(i, p)| Ok((*i, single(p, "inequality derivative")?)))
            .collect::<Result<_>>()?;
        let gh: Vec<RVec> = self.equalities.iter().map(|p| single(p, "equality derivative")).collect::<Result<_>>()?;
        let m = gh.len();
        let normalization = match mode {
            Mode::Kkt => "lambda0 = 1, mu free",
            Mode::FritzJohn => "lambda0 + sum of active lambda_i = 1, mu free",
        };

        if mode == Mode::FritzJohn && m > 0 && matrix_rank(&gh) < m {
            let mu = kernel_vector(&gh).expect("dependent family has a kernel vector");
            let mut cert = Certificate::empty(Status::Holds, "mu nonzero from linearly dependent equality gradients, lambda = 0");
            cert.lambda0 = Some(Rational::zero());
            cert.lambdas = zeros(self.num_inequalities);
            cert.witnesses = gh
                .iter()
                .zip(&mu)
                .enumerate()
                .filter(|(_, (_, c))| !c.is_zero())
                .map(|(j, (g, c))| WitnessTerm {
                    role: Role::Equality(j),
                    multiplier: c.clone(),
                    vector: g.clone(),
                })
                .collect();
            cert.mus = mu;
            cert.notes.push("equality gradients are linearly dependent".to_string());
            return Ok(cert);
        }

        // Columns: λ0, λ_active..., μ_j...
        let k = 1 + gi.len();
        let mut lp = LinearProgram::new(k + m);
        for c in 0..k {
            lp.set_nonneg(c);
        }
        let cols: Vec<&RVec> = std::iter::once(&gf).chain(gi.iter().map(|(_, g)| g)).chain(&gh).collect();
        for r in 0..n {
            lp.add_eq(cols.iter().map(|g| g[r].clone()).collect(), Rational::zero());
        }
        let mut norm = zeros(k + m);
        match mode {
            Mode::Kkt => norm[0] = one(),
            Mode::FritzJohn => norm[..k].iter_mut().for_each(|v| *v = one()),
        }
        lp.add_eq(norm, one());
        let lam0_obj = crate::num::unit(k + m, 0);
        let mut lp_min = lp.clone();
        if mode == Mode::FritzJohn {
            lp_min.minimize(lam0_obj.clone());
        }
        match solve_lp(&lp_min)? {
            LpResult::Optimal { solution, .. } => {
                let mut cert = Certificate::empty(Status::Holds, normalization);
                cert.lambda0 = Some(solution[0].clone());
                cert.lambdas = zeros(self.num_inequalities);
                for (t, (i, _)) in gi.iter().enumerate() {
                    cert.lambdas[*i] = solution[1 + t].clone();
                }
                cert.mus = solution[k..].to_vec();
                let roles = std::iter::once(Role::Objective)
                    .chain(gi.iter().map(|(i, _)| Role::Inequality(*i)))
                    .chain((0..m).map(Role::Equality));
                cert.witnesses = roles
                    .zip(&cols)
                    .zip(&solution)
                    .filter(|(_, c)| !c.is_zero())
                    .map(|((role, g), c)| WitnessTerm {
                        role,
                        multiplier: c.clone(),
                        vector: (*g).clone(),
                    })
                    .collect();
                if mode == Mode::FritzJohn {
                    let mut lp_max = lp;
                    lp_max.maximize(lam0_obj);
                    cert.lambda0_max = solve_lp(&lp_max)?.value().cloned();
                }
                Ok(cert)
            }
            LpResult::Infeasible { farkas } => {
                let mut cert = Certificate::empty(Status::Fails, normalization);
                cert.lambdas = zeros(self.num_inequalities);
                cert.mus = zeros(m);
                cert.refutations.push(Refutation {
                    pattern: Vec::new(),
                    direction: neg(&farkas[..n]),
                    farkas,
                });
                Ok(cert)
            }
            LpResult::Unbounded { .. } => unreachable!("lambda0 is bounded by the normalization"),
        }
    }
}

fn objective_columns(offsets: &[usize], total: usize) -> RVec {
    let end = offsets.get(1).copied().unwrap_or(total);
    (0..total).map(|c| if c < end { one() } else { Rational::zero() }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{frac, int, rvec};

    fn seg(a: i64, b: i64) -> VPolytope {
        VPolytope::new(vec![rvec(&[a]), rvec(&[b])]).unwrap()
    }

    #[test]
    fn degenerate_fj_prefers_zero_objective_multiplier() {
        let f = seg(1, 1);
        let g1 = seg(1, 1);
        let g2 = seg(-1, -1);
        let sys = MultiplierSystem {
            objective: &f,
            inequalities: vec![(0, &g1), (1, &g2)],
            num_inequalities: 2,
            equalities: vec![],
        };
        let cert = sys.solve_with_patterns(Mode::FritzJohn).unwrap();
        assert!(cert.holds() && cert.verify_witness());
        assert_eq!(cert.lambda0, Some(int(0)));
        assert_eq!(cert.lambdas, vec![frac(1, 2), frac(1, 2)]);
        assert_eq!(cert.lambda0_max, Some(frac(1, 2)));
    }

    #[test]
    fn equality_sign_patterns() {
        // 0 ∈ λ0·{1} + μ·[1, 2]: needs μ < 0.
        let f = seg(1, 1);
        let h = seg(1, 2);
        let sys = MultiplierSystem {
            objective: &f,
            inequalities: vec![],
            num_inequalities: 0,
            equalities: vec![&h],
        };
        let cert = sys.solve_with_patterns(Mode::FritzJohn).unwrap();
        assert!(cert.holds() && cert.verify_witness());
        assert!(cert.mus[0] < int(0));
    }

    #[test]
    fn free_mu_refutation_is_descent_direction() {
        let f = VPolytope::singleton(rvec(&[1, 0]));
        let h = VPolytope::singleton(rvec(&[0, 1]));
        let sys = MultiplierSystem {
            objective: &f,
            inequalities: vec![],
            num_inequalities: 0,
            equalities: vec![&h],
        };
        let cert = sys.solve_free_mu(Mode::FritzJohn).unwrap();
        assert_eq!(cert.status, Status::Fails);
        let d = &cert.refutations[0].direction;
        assert!(crate::num::dot(d, &rvec(&[1, 0])) < int(0));
        assert_eq!(crate::num::dot(d, &rvec(&[0, 1])), int(0));
    }

    #[test]
    fn too_many_equalities_refused() {
        let f = seg(0, 0);
        let h = seg(1, 1);
        let sys = MultiplierSystem {
            objective: &f,
            inequalities: vec![],
            num_inequalities: 0,
            equalities: vec![&h; 11],
        };
        assert!(matches!(sys.solve_with_patterns(Mode::FritzJohn), Err(Error::Refused(_))));
    }
}
