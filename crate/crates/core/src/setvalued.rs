//! Cone orders, minimal elements of finite image sets, cone-convexity of
//! sampled maps, and the set-valued multiplier rule on polyhedral data.

use num_traits::{Signed, Zero};

use crate::certificate::Status;
use crate::error::{Error, Result};
use crate::geometry::{tangent_normal_cones, FinitelyGeneratedCone, HPolyhedron};
use crate::lp::{matrix_rank, solve_lp, LinearProgram, LpResult};
use crate::num::{add, check_dim, dot, frac, is_zero_vec, neg, one, scale, sub, zeros, RVec, Rational};

#[derive(Debug, Clone, PartialEq)]
pub struct OrderingCone {
    pub cone: FinitelyGeneratedCone,
    /// `C ∩ -C = {0}`.
    pub pointed: bool,
    pub interior_nonempty: bool,
}

impl OrderingCone {
    pub fn new(cone: FinitelyGeneratedCone) -> Result<Self> {
        let mut pointed = cone.lines.iter().all(|l| is_zero_vec(l));
        if pointed {
            for r in cone.rays.iter().filter(|r| !is_zero_vec(r)) {
                if cone.contains(&neg(r))?.is_inside() {
                    pointed = false;
                    break;
                }
            }
        }
        let interior_nonempty = matrix_rank(&cone.all_generators()) == cone.dim();
        Ok(OrderingCone {
            cone,
            pointed,
            interior_nonempty,
        })
    }

    pub fn orthant(dim: usize) -> Self {
        Self::new(FinitelyGeneratedCone::orthant(dim)).expect("orthant is well formed")
    }

    pub fn dim(&self) -> usize {
        self.cone.dim()
    }

    fn nonzero_rays(&self) -> Vec<RVec> {
        self.cone.rays.iter().filter(|r| !is_zero_vec(r)).cloned().collect()
    }

    /// Sum of the rays; an interior point when the interior is nonempty
    /// and the cone is pointed.
    fn interior_point(&self) -> RVec {
        self.nonzero_rays().iter().fold(zeros(self.dim()), |acc, r| add(&acc, r))
    }

    pub fn contains(&self, v: &[Rational]) -> Result<bool> {
        Ok(self.cone.contains(v)?.is_inside())
    }

    /// `v ∈ int C`: a combination of all generators with every ray
    /// coefficient positive. `None` when the interior is empty.
    pub fn contains_interior(&self, v: &[Rational]) -> Result<Option<bool>> {
        check_dim("point", v.len(), self.dim())?;
        if !self.interior_nonempty {
            return Ok(None);
        }
        let rays = self.nonzero_rays();
        let lines = &self.cone.lines;
        let (k, l) = (rays.len(), lines.len());
        // Columns: ray coefficients, line coefficients, slack t.
        let t = k + l;
        let mut lp = LinearProgram::new(t + 1);
        for c in 0..self.dim() {
            let mut row: RVec = rays.iter().chain(lines).map(|g| g[c].clone()).collect();
            row.push(Rational::zero());
            lp.add_eq(row, v[c].clone());
        }
        for i in 0..k {
            let mut row = zeros(t + 1);
            row[i] = -one();
            row[t] = one();
            lp.add_le(row, Rational::zero());
        }
        lp.add_le(crate::num::unit(t + 1, t), one());
        lp.maximize(crate::num::unit(t + 1, t));
        Ok(Some(match solve_lp(&lp)? {
            LpResult::Optimal { value, .. } => value.is_positive(),
            LpResult::Infeasible { .. } => false,
            LpResult::Unbounded { .. } => unreachable!("slack capped at one"),
        }))
    }
}

/// `a <=_C b`, i.e. `b - a ∈ C`.
pub fn leq_cone(a: &[Rational], b: &[Rational], c: &OrderingCone) -> Result<bool> {
    check_dim("left point", a.len(), c.dim())?;
    check_dim("right point", b.len(), c.dim())?;
    c.contains(&sub(b, a))
}

/// `p ∈ [a, b] = ({a} + C) ∩ ({b} - C)`.
pub fn order_interval_member(p: &[Rational], a: &[Rational], b: &[Rational], c: &OrderingCone) -> Result<bool> {
    if !leq_cone(a, b, c)? {
        return Err(Error::precondition("interval endpoints are not ordered: a is not below b"));
    }
    Ok(leq_cone(a, p, c)? && leq_cone(p, b, c)?)
}

/// A set-valued map known on finitely many arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSetValuedMap {
    pub entries: Vec<(RVec, Vec<RVec>)>,
    pub image_dim: usize,
}

impl SampledSetValuedMap {
    pub fn new(entries: Vec<(RVec, Vec<RVec>)>, image_dim: usize) -> Result<Self> {
        let arg_dim = entries.first().map(|(x, _)| x.len());
        for (x, ys) in &entries {
            check_dim("argument", x.len(), arg_dim.unwrap_or(0))?;
            if ys.is_empty() {
                return Err(Error::input(format!("empty image at ({})", crate::num::fmt_vec(x).join(", "))));
            }
            for y in ys {
                check_dim("image point", y.len(), image_dim)?;
            }
        }
        Ok(SampledSetValuedMap { entries, image_dim })
    }

    pub fn image(&self, x: &[Rational]) -> Option<&[RVec]> {
        self.entries.iter().find(|(a, _)| a.as_slice() == x).map(|(_, ys)| ys.as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimalityLabel {
    Strong,
    Minimal,
    Weak,
    None,
}

impl MinimalityLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            MinimalityLabel::Strong => "strong",
            MinimalityLabel::Minimal => "minimal",
            MinimalityLabel::Weak => "weak",
            MinimalityLabel::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub strong: bool,
    pub minimal: bool,
    /// `None` when `int C` is empty.
    pub weak: Option<bool>,
    pub label: MinimalityLabel,
    /// A point of `F(S)` refuting the strongest failing notion.
    pub witness: Option<RVec>,
}

impl Classification {
    /// strong ⇒ minimal ⇒ weak.
    pub fn chain_ok(&self) -> bool {
        (!self.strong || self.minimal) && (!self.minimal || self.weak != Some(false))
    }
}

/// Classifies `(x*, y*)` against `F(S)` with all three predicates computed
/// independently.
pub fn classify_point(
    f: &SampledSetValuedMap,
    feasible: &[RVec],
    x_star: &[Rational],
    y_star: &[Rational],
    c: &OrderingCone,
) -> Result<Classification> {
    check_dim("ordering cone", c.dim(), f.image_dim)?;
    if !c.pointed {
        return Err(Error::precondition("ordering cone is not pointed"));
    }
    if !feasible.iter().any(|x| x.as_slice() == x_star) {
        return Err(Error::precondition("x* is not feasible"));
    }
    let here = f
        .image(x_star)
        .ok_or_else(|| Error::precondition("F is not sampled at x*"))?;
    if !here.iter().any(|y| y.as_slice() == y_star) {
        return Err(Error::precondition("y* is not in F(x*)"));
    }
    let mut image: Vec<&RVec> = Vec::new();
    for x in feasible {
        let ys = f
            .image(x)
            .ok_or_else(|| Error::precondition(format!("F is not sampled at feasible ({})", crate::num::fmt_vec(x).join(", "))))?;
        image.extend(ys);
    }

    let mut strong_witness = None;
    for p in &image {
        if !leq_cone(y_star, p, c)? {
            strong_witness = Some((*p).clone());
            break;
        }
    }
    let mut minimal_witness = None;
    for p in &image {
        if leq_cone(p, y_star, c)? && !leq_cone(y_star, p, c)? {
            minimal_witness = Some((*p).clone());
            break;
        }
    }
    let mut weak = Some(true);
    let mut weak_witness = None;
    for p in &image {
        match c.contains_interior(&sub(y_star, p))? {
            None => {
                weak = None;
                break;
            }
            Some(true) => {
                weak = Some(false);
                weak_witness = Some((*p).clone());
                break;
            }
            Some(false) => {}
        }
    }
    let strong = strong_witness.is_none();
    let minimal = minimal_witness.is_none();
    let (label, witness) = if strong {
        (MinimalityLabel::Strong, None)
    } else if minimal {
        (MinimalityLabel::Minimal, strong_witness)
    } else if weak == Some(true) {
        (MinimalityLabel::Weak, minimal_witness)
    } else {
        (MinimalityLabel::None, weak_witness.or(minimal_witness))
    };
    Ok(Classification {
        strong,
        minimal,
        weak,
        label,
        witness,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityWitness {
    pub x1: RVec,
    pub x2: RVec,
    pub lambda: Rational,
    /// `λ y1 + (1 - λ) y2` with `y1 ∈ F(x1)`, `y2 ∈ F(x2)`.
    pub y1: RVec,
    pub y2: RVec,
    pub combination: RVec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityCheck {
    pub holds: bool,
    pub counterexample: Option<ConvexityWitness>,
    pub combinations_checked: usize,
    /// Combinations whose argument `λ x1 + (1 - λ) x2` is not sampled.
    pub skipped: usize,
    pub label: &'static str,
}

/// `λ F(x1) + (1 - λ) F(x2) ⊆ F(λ x1 + (1 - λ) x2) + C` on sampled arguments,
/// farthest pairs first, `λ = 1/2` first.
pub fn cone_convexity_check(f: &SampledSetValuedMap, c: &OrderingCone) -> Result<ConvexityCheck> {
    check_dim("ordering cone", c.dim(), f.image_dim)?;
    let lambdas = [frac(1, 2), frac(1, 4), frac(3, 4), Rational::zero(), one()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..f.entries.len() {
        for j in i + 1..f.entries.len() {
            pairs.push((i, j));
        }
    }
    let spread = |(i, j): (usize, usize)| {
        let d = sub(&f.entries[i].0, &f.entries[j].0);
        crate::num::norm_inf(&d)
    };
    pairs.sort_by(|a, b| spread(*b).cmp(&spread(*a)).then(a.cmp(b)));

    let mut checked = 0;
    let mut skipped = 0;
    for (i, j) in pairs {
        let (x1, f1) = &f.entries[i];
        let (x2, f2) = &f.entries[j];
        for lam in &lambdas {
            let mu = one() - lam;
            let mid = add(&scale(lam, x1), &scale(&mu, x2));
            let Some(target) = f.image(&mid) else {
                skipped += 1;
                continue;
            };
            for y1 in f1 {
                for y2 in f2 {
                    checked += 1;
                    let q = add(&scale(lam, y1), &scale(&mu, y2));
                    let mut covered = false;
                    for t in target {
                        if c.contains(&sub(&q, t))? {
                            covered = true;
                            break;
                        }
                    }
                    if !covered {
                        return Ok(ConvexityCheck {
                            holds: false,
                            counterexample: Some(ConvexityWitness {
                                x1: x1.clone(),
                                x2: x2.clone(),
                                lambda: lam.clone(),
                                y1: y1.clone(),
                                y2: y2.clone(),
                                combination: q,
                            }),
                            combinations_checked: checked,
                            skipped,
                            label: "refuted exactly",
                        });
                    }
                }
            }
        }
    }
    Ok(ConvexityCheck {
        holds: true,
        counterexample: None,
        combinations_checked: checked,
        skipped,
        label: "verified on samples",
    })
}

/// `epi(F, G)` as a polyhedron in `(x, y, z)` with a base point, ordering
/// cones and the domain `Ŝ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedralInstance {
    pub x_dim: usize,
    pub y_dim: usize,
    pub z_dim: usize,
    pub epi: HPolyhedron,
    pub x_star: RVec,
    pub y_star: RVec,
    pub z_star: RVec,
    pub c_y: OrderingCone,
    pub c_z: OrderingCone,
    pub s_hat: HPolyhedron,
}

impl PolyhedralInstance {
    /// Validates the base point, `z* ∈ -C_Z` and the cone hypotheses.
    pub fn validate(&self) -> Result<()> {
        check_dim("epigraph", self.epi.dim(), self.x_dim + self.y_dim + self.z_dim)?;
        check_dim("x*", self.x_star.len(), self.x_dim)?;
        check_dim("y*", self.y_star.len(), self.y_dim)?;
        check_dim("z*", self.z_star.len(), self.z_dim)?;
        check_dim("C_Y", self.c_y.dim(), self.y_dim)?;
        check_dim("C_Z", self.c_z.dim(), self.z_dim)?;
        check_dim("domain", self.s_hat.dim(), self.x_dim)?;
        if !self.c_y.pointed || !self.c_z.pointed {
            return Err(Error::precondition("ordering cones must be pointed"));
        }
        if !self.c_y.interior_nonempty || !self.c_z.interior_nonempty {
            return Err(Error::precondition("ordering cones must have nonempty interior"));
        }
        if let Some(row) = self.epi.violated_row(&self.base()) {
            return Err(Error::precondition(format!("base point is not in the epigraph: {row}")));
        }
        if let Some(row) = self.s_hat.violated_row(&self.x_star) {
            return Err(Error::precondition(format!("x* is not in the domain: {row}")));
        }
        if !self.c_z.contains(&neg(&self.z_star))? {
            return Err(Error::precondition("z* is not in -C_Z"));
        }
        Ok(())
    }

    pub fn base(&self) -> RVec {
        let mut b = self.x_star.clone();
        b.extend(self.y_star.iter().cloned());
        b.extend(self.z_star.iter().cloned());
        b
    }

    fn total(&self) -> usize {
        self.x_dim + self.y_dim + self.z_dim
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvFjResult {
    pub status: Status,
    /// Normalized to `Σ|t| + Σ|u| = 1`.
    pub t: RVec,
    pub u: RVec,
    pub regularity: bool,
    /// Checked only when the regularity assumption holds.
    pub t_nonzero: Option<bool>,
    /// Farkas vector when no multipliers exist.
    pub farkas: Option<RVec>,
    pub notes: Vec<String>,
    pub label: &'static str,
}

/// Rows of a cone `{v : A v <= 0, E v = 0}` as plain vectors.
struct ConeRows {
    ineqs: Vec<RVec>,
    eqs: Vec<RVec>,
}

impl ConeRows {
    fn from_h(h: &HPolyhedron, offset: usize, width: usize) -> Self {
        let pad = |a: &RVec| {
            let mut v = zeros(width);
            v[offset..offset + a.len()].clone_from_slice(a);
            v
        };
        ConeRows {
            ineqs: h.ineqs.iter().map(|r| pad(&r.normal)).collect(),
            eqs: h.eqs.iter().map(|r| pad(&r.normal)).collect(),
        }
    }

    fn extend(&mut self, other: ConeRows) {
        self.ineqs.extend(other.ineqs);
        self.eqs.extend(other.eqs);
    }
}

/// Tangent cone of `epi(F, G)` at the base point, restricted to directions
/// `d ∈ T(Ŝ, x*)`, in `(d, y, z)` coordinates.
fn restricted_tangent(inst: &PolyhedralInstance) -> Result<ConeRows> {
    let width = inst.total();
    let (t_epi, _) = tangent_normal_cones(&inst.epi, &inst.base())?;
    let (t_s, _) = tangent_normal_cones(&inst.s_hat, &inst.x_star)?;
    let mut rows = ConeRows::from_h(&t_epi, 0, width);
    rows.extend(ConeRows::from_h(&t_s, 0, width));
    Ok(rows)
}

/// Reports the epiderivative as undefined when the contingent cone contains
/// `(0, -c)` for some nonzero `c ∈ C_Y × C_Z`: the fiber over the zero
/// direction then has no least element.
fn epiderivative_defect(inst: &PolyhedralInstance) -> Result<bool> {
    let (t_epi, _) = tangent_normal_cones(&inst.epi, &inst.base())?;
    let (nx, ny) = (inst.x_dim, inst.y_dim);
    let mut gens: Vec<RVec> = Vec::new();
    for r in inst.c_y.nonzero_rays() {
        let mut v = zeros(inst.total());
        v[nx..nx + ny].clone_from_slice(&r);
        gens.push(v);
    }
    for r in inst.c_z.nonzero_rays() {
        let mut v = zeros(inst.total());
        v[nx + ny..].clone_from_slice(&r);
        gens.push(v);
    }
    // Columns: α ≥ 0 per generator, with -Σ α g in the cone and Σ α = 1.
    let k = gens.len();
    let mut lp = LinearProgram::new(k);
    lp.all_nonneg();
    let combo = |row: &RVec| -> RVec { gens.iter().map(|g| -dot(row, g)).collect() };
    for h in &t_epi.ineqs {
        lp.add_le(combo(&h.normal), Rational::zero());
    }
    for h in &t_epi.eqs {
        lp.add_eq(combo(&h.normal), Rational::zero());
    }
    lp.add_eq(vec![one(); k], one());
    Ok(solve_lp(&lp)?.is_optimal())
}

/// Multipliers `t ∈ C_Y*`, `u ∈ C_Z*`, `(t, u) ≠ 0`, `u(z*) = 0` with
/// `t(y) + u(z) >= 0` on every `(y, z)` whose direction triple lies in the
/// restricted contingent cone; then the regularity assumption and `t ≠ 0`.
pub fn sv_fritz_john(inst: &PolyhedralInstance) -> Result<SvFjResult> {
    inst.validate()?;
    let mut notes = vec!["finite-dimensional polyhedral instantiation".to_string()];
    if epiderivative_defect(inst)? {
        return Err(Error::precondition(
            "epiderivative undefined: the contingent cone is not the epigraph of a map",
        ));
    }
    let (nx, ny, nz) = (inst.x_dim, inst.y_dim, inst.z_dim);
    let width = inst.total();
    let k = restricted_tangent(inst)?;

    // -(0, t, u) = Σ α_i A_i + Σ β_j E_j, α >= 0.
    // Columns: t (ny), u (nz), α, β.
    let (na, nb) = (k.ineqs.len(), k.eqs.len());
    let cols = ny + nz + na + nb;
    let mut lp = LinearProgram::new(cols);
    for a in 0..na {
        lp.set_nonneg(ny + nz + a);
    }
    for c in 0..width {
        let mut row = zeros(cols);
        if c >= nx {
            row[c - nx] = one();
        }
        for (a, r) in k.ineqs.iter().enumerate() {
            row[ny + nz + a] = r[c].clone();
        }
        for (b, r) in k.eqs.iter().enumerate() {
            row[ny + nz + na + b] = r[c].clone();
        }
        lp.add_eq(row, Rational::zero());
    }
    let dual_rows = |cone: &OrderingCone, offset: usize, lp: &mut LinearProgram| {
        for r in cone.nonzero_rays() {
            let mut row = zeros(cols);
            row[offset..offset + r.len()].clone_from_slice(&r);
            lp.add_ge(row, Rational::zero());
        }
        for l in &cone.cone.lines {
            let mut row = zeros(cols);
            row[offset..offset + l.len()].clone_from_slice(l);
            lp.add_eq(row, Rational::zero());
        }
    };
    dual_rows(&inst.c_y, 0, &mut lp);
    dual_rows(&inst.c_z, ny, &mut lp);
    let mut row = zeros(cols);
    row[ny..ny + nz].clone_from_slice(&inst.z_star);
    lp.add_eq(row, Rational::zero());
    // Nonzero normalization through interior points of the (pointed) cones.
    let mut row = zeros(cols);
    row[..ny].clone_from_slice(&inst.c_y.interior_point());
    row[ny..ny + nz].clone_from_slice(&inst.c_z.interior_point());
    lp.add_eq(row, one());

    let regularity = regularity_holds(inst)?;
    match solve_lp(&lp)? {
        LpResult::Optimal { solution, .. } => {
            let raw = &solution[..ny + nz];
            let mass = raw.iter().fold(Rational::zero(), |acc, v| acc + v.abs());
            let tu: RVec = raw.iter().map(|v| v / &mass).collect();
            let t = tu[..ny].to_vec();
            let u = tu[ny..].to_vec();
            let t_nonzero = regularity.then(|| !is_zero_vec(&t));
            if t_nonzero == Some(false) {
                notes.push("regularity holds but t = 0: hypotheses of the rule are violated".to_string());
            }
            Ok(SvFjResult {
                status: Status::Holds,
                t,
                u,
                regularity,
                t_nonzero,
                farkas: None,
                notes,
                label: "finite-dimensional polyhedral instantiation",
            })
        }
        LpResult::Infeasible { farkas } => {
            notes.push("no multipliers: (x*, y*) is not a weak minimizer or F, G are not cone-convex".to_string());
            Ok(SvFjResult {
                status: Status::Fails,
                t: zeros(ny),
                u: zeros(nz),
                regularity,
                t_nonzero: None,
                farkas: Some(farkas),
                notes,
                label: "finite-dimensional polyhedral instantiation",
            })
        }
        LpResult::Unbounded { .. } => unreachable!("feasibility program has no objective"),
    }
}

/// `{z : (d, y, z) ∈ T_epi, d ∈ cone(S - x*)} + cone(C_Z + z*) = Z`, tested by
/// reaching every `±e_k`. The second cone is taken closed:
/// `cone{z*, rays of C_Z}`. `cone(S - x*)` is the projection of the tangent
/// cone of `{(x, y, z) ∈ epi : x ∈ Ŝ, z ∈ -C_Z}` at the base point.
fn regularity_holds(inst: &PolyhedralInstance) -> Result<bool> {
    let (nx, ny, nz) = (inst.x_dim, inst.y_dim, inst.z_dim);
    let width = inst.total();
    let (t_epi, _) = tangent_normal_cones(&inst.epi, &inst.base())?;
    let feasible = feasible_lift(inst)?;
    let (t_p, _) = tangent_normal_cones(&feasible, &inst.base())?;
    let z_gens: Vec<RVec> = std::iter::once(inst.z_star.clone())
        .chain(inst.c_z.nonzero_rays())
        .collect();
    let z_lines = &inst.c_z.cone.lines;
    // Columns: v = (d, y, z) in T_epi; w = (d', y', z') in T_P with d' = d;
    // σ >= 0 per z generator; τ free per line.
    let (ng, nl) = (z_gens.len(), z_lines.len());
    let cols = 2 * width + ng + nl;
    for k in 0..nz {
        for sign in [1i64, -1] {
            let mut lp = LinearProgram::new(cols);
            for s in 0..ng {
                lp.set_nonneg(2 * width + s);
            }
            for h in &t_epi.ineqs {
                lp.add_le(padded(&h.normal, 0, cols), Rational::zero());
            }
            for h in &t_epi.eqs {
                lp.add_eq(padded(&h.normal, 0, cols), Rational::zero());
            }
            for h in &t_p.ineqs {
                lp.add_le(padded(&h.normal, width, cols), Rational::zero());
            }
            for h in &t_p.eqs {
                lp.add_eq(padded(&h.normal, width, cols), Rational::zero());
            }
            for c in 0..nx {
                let mut row = zeros(cols);
                row[c] = one();
                row[width + c] = -one();
                lp.add_eq(row, Rational::zero());
            }
            for c in 0..nz {
                let mut row = zeros(cols);
                row[nx + ny + c] = one();
                for (s, g) in z_gens.iter().enumerate() {
                    row[2 * width + s] = g[c].clone();
                }
                for (s, l) in z_lines.iter().enumerate() {
                    row[2 * width + ng + s] = l[c].clone();
                }
                let rhs = if c == k { Rational::from_integer(sign.into()) } else { Rational::zero() };
                lp.add_eq(row, rhs);
            }
            if !solve_lp(&lp)?.is_optimal() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn padded(a: &RVec, offset: usize, width: usize) -> RVec {
    let mut v = zeros(width);
    v[offset..offset + a.len()].clone_from_slice(a);
    v
}

/// `{(x, y, z) ∈ epi : x ∈ Ŝ, z ∈ -C_Z}`, with `-C_Z` in facet form.
fn feasible_lift(inst: &PolyhedralInstance) -> Result<HPolyhedron> {
    let (nx, ny) = (inst.x_dim, inst.y_dim);
    let width = inst.total();
    let mut ineqs = inst.epi.ineqs.clone();
    let mut eqs = inst.epi.eqs.clone();
    for h in &inst.s_hat.ineqs {
        ineqs.push(crate::geometry::Halfspace::new(padded(&h.normal, 0, width), h.rhs.clone()));
    }
    for h in &inst.s_hat.eqs {
        eqs.push(crate::geometry::Halfspace::new(padded(&h.normal, 0, width), h.rhs.clone()));
    }
    for a in cone_facets(&inst.c_z)? {
        // a describes C_Z as {c : <a, c> >= 0}; z ∈ -C_Z iff <a, z> <= 0.
        ineqs.push(crate::geometry::Halfspace::homogeneous(padded(&a, nx + ny, width)));
    }
    HPolyhedron::new(width, ineqs, eqs)
}

/// Inward facet normals of a pointed full-dimensional cone given by rays:
/// every normal of a hyperplane through `dim - 1` independent rays that keeps
/// all rays on one side.
fn cone_facets(c: &OrderingCone) -> Result<Vec<RVec>> {
    let rays = c.nonzero_rays();
    let n = c.dim();
    if n == 1 {
        return Ok(vec![rays.first().cloned().ok_or_else(|| Error::input("empty cone"))?]);
    }
    let mut out: Vec<RVec> = Vec::new();
    let mut pick = Vec::new();
    subsets(rays.len(), n - 1, 0, &mut pick, &mut |idx| {
        let chosen: Vec<RVec> = idx.iter().map(|&i| rays[i].clone()).collect();
        if matrix_rank(&chosen) < n - 1 {
            return;
        }
        let Some(normal) = orthogonal_complement_vector(&chosen, n) else { return };
        let signs: Vec<Rational> = rays.iter().map(|r| dot(&normal, r)).collect();
        let normal = if signs.iter().all(|s| !s.is_negative()) {
            normal
        } else if signs.iter().all(|s| !s.is_positive()) {
            neg(&normal)
        } else {
            return;
        };
        if !out.contains(&normal) {
            out.push(normal);
        }
    });
    Ok(out)
}

fn subsets(m: usize, k: usize, start: usize, pick: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for i in start..m {
        pick.push(i);
        subsets(m, k, i + 1, pick, f);
        pick.pop();
    }
}

/// A nonzero vector orthogonal to `n - 1` independent vectors.
fn orthogonal_complement_vector(rows: &[RVec], n: usize) -> Option<RVec> {
    crate::lp::kernel_vector(&crate::lp::transpose(rows))
        .filter(|v| v.len() == n)
}

/// Exact re-check of a `holds` result: dual-cone memberships, `u(z*) = 0`,
/// and `t(y) + u(z) >= 0` over the restricted contingent cone (checked by
/// minimizing over the cone in a box).
pub fn verify_sv_multipliers(inst: &PolyhedralInstance, r: &SvFjResult) -> Result<bool> {
    if r.status != Status::Holds {
        return Ok(false);
    }
    let in_dual = |v: &RVec, c: &OrderingCone| {
        c.nonzero_rays().iter().all(|g| !dot(v, g).is_negative()) && c.cone.lines.iter().all(|l| dot(v, l).is_zero())
    };
    if !in_dual(&r.t, &inst.c_y) || !in_dual(&r.u, &inst.c_z) || !dot(&r.u, &inst.z_star).is_zero() {
        return Ok(false);
    }
    if is_zero_vec(&r.t) && is_zero_vec(&r.u) {
        return Ok(false);
    }
    let width = inst.total();
    let k = restricted_tangent(inst)?;
    let cone = HPolyhedron::new(
        width,
        k.ineqs.into_iter().map(crate::geometry::Halfspace::homogeneous).collect(),
        k.eqs.into_iter().map(crate::geometry::Halfspace::homogeneous).collect(),
    )?
    .with_box(&one());
    let mut obj = zeros(width);
    obj[inst.x_dim..inst.x_dim + inst.y_dim].clone_from_slice(&r.t);
    obj[inst.x_dim + inst.y_dim..].clone_from_slice(&r.u);
    // min <obj, v> >= 0  iff  max <-obj, v> <= 0.
    Ok(matches!(cone.maximize(&neg(&obj))?, Some(v) if !v.is_positive()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Halfspace;
    use crate::num::{int, rvec};

    fn r2() -> OrderingCone {
        OrderingCone::orthant(2)
    }

    #[test]
    fn cone_order() {
        assert!(leq_cone(&rvec(&[0, 0]), &rvec(&[1, 2]), &r2()).unwrap());
        assert!(!leq_cone(&rvec(&[1, 0]), &rvec(&[0, 1]), &r2()).unwrap());
        assert!(leq_cone(&rvec(&[3, -1]), &rvec(&[3, -1]), &r2()).unwrap());
        let (a, b) = (rvec(&[0, 0]), rvec(&[2, 2]));
        assert!(order_interval_member(&rvec(&[1, 1]), &a, &b, &r2()).unwrap());
        assert!(!order_interval_member(&rvec(&[3, 0]), &a, &b, &r2()).unwrap());
        assert!(order_interval_member(&a, &a, &b, &r2()).unwrap());
        assert!(order_interval_member(&a, &b, &a, &r2()).is_err());
    }

    #[test]
    fn cone_flags() {
        assert!(r2().pointed && r2().interior_nonempty);
        let half = OrderingCone::new(FinitelyGeneratedCone::new(2, vec![rvec(&[1, 0]), rvec(&[-1, 0]), rvec(&[0, 1])], vec![]).unwrap()).unwrap();
        assert!(!half.pointed && half.interior_nonempty);
        let ray = OrderingCone::new(FinitelyGeneratedCone::new(2, vec![rvec(&[1, 1])], vec![]).unwrap()).unwrap();
        assert!(ray.pointed && !ray.interior_nonempty);
        assert_eq!(r2().contains_interior(&rvec(&[1, 0])).unwrap(), Some(false));
        assert_eq!(r2().contains_interior(&rvec(&[1, 2])).unwrap(), Some(true));
    }

    fn single(points: &[&[i64]]) -> (SampledSetValuedMap, Vec<RVec>) {
        let entries: Vec<(RVec, Vec<RVec>)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (rvec(&[i as i64]), vec![rvec(p)]))
            .collect();
        let feasible = entries.iter().map(|(x, _)| x.clone()).collect();
        (SampledSetValuedMap::new(entries, 2).unwrap(), feasible)
    }

    #[test]
    fn minimality_labels() {
        let (f, s) = single(&[&[0, 0], &[1, 1]]);
        let c = classify_point(&f, &s, &rvec(&[0]), &rvec(&[0, 0]), &r2()).unwrap();
        assert_eq!(c.label, MinimalityLabel::Strong);

        let (f, s) = single(&[&[0, 1], &[1, 0]]);
        let c = classify_point(&f, &s, &rvec(&[0]), &rvec(&[0, 1]), &r2()).unwrap();
        assert_eq!(c.label, MinimalityLabel::Minimal);
        assert!(!c.strong);

        let (f, s) = single(&[&[0, 1], &[1, 0], &[0, 0]]);
        let c = classify_point(&f, &s, &rvec(&[0]), &rvec(&[0, 1]), &r2()).unwrap();
        assert_eq!(c.label, MinimalityLabel::Weak);
        assert_eq!(c.witness, Some(rvec(&[0, 0])));
        assert!(c.chain_ok());

        assert!(classify_point(&f, &s, &rvec(&[0]), &rvec(&[5, 5]), &r2()).is_err());
        assert!(classify_point(&f, &s, &rvec(&[9]), &rvec(&[0, 1]), &r2()).is_err());
    }

    fn grid_map(g: impl Fn(&Rational) -> Rational) -> SampledSetValuedMap {
        let xs = [frac(-1, 1), frac(-1, 2), int(0), frac(1, 2), int(1)];
        SampledSetValuedMap::new(xs.iter().map(|x| (vec![x.clone()], vec![vec![g(x)]])).collect(), 1).unwrap()
    }

    #[test]
    fn convexity_on_grid() {
        let c = OrderingCone::orthant(1);
        assert!(cone_convexity_check(&grid_map(|x| x * x), &c).unwrap().holds);
        let r = cone_convexity_check(&grid_map(|x| -(x * x)), &c).unwrap();
        assert!(!r.holds);
        let w = r.counterexample.unwrap();
        assert_eq!((w.x1, w.x2, w.lambda), (rvec(&[-1]), rvec(&[1]), frac(1, 2)));
        assert!(cone_convexity_check(&grid_map(|_| int(3)), &c).unwrap().holds);
    }

    /// F(x) = {x}, G(x) = {-x} on the line, orders R+, base point 0.
    fn line_instance() -> PolyhedralInstance {
        // epi: y >= x, z >= -x.
        let epi = HPolyhedron::new(
            3,
            vec![Halfspace::new(rvec(&[1, -1, 0]), int(0)), Halfspace::new(rvec(&[-1, 0, -1]), int(0))],
            vec![],
        )
        .unwrap();
        PolyhedralInstance {
            x_dim: 1,
            y_dim: 1,
            z_dim: 1,
            epi,
            x_star: rvec(&[0]),
            y_star: rvec(&[0]),
            z_star: rvec(&[0]),
            c_y: OrderingCone::orthant(1),
            c_z: OrderingCone::orthant(1),
            s_hat: HPolyhedron::whole_space(1),
        }
    }

    #[test]
    fn line_instance_multipliers() {
        let inst = line_instance();
        let r = sv_fritz_john(&inst).unwrap();
        assert_eq!(r.status, Status::Holds);
        assert_eq!((r.t.clone(), r.u.clone()), (vec![frac(1, 2)], vec![frac(1, 2)]));
        assert!(r.regularity);
        assert_eq!(r.t_nonzero, Some(true));
        assert!(verify_sv_multipliers(&inst, &r).unwrap());
    }

    #[test]
    fn instance_validation() {
        let mut inst = line_instance();
        inst.z_star = rvec(&[1]);
        assert!(sv_fritz_john(&inst).is_err());
        let mut inst = line_instance();
        inst.y_star = rvec(&[-1]);
        assert!(sv_fritz_john(&inst).is_err());
    }

    #[test]
    fn facets_of_orthant() {
        let f = cone_facets(&r2()).unwrap();
        assert_eq!(f.len(), 2);
        for v in &f {
            assert!(v.iter().all(|c| !c.is_negative()));
            assert_eq!(v.iter().filter(|c| !c.is_zero()).count(), 1);
        }
    }
}
