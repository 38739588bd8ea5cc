//! Smooth multiplier rules at a point, the linearizing cone and the
//! constraint qualifications.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use crate::certificate::{Certificate, Mode, MultiplierSystem, Role};
use crate::convex::ConvexExpr;
use crate::error::{Error, Result};
use crate::expr::{eval, gradient, regularity_probe, Expr, RegularityReport, Value};
use crate::geometry::{tangent_normal_cones, HPolyhedron, Halfspace, VPolytope};
use crate::lp::{matrix_rank, max_slack};
use crate::num::{check_dim, fmt_vec, RVec, Rational};
use crate::program::{active_indices, Program};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientSource {
    /// Differentiated from the expressions, exactly.
    Computed,
    /// At least one gradient came from the problem file.
    UserSupplied,
    /// At least one gradient passed through `exp` and was rounded to a rational.
    Float,
}

impl GradientSource {
    pub fn as_str(self) -> &'static str {
        match self {
            GradientSource::Computed => "computed",
            GradientSource::UserSupplied => "user-supplied",
            GradientSource::Float => "float",
        }
    }
}

/// Gradients from the problem file, keyed by function.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradientOverrides {
    pub objective: Option<RVec>,
    pub inequalities: BTreeMap<usize, RVec>,
    pub equalities: BTreeMap<usize, RVec>,
}

impl GradientOverrides {
    pub fn is_empty(&self) -> bool {
        self.objective.is_none() && self.inequalities.is_empty() && self.equalities.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothProblemAtPoint {
    pub x: RVec,
    pub grad_f: RVec,
    /// Gradients of the active inequalities with their indices.
    pub active: Vec<(usize, RVec)>,
    pub num_inequalities: usize,
    pub grad_h: Vec<RVec>,
    pub provenance: GradientSource,
}

impl SmoothProblemAtPoint {
    /// Gradients supplied directly; every listed inequality is taken as active.
    pub fn from_gradients(x: RVec, grad_f: RVec, active: Vec<RVec>, grad_h: Vec<RVec>) -> Result<Self> {
        let n = x.len();
        check_dim("objective gradient", grad_f.len(), n)?;
        for g in active.iter().chain(&grad_h) {
            check_dim("constraint gradient", g.len(), n)?;
        }
        Ok(SmoothProblemAtPoint {
            x,
            grad_f,
            num_inequalities: active.len(),
            active: active.into_iter().enumerate().collect(),
            grad_h,
            provenance: GradientSource::UserSupplied,
        })
    }

    /// Determines the active set at `x` and differentiates every needed
    /// function, preferring overrides.
    pub fn from_program(p: &Program, x: &[Rational], overrides: &GradientOverrides) -> Result<Self> {
        let active = active_indices(&p.active_set(x)?);
        let mut provenance = GradientSource::Computed;
        let mut grad = |e: &Expr, o: Option<&RVec>| -> Result<RVec> {
            if let Some(g) = o {
                check_dim("gradient override", g.len(), p.dim)?;
                if provenance == GradientSource::Computed {
                    provenance = GradientSource::UserSupplied;
                }
                return Ok(g.clone());
            }
            let g = gradient(e, x)?;
            g.into_iter()
                .map(|v| match v {
                    Value::Exact(r) => Ok(r),
                    Value::Approx(f) => {
                        provenance = GradientSource::Float;
                        Rational::from_float(f).ok_or_else(|| Error::Undefined {
                            point: fmt_vec(x).join(", "),
                        })
                    }
                })
                .collect()
        };
        let grad_f = grad(&p.objective, overrides.objective.as_ref())?;
        let active_grads = active
            .iter()
            .map(|&i| Ok((i, grad(&p.inequalities[i], overrides.inequalities.get(&i))?)))
            .collect::<Result<_>>()?;
        let grad_h = p
            .equalities
            .iter()
            .enumerate()
            .map(|(j, h)| grad(h, overrides.equalities.get(&j)))
            .collect::<Result<_>>()?;
        Ok(SmoothProblemAtPoint {
            x: x.to_vec(),
            grad_f,
            active: active_grads,
            num_inequalities: p.inequalities.len(),
            grad_h,
            provenance,
        })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    fn active_grads(&self) -> Vec<RVec> {
        self.active.iter().map(|(_, g)| g.clone()).collect()
    }
}

/// `λ0 ∇f + Σ λ_i ∇g_i + Σ μ_j ∇h_j = 0` over the active inequalities, `λ >= 0`,
/// `μ` free; KKT fixes `λ0 = 1`, Fritz-John normalizes `λ0 + Σ λ_i = 1`.
pub fn kkt_fj_smooth(p: &SmoothProblemAtPoint, mode: Mode) -> Result<Certificate> {
    let f = VPolytope::singleton(p.grad_f.clone());
    let gs: Vec<(usize, VPolytope)> = p
        .active
        .iter()
        .map(|(i, g)| (*i, VPolytope::singleton(g.clone())))
        .collect();
    let hs: Vec<VPolytope> = p.grad_h.iter().cloned().map(VPolytope::singleton).collect();
    let sys = MultiplierSystem {
        objective: &f,
        inequalities: gs.iter().map(|(i, s)| (*i, s)).collect(),
        num_inequalities: p.num_inequalities,
        equalities: hs.iter().collect(),
    };
    let mut cert = sys.solve_free_mu(mode)?;
    if p.provenance != GradientSource::Computed {
        cert.notes.push(format!("gradients: {}", p.provenance.as_str()));
    }
    if mode == Mode::Kkt {
        cert.notes
            .push("necessity assumes the linearizing cone lies in the closed convex hull of the tangent cone".to_string());
    }
    Ok(cert)
}

/// `{y : <∇g_i, y> <= 0 (i active), <∇h_j, y> = 0}`.
pub fn linearizing_cone(p: &SmoothProblemAtPoint) -> HPolyhedron {
    HPolyhedron::new(
        p.dim(),
        p.active_grads().into_iter().map(Halfspace::homogeneous).collect(),
        p.grad_h.iter().cloned().map(Halfspace::homogeneous).collect(),
    )
    .expect("gradient dimensions checked on construction")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cq {
    Licq,
    Mfcq,
    Slater,
    AbadiePolyhedral,
}

impl Cq {
    pub fn parse(s: &str) -> Result<Cq> {
        match s {
            "licq" => Ok(Cq::Licq),
            "mfcq" => Ok(Cq::Mfcq),
            "slater" => Ok(Cq::Slater),
            "abadie" | "abadie_polyhedral" => Ok(Cq::AbadiePolyhedral),
            other => Err(Error::input(format!("unknown constraint qualification '{other}'"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Cq::Licq => "licq",
            Cq::Mfcq => "mfcq",
            Cq::Slater => "slater",
            Cq::AbadiePolyhedral => "abadie_polyhedral",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CqVerdict {
    pub which: Cq,
    pub holds: bool,
    pub evidence: String,
    /// MFCQ direction `y`, or the Slater point.
    pub point: Option<RVec>,
    /// Strict slack of the MFCQ direction.
    pub slack: Option<Rational>,
}

impl CqVerdict {
    fn new(which: Cq, holds: bool, evidence: impl Into<String>) -> Self {
        CqVerdict {
            which,
            holds,
            evidence: evidence.into(),
            point: None,
            slack: None,
        }
    }
}

/// Checks one constraint qualification. `program` is needed for Slater and
/// Abadie; `slater_point` for Slater.
pub fn cq_check(
    p: &SmoothProblemAtPoint,
    which: Cq,
    program: Option<&Program>,
    slater_point: Option<&[Rational]>,
) -> Result<CqVerdict> {
    match which {
        Cq::Licq => {
            let mut rows = p.active_grads();
            rows.extend(p.grad_h.iter().cloned());
            let rank = matrix_rank(&rows);
            Ok(CqVerdict::new(
                which,
                rank == rows.len(),
                format!("rank {rank} of {} stacked gradients", rows.len()),
            ))
        }
        Cq::Mfcq => mfcq(p),
        Cq::Slater => {
            let program = program.ok_or_else(|| Error::input("slater needs the problem functions"))?;
            let x0 = slater_point.ok_or_else(|| Error::input("witness required: slater needs a point x0"))?;
            slater(program, p, x0)
        }
        Cq::AbadiePolyhedral => {
            let program = program.ok_or_else(|| Error::input("abadie needs the problem functions"))?;
            abadie_polyhedral(program, p)
        }
    }
}

fn mfcq(p: &SmoothProblemAtPoint) -> Result<CqVerdict> {
    let m = p.grad_h.len();
    let rank = matrix_rank(&p.grad_h);
    if rank < m {
        return Ok(CqVerdict::new(
            Cq::Mfcq,
            false,
            format!("equality gradients dependent: rank {rank} < {m}"),
        ));
    }
    let strict: Vec<(RVec, Rational)> = p.active_grads().into_iter().map(|g| (g, Rational::zero())).collect();
    let equal: Vec<(RVec, Rational)> = p.grad_h.iter().map(|g| (g.clone(), Rational::zero())).collect();
    let (y, t) = max_slack(p.dim(), &strict, &equal)?.expect("y = 0 is feasible");
    let holds = t.is_positive();
    let evidence = if holds {
        format!("direction ({}) with slack {}", fmt_vec(&y).join(", "), crate::num::fmt_rational(&t))
    } else {
        "no direction strictly decreases every active constraint".to_string()
    };
    let mut v = CqVerdict::new(Cq::Mfcq, holds, evidence);
    v.point = Some(y);
    v.slack = Some(t);
    Ok(v)
}

fn slater(program: &Program, p: &SmoothProblemAtPoint, x0: &[Rational]) -> Result<CqVerdict> {
    check_dim("slater point", x0.len(), program.dim)?;
    for (i, _) in &p.active {
        ConvexExpr::new(program.inequalities[*i].clone(), program.dim)?;
    }
    for (j, h) in program.equalities.iter().enumerate() {
        if h.as_affine(program.dim).is_none() {
            return Err(Error::Fragment {
                fragment: "not certified convex",
                reason: format!("equality {j} is not affine"),
            });
        }
    }
    // Without independent equality gradients the implication to MFCQ breaks
    // (duplicate rows), so they are part of the check.
    let m = p.grad_h.len();
    if matrix_rank(&p.grad_h) < m {
        return Ok(CqVerdict::new(Cq::Slater, false, "affine equality gradients are dependent"));
    }
    for (i, g) in program.inequalities.iter().enumerate() {
        let v = exact(eval(g, x0)?)?;
        if !v.is_negative() {
            return Ok(CqVerdict::new(
                Cq::Slater,
                false,
                format!("inequality {i} is {} at x0, not < 0", crate::num::fmt_rational(&v)),
            ));
        }
    }
    for (j, h) in program.equalities.iter().enumerate() {
        let v = exact(eval(h, x0)?)?;
        if !v.is_zero() {
            return Ok(CqVerdict::new(
                Cq::Slater,
                false,
                format!("equality {j} is {} at x0", crate::num::fmt_rational(&v)),
            ));
        }
    }
    let mut v = CqVerdict::new(Cq::Slater, true, "strictly feasible x0 with structurally convex active inequalities");
    v.point = Some(x0.to_vec());
    Ok(v)
}

fn exact(v: Value) -> Result<Rational> {
    v.exact()
        .cloned()
        .ok_or_else(|| Error::precondition("approximate value where an exact comparison is required"))
}

fn abadie_polyhedral(program: &Program, p: &SmoothProblemAtPoint) -> Result<CqVerdict> {
    let n = program.dim;
    let undecidable = || Error::Fragment {
        fragment: "polyhedral constraints",
        reason: "undecidable here, use sampling falsifier".to_string(),
    };
    let mut ineqs = Vec::new();
    for g in &program.inequalities {
        let (a, b) = g.as_affine(n).ok_or_else(undecidable)?;
        ineqs.push(Halfspace::new(a, -b));
    }
    let mut eqs = Vec::new();
    for h in &program.equalities {
        let (a, b) = h.as_affine(n).ok_or_else(undecidable)?;
        eqs.push(Halfspace::new(a, -b));
    }
    let s = HPolyhedron::new(n, ineqs, eqs)?;
    let (tangent, _) = tangent_normal_cones(&s, &p.x)?;
    let lin = linearizing_cone(p);
    let same = lin.cone_subset_of(&tangent)? && tangent.cone_subset_of(&lin)?;
    let evidence = if same {
        "polyhedral feasible set: tangent cone equals linearizing cone (confirmed)"
    } else {
        "linearizing cone differs from the tangent cone (supplied gradients disagree with the constraints)"
    };
    Ok(CqVerdict::new(Cq::AbadiePolyhedral, same, evidence))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    pub instances: usize,
    pub licq: usize,
    pub mfcq: usize,
    pub slater: usize,
    /// Instances (by position) where LICQ or Slater held but MFCQ did not.
    pub violations: Vec<(usize, String)>,
    pub notes: Vec<String>,
}

/// One audited instance: the point data plus, optionally, the program and
/// a Slater point.
pub struct AuditInstance<'a> {
    pub point: &'a SmoothProblemAtPoint,
    pub program: Option<&'a Program>,
    pub slater_point: Option<&'a [Rational]>,
}

/// Checks LICQ ⇒ MFCQ and Slater ⇒ MFCQ on every instance.
pub fn cq_implication_audit(corpus: &[AuditInstance]) -> Result<AuditReport> {
    let mut r = AuditReport {
        instances: corpus.len(),
        ..AuditReport::default()
    };
    if corpus.is_empty() {
        return Ok(r);
    }
    for (k, inst) in corpus.iter().enumerate() {
        let licq = cq_check(inst.point, Cq::Licq, None, None)?.holds;
        let mfcq = cq_check(inst.point, Cq::Mfcq, None, None)?.holds;
        let slater = match (inst.program, inst.slater_point) {
            (Some(p), Some(x0)) => match cq_check(inst.point, Cq::Slater, Some(p), Some(x0)) {
                Ok(v) => v.holds,
                Err(Error::Fragment { .. }) => false,
                Err(e) => return Err(e),
            },
            _ => false,
        };
        r.licq += licq as usize;
        r.mfcq += mfcq as usize;
        r.slater += slater as usize;
        if licq && !mfcq {
            r.violations.push((k, "licq holds but mfcq fails".to_string()));
        }
        if slater && !mfcq {
            r.violations.push((k, "slater holds but mfcq fails".to_string()));
        }
    }
    r.notes
        .push("abadie implies guignard by definition (C ⊆ T ⊆ co T); not computed".to_string());
    Ok(r)
}

/// Samples continuity and Fréchet differentiability of every piecewise
/// function of the program at `x`: the multiplier rule needs them near the
/// point, not only differentiability at it.
pub fn probe_piecewise(p: &Program, x: &[Rational]) -> Vec<(Role, RegularityReport)> {
    let roles = std::iter::once(Role::Objective)
        .chain((0..p.inequalities.len()).map(Role::Inequality))
        .chain((0..p.equalities.len()).map(Role::Equality));
    roles
        .zip(p.all_functions())
        .filter(|(_, e)| e.contains_piecewise())
        .map(|(role, e)| (role, regularity_probe(e, x)))
        .collect()
}

/// Refutation directions are descent directions of `f` inside the
/// linearizing cone; exact re-check.
pub fn refutation_is_descent(p: &SmoothProblemAtPoint, direction: &[Rational]) -> bool {
    let d = direction;
    crate::num::dot(&p.grad_f, d).is_negative()
        && p.active.iter().all(|(_, g)| !crate::num::dot(g, d).is_positive())
        && p.grad_h.iter().all(|g| crate::num::dot(g, d).is_zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::Status;
    use crate::num::{int, rvec};

    fn at(grad_f: &[i64], active: &[&[i64]], eqs: &[&[i64]]) -> SmoothProblemAtPoint {
        let n = grad_f.len();
        SmoothProblemAtPoint::from_gradients(
            crate::num::zeros(n),
            rvec(grad_f),
            active.iter().map(|g| rvec(g)).collect(),
            eqs.iter().map(|g| rvec(g)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn junction_gradients_refute_fj() {
        let p = at(&[1, 0], &[], &[&[0, 1]]);
        let c = kkt_fj_smooth(&p, Mode::FritzJohn).unwrap();
        assert_eq!(c.status, Status::Fails);
        assert!(refutation_is_descent(&p, &c.refutations[0].direction));
    }

    #[test]
    fn zero_objective_gradient() {
        let p = at(&[0, 0], &[], &[&[0, 1]]);
        let c = kkt_fj_smooth(&p, Mode::FritzJohn).unwrap();
        assert!(c.holds() && c.verify_witness());
        assert_eq!((c.lambda0.clone(), c.mus.clone()), (Some(int(1)), rvec(&[0])));
    }

    #[test]
    fn kkt_active_bound() {
        let p = at(&[1], &[&[-1]], &[]);
        let c = kkt_fj_smooth(&p, Mode::Kkt).unwrap();
        assert!(c.holds());
        assert_eq!(c.lambdas, rvec(&[1]));
    }

    #[test]
    fn linearizing_cones() {
        let p = at(&[0, 0], &[&[-1, 0], &[0, -1]], &[]);
        let c = linearizing_cone(&p);
        assert!(c.contains(&rvec(&[1, 2])).unwrap());
        assert!(!c.contains(&rvec(&[-1, 0])).unwrap());
        let free = linearizing_cone(&at(&[0, 0], &[], &[]));
        assert!(free.contains(&rvec(&[-5, 3])).unwrap());
        let eq = linearizing_cone(&at(&[0, 0], &[], &[&[0, 1]]));
        assert!(eq.contains(&rvec(&[4, 0])).unwrap());
        assert!(!eq.contains(&rvec(&[0, 1])).unwrap());
    }

    #[test]
    fn licq_and_mfcq() {
        assert!(cq_check(&at(&[0, 0], &[&[1, 0], &[0, 1]], &[]), Cq::Licq, None, None).unwrap().holds);
        assert!(!cq_check(&at(&[0, 0], &[&[1, 2], &[2, 4]], &[]), Cq::Licq, None, None).unwrap().holds);
        let v = cq_check(&at(&[0, 0], &[&[1, 0], &[0, 1]], &[]), Cq::Mfcq, None, None).unwrap();
        assert!(v.holds);
        assert_eq!((v.point.unwrap(), v.slack.unwrap()), (rvec(&[-1, -1]), int(1)));
        assert!(!cq_check(&at(&[0], &[&[1], &[-1]], &[]), Cq::Mfcq, None, None).unwrap().holds);
    }

    #[test]
    fn slater_and_abadie() {
        // x <= 0, -x - 1 <= 0 at x = 0.
        let prog = Program::new(
            1,
            Expr::Var(0),
            vec![Expr::Var(0), Expr::affine(&[int(-1)], int(-1))],
            vec![],
        )
        .unwrap();
        let sp = SmoothProblemAtPoint::from_program(&prog, &[int(0)], &GradientOverrides::default()).unwrap();
        let err = cq_check(&sp, Cq::Slater, Some(&prog), None).unwrap_err();
        assert!(err.to_string().contains("witness required"));
        let neg_half = [crate::num::frac(-1, 2)];
        assert!(cq_check(&sp, Cq::Slater, Some(&prog), Some(&neg_half)).unwrap().holds);
        assert!(!cq_check(&sp, Cq::Slater, Some(&prog), Some(&[int(0)])).unwrap().holds);
        assert!(cq_check(&sp, Cq::AbadiePolyhedral, Some(&prog), None).unwrap().holds);

        let curved = Program::new(1, Expr::Var(0), vec![Expr::pow(Expr::Var(0), 2)], vec![]).unwrap();
        let sp = SmoothProblemAtPoint::from_program(&curved, &[int(0)], &GradientOverrides::default()).unwrap();
        let err = cq_check(&sp, Cq::AbadiePolyhedral, Some(&curved), None).unwrap_err();
        assert!(err.to_string().contains("undecidable here, use sampling falsifier"));
    }

    #[test]
    fn audit() {
        assert_eq!(cq_implication_audit(&[]).unwrap().instances, 0);
        let a = at(&[0, 0], &[&[1, 0]], &[]);
        let b = at(&[0], &[&[1], &[2]], &[]);
        let inst = [
            AuditInstance { point: &a, program: None, slater_point: None },
            AuditInstance { point: &b, program: None, slater_point: None },
        ];
        let r = cq_implication_audit(&inst).unwrap();
        assert_eq!((r.licq, r.mfcq), (1, 2));
        assert!(r.violations.is_empty());
    }

    #[test]
    fn overrides_take_priority() {
        let prog = Program::new(1, Expr::abs(Expr::Var(0)), vec![], vec![]).unwrap();
        assert!(SmoothProblemAtPoint::from_program(&prog, &[int(0)], &GradientOverrides::default()).is_err());
        let o = GradientOverrides {
            objective: Some(rvec(&[0])),
            ..GradientOverrides::default()
        };
        let sp = SmoothProblemAtPoint::from_program(&prog, &[int(0)], &o).unwrap();
        assert_eq!(sp.provenance, GradientSource::UserSupplied);
    }
}
