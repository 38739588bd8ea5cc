//! Check dispatch over problem files and machine-readable reports.

use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};

use crate::certificate::{Certificate, Mode, Status};
use crate::clarke::{clarke_subdifferential, fritz_john_lipschitz};
use crate::convex::{convex_subdifferential, fritz_john_convex, ConvexExpr};
use crate::ekeland::ekeland_point;
use crate::error::{Error, Result};
use crate::expr::{float_tol, RegularityReport};
use crate::num::{fmt_rational, fmt_vec, RVec};
use crate::problem::ProblemFile;
use crate::quasidiff::{qd_constrained_check, qd_of_expr, qd_regularity_rc, qd_weakened_fj};
use crate::setvalued::{classify_point, cone_convexity_check, sv_fritz_john, verify_sv_multipliers, MinimalityLabel};
use crate::smooth::{
    cq_check, kkt_fj_smooth, probe_piecewise, refutation_is_descent, Cq, GradientSource, SmoothProblemAtPoint,
};

pub const TOOL: &str = "optcert";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theory {
    Smooth,
    Convex,
    Clarke,
    Quasidiff,
    Setvalued,
}

impl Theory {
    pub fn as_str(self) -> &'static str {
        match self {
            Theory::Smooth => "smooth",
            Theory::Convex => "convex",
            Theory::Clarke => "clarke",
            Theory::Quasidiff => "quasidiff",
            Theory::Setvalued => "setvalued",
        }
    }

    fn parse(s: &str) -> Result<Theory> {
        match s {
            "smooth" => Ok(Theory::Smooth),
            "convex" => Ok(Theory::Convex),
            "clarke" => Ok(Theory::Clarke),
            "quasidiff" => Ok(Theory::Quasidiff),
            other => Err(Error::input(format!("unknown subdifferential theory '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Kkt,
    FjSmooth,
    FjConvex,
    FjLipschitz,
    FjQuasidiff,
    QdInclusion,
    FjSetvalued,
    Cq(Cq),
    Subdiff(Theory),
    Ekeland,
    Minimality,
    ConeConvexity,
}

impl CheckKind {
    pub fn parse(s: &str) -> Result<CheckKind> {
        if let Some(rest) = s.strip_prefix("cq:") {
            return Ok(CheckKind::Cq(Cq::parse(rest)?));
        }
        if let Some(rest) = s.strip_prefix("subdiff:") {
            return Ok(CheckKind::Subdiff(Theory::parse(rest)?));
        }
        Ok(match s {
            "kkt" => CheckKind::Kkt,
            "fj-smooth" => CheckKind::FjSmooth,
            "fj-convex" => CheckKind::FjConvex,
            "fj-lipschitz" => CheckKind::FjLipschitz,
            "fj-quasidiff" => CheckKind::FjQuasidiff,
            "qd-inclusion" => CheckKind::QdInclusion,
            "fj-setvalued" => CheckKind::FjSetvalued,
            "ekeland" => CheckKind::Ekeland,
            "minimality" => CheckKind::Minimality,
            "cone-convexity" => CheckKind::ConeConvexity,
            other => return Err(Error::input(format!("unknown check '{other}'"))),
        })
    }

    pub fn name(self) -> String {
        match self {
            CheckKind::Kkt => "kkt".into(),
            CheckKind::FjSmooth => "fj-smooth".into(),
            CheckKind::FjConvex => "fj-convex".into(),
            CheckKind::FjLipschitz => "fj-lipschitz".into(),
            CheckKind::FjQuasidiff => "fj-quasidiff".into(),
            CheckKind::QdInclusion => "qd-inclusion".into(),
            CheckKind::FjSetvalued => "fj-setvalued".into(),
            CheckKind::Cq(c) => format!("cq:{}", c.as_str()),
            CheckKind::Subdiff(t) => format!("subdiff:{}", t.as_str()),
            CheckKind::Ekeland => "ekeland".into(),
            CheckKind::Minimality => "minimality".into(),
            CheckKind::ConeConvexity => "cone-convexity".into(),
        }
    }

    fn theory(self) -> Theory {
        match self {
            CheckKind::Kkt | CheckKind::FjSmooth | CheckKind::Cq(_) | CheckKind::Ekeland => Theory::Smooth,
            CheckKind::FjConvex => Theory::Convex,
            CheckKind::FjLipschitz => Theory::Clarke,
            CheckKind::FjQuasidiff | CheckKind::QdInclusion => Theory::Quasidiff,
            CheckKind::FjSetvalued | CheckKind::Minimality | CheckKind::ConeConvexity => Theory::Setvalued,
            CheckKind::Subdiff(t) => t,
        }
    }

    fn default_mode(self) -> Option<Mode> {
        match self {
            CheckKind::Kkt => Some(Mode::Kkt),
            CheckKind::FjSmooth | CheckKind::FjConvex | CheckKind::FjLipschitz | CheckKind::FjQuasidiff => {
                Some(Mode::FritzJohn)
            }
            _ => None,
        }
    }
}

pub fn parse_mode(s: &str) -> Result<Mode> {
    match s {
        "kkt" => Ok(Mode::Kkt),
        "fj" => Ok(Mode::FritzJohn),
        other => Err(Error::input(format!("unknown mode '{other}' (expected kkt or fj)"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub instance: String,
    pub check: String,
    pub mode: Option<Mode>,
    pub theory: Theory,
    pub status: Status,
    pub multipliers: Json,
    pub witnesses: Json,
    pub refutations: Json,
    pub numeric_evidence: Json,
    pub details: Json,
    pub notes: Vec<String>,
}

impl Record {
    fn new(file: &ProblemFile, kind: CheckKind, mode: Option<Mode>, status: Status) -> Self {
        Record {
            instance: file.name.clone(),
            check: kind.name(),
            mode,
            theory: kind.theory(),
            status,
            multipliers: Json::Null,
            witnesses: json!([]),
            refutations: json!([]),
            numeric_evidence: json!({"used": false}),
            details: Json::Null,
            notes: Vec::new(),
        }
    }

    fn with_certificate(mut self, cert: &Certificate) -> Self {
        let c = cert.to_json();
        self.multipliers = json!({
            "lambda0": c["lambda0"],
            "lambdas": c["lambdas"],
            "mus": c["mus"],
            "normalization": c["normalization"],
            "lambda0_max": c["lambda0_max"],
        });
        self.witnesses = c["witnesses"].clone();
        self.refutations = c["refutations"].clone();
        self.notes.extend(cert.notes.iter().cloned());
        self
    }

    pub fn to_json(&self) -> Json {
        json!({
            "instance": self.instance,
            "check": self.check,
            "mode": self.mode.map(Mode::as_str),
            "theory": self.theory.as_str(),
            "status": self.status.as_str(),
            "multipliers": self.multipliers,
            "witnesses": self.witnesses,
            "refutations": self.refutations,
            "numeric_evidence": self.numeric_evidence,
            "details": self.details,
            "notes": self.notes,
        })
    }
}

/// 0 holds, 1 fails, 2 inconclusive.
pub fn status_exit_code(s: Status) -> i32 {
    match s {
        Status::Holds => 0,
        Status::Fails => 1,
        Status::Inconclusive => 2,
    }
}

pub const EXIT_INPUT: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub input_digest: String,
    pub records: Vec<Record>,
    pub exit_status: i32,
}

impl Report {
    pub fn new(input: &[u8], records: Vec<Record>) -> Self {
        let exit_status = records
            .iter()
            .map(|r| r.status)
            .max_by_key(|s| match s {
                Status::Holds => 0,
                Status::Inconclusive => 1,
                Status::Fails => 2,
            })
            .map(status_exit_code)
            .unwrap_or(0);
        Report {
            input_digest: digest(input),
            records,
            exit_status,
        }
    }

    pub fn to_json(&self) -> Json {
        json!({
            "tool": TOOL,
            "version": env!("CARGO_PKG_VERSION"),
            "input_digest": self.input_digest,
            "records": self.records.iter().map(Record::to_json).collect::<Vec<_>>(),
            "exit_status": self.exit_status,
        })
    }
}

pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

fn probe_json(reports: &[(crate::certificate::Role, RegularityReport)]) -> Json {
    let items: Vec<Json> = reports
        .iter()
        .map(|(role, r)| {
            json!({
                "function": role.label(),
                "continuous_at_x": r.continuous_at_x,
                "discontinuity_found_in_every_ball": r.discontinuity_found_in_every_ball,
                "witnesses": r.witnesses.iter().map(|w| json!({
                    "k": w.k,
                    "radius": format!("2^-{}", w.k),
                    "point": w.point,
                    "jump": w.jump,
                })).collect::<Vec<_>>(),
                "frechet_ok": r.frechet_ok,
                "candidate_gradient": r.candidate_gradient,
                "fit_residual": r.fit_residual,
                "remainder_ratios": r.remainder_ratios,
                "evidence": r.evidence,
                "notes": r.notes,
            })
        })
        .collect();
    json!({"used": !items.is_empty(), "float_tolerance": float_tol(), "regularity_probe": items})
}

fn vertices_json(v: &[RVec]) -> Json {
    json!(v.iter().map(|p| fmt_vec(p)).collect::<Vec<_>>())
}

/// Runs one check. Refused enumerations become inconclusive records; every
/// other error is an input/fragment error for the caller.
pub fn run_check(file: &ProblemFile, kind: CheckKind, mode: Option<Mode>) -> Result<Record> {
    let mode = match (mode, kind.default_mode()) {
        (Some(m), Some(_)) if matches!(kind, CheckKind::Kkt | CheckKind::FjSmooth) => Some(m),
        (Some(Mode::Kkt), Some(Mode::FritzJohn)) => {
            return Err(Error::input(format!("check {} supports only fj mode", kind.name())))
        }
        (Some(_), None) => return Err(Error::input(format!("check {} takes no mode", kind.name()))),
        (_, d) => d,
    };
    match dispatch(file, kind, mode) {
        Err(Error::Refused(why)) => {
            let mut r = Record::new(file, kind, mode, Status::Inconclusive);
            r.notes.push(format!("refused: {why}"));
            Ok(r)
        }
        other => other,
    }
}

fn dispatch(file: &ProblemFile, kind: CheckKind, mode: Option<Mode>) -> Result<Record> {
    match kind {
        CheckKind::Kkt | CheckKind::FjSmooth => smooth_rule(file, kind, mode.expect("smooth checks have a mode")),
        CheckKind::FjConvex => {
            let p = file.require_program()?;
            let cert = fritz_john_convex(p, file.require_point()?)?;
            Ok(Record::new(file, kind, mode, cert.status).with_certificate(&cert))
        }
        CheckKind::FjLipschitz => {
            let p = file.require_program()?;
            let cert = fritz_john_lipschitz(p, file.require_point()?)?;
            Ok(Record::new(file, kind, mode, cert.status).with_certificate(&cert))
        }
        CheckKind::FjQuasidiff => {
            let p = file.require_program()?;
            let x = file.require_point()?;
            let fj = qd_weakened_fj(p, x)?;
            let mut r = Record::new(file, kind, mode, fj.status);
            r.notes.push(fj.label.to_string());
            let tuples: Vec<Json> = fj
                .tuples
                .iter()
                .map(|(w, c)| json!({"w": vertices_json(w), "certificate": c.to_json()}))
                .collect();
            if let Some((w, c)) = fj.failing() {
                r.refutations = json!([{"w": vertices_json(w), "refutations": c.to_json()["refutations"]}]);
            } else {
                r.witnesses = json!(tuples);
            }
            let rc = qd_regularity_rc(p, x)?;
            r.details = json!({
                "active": fj.active,
                "tuples": tuples.len(),
                "regularity_rc": {
                    "holds": rc.holds,
                    "r_hat": fmt_vec(&rc.r_hat),
                    "t": fmt_rational(&rc.t),
                    "lambda0_nonzero": rc.lambda0_nonzero,
                },
            });
            Ok(r)
        }
        CheckKind::QdInclusion => {
            let p = file.require_program()?;
            let inc = qd_constrained_check(p, file.require_point()?)?;
            let status = if inc.holds { Status::Holds } else { Status::Fails };
            let mut r = Record::new(file, kind, mode, status);
            r.details = json!({
                "active": inc.active,
                "lhs": vertices_json(inc.lhs.vertices()),
                "rhs": vertices_json(inc.rhs.vertices()),
            });
            if inc.holds {
                r.witnesses = json!([{"lhs_vertices_in_rhs": vertices_json(inc.lhs.vertices())}]);
            } else {
                r.refutations = json!([{"vertex_outside": inc.witness.as_ref().map(|w| fmt_vec(w))}]);
            }
            Ok(r)
        }
        CheckKind::FjSetvalued => {
            let inst = file
                .setvalued
                .as_ref()
                .and_then(|s| s.instance.as_ref())
                .ok_or_else(|| Error::input("file has no set-valued polyhedral instance"))?;
            let res = sv_fritz_john(inst)?;
            let mut r = Record::new(file, kind, mode, res.status);
            r.notes.extend(res.notes.iter().cloned());
            r.multipliers = json!({"t": fmt_vec(&res.t), "u": fmt_vec(&res.u), "normalization": "sum of |components| = 1"});
            if res.status == Status::Holds {
                r.witnesses = json!([{"t": fmt_vec(&res.t), "u": fmt_vec(&res.u), "verified": verify_sv_multipliers(inst, &res)?}]);
            } else {
                r.refutations = json!([{"farkas": res.farkas.as_ref().map(|f| fmt_vec(f))}]);
            }
            r.details = json!({"regularity": res.regularity, "t_nonzero": res.t_nonzero, "label": res.label});
            Ok(r)
        }
        CheckKind::Cq(which) => {
            let p = file.require_program()?;
            let x = file.require_point()?;
            let sp = SmoothProblemAtPoint::from_program(p, x, &file.overrides)?;
            let v = cq_check(&sp, which, Some(p), file.slater_point.as_deref())?;
            let mut r = Record::new(file, kind, mode, if v.holds { Status::Holds } else { Status::Fails });
            r.details = json!({
                "evidence": v.evidence,
                "point": v.point.as_ref().map(|p| fmt_vec(p)),
                "slack": v.slack.as_ref().map(fmt_rational),
            });
            if which == Cq::AbadiePolyhedral {
                r.notes.push("guignard coincides with abadie on polyhedral sets".to_string());
            }
            Ok(r)
        }
        CheckKind::Subdiff(theory) => subdiff(file, kind, theory),
        CheckKind::Ekeland => {
            let e = file.ekeland.as_ref().ok_or_else(|| Error::input("file has no ekeland data"))?;
            let res = ekeland_point(&e.space, &e.f, e.z, &e.eps, e.lambda.as_ref())?;
            let status = if res.all_checks() { Status::Holds } else { Status::Fails };
            let mut r = Record::new(file, kind, mode, status);
            r.witnesses = json!([{"y": e.space.labels[res.y]}]);
            r.details = ekeland_json(&e.space.labels, &res);
            Ok(r)
        }
        CheckKind::Minimality => {
            let sv = file.setvalued.as_ref().ok_or_else(|| Error::input("file has no set-valued data"))?;
            let map = need(sv.map.as_ref(), "map")?;
            let cone = need(sv.order_cone.as_ref(), "order_cone")?;
            let xs: &RVec = need(sv.x_star.as_ref(), "x_star")?;
            let ys: &RVec = need(sv.y_star.as_ref(), "y_star")?;
            let c = classify_point(map, &sv.feasible, xs, ys, cone)?;
            let status = match c.label {
                MinimalityLabel::None if c.weak.is_none() => Status::Inconclusive,
                MinimalityLabel::None => Status::Fails,
                _ => Status::Holds,
            };
            let mut r = Record::new(file, kind, mode, status);
            r.details = json!({
                "label": c.label.as_str(),
                "strong": c.strong,
                "minimal": c.minimal,
                "weak": c.weak,
                "chain_ok": c.chain_ok(),
            });
            if let Some(w) = &c.witness {
                r.refutations = json!([{"image_point": fmt_vec(w)}]);
            }
            Ok(r)
        }
        CheckKind::ConeConvexity => {
            let sv = file.setvalued.as_ref().ok_or_else(|| Error::input("file has no set-valued data"))?;
            let map = sv.map.as_ref().ok_or_else(|| Error::input("set-valued data lacks map"))?;
            let cone = sv.order_cone.as_ref().ok_or_else(|| Error::input("set-valued data lacks order_cone"))?;
            let c = cone_convexity_check(map, cone)?;
            let mut r = Record::new(file, kind, mode, if c.holds { Status::Holds } else { Status::Fails });
            r.notes.push(c.label.to_string());
            if let Some(w) = &c.counterexample {
                r.refutations = json!([{
                    "x1": fmt_vec(&w.x1), "x2": fmt_vec(&w.x2), "lambda": fmt_rational(&w.lambda),
                    "y1": fmt_vec(&w.y1), "y2": fmt_vec(&w.y2), "combination": fmt_vec(&w.combination),
                }]);
            }
            r.details = json!({"combinations_checked": c.combinations_checked, "skipped": c.skipped});
            Ok(r)
        }
    }
}

fn need<'a, T>(o: Option<&'a T>, what: &str) -> Result<&'a T> {
    o.ok_or_else(|| Error::input(format!("set-valued data lacks {what}")))
}

fn smooth_rule(file: &ProblemFile, kind: CheckKind, mode: Mode) -> Result<Record> {
    let p = file.require_program()?;
    let x = file.require_point()?;
    let sp = SmoothProblemAtPoint::from_program(p, x, &file.overrides)?;
    let cert = kkt_fj_smooth(&sp, mode)?;
    let mut r = Record::new(file, kind, Some(mode), cert.status).with_certificate(&cert);
    let probes = probe_piecewise(p, x);
    r.numeric_evidence = probe_json(&probes);
    if sp.provenance == GradientSource::Float {
        r.numeric_evidence["used"] = json!(true);
    }
    r.details = json!({
        "gradients": {
            "objective": fmt_vec(&sp.grad_f),
            "active_inequalities": sp.active.iter().map(|(i, g)| json!({"index": i, "gradient": fmt_vec(g)})).collect::<Vec<_>>(),
            "equalities": sp.grad_h.iter().map(|g| fmt_vec(g)).collect::<Vec<_>>(),
            "provenance": sp.provenance.as_str(),
        },
    });
    if cert.status == Status::Fails {
        let descent = cert.refutations.iter().all(|rf| refutation_is_descent(&sp, &rf.direction));
        if descent {
            r.notes.push("refutation direction is a descent direction in the linearizing cone (exact)".to_string());
        }
        let discontinuous: Vec<String> = probes
            .iter()
            .filter(|(_, rep)| rep.discontinuity_found_in_every_ball)
            .map(|(role, _)| role.label())
            .collect();
        if !discontinuous.is_empty() {
            r.notes.push(format!(
                "{} discontinuous in every sampled neighborhood: continuity near the point, required by the multiplier rule, fails",
                discontinuous.join(", ")
            ));
        }
    }
    Ok(r)
}

fn subdiff(file: &ProblemFile, kind: CheckKind, theory: Theory) -> Result<Record> {
    let p = file.require_program()?;
    let x = file.require_point()?;
    let mut r = Record::new(file, kind, None, Status::Holds);
    r.details = match theory {
        Theory::Convex => {
            let s = convex_subdifferential(&ConvexExpr::new(p.objective.clone(), p.dim)?, x)?;
            json!({"set": vertices_json(s.vertices()), "exactness": "exact"})
        }
        Theory::Clarke => {
            let g = clarke_subdifferential(&p.objective, x)?;
            json!({"set": vertices_json(g.set.vertices()), "exactness": g.exactness.as_str()})
        }
        Theory::Quasidiff => {
            let q = qd_of_expr(&p.objective, x)?;
            json!({"sub": vertices_json(q.sub.vertices()), "sup": vertices_json(q.sup.vertices())})
        }
        Theory::Smooth => {
            let sp = SmoothProblemAtPoint::from_program(&crate::program::Program::unconstrained(p.dim, p.objective.clone())?, x, &file.overrides)?;
            json!({"set": vertices_json(&[sp.grad_f]), "provenance": sp.provenance.as_str()})
        }
        Theory::Setvalued => unreachable!("not a subdifferential theory"),
    };
    Ok(r)
}

pub fn ekeland_json(labels: &[String], res: &crate::ekeland::EkelandResult) -> Json {
    json!({
        "y": labels[res.y],
        "iterates": res.iterates.iter().map(|it| json!({
            "point": labels[it.point],
            "set": it.set.iter().map(|&i| labels[i].clone()).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "within_radius": res.within_radius,
        "improves": res.improves,
        "strict_minimizer": res.strict_minimizer,
        "monotone": res.monotone,
        "nested": res.nested,
    })
}
