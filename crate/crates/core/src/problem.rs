//! JSON problem files: declared variables, expression trees, a point, and
//! optional set-valued and Ekeland data.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ekeland::FiniteMetricSpace;
use crate::error::{Error, Result};
use crate::expr::{expr_from_raw, expr_to_raw, RawExpr};
use crate::geometry::{FinitelyGeneratedCone, HPolyhedron, Halfspace};
use crate::num::{fmt_vec, parse_rational, parse_vec, RVec, Rational};
use crate::program::Program;
use crate::setvalued::{OrderingCone, PolyhedralInstance, SampledSetValuedMap};
use crate::smooth::GradientOverrides;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProblem {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variables: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<RawExpr>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inequalities: Vec<RawExpr>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub equalities: Vec<RawExpr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient_overrides: Option<RawOverrides>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slater_point: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setvalued: Option<RawSetValued>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ekeland: Option<RawEkeland>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expect: Vec<RawExpectation>,
}

/// Inequality and equality overrides are keyed by index (`"0"`, `"1"`, ...).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub inequalities: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub equalities: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCone {
    pub dim: usize,
    #[serde(default)]
    pub rays: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lines: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawHalfspace {
    pub normal: Vec<String>,
    pub rhs: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPolyhedron {
    pub dim: usize,
    #[serde(default)]
    pub ineqs: Vec<RawHalfspace>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eqs: Vec<RawHalfspace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawEntry {
    pub x: Vec<String>,
    pub images: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInstance {
    pub x_dim: usize,
    pub y_dim: usize,
    pub z_dim: usize,
    pub epi: RawPolyhedron,
    pub x_star: Vec<String>,
    pub y_star: Vec<String>,
    pub z_star: Vec<String>,
    pub c_y: RawCone,
    pub c_z: RawCone,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_hat: Option<RawPolyhedron>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSetValued {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_cone: Option<RawCone>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<Vec<RawEntry>>,
    /// Defaults to every sampled argument.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasible: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_star: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_star: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<RawInstance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawEkeland {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub dist: Vec<Vec<String>>,
    pub f: Vec<String>,
    pub z: String,
    pub eps: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawExpectation {
    pub check: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    pub status: String,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetValuedData {
    pub order_cone: Option<OrderingCone>,
    pub map: Option<SampledSetValuedMap>,
    pub feasible: Vec<RVec>,
    pub x_star: Option<RVec>,
    pub y_star: Option<RVec>,
    pub instance: Option<PolyhedralInstance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EkelandData {
    pub space: FiniteMetricSpace,
    pub f: RVec,
    pub z: usize,
    pub eps: Rational,
    pub lambda: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub name: String,
    pub variables: Vec<String>,
    /// Absent for files carrying only set-valued or Ekeland data.
    pub program: Option<Program>,
    pub point: Option<RVec>,
    pub overrides: GradientOverrides,
    pub slater_point: Option<RVec>,
    pub setvalued: Option<SetValuedData>,
    pub ekeland: Option<EkelandData>,
    pub expect: Vec<RawExpectation>,
    raw: RawProblem,
}

fn at(path: &str, e: impl std::fmt::Display) -> Error {
    Error::input(format!("{path}: {e}"))
}

fn vec_at(path: &str, items: &[String], dim: Option<usize>) -> Result<RVec> {
    if let Some(d) = dim {
        if items.len() != d {
            return Err(at(path, format!("dimension mismatch: {} entries, expected {d}", items.len())));
        }
    }
    parse_vec(items).map_err(|e| at(path, e))
}

fn rational_at(path: &str, s: &str) -> Result<Rational> {
    parse_rational(s).map_err(|e| at(path, e))
}

fn cone_from_raw(raw: &RawCone, path: &str) -> Result<OrderingCone> {
    let rays = raw
        .rays
        .iter()
        .enumerate()
        .map(|(i, r)| vec_at(&format!("{path}.rays[{i}]"), r, Some(raw.dim)))
        .collect::<Result<_>>()?;
    let lines = raw
        .lines
        .iter()
        .enumerate()
        .map(|(i, r)| vec_at(&format!("{path}.lines[{i}]"), r, Some(raw.dim)))
        .collect::<Result<_>>()?;
    OrderingCone::new(FinitelyGeneratedCone::new(raw.dim, rays, lines)?)
}

fn polyhedron_from_raw(raw: &RawPolyhedron, path: &str) -> Result<HPolyhedron> {
    let rows = |hs: &[RawHalfspace], what: &str| -> Result<Vec<Halfspace>> {
        hs.iter()
            .enumerate()
            .map(|(i, h)| {
                let p = format!("{path}.{what}[{i}]");
                Ok(Halfspace::new(
                    vec_at(&format!("{p}.normal"), &h.normal, Some(raw.dim))?,
                    rational_at(&format!("{p}.rhs"), &h.rhs)?,
                ))
            })
            .collect()
    };
    HPolyhedron::new(raw.dim, rows(&raw.ineqs, "ineqs")?, rows(&raw.eqs, "eqs")?)
}

fn setvalued_from_raw(raw: &RawSetValued) -> Result<SetValuedData> {
    let p = "$.setvalued";
    let order_cone = raw
        .order_cone
        .as_ref()
        .map(|c| cone_from_raw(c, &format!("{p}.order_cone")))
        .transpose()?;
    let map = match &raw.map {
        None => None,
        Some(entries) => {
            let image_dim = order_cone
                .as_ref()
                .map(|c| c.dim())
                .or_else(|| entries.first().and_then(|e| e.images.first()).map(|y| y.len()))
                .unwrap_or(0);
            let arg_dim = entries.first().map(|e| e.x.len());
            let mut parsed = Vec::with_capacity(entries.len());
            for (i, e) in entries.iter().enumerate() {
                let ep = format!("{p}.map[{i}]");
                let x = vec_at(&format!("{ep}.x"), &e.x, arg_dim)?;
                let ys = e
                    .images
                    .iter()
                    .enumerate()
                    .map(|(k, y)| vec_at(&format!("{ep}.images[{k}]"), y, Some(image_dim)))
                    .collect::<Result<_>>()?;
                parsed.push((x, ys));
            }
            Some(SampledSetValuedMap::new(parsed, image_dim)?)
        }
    };
    let feasible = match (&raw.feasible, &map) {
        (Some(xs), _) => xs
            .iter()
            .enumerate()
            .map(|(i, x)| vec_at(&format!("{p}.feasible[{i}]"), x, None))
            .collect::<Result<_>>()?,
        (None, Some(m)) => m.entries.iter().map(|(x, _)| x.clone()).collect(),
        (None, None) => Vec::new(),
    };
    let opt_vec = |v: &Option<Vec<String>>, what: &str| -> Result<Option<RVec>> {
        v.as_ref().map(|v| vec_at(&format!("{p}.{what}"), v, None)).transpose()
    };
    let instance = match &raw.instance {
        None => None,
        Some(r) => {
            let ip = format!("{p}.instance");
            let inst = PolyhedralInstance {
                x_dim: r.x_dim,
                y_dim: r.y_dim,
                z_dim: r.z_dim,
                epi: polyhedron_from_raw(&r.epi, &format!("{ip}.epi"))?,
                x_star: vec_at(&format!("{ip}.x_star"), &r.x_star, Some(r.x_dim))?,
                y_star: vec_at(&format!("{ip}.y_star"), &r.y_star, Some(r.y_dim))?,
                z_star: vec_at(&format!("{ip}.z_star"), &r.z_star, Some(r.z_dim))?,
                c_y: cone_from_raw(&r.c_y, &format!("{ip}.c_y"))?,
                c_z: cone_from_raw(&r.c_z, &format!("{ip}.c_z"))?,
                s_hat: match &r.s_hat {
                    Some(s) => polyhedron_from_raw(s, &format!("{ip}.s_hat"))?,
                    None => HPolyhedron::whole_space(r.x_dim),
                },
            };
            Some(inst)
        }
    };
    Ok(SetValuedData {
        order_cone,
        map,
        feasible,
        x_star: opt_vec(&raw.x_star, "x_star")?,
        y_star: opt_vec(&raw.y_star, "y_star")?,
        instance,
    })
}

fn ekeland_from_raw(raw: &RawEkeland) -> Result<EkelandData> {
    let p = "$.ekeland";
    let n = raw.dist.len();
    let dist = raw
        .dist
        .iter()
        .enumerate()
        .map(|(i, row)| vec_at(&format!("{p}.dist[{i}]"), row, Some(n)))
        .collect::<Result<_>>()?;
    let labels = raw.labels.clone().unwrap_or_else(|| (0..n).map(|i| i.to_string()).collect());
    let space = FiniteMetricSpace::new(labels, dist).map_err(|e| at(&format!("{p}.dist"), e))?;
    let z = space
        .index_of(&raw.z)
        .ok_or_else(|| at(&format!("{p}.z"), format!("unknown point label '{}'", raw.z)))?;
    Ok(EkelandData {
        f: vec_at(&format!("{p}.f"), &raw.f, Some(n))?,
        z,
        eps: rational_at(&format!("{p}.eps"), &raw.eps)?,
        lambda: raw.lambda.as_ref().map(|l| rational_at(&format!("{p}.lambda"), l)).transpose()?,
        space,
    })
}

fn overrides_from_raw(raw: &RawOverrides, dim: usize, p: &Program) -> Result<GradientOverrides> {
    let base = "$.gradient_overrides";
    let keyed = |m: &BTreeMap<String, Vec<String>>, what: &str, count: usize| -> Result<BTreeMap<usize, RVec>> {
        m.iter()
            .map(|(k, v)| {
                let path = format!("{base}.{what}.{k}");
                let i: usize = k.parse().map_err(|_| at(&path, "key must be an index"))?;
                if i >= count {
                    return Err(at(&path, format!("index {i} out of range ({count} {what})")));
                }
                Ok((i, vec_at(&path, v, Some(dim))?))
            })
            .collect()
    };
    Ok(GradientOverrides {
        objective: raw
            .objective
            .as_ref()
            .map(|v| vec_at(&format!("{base}.objective"), v, Some(dim)))
            .transpose()?,
        inequalities: keyed(&raw.inequalities, "inequalities", p.inequalities.len())?,
        equalities: keyed(&raw.equalities, "equalities", p.equalities.len())?,
    })
}

impl ProblemFile {
    pub fn from_raw(raw: RawProblem) -> Result<Self> {
        let vars = raw.variables.clone();
        let dim = vars.len();
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].contains(v) {
                return Err(at("$.variables", format!("duplicate variable '{v}'")));
            }
        }
        let program = match &raw.objective {
            None => {
                if !raw.inequalities.is_empty() || !raw.equalities.is_empty() {
                    return Err(at("$", "constraints given without an objective"));
                }
                None
            }
            Some(obj) => {
                let f = expr_from_raw(obj, &vars, "$.objective")?;
                let gs = raw
                    .inequalities
                    .iter()
                    .enumerate()
                    .map(|(i, e)| expr_from_raw(e, &vars, &format!("$.inequalities[{i}]")))
                    .collect::<Result<_>>()?;
                let hs = raw
                    .equalities
                    .iter()
                    .enumerate()
                    .map(|(j, e)| expr_from_raw(e, &vars, &format!("$.equalities[{j}]")))
                    .collect::<Result<_>>()?;
                Some(Program::new(dim, f, gs, hs)?)
            }
        };
        let point = raw.point.as_ref().map(|p| vec_at("$.point", p, Some(dim))).transpose()?;
        let overrides = match (&raw.gradient_overrides, &program) {
            (Some(o), Some(p)) => overrides_from_raw(o, dim, p)?,
            (Some(_), None) => return Err(at("$.gradient_overrides", "no program to override")),
            (None, _) => GradientOverrides::default(),
        };
        let slater_point = raw
            .slater_point
            .as_ref()
            .map(|p| vec_at("$.slater_point", p, Some(dim)))
            .transpose()?;
        let setvalued = raw.setvalued.as_ref().map(setvalued_from_raw).transpose()?;
        let ekeland = raw.ekeland.as_ref().map(ekeland_from_raw).transpose()?;
        Ok(ProblemFile {
            name: raw.name.clone(),
            variables: vars,
            program,
            point,
            overrides,
            slater_point,
            setvalued,
            ekeland,
            expect: raw.expect.clone(),
            raw,
        })
    }

    /// Canonical JSON: expressions and rationals re-rendered from the parsed
    /// problem.
    pub fn to_json(&self) -> String {
        let mut raw = self.raw.clone();
        if let Some(p) = &self.program {
            raw.objective = Some(expr_to_raw(&p.objective, &self.variables));
            raw.inequalities = p.inequalities.iter().map(|e| expr_to_raw(e, &self.variables)).collect();
            raw.equalities = p.equalities.iter().map(|e| expr_to_raw(e, &self.variables)).collect();
        }
        raw.point = self.point.as_ref().map(|p| fmt_vec(p));
        raw.slater_point = self.slater_point.as_ref().map(|p| fmt_vec(p));
        serde_json::to_string_pretty(&raw).expect("problem serializes")
    }

    pub fn require_program(&self) -> Result<&Program> {
        self.program.as_ref().ok_or_else(|| Error::input("file has no objective"))
    }

    pub fn require_point(&self) -> Result<&RVec> {
        self.point.as_ref().ok_or_else(|| Error::input("file has no point"))
    }
}

/// Parses a problem file; syntax errors carry line and column, semantic
/// errors the JSON path of the offending node.
pub fn parse_problem(text: &str) -> Result<ProblemFile> {
    let raw: RawProblem = serde_json::from_str(text)
        .map_err(|e| Error::input(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    ProblemFile::from_raw(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file() {
        let p = parse_problem(r#"{"name": "m", "variables": ["x"], "objective": {"op": "var", "name": "x"}, "point": ["0"]}"#)
            .unwrap();
        assert_eq!(p.require_program().unwrap().dim, 1);
        assert_eq!(p.point, Some(vec![Rational::from_integer(0.into())]));
    }

    #[test]
    fn bad_rational() {
        let err = parse_problem(r#"{"name": "m", "variables": ["x"], "objective": {"op": "var", "name": "x"}, "point": ["1/0"]}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("$.point"), "{err}");
        assert!(err.contains("zero denominator"), "{err}");
    }

    #[test]
    fn guard_dimension() {
        let text = r#"{"name": "g", "variables": ["x", "y"], "objective": {"op": "piecewise", "pieces": [
            {"guard": [{"normal": ["1", "0", "0"], "rel": ">=", "rhs": "0"}], "expr": {"op": "var", "name": "y"}}
        ]}}"#;
        let err = parse_problem(text).unwrap_err().to_string();
        assert!(err.contains("dimension mismatch"), "{err}");
    }

    #[test]
    fn syntax_errors_are_line_anchored() {
        let err = parse_problem("{\n  \"name\": \"x\",\n  oops\n}").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn unknown_node_kind() {
        let err = parse_problem(r#"{"name": "u", "variables": ["x"], "objective": {"op": "sin", "args": [{"op": "var", "index": 0}]}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("$.objective"), "{err}");
    }

    #[test]
    fn canonical_round_trip() {
        let text = r#"{"name": "r", "variables": ["x"], "objective": {"op": "abs", "args": [{"op": "var", "name": "x"}]},
            "inequalities": [{"op": "sum", "args": [{"op": "var", "name": "x"}, {"op": "const", "value": "-2/4"}]}],
            "point": ["0.0"]}"#;
        let p = parse_problem(text).unwrap();
        let q = parse_problem(&p.to_json()).unwrap();
        assert_eq!(p.program, q.program);
        assert_eq!(p.point, q.point);
        assert_eq!(p.to_json(), q.to_json());
    }
}
