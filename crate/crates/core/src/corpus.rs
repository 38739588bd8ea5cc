//! Regression corpus: every instance file lists the checks to run with the
//! expected status and where that expectation comes from.

use std::path::{Path, PathBuf};

use serde_json::{json, Value as Json};

use crate::error::{Error, Result};
use crate::problem::parse_problem;
use crate::report::{parse_mode, run_check, CheckKind};

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub instance: String,
    pub check: String,
    pub mode: Option<String>,
    pub expected: String,
    /// Status string, or `error: ...` when the check raised.
    pub actual: String,
    pub provenance: String,
}

impl Outcome {
    pub fn matched(&self) -> bool {
        if self.expected == "error" {
            self.actual.starts_with("error")
        } else {
            self.actual == self.expected
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusSummary {
    pub files: Vec<PathBuf>,
    pub outcomes: Vec<Outcome>,
    pub warnings: Vec<String>,
}

impl CorpusSummary {
    pub fn mismatches(&self) -> impl Iterator<Item = &Outcome> {
        self.outcomes.iter().filter(|o| !o.matched())
    }

    pub fn all_matched(&self) -> bool {
        self.mismatches().next().is_none()
    }

    pub fn to_json(&self) -> Json {
        json!({
            "files": self.files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>(),
            "outcomes": self.outcomes.iter().map(|o| json!({
                "instance": o.instance,
                "check": o.check,
                "mode": o.mode,
                "expected": o.expected,
                "actual": o.actual,
                "matched": o.matched(),
                "provenance": o.provenance,
            })).collect::<Vec<_>>(),
            "mismatches": self.mismatches().count(),
            "warnings": self.warnings,
        })
    }
}

/// Instance files (`*.json`) in `dir`, sorted by file name.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::input(format!("corpus directory {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

/// Runs the embedded expectations of every instance whose file stem or
/// name contains `filter`.
pub fn corpus_run(dir: &Path, filter: Option<&str>) -> Result<CorpusSummary> {
    let mut summary = CorpusSummary::default();
    for path in corpus_files(dir)? {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
        let file = parse_problem(&text).map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        if let Some(f) = filter {
            if !stem.contains(f) && !file.name.contains(f) {
                continue;
            }
        }
        if file.expect.is_empty() {
            summary.warnings.push(format!("{}: no expectations", path.display()));
        }
        for exp in &file.expect {
            let actual = CheckKind::parse(&exp.check)
                .and_then(|kind| {
                    let mode = exp.mode.as_deref().map(parse_mode).transpose()?;
                    run_check(&file, kind, mode)
                })
                .map(|r| r.status.as_str().to_string())
                .unwrap_or_else(|e| format!("error: {e}"));
            summary.outcomes.push(Outcome {
                instance: file.name.clone(),
                check: exp.check.clone(),
                mode: exp.mode.clone(),
                expected: exp.status.clone(),
                actual,
                provenance: exp.provenance.clone(),
            });
        }
        summary.files.push(path);
    }
    if summary.files.is_empty() {
        summary.warnings.push(match filter {
            Some(f) => format!("no corpus instance matches '{f}'"),
            None => "corpus is empty".to_string(),
        });
    }
    Ok(summary)
}
