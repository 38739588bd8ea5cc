use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use optcert_core::corpus::corpus_run;
use optcert_core::ekeland::{ekeland_point, FiniteMetricSpace};
use optcert_core::num::{parse_rational, parse_vec};
use optcert_core::problem::parse_problem;
use optcert_core::report::{ekeland_json, parse_mode, run_check, CheckKind, Report, EXIT_INPUT};
use optcert_core::Result;

#[derive(Parser)]
#[command(name = "optcert", version, about = "Exact certificates for optimality conditions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more checks on a problem file and print a JSON report.
    Check {
        file: PathBuf,
        /// Check name, e.g. kkt, fj-smooth, fj-convex, cq:mfcq, subdiff:clarke. Repeatable.
        #[arg(long = "check", required = true)]
        checks: Vec<String>,
        /// kkt or fj; only meaningful for the smooth rule.
        #[arg(long)]
        mode: Option<String>,
        /// Also write the report here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Regression corpus.
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
    /// Ekeland iteration on a finite metric space.
    Ekeland {
        /// Metric-space file: point count (and optional labels), then the distance matrix.
        space: PathBuf,
        /// Comma-separated function values, one per point.
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        /// Starting point label.
        #[arg(long)]
        z: String,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        lambda: Option<String>,
    },
}

#[derive(Subcommand)]
enum CorpusAction {
    Run {
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, default_value = "corpus")]
        dir: PathBuf,
    },
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| optcert_core::Error::Input(format!("{}: {e}", path.display())))
}

fn check(file: &PathBuf, checks: &[String], mode: Option<&str>, out: Option<&PathBuf>) -> Result<i32> {
    let text = read(file)?;
    let problem = parse_problem(&text)?;
    let mode = mode.map(parse_mode).transpose()?;
    let mut records = Vec::new();
    for name in checks {
        records.push(run_check(&problem, CheckKind::parse(name)?, mode)?);
    }
    let report = Report::new(text.as_bytes(), records);
    let rendered = serde_json::to_string_pretty(&report.to_json()).expect("report serializes");
    emit(&rendered);
    if let Some(path) = out {
        std::fs::write(path, format!("{rendered}\n"))
            .map_err(|e| optcert_core::Error::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(report.exit_status)
}

fn corpus(dir: &PathBuf, filter: Option<&str>) -> Result<i32> {
    let summary = corpus_run(dir, filter)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    for o in &summary.outcomes {
        let mode = o.mode.as_deref().map(|m| format!(" --mode {m}")).unwrap_or_default();
        let mark = if o.matched() { "ok  " } else { "FAIL" };
        emit(&format!("{mark} {} {}{mode}: expected {}, got {}", o.instance, o.check, o.expected, o.actual));
    }
    let bad = summary.mismatches().count();
    emit(&format!("{} checks in {} files, {bad} mismatches", summary.outcomes.len(), summary.files.len()));
    Ok(if bad == 0 { 0 } else { 1 })
}

fn ekeland(space: &PathBuf, f: &str, z: &str, eps: &str, lambda: Option<&str>) -> Result<i32> {
    let m = FiniteMetricSpace::parse(&read(space)?)?;
    let values: Vec<String> = f.split(',').map(|s| s.trim().to_string()).collect();
    let f = parse_vec(&values)?;
    let z = m
        .index_of(z)
        .ok_or_else(|| optcert_core::Error::Input(format!("unknown point label '{z}'")))?;
    let eps = parse_rational(eps)?;
    let lambda = lambda.map(parse_rational).transpose()?;
    let res = ekeland_point(&m, &f, z, &eps, lambda.as_ref())?;
    emit(&serde_json::to_string_pretty(&ekeland_json(&m.labels, &res)).expect("report serializes"));
    Ok(if res.all_checks() { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Check { file, checks, mode, json } => check(file, checks, mode.as_deref(), json.as_ref()),
        Command::Corpus {
            action: CorpusAction::Run { filter, dir },
        } => corpus(dir, filter.as_deref()),
        Command::Ekeland { space, f, z, eps, lambda } => ekeland(space, f, z, eps, lambda.as_deref()),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT as u8)
        }
    }
}
