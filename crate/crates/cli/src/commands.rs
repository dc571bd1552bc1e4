//! One function per subcommand. Each computes, writes its files and returns
//! the exit code.

use std::path::PathBuf;

use mather_core::beta::BetaRow;
use mather_core::mane::{ManeEntry, ManeReport, ManeRigidityReport, PotentialVerdict};
use mather_core::rigidity::{ComparisonRow, FlatRigidityReport, FlatVerdict};
use mather_core::{
    beta_batch, flat_rigidity_check, mane_inequality_check, mane_rigidity_check, norm_ball, rigidity_scan, BetaOptions,
    BetaResult, CompareOptions, ComparisonReport, Error, HomologyClass, MetricDoc, MetricSpec,
};
use serde::{Deserialize, Serialize};

use crate::config::{Command, RunConfig};
use crate::gradcheck::{gradcheck, FixtureCheck};
use crate::output::OutputSet;
use crate::CliError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    /// One-line summary for the terminal.
    pub summary: String,
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cfg.command {
        Command::Beta => cmd_beta(cfg),
        Command::NormBall => cmd_norm_ball(cfg),
        Command::Compare => cmd_compare(cfg),
        Command::FlatRigidity => cmd_flat_rigidity(cfg),
        Command::Mane => cmd_mane(cfg),
        Command::Gradcheck => cmd_gradcheck(cfg),
    }
}

fn metric(doc: &Option<MetricDoc>, flag: &str) -> Result<MetricSpec, CliError> {
    let doc = doc
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("missing {flag}")))?;
    doc.to_metric().map_err(|e| CliError::Config(format!("{flag}: {e}")))
}

fn compare_options(cfg: &RunConfig) -> CompareOptions {
    CompareOptions {
        min: cfg.min.clone(),
        tol_rel: cfg.tol_rel,
        grid_n: cfg.grid_n,
    }
}

fn finish(out: OutputSet, exit_code: i32, summary: String) -> Result<Outcome, CliError> {
    Ok(Outcome {
        exit_code,
        files: out.finish(exit_code)?,
        summary,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Failure {
    pub h: HomologyClass,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaOutput {
    pub results: Vec<BetaResult>,
    pub failures: Vec<Failure>,
}

pub fn cmd_beta(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let g = metric(&cfg.metric, "--metric")?;
    let opts = BetaOptions {
        min: cfg.min.clone(),
        ..BetaOptions::default()
    };
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (h, r) in cfg.classes.iter().zip(beta_batch(&g, &cfg.classes, &opts)) {
        match r {
            Ok(r) => results.push(r),
            Err(e @ Error::NotConverged { .. }) => failures.push(Failure {
                h: *h,
                error: e.to_string(),
            }),
            Err(e) => return Err(e.into()),
        }
    }
    let unsettled = failures.len() + results.iter().filter(|r| !r.converged()).count();
    let mut out = OutputSet::new(cfg)?;
    let rows: Vec<BetaRow> = results.iter().map(BetaRow::from).collect();
    out.json("beta.json", &BetaOutput { results, failures })?;
    out.csv("beta.csv", &rows)?;
    let code = if unsettled > 0 { EXIT_INCONCLUSIVE } else { EXIT_OK };
    finish(
        out,
        code,
        format!("{} classes, {unsettled} not converged", cfg.classes.len()),
    )
}

#[derive(Serialize)]
struct BallRow {
    angle: f64,
    p: i64,
    q: i64,
    class_angle: f64,
    radius: f64,
    x: f64,
    y: f64,
    converged: bool,
}

pub fn cmd_norm_ball(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let g = metric(&cfg.metric, "--metric")?;
    let opts = BetaOptions {
        min: cfg.min.clone(),
        sweep_max: 1,
    };
    let ball = norm_ball(&g, cfg.dirs, &opts)?;
    let rows: Vec<BallRow> = ball
        .points
        .iter()
        .map(|b| BallRow {
            angle: b.angle,
            p: b.class[0],
            q: b.class[1],
            class_angle: b.class_angle,
            radius: b.radius,
            x: b.radius * b.class_angle.cos(),
            y: b.radius * b.class_angle.sin(),
            converged: b.converged,
        })
        .collect();
    let unconverged = ball.points.iter().filter(|b| !b.converged).count();
    let mut out = OutputSet::new(cfg)?;
    out.json("norm_ball.json", &ball)?;
    out.csv("norm_ball.csv", &rows)?;
    let code = if unconverged > 0 { EXIT_INCONCLUSIVE } else { EXIT_OK };
    finish(
        out,
        code,
        format!("{} directions, convex: {}", ball.points.len(), ball.convex),
    )
}

fn comparison_rows(r: &ComparisonReport) -> Vec<ComparisonRow> {
    r.entries.iter().map(ComparisonRow::from).collect()
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let g1 = metric(&cfg.metric, "--metric")?;
    let g2 = metric(&cfg.metric2, "--metric2")?;
    let report = rigidity_scan(&g1, &g2, &cfg.classes, &compare_options(cfg))?;
    let mut out = OutputSet::new(cfg)?;
    out.json("compare.json", &report)?;
    out.csv("compare.csv", &comparison_rows(&report))?;
    let summary = format!(
        "C = {:.9}, {} of {} classes in equality, inequality holds: {}",
        report.distortion.value,
        report.equality_classes.len(),
        report.entries.len(),
        report.inequality_holds
    );
    finish(out, report.exit_code(), summary)
}

pub fn cmd_flat_rigidity(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let g = metric(&cfg.metric, "--metric")?;
    let report: FlatRigidityReport = flat_rigidity_check(&g, &cfg.classes, &compare_options(cfg))?;
    let mut out = OutputSet::new(cfg)?;
    out.json("flat_rigidity.json", &report)?;
    out.csv("flat_rigidity.csv", &comparison_rows(&report.comparison))?;
    let code = match (report.comparison.exit_code(), report.verdict) {
        (EXIT_OK, FlatVerdict::Inconclusive) => EXIT_INCONCLUSIVE,
        (c, _) => c,
    };
    let summary = format!("verdict: {:?}", report.verdict);
    finish(out, code, summary)
}

#[derive(Serialize)]
struct ManeRow {
    p: i64,
    q: i64,
    beta_l: f64,
    beta_lv: f64,
    gap: f64,
    numerical_error: f64,
    passed: bool,
    converged: bool,
}

impl From<&ManeEntry> for ManeRow {
    fn from(e: &ManeEntry) -> Self {
        ManeRow {
            p: e.h.k[0],
            q: e.h.k[1],
            beta_l: e.beta_l,
            beta_lv: e.beta_lv,
            gap: e.gap,
            numerical_error: e.numerical_error,
            passed: e.passed,
            converged: e.converged,
        }
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum ManeOutput {
    Rigidity(ManeRigidityReport),
    Inequality(ManeReport),
}

pub fn cmd_mane(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let doc = cfg
        .metric
        .as_ref()
        .ok_or_else(|| CliError::Config("missing --metric".into()))?;
    let l = doc
        .to_lagrangian()
        .map_err(|e| CliError::Config(format!("--metric: {e}")))?;
    let (output, report, verdict) = if l.kinetic.is_flat() {
        let r = mane_rigidity_check(&l.kinetic, &l.potential, &cfg.classes, &cfg.min, cfg.m_max)?;
        let v = Some(r.verdict);
        let rep = r.report.clone();
        (ManeOutput::Rigidity(r), rep, v)
    } else {
        let r = mane_inequality_check(&l.kinetic, &l.potential, &cfg.classes, &cfg.min, cfg.m_max)?;
        (ManeOutput::Inequality(r.clone()), r, None)
    };
    let rows: Vec<ManeRow> = report.entries.iter().map(ManeRow::from).collect();
    let mut out = OutputSet::new(cfg)?;
    out.json("mane.json", &output)?;
    out.csv("mane.csv", &rows)?;
    let code = if !report.all_passed {
        EXIT_VIOLATION
    } else if report.inconclusive || verdict == Some(PotentialVerdict::Inconclusive) {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_OK
    };
    let summary = match verdict {
        Some(v) => format!("all passed: {}, potential verdict: {v:?}", report.all_passed),
        None => format!("all passed: {}", report.all_passed),
    };
    finish(out, code, summary)
}

pub fn cmd_gradcheck(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let g = match &cfg.metric {
        Some(_) => Some(metric(&cfg.metric, "--metric")?),
        None => None,
    };
    let checks: Vec<FixtureCheck> = gradcheck(cfg.fixtures, cfg.min.seed, g.as_ref())?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    let mut out = OutputSet::new(cfg)?;
    out.json("gradcheck.json", &checks)?;
    out.csv("gradcheck.csv", &checks)?;
    let code = if failed > 0 { EXIT_VIOLATION } else { EXIT_OK };
    finish(out, code, format!("{} fixtures, {failed} failed", checks.len()))
}
