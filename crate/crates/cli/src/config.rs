//! Run configuration: an optional JSON file, overlaid by command-line flags.
//!
//! ```json
//! {"metric": "dip.json", "classes": "1,0;0,1;1,1", "starts": 8, "seed": 7}
//! ```
//!
//! Relative metric paths in a file are resolved against the file's
//! directory.

use std::fs;
use std::path::{Path, PathBuf};

use mather_core::io::parse_doc;
use mather_core::{HomologyClass, MetricDoc, MinOptions};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "MATHER_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "mather-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Beta,
    NormBall,
    Compare,
    FlatRigidity,
    Mane,
    Gradcheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Beta => "beta",
            Command::NormBall => "norm-ball",
            Command::Compare => "compare",
            Command::FlatRigidity => "flat-rigidity",
            Command::Mane => "mane",
            Command::Gradcheck => "gradcheck",
        }
    }

    fn needs_classes(self) -> bool {
        matches!(
            self,
            Command::Beta | Command::Compare | Command::FlatRigidity | Command::Mane
        )
    }

    fn needs_metric(self) -> bool {
        self != Command::Gradcheck
    }
}

/// Every setting that can come from a file or a flag. Flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub metric: Option<PathBuf>,
    pub metric2: Option<PathBuf>,
    /// `"p,q;p,q;…"`; components may be fractions such as `1/2`.
    pub classes: Option<String>,
    #[serde(rename = "box")]
    pub box_size: Option<i64>,
    pub starts: Option<usize>,
    pub nodes: Option<usize>,
    pub levels: Option<usize>,
    pub tol_rel: Option<f64>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub grad_tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub grid_n: Option<usize>,
    pub dirs: Option<usize>,
    pub m_max: Option<u32>,
    pub fixtures: Option<usize>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut s: Settings =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        for p in [&mut s.metric, &mut s.metric2].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(s)
    }

    /// Fields set in `self` replace those of `base`.
    pub fn over(self, base: Settings) -> Settings {
        Settings {
            metric: self.metric.or(base.metric),
            metric2: self.metric2.or(base.metric2),
            classes: self.classes.or(base.classes),
            box_size: self.box_size.or(base.box_size),
            starts: self.starts.or(base.starts),
            nodes: self.nodes.or(base.nodes),
            levels: self.levels.or(base.levels),
            tol_rel: self.tol_rel.or(base.tol_rel),
            seed: self.seed.or(base.seed),
            out_dir: self.out_dir.or(base.out_dir),
            workers: self.workers.or(base.workers),
            grad_tol: self.grad_tol.or(base.grad_tol),
            max_iters: self.max_iters.or(base.max_iters),
            grid_n: self.grid_n.or(base.grid_n),
            dirs: self.dirs.or(base.dirs),
            m_max: self.m_max.or(base.m_max),
            fixtures: self.fixtures.or(base.fixtures),
        }
    }
}

/// A fully resolved run. Its JSON form is what the config hash covers, so
/// the output directory and worker count are left out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub metric: Option<MetricDoc>,
    pub metric2: Option<MetricDoc>,
    pub classes: Vec<HomologyClass>,
    pub min: MinOptions,
    pub tol_rel: f64,
    pub grid_n: usize,
    pub dirs: usize,
    pub m_max: u32,
    pub fixtures: usize,
    #[serde(skip)]
    pub out_dir: PathBuf,
    #[serde(skip)]
    pub workers: usize,
}

impl RunConfig {
    pub fn resolve(command: Command, s: Settings) -> Result<Self, CliError> {
        let load = |p: &Option<PathBuf>| -> Result<Option<MetricDoc>, CliError> {
            match p {
                None => Ok(None),
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                    let doc = parse_doc(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                    Ok(Some(doc))
                }
            }
        };
        let metric = load(&s.metric)?;
        let metric2 = load(&s.metric2)?;
        if command.needs_metric() && metric.is_none() {
            return Err(CliError::Config(format!("`{}` needs --metric", command.name())));
        }
        if command == Command::Compare && metric2.is_none() {
            return Err(CliError::Config("`compare` needs --metric2".into()));
        }

        let mut classes = match &s.classes {
            Some(text) => parse_classes(text)?,
            None => Vec::new(),
        };
        if let Some(b) = s.box_size {
            classes.extend(box_classes(b)?);
        }
        if command.needs_classes() && classes.is_empty() {
            return Err(CliError::Config(format!(
                "`{}` needs a nonempty class list (--classes or --box)",
                command.name()
            )));
        }

        let defaults = MinOptions::default();
        let min = MinOptions {
            n0: s.nodes.or(defaults.n0),
            levels: s.levels.unwrap_or(defaults.levels),
            starts: s.starts.unwrap_or(defaults.starts),
            grad_tol: s.grad_tol.unwrap_or(defaults.grad_tol),
            max_iters: s.max_iters.unwrap_or(defaults.max_iters),
            seed: s.seed.unwrap_or(defaults.seed),
            ..defaults
        };
        min.validate().map_err(|e| CliError::Config(e.to_string()))?;

        let compare = mather_core::CompareOptions::default();
        let tol_rel = s.tol_rel.unwrap_or(compare.tol_rel);
        if tol_rel.is_nan() || tol_rel <= 0.0 {
            return Err(CliError::Config("tol-rel must be positive".into()));
        }
        let out_dir = s
            .out_dir
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
        Ok(RunConfig {
            command,
            metric,
            metric2,
            classes,
            min,
            tol_rel,
            grid_n: s.grid_n.unwrap_or(compare.grid_n),
            dirs: s.dirs.unwrap_or(64),
            m_max: s.m_max.unwrap_or(3),
            fixtures: s.fixtures.unwrap_or(20),
            out_dir,
            workers: s.workers.unwrap_or(0),
        })
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn component(s: &str) -> Result<(i64, u64), CliError> {
    let bad = || CliError::Config(format!("bad class component `{s}`"));
    match s.split_once('/') {
        None => Ok((s.trim().parse().map_err(|_| bad())?, 1)),
        Some((n, d)) => {
            let n: i64 = n.trim().parse().map_err(|_| bad())?;
            let d: u64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ok((n, d))
        }
    }
}

/// Parses `"p,q;p,q;…"`. Empty entries are skipped.
pub fn parse_classes(text: &str) -> Result<Vec<HomologyClass>, CliError> {
    let mut out = Vec::new();
    for entry in text.split(';').map(str::trim).filter(|e| !e.is_empty()) {
        let (a, b) = entry
            .split_once(',')
            .ok_or_else(|| CliError::Config(format!("class `{entry}` is not of the form p,q")))?;
        let (pn, pd) = component(a)?;
        let (qn, qd) = component(b)?;
        let p = pn * qd as i64;
        let q = qn * pd as i64;
        let h = HomologyClass::scaled(p, q, 1, pd * qd).map_err(|e| CliError::Config(e.to_string()))?;
        if h.is_zero() {
            return Err(CliError::Config("the null class has no minimizer".into()));
        }
        out.push(h.normalized());
    }
    Ok(out)
}

/// Integer classes with `|p|, |q| ≤ b`, one of each `±` pair (β and the
/// comparisons are even): `q > 0`, or `q = 0` and `p > 0`.
pub fn box_classes(b: i64) -> Result<Vec<HomologyClass>, CliError> {
    if b < 1 {
        return Err(CliError::Config("box size must be at least 1".into()));
    }
    let mut out = Vec::new();
    for q in 0..=b {
        for p in -b..=b {
            if q > 0 || p > 0 {
                out.push(HomologyClass::new(p, q));
            }
        }
    }
    Ok(out)
}
