//! Comparison of β between two metrics against their distortion constant.
//!
//! For every class, `β₂ ≤ C · β₁`. When the gap closes, the two metrics must
//! agree up to the factor `C` along the g₁-minimizers; the comparison checks
//! that on sampled minimizers and reports how far it fails otherwise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::loops::{loop_length, DiscreteLoop, HomologyClass};
use crate::metrics::{distortion_constant, Distortion, MetricSpec};
use crate::minimizer::{distinct_minima, minimize_energy, minimize_energy_from, MinOptions, MinResult};

/// Loops closer than this (cyclic sup distance) count as one minimizer.
pub const DEDUP_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub x: [f64; 2],
    pub v: [f64; 2],
    pub w: f64,
}

/// Position–velocity samples along near-minimal loops of a class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatherSample {
    pub h: HomologyClass,
    pub samples: Vec<WeightedSample>,
    pub source: Vec<DiscreteLoop>,
}

impl MatherSample {
    /// Builds the sample from the distinct near-minimal loops of a converged
    /// minimization of the primitive part of `h`.
    pub fn from_result(h: &HomologyClass, r: &MinResult) -> Result<Self> {
        if !r.converged || r.all_minima.is_empty() {
            let (k0, _) = h.primitive_part();
            return Err(Error::NotConverged {
                p: k0[0],
                q: k0[1],
                best_grad: r.grad_sup,
                iterations: r.iterations,
            });
        }
        let loops = distinct_minima(r, DEDUP_TOL)?;
        let mult = h.multiplier();
        let total: usize = loops.iter().map(DiscreteLoop::len).sum();
        let mut samples = Vec::with_capacity(total);
        for l in &loops {
            let n = l.len() as f64;
            let w = 1.0 / (loops.len() as f64 * n);
            for i in 0..l.len() {
                let (m, d) = l.segment(i);
                samples.push(WeightedSample {
                    x: [crate::field::wrap_unit(m[0]), crate::field::wrap_unit(m[1])],
                    v: [d[0] * n * mult, d[1] * n * mult],
                    w,
                });
            }
        }
        Ok(MatherSample {
            h: *h,
            samples,
            source: loops,
        })
    }

    /// `Σ w · v`.
    pub fn rotation_vector(&self) -> [f64; 2] {
        self.samples
            .iter()
            .fold([0.0, 0.0], |acc, s| [acc[0] + s.w * s.v[0], acc[1] + s.w * s.v[1]])
    }

    /// Fraction of the cells of a `cell_n × cell_n` partition of the torus
    /// that contain a sample position.
    pub fn coverage(&self, cell_n: usize) -> f64 {
        let mut hit = vec![false; cell_n * cell_n];
        for s in &self.samples {
            let i = ((s.x[0] * cell_n as f64) as usize).min(cell_n - 1);
            let j = ((s.x[1] * cell_n as f64) as usize).min(cell_n - 1);
            hit[j * cell_n + i] = true;
        }
        hit.iter().filter(|&&b| b).count() as f64 / hit.len() as f64
    }
}

/// Approximate Mather set of `h` for the metric `g`.
pub fn mather_sample(g: &MetricSpec, h: &HomologyClass, opts: &MinOptions) -> Result<MatherSample> {
    if h.is_zero() {
        return Err(Error::NullClass);
    }
    let r = minimize_energy(g, h.primitive_part().0, opts)?;
    MatherSample::from_result(h, &r)
}

/// Fraction of a `cell_n × cell_n` partition met by the projected Mather
/// sample, using at least `8 · cell_n` starts.
pub fn projected_coverage(g: &MetricSpec, h: &HomologyClass, cell_n: usize, opts: &MinOptions) -> Result<f64> {
    if cell_n == 0 {
        return Err(Error::InvalidArgument("cell_n must be positive".into()));
    }
    let opts = MinOptions {
        starts: opts.starts.max(8 * cell_n),
        ..opts.clone()
    };
    Ok(mather_sample(g, h, &opts)?.coverage(cell_n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareOptions {
    #[serde(flatten)]
    pub min: MinOptions,
    /// Relative gap below which equality is flagged.
    pub tol_rel: f64,
    /// Grid for the distortion constant.
    pub grid_n: usize,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            min: MinOptions::default(),
            tol_rel: 1e-3,
            grid_n: 128,
        }
    }
}

/// Slack on `β₂ ≤ C · β₁`, relative to `C · β₁`.
pub const INEQUALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryStatus {
    /// The inequality holds within tolerance.
    Ok,
    /// `β₂` exceeds `C · β₁` beyond tolerance.
    Violation,
    /// Some minimization did not converge.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub h: HomologyClass,
    pub beta1: f64,
    pub beta2: f64,
    #[serde(rename = "C")]
    pub c: f64,
    /// `C · β₁ − β₂`.
    pub gap: f64,
    pub equality: bool,
    /// `sup |g₂(v,v)/g₁(v,v) − C|` over the g₁ Mather sample, when equality
    /// is flagged.
    pub homothety_residual: Option<f64>,
    /// `max ½ (g₂-length)² − β₂` over the g₁-minimizers, when equality is
    /// flagged.
    pub cross_min_excess: Option<f64>,
    /// Discretization and solver error estimate for `gap`.
    pub numerical_error: f64,
    pub status: EntryStatus,
    pub converged1: bool,
    pub converged2: bool,
    pub certificate1: DiscreteLoop,
    pub certificate2: DiscreteLoop,
    /// Only populated on equality; moved into the report's region.
    #[serde(skip)]
    pub mather: Option<MatherSample>,
}

/// Compares `β` of `g1` and `g2` at `h` given their distortion constant.
///
/// The g₂ minimization is also started from the g₁-minimizers, so the
/// discrete `β₂` can never exceed the discrete `C · β₁` through a missed
/// basin.
pub fn compare_with_distortion(
    g1: &MetricSpec,
    g2: &MetricSpec,
    h: &HomologyClass,
    c: f64,
    opts: &CompareOptions,
) -> Result<ComparisonEntry> {
    if h.is_zero() {
        return Err(Error::NullClass);
    }
    let k0 = h.primitive_part().0;
    let mult = h.multiplier();
    let r1 = minimize_energy(g1, k0, &opts.min)?;
    let warm = distinct_minima(&r1, DEDUP_TOL)?;
    let r2 = minimize_energy_from(g2, k0, &opts.min, &warm)?;
    let beta1 = mult * mult * r1.energy;
    let beta2 = mult * mult * r2.energy;
    let gap = c * beta1 - beta2;
    let scale = c * beta1;
    let numerical_error = mult * mult * (r1.mesh_delta + r2.mesh_delta) + INEQUALITY_TOL * scale;
    let equality = gap <= opts.tol_rel * scale;

    let converged = r1.converged && r2.converged;
    let status = if !converged {
        EntryStatus::Inconclusive
    } else if gap < -INEQUALITY_TOL * scale {
        EntryStatus::Violation
    } else {
        EntryStatus::Ok
    };

    let (mut residual, mut excess, mut mather) = (None, None, None);
    if equality && converged {
        let sample = MatherSample::from_result(h, &r1)?;
        let mut sup = 0.0f64;
        for s in &sample.samples {
            let a = g1.tensor(s.x)?.quad(s.v);
            let b = g2.tensor(s.x)?.quad(s.v);
            sup = sup.max((b / a - c).abs());
        }
        let mut worst = f64::NEG_INFINITY;
        for l in &sample.source {
            let len = mult * loop_length(g2, l)?;
            worst = worst.max(0.5 * len * len - beta2);
        }
        residual = Some(sup);
        excess = Some(worst);
        mather = Some(sample);
    }

    Ok(ComparisonEntry {
        h: *h,
        beta1,
        beta2,
        c,
        gap,
        equality,
        homothety_residual: residual,
        cross_min_excess: excess,
        numerical_error,
        status,
        converged1: r1.converged,
        converged2: r2.converged,
        certificate1: r1.best,
        certificate2: r2.best,
        mather,
    })
}

/// [`compare_with_distortion`] with `C` computed on `opts.grid_n`.
pub fn compare_at_class(
    g1: &MetricSpec,
    g2: &MetricSpec,
    h: &HomologyClass,
    opts: &CompareOptions,
) -> Result<ComparisonEntry> {
    let d = distortion_constant(g1, g2, opts.grid_n)?;
    compare_with_distortion(g1, g2, h, d.value, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub distortion: Distortion,
    pub tol_rel: f64,
    pub entries: Vec<ComparisonEntry>,
    /// Classes whose entry flagged equality.
    pub equality_classes: Vec<HomologyClass>,
    /// Mather samples of the equality classes.
    pub homothety_region: Vec<MatherSample>,
    /// No entry shows a violation.
    pub inequality_holds: bool,
    pub inconclusive: bool,
}

impl ComparisonReport {
    /// 0 when the inequality was verified everywhere, 2 on a violation, 3
    /// when some entry is inconclusive.
    pub fn exit_code(&self) -> i32 {
        if !self.inequality_holds {
            2
        } else if self.inconclusive {
            3
        } else {
            0
        }
    }
}

/// Runs [`compare_with_distortion`] over `classes` concurrently.
pub fn rigidity_scan(
    g1: &MetricSpec,
    g2: &MetricSpec,
    classes: &[HomologyClass],
    opts: &CompareOptions,
) -> Result<ComparisonReport> {
    if classes.is_empty() {
        return Err(Error::InvalidArgument("class list is empty".into()));
    }
    if classes.iter().any(HomologyClass::is_zero) {
        return Err(Error::NullClass);
    }
    let distortion = distortion_constant(g1, g2, opts.grid_n)?;
    let mut entries: Vec<ComparisonEntry> = classes
        .par_iter()
        .map(|h| compare_with_distortion(g1, g2, h, distortion.value, opts))
        .collect::<Result<_>>()?;
    let mut region = Vec::new();
    let mut equality_classes = Vec::new();
    for e in &mut entries {
        if e.equality {
            equality_classes.push(e.h);
        }
        if let Some(s) = e.mather.take() {
            region.push(s);
        }
    }
    Ok(ComparisonReport {
        distortion,
        tol_rel: opts.tol_rel,
        inequality_holds: entries.iter().all(|e| e.status != EntryStatus::Violation),
        inconclusive: entries.iter().any(|e| e.status == EntryStatus::Inconclusive),
        equality_classes,
        homothety_region: region,
        entries,
    })
}

/// One row of the comparison CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub p: i64,
    pub q: i64,
    pub beta1: f64,
    pub beta2: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub gap: f64,
    pub equality: bool,
    pub residual: Option<f64>,
}

impl From<&ComparisonEntry> for ComparisonRow {
    fn from(e: &ComparisonEntry) -> Self {
        let v = e.h.vector();
        let integral = e.h.scale == [1, 1];
        ComparisonRow {
            p: if integral { e.h.k[0] } else { v[0] as i64 },
            q: if integral { e.h.k[1] } else { v[1] as i64 },
            beta1: e.beta1,
            beta2: e.beta2,
            c: e.c,
            gap: e.gap,
            equality: e.equality,
            residual: e.homothety_residual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlatVerdict {
    Flat,
    NotFlat,
    Inconclusive,
}

/// Largest relative oscillation of the normalized factor for which a
/// conformal metric is called flat.
pub const FLAT_SPREAD_TOL: f64 = 1e-12;

/// Resolution of the factor range scan.
pub const FACTOR_SCAN_GRID: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatRigidityReport {
    pub verdict: FlatVerdict,
    /// The maximum the factor was divided by.
    pub factor_max: f64,
    /// `max − min` of the normalized factor on the scan grid.
    pub factor_spread: f64,
    /// Distortion of the normalized metric against its flat base; 1 up to
    /// the refinement tolerance.
    pub normalized_c: f64,
    pub comparison: ComparisonReport,
}

/// Tests whether a conformally flat metric is flat by comparing it, after
/// normalizing its factor to maximum 1, with its flat base.
pub fn flat_rigidity_check(
    g: &MetricSpec,
    classes: &[HomologyClass],
    opts: &CompareOptions,
) -> Result<FlatRigidityReport> {
    let MetricSpec::Conformal { base, factor } = g else {
        return Err(Error::InvalidArgument(format!(
            "flat rigidity needs a conformal metric, got {}",
            g.kind()
        )));
    };
    let flat = MetricSpec::flat(*base)?;
    let d = distortion_constant(&flat, g, opts.grid_n)?;
    let normalized_factor = factor.scaled(1.0 / d.value);
    let normalized = MetricSpec::conformal(*base, normalized_factor.clone())?;
    let nd = distortion_constant(&flat, &normalized, opts.grid_n)?;
    if (nd.value - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidMetric(format!(
            "normalized distortion is {} instead of 1",
            nd.value
        )));
    }
    let spread = factor_spread(&normalized_factor);
    let comparison = rigidity_scan(&flat, &normalized, classes, opts)?;

    let settled = !comparison.inconclusive && comparison.inequality_holds;
    let verdict = if settled && !comparison.equality_classes.is_empty() && spread <= FLAT_SPREAD_TOL {
        FlatVerdict::Flat
    } else if settled && comparison.entries.iter().all(|e| e.gap > 3.0 * e.numerical_error) {
        FlatVerdict::NotFlat
    } else {
        FlatVerdict::Inconclusive
    };
    Ok(FlatRigidityReport {
        verdict,
        factor_max: d.value,
        factor_spread: spread,
        normalized_c: nd.value,
        comparison,
    })
}

fn factor_spread(f: &ScalarField) -> f64 {
    let (lo, hi) = f.grid_range(FACTOR_SCAN_GRID);
    hi - lo
}
