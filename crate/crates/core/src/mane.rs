//! β for Lagrangians `L_V(x, v) = ½ g_x(v, v) + V(x)`.
//!
//! `V` is added as given: with `max V = 0` the potential can only lower the
//! action. This is not the mechanical `K − U` sign convention; pass `−U`.
//!
//! A class `h = t · m · k₀` is represented by loops of winding `m k₀` run in
//! time `T = m / (t · gcd)`, and the average action of such a loop is
//! minimized with the same engine as the Riemannian energy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::loops::{energy_and_gradient, loop_energy, DiscreteLoop, HomologyClass};
use crate::metrics::{MetricSpec, Sym2};
use crate::minimizer::{
    distinct_minima, metric_stiffness, minimize_energy, minimize_loops, LoopObjective, MinOptions, MinResult,
};
use crate::rigidity::DEDUP_TOL;

/// Resolution of the potential maximum scan.
pub const POTENTIAL_SCAN_GRID: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct TonelliSpec {
    pub kinetic: MetricSpec,
    pub potential: ScalarField,
    /// Whether `max V = 0` has been enforced.
    pub normalized: bool,
}

impl TonelliSpec {
    /// Builds the Lagrangian and normalizes the potential.
    pub fn new(kinetic: MetricSpec, potential: ScalarField) -> Self {
        TonelliSpec {
            kinetic,
            potential: normalize_potential(&potential),
            normalized: true,
        }
    }

    /// Keeps the potential as given.
    pub fn raw(kinetic: MetricSpec, potential: ScalarField) -> Self {
        TonelliSpec {
            kinetic,
            potential,
            normalized: false,
        }
    }

    /// The unperturbed Lagrangian `½ g(v, v)`.
    pub fn free(kinetic: MetricSpec) -> Self {
        TonelliSpec {
            kinetic,
            potential: ScalarField::constant(0.0),
            normalized: true,
        }
    }

    /// `(min V, max V)` on the scan grid, with the maximum polished.
    pub fn potential_range(&self) -> (f64, f64) {
        let (lo, _) = self.potential.grid_range(POTENTIAL_SCAN_GRID);
        let (hi, _) = self.potential.maximum(POTENTIAL_SCAN_GRID);
        (lo, hi)
    }
}

/// `V − max V`, with the maximum located by a grid scan and local polishing.
pub fn normalize_potential(v: &ScalarField) -> ScalarField {
    let (m, _) = v.maximum(POTENTIAL_SCAN_GRID);
    if m == 0.0 {
        v.clone()
    } else {
        v.shifted(-m)
    }
}

/// `Σ_i [ N · g(Δu_i) / (2T²) + V(m_i) / N ]`.
pub fn average_action(l: &TonelliSpec, gamma: &DiscreteLoop, t: f64) -> Result<f64> {
    check_period(t)?;
    let kin = loop_energy(&l.kinetic, gamma)?;
    let n = gamma.len();
    let pot: f64 = (0..n)
        .map(|i| {
            let m = gamma.segment(i).0;
            l.potential.value(m[0], m[1])
        })
        .sum();
    Ok(kin / (t * t) + pot / n as f64)
}

/// [`average_action`] and its gradient with respect to the nodes.
pub fn action_and_gradient(l: &TonelliSpec, gamma: &DiscreteLoop, t: f64, grad: &mut [[f64; 2]]) -> Result<f64> {
    check_period(t)?;
    let kin = energy_and_gradient(&l.kinetic, gamma, grad)?;
    let inv_t2 = 1.0 / (t * t);
    for gj in grad.iter_mut() {
        gj[0] *= inv_t2;
        gj[1] *= inv_t2;
    }
    let n = gamma.len();
    let w = 1.0 / n as f64;
    let mut pot = 0.0;
    for i in 0..n {
        let m = gamma.segment(i).0;
        let d = l.potential.dual(m[0], m[1]);
        pot += d.v;
        // The midpoint moves by half of each endpoint displacement.
        let (gx, gy) = (0.5 * w * d.dx, 0.5 * w * d.dy);
        let j = (i + 1) % n;
        grad[i][0] += gx;
        grad[i][1] += gy;
        grad[j][0] += gx;
        grad[j][1] += gy;
    }
    Ok(kin * inv_t2 + pot * w)
}

/// Gradient of [`average_action`].
pub fn action_gradient(l: &TonelliSpec, gamma: &DiscreteLoop, t: f64) -> Result<Vec<[f64; 2]>> {
    let mut g = vec![[0.0; 2]; gamma.len()];
    action_and_gradient(l, gamma, t, &mut g)?;
    Ok(g)
}

fn check_period(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("period must be positive, got {t}")))
    }
}

/// Average action at a fixed period, as a loop objective.
#[derive(Debug, Clone, Copy)]
pub struct ActionObjective<'a> {
    pub lagrangian: &'a TonelliSpec,
    pub period: f64,
}

impl LoopObjective for ActionObjective<'_> {
    fn value(&self, l: &DiscreteLoop) -> Result<f64> {
        average_action(self.lagrangian, l, self.period)
    }

    fn value_and_gradient(&self, l: &DiscreteLoop, grad: &mut [[f64; 2]]) -> Result<f64> {
        action_and_gradient(self.lagrangian, l, self.period, grad)
    }

    fn stiffness(&self, l: &DiscreteLoop, wx: &mut [f64], wy: &mut [f64]) -> Result<()> {
        metric_stiffness(&self.lagrangian.kinetic, l, 1.0 / (self.period * self.period), wx, wy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverEntry {
    pub m: u32,
    /// Winding of the loops.
    pub k: [i64; 2],
    pub period: f64,
    pub action: f64,
    pub converged: bool,
    /// `|A(final mesh) − A(previous mesh)|` for the best start.
    pub mesh_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManeBeta {
    pub h: HomologyClass,
    pub beta: f64,
    /// Cover that attained `beta`.
    pub m: u32,
    pub per_m: Vec<CoverEntry>,
    pub certificate: MinResult,
}

impl ManeBeta {
    pub fn numerical_error(&self) -> f64 {
        self.per_m.iter().find(|e| e.m == self.m).map_or(0.0, |e| e.mesh_delta)
    }
}

/// β of `l` at a nonzero rational class, minimized over covers `m = 1..=m_max`.
///
/// Each cover is also started from the kinetic-energy minimizers of its
/// winding, so the result never exceeds the unperturbed value through a
/// missed basin.
pub fn beta_mane(l: &TonelliSpec, h: &HomologyClass, opts: &MinOptions, m_max: u32) -> Result<ManeBeta> {
    if h.is_zero() {
        return Err(Error::NullClass);
    }
    if m_max == 0 {
        return Err(Error::InvalidArgument("m_max must be at least 1".into()));
    }
    let (k0, _) = h.primitive_part();
    let mult = h.multiplier();
    let runs: Vec<(CoverEntry, MinResult)> = (1..=m_max)
        .into_par_iter()
        .map(|m| {
            let k = [m as i64 * k0[0], m as i64 * k0[1]];
            let period = m as f64 / mult;
            let free = minimize_energy(&l.kinetic, k, opts)?;
            let warm = distinct_minima(&free, DEDUP_TOL)?;
            let obj = ActionObjective { lagrangian: l, period };
            let r = minimize_loops(&obj, &l.kinetic, k, opts, &warm)?;
            Ok((
                CoverEntry {
                    m,
                    k,
                    period,
                    action: r.energy,
                    converged: r.converged,
                    mesh_delta: r.mesh_delta,
                },
                r,
            ))
        })
        .collect::<Result<_>>()?;
    let best = runs
        .iter()
        .filter(|(e, _)| e.converged)
        .min_by(|a, b| a.0.action.total_cmp(&b.0.action).then(a.0.m.cmp(&b.0.m)));
    let Some((entry, cert)) = best else {
        let (e, r) = &runs[0];
        return Err(Error::NotConverged {
            p: e.k[0],
            q: e.k[1],
            best_grad: r.grad_sup,
            iterations: r.iterations,
        });
    };
    Ok(ManeBeta {
        h: *h,
        beta: entry.action,
        m: entry.m,
        per_m: runs.iter().map(|(e, _)| e.clone()).collect(),
        certificate: cert.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManeEntry {
    pub h: HomologyClass,
    /// β of the unperturbed Lagrangian.
    pub beta_l: f64,
    /// β of the perturbed Lagrangian.
    pub beta_lv: f64,
    /// `beta_l − beta_lv`.
    pub gap: f64,
    pub numerical_error: f64,
    pub passed: bool,
    pub converged: bool,
    pub perturbed: ManeBeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManeReport {
    pub entries: Vec<ManeEntry>,
    pub all_passed: bool,
    pub inconclusive: bool,
}

/// Slack on `β_{L_V} ≤ β_L`, relative to `|β_L|`.
pub const MANE_INEQUALITY_TOL: f64 = 1e-6;

fn entry_for(
    perturbed: &TonelliSpec,
    h: &HomologyClass,
    beta_l: f64,
    free_error: f64,
    opts: &MinOptions,
    m_max: u32,
) -> Result<ManeEntry> {
    let r = beta_mane(perturbed, h, opts, m_max);
    let r = match r {
        Ok(r) => r,
        Err(Error::NotConverged { .. }) => {
            // Keep the entry with the unconverged numbers.
            let loose = MinOptions {
                grad_tol: f64::INFINITY,
                ..opts.clone()
            };
            let mut r = beta_mane(perturbed, h, &loose, m_max)?;
            for e in &mut r.per_m {
                e.converged = false;
            }
            r.certificate.converged = false;
            r
        }
        Err(e) => return Err(e),
    };
    let converged = r.per_m.iter().any(|e| e.converged);
    let gap = beta_l - r.beta;
    let numerical_error = free_error + r.numerical_error() + MANE_INEQUALITY_TOL * beta_l.abs();
    Ok(ManeEntry {
        h: *h,
        beta_l,
        beta_lv: r.beta,
        gap,
        numerical_error,
        passed: gap >= -MANE_INEQUALITY_TOL * beta_l.abs(),
        converged,
        perturbed: r,
    })
}

/// Checks `β_{L_V}(h) ≤ β_L(h)` over `classes`, where `L` is the kinetic
/// Lagrangian of `kinetic` and `V` is normalized first.
pub fn mane_inequality_check(
    kinetic: &MetricSpec,
    potential: &ScalarField,
    classes: &[HomologyClass],
    opts: &MinOptions,
    m_max: u32,
) -> Result<ManeReport> {
    if classes.is_empty() {
        return Err(Error::InvalidArgument("class list is empty".into()));
    }
    let free = TonelliSpec::free(kinetic.clone());
    let perturbed = TonelliSpec::new(kinetic.clone(), potential.clone());
    let entries: Vec<ManeEntry> = classes
        .par_iter()
        .map(|h| {
            let base = beta_mane(&free, h, opts, m_max)?;
            let err = base.numerical_error();
            entry_for(&perturbed, h, base.beta, err, opts, m_max)
        })
        .collect::<Result<_>>()?;
    Ok(report(entries))
}

fn report(entries: Vec<ManeEntry>) -> ManeReport {
    ManeReport {
        all_passed: entries.iter().all(|e| e.passed),
        inconclusive: entries.iter().any(|e| !e.converged),
        entries,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialVerdict {
    /// `V ≡ 0`.
    Zero,
    /// `V ≢ 0`.
    Nonzero,
    Inconclusive,
}

/// `max |V|` at or below which the potential counts as zero.
pub const ZERO_POTENTIAL_TOL: f64 = 1e-12;
/// `max |V|` above which a nonzero verdict is possible.
pub const NONZERO_POTENTIAL_MIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManeRigidityReport {
    pub verdict: PotentialVerdict,
    pub max_abs_potential: f64,
    pub report: ManeReport,
}

/// `½ hᵀ G h`, β of the flat Lagrangian `½ vᵀ G v` (standard identification
/// of `H₁(T²; ℝ)` with `ℝ²`).
pub fn flat_beta(g: &Sym2, h: &HomologyClass) -> f64 {
    0.5 * g.quad(h.vector())
}

/// Decides whether a normalized potential vanishes from β alone, for a flat
/// kinetic term.
pub fn mane_rigidity_check(
    kinetic: &MetricSpec,
    potential: &ScalarField,
    classes: &[HomologyClass],
    opts: &MinOptions,
    m_max: u32,
) -> Result<ManeRigidityReport> {
    let MetricSpec::Flat(g) = kinetic else {
        return Err(Error::InvalidArgument(format!(
            "potential rigidity needs a flat kinetic term, got {}",
            kinetic.kind()
        )));
    };
    if classes.is_empty() {
        return Err(Error::InvalidArgument("class list is empty".into()));
    }
    let perturbed = TonelliSpec::new(kinetic.clone(), potential.clone());
    let (lo, hi) = perturbed.potential_range();
    let max_abs = lo.abs().max(hi.abs());
    let entries: Vec<ManeEntry> = classes
        .par_iter()
        .map(|h| entry_for(&perturbed, h, flat_beta(g, h), 0.0, opts, m_max))
        .collect::<Result<_>>()?;
    let report = report(entries);
    let settled = !report.inconclusive && report.all_passed;
    let verdict = if settled
        && max_abs <= ZERO_POTENTIAL_TOL
        && report.entries.iter().all(|e| e.gap.abs() <= 3.0 * e.numerical_error)
    {
        PotentialVerdict::Zero
    } else if settled
        && max_abs > NONZERO_POTENTIAL_MIN
        && report.entries.iter().all(|e| e.gap > 3.0 * e.numerical_error)
    {
        PotentialVerdict::Nonzero
    } else {
        PotentialVerdict::Inconclusive
    };
    Ok(ManeRigidityReport {
        verdict,
        max_abs_potential: max_abs,
        report,
    })
}
