//! Stable norms and β-values at rational homology classes.
//!
//! The minimization always runs on the primitive part `k₀` of a class; the
//! norm of `t · m · k₀` is `t · m · ‖k₀‖`. A sweep over small covers `m · k₀`
//! minimized directly checks that nothing is lost by this reduction.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loops::HomologyClass;
use crate::metrics::MetricSpec;
use crate::minimizer::{minimize_energy, MinOptions, MinResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BetaOptions {
    #[serde(flatten)]
    pub min: MinOptions,
    /// Largest cover `m` in the homogeneity sweep; `1` disables the sweep.
    pub sweep_max: u32,
}

impl Default for BetaOptions {
    fn default() -> Self {
        BetaOptions {
            min: MinOptions::default(),
            sweep_max: 3,
        }
    }
}

impl From<MinOptions> for BetaOptions {
    fn from(min: MinOptions) -> Self {
        BetaOptions {
            min,
            ..BetaOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// The class is primitive and was minimized as is.
    Direct,
    /// The value was scaled up from the primitive part.
    Homogeneity,
}

/// `(1/m) · sqrt(2 E*(m k₀))` for one cover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub m: u32,
    pub value: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaResult {
    pub h: HomologyClass,
    pub stable_norm: f64,
    pub beta: f64,
    pub certificate: MinResult,
    pub method: Method,
    pub m_sweep: Vec<SweepEntry>,
}

impl BetaResult {
    pub fn converged(&self) -> bool {
        self.certificate.converged
    }

    /// Relative spread of the sweep values.
    pub fn sweep_spread(&self) -> f64 {
        let (lo, hi) = self
            .m_sweep
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
                (lo.min(e.value), hi.max(e.value))
            });
        if self.m_sweep.is_empty() {
            0.0
        } else {
            (hi - lo) / hi.abs().max(1e-300)
        }
    }
}

/// `sqrt(2 E*)` for loops of winding exactly `k`, without any reduction.
pub fn stable_norm_direct(g: &MetricSpec, k: [i64; 2], opts: &MinOptions) -> Result<(f64, MinResult)> {
    let r = minimize_energy(g, k, opts)?;
    Ok(((2.0 * r.energy).sqrt(), r))
}

/// Minimization and sweep for one primitive class; shared by every class
/// with that primitive part.
#[derive(Debug, Clone)]
struct PrimitiveRun {
    norm: f64,
    certificate: MinResult,
    sweep: Vec<SweepEntry>,
}

fn primitive_run(g: &MetricSpec, k0: [i64; 2], opts: &BetaOptions) -> Result<PrimitiveRun> {
    let (norm, certificate) = stable_norm_direct(g, k0, &opts.min)?;
    let mut sweep = vec![SweepEntry {
        m: 1,
        value: norm,
        converged: certificate.converged,
    }];
    for m in 2..=opts.sweep_max.max(1) {
        let km = [m as i64 * k0[0], m as i64 * k0[1]];
        let (v, r) = stable_norm_direct(g, km, &opts.min)?;
        sweep.push(SweepEntry {
            m,
            value: v / m as f64,
            converged: r.converged,
        });
    }
    Ok(PrimitiveRun {
        norm,
        certificate,
        sweep,
    })
}

fn assemble(h: HomologyClass, run: &PrimitiveRun) -> Result<BetaResult> {
    if !run.certificate.converged {
        let (k0, _) = h.primitive_part();
        return Err(Error::NotConverged {
            p: k0[0],
            q: k0[1],
            best_grad: run.certificate.grad_sup,
            iterations: run.certificate.iterations,
        });
    }
    Ok(assemble_unchecked(h, run))
}

fn assemble_unchecked(h: HomologyClass, run: &PrimitiveRun) -> BetaResult {
    let stable_norm = h.multiplier() * run.norm;
    BetaResult {
        h,
        stable_norm,
        beta: 0.5 * stable_norm * stable_norm,
        certificate: run.certificate.clone(),
        method: if h.multiplier() == 1.0 && h.primitive_part().1 == 1 {
            Method::Direct
        } else {
            Method::Homogeneity
        },
        m_sweep: run.sweep.clone(),
    }
}

/// Stable norm of a nonzero rational class.
///
/// Fails with [`Error::NotConverged`] when no start converged; the
/// unconverged diagnostics are in the error.
pub fn stable_norm_rational(g: &MetricSpec, h: &HomologyClass, opts: &BetaOptions) -> Result<BetaResult> {
    if h.is_zero() {
        return Err(Error::NullClass);
    }
    let run = primitive_run(g, h.primitive_part().0, opts)?;
    assemble(*h, &run)
}

/// Same computation as [`stable_norm_rational`]; `beta = ½ · stable_norm²`.
pub fn beta_rational(g: &MetricSpec, h: &HomologyClass, opts: &BetaOptions) -> Result<BetaResult> {
    stable_norm_rational(g, h, opts)
}

/// β of the null class.
pub const BETA_OF_ZERO: f64 = 0.0;

/// Evaluates many classes concurrently. Classes sharing a primitive part are
/// minimized once; results come back in input order.
pub fn beta_batch(g: &MetricSpec, classes: &[HomologyClass], opts: &BetaOptions) -> Vec<Result<BetaResult>> {
    let runs = primitive_runs(g, classes, opts);
    classes
        .iter()
        .map(|h| {
            if h.is_zero() {
                return Err(Error::NullClass);
            }
            match &runs[&h.primitive_part().0] {
                Ok(run) => assemble(*h, run),
                Err(e) => Err(e.clone()),
            }
        })
        .collect()
}

fn primitive_runs(
    g: &MetricSpec,
    classes: &[HomologyClass],
    opts: &BetaOptions,
) -> BTreeMap<[i64; 2], Result<PrimitiveRun>> {
    let mut prims: Vec<[i64; 2]> = classes
        .iter()
        .filter(|h| !h.is_zero())
        .map(|h| h.primitive_part().0)
        .collect();
    prims.sort();
    prims.dedup();
    let runs: Vec<Result<PrimitiveRun>> = prims.par_iter().map(|&k0| primitive_run(g, k0, opts)).collect();
    prims.into_iter().zip(runs).collect()
}

/// One row of the batch CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaRow {
    pub p: i64,
    pub q: i64,
    pub scale: f64,
    pub stable_norm: f64,
    pub beta: f64,
    pub converged: bool,
}

impl From<&BetaResult> for BetaRow {
    fn from(r: &BetaResult) -> Self {
        BetaRow {
            p: r.h.k[0],
            q: r.h.k[1],
            scale: r.h.scale_value(),
            stable_norm: r.stable_norm,
            beta: r.beta,
            converged: r.converged(),
        }
    }
}

/// Best rational approximation `(p, q)` of the direction `(cos θ, sin θ)`
/// with `max(|p|, |q|) ≤ max_den`, taken from the continued-fraction
/// convergents of the smaller-over-larger slope.
pub fn direction_class(theta: f64, max_den: i64) -> [i64; 2] {
    let (c, s) = (theta.cos(), theta.sin());
    let swap = s.abs() > c.abs();
    let (big, small) = if swap { (s, c) } else { (c, s) };
    let t = small.abs() / big.abs();
    // Convergents h/k of t ∈ [0, 1].
    let (mut h0, mut k0, mut h1, mut k1) = (0i64, 1i64, 1i64, 0i64);
    let mut x = t;
    let mut best = (0i64, 1i64);
    for _ in 0..64 {
        let a = x.floor();
        if a > max_den as f64 {
            break;
        }
        let a = a as i64;
        let (h2, k2) = (a * h1 + h0, a * k1 + k0);
        if k2 > max_den {
            break;
        }
        best = (h2, k2);
        (h0, k0, h1, k1) = (h1, k1, h2, k2);
        let frac = x - a as f64;
        if frac < 1e-12 {
            break;
        }
        x = 1.0 / frac;
    }
    let (num, den) = best;
    let big_i = den * big.signum() as i64;
    let small_i = num * if small < 0.0 { -1 } else { 1 };
    if swap {
        [small_i, big_i]
    } else {
        [big_i, small_i]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallPoint {
    /// Requested direction.
    pub angle: f64,
    /// Integer class used for the direction.
    pub class: [i64; 2],
    /// Direction of `class`.
    pub class_angle: f64,
    /// `|k| / ‖k‖`, the distance to the unit sphere along `class_angle`.
    pub radius: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormBall {
    pub points: Vec<BallPoint>,
    /// Every turn between consecutive boundary points is to the left.
    pub convex: bool,
    /// Smallest normalized cross product along the boundary.
    pub min_turn: f64,
}

/// Largest denominator used for direction approximations.
pub const BALL_MAX_DEN: i64 = 20;

/// Samples the boundary of the stable-norm unit ball at `n_dirs` equally
/// spaced directions.
pub fn norm_ball(g: &MetricSpec, n_dirs: usize, opts: &BetaOptions) -> Result<NormBall> {
    if n_dirs < 4 {
        return Err(Error::InvalidArgument("norm_ball needs at least 4 directions".into()));
    }
    let angles: Vec<f64> = (0..n_dirs)
        .map(|i| 2.0 * std::f64::consts::PI * i as f64 / n_dirs as f64)
        .collect();
    let classes: Vec<HomologyClass> = angles
        .iter()
        .map(|&a| {
            let k = direction_class(a, BALL_MAX_DEN);
            HomologyClass::new(k[0], k[1])
        })
        .collect();
    let opts = BetaOptions {
        sweep_max: 1,
        ..opts.clone()
    };
    let runs = primitive_runs(g, &classes, &opts);
    let mut points = Vec::with_capacity(n_dirs);
    for (&angle, h) in angles.iter().zip(&classes) {
        let run = runs[&h.primitive_part().0].as_ref().map_err(Clone::clone)?;
        let r = assemble_unchecked(*h, run);
        let [p, q] = h.k;
        points.push(BallPoint {
            angle,
            class: h.k,
            class_angle: (q as f64).atan2(p as f64).rem_euclid(2.0 * std::f64::consts::PI),
            radius: (p as f64).hypot(q as f64) / r.stable_norm,
            converged: r.converged(),
        });
    }
    let min_turn = boundary_min_turn(&points);
    Ok(NormBall {
        convex: min_turn >= -CONVEXITY_TOL,
        min_turn,
        points,
    })
}

/// Slack on the normalized cross product in the convexity test.
pub const CONVEXITY_TOL: f64 = 1e-6;

fn boundary_min_turn(points: &[BallPoint]) -> f64 {
    let mut pts: Vec<(f64, [f64; 2])> = points
        .iter()
        .map(|b| {
            let a = b.class_angle;
            (a, [b.radius * a.cos(), b.radius * a.sin()])
        })
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12);
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    let mut min_turn = f64::INFINITY;
    for i in 0..n {
        let a = pts[i].1;
        let b = pts[(i + 1) % n].1;
        let c = pts[(i + 2) % n].1;
        let e1 = [b[0] - a[0], b[1] - a[1]];
        let e2 = [c[0] - b[0], c[1] - b[1]];
        let cross = e1[0] * e2[1] - e1[1] * e2[0];
        let scale = e1[0].hypot(e1[1]) * e2[0].hypot(e2[1]);
        min_turn = min_turn.min(cross / scale.max(1e-300));
    }
    min_turn
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    Symmetry,
    Homogeneity,
    Triangle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomCheck {
    pub axiom: Axiom,
    pub classes: Vec<HomologyClass>,
    /// Left side of the (in)equality: `‖-h‖`, `‖m h‖` or `‖h₁ + h₂‖`.
    pub lhs: f64,
    /// Right side: `‖h‖`, `m ‖h‖` or `‖h₁‖ + ‖h₂‖`.
    pub rhs: f64,
    pub tol: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub checks: Vec<AxiomCheck>,
    pub all_passed: bool,
}

impl AxiomReport {
    pub fn violations(&self) -> impl Iterator<Item = &AxiomCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub const SYMMETRY_TOL: f64 = 1e-6;
pub const HOMOGENEITY_TOL: f64 = 1e-4;
pub const TRIANGLE_TOL: f64 = 1e-4;

/// Norm of `t · k` computed by minimizing at `k` itself, unconverged runs
/// included.
fn raw_norm(g: &MetricSpec, h: &HomologyClass, opts: &MinOptions) -> Result<f64> {
    let (n, _) = stable_norm_direct(g, h.k, opts)?;
    Ok(h.scale_value() * n)
}

/// Checks symmetry, homogeneity (`m ∈ {2, 3}`, each multiple minimized
/// directly) and the triangle inequality over all pairs of `classes`.
///
/// Violations are report entries; with options too weak to converge the
/// report is expected to show them.
pub fn check_norm_axioms(g: &MetricSpec, classes: &[HomologyClass], opts: &MinOptions) -> Result<AxiomReport> {
    if classes.iter().any(HomologyClass::is_zero) {
        return Err(Error::NullClass);
    }
    let mut needed: Vec<HomologyClass> = Vec::new();
    let mut want = |h: HomologyClass| {
        if !needed.contains(&h) {
            needed.push(h);
        }
    };
    for h in classes {
        want(*h);
        want(h.negated());
        want(h.times(2));
        want(h.times(3));
    }
    let mut pairs = Vec::new();
    for i in 0..classes.len() {
        for j in i + 1..classes.len() {
            let s = classes[i].plus(&classes[j]);
            if !s.is_zero() {
                want(s);
                pairs.push((i, j, s));
            }
        }
    }
    let norms: Vec<f64> = needed.par_iter().map(|h| raw_norm(g, h, opts)).collect::<Result<_>>()?;
    let norm = |h: &HomologyClass| norms[needed.iter().position(|x| x == h).expect("class was requested")];

    let mut checks = Vec::new();
    let rel_check = |axiom, cls: Vec<HomologyClass>, lhs: f64, rhs: f64, tol: f64| {
        let passed = (lhs - rhs).abs() <= tol * rhs.abs();
        AxiomCheck {
            axiom,
            classes: cls,
            lhs,
            rhs,
            tol,
            passed,
        }
    };
    for h in classes {
        let n = norm(h);
        checks.push(rel_check(
            Axiom::Symmetry,
            vec![*h],
            norm(&h.negated()),
            n,
            SYMMETRY_TOL,
        ));
        for m in [2i64, 3] {
            checks.push(rel_check(
                Axiom::Homogeneity,
                vec![*h],
                norm(&h.times(m)),
                m as f64 * n,
                HOMOGENEITY_TOL,
            ));
        }
    }
    for (i, j, s) in pairs {
        let lhs = norm(&s);
        let rhs = norm(&classes[i]) + norm(&classes[j]);
        checks.push(AxiomCheck {
            axiom: Axiom::Triangle,
            classes: vec![classes[i], classes[j]],
            lhs,
            rhs,
            tol: TRIANGLE_TOL,
            passed: lhs <= rhs + TRIANGLE_TOL * rhs,
        });
    }
    Ok(AxiomReport {
        all_passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Sym2;
    use approx::assert_relative_eq;

    fn quick() -> BetaOptions {
        BetaOptions {
            min: MinOptions {
                starts: 2,
                levels: 1,
                ..MinOptions::default()
            },
            sweep_max: 2,
        }
    }

    #[test]
    fn flat_examples() {
        let id = MetricSpec::identity();
        let r = stable_norm_rational(&id, &HomologyClass::new(1, 0), &quick()).unwrap();
        assert_relative_eq!(r.stable_norm, 1.0, max_relative = 1e-9);
        assert_relative_eq!(r.beta, 0.5, max_relative = 1e-9);
        assert_eq!(r.method, Method::Direct);

        let g = MetricSpec::flat(Sym2::diag(2.0, 1.0)).unwrap();
        let r = stable_norm_rational(&g, &HomologyClass::new(1, 2), &quick()).unwrap();
        assert_relative_eq!(r.stable_norm, 6f64.sqrt(), max_relative = 1e-6);

        let r = beta_rational(&id, &HomologyClass::new(3, 4), &quick()).unwrap();
        assert_relative_eq!(r.beta, 12.5, max_relative = 1e-6);
    }

    #[test]
    fn non_primitive_classes_use_homogeneity() {
        let id = MetricSpec::identity();
        let h = HomologyClass::scaled(2, 4, 1, 2).unwrap();
        let r = beta_rational(&id, &h, &quick()).unwrap();
        assert_eq!(r.method, Method::Homogeneity);
        assert_eq!(r.certificate.k, [1, 2]);
        assert_relative_eq!(r.stable_norm, 5f64.sqrt(), max_relative = 1e-7);
        assert_eq!(r.m_sweep.len(), 2);
        assert!(r.sweep_spread() < 1e-6);
        // β from the certificate energy.
        let m = h.multiplier();
        assert_relative_eq!(r.beta, r.certificate.energy * m * m, max_relative = 1e-10);
    }

    #[test]
    fn constant_conformal_factor_scales_beta() {
        let g = MetricSpec::conformal_expr("2.5").unwrap();
        let r = beta_rational(&g, &HomologyClass::new(1, 1), &quick()).unwrap();
        assert_relative_eq!(r.beta, 2.5, max_relative = 1e-6);
    }

    #[test]
    fn null_class_is_rejected() {
        let id = MetricSpec::identity();
        assert_eq!(
            beta_rational(&id, &HomologyClass::new(0, 0), &quick()).unwrap_err(),
            Error::NullClass
        );
    }

    #[test]
    fn unconverged_runs_are_errors() {
        let g = MetricSpec::conformal_expr("1 + 0.3*sin(2*pi*x)*sin(2*pi*y)").unwrap();
        let opts = BetaOptions {
            min: MinOptions {
                starts: 1,
                levels: 0,
                max_iters: 1,
                ..MinOptions::default()
            },
            sweep_max: 1,
        };
        let e = beta_rational(&g, &HomologyClass::new(1, 0), &opts).unwrap_err();
        assert!(matches!(e, Error::NotConverged { p: 1, q: 0, .. }));
    }

    #[test]
    fn batch_preserves_order_and_shares_primitives() {
        let id = MetricSpec::identity();
        let classes = [
            HomologyClass::new(2, 0),
            HomologyClass::new(0, 0),
            HomologyClass::new(1, 0),
        ];
        let out = beta_batch(&id, &classes, &quick());
        assert_relative_eq!(out[0].as_ref().unwrap().beta, 2.0, max_relative = 1e-8);
        assert!(out[1].is_err());
        assert_relative_eq!(out[2].as_ref().unwrap().beta, 0.5, max_relative = 1e-8);
        assert_eq!(
            out[0].as_ref().unwrap().certificate,
            out[2].as_ref().unwrap().certificate
        );
    }

    #[test]
    fn direction_classes() {
        use std::f64::consts::PI;
        assert_eq!(direction_class(0.0, 20), [1, 0]);
        assert_eq!(direction_class(PI / 2.0, 20), [0, 1]);
        assert_eq!(direction_class(PI, 20), [-1, 0]);
        assert_eq!(direction_class(PI / 4.0, 20), [1, 1]);
        assert_eq!(direction_class(-PI / 4.0, 20), [1, -1]);
        assert_eq!(direction_class(3.0f64.atan2(7.0), 20), [7, 3]);
        for i in 0..200 {
            let a = 2.0 * PI * i as f64 / 200.0;
            let k = direction_class(a, 20);
            assert!(k[0].abs().max(k[1].abs()) <= 20);
            let ka = (k[1] as f64).atan2(k[0] as f64);
            let d = (ka - a).sin().abs();
            assert!(d < 1.0 / 20.0, "angle {a}: {k:?}");
        }
    }

    #[test]
    fn flat_balls() {
        let id = MetricSpec::identity();
        let ball = norm_ball(&id, 16, &quick()).unwrap();
        assert!(ball.convex);
        for p in &ball.points {
            assert_relative_eq!(p.radius, 1.0, max_relative = 2e-2);
        }
        let g = MetricSpec::flat(Sym2::diag(1.0, 4.0)).unwrap();
        let ball = norm_ball(&g, 24, &quick()).unwrap();
        assert!(ball.convex);
        for p in &ball.points {
            let (c, s) = (p.angle.cos(), p.angle.sin());
            let exact = 1.0 / (c * c + 4.0 * s * s).sqrt();
            assert!((p.radius - exact).abs() <= 2e-2, "{p:?} vs {exact}");
        }
        assert!(norm_ball(&id, 3, &quick()).is_err());
    }

    #[test]
    fn axioms_hold_for_flat_and_fail_when_underconverged() {
        let id = MetricSpec::identity();
        let classes = [
            HomologyClass::new(1, 0),
            HomologyClass::new(0, 1),
            HomologyClass::new(1, 1),
        ];
        let rep = check_norm_axioms(&id, &classes, &quick().min).unwrap();
        assert!(rep.all_passed, "{:?}", rep.violations().collect::<Vec<_>>());
        assert_eq!(rep.checks.len(), 3 * 3 + 3);

        let g = MetricSpec::conformal_expr("1 + 0.3*sin(2*pi*x)*sin(2*pi*y)").unwrap();
        let weak = MinOptions {
            starts: 1,
            levels: 0,
            max_iters: 1,
            amplitude: 0.2,
            ..MinOptions::default()
        };
        let rep = check_norm_axioms(&g, &classes[..1], &weak).unwrap();
        assert!(rep.violations().any(|c| c.axiom == Axiom::Homogeneity));
    }
}
