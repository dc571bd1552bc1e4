//! Multistart descent for minimal loops in a fixed winding class.
//!
//! Each start runs preconditioned descent with a backtracking line search on
//! a coarse mesh, then re-optimizes after every mesh doubling. The
//! preconditioner is the inverse of a shifted, metric-weighted cyclic
//! Laplacian (an H¹ gradient). By default a short L-BFGS history sits on top
//! of it; reparametrizations along the loop are almost free, and plain
//! gradient steps crawl along them. Starts are independent and run in
//! parallel; results are merged in seed order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loops::{energy_and_gradient, init_loop, loop_energy, loop_length, resample, DiscreteLoop};
use crate::metrics::MetricSpec;

/// How successive search directions are built from preconditioned gradients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Plain preconditioned steepest descent.
    Steepest,
    /// Heavy-ball term with a fixed coefficient.
    HeavyBall(f64),
    /// Polak–Ribière coefficient, clipped at zero.
    PolakRibiere,
    /// Limited-memory BFGS with the given number of stored pairs.
    Lbfgs(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinOptions {
    /// Initial node count; `None` picks `64 · max(|p|, |q|, 1)`.
    pub n0: Option<usize>,
    /// Number of mesh doublings after the initial level.
    pub levels: usize,
    pub starts: usize,
    /// Stationarity tolerance on the sup-norm of the gradient.
    pub grad_tol: f64,
    /// Iteration cap per mesh level.
    pub max_iters: usize,
    pub seed: u64,
    /// Relative energy window for `all_minima`.
    pub rel_tol: f64,
    /// Amplitude of the transverse wobble of the initial loops.
    pub amplitude: f64,
    pub direction: Direction,
}

impl Default for MinOptions {
    fn default() -> Self {
        MinOptions {
            n0: None,
            levels: 2,
            starts: 12,
            grad_tol: 1e-7,
            max_iters: 4000,
            seed: 0,
            rel_tol: 1e-4,
            amplitude: 0.05,
            direction: Direction::Lbfgs(8),
        }
    }
}

impl MinOptions {
    pub fn validate(&self) -> Result<()> {
        if matches!(self.n0, Some(n) if n < crate::loops::MIN_NODES) {
            return Err(Error::InvalidArgument("n0 must be at least 8".into()));
        }
        if self.starts == 0 {
            return Err(Error::InvalidArgument("starts must be at least 1".into()));
        }
        if self.grad_tol.is_nan() || self.grad_tol <= 0.0 {
            return Err(Error::InvalidArgument("grad_tol must be positive".into()));
        }
        Ok(())
    }

    pub fn initial_nodes(&self, k: [i64; 2]) -> usize {
        self.n0
            .unwrap_or_else(|| 64 * k[0].unsigned_abs().max(k[1].unsigned_abs()).max(1) as usize)
    }

    pub fn final_nodes(&self, k: [i64; 2]) -> usize {
        self.initial_nodes(k) << self.levels
    }
}

/// A functional on loops of fixed winding with an exact gradient.
pub trait LoopObjective: Sync {
    fn value(&self, l: &DiscreteLoop) -> Result<f64>;

    /// Value, with the gradient written into `grad`.
    fn value_and_gradient(&self, l: &DiscreteLoop, grad: &mut [[f64; 2]]) -> Result<f64>;

    /// Per-segment stiffness of the quadratic part in each coordinate; the
    /// preconditioner is the inverse of `N · L_w + shift` built from these.
    fn stiffness(&self, l: &DiscreteLoop, wx: &mut [f64], wy: &mut [f64]) -> Result<()>;
}

/// The discrete Dirichlet energy of a metric.
#[derive(Debug, Clone, Copy)]
pub struct EnergyObjective<'a>(pub &'a MetricSpec);

impl LoopObjective for EnergyObjective<'_> {
    fn value(&self, l: &DiscreteLoop) -> Result<f64> {
        loop_energy(self.0, l)
    }

    fn value_and_gradient(&self, l: &DiscreteLoop, grad: &mut [[f64; 2]]) -> Result<f64> {
        energy_and_gradient(self.0, l, grad)
    }

    fn stiffness(&self, l: &DiscreteLoop, wx: &mut [f64], wy: &mut [f64]) -> Result<()> {
        metric_stiffness(self.0, l, 1.0, wx, wy)
    }
}

pub(crate) fn metric_stiffness(
    g: &MetricSpec,
    l: &DiscreteLoop,
    factor: f64,
    wx: &mut [f64],
    wy: &mut [f64],
) -> Result<()> {
    for i in 0..l.len() {
        let t = g.tensor(l.segment(i).0)?;
        wx[i] = factor * t.xx;
        wy[i] = factor * t.yy;
    }
    Ok(())
}

/// Per-start record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub seed: Option<u64>,
    pub energy: f64,
    pub converged: bool,
    pub iterations: usize,
    pub grad_sup: f64,
    /// Best value at the end of each mesh level.
    pub level_energies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinResult {
    pub k: [i64; 2],
    #[serde(rename = "loop")]
    pub best: DiscreteLoop,
    /// Objective value of `best` (the energy for Riemannian runs).
    pub energy: f64,
    /// Length of `best` in the kinetic metric.
    pub length: f64,
    /// Converged loops within `rel_tol` of the best value, best first.
    pub all_minima: Vec<DiscreteLoop>,
    pub minima_energies: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// `|E(final level) - E(previous level)|` for the best start; a
    /// discretization error indicator.
    pub mesh_delta: f64,
    pub grad_sup: f64,
    pub starts: Vec<StartSummary>,
}

struct Run {
    l: DiscreteLoop,
    value: f64,
    grad_sup: f64,
    iterations: usize,
    converged: bool,
}

fn dot(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u[0] * v[0] + u[1] * v[1]).sum()
}

fn sup_norm(a: &[[f64; 2]]) -> f64 {
    a.iter().flatten().fold(0.0f64, |m, c| m.max(c.abs()))
}

/// Solves the symmetric cyclic tridiagonal system with diagonal
/// `n·(w[j-1] + w[j]) + shift` and couplings `-n·w[j]` between `j` and
/// `j+1` (indices mod `n`).
fn solve_cyclic_laplacian(w: &[f64], shift: f64, rhs: &[f64], out: &mut [f64]) {
    let n = w.len();
    let nf = n as f64;
    let off: Vec<f64> = w.iter().map(|wi| -nf * wi).collect();
    let diag: Vec<f64> = (0..n).map(|j| nf * (w[(j + n - 1) % n] + w[j]) + shift).collect();
    // Sherman–Morrison on the corner entries A[0][n-1] = A[n-1][0] = off[n-1].
    let corner = off[n - 1];
    let gamma = -diag[0];
    let mut bb = diag.clone();
    bb[0] -= gamma;
    bb[n - 1] -= corner * corner / gamma;

    let thomas = |r: &[f64], x: &mut [f64]| {
        let mut c_star = vec![0.0; n];
        let mut d_star = vec![0.0; n];
        c_star[0] = off[0] / bb[0];
        d_star[0] = r[0] / bb[0];
        for j in 1..n {
            let m = bb[j] - off[j - 1] * c_star[j - 1];
            c_star[j] = if j + 1 < n { off[j] / m } else { 0.0 };
            d_star[j] = (r[j] - off[j - 1] * d_star[j - 1]) / m;
        }
        x[n - 1] = d_star[n - 1];
        for j in (0..n - 1).rev() {
            x[j] = d_star[j] - c_star[j] * x[j + 1];
        }
    };

    thomas(rhs, out);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = corner;
    let mut z = vec![0.0; n];
    thomas(&u, &mut z);
    let fact = (out[0] + corner * out[n - 1] / gamma) / (1.0 + z[0] + corner * z[n - 1] / gamma);
    for j in 0..n {
        out[j] -= fact * z[j];
    }
}

fn precondition<O: LoopObjective + ?Sized>(
    obj: &O,
    l: &DiscreteLoop,
    grad: &[[f64; 2]],
    out: &mut [[f64; 2]],
) -> Result<()> {
    let n = l.len();
    let mut wx = vec![0.0; n];
    let mut wy = vec![0.0; n];
    obj.stiffness(l, &mut wx, &mut wy)?;
    let mut rhs = vec![0.0; n];
    let mut sol = vec![0.0; n];
    for (c, w) in [(0usize, &wx), (1, &wy)] {
        let mean = w.iter().sum::<f64>() / n as f64;
        let shift = mean / n as f64;
        for j in 0..n {
            rhs[j] = grad[j][c];
        }
        solve_cyclic_laplacian(w, shift, &rhs, &mut sol);
        for j in 0..n {
            out[j][c] = sol[j];
        }
    }
    Ok(())
}

/// A correction pair `(s, y, 1 / s·y)`.
type Pair = (Vec<[f64; 2]>, Vec<[f64; 2]>, f64);

/// Limited-memory inverse-Hessian approximation seeded by the preconditioner.
struct History {
    cap: usize,
    pairs: std::collections::VecDeque<Pair>,
}

impl History {
    fn new(cap: usize) -> Self {
        History {
            cap,
            pairs: std::collections::VecDeque::with_capacity(cap),
        }
    }

    fn push(&mut self, s: Vec<[f64; 2]>, y: Vec<[f64; 2]>) {
        let sy = dot(&s, &y);
        if self.cap == 0 || sy.is_nan() || sy <= 1e-300 {
            return;
        }
        if self.pairs.len() == self.cap {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Two-loop recursion; writes `H · grad` into `out`.
    fn apply<O: LoopObjective + ?Sized>(
        &self,
        obj: &O,
        l: &DiscreteLoop,
        grad: &[[f64; 2]],
        out: &mut [[f64; 2]],
    ) -> Result<()> {
        let mut q = grad.to_vec();
        let mut alpha = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            for (qj, yj) in q.iter_mut().zip(y) {
                qj[0] -= a * yj[0];
                qj[1] -= a * yj[1];
            }
            alpha.push(a);
        }
        precondition(obj, l, &q, out)?;
        for ((s, y, rho), a) in self.pairs.iter().zip(alpha.iter().rev()) {
            let b = rho * dot(y, out);
            for (oj, sj) in out.iter_mut().zip(s) {
                oj[0] += (a - b) * sj[0];
                oj[1] += (a - b) * sj[1];
            }
        }
        Ok(())
    }
}

/// Runs descent on one mesh level.
fn descend<O: LoopObjective + ?Sized>(obj: &O, start: DiscreteLoop, opts: &MinOptions) -> Result<Run> {
    let n = start.len();
    let mut l = start;
    let mut grad = vec![[0.0; 2]; n];
    let mut f = obj.value_and_gradient(&l, &mut grad)?;
    let mut z = vec![[0.0; 2]; n];
    let mut dir = vec![[0.0; 2]; n];
    let mut prev: Option<(Vec<[f64; 2]>, f64)> = None; // previous gradient, g·z
    let mut prev_slope = 0.0;
    let mut step = 1.0f64;
    let mut trial_grad = vec![[0.0; 2]; n];
    let mut history = History::new(match opts.direction {
        Direction::Lbfgs(m) => m,
        _ => 0,
    });
    let quasi_newton = matches!(opts.direction, Direction::Lbfgs(m) if m > 0);

    for it in 0..opts.max_iters {
        let sup = sup_norm(&grad);
        if sup <= opts.grad_tol {
            return Ok(Run {
                l,
                value: f,
                grad_sup: sup,
                iterations: it,
                converged: true,
            });
        }
        history.apply(obj, &l, &grad, &mut z)?;
        let gz = dot(&grad, &z);
        let beta = match (opts.direction, &prev) {
            (Direction::Steepest | Direction::Lbfgs(_), _) | (_, None) => 0.0,
            (Direction::HeavyBall(b), Some(_)) => b,
            (Direction::PolakRibiere, Some((g_prev, gz_prev))) => {
                let num: f64 = gz - dot(g_prev, &z);
                (num / gz_prev).max(0.0)
            }
        };
        for j in 0..n {
            dir[j] = [-z[j][0] + beta * dir[j][0], -z[j][1] + beta * dir[j][1]];
        }
        let mut slope = dot(&grad, &dir);
        let mut restarted = beta == 0.0;
        if slope >= 0.0 {
            history.clear();
            precondition(obj, &l, &grad, &mut z)?;
            for j in 0..n {
                dir[j] = [-z[j][0], -z[j][1]];
            }
            slope = dot(&grad, &dir);
            restarted = true;
        }
        let mut t = if quasi_newton && !history.pairs.is_empty() {
            1.0
        } else if restarted || prev_slope == 0.0 {
            1.0f64.min(2.0 * step).max(1e-3)
        } else {
            (step * prev_slope / slope).clamp(1e-8, 1.0)
        };

        let mut accepted = None;
        for _ in 0..60 {
            let trial = l.with_nodes(
                l.nodes()
                    .iter()
                    .zip(&dir)
                    .map(|(u, d)| [u[0] + t * d[0], u[1] + t * d[1]])
                    .collect(),
            );
            let ft = match obj.value_and_gradient(&trial, &mut trial_grad) {
                Ok(v) => v,
                // Stepping into a degenerate region counts as a failed trial.
                Err(Error::DegenerateMetric { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            let armijo = ft <= f + 1e-4 * t * slope;
            let near_flat = ft <= f + 1e-12 * f.abs().max(1e-300) && ft.is_finite() && {
                let dphi = dot(&trial_grad, &dir);
                dphi >= 0.9 * slope && dphi <= -0.8 * slope
            };
            if armijo || near_flat {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((next, fnext)) = accepted else {
            return Ok(Run {
                l,
                value: f,
                grad_sup: sup,
                iterations: it,
                converged: false,
            });
        };
        if quasi_newton {
            let s: Vec<[f64; 2]> = next
                .nodes()
                .iter()
                .zip(l.nodes())
                .map(|(a, b)| [a[0] - b[0], a[1] - b[1]])
                .collect();
            let y: Vec<[f64; 2]> = trial_grad
                .iter()
                .zip(&grad)
                .map(|(a, b)| [a[0] - b[0], a[1] - b[1]])
                .collect();
            history.push(s, y);
        }
        prev = Some((std::mem::replace(&mut grad, trial_grad.clone()), gz));
        prev_slope = slope;
        step = t;
        l = next;
        f = fnext;
    }
    let sup = sup_norm(&grad);
    Ok(Run {
        l,
        value: f,
        grad_sup: sup,
        iterations: opts.max_iters,
        converged: sup <= opts.grad_tol,
    })
}

struct StartOutcome {
    seed: Option<u64>,
    run: Run,
    iterations: usize,
    level_energies: Vec<f64>,
}

fn run_start<O: LoopObjective + ?Sized>(obj: &O, k: [i64; 2], opts: &MinOptions, seed: u64) -> Result<StartOutcome> {
    let mut l = init_loop(k, opts.initial_nodes(k), seed, opts.amplitude)?;
    let mut level_energies = Vec::with_capacity(opts.levels + 1);
    let mut iterations = 0;
    let mut run = None;
    for level in 0..=opts.levels {
        if level > 0 {
            l = l.subdivided();
        }
        let r = descend(obj, l, opts)?;
        iterations += r.iterations;
        level_energies.push(r.value);
        l = r.l.clone();
        run = Some(r);
    }
    Ok(StartOutcome {
        seed: Some(seed),
        run: run.expect("at least one level"),
        iterations,
        level_energies,
    })
}

fn run_warm<O: LoopObjective + ?Sized>(obj: &O, warm: &DiscreteLoop, opts: &MinOptions) -> Result<StartOutcome> {
    let n = opts.final_nodes(warm.winding());
    let l = if warm.len() == n {
        warm.clone()
    } else {
        resample(warm, n)?
    };
    let r = descend(obj, l, opts)?;
    Ok(StartOutcome {
        seed: None,
        iterations: r.iterations,
        level_energies: vec![r.value],
        run: r,
    })
}

/// Multistart minimization of `obj` over loops of winding `k`.
///
/// `warm_starts` enter directly at the finest mesh (resampled if their node
/// count differs) and are merged after the seeded starts. `kinetic` is the
/// metric used to report lengths.
pub fn minimize_loops<O: LoopObjective + ?Sized>(
    obj: &O,
    kinetic: &MetricSpec,
    k: [i64; 2],
    opts: &MinOptions,
    warm_starts: &[DiscreteLoop],
) -> Result<MinResult> {
    if k == [0, 0] {
        return Err(Error::NullClass);
    }
    opts.validate()?;
    if let Some(w) = warm_starts.iter().find(|w| w.winding() != k) {
        return Err(Error::InvalidArgument(format!(
            "warm start has winding {:?}, expected {k:?}",
            w.winding()
        )));
    }
    let seeded: Vec<Result<StartOutcome>> = (0..opts.starts as u64)
        .into_par_iter()
        .map(|s| run_start(obj, k, opts, opts.seed.wrapping_add(s)))
        .collect();
    let warm: Vec<Result<StartOutcome>> = warm_starts.par_iter().map(|w| run_warm(obj, w, opts)).collect();
    let outcomes: Vec<StartOutcome> = seeded.into_iter().chain(warm).collect::<Result<_>>()?;

    let any_converged = outcomes.iter().any(|o| o.run.converged);
    let eligible = |o: &StartOutcome| o.run.converged || !any_converged;
    let best_value = outcomes
        .iter()
        .filter(|o| eligible(o))
        .map(|o| o.run.value)
        .fold(f64::INFINITY, f64::min);
    let tie = 1e-12 * best_value.abs().max(1e-300);
    let best_idx = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| eligible(o) && o.run.value <= best_value + tie)
        .min_by(|(_, a), (_, b)| serialized(&a.run.l).cmp(&serialized(&b.run.l)))
        .map(|(i, _)| i)
        .expect("at least one start");
    let best = &outcomes[best_idx];

    let window = opts.rel_tol * best_value.abs().max(1e-12);
    let mut minima: Vec<(f64, usize)> = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| o.run.converged && o.run.value <= best_value + window)
        .map(|(i, o)| (o.run.value, i))
        .collect();
    minima.sort_by(|a, b| {
        let a_best = (a.1 != best_idx) as u8;
        let b_best = (b.1 != best_idx) as u8;
        a_best.cmp(&b_best).then(a.0.total_cmp(&b.0)).then(a.1.cmp(&b.1))
    });

    let mesh_delta = match best.level_energies.as_slice() {
        [.., a, b] => (b - a).abs(),
        _ => 0.0,
    };
    let best_loop = best.run.l.clone();
    Ok(MinResult {
        k,
        energy: obj.value(&best_loop)?,
        length: loop_length(kinetic, &best_loop)?,
        all_minima: minima.iter().map(|&(_, i)| outcomes[i].run.l.clone()).collect(),
        minima_energies: minima.iter().map(|&(v, _)| v).collect(),
        converged: best.run.converged,
        iterations: outcomes.iter().map(|o| o.iterations).sum(),
        mesh_delta,
        grad_sup: best.run.grad_sup,
        starts: outcomes
            .iter()
            .map(|o| StartSummary {
                seed: o.seed,
                energy: o.run.value,
                converged: o.run.converged,
                iterations: o.iterations,
                grad_sup: o.run.grad_sup,
                level_energies: o.level_energies.clone(),
            })
            .collect(),
        best: best_loop,
    })
}

fn serialized(l: &DiscreteLoop) -> String {
    serde_json::to_string(l).expect("loops serialize")
}

/// Minimal-energy loops of winding `k` for the metric `g`.
pub fn minimize_energy(g: &MetricSpec, k: [i64; 2], opts: &MinOptions) -> Result<MinResult> {
    minimize_loops(&EnergyObjective(g), g, k, opts, &[])
}

/// Like [`minimize_energy`], with extra starting loops at the finest mesh.
pub fn minimize_energy_from(
    g: &MetricSpec,
    k: [i64; 2],
    opts: &MinOptions,
    warm_starts: &[DiscreteLoop],
) -> Result<MinResult> {
    minimize_loops(&EnergyObjective(g), g, k, opts, warm_starts)
}

/// Distance between two loops as curves: the best cyclic relabeling and
/// integer translation is chosen on the nodes, then each node is measured
/// against the nearby segments of the other loop (both ways), so loops that
/// differ only by where the nodes sit along the curve are close. Loops of
/// different node counts are compared after resampling `b` to the node count
/// of `a`.
pub fn loop_distance(a: &DiscreteLoop, b: &DiscreteLoop) -> Result<f64> {
    if a.winding() != b.winding() {
        return Ok(f64::INFINITY);
    }
    let b = if b.len() == a.len() {
        b.clone()
    } else {
        resample(b, a.len())?
    };
    let n = a.len();
    let mut best = (f64::INFINITY, 0usize, [0.0, 0.0]);
    for s in 0..n {
        let mut mean = [0.0, 0.0];
        for i in 0..n {
            let (u, v) = (a.node(i), b.node(i + s));
            mean[0] += u[0] - v[0];
            mean[1] += u[1] - v[1];
        }
        let t = [(mean[0] / n as f64).round(), (mean[1] / n as f64).round()];
        let mut worst = 0.0f64;
        for i in 0..n {
            let (u, v) = (a.node(i), b.node(i + s));
            let d = (u[0] - v[0] - t[0]).hypot(u[1] - v[1] - t[1]);
            worst = worst.max(d);
            if worst >= best.0 {
                break;
            }
        }
        if worst < best.0 {
            best = (worst, s, t);
        }
    }
    let (_, s, t) = best;
    let bt = b.translated(t).cyclic_shift(s);
    Ok(directed_distance(a, &bt).max(directed_distance(&bt, a)))
}

/// `max_i` of the distance from node `i` of `a` to the segments of `b` with
/// indices near `i`.
fn directed_distance(a: &DiscreteLoop, b: &DiscreteLoop) -> f64 {
    let n = a.len();
    let k = b.winding();
    let mut worst = 0.0f64;
    for i in 0..n {
        let p = a.node(i);
        let mut near = f64::INFINITY;
        for off in 0..6 {
            // Segments i-3 .. i+2 of b, unrolled through the closure.
            let j = i as i64 + off as i64 - 3;
            let wraps = j.div_euclid(n as i64);
            let jj = j.rem_euclid(n as i64) as usize;
            let q0 = b.node(jj);
            let q1 = b.node(jj + 1);
            let sh = [wraps as f64 * k[0] as f64, wraps as f64 * k[1] as f64];
            let q0 = [q0[0] + sh[0], q0[1] + sh[1]];
            let q1 = [q1[0] + sh[0], q1[1] + sh[1]];
            near = near.min(point_segment(p, q0, q1));
        }
        worst = worst.max(near);
    }
    worst
}

fn point_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p[0] - a[0] - t * d[0]).hypot(p[1] - a[1] - t * d[1])
}

/// Near-minimal loops of `result` that are pairwise farther apart than
/// `dedup_tol` (see [`loop_distance`]), best first.
pub fn distinct_minima(result: &MinResult, dedup_tol: f64) -> Result<Vec<DiscreteLoop>> {
    let mut kept: Vec<DiscreteLoop> = Vec::new();
    for cand in &result.all_minima {
        let mut far = true;
        for k in &kept {
            if loop_distance(k, cand)? <= dedup_tol {
                far = false;
                break;
            }
        }
        if far {
            kept.push(cand.clone());
        }
    }
    if kept.is_empty() {
        kept.push(result.best.clone());
    }
    Ok(kept)
}
