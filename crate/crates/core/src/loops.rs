//! Discrete closed curves with fixed winding on the torus.
//!
//! A loop is stored as a lift to the universal cover: nodes `u_0 … u_{N-1}`
//! in ℝ² with the closing convention `u_N = u_0 + k`. Length and energy use
//! midpoint quadrature on each segment.

use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricSpec;

pub const MIN_NODES: usize = 8;

/// A real homology class `scale · (p, q)` with `scale = num / den > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HomologyClass {
    pub k: [i64; 2],
    pub scale: [u64; 2],
}

impl HomologyClass {
    pub fn new(p: i64, q: i64) -> Self {
        HomologyClass {
            k: [p, q],
            scale: [1, 1],
        }
    }

    /// `(num / den) · (p, q)`.
    pub fn scaled(p: i64, q: i64, num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidArgument("class scale must be a positive rational".into()));
        }
        let g = num.gcd(&den);
        Ok(HomologyClass {
            k: [p, q],
            scale: [num / g, den / g],
        })
    }

    pub fn is_zero(&self) -> bool {
        self.k == [0, 0]
    }

    pub fn scale_value(&self) -> f64 {
        self.scale[0] as f64 / self.scale[1] as f64
    }

    /// `(k / gcd, gcd)`; the null class maps to `((0, 0), 0)`.
    pub fn primitive_part(&self) -> ([i64; 2], i64) {
        let g = self.k[0].gcd(&self.k[1]);
        if g == 0 {
            ([0, 0], 0)
        } else {
            ([self.k[0] / g, self.k[1] / g], g)
        }
    }

    /// `scale · gcd`, the factor between the primitive class and `self`.
    pub fn multiplier(&self) -> f64 {
        self.scale_value() * self.primitive_part().1 as f64
    }

    pub fn vector(&self) -> [f64; 2] {
        let s = self.scale_value();
        [s * self.k[0] as f64, s * self.k[1] as f64]
    }

    pub fn negated(&self) -> Self {
        HomologyClass {
            k: [-self.k[0], -self.k[1]],
            scale: self.scale,
        }
    }

    /// Sum of two classes, with the scales brought to a common denominator.
    pub fn plus(&self, other: &Self) -> Self {
        let (a, b) = (self.scale[0] as i64, self.scale[1] as i64);
        let (c, d) = (other.scale[0] as i64, other.scale[1] as i64);
        let k = [
            a * d * self.k[0] + c * b * other.k[0],
            a * d * self.k[1] + c * b * other.k[1],
        ];
        HomologyClass {
            k,
            scale: [1, (b * d) as u64],
        }
        .normalized()
    }

    /// Moves common factors between `k` and the scale so that the integer
    /// part is as small as the denominator allows.
    pub fn normalized(&self) -> Self {
        let g = self.k[0].gcd(&self.k[1]).unsigned_abs();
        if g == 0 {
            return HomologyClass {
                k: [0, 0],
                scale: [1, 1],
            };
        }
        let d = g.gcd(&self.scale[1]);
        let num = self.scale[0];
        let den = self.scale[1] / d;
        let r = num.gcd(&den);
        HomologyClass {
            k: [self.k[0] / d as i64, self.k[1] / d as i64],
            scale: [num / r, den / r],
        }
    }

    /// `m · self`, folded into the integer part.
    pub fn times(&self, m: i64) -> Self {
        HomologyClass {
            k: [m * self.k[0], m * self.k[1]],
            scale: self.scale,
        }
    }
}

impl std::fmt::Display for HomologyClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.scale == [1, 1] {
            write!(f, "({}, {})", self.k[0], self.k[1])
        } else {
            write!(f, "{}/{}·({}, {})", self.scale[0], self.scale[1], self.k[0], self.k[1])
        }
    }
}

/// A closed polygon with winding `k` (lift to ℝ²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLoop")]
pub struct DiscreteLoop {
    k: [i64; 2],
    nodes: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
struct RawLoop {
    k: [i64; 2],
    nodes: Vec<[f64; 2]>,
}

impl TryFrom<RawLoop> for DiscreteLoop {
    type Error = Error;
    fn try_from(raw: RawLoop) -> Result<Self> {
        DiscreteLoop::new(raw.k, raw.nodes)
    }
}

impl DiscreteLoop {
    pub fn new(k: [i64; 2], nodes: Vec<[f64; 2]>) -> Result<Self> {
        if nodes.len() < MIN_NODES {
            return Err(Error::InvalidArgument(format!(
                "a loop needs at least {MIN_NODES} nodes, got {}",
                nodes.len()
            )));
        }
        if nodes.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("loop has non-finite nodes".into()));
        }
        Ok(DiscreteLoop { k, nodes })
    }

    pub fn winding(&self) -> [i64; 2] {
        self.k
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node `i` for any `i ≥ 0`, following the closing convention.
    #[inline]
    pub fn node(&self, i: usize) -> [f64; 2] {
        let n = self.nodes.len();
        let laps = (i / n) as f64;
        let u = self.nodes[i % n];
        [u[0] + laps * self.k[0] as f64, u[1] + laps * self.k[1] as f64]
    }

    /// Midpoint and displacement of segment `i` (from `u_i` to `u_{i+1}`).
    #[inline]
    pub fn segment(&self, i: usize) -> ([f64; 2], [f64; 2]) {
        let a = self.nodes[i];
        let b = self.node(i + 1);
        ([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])], [b[0] - a[0], b[1] - a[1]])
    }

    /// Same winding, new node positions.
    pub(crate) fn with_nodes(&self, nodes: Vec<[f64; 2]>) -> Self {
        DiscreteLoop { k: self.k, nodes }
    }

    /// Moves every node by `d`.
    pub fn translated(&self, d: [f64; 2]) -> Self {
        self.with_nodes(self.nodes.iter().map(|u| [u[0] + d[0], u[1] + d[1]]).collect())
    }

    /// Relabels so that node `s` becomes node 0.
    pub fn cyclic_shift(&self, s: usize) -> Self {
        let n = self.len();
        self.with_nodes((0..n).map(|i| self.node(i + s % n)).collect())
    }

    /// Inserts the midpoint of every segment, doubling the node count.
    pub fn subdivided(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.len());
        for i in 0..self.len() {
            nodes.push(self.nodes[i]);
            nodes.push(self.segment(i).0);
        }
        self.with_nodes(nodes)
    }

    /// Positions reduced into `[0,1)²`.
    pub fn wrapped_nodes(&self) -> Vec<[f64; 2]> {
        use crate::field::wrap_unit;
        self.nodes.iter().map(|u| [wrap_unit(u[0]), wrap_unit(u[1])]).collect()
    }

    /// Ratio of the longest to the shortest segment `g`-length.
    pub fn speed_ratio(&self, g: &MetricSpec) -> Result<f64> {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..self.len() {
            let (m, d) = self.segment(i);
            let l = g.tensor(m)?.quad(d).sqrt();
            lo = lo.min(l);
            hi = hi.max(l);
        }
        Ok(hi / lo)
    }
}

/// A straight loop from a seeded random basepoint, plus a seeded smooth
/// transverse wobble of the given amplitude.
pub fn init_loop(k: [i64; 2], n: usize, seed: u64, amplitude: f64) -> Result<DiscreteLoop> {
    if k == [0, 0] {
        return Err(Error::NullClass);
    }
    if n < MIN_NODES {
        return Err(Error::InvalidArgument(format!(
            "a loop needs at least {MIN_NODES} nodes, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = [rng.gen::<f64>(), rng.gen::<f64>()];
    let modes: Vec<(f64, f64)> = (1..=3)
        .map(|j| {
            (
                rng.gen_range(-1.0..1.0) / j as f64,
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let kx = k[0] as f64;
    let ky = k[1] as f64;
    let norm = kx.hypot(ky);
    let normal = [-ky / norm, kx / norm];
    let nodes = (0..n)
        .map(|i| {
            let s = i as f64 / n as f64;
            let wobble: f64 = modes
                .iter()
                .enumerate()
                .map(|(j, (a, phase))| a * (std::f64::consts::TAU * (j + 1) as f64 * s + phase).sin())
                .sum();
            let w = amplitude * wobble;
            [base[0] + s * kx + w * normal[0], base[1] + s * ky + w * normal[1]]
        })
        .collect();
    DiscreteLoop::new(k, nodes)
}

/// `Σ_i sqrt(g_{m_i}(Δu_i, Δu_i))`.
pub fn loop_length(g: &MetricSpec, l: &DiscreteLoop) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..l.len() {
        let (m, d) = l.segment(i);
        total += g.tensor(m)?.quad(d).sqrt();
    }
    Ok(total)
}

/// Discrete action of the unit-period parametrization,
/// `(N/2) Σ_i g_{m_i}(Δu_i, Δu_i)`.
pub fn loop_energy(g: &MetricSpec, l: &DiscreteLoop) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..l.len() {
        let (m, d) = l.segment(i);
        total += g.tensor(m)?.quad(d);
    }
    Ok(0.5 * l.len() as f64 * total)
}

/// Energy and its gradient with respect to the node positions, written into
/// `grad` (length `N`).
pub fn energy_and_gradient(g: &MetricSpec, l: &DiscreteLoop, grad: &mut [[f64; 2]]) -> Result<f64> {
    let n = l.len();
    debug_assert_eq!(grad.len(), n);
    grad.iter_mut().for_each(|v| *v = [0.0, 0.0]);
    let half_n = 0.5 * n as f64;
    let mut total = 0.0;
    for i in 0..n {
        let (m, d) = l.segment(i);
        let (gm, gx, gy) = g.tensor_with_partials(m)?;
        total += gm.quad(d);
        // d/du_{i+1} = N G Δ + (N/4) ∇_m q,  d/du_i = -N G Δ + (N/4) ∇_m q
        let gd = gm.apply(d);
        let pull = [half_n * 0.5 * gx.quad(d), half_n * 0.5 * gy.quad(d)];
        let push = [2.0 * half_n * gd[0], 2.0 * half_n * gd[1]];
        let j = (i + 1) % n;
        grad[i][0] += pull[0] - push[0];
        grad[i][1] += pull[1] - push[1];
        grad[j][0] += pull[0] + push[0];
        grad[j][1] += pull[1] + push[1];
    }
    Ok(half_n * total)
}

pub fn energy_gradient(g: &MetricSpec, l: &DiscreteLoop) -> Result<Vec<[f64; 2]>> {
    let mut grad = vec![[0.0; 2]; l.len()];
    energy_and_gradient(g, l, &mut grad)?;
    Ok(grad)
}

/// Reparametrizes by Euclidean arc length of the lift with `n` nodes,
/// starting at `u_0`.
pub fn resample(l: &DiscreteLoop, n: usize) -> Result<DiscreteLoop> {
    if n < MIN_NODES {
        return Err(Error::InvalidArgument(format!(
            "a loop needs at least {MIN_NODES} nodes, got {n}"
        )));
    }
    let m = l.len();
    let mut cumulative = Vec::with_capacity(m + 1);
    cumulative.push(0.0);
    for i in 0..m {
        let (_, d) = l.segment(i);
        cumulative.push(cumulative[i] + d[0].hypot(d[1]));
    }
    let total = cumulative[m];
    let mut nodes = Vec::with_capacity(n);
    let mut seg = 0usize;
    for j in 0..n {
        let s = total * j as f64 / n as f64;
        while seg + 1 < m && cumulative[seg + 1] <= s {
            seg += 1;
        }
        let span = cumulative[seg + 1] - cumulative[seg];
        let t = if span > 0.0 { (s - cumulative[seg]) / span } else { 0.0 };
        let a = l.node(seg);
        let b = l.node(seg + 1);
        nodes.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
    }
    DiscreteLoop::new(l.winding(), nodes)
}
