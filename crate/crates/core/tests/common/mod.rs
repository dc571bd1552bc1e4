//! Fixtures and independent reference computations shared by the
//! integration tests. Nothing here calls the loop optimizer.
#![allow(dead_code)]

use mather_core::field::{Profile, ScalarField};
use mather_core::metrics::{fiber_distortion, MetricSpec, Sym2};
use mather_core::search::golden_section_min;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DIP: &str = "1 - 0.5*exp(-50*((x-0.5)^2 + (y-0.5)^2))";
pub const BUMP: &str = "1 + 0.5*bump(0.5, 0.5, 0.1)";

pub fn dip() -> MetricSpec {
    MetricSpec::conformal_expr(DIP).unwrap()
}

pub fn bump() -> MetricSpec {
    MetricSpec::conformal_expr(BUMP).unwrap()
}

pub fn dip_factor(x: f64, y: f64) -> f64 {
    1.0 - 0.5 * (-50.0 * ((x - 0.5).powi(2) + (y - 0.5).powi(2))).exp()
}

/// Profiles `(f1, f2)` as source text.
pub const LIOUVILLE: [(&str, &str); 3] = [
    ("1", "1 + 0.5*sin(pi*t)^2"),
    ("1 + 0.4*cos(2*pi*t)", "0.5 + 0.3*sin(2*pi*t)^2"),
    ("2 + sin(2*pi*t)", "1 + 0.5*cos(2*pi*t) + 0.2*sin(4*pi*t)"),
];

pub fn liouville(i: usize) -> MetricSpec {
    let (a, b) = LIOUVILLE[i];
    MetricSpec::liouville(Profile::parse(a).unwrap(), Profile::parse(b).unwrap()).unwrap()
}

pub fn general_fixtures() -> [MetricSpec; 2] {
    let f = |s: &str| ScalarField::parse(s).unwrap();
    [
        MetricSpec::general(
            f("2 + 0.5*sin(2*pi*x)*cos(2*pi*y)"),
            f("0.3*sin(2*pi*(x+y))"),
            f("1.5 + 0.4*cos(2*pi*x)"),
        )
        .unwrap(),
        MetricSpec::general(
            f("1 + 0.2*cos(2*pi*y)^2"),
            f("-0.25*cos(2*pi*x)*sin(4*pi*y)"),
            f("1.2 + 0.6*sin(2*pi*x + 0.3)^2"),
        )
        .unwrap(),
    ]
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Minimum of a 1-periodic function: dense scan, then golden section.
pub fn periodic_min(f: impl Fn(f64) -> f64) -> (f64, f64) {
    let n = 2000;
    let (mut best, mut arg) = (f64::INFINITY, 0.0);
    for i in 0..n {
        let t = i as f64 / n as f64;
        let v = f(t);
        if v < best {
            best = v;
            arg = t;
        }
    }
    let h = 1.0 / n as f64;
    golden_section_min(&f, arg - h, arg + h, 1e-12)
}

/// Shortest length in class (1,0) (`axis = 0`) or (0,1) (`axis = 1`) of a
/// Liouville metric: the straight circle over the minimum of the transverse
/// profile, `min_c ∫₀¹ sqrt(f_along(s) + f_across(c)) ds`.
pub fn liouville_axis_length(i: usize, axis: usize) -> f64 {
    let (a, b) = LIOUVILLE[i];
    let (along, across) = if axis == 0 { (a, b) } else { (b, a) };
    let along = Profile::parse(along).unwrap();
    let across = Profile::parse(across).unwrap();
    let (_, best) = periodic_min(|c| {
        let fc = across.value(c);
        simpson(|s| (along.value(s) + fc).sqrt(), 0.0, 1.0, 4000)
    });
    best
}

/// Shortest (1,0)-loop of `ds = sqrt(φ) |dx|` by dynamic programming over
/// the lifted `n × n` grid. Moves advance one or two columns and at most two
/// rows, so every direction within about 63° of horizontal is available.
/// Segment costs use Simpson's rule on a half-step table of `sqrt(φ)`.
pub fn grid_shortest_horizontal(phi: impl Fn(f64, f64) -> f64, n: usize) -> f64 {
    let m = 2 * n;
    let half: Vec<f64> = (0..m * m)
        .map(|idx| {
            let (a, b) = (idx % m, idx / m);
            phi(a as f64 / m as f64, b as f64 / m as f64).sqrt()
        })
        .collect();
    let s = |a: usize, b: usize| half[(b % m) * m + (a % m)];
    let moves: [(usize, i64); 7] = [(1, 0), (1, 1), (1, -1), (1, 2), (1, -2), (2, 1), (2, -1)];
    let h = 1.0 / n as f64;
    let ni = n as i64;
    let cost = |i: usize, j: i64, dx: usize, dy: i64| {
        let len = h * ((dx * dx) as f64 + (dy * dy) as f64).sqrt();
        let jj = j.rem_euclid(ni) as usize;
        let j2 = (j + dy).rem_euclid(ni) as usize;
        let a0 = 2 * i;
        let b0 = 2 * jj;
        let am = 2 * i + dx;
        let bm = (2 * j + dy).rem_euclid(2 * ni) as usize;
        let a1 = 2 * (i + dx);
        let b1 = 2 * j2;
        len * (s(a0, b0) + 4.0 * s(am, bm) + s(a1, b1)) / 6.0
    };
    let mut best = f64::INFINITY;
    let mut dist = vec![f64::INFINITY; (n + 1) * n];
    for src in 0..n {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        dist[src] = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d = dist[i * n + j];
                if !d.is_finite() {
                    continue;
                }
                for &(dx, dy) in &moves {
                    if i + dx > n {
                        continue;
                    }
                    let jn = (j as i64 + dy).rem_euclid(ni) as usize;
                    let c = d + cost(i, j as i64, dx, dy);
                    let slot = &mut dist[(i + dx) * n + jn];
                    if c < *slot {
                        *slot = c;
                    }
                }
            }
        }
        best = best.min(dist[n * n + src]);
    }
    best
}

/// β of the (1,0) class for `½ẋ² + V(x)` with flat identity kinetic term,
/// from energy conservation: `½ẋ² − V = E` with `∫ dx / ẋ = 1`, action
/// `∫ (E + 2V) / ẋ dx`.
pub fn mane_horizontal_beta(v: impl Fn(f64) -> f64 + Copy) -> f64 {
    let (_, vmin) = periodic_min(v);
    let max_neg = -vmin;
    let period = |e: f64| simpson(|x| 1.0 / (2.0 * (e + v(x))).sqrt(), 0.0, 1.0, 20000);
    // Period falls from +∞ at E = −min V as E grows.
    let mut lo = max_neg + 1e-12;
    let mut hi = max_neg + 1.0;
    while period(hi) > 1.0 {
        hi = 2.0 * hi + 1.0;
    }
    if period(lo) < 1.0 {
        lo = max_neg;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if period(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let e = 0.5 * (lo + hi);
    simpson(|x| (e + 2.0 * v(x)) / (2.0 * (e + v(x))).sqrt(), 0.0, 1.0, 20000)
}

/// Largest pencil eigenvalue over a dense `n × n` grid, followed by a
/// `201 × 201` rescan of the cells around the best point.
pub fn dense_distortion(g1: &MetricSpec, g2: &MetricSpec, n: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let mut arg = [0.0, 0.0];
    for j in 0..n {
        for i in 0..n {
            let p = [i as f64 / n as f64, j as f64 / n as f64];
            let v = fiber_distortion(g1, g2, p).unwrap();
            if v > best {
                best = v;
                arg = p;
            }
        }
    }
    let h = 1.0 / n as f64;
    let centre = arg;
    for j in 0..=200 {
        for i in 0..=200 {
            let p = [
                centre[0] + h * (i as f64 / 100.0 - 1.0),
                centre[1] + h * (j as f64 / 100.0 - 1.0),
            ];
            best = best.max(fiber_distortion(g1, g2, p).unwrap());
        }
    }
    best
}

/// A seeded smooth positive factor: a constant plus a few trigonometric
/// modes, kept above 0.3.
pub fn random_factor(rng: &mut ChaCha8Rng) -> String {
    let mut terms = vec![format!("{:.4}", rng.gen_range(0.8..2.0))];
    let modes = rng.gen_range(1..=3);
    let mut amp_total = 0.0;
    for _ in 0..modes {
        let a: f64 = rng.gen_range(-0.25..0.25);
        amp_total += a.abs();
        let (kx, ky) = (rng.gen_range(0..=2), rng.gen_range(0..=2));
        let ph: f64 = rng.gen_range(0.0..1.0);
        let f = if rng.gen_bool(0.5) { "sin" } else { "cos" };
        terms.push(format!("{a:.4}*{f}(2*pi*({kx}*x + {ky}*y + {ph:.4}))"));
    }
    if amp_total > 0.5 {
        terms[0] = format!("{:.4}", 0.3 + amp_total + rng.gen_range(0.0..1.0));
    }
    terms.join(" + ")
}

/// One random metric of a random kind.
pub fn random_metric(rng: &mut ChaCha8Rng) -> MetricSpec {
    match rng.gen_range(0..4) {
        0 => {
            let a = rng.gen_range(0.5..2.0);
            let c = rng.gen_range(0.5..2.0);
            let b = rng.gen_range(-0.4..0.4) * f64::sqrt(a * c);
            MetricSpec::flat(Sym2::new(a, b, c)).unwrap()
        }
        1 | 2 => MetricSpec::conformal_expr(&random_factor(rng)).unwrap(),
        _ => {
            let f = |s: String| ScalarField::parse(&s).unwrap();
            let g11 = random_factor(rng);
            let g22 = random_factor(rng);
            let off = format!(
                "{:.4}*sin(2*pi*(x + {}*y + {:.4}))",
                rng.gen_range(-0.15..0.15),
                rng.gen_range(-1..=1),
                rng.gen_range(0.0..1.0)
            );
            MetricSpec::general(f(g11), f(off), f(g22)).unwrap()
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
