//! Analytic gradients against central differences on seeded random loops.

use mather_core::mane::{action_gradient, average_action};
use mather_core::{
    energy_gradient, init_loop, loop_energy, DiscreteLoop, MetricSpec, Profile, Result, ScalarField, Sym2, TonelliSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Largest accepted relative discrepancy.
pub const GRADCHECK_TOL: f64 = 1e-5;
/// Central-difference step.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureCheck {
    pub index: usize,
    pub kind: String,
    pub p: i64,
    pub q: i64,
    pub nodes: usize,
    pub period: f64,
    pub energy_rel_err: f64,
    pub action_rel_err: f64,
    pub passed: bool,
}

fn trig_field(rng: &mut ChaCha8Rng, floor: f64) -> String {
    let modes = rng.gen_range(1..=3);
    let mut terms = Vec::new();
    let mut amp = 0.0;
    for _ in 0..modes {
        let a: f64 = rng.gen_range(-0.3..0.3);
        amp += a.abs();
        let (kx, ky) = (rng.gen_range(0..=2), rng.gen_range(0..=2));
        let ph: f64 = rng.gen_range(0.0..1.0);
        terms.push(format!("{a:.4}*sin(2*pi*({kx}*x + {ky}*y + {ph:.4}))"));
    }
    format!("{:.4} + {}", floor + amp, terms.join(" + "))
}

/// A seeded metric of a seeded kind, and a seeded potential.
pub fn random_fixture(rng: &mut ChaCha8Rng) -> Result<(MetricSpec, ScalarField)> {
    let g = match rng.gen_range(0..4) {
        0 => {
            let a = rng.gen_range(0.5..2.0);
            let c = rng.gen_range(0.5..2.0);
            MetricSpec::flat(Sym2::new(a, rng.gen_range(-0.4..0.4) * f64::sqrt(a * c), c))?
        }
        1 => MetricSpec::conformal_expr(&trig_field(rng, 0.4))?,
        2 => {
            let f1 = format!(
                "{:.4} + {:.4}*sin(2*pi*t)^2",
                rng.gen_range(0.5..1.5),
                rng.gen_range(0.0..0.5)
            );
            let f2 = format!(
                "{:.4} + {:.4}*cos(2*pi*t)",
                rng.gen_range(0.8..1.5),
                rng.gen_range(-0.3..0.3)
            );
            MetricSpec::liouville(Profile::parse(&f1)?, Profile::parse(&f2)?)?
        }
        _ => {
            let off = format!("{:.4}*sin(2*pi*(x + y))", rng.gen_range(-0.15..0.15));
            MetricSpec::general(
                ScalarField::parse(&trig_field(rng, 0.6))?,
                ScalarField::parse(&off)?,
                ScalarField::parse(&trig_field(rng, 0.6))?,
            )?
        }
    };
    let v = ScalarField::parse(&format!("-({})", trig_field(rng, 0.0)))?;
    Ok((g, v))
}

/// `max_i |a_i − b_i| / s` with `s = max(‖a‖∞, ‖b‖∞, |f| / N)`; the last
/// term is the size of a nodal gradient of a loop functional of size `f`
/// and keeps vanishing gradients (a straight flat loop) well defined.
pub fn relative_error(analytic: &[[f64; 2]], fd: &[[f64; 2]], value: f64) -> f64 {
    let sup = |v: &[[f64; 2]]| v.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = analytic
        .iter()
        .flatten()
        .zip(fd.iter().flatten())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = sup(analytic).max(sup(fd)).max(value.abs() / analytic.len() as f64);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Central differences of `f` in every node coordinate.
pub fn finite_difference(l: &DiscreteLoop, f: impl Fn(&DiscreteLoop) -> Result<f64>) -> Result<Vec<[f64; 2]>> {
    let mut out = vec![[0.0; 2]; l.len()];
    for i in 0..l.len() {
        for c in 0..2 {
            let mut plus = l.nodes().to_vec();
            let mut minus = plus.clone();
            plus[i][c] += FD_STEP;
            minus[i][c] -= FD_STEP;
            let fp = f(&DiscreteLoop::new(l.winding(), plus)?)?;
            let fm = f(&DiscreteLoop::new(l.winding(), minus)?)?;
            out[i][c] = (fp - fm) / (2.0 * FD_STEP);
        }
    }
    Ok(out)
}

/// Checks the energy and action gradients on one loop.
pub fn check_loop(g: &MetricSpec, v: &ScalarField, l: &DiscreteLoop, period: f64) -> Result<(f64, f64)> {
    let e = loop_energy(g, l)?;
    let fd = finite_difference(l, |x| loop_energy(g, x))?;
    let e_err = relative_error(&energy_gradient(g, l)?, &fd, e);

    let lag = TonelliSpec::raw(g.clone(), v.clone());
    let a = average_action(&lag, l, period)?;
    let fd = finite_difference(l, |x| average_action(&lag, x, period))?;
    let a_err = relative_error(&action_gradient(&lag, l, period)?, &fd, a);
    Ok((e_err, a_err))
}

/// Runs `count` fixtures seeded from `seed`. With `metric` set, every
/// fixture uses it instead of a random one.
pub fn gradcheck(count: usize, seed: u64, metric: Option<&MetricSpec>) -> Result<Vec<FixtureCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for index in 0..count {
        let (random_g, v) = random_fixture(&mut rng)?;
        let g = metric.cloned().unwrap_or(random_g);
        let p = rng.gen_range(-2..=2);
        let q = if p == 0 {
            rng.gen_range(1..=2)
        } else {
            rng.gen_range(-2..=2)
        };
        let nodes = rng.gen_range(16..=40);
        let period = rng.gen_range(0.5..2.0);
        let l = init_loop([p, q], nodes, rng.gen(), 0.15)?;
        let (e, a) = check_loop(&g, &v, &l, period)?;
        out.push(FixtureCheck {
            index,
            kind: g.kind().to_string(),
            p,
            q,
            nodes,
            period,
            energy_rel_err: e,
            action_rel_err: a,
            passed: e <= GRADCHECK_TOL && a <= GRADCHECK_TOL,
        });
    }
    Ok(out)
}
