//! Fixtures shared by the benchmarks.

use mather_core::{init_loop, DiscreteLoop, MetricSpec, MinOptions, Profile, ScalarField};

pub fn wavy() -> MetricSpec {
    MetricSpec::conformal_expr("1 + 0.3*sin(2*pi*x)*sin(2*pi*y)").expect("fixture parses")
}

pub fn liouville() -> MetricSpec {
    MetricSpec::liouville(
        Profile::parse("2 + sin(2*pi*t)").expect("fixture parses"),
        Profile::parse("1 + 0.5*cos(2*pi*t) + 0.2*sin(4*pi*t)").expect("fixture parses"),
    )
    .expect("fixture is positive")
}

pub fn general() -> MetricSpec {
    let f = |s: &str| ScalarField::parse(s).expect("fixture parses");
    MetricSpec::general(
        f("2 + 0.5*sin(2*pi*x)*cos(2*pi*y)"),
        f("0.3*sin(2*pi*(x+y))"),
        f("1.5 + 0.4*cos(2*pi*x)"),
    )
    .expect("fixture is positive")
}

/// A wobbly loop of winding `k` with `n` nodes.
pub fn sample_loop(k: [i64; 2], n: usize) -> DiscreteLoop {
    init_loop(k, n, 1, 0.1).expect("valid winding and node count")
}

/// Single-start options, for timing one descent.
pub fn single_start() -> MinOptions {
    MinOptions {
        starts: 1,
        ..MinOptions::default()
    }
}
