//! Stable norms, β-functions and rigidity checks for metrics and Lagrangians
//! on the 2-torus.
//!
//! Minimal closed loops of a fixed winding are found by multistart descent
//! on discretized loops; everything else (β, norm balls, Mather samples,
//! comparisons between metrics, potentials) is built on those minimizers.

pub mod beta;
pub mod error;
pub mod expr;
pub mod field;
pub mod io;
pub mod loops;
pub mod mane;
pub mod metrics;
pub mod minimizer;
pub mod rigidity;
pub mod search;

pub use beta::{
    beta_batch, beta_rational, check_norm_axioms, norm_ball, stable_norm_rational, BetaOptions, BetaResult, NormBall,
};
pub use error::{Error, Result};
pub use field::{PeriodicGrid, Profile, ScalarField};
pub use io::{parse_lagrangian, parse_metric, MetricDoc};
pub use loops::{energy_gradient, init_loop, loop_energy, loop_length, resample, DiscreteLoop, HomologyClass};
pub use mane::{
    average_action, beta_mane, mane_inequality_check, mane_rigidity_check, normalize_potential, TonelliSpec,
};
pub use metrics::{distortion_constant, fiber_distortion, metric_eval, MetricSpec, Sym2, TangentSample};
pub use minimizer::{distinct_minima, minimize_energy, Direction, MinOptions, MinResult};
pub use rigidity::{
    compare_at_class, flat_rigidity_check, mather_sample, projected_coverage, rigidity_scan, CompareOptions,
    ComparisonReport, MatherSample,
};
