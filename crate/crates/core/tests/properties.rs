mod common;

use approx::assert_relative_eq;
use common::*;
use mather_core::beta::{beta_rational, check_norm_axioms, stable_norm_rational, BetaOptions};
use mather_core::field::ScalarField;
use mather_core::loops::{energy_gradient, init_loop, loop_energy, loop_length};
use mather_core::mane::{beta_mane, mane_inequality_check, TonelliSpec};
use mather_core::minimizer::{minimize_energy, MinOptions};
use mather_core::rigidity::{compare_at_class, rigidity_scan, CompareOptions, EntryStatus};
use mather_core::{HomologyClass, MetricSpec, Sym2};
use proptest::prelude::*;

fn light() -> MinOptions {
    MinOptions {
        starts: 4,
        levels: 1,
        ..MinOptions::default()
    }
}

fn wavy() -> MetricSpec {
    MetricSpec::conformal_expr("1 + 0.3*sin(2*pi*x)*sin(2*pi*y)").unwrap()
}

#[test]
fn covers_agree_with_the_primitive_class() {
    let opts = BetaOptions {
        min: light(),
        sweep_max: 3,
    };
    for g in [MetricSpec::identity(), wavy(), dip()] {
        for h in [HomologyClass::new(1, 0), HomologyClass::new(1, 1)] {
            let r = stable_norm_rational(&g, &h, &opts).unwrap();
            assert_eq!(r.m_sweep.len(), 3);
            assert!(r.m_sweep.iter().all(|e| e.converged));
            assert!(r.sweep_spread() <= 1e-3, "{h}: {:?}", r.m_sweep);
        }
    }
}

#[test]
fn beta_is_recovered_from_the_certificate() {
    let opts = BetaOptions {
        min: light(),
        sweep_max: 1,
    };
    for h in [
        HomologyClass::new(2, 1),
        HomologyClass::new(3, 0),
        HomologyClass::scaled(2, 4, 1, 3).unwrap(),
    ] {
        let r = beta_rational(&wavy(), &h, &opts).unwrap();
        assert_eq!(r.beta, 0.5 * r.stable_norm * r.stable_norm);
        let m = h.multiplier();
        assert_relative_eq!(r.beta, 0.5 * (2.0 * r.certificate.energy) * m * m, max_relative = 1e-10);
        for t in [(1u64, 2u64), (2, 1), (3, 1)] {
            let th = HomologyClass::scaled(h.k[0], h.k[1], h.scale[0] * t.0, h.scale[1] * t.1).unwrap();
            let rt = beta_rational(&wavy(), &th, &opts).unwrap();
            let f = t.0 as f64 / t.1 as f64;
            assert_relative_eq!(rt.beta, f * f * r.beta, max_relative = 1e-4);
        }
    }
}

#[test]
fn larger_metrics_have_larger_norms() {
    let opts = BetaOptions {
        min: light(),
        sweep_max: 1,
    };
    let small = wavy();
    let large = MetricSpec::conformal_expr("1.2 + 0.3*sin(2*pi*x)*sin(2*pi*y) + 0.2*cos(2*pi*x)^2").unwrap();
    for h in [
        HomologyClass::new(1, 0),
        HomologyClass::new(0, 1),
        HomologyClass::new(1, -2),
    ] {
        let a = stable_norm_rational(&small, &h, &opts).unwrap().stable_norm;
        let b = stable_norm_rational(&large, &h, &opts).unwrap().stable_norm;
        assert!(b >= a - 1e-5, "{h}: {b} < {a}");
    }
}

#[test]
fn norm_axioms_hold_on_liouville_fixtures() {
    let classes = [
        HomologyClass::new(1, 0),
        HomologyClass::new(0, 1),
        HomologyClass::new(1, 1),
    ];
    let rep = check_norm_axioms(&liouville(1), &classes, &light()).unwrap();
    assert!(rep.all_passed, "{:?}", rep.violations().collect::<Vec<_>>());
}

#[test]
fn comparisons_are_scale_covariant() {
    let opts = CompareOptions {
        min: light(),
        ..CompareOptions::default()
    };
    let g1 = wavy();
    let g2 = liouville(2);
    let h = HomologyClass::new(1, 1);
    let base = compare_at_class(&g1, &g2, &h, &opts).unwrap();
    for c in [0.5, 3.0] {
        let e = compare_at_class(&g1, &g2.scaled(c), &h, &opts).unwrap();
        assert_relative_eq!(e.c, c * base.c, max_relative = 1e-9);
        assert_relative_eq!(e.beta2, c * base.beta2, max_relative = 1e-6);
        assert_eq!(e.equality, base.equality);
    }
}

#[test]
fn homothetic_pairs_are_equality_cases_everywhere() {
    let opts = CompareOptions {
        min: light(),
        ..CompareOptions::default()
    };
    let classes = [
        HomologyClass::new(1, 0),
        HomologyClass::new(0, 1),
        HomologyClass::new(1, 1),
        HomologyClass::new(2, 1),
    ];
    for g in [wavy(), liouville(0)] {
        let rep = rigidity_scan(&g, &g.scaled(2.0), &classes, &opts).unwrap();
        assert_eq!(rep.equality_classes.len(), classes.len());
        let total: usize = rep.homothety_region.iter().map(|s| s.samples.len()).sum();
        assert!(total > 0);
        for e in &rep.entries {
            assert!(e.homothety_residual.unwrap() <= 1e-6);
            assert!(e.cross_min_excess.unwrap().abs() <= 1e-6);
        }
    }
}

#[test]
fn band_fixture_has_equality_only_horizontally() {
    // g1 is smallest on y = 0, where g2 / g1 attains its maximum 2.
    let g1 = MetricSpec::conformal_expr("1 + 0.5*sin(pi*y)^2").unwrap();
    let g2 = MetricSpec::conformal_expr("(2 - 0.5*sin(pi*y)^2)*(1 + 0.5*sin(pi*y)^2)").unwrap();
    let opts = CompareOptions {
        min: light(),
        ..CompareOptions::default()
    };
    let classes = [
        HomologyClass::new(1, 0),
        HomologyClass::new(0, 1),
        HomologyClass::new(1, 1),
    ];
    let rep = rigidity_scan(&g1, &g2, &classes, &opts).unwrap();
    assert_relative_eq!(rep.distortion.value, 2.0, max_relative = 1e-9);
    assert_eq!(rep.equality_classes, vec![HomologyClass::new(1, 0)]);
    for s in &rep.homothety_region[0].samples {
        let d = s.x[1].min(1.0 - s.x[1]);
        assert!(d < 0.01, "sample at {:?}", s.x);
    }
}

#[test]
fn random_pairs_respect_the_distortion_bound() {
    let opts = CompareOptions {
        min: MinOptions {
            starts: 3,
            levels: 1,
            ..MinOptions::default()
        },
        grid_n: 64,
        ..CompareOptions::default()
    };
    let mut rng = rng(11);
    let classes = [
        HomologyClass::new(1, 0),
        HomologyClass::new(1, -1),
        HomologyClass::new(1, 2),
    ];
    for _ in 0..4 {
        let g1 = random_metric(&mut rng);
        let g2 = random_metric(&mut rng);
        let rep = rigidity_scan(&g1, &g2, &classes, &opts).unwrap();
        for e in &rep.entries {
            assert_ne!(e.status, EntryStatus::Violation);
            assert!(e.gap >= -1e-6 * e.c * e.beta1);
        }
    }
}

#[test]
fn refinement_converges_and_more_starts_never_hurt() {
    let g = wavy();
    let r = minimize_energy(&g, [1, 1], &MinOptions::default()).unwrap();
    for s in r.starts.iter().filter(|s| s.converged) {
        let e = &s.level_energies;
        let (d1, d2) = ((e[1] - e[0]).abs(), (e[2] - e[1]).abs());
        assert!(d2 <= 4.0 * d1 + 1e-12, "{e:?}");
    }
    assert!(r.best.speed_ratio(&g).unwrap() <= 1.01);

    let mut prev = f64::INFINITY;
    for starts in [1, 2, 4, 8] {
        let r = minimize_energy(&g, [2, 1], &MinOptions { starts, ..light() }).unwrap();
        assert!(
            r.energy <= prev * (1.0 + 1e-12),
            "{starts} starts: {} > {prev}",
            r.energy
        );
        prev = r.energy;
    }
}

#[test]
fn converged_minimizers_have_constant_speed() {
    for (g, k) in [
        (dip(), [1, 0]),
        (liouville(2), [1, 2]),
        (general_fixtures()[0].clone(), [1, -1]),
    ] {
        let r = minimize_energy(&g, k, &light()).unwrap();
        assert!(r.converged);
        assert!(r.grad_sup <= 1e-7);
        assert!(r.best.speed_ratio(&g).unwrap() <= 1.01);
    }
}

#[test]
fn free_lagrangian_matches_riemannian_beta() {
    let opts = light();
    for g in [MetricSpec::flat(Sym2::new(2.0, 0.5, 1.0)).unwrap(), wavy()] {
        for h in [HomologyClass::new(1, 0), HomologyClass::new(1, 2)] {
            let a = beta_mane(&TonelliSpec::free(g.clone()), &h, &opts, 2).unwrap().beta;
            let b = beta_rational(
                &g,
                &h,
                &BetaOptions {
                    min: opts.clone(),
                    sweep_max: 1,
                },
            )
            .unwrap()
            .beta;
            assert_relative_eq!(a, b, max_relative = 1e-8);
        }
    }
}

#[test]
fn potentials_stay_within_the_sandwich() {
    let opts = light();
    let kinetic = MetricSpec::flat(Sym2::new(1.0, 0.2, 1.5)).unwrap();
    let v = ScalarField::parse("-0.2*sin(pi*x)^2*sin(pi*y)^2 - 0.1*sin(2*pi*(x - y))^2").unwrap();
    let l = TonelliSpec::new(kinetic.clone(), v);
    let (vmin, _) = l.potential_range();
    for h in [
        HomologyClass::new(1, 0),
        HomologyClass::new(1, 1),
        HomologyClass::new(-1, 2),
    ] {
        let flat = 0.5 * Sym2::new(1.0, 0.2, 1.5).quad(h.vector());
        let b = beta_mane(&l, &h, &opts, 2).unwrap().beta;
        assert!(b >= flat + vmin - 1e-6, "{h}: {b}");
        assert!(b <= flat + 1e-6, "{h}: {b}");
    }
}

#[test]
fn separable_potentials_are_exact_on_vertical_classes() {
    let opts = light();
    let src = "-0.2*sin(pi*x)^2 - 0.05*sin(2*pi*x)";
    let v = ScalarField::parse(src).unwrap();
    let l = TonelliSpec::new(MetricSpec::identity(), v);
    let (vmin, _) = l.potential_range();
    for q in [1, 2] {
        let b = beta_mane(&l, &HomologyClass::new(0, q), &opts, 2).unwrap().beta;
        assert_relative_eq!(b, 0.5 * (q * q) as f64 + vmin, epsilon = 1e-4);
    }
}

#[test]
fn random_nonpositive_potentials_lower_beta() {
    let mut rng = rng(5);
    let classes = [
        HomologyClass::new(1, 0),
        HomologyClass::new(0, 1),
        HomologyClass::new(1, 1),
    ];
    for _ in 0..2 {
        let v = ScalarField::parse(&format!("-({})", random_factor(&mut rng))).unwrap();
        let rep = mane_inequality_check(&wavy(), &v, &classes, &light(), 1).unwrap();
        assert!(rep.all_passed);
        assert!(rep.entries.iter().all(|e| e.gap >= -1e-6));
    }
}

#[test]
fn energy_gradients_match_differences_on_random_fixtures() {
    let mut rng = rng(3);
    for seed in 0..20u64 {
        let g = random_metric(&mut rng);
        let k = [(seed % 3) as i64 + 1, (seed % 5) as i64 - 2];
        let l = init_loop(k, 24, seed, 0.1).unwrap();
        let grad = energy_gradient(&g, &l).unwrap();
        let scale = grad.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let h = 1e-6;
        for i in 0..l.len() {
            for c in 0..2 {
                let mut p = l.nodes().to_vec();
                let mut m = p.clone();
                p[i][c] += h;
                m[i][c] -= h;
                let fp = loop_energy(&g, &mather_core::DiscreteLoop::new(k, p).unwrap()).unwrap();
                let fm = loop_energy(&g, &mather_core::DiscreteLoop::new(k, m).unwrap()).unwrap();
                let fd = (fp - fm) / (2.0 * h);
                assert!((fd - grad[i][c]).abs() <= 1e-5 * scale.max(1e-12), "seed {seed}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn length_is_periodic_and_bounded_by_energy(
        seed in 0u64..10_000,
        p in -3i64..=3,
        q in -3i64..=3,
        tx in -3i64..=3,
        ty in -3i64..=3,
    ) {
        prop_assume!((p, q) != (0, 0));
        let g = wavy();
        let l = init_loop([p, q], 32, seed, 0.1).unwrap();
        let len = loop_length(&g, &l).unwrap();
        let moved = l.translated([tx as f64, ty as f64]);
        prop_assert!((loop_length(&g, &moved).unwrap() - len).abs() <= 1e-12 * len.max(1.0));
        prop_assert!(loop_energy(&g, &l).unwrap() >= 0.5 * len * len - 1e-12);
        prop_assert_eq!(l.cyclic_shift(5).winding(), [p, q]);
        let shifted = loop_length(&g, &l.cyclic_shift(5)).unwrap();
        prop_assert!((shifted - len).abs() <= 1e-12 * len.max(1.0));
    }
}
