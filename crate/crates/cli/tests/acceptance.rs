//! Acceptance suite: every criterion runs at its stated tolerance and
//! prints one PASS/FAIL line. The process fails if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use mather_cli::gradcheck::{gradcheck, GRADCHECK_TOL};
use mather_core::beta::stable_norm_direct;
use mather_core::mane::PotentialVerdict;
use mather_core::rigidity::{EntryStatus, FlatVerdict};
use mather_core::{
    beta_batch, beta_rational, flat_rigidity_check, mane_inequality_check, mane_rigidity_check, rigidity_scan,
    BetaOptions, CompareOptions, HomologyClass, MetricSpec, MinOptions, ScalarField, Sym2,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        // Written as a negation so that NaN fails.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        let failed = !$cond;
        if failed {
            return Err(format!($($fmt)+));
        }
    };
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn eight_classes() -> Vec<HomologyClass> {
    [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (-1, 3), (3, 1)]
        .into_iter()
        .map(|(p, q)| HomologyClass::new(p, q))
        .collect()
}

fn flat_closed_form() -> Outcome {
    let t = Instant::now();
    let mut classes = Vec::new();
    for p in -5..=5i64 {
        for q in -5..=5i64 {
            if (p, q) != (0, 0) {
                classes.push(HomologyClass::new(p, q));
            }
        }
    }
    let mut worst = 0.0f64;
    for m in [
        [[1.0, 0.0], [0.0, 1.0]],
        [[1.0, 0.0], [0.0, 4.0]],
        [[2.0, 1.0], [1.0, 2.0]],
    ] {
        let gm = Sym2::from_rows(m).unwrap();
        let g = MetricSpec::flat(gm).unwrap();
        for (h, r) in classes.iter().zip(beta_batch(&g, &classes, &BetaOptions::default())) {
            let r = r.map_err(|e| format!("{h}: {e}"))?;
            let exact = 0.5 * gm.quad(h.vector());
            worst = worst.max(rel(r.beta, exact));
            ensure!(rel(r.beta, exact) <= 1e-5, "{m:?} {h}: {} vs {exact}", r.beta);
        }
    }
    let elapsed = t.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!(
        "{} classes x 3 metrics, worst rel err {worst:.1e}, {elapsed:.1?}",
        classes.len()
    ))
}

fn beta_norm_homogeneity() -> Outcome {
    let mut fixtures = vec![
        MetricSpec::conformal_expr("1 + 0.3*sin(2*pi*x)*sin(2*pi*y)").unwrap(),
        dip(),
        bump(),
        liouville(0),
        liouville(1),
        liouville(2),
    ];
    fixtures.extend(general_fixtures());
    let mut r = rng(2);
    while fixtures.len() < 10 {
        fixtures.push(MetricSpec::conformal_expr(&random_factor(&mut r)).unwrap());
    }
    let classes = [
        HomologyClass::new(1, 0),
        HomologyClass::new(1, 1),
        HomologyClass::new(2, -1),
    ];
    let opts = BetaOptions::default();
    let mut worst = 0.0f64;
    for (i, g) in fixtures.iter().enumerate() {
        let h = classes[i % classes.len()];
        let b = beta_rational(g, &h, &opts).map_err(|e| e.to_string())?;
        ensure!(
            rel(b.beta, 0.5 * b.stable_norm * b.stable_norm) <= 1e-10,
            "fixture {i}: beta {} vs norm {}",
            b.beta,
            b.stable_norm
        );
        let double = h.times(2);
        let b2 = beta_rational(g, &double, &opts).map_err(|e| e.to_string())?;
        ensure!(
            rel(b2.beta, 4.0 * b.beta) <= 1e-4,
            "fixture {i}: beta(2h) {} vs {}",
            b2.beta,
            4.0 * b.beta
        );
        let (norm2, _) = stable_norm_direct(g, double.k, &opts.min).map_err(|e| e.to_string())?;
        let direct = 0.5 * norm2 * norm2;
        worst = worst.max(rel(direct, 4.0 * b.beta));
        ensure!(
            rel(direct, 4.0 * b.beta) <= 1e-4,
            "fixture {i}: direct beta(2h) {direct} vs {}",
            4.0 * b.beta
        );
    }
    Ok(format!(
        "10 fixtures, worst direct beta(2h)/4beta(h) rel err {worst:.1e}"
    ))
}

fn distortion_inequality() -> Outcome {
    let classes = eight_classes();
    let opts = CompareOptions::default();
    let mut r = rng(3);
    let mut min_ratio = f64::INFINITY;
    for pair in 0..25 {
        let g1 = random_metric(&mut r);
        let g2 = random_metric(&mut r);
        let rep = rigidity_scan(&g1, &g2, &classes, &opts).map_err(|e| format!("pair {pair}: {e}"))?;
        for e in &rep.entries {
            ensure!(
                e.status != EntryStatus::Violation,
                "pair {pair} {}: violation, gap {}",
                e.h,
                e.gap
            );
            ensure!(
                e.gap >= -1e-6 * e.c * e.beta1,
                "pair {pair} {}: gap {} below tolerance",
                e.h,
                e.gap
            );
            min_ratio = min_ratio.min(e.gap / (e.c * e.beta1));
        }
    }
    Ok(format!("25 pairs x 8 classes, min gap/(C beta1) = {min_ratio:.3e}"))
}

fn homothety_equality() -> Outcome {
    let classes = [
        HomologyClass::new(1, 0),
        HomologyClass::new(0, 1),
        HomologyClass::new(1, 1),
        HomologyClass::new(2, -1),
    ];
    let bases = [
        MetricSpec::conformal_expr("1 + 0.3*sin(2*pi*x)*sin(2*pi*y)").unwrap(),
        liouville(1),
        general_fixtures()[0].clone(),
    ];
    let mut worst = 0.0f64;
    for (i, g) in bases.iter().enumerate() {
        for c in [0.5, 2.0] {
            let rep =
                rigidity_scan(g, &g.scaled(c), &classes, &CompareOptions::default()).map_err(|e| e.to_string())?;
            for e in &rep.entries {
                ensure!(e.equality, "base {i}, c = {c}, {}: no equality (gap {})", e.h, e.gap);
                let res = e.homothety_residual.ok_or("missing residual")?;
                let cross = e.cross_min_excess.ok_or("missing cross-min excess")?;
                ensure!(res <= 1e-6, "base {i}, c = {c}, {}: residual {res}", e.h);
                ensure!(cross <= 1e-6, "base {i}, c = {c}, {}: cross-min excess {cross}", e.h);
                worst = worst.max(res).max(cross);
            }
        }
    }
    Ok(format!("3 bases x 2 factors x 4 classes, worst residual {worst:.1e}"))
}

fn conformal_strictness() -> Outcome {
    let t = Instant::now();
    let grid = grid_shortest_horizontal(dip_factor, 256);
    let margin = 0.5 - 0.5 * grid * grid;
    ensure!(margin >= 0.01, "oracle margin {margin} below 0.01");
    let classes = [
        HomologyClass::new(1, 0),
        HomologyClass::new(0, 1),
        HomologyClass::new(1, 1),
    ];
    let rep = flat_rigidity_check(&dip(), &classes, &CompareOptions::default()).map_err(|e| e.to_string())?;
    ensure!(rep.verdict == FlatVerdict::NotFlat, "verdict {:?}", rep.verdict);
    let e = &rep.comparison.entries[0];
    ensure!(e.gap >= 0.01, "gap at (1,0) is {}", e.gap);
    let elapsed = t.elapsed();
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    Ok(format!(
        "not flat, gap(1,0) = {:.5}, oracle margin {margin:.5}, {elapsed:.1?}",
        e.gap
    ))
}

fn big_bump() -> Outcome {
    let r = beta_rational(&bump(), &HomologyClass::new(1, 0), &BetaOptions::default()).map_err(|e| e.to_string())?;
    ensure!((r.beta - 0.5).abs() <= 1e-6, "beta(1,0) = {}", r.beta);
    Ok(format!("beta(1,0) = {:.10}", r.beta))
}

fn liouville_axes() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..3 {
        for (axis, h) in [(0, HomologyClass::new(1, 0)), (1, HomologyClass::new(0, 1))] {
            let exact = liouville_axis_length(i, axis);
            let r = beta_rational(&liouville(i), &h, &BetaOptions::default()).map_err(|e| e.to_string())?;
            worst = worst.max(rel(r.stable_norm, exact));
            ensure!(
                rel(r.stable_norm, exact) <= 1e-4,
                "fixture {i} {h}: {} vs {exact}",
                r.stable_norm
            );
        }
    }
    Ok(format!("3 fixtures x 2 axes, worst rel err {worst:.1e}"))
}

fn mane_separable() -> Outcome {
    let kinetic = MetricSpec::identity();
    let v = ScalarField::parse("-0.3*sin(pi*x)^2").unwrap();
    let classes = eight_classes();
    let opts = MinOptions::default();
    let rig = mane_rigidity_check(&kinetic, &v, &classes, &opts, 3).map_err(|e| e.to_string())?;
    let vertical = rig
        .report
        .entries
        .iter()
        .find(|e| e.h == HomologyClass::new(0, 1))
        .ok_or("(0,1) missing")?;
    ensure!(
        (vertical.beta_lv - 0.2).abs() <= 1e-4,
        "beta(0,1) = {}",
        vertical.beta_lv
    );
    for e in &rig.report.entries {
        ensure!(e.beta_lv <= e.beta_l, "{}: {} > {}", e.h, e.beta_lv, e.beta_l);
        ensure!(
            e.gap > 3.0 * e.numerical_error,
            "{}: gap {} vs error {}",
            e.h,
            e.gap,
            e.numerical_error
        );
    }
    ensure!(rig.verdict == PotentialVerdict::Nonzero, "verdict {:?}", rig.verdict);
    // The same through the general inequality path, against the computed
    // kinetic beta rather than the closed form.
    let rep = mane_inequality_check(&kinetic, &v, &classes, &opts, 3).map_err(|e| e.to_string())?;
    ensure!(rep.all_passed && !rep.inconclusive, "inequality report failed");
    let min_gap = rig.report.entries.iter().map(|e| e.gap).fold(f64::INFINITY, f64::min);
    Ok(format!(
        "beta(0,1) = {:.7}, min gap {min_gap:.4}, verdict nonzero",
        vertical.beta_lv
    ))
}

fn gradients() -> Outcome {
    let checks = gradcheck(20, 9, None).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for c in &checks {
        worst = worst.max(c.energy_rel_err).max(c.action_rel_err);
        ensure!(
            c.passed,
            "fixture {} ({}): energy {:.1e}, action {:.1e}",
            c.index,
            c.kind,
            c.energy_rel_err,
            c.action_rel_err
        );
    }
    ensure!(worst <= GRADCHECK_TOL, "worst {worst}");
    Ok(format!("20 fixtures, worst rel err {worst:.1e}"))
}

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("mather-acceptance-{}", std::process::id()));
    fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let g1 = dir.join("g1.json");
    let g2 = dir.join("g2.json");
    fs::write(
        &g1,
        r#"{"type": "conformal", "factor_expr": "1 + 0.3*sin(2*pi*x)*sin(2*pi*y)"}"#,
    )
    .unwrap();
    fs::write(
        &g2,
        r#"{"type": "liouville", "f1": "1 + 0.4*cos(2*pi*t)", "f2": "0.5 + 0.3*sin(2*pi*t)^2"}"#,
    )
    .unwrap();
    let mut payloads = Vec::new();
    for run in 0..2 {
        let out = dir.join(format!("run{run}"));
        let status = Command::new(env!("CARGO_BIN_EXE_mather"))
            .args(["compare", "--metric"])
            .arg(&g1)
            .arg("--metric2")
            .arg(&g2)
            .args(["--classes", "1,0;0,1;1,1;2,-1", "--seed", "17", "--out-dir"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(status.status.code() == Some(0), "exit {:?}", status.status.code());
        payloads.push(fs::read(out.join("compare.json")).map_err(|e| e.to_string())?);
    }
    let _ = fs::remove_dir_all(&dir);
    ensure!(payloads[0] == payloads[1], "JSON payloads differ");
    Ok(format!("{} bytes, identical", payloads[0].len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("flat closed form", flat_closed_form),
        ("beta-norm relation and homogeneity", beta_norm_homogeneity),
        ("distortion inequality on random pairs", distortion_inequality),
        ("homothetic pairs are equality cases", homothety_equality),
        ("conformal strictness on the dip", conformal_strictness),
        ("big-bump invariance", big_bump),
        ("Liouville axis classes", liouville_axes),
        ("separable potential", mane_separable),
        ("gradient correctness", gradients),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:2} PASS  {name}: {detail} [{:.1?}]", i + 1, t.elapsed()),
            Err(why) => {
                failed += 1;
                println!("criterion {:2} FAIL  {name}: {why} [{:.1?}]", i + 1, t.elapsed());
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
