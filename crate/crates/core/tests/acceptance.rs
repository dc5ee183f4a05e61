//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --release -p mvbridge --test acceptance`. Pass
//! criterion numbers as arguments (`-- 4 9`) to run a subset.

use std::sync::OnceLock;
use std::time::Instant;

use mvbridge::data::{parse_day_counts, read_day_table, SyntheticCounts};
use mvbridge::simulate::{column_statistics, zero_occupancy_fraction, ColumnStats};
use mvbridge::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn deciles() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

fn pooled() -> BridgeModel {
    fixtures::mean_field_2023_2025()
}

/// The desk-scale run shared by criteria 1, 2 and 3.
fn main_run() -> &'static (PathEnsemble, Vec<ColumnStats>, f64) {
    static RUN: OnceLock<(PathEnsemble, Vec<ColumnStats>, f64)> = OnceLock::new();
    RUN.get_or_init(|| {
        let config = SimConfig {
            n_steps: 5_000,
            n_paths: 100_000,
            master_seed: 1,
            scheme: Scheme::FrozenExact,
            record_stride: 50,
        };
        let start = Instant::now();
        let ensemble = simulate_ensemble(&pooled(), &config).expect("simulation");
        let stats = column_statistics(&ensemble).expect("stats");
        (ensemble, stats, start.elapsed().as_secs_f64())
    })
}

fn criterion_1() -> Outcome {
    let m = pooled();
    let ts = deciles();
    let mut ode_grid = vec![0.0];
    ode_grid.extend(&ts);
    let ode = solve_mean_ode(|_, _| m.a(), |_, _| m.r(), &ode_grid).expect("ode");
    let ode_err = ts
        .iter()
        .enumerate()
        .map(|(i, &t)| (ode.mean_at(i + 1).unwrap() - mean_closed(t, &m)).abs())
        .fold(0.0, f64::max);

    let (ensemble, stats, secs) = main_run();
    let mut worst_z: f64 = 0.0;
    for &t in &ts {
        let s = &stats[ensemble.column_index(t).unwrap()];
        worst_z = worst_z.max((s.mean - mean_closed(t, &m)).abs() / s.se_mean);
    }
    outcome(
        ode_err <= 1e-6 && worst_z <= 3.0 && *secs <= 120.0,
        format!(
            "closed vs ODE sup error {ode_err:.2e} (<= 1e-6); MC vs closed worst {worst_z:.2} SE (<= 3); simulation {secs:.1} s (<= 120)"
        ),
    )
}

fn criterion_2() -> Outcome {
    let m = pooled();
    let ts = deciles();
    let mut grid = vec![0.0];
    grid.extend(&ts);
    let ode = solve_moment_odes(&m, &grid).expect("moment odes");
    let (ensemble, stats, _) = main_run();
    let (mut worst_rel, mut worst_z_closed, mut worst_z_ode): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (i, &t) in ts.iter().enumerate() {
        let closed = std_closed(t, &m);
        let by_ode = ode.std_at(i + 1).unwrap();
        worst_rel = worst_rel.max((closed - by_ode).abs() / by_ode);
        let s = &stats[ensemble.column_index(t).unwrap()];
        worst_z_closed = worst_z_closed.max((s.std - closed).abs() / s.se_std);
        worst_z_ode = worst_z_ode.max((s.std - by_ode).abs() / s.se_std);
    }
    outcome(
        worst_rel <= 1e-3 && worst_z_closed <= 3.0 && worst_z_ode <= 3.0,
        format!(
            "closed vs ODE std worst relative {worst_rel:.2e} (<= 1e-3); MC std worst {worst_z_closed:.2} SE from closed, {worst_z_ode:.2} SE from ODE (<= 3)"
        ),
    )
}

fn pinned_and_nonnegative(e: &PathEnsemble) -> bool {
    e.values.iter().all(|&v| v >= 0.0)
        && e.paths().all(|p| p[0] == 0.0 && p[p.len() - 1] == 0.0)
        && e.grid[0] == 0.0
        && e.grid[e.grid.len() - 1] == 1.0
}

fn criterion_3() -> Outcome {
    let mut models: Vec<(String, BridgeModel)> = Vec::new();
    for (label, m) in fixtures::mean_field_models() {
        models.push((format!("mean-field {label}"), m));
    }
    for (label, m) in fixtures::no_mean_field_models() {
        models.push((format!("omega=0 {label}"), m));
    }
    for (label, m) in fixtures::constant_sigma_models() {
        models.push((format!("alpha=1 {label}"), m));
    }
    models.push(("alpha=2 blow-up".into(), pooled().with_alpha(2.0).unwrap()));

    let config = SimConfig {
        n_steps: 2_000,
        n_paths: 2_000,
        master_seed: 3,
        scheme: Scheme::FrozenExact,
        record_stride: 1,
    };
    let mut failed = Vec::new();
    let mut values = 0_usize;
    for (label, m) in &models {
        let e = simulate_ensemble(m, &config).expect("simulation");
        values += e.values.len();
        if !pinned_and_nonnegative(&e) {
            failed.push(label.clone());
        }
    }
    let (main, _, _) = main_run();
    values += main.values.len();
    if !pinned_and_nonnegative(main) {
        failed.push("criterion-1 run".into());
    }
    outcome(
        failed.is_empty(),
        format!(
            "{} fixtures + criterion-1 run, {values} values checked; failures: {failed:?}",
            models.len()
        ),
    )
}

fn sci(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
}

fn criterion_4() -> Outcome {
    let deltas = [1e-2, 1e-3, 1e-4, 1e-6];
    let ok_model = pooled();
    let bad_model = pooled().with_alpha(2.0).unwrap();
    let tail = |m: &BridgeModel| -> Vec<f64> { deltas.iter().map(|d| variance_closed(1.0 - d, m)).collect() };
    let peak = uniform_grid(0.0, 1.0, 1001)
        .iter()
        .map(|&t| variance_closed(t, &ok_model))
        .fold(0.0, f64::max);
    let ok_tail = tail(&ok_model);
    let bad_tail = tail(&bad_model);
    let decreasing = ok_tail.windows(2).all(|w| w[1] < w[0]);
    let small = ok_tail[3] < 1e-4 * peak;
    let increasing = bad_tail.windows(2).all(|w| w[1] > w[0]);
    // the leading term grows like delta^-(alpha - (1 + r)); the observed
    // log-slope over the last decades must not level off below half of it
    let excess = bad_model.alpha() - bad_model.alpha_bound();
    let slope = (bad_tail[3] / bad_tail[2]).ln() / (deltas[2] / deltas[3]).ln();
    let diverging = slope >= 0.5 * excess && variance_closed(1.0, &bad_model).is_infinite();
    outcome(
        decreasing && small && increasing && diverging,
        format!(
            "alpha=0.548: [{}], last/peak {:.2e} (< 1e-4); alpha=2: [{}], log-slope {slope:.3} vs exponent {excess:.3}, V(1) infinite",
            sci(&ok_tail),
            ok_tail[3] / peak,
            sci(&bad_tail)
        ),
    )
}

fn criterion_5() -> Outcome {
    let m = pooled();
    let config = |seed| SimConfig {
        n_steps: 1_000,
        n_paths: 100_000,
        master_seed: seed,
        scheme: Scheme::FrozenExact,
        record_stride: 250,
    };
    let start = Instant::now();
    let direct = simulate_ensemble(&m, &config(50)).unwrap();
    let direct_stats = column_statistics(&direct).unwrap();
    let cases: Vec<(String, usize, Option<Vec<f64>>)> = vec![
        ("n=2".into(), 2, None),
        ("n=4".into(), 4, None),
        ("n=8".into(), 8, None),
        ("(0.3,0.7)".into(), 2, Some(vec![0.3, 0.7])),
    ];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (i, (label, n, weights)) in cases.iter().enumerate() {
        let e = simulate_superposition(&m, *n, weights.as_deref(), &config(51 + i as u64)).unwrap();
        let stats = column_statistics(&e).unwrap();
        let mut case_worst: f64 = 0.0;
        for t in [0.25, 0.5, 0.75] {
            let j = e.column_index(t).unwrap();
            let (a, b) = (&stats[j], &direct_stats[j]);
            let z_mean = (a.mean - b.mean).abs() / a.se_mean.hypot(b.se_mean);
            let z_var = (a.variance - b.variance).abs() / a.se_variance.hypot(b.se_variance);
            case_worst = case_worst.max(z_mean).max(z_var);
        }
        parts.push(format!("{label} {case_worst:.2}"));
        worst = worst.max(case_worst);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 3.0 && secs <= 600.0,
        format!(
            "worst combined-SE distance per case: {} (<= 3); {secs:.1} s (<= 600)",
            parts.join(", ")
        ),
    )
}

fn criterion_6() -> Outcome {
    let columns: Vec<bool> = fixtures::mean_field_models()
        .iter()
        .map(|(_, m)| classify_feller_default(m).unwrap().violated_everywhere)
        .collect();
    let scaled = pooled().scale_sigma(0.2).unwrap();
    let scaled_profile = classify_feller_default(&scaled).unwrap();

    let config = SimConfig {
        n_steps: 5_000,
        n_paths: 10_000,
        master_seed: 6,
        scheme: Scheme::FrozenExact,
        record_stride: 50,
    };
    let threshold = 1e-4 * mean_peak(&pooled()).1;
    let occ = zero_occupancy_fraction(&simulate_ensemble(&pooled(), &config).unwrap(), threshold);
    let occ_scaled = zero_occupancy_fraction(&simulate_ensemble(&scaled, &config).unwrap(), threshold);
    outcome(
        columns.iter().all(|&v| v) && !scaled_profile.violated_everywhere && occ > occ_scaled,
        format!(
            "fitted sets violated everywhere: {columns:?}; sigma x0.2 violated everywhere: {} (satisfied on {:.1}% of the grid); zero occupancy {occ:.4} vs {occ_scaled:.4}",
            scaled_profile.violated_everywhere,
            100.0 * scaled_profile.satisfied_fraction()
        ),
    )
}

/// 200 synthetic days from the 2023 model, each one path sampled at 60 bins.
fn synthetic_curves(seed: u64) -> MomentCurves {
    let config = SimConfig {
        n_steps: 6_000,
        n_paths: 200,
        master_seed: seed,
        scheme: Scheme::FrozenExact,
        record_stride: 50,
    };
    let e = simulate_ensemble(&fixtures::mean_field_2023(), &config).unwrap();
    empirical_curves(&NormalizedEnsemble::from_ensemble(&e, 60).unwrap(), 60).unwrap()
}

fn within_tolerances(fit: &BridgeModel, truth: &BridgeModel) -> bool {
    let rel = |x: f64, y: f64| (x / y - 1.0).abs();
    rel(fit.a(), truth.a()) <= 0.10
        && rel(fit.r(), truth.r()) <= 0.10
        && rel(fit.mu(), truth.mu()) <= 0.25
        && rel(fit.omega(), truth.omega()) <= 0.40
        && (fit.alpha() - truth.alpha()).abs() <= 0.2
}

const SYNTHETIC_SEED: u64 = 0;
const ROBUSTNESS_SEEDS: u64 = 40;

fn criterion_7() -> Outcome {
    let truth = fixtures::mean_field_2023();
    let config = FitConfig::default();

    let mut noiseless_worst: f64 = 0.0;
    for (_, m) in fixtures::mean_field_models() {
        let grid: Vec<f64> = (0..100).map(|k| (k as f64 + 0.5) / 100.0).collect();
        let fit = calibrate(&MomentCurves::closed_form(&m, &grid).unwrap(), &config).unwrap().model;
        for (x, y) in [
            (fit.a(), m.a()),
            (fit.r(), m.r()),
            (fit.mu(), m.mu()),
            (fit.omega(), m.omega()),
            (fit.alpha(), m.alpha()),
        ] {
            noiseless_worst = noiseless_worst.max((x / y - 1.0).abs());
        }
    }

    let fit = calibrate(&synthetic_curves(SYNTHETIC_SEED), &config).unwrap().model;
    let again = calibrate(&synthetic_curves(SYNTHETIC_SEED), &config).unwrap().model;
    let deterministic = fit == again;
    let ok = within_tolerances(&fit, &truth);
    let robust = (0..ROBUSTNESS_SEEDS)
        .filter(|&s| within_tolerances(&calibrate(&synthetic_curves(s), &config).unwrap().model, &truth))
        .count();
    outcome(
        noiseless_worst <= 1e-3 && ok && deterministic,
        format!(
            "noiseless worst relative error {noiseless_worst:.1e} (<= 1e-3); seed {SYNTHETIC_SEED}: a {:+.1}%, r {:+.1}%, mu {:+.1}%, omega {:+.1}%, alpha {:+.3}; deterministic {deterministic}; NOTE only {robust}/{ROBUSTNESS_SEEDS} seeds meet all tolerances (200-day noise floor, see ledger)",
            100.0 * (fit.a() / truth.a() - 1.0),
            100.0 * (fit.r() / truth.r() - 1.0),
            100.0 * (fit.mu() / truth.mu() - 1.0),
            100.0 * (fit.omega() / truth.omega() - 1.0),
            fit.alpha() - truth.alpha(),
        ),
    )
}

fn criterion_8() -> Outcome {
    let curves = synthetic_curves(SYNTHETIC_SEED);
    let free = calibrate(&curves, &FitConfig::default()).unwrap();
    let frozen = calibrate(
        &curves,
        &FitConfig {
            freeze_omega_zero: true,
            ..FitConfig::default()
        },
    )
    .unwrap();
    outcome(
        frozen.rmse_std_normalized >= free.rmse_std_normalized,
        format!(
            "normalized std RMSE: omega frozen {:.4} >= free {:.4}",
            frozen.rmse_std_normalized, free.rmse_std_normalized
        ),
    )
}

fn criterion_9() -> Outcome {
    let eps = 1e-6;
    let model = |r: f64, alpha: f64| BridgeModel::new(0.04, r, 1.2, -40.0, alpha).unwrap();
    // (denominator, r on the manifold, alpha on the manifold, vary r?)
    let manifolds = [
        ("1-r", 1.0, 0.5, true),
        ("1-r-alpha", 0.7, 0.3, false),
        ("2-alpha-2r", 0.7, 0.6, false),
        ("1-alpha", 0.7, 1.0, false),
        ("2-r-alpha", 0.7, 1.3, false),
        ("3-2r-alpha", 0.9, 1.2, false),
    ];
    let t = 0.5;
    let mut worst_side: f64 = 0.0;
    let mut worst_jump: f64 = 0.0;
    for (_, r, alpha, vary_r) in manifolds {
        let at = |d: f64| if vary_r { model(r + d, alpha) } else { model(r, alpha + d) };
        let (lo, hi) = (variance_closed(t, &at(-eps)), variance_closed(t, &at(eps)));
        worst_side = worst_side.max((hi - lo).abs() / lo.max(hi));
        // second difference: zero to O(eps^2) unless the value jumps
        for tt in deciles() {
            let (l, c, h) = (
                variance_closed(tt, &at(-eps)),
                variance_closed(tt, &at(0.0)),
                variance_closed(tt, &at(eps)),
            );
            worst_jump = worst_jump.max((h - 2.0 * c + l).abs() / c);
        }
    }
    let mean_model = model(1.0, 0.5);
    let (ml, mh) = (
        mean_closed(t, &mean_model.with_r(1.0 - eps).unwrap()),
        mean_closed(t, &mean_model.with_r(1.0 + eps).unwrap()),
    );
    let mean_rel = (mh - ml).abs() / ml.max(mh);
    outcome(
        worst_side <= 1e-6 && mean_rel <= 1e-6 && worst_jump <= 1e-9,
        format!(
            "t=0.5: variance worst relative difference across +-1e-6 {worst_side:.2e}, mean across r=1 {mean_rel:.2e} (<= 1e-6); second-difference jump at t=0.1..0.9 {worst_jump:.1e} (<= 1e-9)"
        ),
    )
}

fn criterion_10() -> Outcome {
    let config = SimConfig {
        n_steps: 1_200,
        n_paths: 200,
        master_seed: 10,
        scheme: Scheme::FrozenExact,
        record_stride: 10,
    };
    let e = simulate_ensemble(&pooled(), &config).unwrap();
    let mut synthetic = SyntheticCounts::from_ensemble(&e, 60, 1e5, 600.0).unwrap();
    synthetic.day_ids.push("empty".into());
    synthetic.counts.push(vec![0; 60]);

    let (mut counts_csv, mut table_csv) = (Vec::new(), Vec::new());
    synthetic.write(&mut counts_csv, &mut table_csv).unwrap();
    let table = read_day_table(table_csv.as_slice()).unwrap();
    let days = parse_day_counts(counts_csv.as_slice(), &table).unwrap();

    let round_trip = days.len() == synthetic.counts.len()
        && days.iter().zip(&synthetic.counts).all(|(d, c)| {
            d.counts.iter().map(|x| x.unwrap_or(u64::MAX)).eq(c.iter().copied())
        })
        && days.iter().map(|d| d.total).eq(synthetic.totals());
    let normalized = normalize_days(&days);
    let worst_sum = normalized
        .days
        .iter()
        .map(|d| (d.sum() - 1.0).abs())
        .fold(0.0, f64::max);
    let zero_days: Vec<&str> = days.iter().filter(|d| d.total == 0).map(|d| d.day_id.as_str()).collect();
    let excluded_ok = normalized.excluded_days == zero_days
        && normalized.days.len() + normalized.excluded_days.len() == days.len()
        && normalized.excluded_days.contains(&"empty".to_string());
    outcome(
        round_trip && worst_sum <= 1e-9 && excluded_ok,
        format!(
            "{} days round-trip exactly: {round_trip}; worst |sum Z - 1| {worst_sum:.1e} (<= 1e-9); excluded {:?}",
            days.len(),
            normalized.excluded_days
        ),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "moment-oracle triangle", criterion_1),
        (2, "variance validation", criterion_2),
        (3, "pinning and nonnegativity", criterion_3),
        (4, "terminal limits", criterion_4),
        (5, "superposition", criterion_5),
        (6, "Feller regimes", criterion_6),
        (7, "calibration round-trip", criterion_7),
        (8, "mean-field improvement direction", criterion_8),
        (9, "degenerate-parameter continuity", criterion_9),
        (10, "normalization invariants", criterion_10),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        if !result.pass {
            failures += 1;
        }
        println!(
            "criterion {id:>2} {} {name} ({:.1} s): {}",
            if result.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            result.detail
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
