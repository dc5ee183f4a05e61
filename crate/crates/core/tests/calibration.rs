use approx::assert_relative_eq;
use mvbridge::*;
use proptest::prelude::*;

fn bin_centers(n: usize) -> Vec<f64> {
    (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect()
}

/// Closed-form curves multiplied by a smooth deterministic ripple.
fn rippled(model: &BridgeModel, grid: &[f64], amplitude: f64) -> MomentCurves {
    let mut c = MomentCurves::closed_form(model, grid).unwrap();
    let wobble = |i: usize, k: f64| 1.0 + amplitude * (k * i as f64).sin();
    c.mean = c.mean.iter().enumerate().map(|(i, m)| m.map(|m| m * wobble(i, 0.7))).collect();
    c.std = c.std.map(|s| s.iter().enumerate().map(|(i, v)| v.map(|v| v * wobble(i, 1.3))).collect());
    c
}

fn scale_curves(c: &MomentCurves, k: f64) -> MomentCurves {
    let mut out = c.clone();
    out.mean = c.mean.iter().map(|m| m.map(|m| m * k)).collect();
    out.std = c.std.as_ref().map(|s| s.iter().map(|v| v.map(|v| v * k)).collect());
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // (a, mu^2) -> (c a, c mu^2) scales both the mean and the std by c
    #[test]
    fn rmse_invariant_under_joint_scaling(c in 0.01_f64..100.0, amplitude in 0.0_f64..0.2) {
        let model = fixtures::mean_field_2023_2025();
        let grid = bin_centers(100);
        let scaled = BridgeModel::new(
            c * model.a(), model.r(), c.sqrt() * model.mu(), model.omega(), model.alpha(),
        ).unwrap();
        let empirical = rippled(&model, &grid, amplitude);
        let base = normalized_rmse(&MomentCurves::closed_form(&model, &grid).unwrap(), &empirical, &model).unwrap();
        let moved = normalized_rmse(
            &MomentCurves::closed_form(&scaled, &grid).unwrap(),
            &scale_curves(&empirical, c),
            &scaled,
        ).unwrap();
        prop_assert!((base.0 - moved.0).abs() <= 1e-9 * (1.0 + base.0));
        prop_assert!((base.1 - moved.1).abs() <= 1e-9 * (1.0 + base.1));
    }
}

#[test]
fn calibration_is_deterministic() {
    let model = fixtures::mean_field_2023();
    let curves = rippled(&model, &bin_centers(100), 0.05);
    let config = FitConfig::default();
    let first = calibrate(&curves, &config).unwrap();
    let second = calibrate(&curves, &config).unwrap();
    assert_eq!(first.record(), second.record());
    assert_eq!(first.to_json().unwrap(), second.to_json().unwrap());
}

#[test]
fn fitted_drift_scales_with_the_curves() {
    let model = fixtures::mean_field_2023_2025();
    let curves = rippled(&model, &bin_centers(100), 0.03);
    let config = FitConfig::default();
    let base = fit_mean(&curves, &config).unwrap();
    let big = fit_mean(&scale_curves(&curves, 1e3), &config).unwrap();
    assert_relative_eq!(big.a, 1e3 * base.a, max_relative = 1e-6);
    assert_relative_eq!(big.r, base.r, max_relative = 1e-6);
}

#[test]
fn mild_noise_keeps_the_fit_close() {
    let model = fixtures::mean_field_2023_2025();
    let result = calibrate(&rippled(&model, &bin_centers(100), 0.01), &FitConfig::default()).unwrap();
    let fitted = result.model;
    assert_relative_eq!(fitted.a(), model.a(), max_relative = 0.05);
    assert_relative_eq!(fitted.r(), model.r(), max_relative = 0.05);
    assert!(result.rmse_mean_normalized < 0.05, "{}", result.rmse_mean_normalized);
    assert!(result.assumption.overall);
}
