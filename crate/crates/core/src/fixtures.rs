//! Fitted parameter sets for daily count data (2023, 2024, 2025 and the
//! pooled 2023-2025 data).

use crate::model::BridgeModel;

/// Mean-field fits: `(label, a, r, mu, omega, alpha)`.
pub const MEAN_FIELD: [(&str, f64, f64, f64, f64, f64); 4] = [
    ("2023", 6.003e-2, 1.647, 1.500, -1.229e2, 4.922e-1),
    ("2024", 3.219e-2, 5.137e-1, 1.483, -9.898e1, 3.157e-1),
    ("2025", 3.021e-2, 4.574e-1, 1.613, -1.298e2, 5.783e-1),
    ("2023-2025", 3.673e-2, 7.100e-1, 1.634, -1.439e2, 5.482e-1),
];

/// Fits with omega fixed to zero: `(label, a, r, mu, alpha)`.
pub const NO_MEAN_FIELD: [(&str, f64, f64, f64, f64); 4] = [
    ("2023", 6.003e-2, 1.647, 8.058e-1, 2.176e-1),
    ("2024", 3.219e-2, 5.137e-1, 1.191, -1.284e-1),
    ("2025", 3.021e-2, 4.574e-1, 1.347, -9.916e-2),
    ("2023-2025", 3.673e-2, 7.100e-1, 1.195, -1.218e-1),
];

/// Constant-volatility fits with alpha = 1: `(label, a, r, sigma)`.
pub const CONSTANT_SIGMA_ALPHA_ONE: [(&str, f64, f64, f64); 4] = [
    ("2023", 6.003e-2, 1.647, 5.942e-1),
    ("2024", 3.219e-2, 5.137e-1, 6.962e-1),
    ("2025", 3.021e-2, 4.574e-1, 7.945e-1),
    ("2023-2025", 3.673e-2, 7.100e-1, 7.252e-1),
];

pub fn mean_field_models() -> Vec<(&'static str, BridgeModel)> {
    MEAN_FIELD
        .iter()
        .map(|&(label, a, r, mu, omega, alpha)| {
            (label, BridgeModel::new(a, r, mu, omega, alpha).expect("valid fixture"))
        })
        .collect()
}

pub fn no_mean_field_models() -> Vec<(&'static str, BridgeModel)> {
    NO_MEAN_FIELD
        .iter()
        .map(|&(label, a, r, mu, alpha)| {
            (label, BridgeModel::new(a, r, mu, 0.0, alpha).expect("valid fixture"))
        })
        .collect()
}

pub fn constant_sigma_models() -> Vec<(&'static str, BridgeModel)> {
    CONSTANT_SIGMA_ALPHA_ONE
        .iter()
        .map(|&(label, a, r, sigma)| {
            (label, BridgeModel::new(a, r, sigma, 0.0, 1.0).expect("valid fixture"))
        })
        .collect()
}

pub fn mean_field_2023() -> BridgeModel {
    mean_field_models()[0].1
}

pub fn mean_field_2023_2025() -> BridgeModel {
    mean_field_models()[3].1
}
