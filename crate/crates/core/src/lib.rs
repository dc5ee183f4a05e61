//! Non-negative McKean-Vlasov diffusion bridge of CIR type.
//!
//! The process is pinned at zero at both ends of the horizon and its
//! volatility depends on its own expectation. The crate provides closed-form
//! moments, a well-posedness check, the Feller diagnostic, exact-in-law
//! Monte Carlo simulation, superposition ensembles, count-data normalization
//! and two-step least-squares calibration.

// NaN inputs must fail the `!(x > 0.0)` style checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod data;
mod divdiff;
pub mod error;
pub mod fixtures;
pub mod model;
pub mod moments;
pub mod optim;
pub mod simulate;

pub use error::{BridgeError, Result};
pub use model::{
    check_assumption1, check_assumption1_default, classify_feller, classify_feller_default,
    default_feller_grid, AssumptionReport, BridgeModel, FellerProfile,
};
pub use moments::{
    mean_closed, mean_integral, mean_peak, solve_mean_ode, solve_moment_odes, std_closed,
    uniform_grid, variance_closed, MomentCurves, SourceTag,
};
pub use simulate::{
    empirical_moments, estimate_log_pdf, simulate_ensemble, simulate_superposition, LogPdfTable,
    PathEnsemble, Scheme, SimConfig,
};
pub use data::{
    empirical_curves, load_day_counts, normalize_days, DaySeries, NormalizedDay,
    NormalizedEnsemble,
};
pub use calibrate::{
    calibrate, fit_mean, fit_std, normalized_rmse, CalibrationRecord, CalibrationResult, FitConfig,
};
