//! The parametric bridge model, its volatility, the well-posedness check and
//! the Feller diagnostic.
//!
//! The model is
//!
//! ```text
//! dX = (a - r X / (T - t)) dt + sigma(E[X]) sqrt(r / (T - t)^alpha) sqrt(X) dB,
//! sigma(m) = sqrt(mu^2 + omega m),   X_0 = X_T = 0.
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{BridgeError, Result};
use crate::moments::{self, MomentCurves};

/// Five-parameter bridge with constant source and reversion and an
/// expectation-dependent volatility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeModel {
    a: f64,
    r: f64,
    mu: f64,
    omega: f64,
    alpha: f64,
    horizon: f64,
}

impl BridgeModel {
    /// Model on the unit horizon.
    pub fn new(a: f64, r: f64, mu: f64, omega: f64, alpha: f64) -> Result<Self> {
        Self::with_horizon(a, r, mu, omega, alpha, 1.0)
    }

    pub fn with_horizon(
        a: f64,
        r: f64,
        mu: f64,
        omega: f64,
        alpha: f64,
        horizon: f64,
    ) -> Result<Self> {
        let all = [a, r, mu, omega, alpha, horizon];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(BridgeError::InvalidModel(format!(
                "non-finite parameter in {all:?}"
            )));
        }
        if a < 0.0 {
            return Err(BridgeError::InvalidModel(format!("a = {a} must be >= 0")));
        }
        if r <= 0.0 {
            return Err(BridgeError::InvalidModel(format!("r = {r} must be > 0")));
        }
        if mu <= 0.0 {
            return Err(BridgeError::InvalidModel(format!("mu = {mu} must be > 0")));
        }
        if horizon <= 0.0 {
            return Err(BridgeError::InvalidModel(format!(
                "horizon = {horizon} must be > 0"
            )));
        }
        Ok(Self {
            a,
            r,
            mu,
            omega,
            alpha,
            horizon,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn with_a(self, a: f64) -> Result<Self> {
        Self::with_horizon(a, self.r, self.mu, self.omega, self.alpha, self.horizon)
    }
    pub fn with_r(self, r: f64) -> Result<Self> {
        Self::with_horizon(self.a, r, self.mu, self.omega, self.alpha, self.horizon)
    }
    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        Self::with_horizon(self.a, self.r, self.mu, self.omega, alpha, self.horizon)
    }
    pub fn with_volatility(self, mu: f64, omega: f64) -> Result<Self> {
        Self::with_horizon(self.a, self.r, mu, omega, self.alpha, self.horizon)
    }

    /// Multiplies sigma by `factor` at every mean level (mu by `factor`,
    /// omega by `factor^2`).
    pub fn scale_sigma(self, factor: f64) -> Result<Self> {
        self.with_volatility(self.mu * factor, self.omega * factor * factor)
    }

    /// Equivalent model on the unit horizon: time is rescaled by `1/T` and
    /// the state is left unchanged.
    pub fn unit_horizon(&self) -> Self {
        let t = self.horizon;
        if t == 1.0 {
            return *self;
        }
        let vol_scale = t.powf(1.0 - self.alpha);
        Self {
            a: self.a * t,
            r: self.r,
            mu: self.mu * vol_scale.sqrt(),
            omega: self.omega * vol_scale,
            alpha: self.alpha,
            horizon: 1.0,
        }
    }

    /// `min{2, 1 + r}`; the singularity exponent must stay strictly below it.
    pub fn alpha_bound(&self) -> f64 {
        2.0_f64.min(1.0 + self.r)
    }

    pub fn sigma_squared(&self, mean_value: f64) -> f64 {
        self.mu * self.mu + self.omega * mean_value
    }

    /// Volatility `sqrt(mu^2 + omega * mean_value)` at time `t` in `[0, T)`.
    pub fn sigma_at(&self, t: f64, mean_value: f64) -> Result<f64> {
        if !(0.0..self.horizon).contains(&t) {
            return Err(BridgeError::Domain(format!(
                "t = {t} outside [0, {})",
                self.horizon
            )));
        }
        let s2 = self.sigma_squared(mean_value);
        if s2 <= 0.0 || !s2.is_finite() {
            return Err(BridgeError::VolatilityDomain {
                mean: mean_value,
                value: s2,
            });
        }
        Ok(s2.sqrt())
    }

    /// Feller index `sigma^2 r / (2 a (T - t)^alpha) - 1`.
    ///
    /// Non-negative values mean the high-volatility, zero-touching regime.
    pub fn feller_index(&self, t: f64, mean_value: f64) -> Result<f64> {
        if self.a <= 0.0 {
            return Err(BridgeError::Domain(
                "Feller index undefined for a = 0".into(),
            ));
        }
        let sigma = self.sigma_at(t, mean_value)?;
        let remaining = self.horizon - t;
        Ok(sigma * sigma * self.r / (2.0 * self.a * remaining.powf(self.alpha)) - 1.0)
    }
}

/// Outcome of the well-posedness check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub alpha_bound: f64,
    pub alpha_ok: bool,
    pub sigma_positive: bool,
    /// Minimum of `mu^2 + omega * mean(t)` over the grid.
    pub sigma_margin: f64,
    pub overall: bool,
}

/// Checks the small-singularity condition `alpha < min{2, 1 + r}` and
/// positivity of the squared volatility along `mean_curve`.
///
/// For constant `a` and `r` the bound-of-reversion condition holds by
/// construction, and the Lipschitz condition reduces to a strictly positive
/// volatility margin.
pub fn check_assumption1(model: &BridgeModel, mean_curve: &MomentCurves) -> AssumptionReport {
    let alpha_bound = model.alpha_bound();
    let alpha_ok = model.alpha < alpha_bound;
    let mu2 = model.mu * model.mu;
    let sigma_margin = mean_curve
        .mean
        .iter()
        .flatten()
        .map(|&m| model.sigma_squared(m))
        .fold(mu2, f64::min);
    let sigma_positive = sigma_margin > 0.0;
    AssumptionReport {
        alpha_bound,
        alpha_ok,
        sigma_positive,
        sigma_margin,
        overall: alpha_ok && sigma_positive,
    }
}

/// Feller index sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FellerProfile {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// `F_t >= 0` at every grid point.
    pub violated_everywhere: bool,
    /// Maximal runs of grid points where `F_t < 0`, as `(first, last)` times.
    pub satisfied_intervals: Vec<(f64, f64)>,
}

impl FellerProfile {
    /// Fraction of grid points in the low-volatility regime.
    pub fn satisfied_fraction(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().filter(|&&v| v < 0.0).count() as f64 / self.values.len() as f64
    }
}

/// 1,000 uniform points on `[1e-4, 1 - 1e-4]` (scaled by the horizon).
pub fn default_feller_grid(horizon: f64) -> Vec<f64> {
    moments::uniform_grid(1e-4 * horizon, (1.0 - 1e-4) * horizon, 1000)
}

/// Evaluates the Feller index along `mean_curve` and groups the regimes.
pub fn classify_feller(model: &BridgeModel, mean_curve: &MomentCurves) -> Result<FellerProfile> {
    let mut grid = Vec::with_capacity(mean_curve.grid.len());
    let mut values = Vec::with_capacity(mean_curve.grid.len());
    for (&t, m) in mean_curve.grid.iter().zip(&mean_curve.mean) {
        let Some(m) = *m else { continue };
        if t <= 0.0 || t >= model.horizon {
            return Err(BridgeError::Domain(format!(
                "Feller grid point {t} not strictly inside (0, {})",
                model.horizon
            )));
        }
        grid.push(t);
        values.push(model.feller_index(t, m)?);
    }

    let mut satisfied_intervals = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match (v < 0.0, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                satisfied_intervals.push((grid[s], grid[i - 1]));
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run_start {
        satisfied_intervals.push((grid[s], grid[values.len() - 1]));
    }

    Ok(FellerProfile {
        violated_everywhere: satisfied_intervals.is_empty(),
        grid,
        values,
        satisfied_intervals,
    })
}

/// Convenience: classify on the default grid with the closed-form mean.
pub fn classify_feller_default(model: &BridgeModel) -> Result<FellerProfile> {
    let curve = MomentCurves::closed_form_mean(model, &default_feller_grid(model.horizon))?;
    classify_feller(model, &curve)
}

/// Convenience: assumption check on the default grid with the closed-form mean.
pub fn check_assumption1_default(model: &BridgeModel) -> Result<AssumptionReport> {
    let curve = MomentCurves::closed_form_mean(model, &default_feller_grid(model.horizon))?;
    Ok(check_assumption1(model, &curve))
}
