//! First and second moments of the bridge.
//!
//! Closed forms (with `s = 1 - t` on the unit horizon):
//!
//! ```text
//! E[X_t] = a (s^r - s) / (1 - r)
//! V[X_t] = r a mu^2 f[2r, 1+r-alpha, 2-alpha]
//!        - 2 r a^2 omega f[2r, 1+2r-alpha, 2+r-alpha, 3-alpha]
//! ```
//!
//! where `f[...]` is the divided difference of `x -> s^x`. Expanding the
//! divided differences gives the usual sum of `((s^p - s^q) / (q - p))`
//! terms over the denominators `1-r, 1-r-alpha, 2-alpha-2r, 1-alpha,
//! 2-r-alpha, 3-2r-alpha`; evaluated as divided differences every vanishing
//! denominator becomes its limit automatically.
//!
//! The ODE solvers integrate on the clock `tau = -ln(1 - t)`, which turns
//! the `r x / (1 - t)` reversion into a regular linear term.

use serde::{Deserialize, Serialize};

use crate::divdiff::power_divided_difference;
use crate::error::{BridgeError, Result};
use crate::model::BridgeModel;

/// Threshold below which `1 - r` is treated as zero in the mean.
pub const DEGENERATE_THRESHOLD: f64 = 1e-8;

/// Largest step on the `tau` clock taken by the ODE solvers.
pub const MAX_TAU_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceTag {
    ClosedForm,
    Ode,
    Empirical,
    MonteCarlo,
}

/// Mean (and optionally standard deviation) sampled on a time grid.
///
/// Empirical curves may contain empty bins, stored as `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCurves {
    pub grid: Vec<f64>,
    pub mean: Vec<Option<f64>>,
    pub std: Option<Vec<Option<f64>>>,
    /// Observation counts per grid point, for empirical curves.
    pub n_obs: Option<Vec<usize>>,
    pub source: SourceTag,
}

impl MomentCurves {
    pub fn new(
        grid: Vec<f64>,
        mean: Vec<Option<f64>>,
        std: Option<Vec<Option<f64>>>,
        source: SourceTag,
    ) -> Result<Self> {
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(BridgeError::Curves("grid not strictly increasing".into()));
        }
        if mean.len() != grid.len() {
            return Err(BridgeError::Curves(format!(
                "mean has {} entries for {} grid points",
                mean.len(),
                grid.len()
            )));
        }
        let negative = |v: &Option<f64>| v.is_some_and(|x| x < 0.0 || x.is_nan());
        if mean.iter().any(negative) {
            return Err(BridgeError::Curves("negative or NaN mean entry".into()));
        }
        if let Some(std) = &std {
            if std.len() != grid.len() {
                return Err(BridgeError::Curves(format!(
                    "std has {} entries for {} grid points",
                    std.len(),
                    grid.len()
                )));
            }
            if std.iter().any(negative) {
                return Err(BridgeError::Curves("negative or NaN std entry".into()));
            }
        }
        Ok(Self {
            grid,
            mean,
            std,
            n_obs: None,
            source,
        })
    }

    pub fn with_counts(mut self, n_obs: Vec<usize>) -> Result<Self> {
        if n_obs.len() != self.grid.len() {
            return Err(BridgeError::Curves("n_obs length mismatch".into()));
        }
        self.n_obs = Some(n_obs);
        Ok(self)
    }

    /// Closed-form mean only.
    pub fn closed_form_mean(model: &BridgeModel, grid: &[f64]) -> Result<Self> {
        let mean = grid.iter().map(|&t| Some(mean_closed(t, model))).collect();
        Self::new(grid.to_vec(), mean, None, SourceTag::ClosedForm)
    }

    /// Closed-form mean and standard deviation.
    pub fn closed_form(model: &BridgeModel, grid: &[f64]) -> Result<Self> {
        let mean = grid.iter().map(|&t| Some(mean_closed(t, model))).collect();
        let std = grid.iter().map(|&t| Some(std_closed(t, model))).collect();
        Self::new(grid.to_vec(), mean, Some(std), SourceTag::ClosedForm)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `(t, mean)` at every grid point carrying a mean.
    pub fn occupied_means(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid
            .iter()
            .zip(&self.mean)
            .filter_map(|(&t, m)| m.map(|m| (t, m)))
    }

    /// `(t, std)` at every grid point carrying a standard deviation.
    pub fn occupied_stds(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let std = self.std.as_deref().unwrap_or(&[]);
        self.grid
            .iter()
            .zip(std)
            .filter_map(|(&t, s)| s.map(|s| (t, s)))
    }

    pub fn mean_at(&self, i: usize) -> Option<f64> {
        self.mean.get(i).copied().flatten()
    }

    pub fn std_at(&self, i: usize) -> Option<f64> {
        self.std.as_ref().and_then(|s| s.get(i).copied().flatten())
    }
}

/// `n` uniformly spaced points from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let h = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + h * i as f64 })
                .collect()
        }
    }
}

fn remaining_fraction(t: f64, model: &BridgeModel) -> f64 {
    (1.0 - t / model.horizon()).clamp(0.0, 1.0)
}

/// Closed-form expectation `E[X_t]`; exactly zero at both ends.
pub fn mean_closed(t: f64, model: &BridgeModel) -> f64 {
    let s = remaining_fraction(t, model);
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    let unit = model.unit_horizon();
    unit_mean(s, unit.a(), unit.r())
}

/// `a (s^r - s) / (1 - r)`, with the `a s ln(1/s)` limit at `r = 1`.
fn unit_mean(s: f64, a: f64, r: f64) -> f64 {
    let log_inv = -s.ln();
    let d = 1.0 - r;
    if d.abs() < DEGENERATE_THRESHOLD {
        a * s * log_inv
    } else {
        // s^r - s = s (exp((1 - r) ln(1/s)) - 1)
        a * s * (d * log_inv).exp_m1() / d
    }
}

/// Closed-form variance `V[X_t]`.
///
/// Zero at `t = 0`. At `t = T` the value is defined as the limit: zero when
/// `alpha < min{2, 1 + r}`, infinite otherwise.
pub fn variance_closed(t: f64, model: &BridgeModel) -> f64 {
    let s = remaining_fraction(t, model);
    if s >= 1.0 {
        return 0.0;
    }
    if s <= 0.0 {
        return if model.alpha() < model.alpha_bound() {
            0.0
        } else {
            f64::INFINITY
        };
    }
    let unit = model.unit_horizon();
    let (base, mean_field) = variance_basis(s, &unit);
    let mean_field = if unit.omega() == 0.0 { 0.0 } else { unit.omega() * mean_field };
    (unit.mu() * unit.mu() * base + mean_field).max(0.0)
}

/// Coefficients of `mu^2` and `omega` in the unit-horizon variance at
/// remaining fraction `s`; the variance is linear in both.
pub(crate) fn variance_basis(s: f64, unit: &BridgeModel) -> (f64, f64) {
    let (a, r, alpha) = (unit.a(), unit.r(), unit.alpha());
    let base = r * a * power_divided_difference(s, &[2.0 * r, 1.0 + r - alpha, 2.0 - alpha]);
    let mean_field = -2.0 * r * a * a
        * power_divided_difference(
            s,
            &[2.0 * r, 1.0 + 2.0 * r - alpha, 2.0 + r - alpha, 3.0 - alpha],
        );
    (base, mean_field)
}

pub fn std_closed(t: f64, model: &BridgeModel) -> f64 {
    variance_closed(t, model).sqrt()
}

/// `integral_0^T E[X_t] dt / T = a T / (2 (1 + r))` in unit-horizon terms.
pub fn mean_integral(model: &BridgeModel) -> f64 {
    let unit = model.unit_horizon();
    unit.a() / (2.0 * (1.0 + unit.r()))
}

/// Time and value of the maximum of the closed-form mean.
pub fn mean_peak(model: &BridgeModel) -> (f64, f64) {
    let r = model.r();
    // d/dt of the mean vanishes where r s^(r-1) = 1
    let s = if (1.0 - r).abs() < DEGENERATE_THRESHOLD {
        (-1.0_f64).exp()
    } else {
        r.powf(1.0 / (1.0 - r))
    };
    let t = (1.0 - s) * model.horizon();
    (t, mean_closed(t, model))
}

/// Maps grid times to the `tau = -ln(1 - t)` clock and validates them.
fn tau_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(BridgeError::Curves("empty grid".into()));
    }
    if grid[0] < 0.0 {
        return Err(BridgeError::Curves("grid starts before 0".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(BridgeError::Curves("grid not strictly increasing".into()));
    }
    let last = grid[grid.len() - 1];
    if !(last < 1.0) {
        return Err(BridgeError::Curves(format!(
            "grid must end strictly before 1, ends at {last}"
        )));
    }
    Ok(grid.iter().map(|&t| -(-t).ln_1p()).collect())
}

/// Classic RK4 on the tau clock with at most `MAX_TAU_STEP` per step,
/// starting from zero at tau = 0. Returns the state at every grid point.
fn integrate_on_tau<const N: usize>(
    taus: &[f64],
    rhs: impl Fn(f64, &[f64; N]) -> [f64; N],
) -> Result<Vec<[f64; N]>> {
    let mut y = [0.0; N];
    let mut tau = 0.0;
    let mut out = Vec::with_capacity(taus.len());

    let axpy = |y: &[f64; N], k: &[f64; N], h: f64| {
        let mut o = [0.0; N];
        for i in 0..N {
            o[i] = y[i] + h * k[i];
        }
        o
    };

    for &target in taus {
        let span = target - tau;
        if span > 0.0 {
            let n = (span / MAX_TAU_STEP).ceil().max(1.0) as usize;
            let h = span / n as f64;
            for _ in 0..n {
                let k1 = rhs(tau, &y);
                let k2 = rhs(tau + 0.5 * h, &axpy(&y, &k1, 0.5 * h));
                let k3 = rhs(tau + 0.5 * h, &axpy(&y, &k2, 0.5 * h));
                let k4 = rhs(tau + h, &axpy(&y, &k3, h));
                for i in 0..N {
                    y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
                tau += h;
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(BridgeError::StepFailure {
                        t: -(-tau).exp_m1(),
                        reason: "non-finite state".into(),
                    });
                }
            }
            tau = target;
        }
        out.push(y);
    }
    Ok(out)
}

/// Solves `du/dt = source(t, u) - reversion(t, u) u / (1 - t)`, `u(0) = 0`,
/// on a unit-horizon grid ending before 1, and appends the terminal value
/// `u(1) = 0`.
pub fn solve_mean_ode<S, R>(source_fn: S, reversion_fn: R, grid: &[f64]) -> Result<MomentCurves>
where
    S: Fn(f64, f64) -> f64,
    R: Fn(f64, f64) -> f64,
{
    let taus = tau_grid(grid)?;
    let states = integrate_on_tau::<1>(&taus, |tau, y| {
        let t = -(-tau).exp_m1();
        let u = y[0];
        [(-tau).exp() * source_fn(t, u) - reversion_fn(t, u) * u]
    })?;

    let mut out_grid = grid.to_vec();
    let mut mean = Vec::with_capacity(grid.len() + 1);
    for (st, &t) in states.iter().zip(grid) {
        let u = st[0];
        if u < -1e-12 {
            return Err(BridgeError::StepFailure {
                t,
                reason: format!("negative mean {u}"),
            });
        }
        mean.push(Some(u.max(0.0)));
    }
    out_grid.push(1.0);
    mean.push(Some(0.0));
    MomentCurves::new(out_grid, mean, None, SourceTag::Ode)
}

/// Integrates the first two raw moments of the bridge directly from the
/// dynamics:
///
/// ```text
/// m1' = a - r m1 / (1 - t)
/// m2' = 2 a m1 - 2 r m2 / (1 - t) + (mu^2 + omega m1) r (1 - t)^-alpha m1
/// ```
///
/// and returns `mean = m1`, `std = sqrt(m2 - m1^2)`. The grid is in model
/// time and must end before the horizon.
pub fn solve_moment_odes(model: &BridgeModel, grid: &[f64]) -> Result<MomentCurves> {
    let unit = model.unit_horizon();
    let horizon = model.horizon();
    let unit_grid: Vec<f64> = grid.iter().map(|&t| t / horizon).collect();
    let taus = tau_grid(&unit_grid)?;
    let (a, r, alpha) = (unit.a(), unit.r(), unit.alpha());

    let states = integrate_on_tau::<2>(&taus, |tau, y| {
        let decay = (-tau).exp();
        let m1 = y[0];
        let sigma2 = unit.sigma_squared(m1);
        [
            decay * a - r * m1,
            2.0 * a * decay * m1 + sigma2 * r * ((alpha - 1.0) * tau).exp() * m1 - 2.0 * r * y[1],
        ]
    })?;

    let mut mean = Vec::with_capacity(grid.len());
    let mut std = Vec::with_capacity(grid.len());
    for (st, &t) in states.iter().zip(grid) {
        let var = st[1] - st[0] * st[0];
        if var < -1e-12 || st[0] < -1e-12 {
            return Err(BridgeError::StepFailure {
                t,
                reason: format!("negative moment (mean {}, variance {var})", st[0]),
            });
        }
        mean.push(Some(st[0].max(0.0)));
        std.push(Some(var.max(0.0).sqrt()));
    }
    MomentCurves::new(grid.to_vec(), mean, Some(std), SourceTag::Ode)
}
