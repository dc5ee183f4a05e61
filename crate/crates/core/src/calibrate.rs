//! Two-step least-squares calibration on the unit horizon.
//!
//! Step one fits `(a, r)` to the empirical mean. The closed-form mean is
//! linear in `a`, so for each `r` on a scan grid the optimal `a` is a ratio
//! of sums and the search is one-dimensional. Step two fixes `(a, r)` and
//! fits `(mu, omega, alpha)` to the empirical standard deviation with a
//! multi-start Nelder-Mead search under quadratic constraint penalties.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::error::{BridgeError, Result};
use crate::model::{
    check_assumption1_default, classify_feller_default, AssumptionReport, BridgeModel,
};
use crate::moments::{mean_closed, mean_integral, mean_peak, variance_basis, MomentCurves};
use crate::optim::{nelder_mead, SimplexOptions};

/// Minimum number of occupied bins for either fitting step.
pub const MIN_OCCUPIED_BINS: usize = 10;

/// Margin kept below the alpha bound by the std fit.
pub const ALPHA_MARGIN: f64 = 1e-6;

const MAX_EVALUATIONS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// `(lower, upper, points)` of the uniform reversion scan.
    pub r_search: (f64, f64, usize),
    pub simplex_tolerance: f64,
    /// Number of alpha starting values for the std fit.
    pub restarts: usize,
    pub constraint_penalty: f64,
    /// Pin `omega = 0` (no mean-field term).
    pub freeze_omega_zero: bool,
    /// Pin `alpha` to a fixed value.
    pub pin_alpha: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            r_search: (0.05, 5.0, 200),
            simplex_tolerance: 1e-8,
            restarts: 8,
            constraint_penalty: 1e6,
            freeze_omega_zero: false,
            pin_alpha: None,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi, n) = self.r_search;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(BridgeError::Config(format!(
                "r_search bounds ({lo}, {hi}) must satisfy 0 < lower < upper"
            )));
        }
        if n < 10 {
            return Err(BridgeError::Config(format!("r_search needs >= 10 points, got {n}")));
        }
        if !(self.simplex_tolerance > 0.0) {
            return Err(BridgeError::Config("simplex_tolerance must be > 0".into()));
        }
        if self.restarts == 0 {
            return Err(BridgeError::Config("restarts must be >= 1".into()));
        }
        if !(self.constraint_penalty > 0.0) {
            return Err(BridgeError::Config("constraint_penalty must be > 0".into()));
        }
        if self.pin_alpha.is_some_and(|a| !a.is_finite()) {
            return Err(BridgeError::Config("pinned alpha must be finite".into()));
        }
        Ok(())
    }

    fn simplex(&self) -> SimplexOptions {
        SimplexOptions {
            tolerance: self.simplex_tolerance,
            max_evaluations: MAX_EVALUATIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFit {
    pub a: f64,
    pub r: f64,
    /// Sum of squared mean residuals.
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StdFit {
    pub mu: f64,
    pub omega: f64,
    pub alpha: f64,
    /// Sum of squared std residuals.
    pub objective: f64,
}

fn interior(t: f64) -> bool {
    t > 0.0 && t < 1.0
}

fn unit_shape(r: f64) -> BridgeModel {
    BridgeModel::new(1.0, r, 1.0, 0.0, 0.0).expect("positive r")
}

/// Optimal `a` and residual sum of squares for a given `r`.
fn profile_a(points: &[(f64, f64)], r: f64) -> (f64, f64) {
    let shape = unit_shape(r);
    let g: Vec<f64> = points.iter().map(|&(t, _)| mean_closed(t, &shape)).collect();
    let sgg: f64 = g.iter().map(|g| g * g).sum();
    let smg: f64 = points.iter().zip(&g).map(|(&(_, m), g)| m * g).sum();
    let a = smg / sgg;
    // residuals summed directly; the expanded form cancels near a perfect fit
    let sse = points
        .iter()
        .zip(&g)
        .map(|(&(_, m), g)| (m - a * g).powi(2))
        .sum();
    (a, sse)
}

/// Least-squares fit of `(a, r)` to the occupied bins of the mean curve.
pub fn fit_mean(curves: &MomentCurves, config: &FitConfig) -> Result<MeanFit> {
    config.validate()?;
    let points: Vec<(f64, f64)> = curves.occupied_means().filter(|p| interior(p.0)).collect();
    if points.is_empty() {
        return Err(BridgeError::EmptyCurve);
    }
    if points.len() < MIN_OCCUPIED_BINS {
        return Err(BridgeError::TooFewBins {
            needed: MIN_OCCUPIED_BINS,
            got: points.len(),
        });
    }

    let (lo, hi, n) = config.r_search;
    let h = (hi - lo) / (n - 1) as f64;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..n {
        let r = lo + h * i as f64;
        let (a, sse) = profile_a(&points, r);
        if a > 0.0 && best.is_none_or(|(_, b)| sse < b) {
            best = Some((r, sse));
        }
    }
    let Some((r0, _)) = best else {
        return Err(BridgeError::DegenerateFit(
            "optimal a is non-positive for every r on the scan".into(),
        ));
    };

    let objective = |x: &[f64]| {
        if x[0] <= 0.0 {
            return f64::INFINITY;
        }
        let (a, sse) = profile_a(&points, x[0]);
        if a > 0.0 {
            sse
        } else {
            f64::INFINITY
        }
    };
    let polished = nelder_mead(objective, &[r0], &[0.5 * h], config.simplex());
    let r = polished.x[0];
    let (a, sse) = profile_a(&points, r);
    Ok(MeanFit { a, r, objective: sse })
}

struct StdProblem {
    points: Vec<(f64, f64)>,
    a: f64,
    r: f64,
    peak: f64,
    bound: f64,
    penalty: f64,
}

impl StdProblem {
    fn basis(&self, alpha: f64) -> Vec<(f64, f64)> {
        let unit = BridgeModel::new(self.a, self.r, 1.0, 0.0, alpha).expect("validated fit");
        self.points
            .iter()
            .map(|&(t, _)| variance_basis(1.0 - t, &unit))
            .collect()
    }

    fn sse(&self, mu: f64, omega: f64, alpha: f64) -> f64 {
        self.basis(alpha)
            .iter()
            .zip(&self.points)
            .map(|(&(b1, b2), &(_, s))| {
                let v = (mu * mu * b1 + omega * b2).max(0.0);
                (s - v.sqrt()).powi(2)
            })
            .sum()
    }

    /// `mu^2 + omega * mean` at its smallest over the horizon.
    fn sigma_margin(&self, mu: f64, omega: f64) -> f64 {
        mu * mu + (omega * self.peak).min(0.0)
    }

    fn violation(&self, mu: f64, omega: f64, alpha: f64) -> f64 {
        let v1 = (-mu).max(0.0);
        let v2 = (alpha - (self.bound - ALPHA_MARGIN)).max(0.0);
        let v3 = (-self.sigma_margin(mu, omega)).max(0.0);
        v1 * v1 + v2 * v2 + v3 * v3
    }

    fn feasible(&self, mu: f64, omega: f64, alpha: f64) -> bool {
        mu > 0.0
            && alpha < self.bound - ALPHA_MARGIN
            && self.sigma_margin(mu, omega) > 0.0
            && mu.is_finite()
            && omega.is_finite()
    }

    /// Least-squares `(mu^2, omega)` of the variance for fixed alpha.
    fn linear_start(&self, alpha: f64, freeze_omega: bool) -> Option<(f64, f64)> {
        let basis = self.basis(alpha);
        let (mut s11, mut s12, mut s22, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&(b1, b2), &(_, s)) in basis.iter().zip(&self.points) {
            let v = s * s;
            s11 += b1 * b1;
            s12 += b1 * b2;
            s22 += b2 * b2;
            y1 += b1 * v;
            y2 += b2 * v;
        }
        let (mu2, omega) = if freeze_omega {
            (y1 / s11, 0.0)
        } else {
            let det = s11 * s22 - s12 * s12;
            if det.abs() <= 1e-14 * s11 * s22 {
                (y1 / s11, 0.0)
            } else {
                ((y1 * s22 - y2 * s12) / det, (s11 * y2 - s12 * y1) / det)
            }
        };
        if !(mu2 > 0.0 && mu2.is_finite()) {
            return None;
        }
        let mu = mu2.sqrt();
        if self.sigma_margin(mu, omega) > 0.0 {
            Some((mu, omega))
        } else if freeze_omega {
            None
        } else {
            // keep the mean-field term but back off to a feasible magnitude
            Some((mu, -0.5 * mu2 / self.peak))
        }
    }
}

/// Least-squares fit of `(mu, omega, alpha)` to the occupied bins of the
/// std curve with `(a, r)` held fixed.
pub fn fit_std(curves: &MomentCurves, a: f64, r: f64, config: &FitConfig) -> Result<StdFit> {
    config.validate()?;
    let probe = BridgeModel::new(a, r, 1.0, 0.0, 0.0)?;
    if !(a > 0.0) {
        return Err(BridgeError::DegenerateFit(format!("a = {a} must be positive")));
    }
    let points: Vec<(f64, f64)> = curves.occupied_stds().filter(|p| interior(p.0)).collect();
    if points.is_empty() {
        return Err(BridgeError::EmptyCurve);
    }
    if points.len() < MIN_OCCUPIED_BINS {
        return Err(BridgeError::TooFewBins {
            needed: MIN_OCCUPIED_BINS,
            got: points.len(),
        });
    }
    let problem = StdProblem {
        points,
        a,
        r,
        peak: mean_peak(&probe).1,
        bound: probe.alpha_bound(),
        penalty: config.constraint_penalty,
    };

    let alpha_hi = (problem.bound - 0.05).min(1.9);
    let alphas: Vec<f64> = match config.pin_alpha {
        Some(alpha) => vec![alpha],
        None if config.restarts == 1 => vec![0.5_f64.min(alpha_hi)],
        None => {
            let lo = (-1.0_f64).min(alpha_hi - 1.0);
            let n = config.restarts;
            (0..n)
                .map(|i| lo + (alpha_hi - lo) * i as f64 / (n - 1) as f64)
                .collect()
        }
    };
    let mut starts: Vec<(f64, f64, f64)> = Vec::new();
    for &alpha in &alphas {
        let omega_modes: &[bool] = if config.freeze_omega_zero { &[true] } else { &[false, true] };
        for &freeze in omega_modes {
            if let Some((mu, omega)) = problem.linear_start(alpha, freeze) {
                if problem.feasible(mu, omega, alpha) {
                    starts.push((mu, omega, alpha));
                }
            }
        }
    }
    if starts.is_empty() {
        return Err(BridgeError::NoFeasibleStart);
    }

    // free coordinates: mu, then omega unless frozen, then alpha unless pinned
    let free_omega = !config.freeze_omega_zero;
    let free_alpha = config.pin_alpha.is_none();
    let unpack = |x: &[f64], fallback: (f64, f64, f64)| -> (f64, f64, f64) {
        let mut i = 1;
        let omega = if free_omega {
            i += 1;
            x[i - 1]
        } else {
            0.0
        };
        let alpha = if free_alpha { x[i] } else { fallback.2 };
        (x[0], omega, alpha)
    };

    // (objective, (mu, omega, alpha))
    type Best = Option<(f64, (f64, f64, f64))>;
    let best_feasible: RefCell<Best> = RefCell::new(None);
    let consider = |value: f64, p: (f64, f64, f64)| {
        let mut slot = best_feasible.borrow_mut();
        let better = match *slot {
            None => true,
            Some((v, q)) => {
                value < v || (value == v && [p.0, p.1, p.2] < [q.0, q.1, q.2])
            }
        };
        if better {
            *slot = Some((value, p));
        }
    };

    for &start in &starts {
        let objective = |x: &[f64]| {
            let (mu, omega, alpha) = unpack(x, start);
            let sse = problem.sse(mu, omega, alpha);
            if problem.feasible(mu, omega, alpha) {
                consider(sse, (mu, omega, alpha));
                sse
            } else {
                sse + problem.penalty * (1.0 + problem.violation(mu, omega, alpha))
            }
        };
        let mut x = vec![start.0];
        let mut steps = vec![0.1 * start.0];
        if free_omega {
            x.push(start.1);
            steps.push(0.1 * start.1.abs().max(start.0 * start.0 / problem.peak));
        }
        if free_alpha {
            x.push(start.2);
            steps.push(0.1);
        }
        // a second pass restarts the simplex from the first optimum
        let first = nelder_mead(&objective, &x, &steps, config.simplex());
        let shrunk: Vec<f64> = steps.iter().map(|s| 0.1 * s).collect();
        nelder_mead(&objective, &first.x, &shrunk, config.simplex());
    }

    let (objective, (mu, omega, alpha)) = best_feasible
        .into_inner()
        .ok_or(BridgeError::NoFeasibleStart)?;
    Ok(StdFit {
        mu,
        omega,
        alpha,
        objective,
    })
}

fn grids_match(a: &MomentCurves, b: &MomentCurves) -> Result<()> {
    if a.grid.len() != b.grid.len() {
        return Err(BridgeError::GridMismatch(format!(
            "{} vs {} grid points",
            a.grid.len(),
            b.grid.len()
        )));
    }
    if let Some(i) = a
        .grid
        .iter()
        .zip(&b.grid)
        .position(|(x, y)| (x - y).abs() > 1e-12 * (1.0 + x.abs()))
    {
        return Err(BridgeError::GridMismatch(format!(
            "grid point {i} differs: {} vs {}",
            a.grid[i], b.grid[i]
        )));
    }
    Ok(())
}

fn rmse(theory: &[Option<f64>], data: &[Option<f64>]) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0_usize;
    for (i, (t, d)) in theory.iter().zip(data).enumerate() {
        match (t, d) {
            (Some(t), Some(d)) => {
                sum += (t - d).powi(2);
                n += 1;
            }
            (None, Some(_)) => {
                return Err(BridgeError::GridMismatch(format!(
                    "bin {i} is occupied empirically but has no theoretical value"
                )))
            }
            _ => {}
        }
    }
    if n == 0 {
        return Err(BridgeError::EmptyCurve);
    }
    Ok((sum / n as f64).sqrt())
}

/// RMSE of the mean and std over occupied bins, each divided by the time
/// average of the model mean.
pub fn normalized_rmse(
    theoretical: &MomentCurves,
    empirical: &MomentCurves,
    model: &BridgeModel,
) -> Result<(f64, f64)> {
    grids_match(theoretical, empirical)?;
    let scale = mean_integral(model);
    if !(scale > 0.0) {
        return Err(BridgeError::DegenerateFit("model mean integrates to zero".into()));
    }
    let mean = rmse(&theoretical.mean, &empirical.mean)?;
    let (Some(ts), Some(es)) = (&theoretical.std, &empirical.std) else {
        return Err(BridgeError::GridMismatch("both curves need std values".into()));
    };
    let std = rmse(ts, es)?;
    Ok((mean / scale, std / scale))
}

/// Fitted model with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub model: BridgeModel,
    pub rmse_mean_normalized: f64,
    pub rmse_std_normalized: f64,
    pub assumption: AssumptionReport,
    pub feller_violated_everywhere: bool,
    pub feller_satisfied_fraction: f64,
    pub mean_objective: f64,
    pub std_objective: f64,
}

/// Flat JSON layout of a calibration result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub a: f64,
    pub r: f64,
    pub mu: f64,
    pub omega: f64,
    pub alpha: f64,
    pub rmse_ave: f64,
    pub rmse_std: f64,
    pub assumption_ok: bool,
    pub feller_violated_everywhere: bool,
}

impl CalibrationResult {
    pub fn record(&self) -> CalibrationRecord {
        CalibrationRecord {
            a: self.model.a(),
            r: self.model.r(),
            mu: self.model.mu(),
            omega: self.model.omega(),
            alpha: self.model.alpha(),
            rmse_ave: self.rmse_mean_normalized,
            rmse_std: self.rmse_std_normalized,
            assumption_ok: self.assumption.overall,
            feller_violated_everywhere: self.feller_violated_everywhere,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.record())?)
    }
}

/// Runs both fitting steps and evaluates the fitted model.
pub fn calibrate(curves: &MomentCurves, config: &FitConfig) -> Result<CalibrationResult> {
    let mean = fit_mean(curves, config)?;
    let std = fit_std(curves, mean.a, mean.r, config)?;
    let model = BridgeModel::new(mean.a, mean.r, std.mu, std.omega, std.alpha)?;
    let theory = MomentCurves::closed_form(&model, &curves.grid)?;
    let (rmse_mean_normalized, rmse_std_normalized) = normalized_rmse(&theory, curves, &model)?;
    let assumption = check_assumption1_default(&model)?;
    let feller = classify_feller_default(&model)?;
    Ok(CalibrationResult {
        model,
        rmse_mean_normalized,
        rmse_std_normalized,
        assumption,
        feller_violated_everywhere: feller.violated_everywhere,
        feller_satisfied_fraction: feller.satisfied_fraction(),
        mean_objective: mean.objective,
        std_objective: std.objective,
    })
}
