//! Exact transition of a CIR process with constant coefficients.
//!
//! For `dX = (a - b X) dt + v sqrt(X) dB` the law of `X_{t+dt}` given
//! `X_t = x` is `c` times a noncentral chi-square with `nu = 4a / v^2`
//! degrees of freedom and noncentrality `lambda = x e^{-b dt} / c`, where
//! `c = v^2 (1 - e^{-b dt}) / (4b)`. The noncentral chi-square is sampled
//! as a Poisson mixture of gammas: `N ~ Poisson(lambda / 2)`, then
//! `Gamma(nu / 2 + N, 2)`. A zero shape (no source and a zero Poisson draw)
//! yields the atom at zero.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{BridgeError, Result};

/// Precomputed transition law for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirTransition {
    scale: f64,
    decay: f64,
    degrees: f64,
}

impl CirTransition {
    pub fn new(a_eff: f64, b_eff: f64, v_eff: f64, dt: f64) -> Result<Self> {
        if !(a_eff >= 0.0 && a_eff.is_finite()) {
            return Err(BridgeError::TransitionParameter(format!(
                "source {a_eff} must be finite and >= 0"
            )));
        }
        if !(b_eff > 0.0 && b_eff.is_finite()) {
            return Err(BridgeError::TransitionParameter(format!(
                "reversion {b_eff} must be finite and > 0"
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(BridgeError::TransitionParameter(format!(
                "step {dt} must be finite and > 0"
            )));
        }
        let v2 = v_eff * v_eff;
        let scale = v2 * (-(-b_eff * dt).exp_m1()) / (4.0 * b_eff);
        let degrees = 4.0 * a_eff / v2;
        if !scale.is_finite() || scale <= 0.0 || !degrees.is_finite() {
            return Err(BridgeError::TransitionParameter(format!(
                "scale {scale} or degrees {degrees} not finite (v = {v_eff})"
            )));
        }
        Ok(Self {
            scale,
            decay: (-b_eff * dt).exp(),
            degrees,
        })
    }

    /// Same step with the source multiplied by `weight`.
    pub fn with_source_weight(self, weight: f64) -> Self {
        Self {
            degrees: self.degrees * weight,
            ..self
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        let lambda = x * self.decay / self.scale;
        let jumps = if lambda > 0.0 {
            // lambda / 2 is far below Poisson::MAX_LAMBDA for any finite state
            match Poisson::new(0.5 * lambda) {
                Ok(p) => p.sample(rng),
                Err(_) => return x * self.decay,
            }
        } else {
            0.0
        };
        let shape = 0.5 * self.degrees + jumps;
        if shape <= 0.0 {
            return 0.0;
        }
        let gamma = Gamma::new(shape, 2.0).expect("positive finite gamma shape");
        (self.scale * gamma.sample(rng)).max(0.0)
    }

    /// Conditional mean `x e^{-b dt} + (a / b)(1 - e^{-b dt})`.
    pub fn conditional_mean(&self, x: f64) -> f64 {
        self.scale * (self.degrees + x * self.decay / self.scale)
    }

    /// Conditional variance `c^2 (2 nu + 4 lambda)`.
    pub fn conditional_variance(&self, x: f64) -> f64 {
        let lambda = x * self.decay / self.scale;
        self.scale * self.scale * (2.0 * self.degrees + 4.0 * lambda)
    }
}

/// One exact-in-law sample of the CIR transition over `dt` from `x`.
pub fn cir_transition_sample<R: Rng + ?Sized>(
    x: f64,
    a_eff: f64,
    b_eff: f64,
    v_eff: f64,
    dt: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(BridgeError::TransitionParameter(format!(
            "state {x} must be finite and >= 0"
        )));
    }
    Ok(CirTransition::new(a_eff, b_eff, v_eff, dt)?.sample(x, rng))
}
