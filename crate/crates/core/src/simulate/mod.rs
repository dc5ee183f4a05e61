//! Monte Carlo simulation of the bridge.
//!
//! Each step `[t_k, t_{k+1})` freezes the coefficients at `t_k` (the mean
//! comes from the closed form) and advances the resulting CIR process. The
//! primary scheme samples the frozen transition exactly, so every value is
//! non-negative by construction; a truncated Euler scheme is kept for
//! cross-checks. The final grid point is pinned to zero.
//!
//! Every path draws from its own ChaCha8 stream keyed by the master seed and
//! the path index, so results do not depend on thread scheduling.

mod ensemble;
mod export;
mod stats;
mod transition;

use serde::{Deserialize, Serialize};

use crate::error::{BridgeError, Result};
use crate::model::BridgeModel;

pub use ensemble::{simulate_ensemble, simulate_superposition};
pub use export::{format_f64, read_binary, read_csv, write_binary, write_csv, EnsembleDump, BINARY_MAGIC};
pub use stats::{
    column_statistics, empirical_moments, estimate_log_pdf, zero_occupancy_fraction, ColumnStats,
    LogPdfTable,
};
pub use transition::{cir_transition_sample, CirTransition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Exact sampling of the frozen-coefficient CIR transition.
    FrozenExact,
    /// Full-truncation Euler: the internal state may go negative, drift and
    /// diffusion use its positive part, recorded values are clamped at zero.
    TruncatedEuler,
}

impl std::str::FromStr for Scheme {
    type Err = BridgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frozen-exact" | "exact" => Ok(Self::FrozenExact),
            "truncated-euler" | "euler" => Ok(Self::TruncatedEuler),
            other => Err(BridgeError::Config(format!("unknown scheme {other:?}"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::FrozenExact => "frozen-exact",
            Self::TruncatedEuler => "truncated-euler",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_steps: usize,
    pub n_paths: usize,
    pub master_seed: u64,
    pub scheme: Scheme,
    /// Keep every `record_stride`-th grid point.
    pub record_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_steps: 5_000,
            n_paths: 100_000,
            master_seed: 0,
            scheme: Scheme::FrozenExact,
            record_stride: 50,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 2 {
            return Err(BridgeError::Config("n_steps must be >= 2".into()));
        }
        if self.n_paths < 1 {
            return Err(BridgeError::Config("n_paths must be >= 1".into()));
        }
        if self.record_stride == 0 || !self.n_steps.is_multiple_of(self.record_stride) {
            return Err(BridgeError::Config(format!(
                "record_stride {} must divide n_steps {}",
                self.record_stride, self.n_steps
            )));
        }
        if self.n_paths as u64 >= 1 << 40 {
            return Err(BridgeError::Config("n_paths must be below 2^40".into()));
        }
        Ok(())
    }

    pub fn n_recorded(&self) -> usize {
        self.n_steps / self.record_stride + 1
    }
}

/// Simulated paths, row-major (`n_paths` rows by `grid.len()` columns).
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub n_paths: usize,
    pub model: BridgeModel,
    pub config: SimConfig,
}

impl PathEnsemble {
    pub fn n_cols(&self) -> usize {
        self.grid.len()
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let n = self.n_cols();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols())
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(j).step_by(self.n_cols()).copied()
    }

    /// Index of the recorded column at time `t`.
    pub fn column_index(&self, t: f64) -> Result<usize> {
        let tol = 1e-9 * self.model.horizon();
        self.grid
            .iter()
            .position(|&g| (g - t).abs() <= tol)
            .ok_or(BridgeError::TimeNotOnGrid(t))
    }
}
