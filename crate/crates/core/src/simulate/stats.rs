use serde::{Deserialize, Serialize};

use super::PathEnsemble;
use crate::error::{BridgeError, Result};
use crate::moments::{MomentCurves, SourceTag};

/// Per-column sample statistics with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub t: f64,
    pub mean: f64,
    /// Unbiased (divisor n - 1).
    pub std: f64,
    pub se_mean: f64,
    /// Delta-method standard error of the sample std, from the fourth
    /// central moment.
    pub se_std: f64,
    pub variance: f64,
    pub se_variance: f64,
}

pub fn column_statistics(ensemble: &PathEnsemble) -> Result<Vec<ColumnStats>> {
    let n = ensemble.n_paths;
    if n < 2 {
        return Err(BridgeError::Config("need at least 2 paths".into()));
    }
    let cols = ensemble.n_cols();
    let mut sum = vec![0.0; cols];
    for row in ensemble.paths() {
        for (s, v) in sum.iter_mut().zip(row) {
            *s += v;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    let mut m2 = vec![0.0; cols];
    let mut m4 = vec![0.0; cols];
    for row in ensemble.paths() {
        for j in 0..cols {
            let d = row[j] - mean[j];
            let d2 = d * d;
            m2[j] += d2;
            m4[j] += d2 * d2;
        }
    }
    let nf = n as f64;
    Ok((0..cols)
        .map(|j| {
            let variance = m2[j] / (nf - 1.0);
            let std = variance.sqrt();
            let central4 = m4[j] / nf;
            let biased2 = m2[j] / nf;
            let se_variance = ((central4 - biased2 * biased2).max(0.0) / nf).sqrt();
            ColumnStats {
                t: ensemble.grid[j],
                mean: mean[j],
                std,
                se_mean: std / nf.sqrt(),
                se_std: if std > 0.0 { se_variance / (2.0 * std) } else { 0.0 },
                variance,
                se_variance,
            }
        })
        .collect())
}

/// Sample mean and unbiased sample standard deviation per recorded time.
pub fn empirical_moments(ensemble: &PathEnsemble) -> Result<MomentCurves> {
    let stats = column_statistics(ensemble)?;
    let curves = MomentCurves::new(
        ensemble.grid.clone(),
        stats.iter().map(|s| Some(s.mean)).collect(),
        Some(stats.iter().map(|s| Some(s.std)).collect()),
        SourceTag::MonteCarlo,
    )?;
    curves.with_counts(vec![ensemble.n_paths; ensemble.n_cols()])
}

/// Fraction of interior recorded values (both endpoints excluded) below
/// `threshold`; a zero-occupancy measure of intermittency.
pub fn zero_occupancy_fraction(ensemble: &PathEnsemble, threshold: f64) -> f64 {
    let cols = ensemble.n_cols();
    if cols < 3 {
        return 0.0;
    }
    let (mut below, mut total) = (0_usize, 0_usize);
    for row in ensemble.paths() {
        for &v in &row[1..cols - 1] {
            total += 1;
            if v < threshold {
                below += 1;
            }
        }
    }
    below as f64 / total as f64
}

/// Histogram log-densities at selected times over shared bin edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogPdfTable {
    pub times: Vec<f64>,
    pub bin_edges: Vec<f64>,
    /// `log_density[i][k]` for time `i` and bin `k`; `None` for empty bins.
    pub log_density: Vec<Vec<Option<f64>>>,
}

impl LogPdfTable {
    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    /// Bin with the largest density at time index `i`.
    pub fn modal_bin(&self, i: usize) -> usize {
        self.log_density[i]
            .iter()
            .enumerate()
            .filter_map(|(k, d)| d.map(|d| (k, d)))
            .fold((0, f64::NEG_INFINITY), |best, (k, d)| if d > best.1 { (k, d) } else { best })
            .0
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// Histogram density estimate at the given recorded times, over `n_bins`
/// equal bins spanning `[0, max observed value]`.
pub fn estimate_log_pdf(
    ensemble: &PathEnsemble,
    times: &[f64],
    n_bins: usize,
) -> Result<LogPdfTable> {
    if n_bins < 2 {
        return Err(BridgeError::Config("n_bins must be >= 2".into()));
    }
    let columns = times
        .iter()
        .map(|&t| ensemble.column_index(t))
        .collect::<Result<Vec<_>>>()?;
    let max = columns
        .iter()
        .flat_map(|&j| ensemble.column(j))
        .fold(0.0_f64, f64::max);
    // an all-zero sample puts everything in the first bin
    let upper = if max > 0.0 { max } else { 1.0 };
    let width = upper / n_bins as f64;
    let bin_edges: Vec<f64> = (0..=n_bins)
        .map(|k| if k == n_bins { upper } else { k as f64 * width })
        .collect();

    let n = ensemble.n_paths as f64;
    let log_density = columns
        .iter()
        .map(|&j| {
            let mut counts = vec![0_usize; n_bins];
            for v in ensemble.column(j) {
                let k = ((v / width) as usize).min(n_bins - 1);
                counts[k] += 1;
            }
            counts
                .into_iter()
                .map(|c| (c > 0).then(|| (c as f64 / (n * width)).ln()))
                .collect()
        })
        .collect();

    Ok(LogPdfTable {
        times: columns.iter().map(|&j| ensemble.grid[j]).collect(),
        bin_edges,
        log_density,
    })
}
