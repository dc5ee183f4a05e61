//! Daily count series, normalization to the unit day, and empirical
//! moment curves.
//!
//! A day of length `T_N` split into bins of width `dt` with counts `c_k`
//! and total `Y_N` becomes the points `s_k = (k + 1/2) dt / T_N` with
//! values `Z_k = c_k / Y_N`. Empirical curves pool all `(s, Z)` points into
//! equal bins of `(0, 1)`.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BridgeError, Result};
use crate::moments::{MomentCurves, SourceTag};
use crate::simulate::{format_f64, PathEnsemble};

/// Default number of bins for empirical curves.
pub const DEFAULT_GRID_BINS: usize = 100;

/// Counts for one observation day. Bins with no record are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySeries {
    pub day_id: String,
    pub day_length_seconds: f64,
    pub bin_seconds: f64,
    pub counts: Vec<Option<u64>>,
    pub total: u64,
}

impl DaySeries {
    pub fn new(
        day_id: impl Into<String>,
        day_length_seconds: f64,
        bin_seconds: f64,
        counts: Vec<Option<u64>>,
    ) -> Result<Self> {
        let day_id = day_id.into();
        if !(day_length_seconds > 0.0 && day_length_seconds.is_finite()) {
            return Err(BridgeError::Config(format!(
                "day {day_id:?}: length {day_length_seconds} must be positive"
            )));
        }
        if !(bin_seconds > 0.0 && bin_seconds.is_finite()) {
            return Err(BridgeError::Config(format!(
                "day {day_id:?}: bin width {bin_seconds} must be positive"
            )));
        }
        let total = counts.iter().flatten().sum();
        Ok(Self {
            day_id,
            day_length_seconds,
            bin_seconds,
            counts,
            total,
        })
    }

    pub fn n_gaps(&self) -> usize {
        self.counts.iter().filter(|c| c.is_none()).count()
    }
}

fn csv_error(e: csv::Error) -> BridgeError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => BridgeError::Io(io),
        other => BridgeError::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

fn parse_field<T: std::str::FromStr>(field: &str, what: &str, line: u64) -> Result<T> {
    field.trim().parse().map_err(|_| BridgeError::Parse {
        line,
        message: format!("invalid {what} {field:?}"),
    })
}

fn check_header(record: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = record.iter().map(str::trim).collect();
    if got != expected {
        return Err(BridgeError::Parse {
            line: 1,
            message: format!("expected header {}, got {}", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

/// Reads the day table (`day_id,day_length_seconds`), preserving file order.
pub fn read_day_table<R: Read>(reader: R) -> Result<Vec<(String, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    check_header(rdr.headers().map_err(csv_error)?, &["day_id", "day_length_seconds"])?;
    let mut out: Vec<(String, f64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = rec[0].trim().to_string();
        let length: f64 = parse_field(&rec[1], "day_length_seconds", line)?;
        if !(length > 0.0 && length.is_finite()) {
            return Err(BridgeError::Parse {
                line,
                message: format!("day length {length} must be positive"),
            });
        }
        if out.iter().any(|(d, _)| *d == id) {
            return Err(BridgeError::Parse {
                line,
                message: format!("duplicate day_id {id:?}"),
            });
        }
        out.push((id, length));
    }
    Ok(out)
}

struct RawDay {
    rows: Vec<(f64, Option<u64>)>,
}

/// Most frequent positive spacing, keyed at millisecond resolution.
fn modal_spacing(spacings: impl Iterator<Item = f64>) -> Option<f64> {
    let mut freq: HashMap<i64, usize> = HashMap::new();
    for d in spacings {
        *freq.entry((d * 1e3).round() as i64).or_default() += 1;
    }
    freq.into_iter()
        .filter(|(k, _)| *k > 0)
        // most frequent, then smallest spacing on ties
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(k, _)| k as f64 / 1e3)
}

/// Parses the counts file against a day table.
///
/// The bin width of a day is the modal spacing of its `t_seconds`; days
/// with a single row use the modal spacing over all days. `t_seconds` marks
/// the start of a bin. Rows with an empty count and bins with no row are
/// gaps.
pub fn parse_day_counts<R: Read>(counts: R, day_table: &[(String, f64)]) -> Result<Vec<DaySeries>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(counts);
    check_header(rdr.headers().map_err(csv_error)?, &["day_id", "t_seconds", "count"])?;
    let index: HashMap<&str, usize> = day_table
        .iter()
        .enumerate()
        .map(|(i, (d, _))| (d.as_str(), i))
        .collect();
    let mut raw: Vec<Option<RawDay>> = (0..day_table.len()).map(|_| None).collect();

    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = rec[0].trim();
        let &slot = index.get(id).ok_or_else(|| BridgeError::UnknownDay {
            day_id: id.to_string(),
            line,
        })?;
        let t: f64 = parse_field(&rec[1], "t_seconds", line)?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(BridgeError::Parse {
                line,
                message: format!("t_seconds {t} must be finite and >= 0"),
            });
        }
        let field = rec.get(2).unwrap_or("").trim();
        let count = if field.is_empty() {
            None
        } else if field.starts_with('-') {
            return Err(BridgeError::Parse {
                line,
                message: format!("negative count {field}"),
            });
        } else {
            Some(parse_field::<u64>(field, "count", line)?)
        };
        let day = raw[slot].get_or_insert_with(|| RawDay { rows: Vec::new() });
        if day.rows.last().is_some_and(|&(prev, _)| t <= prev) {
            return Err(BridgeError::NonMonotone {
                day_id: id.to_string(),
                line,
            });
        }
        day.rows.push((t, count));
    }

    let spacings = |day: &RawDay| -> Vec<f64> {
        day.rows.windows(2).map(|w| w[1].0 - w[0].0).collect()
    };
    let global_spacing = modal_spacing(raw.iter().flatten().flat_map(spacings));

    let mut out = Vec::new();
    for ((id, length), day) in day_table.iter().zip(raw) {
        let Some(day) = day else { continue };
        let bin = modal_spacing(spacings(&day).into_iter())
            .or(global_spacing)
            .unwrap_or(*length);
        let expected = (length / bin - 1e-9).ceil().max(1.0) as usize;
        let last = day
            .rows
            .iter()
            .map(|&(t, _)| (t / bin).round() as usize)
            .max()
            .unwrap_or(0);
        let mut counts = vec![None; expected.max(last + 1)];
        for &(t, c) in &day.rows {
            counts[(t / bin).round() as usize] = c;
        }
        out.push(DaySeries::new(id.clone(), *length, bin, counts)?);
    }
    Ok(out)
}

/// Loads `day_id,t_seconds,count` counts and the `day_id,day_length_seconds`
/// table; one series per day present in both.
pub fn load_day_counts(counts_file: &Path, day_table_file: &Path) -> Result<Vec<DaySeries>> {
    let table = read_day_table(std::fs::File::open(day_table_file)?)?;
    parse_day_counts(std::fs::File::open(counts_file)?, &table)
}

/// One day on the unit interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedDay {
    pub day_id: String,
    pub s: Vec<f64>,
    pub z: Vec<f64>,
}

impl NormalizedDay {
    pub fn sum(&self) -> f64 {
        self.z.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedEnsemble {
    pub days: Vec<NormalizedDay>,
    pub excluded_days: Vec<String>,
}

impl NormalizedEnsemble {
    /// Treats each simulated path as one normalized day observed at the
    /// midpoints `(k + 1/2) / n_bins`.
    ///
    /// Path values are already on the normalized scale, so they are used
    /// as `Z` directly and do not sum to one; all-zero paths are excluded
    /// like zero-total days.
    pub fn from_ensemble(ensemble: &PathEnsemble, n_bins: usize) -> Result<Self> {
        Self::from_paths(&ensemble.grid, &ensemble.values, n_bins)
    }

    /// Same as [`Self::from_ensemble`] for raw row-major path values on
    /// `grid`, whose last point is taken as the horizon.
    pub fn from_paths(grid: &[f64], values: &[f64], n_bins: usize) -> Result<Self> {
        if n_bins == 0 {
            return Err(BridgeError::Config("n_bins must be positive".into()));
        }
        let n_cols = grid.len();
        if n_cols < 2 || !values.len().is_multiple_of(n_cols) {
            return Err(BridgeError::Config(format!(
                "{} values do not fill rows of {n_cols} grid points",
                values.len()
            )));
        }
        let horizon = grid[n_cols - 1];
        let tol = 1e-9 * horizon;
        let s: Vec<f64> = (0..n_bins).map(|k| (k as f64 + 0.5) / n_bins as f64).collect();
        let cols = s
            .iter()
            .map(|&v| {
                grid.iter()
                    .position(|&g| (g - v * horizon).abs() <= tol)
                    .ok_or(BridgeError::TimeNotOnGrid(v * horizon))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut days = Vec::new();
        let mut excluded_days = Vec::new();
        for (i, path) in values.chunks_exact(n_cols).enumerate() {
            let day_id = format!("path{i:06}");
            let z: Vec<f64> = cols.iter().map(|&j| path[j]).collect();
            if z.iter().all(|&v| v == 0.0) {
                excluded_days.push(day_id);
            } else {
                days.push(NormalizedDay {
                    day_id,
                    s: s.clone(),
                    z,
                });
            }
        }
        Ok(Self {
            days,
            excluded_days,
        })
    }
}

/// Drops zero-total days and rescales the rest to unit sum.
pub fn normalize_days(days: &[DaySeries]) -> NormalizedEnsemble {
    let mut out = Vec::new();
    let mut excluded_days = Vec::new();
    for day in days {
        if day.total == 0 {
            excluded_days.push(day.day_id.clone());
            continue;
        }
        let y = day.total as f64;
        let (s, z) = day
            .counts
            .iter()
            .enumerate()
            .filter_map(|(k, c)| {
                c.map(|c| {
                    let s = ((k as f64 + 0.5) * day.bin_seconds / day.day_length_seconds).min(1.0);
                    (s, c as f64 / y)
                })
            })
            .unzip();
        out.push(NormalizedDay {
            day_id: day.day_id.clone(),
            s,
            z,
        });
    }
    NormalizedEnsemble {
        days: out,
        excluded_days,
    }
}

/// Pools normalized observations into `n_grid_bins` equal bins of `(0, 1)`;
/// per bin the mean and unbiased std over all assigned observations. The
/// curve grid is the bin centers.
pub fn empirical_curves(normalized: &NormalizedEnsemble, n_grid_bins: usize) -> Result<MomentCurves> {
    if normalized.days.len() < 2 {
        return Err(BridgeError::TooFewDays(normalized.days.len()));
    }
    if n_grid_bins < 10 {
        return Err(BridgeError::Config(format!(
            "n_grid_bins = {n_grid_bins}, need at least 10"
        )));
    }
    let nb = n_grid_bins as f64;
    let mut n = vec![0_usize; n_grid_bins];
    let mut sum = vec![0.0; n_grid_bins];
    for day in &normalized.days {
        for (&s, &z) in day.s.iter().zip(&day.z) {
            let k = ((s * nb) as usize).min(n_grid_bins - 1);
            n[k] += 1;
            sum[k] += z;
        }
    }
    let mean: Vec<Option<f64>> = n
        .iter()
        .zip(&sum)
        .map(|(&n, &s)| (n > 0).then(|| s / n as f64))
        .collect();
    let mut ss = vec![0.0; n_grid_bins];
    for day in &normalized.days {
        for (&s, &z) in day.s.iter().zip(&day.z) {
            let k = ((s * nb) as usize).min(n_grid_bins - 1);
            let d = z - mean[k].unwrap_or(0.0);
            ss[k] += d * d;
        }
    }
    let std = n
        .iter()
        .zip(&ss)
        .map(|(&n, &ss)| (n > 1).then(|| (ss / (n - 1) as f64).sqrt()))
        .collect();
    let grid = (0..n_grid_bins).map(|k| (k as f64 + 0.5) / nb).collect();
    MomentCurves::new(grid, mean, Some(std), SourceTag::Empirical)?.with_counts(n)
}

/// Writes curves as `s,mean,std,n_obs`; absent values are empty fields.
pub fn write_curves_csv<W: Write>(curves: &MomentCurves, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["s", "mean", "std", "n_obs"]).map_err(csv_error)?;
    let opt = |v: Option<f64>| v.map(format_f64).unwrap_or_default();
    for i in 0..curves.len() {
        let n_obs = curves
            .n_obs
            .as_ref()
            .map(|n| n[i].to_string())
            .unwrap_or_default();
        w.write_record([
            format_f64(curves.grid[i]),
            opt(curves.mean_at(i)),
            opt(curves.std_at(i)),
            n_obs,
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `s,mean,std,n_obs` curves file (std and n_obs may be empty).
pub fn read_curves_csv<R: Read>(reader: R) -> Result<MomentCurves> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    check_header(rdr.headers().map_err(csv_error)?, &["s", "mean", "std", "n_obs"])?;
    let (mut grid, mut mean, mut std, mut n_obs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut all_counts = true;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        let opt = |i: usize, what: &str| -> Result<Option<f64>> {
            let f = rec.get(i).unwrap_or("").trim();
            if f.is_empty() {
                Ok(None)
            } else {
                parse_field(f, what, line).map(Some)
            }
        };
        grid.push(parse_field(&rec[0], "s", line)?);
        mean.push(opt(1, "mean")?);
        std.push(opt(2, "std")?);
        match rec.get(3).map(str::trim).filter(|f| !f.is_empty()) {
            Some(f) => n_obs.push(parse_field(f, "n_obs", line)?),
            None => all_counts = false,
        }
    }
    let std = std.iter().any(Option::is_some).then_some(std);
    let curves = MomentCurves::new(grid, mean, std, SourceTag::Empirical)?;
    if all_counts && !n_obs.is_empty() {
        curves.with_counts(n_obs)
    } else {
        Ok(curves)
    }
}

/// Integer counts synthesized from simulated paths.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCounts {
    pub day_ids: Vec<String>,
    /// `counts[d][k]` for day `d` and bin `k`.
    pub counts: Vec<Vec<u64>>,
    pub bin_seconds: f64,
    pub day_length_seconds: f64,
}

impl SyntheticCounts {
    /// Day `i` is path `i` sampled at the midpoints `(k + 1/2) / n_bins`,
    /// with counts `round(scale * X)`.
    pub fn from_ensemble(
        ensemble: &PathEnsemble,
        n_bins: usize,
        scale: f64,
        bin_seconds: f64,
    ) -> Result<Self> {
        Self::from_paths(&ensemble.grid, &ensemble.values, n_bins, scale, bin_seconds)
    }

    pub fn from_paths(
        grid: &[f64],
        values: &[f64],
        n_bins: usize,
        scale: f64,
        bin_seconds: f64,
    ) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(BridgeError::Config(format!("scale {scale} must be positive")));
        }
        if !(bin_seconds > 0.0 && bin_seconds.is_finite()) {
            return Err(BridgeError::Config(format!("bin width {bin_seconds} must be positive")));
        }
        let sampled = NormalizedEnsemble::from_paths(grid, values, n_bins)?;
        let n_paths = values.len() / grid.len();
        let mut by_id: HashMap<&str, &NormalizedDay> =
            sampled.days.iter().map(|d| (d.day_id.as_str(), d)).collect();
        let day_ids: Vec<String> = (0..n_paths).map(|i| format!("path{i:06}")).collect();
        let counts = day_ids
            .iter()
            .map(|id| match by_id.remove(id.as_str()) {
                Some(day) => day.z.iter().map(|&z| (z * scale).round() as u64).collect(),
                None => vec![0; n_bins],
            })
            .collect();
        Ok(Self {
            day_ids,
            counts,
            bin_seconds,
            day_length_seconds: bin_seconds * n_bins as f64,
        })
    }

    pub fn totals(&self) -> Vec<u64> {
        self.counts.iter().map(|c| c.iter().sum()).collect()
    }

    pub fn write<W1: Write, W2: Write>(&self, counts: W1, day_table: W2) -> Result<()> {
        let mut w = csv::Writer::from_writer(counts);
        w.write_record(["day_id", "t_seconds", "count"]).map_err(csv_error)?;
        for (id, row) in self.day_ids.iter().zip(&self.counts) {
            for (k, c) in row.iter().enumerate() {
                let t = k as f64 * self.bin_seconds;
                w.write_record([id.as_str(), &t.to_string(), &c.to_string()])
                    .map_err(csv_error)?;
            }
        }
        w.flush()?;
        let mut w = csv::Writer::from_writer(day_table);
        w.write_record(["day_id", "day_length_seconds"]).map_err(csv_error)?;
        for id in &self.day_ids {
            w.write_record([id.as_str(), &self.day_length_seconds.to_string()])
                .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}
