use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use mvbridge::data::{read_curves_csv, write_curves_csv, SyntheticCounts, DEFAULT_GRID_BINS};
use mvbridge::simulate::{
    column_statistics, format_f64, read_binary, read_csv, write_binary, write_csv, EnsembleDump,
};
use mvbridge::*;
use serde_json::json;

use crate::args::{DataArgs, ModelArgs, SimArgs};
use crate::error::{CliError, CliResult};
use crate::manifest::Run;
use crate::settings::{parse_list, Settings};

/// What a command reports back besides its files.
pub struct Outcome {
    pub master_seed: Option<u64>,
    pub assumption_violated: bool,
}

impl Outcome {
    fn seeded(seed: u64) -> Self {
        Self {
            master_seed: Some(seed),
            assumption_violated: false,
        }
    }

    fn plain() -> Self {
        Self {
            master_seed: None,
            assumption_violated: false,
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

fn model(settings: &mut Settings, args: &ModelArgs) -> CliResult<BridgeModel> {
    let a = settings.required("a", args.a)?;
    let r = settings.required("r", args.r)?;
    let mu = settings.required("mu", args.mu)?;
    let omega = settings.required("omega", args.omega)?;
    let alpha = settings.required("alpha", args.alpha)?;
    let horizon = settings.value("horizon", args.horizon, 1.0)?;
    Ok(BridgeModel::with_horizon(a, r, mu, omega, alpha, horizon)?)
}

fn sim_config(settings: &mut Settings, args: &SimArgs) -> CliResult<SimConfig> {
    let scheme: String = settings.value("scheme", args.scheme.clone(), "frozen-exact".into())?;
    let config = SimConfig {
        n_steps: settings.value("steps", args.steps, 50_000)?,
        n_paths: settings.value("paths", args.paths, 10_000)?,
        master_seed: settings.value("seed", args.seed, 0)?,
        scheme: scheme.parse()?,
        record_stride: settings.value("stride", args.stride, 50)?,
    };
    config.validate()?;
    Ok(config)
}

fn model_json(m: &BridgeModel) -> serde_json::Value {
    json!({
        "a": m.a(), "r": m.r(), "mu": m.mu(), "omega": m.omega(),
        "alpha": m.alpha(), "horizon": m.horizon(),
    })
}

pub fn check(settings: &mut Settings, run: &mut Run, args: &ModelArgs) -> CliResult<Outcome> {
    let m = model(settings, args)?;
    let report = check_assumption1_default(&m)?;
    // the Feller index needs a defined volatility, which a failed check may not give
    let feller = match classify_feller_default(&m) {
        Ok(p) => json!({
            "violated_everywhere": p.violated_everywhere,
            "satisfied_fraction": p.satisfied_fraction(),
            "satisfied_intervals": p.satisfied_intervals,
        }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let out = json!({ "model": model_json(&m), "assumption": report, "feller": feller });
    let text = serde_json::to_string_pretty(&out)? + "\n";
    print!("{text}");
    run.create("check.json")?.write_all(text.as_bytes())?;
    Ok(Outcome {
        master_seed: None,
        assumption_violated: !report.overall,
    })
}

pub fn moments(
    settings: &mut Settings,
    run: &mut Run,
    args: &ModelArgs,
    grid_points: Option<usize>,
) -> CliResult<Outcome> {
    let m = model(settings, args)?;
    let n = settings.value("grid-points", grid_points, 1001)?;
    if n < 2 {
        return Err(CliError::Usage("--grid-points must be >= 2".into()));
    }
    let grid = uniform_grid(0.0, m.horizon(), n);
    // the ODE runs on a log clock that ends just before T
    let interior: Vec<f64> = grid.iter().copied().filter(|&t| t < m.horizon()).collect();
    let ode = solve_moment_odes(&m, &interior)?;
    let ode_std = ode.std.clone().unwrap_or_default();
    let mut w = csv::Writer::from_writer(run.create("moments.csv")?);
    w.write_record(["t", "mean", "variance", "std", "mean_ode", "std_ode"])?;
    for (i, &t) in grid.iter().enumerate() {
        let v = variance_closed(t, &m);
        w.write_record([
            format_f64(t),
            format_f64(mean_closed(t, &m)),
            format_f64(v),
            format_f64(v.sqrt()),
            opt(ode.mean.get(i).copied().flatten()),
            opt(ode_std.get(i).copied().flatten()),
        ])?;
    }
    w.flush()?;
    Ok(Outcome::plain())
}

fn write_ensemble(
    settings: &mut Settings,
    run: &mut Run,
    args: &SimArgs,
    ensemble: &PathEnsemble,
) -> CliResult<()> {
    let stats = column_statistics(ensemble)?;
    let m = &ensemble.model;
    let mut w = csv::Writer::from_writer(run.create("moments.csv")?);
    w.write_record(["t", "mean", "std", "se_mean", "se_std", "mean_closed", "std_closed"])?;
    for s in &stats {
        w.write_record([
            format_f64(s.t),
            format_f64(s.mean),
            format_f64(s.std),
            format_f64(s.se_mean),
            format_f64(s.se_std),
            format_f64(mean_closed(s.t, m)),
            format_f64(std_closed(s.t, m)),
        ])?;
    }
    w.flush()?;
    drop(w);
    let mode: String = settings.value("write-paths", args.write_paths.clone(), "none".into())?;
    match mode.as_str() {
        "none" => {}
        "csv" => write_csv(ensemble, run.create("paths.csv")?)?,
        "binary" => write_binary(ensemble, run.create("paths.bin")?)?,
        other => {
            return Err(CliError::Usage(format!(
                "--write-paths {other:?}: expected none, csv or binary"
            )))
        }
    }
    Ok(())
}

pub fn simulate(
    settings: &mut Settings,
    run: &mut Run,
    model_args: &ModelArgs,
    args: &SimArgs,
) -> CliResult<Outcome> {
    let m = model(settings, model_args)?;
    let config = sim_config(settings, args)?;
    let ensemble = simulate_ensemble(&m, &config)?;
    write_ensemble(settings, run, args, &ensemble)?;
    Ok(Outcome::seeded(config.master_seed))
}

pub fn superpose(
    settings: &mut Settings,
    run: &mut Run,
    model_args: &ModelArgs,
    args: &SimArgs,
    components: Option<usize>,
    weights: Option<String>,
) -> CliResult<Outcome> {
    let m = model(settings, model_args)?;
    let config = sim_config(settings, args)?;
    let n = settings.value("components", components, 2)?;
    let weights = match settings.optional("weights", weights)? {
        Some(text) => Some(parse_list::<f64>("weights", &text)?),
        None => None,
    };
    let ensemble = simulate_superposition(&m, n, weights.as_deref(), &config)?;
    write_ensemble(settings, run, args, &ensemble)?;
    Ok(Outcome::seeded(config.master_seed))
}

pub fn pdf(
    settings: &mut Settings,
    run: &mut Run,
    model_args: &ModelArgs,
    args: &SimArgs,
    times: Option<String>,
    pdf_bins: Option<usize>,
) -> CliResult<Outcome> {
    let m = model(settings, model_args)?;
    let config = sim_config(settings, args)?;
    let times: String = settings.value("times", times, "0.1,0.3,0.5,0.7,0.9".into())?;
    let times = parse_list::<f64>("times", &times)?;
    let n_bins = settings.value("pdf-bins", pdf_bins, 50)?;
    let ensemble = simulate_ensemble(&m, &config)?;
    let table = estimate_log_pdf(&ensemble, &times, n_bins)?;
    let mut w = csv::Writer::from_writer(run.create("pdf.csv")?);
    w.write_record(["t", "bin_lower", "bin_upper", "log_density"])?;
    for (t, row) in table.times.iter().zip(&table.log_density) {
        for (k, d) in row.iter().enumerate() {
            w.write_record([
                format_f64(*t),
                format_f64(table.bin_edges[k]),
                format_f64(table.bin_edges[k + 1]),
                opt(*d),
            ])?;
        }
    }
    w.flush()?;
    Ok(Outcome::seeded(config.master_seed))
}

fn open(run: &mut Run, path: &str) -> CliResult<BufReader<File>> {
    let file = File::open(path).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
    run.input(Path::new(path));
    Ok(BufReader::new(file))
}

fn load_dump(run: &mut Run, path: &str) -> CliResult<EnsembleDump> {
    let reader = open(run, path)?;
    Ok(if path.ends_with(".bin") {
        read_binary(reader)?
    } else {
        read_csv(reader)?
    })
}

fn write_normalized(run: &mut Run, normalized: &NormalizedEnsemble) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(run.create("normalized.csv")?);
    w.write_record(["day_id", "s", "z"])?;
    for day in &normalized.days {
        for (s, z) in day.s.iter().zip(&day.z) {
            w.write_record([day.day_id.clone(), format_f64(*s), format_f64(*z)])?;
        }
    }
    w.flush()?;
    let mut w = csv::Writer::from_writer(run.create("excluded.csv")?);
    w.write_record(["day_id"])?;
    for id in &normalized.excluded_days {
        w.write_record([id])?;
    }
    w.flush()?;
    Ok(())
}

fn load_days(settings: &mut Settings, run: &mut Run, input: &DataArgs) -> CliResult<Option<NormalizedEnsemble>> {
    let counts: Option<String> = settings.optional("counts", input.counts.clone())?;
    let days: Option<String> = settings.optional("days", input.days.clone())?;
    match (counts, days) {
        (Some(c), Some(d)) => {
            let series = data::parse_day_counts(open(run, &c)?, &data::read_day_table(open(run, &d)?)?)?;
            Ok(Some(normalize_days(&series)))
        }
        (None, None) => Ok(None),
        _ => Err(CliError::Usage("--counts and --days go together".into())),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn normalize(
    settings: &mut Settings,
    run: &mut Run,
    input: &DataArgs,
    ensemble: Option<String>,
    bins: Option<usize>,
    scale: Option<f64>,
    bin_seconds: Option<f64>,
) -> CliResult<Outcome> {
    let from_counts = load_days(settings, run, input)?;
    let ensemble: Option<String> = settings.optional("ensemble", ensemble)?;
    let normalized = match (from_counts, ensemble) {
        (Some(n), None) => n,
        (None, Some(path)) => {
            let dump = load_dump(run, &path)?;
            let n_bins = settings.value("bins", bins, 60)?;
            if let Some(scale) = settings.optional("scale", scale)? {
                let width = settings.value("bin-seconds", bin_seconds, 600.0)?;
                let synthetic = SyntheticCounts::from_paths(&dump.grid, &dump.values, n_bins, scale, width)?;
                synthetic.write(run.create("counts.csv")?, run.create("days.csv")?)?;
            }
            NormalizedEnsemble::from_paths(&dump.grid, &dump.values, n_bins)?
        }
        _ => {
            return Err(CliError::Usage(
                "give either --counts with --days, or --ensemble".into(),
            ))
        }
    };
    write_normalized(run, &normalized)?;
    let grid_bins = settings.value("grid-bins", input.grid_bins, DEFAULT_GRID_BINS)?;
    if normalized.days.len() >= 2 {
        let curves = empirical_curves(&normalized, grid_bins)?;
        write_curves_csv(&curves, run.create("curves.csv")?)?;
    }
    println!(
        "{}",
        json!({ "retained_days": normalized.days.len(), "excluded_days": normalized.excluded_days })
    );
    Ok(Outcome::plain())
}

pub struct FitOptions {
    pub curves: Option<String>,
    pub freeze_omega_zero: bool,
    pub pin_alpha: Option<f64>,
    pub restarts: Option<usize>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub r_points: Option<usize>,
}

pub fn fit(settings: &mut Settings, run: &mut Run, input: &DataArgs, o: FitOptions) -> CliResult<Outcome> {
    let defaults = FitConfig::default();
    let config = FitConfig {
        r_search: (
            settings.value("r-min", o.r_min, defaults.r_search.0)?,
            settings.value("r-max", o.r_max, defaults.r_search.1)?,
            settings.value("r-points", o.r_points, defaults.r_search.2)?,
        ),
        restarts: settings.value("restarts", o.restarts, defaults.restarts)?,
        freeze_omega_zero: settings.switch("freeze-omega-zero", o.freeze_omega_zero)?,
        pin_alpha: settings.optional("pin-alpha", o.pin_alpha)?,
        ..defaults
    };
    config.validate()?;
    let from_counts = load_days(settings, run, input)?;
    let curves_path: Option<String> = settings.optional("curves", o.curves)?;
    let curves = match (from_counts, curves_path) {
        (Some(n), None) => {
            let grid_bins = settings.value("grid-bins", input.grid_bins, DEFAULT_GRID_BINS)?;
            empirical_curves(&n, grid_bins)?
        }
        (None, Some(path)) => read_curves_csv(open(run, &path)?)?,
        _ => {
            return Err(CliError::Usage(
                "give either --curves, or --counts with --days".into(),
            ))
        }
    };
    let result = calibrate(&curves, &config)?;
    let text = result.to_json()? + "\n";
    print!("{text}");
    run.create("fit.json")?.write_all(text.as_bytes())?;
    let theory = MomentCurves::closed_form(&result.model, &curves.grid)?;
    let empirical_std = curves.std.clone().unwrap_or_else(|| vec![None; curves.len()]);
    let theory_std = theory.std.clone().unwrap_or_default();
    let mut w = csv::Writer::from_writer(run.create("fitted.csv")?);
    w.write_record(["s", "mean_empirical", "std_empirical", "mean_model", "std_model"])?;
    for i in 0..curves.len() {
        w.write_record([
            format_f64(curves.grid[i]),
            opt(curves.mean[i]),
            opt(empirical_std[i]),
            opt(theory.mean[i]),
            opt(theory_std[i]),
        ])?;
    }
    w.flush()?;
    Ok(Outcome::plain())
}

pub fn blowup(
    settings: &mut Settings,
    run: &mut Run,
    model_args: &ModelArgs,
    args: &SimArgs,
    alphas: Option<String>,
    tail: Option<String>,
) -> CliResult<Outcome> {
    let base = model(settings, model_args)?;
    let config = sim_config(settings, args)?;
    let alphas: String = settings.value("alphas", alphas, "0.5482,1,1.5,2".into())?;
    let alphas = parse_list::<f64>("alphas", &alphas)?;
    let tail: String = settings.value("tail", tail, "0.9,1".into())?;
    let (lo, hi) = match parse_list::<f64>("tail", &tail)?.as_slice() {
        &[lo, hi] if lo < hi => (lo, hi),
        _ => return Err(CliError::Usage("--tail needs lo,hi with lo < hi".into())),
    };
    let mut w = csv::Writer::from_writer(run.create("blowup.csv")?);
    w.write_record(["alpha", "assumption_ok", "t", "std_closed", "std_mc", "se_std"])?;
    for &alpha in &alphas {
        let m = base.with_alpha(alpha)?;
        let ok = m.alpha() < m.alpha_bound();
        let ensemble = simulate_ensemble(&m, &config)?;
        for s in column_statistics(&ensemble)? {
            let u = s.t / m.horizon();
            if u < lo || u > hi {
                continue;
            }
            w.write_record([
                format_f64(alpha),
                ok.to_string(),
                format_f64(s.t),
                format_f64(std_closed(s.t, &m)),
                format_f64(s.std),
                format_f64(s.se_std),
            ])?;
        }
    }
    w.flush()?;
    Ok(Outcome::seeded(config.master_seed))
}
