mod args;
mod commands;
mod error;
mod manifest;
mod settings;

use std::process::ExitCode;

use clap::{CommandFactory, Parser};

use args::{Cli, Command};
use commands::FitOptions;
use error::{CliError, CliResult};
use manifest::Run;
use settings::Settings;

const THREADS_ENV: &str = "MVBRIDGE_THREADS";

fn threads(settings: &mut Settings, flag: Option<usize>) -> CliResult<Option<usize>> {
    if let Some(n) = settings.optional("threads", flag)? {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|e| CliError::Usage(format!("{THREADS_ENV}={v:?}: {e}"))),
        Err(_) => Ok(None),
    }
}

fn execute(command: Command) -> CliResult<ExitCode> {
    let name = command.name();
    let common = command.common().clone();
    let mut settings = Settings::load(common.config.as_deref())?;
    let out_dir: String = settings.value("out-dir", common.out_dir, "out".into())?;
    if let Some(n) = threads(&mut settings, common.threads)? {
        if n == 0 {
            return Err(CliError::Usage("thread count must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let mut run = Run::new(out_dir.into());
    let s = &mut settings;
    let r = &mut run;
    let outcome = match command {
        Command::Check { model, .. } => commands::check(s, r, &model)?,
        Command::Moments {
            model, grid_points, ..
        } => commands::moments(s, r, &model, grid_points)?,
        Command::Simulate { model, sim, .. } => commands::simulate(s, r, &model, &sim)?,
        Command::Superpose {
            model,
            sim,
            components,
            weights,
            ..
        } => commands::superpose(s, r, &model, &sim, components, weights)?,
        Command::Pdf {
            model,
            sim,
            times,
            pdf_bins,
            ..
        } => commands::pdf(s, r, &model, &sim, times, pdf_bins)?,
        Command::Normalize {
            input,
            ensemble,
            bins,
            scale,
            bin_seconds,
            ..
        } => commands::normalize(s, r, &input, ensemble, bins, scale, bin_seconds)?,
        Command::Fit {
            input,
            curves,
            freeze_omega_zero,
            pin_alpha,
            restarts,
            r_min,
            r_max,
            r_points,
            ..
        } => commands::fit(
            s,
            r,
            &input,
            FitOptions {
                curves,
                freeze_omega_zero,
                pin_alpha,
                restarts,
                r_min,
                r_max,
                r_points,
            },
        )?,
        Command::Blowup {
            model,
            sim,
            alphas,
            tail,
            ..
        } => commands::blowup(s, r, &model, &sim, alphas, tail)?,
    };
    for key in settings.unused_keys() {
        eprintln!("warning: config key {key:?} is not used by {name}");
    }
    let config = settings.resolved().clone();
    run.finish(name, config, outcome.master_seed)?;
    Ok(if outcome.assumption_violated {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let name = cli.command.name();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                let mut cmd = Cli::command();
                cmd.build();
                if let Some(sub) = cmd.find_subcommand_mut(name) {
                    eprintln!("\n{}", sub.render_usage());
                }
            }
            e.exit_code()
        }
    }
}
