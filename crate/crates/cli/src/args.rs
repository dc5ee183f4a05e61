use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "mvbridge",
    version,
    about = "Moments, simulation and calibration of a pinned mean-field CIR bridge",
    after_help = "Options may also come from a key = value file given with --config \
                  (flags win over the file). MVBRIDGE_THREADS sets the default worker count."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Well-posedness check and Feller regime; exit 2 if the assumption fails
    Check {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Closed-form and ODE mean / variance on a uniform grid
    Moments {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Number of grid points on [0, T] [default: 1001]
        #[arg(long)]
        grid_points: Option<usize>,
    },
    /// Monte Carlo ensemble and its moment curves
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Ensemble built as a sum of independent sub-bridges
    Superpose {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Number of sub-bridges [default: 2]
        #[arg(long)]
        components: Option<usize>,
        /// Comma-separated source weights summing to 1 [default: uniform]
        #[arg(long)]
        weights: Option<String>,
    },
    /// Histogram log-density of X_t at selected times
    Pdf {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated recorded times [default: 0.1,0.3,0.5,0.7,0.9]
        #[arg(long)]
        times: Option<String>,
        /// Number of histogram bins [default: 50]
        #[arg(long)]
        pdf_bins: Option<usize>,
    },
    /// Normalize daily counts, or convert a simulated ensemble into days
    Normalize {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        input: DataArgs,
        /// Ensemble file from `simulate --write-paths` (.csv or .bin)
        #[arg(long, conflicts_with_all = ["counts", "days"])]
        ensemble: Option<String>,
        /// Observation bins per synthetic day [default: 60]
        #[arg(long)]
        bins: Option<usize>,
        /// Also write integer counts round(scale * X) with this scale
        #[arg(long)]
        scale: Option<f64>,
        /// Bin width in seconds for synthetic counts [default: 600]
        #[arg(long)]
        bin_seconds: Option<f64>,
    },
    /// Two-step least-squares calibration
    Fit {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        input: DataArgs,
        /// Empirical curves CSV (s,mean,std,n_obs)
        #[arg(long, conflicts_with_all = ["counts", "days"])]
        curves: Option<String>,
        /// Fix omega = 0
        #[arg(long)]
        freeze_omega_zero: bool,
        /// Fix alpha to this value
        #[arg(long, allow_negative_numbers = true)]
        pin_alpha: Option<f64>,
        /// Alpha starting values for the std fit [default: 8]
        #[arg(long)]
        restarts: Option<usize>,
        /// Lower end of the reversion scan [default: 0.05]
        #[arg(long)]
        r_min: Option<f64>,
        /// Upper end of the reversion scan [default: 5]
        #[arg(long)]
        r_max: Option<f64>,
        /// Points in the reversion scan [default: 200]
        #[arg(long)]
        r_points: Option<usize>,
    },
    /// Theoretical vs Monte Carlo std near the terminal time for several alpha
    Blowup {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated alpha values [default: 0.5482,1,1.5,2]
        #[arg(long)]
        alphas: Option<String>,
        /// Comparison window lo,hi [default: 0.9,1]
        #[arg(long)]
        tail: Option<String>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Check { .. } => "check",
            Self::Moments { .. } => "moments",
            Self::Simulate { .. } => "simulate",
            Self::Superpose { .. } => "superpose",
            Self::Pdf { .. } => "pdf",
            Self::Normalize { .. } => "normalize",
            Self::Fit { .. } => "fit",
            Self::Blowup { .. } => "blowup",
        }
    }

    pub fn common(&self) -> &CommonArgs {
        match self {
            Self::Check { common, .. }
            | Self::Moments { common, .. }
            | Self::Simulate { common, .. }
            | Self::Superpose { common, .. }
            | Self::Pdf { common, .. }
            | Self::Normalize { common, .. }
            | Self::Fit { common, .. }
            | Self::Blowup { common, .. } => common,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Source rate
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    /// Reversion rate
    #[arg(long, allow_negative_numbers = true)]
    pub r: Option<f64>,
    /// Constant volatility part
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Mean-field volatility coefficient
    #[arg(long, allow_negative_numbers = true)]
    pub omega: Option<f64>,
    /// Singularity exponent
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Horizon T [default: 1]
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct SimArgs {
    /// Time steps [default: 50000]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Paths [default: 10000]
    #[arg(long)]
    pub paths: Option<usize>,
    /// Master seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// frozen-exact or truncated-euler [default: frozen-exact]
    #[arg(long)]
    pub scheme: Option<String>,
    /// Record every k-th step [default: 50]
    #[arg(long)]
    pub stride: Option<usize>,
    /// Also write the paths: none, csv or binary [default: none]
    #[arg(long)]
    pub write_paths: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Counts CSV (day_id,t_seconds,count)
    #[arg(long, requires = "days")]
    pub counts: Option<String>,
    /// Day table CSV (day_id,day_length_seconds)
    #[arg(long, requires = "counts")]
    pub days: Option<String>,
    /// Bins of (0, 1) for the empirical curves [default: 100]
    #[arg(long)]
    pub grid_bins: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// key = value option file (or a previous manifest.json)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory [default: out]
    #[arg(long)]
    pub out_dir: Option<String>,
    /// Worker threads [default: $MVBRIDGE_THREADS, else all cores]
    #[arg(long)]
    pub threads: Option<usize>,
}
