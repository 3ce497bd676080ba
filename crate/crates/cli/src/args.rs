use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Live classroom reaction evaluation.
///
/// Every flag can also be set through an environment variable named after
/// it, e.g. `CLASSPULSE_TICK_MS=500`. Flags win over the environment, which
/// wins over the configuration file.
#[derive(Debug, Parser)]
#[command(name = "classpulse", version, propagate_version = true)]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "CLASSPULSE_CONFIG", value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Random seed for simulations.
    #[arg(long, global = true, env = "CLASSPULSE_SEED")]
    pub seed: Option<u64>,

    /// Diagnostic verbosity, or any tracing filter directive.
    #[arg(long, global = true, env = "CLASSPULSE_LOG_LEVEL", default_value = "info")]
    pub log_level: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the classroom session server.
    Serve(ServeArgs),
    /// Run the Monte Carlo sweep and write its CSV.
    Simulate(SimulateArgs),
    /// Play a client trace against a running server.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listening port; 0 picks a free one.
    #[arg(long, env = "CLASSPULSE_PORT", default_value_t = 8080)]
    pub port: u16,

    /// Evaluation period in milliseconds [default: 1000].
    #[arg(long, env = "CLASSPULSE_TICK_MS")]
    pub tick_ms: Option<u64>,

    /// Directory for per-classroom event logs.
    #[arg(long, env = "CLASSPULSE_LOG_DIR", value_name = "PATH")]
    pub log_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightingArg {
    Weighted,
    Uniform,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Cohort size [default: 30].
    #[arg(long, env = "CLASSPULSE_STUDENTS")]
    pub students: Option<usize>,

    /// Trials per sweep case [default: 1000].
    #[arg(long, env = "CLASSPULSE_TRIALS")]
    pub trials: Option<usize>,

    /// Distance between sweep targets [default: 0.1].
    #[arg(long, env = "CLASSPULSE_STEP")]
    pub step: Option<f64>,

    /// [default: weighted]
    #[arg(long, value_enum, env = "CLASSPULSE_WEIGHTING")]
    pub weighting: Option<WeightingArg>,

    /// Output CSV path.
    #[arg(long, env = "CLASSPULSE_OUT", value_name = "PATH", default_value = "sweep.csv")]
    pub out: PathBuf,

    /// Confusion table path, or `default` for the built-in model.
    #[arg(long, env = "CLASSPULSE_CONFUSION", value_name = "PATH|default")]
    pub confusion: Option<String>,

    /// Draw one cohort for the whole sweep instead of one per trial.
    #[arg(long, env = "CLASSPULSE_FIXED_COHORT")]
    pub fixed_cohort: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// JSON Lines trace of client messages.
    #[arg(long, env = "CLASSPULSE_TRACE", value_name = "PATH")]
    pub trace: PathBuf,

    /// Server address.
    #[arg(long, env = "CLASSPULSE_TARGET", value_name = "HOST:PORT", default_value = "127.0.0.1:8080")]
    pub target: String,

    /// Classroom id or name to join, overriding the trace.
    #[arg(long, env = "CLASSPULSE_CLASSROOM")]
    pub classroom: Option<String>,

    /// Playback speed factor.
    #[arg(long, env = "CLASSPULSE_SPEED", default_value_t = 1.0)]
    pub speed: f64,
}
