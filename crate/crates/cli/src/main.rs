mod args;

use std::fs::File;
use std::io::{BufWriter, IsTerminal};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::Parser;
use classpulse_core::config::Config;
use classpulse_core::simulation::{run_sweep, write_csv, CohortSpec};
use classpulse_core::{default_confusion_model, ConfusionModel, Weighting};
use classpulse_service::client::{load_trace, replay, trace_duration, ReplayOptions};
use classpulse_service::{serve, ServerSettings};
use tracing_subscriber::EnvFilter;

use args::{Cli, Command, ReplayArgs, ServeArgs, SimulateArgs, WeightingArg};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = EnvFilter::try_new(&cli.log_level).unwrap_or_else(|_| EnvFilter::new("info"));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Serve(a) => run_serve(a, config),
        Command::Simulate(a) => run_simulate(a, config, cli.seed),
        Command::Replay(a) => run_replay(a),
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().context("starting async runtime")
}

async fn interrupted() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

fn run_serve(a: ServeArgs, mut config: Config) -> Result<()> {
    if let Some(tick) = a.tick_ms {
        config.server.tick_ms = tick;
    }
    config.validate()?;
    let mut settings = ServerSettings::from_config(&config);
    settings.log_dir = a.log_dir;
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", a.port))
            .await
            .with_context(|| format!("cannot bind port {}", a.port))?;
        let addr = listener.local_addr()?;
        println!("classpulse listening on {addr} (ws://{addr}/ws, health at http://{addr}/health)");
        serve(listener, settings, async {
            interrupted().await;
            tracing::info!("shutting down");
        })
        .await
        .context("server failed")
    })
}

fn run_simulate(a: SimulateArgs, config: Config, seed: Option<u64>) -> Result<()> {
    let mut cohort = config.simulation.cohort;
    if let Some(n) = a.students {
        cohort = CohortSpec {
            history_min: cohort.history_min,
            history_max: cohort.history_max,
            ..CohortSpec::for_students(n)
        };
    }
    let mut sweep = config.simulation.sweep;
    if let Some(t) = a.trials {
        sweep.trials_per_case = t;
    }
    if let Some(s) = a.step {
        sweep.step = s;
    }
    if let Some(s) = seed {
        sweep.seed = s;
    }
    if let Some(w) = a.weighting {
        sweep.weighting = match w {
            WeightingArg::Weighted => Weighting::Weighted,
            WeightingArg::Uniform => Weighting::Uniform,
        };
    }
    sweep.fixed_cohort |= a.fixed_cohort;
    let model = match (a.confusion.as_deref(), &config.simulation.confusion) {
        (Some("default"), _) => default_confusion_model(),
        (Some(path), _) => ConfusionModel::load(path.as_ref())?,
        (None, Some(path)) => ConfusionModel::load(path)?,
        (None, None) => default_confusion_model(),
    };

    // Open the output first so an unwritable path fails before the sweep runs.
    let file = File::create(&a.out).with_context(|| format!("cannot write {}", a.out.display()))?;
    let report = run_sweep(&cohort, &sweep, &model, &config.evaluation)?;
    write_csv(&report, BufWriter::new(file)).with_context(|| format!("writing {}", a.out.display()))?;
    let skipped = report.cases.len() - report.completed().count();
    println!("{}", a.out.display());
    println!(
        "mean_accuracy={:.6} weighting={} seed={} cases={} skipped={}",
        report.mean_accuracy,
        report.weighting.as_str(),
        report.seed,
        report.cases.len(),
        skipped
    );
    Ok(())
}

fn run_replay(a: ReplayArgs) -> Result<()> {
    if !(a.speed.is_finite() && a.speed > 0.0) {
        bail!("--speed must be positive, got {}", a.speed);
    }
    let entries = load_trace(&a.trace)?;
    let url = format!("ws://{}/ws", a.target);
    let options = ReplayOptions { speed: a.speed, classroom: a.classroom, linger: Duration::ZERO };
    let report = runtime()?.block_on(replay(&url, &entries, &options))?;
    for (code, detail) in &report.errors {
        tracing::warn!(?code, detail, "server rejected a message");
    }
    println!(
        "sent={} rejected={} student={} trace_ms={} elapsed_ms={}",
        report.sent,
        report.errors.len(),
        report.student_id.as_deref().unwrap_or("-"),
        trace_duration(&entries).as_millis(),
        report.elapsed.as_millis()
    );
    Ok(())
}
