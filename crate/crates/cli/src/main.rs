use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pdtc::experiments::{report, run_config, ExperimentConfig, ExperimentKind, RunError, Scale};

#[derive(Parser, Debug)]
#[command(name = "pdtc", version, about = "Prethermal time-crystal sensing simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single operating point, with its AC-off baseline.
    Run(RunArgs),
    /// Parameter sweep (phase, amplitude, frequency, ...).
    Sweep(RunArgs),
    /// Stability dome over the y-pulse angle.
    Dome(RunArgs),
    /// Disorder sweep with and without the AC field.
    Noise(RunArgs),
    /// Summarize a finished run directory.
    Report {
        /// Run directory.
        #[arg(long = "out", short = 'o')]
        dir: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScaleArg {
    Desk,
    Full,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long, short = 'c')]
    config: PathBuf,
    /// Output run directory.
    #[arg(long, short = 'o')]
    out: PathBuf,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, short = 'j')]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value = "desk")]
    scale: ScaleArg,
}

fn execute(kind: ExperimentKind, args: &RunArgs) -> Result<i32, RunError> {
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if cfg.kind != kind {
        return Err(RunError::Config(pdtc::experiments::ConfigError::Invalid {
            key: "kind".into(),
            reason: format!("config is `{}` but the `{}` command was used", cfg.kind.as_str(), kind.as_str()),
        }));
    }
    cfg.apply_scale(match args.scale {
        ScaleArg::Desk => Scale::Desk,
        ScaleArg::Full => Scale::Full,
    });
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    log::info!(
        "{} `{}`: L={}, {} samples, {} workers",
        kind.as_str(),
        cfg.name,
        cfg.graph.n_spins,
        cfg.graph.n_samples,
        workers
    );
    let outcome = run_config(&cfg, &args.out, workers)?;
    for p in &outcome.result.points {
        let f = p.f_mean.map_or("-".into(), |v| format!("{v:.5}"));
        let s = p.f_std.map_or("-".into(), |v| format!("{v:.5}"));
        println!("{:>4} {:<28} F={f} std={s} failed={}", p.index, p.spec.label, p.n_failed());
    }
    let failed = outcome.result.failed_points();
    if outcome.failed_samples() > 0 {
        eprintln!(
            "{} trajectories failed ({} points with no successful sample); see {}",
            outcome.failed_samples(),
            failed.len(),
            args.out.join("manifest.toml").display()
        );
    }
    println!("wrote {}", args.out.display());
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Run(a) => execute(ExperimentKind::Run, a),
        Command::Sweep(a) => execute(ExperimentKind::Sweep, a),
        Command::Dome(a) => execute(ExperimentKind::Dome, a),
        Command::Noise(a) => execute(ExperimentKind::Noise, a),
        Command::Report { dir } => report(dir).map(|text| {
            print!("{text}");
            0
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
