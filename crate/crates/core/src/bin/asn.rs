//! Command-line front end: one subcommand per pipeline stage, plus `run`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use asn_diar::parallel::WORKERS_ENV;
use asn_diar::pipeline::{run_all, run_stage, PipelineConfig, Stage};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "asn", version, about = "Spatial diarization and guided source extraction for ad-hoc microphone networks")]
#[command(after_help = format!("Worker threads: set {WORKERS_ENV} (default: all cores)."))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (JSON); defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Artifact directory.
    #[arg(long, default_value = "asn_out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Render a seeded scene (or load device recordings) to mix.wav.
    Simulate(Common),
    /// Offset and drift compensation.
    Sync(Common),
    /// Frame-wise TDOA vectors.
    Tdoa(Common),
    /// TDOA clustering into speaker activity (RTTM).
    Diarize(Common),
    /// Guided source separation and beamforming.
    Enhance(Common),
    /// DER, TDOA error and SI-SDR against the ground truth.
    Eval(Common),
    /// Every stage in order.
    Run(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, common) = match cli.command {
        Command::Simulate(c) => (Some(Stage::Simulate), c),
        Command::Sync(c) => (Some(Stage::Sync), c),
        Command::Tdoa(c) => (Some(Stage::Tdoa), c),
        Command::Diarize(c) => (Some(Stage::Diarize), c),
        Command::Enhance(c) => (Some(Stage::Enhance), c),
        Command::Eval(c) => (Some(Stage::Eval), c),
        Command::Run(c) => (None, c),
    };
    let cfg = match &common.config {
        Some(path) => match PipelineConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("asn: {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => PipelineConfig::default(),
    };
    let t0 = Instant::now();
    let result = match stage {
        Some(s) => run_stage(s, &cfg, common.seed, &common.out).map(|r| serde_json::json!({ format!("{s:?}").to_lowercase(): r })),
        None => run_all(&cfg, common.seed, &common.out).and_then(|r| Ok(serde_json::to_value(r)?)),
    };
    match result {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report).unwrap_or_default());
            eprintln!("done in {:.1} s", t0.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("asn: {e}");
            ExitCode::FAILURE
        }
    }
}
