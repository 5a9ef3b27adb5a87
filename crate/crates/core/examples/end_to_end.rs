//! Every stage on one simulated asynchronous meeting, artifacts on disk.
//!
//! `cargo run --release --example end_to_end -- [out_dir] [seed] [config.json]`

use std::path::PathBuf;
use std::time::Instant;

use asn_diar::pipeline::{run_all, PipelineConfig};
use asn_diar::scene::meeting::MeetingSpec;

fn main() -> asn_diar::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "e2e_out".into()));
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    let cfg = match args.next() {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig {
            session: "meeting".into(),
            meeting: MeetingSpec {
                overlap_ratio: 0.4,
                max_sto_s: 1.0,
                max_sro_ppm: 50.0,
                ..Default::default()
            },
            ..Default::default()
        },
    };
    let t0 = Instant::now();
    let reports = run_all(&cfg, seed, &out)?;
    for (stage, report) in &reports {
        println!("{stage:?}: {}", serde_json::to_string(report)?);
    }
    println!("artifacts in {} ({:.1} s)", out.display(), t0.elapsed().as_secs_f64());
    Ok(())
}
