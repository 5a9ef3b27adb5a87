//! Offset and drift estimation on devices with injected clock errors.
//!
//! `cargo run --release --example sync -- [scenes] [max_sto_s] [max_sro_ppm]`

use std::time::Instant;

use asn_diar::geometry::pair_index;
use asn_diar::scene::meeting::MeetingSpec;
use asn_diar::scene::{simulate_scene, DefaultAudio};
use asn_diar::sync::{synchronize, SyncConfig};

fn main() -> asn_diar::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let scenes = args.first().copied().unwrap_or(3.0) as u64;
    let spec = MeetingSpec {
        max_sto_s: args.get(1).copied().unwrap_or(2.0),
        max_sro_ppm: args.get(2).copied().unwrap_or(100.0),
        ..Default::default()
    };
    for seed in 0..scenes {
        let scene = spec.generate(300 + seed);
        let (rec, truth) = simulate_scene(&scene, &DefaultAudio)?;
        let t0 = Instant::now();
        let (_, report) = synchronize(&rec, &SyncConfig::default())?;
        println!("scene {seed} ({:.1} s)", t0.elapsed().as_secs_f64());
        let span = rec.min_len() as f64;
        for m in 1..rec.n_channels() {
            // the offset is only defined up to the acoustic path difference
            let p = pair_index(0, m, rec.n_channels());
            let tdof = truth.true_tdoa_vectors.iter().map(|t| t[p].abs()).fold(0.0, f64::max);
            println!(
                "  device {m}: offset {} vs {} (error {}, path differences up to {:.0}), drift {:.2} vs {:.2} ppm (residual {:.2} samples)",
                report.sto_samples[m],
                scene.sto(m),
                report.sto_samples[m] - scene.sto(m),
                tdof,
                report.sro_ppm[m],
                scene.sro(m),
                (report.sro_ppm[m] - scene.sro(m)).abs() * 1e-6 * span
            );
        }
        for note in &report.notes {
            println!("  note: {note}");
        }
    }
    Ok(())
}
