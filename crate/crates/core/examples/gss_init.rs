//! T-Init versus TF-Init on simulated overlapping meetings: mask accuracy
//! against the oracle-dominant speaker and SI-SDR gain of the extracted
//! signals, for a given EM budget.
//!
//! `cargo run --release --example gss_init -- [speakers] [overlap] [t60] [duration] [scenes] [guided] [unguided] [pi_floor] [eig_ratio] [ctx_frames] [ctx_bins] [seed_base]`

use std::time::Instant;

use asn_diar::beamform::{extract_speaker, BeamformConfig};
use asn_diar::diarize::{diarize, DiarizeConfig};
use asn_diar::evaluate::{mask_accuracy, oracle_dominance, sdr_gain, speaker_mapping};
use asn_diar::gss::{DominanceConfig, GssConfig, GssRunner, InitMode};
use asn_diar::scene::meeting::MeetingSpec;
use asn_diar::scene::{simulate_scene, DefaultAudio};
use asn_diar::stft::{stft, StftConfig};
use asn_diar::tdoa::{estimate_tdoas, TdoaEstConfig};

fn main() -> asn_diar::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let arg = |i: usize, d: f64| args.get(i).copied().unwrap_or(d);
    let spec = MeetingSpec {
        n_speakers: arg(0, 4.0) as usize,
        overlap_ratio: arg(1, 0.4),
        t60_s: arg(2, 0.0),
        duration_s: arg(3, 30.0),
        ..Default::default()
    };
    let scenes = arg(4, 3.0) as u64;
    let (guided, unguided) = (arg(5, 1.0) as usize, arg(6, 1.0) as usize);
    let stft_cfg = StftConfig::default();

    let mut sums = [(0.0, 0.0); 2];
    for seed in 0..scenes {
        let (rec, truth) = simulate_scene(&spec.generate(arg(11, 500.0) as u64 + seed), &DefaultAudio)?;
        let s = stft(&rec.channels, rec.sample_rate_hz, &stft_cfg)?;
        let track = estimate_tdoas(&s, &rec.channels[0], &TdoaEstConfig::default())?;
        let d = diarize(&track.selected, s.frames(), s.frame_shift_s(), &DiarizeConfig::default());
        let reference = truth.activity_on(s.frames(), s.frame_shift_s());
        let mapping = speaker_mapping(&reference, &d.activity);
        let dominance = oracle_dominance(&truth.images, &truth.noise, 0, rec.sample_rate_hz, &stft_cfg)?;

        let mut line = format!("scene {seed}: {} speakers found", d.activity.n_speakers());
        for (slot, init) in [InitMode::TInit, InitMode::TfInit].into_iter().enumerate() {
            let t0 = Instant::now();
            let cfg = GssConfig {
                init,
                n_guided: guided,
                n_unguided: unguided,
                init_pi_floor: arg(7, GssConfig::default().init_pi_floor),
                dominance: DominanceConfig {
                    eig_ratio_threshold: arg(8, DominanceConfig::default().eig_ratio_threshold),
                    context_frames: arg(9, DominanceConfig::default().context_frames as f64) as usize,
                    context_bins: arg(10, DominanceConfig::default().context_bins as f64) as usize,
                },
                ..Default::default()
            };
            let runner = GssRunner::new(&s, &d.activity, &d.representatives, cfg)?;
            let segs = runner.run_all()?;
            let acc = mask_accuracy(&segs, &dominance, s.bins(), &mapping);
            let mut gains = Vec::new();
            for (h, truth_spk) in mapping.iter().enumerate() {
                let Some(t) = truth_spk else { continue };
                let ex = extract_speaker(&s, &segs, h, d.activity.n_speakers(), &BeamformConfig::default())?;
                if let Some(g) = sdr_gain(&ex, &truth.images[*t], &rec.channels, stft_cfg.frame_shift)? {
                    gains.push(g.enhanced_db);
                }
            }
            let mean_sdr = gains.iter().sum::<f64>() / gains.len().max(1) as f64;
            sums[slot].0 += acc.ratio();
            sums[slot].1 += mean_sdr;
            line += &format!(
                " | {init:?}: acc {:.1}% (noise {:.1}%) SI-SDR {:.2} dB ({:.1} s)",
                100.0 * acc.ratio(),
                100.0 * acc.to_noise as f64 / acc.scored.max(1) as f64,
                mean_sdr,
                t0.elapsed().as_secs_f64()
            );
        }
        println!("{line}");
    }
    let n = scenes as f64;
    println!(
        "mean: T-Init acc {:.1}% SI-SDR {:.2} dB | TF-Init acc {:.1}% SI-SDR {:.2} dB",
        100.0 * sums[0].0 / n,
        sums[0].1 / n,
        100.0 * sums[1].0 / n,
        sums[1].1 / n
    );
    Ok(())
}
