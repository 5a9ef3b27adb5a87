//! Souden MVDR extraction driven by oracle masks and by GSS masks from the
//! diarization, scored as SI-SDR gain over the best raw channel.
//!
//! `cargo run --release --example beamform -- [overlap] [t60] [seed]`

use asn_diar::beamform::{extract_speaker, extract_with_masks, resegment_target, BeamformConfig};
use asn_diar::diarize::{diarize, DiarizeConfig};
use asn_diar::evaluate::{sdr_gain, speaker_mapping};
use asn_diar::gss::{GssConfig, GssRunner};
use asn_diar::scene::meeting::MeetingSpec;
use asn_diar::scene::{simulate_scene, DefaultAudio};
use asn_diar::stft::{stft, StftConfig};
use asn_diar::tdoa::{estimate_tdoas, TdoaEstConfig};

fn main() -> asn_diar::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let spec = MeetingSpec {
        overlap_ratio: args.first().copied().unwrap_or(0.4),
        t60_s: args.get(1).copied().unwrap_or(0.0),
        ..Default::default()
    };
    let seed = args.get(2).copied().unwrap_or(0.0) as u64;
    let grid = StftConfig::default();
    let bf = BeamformConfig::default();
    let (rec, truth) = simulate_scene(&spec.generate(seed), &DefaultAudio)?;
    let s = stft(&rec.channels, rec.sample_rate_hz, &grid)?;
    let n = truth.n_speakers();
    let act = truth.activity_on(s.frames(), s.frame_shift_s());

    // ideal ratio masks at channel 0 on the true activity
    let mut parts: Vec<Vec<f64>> = truth.images.iter().map(|img| img[0].clone()).collect();
    parts.push(truth.noise[0].clone());
    let sp = stft(&parts, rec.sample_rate_hz, &grid)?;
    let priors: Vec<Vec<f64>> = act
        .active
        .iter()
        .map(|row| row.iter().map(|&a| f64::from(u8::from(a))).collect())
        .collect();
    for i in 0..n {
        let gamma = |l: usize, k: usize| {
            let total: f64 = (0..=n).map(|c| sp.get(c, l, k).norm_sqr()).sum();
            if total > 0.0 {
                sp.get(i, l, k).norm_sqr() / total
            } else {
                0.0
            }
        };
        let ex = extract_with_masks(&s, &gamma, &resegment_target(&priors, i, &bf.plan), &bf)?;
        if let Some(g) = sdr_gain(&ex, &truth.images[i], &rec.channels, grid.frame_shift)? {
            println!(
                "oracle masks, speaker {i}: {:.2} dB (best raw {:.2} dB on channel {}), gain {:.2} dB",
                g.enhanced_db,
                g.best_raw_db,
                g.best_raw_channel,
                g.improvement_db()
            );
        }
    }

    let track = estimate_tdoas(&s, &rec.channels[0], &TdoaEstConfig::default())?;
    let d = diarize(&track.selected, s.frames(), s.frame_shift_s(), &DiarizeConfig::default());
    let mapping = speaker_mapping(&act, &d.activity);
    let runner = GssRunner::new(&s, &d.activity, &d.representatives, GssConfig::default())?;
    let segs = runner.run_all()?;
    for (h, t) in mapping.iter().enumerate() {
        let Some(t) = t else {
            println!("diarized speaker {h}: no reference match");
            continue;
        };
        let ex = extract_speaker(&s, &segs, h, d.activity.n_speakers(), &bf)?;
        if let Some(g) = sdr_gain(&ex, &truth.images[*t], &rec.channels, grid.frame_shift)? {
            let refs: Vec<usize> = ex.segments.iter().map(|e| e.reference_channel).collect();
            println!(
                "GSS masks, speaker {t}: {:.2} dB, gain {:.2} dB over {} segments (reference channels {refs:?})",
                g.enhanced_db,
                g.improvement_db(),
                ex.segments.len()
            );
        }
    }
    Ok(())
}
