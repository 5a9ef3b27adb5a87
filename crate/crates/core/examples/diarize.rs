//! Spatial diarization of simulated four-speaker meetings, scored by DER.
//!
//! `cargo run --release --example diarize -- [overlap] [t60] [seeds]`

use asn_diar::diarize::{diarize, DiarizeConfig};
use asn_diar::metrics::compute_der;
use asn_diar::scene::meeting::MeetingSpec;
use asn_diar::scene::{simulate_scene, DefaultAudio};
use asn_diar::stft::{stft, StftConfig};
use asn_diar::tdoa::{estimate_tdoas, TdoaEstConfig};

fn main() -> asn_diar::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let overlap = args.first().copied().unwrap_or(0.0);
    let t60 = args.get(1).copied().unwrap_or(0.0);
    let seeds = args.get(2).copied().unwrap_or(3.0) as u64;
    let spec = MeetingSpec {
        overlap_ratio: overlap,
        t60_s: t60,
        ..Default::default()
    };
    let mut total = 0.0;
    for seed in 0..seeds {
        let (rec, truth) = simulate_scene(&spec.generate(100 + seed), &DefaultAudio)?;
        let s = stft(&rec.channels, rec.sample_rate_hz, &StftConfig::default())?;
        let track = estimate_tdoas(&s, &rec.channels[0], &TdoaEstConfig::default())?;
        let d = diarize(&track.selected, s.frames(), s.frame_shift_s(), &DiarizeConfig::default());
        let reference = truth.activity_on(s.frames(), s.frame_shift_s());
        let der = compute_der(&reference, &d.activity, 0.25)?;
        total += der.der;
        println!(
            "seed {seed}: {} local clusters -> {} speakers, DER {:.2}% (miss {:.2}, fa {:.2}, conf {:.2})",
            d.n_local_clusters,
            d.activity.n_speakers(),
            100.0 * der.der,
            100.0 * der.miss,
            100.0 * der.false_alarm,
            100.0 * der.confusion
        );
        for (i, r) in d.representatives.iter().enumerate() {
            println!("    spk{i}: {:?} ({} frames)", r, d.activity.active_count(i));
        }
        for (i, t) in truth.true_tdoa_vectors.iter().enumerate() {
            println!("    true{i}: {:?}", t.iter().map(|v| (v * 10.0).round() / 10.0).collect::<Vec<_>>());
        }
    }
    println!("overlap {overlap}, T60 {t60}: mean DER {:.2}%", 100.0 * total / seeds as f64);
    Ok(())
}
