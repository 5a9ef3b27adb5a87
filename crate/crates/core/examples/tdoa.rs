//! Frame-wise TDOA vectors on a simulated two-speaker scene, scored against
//! the geometric ground truth.

use std::time::Instant;

use asn_diar::scene::meeting::MeetingSpec;
use asn_diar::scene::{simulate_scene, DefaultAudio};
use asn_diar::stft::{stft, StftConfig};
use asn_diar::tdoa::{estimate_tdoas, TdoaEstConfig};

fn main() -> asn_diar::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let spec = MeetingSpec {
        n_speakers: 2,
        n_mics: 4,
        duration_s: 60.0,
        ..Default::default()
    };
    let scene = spec.generate(seed);
    let (rec, truth) = simulate_scene(&scene, &DefaultAudio)?;

    let start = Instant::now();
    let cfg = StftConfig::default();
    let s = stft(&rec.channels, rec.sample_rate_hz, &cfg)?;
    let track = estimate_tdoas(&s, &rec.channels[0], &TdoaEstConfig::default())?;
    let elapsed = start.elapsed();

    let activity = truth.activity_on(s.frames(), s.frame_shift_s());
    let (mut single, mut hit_any, mut hit_top, mut counted_one) = (0, 0, 0, 0);
    for l in 0..s.frames() {
        if !track.vad[l] || activity.n_active(l) != 1 {
            continue;
        }
        let spk = (0..activity.n_speakers()).find(|&i| activity.is_active(i, l)).unwrap();
        let want = &truth.true_tdoa_vectors[spk];
        let close = |tau: &[f64]| tau.iter().zip(want).all(|(a, b)| (a - b).abs() <= 1.0);
        single += 1;
        let sel = &track.selected[l];
        if sel.iter().any(|v| close(&v.tau)) {
            hit_any += 1;
        }
        if sel.first().is_some_and(|v| close(&v.tau)) {
            hit_top += 1;
        }
        if sel.len() == 1 {
            counted_one += 1;
        }
    }
    println!("true TDOAs:");
    for (i, t) in truth.true_tdoa_vectors.iter().enumerate() {
        println!("  speaker {i}: {:?}", t.iter().map(|v| (v * 10.0).round() / 10.0).collect::<Vec<_>>());
    }
    let pct = |a: usize| 100.0 * a as f64 / single.max(1) as f64;
    println!(
        "single-speaker active frames: {single}, any-within-1: {:.1}%, top-within-1: {:.1}%, one vector: {:.1}%",
        pct(hit_any),
        pct(hit_top),
        pct(counted_one)
    );
    println!("estimation time: {:.2?}", elapsed);
    Ok(())
}
