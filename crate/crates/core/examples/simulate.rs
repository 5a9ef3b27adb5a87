//! Render a seeded tabletop meeting to a multichannel WAV plus its scene
//! description and reference RTTM.
//!
//! `cargo run --release --example simulate -- [out_dir] [seed] [overlap] [t60]`

use std::path::PathBuf;

use asn_diar::rttm::RttmDocument;
use asn_diar::scene::meeting::{overlap_fraction, MeetingSpec};
use asn_diar::scene::{simulate_scene, write_wav, DefaultAudio, WavFormat};
use asn_diar::stft::StftConfig;

fn main() -> asn_diar::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "sim_out".into()));
    let rest: Vec<f64> = args.filter_map(|a| a.parse().ok()).collect();
    let seed = rest.first().copied().unwrap_or(0.0) as u64;
    let spec = MeetingSpec {
        overlap_ratio: rest.get(1).copied().unwrap_or(0.2),
        t60_s: rest.get(2).copied().unwrap_or(0.2),
        max_sto_s: 0.5,
        max_sro_ppm: 50.0,
        ..Default::default()
    };
    let scene = spec.generate(seed);
    let (rec, truth) = simulate_scene(&scene, &DefaultAudio)?;

    std::fs::create_dir_all(&out)?;
    write_wav(out.join("mix.wav"), &rec.channels, rec.sample_rate_hz, WavFormat::Pcm16)?;
    std::fs::write(out.join("scene.json"), serde_json::to_string_pretty(&scene)?)?;
    let grid = StftConfig::default();
    let shift = grid.frame_shift_s(rec.sample_rate_hz);
    let frames = grid.frames_for(rec.min_len());
    RttmDocument::from_activity("sim", &truth.activity_on(frames, shift), None).write(out.join("reference.rttm"))?;

    println!(
        "{} devices, {} speakers, {:.1} s, {} utterances, overlap {:.1}%",
        rec.n_channels(),
        truth.n_speakers(),
        rec.min_len() as f64 / rec.sample_rate_hz as f64,
        scene.utterance_plan.len(),
        100.0 * overlap_fraction(&scene.utterance_plan, 0.01)
    );
    println!("offsets {:?} samples, drift {:?} ppm", scene.per_device_sto_samples, scene.per_device_sro_ppm);
    for (i, t) in truth.true_tdoa_vectors.iter().enumerate() {
        println!("speaker {i} TDOAs: {:?}", t.iter().map(|v| (v * 10.0).round() / 10.0).collect::<Vec<_>>());
    }
    println!("wrote {}", out.display());
    Ok(())
}
