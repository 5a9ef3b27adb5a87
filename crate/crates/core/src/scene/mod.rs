//! Synthetic meeting scenes with exact ground truth.

pub mod meeting;
pub mod rir;
pub mod speech;
pub mod wav;

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::activity::ActivityMatrix;
use crate::dsp::fft;
use crate::dsp::interp::{fractional_delay, SincTable};
use crate::error::{Error, Result};
use crate::geometry::{distance, mic_pairs, Point3};
use crate::stft::StftConfig;

pub use speech::{synth_speech, Voice};
pub use wav::{load_device_wavs, load_wav, write_wav, WavFormat};

fn default_c() -> f64 {
    343.0
}

/// Where an utterance's dry signal comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceRef {
    /// Speech-like synthetic signal in the speaker's voice.
    Synthetic { seed: u64 },
    /// First channel of a WAV file, starting at `offset_s`.
    Wav {
        path: PathBuf,
        #[serde(default)]
        offset_s: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: usize,
    pub onset_s: f64,
    pub offset_s: f64,
    pub source: SourceRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    /// Shoebox room; anechoic free field when absent.
    #[serde(default)]
    pub room_dims: Option<Point3>,
    pub mic_positions: Vec<Point3>,
    pub source_positions: Vec<Point3>,
    pub utterance_plan: Vec<Utterance>,
    /// `null` in JSON means noiseless.
    #[serde(with = "finite_or_null")]
    pub snr_db: f64,
    #[serde(default)]
    pub t60_s: f64,
    #[serde(default)]
    pub per_device_sto_samples: Vec<i64>,
    #[serde(default)]
    pub per_device_sro_ppm: Vec<f64>,
    pub sample_rate_hz: u32,
    #[serde(default = "default_c")]
    pub speed_of_sound: f64,
    /// Recording length; defaults to the last offset plus 0.5 s.
    #[serde(default)]
    pub duration_s: Option<f64>,
    /// Noise seed.
    #[serde(default)]
    pub seed: u64,
}

mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl SceneConfig {
    pub fn n_mics(&self) -> usize {
        self.mic_positions.len()
    }

    pub fn n_speakers(&self) -> usize {
        self.source_positions.len()
    }

    pub fn sto(&self, device: usize) -> i64 {
        self.per_device_sto_samples.get(device).copied().unwrap_or(0)
    }

    pub fn sro(&self, device: usize) -> f64 {
        self.per_device_sro_ppm.get(device).copied().unwrap_or(0.0)
    }

    pub fn duration_samples(&self) -> usize {
        let d = self.duration_s.unwrap_or_else(|| {
            self.utterance_plan
                .iter()
                .map(|u| u.offset_s)
                .fold(0.0, f64::max)
                + 0.5
        });
        (d * self.sample_rate_hz as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.n_mics();
        if m < 2 {
            return Err(Error::Config(format!("need at least 2 microphones, got {m}")));
        }
        if self.n_speakers() == 0 {
            return Err(Error::Config("need at least one source".into()));
        }
        if self.sample_rate_hz == 0 || !(self.speed_of_sound > 0.0) {
            return Err(Error::Config("sample rate and speed of sound must be positive".into()));
        }
        if self.t60_s < 0.0 {
            return Err(Error::Config("t60_s must be non-negative".into()));
        }
        if self.t60_s > 0.0 && self.room_dims.is_none() {
            return Err(Error::Config("reverberation requires room_dims".into()));
        }
        if let Some(room) = self.room_dims {
            for p in self.mic_positions.iter().chain(&self.source_positions) {
                if p.iter().zip(&room).any(|(&x, &l)| x <= 0.0 || x >= l) {
                    return Err(Error::Config(format!("position {p:?} outside room {room:?}")));
                }
            }
        }
        for (name, len) in [
            ("per_device_sto_samples", self.per_device_sto_samples.len()),
            ("per_device_sro_ppm", self.per_device_sro_ppm.len()),
        ] {
            if len != 0 && len != m {
                return Err(Error::Config(format!("{name} has {len} entries for {m} devices")));
            }
        }
        if self.per_device_sro_ppm.iter().any(|p| p.abs() >= 1000.0) {
            return Err(Error::Config("|sro_ppm| must be below 1000".into()));
        }
        for (i, u) in self.utterance_plan.iter().enumerate() {
            if u.speaker >= self.n_speakers() {
                return Err(Error::UnknownSpeaker {
                    utterance: i,
                    speaker: u.speaker,
                });
            }
            if !(u.offset_s > u.onset_s) || u.onset_s < 0.0 {
                return Err(Error::Config(format!("utterance {i} has an empty interval")));
            }
        }
        for spk in 0..self.n_speakers() {
            let mut iv: Vec<(f64, f64)> = self
                .utterance_plan
                .iter()
                .filter(|u| u.speaker == spk)
                .map(|u| (u.onset_s, u.offset_s))
                .collect();
            iv.sort_by(|a, b| a.0.total_cmp(&b.0));
            if iv.windows(2).any(|w| w[1].0 < w[0].1) {
                return Err(Error::Config(format!("speaker {spk} has overlapping utterances")));
            }
        }
        Ok(())
    }
}

/// Per-device waveforms at a shared nominal rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelRecording {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate_hz: u32,
    pub device_ids: Vec<String>,
}

impl MultichannelRecording {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate_hz: u32) -> Self {
        let device_ids = (0..channels.len()).map(|i| format!("dev{i}")).collect();
        Self {
            channels,
            sample_rate_hz,
            device_ids,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn min_len(&self) -> usize {
        self.channels.iter().map(Vec::len).min().unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Geometric all-pairs TDOA per speaker, samples.
    pub true_tdoa_vectors: Vec<Vec<f64>>,
    /// `(speaker, onset_s, offset_s)` on the reference device's clock.
    pub intervals: Vec<(usize, f64, f64)>,
    /// Activity on the default STFT grid.
    pub activity: ActivityMatrix,
    /// Dry source signals on the true timeline.
    pub clean_sources: Vec<Vec<f64>>,
    /// Noise-free image of each speaker at each device (after STO/SRO):
    /// `images[speaker][channel]`.
    pub images: Vec<Vec<Vec<f64>>>,
    /// Noise component per device (after STO/SRO).
    pub noise: Vec<Vec<f64>>,
}

impl GroundTruth {
    pub fn n_speakers(&self) -> usize {
        self.true_tdoa_vectors.len()
    }

    /// Activity on an arbitrary frame grid.
    pub fn activity_on(&self, n_frames: usize, frame_shift_s: f64) -> ActivityMatrix {
        ActivityMatrix::from_intervals(self.n_speakers(), &self.intervals, n_frames, frame_shift_s)
    }
}

/// Provider of dry source signals.
pub trait SourceAudio {
    fn render(&self, source: &SourceRef, speaker: usize, len: usize, fs: u32) -> Result<Vec<f64>>;
}

/// Synthesises [`SourceRef::Synthetic`] and reads [`SourceRef::Wav`].
#[derive(Debug, Default, Clone, Copy)]
pub struct DefaultAudio;

impl SourceAudio for DefaultAudio {
    fn render(&self, source: &SourceRef, speaker: usize, len: usize, fs: u32) -> Result<Vec<f64>> {
        match source {
            SourceRef::Synthetic { seed } => {
                Ok(synth_speech(len, fs, *seed, Voice::for_speaker(speaker)))
            }
            SourceRef::Wav { path, offset_s } => {
                let rec = load_wav(path)?;
                if rec.sample_rate_hz != fs {
                    return Err(Error::Input(format!(
                        "{} is sampled at {} Hz, scene uses {fs} Hz",
                        path.display(),
                        rec.sample_rate_hz
                    )));
                }
                let start = (offset_s * fs as f64).round() as usize;
                let ch = &rec.channels[0];
                if ch.len() < start + len {
                    return Err(Error::TooShort {
                        needed: start + len,
                        got: ch.len(),
                    });
                }
                Ok(ch[start..start + len].to_vec())
            }
        }
    }
}

/// All-pairs TDOA of a point source in samples:
/// `tau_{mm'} = (|src - mic_m'| - |src - mic_m|) * fs / c`.
pub fn ground_truth_tdoa(src: &Point3, mics: &[Point3], fs: f64, c: f64) -> Result<Vec<f64>> {
    if !(c > 0.0) || !(fs > 0.0) {
        return Err(Error::Config("fs and c must be positive".into()));
    }
    let dist: Vec<f64> = mics.iter().map(|m| distance(src, m)).collect();
    if let Some(i) = dist.iter().position(|&d| d < 1e-9) {
        return Err(Error::CoincidentSource {
            source_index: 0,
            mic_index: i,
        });
    }
    Ok(mic_pairs(mics.len())
        .into_iter()
        .map(|(m, n)| (dist[n] - dist[m]) * fs / c)
        .collect())
}

/// `out[n] = x(n * (1 + sro_ppm * 1e-6) + sto_samples)`, band-limited;
/// positions outside `x` give zeros. Output length equals input length.
pub fn apply_sto_sro(x: &[f64], sto_samples: i64, sro_ppm: f64) -> Vec<f64> {
    if sro_ppm == 0.0 {
        return (0..x.len() as i64)
            .map(|n| {
                let i = n + sto_samples;
                if i >= 0 && (i as usize) < x.len() {
                    x[i as usize]
                } else {
                    0.0
                }
            })
            .collect();
    }
    let table = SincTable::shared_long();
    let rate = 1.0 + sro_ppm * 1e-6;
    (0..x.len())
        .map(|n| table.interpolate(x, n as f64 * rate + sto_samples as f64))
        .collect()
}

fn propagate(
    cfg: &SceneConfig,
    dry: &[f64],
    active: &[(usize, usize)],
    src: &Point3,
    mic: &Point3,
) -> Vec<f64> {
    let fs = cfg.sample_rate_hz;
    let c = cfg.speed_of_sound;
    let n = dry.len();
    let mut out = vec![0.0; n];
    match cfg.room_dims {
        Some(room) if cfg.t60_s > 0.0 => {
            let h = rir::image_source_rir(&room, src, mic, fs, c, cfg.t60_s);
            for &(s, e) in active {
                let y = fft::convolve(&dry[s..e], &h);
                for (i, v) in y.iter().enumerate() {
                    if s + i < n {
                        out[s + i] += v;
                    }
                }
            }
        }
        _ => {
            let d = distance(src, mic);
            fractional_delay(dry, d / c * fs as f64, 1.0 / d, &mut out);
        }
    }
    out
}

/// Render a scene: propagation (fractional delay or image-source RIR),
/// white noise at `snr_db`, then per-device STO/SRO.
pub fn simulate_scene(
    cfg: &SceneConfig,
    audio: &dyn SourceAudio,
) -> Result<(MultichannelRecording, GroundTruth)> {
    cfg.validate()?;
    let fs = cfg.sample_rate_hz;
    let n = cfg.duration_samples();
    let m_count = cfg.n_mics();
    let i_count = cfg.n_speakers();

    let true_tdoa_vectors = cfg
        .source_positions
        .iter()
        .enumerate()
        .map(|(i, src)| {
            ground_truth_tdoa(src, &cfg.mic_positions, fs as f64, cfg.speed_of_sound).map_err(
                |e| match e {
                    Error::CoincidentSource { mic_index, .. } => Error::CoincidentSource {
                        source_index: i,
                        mic_index,
                    },
                    other => other,
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut clean = vec![vec![0.0; n]; i_count];
    let mut spans: Vec<Vec<(usize, usize)>> = vec![Vec::new(); i_count];
    let mut speech_mask = vec![false; n];
    for u in &cfg.utterance_plan {
        let s = ((u.onset_s * fs as f64).round() as usize).min(n);
        let e = ((u.offset_s * fs as f64).round() as usize).min(n);
        if e <= s {
            continue;
        }
        let sig = audio.render(&u.source, u.speaker, e - s, fs)?;
        clean[u.speaker][s..e].copy_from_slice(&sig[..e - s]);
        spans[u.speaker].push((s, e));
        speech_mask[s..e].iter_mut().for_each(|v| *v = true);
    }

    let mut images: Vec<Vec<Vec<f64>>> = (0..i_count)
        .map(|i| {
            cfg.mic_positions
                .iter()
                .map(|mic| propagate(cfg, &clean[i], &spans[i], &cfg.source_positions[i], mic))
                .collect()
        })
        .collect();

    let mut noise = vec![vec![0.0; n]; m_count];
    if cfg.snr_db.is_finite() {
        let mut power = 0.0;
        let mut count = 0usize;
        for m in 0..m_count {
            for t in 0..n {
                if speech_mask[t] {
                    let v: f64 = images.iter().map(|img| img[m][t]).sum();
                    power += v * v;
                    count += 1;
                }
            }
        }
        if count > 0 && power > 0.0 {
            let sigma = (power / count as f64 / 10f64.powf(cfg.snr_db / 10.0)).sqrt();
            for (m, ch) in noise.iter_mut().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(
                    cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(m as u64),
                );
                for v in ch.iter_mut() {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    *v = sigma * g;
                }
            }
        }
    }

    for m in 0..m_count {
        let (sto, sro) = (cfg.sto(m), cfg.sro(m));
        if sto == 0 && sro == 0.0 {
            continue;
        }
        for img in images.iter_mut() {
            img[m] = apply_sto_sro(&img[m], sto, sro);
        }
        noise[m] = apply_sto_sro(&noise[m], sto, sro);
    }

    let channels: Vec<Vec<f64>> = (0..m_count)
        .map(|m| {
            let mut ch = noise[m].clone();
            for img in &images {
                for (o, v) in ch.iter_mut().zip(&img[m]) {
                    *o += v;
                }
            }
            ch
        })
        .collect();

    // Device 0's clock: true time t maps to (t - sto0 / fs) / (1 + sro0).
    let rate0 = 1.0 + cfg.sro(0) * 1e-6;
    let sto0 = cfg.sto(0) as f64 / fs as f64;
    let to_ref = |t: f64| ((t - sto0) / rate0).max(0.0);
    let intervals: Vec<(usize, f64, f64)> = cfg
        .utterance_plan
        .iter()
        .map(|u| (u.speaker, to_ref(u.onset_s), to_ref(u.offset_s)))
        .collect();
    let stft_cfg = StftConfig::default();
    let activity = ActivityMatrix::from_intervals(
        i_count,
        &intervals,
        stft_cfg.frames_for(n),
        stft_cfg.frame_shift_s(fs),
    );

    let rec = MultichannelRecording::new(channels, fs);
    Ok((
        rec,
        GroundTruth {
            true_tdoa_vectors,
            intervals,
            activity,
            clean_sources: clean,
            images,
            noise,
        },
    ))
}
