//! Randomised tabletop meeting layouts.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SceneConfig, SourceRef, Utterance};
use crate::geometry::{distance, Point3};

/// Parameters for [`MeetingSpec::generate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeetingSpec {
    pub n_speakers: usize,
    pub n_mics: usize,
    pub duration_s: f64,
    /// Target fraction of speech time with two speakers active.
    pub overlap_ratio: f64,
    pub t60_s: f64,
    pub snr_db: f64,
    pub room_dims: Point3,
    /// Devices 1.. get a uniform STO in `[-max, max]` seconds.
    pub max_sto_s: f64,
    /// Devices 1.. get a uniform SRO in `[-max, max]` ppm.
    pub max_sro_ppm: f64,
    pub sample_rate_hz: u32,
    /// Utterance length range, seconds.
    pub utterance_s: (f64, f64),
}

impl Default for MeetingSpec {
    fn default() -> Self {
        Self {
            n_speakers: 4,
            n_mics: 4,
            duration_s: 60.0,
            overlap_ratio: 0.0,
            t60_s: 0.0,
            snr_db: 20.0,
            room_dims: [7.0, 5.5, 3.0],
            max_sto_s: 0.0,
            max_sro_ppm: 0.0,
            sample_rate_hz: 16000,
            utterance_s: (2.5, 7.0),
        }
    }
}

impl MeetingSpec {
    pub fn generate(&self, seed: u64) -> SceneConfig {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [lx, ly, _] = self.room_dims;
        let centre = [lx / 2.0, ly / 2.0];

        // Speakers seated around the table, well separated in angle.
        let spacing = 2.0 * PI / self.n_speakers as f64;
        let base = rng.gen_range(0.0..2.0 * PI);
        let source_positions: Vec<Point3> = (0..self.n_speakers)
            .map(|i| {
                let a = base + i as f64 * spacing + rng.gen_range(-0.15..0.15) * spacing;
                let r = rng.gen_range(1.1..1.5);
                [
                    centre[0] + r * a.cos(),
                    centre[1] + r * a.sin(),
                    rng.gen_range(1.15..1.3),
                ]
            })
            .collect();

        // Devices scattered on the table.
        let mut mic_positions: Vec<Point3> = Vec::with_capacity(self.n_mics);
        while mic_positions.len() < self.n_mics {
            let a = rng.gen_range(0.0..2.0 * PI);
            let r = 0.8 * rng.gen_range(0.0f64..1.0).sqrt();
            let p = [
                centre[0] + r * a.cos(),
                centre[1] + r * a.sin(),
                0.75 + rng.gen_range(0.0..0.05),
            ];
            if mic_positions.iter().all(|q| distance(&p, q) > 0.35) {
                mic_positions.push(p);
            }
        }

        let utterance_plan = self.plan(&mut rng);

        let mut sto = vec![0i64; self.n_mics];
        let mut sro = vec![0.0; self.n_mics];
        for m in 1..self.n_mics {
            if self.max_sto_s > 0.0 {
                sto[m] = (rng.gen_range(-self.max_sto_s..self.max_sto_s)
                    * self.sample_rate_hz as f64)
                    .round() as i64;
            }
            if self.max_sro_ppm > 0.0 {
                sro[m] = rng.gen_range(-self.max_sro_ppm..self.max_sro_ppm);
            }
        }

        SceneConfig {
            room_dims: Some(self.room_dims),
            mic_positions,
            source_positions,
            utterance_plan,
            snr_db: self.snr_db,
            t60_s: self.t60_s,
            per_device_sto_samples: sto,
            per_device_sro_ppm: sro,
            sample_rate_hz: self.sample_rate_hz,
            speed_of_sound: 343.0,
            duration_s: Some(self.duration_s),
            seed,
        }
    }

    fn plan(&self, rng: &mut ChaCha8Rng) -> Vec<Utterance> {
        let mut plan: Vec<Utterance> = Vec::new();
        let mut busy_until = vec![0.0f64; self.n_speakers];
        let mut t = rng.gen_range(0.3..0.8);
        let mut prev_end = t;
        let mut last = usize::MAX;
        let end_limit = self.duration_s - 0.4;
        let (lo, hi) = self.utterance_s;
        let r = self.overlap_ratio;
        loop {
            if t >= end_limit - lo * 0.5 {
                break;
            }
            let len = rng.gen_range(lo..hi);
            let candidates: Vec<usize> = (0..self.n_speakers)
                .filter(|&s| s != last && busy_until[s] + 0.2 <= t)
                .collect();
            if candidates.is_empty() {
                t = prev_end + 0.3;
                continue;
            }
            let spk = candidates[rng.gen_range(0..candidates.len())];
            let end = (t + len).min(end_limit);
            if end - t < lo * 0.5 {
                break;
            }
            plan.push(Utterance {
                speaker: spk,
                onset_s: t,
                offset_s: end,
                source: SourceRef::Synthetic {
                    seed: rng.gen(),
                },
            });
            busy_until[spk] = end;
            last = spk;
            prev_end = end;
            if r > 0.0 {
                // next talker barges in before this one finishes
                let ov = (r / (1.0 + r) * (hi + lo) / 2.0 * rng.gen_range(0.7..1.3))
                    .min(0.8 * (end - t));
                t = end - ov;
            } else {
                t = end + rng.gen_range(0.3..1.0);
            }
        }
        plan
    }
}

/// Fraction of speech time (union) with two or more speakers active.
pub fn overlap_fraction(plan: &[Utterance], resolution_s: f64) -> f64 {
    let end = plan.iter().map(|u| u.offset_s).fold(0.0, f64::max);
    let n = (end / resolution_s).ceil() as usize;
    let mut speech = 0usize;
    let mut overlap = 0usize;
    for i in 0..n {
        let t = (i as f64 + 0.5) * resolution_s;
        let k = plan.iter().filter(|u| u.onset_s <= t && t < u.offset_s).count();
        if k > 0 {
            speech += 1;
        }
        if k > 1 {
            overlap += 1;
        }
    }
    if speech == 0 {
        0.0
    } else {
        overlap as f64 / speech as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_config_is_valid_and_deterministic() {
        let spec = MeetingSpec::default();
        let a = spec.generate(7);
        let b = spec.generate(7);
        assert_eq!(a, b);
        a.validate().unwrap();
        assert_eq!(a.n_mics(), 4);
        assert_eq!(a.n_speakers(), 4);
        assert_eq!(overlap_fraction(&a.utterance_plan, 0.01), 0.0);
        for s in 0..4 {
            assert!(a.utterance_plan.iter().any(|u| u.speaker == s), "speaker {s} silent");
        }
    }

    #[test]
    fn overlap_ratio_is_roughly_met() {
        let spec = MeetingSpec {
            overlap_ratio: 0.4,
            ..Default::default()
        };
        let mut total = 0.0;
        for seed in 0..5 {
            let cfg = spec.generate(seed);
            cfg.validate().unwrap();
            total += overlap_fraction(&cfg.utterance_plan, 0.01);
        }
        let mean = total / 5.0;
        assert!(mean > 0.25 && mean < 0.55, "mean overlap {mean}");
    }
}
