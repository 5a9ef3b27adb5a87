//! Frame-wise multi-speaker TDOA vectors: band-limited GCC-PhaT, peak
//! picking, cyclically consistent combination, SRP-PhaT scoring, energy VAD
//! and per-frame speaker counting.

mod combine;
mod gcc;
mod vad;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use combine::{combine_candidates, shared_elements, uniqueness_filter};
pub use gcc::{detect_peaks, gcc_phat, srp_phat, GccTensor};
pub use vad::{energy_vad, VadConfig};

use crate::dsp::{mean, std_dev};
use crate::error::{Error, Result};
use crate::geometry::{mics_for_pairs, n_pairs};
use crate::stft::SpectrogramTensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TdoaEstConfig {
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    /// GCC averaging span, frames.
    #[serde(rename = "L")]
    pub averaging_frames: usize,
    /// Peaks kept per pair and frame.
    #[serde(rename = "C")]
    pub max_peaks: usize,
    pub tau_th: f64,
    pub peak_std_factor: f64,
    /// Half-width of the lag axis, samples.
    pub lag_max: usize,
    pub vad: VadConfig,
}

impl Default for TdoaEstConfig {
    fn default() -> Self {
        Self {
            band_low_hz: 125.0,
            band_high_hz: 3500.0,
            averaging_frames: 13,
            max_peaks: 5,
            tau_th: 2.0,
            peak_std_factor: 2.0,
            lag_max: 256,
            vad: VadConfig::default(),
        }
    }
}

impl TdoaEstConfig {
    pub fn validate(&self, fs: u32, fft_len: usize) -> Result<()> {
        if !(self.band_low_hz > 0.0
            && self.band_low_hz < self.band_high_hz
            && self.band_high_hz <= fs as f64 / 2.0)
        {
            return Err(Error::Config(format!(
                "band [{}, {}] Hz invalid for fs {fs}",
                self.band_low_hz, self.band_high_hz
            )));
        }
        if self.max_peaks == 0 || self.averaging_frames == 0 {
            return Err(Error::Config("C and L must be at least 1".into()));
        }
        if !(self.tau_th >= 0.0) {
            return Err(Error::Config("tau_th must be non-negative".into()));
        }
        if self.lag_max == 0 || self.lag_max >= fft_len / 2 {
            return Err(Error::Config(format!(
                "lag_max {} must lie in 1..{}",
                self.lag_max,
                fft_len / 2
            )));
        }
        Ok(())
    }
}

/// All-pairs TDOA hypothesis for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdoaVector {
    pub frame: usize,
    pub tau: Vec<f64>,
    pub srp: f64,
}

/// Per-frame candidate vectors after combination (sorted by SRP, descending)
/// and the selection that survives speaker counting.
#[derive(Debug, Clone)]
pub struct TdoaTrack {
    pub vad: Vec<bool>,
    pub candidates: Vec<Vec<TdoaVector>>,
    pub selected: Vec<Vec<TdoaVector>>,
    pub n_mics: usize,
    pub frame_shift_s: f64,
}

impl TdoaTrack {
    pub fn n_frames(&self) -> usize {
        self.vad.len()
    }

    pub fn selected_flat(&self) -> impl Iterator<Item = &TdoaVector> {
        self.selected.iter().flatten()
    }
}

/// Keep the best vector of each VAD-active frame plus any further vector
/// whose SRP exceeds `mean - 2 std` of the per-frame maxima.
pub fn select_frame_tdoas(frames: &[Vec<TdoaVector>], vad: &[bool]) -> Vec<Vec<TdoaVector>> {
    let best = |list: &[TdoaVector]| list.iter().map(|v| v.srp).fold(f64::NEG_INFINITY, f64::max);
    let maxima: Vec<f64> = frames
        .iter()
        .zip(vad)
        .filter(|(f, &a)| a && !f.is_empty())
        .map(|(f, _)| best(f))
        .collect();
    let threshold = if maxima.is_empty() {
        f64::INFINITY
    } else {
        mean(&maxima) - 2.0 * std_dev(&maxima)
    };
    frames
        .iter()
        .zip(vad)
        .map(|(list, &active)| {
            if !active || list.is_empty() {
                return Vec::new();
            }
            let mut sorted = list.clone();
            sort_by_srp(&mut sorted);
            let mut out = vec![sorted[0].clone()];
            out.extend(sorted.into_iter().skip(1).filter(|v| v.srp > threshold));
            out
        })
        .collect()
}

/// SRP descending, ties by lexicographically smaller lags.
pub(crate) fn sort_by_srp(v: &mut [TdoaVector]) {
    v.sort_by(|a, b| {
        b.srp.total_cmp(&a.srp).then_with(|| {
            a.tau
                .iter()
                .zip(&b.tau)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
}

/// Candidate vectors of one frame: peaks on every pair, then combination.
pub fn frame_candidates(g: &GccTensor, frame: usize, cfg: &TdoaEstConfig) -> Vec<TdoaVector> {
    let per_pair: Vec<Vec<(isize, f64)>> = (0..g.pairs())
        .map(|p| detect_peaks(g.slice(p, frame), g.lag_max, cfg))
        .collect();
    combine_candidates(&per_pair, g, frame, cfg)
}

/// Full estimator: GCC-PhaT on the (synchronised) spectrogram, VAD on the
/// reference channel, combination on active frames, then counting.
pub fn estimate_tdoas(
    spec: &SpectrogramTensor,
    reference: &[f64],
    cfg: &TdoaEstConfig,
) -> Result<TdoaTrack> {
    if spec.channels() < 2 {
        return Err(Error::Input("TDOA estimation needs at least 2 channels".into()));
    }
    cfg.validate(spec.sample_rate_hz, spec.cfg.fft_len)?;
    let g = gcc_phat(spec, cfg);
    let vad = energy_vad(reference, &spec.cfg, spec.frames(), &cfg.vad);
    let candidates: Vec<Vec<TdoaVector>> = crate::parallel::pool().install(|| {
        (0..spec.frames())
            .into_par_iter()
            .map(|l| {
                if vad[l] {
                    frame_candidates(&g, l, cfg)
                } else {
                    Vec::new()
                }
            })
            .collect()
    });
    let selected = select_frame_tdoas(&candidates, &vad);
    debug_assert_eq!(n_pairs(spec.channels()), g.pairs());
    Ok(TdoaTrack {
        vad,
        candidates,
        selected,
        n_mics: mics_for_pairs(g.pairs()).unwrap_or(spec.channels()),
        frame_shift_s: spec.frame_shift_s(),
    })
}

/// JSON-lines export, one object per selected vector.
pub fn write_jsonl(track: &TdoaTrack, mut w: impl std::io::Write) -> Result<()> {
    for v in track.selected_flat() {
        serde_json::to_writer(&mut w, v)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(r: impl std::io::BufRead) -> Result<Vec<TdoaVector>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
