use serde::{Deserialize, Serialize};

use crate::dsp::percentile;
use crate::stft::StftConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VadConfig {
    pub margin_db: f64,
    /// Percentile of frame log-energies taken as the noise floor.
    pub floor_percentile: f64,
    /// Centred moving average of frame power, frames.
    pub smoothing_frames: usize,
    /// Frames below this level (dB re full scale) are never active.
    pub absolute_floor_db: f64,
}

impl Default for VadConfig {
    fn default() -> Self {
        Self {
            margin_db: 10.0,
            floor_percentile: 10.0,
            smoothing_frames: 13,
            absolute_floor_db: -100.0,
        }
    }
}

/// Smoothed frame log-energy on the STFT frame grid.
pub fn frame_log_energy(x: &[f64], grid: &StftConfig, n_frames: usize, smoothing: usize) -> Vec<f64> {
    let power: Vec<f64> = (0..n_frames)
        .map(|l| {
            let start = grid.frame_start(l);
            let lo = start.max(0) as usize;
            let hi = ((start + grid.frame_len as isize).max(0) as usize).min(x.len());
            let e: f64 = x.get(lo..hi).map_or(0.0, |s| s.iter().map(|v| v * v).sum());
            e / grid.frame_len as f64
        })
        .collect();
    let span = smoothing.max(1);
    let before = span / 2;
    let after = span - 1 - before;
    (0..n_frames)
        .map(|l| {
            let lo = l.saturating_sub(before);
            let hi = (l + after + 1).min(n_frames);
            let p = power[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
            10.0 * (p + 1e-20).log10()
        })
        .collect()
}

/// Energy VAD: active where the smoothed log-energy exceeds the noise floor
/// (a low percentile) by `margin_db`. When the recording has less dynamic
/// range than two margins (speech throughout) the threshold is lowered to
/// `p90 - margin`, so continuous speech is not cut at its quiet tenth.
pub fn energy_vad(x: &[f64], grid: &StftConfig, n_frames: usize, cfg: &VadConfig) -> Vec<bool> {
    if n_frames == 0 {
        return Vec::new();
    }
    let e = frame_log_energy(x, grid, n_frames, cfg.smoothing_frames);
    let floor = percentile(&e, cfg.floor_percentile);
    let high = percentile(&e, 100.0 - cfg.floor_percentile);
    let threshold = (floor + cfg.margin_db)
        .min(high - cfg.margin_db)
        .max(cfg.absolute_floor_db);
    e.iter().map(|&v| v > threshold).collect()
}
