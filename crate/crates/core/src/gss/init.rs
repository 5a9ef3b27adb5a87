//! Initial class masks: frame-wise broadcast of the diarization (T-Init) and
//! bin-wise assignment from TDOA-steered beamformers (TF-Init).

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MaskSet;
use crate::activity::ActivityMatrix;
use crate::dsp::linalg::{self, CMatrix};
use crate::error::{Error, Result};
use crate::geometry::channel_delays;
use crate::stft::SpectrogramTensor;

/// Speaker masks `1 / (n_active + 1)` on active frames; the noise class
/// (last) takes the remainder, so silent frames are all noise.
pub fn t_init(activity: &ActivityMatrix, bins: usize) -> MaskSet {
    let c_count = activity.n_speakers() + 1;
    let n = activity.n_frames;
    let mut masks = MaskSet::zeros(c_count, n, bins);
    for l in 0..n {
        let share = 1.0 / (activity.n_active(l) + 1) as f64;
        for i in 0..activity.n_speakers() {
            if activity.is_active(i, l) {
                masks.fill_frame(i, l, share);
            }
        }
        masks.fill_frame(c_count - 1, l, share);
    }
    masks
}

/// Anechoic steering vector for per-channel delays (samples) at bin `k`,
/// unit norm: `a_m = exp(-j 2 pi k d_m / fft_len) / sqrt(M)`.
pub fn steering_vector(delays: &[f64], k: usize, fft_len: usize) -> Vec<Complex64> {
    let norm = 1.0 / (delays.len() as f64).sqrt();
    delays
        .iter()
        .map(|&d| Complex64::from_polar(norm, -2.0 * std::f64::consts::PI * k as f64 * d / fft_len as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DominanceConfig {
    pub context_frames: usize,
    pub context_bins: usize,
    pub eig_ratio_threshold: f64,
}

impl Default for DominanceConfig {
    fn default() -> Self {
        Self {
            context_frames: 3,
            context_bins: 3,
            // Sources in a 3x3 block around widely spaced devices rarely look
            // rank-1; a mild ratio keeps most single-talker bins.
            eig_ratio_threshold: 1.5,
        }
    }
}

/// Per-bin single-source dominance, `dom[l * bins + k]`: the local SCM over a
/// (frames x bins) neighbourhood has `lambda_1 / lambda_2 > threshold`.
/// Frames with `skip[l]` set are reported as not dominant without work.
pub fn dominance_test(s: &SpectrogramTensor, cfg: &DominanceConfig, skip: Option<&[bool]>) -> Vec<bool> {
    let (n, k_count, m) = (s.frames(), s.bins(), s.channels());
    let (hf, hk) = (cfg.context_frames / 2, cfg.context_bins / 2);
    let rows: Vec<Vec<bool>> = crate::parallel::pool().install(|| {
        (0..n)
            .into_par_iter()
            .map(|l| {
                if skip.is_some_and(|s| s[l]) || m < 2 {
                    return vec![false; k_count];
                }
                let frames = l.saturating_sub(hf)..(l + hf + 1).min(n);
                (0..k_count)
                    .map(|k| {
                        let mut scm = linalg::zeros(m);
                        for ll in frames.clone() {
                            for kk in k.saturating_sub(hk)..(k + hk + 1).min(k_count) {
                                linalg::accumulate_outer(&mut scm, s.observation(ll, kk), 1.0);
                            }
                        }
                        let ev = linalg::eigenvalues_desc(&scm);
                        let (l1, l2) = (ev[0], ev[1].max(0.0));
                        l1 > 0.0 && l1 > cfg.eig_ratio_threshold * l2
                    })
                    .collect()
            })
            .collect()
    });
    rows.concat()
}

/// MVDR weights `R^-1 a / (a^H R^-1 a)` for each active speaker against
/// `R = sum_{j != i} a_j a_j^H + delta I`.
fn mvdr_bank(steer: &[&Vec<Complex64>], delta: f64) -> Vec<Vec<Complex64>> {
    let m = steer[0].len();
    (0..steer.len())
        .map(|i| {
            let mut r = linalg::identity(m) * Complex64::new(delta, 0.0);
            for (j, a) in steer.iter().enumerate() {
                if j != i {
                    linalg::accumulate_outer(&mut r, a, 1.0);
                }
            }
            let r_inv: CMatrix = linalg::inverse(&r).expect("loaded covariance is invertible");
            let a = nalgebra::DVector::from_column_slice(steer[i]);
            let num = &r_inv * &a;
            let den = a.dotc(&num);
            (num / den).iter().copied().collect()
        })
        .collect()
}

/// Bin-wise initial masks: the active speaker whose steered MVDR output has
/// the largest power takes the bin (ties to the lower index); bins failing
/// the dominance test and silent frames go to noise.
pub fn tf_init(
    activity: &ActivityMatrix,
    representatives: &[Vec<f64>],
    s: &SpectrogramTensor,
    dominance: &DominanceConfig,
    loading: f64,
) -> Result<MaskSet> {
    let i_count = activity.n_speakers();
    if representatives.len() < i_count {
        return Err(Error::MissingRepresentative(representatives.len()));
    }
    if let Some(i) = representatives.iter().position(|r| r.is_empty()) {
        return Err(Error::MissingRepresentative(i));
    }
    let (n, k_count, m) = (s.frames(), s.bins(), s.channels());
    if n != activity.n_frames {
        return Err(Error::Input(format!(
            "activity has {} frames, spectrogram {n}",
            activity.n_frames
        )));
    }
    let delta = loading * m as f64;
    let delays: Vec<Vec<f64>> = representatives.iter().map(|r| channel_delays(r, m)).collect();
    let steer: Vec<Vec<Vec<Complex64>>> = delays
        .iter()
        .map(|d| (0..k_count).map(|k| steering_vector(d, k, s.cfg.fft_len)).collect())
        .collect();

    let silent: Vec<bool> = (0..n).map(|l| activity.n_active(l) == 0).collect();
    let dom = dominance_test(s, dominance, Some(&silent));

    // beamformer banks per distinct active set
    let mut banks: HashMap<Vec<usize>, Vec<Vec<Vec<Complex64>>>> = HashMap::new();
    let active_sets: Vec<Vec<usize>> = (0..n)
        .map(|l| (0..i_count).filter(|&i| activity.is_active(i, l)).collect())
        .collect();
    for set in &active_sets {
        if set.is_empty() || banks.contains_key(set) {
            continue;
        }
        let per_bin: Vec<Vec<Vec<Complex64>>> = (0..k_count)
            .map(|k| {
                let a: Vec<&Vec<Complex64>> = set.iter().map(|&i| &steer[i][k]).collect();
                mvdr_bank(&a, delta)
            })
            .collect();
        banks.insert(set.clone(), per_bin);
    }

    let noise = i_count;
    let mut masks = MaskSet::zeros(i_count + 1, n, k_count);
    for l in 0..n {
        let set = &active_sets[l];
        if set.is_empty() {
            masks.fill_frame(noise, l, 1.0);
            continue;
        }
        let bank = &banks[set];
        for k in 0..k_count {
            let y = s.observation(l, k);
            let mut best = (noise, f64::NEG_INFINITY);
            if dom[l * k_count + k] {
                for (slot, &i) in set.iter().enumerate() {
                    let w = &bank[k][slot];
                    let out: Complex64 = w.iter().zip(y).map(|(a, b)| a.conj() * b).sum();
                    let p = out.norm_sqr();
                    if p > best.1 {
                        best = (i, p);
                    }
                }
            }
            masks.set(best.0, l, k, 1.0);
        }
    }
    Ok(masks)
}
