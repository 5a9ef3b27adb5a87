//! Scoring of masks and extracted signals against simulation ground truth.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::activity::ActivityMatrix;
use crate::beamform::Extraction;
use crate::dsp::assignment::max_weight_assignment;
use crate::error::Result;
use crate::gss::SegmentMasks;
use crate::metrics::si_sdr;
use crate::stft::{stft, StftConfig};

/// Hypothesis speaker -> reference speaker by maximal total frame overlap.
pub fn speaker_mapping(reference: &ActivityMatrix, hyp: &ActivityMatrix) -> Vec<Option<usize>> {
    let n = reference.n_frames.min(hyp.n_frames);
    if hyp.n_speakers() == 0 || reference.n_speakers() == 0 {
        return vec![None; hyp.n_speakers()];
    }
    let overlap: Vec<Vec<f64>> = (0..hyp.n_speakers())
        .map(|h| {
            (0..reference.n_speakers())
                .map(|r| (0..n).filter(|&l| hyp.active[h][l] && reference.active[r][l]).count() as f64)
                .collect()
        })
        .collect();
    max_weight_assignment(&overlap)
}

/// Per bin `[l * bins + k]` of one channel, the speaker whose image holds
/// more energy than all other speakers plus noise together, if any.
pub fn oracle_dominance(
    images: &[Vec<Vec<f64>>],
    noise: &[Vec<f64>],
    channel: usize,
    fs: u32,
    cfg: &StftConfig,
) -> Result<Vec<Option<usize>>> {
    let mut sigs: Vec<Vec<f64>> = images.iter().map(|img| img[channel].clone()).collect();
    sigs.push(noise[channel].clone());
    let s = stft(&sigs, fs, cfg)?;
    let (n, k_count, c_count) = (s.frames(), s.bins(), sigs.len());
    let mut out = vec![None; n * k_count];
    for l in 0..n {
        for k in 0..k_count {
            let e: Vec<f64> = (0..c_count).map(|c| s.get(c, l, k).norm_sqr()).collect();
            let total: f64 = e.iter().sum();
            if let Some((i, &best)) = e[..c_count - 1]
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
            {
                if best > 0.0 && best > total - best {
                    out[l * k_count + k] = Some(i);
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct MaskAccuracy {
    pub correct: usize,
    pub scored: usize,
    /// Errors where the noise class won.
    pub to_noise: usize,
}

impl MaskAccuracy {
    pub fn ratio(&self) -> f64 {
        if self.scored == 0 {
            0.0
        } else {
            self.correct as f64 / self.scored as f64
        }
    }
}

/// Share of oracle-dominated bins inside GSS segments whose most probable
/// class maps to the dominant speaker. `mapping` maps diarized to true
/// speakers.
pub fn mask_accuracy(
    gss: &[SegmentMasks],
    dominance: &[Option<usize>],
    bins: usize,
    mapping: &[Option<usize>],
) -> MaskAccuracy {
    let mut acc = MaskAccuracy::default();
    for seg in gss {
        let c_count = seg.masks.classes();
        for (ll, l) in seg.frames.clone().enumerate() {
            for k in 0..bins {
                let Some(truth) = dominance.get(l * bins + k).copied().flatten() else {
                    continue;
                };
                acc.scored += 1;
                let best = (0..c_count)
                    .max_by(|&a, &b| {
                        seg.masks
                            .get(a, ll, k)
                            .total_cmp(&seg.masks.get(b, ll, k))
                            .then(b.cmp(&a))
                    })
                    .unwrap_or(c_count - 1);
                let predicted = seg.classes.get(best).and_then(|&spk| mapping.get(spk).copied().flatten());
                if predicted == Some(truth) {
                    acc.correct += 1;
                } else if best == c_count - 1 {
                    acc.to_noise += 1;
                }
            }
        }
    }
    acc
}

/// Sample span owned by frames `frames` on a centred grid.
pub fn frame_samples(frames: &Range<usize>, shift: usize, len: usize) -> Range<usize> {
    let a = (frames.start * shift).saturating_sub(shift / 2).min(len);
    let b = (frames.end * shift).saturating_sub(shift / 2).min(len);
    a..b.max(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdrGain {
    pub enhanced_db: f64,
    pub best_raw_db: f64,
    pub best_raw_channel: usize,
}

impl SdrGain {
    pub fn improvement_db(&self) -> f64 {
        self.enhanced_db - self.best_raw_db
    }
}

/// SI-SDR of an extraction over its segments, against the speaker's image at
/// each segment's reference channel, and of the best single raw channel
/// against its own image over the same samples. `None` without segments.
pub fn sdr_gain(ex: &Extraction, image: &[Vec<f64>], mixture: &[Vec<f64>], shift: usize) -> Result<Option<SdrGain>> {
    if ex.segments.is_empty() {
        return Ok(None);
    }
    let len = ex.signal.len().min(mixture.iter().map(Vec::len).min().unwrap_or(0));
    let (mut est, mut reference) = (Vec::new(), Vec::new());
    let mut raw: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); mixture.len()];
    for seg in &ex.segments {
        let span = frame_samples(&seg.frames, shift, len);
        est.extend_from_slice(&ex.signal[span.clone()]);
        reference.extend_from_slice(&image[seg.reference_channel][span.clone()]);
        for (m, (x, r)) in raw.iter_mut().enumerate() {
            x.extend_from_slice(&mixture[m][span.clone()]);
            r.extend_from_slice(&image[m][span.clone()]);
        }
    }
    if reference.iter().all(|&v| v == 0.0) {
        return Ok(None);
    }
    let enhanced_db = si_sdr(&est, &reference)?;
    let mut best = (0, f64::NEG_INFINITY);
    for (m, (x, r)) in raw.iter().enumerate() {
        let v = si_sdr(x, r)?;
        if v > best.1 {
            best = (m, v);
        }
    }
    Ok(Some(SdrGain {
        enhanced_db,
        best_raw_db: best.1,
        best_raw_channel: best.0,
    }))
}
