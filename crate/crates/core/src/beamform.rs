//! Mask-based MVDR extraction: re-segmentation from GSS priors, target and
//! interference SCMs, Souden-form weights and reference-channel selection.

use std::ops::Range;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activity::{runs, ActivityMatrix};
use crate::diarize::smooth_activity;
use crate::dsp::linalg::{self, CMatrix};
use crate::error::{Error, Result};
use crate::gss::SegmentMasks;
use crate::stft::{istft, SpectrogramTensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanConfig {
    pub activity_threshold: f64,
    pub dilate_frames: usize,
    pub erode_frames: usize,
    pub min_subsegment_frames: usize,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            activity_threshold: 0.2,
            dilate_frames: 25,
            erode_frames: 15,
            min_subsegment_frames: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeamformConfig {
    pub plan: PlanConfig,
    /// Diagonal loading of the interference SCM, relative to `trace / M`.
    pub loading: f64,
}

impl Default for BeamformConfig {
    fn default() -> Self {
        Self {
            plan: PlanConfig::default(),
            loading: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubSegment {
    pub frames: Range<usize>,
    /// Interferers above threshold (union if short pieces were merged).
    pub interferers: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedSegment {
    pub frames: Range<usize>,
    pub subsegments: Vec<SubSegment>,
}

/// Target segments of every speaker with their interferer sub-segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SegmentPlan {
    pub speakers: Vec<Vec<PlannedSegment>>,
}

fn interferers_at(active: &ActivityMatrix, target: usize, l: usize) -> Vec<usize> {
    (0..active.n_speakers())
        .filter(|&j| j != target && active.active[j][l])
        .collect()
}

/// Thresholded and closed activity of every speaker. Raw priors of
/// interferers flicker around the threshold in overlap, which would cut
/// sub-segments too short for a usable interference SCM.
fn smoothed_activity(priors: &[Vec<f64>], cfg: &PlanConfig) -> ActivityMatrix {
    let n = priors.first().map_or(0, Vec::len);
    let raw: Vec<Vec<bool>> = priors
        .iter()
        .map(|p| p.iter().map(|&v| v > cfg.activity_threshold).collect())
        .collect();
    smooth_activity(&ActivityMatrix::new(raw, n, 1.0), cfg.dilate_frames, cfg.erode_frames)
}

/// Split `frames` where the interferer set changes; pieces shorter than the
/// minimum are merged into their left neighbour (the right one for a short
/// first piece).
fn split_subsegments(active: &ActivityMatrix, target: usize, frames: Range<usize>, cfg: &PlanConfig) -> Vec<SubSegment> {
    let mut pieces: Vec<SubSegment> = Vec::new();
    for l in frames {
        let set = interferers_at(active, target, l);
        match pieces.last_mut() {
            Some(p) if p.interferers == set => p.frames.end = l + 1,
            _ => pieces.push(SubSegment {
                frames: l..l + 1,
                interferers: set,
            }),
        }
    }
    let min = cfg.min_subsegment_frames.max(1);
    let mut out: Vec<SubSegment> = Vec::new();
    for p in pieces {
        match out.last_mut() {
            Some(prev) if p.frames.len() < min || prev.frames.len() < min => {
                prev.frames.end = p.frames.end;
                for j in p.interferers {
                    if !prev.interferers.contains(&j) {
                        prev.interferers.push(j);
                    }
                }
                prev.interferers.sort_unstable();
            }
            _ => out.push(p),
        }
    }
    out
}

/// Refined segments of one speaker from per-frame priors `priors[speaker][l]`
/// (noise excluded): thresholded, closed, then split where the (equally
/// closed) interferer set changes.
pub fn resegment_target(priors: &[Vec<f64>], target: usize, cfg: &PlanConfig) -> Vec<PlannedSegment> {
    if target >= priors.len() {
        return Vec::new();
    }
    let act = smoothed_activity(priors, cfg);
    runs(&act.active[target])
        .into_iter()
        .map(|frames| PlannedSegment {
            subsegments: split_subsegments(&act, target, frames.clone(), cfg),
            frames,
        })
        .collect()
}

pub fn resegment(priors: &[Vec<f64>], cfg: &PlanConfig) -> SegmentPlan {
    SegmentPlan {
        speakers: (0..priors.len()).map(|i| resegment_target(priors, i, cfg)).collect(),
    }
}

type MaskFn<'a> = dyn Fn(usize, usize) -> f64 + Sync + 'a;

fn weighted_scm(
    s: &SpectrogramTensor,
    frames: Range<usize>,
    weight: impl Fn(usize, usize) -> f64 + Sync,
) -> Result<Vec<CMatrix>> {
    if frames.is_empty() {
        return Err(Error::EmptySegment);
    }
    let m = s.channels();
    let norm = 1.0 / frames.len() as f64;
    Ok(crate::parallel::pool().install(|| {
        (0..s.bins())
            .into_par_iter()
            .map(|k| {
                let mut acc = linalg::zeros(m);
                for l in frames.clone() {
                    let w = weight(l, k);
                    if w != 0.0 {
                        linalg::accumulate_outer(&mut acc, s.observation(l, k), w * norm);
                    }
                }
                linalg::hermitize(&mut acc);
                acc
            })
            .collect()
    }))
}

/// `Phi_i(k) = mean over T_i of gamma^2 Y Y^H`.
pub fn estimate_target_scm(s: &SpectrogramTensor, gamma: &MaskFn, frames: Range<usize>) -> Result<Vec<CMatrix>> {
    weighted_scm(s, frames, |l, k| gamma(l, k).powi(2))
}

/// `Phi_bar(k) = mean over the sub-segment of (1 - gamma)^2 Y Y^H`.
pub fn estimate_interference_scm(
    s: &SpectrogramTensor,
    gamma: &MaskFn,
    frames: Range<usize>,
) -> Result<Vec<CMatrix>> {
    weighted_scm(s, frames, |l, k| (1.0 - gamma(l, k)).powi(2))
}

fn unit(m: usize, r: usize) -> Vec<Complex64> {
    let mut u = vec![Complex64::new(0.0, 0.0); m];
    u[r] = Complex64::new(1.0, 0.0);
    u
}

/// Souden MVDR `w = (Phi_bar^-1 Phi) u_ref / trace(Phi_bar^-1 Phi)`; the
/// interference SCM is diagonally loaded first. A vanishing trace (or a
/// singular interference model) falls back to the reference channel.
pub fn mvdr_souden(target: &CMatrix, interference: &CMatrix, reference: usize, loading: f64) -> Vec<Complex64> {
    let m = target.nrows();
    let mut phi_n = interference.clone();
    linalg::load_diagonal(&mut phi_n, loading);
    let Some(inv) = linalg::inverse(&phi_n) else {
        return unit(m, reference);
    };
    let num = inv * target;
    let tr: Complex64 = (0..m).map(|i| num[(i, i)]).sum();
    if !(tr.norm() > 1e-12) || !tr.is_finite() {
        return unit(m, reference);
    }
    (0..m).map(|i| num[(i, reference)] / tr).collect()
}

fn quad(w: &[Complex64], a: &CMatrix) -> f64 {
    let m = w.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..m {
        for j in 0..m {
            acc += w[i].conj() * a[(i, j)] * w[j];
        }
    }
    acc.re
}

/// `10 log10(sum_k w^H Phi w / sum_k w^H Phi_bar w)`.
pub fn expected_sdr(weights: &[Vec<Complex64>], target: &[CMatrix], interference: &[CMatrix]) -> f64 {
    let (mut s, mut n) = (0.0, 0.0);
    for ((w, t), i) in weights.iter().zip(target).zip(interference) {
        s += quad(w, t);
        n += quad(w, i);
    }
    if n <= 0.0 {
        return if s > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    }
    10.0 * (s / n).log10()
}

/// `sdr[channel][subsegment]` -> channel maximising the worst sub-segment;
/// ties go to the lowest index.
pub fn select_reference(sdr: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (m, row) in sdr.iter().enumerate() {
        let worst = row.iter().copied().fold(f64::INFINITY, f64::min);
        if worst > best.1 || (m == 0 && best.1 == f64::NEG_INFINITY) {
            best = (m, worst);
        }
    }
    best.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnhancedSegment {
    pub frames: Range<usize>,
    pub reference_channel: usize,
    pub expected_sdr_db: f64,
    pub subsegments: usize,
}

/// Beamform one planned segment into `out` (single channel, full length).
fn beamform_segment(
    s: &SpectrogramTensor,
    gamma: &MaskFn,
    seg: &PlannedSegment,
    cfg: &BeamformConfig,
    out: &mut SpectrogramTensor,
) -> Result<EnhancedSegment> {
    let m = s.channels();
    let k_count = s.bins();
    let phi = estimate_target_scm(s, gamma, seg.frames.clone())?;
    let phi_bar: Vec<Vec<CMatrix>> = seg
        .subsegments
        .iter()
        .map(|b| estimate_interference_scm(s, gamma, b.frames.clone()))
        .collect::<Result<_>>()?;
    // weights[ref][sub][k]
    let weights: Vec<Vec<Vec<Vec<Complex64>>>> = crate::parallel::pool().install(|| {
        (0..m)
            .into_par_iter()
            .map(|r| {
                phi_bar
                    .iter()
                    .map(|pb| (0..k_count).map(|k| mvdr_souden(&phi[k], &pb[k], r, cfg.loading)).collect())
                    .collect()
            })
            .collect()
    });
    let sdr: Vec<Vec<f64>> = weights
        .iter()
        .map(|per_sub| {
            per_sub
                .iter()
                .zip(&phi_bar)
                .map(|(w, pb)| expected_sdr(w, &phi, pb))
                .collect()
        })
        .collect();
    let r = select_reference(&sdr);
    for (b, sub) in seg.subsegments.iter().enumerate() {
        let w = &weights[r][b];
        for l in sub.frames.clone() {
            for (k, wk) in w.iter().enumerate() {
                let y = s.observation(l, k);
                let v: Complex64 = wk.iter().zip(y).map(|(a, b)| a.conj() * b).sum();
                out.set(0, l, k, v);
            }
        }
    }
    Ok(EnhancedSegment {
        frames: seg.frames.clone(),
        reference_channel: r,
        expected_sdr_db: sdr[r].iter().copied().fold(f64::INFINITY, f64::min),
        subsegments: seg.subsegments.len(),
    })
}

#[derive(Debug, Clone)]
pub struct Extraction {
    /// Time-domain estimate, recording length, zero outside segments.
    pub signal: Vec<f64>,
    pub segments: Vec<EnhancedSegment>,
}

/// Synthesis of the beamformed frames; frames overlap, so samples owned by
/// frames outside every segment are silenced.
fn synthesise(out: &SpectrogramTensor, done: Vec<EnhancedSegment>) -> Extraction {
    let mut signal = istft(out).swap_remove(0);
    let shift = out.cfg.frame_shift;
    let mut keep = vec![false; signal.len()];
    for seg in &done {
        let a = (seg.frames.start * shift).saturating_sub(shift / 2);
        let b = (seg.frames.end * shift).saturating_sub(shift / 2).min(signal.len());
        keep[a.min(b)..b].iter_mut().for_each(|v| *v = true);
    }
    for (v, k) in signal.iter_mut().zip(keep) {
        if !k {
            *v = 0.0;
        }
    }
    Extraction { signal, segments: done }
}

/// Beamform the given segments with a recording-level target mask
/// `gamma(l, k)` and synthesise the full-length signal.
pub fn extract_with_masks(
    s: &SpectrogramTensor,
    gamma: &MaskFn,
    segments: &[PlannedSegment],
    cfg: &BeamformConfig,
) -> Result<Extraction> {
    let mut out = SpectrogramTensor::zeros(1, s.frames(), s.cfg, s.sample_rate_hz, s.signal_len);
    let mut done = Vec::with_capacity(segments.len());
    for seg in segments {
        done.push(beamform_segment(s, gamma, seg, cfg, &mut out)?);
    }
    Ok(synthesise(&out, done))
}

/// Extract speaker `target` from its GSS segment results: each segment is
/// re-segmented from its priors and beamformed with its own target mask.
pub fn extract_speaker(
    s: &SpectrogramTensor,
    gss: &[SegmentMasks],
    target: usize,
    n_speakers: usize,
    cfg: &BeamformConfig,
) -> Result<Extraction> {
    let mut out = SpectrogramTensor::zeros(1, s.frames(), s.cfg, s.sample_rate_hz, s.signal_len);
    let mut done = Vec::new();
    for seg in gss.iter().filter(|g| g.target == target) {
        let start = seg.frames.start;
        let priors: Vec<Vec<f64>> = (0..n_speakers).map(|j| seg.speaker_prior(j)).collect();
        let tc = seg.target_class();
        let masks = &seg.masks;
        let end = seg.frames.end;
        let gamma = move |l: usize, k: usize| {
            if l >= start && l < end {
                masks.get(tc, l - start, k)
            } else {
                0.0
            }
        };
        for planned in resegment_target(&priors, target, &cfg.plan) {
            let shifted = PlannedSegment {
                frames: planned.frames.start + start..planned.frames.end + start,
                subsegments: planned
                    .subsegments
                    .into_iter()
                    .map(|b| SubSegment {
                        frames: b.frames.start + start..b.frames.end + start,
                        interferers: b.interferers,
                    })
                    .collect(),
            };
            done.push(beamform_segment(s, &gamma, &shifted, cfg, &mut out)?);
        }
    }
    Ok(synthesise(&out, done))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSegment {
    pub start_s: f64,
    pub end_s: f64,
    pub reference_channel: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSpeaker {
    pub speaker: String,
    pub file: String,
    pub segments: Vec<ManifestSegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub session: String,
    pub speakers: Vec<ManifestSpeaker>,
}

impl Manifest {
    pub fn wav_name(session: &str, speaker: &str) -> String {
        format!("{session}_{speaker}.wav")
    }

    pub fn speaker_entry(session: &str, speaker: &str, ex: &Extraction, frame_shift_s: f64) -> ManifestSpeaker {
        ManifestSpeaker {
            speaker: speaker.to_string(),
            file: Self::wav_name(session, speaker),
            segments: ex
                .segments
                .iter()
                .map(|s| ManifestSegment {
                    start_s: s.frames.start as f64 * frame_shift_s,
                    end_s: s.frames.end as f64 * frame_shift_s,
                    reference_channel: s.reference_channel,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stft::StftConfig;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, StandardNormal};

    fn cn(rng: &mut rand_chacha::ChaCha8Rng) -> Complex64 {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    }

    fn spec(frames: usize) -> SpectrogramTensor {
        let cfg = StftConfig {
            frame_len: 16,
            frame_shift: 8,
            fft_len: 16,
            ..Default::default()
        };
        SpectrogramTensor::zeros(3, frames, cfg, 16000, frames * 8)
    }

    #[test]
    fn single_speaker_one_segment_one_subsegment() {
        let priors = vec![[vec![0.0; 20], vec![0.9; 30], vec![0.0; 20]].concat()];
        let plan = resegment(&priors, &PlanConfig::default());
        assert_eq!(plan.speakers[0].len(), 1);
        assert_eq!(plan.speakers[0][0].subsegments.len(), 1);
        // closing pads by (dilate - erode) / 2 frames on each side
        assert_eq!(plan.speakers[0][0].frames, 15..55);
    }

    #[test]
    fn interferer_in_middle_gives_three_subsegments() {
        let n = 90;
        let target = vec![0.8; n];
        let other: Vec<f64> = (0..n).map(|l| if (30..60).contains(&l) { 0.5 } else { 0.05 }).collect();
        let segs = resegment_target(&[target, other], 0, &PlanConfig::default());
        assert_eq!(segs.len(), 1);
        let subs: Vec<_> = segs[0].subsegments.iter().map(|b| (b.frames.clone(), b.interferers.clone())).collect();
        // the interferer is closed like the target: 5 frames of padding
        assert_eq!(subs, vec![(0..25, vec![]), (25..65, vec![1]), (65..90, vec![])]);
    }

    #[test]
    fn flickering_interferer_stays_one_subsegment() {
        let n = 120;
        let other: Vec<f64> = (0..n)
            .map(|l| if (40..80).contains(&l) && l % 3 != 0 { 0.3 } else { 0.1 })
            .collect();
        let segs = resegment_target(&[vec![0.8; n], other], 0, &PlanConfig::default());
        let subs: Vec<_> = segs[0].subsegments.iter().map(|b| (b.frames.clone(), b.interferers.clone())).collect();
        assert_eq!(subs, vec![(0..35, vec![]), (35..85, vec![1]), (85..120, vec![])]);
    }

    #[test]
    fn short_subsegments_are_merged() {
        let n = 40;
        let other: Vec<f64> = (0..n).map(|l| if (20..22).contains(&l) { 0.5 } else { 0.0 }).collect();
        let raw = PlanConfig {
            dilate_frames: 0,
            erode_frames: 0,
            ..Default::default()
        };
        let segs = resegment_target(&[vec![0.8; n], other], 0, &raw);
        let subs = &segs[0].subsegments;
        assert_eq!(subs.len(), 2);
        assert_eq!(subs[0].frames, 0..22);
        assert_eq!(subs[0].interferers, vec![1]);
        let covered: usize = subs.iter().map(|b| b.frames.len()).sum();
        assert_eq!(covered, segs[0].frames.len());
    }

    #[test]
    fn scm_trivial_cases() {
        let mut s = spec(3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for l in 0..3 {
            for k in 0..s.bins() {
                for m in 0..3 {
                    s.set(m, l, k, cn(&mut rng));
                }
            }
        }
        let one = |_: usize, _: usize| 1.0;
        let zero = |_: usize, _: usize| 0.0;
        let t = estimate_target_scm(&s, &one, 1..2).unwrap();
        let mut want = linalg::zeros(3);
        linalg::accumulate_outer(&mut want, s.observation(1, 4), 1.0);
        assert!(linalg::max_abs_diff(&t[4], &want) < 1e-12);
        assert!(estimate_target_scm(&s, &zero, 0..3).unwrap().iter().all(|p| linalg::frobenius(p) == 0.0));
        assert!(estimate_interference_scm(&s, &one, 0..3).unwrap().iter().all(|p| linalg::frobenius(p) == 0.0));
        let i = estimate_interference_scm(&s, &zero, 0..3).unwrap();
        let mut avg = linalg::zeros(3);
        for l in 0..3 {
            linalg::accumulate_outer(&mut avg, s.observation(l, 2), 1.0 / 3.0);
        }
        assert!(linalg::max_abs_diff(&i[2], &avg) < 1e-12);
        assert!(matches!(estimate_target_scm(&s, &one, 2..2), Err(Error::EmptySegment)));
    }

    #[test]
    fn souden_identity_and_rank_one() {
        let id = linalg::identity(3);
        // identical SCMs: Phi_bar^-1 Phi = I with trace M
        let w = mvdr_souden(&id, &id, 1, 0.0);
        assert!((w[1].re - 1.0 / 3.0).abs() < 1e-15 && w[0].norm() == 0.0 && w[2].norm() == 0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let a: Vec<Complex64> = (0..3).map(|_| cn(&mut rng)).collect();
        let mut phi = linalg::zeros(3);
        linalg::accumulate_outer(&mut phi, &a, 2.5);
        for r in 0..3 {
            let w = mvdr_souden(&phi, &id, r, 0.0);
            let resp: Complex64 = w.iter().zip(&a).map(|(w, a)| w.conj() * a).sum();
            assert!((resp - a[r]).norm() < 1e-9 * a[r].norm());
        }
        assert_eq!(mvdr_souden(&linalg::zeros(3), &id, 2, 1e-6), unit(3, 2));
    }

    #[test]
    fn reference_selection_rules() {
        assert_eq!(select_reference(&[vec![3.0], vec![3.0], vec![3.0]]), 0);
        assert_eq!(select_reference(&[vec![3.0, 1.0], vec![2.0, 2.0]]), 1);
        assert_eq!(select_reference(&[vec![1.0], vec![4.0]]), 1);
        assert_eq!(select_reference(&[vec![f64::NEG_INFINITY], vec![f64::NEG_INFINITY]]), 0);
    }

    #[test]
    fn silent_speaker_extracts_zeros() {
        let s = spec(20);
        let ex = extract_with_masks(&s, &|_, _| 0.0, &[], &BeamformConfig::default()).unwrap();
        assert_eq!(ex.signal.len(), s.signal_len);
        assert!(ex.signal.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_plane_waves_interference_suppressed() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 200;
        let mut s = spec(n);
        let a: Vec<Vec<Complex64>> = (0..s.bins()).map(|_| (0..3).map(|_| cn(&mut rng)).collect()).collect();
        let b: Vec<Vec<Complex64>> = (0..s.bins()).map(|_| (0..3).map(|_| cn(&mut rng)).collect()).collect();
        let mut oracle = vec![vec![0.0; s.bins()]; n];
        for l in 0..n {
            for k in 0..s.bins() {
                // target in even frames, interferer in odd frames
                let (v, g) = if l % 2 == 0 { (&a[k], 1.0) } else { (&b[k], 0.0) };
                let amp = cn(&mut rng);
                for m in 0..3 {
                    let e = cn(&mut rng) * 1e-3 * rng.gen_range(0.5..1.0);
                    s.set(m, l, k, v[m] * amp + e);
                }
                oracle[l][k] = g;
            }
        }
        let gamma = |l: usize, k: usize| oracle[l][k];
        let phi = estimate_target_scm(&s, &gamma, 0..n).unwrap();
        let phi_b = estimate_interference_scm(&s, &gamma, 0..n).unwrap();
        for k in 0..s.bins() {
            let w = mvdr_souden(&phi[k], &phi_b[k], 0, 1e-6);
            let ta: Complex64 = w.iter().zip(&a[k]).map(|(w, v)| w.conj() * v).sum();
            let ib: Complex64 = w.iter().zip(&b[k]).map(|(w, v)| w.conj() * v).sum();
            let sir_out = 10.0 * (ta.norm_sqr() / ib.norm_sqr()).log10();
            let sir_in = 10.0 * (a[k][0].norm_sqr() / b[k][0].norm_sqr()).log10();
            assert!(sir_out - sir_in >= 15.0, "bin {k}: {sir_in} -> {sir_out}");
            let v = linalg::principal_eigenvector(&phi_b[k]);
            assert!(linalg::cosine_similarity(&v, &b[k]) > 0.99);
        }
    }
}
