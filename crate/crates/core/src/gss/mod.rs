//! Guided source separation: a complex angular central Gaussian mixture
//! with frame-dependent weights, guided by the diarization and initialised
//! either frame-wise (T-Init) or bin-wise from TDOA vectors (TF-Init).

mod cacgmm;
mod init;

use std::io::{Read, Write};
use std::ops::Range;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

pub use cacgmm::{em_iterate, initial_state, posteriors, CacgmmState, EmSettings, Observations};
pub use init::{dominance_test, steering_vector, t_init, tf_init, DominanceConfig};

use crate::activity::ActivityMatrix;
use crate::error::{Error, Result};
use crate::stft::SpectrogramTensor;

/// Class posteriors `gamma[c][l][k]`, speakers first, noise last.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    data: Vec<f64>,
    classes: usize,
    frames: usize,
    bins: usize,
}

impl MaskSet {
    pub fn zeros(classes: usize, frames: usize, bins: usize) -> Self {
        Self::filled(classes, frames, bins, 0.0)
    }

    pub fn filled(classes: usize, frames: usize, bins: usize, v: f64) -> Self {
        Self {
            data: vec![v; classes * frames * bins],
            classes,
            frames,
            bins,
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn noise_class(&self) -> usize {
        self.classes - 1
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn index(&self, c: usize, l: usize, k: usize) -> usize {
        (c * self.frames + l) * self.bins + k
    }

    #[inline]
    pub fn get(&self, c: usize, l: usize, k: usize) -> f64 {
        self.data[self.index(c, l, k)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, l: usize, k: usize, v: f64) {
        let i = self.index(c, l, k);
        self.data[i] = v;
    }

    /// All bins of class `c` at frame `l`.
    pub fn frame(&self, c: usize, l: usize) -> &[f64] {
        let o = self.index(c, l, 0);
        &self.data[o..o + self.bins]
    }

    pub fn fill_frame(&mut self, c: usize, l: usize, v: f64) {
        let o = self.index(c, l, 0);
        self.data[o..o + self.bins].fill(v);
    }

    /// Per-frame bin average of each class.
    pub fn priors(&self) -> Vec<Vec<f64>> {
        (0..self.classes)
            .map(|c| {
                (0..self.frames)
                    .map(|l| self.frame(c, l).iter().sum::<f64>() / self.bins as f64)
                    .collect()
            })
            .collect()
    }

    /// Classes `select` (in that order) over frames `range`.
    pub fn subset(&self, select: &[usize], range: Range<usize>) -> MaskSet {
        let mut out = MaskSet::zeros(select.len(), range.len(), self.bins);
        for (dst, &c) in select.iter().enumerate() {
            for (ll, l) in range.clone().enumerate() {
                let o = out.index(dst, ll, 0);
                out.data[o..o + self.bins].copy_from_slice(self.frame(c, l));
            }
        }
        out
    }

    /// Largest deviation of a per-bin class sum from one.
    pub fn simplex_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for l in 0..self.frames {
            for k in 0..self.bins {
                let s: f64 = (0..self.classes).map(|c| self.get(c, l, k)).sum();
                worst = worst.max((s - 1.0).abs());
            }
        }
        worst
    }

    pub const MAGIC: [u8; 8] = *b"ASNMASK\0";

    /// Binary container: magic, `u32` LE dims (classes, frames, bins), then
    /// the `f32` LE payload in row-major `[class][frame][bin]` order.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&Self::MAGIC)?;
        for d in [self.classes, self.frames, self.bins] {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for &v in &self.data {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let bad = |detail: &str| Error::Format {
            what: "mask container",
            detail: detail.to_string(),
        };
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if magic != Self::MAGIC {
            return Err(bad("bad magic"));
        }
        let mut dims = [0usize; 3];
        for d in dims.iter_mut() {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|_| bad("truncated header"))?;
            *d = u32::from_le_bytes(b) as usize;
        }
        let count = dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .ok_or_else(|| bad("dimensions overflow"))?;
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        if payload.len() != count * 4 {
            return Err(bad(&format!("expected {} payload bytes, got {}", count * 4, payload.len())));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Ok(Self {
            data,
            classes: dims[0],
            frames: dims[1],
            bins: dims[2],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    TInit,
    #[default]
    TfInit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GssConfig {
    pub n_guided: usize,
    pub n_unguided: usize,
    pub context_s: f64,
    pub init: InitMode,
    pub dominance: DominanceConfig,
    /// Diagonal loading of the steered MVDR interference model, per channel.
    pub steering_loading: f64,
    pub regularization: f64,
    pub init_pi_floor: f64,
}

impl Default for GssConfig {
    fn default() -> Self {
        Self {
            n_guided: 5,
            n_unguided: 5,
            context_s: 5.0,
            init: InitMode::TfInit,
            dominance: DominanceConfig::default(),
            steering_loading: 1e-3,
            regularization: 1e-6,
            init_pi_floor: 1e-3,
        }
    }
}

impl GssConfig {
    fn em_settings(&self) -> EmSettings {
        EmSettings {
            regularization: self.regularization,
            init_pi_floor: self.init_pi_floor,
        }
    }
}

/// EM result for one target segment.
#[derive(Debug, Clone)]
pub struct SegmentMasks {
    pub target: usize,
    pub frames: Range<usize>,
    /// Speakers modelled in the context window, in class order; noise follows.
    pub classes: Vec<usize>,
    /// Final posteriors over `frames`, classes as in `classes` plus noise.
    pub masks: MaskSet,
    /// Final mixture weights over `frames`.
    pub priors: Vec<Vec<f64>>,
    /// Log-likelihood at every E-step, last entry for the final parameters.
    pub log_likelihood: Vec<f64>,
}

impl SegmentMasks {
    pub fn target_class(&self) -> usize {
        self.classes.iter().position(|&c| c == self.target).expect("target is modelled")
    }

    /// Prior of speaker `spk` over the segment, zero if not modelled.
    pub fn speaker_prior(&self, spk: usize) -> Vec<f64> {
        match self.classes.iter().position(|&c| c == spk) {
            Some(c) => self.priors[c].clone(),
            None => vec![0.0; self.frames.len()],
        }
    }
}

/// Runs segment-wise GSS against one recording. Initial masks for the whole
/// recording are computed once and shared by all segments.
pub struct GssRunner<'a> {
    spec: &'a SpectrogramTensor,
    activity: &'a ActivityMatrix,
    representatives: &'a [Vec<f64>],
    cfg: GssConfig,
    init: OnceLock<Result<MaskSet, String>>,
}

impl<'a> GssRunner<'a> {
    pub fn new(
        spec: &'a SpectrogramTensor,
        activity: &'a ActivityMatrix,
        representatives: &'a [Vec<f64>],
        cfg: GssConfig,
    ) -> Result<Self> {
        if activity.n_frames != spec.frames() {
            return Err(Error::Input(format!(
                "activity has {} frames, spectrogram {}",
                activity.n_frames,
                spec.frames()
            )));
        }
        if cfg.init == InitMode::TfInit && representatives.len() < activity.n_speakers() {
            return Err(Error::MissingRepresentative(representatives.len()));
        }
        Ok(Self {
            spec,
            activity,
            representatives,
            cfg,
            init: OnceLock::new(),
        })
    }

    pub fn config(&self) -> &GssConfig {
        &self.cfg
    }

    pub fn init_masks(&self) -> Result<&MaskSet> {
        self.init
            .get_or_init(|| {
                match self.cfg.init {
                    InitMode::TInit => Ok(t_init(self.activity, self.spec.bins())),
                    InitMode::TfInit => tf_init(
                        self.activity,
                        self.representatives,
                        self.spec,
                        &self.cfg.dominance,
                        self.cfg.steering_loading,
                    ),
                }
                .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| Error::Input(e.clone()))
    }

    fn context(&self, segment: &Range<usize>) -> Range<usize> {
        let pad = (self.cfg.context_s / self.spec.frame_shift_s()).round() as usize;
        segment.start.saturating_sub(pad)..(segment.end + pad).min(self.spec.frames())
    }

    /// EM for speaker `target` on `segment`, using a context window around it.
    pub fn run_segment(&self, target: usize, segment: Range<usize>) -> Result<SegmentMasks> {
        if segment.is_empty() || segment.end > self.spec.frames() {
            return Err(Error::EmptySegment);
        }
        if target >= self.activity.n_speakers() {
            return Err(Error::Input(format!("unknown speaker {target}")));
        }
        let ctx = self.context(&segment);
        let mut speakers: Vec<usize> = (0..self.activity.n_speakers())
            .filter(|&i| i == target || ctx.clone().any(|l| self.activity.is_active(i, l)))
            .collect();
        speakers.sort_unstable();

        let init_all = self.init_masks()?;
        let mut select = speakers.clone();
        select.push(init_all.noise_class());
        let mut init = init_all.subset(&select, ctx.clone());
        let noise = speakers.len();
        // mass of speakers left out of the window (always zero for a
        // consistent guide) is folded into noise
        for (ll, l) in ctx.clone().enumerate() {
            for k in 0..init.bins() {
                let kept: f64 = select.iter().map(|&c| init_all.get(c, l, k)).sum();
                if kept < 1.0 {
                    let v = init.get(noise, ll, k) + (1.0 - kept);
                    init.set(noise, ll, k, v);
                }
            }
        }
        let mut class_activity: Vec<Vec<bool>> = speakers
            .iter()
            .map(|&i| ctx.clone().map(|l| self.activity.is_active(i, l)).collect())
            .collect();
        class_activity.push(vec![true; ctx.len()]);

        let obs = Observations::from_spectrogram(self.spec, ctx.clone());
        let settings = self.cfg.em_settings();
        let mut state = initial_state(&obs, &init, &class_activity, &settings);
        let mut lls = Vec::new();
        for it in 0..self.cfg.n_guided + self.cfg.n_unguided {
            let (next, _, ll) = em_iterate(&state, &obs, it < self.cfg.n_guided, &settings)?;
            lls.push(ll);
            state = next;
        }
        let final_guided = self.cfg.n_unguided == 0;
        let (masks, ll) = posteriors(&state, &obs, final_guided, &settings)?;
        lls.push(ll);

        let off = segment.start - ctx.start;
        let local = off..off + segment.len();
        let all: Vec<usize> = (0..masks.classes()).collect();
        Ok(SegmentMasks {
            target,
            frames: segment,
            classes: speakers,
            masks: masks.subset(&all, local.clone()),
            priors: state.pi.iter().map(|p| p[local.clone()].to_vec()).collect(),
            log_likelihood: lls,
        })
    }

    /// Every activity run of every speaker, in (speaker, onset) order.
    pub fn run_all(&self) -> Result<Vec<SegmentMasks>> {
        let mut out = Vec::new();
        for i in 0..self.activity.n_speakers() {
            for seg in self.activity.segments(i) {
                out.push(self.run_segment(i, seg)?);
            }
        }
        Ok(out)
    }
}

/// One-shot helper around [`GssRunner::run_segment`].
pub fn run_gss(
    spec: &SpectrogramTensor,
    activity: &ActivityMatrix,
    representatives: &[Vec<f64>],
    target: usize,
    segment: Range<usize>,
    cfg: &GssConfig,
) -> Result<SegmentMasks> {
    GssRunner::new(spec, activity, representatives, cfg.clone())?.run_segment(target, segment)
}
