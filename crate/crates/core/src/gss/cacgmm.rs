//! Complex angular central Gaussian mixture with frame-dependent weights.

use num_complex::Complex64;
use rayon::prelude::*;

use super::MaskSet;
use crate::dsp::linalg::{self, CMatrix};
use crate::error::{Error, Result};
use crate::stft::SpectrogramTensor;

/// Unit-norm observation vectors `Z(l, k) = Y(l, k) / |Y(l, k)|`; bins with
/// (numerically) zero energy are marked invalid and excluded everywhere.
#[derive(Debug, Clone)]
pub struct Observations {
    z: Vec<Complex64>,
    valid: Vec<bool>,
    pub frames: usize,
    pub bins: usize,
    pub mics: usize,
}

impl Observations {
    pub fn from_spectrogram(s: &SpectrogramTensor, frames: std::ops::Range<usize>) -> Self {
        let (m, k_count) = (s.channels(), s.bins());
        let n = frames.len();
        let mut z = Vec::with_capacity(n * k_count * m);
        let mut valid = Vec::with_capacity(n * k_count);
        for l in frames {
            for k in 0..k_count {
                let y = s.observation(l, k);
                let norm = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                let ok = norm > 1e-10 && norm.is_finite();
                valid.push(ok);
                if ok {
                    z.extend(y.iter().map(|v| v / norm));
                } else {
                    z.extend(std::iter::repeat(Complex64::new(0.0, 0.0)).take(m));
                }
            }
        }
        Self {
            z,
            valid,
            frames: n,
            bins: k_count,
            mics: m,
        }
    }

    #[inline]
    pub fn z(&self, l: usize, k: usize) -> &[Complex64] {
        let o = (l * self.bins + k) * self.mics;
        &self.z[o..o + self.mics]
    }

    #[inline]
    pub fn is_valid(&self, l: usize, k: usize) -> bool {
        self.valid[l * self.bins + k]
    }
}

/// Mixture parameters: `b[c * bins + k]`, `pi[c][l]`, guide `class_activity[c][l]`.
/// The last class is noise and always active.
#[derive(Debug, Clone)]
pub struct CacgmmState {
    pub b: Vec<CMatrix>,
    pub pi: Vec<Vec<f64>>,
    pub class_activity: Vec<Vec<bool>>,
    pub bins: usize,
}

impl CacgmmState {
    pub fn classes(&self) -> usize {
        self.pi.len()
    }

    pub fn frames(&self) -> usize {
        self.pi.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmSettings {
    /// Diagonal loading of `B`, relative to `trace(B) / M`.
    pub regularization: f64,
    /// Lower bound on initial weights of active classes.
    pub init_pi_floor: f64,
}

impl Default for EmSettings {
    fn default() -> Self {
        Self {
            regularization: 1e-6,
            init_pi_floor: 1e-3,
        }
    }
}

fn ln_gamma_int(m: usize) -> f64 {
    (1..m).map(|v| (v as f64).ln()).sum()
}

/// `ln` of the ACG normalisation `Gamma(M) / (2 pi^M)`.
fn acg_log_const(m: usize) -> f64 {
    ln_gamma_int(m) - std::f64::consts::LN_2 - m as f64 * std::f64::consts::PI.ln()
}

fn finish_b(mut b: CMatrix, reg: f64) -> CMatrix {
    linalg::hermitize(&mut b);
    linalg::load_diagonal(&mut b, reg);
    let tr = linalg::trace_re(&b);
    let m = b.nrows() as f64;
    if tr > 0.0 && tr.is_finite() {
        b *= Complex64::new(m / tr, 0.0);
    }
    b
}

/// Weighted scatter `M * sum(w z z^H) / sum(w)`; `None` if the weights vanish.
fn scatter(acc: &CMatrix, wsum: f64, m: usize, reg: f64) -> Option<CMatrix> {
    (wsum > 1e-10).then(|| finish_b(acc * Complex64::new(m as f64 / wsum, 0.0), reg))
}

/// One M-step from given masks with `B_old = I`; initial weights are the
/// per-frame mask averages floored for active classes.
pub fn initial_state(
    obs: &Observations,
    masks: &MaskSet,
    class_activity: &[Vec<bool>],
    settings: &EmSettings,
) -> CacgmmState {
    let c_count = masks.classes();
    let (n, k_count, m) = (obs.frames, obs.bins, obs.mics);
    let b: Vec<Vec<CMatrix>> = crate::parallel::pool().install(|| {
        (0..k_count)
            .into_par_iter()
            .map(|k| {
                (0..c_count)
                    .map(|c| {
                        let mut acc = linalg::zeros(m);
                        let mut wsum = 0.0;
                        for l in 0..n {
                            if !obs.is_valid(l, k) {
                                continue;
                            }
                            let g = masks.get(c, l, k);
                            if g > 0.0 {
                                linalg::accumulate_outer(&mut acc, obs.z(l, k), g);
                                wsum += g;
                            }
                        }
                        scatter(&acc, wsum, m, settings.regularization)
                            .unwrap_or_else(|| linalg::identity(m))
                    })
                    .collect()
            })
            .collect()
    });
    let mut flat = vec![linalg::identity(m); c_count * k_count];
    for (k, per_class) in b.into_iter().enumerate() {
        for (c, mat) in per_class.into_iter().enumerate() {
            flat[c * k_count + k] = mat;
        }
    }
    let mut pi = vec![vec![0.0; n]; c_count];
    for l in 0..n {
        let valid = (0..k_count).filter(|&k| obs.is_valid(l, k)).count().max(1) as f64;
        let mut total = 0.0;
        for c in 0..c_count {
            if class_activity[c][l] {
                let avg = (0..k_count)
                    .filter(|&k| obs.is_valid(l, k))
                    .map(|k| masks.get(c, l, k))
                    .sum::<f64>()
                    / valid;
                pi[c][l] = avg.max(settings.init_pi_floor);
                total += pi[c][l];
            }
        }
        for row in pi.iter_mut() {
            row[l] /= total;
        }
    }
    CacgmmState {
        b: flat,
        pi,
        class_activity: class_activity.to_vec(),
        bins: k_count,
    }
}

struct BinResult {
    /// `gamma[l * classes + c]`
    gamma: Vec<f64>,
    ll: f64,
    b_new: Vec<CMatrix>,
}

fn process_bin(
    state: &CacgmmState,
    obs: &Observations,
    k: usize,
    guided: bool,
    settings: &EmSettings,
    update: bool,
) -> Result<BinResult> {
    let c_count = state.classes();
    let (n, m) = (obs.frames, obs.mics);
    let mut inv = Vec::with_capacity(c_count);
    for c in 0..c_count {
        let (bi, logdet) = linalg::inverse_logdet(&state.b[c * state.bins + k]).ok_or(Error::NonFinite {
            frame: usize::MAX,
            bin: k,
        })?;
        inv.push((bi, logdet));
    }
    let log_const = acg_log_const(m);
    let mut gamma = vec![0.0; n * c_count];
    let mut acc = vec![linalg::zeros(m); if update { c_count } else { 0 }];
    let mut wsum = vec![0.0; c_count];
    let mut logp = vec![f64::NEG_INFINITY; c_count];
    let mut q = vec![0.0; c_count];
    let mut ll = 0.0;
    for l in 0..n {
        if !obs.is_valid(l, k) {
            gamma[l * c_count + c_count - 1] = 1.0;
            continue;
        }
        let z = obs.z(l, k);
        let mut max = f64::NEG_INFINITY;
        for c in 0..c_count {
            let allowed = !guided || state.class_activity[c][l];
            let p = state.pi[c][l];
            if !allowed || p <= 0.0 {
                logp[c] = f64::NEG_INFINITY;
                continue;
            }
            q[c] = linalg::quad_form(&inv[c].0, z).max(1e-300);
            logp[c] = p.ln() - inv[c].1 - m as f64 * q[c].ln() + log_const;
            max = max.max(logp[c]);
        }
        let sum: f64 = logp.iter().map(|&v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        if !lse.is_finite() {
            return Err(Error::NonFinite { frame: l, bin: k });
        }
        ll += lse;
        for c in 0..c_count {
            let g = (logp[c] - lse).exp();
            gamma[l * c_count + c] = g;
            if update && g > 0.0 {
                linalg::accumulate_outer(&mut acc[c], z, g / q[c]);
                wsum[c] += g;
            }
        }
    }
    let b_new = if update {
        (0..c_count)
            .map(|c| {
                scatter(&acc[c], wsum[c], m, settings.regularization)
                    .unwrap_or_else(|| state.b[c * state.bins + k].clone())
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(BinResult { gamma, ll, b_new })
}

fn run_bins(
    state: &CacgmmState,
    obs: &Observations,
    guided: bool,
    settings: &EmSettings,
    update: bool,
) -> Result<Vec<BinResult>> {
    crate::parallel::pool().install(|| {
        (0..obs.bins)
            .into_par_iter()
            .map(|k| process_bin(state, obs, k, guided, settings, update))
            .collect()
    })
}

fn assemble_masks(results: &[BinResult], c_count: usize, n: usize) -> MaskSet {
    let k_count = results.len();
    let mut masks = MaskSet::zeros(c_count, n, k_count);
    for (k, r) in results.iter().enumerate() {
        for l in 0..n {
            for c in 0..c_count {
                masks.set(c, l, k, r.gamma[l * c_count + c]);
            }
        }
    }
    masks
}

/// Posteriors and observed-data log-likelihood under the current parameters.
pub fn posteriors(
    state: &CacgmmState,
    obs: &Observations,
    guided: bool,
    settings: &EmSettings,
) -> Result<(MaskSet, f64)> {
    let results = run_bins(state, obs, guided, settings, false)?;
    let ll = results.iter().map(|r| r.ll).sum();
    Ok((assemble_masks(&results, state.classes(), obs.frames), ll))
}

/// One EM iteration. Returns the updated state, the E-step posteriors and
/// the log-likelihood of the *input* state, so successive calls yield a
/// non-decreasing sequence. In guided mode classes inactive at a frame get
/// exactly zero posterior.
pub fn em_iterate(
    state: &CacgmmState,
    obs: &Observations,
    guided: bool,
    settings: &EmSettings,
) -> Result<(CacgmmState, MaskSet, f64)> {
    let c_count = state.classes();
    let (n, k_count) = (obs.frames, obs.bins);
    let results = run_bins(state, obs, guided, settings, true)?;
    let ll: f64 = results.iter().map(|r| r.ll).sum();
    if !ll.is_finite() {
        return Err(Error::NonFinite {
            frame: usize::MAX,
            bin: usize::MAX,
        });
    }

    let mut next = state.clone();
    for (k, r) in results.iter().enumerate() {
        for (c, b) in r.b_new.iter().enumerate() {
            next.b[c * k_count + k] = b.clone();
        }
    }
    for l in 0..n {
        let mut sums = vec![0.0; c_count];
        for (k, r) in results.iter().enumerate() {
            if obs.is_valid(l, k) {
                for (c, s) in sums.iter_mut().enumerate() {
                    *s += r.gamma[l * c_count + c];
                }
            }
        }
        let total: f64 = sums.iter().sum();
        if total > 0.0 {
            for c in 0..c_count {
                next.pi[c][l] = sums[c] / total;
            }
        }
    }
    Ok((next, assemble_masks(&results, c_count, n), ll))
}
