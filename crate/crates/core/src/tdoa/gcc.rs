use num_complex::Complex64;
use rayon::prelude::*;

use super::TdoaEstConfig;
use crate::dsp::fft;
use crate::geometry::mic_pairs;
use crate::stft::SpectrogramTensor;

/// Time-averaged GCC-PhaT per pair, frame and lag in `[-lag_max, lag_max]`.
#[derive(Debug, Clone)]
pub struct GccTensor {
    values: Vec<f32>,
    pairs: usize,
    frames: usize,
    pub lag_max: usize,
    pub averaging_span: usize,
}

impl GccTensor {
    pub fn zeros(pairs: usize, frames: usize, lag_max: usize, averaging_span: usize) -> Self {
        Self {
            values: vec![0.0; pairs * frames * (2 * lag_max + 1)],
            pairs,
            frames,
            lag_max,
            averaging_span,
        }
    }

    /// Build from explicit slices, `slices[pair][frame]` of length `2 * lag_max + 1`.
    pub fn from_slices(slices: &[Vec<Vec<f32>>], lag_max: usize) -> Self {
        let pairs = slices.len();
        let frames = slices.first().map_or(0, Vec::len);
        let mut g = Self::zeros(pairs, frames, lag_max, 1);
        for (p, per_frame) in slices.iter().enumerate() {
            for (l, s) in per_frame.iter().enumerate() {
                g.slice_mut(p, l).copy_from_slice(s);
            }
        }
        g
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn lags(&self) -> usize {
        2 * self.lag_max + 1
    }

    fn offset(&self, p: usize, l: usize) -> usize {
        (p * self.frames + l) * self.lags()
    }

    pub fn slice(&self, p: usize, l: usize) -> &[f32] {
        let o = self.offset(p, l);
        &self.values[o..o + self.lags()]
    }

    pub fn slice_mut(&mut self, p: usize, l: usize) -> &mut [f32] {
        let o = self.offset(p, l);
        let n = self.lags();
        &mut self.values[o..o + n]
    }

    /// Value at integer lag; zero outside the lag axis.
    pub fn at(&self, p: usize, l: usize, lag: isize) -> f64 {
        let i = lag + self.lag_max as isize;
        if i < 0 || i as usize >= self.lags() {
            0.0
        } else {
            self.slice(p, l)[i as usize] as f64
        }
    }

    /// Linear interpolation between neighbouring lags.
    pub fn interp(&self, p: usize, l: usize, tau: f64) -> f64 {
        let lo = tau.floor();
        let frac = tau - lo;
        let a = self.at(p, l, lo as isize);
        if frac == 0.0 {
            a
        } else {
            (1.0 - frac) * a + frac * self.at(p, l, lo as isize + 1)
        }
    }
}

/// Band-limited GCC-PhaT of every pair. Phase-normalised cross-spectra are
/// averaged over `L` frames centred on each frame before the inverse
/// transform. Identical channels give a unit peak at lag 0.
pub fn gcc_phat(spec: &SpectrogramTensor, cfg: &TdoaEstConfig) -> GccTensor {
    let n = spec.cfg.fft_len;
    let frames = spec.frames();
    let lag_max = cfg.lag_max.min(n / 2 - 1);
    let band: Vec<usize> = (1..spec.bins().min(n / 2))
        .filter(|&k| {
            let f = spec.bin_hz(k);
            f >= cfg.band_low_hz && f <= cfg.band_high_hz
        })
        .collect();
    let pairs = mic_pairs(spec.channels());
    let mut g = GccTensor::zeros(pairs.len(), frames, lag_max, cfg.averaging_frames);
    if band.is_empty() || frames == 0 {
        return g;
    }
    let span = cfg.averaging_frames.max(1);
    let before = span / 2;
    let after = span - 1 - before;
    let lags = g.lags();

    let phat = |m: usize, o: usize, l: usize, out: &mut [Complex64]| {
        for (c, &k) in out.iter_mut().zip(&band) {
            let x = spec.get(m, l, k).conj() * spec.get(o, l, k);
            let mag = x.norm();
            *c = if mag > 0.0 && mag.is_finite() {
                x / mag
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
    };

    let chunks: Vec<Vec<f32>> = crate::parallel::pool().install(|| {
        pairs
            .par_iter()
            .map(|&(m, o)| {
                let ifft = fft::inverse(n);
                let mut out = vec![0.0f32; frames * lags];
                let mut sum = vec![Complex64::new(0.0, 0.0); band.len()];
                let mut tmp = vec![Complex64::new(0.0, 0.0); band.len()];
                let mut buf = vec![Complex64::new(0.0, 0.0); n];
                let (mut lo, mut hi) = (0usize, 0usize); // window [lo, hi)
                for l in 0..frames {
                    let want_lo = l.saturating_sub(before);
                    let want_hi = (l + after + 1).min(frames);
                    while hi < want_hi {
                        phat(m, o, hi, &mut tmp);
                        sum.iter_mut().zip(&tmp).for_each(|(s, t)| *s += t);
                        hi += 1;
                    }
                    while lo < want_lo {
                        phat(m, o, lo, &mut tmp);
                        sum.iter_mut().zip(&tmp).for_each(|(s, t)| *s -= t);
                        lo += 1;
                    }
                    let scale = 1.0 / ((hi - lo) as f64 * 2.0 * band.len() as f64);
                    buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
                    for (&k, s) in band.iter().zip(&sum) {
                        buf[k] = s * scale;
                        buf[n - k] = (s * scale).conj();
                    }
                    ifft.process(&mut buf);
                    let dst = &mut out[l * lags..(l + 1) * lags];
                    for (i, d) in dst.iter_mut().enumerate() {
                        let lag = i as isize - lag_max as isize;
                        *d = buf[lag.rem_euclid(n as isize) as usize].re as f32;
                    }
                }
                out
            })
            .collect()
    });
    for (p, chunk) in chunks.into_iter().enumerate() {
        let o = g.offset(p, 0);
        g.values[o..o + chunk.len()].copy_from_slice(&chunk);
    }
    g
}

/// Up to `C` strict positive local maxima above `peak_std_factor` standard
/// deviations of the slice, strongest first (ties: smaller lag first).
pub fn detect_peaks(slice: &[f32], lag_max: usize, cfg: &TdoaEstConfig) -> Vec<(isize, f64)> {
    if slice.len() < 3 {
        return Vec::new();
    }
    let vals: Vec<f64> = slice.iter().map(|&v| v as f64).collect();
    let threshold = cfg.peak_std_factor * crate::dsp::std_dev(&vals);
    let mut peaks: Vec<(isize, f64)> = (1..vals.len() - 1)
        .filter(|&i| {
            let v = vals[i];
            v > 0.0 && v > vals[i - 1] && v > vals[i + 1] && v > threshold
        })
        .map(|i| (i as isize - lag_max as isize, vals[i]))
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    peaks.truncate(cfg.max_peaks);
    peaks
}

/// Sum over pairs of the GCC at the hypothesised lags.
pub fn srp_phat(tau: &[f64], g: &GccTensor, frame: usize) -> f64 {
    tau.iter()
        .enumerate()
        .map(|(p, &t)| g.interp(p, frame, t))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stft::{stft, StftConfig};
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn argmax(s: &[f32]) -> usize {
        s.iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0
    }

    #[test]
    fn identical_channels_peak_at_zero() {
        let x = noise(16000, 1);
        let s = stft(&[x.clone(), x], 16000, &StftConfig::default()).unwrap();
        let g = gcc_phat(&s, &TdoaEstConfig::default());
        for l in 0..g.frames() {
            let sl = g.slice(0, l);
            assert_eq!(argmax(sl), g.lag_max);
            assert!((sl[g.lag_max] - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn integer_delay_matches_time_domain_correlation() {
        let x = noise(16000, 2);
        let mut y = vec![0.0; 16000];
        y[7..].copy_from_slice(&x[..16000 - 7]);
        // time-domain oracle
        let r = fft::cross_correlation(&x, &y, 50);
        let oracle = argmax(&r.iter().map(|&v| v as f32).collect::<Vec<_>>()) as isize - 50;
        assert_eq!(oracle, 7);
        let s = stft(&[x, y], 16000, &StftConfig::default()).unwrap();
        let g = gcc_phat(&s, &TdoaEstConfig::default());
        for l in 8..g.frames() - 8 {
            assert_eq!(argmax(g.slice(0, l)) as isize - g.lag_max as isize, oracle);
        }
    }

    #[test]
    fn peak_detection_rules() {
        let cfg = TdoaEstConfig::default();
        assert!(detect_peaks(&[0.0; 21], 10, &cfg).is_empty());
        let mut tri = vec![0.0f32; 21];
        tri[14] = 0.5;
        tri[15] = 1.0;
        tri[16] = 0.5;
        assert_eq!(detect_peaks(&tri, 10, &cfg), vec![(5, 1.0)]);
        // negative maxima and plateaus are not peaks
        let mut s = vec![-1.0f32; 21];
        s[3] = -0.2;
        s[8] = 0.7;
        s[9] = 0.7;
        assert!(detect_peaks(&s, 10, &cfg).is_empty());
    }

    #[test]
    fn peaks_sorted_and_truncated() {
        let cfg = TdoaEstConfig {
            max_peaks: 2,
            peak_std_factor: 0.0,
            ..Default::default()
        };
        let mut s = vec![0.0f32; 41];
        s[5] = 0.3;
        s[10] = 0.9;
        s[30] = 0.9;
        s[35] = 0.5;
        assert_eq!(detect_peaks(&s, 20, &cfg), vec![(-10, 0.9f32 as f64), (10, 0.9f32 as f64)]);
    }

    #[test]
    fn srp_interpolates_and_zero_gcc_scores_zero() {
        let g0 = GccTensor::zeros(3, 1, 10, 1);
        assert_eq!(srp_phat(&[1.0, 2.5, 1.5], &g0, 0), 0.0);
        let slice: Vec<f32> = (0..21).map(|i| i as f32).collect();
        let g = GccTensor::from_slices(&[vec![slice]], 10);
        assert!((srp_phat(&[2.25], &g, 0) - 12.25).abs() < 1e-9);
        assert_eq!(srp_phat(&[11.0], &g, 0), 0.0);
    }
}
