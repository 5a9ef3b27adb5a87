//! Framing and analysis/synthesis transforms.
//!
//! Frames are centered: frame `l` covers samples
//! `[l * shift - frame_len / 2, l * shift + frame_len / 2)` with zero padding
//! outside the signal, so frame `l` sits at time `l * shift / fs`. Synthesis
//! is weighted overlap-add normalised by the per-sample window energy, which
//! reconstructs every original sample exactly.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::fft;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Hann,
    Hamming,
}

impl Window {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let c = (2.0 * PI * i as f64 / n as f64).cos();
                match self {
                    Window::Hann => 0.5 - 0.5 * c,
                    Window::Hamming => 0.54 - 0.46 * c,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftConfig {
    pub frame_len: usize,
    pub frame_shift: usize,
    pub window: Window,
    pub fft_len: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            frame_len: 1024,
            frame_shift: 256,
            window: Window::Hann,
            fft_len: 1024,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frame_shift == 0 || self.frame_len == 0 {
            return Err(Error::Config("frame_len and frame_shift must be positive".into()));
        }
        if self.frame_len % self.frame_shift != 0 || self.frame_len / self.frame_shift < 2 {
            return Err(Error::Config(format!(
                "frame_shift {} must divide frame_len {} with at least 50% overlap",
                self.frame_shift, self.frame_len
            )));
        }
        if self.fft_len != self.frame_len {
            return Err(Error::Config("fft_len must equal frame_len".into()));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// Number of frames covering a signal of `len` samples.
    pub fn frames_for(&self, len: usize) -> usize {
        len / self.frame_shift + 1
    }

    pub fn frame_shift_s(&self, fs: u32) -> f64 {
        self.frame_shift as f64 / fs as f64
    }

    /// First sample index (may be negative) of frame `l`.
    pub fn frame_start(&self, l: usize) -> isize {
        (l * self.frame_shift) as isize - (self.frame_len / 2) as isize
    }
}

/// Complex STFT tensor stored observation-major: `[frame][bin][channel]`,
/// so the stacked microphone vector `Y(l, k)` is contiguous.
#[derive(Debug, Clone)]
pub struct SpectrogramTensor {
    data: Vec<Complex64>,
    channels: usize,
    frames: usize,
    bins: usize,
    pub cfg: StftConfig,
    pub sample_rate_hz: u32,
    pub signal_len: usize,
}

impl SpectrogramTensor {
    pub fn zeros(
        channels: usize,
        frames: usize,
        cfg: StftConfig,
        sample_rate_hz: u32,
        signal_len: usize,
    ) -> Self {
        let bins = cfg.bins();
        Self {
            data: vec![Complex64::new(0.0, 0.0); channels * frames * bins],
            channels,
            frames,
            bins,
            cfg,
            sample_rate_hz,
            signal_len,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    #[inline]
    fn index(&self, m: usize, l: usize, k: usize) -> usize {
        (l * self.bins + k) * self.channels + m
    }

    #[inline]
    pub fn get(&self, m: usize, l: usize, k: usize) -> Complex64 {
        self.data[self.index(m, l, k)]
    }

    #[inline]
    pub fn set(&mut self, m: usize, l: usize, k: usize, v: Complex64) {
        let i = self.index(m, l, k);
        self.data[i] = v;
    }

    /// Stacked observation vector `Y(l, k)`.
    #[inline]
    pub fn observation(&self, l: usize, k: usize) -> &[Complex64] {
        let start = (l * self.bins + k) * self.channels;
        &self.data[start..start + self.channels]
    }

    #[inline]
    pub fn observation_mut(&mut self, l: usize, k: usize) -> &mut [Complex64] {
        let start = (l * self.bins + k) * self.channels;
        &mut self.data[start..start + self.channels]
    }

    pub fn bin_hz(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate_hz as f64 / self.cfg.fft_len as f64
    }

    pub fn frame_shift_s(&self) -> f64 {
        self.cfg.frame_shift_s(self.sample_rate_hz)
    }

    /// Copy of frames `range` as a new tensor.
    pub fn slice_frames(&self, range: std::ops::Range<usize>) -> SpectrogramTensor {
        let per = self.bins * self.channels;
        SpectrogramTensor {
            data: self.data[range.start * per..range.end * per].to_vec(),
            channels: self.channels,
            frames: range.len(),
            bins: self.bins,
            cfg: self.cfg,
            sample_rate_hz: self.sample_rate_hz,
            signal_len: range.len() * self.cfg.frame_shift,
        }
    }

    /// Multiply every entry by `f(l, k)`.
    pub fn scale_bins(&mut self, mut f: impl FnMut(usize, usize) -> Complex64) {
        for l in 0..self.frames {
            for k in 0..self.bins {
                let s = f(l, k);
                for v in self.observation_mut(l, k) {
                    *v *= s;
                }
            }
        }
    }
}

/// Short-time Fourier transform of every channel.
pub fn stft(x: &[Vec<f64>], sample_rate_hz: u32, cfg: &StftConfig) -> Result<SpectrogramTensor> {
    cfg.validate()?;
    let channels = x.len();
    if channels == 0 {
        return Err(Error::Input("no channels".into()));
    }
    let len = x.iter().map(Vec::len).min().unwrap_or(0);
    if len < cfg.frame_len {
        return Err(Error::TooShort {
            needed: cfg.frame_len,
            got: len,
        });
    }
    let frames = cfg.frames_for(len);
    let window = cfg.window.coefficients(cfg.frame_len);
    let plan = fft::forward(cfg.fft_len);
    let mut out = SpectrogramTensor::zeros(channels, frames, *cfg, sample_rate_hz, len);
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_len];
    for (m, ch) in x.iter().enumerate() {
        for l in 0..frames {
            let start = cfg.frame_start(l);
            for (t, b) in buf.iter_mut().enumerate() {
                let n = start + t as isize;
                let v = if n >= 0 && (n as usize) < len {
                    ch[n as usize] * window[t]
                } else {
                    0.0
                };
                *b = Complex64::new(v, 0.0);
            }
            plan.process(&mut buf);
            for k in 0..out.bins {
                out.set(m, l, k, buf[k]);
            }
        }
    }
    Ok(out)
}

/// Inverse transform back to `signal_len` samples per channel.
pub fn istft(s: &SpectrogramTensor) -> Vec<Vec<f64>> {
    let cfg = s.cfg;
    let n_fft = cfg.fft_len;
    let window = cfg.window.coefficients(cfg.frame_len);
    let plan = fft::inverse(n_fft);
    let len = s.signal_len;
    let mut norm = vec![0.0; len];
    for l in 0..s.frames {
        let start = cfg.frame_start(l);
        for (t, w) in window.iter().enumerate() {
            let n = start + t as isize;
            if n >= 0 && (n as usize) < len {
                norm[n as usize] += w * w;
            }
        }
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    (0..s.channels)
        .map(|m| {
            let mut y = vec![0.0; len];
            for l in 0..s.frames {
                for k in 0..s.bins {
                    buf[k] = s.get(m, l, k);
                }
                for k in s.bins..n_fft {
                    buf[k] = buf[n_fft - k].conj();
                }
                // Hermitian symmetry needs real DC and Nyquist.
                buf[0].im = 0.0;
                buf[n_fft / 2].im = 0.0;
                plan.process(&mut buf);
                let start = cfg.frame_start(l);
                for (t, w) in window.iter().enumerate() {
                    let n = start + t as isize;
                    if n >= 0 && (n as usize) < len {
                        y[n as usize] += w * buf[t].re / n_fft as f64;
                    }
                }
            }
            for (v, &nrm) in y.iter_mut().zip(&norm) {
                if nrm > 1e-12 {
                    *v /= nrm;
                }
            }
            y
        })
        .collect()
}
