//! Band-limited interpolation with Kaiser-windowed sinc kernels.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Zeroth-order modified Bessel function of the first kind.
pub fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= (half / k) * (half / k);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        k += 1.0;
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Windowed sinc kernel with support `(-half_width, half_width)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KaiserSinc {
    pub half_width: usize,
    pub beta: f64,
}

impl Default for KaiserSinc {
    /// 32 taps, beta 8 (about 80 dB stopband).
    fn default() -> Self {
        Self {
            half_width: 16,
            beta: 8.0,
        }
    }
}

impl KaiserSinc {
    pub fn eval(&self, x: f64) -> f64 {
        let hw = self.half_width as f64;
        if x.abs() >= hw {
            return 0.0;
        }
        let r = x / hw;
        sinc(x) * bessel_i0(self.beta * (1.0 - r * r).sqrt()) / bessel_i0(self.beta)
    }

    /// FIR taps realising a fractional delay `frac` in `[0, 1)`.
    ///
    /// Tap `j` multiplies `x[n - j + half_width - 1]`, so convolving and then
    /// shifting by `half_width - 1` delays the signal by exactly `frac`.
    pub fn fractional_delay_taps(&self, frac: f64) -> Vec<f64> {
        let hw = self.half_width as isize;
        (0..2 * hw)
            .map(|j| self.eval((j - (hw - 1)) as f64 - frac))
            .collect()
    }
}

const TABLE_PHASES: usize = 4096;

/// Tabulated kernel for sample-wise varying interpolation positions.
pub struct SincTable {
    kernel: KaiserSinc,
    table: Vec<f64>,
}

impl SincTable {
    pub fn new(kernel: KaiserSinc) -> Self {
        let n = kernel.half_width * TABLE_PHASES + 2;
        let table = (0..n)
            .map(|i| kernel.eval(i as f64 / TABLE_PHASES as f64))
            .collect();
        Self { kernel, table }
    }

    /// The shared default table (32 taps).
    pub fn shared() -> &'static SincTable {
        static TABLE: OnceLock<SincTable> = OnceLock::new();
        TABLE.get_or_init(|| SincTable::new(KaiserSinc::default()))
    }

    /// 64-tap table used for resampling.
    pub fn shared_long() -> &'static SincTable {
        static TABLE: OnceLock<SincTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            SincTable::new(KaiserSinc {
                half_width: 32,
                beta: 9.0,
            })
        })
    }

    /// Kernel value at offset `x`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let pos = x.abs() * TABLE_PHASES as f64;
        let i = pos as usize;
        if i + 1 >= self.table.len() {
            return 0.0;
        }
        let f = pos - i as f64;
        self.table[i] + f * (self.table[i + 1] - self.table[i])
    }

    /// Value of `x` at continuous index `pos`; samples outside `x` are zero.
    pub fn interpolate(&self, x: &[f64], pos: f64) -> f64 {
        let hw = self.kernel.half_width as isize;
        let base = pos.floor();
        let frac = pos - base;
        let base = base as isize;
        if base < -hw || base > x.len() as isize + hw {
            return 0.0;
        }
        if frac == 0.0 {
            return if base >= 0 && (base as usize) < x.len() {
                x[base as usize]
            } else {
                0.0
            };
        }
        let lo = (base - hw + 1).max(0);
        let hi = (base + hw).min(x.len() as isize - 1);
        let mut acc = 0.0;
        for j in lo..=hi {
            acc += x[j as usize] * self.eval(pos - j as f64);
        }
        acc
    }
}

/// Delay `x` by `delay` samples (any non-negative real), returning `out_len` samples.
pub fn fractional_delay(x: &[f64], delay: f64, gain: f64, out: &mut [f64]) {
    let kernel = KaiserSinc::default();
    let int = delay.floor();
    let frac = delay - int;
    let int = int as isize;
    let taps = kernel.fractional_delay_taps(frac);
    let shift = int - (kernel.half_width as isize - 1);
    // out[n] += gain * sum_j taps[j] * x[n - shift - j]
    for (j, &t) in taps.iter().enumerate() {
        if t == 0.0 {
            continue;
        }
        let g = gain * t;
        let offset = shift + j as isize;
        let start = offset.max(0) as usize;
        let end = ((x.len() as isize + offset).max(0) as usize).min(out.len());
        if start >= end {
            continue;
        }
        let src0 = (start as isize - offset) as usize;
        for (o, &s) in out[start..end].iter_mut().zip(&x[src0..]) {
            *o += g * s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_matches_reference_values() {
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        // I0(1) = 1.2660658777520082
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_2).abs() < 1e-12);
        // I0(8) = 427.56411572180474
        assert!((bessel_i0(8.0) - 427.564_115_721_804_7).abs() < 1e-8);
    }

    #[test]
    fn integer_delay_is_exact_shift() {
        let x: Vec<f64> = (0..200).map(|i| ((i * 7919) % 101) as f64 - 50.0).collect();
        let mut out = vec![0.0; 200];
        fractional_delay(&x, 5.0, 1.0, &mut out);
        for n in 5..200 {
            assert!((out[n] - x[n - 5]).abs() < 1e-12);
        }
    }

    #[test]
    fn fractional_delay_of_sine() {
        let f = 0.05;
        let x: Vec<f64> = (0..2000).map(|n| (2.0 * PI * f * n as f64).sin()).collect();
        let mut out = vec![0.0; 2000];
        fractional_delay(&x, 10.37, 1.0, &mut out);
        for n in 100..1900 {
            let want = (2.0 * PI * f * (n as f64 - 10.37)).sin();
            assert!((out[n] - want).abs() < 1e-4, "n={n}");
        }
    }

    #[test]
    fn table_interpolation_matches_direct_kernel() {
        let table = SincTable::shared();
        let x: Vec<f64> = (0..300).map(|n| (0.3 * n as f64).cos()).collect();
        let pos = 123.456;
        let k = KaiserSinc::default();
        let direct: f64 = (0..300).map(|j| x[j] * k.eval(pos - j as f64)).sum();
        assert!((table.interpolate(&x, pos) - direct).abs() < 1e-6);
        assert_eq!(table.interpolate(&x, 17.0), x[17]);
    }
}
