use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub fn forward(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

pub fn inverse(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// Full complex spectrum of a real signal zero-padded to `n`.
pub fn real_spectrum(x: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().take(n).map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    forward(n).process(&mut buf);
    buf
}

/// Linear convolution of two real sequences.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 32 {
        let mut out = vec![0.0; out_len];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        return out;
    }
    let n = out_len.next_power_of_two();
    let fa = real_spectrum(a, n);
    let fb = real_spectrum(b, n);
    let mut prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    inverse(n).process(&mut prod);
    let scale = 1.0 / n as f64;
    prod[..out_len].iter().map(|c| c.re * scale).collect()
}

/// `r[lag + max_lag] = sum_n a[n] * b[n + lag]` for `lag` in `[-max_lag, max_lag]`.
pub fn cross_correlation(a: &[f64], b: &[f64], max_lag: usize) -> Vec<f64> {
    let n = (a.len() + b.len() + 1).next_power_of_two();
    let fa = real_spectrum(a, n);
    let fb = real_spectrum(b, n);
    let mut prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x.conj() * y).collect();
    inverse(n).process(&mut prod);
    let scale = 1.0 / n as f64;
    (0..=2 * max_lag)
        .map(|i| {
            let lag = i as isize - max_lag as isize;
            let idx = lag.rem_euclid(n as isize) as usize;
            if lag.unsigned_abs() >= n / 2 {
                0.0
            } else {
                prod[idx].re * scale
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convolve_matches_direct() {
        let a: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 1.1).cos()).collect();
        let fast = convolve(&a, &b);
        for k in 0..fast.len() {
            let direct: f64 = (0..a.len())
                .filter(|&i| k >= i && k - i < b.len())
                .map(|i| a[i] * b[k - i])
                .sum();
            assert!((fast[k] - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn cross_correlation_finds_shift() {
        let a: Vec<f64> = (0..500).map(|i| (i * 37 % 17) as f64 - 8.0).collect();
        let mut b = vec![0.0; 500];
        b[7..].copy_from_slice(&a[..493]);
        let r = cross_correlation(&a, &b, 20);
        let best = r
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .unwrap()
            .0 as isize
            - 20;
        assert_eq!(best, 7);
    }
}
