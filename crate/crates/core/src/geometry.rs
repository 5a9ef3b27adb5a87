//! Microphone pair bookkeeping and cyclic consistency.

pub type Point3 = [f64; 3];

pub fn distance(a: &Point3, b: &Point3) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// All microphone pairs `(m, m')`, `m < m'`, in the order
/// `(0,1), (0,2), ..., (0,M-1), (1,2), ..., (M-2,M-1)`.
pub fn mic_pairs(mics: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(mics * mics.saturating_sub(1) / 2);
    for m in 0..mics {
        for n in (m + 1)..mics {
            out.push((m, n));
        }
    }
    out
}

pub fn n_pairs(mics: usize) -> usize {
    mics * mics.saturating_sub(1) / 2
}

/// Position of pair `(m, n)`, `m < n`, in [`mic_pairs`] order.
pub fn pair_index(m: usize, n: usize, mics: usize) -> usize {
    debug_assert!(m < n && n < mics);
    m * (2 * mics - m - 1) / 2 + (n - m - 1)
}

/// Inverse of [`n_pairs`].
pub fn mics_for_pairs(pairs: usize) -> Option<usize> {
    (2..64).find(|&m| n_pairs(m) == pairs)
}

/// Every microphone triple `m < n < o` with the pair indices of
/// `(m,n)`, `(m,o)` and `(n,o)`.
pub fn triples(mics: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for m in 0..mics {
        for n in (m + 1)..mics {
            for o in (n + 1)..mics {
                out.push([
                    pair_index(m, n, mics),
                    pair_index(m, o, mics),
                    pair_index(n, o, mics),
                ]);
            }
        }
    }
    out
}

/// `tau_mn - tau_mo + tau_no` for one triple (zero for geometric TDOAs).
#[inline]
pub fn triple_residual(tau: &[f64], t: &[usize; 3]) -> f64 {
    tau[t[0]] - tau[t[1]] + tau[t[2]]
}

/// Largest absolute cyclic residual over all triples.
pub fn max_cyclic_residual(tau: &[f64], mics: usize) -> f64 {
    triples(mics)
        .iter()
        .map(|t| triple_residual(tau, t).abs())
        .fold(0.0, f64::max)
}

pub fn is_cyclic_consistent(tau: &[f64], mics: usize, tau_th: f64) -> bool {
    triples(mics)
        .iter()
        .all(|t| triple_residual(tau, t).abs() <= tau_th)
}

/// Per-channel delays relative to channel 0 recovered from an all-pairs
/// vector: `d_0 = 0`, `d_m = tau_{0m}`.
pub fn channel_delays(tau: &[f64], mics: usize) -> Vec<f64> {
    let mut d = vec![0.0; mics];
    for m in 1..mics {
        d[m] = tau[pair_index(0, m, mics)];
    }
    d
}
