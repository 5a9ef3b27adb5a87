//! Coarse offset compensation and clock-drift resampling against a
//! reference channel.
//!
//! Sign convention throughout: a device with offset `sto` and drift `sro`
//! records `other[n] = ref(n * (1 + sro * 1e-6) + sto)`, matching
//! [`crate::scene::apply_sto_sro`]. Estimates are reported in the same
//! convention.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::interp::SincTable;
use crate::dsp::{fft, std_dev};
use crate::error::{Error, Result};
use crate::scene::MultichannelRecording;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyncConfig {
    pub reference_channel: usize,
    pub search_window_s: f64,
    pub max_lag_s: f64,
    /// Drift tracking segment length and overlap.
    pub segment_s: f64,
    pub segment_overlap: f64,
    /// Largest per-segment lag considered, samples.
    pub segment_max_lag: usize,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub peak_std_factor: f64,
    /// Drift search range, ppm.
    pub max_sro_ppm: f64,
    /// Skip drift estimation entirely.
    pub estimate_sro: bool,
}

impl Default for SyncConfig {
    fn default() -> Self {
        Self {
            reference_channel: 0,
            search_window_s: 10.0,
            max_lag_s: 5.0,
            segment_s: 4.0,
            segment_overlap: 0.5,
            segment_max_lag: 512,
            band_low_hz: 125.0,
            band_high_hz: 3500.0,
            peak_std_factor: 2.0,
            max_sro_ppm: 200.0,
            estimate_sro: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncReport {
    pub sto_samples: Vec<i64>,
    pub sro_ppm: Vec<f64>,
    pub reference_channel: usize,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl SyncReport {
    pub fn identity(channels: usize, reference_channel: usize) -> Self {
        Self {
            sto_samples: vec![0; channels],
            sro_ppm: vec![0.0; channels],
            reference_channel,
            notes: Vec::new(),
        }
    }
}

/// Integer lag maximising the cross-correlation of the first
/// `search_window_s` of `other` against `reference`.
pub fn estimate_sto(
    reference: &[f64],
    other: &[f64],
    fs: u32,
    search_window_s: f64,
    max_lag_s: f64,
) -> Result<i64> {
    let window = (search_window_s * fs as f64).round() as usize;
    let max_lag = (max_lag_s * fs as f64).round() as usize;
    estimate_lag(reference, other, window, max_lag)
}

fn estimate_lag(reference: &[f64], other: &[f64], window: usize, max_lag: usize) -> Result<i64> {
    let shortest = reference.len().min(other.len());
    if window == 0 || window > shortest {
        return Err(Error::TooShort {
            needed: window.max(1),
            got: shortest,
        });
    }
    let a = &other[..window];
    let b = &reference[..(window + max_lag).min(reference.len())];
    let r = fft::cross_correlation(a, b, max_lag);
    let (best, _) = r
        .iter()
        .enumerate()
        .fold((max_lag, f64::NEG_INFINITY), |acc, (i, &v)| {
            if v > acc.1 {
                (i, v)
            } else {
                acc
            }
        });
    Ok(best as i64 - max_lag as i64)
}

fn shift_channel(ch: &[f64], sto: i64) -> Vec<f64> {
    if sto >= 0 {
        let mut out = vec![0.0; sto as usize];
        out.extend_from_slice(ch);
        out
    } else {
        ch[(sto.unsigned_abs() as usize).min(ch.len())..].to_vec()
    }
}

/// Shift every channel by its offset (zero padding) and trim to a common length.
pub fn compensate_sto(rec: &MultichannelRecording, report: &SyncReport) -> MultichannelRecording {
    let mut channels: Vec<Vec<f64>> = rec
        .channels
        .iter()
        .enumerate()
        .map(|(m, ch)| shift_channel(ch, report.sto_samples.get(m).copied().unwrap_or(0)))
        .collect();
    let len = channels.iter().map(Vec::len).min().unwrap_or(0);
    channels.iter_mut().for_each(|c| c.truncate(len));
    MultichannelRecording {
        channels,
        sample_rate_hz: rec.sample_rate_hz,
        device_ids: rec.device_ids.clone(),
    }
}

/// `y[n] = x(n / (1 + sro_ppm * 1e-6))`: undoes the drift of
/// [`crate::scene::apply_sto_sro`].
pub fn resample_sro(x: &[f64], sro_ppm: f64) -> Vec<f64> {
    if sro_ppm == 0.0 {
        return x.to_vec();
    }
    let table = SincTable::shared_long();
    let step = 1.0 / (1.0 + sro_ppm * 1e-6);
    (0..x.len())
        .map(|n| table.interpolate(x, n as f64 * step))
        .collect()
}

/// Peak lag of a band-limited GCC-PhaT between two equal-length segments,
/// refined by parabolic interpolation; `None` if the peak fails the
/// quality test.
fn segment_lag(a: &[f64], b: &[f64], fs: u32, cfg: &SyncConfig) -> Option<f64> {
    let n = (2 * a.len()).next_power_of_two();
    let fa = fft::real_spectrum(a, n);
    let fb = fft::real_spectrum(b, n);
    let df = fs as f64 / n as f64;
    let mut cross: Vec<Complex64> = fa
        .iter()
        .zip(&fb)
        .enumerate()
        .map(|(k, (x, y))| {
            let f = k.min(n - k) as f64 * df;
            let c = x.conj() * y;
            let mag = c.norm();
            if f < cfg.band_low_hz || f > cfg.band_high_hz || mag <= 1e-300 {
                Complex64::new(0.0, 0.0)
            } else {
                c / mag
            }
        })
        .collect();
    fft::inverse(n).process(&mut cross);
    let max_lag = cfg.segment_max_lag.min(n / 2 - 1) as isize;
    let vals: Vec<f64> = (-max_lag..=max_lag)
        .map(|l| cross[l.rem_euclid(n as isize) as usize].re)
        .collect();
    let (best, &peak) = vals
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))?;
    if best == 0 || best == vals.len() - 1 || peak <= 0.0 {
        return None;
    }
    if peak <= cfg.peak_std_factor * std_dev(&vals) {
        return None;
    }
    let (l, c, r) = (vals[best - 1], vals[best], vals[best + 1]);
    let denom = l - 2.0 * c + r;
    let delta = if denom.abs() > 1e-300 {
        (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    Some(best as f64 - max_lag as f64 + delta)
}

fn densest_slope(times: &[f64], lags: &[f64], max_slope: f64) -> f64 {
    let span = times.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - times.iter().copied().fold(f64::INFINITY, f64::min);
    // a step moves the far end by a quarter sample
    let step = if span > 0.0 { 0.25 / span } else { max_slope.max(1e-9) };
    let n_steps = (max_slope / step).ceil() as i64;
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in -n_steps..=n_steps {
        let slope = i as f64 * step;
        let r: Vec<f64> = times.iter().zip(lags).map(|(t, l)| l - slope * t).collect();
        let mut score = 0.0;
        for a in 0..r.len() {
            for b in a + 1..r.len() {
                let d = r[a] - r[b];
                score += (-0.5 * d * d / 0.25).exp();
            }
        }
        // strict comparison keeps the smallest |slope| on ties
        if score > best.1 + 1e-12 || (score > best.1 - 1e-12 && slope.abs() < f64::abs(best.0)) {
            best = (slope, score);
        }
    }
    best.0
}

/// Slope fit shared by all lag clusters with a free intercept per cluster.
fn fit_common_slope(times: &[f64], lags: &[f64], slope0: f64, tol: f64) -> f64 {
    let mut slope = slope0;
    for _ in 0..6 {
        let mut order: Vec<usize> = (0..times.len()).collect();
        let resid: Vec<f64> = times
            .iter()
            .zip(lags)
            .map(|(t, l)| l - slope * t)
            .collect();
        order.sort_by(|&i, &j| resid[i].total_cmp(&resid[j]));
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for &i in &order {
            match clusters.last_mut() {
                Some(c) if resid[i] - resid[*c.last().unwrap()] <= tol => c.push(i),
                _ => clusters.push(vec![i]),
            }
        }
        let (mut num, mut den) = (0.0, 0.0);
        for c in clusters.iter().filter(|c| c.len() >= 2) {
            let tm = c.iter().map(|&i| times[i]).sum::<f64>() / c.len() as f64;
            let lm = c.iter().map(|&i| lags[i]).sum::<f64>() / c.len() as f64;
            for &i in c {
                num += (times[i] - tm) * (lags[i] - lm);
                den += (times[i] - tm) * (times[i] - tm);
            }
        }
        if den <= 0.0 {
            break;
        }
        let next = num / den;
        if (next - slope).abs() < 1e-12 {
            slope = next;
            break;
        }
        slope = next;
    }
    slope
}

fn estimate_sro_once(reference: &[f64], other: &[f64], fs: u32, cfg: &SyncConfig) -> Result<f64> {
    let seg = (cfg.segment_s * fs as f64).round() as usize;
    let hop = ((1.0 - cfg.segment_overlap) * seg as f64).round().max(1.0) as usize;
    let len = reference.len().min(other.len());
    let mut times = Vec::new();
    let mut lags = Vec::new();
    let mut valid = Vec::new();
    let mut start = 0;
    while seg > 0 && start + seg <= len {
        let lag = segment_lag(&reference[start..start + seg], &other[start..start + seg], fs, cfg);
        valid.push(lag.is_some());
        if let Some(l) = lag {
            times.push((start + seg / 2) as f64);
            lags.push(l);
        }
        start += hop;
    }
    if lags.len() < 3 {
        return Err(Error::InsufficientSegments { usable: lags.len() });
    }
    // Talkers at fixed positions put the lags on parallel lines; pick the
    // slope that packs the detrended lags most tightly.
    let slope0 = densest_slope(&times, &lags, cfg.max_sro_ppm * 1e-6);
    let slope = fit_common_slope(&times, &lags, slope0, 2.0);
    // A fast device leads the reference, so the lag falls as -sro * t.
    Ok(-slope * 1e6)
}

/// Drift of `other` relative to `reference` in ppm from the trajectory of
/// per-segment GCC-PhaT peak lags.
pub fn estimate_sro(reference: &[f64], other: &[f64], fs: u32, cfg: &SyncConfig) -> Result<f64> {
    let first = estimate_sro_once(reference, other, fs, cfg)?;
    if first.abs() < 1.0 {
        return Ok(first);
    }
    // Second pass on the drift-compensated signal removes lag smearing
    // inside each segment.
    let corrected = resample_sro(other, first);
    let residual = estimate_sro_once(reference, &corrected, fs, cfg).unwrap_or(0.0);
    Ok(((1.0 + first * 1e-6) * (1.0 + residual * 1e-6) - 1.0) * 1e6)
}

/// Full synchronisation: coarse offset, drift estimate and resampling, then a
/// residual integer offset estimated on the drift-free signals.
pub fn synchronize(
    rec: &MultichannelRecording,
    cfg: &SyncConfig,
) -> Result<(MultichannelRecording, SyncReport)> {
    let r = cfg.reference_channel;
    let m_count = rec.n_channels();
    if r >= m_count {
        return Err(Error::Config(format!("reference channel {r} out of range")));
    }
    let fs = rec.sample_rate_hz;
    let window_s = cfg
        .search_window_s
        .min(rec.min_len() as f64 / fs as f64);
    let mut report = SyncReport::identity(m_count, r);
    for m in (0..m_count).filter(|&m| m != r) {
        report.sto_samples[m] =
            estimate_sto(&rec.channels[r], &rec.channels[m], fs, window_s, cfg.max_lag_s)?;
    }
    let mut out = compensate_sto(rec, &report);
    if cfg.estimate_sro {
        let mut residual = SyncReport::identity(m_count, r);
        for m in (0..m_count).filter(|&m| m != r) {
            match estimate_sro(&out.channels[r], &out.channels[m], fs, cfg) {
                Ok(ppm) => report.sro_ppm[m] = ppm,
                Err(Error::InsufficientSegments { usable }) => {
                    report.notes.push(format!(
                        "channel {m}: drift not estimated ({usable} coherent segments)"
                    ));
                }
                Err(e) => return Err(e),
            }
            out.channels[m] = resample_sro(&out.channels[m], report.sro_ppm[m]);
            if report.sro_ppm[m] != 0.0 {
                let window = (window_s * fs as f64).round() as usize;
                // Drift smears the coarse peak, so a pitch-period side lobe
                // can win there; search the full segment lag range again.
                let max_lag = (report.sro_ppm[m].abs() * 1e-6 * window as f64).ceil() as usize + cfg.segment_max_lag;
                residual.sto_samples[m] =
                    estimate_lag(&out.channels[r], &out.channels[m], window, max_lag)?;
                report.sto_samples[m] += residual.sto_samples[m];
            }
        }
        out = apply_report(rec, &report);
    }
    Ok((out, report))
}

/// Replay a report on a recording (or on per-speaker images of it): shift by
/// the total offsets, then undo the drift. Matches the output of
/// [`synchronize`] up to the residual offset times the rate error.
pub fn apply_report(rec: &MultichannelRecording, report: &SyncReport) -> MultichannelRecording {
    let mut out = compensate_sto(rec, report);
    for (ch, &ppm) in out.channels.iter_mut().zip(&report.sro_ppm) {
        if ppm != 0.0 {
            *ch = resample_sro(ch, ppm);
        }
    }
    out
}
