//! Evaluation metrics: DER, TDOA error, SI-SDR and cpWER.

use serde::{Deserialize, Serialize};

use crate::activity::ActivityMatrix;
use crate::diarize::msd;
use crate::dsp::assignment::{max_weight_assignment, min_cost_assignment};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct DerBreakdown {
    pub der: f64,
    pub miss: f64,
    pub false_alarm: f64,
    pub confusion: f64,
    /// Scored reference speech, seconds.
    pub reference_s: f64,
}

/// Frame-level DER with optimal one-to-one speaker mapping. Frames within
/// `collar_s` of a reference segment boundary are not scored. `hyp` is
/// resampled onto the reference grid.
pub fn compute_der(reference: &ActivityMatrix, hyp: &ActivityMatrix, collar_s: f64) -> Result<DerBreakdown> {
    let n = reference.n_frames;
    let shift = reference.frame_shift_s;
    let hyp = if hyp.n_frames == n && (hyp.frame_shift_s - shift).abs() < 1e-12 {
        hyp.clone()
    } else {
        hyp.resampled(n, shift)
    };

    let mut scored = vec![true; n];
    let radius = collar_s / shift;
    for spk in 0..reference.n_speakers() {
        for seg in reference.segments(spk) {
            // frame l spans [l, l + 1) in frame units; drop it if that
            // span meets the open collar (b - radius, b + radius)
            for b in [seg.start as f64, seg.end as f64] {
                for (l, s) in scored.iter_mut().enumerate() {
                    let t = l as f64;
                    if t < b + radius && t + 1.0 > b - radius && radius > 0.0 {
                        *s = false;
                    }
                }
            }
        }
    }

    let r_count = reference.n_speakers();
    let h_count = hyp.n_speakers();
    let mut overlap = vec![vec![0.0; h_count]; r_count];
    for (r, row) in overlap.iter_mut().enumerate() {
        for (h, o) in row.iter_mut().enumerate() {
            *o = (0..n)
                .filter(|&l| scored[l] && reference.active[r][l] && hyp.active[h][l])
                .count() as f64;
        }
    }
    let mapping = if r_count > 0 && h_count > 0 {
        max_weight_assignment(&overlap)
    } else {
        vec![None; r_count]
    };

    let (mut total, mut miss, mut fa, mut conf) = (0usize, 0usize, 0usize, 0usize);
    for l in (0..n).filter(|&l| scored[l]) {
        let n_ref = reference.n_active(l);
        let n_hyp = hyp.n_active(l);
        let correct = mapping
            .iter()
            .enumerate()
            .filter(|(r, h)| h.is_some_and(|h| reference.active[*r][l] && hyp.active[h][l]))
            .count();
        total += n_ref;
        miss += n_ref.saturating_sub(n_hyp);
        fa += n_hyp.saturating_sub(n_ref);
        conf += n_ref.min(n_hyp) - correct;
    }
    if total == 0 {
        return Err(Error::Input("reference contains no scored speech".into()));
    }
    let t = total as f64;
    Ok(DerBreakdown {
        der: (miss + fa + conf) as f64 / t,
        miss: miss as f64 / t,
        false_alarm: fa as f64 / t,
        confusion: conf as f64 / t,
        reference_s: t * shift,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct TdoaError {
    pub rmse: f64,
    pub matched: usize,
    /// Estimates left without a truth partner, over all estimates.
    pub spurious_rate: f64,
    pub missed: usize,
    /// Matched estimates whose largest element error is at most one sample.
    #[serde(default)]
    pub within_one: f64,
}

/// Per frame, estimates are matched to truth vectors by minimum total MSD;
/// RMSE is over all elements of matched pairs.
pub fn tdoa_rmse(est: &[Vec<Vec<f64>>], truth: &[Vec<Vec<f64>>]) -> TdoaError {
    let (mut sq, mut elems, mut matched, mut spurious, mut n_est, mut missed) = (0.0, 0, 0, 0, 0, 0);
    let mut close = 0;
    for (e, t) in est.iter().zip(truth) {
        n_est += e.len();
        if e.is_empty() || t.is_empty() {
            spurious += e.len();
            missed += t.len();
            continue;
        }
        let cost: Vec<Vec<f64>> = e
            .iter()
            .map(|a| t.iter().map(|b| msd(a, b)).collect())
            .collect();
        let assign = min_cost_assignment(&cost);
        for (i, a) in assign.iter().enumerate() {
            match a {
                Some(j) => {
                    matched += 1;
                    let mut worst = 0.0f64;
                    for (x, y) in e[i].iter().zip(&t[*j]) {
                        sq += (x - y) * (x - y);
                        elems += 1;
                        worst = worst.max((x - y).abs());
                    }
                    if worst <= 1.0 {
                        close += 1;
                    }
                }
                None => spurious += 1,
            }
        }
        missed += t.len().saturating_sub(e.len());
    }
    TdoaError {
        rmse: if elems == 0 { 0.0 } else { (sq / elems as f64).sqrt() },
        matched,
        spurious_rate: if n_est == 0 { 0.0 } else { spurious as f64 / n_est as f64 },
        missed,
        within_one: if matched == 0 { 0.0 } else { close as f64 / matched as f64 },
    }
}

pub const SI_SDR_CAP_DB: f64 = 60.0;

/// Scale-invariant SDR of `est` against `reference` after mean removal,
/// capped at 60 dB.
pub fn si_sdr(est: &[f64], reference: &[f64]) -> Result<f64> {
    let n = est.len().min(reference.len());
    if n == 0 {
        return Err(Error::Input("SI-SDR of empty signals".into()));
    }
    let me = est[..n].iter().sum::<f64>() / n as f64;
    let mr = reference[..n].iter().sum::<f64>() / n as f64;
    let (mut dot, mut rr) = (0.0, 0.0);
    for i in 0..n {
        let (e, r) = (est[i] - me, reference[i] - mr);
        dot += e * r;
        rr += r * r;
    }
    if rr <= 0.0 {
        return Err(Error::Input("SI-SDR reference is silent".into()));
    }
    let alpha = dot / rr;
    let (mut st, mut se) = (0.0, 0.0);
    for i in 0..n {
        let t = alpha * (reference[i] - mr);
        let e = est[i] - me - t;
        st += t * t;
        se += e * e;
    }
    let db = if se <= 0.0 {
        SI_SDR_CAP_DB
    } else {
        10.0 * (st / se).log10()
    };
    Ok(db.min(SI_SDR_CAP_DB))
}

fn word_edits(a: &[&str], b: &[&str]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, wa) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, wb) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(wa != wb))
                .min(prev[j + 1] + 1)
                .min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Concatenated minimum-permutation WER from per-speaker transcripts.
/// Missing speakers on either side count as empty transcripts.
pub fn cp_wer(reference: &[String], hypothesis: &[String]) -> Result<f64> {
    let k = reference.len().max(hypothesis.len());
    let words = |v: &[String], i: usize| -> Vec<String> {
        v.get(i)
            .map(|s| s.split_whitespace().map(str::to_string).collect())
            .unwrap_or_default()
    };
    let r: Vec<Vec<String>> = (0..k).map(|i| words(reference, i)).collect();
    let h: Vec<Vec<String>> = (0..k).map(|i| words(hypothesis, i)).collect();
    let total: usize = r.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(Error::Input("reference transcripts are empty".into()));
    }
    let cost: Vec<Vec<f64>> = r
        .iter()
        .map(|rw| {
            let ra: Vec<&str> = rw.iter().map(String::as_str).collect();
            h.iter()
                .map(|hw| {
                    let ha: Vec<&str> = hw.iter().map(String::as_str).collect();
                    word_edits(&ra, &ha) as f64
                })
                .collect()
        })
        .collect();
    let assign = min_cost_assignment(&cost);
    let errors: f64 = assign
        .iter()
        .enumerate()
        .map(|(i, j)| j.map_or(0.0, |j| cost[i][j]))
        .sum();
    Ok(errors / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(rows: &[&str]) -> ActivityMatrix {
        let active: Vec<Vec<bool>> = rows
            .iter()
            .map(|r| r.chars().map(|c| c == '1').collect())
            .collect();
        let n = active[0].len();
        ActivityMatrix::new(active, n, 0.1)
    }

    #[test]
    fn der_trivial_cases() {
        let r = act(&["1111100000111110000", "0000011111000001111"]);
        assert_eq!(compute_der(&r, &r, 0.0).unwrap().der, 0.0);
        let empty = ActivityMatrix::empty(r.n_frames, 0.1);
        assert_eq!(compute_der(&r, &empty, 0.0).unwrap().der, 1.0);
        assert_eq!(compute_der(&r, &r.permuted(&[1, 0]), 0.0).unwrap().der, 0.0);
        let silent = ActivityMatrix::new(vec![vec![false; 19]], 19, 0.1);
        assert!(compute_der(&silent, &r, 0.0).is_err());
    }

    #[test]
    fn der_counts_errors() {
        let r = act(&["1111111111", "0000000000"]);
        // 2 frames missed, one false-alarm speaker on 3 frames
        let h = act(&["1111111100", "0000000111"]);
        let d = compute_der(&r, &h, 0.0).unwrap();
        assert!((d.miss - 0.0).abs() < 1e-12);
        // frames 8, 9: ref spk0 active, hyp spk1 active -> confusion (mapped 0->0)
        assert!((d.confusion - 0.2).abs() < 1e-12);
        assert!((d.false_alarm - 0.1).abs() < 1e-12);
        assert!((d.der - 0.3).abs() < 1e-12);
    }

    #[test]
    fn collar_excludes_boundaries() {
        let r = act(&["0001111100"]);
        let h = act(&["0000111110"]);
        assert!(compute_der(&r, &h, 0.0).unwrap().der > 0.0);
        assert_eq!(compute_der(&r, &h, 0.1).unwrap().der, 0.0);
    }

    #[test]
    fn tdoa_error_cases() {
        let truth = vec![vec![vec![1.0, 2.0, 1.0], vec![-5.0, 3.0, 8.0]]; 3];
        let e = tdoa_rmse(&truth, &truth);
        assert_eq!(e.rmse, 0.0);
        assert_eq!(e.matched, 6);
        let shifted: Vec<Vec<Vec<f64>>> = truth
            .iter()
            .map(|f| f.iter().rev().map(|v| v.iter().map(|x| x + 1.0).collect()).collect())
            .collect();
        let e = tdoa_rmse(&shifted, &truth);
        assert!((e.rmse - 1.0).abs() < 1e-12);
        assert_eq!(e.spurious_rate, 0.0);
        assert_eq!(e.within_one, 1.0);
        let far: Vec<Vec<Vec<f64>>> = truth
            .iter()
            .map(|f| f.iter().map(|v| v.iter().map(|x| x + 1.5).collect()).collect())
            .collect();
        assert_eq!(tdoa_rmse(&far, &truth).within_one, 0.0);
    }

    #[test]
    fn si_sdr_cases() {
        let r: Vec<f64> = (0..1000).map(|i| (0.05 * i as f64).sin()).collect();
        let scaled: Vec<f64> = r.iter().map(|v| 3.0 * v).collect();
        assert_eq!(si_sdr(&scaled, &r).unwrap(), 60.0);
        let orth: Vec<f64> = (0..1000).map(|i| (0.05 * i as f64).cos()).collect();
        assert!(si_sdr(&orth, &r).unwrap() < -20.0);
        assert!(si_sdr(&r, &vec![0.0; 1000]).is_err());
    }

    #[test]
    fn cp_wer_permutation() {
        let r = vec!["a b c".to_string(), "d e".to_string()];
        let h = vec!["d e".to_string(), "a x c".to_string()];
        assert!((cp_wer(&r, &h).unwrap() - 0.2).abs() < 1e-12);
        let h2 = vec!["a b c".to_string()];
        assert!((cp_wer(&r, &h2).unwrap() - 0.4).abs() < 1e-12);
    }
}
