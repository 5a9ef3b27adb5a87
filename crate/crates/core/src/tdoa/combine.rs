use super::{gcc::srp_phat, sort_by_srp, GccTensor, TdoaEstConfig, TdoaVector};
use crate::geometry::{mics_for_pairs, triple_residual, triples};

/// Every selection of one candidate lag per pair that is cyclically
/// consistent on all microphone triples, scored by SRP-PhaT and filtered
/// for uniqueness. Pairs are visited in `(0,1), (0,2), ...` order, so the
/// first `M - 1` pairs fix the delays and every later pair closes triangles
/// that are checked as soon as they are complete.
pub fn combine_candidates(
    candidates: &[Vec<(isize, f64)>],
    g: &GccTensor,
    frame: usize,
    cfg: &TdoaEstConfig,
) -> Vec<TdoaVector> {
    let pairs = candidates.len();
    let Some(mics) = mics_for_pairs(pairs) else {
        return Vec::new();
    };
    if candidates.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    // triples become checkable once their last pair (n, o) is assigned
    let mut closing: Vec<Vec<[usize; 3]>> = vec![Vec::new(); pairs];
    for t in triples(mics) {
        closing[t[2]].push(t);
    }
    let mut found = Vec::new();
    let mut tau = vec![0.0; pairs];
    dfs(0, candidates, &closing, cfg.tau_th, &mut tau, &mut found);

    let scored: Vec<TdoaVector> = found
        .into_iter()
        .map(|tau| TdoaVector {
            frame,
            srp: srp_phat(&tau, g, frame),
            tau,
        })
        .collect();
    uniqueness_filter(scored, cfg.tau_th)
}

fn dfs(
    p: usize,
    candidates: &[Vec<(isize, f64)>],
    closing: &[Vec<[usize; 3]>],
    tau_th: f64,
    tau: &mut Vec<f64>,
    found: &mut Vec<Vec<f64>>,
) {
    if p == candidates.len() {
        found.push(tau.clone());
        return;
    }
    for &(lag, _) in &candidates[p] {
        tau[p] = lag as f64;
        if closing[p]
            .iter()
            .all(|t| triple_residual(tau, t).abs() <= tau_th)
        {
            dfs(p + 1, candidates, closing, tau_th, tau, found);
        }
    }
}

/// Number of positions where two vectors agree within `tau_th`.
pub fn shared_elements(a: &[f64], b: &[f64], tau_th: f64) -> usize {
    a.iter().zip(b).filter(|(x, y)| (*x - *y).abs() <= tau_th).count()
}

/// Strongest first; a vector is dropped if it shares more than one element
/// with an already kept, stronger vector.
pub fn uniqueness_filter(mut vectors: Vec<TdoaVector>, tau_th: f64) -> Vec<TdoaVector> {
    sort_by_srp(&mut vectors);
    let mut kept: Vec<TdoaVector> = Vec::with_capacity(vectors.len());
    for v in vectors {
        if kept
            .iter()
            .all(|k| shared_elements(&k.tau, &v.tau, tau_th) <= 1)
        {
            kept.push(v);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(tau_th: f64) -> TdoaEstConfig {
        TdoaEstConfig {
            tau_th,
            ..Default::default()
        }
    }

    #[test]
    fn single_consistent_candidate_per_pair() {
        let g = GccTensor::zeros(3, 1, 10, 1);
        let c = vec![vec![(3, 1.0)], vec![(5, 1.0)], vec![(2, 1.0)]];
        let out = combine_candidates(&c, &g, 0, &cfg(0.0));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].tau, vec![3.0, 5.0, 2.0]);
    }

    #[test]
    fn inconsistent_or_missing_pairs_give_nothing() {
        let g = GccTensor::zeros(3, 1, 10, 1);
        let c = vec![vec![(3, 1.0)], vec![(5, 1.0)], vec![(4, 1.0)]];
        assert!(combine_candidates(&c, &g, 0, &cfg(1.0)).is_empty());
        assert_eq!(combine_candidates(&c, &g, 0, &cfg(2.0)).len(), 1);
        let c = vec![vec![(3, 1.0)], vec![], vec![(2, 1.0)]];
        assert!(combine_candidates(&c, &g, 0, &cfg(2.0)).is_empty());
    }

    #[test]
    fn two_sources_both_found() {
        // M = 3, pairs (0,1), (0,2), (1,2); sources (3,5,2) and (-4,-1,3)
        let mut slices = vec![vec![vec![0.0f32; 21]]; 3];
        for (p, lags) in [[3, -4], [5, -1], [2, 3]].iter().enumerate() {
            slices[p][0][(lags[0] + 10) as usize] = 1.0;
            slices[p][0][(lags[1] + 10) as usize] = 0.8;
        }
        let g = GccTensor::from_slices(&slices, 10);
        let c = vec![
            vec![(3, 1.0), (-4, 0.8)],
            vec![(5, 1.0), (-1, 0.8)],
            vec![(2, 1.0), (3, 0.8)],
        ];
        let out = combine_candidates(&c, &g, 0, &cfg(0.0));
        let taus: Vec<Vec<f64>> = out.iter().map(|v| v.tau.clone()).collect();
        assert_eq!(taus, vec![vec![3.0, 5.0, 2.0], vec![-4.0, -1.0, 3.0]]);
        assert!((out[0].srp - 3.0).abs() < 1e-6);
    }

    #[test]
    fn uniqueness_keeps_stronger() {
        let mk = |tau: &[f64], srp| TdoaVector {
            frame: 0,
            tau: tau.to_vec(),
            srp,
        };
        let out = uniqueness_filter(
            vec![
                mk(&[1.0, 2.0, 1.0], 1.0),
                mk(&[1.0, 2.0, 9.0], 2.0),
                mk(&[1.0, 7.0, 6.0], 0.5),
            ],
            0.0,
        );
        let taus: Vec<Vec<f64>> = out.iter().map(|v| v.tau.clone()).collect();
        assert_eq!(taus, vec![vec![1.0, 2.0, 9.0], vec![1.0, 7.0, 6.0]]);
    }
}
