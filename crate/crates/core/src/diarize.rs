//! Spatial diarization from frame-wise TDOA vectors: leader-follower
//! clustering into utterance-like local clusters, single-linkage merging of
//! their median vectors, pruning of echo groups, and morphological closing.

use serde::{Deserialize, Serialize};

use crate::activity::ActivityMatrix;
use crate::tdoa::{shared_elements, TdoaVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiarizeConfig {
    /// Leader-follower distance (max-abs), samples.
    pub eps_lf: f64,
    pub recency_s: f64,
    /// Single-linkage stops above this mean squared difference, samples².
    pub msd_threshold: f64,
    /// Element match tolerance used by pruning, samples.
    pub tau_match: f64,
    pub dilate_frames: usize,
    pub erode_frames: usize,
    /// Groups with fewer raw active frames are dropped before pruning.
    pub min_activity_frames: usize,
    /// Echo pruning: a group mostly overlapping a larger one is dropped if
    /// it carries its frame's strongest vector in less than this fraction of
    /// its frames. Zero disables the step.
    pub min_lead_ratio: f64,
}

impl Default for DiarizeConfig {
    fn default() -> Self {
        Self {
            eps_lf: 2.0,
            recency_s: 1.0,
            msd_threshold: 4.0,
            tau_match: 2.0,
            dilate_frames: 25,
            erode_frames: 15,
            min_activity_frames: 0,
            min_lead_ratio: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalCluster {
    pub members: Vec<TdoaVector>,
}

impl LocalCluster {
    pub fn leader(&self) -> &TdoaVector {
        self.members.last().expect("cluster has members")
    }

    pub fn representative(&self) -> Vec<f64> {
        elementwise_median(self.members.iter().map(|v| v.tau.as_slice()))
    }

    pub fn frames(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().map(|v| v.frame)
    }
}

pub fn elementwise_median<'a>(vectors: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let vs: Vec<&[f64]> = vectors.collect();
    let Some(first) = vs.first() else {
        return Vec::new();
    };
    (0..first.len())
        .map(|p| crate::dsp::median(&vs.iter().map(|v| v[p]).collect::<Vec<_>>()))
        .collect()
}

pub fn max_abs_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn msd(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Vectors must be ordered by frame. Each joins the nearest cluster whose
/// leader is recent enough and within `eps`; a cluster takes at most one
/// vector per frame.
pub fn leader_follower(
    vectors: &[TdoaVector],
    eps: f64,
    recency_s: f64,
    frame_shift_s: f64,
) -> Vec<LocalCluster> {
    let recency_frames = recency_s / frame_shift_s;
    let mut clusters: Vec<LocalCluster> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    for v in vectors {
        active.retain(|&c| (v.frame - clusters[c].leader().frame) as f64 <= recency_frames + 1e-9);
        let best = active
            .iter()
            .copied()
            .filter(|&c| clusters[c].leader().frame < v.frame)
            .map(|c| (c, max_abs_distance(&clusters[c].leader().tau, &v.tau)))
            .filter(|&(_, d)| d <= eps)
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        match best {
            Some((c, _)) => clusters[c].members.push(v.clone()),
            None => {
                clusters.push(LocalCluster {
                    members: vec![v.clone()],
                });
                active.push(clusters.len() - 1);
            }
        }
    }
    clusters
}

/// Single-linkage agglomeration of representatives under MSD. Merging
/// stops once the closest pair of groups is farther than `threshold`, which
/// makes the result the connected components of the `msd <= threshold` graph.
/// Groups are ordered by their smallest member index.
pub fn single_linkage(representatives: &[Vec<f64>], threshold: f64) -> Vec<Vec<usize>> {
    let n = representatives.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if msd(&representatives[i], &representatives[j]) <= threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut index_of = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if index_of[r] == usize::MAX {
            index_of[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[index_of[r]].push(i);
    }
    groups
}

/// A speaker hypothesis: activity row plus representative vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerGroup {
    pub representative: Vec<f64>,
    pub active: Vec<bool>,
    /// Frames in which a member was the strongest vector of its frame.
    #[serde(default)]
    pub lead_frames: usize,
}

impl SpeakerGroup {
    pub fn activity(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    fn overlap(&self, other: &SpeakerGroup) -> usize {
        self.active
            .iter()
            .zip(&other.active)
            .filter(|(a, b)| **a && **b)
            .count()
    }
}

/// Sort by activity (descending) and drop any group that overlaps a larger
/// one on more than half of its frames while sharing more than one
/// representative element with it.
pub fn prune_clusters(mut groups: Vec<SpeakerGroup>, tau_match: f64) -> Vec<SpeakerGroup> {
    groups.sort_by_key(|g| std::cmp::Reverse(g.activity()));
    let keep: Vec<bool> = (0..groups.len())
        .map(|j| {
            let small = &groups[j];
            let own = small.activity();
            !groups[..j].iter().any(|big| {
                2 * small.overlap(big) > own
                    && shared_elements(&small.representative, &big.representative, tau_match) > 1
            })
        })
        .collect();
    groups
        .into_iter()
        .zip(keep)
        .filter_map(|(g, k)| k.then_some(g))
        .collect()
}

/// Drop reflection groups: more than half of the group's frames overlap a
/// larger group, yet the group rarely holds the strongest vector of a frame.
/// Input must already be sorted by activity, as returned by [`prune_clusters`].
pub fn prune_echoes(groups: Vec<SpeakerGroup>, min_lead_ratio: f64) -> Vec<SpeakerGroup> {
    if min_lead_ratio <= 0.0 {
        return groups;
    }
    let keep: Vec<bool> = (0..groups.len())
        .map(|j| {
            let g = &groups[j];
            let own = g.activity();
            let weak = (g.lead_frames as f64) < min_lead_ratio * own as f64;
            !(weak && groups[..j].iter().any(|big| 2 * g.overlap(big) > own))
        })
        .collect();
    groups
        .into_iter()
        .zip(keep)
        .filter_map(|(g, k)| k.then_some(g))
        .collect()
}

fn dilate(row: &[bool], size: usize) -> Vec<bool> {
    let r = size / 2;
    let n = row.len();
    (0..n)
        .map(|i| row[i.saturating_sub(r)..(i + r + 1).min(n)].iter().any(|&a| a))
        .collect()
}

fn erode(row: &[bool], size: usize) -> Vec<bool> {
    let r = size / 2;
    let n = row.len();
    // outside the recording counts as active so activity touching the
    // borders is not eaten away
    (0..n)
        .map(|i| row[i.saturating_sub(r)..(i + r + 1).min(n)].iter().all(|&a| a))
        .collect()
}

/// Per-row dilation followed by erosion.
pub fn smooth_activity(act: &ActivityMatrix, dilate_frames: usize, erode_frames: usize) -> ActivityMatrix {
    let active = act
        .active
        .iter()
        .map(|row| erode(&dilate(row, dilate_frames), erode_frames))
        .collect();
    ActivityMatrix::new(active, act.n_frames, act.frame_shift_s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diarization {
    pub activity: ActivityMatrix,
    /// Median member vector of each speaker, same row order as `activity`.
    pub representatives: Vec<Vec<f64>>,
    pub n_local_clusters: usize,
}

/// The full chain on a recording's selected TDOA vectors.
pub fn diarize(
    selected: &[Vec<TdoaVector>],
    n_frames: usize,
    frame_shift_s: f64,
    cfg: &DiarizeConfig,
) -> Diarization {
    let stream: Vec<TdoaVector> = selected.iter().flatten().cloned().collect();
    let clusters = leader_follower(&stream, cfg.eps_lf, cfg.recency_s, frame_shift_s);
    if clusters.is_empty() {
        return Diarization {
            activity: ActivityMatrix::empty(n_frames, frame_shift_s),
            representatives: Vec::new(),
            n_local_clusters: 0,
        };
    }
    let reps: Vec<Vec<f64>> = clusters.iter().map(LocalCluster::representative).collect();
    let groups: Vec<SpeakerGroup> = single_linkage(&reps, cfg.msd_threshold)
        .into_iter()
        .map(|members| {
            let mut active = vec![false; n_frames];
            for &c in &members {
                for f in clusters[c].frames() {
                    if f < n_frames {
                        active[f] = true;
                    }
                }
            }
            let representative = elementwise_median(
                members
                    .iter()
                    .flat_map(|&c| clusters[c].members.iter().map(|v| v.tau.as_slice())),
            );
            let mut lead = vec![false; n_frames];
            for &c in &members {
                for v in &clusters[c].members {
                    if v.frame < n_frames && selected[v.frame].first().is_some_and(|b| b.tau == v.tau) {
                        lead[v.frame] = true;
                    }
                }
            }
            SpeakerGroup {
                representative,
                active,
                lead_frames: lead.iter().filter(|&&x| x).count(),
            }
        })
        .filter(|g| g.activity() >= cfg.min_activity_frames.max(1))
        .collect();
    let groups = prune_echoes(prune_clusters(groups, cfg.tau_match), cfg.min_lead_ratio);
    let raw = ActivityMatrix::new(
        groups.iter().map(|g| g.active.clone()).collect(),
        n_frames,
        frame_shift_s,
    );
    Diarization {
        activity: smooth_activity(&raw, cfg.dilate_frames, cfg.erode_frames),
        representatives: groups.into_iter().map(|g| g.representative).collect(),
        n_local_clusters: clusters.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(frame: usize, tau: &[f64]) -> TdoaVector {
        TdoaVector {
            frame,
            tau: tau.to_vec(),
            srp: 1.0,
        }
    }

    const SHIFT: f64 = 0.016;

    #[test]
    fn continuous_source_is_one_cluster() {
        let vs: Vec<TdoaVector> = (0..300)
            .map(|l| v(l, &[3.0 + (l % 2) as f64, 5.0, 2.0]))
            .collect();
        assert_eq!(leader_follower(&vs, 2.0, 1.0, SHIFT).len(), 1);
    }

    #[test]
    fn two_second_gap_splits() {
        let gap = (2.0 / SHIFT) as usize;
        let vs: Vec<TdoaVector> = (0..100)
            .chain(100 + gap..200 + gap)
            .map(|l| v(l, &[3.0, 5.0, 2.0]))
            .collect();
        let c = leader_follower(&vs, 2.0, 1.0, SHIFT);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].members.len(), 100);
    }

    #[test]
    fn one_vector_per_frame_per_cluster() {
        let vs = vec![v(0, &[1.0, 1.0, 0.0]), v(0, &[2.0, 1.0, -1.0]), v(1, &[1.0, 1.0, 0.0])];
        let c = leader_follower(&vs, 2.0, 1.0, SHIFT);
        assert_eq!(c.len(), 2);
        for cl in &c {
            let frames: Vec<usize> = cl.frames().collect();
            assert!(frames.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn linkage_groups() {
        let same = vec![vec![1.0, 2.0, 3.0]; 4];
        assert_eq!(single_linkage(&same, 4.0), vec![vec![0, 1, 2, 3]]);
        let reps = vec![
            vec![0.0, 0.0, 0.0],
            vec![20.0, -20.0, 10.0],
            vec![1.0, 0.0, 1.0],
            vec![21.0, -20.0, 10.0],
        ];
        assert_eq!(single_linkage(&reps, 4.0), vec![vec![0, 2], vec![1, 3]]);
        // chaining is what makes it single linkage
        let chain: Vec<Vec<f64>> = (0..5).map(|i| vec![1.5 * i as f64]).collect();
        assert_eq!(single_linkage(&chain, 4.0).len(), 1);
    }

    fn group(rep: &[f64], frames: std::ops::Range<usize>, n: usize) -> SpeakerGroup {
        let mut active = vec![false; n];
        frames.for_each(|f| active[f] = true);
        SpeakerGroup {
            representative: rep.to_vec(),
            active,
            lead_frames: 0,
        }
    }

    #[test]
    fn pruning_rules() {
        let a = group(&[1.0, 2.0, 1.0, 5.0, 4.0, -1.0], 0..100, 300);
        let b = group(&[9.0, 2.0, -7.0, 5.0, 4.0, -1.0], 150..300, 300);
        let out = prune_clusters(vec![a.clone(), b.clone()], 2.0);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0], b);
        let dup = group(&[1.0, 2.0, 1.0, 5.0, 4.0, -1.0], 10..60, 300);
        let out = prune_clusters(vec![dup, a.clone(), b.clone()], 2.0);
        assert_eq!(out.len(), 2);
        // overlapping but spatially distinct: kept
        let other = group(&[-9.0, 12.0, 21.0, 25.0, 34.0, 9.0], 10..60, 300);
        assert_eq!(prune_clusters(vec![a, other], 2.0).len(), 2);
    }

    fn matrix(rows: &[&str]) -> ActivityMatrix {
        let active: Vec<Vec<bool>> = rows
            .iter()
            .map(|r| r.chars().map(|c| c == '1').collect())
            .collect();
        let n = active[0].len();
        ActivityMatrix::new(active, n, SHIFT)
    }

    #[test]
    fn closing_fills_gaps_and_drops_spikes() {
        let a = matrix(&["0000111100011110000000"]);
        let s = smooth_activity(&a, 5, 5);
        assert_eq!(s, matrix(&["0000111111111110000000"]));
        let spike = matrix(&["0000000001000000000000"]);
        let s = smooth_activity(&spike, 1, 3);
        assert!(s.active[0].iter().all(|&x| !x));
        // activity at the borders survives
        let edge = matrix(&["1111000000000000001111"]);
        assert_eq!(smooth_activity(&edge, 3, 3), edge);
    }

    #[test]
    fn closing_is_idempotent_for_equal_sizes() {
        let a = matrix(&["0101100011100000100111010000011", "1100000000000011111111100000000"]);
        let once = smooth_activity(&a, 7, 7);
        assert_eq!(smooth_activity(&once, 7, 7), once);
    }

    #[test]
    fn silent_recording_has_no_speakers() {
        let d = diarize(&vec![Vec::new(); 50], 50, SHIFT, &DiarizeConfig::default());
        assert_eq!(d.activity.n_speakers(), 0);
        assert_eq!(d.activity.n_frames, 50);
    }
}
