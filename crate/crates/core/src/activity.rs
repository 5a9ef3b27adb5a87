use serde::{Deserialize, Serialize};

/// Speaker x frame boolean activity ("who spoke when").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityMatrix {
    pub active: Vec<Vec<bool>>,
    pub n_frames: usize,
    pub frame_shift_s: f64,
}

impl ActivityMatrix {
    pub fn empty(n_frames: usize, frame_shift_s: f64) -> Self {
        Self {
            active: Vec::new(),
            n_frames,
            frame_shift_s,
        }
    }

    pub fn new(active: Vec<Vec<bool>>, n_frames: usize, frame_shift_s: f64) -> Self {
        debug_assert!(active.iter().all(|r| r.len() == n_frames));
        Self {
            active,
            n_frames,
            frame_shift_s,
        }
    }

    /// Rasterise `(speaker, onset_s, offset_s)` intervals; frame `l` is
    /// active when its time `l * shift` lies in `[onset, offset)`.
    pub fn from_intervals(
        n_speakers: usize,
        intervals: &[(usize, f64, f64)],
        n_frames: usize,
        frame_shift_s: f64,
    ) -> Self {
        let mut active = vec![vec![false; n_frames]; n_speakers];
        for &(spk, on, off) in intervals {
            let first = (on / frame_shift_s - 1e-9).ceil().max(0.0) as usize;
            for l in first..n_frames {
                if l as f64 >= off / frame_shift_s - 1e-9 {
                    break;
                }
                active[spk][l] = true;
            }
        }
        Self::new(active, n_frames, frame_shift_s)
    }

    pub fn n_speakers(&self) -> usize {
        self.active.len()
    }

    #[inline]
    pub fn is_active(&self, speaker: usize, frame: usize) -> bool {
        self.active[speaker][frame]
    }

    pub fn n_active(&self, frame: usize) -> usize {
        self.active.iter().filter(|r| r[frame]).count()
    }

    pub fn active_count(&self, speaker: usize) -> usize {
        self.active[speaker].iter().filter(|&&a| a).count()
    }

    /// Maximal runs of activity of one speaker as frame ranges.
    pub fn segments(&self, speaker: usize) -> Vec<std::ops::Range<usize>> {
        runs(&self.active[speaker])
    }

    /// Activity intervals in seconds: `(speaker, onset_s, offset_s)`.
    pub fn intervals(&self) -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        for spk in 0..self.n_speakers() {
            for r in self.segments(spk) {
                out.push((
                    spk,
                    r.start as f64 * self.frame_shift_s,
                    r.end as f64 * self.frame_shift_s,
                ));
            }
        }
        out
    }

    /// Copy of the rows reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self::new(
            order.iter().map(|&i| self.active[i].clone()).collect(),
            self.n_frames,
            self.frame_shift_s,
        )
    }

    /// Nearest-frame resampling onto another grid.
    pub fn resampled(&self, n_frames: usize, frame_shift_s: f64) -> Self {
        let active = self
            .active
            .iter()
            .map(|row| {
                (0..n_frames)
                    .map(|l| {
                        let src = (l as f64 * frame_shift_s / self.frame_shift_s).round() as usize;
                        src < row.len() && row[src]
                    })
                    .collect()
            })
            .collect();
        Self::new(active, n_frames, frame_shift_s)
    }
}

/// Maximal runs of `true`.
pub fn runs(row: &[bool]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &a) in row.iter().enumerate() {
        match (a, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(s..row.len());
    }
    out
}
