//! RTTM speaker segments (`SPEAKER <session> 1 <onset> <dur> <NA> <NA> <label> <NA> <NA>`).

use std::fmt::Write as _;
use std::path::Path;

use crate::activity::ActivityMatrix;
use crate::error::{Error, Result};

fn ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct RttmSegment {
    pub session: String,
    pub onset_s: f64,
    pub duration_s: f64,
    pub speaker: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RttmDocument {
    pub segments: Vec<RttmSegment>,
}

impl RttmDocument {
    /// One segment per contiguous run; speaker `i` is labelled `labels[i]`
    /// (or `spk<i>` if no labels are given).
    pub fn from_activity(session: &str, act: &ActivityMatrix, labels: Option<&[String]>) -> Self {
        let mut segments = Vec::new();
        for (spk, on, off) in act.intervals() {
            segments.push(RttmSegment {
                session: session.to_string(),
                onset_s: ms(on),
                duration_s: ms(ms(off) - ms(on)),
                speaker: labels
                    .and_then(|l| l.get(spk).cloned())
                    .unwrap_or_else(|| format!("spk{spk}")),
            });
        }
        segments.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s).then(a.speaker.cmp(&b.speaker)));
        Self { segments }
    }

    /// Distinct speaker labels in order of first appearance.
    pub fn speakers(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.segments {
            if !out.contains(&s.speaker) {
                out.push(s.speaker.clone());
            }
        }
        out
    }

    /// Rasterise onto a frame grid, rows ordered as `speakers`.
    pub fn to_activity(&self, speakers: &[String], n_frames: usize, frame_shift_s: f64) -> ActivityMatrix {
        let intervals: Vec<(usize, f64, f64)> = self
            .segments
            .iter()
            .filter_map(|s| {
                speakers
                    .iter()
                    .position(|l| *l == s.speaker)
                    .map(|i| (i, s.onset_s, s.onset_s + s.duration_s))
            })
            .collect();
        ActivityMatrix::from_intervals(speakers.len(), &intervals, n_frames, frame_shift_s)
    }

    pub fn to_string(&self) -> String {
        let mut out = String::new();
        for s in &self.segments {
            let _ = writeln!(
                out,
                "SPEAKER {} 1 {:.3} {:.3} <NA> <NA> {} <NA> <NA>",
                s.session, s.onset_s, s.duration_s, s.speaker
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut segments = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = |detail: String| Error::Format {
                what: "RTTM",
                detail: format!("line {}: {detail}", i + 1),
            };
            if f.len() < 8 || f[0] != "SPEAKER" {
                return Err(bad("expected a SPEAKER record with at least 8 fields".into()));
            }
            let onset_s: f64 = f[3].parse().map_err(|_| bad(format!("onset {:?}", f[3])))?;
            let duration_s: f64 = f[4].parse().map_err(|_| bad(format!("duration {:?}", f[4])))?;
            if !(onset_s >= 0.0) || !(duration_s > 0.0) {
                return Err(bad("onset must be >= 0 and duration > 0".into()));
            }
            segments.push(RttmSegment {
                session: f[1].to_string(),
                onset_s,
                duration_s,
                speaker: f[7].to_string(),
            });
        }
        Ok(Self { segments })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_string())?;
        Ok(())
    }
}
