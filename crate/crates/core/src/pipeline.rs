//! Stage orchestration over an output directory. Each stage reads the
//! artifacts of earlier stages, writes its own plus a JSON report, and can
//! be rerun on its own.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::activity::ActivityMatrix;
use crate::beamform::{extract_speaker, BeamformConfig, EnhancedSegment, Extraction, Manifest};
use crate::diarize::{diarize as run_diarize, DiarizeConfig};
use crate::error::{Error, Result};
use crate::evaluate::{sdr_gain, speaker_mapping, SdrGain};
use crate::gss::{GssConfig, GssRunner};
use crate::metrics::{compute_der, cp_wer, tdoa_rmse, DerBreakdown, TdoaError};
use crate::rttm::{RttmDocument, RttmSegment};
use crate::scene::meeting::MeetingSpec;
use crate::scene::{
    load_device_wavs, load_wav, simulate_scene, write_wav, DefaultAudio, MultichannelRecording, SceneConfig,
    WavFormat,
};
use crate::stft::{stft, StftConfig};
use crate::sync::{apply_report, synchronize, SyncConfig, SyncReport};
use crate::tdoa::{estimate_tdoas, read_jsonl, write_jsonl, TdoaEstConfig, TdoaVector};

pub const MIX_WAV: &str = "mix.wav";
pub const SCENE_JSON: &str = "scene.json";
pub const GROUND_TRUTH_JSON: &str = "ground_truth.json";
pub const REFERENCE_RTTM: &str = "reference.rttm";
pub const IMAGES_DIR: &str = "images";
pub const SYNCED_WAV: &str = "synced.wav";
pub const SYNC_REPORT_JSON: &str = "sync_report.json";
pub const TDOA_JSONL: &str = "tdoa.jsonl";
pub const TDOA_REPORT_JSON: &str = "tdoa_report.json";
pub const DIARIZATION_RTTM: &str = "diarization.rttm";
pub const SPEAKERS_JSON: &str = "speakers.json";
pub const MASKS_DIR: &str = "masks";
pub const ENHANCED_DIR: &str = "enhanced";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const EVAL_REPORT_JSON: &str = "eval_report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub collar_s: f64,
    /// JSON arrays of per-speaker transcripts; cpWER is reported when both
    /// are given.
    pub reference_transcripts: Option<PathBuf>,
    pub hypothesis_transcripts: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            collar_s: 0.25,
            reference_transcripts: None,
            hypothesis_transcripts: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub session: String,
    /// Random meeting generator, used unless `scene` or `recordings` is set.
    pub meeting: MeetingSpec,
    /// Explicit scene description.
    pub scene: Option<SceneConfig>,
    /// Pre-recorded device files, one per device.
    pub recordings: Vec<PathBuf>,
    pub wav_format: WavFormat,
    pub stft: StftConfig,
    pub sync: SyncConfig,
    pub skip_sync: bool,
    pub tdoa: TdoaEstConfig,
    pub diarize: DiarizeConfig,
    pub gss: GssConfig,
    pub beamform: BeamformConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            session: "session".into(),
            meeting: MeetingSpec::default(),
            scene: None,
            recordings: Vec::new(),
            wav_format: WavFormat::Float32,
            stft: StftConfig::default(),
            sync: SyncConfig::default(),
            skip_sync: false,
            tdoa: TdoaEstConfig::default(),
            diarize: DiarizeConfig::default(),
            gss: GssConfig::default(),
            beamform: BeamformConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_artifact(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn read_artifact(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    Ok(fs::read_to_string(path)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn load_recording(path: &Path) -> Result<MultichannelRecording> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    load_wav(path)
}

fn speaker_label(i: usize) -> String {
    format!("spk{i}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub speakers: Vec<String>,
    pub true_tdoa_vectors: Vec<Vec<f64>>,
    pub intervals: Vec<(usize, f64, f64)>,
    pub sto_samples: Vec<i64>,
    pub sro_ppm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub seed: u64,
    pub channels: usize,
    pub samples: usize,
    pub sample_rate_hz: u32,
    pub simulated: bool,
    pub speakers: usize,
}

/// Render (or load) the recording; for simulated scenes also writes the
/// ground truth, the reference RTTM and per-speaker images.
pub fn simulate(cfg: &PipelineConfig, seed: u64, out: &Path) -> Result<SimulateReport> {
    fs::create_dir_all(out)?;
    if !cfg.recordings.is_empty() {
        let rec = load_device_wavs(&cfg.recordings)?;
        let len = rec.min_len();
        let channels: Vec<Vec<f64>> = rec.channels.iter().map(|c| c[..len].to_vec()).collect();
        write_wav(out.join(MIX_WAV), &channels, rec.sample_rate_hz, cfg.wav_format)?;
        return Ok(SimulateReport {
            seed,
            channels: channels.len(),
            samples: len,
            sample_rate_hz: rec.sample_rate_hz,
            simulated: false,
            speakers: 0,
        });
    }
    let scene = match &cfg.scene {
        Some(s) => SceneConfig { seed, ..s.clone() },
        None => cfg.meeting.generate(seed),
    };
    let (rec, truth) = simulate_scene(&scene, &DefaultAudio)?;
    write_json(&out.join(SCENE_JSON), &scene)?;
    write_wav(out.join(MIX_WAV), &rec.channels, rec.sample_rate_hz, cfg.wav_format)?;
    let speakers: Vec<String> = (0..truth.n_speakers()).map(speaker_label).collect();
    let m = rec.n_channels();
    write_json(
        &out.join(GROUND_TRUTH_JSON),
        &GroundTruthFile {
            speakers: speakers.clone(),
            true_tdoa_vectors: truth.true_tdoa_vectors.clone(),
            intervals: truth.intervals.clone(),
            sto_samples: (0..m).map(|d| scene.sto(d)).collect(),
            sro_ppm: (0..m).map(|d| scene.sro(d)).collect(),
        },
    )?;
    let mut segments: Vec<RttmSegment> = truth
        .intervals
        .iter()
        .map(|&(spk, on, off)| RttmSegment {
            session: cfg.session.clone(),
            onset_s: (on * 1000.0).round() / 1000.0,
            duration_s: ((off - on) * 1000.0).round() / 1000.0,
            speaker: speakers[spk].clone(),
        })
        .collect();
    segments.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s).then(a.speaker.cmp(&b.speaker)));
    RttmDocument { segments }.write(out.join(REFERENCE_RTTM))?;
    let images = out.join(IMAGES_DIR);
    fs::create_dir_all(&images)?;
    for (label, img) in speakers.iter().zip(&truth.images) {
        write_wav(images.join(format!("{label}.wav")), img, rec.sample_rate_hz, WavFormat::Float32)?;
    }
    Ok(SimulateReport {
        seed,
        channels: m,
        samples: rec.min_len(),
        sample_rate_hz: rec.sample_rate_hz,
        simulated: true,
        speakers: speakers.len(),
    })
}

/// Offset and drift compensation of `mix.wav`.
pub fn sync(cfg: &PipelineConfig, out: &Path) -> Result<SyncReport> {
    let rec = load_recording(&out.join(MIX_WAV))?;
    let (synced, mut report) = if cfg.skip_sync {
        (rec.clone(), SyncReport::identity(rec.n_channels(), cfg.sync.reference_channel))
    } else {
        synchronize(&rec, &cfg.sync)?
    };
    if cfg.skip_sync {
        report.notes.push("synchronisation skipped".into());
    }
    write_wav(out.join(SYNCED_WAV), &synced.channels, synced.sample_rate_hz, WavFormat::Float32)?;
    write_json(&out.join(SYNC_REPORT_JSON), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdoaReport {
    pub n_frames: usize,
    pub frame_shift_s: f64,
    pub n_mics: usize,
    pub vad_active_frames: usize,
    pub selected_vectors: usize,
    pub multi_vector_frames: usize,
}

/// Frame-wise TDOA vectors of `synced.wav`.
pub fn tdoa(cfg: &PipelineConfig, out: &Path) -> Result<TdoaReport> {
    let rec = load_recording(&out.join(SYNCED_WAV))?;
    let s = stft(&rec.channels, rec.sample_rate_hz, &cfg.stft)?;
    let r = cfg.sync.reference_channel.min(rec.n_channels() - 1);
    let track = estimate_tdoas(&s, &rec.channels[r], &cfg.tdoa)?;
    write_jsonl(&track, fs::File::create(out.join(TDOA_JSONL)).map(std::io::BufWriter::new)?)?;
    let report = TdoaReport {
        n_frames: track.n_frames(),
        frame_shift_s: track.frame_shift_s,
        n_mics: track.n_mics,
        vad_active_frames: track.vad.iter().filter(|&&v| v).count(),
        selected_vectors: track.selected_flat().count(),
        multi_vector_frames: track.selected.iter().filter(|f| f.len() > 1).count(),
    };
    write_json(&out.join(TDOA_REPORT_JSON), &report)?;
    Ok(report)
}

fn load_tdoa(out: &Path) -> Result<(TdoaReport, Vec<Vec<TdoaVector>>)> {
    let report: TdoaReport = read_json(&out.join(TDOA_REPORT_JSON))?;
    let path = out.join(TDOA_JSONL);
    if !path.exists() {
        return Err(Error::MissingArtifact(path));
    }
    let vectors = read_jsonl(std::io::BufReader::new(fs::File::open(&path)?))?;
    let mut frames = vec![Vec::new(); report.n_frames];
    for v in vectors {
        let l = v.frame;
        frames
            .get_mut(l)
            .ok_or_else(|| Error::Format {
                what: "TDOA dump",
                detail: format!("frame {l} beyond {} frames", report.n_frames),
            })?
            .push(v);
    }
    Ok((report, frames))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakersFile {
    pub speakers: Vec<String>,
    pub representatives: Vec<Vec<f64>>,
    pub active_frames: Vec<usize>,
    pub n_local_clusters: usize,
    pub n_frames: usize,
    pub frame_shift_s: f64,
}

/// Clustering of the TDOA dump into speaker activity.
pub fn diarize(cfg: &PipelineConfig, out: &Path) -> Result<SpeakersFile> {
    let (report, frames) = load_tdoa(out)?;
    let d = run_diarize(&frames, report.n_frames, report.frame_shift_s, &cfg.diarize);
    let speakers: Vec<String> = (0..d.activity.n_speakers()).map(speaker_label).collect();
    RttmDocument::from_activity(&cfg.session, &d.activity, Some(&speakers)).write(out.join(DIARIZATION_RTTM))?;
    let file = SpeakersFile {
        active_frames: (0..d.activity.n_speakers()).map(|i| d.activity.active_count(i)).collect(),
        speakers,
        representatives: d.representatives,
        n_local_clusters: d.n_local_clusters,
        n_frames: report.n_frames,
        frame_shift_s: report.frame_shift_s,
    };
    write_json(&out.join(SPEAKERS_JSON), &file)?;
    Ok(file)
}

fn read_rttm(path: &Path) -> Result<RttmDocument> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    RttmDocument::read(path)
}

/// GSS masks and beamformed per-speaker signals.
pub fn enhance(cfg: &PipelineConfig, out: &Path) -> Result<Manifest> {
    let rec = load_recording(&out.join(SYNCED_WAV))?;
    let speakers: SpeakersFile = read_json(&out.join(SPEAKERS_JSON))?;
    let rttm = read_rttm(&out.join(DIARIZATION_RTTM))?;
    let s = stft(&rec.channels, rec.sample_rate_hz, &cfg.stft)?;
    let activity = rttm.to_activity(&speakers.speakers, s.frames(), s.frame_shift_s());
    let runner = GssRunner::new(&s, &activity, &speakers.representatives, cfg.gss.clone())?;
    let segs = runner.run_all()?;

    let masks_dir = out.join(MASKS_DIR);
    let enhanced_dir = out.join(ENHANCED_DIR);
    fs::create_dir_all(&masks_dir)?;
    fs::create_dir_all(&enhanced_dir)?;
    let mut counters = vec![0usize; speakers.speakers.len()];
    for seg in &segs {
        let idx = counters[seg.target];
        counters[seg.target] += 1;
        let path = masks_dir.join(format!("{}_{idx:03}.mask", speakers.speakers[seg.target]));
        seg.masks.write_to(std::io::BufWriter::new(fs::File::create(path)?))?;
    }

    let mut manifest = Manifest {
        session: cfg.session.clone(),
        speakers: Vec::new(),
    };
    for (i, label) in speakers.speakers.iter().enumerate() {
        let ex = extract_speaker(&s, &segs, i, speakers.speakers.len(), &cfg.beamform)?;
        let entry = Manifest::speaker_entry(&cfg.session, label, &ex, s.frame_shift_s());
        write_wav(
            enhanced_dir.join(&entry.file),
            std::slice::from_ref(&ex.signal),
            rec.sample_rate_hz,
            cfg.wav_format,
        )?;
        manifest.speakers.push(entry);
    }
    write_json(&out.join(MANIFEST_JSON), &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerScore {
    pub speaker: String,
    pub reference_speaker: Option<String>,
    pub sdr: Option<SdrGain>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub der: Option<DerBreakdown>,
    pub tdoa: Option<TdoaError>,
    pub speakers: Vec<SpeakerScore>,
    pub mean_sdr_improvement_db: Option<f64>,
    pub cp_wer: Option<f64>,
}

/// Scores whatever hypotheses exist against the simulation ground truth.
pub fn eval(cfg: &PipelineConfig, out: &Path) -> Result<EvalReport> {
    let truth: GroundTruthFile = read_json(&out.join(GROUND_TRUTH_JSON))?;
    let reference_rttm = read_rttm(&out.join(REFERENCE_RTTM))?;
    let hyp_rttm = read_rttm(&out.join(DIARIZATION_RTTM))?;
    let speakers: SpeakersFile = read_json(&out.join(SPEAKERS_JSON))?;
    let (n, shift) = (speakers.n_frames, speakers.frame_shift_s);
    let reference = reference_rttm.to_activity(&truth.speakers, n, shift);
    let hyp = hyp_rttm.to_activity(&speakers.speakers, n, shift);
    let der = compute_der(&reference, &hyp, cfg.eval.collar_s).ok();

    let sync_report: Option<SyncReport> = match read_json(&out.join(SYNC_REPORT_JSON)) {
        Ok(r) => Some(r),
        Err(Error::MissingArtifact(_)) => None,
        Err(e) => return Err(e),
    };
    let tdoa = match load_tdoa(out) {
        Ok((_, frames)) => {
            let expected = synced_tdoas(&truth, sync_report.as_ref());
            Some(score_tdoa(&frames, &reference, &expected))
        }
        Err(Error::MissingArtifact(_)) => None,
        Err(e) => return Err(e),
    };

    let mapping = speaker_mapping(&reference, &hyp);
    let mut scores = Vec::new();
    let manifest: Option<Manifest> = match read_json(&out.join(MANIFEST_JSON)) {
        Ok(m) => Some(m),
        Err(Error::MissingArtifact(_)) => None,
        Err(e) => return Err(e),
    };
    if let Some(manifest) = &manifest {
        let mix = load_recording(&out.join(SYNCED_WAV))?;
        let report = sync_report
            .clone()
            .ok_or_else(|| Error::MissingArtifact(out.join(SYNC_REPORT_JSON)))?;
        let hop = cfg.stft.frame_shift;
        for entry in &manifest.speakers {
            let h = speakers.speakers.iter().position(|s| *s == entry.speaker);
            let r = h.and_then(|h| mapping.get(h).copied().flatten());
            let sdr = match r {
                Some(r) => {
                    let image = load_recording(&out.join(IMAGES_DIR).join(format!("{}.wav", truth.speakers[r])))?;
                    let image = apply_report(&image, &report);
                    let signal = load_recording(&out.join(ENHANCED_DIR).join(&entry.file))?
                        .channels
                        .swap_remove(0);
                    let ex = Extraction {
                        signal,
                        segments: entry
                            .segments
                            .iter()
                            .map(|s| EnhancedSegment {
                                frames: (s.start_s / shift).round() as usize..(s.end_s / shift).round() as usize,
                                reference_channel: s.reference_channel,
                                expected_sdr_db: f64::NAN,
                                subsegments: 0,
                            })
                            .collect(),
                    };
                    sdr_gain(&ex, &image.channels, &mix.channels, hop)?
                }
                None => None,
            };
            scores.push(SpeakerScore {
                speaker: entry.speaker.clone(),
                reference_speaker: r.map(|r| truth.speakers[r].clone()),
                sdr,
            });
        }
    }
    let gains: Vec<f64> = scores.iter().filter_map(|s| s.sdr.map(|g| g.improvement_db())).collect();
    let cp_wer = match (&cfg.eval.reference_transcripts, &cfg.eval.hypothesis_transcripts) {
        (Some(r), Some(h)) => {
            let r: Vec<String> = read_json(r)?;
            let h: Vec<String> = read_json(h)?;
            Some(cp_wer(&r, &h)?)
        }
        _ => None,
    };
    let report = EvalReport {
        der,
        tdoa,
        speakers: scores,
        mean_sdr_improvement_db: (!gains.is_empty()).then(|| gains.iter().sum::<f64>() / gains.len() as f64),
        cp_wer,
    };
    write_json(&out.join(EVAL_REPORT_JSON), &report)?;
    Ok(report)
}

/// Ground-truth TDOAs as seen after synchronisation: each channel keeps the
/// part of its true offset that the estimate did not remove.
fn synced_tdoas(truth: &GroundTruthFile, report: Option<&SyncReport>) -> Vec<Vec<f64>> {
    let Some(report) = report else {
        return truth.true_tdoa_vectors.clone();
    };
    let residual: Vec<f64> = truth
        .sto_samples
        .iter()
        .zip(&report.sto_samples)
        .map(|(t, e)| (t - e) as f64)
        .collect();
    let m = residual.len();
    let pairs = crate::geometry::mic_pairs(m);
    truth
        .true_tdoa_vectors
        .iter()
        .map(|tau| {
            tau.iter()
                .zip(&pairs)
                .map(|(t, &(a, b))| t - (residual[b] - residual[a]))
                .collect()
        })
        .collect()
}

/// TDOA error on frames with exactly one reference speaker active.
fn score_tdoa(frames: &[Vec<TdoaVector>], reference: &ActivityMatrix, truth: &[Vec<f64>]) -> TdoaError {
    let (mut est, mut tru) = (Vec::new(), Vec::new());
    for (l, f) in frames.iter().enumerate().take(reference.n_frames) {
        if reference.n_active(l) != 1 || f.is_empty() {
            continue;
        }
        let spk = (0..reference.n_speakers()).find(|&i| reference.active[i][l]).unwrap_or(0);
        est.push(f.iter().map(|v| v.tau.clone()).collect());
        tru.push(vec![truth[spk].clone()]);
    }
    tdoa_rmse(&est, &tru)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Simulate,
    Sync,
    Tdoa,
    Diarize,
    Enhance,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Simulate,
        Stage::Sync,
        Stage::Tdoa,
        Stage::Diarize,
        Stage::Enhance,
        Stage::Eval,
    ];
}

/// Run one stage; returns its report as JSON for display.
pub fn run_stage(stage: Stage, cfg: &PipelineConfig, seed: u64, out: &Path) -> Result<serde_json::Value> {
    fs::create_dir_all(out)?;
    Ok(match stage {
        Stage::Simulate => serde_json::to_value(simulate(cfg, seed, out)?)?,
        Stage::Sync => serde_json::to_value(sync(cfg, out)?)?,
        Stage::Tdoa => serde_json::to_value(tdoa(cfg, out)?)?,
        Stage::Diarize => serde_json::to_value(diarize(cfg, out)?)?,
        Stage::Enhance => serde_json::to_value(enhance(cfg, out)?)?,
        Stage::Eval => serde_json::to_value(eval(cfg, out)?)?,
    })
}

/// All stages in order; `eval` is skipped for recordings without ground truth.
pub fn run_all(cfg: &PipelineConfig, seed: u64, out: &Path) -> Result<BTreeMap<Stage, serde_json::Value>> {
    let mut reports = BTreeMap::new();
    for stage in Stage::ALL {
        if stage == Stage::Eval && !out.join(GROUND_TRUTH_JSON).exists() {
            continue;
        }
        reports.insert(stage, run_stage(stage, cfg, seed, out)?);
    }
    Ok(reports)
}
