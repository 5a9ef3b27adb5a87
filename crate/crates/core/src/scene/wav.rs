use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use serde::{Deserialize, Serialize};

use super::MultichannelRecording;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WavFormat {
    Pcm16,
    #[default]
    Float32,
}

/// Read a PCM (8/16/24/32-bit) or 32-bit float WAV file.
pub fn load_wav(path: impl AsRef<Path>) -> Result<MultichannelRecording> {
    let path = path.as_ref();
    let mut reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::Format {
            what: "WAV header",
            detail: format!("{}: {other}", path.display()),
        },
    })?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()?,
        SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<Result<_, _>>()?
        }
    };
    let frames = interleaved.len() / n_ch;
    let mut channels = vec![Vec::with_capacity(frames); n_ch];
    for frame in interleaved.chunks_exact(n_ch) {
        for (ch, &v) in channels.iter_mut().zip(frame) {
            ch.push(v);
        }
    }
    Ok(MultichannelRecording::new(channels, spec.sample_rate))
}

/// Write equal-length channels interleaved into one file.
pub fn write_wav(
    path: impl AsRef<Path>,
    channels: &[Vec<f64>],
    sample_rate_hz: u32,
    format: WavFormat,
) -> Result<()> {
    if channels.is_empty() {
        return Err(Error::Input("no channels to write".into()));
    }
    let len = channels.iter().map(Vec::len).min().unwrap_or(0);
    let spec = WavSpec {
        channels: channels.len() as u16,
        sample_rate: sample_rate_hz,
        bits_per_sample: match format {
            WavFormat::Pcm16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Pcm16 => SampleFormat::Int,
            WavFormat::Float32 => SampleFormat::Float,
        },
    };
    let mut writer = WavWriter::create(path, spec)?;
    for t in 0..len {
        for ch in channels {
            match format {
                WavFormat::Pcm16 => {
                    let v = (ch[t] * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    writer.write_sample(v)?;
                }
                WavFormat::Float32 => writer.write_sample(ch[t] as f32)?,
            }
        }
    }
    writer.finalize()?;
    Ok(())
}

/// One file per recording device (e.g. a pre-recorded meeting
/// session); the first channel of each file is used and devices are named
/// after the file stems. Lengths may differ, rates may not.
pub fn load_device_wavs(paths: &[impl AsRef<Path>]) -> Result<MultichannelRecording> {
    let mut channels = Vec::with_capacity(paths.len());
    let mut device_ids = Vec::with_capacity(paths.len());
    let mut fs = None;
    for p in paths {
        let p = p.as_ref();
        let rec = load_wav(p)?;
        if *fs.get_or_insert(rec.sample_rate_hz) != rec.sample_rate_hz {
            return Err(Error::Input(format!(
                "{} is sampled at {} Hz, expected {} Hz",
                p.display(),
                rec.sample_rate_hz,
                fs.unwrap_or_default()
            )));
        }
        channels.push(rec.channels.into_iter().next().unwrap_or_default());
        device_ids.push(p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()));
    }
    let Some(sample_rate_hz) = fs else {
        return Err(Error::Input("no device recordings given".into()));
    };
    Ok(MultichannelRecording {
        channels,
        sample_rate_hz,
        device_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signal(n: usize, phase: f64) -> Vec<f64> {
        (0..n).map(|i| 0.5 * (0.01 * i as f64 + phase).sin()).collect()
    }

    #[test]
    fn float32_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let x: Vec<Vec<f64>> = vec![signal(500, 0.0), signal(500, 1.0)]
            .into_iter()
            .map(|c| c.into_iter().map(|v| v as f32 as f64).collect())
            .collect();
        write_wav(&path, &x, 16000, WavFormat::Float32).unwrap();
        let rec = load_wav(&path).unwrap();
        assert_eq!(rec.sample_rate_hz, 16000);
        assert_eq!(rec.channels, x);
    }

    #[test]
    fn pcm16_within_one_lsb_and_stereo() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.wav");
        let x = vec![signal(500, 0.0), signal(500, 2.0)];
        write_wav(&path, &x, 8000, WavFormat::Pcm16).unwrap();
        let rec = load_wav(&path).unwrap();
        assert_eq!(rec.n_channels(), 2);
        assert_eq!(rec.sample_rate_hz, 8000);
        for (a, b) in x.iter().zip(&rec.channels) {
            for (p, q) in a.iter().zip(b) {
                assert!((p - q).abs() <= 1.0 / 32768.0);
            }
        }
    }

    #[test]
    fn device_files_become_channels() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("Pixel6a.wav");
        let b = dir.path().join("Xiaomi.wav");
        write_wav(&a, &[signal(300, 0.0), signal(300, 5.0)], 16000, WavFormat::Float32).unwrap();
        write_wav(&b, &[signal(250, 1.0)], 16000, WavFormat::Float32).unwrap();
        let rec = load_device_wavs(&[&a, &b]).unwrap();
        assert_eq!(rec.device_ids, vec!["Pixel6a", "Xiaomi"]);
        assert_eq!((rec.channels[0].len(), rec.channels[1].len()), (300, 250));
        let c = dir.path().join("c.wav");
        write_wav(&c, &[signal(250, 1.0)], 8000, WavFormat::Float32).unwrap();
        assert!(load_device_wavs(&[&a, &c]).is_err());
    }

    #[test]
    fn malformed_header_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.wav");
        std::fs::write(&path, b"RIFF\x00\x00\x00\x00NOTAWAVEFILE").unwrap();
        assert!(matches!(load_wav(&path), Err(Error::Format { .. })));
    }
}
