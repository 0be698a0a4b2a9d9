//! Mono RIFF/WAVE input and output.
//!
//! Accepted inputs are 16-bit integer PCM and 32-bit IEEE float, one
//! channel. Integer samples are scaled by 1/32768 so that -32768 maps to
//! exactly -1.0.

use std::io;
use std::path::{Path, PathBuf};

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};

/// Time-domain observation of one machine: mono samples and their rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate_hz: u32,
    source_path: Option<PathBuf>,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyAudio);
        }
        if sample_rate_hz == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Format(format!("non-finite sample at index {i}")));
        }
        Ok(AudioClip {
            samples,
            sample_rate_hz,
            source_path: None,
        })
    }

    pub fn with_source_path(mut self, path: impl Into<PathBuf>) -> Self {
        self.source_path = Some(path.into());
        self
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn source_path(&self) -> Option<&Path> {
        self.source_path.as_deref()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

/// On-disk sample encoding used by [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

fn map_hound(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) if e.kind() != io::ErrorKind::UnexpectedEof => Error::io(path, e),
        hound::Error::IoError(e) => Error::Format(format!("{}: {e}", path.display())),
        other => Error::Format(format!("{}: {other}", path.display())),
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedChannels(spec.channels));
    }
    let samples: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (SampleFormat::Float, 32) => {
            let v: Vec<f32> = reader
                .into_samples::<f32>()
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| map_hound(path, e))?;
            if let Some(i) = v.iter().position(|s| !s.is_finite() || s.abs() > 1.0) {
                return Err(Error::Format(format!(
                    "{}: float sample {i} outside [-1, 1]",
                    path.display()
                )));
            }
            v
        }
        (fmt, bits) => {
            return Err(Error::Format(format!(
                "{}: unsupported sample encoding {fmt:?}/{bits} bit (expected PCM16 or float32)",
                path.display()
            )))
        }
    };
    if samples.is_empty() {
        return Err(Error::EmptyAudio);
    }
    Ok(AudioClip::new(samples, spec.sample_rate)?.with_source_path(path))
}

/// Writes a mono clip. PCM16 output clamps to full scale and rounds to the
/// nearest code, so the bytes are a pure function of the samples.
pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>, encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate_hz(),
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => SampleFormat::Int,
            WavEncoding::Float32 => SampleFormat::Float,
        },
    };
    let mut cursor = io::Cursor::new(Vec::new());
    {
        let mut w = WavWriter::new(&mut cursor, spec).map_err(|e| map_hound(path, e))?;
        for &s in clip.samples() {
            match encoding {
                WavEncoding::Pcm16 => {
                    let q = (s.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0);
                    w.write_sample(q as i16)
                }
                WavEncoding::Float32 => w.write_sample(s),
            }
            .map_err(|e| map_hound(path, e))?;
        }
        w.finalize().map_err(|e| map_hound(path, e))?;
    }
    crate::fsutil::write_atomic(path, &cursor.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw(path: &Path, channels: u16, samples: &[i16]) {
        let spec = WavSpec {
            channels,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(path, spec).unwrap();
        for &s in samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn ten_second_pcm16_clip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        write_raw(&p, 1, &vec![0i16; 160_000]);
        let clip = read_wav(&p).unwrap();
        assert_eq!(clip.len(), 160_000);
        assert_eq!(clip.sample_rate_hz(), 16_000);
        assert_eq!(clip.duration_secs(), 10.0);
    }

    #[test]
    fn full_scale_negative_maps_to_minus_one() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        write_raw(&p, 1, &[-32768, 0, 32767]);
        let clip = read_wav(&p).unwrap();
        assert_eq!(clip.samples()[0], -1.0);
        assert_eq!(clip.samples()[1], 0.0);
        assert!(clip.samples()[2] < 1.0);
    }

    #[test]
    fn stereo_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        write_raw(&p, 2, &[1, 2, 3, 4]);
        assert!(matches!(read_wav(&p), Err(Error::UnsupportedChannels(2))));
    }

    #[test]
    fn zero_length_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        write_raw(&p, 1, &[]);
        assert!(matches!(read_wav(&p), Err(Error::EmptyAudio)));
    }

    #[test]
    fn garbage_header_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        std::fs::write(&p, b"RIFX0000garbage garbage garbage").unwrap();
        assert!(matches!(read_wav(&p), Err(Error::Format(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_wav("/nonexistent/clip.wav"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn float_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.wav");
        let clip = AudioClip::new(vec![0.25, -0.5, 0.125, 1.0, -1.0], 16_000).unwrap();
        write_wav(&clip, &p, WavEncoding::Float32).unwrap();
        assert_eq!(read_wav(&p).unwrap().samples(), clip.samples());
    }

    #[test]
    fn pcm16_round_trip_within_one_code() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("i.wav");
        let samples: Vec<f32> = (0..100).map(|i| ((i as f32) * 0.37).sin() * 0.9).collect();
        let clip = AudioClip::new(samples.clone(), 16_000).unwrap();
        write_wav(&clip, &p, WavEncoding::Pcm16).unwrap();
        let back = read_wav(&p).unwrap();
        for (a, b) in samples.iter().zip(back.samples()) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }
}
