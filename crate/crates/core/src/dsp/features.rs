use ndarray::{s, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::mel::{mel_filterbank, MelFilterbank, MelScale};
use super::stft::{stft_power, FrameParams, WindowKind};
use super::wav::AudioClip;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    pub fft_size: usize,
    pub hop_size: usize,
    pub window: WindowKind,
    pub mel_bands: usize,
    pub mel_scale: MelScale,
    /// Consecutive frames concatenated into one model input.
    pub frames: usize,
    /// Floor applied to mel power before the natural log.
    pub log_floor: f64,
    /// Per-clip, per-band mean/variance normalization of the log-mel
    /// matrix before stacking.
    pub standardize: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            sample_rate: 16_000,
            fft_size: 1024,
            hop_size: 512,
            window: WindowKind::Hann,
            mel_bands: 128,
            mel_scale: MelScale::Htk,
            frames: 5,
            log_floor: 1e-12,
            standardize: false,
        }
    }
}

impl FeatureConfig {
    /// Stacked vector dimension `frames * mel_bands`.
    pub fn input_dim(&self) -> usize {
        self.frames * self.mel_bands
    }

    pub fn frame_params(&self) -> FrameParams {
        FrameParams {
            fft_size: self.fft_size,
            hop_size: self.hop_size,
            window: self.window,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.frame_params().validate()?;
        if self.mel_bands == 0 || self.frames == 0 {
            return Err(Error::Config("mel_bands and frames must be >= 1".into()));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return Err(Error::Config(format!(
                "log_floor must be positive, got {}",
                self.log_floor
            )));
        }
        Ok(())
    }

    /// Number of stacked vectors a clip of `len` samples yields.
    pub fn vectors_per_clip(&self, len: usize) -> Option<usize> {
        let t = self.frame_params().num_frames(len)?;
        (t >= self.frames).then(|| t - self.frames + 1)
    }
}

/// `F x T` natural-log mel energies.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMelSpectrogram {
    pub values: Array2<f64>,
    pub frame_params: FrameParams,
}

impl LogMelSpectrogram {
    pub fn mel_bands(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_frames(&self) -> usize {
        self.values.ncols()
    }
}

/// One model input: frames `t .. t+P` concatenated in frame order.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedFeature {
    pub vector: Vec<f64>,
    pub frame_index: usize,
}

/// Reusable log-mel front end; holds the filterbank for one configuration.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: FeatureConfig,
    filterbank: MelFilterbank,
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig) -> Result<Self> {
        config.validate()?;
        let filterbank = mel_filterbank(
            config.mel_bands,
            config.fft_size,
            config.sample_rate,
            config.mel_scale,
        )?;
        Ok(FeatureExtractor { config, filterbank })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    pub fn log_mel(&self, clip: &AudioClip) -> Result<LogMelSpectrogram> {
        if clip.sample_rate_hz() != self.config.sample_rate {
            return Err(Error::Config(format!(
                "clip sample rate {} Hz differs from configured {} Hz (no resampling)",
                clip.sample_rate_hz(),
                self.config.sample_rate
            )));
        }
        let power = stft_power(clip, self.config.frame_params())?;
        let floor = self.config.log_floor;
        let values = self
            .filterbank
            .weights
            .dot(&power.values)
            .mapv(|v| v.max(floor).ln());
        Ok(LogMelSpectrogram {
            values,
            frame_params: power.params,
        })
    }

    /// `K x D` matrix of stacked vectors for one clip, ready for the model.
    pub fn clip_features(&self, clip: &AudioClip) -> Result<Array2<f64>> {
        let mut spec = self.log_mel(clip)?;
        if self.config.standardize {
            standardize_bands(&mut spec.values);
        }
        stack_frames_matrix(&spec, self.config.frames)
    }
}

pub fn log_mel(clip: &AudioClip, config: &FeatureConfig) -> Result<LogMelSpectrogram> {
    FeatureExtractor::new(config.clone())?.log_mel(clip)
}

fn standardize_bands(values: &mut Array2<f64>) {
    for mut row in values.rows_mut() {
        let n = row.len() as f64;
        let mean = row.sum() / n;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt().max(1e-8);
        row.mapv_inplace(|v| (v - mean) / sd);
    }
}

/// Row `k` holds `[X_k; X_{k+1}; ...; X_{k+P-1}]`, i.e. element `j*F + f`
/// is mel band `f` of frame `k + j`.
pub fn stack_frames_matrix(spec: &LogMelSpectrogram, frames: usize) -> Result<Array2<f64>> {
    let (f, t) = spec.values.dim();
    if frames == 0 {
        return Err(Error::Config("frame stack size must be >= 1".into()));
    }
    if t < frames {
        return Err(Error::TooShort(format!(
            "{t} frames cannot form a stack of {frames}"
        )));
    }
    let k = t - frames + 1;
    let mut out = Array2::<f64>::zeros((k, frames * f));
    for row in 0..k {
        for j in 0..frames {
            out.slice_mut(s![row, j * f..(j + 1) * f])
                .assign(&spec.values.column(row + j));
        }
    }
    Ok(out)
}

pub fn stack_frames(spec: &LogMelSpectrogram, frames: usize) -> Result<Vec<StackedFeature>> {
    let m = stack_frames_matrix(spec, frames)?;
    Ok(m.rows()
        .into_iter()
        .enumerate()
        .map(|(frame_index, r): (usize, ArrayView1<f64>)| StackedFeature {
            vector: r.to_vec(),
            frame_index,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_from(values: Array2<f64>) -> LogMelSpectrogram {
        LogMelSpectrogram {
            values,
            frame_params: FeatureConfig::default().frame_params(),
        }
    }

    #[test]
    fn zero_clip_hits_floor_everywhere() {
        let clip = AudioClip::new(vec![0.0; 16_000], 16_000).unwrap();
        let cfg = FeatureConfig::default();
        let lm = log_mel(&clip, &cfg).unwrap();
        let floor = 1e-12f64.ln();
        assert!(lm.values.iter().all(|&v| v == floor));
    }

    #[test]
    fn ten_second_clip_shape() {
        let samples: Vec<f32> = (0..160_000).map(|i| ((i as f32) * 0.01).sin() * 0.1).collect();
        let clip = AudioClip::new(samples, 16_000).unwrap();
        let lm = log_mel(&clip, &FeatureConfig::default()).unwrap();
        // 1 + floor((160000 - 1024) / 512) = 311
        assert_eq!(lm.values.dim(), (128, 311));
        let stacked = stack_frames(&lm, 5).unwrap();
        assert_eq!(stacked.len(), 307);
        assert!(stacked.iter().all(|s| s.vector.len() == 640));
    }

    #[test]
    fn doubling_amplitude_shifts_by_log4() {
        let base: Vec<f32> = (0..8000)
            .map(|i| (((i * 7919) % 1000) as f32 / 1000.0 - 0.5) * 0.4)
            .collect();
        let doubled: Vec<f32> = base.iter().map(|v| v * 2.0).collect();
        let cfg = FeatureConfig::default();
        let a = log_mel(&AudioClip::new(base, 16_000).unwrap(), &cfg).unwrap();
        let b = log_mel(&AudioClip::new(doubled, 16_000).unwrap(), &cfg).unwrap();
        let floor = cfg.log_floor.ln();
        let mut checked = 0;
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            if *x > floor + 1.0 {
                assert!((y - x - 4f64.ln()).abs() < 1e-9);
                checked += 1;
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn stacking_boundary_and_count() {
        let v = Array2::from_shape_fn((128, 5), |(f, t)| (f * 10 + t) as f64);
        assert_eq!(stack_frames(&spec_from(v), 5).unwrap().len(), 1);
        let v = Array2::<f64>::zeros((128, 312));
        assert_eq!(stack_frames(&spec_from(v), 5).unwrap().len(), 308);
        let v = Array2::<f64>::zeros((128, 4));
        assert!(matches!(
            stack_frames(&spec_from(v), 5),
            Err(Error::TooShort(_))
        ));
    }

    #[test]
    fn stacking_layout_matches_index_oracle() {
        let (f, t, p) = (7, 12, 3);
        let v = Array2::from_shape_fn((f, t), |(i, j)| (i as f64) * 1000.0 + j as f64);
        let spec = spec_from(v.clone());
        let stacked = stack_frames(&spec, p).unwrap();
        assert_eq!(stacked.len(), t - p + 1);
        for (k, s) in stacked.iter().enumerate() {
            assert_eq!(s.frame_index, k);
            for d in 0..p * f {
                let frame = k + d / f;
                let band = d % f;
                assert_eq!(s.vector[d], v[[band, frame]]);
            }
        }
    }

    #[test]
    fn deterministic_bitwise() {
        let samples: Vec<f32> = (0..20_000).map(|i| ((i as f32) * 0.731).sin() * 0.3).collect();
        let clip = AudioClip::new(samples, 16_000).unwrap();
        let ex = FeatureExtractor::new(FeatureConfig::default()).unwrap();
        let a = ex.clip_features(&clip).unwrap();
        let b = ex.clip_features(&clip).unwrap();
        assert!(a
            .iter()
            .zip(b.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn standardize_toggle_zero_means_bands() {
        let samples: Vec<f32> = (0..20_000).map(|i| ((i as f32) * 0.1).sin() * 0.3).collect();
        let clip = AudioClip::new(samples, 16_000).unwrap();
        let cfg = FeatureConfig {
            standardize: true,
            ..FeatureConfig::default()
        };
        let feats = FeatureExtractor::new(cfg).unwrap().clip_features(&clip).unwrap();
        assert_eq!(feats.ncols(), 640);
        assert!(feats.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn sample_rate_mismatch_rejected() {
        let clip = AudioClip::new(vec![0.0; 4096], 8000).unwrap();
        assert!(matches!(
            log_mel(&clip, &FeatureConfig::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn vectors_per_clip_identity() {
        let cfg = FeatureConfig::default();
        assert_eq!(cfg.vectors_per_clip(160_000), Some(307));
        assert_eq!(cfg.vectors_per_clip(1023), None);
        assert_eq!(cfg.vectors_per_clip(1024 + 3 * 512), None);
        assert_eq!(cfg.vectors_per_clip(1024 + 4 * 512), Some(1));
    }
}
