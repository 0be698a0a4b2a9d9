use ndarray::Array2;
use rustfft::{num_complex::Complex, FftPlanner};

use super::wav::AudioClip;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    /// Periodic Hann window, `0.5 - 0.5 cos(2 pi n / N)`.
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameParams {
    pub fft_size: usize,
    pub hop_size: usize,
    pub window: WindowKind,
}

impl FrameParams {
    pub fn validate(&self) -> Result<()> {
        if self.fft_size < 2 || !self.fft_size.is_power_of_two() {
            return Err(Error::Config(format!(
                "fft_size must be a power of two >= 2, got {}",
                self.fft_size
            )));
        }
        if self.hop_size == 0 || self.hop_size > self.fft_size {
            return Err(Error::Config(format!(
                "hop_size must be in 1..={}, got {}",
                self.fft_size, self.hop_size
            )));
        }
        Ok(())
    }

    /// `1 + floor((len - fft_size) / hop_size)`, or `None` when the signal
    /// does not fill one frame.
    pub fn num_frames(&self, len: usize) -> Option<usize> {
        if len < self.fft_size {
            None
        } else {
            Some(1 + (len - self.fft_size) / self.hop_size)
        }
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }
}

pub fn window(kind: WindowKind, n: usize) -> Vec<f64> {
    match kind {
        WindowKind::Hann => (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
            .collect(),
    }
}

/// One-sided power spectrogram, `(fft_size/2 + 1) x T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrogram {
    pub values: Array2<f64>,
    pub params: FrameParams,
}

impl PowerSpectrogram {
    pub fn num_frames(&self) -> usize {
        self.values.ncols()
    }
}

pub fn stft_power(clip: &AudioClip, params: FrameParams) -> Result<PowerSpectrogram> {
    params.validate()?;
    let samples = clip.samples();
    let frames = params.num_frames(samples.len()).ok_or_else(|| {
        Error::TooShort(format!(
            "clip has {} samples, one frame needs {}",
            samples.len(),
            params.fft_size
        ))
    })?;
    let n = params.fft_size;
    let bins = params.num_bins();
    let win = window(params.window, n);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex::default(); n];
    let mut values = Array2::<f64>::zeros((bins, frames));
    for t in 0..frames {
        let start = t * params.hop_size;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(samples[start + i] as f64 * win[i], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for k in 0..bins {
            values[[k, t]] = buf[k].norm_sqr();
        }
    }
    Ok(PowerSpectrogram { values, params })
}
