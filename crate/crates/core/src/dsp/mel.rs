use ndarray::Array2;

use crate::error::{Error, Result};

/// Hz <-> mel conversion used to place filter centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MelScale {
    /// `2595 log10(1 + f / 700)`.
    #[default]
    Htk,
    /// Linear below 1 kHz, logarithmic above (Auditory Toolbox / librosa default).
    Slaney,
}

const SLANEY_F_SP: f64 = 200.0 / 3.0;
const SLANEY_MIN_LOG_HZ: f64 = 1000.0;
const SLANEY_MIN_LOG_MEL: f64 = SLANEY_MIN_LOG_HZ / SLANEY_F_SP;

fn slaney_logstep() -> f64 {
    6.4f64.ln() / 27.0
}

impl MelScale {
    pub fn hz_to_mel(self, hz: f64) -> f64 {
        match self {
            MelScale::Htk => 2595.0 * (1.0 + hz / 700.0).log10(),
            MelScale::Slaney => {
                if hz < SLANEY_MIN_LOG_HZ {
                    hz / SLANEY_F_SP
                } else {
                    SLANEY_MIN_LOG_MEL + (hz / SLANEY_MIN_LOG_HZ).ln() / slaney_logstep()
                }
            }
        }
    }

    pub fn mel_to_hz(self, mel: f64) -> f64 {
        match self {
            MelScale::Htk => 700.0 * (10f64.powf(mel / 2595.0) - 1.0),
            MelScale::Slaney => {
                if mel < SLANEY_MIN_LOG_MEL {
                    mel * SLANEY_F_SP
                } else {
                    SLANEY_MIN_LOG_HZ * (slaney_logstep() * (mel - SLANEY_MIN_LOG_MEL)).exp()
                }
            }
        }
    }
}

/// Triangular mel filters over the one-sided FFT bins, unit peak height.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `F x (fft_size/2 + 1)`.
    pub weights: Array2<f64>,
    pub center_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn num_bands(&self) -> usize {
        self.weights.nrows()
    }
}

/// Builds `num_bands` triangles whose edges sit at `num_bands + 2` points
/// spaced uniformly in mel between 0 Hz and Nyquist. Bin `k` is evaluated at
/// its exact frequency `k * sample_rate / fft_size`.
pub fn mel_filterbank(
    num_bands: usize,
    fft_size: usize,
    sample_rate: u32,
    scale: MelScale,
) -> Result<MelFilterbank> {
    if num_bands == 0 {
        return Err(Error::Config("mel band count must be >= 1".into()));
    }
    if fft_size < 2 || sample_rate == 0 {
        return Err(Error::Config(format!(
            "invalid fft_size {fft_size} / sample_rate {sample_rate}"
        )));
    }
    let nyquist = sample_rate as f64 / 2.0;
    let mel_max = scale.hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..num_bands + 2)
        .map(|i| scale.mel_to_hz(mel_max * i as f64 / (num_bands + 1) as f64))
        .collect();
    let bins = fft_size / 2 + 1;
    let bin_hz: Vec<f64> = (0..bins)
        .map(|k| k as f64 * sample_rate as f64 / fft_size as f64)
        .collect();

    let mut weights = Array2::<f64>::zeros((num_bands, bins));
    for m in 0..num_bands {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        for (k, &f) in bin_hz.iter().enumerate() {
            let rising = (f - lo) / (center - lo);
            let falling = (hi - f) / (hi - center);
            let w = rising.min(falling);
            if w > 0.0 {
                weights[[m, k]] = w;
            }
        }
        if weights.row(m).iter().all(|&w| w == 0.0) {
            return Err(Error::Config(format!(
                "mel band {m} ({lo:.1}-{hi:.1} Hz) covers no FFT bin; \
                 reduce the band count or increase fft_size"
            )));
        }
    }
    Ok(MelFilterbank {
        weights,
        center_hz: edges[1..=num_bands].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape() {
        let fb = mel_filterbank(128, 1024, 16_000, MelScale::Htk).unwrap();
        assert_eq!(fb.weights.dim(), (128, 513));
        assert_eq!(fb.center_hz.len(), 128);
    }

    #[test]
    fn rows_positive_and_nonnegative() {
        for scale in [MelScale::Htk, MelScale::Slaney] {
            let fb = mel_filterbank(128, 1024, 16_000, scale).unwrap();
            for row in fb.weights.rows() {
                assert!(row.iter().all(|&w| w >= 0.0));
                assert!(row.sum() > 0.0);
            }
        }
    }

    #[test]
    fn centers_strictly_increase() {
        let fb = mel_filterbank(128, 1024, 16_000, MelScale::Htk).unwrap();
        assert!(fb.center_hz.windows(2).all(|w| w[0] < w[1]));
        // the peak bin of each filter never moves backwards
        let peaks: Vec<usize> = fb
            .weights
            .rows()
            .into_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold((0, f64::MIN), |acc, (i, &w)| if w > acc.1 { (i, w) } else { acc })
                    .0
            })
            .collect();
        assert!(peaks.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn htk_round_trip_and_anchor() {
        let s = MelScale::Htk;
        assert!((s.hz_to_mel(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-9);
        for hz in [0.0, 100.0, 1000.0, 7999.0] {
            assert!((s.mel_to_hz(s.hz_to_mel(hz)) - hz).abs() < 1e-6);
        }
        let s = MelScale::Slaney;
        for hz in [0.0, 500.0, 1000.0, 4000.0] {
            assert!((s.mel_to_hz(s.hz_to_mel(hz)) - hz).abs() < 1e-6);
        }
    }

    #[test]
    fn too_many_bands_for_resolution() {
        assert!(matches!(
            mel_filterbank(128, 64, 16_000, MelScale::Htk),
            Err(Error::Config(_))
        ));
        assert!(mel_filterbank(0, 1024, 16_000, MelScale::Htk).is_err());
    }
}
