//! Anomaly scores, per-domain residual covariances, thresholds and the
//! normal/anomaly decision.
//!
//! The Mahalanobis mode uses the *squared* form `e^T S^-1 e` (no square
//! root). With `S = I` it reduces to `||e||^2`, so both modes share the
//! same `1 / (D K)` normalization and coincide exactly for identity
//! covariances.

mod covariance;
mod linalg;
mod rows;
mod threshold;

use ndarray::{Array2, ArrayView2, Axis, NdFloat};
use num_traits::NumCast;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::AeModel;

pub use covariance::{
    decode_covariances, encode_covariances, fit_covariances, fit_inverse_covariance,
    load_covariances, sample_covariance, save_covariances, DomainCovariances, COVARIANCE_MAGIC,
    COVARIANCE_VERSION, DEFAULT_RIDGE,
};
pub use rows::{read_score_rows, write_score_rows, ScoreRow};
pub use threshold::{
    decide, fit_threshold, Decision, Threshold, ThresholdSet, DEFAULT_PERCENTILE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    Mse,
    #[serde(alias = "mahala")]
    Mahalanobis,
}

impl std::fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScoreMode::Mse => "mse",
            ScoreMode::Mahalanobis => "mahalanobis",
        })
    }
}

impl std::str::FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(ScoreMode::Mse),
            "mahala" | "mahalanobis" => Ok(ScoreMode::Mahalanobis),
            other => Err(Error::Config(format!(
                "unknown scoring mode {other:?} (expected mse or mahala)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyScore {
    pub value: f64,
    pub clip_id: Option<String>,
    pub mode: ScoreMode,
}

impl AnomalyScore {
    pub fn with_clip_id(mut self, id: impl Into<String>) -> Self {
        self.clip_id = Some(id.into());
        self
    }
}

/// `psi - r(psi)` for every row of `features`, evaluated in the model's
/// precision and returned in f64. The residual is taken against the input
/// as the model saw it (after conversion to `F`).
pub fn residuals<F: NdFloat>(model: &AeModel<F>, features: ArrayView2<f64>) -> Result<Array2<f64>> {
    if features.ncols() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            actual: features.ncols(),
        });
    }
    let input: Array2<F> = features.mapv(|v| <F as NumCast>::from(v).expect("float cast"));
    let recon = model.forward(input.view())?;
    let to64 = |v: F| -> f64 { NumCast::from(v).expect("float cast") };
    let mut e = input.mapv(to64);
    e.zip_mut_with(&recon, |x, &r| *x -= to64(r));
    Ok(e)
}

fn check_nonempty(features: &ArrayView2<f64>) -> Result<()> {
    if features.nrows() == 0 {
        return Err(Error::InsufficientData(
            "clip produced no feature vectors".into(),
        ));
    }
    Ok(())
}

/// Mean squared residual over all `K x D` elements of one clip.
pub fn score_mse<F: NdFloat>(model: &AeModel<F>, features: ArrayView2<f64>) -> Result<AnomalyScore> {
    check_nonempty(&features)?;
    let e = residuals(model, features)?;
    Ok(AnomalyScore {
        value: mse_of_residuals(&e),
        clip_id: None,
        mode: ScoreMode::Mse,
    })
}

pub(crate) fn mse_of_residuals(e: &Array2<f64>) -> f64 {
    e.iter().map(|v| v * v).sum::<f64>() / e.len() as f64
}

/// Per-frame quadratic forms `e_k^T M e_k`, clamped at zero.
pub fn quadratic_forms(e: &Array2<f64>, inv_cov: &Array2<f64>) -> Vec<f64> {
    let em = e.dot(inv_cov);
    (&em * e)
        .sum_axis(Axis(1))
        .iter()
        .map(|&q| q.max(0.0))
        .collect()
}

/// `(1 / (D K)) sum_k min(e_k^T Ss e_k, e_k^T St e_k)`.
pub fn score_mahalanobis<F: NdFloat>(
    model: &AeModel<F>,
    features: ArrayView2<f64>,
    cov: &DomainCovariances,
) -> Result<AnomalyScore> {
    check_nonempty(&features)?;
    if cov.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            actual: cov.dim(),
        });
    }
    let e = residuals(model, features)?;
    Ok(AnomalyScore {
        value: selective_mahalanobis(&e, cov),
        clip_id: None,
        mode: ScoreMode::Mahalanobis,
    })
}

pub(crate) fn selective_mahalanobis(e: &Array2<f64>, cov: &DomainCovariances) -> f64 {
    let qs = quadratic_forms(e, cov.inv_source());
    let qt = quadratic_forms(e, cov.inv_target());
    let total: f64 = qs.iter().zip(&qt).map(|(a, b)| a.min(*b)).sum();
    total / e.len() as f64
}

/// Scores one clip in the requested mode; `cov` is required for
/// [`ScoreMode::Mahalanobis`].
pub fn score_clip<F: NdFloat>(
    model: &AeModel<F>,
    features: ArrayView2<f64>,
    mode: ScoreMode,
    cov: Option<&DomainCovariances>,
) -> Result<AnomalyScore> {
    match mode {
        ScoreMode::Mse => score_mse(model, features),
        ScoreMode::Mahalanobis => {
            let cov = cov.ok_or_else(|| {
                Error::Config("mahalanobis scoring needs fitted covariances".into())
            })?;
            score_mahalanobis(model, features, cov)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Identity-weight model plus an output bias, so residuals are `-bias`
    /// wherever the input is non-negative.
    fn bias_model(bias: Array1<f64>) -> AeModel<f64> {
        let d = bias.len();
        AeModel::from_parameters(
            vec![Array2::eye(d), Array2::eye(d)],
            vec![Array1::zeros(d), bias],
            0,
        )
        .unwrap()
    }

    fn random_spd(d: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let a = Array2::from_shape_fn((d, d), |_| rng.gen_range(-1.0..1.0));
        a.t().dot(&a) + Array2::<f64>::eye(d) * 0.1
    }

    #[test]
    fn perfect_reconstruction_scores_zero() {
        let m = bias_model(Array1::zeros(4));
        let x = Array2::from_shape_fn((3, 4), |(i, j)| (i + j) as f64);
        assert_eq!(score_mse(&m, x.view()).unwrap().value, 0.0);
    }

    #[test]
    fn hand_worked_mse() {
        // identity weights: the rectifier zeroes the -1 entries, so the
        // residuals are (-1,0,0,0) and (0,-1,0,0)
        let eye = Array2::<f64>::eye(4);
        let m = AeModel::from_parameters(
            vec![eye.clone(), eye],
            vec![Array1::zeros(4), Array1::zeros(4)],
            0,
        )
        .unwrap();
        let x = array![[-1.0, 0.0, 0.0, 0.0], [0.0, -1.0, 0.0, 0.0]];
        assert_eq!(score_mse(&m, x.view()).unwrap().value, 0.25);
    }

    #[test]
    fn mse_matches_elementwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = AeModel::<f64>::init(&[6, 3, 6], 8).unwrap();
        let x = Array2::from_shape_fn((9, 6), |_| rng.gen_range(-2.0..2.0));
        let recon = m.forward(x.view()).unwrap();
        let mut acc = 0.0;
        for k in 0..9 {
            for d in 0..6 {
                acc += (x[[k, d]] - recon[[k, d]]).powi(2);
            }
        }
        let oracle = acc / 54.0;
        let got = score_mse(&m, x.view()).unwrap().value;
        assert!((got - oracle).abs() <= 1e-12 * oracle.max(1.0));
    }

    #[test]
    fn empty_features_rejected() {
        let m = bias_model(Array1::zeros(3));
        let x = Array2::<f64>::zeros((0, 3));
        assert!(score_mse(&m, x.view()).is_err());
        let cov = DomainCovariances::identity(3);
        assert!(score_mahalanobis(&m, x.view(), &cov).is_err());
    }

    #[test]
    fn identity_covariances_reduce_to_mse() {
        let m = AeModel::<f64>::init(&[5, 2, 5], 4).unwrap();
        let x = Array2::from_shape_fn((7, 5), |(i, j)| ((i * 5 + j) as f64 * 0.3).sin());
        let cov = DomainCovariances::identity(5);
        let a = score_mse(&m, x.view()).unwrap().value;
        let b = score_mahalanobis(&m, x.view(), &cov).unwrap().value;
        assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn min_picks_smaller_form() {
        let m = AeModel::<f64>::init(&[5, 2, 5], 4).unwrap();
        let x = Array2::from_shape_fn((7, 5), |(i, j)| ((i * 5 + j) as f64 * 0.7).cos());
        let cov = DomainCovariances::from_inverses(
            Array2::eye(5) * 2.0,
            Array2::eye(5),
            0.0,
        )
        .unwrap();
        let a = score_mse(&m, x.view()).unwrap().value;
        let b = score_mahalanobis(&m, x.view(), &cov).unwrap().value;
        assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn mahalanobis_matches_quadratic_form_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = AeModel::<f64>::init(&[3, 2, 3], 2).unwrap();
        let x = Array2::from_shape_fn((4, 3), |_| rng.gen_range(-1.0..1.0));
        let s = random_spd(3, &mut rng);
        let t = random_spd(3, &mut rng);
        let cov = DomainCovariances::from_inverses(s.clone(), t.clone(), 0.0).unwrap();
        let recon = m.forward(x.view()).unwrap();
        let mut total = 0.0;
        for k in 0..4 {
            let e: Vec<f64> = (0..3).map(|d| x[[k, d]] - recon[[k, d]]).collect();
            let mut qs = 0.0;
            let mut qt = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    qs += e[i] * s[[i, j]] * e[j];
                    qt += e[i] * t[[i, j]] * e[j];
                }
            }
            total += qs.min(qt);
        }
        let oracle = total / 12.0;
        let got = score_mahalanobis(&m, x.view(), &cov).unwrap().value;
        assert!((got - oracle).abs() <= 1e-12 * oracle);
    }

    #[test]
    fn covariance_dimension_mismatch() {
        let m = AeModel::<f64>::init(&[4, 2, 4], 0).unwrap();
        let x = Array2::<f64>::zeros((2, 4));
        let cov = DomainCovariances::identity(3);
        assert!(matches!(
            score_mahalanobis(&m, x.view(), &cov),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("mse".parse::<ScoreMode>().unwrap(), ScoreMode::Mse);
        assert_eq!("mahala".parse::<ScoreMode>().unwrap(), ScoreMode::Mahalanobis);
        assert!("l1".parse::<ScoreMode>().is_err());
    }
}
