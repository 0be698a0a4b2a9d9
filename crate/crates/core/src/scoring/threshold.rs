use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PERCENTILE: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Normal,
    Anomaly,
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Decision::Normal => "normal",
            Decision::Anomaly => "anomaly",
        })
    }
}

/// Decision threshold `phi` and how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub phi: f64,
    pub percentile: f64,
    /// Which scores the percentile was taken over, e.g. `"train"`.
    pub fitted_on: String,
}

impl Threshold {
    pub fn fixed(phi: f64) -> Result<Self> {
        if !phi.is_finite() {
            return Err(Error::Config(format!("threshold must be finite, got {phi}")));
        }
        Ok(Threshold {
            phi,
            percentile: f64::NAN,
            fitted_on: "fixed".into(),
        })
    }
}

/// Thresholds for both scoring modes, as written next to a trained model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub mse: Option<Threshold>,
    pub mahalanobis: Option<Threshold>,
}

/// Empirical percentile with linear interpolation between order
/// statistics: position `p/100 * (n - 1)` in the sorted scores.
pub fn fit_threshold(scores: &[f64], percentile: f64) -> Result<Threshold> {
    if scores.is_empty() {
        return Err(Error::InsufficientData(
            "threshold needs at least one score".into(),
        ));
    }
    if !(percentile > 0.0 && percentile <= 100.0) {
        return Err(Error::Config(format!(
            "percentile must be in (0, 100], got {percentile}"
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InsufficientData("non-finite training score".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = percentile / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    let phi = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    Ok(Threshold {
        phi,
        percentile,
        fitted_on: "train".into(),
    })
}

/// Anomaly iff the score is strictly above `phi`.
pub fn decide(score: f64, threshold: &Threshold) -> Decision {
    if score > threshold.phi {
        Decision::Anomaly
    } else {
        Decision::Normal
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// numpy-style "linear" percentile written out from the definition.
    fn oracle_percentile(xs: &[f64], p: f64) -> f64 {
        let mut v = xs.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let h = (v.len() - 1) as f64 * p / 100.0;
        let below = h.floor();
        let i = below as usize;
        if i + 1 >= v.len() {
            return v[v.len() - 1];
        }
        v[i] + (h - below) * (v[i + 1] - v[i])
    }

    #[test]
    fn one_to_hundred_at_ninety() {
        let scores: Vec<f64> = (1..=100).map(f64::from).collect();
        let t = fit_threshold(&scores, 90.0).unwrap();
        assert!((t.phi - 90.1).abs() < 1e-12);
        assert!((t.phi - oracle_percentile(&scores, 90.0)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        for p in [1.0, 50.0, 90.0, 100.0] {
            assert_eq!(fit_threshold(&[3.5], p).unwrap().phi, 3.5);
            assert_eq!(fit_threshold(&[2.0; 7], p).unwrap().phi, 2.0);
        }
        assert!(fit_threshold(&[], 90.0).is_err());
        assert!(fit_threshold(&[1.0], 0.0).is_err());
        assert!(fit_threshold(&[1.0], 100.5).is_err());
    }

    #[test]
    fn strict_decision() {
        let t = Threshold::fixed(1.0).unwrap();
        assert_eq!(decide(2.0, &t), Decision::Anomaly);
        assert_eq!(decide(1.0, &t), Decision::Normal);
        assert_eq!(decide(0.5, &t), Decision::Normal);
    }

    proptest! {
        #[test]
        fn matches_oracle(xs in prop::collection::vec(-1e3f64..1e3, 1..60), p in 0.5f64..100.0) {
            let t = fit_threshold(&xs, p).unwrap();
            prop_assert!((t.phi - oracle_percentile(&xs, p)).abs() <= 1e-9);
        }

        #[test]
        fn decision_invariant_under_monotone_map(s in -5f64..5.0, phi in -5f64..5.0) {
            prop_assume!(s == phi || (s - phi).abs() > 1e-9);
            let t = Threshold::fixed(phi).unwrap();
            let mapped = Threshold::fixed(phi.exp() * 3.0 + 1.0).unwrap();
            prop_assert_eq!(decide(s, &t), decide(s.exp() * 3.0 + 1.0, &mapped));
        }
    }
}
