//! Exact pairwise AUC and low-FPR partial AUC.
//!
//! Both count pairs `(normal, anomaly)` with `anomaly > normal` strictly;
//! ties contribute zero. Counting is done on sorted normals with a binary
//! search per anomaly, so the result is the same integer ratio a brute-force
//! double loop produces.

use crate::error::{Error, Result};

/// Pairs with `anomaly > normal`, given normals sorted ascending.
fn count_greater(sorted_normals: &[f64], anomalies: &[f64]) -> u64 {
    anomalies
        .iter()
        .map(|&a| sorted_normals.partition_point(|&n| n < a) as u64)
        .sum()
}

fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::UndefinedMetric(format!("non-finite {what} score")));
    }
    Ok(())
}

/// Fraction of (normal, anomaly) pairs the score ranks correctly.
pub fn auc(normals: &[f64], anomalies: &[f64]) -> Result<f64> {
    if normals.is_empty() || anomalies.is_empty() {
        return Err(Error::UndefinedMetric(format!(
            "AUC needs normal and anomalous clips (got {} / {})",
            normals.len(),
            anomalies.len()
        )));
    }
    check_finite(normals, "normal")?;
    check_finite(anomalies, "anomalous")?;
    let mut sorted = normals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let hits = count_greater(&sorted, anomalies);
    Ok(hits as f64 / (normals.len() as u64 * anomalies.len() as u64) as f64)
}

/// Number of highest-scoring normals a pAUC at `p` keeps.
pub fn pauc_cutoff(num_normals: usize, p: f64) -> usize {
    (p * num_normals as f64).floor() as usize
}

/// AUC restricted to the `floor(p * N)` highest-scoring normals, i.e. the
/// false-positive range `[0, p]`. Which of several tied normals at the cut
/// are kept does not change the count.
pub fn pauc(normals: &[f64], anomalies: &[f64], p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Config(format!("pAUC rate must be in (0, 1], got {p}")));
    }
    if anomalies.is_empty() {
        return Err(Error::UndefinedMetric("pAUC needs anomalous clips".into()));
    }
    let keep = pauc_cutoff(normals.len(), p);
    if keep == 0 {
        return Err(Error::UndefinedMetric(format!(
            "floor({p} * {}) = 0 normal clips in the pAUC range",
            normals.len()
        )));
    }
    check_finite(normals, "normal")?;
    check_finite(anomalies, "anomalous")?;
    let mut sorted = normals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let top = &sorted[sorted.len() - keep..];
    let hits = count_greater(top, anomalies);
    Ok(hits as f64 / (keep as u64 * anomalies.len() as u64) as f64)
}
