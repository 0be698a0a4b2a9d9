use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis, NdFloat};

use super::linalg::spd_inverse;
use super::residuals;
use crate::error::{Error, Result};
use crate::fsutil::{read_bytes, write_atomic, ByteReader};
use crate::model::AeModel;

/// Ridge added to each covariance, relative to its mean diagonal.
pub const DEFAULT_RIDGE: f64 = 1e-3;

pub const COVARIANCE_MAGIC: &[u8; 8] = b"ASDCOVAR";
pub const COVARIANCE_VERSION: u32 = 1;

const SYMMETRY_TOL: f64 = 1e-8;

/// Inverse residual covariances for the source and target domains.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainCovariances {
    inv_source: Array2<f64>,
    inv_target: Array2<f64>,
    ridge: f64,
    n_source: u64,
    n_target: u64,
}

fn check_symmetric(m: &Array2<f64>, name: &str) -> Result<()> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: m.ncols(),
        });
    }
    for i in 0..n {
        for j in i + 1..n {
            if (m[[i, j]] - m[[j, i]]).abs() > SYMMETRY_TOL {
                return Err(Error::Config(format!(
                    "{name} inverse covariance is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{name} inverse covariance has non-finite entries")));
    }
    Ok(())
}

impl DomainCovariances {
    /// Wraps precomputed inverse covariances.
    pub fn from_inverses(inv_source: Array2<f64>, inv_target: Array2<f64>, ridge: f64) -> Result<Self> {
        check_symmetric(&inv_source, "source")?;
        check_symmetric(&inv_target, "target")?;
        if inv_source.dim() != inv_target.dim() {
            return Err(Error::DimensionMismatch {
                expected: inv_source.nrows(),
                actual: inv_target.nrows(),
            });
        }
        Ok(DomainCovariances {
            inv_source,
            inv_target,
            ridge,
            n_source: 0,
            n_target: 0,
        })
    }

    /// Identity inverses, under which Mahalanobis scoring equals MSE scoring.
    pub fn identity(dim: usize) -> Self {
        DomainCovariances {
            inv_source: Array2::eye(dim),
            inv_target: Array2::eye(dim),
            ridge: 0.0,
            n_source: 0,
            n_target: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.inv_source.nrows()
    }

    pub fn inv_source(&self) -> &Array2<f64> {
        &self.inv_source
    }

    pub fn inv_target(&self) -> &Array2<f64> {
        &self.inv_target
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Residual vectors used for the source and target fits.
    pub fn fit_counts(&self) -> (u64, u64) {
        (self.n_source, self.n_target)
    }
}

/// Mean-centred sample covariance with divisor `N - 1`.
pub fn sample_covariance(rows: ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = rows.nrows();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "covariance needs at least 2 vectors, got {n}"
        )));
    }
    let mean = rows.mean_axis(Axis(0)).expect("non-empty");
    let centered = &rows - &mean;
    Ok(centered.t().dot(&centered) / (n - 1) as f64)
}

/// `(C + ridge * s * I)^-1` where `C` is the sample covariance of `rows`
/// and `s = tr(C) / D`. A zero trace (all rows identical) uses `s = 1`.
pub fn fit_inverse_covariance(rows: ArrayView2<f64>, ridge: f64) -> Result<Array2<f64>> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Config(format!("ridge must be >= 0, got {ridge}")));
    }
    let mut cov = sample_covariance(rows)?;
    let d = cov.nrows();
    let trace: f64 = cov.diag().sum();
    let scale = if trace > 0.0 { trace / d as f64 } else { 1.0 };
    let add = ridge * scale;
    for i in 0..d {
        cov[[i, i]] += add;
    }
    spd_inverse(&cov)
}

/// Fits per-domain inverse covariances of the model's reconstruction
/// residuals. Each feature matrix holds one stacked vector per row, pooled
/// over that domain's training clips.
pub fn fit_covariances<F: NdFloat>(
    model: &AeModel<F>,
    source: ArrayView2<f64>,
    target: ArrayView2<f64>,
    ridge: f64,
) -> Result<DomainCovariances> {
    for (name, m) in [("source", &source), ("target", &target)] {
        if m.nrows() < 2 {
            return Err(Error::InsufficientData(format!(
                "{name} domain has {} residual vectors, need at least 2",
                m.nrows()
            )));
        }
    }
    let es = residuals(model, source)?;
    let et = residuals(model, target)?;
    Ok(DomainCovariances {
        inv_source: fit_inverse_covariance(es.view(), ridge)?,
        inv_target: fit_inverse_covariance(et.view(), ridge)?,
        ridge,
        n_source: es.nrows() as u64,
        n_target: et.nrows() as u64,
    })
}

/// Byte layout (little-endian): magic `ASDCOVAR`, u32 version, u32 D,
/// f64 ridge, u64 source count, u64 target count, then the D x D source
/// inverse and the D x D target inverse as row-major f64.
pub fn encode_covariances(cov: &DomainCovariances) -> Vec<u8> {
    let d = cov.dim();
    let mut out = Vec::with_capacity(40 + 16 * d * d);
    out.extend_from_slice(COVARIANCE_MAGIC);
    out.extend_from_slice(&COVARIANCE_VERSION.to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&cov.ridge.to_le_bytes());
    out.extend_from_slice(&cov.n_source.to_le_bytes());
    out.extend_from_slice(&cov.n_target.to_le_bytes());
    for m in [&cov.inv_source, &cov.inv_target] {
        for &v in m.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_covariances(bytes: &[u8]) -> Result<DomainCovariances> {
    let mut r = ByteReader::new(bytes, "covariance file");
    let magic = r
        .take(8)
        .map_err(|_| Error::ArtifactFormat("file too short for a covariance header".into()))?;
    if magic != COVARIANCE_MAGIC {
        return Err(Error::ArtifactFormat("missing covariance magic".into()));
    }
    let version = r.u32()?;
    if version != COVARIANCE_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: COVARIANCE_VERSION,
        });
    }
    let d = r.u32()? as usize;
    let ridge = r.f64()?;
    let n_source = r.u64()?;
    let n_target = r.u64()?;
    let mut read_matrix = || -> Result<Array2<f64>> {
        let v = (0..d * d).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        Ok(Array2::from_shape_vec((d, d), v).expect("shape matches length"))
    };
    let inv_source = read_matrix()?;
    let inv_target = read_matrix()?;
    r.finish()?;
    let mut cov = DomainCovariances::from_inverses(inv_source, inv_target, ridge)
        .map_err(|e| Error::Corrupt(e.to_string()))?;
    cov.n_source = n_source;
    cov.n_target = n_target;
    Ok(cov)
}

pub fn save_covariances(cov: &DomainCovariances, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_covariances(cov))
}

pub fn load_covariances(path: impl AsRef<Path>) -> Result<DomainCovariances> {
    decode_covariances(&read_bytes(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_worked_covariance() {
        let rows = array![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
        let c = sample_covariance(rows.view()).unwrap();
        let expect = array![[2.0 / 3.0, 0.0], [0.0, 2.0 / 3.0]];
        for (x, y) in c.iter().zip(expect.iter()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn covariance_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows = Array2::from_shape_fn((13, 4), |_| rng.gen_range(-3.0..3.0));
        let c = sample_covariance(rows.view()).unwrap();
        let n = rows.nrows();
        for i in 0..4 {
            for j in 0..4 {
                let mi = (0..n).map(|k| rows[[k, i]]).sum::<f64>() / n as f64;
                let mj = (0..n).map(|k| rows[[k, j]]).sum::<f64>() / n as f64;
                let s: f64 = (0..n).map(|k| (rows[[k, i]] - mi) * (rows[[k, j]] - mj)).sum();
                assert!((c[[i, j]] - s / (n - 1) as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identical_residuals_leave_only_ridge() {
        let rows = Array2::from_shape_fn((6, 3), |(_, j)| j as f64);
        let inv = fit_inverse_covariance(rows.view(), 1e-3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1e3 } else { 0.0 };
                assert!((inv[[i, j]] - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn inverse_times_covariance_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rows = Array2::from_shape_fn((40, 10), |_| rng.gen_range(-1.0..1.0));
        let ridge = 1e-3;
        let mut cov = sample_covariance(rows.view()).unwrap();
        let scale = cov.diag().sum() / 10.0;
        for i in 0..10 {
            cov[[i, i]] += ridge * scale;
        }
        let inv = fit_inverse_covariance(rows.view(), ridge).unwrap();
        let prod = cov.dot(&inv);
        let eye = Array2::<f64>::eye(10);
        for (x, y) in prod.iter().zip(eye.iter()) {
            assert!((x - y).abs() < 1e-6);
        }
        for i in 0..10 {
            for j in 0..10 {
                assert!((inv[[i, j]] - inv[[j, i]]).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn rank_deficient_target_is_invertible_with_ridge() {
        // fewer vectors than dimensions
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows = Array2::from_shape_fn((5, 20), |_| rng.gen_range(-1.0..1.0));
        let inv = fit_inverse_covariance(rows.view(), DEFAULT_RIDGE).unwrap();
        assert!(inv.iter().all(|v| v.is_finite()));
        assert!(fit_inverse_covariance(rows.view(), 0.0).is_err());
    }

    #[test]
    fn too_few_vectors() {
        let m = AeModel::<f64>::init(&[3, 2, 3], 0).unwrap();
        let one = Array2::<f64>::zeros((1, 3));
        let two = Array2::<f64>::ones((2, 3));
        assert!(matches!(
            fit_covariances(&m, one.view(), two.view(), 1e-3),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            fit_covariances(&m, two.view(), one.view(), 1e-3),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn fit_records_counts_and_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = AeModel::<f64>::init(&[4, 2, 4], 0).unwrap();
        let s = Array2::from_shape_fn((30, 4), |_| rng.gen_range(-1.0..1.0));
        let t = Array2::from_shape_fn((6, 4), |_| rng.gen_range(-1.0..1.0));
        let cov = fit_covariances(&m, s.view(), t.view(), DEFAULT_RIDGE).unwrap();
        assert_eq!(cov.fit_counts(), (30, 6));
        let bytes = encode_covariances(&cov);
        assert_eq!(decode_covariances(&bytes).unwrap(), cov);
        assert!(matches!(
            decode_covariances(&bytes[..bytes.len() - 3]),
            Err(Error::Corrupt(_))
        ));
        assert!(matches!(
            decode_covariances(b"ASDAEMDL\x01\0\0\0"),
            Err(Error::ArtifactFormat(_))
        ));
    }

    #[test]
    fn asymmetric_inverse_rejected() {
        let s = array![[1.0, 0.5], [0.0, 1.0]];
        assert!(DomainCovariances::from_inverses(s, Array2::eye(2), 0.0).is_err());
    }
}
