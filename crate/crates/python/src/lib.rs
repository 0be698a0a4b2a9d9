//! Python bindings: features, the autoencoder, scoring, covariances,
//! metrics and the synthetic generator. Matrices cross the boundary as
//! lists of rows.

use asd_core::dataset::{synth_generate as core_synth, SynthSpec};
use asd_core::dsp::{read_wav as core_read_wav, AudioClip, FeatureConfig, FeatureExtractor};
use asd_core::metrics;
use asd_core::model::{self as core_model, TrainConfig};
use asd_core::scoring::{self as core_scoring, fit_threshold as core_fit_threshold};
use asd_core::Error;
use ndarray::Array2;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Config(_)
        | Error::DimensionMismatch { .. }
        | Error::UndefinedMetric(_)
        | Error::InsufficientData(_)
        | Error::TooShort(_)
        | Error::EmptyAudio
        | Error::UnsupportedChannels(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Rows must be non-empty and of equal length.
fn to_matrix(rows: &[Vec<f64>]) -> Result<Array2<f64>, Error> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(Error::Config("matrix must have at least one non-empty row".into()));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch {
            expected: ncols,
            actual: r.len(),
        });
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Array2::from_shape_vec((rows.len(), ncols), flat).expect("shape checked"))
}

fn to_rows<T: Copy + Into<f64>>(m: &Array2<T>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.iter().map(|&v| v.into()).collect()).collect()
}

fn extractor(mel_bands: usize, frames: usize, sample_rate: u32) -> Result<FeatureExtractor, Error> {
    FeatureExtractor::new(FeatureConfig {
        mel_bands,
        frames,
        sample_rate,
        ..FeatureConfig::default()
    })
}

/// Reads a mono WAV file; returns `(samples, sample_rate)`.
#[pyfunction]
fn read_wav(path: &str) -> PyResult<(Vec<f32>, u32)> {
    let clip = core_read_wav(path).map_err(to_py)?;
    Ok((clip.samples().to_vec(), clip.sample_rate_hz()))
}

/// `F x T` log-mel spectrogram with the default STFT settings.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate=16000, mel_bands=128))]
fn log_mel(samples: Vec<f32>, sample_rate: u32, mel_bands: usize) -> PyResult<Vec<Vec<f64>>> {
    let clip = AudioClip::new(samples, sample_rate).map_err(to_py)?;
    let spec = extractor(mel_bands, 1, sample_rate)
        .and_then(|x| x.log_mel(&clip))
        .map_err(to_py)?;
    Ok(to_rows(&spec.values))
}

/// `K x D` stacked log-mel vectors, one row per model input.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate=16000, mel_bands=128, frames=5))]
fn clip_features(samples: Vec<f32>, sample_rate: u32, mel_bands: usize, frames: usize) -> PyResult<Vec<Vec<f64>>> {
    let clip = AudioClip::new(samples, sample_rate).map_err(to_py)?;
    let m = extractor(mel_bands, frames, sample_rate)
        .and_then(|x| x.clip_features(&clip))
        .map_err(to_py)?;
    Ok(to_rows(&m))
}

/// Dense autoencoder with ReLU hidden layers.
#[pyclass(module = "asd_toolkit")]
struct AeModel {
    inner: core_model::AeModel<f32>,
}

#[pymethods]
impl AeModel {
    #[new]
    #[pyo3(signature = (dims=None, seed=0))]
    fn new(dims: Option<Vec<usize>>, seed: u64) -> PyResult<Self> {
        let dims = dims.unwrap_or_else(|| core_model::BASELINE_DIMS.to_vec());
        Ok(AeModel {
            inner: core_model::AeModel::init(&dims, seed).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(AeModel {
            inner: core_model::load_model(path).map_err(to_py)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        core_model::save_model(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims().to_vec()
    }

    fn count_macs(&self) -> u64 {
        self.inner.count_macs()
    }

    fn num_parameters(&self) -> usize {
        self.inner.num_parameters()
    }

    fn reconstruct(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let x = to_matrix(&rows).map_err(to_py)?.mapv(|v| v as f32);
        let y = self.inner.forward(x.view()).map_err(to_py)?;
        Ok(to_rows(&y))
    }

    /// Adam on the batch-mean MSE; returns the per-epoch loss history.
    #[pyo3(signature = (rows, epochs=100, batch_size=256, learning_rate=1e-3, seed=0))]
    fn train(&mut self, py: Python<'_>, rows: Vec<Vec<f64>>, epochs: usize, batch_size: usize, learning_rate: f64, seed: u64) -> PyResult<Vec<f64>> {
        let x = to_matrix(&rows).map_err(to_py)?.mapv(|v| v as f32);
        let cfg = TrainConfig {
            epochs,
            batch_size,
            learning_rate,
            seed,
            ..TrainConfig::default()
        };
        let model = &mut self.inner;
        let report = py
            .detach(|| core_model::train(model, x.view(), &cfg))
            .map_err(to_py)?;
        Ok(report.loss_history)
    }

    fn __repr__(&self) -> String {
        format!("AeModel(dims={:?}, seed={})", self.inner.dims(), self.inner.seed())
    }
}

/// Inverse source/target residual covariances for Mahalanobis scoring.
#[pyclass(module = "asd_toolkit")]
struct DomainCovariances {
    inner: core_scoring::DomainCovariances,
}

#[pymethods]
impl DomainCovariances {
    #[staticmethod]
    fn identity(dim: usize) -> Self {
        DomainCovariances {
            inner: core_scoring::DomainCovariances::identity(dim),
        }
    }

    #[staticmethod]
    #[pyo3(signature = (model, source_rows, target_rows, ridge=core_scoring::DEFAULT_RIDGE))]
    fn fit(model: &AeModel, source_rows: Vec<Vec<f64>>, target_rows: Vec<Vec<f64>>, ridge: f64) -> PyResult<Self> {
        let s = to_matrix(&source_rows).map_err(to_py)?;
        let t = to_matrix(&target_rows).map_err(to_py)?;
        Ok(DomainCovariances {
            inner: core_scoring::fit_covariances(&model.inner, s.view(), t.view(), ridge).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(DomainCovariances {
            inner: core_scoring::load_covariances(path).map_err(to_py)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        core_scoring::save_covariances(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }
}

/// Anomaly score of one clip's stacked features; `mode` is `mse` or `mahala`.
#[pyfunction]
#[pyo3(signature = (model, rows, mode="mse", covariances=None))]
fn score_clip(model: &AeModel, rows: Vec<Vec<f64>>, mode: &str, covariances: Option<&DomainCovariances>) -> PyResult<f64> {
    let mode: core_scoring::ScoreMode = mode.parse().map_err(to_py)?;
    let x = to_matrix(&rows).map_err(to_py)?;
    let s = core_scoring::score_clip(&model.inner, x.view(), mode, covariances.map(|c| &c.inner)).map_err(to_py)?;
    Ok(s.value)
}

/// Linear-interpolation percentile of `scores`.
#[pyfunction]
#[pyo3(signature = (scores, percentile=core_scoring::DEFAULT_PERCENTILE))]
fn fit_threshold(scores: Vec<f64>, percentile: f64) -> PyResult<f64> {
    Ok(core_fit_threshold(&scores, percentile).map_err(to_py)?.phi)
}

#[pyfunction]
fn auc(normals: Vec<f64>, anomalies: Vec<f64>) -> PyResult<f64> {
    metrics::auc(&normals, &anomalies).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (normals, anomalies, p=metrics::DEFAULT_PAUC_P))]
fn pauc(normals: Vec<f64>, anomalies: Vec<f64>, p: f64) -> PyResult<f64> {
    metrics::pauc(&normals, &anomalies, p).map_err(to_py)
}

/// Harmonic mean; returns `(value, zero_flag)`.
#[pyfunction]
fn official_score(values: Vec<f64>) -> PyResult<(f64, bool)> {
    let o = metrics::official_score(&values).map_err(to_py)?;
    Ok((o.value, o.zero_flag))
}

/// Writes a synthetic dataset described by a TOML spec; returns the number
/// of clips written.
#[pyfunction]
fn synth_generate(spec_toml: &str, seed: u64, out_dir: &str) -> PyResult<usize> {
    let spec = SynthSpec::from_toml_str(spec_toml).map_err(to_py)?;
    let out = core_synth(&spec, seed, out_dir).map_err(to_py)?;
    Ok(out.manifest.records.len())
}

#[pymodule]
pub fn asd_toolkit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<AeModel>()?;
    m.add_class::<DomainCovariances>()?;
    m.add_function(wrap_pyfunction!(read_wav, m)?)?;
    m.add_function(wrap_pyfunction!(log_mel, m)?)?;
    m.add_function(wrap_pyfunction!(clip_features, m)?)?;
    m.add_function(wrap_pyfunction!(score_clip, m)?)?;
    m.add_function(wrap_pyfunction!(fit_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(pauc, m)?)?;
    m.add_function(wrap_pyfunction!(official_score, m)?)?;
    m.add_function(wrap_pyfunction!(synth_generate, m)?)?;
    Ok(())
}
