use ndarray::{Array1, Array2, ArrayView2, Axis, NdFloat};
use num_traits::NumCast;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ae::{cast, AeModel, Gradients};
use crate::error::{Error, Result};

/// Adam optimizer and minibatch schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Seeds the per-epoch shuffling stream.
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 256,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean training MSE per epoch, accumulated over the epoch's batches
    /// before each update.
    pub loss_history: Vec<f64>,
    pub steps: usize,
}

struct AdamState<F: NdFloat> {
    m_w: Vec<Array2<F>>,
    v_w: Vec<Array2<F>>,
    m_b: Vec<Array1<F>>,
    v_b: Vec<Array1<F>>,
    step: i32,
}

impl<F: NdFloat> AdamState<F> {
    fn new(model: &AeModel<F>) -> Self {
        AdamState {
            m_w: model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            v_w: model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            m_b: model.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            v_b: model.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            step: 0,
        }
    }

    fn apply(&mut self, model: &mut AeModel<F>, grads: &Gradients<F>, cfg: &TrainConfig) {
        self.step += 1;
        let b1: F = cast(cfg.beta1);
        let b2: F = cast(cfg.beta2);
        let one = F::one();
        let lr: F = cast(cfg.learning_rate);
        let eps: F = cast(cfg.epsilon);
        let c1 = one - b1.powi(self.step);
        let c2 = one - b2.powi(self.step);
        let update = |p: &mut F, m: &mut F, v: &mut F, g: F| {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for i in 0..model.weights.len() {
            ndarray::Zip::from(&mut model.weights[i])
                .and(&mut self.m_w[i])
                .and(&mut self.v_w[i])
                .and(&grads.weights[i])
                .for_each(|p, m, v, &g| update(p, m, v, g));
            ndarray::Zip::from(&mut model.biases[i])
                .and(&mut self.m_b[i])
                .and(&mut self.v_b[i])
                .and(&grads.biases[i])
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }
}

/// Minimizes the reconstruction MSE of `features` (one vector per row) with
/// Adam. The run is a pure function of the model, data and config: batches
/// come from a ChaCha stream seeded by `config.seed`, and all arithmetic is
/// single-threaded in a fixed order.
pub fn train<F: NdFloat>(
    model: &mut AeModel<F>,
    features: ArrayView2<F>,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if features.nrows() == 0 {
        return Err(Error::InsufficientData("no training vectors".into()));
    }
    if features.ncols() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            actual: features.ncols(),
        });
    }
    if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
        return Err(Error::InsufficientData(format!(
            "non-finite training input at flat index {pos}"
        )));
    }

    let n = features.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(model);
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut weighted_loss = 0.0f64;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch = features.select(Axis(0), chunk);
            let grads = model.gradient(batch.view())?;
            let loss: f64 = NumCast::from(grads.loss).unwrap_or(f64::NAN);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                    param_norm: model.parameter_norm(),
                });
            }
            weighted_loss += loss * chunk.len() as f64;
            adam.apply(model, &grads, config);
        }
        history.push(weighted_loss / n as f64);
    }
    Ok(TrainReport {
        loss_history: history,
        steps: adam.step as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(epochs: usize, batch: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: batch,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn constant_dataset_is_learned() {
        let mut m = AeModel::<f32>::init(&[16, 8, 4, 8, 16], 9).unwrap();
        let row: Vec<f32> = (0..16).map(|i| (i as f32 * 0.37).sin() + 0.5).collect();
        let data = Array2::from_shape_fn((64, 16), |(_, j)| row[j]);
        let initial = m.mse(data.view()).unwrap() as f64;
        let rep = train(&mut m, data.view(), &small_config(200, 8)).unwrap();
        let last = *rep.loss_history.last().unwrap();
        let final_mse = m.mse(data.view()).unwrap() as f64;
        assert!(final_mse < 1e-3 * initial, "{final_mse} vs {initial}");
        assert!(last < rep.loss_history[0]);
    }

    #[test]
    fn history_length_and_steps() {
        let mut m = AeModel::<f32>::init(&[4, 2, 4], 0).unwrap();
        let data = Array2::from_shape_fn((10, 4), |(i, j)| (i + j) as f32 * 0.1);
        let rep = train(&mut m, data.view(), &small_config(7, 3)).unwrap();
        assert_eq!(rep.loss_history.len(), 7);
        assert_eq!(rep.steps, 7 * 4);
    }

    #[test]
    fn training_is_deterministic_and_shape_preserving() {
        let data = Array2::from_shape_fn((50, 6), |(i, j)| ((i * 7 + j * 3) % 11) as f32 * 0.1);
        let cfg = small_config(5, 16);
        let mut a = AeModel::<f32>::init(&[6, 3, 6], 1).unwrap();
        let mut b = AeModel::<f32>::init(&[6, 3, 6], 1).unwrap();
        let params = a.num_parameters();
        let ra = train(&mut a, data.view(), &cfg).unwrap();
        let rb = train(&mut b, data.view(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert_eq!(a.num_parameters(), params);
        assert_eq!(a.dims(), &[6, 3, 6]);
    }

    #[test]
    fn nan_loss_aborts_with_diagnostics() {
        let mut m = AeModel::<f32>::init(&[4, 2, 4], 0).unwrap();
        m.weights_mut()[0].fill(f32::MAX);
        let data = Array2::from_elem((4, 4), 1.0f32);
        match train(&mut m, data.view(), &small_config(2, 2)) {
            Err(Error::NonFiniteLoss { epoch, batch, .. }) => {
                assert_eq!((epoch, batch), (0, 0));
            }
            other => panic!("expected NonFiniteLoss, got {other:?}"),
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut m = AeModel::<f32>::init(&[4, 2, 4], 0).unwrap();
        let data = Array2::from_elem((4, 4), 1.0f32);
        for cfg in [
            TrainConfig { epochs: 0, ..TrainConfig::default() },
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
            TrainConfig { learning_rate: 0.0, ..TrainConfig::default() },
        ] {
            assert!(matches!(train(&mut m, data.view(), &cfg), Err(Error::Config(_))));
        }
        let empty = Array2::<f32>::zeros((0, 4));
        assert!(train(&mut m, empty.view(), &TrainConfig::default()).is_err());
    }
}
