use ndarray::{Array1, Array2, ArrayView2, Axis, NdFloat};
use num_traits::NumCast;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default baseline layer widths: 640 -> 128 x4 -> 8 -> 128 x4 -> 640.
pub const BASELINE_DIMS: [usize; 11] = [640, 128, 128, 128, 128, 8, 128, 128, 128, 128, 640];

pub(crate) fn cast<F: NdFloat>(x: f64) -> F {
    <F as NumCast>::from(x).expect("f64 is representable in every NdFloat")
}

/// Dense autoencoder. Hidden layers use a rectifier, the output layer is
/// linear. Weights are stored `in x out` so a batch `B x in` maps to
/// `B x out` with a single product.
#[derive(Debug, Clone, PartialEq)]
pub struct AeModel<F: NdFloat = f32> {
    pub(crate) dims: Vec<usize>,
    pub(crate) weights: Vec<Array2<F>>,
    pub(crate) biases: Vec<Array1<F>>,
    pub(crate) seed: u64,
}

/// Parameter gradients, laid out like the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<F: NdFloat> {
    pub weights: Vec<Array2<F>>,
    pub biases: Vec<Array1<F>>,
    /// Batch-mean squared error at the evaluated parameters.
    pub loss: F,
}

pub fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::Config(format!(
            "autoencoder needs at least two layer widths, got {dims:?}"
        )));
    }
    if dims.contains(&0) {
        return Err(Error::Config(format!("zero-width layer in {dims:?}")));
    }
    if dims[0] != dims[dims.len() - 1] {
        return Err(Error::Config(format!(
            "first and last widths must match for reconstruction, got {dims:?}"
        )));
    }
    Ok(())
}

impl<F: NdFloat> AeModel<F> {
    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and biases.
    /// Values are drawn in f64 so that f32 and f64 models from the same
    /// seed agree up to rounding.
    pub fn init(dims: &[usize], seed: u64) -> Result<Self> {
        validate_dims(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w = Array2::from_shape_simple_fn((fan_in, fan_out), || {
                cast(rng.gen_range(-bound..bound))
            });
            let b = Array1::from_shape_simple_fn(fan_out, || cast(rng.gen_range(-bound..bound)));
            weights.push(w);
            biases.push(b);
        }
        Ok(AeModel {
            dims: dims.to_vec(),
            weights,
            biases,
            seed,
        })
    }

    /// Builds a model from explicit parameters (`in x out` weights).
    pub fn from_parameters(weights: Vec<Array2<F>>, biases: Vec<Array1<F>>, seed: u64) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Config("weights and biases must be non-empty and paired".into()));
        }
        let mut dims = vec![weights[0].nrows()];
        for (w, b) in weights.iter().zip(&biases) {
            if w.nrows() != *dims.last().unwrap() {
                return Err(Error::DimensionMismatch {
                    expected: *dims.last().unwrap(),
                    actual: w.nrows(),
                });
            }
            if b.len() != w.ncols() {
                return Err(Error::DimensionMismatch {
                    expected: w.ncols(),
                    actual: b.len(),
                });
            }
            dims.push(w.ncols());
        }
        validate_dims(&dims)?;
        Ok(AeModel {
            dims,
            weights,
            biases,
            seed,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weights(&self) -> &[Array2<F>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<F>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<F>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<F>] {
        &mut self.biases
    }

    pub fn num_parameters(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn parameter_norm(&self) -> f64 {
        self.weights
            .iter()
            .flat_map(|w| w.iter())
            .chain(self.biases.iter().flat_map(|b| b.iter()))
            .map(|&v| {
                let v: f64 = NumCast::from(v).unwrap_or(f64::NAN);
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Multiply-accumulates for one input vector: the sum of `in * out`
    /// over layers. Bias additions and activations are not counted.
    pub fn count_macs(&self) -> u64 {
        self.dims.windows(2).map(|p| (p[0] * p[1]) as u64).sum()
    }

    fn check_input(&self, batch: &ArrayView2<F>) -> Result<()> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: batch.ncols(),
            });
        }
        Ok(())
    }

    /// Reconstructs each row of `batch`.
    pub fn forward(&self, batch: ArrayView2<F>) -> Result<Array2<F>> {
        self.check_input(&batch)?;
        let last = self.num_layers() - 1;
        let mut h = batch.to_owned();
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            h = h.dot(w) + b;
            if i < last {
                h.mapv_inplace(relu);
            }
        }
        Ok(h)
    }

    /// Analytic gradient of `mean((r(x) - x)^2)` over every element of the
    /// batch, by backpropagation.
    pub fn gradient(&self, batch: ArrayView2<F>) -> Result<Gradients<F>> {
        self.check_input(&batch)?;
        let n = self.num_layers();
        // activations[i] is the input to layer i; pre[i] its pre-activation output
        let mut activations: Vec<Array2<F>> = Vec::with_capacity(n + 1);
        activations.push(batch.to_owned());
        let mut pre: Vec<Array2<F>> = Vec::with_capacity(n);
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = activations[i].dot(w) + b;
            let a = if i + 1 < n { z.mapv(relu) } else { z.clone() };
            pre.push(z);
            activations.push(a);
        }
        let output = &activations[n];
        let residual = output - &batch;
        let count: F = cast(residual.len() as f64);
        let loss = residual.iter().fold(F::zero(), |acc, &r| acc + r * r) / count;

        let two: F = cast(2.0);
        let mut delta = residual.mapv(|r| two * r / count);
        let mut gw = vec![Array2::<F>::zeros((0, 0)); n];
        let mut gb = vec![Array1::<F>::zeros(0); n];
        for i in (0..n).rev() {
            gw[i] = activations[i].t().dot(&delta);
            gb[i] = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&self.weights[i].t());
                back.zip_mut_with(&pre[i - 1], |d, &z| {
                    if z <= F::zero() {
                        *d = F::zero();
                    }
                });
                delta = back;
            }
        }
        Ok(Gradients {
            weights: gw,
            biases: gb,
            loss,
        })
    }

    /// Batch-mean squared reconstruction error.
    pub fn mse(&self, batch: ArrayView2<F>) -> Result<F> {
        let out = self.forward(batch.view())?;
        let count: F = cast(out.len() as f64);
        Ok(out
            .iter()
            .zip(batch.iter())
            .fold(F::zero(), |acc, (&o, &x)| acc + (o - x) * (o - x))
            / count)
    }

    /// Converts parameters to another float width.
    pub fn cast<G: NdFloat>(&self) -> AeModel<G> {
        let conv = |v: &F| -> G { NumCast::from(*v).expect("float cast") };
        AeModel {
            dims: self.dims.clone(),
            weights: self.weights.iter().map(|w| w.map(conv)).collect(),
            biases: self.biases.iter().map(|b| b.map(conv)).collect(),
            seed: self.seed,
        }
    }
}

#[inline]
fn relu<F: NdFloat>(v: F) -> F {
    if v > F::zero() {
        v
    } else {
        F::zero()
    }
}
