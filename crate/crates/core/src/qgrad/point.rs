//! Random evaluation points for gradient checks.

use crate::error::{Error, Result};
use crate::qcore::{Activation, Algebra, Tensor};
use crate::qnet::{LayerKind, LayerSpec, Model, ModelSpec};
use crate::qtrain::{Batch, LossKind, Targets};
use crate::rng::{derive_seed, rng_from_seed, uniform, QRng};

/// A one-layer network of `kind` followed by a linear head of the same
/// algebra, with parameters, inputs and targets drawn at random.
///
/// Parameters are drawn from `U(-param_scale, param_scale)` rather than the
/// training initialization: Glorot-sized weights leave many gradient
/// coordinates near 1e-9, below what central differences resolve in double
/// precision.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckPoint {
    pub kind: LayerKind,
    pub activation: Activation,
    pub input_units: usize,
    pub units: usize,
    pub output_units: usize,
    pub seq_len: usize,
    pub batch: usize,
    pub loss: LossKind,
    pub param_scale: f64,
    pub seed: u64,
}

impl CheckPoint {
    pub fn new(kind: LayerKind, units: usize, seq_len: usize, loss: LossKind, seed: u64) -> Self {
        Self {
            kind,
            activation: Activation::Tanh,
            input_units: 1,
            units,
            output_units: 2,
            seq_len,
            batch: 8,
            loss,
            param_scale: 1.0,
            seed,
        }
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            input_units: self.input_units,
            layers: vec![
                LayerSpec::new(self.kind, self.units, self.activation),
                LayerSpec::new(self.kind.dense_of(), self.output_units, Activation::Identity),
            ],
            dropout: 0.0,
        }
    }

    pub fn build(&self) -> Result<(Model, Batch)> {
        if self.seq_len == 0 {
            return Err(Error::EmptySequence);
        }
        if self.batch == 0 || !(self.param_scale > 0.0) {
            return Err(Error::Config("check point needs batch > 0 and a positive parameter scale".into()));
        }
        let mut model = Model::new(self.model_spec(), derive_seed(self.seed, "model"))?;
        let mut rng = rng_from_seed(derive_seed(self.seed, "params"));
        for p in model.params_mut() {
            p.data_mut()
                .iter_mut()
                .for_each(|v| *v = uniform(&mut rng, -self.param_scale, self.param_scale));
        }
        let spec = model.spec();
        let mut rng = rng_from_seed(derive_seed(self.seed, "batch"));
        let inputs = (0..self.seq_len)
            .map(|_| random_tensor(&mut rng, spec.input_algebra(), spec.input_units, self.batch))
            .collect::<Result<_>>()?;
        let reals = spec.output_reals();
        let targets = (0..self.seq_len)
            .map(|_| match self.loss {
                LossKind::Mse => random_tensor(&mut rng, Algebra::Real, reals, self.batch),
                LossKind::Nll => Ok(random_distributions(&mut rng, reals, self.batch)),
            })
            .collect::<Result<_>>()?;
        Ok((model, Batch { inputs, targets: Targets::every(targets) }))
    }
}

fn random_tensor(rng: &mut QRng, algebra: Algebra, rows: usize, cols: usize) -> Result<Tensor> {
    let n = algebra.dim() * rows * cols;
    Tensor::from_data(algebra, rows, cols, (0..n).map(|_| uniform(rng, -1.0, 1.0)).collect())
}

/// Columns of strictly positive probabilities.
fn random_distributions(rng: &mut QRng, rows: usize, cols: usize) -> Tensor {
    let mut t = Tensor::zeros(Algebra::Real, rows, cols);
    for c in 0..cols {
        let w: Vec<f64> = (0..rows).map(|_| uniform(rng, 0.05, 1.0)).collect();
        let s: f64 = w.iter().sum();
        for (r, v) in w.iter().enumerate() {
            t.set(0, r, c, v / s);
        }
    }
    t
}
