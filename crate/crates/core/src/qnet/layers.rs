//! Dense, recurrent and LSTM cells over either algebra.
//!
//! Signals are `units × batch` tensors: one column per sequence in the batch.
//! Every step keeps its inputs and pre-activations so the backward pass in
//! [`crate::qgrad`] never recomputes the forward.

use crate::error::{shape_err, Result};
use crate::qcore::{qmatmul, qmatmul_acc, sigmoid, split_activation, Activation, Algebra, Tensor};
use crate::qinit::{init_weights, Criterion, InitConfig};
use crate::rng::derive_seed;

fn weight(algebra: Algebra, rows: usize, cols: usize, seed: u64, tag: &str) -> Result<Tensor> {
    let cfg = InitConfig {
        criterion: Criterion::Glorot,
        n_in: cols,
        n_out: rows,
        seed: derive_seed(seed, tag),
    };
    init_weights(algebra, &cfg, rows, cols)
}

fn check_input(w: &Tensor, x: &Tensor, what: &str) -> Result<()> {
    x.expect_algebra(w.algebra())?;
    if x.rows() != w.cols() {
        return Err(shape_err(format!(
            "{what}: expected {} input rows, got {}",
            w.cols(),
            x.rows()
        )));
    }
    Ok(())
}

/// `y = act(W ⊗ x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub w: Tensor,
    pub b: Option<Tensor>,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseStep {
    pub x: Tensor,
    pub preact: Tensor,
    pub out: Tensor,
}

impl DenseLayer {
    pub fn init(
        algebra: Algebra,
        n_in: usize,
        units: usize,
        activation: Activation,
        bias: bool,
        seed: u64,
    ) -> Result<Self> {
        Ok(Self {
            w: weight(algebra, units, n_in, seed, "w")?,
            b: bias.then(|| Tensor::zeros(algebra, units, 1)),
            activation,
        })
    }

    pub fn algebra(&self) -> Algebra {
        self.w.algebra()
    }

    pub fn units(&self) -> usize {
        self.w.rows()
    }

    pub fn step(&self, x: &Tensor) -> Result<DenseStep> {
        check_input(&self.w, x, "dense input")?;
        let mut preact = qmatmul(&self.w, x)?;
        if let Some(b) = &self.b {
            preact = preact.add_column(b)?;
        }
        let out = split_activation(&preact, self.activation);
        Ok(DenseStep {
            x: x.clone(),
            preact,
            out,
        })
    }

    pub fn params(&self) -> Vec<(&'static str, &Tensor)> {
        let mut v = vec![("w", &self.w)];
        if let Some(b) = &self.b {
            v.push(("b", b));
        }
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = vec![&mut self.w];
        if let Some(b) = &mut self.b {
            v.push(b);
        }
        v
    }
}

/// `h_t = act(W_h ⊗ h_{t-1} + W_x ⊗ x_t + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnCell {
    pub w_x: Tensor,
    pub w_h: Tensor,
    pub b: Option<Tensor>,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct RnnStep {
    pub x: Tensor,
    pub h_prev: Tensor,
    pub preact: Tensor,
    pub h: Tensor,
}

impl RnnCell {
    pub fn init(
        algebra: Algebra,
        n_in: usize,
        units: usize,
        activation: Activation,
        bias: bool,
        seed: u64,
    ) -> Result<Self> {
        Ok(Self {
            w_x: weight(algebra, units, n_in, seed, "w_x")?,
            w_h: weight(algebra, units, units, seed, "w_h")?,
            b: bias.then(|| Tensor::zeros(algebra, units, 1)),
            activation,
        })
    }

    pub fn algebra(&self) -> Algebra {
        self.w_h.algebra()
    }

    pub fn units(&self) -> usize {
        self.w_h.rows()
    }

    pub fn step(&self, h_prev: &Tensor, x: &Tensor) -> Result<RnnStep> {
        check_input(&self.w_x, x, "rnn input")?;
        check_input(&self.w_h, h_prev, "rnn state")?;
        if h_prev.cols() != x.cols() {
            return Err(shape_err("state and input batch sizes differ"));
        }
        let mut preact = qmatmul(&self.w_h, h_prev)?;
        qmatmul_acc(&mut preact, &self.w_x, x)?;
        if let Some(b) = &self.b {
            preact = preact.add_column(b)?;
        }
        let h = split_activation(&preact, self.activation);
        Ok(RnnStep {
            x: x.clone(),
            h_prev: h_prev.clone(),
            preact,
            h,
        })
    }

    pub fn params(&self) -> Vec<(&'static str, &Tensor)> {
        let mut v = vec![("w_x", &self.w_x), ("w_h", &self.w_h)];
        if let Some(b) = &self.b {
            v.push(("b", b));
        }
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = vec![&mut self.w_x, &mut self.w_h];
        if let Some(b) = &mut self.b {
            v.push(b);
        }
        v
    }
}

pub const FORGET: usize = 0;
pub const INPUT: usize = 1;
pub const OUTPUT: usize = 2;
pub const CANDIDATE: usize = 3;
pub const GATE_NAMES: [&str; 4] = ["f", "i", "o", "c"];

/// LSTM cell with gates indexed by [`FORGET`], [`INPUT`], [`OUTPUT`], [`CANDIDATE`].
///
/// ```text
/// f = σ(W_f ⊗ x + R_f ⊗ h + b_f)      o = σ(W_o ⊗ x + R_o ⊗ h + b_o)
/// i = σ(W_i ⊗ x + R_i ⊗ h + b_i)      g = tanh(W_c ⊗ x + R_c ⊗ h + b_c)
/// c' = f × c + i × g                  h' = o × tanh(c')
/// ```
/// `σ` and `tanh` are split activations and `×` is the component-wise product.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub w: [Tensor; 4],
    pub r: [Tensor; 4],
    pub b: Option<[Tensor; 4]>,
}

#[derive(Debug, Clone)]
pub struct LstmStep {
    pub x: Tensor,
    pub h_prev: Tensor,
    pub c_prev: Tensor,
    /// Gate pre-activations, same indexing as the cell.
    pub preacts: [Tensor; 4],
    /// Gate values `f, i, o, g` after their activations.
    pub gates: [Tensor; 4],
    pub c: Tensor,
    pub tanh_c: Tensor,
    pub h: Tensor,
}

/// Initial forget-gate bias on every component.
pub const FORGET_BIAS_INIT: f64 = 1.0;

impl LstmCell {
    pub fn init(algebra: Algebra, n_in: usize, units: usize, bias: bool, seed: u64) -> Result<Self> {
        let mk = |prefix: &str, cols: usize| -> Result<[Tensor; 4]> {
            Ok([
                weight(algebra, units, cols, seed, &format!("{prefix}_f"))?,
                weight(algebra, units, cols, seed, &format!("{prefix}_i"))?,
                weight(algebra, units, cols, seed, &format!("{prefix}_o"))?,
                weight(algebra, units, cols, seed, &format!("{prefix}_c"))?,
            ])
        };
        let b = bias.then(|| {
            let mut bf = Tensor::zeros(algebra, units, 1);
            bf.data_mut().iter_mut().for_each(|v| *v = FORGET_BIAS_INIT);
            [
                bf,
                Tensor::zeros(algebra, units, 1),
                Tensor::zeros(algebra, units, 1),
                Tensor::zeros(algebra, units, 1),
            ]
        });
        Ok(Self {
            w: mk("w", n_in)?,
            r: mk("r", units)?,
            b,
        })
    }

    /// All-zero cell (gates sit at σ(0) = 0.5).
    pub fn zeros(algebra: Algebra, n_in: usize, units: usize) -> Self {
        let z = |cols| std::array::from_fn(|_| Tensor::zeros(algebra, units, cols));
        Self {
            w: z(n_in),
            r: z(units),
            b: Some(z(1)),
        }
    }

    pub fn algebra(&self) -> Algebra {
        self.r[0].algebra()
    }

    pub fn units(&self) -> usize {
        self.r[0].rows()
    }

    pub fn step(&self, h_prev: &Tensor, c_prev: &Tensor, x: &Tensor) -> Result<LstmStep> {
        check_input(&self.w[0], x, "lstm input")?;
        check_input(&self.r[0], h_prev, "lstm state")?;
        h_prev.expect_same_shape(c_prev, "lstm hidden vs cell state")?;
        if h_prev.cols() != x.cols() {
            return Err(shape_err("state and input batch sizes differ"));
        }
        let mut preacts: [Tensor; 4] = std::array::from_fn(|_| Tensor::zeros(self.algebra(), 0, 0));
        for g in 0..4 {
            let mut a = qmatmul(&self.w[g], x)?;
            qmatmul_acc(&mut a, &self.r[g], h_prev)?;
            if let Some(b) = &self.b {
                a = a.add_column(&b[g])?;
            }
            preacts[g] = a;
        }
        let gates = [
            preacts[FORGET].map(sigmoid),
            preacts[INPUT].map(sigmoid),
            preacts[OUTPUT].map(sigmoid),
            preacts[CANDIDATE].map(f64::tanh),
        ];
        let c = gates[FORGET]
            .hadamard(c_prev)
            .add(&gates[INPUT].hadamard(&gates[CANDIDATE]));
        let tanh_c = c.map(f64::tanh);
        let h = gates[OUTPUT].hadamard(&tanh_c);
        Ok(LstmStep {
            x: x.clone(),
            h_prev: h_prev.clone(),
            c_prev: c_prev.clone(),
            preacts,
            gates,
            c,
            tanh_c,
            h,
        })
    }

    pub fn params(&self) -> Vec<(String, &Tensor)> {
        let mut v = Vec::with_capacity(12);
        for (g, name) in GATE_NAMES.iter().enumerate() {
            v.push((format!("w_{name}"), &self.w[g]));
        }
        for (g, name) in GATE_NAMES.iter().enumerate() {
            v.push((format!("r_{name}"), &self.r[g]));
        }
        if let Some(b) = &self.b {
            for (g, name) in GATE_NAMES.iter().enumerate() {
                v.push((format!("b_{name}"), &b[g]));
            }
        }
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v: Vec<&mut Tensor> = self.w.iter_mut().collect();
        v.extend(self.r.iter_mut());
        if let Some(b) = &mut self.b {
            v.extend(b.iter_mut());
        }
        v
    }
}

/// A cell run over a whole sequence from a zero initial state.
pub trait SequenceCell {
    type Step;

    fn units(&self) -> usize;
    fn algebra(&self) -> Algebra;
    fn run(&self, xs: &[Tensor]) -> Result<Vec<Self::Step>>;
    fn hidden(step: &Self::Step) -> &Tensor;
}

impl SequenceCell for RnnCell {
    type Step = RnnStep;

    fn units(&self) -> usize {
        RnnCell::units(self)
    }
    fn algebra(&self) -> Algebra {
        RnnCell::algebra(self)
    }
    fn run(&self, xs: &[Tensor]) -> Result<Vec<RnnStep>> {
        let first = xs.first().ok_or(crate::Error::EmptySequence)?;
        let mut h = Tensor::zeros(self.algebra(), self.units(), first.cols());
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            let s = self.step(&h, x)?;
            h = s.h.clone();
            steps.push(s);
        }
        Ok(steps)
    }
    fn hidden(step: &RnnStep) -> &Tensor {
        &step.h
    }
}

impl SequenceCell for LstmCell {
    type Step = LstmStep;

    fn units(&self) -> usize {
        LstmCell::units(self)
    }
    fn algebra(&self) -> Algebra {
        LstmCell::algebra(self)
    }
    fn run(&self, xs: &[Tensor]) -> Result<Vec<LstmStep>> {
        let first = xs.first().ok_or(crate::Error::EmptySequence)?;
        let mut h = Tensor::zeros(self.algebra(), self.units(), first.cols());
        let mut c = h.clone();
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            let s = self.step(&h, &c, x)?;
            h = s.h.clone();
            c = s.c.clone();
            steps.push(s);
        }
        Ok(steps)
    }
    fn hidden(step: &LstmStep) -> &Tensor {
        &step.h
    }
}

/// A recurrent layer, optionally bidirectional. The reverse cell reads the
/// sequence back to front; its states are re-aligned to time order and
/// stacked under the forward states.
#[derive(Debug, Clone, PartialEq)]
pub struct Recurrent<C> {
    pub forward: C,
    pub backward: Option<C>,
}

#[derive(Debug, Clone)]
pub struct RecurrentTrace<S> {
    pub outputs: Vec<Tensor>,
    pub forward: Vec<S>,
    /// Reverse-cell steps in processing order: entry `k` consumed time `T-1-k`.
    pub backward: Option<Vec<S>>,
}

impl<C: SequenceCell> Recurrent<C> {
    pub fn output_units(&self) -> usize {
        self.forward.units() * if self.backward.is_some() { 2 } else { 1 }
    }

    pub fn run(&self, xs: &[Tensor]) -> Result<RecurrentTrace<C::Step>> {
        let forward = self.forward.run(xs)?;
        let backward = match &self.backward {
            None => None,
            Some(cell) => {
                let reversed: Vec<Tensor> = xs.iter().rev().cloned().collect();
                Some(cell.run(&reversed)?)
            }
        };
        let t_len = xs.len();
        let outputs = match &backward {
            None => forward.iter().map(|s| C::hidden(s).clone()).collect(),
            Some(bw) => (0..t_len)
                .map(|t| Tensor::concat_rows(&[C::hidden(&forward[t]), C::hidden(&bw[t_len - 1 - t])]))
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(RecurrentTrace {
            outputs,
            forward,
            backward,
        })
    }
}

/// QRNN with its output projection: `h_t = α(W_hh ⊗ h_{t-1} + W_hx ⊗ x_t + b_h)`,
/// `p_t = β(W_hy ⊗ h_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QrnnParams {
    pub w_hx: Tensor,
    pub w_hh: Tensor,
    pub w_hy: Tensor,
    pub b_h: Tensor,
    pub alpha: Activation,
    pub beta: Activation,
}

#[derive(Debug, Clone)]
pub struct QrnnStep {
    pub h: Tensor,
    pub h_preact: Tensor,
    pub p: Tensor,
    pub p_preact: Tensor,
}

#[derive(Debug, Clone)]
pub struct QrnnTrace {
    pub outputs: Vec<Tensor>,
    pub steps: Vec<QrnnStep>,
}

impl QrnnParams {
    pub fn init(
        input: usize,
        hidden: usize,
        output: usize,
        alpha: Activation,
        beta: Activation,
        seed: u64,
    ) -> Result<Self> {
        let q = Algebra::Quaternion;
        Ok(Self {
            w_hx: weight(q, hidden, input, seed, "w_hx")?,
            w_hh: weight(q, hidden, hidden, seed, "w_hh")?,
            w_hy: weight(q, output, hidden, seed, "w_hy")?,
            b_h: Tensor::zeros(q, hidden, 1),
            alpha,
            beta,
        })
    }

    fn cell(&self) -> RnnCell {
        RnnCell {
            w_x: self.w_hx.clone(),
            w_h: self.w_hh.clone(),
            b: Some(self.b_h.clone()),
            activation: self.alpha,
        }
    }

    fn head(&self) -> DenseLayer {
        DenseLayer {
            w: self.w_hy.clone(),
            b: None,
            activation: self.beta,
        }
    }

    /// The same network as a two-layer [`crate::qnet::Model`] (recurrent layer plus bias-free head).
    pub fn to_model(&self) -> Result<crate::qnet::Model> {
        use crate::qnet::{Layer, LayerKind, LayerSpec, ModelSpec};
        let spec = ModelSpec {
            input_units: self.w_hx.cols(),
            layers: vec![
                LayerSpec::new(LayerKind::QRnn, self.w_hh.rows(), self.alpha),
                LayerSpec::new(LayerKind::QDense, self.w_hy.rows(), self.beta).without_bias(),
            ],
            dropout: 0.0,
        };
        crate::qnet::Model::from_layers(
            spec,
            vec![
                Layer::Rnn(Recurrent {
                    forward: self.cell(),
                    backward: None,
                }),
                Layer::Dense(self.head()),
            ],
        )
    }
}

pub fn qrnn_step(params: &QrnnParams, h_prev: &Tensor, x_t: &Tensor) -> Result<QrnnStep> {
    let cell = params.cell();
    let s = cell.step(h_prev, x_t)?;
    let p = params.head().step(&s.h)?;
    Ok(QrnnStep {
        h: s.h,
        h_preact: s.preact,
        p: p.out,
        p_preact: p.preact,
    })
}

pub fn qrnn_forward(params: &QrnnParams, sequence: &[Tensor]) -> Result<QrnnTrace> {
    let first = sequence.first().ok_or(crate::Error::EmptySequence)?;
    let mut h = Tensor::zeros(Algebra::Quaternion, params.w_hh.rows(), first.cols());
    let mut steps = Vec::with_capacity(sequence.len());
    for x in sequence {
        let s = qrnn_step(params, &h, x)?;
        h = s.h.clone();
        steps.push(s);
    }
    Ok(QrnnTrace {
        outputs: steps.iter().map(|s| s.p.clone()).collect(),
        steps,
    })
}

pub fn qlstm_step(cell: &LstmCell, h_prev: &Tensor, c_prev: &Tensor, x_t: &Tensor) -> Result<LstmStep> {
    cell.step(h_prev, c_prev, x_t)
}

pub fn qlstm_forward(layer: &Recurrent<LstmCell>, sequence: &[Tensor]) -> Result<RecurrentTrace<LstmStep>> {
    layer.run(sequence)
}
