use crate::error::{shape_err, Error, Result};
use crate::qcore::{Algebra, Tensor};
use crate::qnet::layers::{
    DenseLayer, DenseStep, LstmCell, LstmStep, Recurrent, RecurrentTrace, RnnCell, RnnStep,
};
use crate::qnet::spec::{LayerKind, ModelSpec};
use crate::qtrain::dropout_mask;
use crate::rng::{derive_seed, QRng};

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(DenseLayer),
    Rnn(Recurrent<RnnCell>),
    Lstm(Recurrent<LstmCell>),
}

#[derive(Debug, Clone)]
pub enum LayerTrace {
    Dense(Vec<DenseStep>),
    Rnn(RecurrentTrace<RnnStep>),
    Lstm(RecurrentTrace<LstmStep>),
}

impl LayerTrace {
    pub fn outputs(&self) -> Vec<&Tensor> {
        match self {
            LayerTrace::Dense(steps) => steps.iter().map(|s| &s.out).collect(),
            LayerTrace::Rnn(t) => t.outputs.iter().collect(),
            LayerTrace::Lstm(t) => t.outputs.iter().collect(),
        }
    }
}

fn direction_prefix(bidirectional: bool, backward: bool) -> &'static str {
    match (bidirectional, backward) {
        (false, _) => "",
        (true, false) => "fwd.",
        (true, true) => "bwd.",
    }
}

impl Layer {
    pub fn algebra(&self) -> Algebra {
        match self {
            Layer::Dense(d) => d.algebra(),
            Layer::Rnn(r) => r.forward.algebra(),
            Layer::Lstm(l) => l.forward.algebra(),
        }
    }

    pub fn output_units(&self) -> usize {
        match self {
            Layer::Dense(d) => d.units(),
            Layer::Rnn(r) => r.output_units(),
            Layer::Lstm(l) => l.output_units(),
        }
    }

    pub fn run(&self, xs: &[Tensor]) -> Result<LayerTrace> {
        Ok(match self {
            Layer::Dense(d) => LayerTrace::Dense(xs.iter().map(|x| d.step(x)).collect::<Result<_>>()?),
            Layer::Rnn(r) => LayerTrace::Rnn(r.run(xs)?),
            Layer::Lstm(l) => LayerTrace::Lstm(l.run(xs)?),
        })
    }

    /// Parameters in canonical order, named within the layer.
    pub fn params(&self) -> Vec<(String, &Tensor)> {
        match self {
            Layer::Dense(d) => d.params().into_iter().map(|(n, t)| (n.to_string(), t)).collect(),
            Layer::Rnn(r) => {
                let bi = r.backward.is_some();
                let mut v: Vec<(String, &Tensor)> = r
                    .forward
                    .params()
                    .into_iter()
                    .map(|(n, t)| (format!("{}{n}", direction_prefix(bi, false)), t))
                    .collect();
                if let Some(b) = &r.backward {
                    v.extend(b.params().into_iter().map(|(n, t)| (format!("bwd.{n}"), t)));
                }
                v
            }
            Layer::Lstm(l) => {
                let bi = l.backward.is_some();
                let mut v: Vec<(String, &Tensor)> = l
                    .forward
                    .params()
                    .into_iter()
                    .map(|(n, t)| (format!("{}{n}", direction_prefix(bi, false)), t))
                    .collect();
                if let Some(b) = &l.backward {
                    v.extend(b.params().into_iter().map(|(n, t)| (format!("bwd.{n}"), t)));
                }
                v
            }
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Dense(d) => d.params_mut(),
            Layer::Rnn(r) => {
                let mut v = r.forward.params_mut();
                if let Some(b) = &mut r.backward {
                    v.extend(b.params_mut());
                }
                v
            }
            Layer::Lstm(l) => {
                let mut v = l.forward.params_mut();
                if let Some(b) = &mut l.backward {
                    v.extend(b.params_mut());
                }
                v
            }
        }
    }
}

/// How a forward pass treats dropout.
pub enum ForwardMode<'a> {
    Eval,
    Train { rng: &'a mut QRng },
}

/// Everything a forward pass produced, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Algebra of the inputs as supplied by the caller.
    pub input_algebra: Algebra,
    pub layers: Vec<LayerTrace>,
    /// Dropout masks on each layer's outputs, per time step.
    pub masks: Vec<Option<Vec<Tensor>>>,
    pub outputs: Vec<Tensor>,
}

impl ForwardCache {
    pub fn seq_len(&self) -> usize {
        self.outputs.len()
    }

    pub fn batch(&self) -> usize {
        self.outputs.first().map_or(0, Tensor::cols)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    layers: Vec<Layer>,
}

impl Model {
    /// Fresh model; every weight tensor draws from its own stream derived from `seed`.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let inputs = spec.layer_inputs()?;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (idx, (l, &n_in)) in spec.layers.iter().zip(&inputs).enumerate() {
            let algebra = l.kind.algebra();
            let s = |dir: &str| derive_seed(seed, &format!("layer{idx}.{dir}"));
            let layer = match l.kind {
                LayerKind::Dense | LayerKind::QDense => Layer::Dense(DenseLayer::init(
                    algebra,
                    n_in,
                    l.units,
                    l.activation,
                    l.bias,
                    s("fwd"),
                )?),
                LayerKind::Rnn | LayerKind::QRnn => {
                    let mk = |dir| RnnCell::init(algebra, n_in, l.units, l.activation, l.bias, s(dir));
                    Layer::Rnn(Recurrent {
                        forward: mk("fwd")?,
                        backward: if l.bidirectional { Some(mk("bwd")?) } else { None },
                    })
                }
                LayerKind::Lstm | LayerKind::QLstm => {
                    let mk = |dir| LstmCell::init(algebra, n_in, l.units, l.bias, s(dir));
                    Layer::Lstm(Recurrent {
                        forward: mk("fwd")?,
                        backward: if l.bidirectional { Some(mk("bwd")?) } else { None },
                    })
                }
            };
            layers.push(layer);
        }
        Ok(Self { spec, layers })
    }

    /// Wraps existing layers, checking them against `spec`.
    pub fn from_layers(spec: ModelSpec, layers: Vec<Layer>) -> Result<Self> {
        spec.validate()?;
        if spec.layers.len() != layers.len() {
            return Err(Error::Config("layer count differs from spec".into()));
        }
        let template = Model::new(spec.clone(), 0)?;
        for (i, (a, b)) in template.layers.iter().zip(&layers).enumerate() {
            let sa: Vec<_> = a.params().iter().map(|(n, t)| (n.clone(), t.algebra(), t.shape())).collect();
            let sb: Vec<_> = b.params().iter().map(|(n, t)| (n.clone(), t.algebra(), t.shape())).collect();
            if sa != sb {
                return Err(shape_err(format!("layer {i} parameters do not match its spec")));
            }
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_algebra(&self) -> Algebra {
        self.spec.input_algebra()
    }

    /// Named parameters in canonical order (`l{index}.{name}`).
    pub fn params(&self) -> Vec<(String, &Tensor)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.params().into_iter().map(move |(n, t)| (format!("l{i}.{n}"), t)))
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    /// Changes the dropout rate used by [`ForwardMode::Train`].
    pub fn set_dropout(&mut self, rate: f64) -> Result<()> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} not in [0, 1)")));
        }
        self.spec.dropout = rate;
        Ok(())
    }

    pub fn num_real_params(&self) -> usize {
        self.params().iter().map(|(_, t)| t.real_len()).sum()
    }

    pub fn forward(&self, inputs: &[Tensor], mode: ForwardMode<'_>) -> Result<ForwardCache> {
        let first = inputs.first().ok_or(Error::EmptySequence)?;
        let batch = first.cols();
        let input_algebra = first.algebra();
        for x in inputs {
            x.expect_algebra(input_algebra)?;
            if x.cols() != batch {
                return Err(shape_err("inputs disagree on batch size"));
            }
        }
        let (rate, mut rng) = match mode {
            ForwardMode::Eval => (0.0, None),
            ForwardMode::Train { rng } => (self.spec.dropout, Some(rng)),
        };

        let mut seq: Vec<Tensor> = inputs.to_vec();
        let mut traces = Vec::with_capacity(self.layers.len());
        let mut masks = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (idx, layer) in self.layers.iter().enumerate() {
            let xs: Vec<Tensor> = seq
                .iter()
                .map(|x| x.convert(layer.algebra()))
                .collect::<Result<_>>()?;
            let trace = layer.run(&xs)?;
            let mut outs: Vec<Tensor> = trace.outputs().into_iter().cloned().collect();
            let mask = match rng.as_deref_mut() {
                Some(r) if idx != last && rate > 0.0 => {
                    let m: Vec<Tensor> = outs
                        .iter()
                        .map(|o| dropout_mask(o.algebra(), o.rows(), o.cols(), rate, r))
                        .collect::<Result<_>>()?;
                    for (o, mk) in outs.iter_mut().zip(&m) {
                        *o = o.hadamard(mk);
                    }
                    Some(m)
                }
                _ => None,
            };
            traces.push(trace);
            masks.push(mask);
            seq = outs;
        }
        Ok(ForwardCache {
            input_algebra,
            layers: traces,
            masks,
            outputs: seq,
        })
    }

    /// Evaluation-mode outputs.
    pub fn predict(&self, inputs: &[Tensor]) -> Result<Vec<Tensor>> {
        Ok(self.forward(inputs, ForwardMode::Eval)?.outputs)
    }
}
