use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{Activation, Algebra};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Dense,
    QDense,
    Rnn,
    QRnn,
    Lstm,
    QLstm,
}

impl LayerKind {
    pub fn algebra(self) -> Algebra {
        match self {
            LayerKind::Dense | LayerKind::Rnn | LayerKind::Lstm => Algebra::Real,
            LayerKind::QDense | LayerKind::QRnn | LayerKind::QLstm => Algebra::Quaternion,
        }
    }

    pub fn is_recurrent(self) -> bool {
        !matches!(self, LayerKind::Dense | LayerKind::QDense)
    }

    pub fn is_lstm(self) -> bool {
        matches!(self, LayerKind::Lstm | LayerKind::QLstm)
    }

    pub fn tag(self) -> u8 {
        match self {
            LayerKind::Dense => 0,
            LayerKind::QDense => 1,
            LayerKind::Rnn => 2,
            LayerKind::QRnn => 3,
            LayerKind::Lstm => 4,
            LayerKind::QLstm => 5,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => LayerKind::Dense,
            1 => LayerKind::QDense,
            2 => LayerKind::Rnn,
            3 => LayerKind::QRnn,
            4 => LayerKind::Lstm,
            5 => LayerKind::QLstm,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Dense => "dense",
            LayerKind::QDense => "qdense",
            LayerKind::Rnn => "rnn",
            LayerKind::QRnn => "qrnn",
            LayerKind::Lstm => "lstm",
            LayerKind::QLstm => "qlstm",
        }
    }

    /// The dense kind of the same algebra, used for output heads.
    pub fn dense_of(self) -> LayerKind {
        match self.algebra() {
            Algebra::Real => LayerKind::Dense,
            Algebra::Quaternion => LayerKind::QDense,
        }
    }
}

impl FromStr for LayerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "dense" => LayerKind::Dense,
            "qdense" => LayerKind::QDense,
            "rnn" => LayerKind::Rnn,
            "qrnn" => LayerKind::QRnn,
            "lstm" => LayerKind::Lstm,
            "qlstm" => LayerKind::QLstm,
            other => return Err(Error::Config(format!("unknown layer kind `{other}`"))),
        })
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One layer. `units` counts elements of the layer's algebra (quaternions for
/// `q*` kinds). LSTM gates ignore `activation` (split sigmoid gates, split tanh
/// candidate and output squashing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub units: usize,
    pub activation: Activation,
    pub bias: bool,
    pub bidirectional: bool,
}

impl LayerSpec {
    pub fn new(kind: LayerKind, units: usize, activation: Activation) -> Self {
        Self {
            kind,
            units,
            activation,
            bias: true,
            bidirectional: false,
        }
    }

    pub fn without_bias(mut self) -> Self {
        self.bias = false;
        self
    }

    pub fn bidirectional(mut self) -> Self {
        self.bidirectional = true;
        self
    }

    /// Output width in the layer's own units.
    pub fn output_units(&self) -> usize {
        if self.bidirectional {
            2 * self.units
        } else {
            self.units
        }
    }
}

/// A stack of layers; the last one is the output layer and never sees dropout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Input width in units of the first layer's algebra.
    pub input_units: usize,
    pub layers: Vec<LayerSpec>,
    pub dropout: f64,
}

/// Width of `units` elements of `from` re-expressed in elements of `to`.
pub fn convert_units(units: usize, from: Algebra, to: Algebra) -> Result<usize> {
    let real = units * from.dim();
    if real % to.dim() != 0 {
        return Err(Error::Config(format!(
            "{units} {from} units ({real} reals) cannot feed a {to} layer"
        )));
    }
    Ok(real / to.dim())
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("model has no layers".into()));
        }
        if self.input_units == 0 {
            return Err(Error::Config("input width must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.units == 0 {
                return Err(Error::Config(format!("layer {i} has zero units")));
            }
            if l.bidirectional && !l.kind.is_recurrent() {
                return Err(Error::Config(format!("layer {i}: only recurrent layers can be bidirectional")));
            }
        }
        self.layer_inputs().map(|_| ())
    }

    /// Input width of every layer, in that layer's units.
    pub fn layer_inputs(&self) -> Result<Vec<usize>> {
        let mut width = self.input_units;
        let mut algebra = self.layers[0].kind.algebra();
        let mut out = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let a = l.kind.algebra();
            width = convert_units(width, algebra, a)?;
            out.push(width);
            width = l.output_units();
            algebra = a;
        }
        Ok(out)
    }

    pub fn input_algebra(&self) -> Algebra {
        self.layers[0].kind.algebra()
    }

    pub fn output_algebra(&self) -> Algebra {
        self.layers.last().expect("validated").kind.algebra()
    }

    pub fn output_units(&self) -> usize {
        self.layers.last().expect("validated").output_units()
    }

    /// Output width counted in reals.
    pub fn output_reals(&self) -> usize {
        self.output_units() * self.output_algebra().dim()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerParamCount {
    pub kind: LayerKind,
    pub weights: u64,
    pub biases: u64,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParamCount {
    pub layers: Vec<LayerParamCount>,
    pub total: u64,
}

/// Real-valued parameter count; a quaternion weight contributes four.
pub fn param_count(spec: &ModelSpec) -> Result<ParamCount> {
    spec.validate()?;
    let inputs = spec.layer_inputs()?;
    let mut layers = Vec::with_capacity(spec.layers.len());
    for (l, &n_in) in spec.layers.iter().zip(&inputs) {
        let dim = l.kind.algebra().dim() as u64;
        let (n_in, units) = (n_in as u64, l.units as u64);
        let gates: u64 = if l.kind.is_lstm() { 4 } else { 1 };
        let directions: u64 = if l.bidirectional { 2 } else { 1 };
        let per_gate = units * n_in + if l.kind.is_recurrent() { units * units } else { 0 };
        let weights = directions * gates * per_gate * dim;
        let biases = if l.bias { directions * gates * units * dim } else { 0 };
        layers.push(LayerParamCount {
            kind: l.kind,
            weights,
            biases,
            total: weights + biases,
        });
    }
    let total = layers.iter().map(|l| l.total).sum();
    Ok(ParamCount { layers, total })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(kind: LayerKind, n_in: usize, units: usize) -> ModelSpec {
        ModelSpec {
            input_units: n_in,
            layers: vec![LayerSpec::new(kind, units, Activation::Identity).without_bias()],
            dropout: 0.0,
        }
    }

    #[test]
    fn dense_counts() {
        let real = param_count(&dense(LayerKind::Dense, 2048, 2048)).unwrap().total;
        let quat = param_count(&dense(LayerKind::QDense, 512, 512)).unwrap().total;
        assert_eq!(real, 4_194_304);
        assert_eq!(quat, 1_048_576);
        assert_eq!(real, 4 * quat);
    }

    #[test]
    fn recurrent_counts() {
        let spec = ModelSpec {
            input_units: 3,
            layers: vec![
                LayerSpec::new(LayerKind::QLstm, 5, Activation::Tanh).bidirectional(),
                LayerSpec::new(LayerKind::QRnn, 2, Activation::Tanh),
                LayerSpec::new(LayerKind::Dense, 7, Activation::Identity),
            ],
            dropout: 0.2,
        };
        let c = param_count(&spec).unwrap();
        assert_eq!(c.layers[0].weights, 2 * 4 * (5 * 3 + 25) * 4);
        assert_eq!(c.layers[0].biases, 2 * 4 * 5 * 4);
        assert_eq!(c.layers[1].weights, (2 * 10 + 4) * 4);
        // 2 quaternions flatten to 8 reals.
        assert_eq!(c.layers[2].weights, 7 * 8);
        assert_eq!(c.layers[2].biases, 7);
    }

    #[test]
    fn boundary_widths() {
        assert_eq!(convert_units(3, Algebra::Quaternion, Algebra::Real).unwrap(), 12);
        assert_eq!(convert_units(12, Algebra::Real, Algebra::Quaternion).unwrap(), 3);
        assert!(convert_units(6, Algebra::Real, Algebra::Quaternion).is_err());
    }

    #[test]
    fn validation() {
        let mut spec = dense(LayerKind::QDense, 2, 2);
        spec.dropout = 1.0;
        assert!(spec.validate().is_err());
        let bad = ModelSpec {
            input_units: 6,
            layers: vec![
                LayerSpec::new(LayerKind::Dense, 6, Activation::Tanh),
                LayerSpec::new(LayerKind::QDense, 1, Activation::Tanh),
            ],
            dropout: 0.0,
        };
        assert!(bad.validate().is_err());
    }
}
