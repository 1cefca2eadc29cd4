use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::qcore::{Algebra, Tensor};
use crate::qdata::QuaternionSequence;
use crate::qtrain::{Batch, LossKind, Targets};
use crate::rng::{derive_seed, index, rng_from_seed, uniform, QRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    /// Sum of the two marked values in a sequence of (value, marker) pairs.
    Adding,
    /// Reproduce a prefix of one-hot symbols after a delimiter.
    Copy,
    /// Echo each input vector.
    Identity,
    /// Per-frame classification of a labelled feature file; see [`frames_dataset`].
    Frames,
}

impl FromStr for TaskKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "adding" => Ok(TaskKind::Adding),
            "copy" => Ok(TaskKind::Copy),
            "identity" => Ok(TaskKind::Identity),
            "frames" => Ok(TaskKind::Frames),
            other => Err(Error::Config(format!("unknown task '{other}' (adding, copy, identity, frames)"))),
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Adding => "adding",
            TaskKind::Copy => "copy",
            TaskKind::Identity => "identity",
            TaskKind::Frames => "frames",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub seq_len: usize,
    /// Vocabulary size for copy, vector width for identity; unused by adding.
    pub width: usize,
    pub train_count: usize,
    pub valid_count: usize,
    pub seed: u64,
}

impl TaskSpec {
    pub fn new(kind: TaskKind, seq_len: usize, seed: u64) -> Self {
        Self {
            kind,
            seq_len,
            width: 4,
            train_count: 1000,
            valid_count: 200,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_count == 0 || self.valid_count == 0 {
            return Err(Error::Config("task sample counts must be positive".into()));
        }
        let min_len = match self.kind {
            TaskKind::Adding => 2,
            TaskKind::Copy => 3,
            TaskKind::Identity | TaskKind::Frames => 1,
        };
        if self.seq_len < min_len {
            return Err(Error::Config(format!("{} task needs seq_len >= {min_len}", self.kind)));
        }
        if self.kind != TaskKind::Adding && self.width == 0 {
            return Err(Error::Config(format!("{} task needs width >= 1", self.kind)));
        }
        Ok(())
    }

    /// Length of the symbol prefix in the copy task.
    pub fn copy_prefix(&self) -> usize {
        ((self.seq_len - 1) / 3).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Supervision {
    LastStep,
    EveryStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Squared error over the true target values (padding excluded).
    Mse,
    /// Argmax mismatches over supervised columns whose target is not `ignore`.
    ErrorRate { ignore: Option<usize> },
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Mse => "mse",
            Metric::ErrorRate { .. } => "error_rate",
        }
    }
}

/// One sequence: `seq_len × input_reals` inputs and one target row per supervised step.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: TaskSpec,
    pub input_reals: usize,
    pub target_reals: usize,
    pub supervision: Supervision,
    pub loss: LossKind,
    pub metric: Metric,
    pub train: Vec<Sample>,
    pub valid: Vec<Sample>,
}

fn adding_sample(t_len: usize, rng: &mut QRng) -> Sample {
    let mut inputs = vec![0.0; 2 * t_len];
    for t in 0..t_len {
        inputs[2 * t] = uniform(rng, 0.0, 1.0);
    }
    // one marker in each half keeps the two positions distinct
    let half = t_len / 2;
    let a = index(rng, half);
    let b = half + index(rng, t_len - half);
    inputs[2 * a + 1] = 1.0;
    inputs[2 * b + 1] = 1.0;
    Sample {
        targets: vec![adding_target(&inputs)],
        inputs,
    }
}

/// Sum of the values whose marker is set, for interleaved `(value, marker)` pairs.
pub fn adding_target(pairs: &[f64]) -> f64 {
    pairs.chunks_exact(2).filter(|p| p[1] == 1.0).map(|p| p[0]).sum()
}

fn copy_sample(spec: &TaskSpec, rng: &mut QRng) -> Sample {
    let (t_len, w, p) = (spec.seq_len, spec.width, spec.copy_prefix());
    let (blank, delim) = (w, w + 1);
    let in_w = w + 2;
    let out_w = w + 1;
    let mut inputs = vec![0.0; t_len * in_w];
    let mut targets = vec![0.0; t_len * out_w];
    let symbols: Vec<usize> = (0..p).map(|_| index(rng, w)).collect();
    let delim_at = t_len - p - 1;
    for t in 0..t_len {
        let shown = if t < p {
            symbols[t]
        } else if t == delim_at {
            delim
        } else {
            blank
        };
        inputs[t * in_w + shown] = 1.0;
        let wanted = if t > delim_at { symbols[t - delim_at - 1] } else { blank };
        targets[t * out_w + wanted] = 1.0;
    }
    Sample { inputs, targets }
}

fn identity_sample(spec: &TaskSpec, rng: &mut QRng) -> Sample {
    let inputs: Vec<f64> = (0..spec.seq_len * spec.width).map(|_| uniform(rng, -1.0, 1.0)).collect();
    Sample { targets: inputs.clone(), inputs }
}

/// Generates train and validation splits; each split has its own stream
/// derived from `spec.seed`.
pub fn gen_task(spec: &TaskSpec) -> Result<Dataset> {
    spec.validate()?;
    if spec.kind == TaskKind::Frames {
        return Err(Error::Config("the frames task is read from a feature file, not generated".into()));
    }
    let make = |tag: &str, count: usize| -> Vec<Sample> {
        let mut rng = rng_from_seed(derive_seed(spec.seed, tag));
        (0..count)
            .map(|_| match spec.kind {
                TaskKind::Adding => adding_sample(spec.seq_len, &mut rng),
                TaskKind::Copy => copy_sample(spec, &mut rng),
                TaskKind::Identity => identity_sample(spec, &mut rng),
                TaskKind::Frames => unreachable!("rejected above"),
            })
            .collect()
    };
    let (input_reals, target_reals, supervision, loss, metric) = match spec.kind {
        TaskKind::Adding => (2, 1, Supervision::LastStep, LossKind::Mse, Metric::Mse),
        TaskKind::Copy => (
            spec.width + 2,
            spec.width + 1,
            Supervision::EveryStep,
            LossKind::Nll,
            Metric::ErrorRate { ignore: Some(spec.width) },
        ),
        TaskKind::Identity => (spec.width, spec.width, Supervision::EveryStep, LossKind::Mse, Metric::Mse),
        TaskKind::Frames => unreachable!("rejected above"),
    };
    Ok(Dataset {
        spec: spec.clone(),
        input_reals,
        target_reals,
        supervision,
        loss,
        metric,
        train: make("task.train", spec.train_count),
        valid: make("task.valid", spec.valid_count),
    })
}

/// Cuts a labelled feature sequence into non-overlapping windows of
/// `window` frames; the last `valid_fraction` of them (at least one) form the
/// validation split. Each frame's quaternions are its inputs and its label a
/// one-hot target over `max label + 1` classes.
pub fn frames_dataset(seq: &QuaternionSequence, window: usize, valid_fraction: f64) -> Result<Dataset> {
    let labels = seq
        .labels
        .as_ref()
        .ok_or_else(|| Error::Config("feature file has no frame labels".into()))?;
    if window == 0 {
        return Err(Error::Config("window must be at least one frame".into()));
    }
    if !(0.0..1.0).contains(&valid_fraction) {
        return Err(Error::Config(format!("validation fraction {valid_fraction} not in [0, 1)")));
    }
    let count = seq.frames() / window;
    if count < 2 {
        return Err(Error::Config(format!(
            "{} frames give fewer than two windows of {window}",
            seq.frames()
        )));
    }
    let classes = labels.iter().copied().max().unwrap_or(0) as usize + 1;
    let in_w = seq.real_width();
    let windows: Vec<Sample> = (0..count)
        .map(|w| {
            let frames = w * window..(w + 1) * window;
            let inputs = seq.data()[frames.start * in_w..frames.end * in_w].iter().map(|&v| f64::from(v)).collect();
            let mut targets = vec![0.0; window * classes];
            for (t, f) in frames.enumerate() {
                targets[t * classes + labels[f] as usize] = 1.0;
            }
            Sample { inputs, targets }
        })
        .collect();
    let valid_count = ((count as f64 * valid_fraction).round() as usize).clamp(1, count - 1);
    let train_count = count - valid_count;
    let mut train = windows;
    let valid = train.split_off(train_count);
    Ok(Dataset {
        spec: TaskSpec {
            kind: TaskKind::Frames,
            seq_len: window,
            width: classes,
            train_count,
            valid_count,
            seed: 0,
        },
        input_reals: in_w,
        target_reals: classes,
        supervision: Supervision::EveryStep,
        loss: LossKind::Nll,
        metric: Metric::ErrorRate { ignore: None },
        train,
        valid,
    })
}

impl Dataset {
    /// Quaternion units needed to hold one input step, zero-padded.
    pub fn input_quaternions(&self) -> usize {
        self.input_reals.div_ceil(4)
    }

    pub fn seq_len(&self) -> usize {
        self.spec.seq_len
    }

    pub fn samples(&self, split: Split) -> &[Sample] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
        }
    }

    /// Packs the chosen samples column-wise. Inputs become quaternion tensors
    /// (reals `4n..4n+3` fill quaternion `n`); targets are real tensors with
    /// `target_rows ≥ target_reals` rows, zero-padded.
    pub fn batch(&self, split: Split, indices: &[usize], target_rows: usize) -> Result<Batch> {
        if target_rows < self.target_reals {
            return Err(shape_err(format!(
                "model emits {target_rows} reals but the task needs {}",
                self.target_reals
            )));
        }
        let samples = self.samples(split);
        let (t_len, cols) = (self.seq_len(), indices.len());
        let mut inputs = vec![Tensor::zeros(Algebra::Quaternion, self.input_quaternions(), cols); t_len];
        let steps = match self.supervision {
            Supervision::LastStep => 1,
            Supervision::EveryStep => t_len,
        };
        let mut targets = vec![Tensor::zeros(Algebra::Real, target_rows, cols); steps];
        for (c, &i) in indices.iter().enumerate() {
            let s = samples
                .get(i)
                .ok_or_else(|| shape_err(format!("sample {i} out of range")))?;
            for (t, x) in inputs.iter_mut().enumerate() {
                for r in 0..self.input_reals {
                    x.set(r % 4, r / 4, c, s.inputs[t * self.input_reals + r]);
                }
            }
            for (k, y) in targets.iter_mut().enumerate() {
                for r in 0..self.target_reals {
                    y.set(0, r, c, s.targets[k * self.target_reals + r]);
                }
            }
        }
        let targets = match self.supervision {
            Supervision::LastStep => Targets::last(t_len, targets.pop().expect("one target step")),
            Supervision::EveryStep => Targets::every(targets),
        };
        Ok(Batch { inputs, targets })
    }

    /// Metric numerator and count for one batch's outputs, so batches can be pooled.
    pub fn metric_terms(&self, outputs: &[Tensor], targets: &Targets) -> Result<(f64, usize)> {
        let mut sum = 0.0;
        let mut count = 0;
        for (out, tgt) in outputs.iter().zip(&targets.steps) {
            let Some(y) = tgt else { continue };
            let p = out.to_real();
            if p.cols() != y.cols() || p.rows() < self.target_reals {
                return Err(shape_err("outputs do not cover the task targets"));
            }
            for c in 0..y.cols() {
                match self.metric {
                    Metric::Mse => {
                        for r in 0..self.target_reals {
                            let d = p.get(0, r, c) - y.get(0, r, c);
                            sum += d * d;
                            count += 1;
                        }
                    }
                    Metric::ErrorRate { ignore } => {
                        let argmax = |t: &Tensor| {
                            (0..self.target_reals)
                                .max_by(|&a, &b| t.get(0, a, c).total_cmp(&t.get(0, b, c)))
                                .unwrap_or(0)
                        };
                        let want = argmax(y);
                        if Some(want) != ignore {
                            count += 1;
                            if argmax(&p) != want {
                                sum += 1.0;
                            }
                        }
                    }
                }
            }
        }
        Ok((sum, count))
    }

    /// Deterministic serialization: a short header then every value as `f64` LE.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(self.spec.kind.to_string().as_bytes());
        for v in [self.spec.seq_len, self.input_reals, self.target_reals, self.train.len(), self.valid.len()] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        for s in self.train.iter().chain(&self.valid) {
            for v in s.inputs.iter().chain(&s.targets) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }
}
