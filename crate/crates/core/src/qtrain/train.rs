use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qdata::{Dataset, Split};
use crate::qgrad::qbptt_with_loss;
use crate::qnet::{ForwardMode, Model, ModelSpec};
use crate::qtrain::{anneal, clip_global_norm, rmsprop_step, sequence_loss, LossKind, RmsPropState};
use crate::rng::{derive_seed, rng_from_seed, shuffle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub anneal_factor: f64,
    pub epochs: usize,
    pub dropout: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_eps: f64,
    /// Root seed for initialization, dropout masks and, unless `data_seed`
    /// is set, batch order.
    pub seed: u64,
    pub data_seed: Option<u64>,
    /// Defaults to the dataset's own loss.
    pub loss_kind: Option<LossKind>,
    pub patience: usize,
    pub batch_size: usize,
    pub clip_norm: Option<f64>,
    /// Record wall time per epoch. Off by default so metrics are reproducible.
    pub record_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            initial_lr: 8e-4,
            anneal_factor: 0.5,
            epochs: 25,
            dropout: 0.2,
            rmsprop_decay: 0.95,
            rmsprop_eps: 1e-8,
            seed: 0,
            data_seed: None,
            loss_kind: None,
            patience: 1,
            batch_size: 8,
            clip_norm: Some(5.0),
            record_time: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.initial_lr));
        }
        if !(self.anneal_factor > 0.0 && self.anneal_factor < 1.0) {
            return bad(format!("anneal factor must lie in (0, 1), got {}", self.anneal_factor));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if !(0.0..1.0).contains(&self.rmsprop_decay) || !(self.rmsprop_eps > 0.0) {
            return bad("rmsprop decay must lie in [0, 1) and eps be positive".into());
        }
        if self.batch_size == 0 || self.patience == 0 {
            return bad("batch size and patience must be at least 1".into());
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return bad("clip norm must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_metric: f64,
    pub valid_loss: f64,
    pub valid_metric: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub metric: String,
    pub initial_valid_loss: f64,
    pub initial_valid_metric: f64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch with the lowest validation loss; 0 is the untrained model.
    pub best_epoch: usize,
    pub best_valid_loss: f64,
    pub best_valid_metric: f64,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|s| format!("{s:.3}")).unwrap_or_default()
}

impl RunMetrics {
    /// `epoch,split,loss,metric,lr,seconds`; epoch 0 is the untrained model.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,split,loss,metric,lr,seconds\n");
        out.push_str(&format!(
            "0,valid,{:.17e},{:.17e},,\n",
            self.initial_valid_loss, self.initial_valid_metric
        ));
        for r in &self.epochs {
            let secs = fmt_opt(r.seconds);
            out.push_str(&format!(
                "{},train,{:.17e},{:.17e},{:.17e},{secs}\n",
                r.epoch, r.train_loss, r.train_metric, r.lr
            ));
            out.push_str(&format!(
                "{},valid,{:.17e},{:.17e},{:.17e},{secs}\n",
                r.epoch, r.valid_loss, r.valid_metric, r.lr
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }

    pub fn final_record(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

/// Validation-style pass over a whole split: mean loss per sequence and the
/// dataset metric, batches evaluated in parallel and reduced in order.
pub fn evaluate(model: &Model, dataset: &Dataset, split: Split, kind: LossKind) -> Result<(f64, f64)> {
    let n = dataset.samples(split).len();
    let rows = model.spec().output_reals();
    let idx: Vec<usize> = (0..n).collect();
    let parts: Vec<(f64, f64, usize)> = idx
        .par_chunks(64)
        .map(|chunk| {
            let batch = dataset.batch(split, chunk, rows)?;
            let outputs = model.predict(&batch.inputs)?;
            let loss = sequence_loss(&outputs, &batch.targets, kind)?.value;
            let (m, count) = dataset.metric_terms(&outputs, &batch.targets)?;
            Ok((loss * chunk.len() as f64, m, count))
        })
        .collect::<Result<_>>()?;
    let loss = parts.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let (m, c) = parts.iter().fold((0.0, 0), |(s, k), p| (s + p.1, k + p.2));
    Ok((loss, if c > 0 { m / c as f64 } else { 0.0 }))
}

/// Builds a model from `spec` (dropout taken from `cfg`) and trains it.
pub fn train(spec: &ModelSpec, dataset: &Dataset, cfg: &TrainConfig) -> Result<(Model, RunMetrics)> {
    cfg.validate()?;
    let mut spec = spec.clone();
    spec.dropout = cfg.dropout;
    let model = Model::new(spec, derive_seed(cfg.seed, "init"))?;
    train_model(model, dataset, cfg)
}

/// Trains `model` in place of a fresh initialization; returns the
/// best-validation parameters.
pub fn train_model(mut model: Model, dataset: &Dataset, cfg: &TrainConfig) -> Result<(Model, RunMetrics)> {
    cfg.validate()?;
    model.set_dropout(cfg.dropout)?;
    let kind = cfg.loss_kind.unwrap_or(dataset.loss);
    let rows = model.spec().output_reals();
    let mut dropout_rng = rng_from_seed(derive_seed(cfg.seed, "dropout"));
    let mut order_rng = rng_from_seed(derive_seed(cfg.data_seed.unwrap_or(cfg.seed), "order"));
    let mut state = RmsPropState::new();
    let mut lr = cfg.initial_lr;

    let (init_loss, init_metric) = evaluate(&model, dataset, Split::Valid, kind)?;
    let mut metrics = RunMetrics {
        metric: dataset.metric.name().to_string(),
        initial_valid_loss: init_loss,
        initial_valid_metric: init_metric,
        epochs: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        best_valid_loss: init_loss,
        best_valid_metric: init_metric,
    };
    let mut best = model.clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..dataset.train.len()).collect();

    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        shuffle(&mut order_rng, &mut order);
        let (mut loss_sum, mut metric_sum, mut metric_count) = (0.0, 0.0, 0usize);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch = dataset.batch(Split::Train, chunk, rows)?;
            let cache = model.forward(&batch.inputs, ForwardMode::Train { rng: &mut dropout_rng })?;
            let (loss, grads) = qbptt_with_loss(&model, &cache, &batch.targets, kind)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
            let (m, c) = dataset.metric_terms(&cache.outputs, &batch.targets)?;
            loss_sum += loss * chunk.len() as f64;
            metric_sum += m;
            metric_count += c;
            let mut g = grads.grads;
            if let Some(max) = cfg.clip_norm {
                clip_global_norm(&mut g, max);
            }
            rmsprop_step(&mut model.params_mut(), &g, &mut state, lr, cfg.rmsprop_decay, cfg.rmsprop_eps)?;
        }
        let (valid_loss, valid_metric) = evaluate(&model, dataset, Split::Valid, kind)?;
        if !valid_loss.is_finite() {
            return Err(Error::Diverged { epoch, batch: order.len().div_ceil(cfg.batch_size) });
        }
        metrics.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / order.len() as f64,
            train_metric: if metric_count > 0 { metric_sum / metric_count as f64 } else { 0.0 },
            valid_loss,
            valid_metric,
            lr,
            seconds: cfg.record_time.then(|| start.elapsed().as_secs_f64()),
        });
        if valid_loss < metrics.best_valid_loss {
            metrics.best_epoch = epoch;
            metrics.best_valid_loss = valid_loss;
            metrics.best_valid_metric = valid_metric;
            best = model.clone();
        }
        history.push(valid_loss);
        lr = anneal(lr, &history, cfg.anneal_factor, cfg.patience);
    }
    Ok((best, metrics))
}
