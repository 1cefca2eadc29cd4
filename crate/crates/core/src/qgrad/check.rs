//! Central finite differences and the gradient check that arbitrates between
//! them and [`qbptt`].

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{shape_err, Error, Result};
use crate::qcore::{Activation, Tensor};
use crate::qgrad::backward::{qbptt, GradientSet};
use crate::qnet::{ForwardCache, ForwardMode, Layer, LayerTrace, Model};
use crate::qtrain::{sequence_loss, sequence_loss_difference, Batch, LossKind};

/// Evaluation-mode loss of `model` on `batch`.
pub fn batch_loss(model: &Model, batch: &Batch, kind: LossKind) -> Result<f64> {
    let cache = model.forward(&batch.inputs, ForwardMode::Eval)?;
    Ok(sequence_loss(&cache.outputs, &batch.targets, kind)?.value)
}

/// `(L(p+eps) − L(p−eps)) / (2·eps)` for every real parameter, each probe a
/// full forward pass on a private copy of the model. The numerator comes from
/// [`sequence_loss_difference`], which avoids subtracting two rounded totals.
/// Probes run in parallel and are collected in parameter order.
pub fn fd_oracle(model: &Model, batch: &Batch, kind: LossKind, eps: f64) -> Result<GradientSet> {
    if !(1e-8..=1e-4).contains(&eps) {
        return Err(Error::Config(format!("finite-difference step {eps} outside [1e-8, 1e-4]")));
    }
    let params = model.params();
    let coords: Vec<(usize, usize)> = params
        .iter()
        .enumerate()
        .flat_map(|(p, (_, t))| (0..t.real_len()).map(move |i| (p, i)))
        .collect();
    let probe = |p: usize, i: usize, delta: f64| -> Result<Vec<Tensor>> {
        let mut m = model.clone();
        m.params_mut()[p].data_mut()[i] += delta;
        Ok(m.forward(&batch.inputs, ForwardMode::Eval)?.outputs)
    };
    let values: Vec<f64> = coords
        .par_iter()
        .map(|&(p, i)| {
            let diff = sequence_loss_difference(&probe(p, i, eps)?, &probe(p, i, -eps)?, &batch.targets, kind)?;
            Ok(diff / (2.0 * eps))
        })
        .collect::<Result<_>>()?;

    let mut grads: Vec<Tensor> = params
        .iter()
        .map(|(_, t)| Tensor::zeros(t.algebra(), t.rows(), t.cols()))
        .collect();
    for (&(p, i), v) in coords.iter().zip(values) {
        grads[p].data_mut()[i] = v;
    }
    Ok(GradientSet {
        names: params.into_iter().map(|(n, _)| n).collect(),
        grads,
        inputs: None,
    })
}

/// `|a − b| / max(|a|, |b|, 1e-10)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-10)
}

/// Location of one real coordinate inside a parameter tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Coordinate {
    pub plane: usize,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub mean_rel_error: f64,
    pub worst: Coordinate,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub max_rel_error: f64,
    pub worst_param: String,
    pub tol: f64,
    pub passed: bool,
    /// Smallest |pre-activation| feeding a relu, when the model has any.
    pub min_kink_distance: Option<f64>,
    /// Set when some relu input sits within `10·eps` of its kink, where
    /// finite differences straddle the non-differentiable point.
    pub near_kink: bool,
}

pub fn compare_gradients(analytic: &GradientSet, numeric: &GradientSet, tol: f64) -> Result<GradCheckReport> {
    if analytic.grads.len() != numeric.grads.len() {
        return Err(shape_err("gradient sets have different parameter counts"));
    }
    let mut params = Vec::with_capacity(analytic.grads.len());
    for ((name, a), n) in analytic.names.iter().zip(&analytic.grads).zip(&numeric.grads) {
        a.expect_same_shape(n, "gradient check")?;
        let mut max = -1.0;
        let mut sum = 0.0;
        let mut worst = 0;
        for (i, (&x, &y)) in a.data().iter().zip(n.data()).enumerate() {
            let e = relative_error(x, y);
            sum += e;
            if e > max {
                max = e;
                worst = i;
            }
        }
        let plane_len = a.plane_len().max(1);
        let within = worst % plane_len;
        params.push(ParamCheck {
            name: name.clone(),
            max_rel_error: max.max(0.0),
            mean_rel_error: sum / a.real_len().max(1) as f64,
            worst: Coordinate {
                plane: worst / plane_len,
                row: within / a.cols().max(1),
                col: within % a.cols().max(1),
            },
            analytic: a.data().get(worst).copied().unwrap_or(0.0),
            numeric: n.data().get(worst).copied().unwrap_or(0.0),
        });
    }
    let (worst_param, max_rel) = params
        .iter()
        .fold((String::new(), 0.0f64), |(wn, wm), p| {
            if p.max_rel_error > wm {
                (p.name.clone(), p.max_rel_error)
            } else {
                (wn, wm)
            }
        });
    Ok(GradCheckReport {
        params,
        max_rel_error: max_rel,
        worst_param,
        tol,
        passed: max_rel <= tol,
        min_kink_distance: None,
        near_kink: false,
    })
}

/// Smallest |pre-activation| of any relu in the cache.
pub fn kink_distance(model: &Model, cache: &ForwardCache) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut see = |t: &Tensor| {
        let m = t.data().iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        best = Some(best.map_or(m, |b: f64| b.min(m)));
    };
    for (layer, trace) in model.layers().iter().zip(&cache.layers) {
        match (layer, trace) {
            (Layer::Dense(d), LayerTrace::Dense(steps)) if d.activation == Activation::Relu => {
                steps.iter().for_each(|s| see(&s.preact));
            }
            (Layer::Rnn(r), LayerTrace::Rnn(t)) if r.forward.activation == Activation::Relu => {
                t.forward.iter().for_each(|s| see(&s.preact));
                if let Some(b) = &t.backward {
                    b.iter().for_each(|s| see(&s.preact));
                }
            }
            _ => {}
        }
    }
    best
}

pub const DEFAULT_FD_EPS: f64 = 1e-6;

/// Runs [`qbptt`] and [`fd_oracle`] on `batch` and compares them.
pub fn grad_check(model: &Model, batch: &Batch, kind: LossKind, tol: f64) -> Result<GradCheckReport> {
    grad_check_with_eps(model, batch, kind, tol, DEFAULT_FD_EPS)
}

pub fn grad_check_with_eps(model: &Model, batch: &Batch, kind: LossKind, tol: f64, eps: f64) -> Result<GradCheckReport> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let cache = model.forward(&batch.inputs, ForwardMode::Eval)?;
    let analytic = qbptt(model, &cache, &batch.targets, kind)?;
    let numeric = fd_oracle(model, batch, kind, eps)?;
    let mut report = compare_gradients(&analytic, &numeric, tol)?;
    report.min_kink_distance = kink_distance(model, &cache);
    report.near_kink = report.min_kink_distance.is_some_and(|d| d < 10.0 * eps);
    Ok(report)
}

impl GradCheckReport {
    /// Aligned, human-readable table.
    pub fn to_text(&self) -> String {
        let width = self.params.iter().map(|p| p.name.len()).max().unwrap_or(4).max(9);
        let mut out = format!(
            "{:<width$}  {:>12}  {:>12}  {:>16}  {:>13}  {:>13}\n",
            "parameter", "max_rel", "mean_rel", "worst(p,r,c)", "analytic", "numeric"
        );
        for p in &self.params {
            out.push_str(&format!(
                "{:<width$}  {:>12.4e}  {:>12.4e}  {:>16}  {:>13.6e}  {:>13.6e}\n",
                p.name,
                p.max_rel_error,
                p.mean_rel_error,
                format!("({},{},{})", p.worst.plane, p.worst.row, p.worst.col),
                p.analytic,
                p.numeric
            ));
        }
        out.push_str(&format!(
            "max relative error {:.4e} in {} (tol {:.1e}): {}\n",
            self.max_rel_error,
            if self.worst_param.is_empty() { "-" } else { &self.worst_param },
            self.tol,
            if self.passed { "PASS" } else { "FAIL" }
        ));
        if let Some(d) = self.min_kink_distance {
            out.push_str(&format!(
                "closest relu pre-activation to kink: {d:.3e}{}\n",
                if self.near_kink { " (near kink, finite differences unreliable)" } else { "" }
            ));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("parameter,max_rel_error,mean_rel_error,worst_plane,worst_row,worst_col,analytic,numeric\n");
        for p in &self.params {
            out.push_str(&format!(
                "{},{:.6e},{:.6e},{},{},{},{:.12e},{:.12e}\n",
                p.name, p.max_rel_error, p.mean_rel_error, p.worst.plane, p.worst.row, p.worst.col, p.analytic, p.numeric
            ));
        }
        out
    }
}
