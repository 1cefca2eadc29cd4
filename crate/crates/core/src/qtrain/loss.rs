use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::qcore::{Algebra, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Mean over every real output component of the squared error.
    Mse,
    /// Softmax over the flattened real outputs of each column, then cross-entropy.
    Nll,
}

impl FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mse" => Ok(LossKind::Mse),
            "nll" => Ok(LossKind::Nll),
            other => Err(Error::UnknownLoss(other.to_string())),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Mse => "mse",
            LossKind::Nll => "nll",
        })
    }
}

/// Per-step targets as real `output_reals × batch` tensors; `None` marks an
/// unsupervised step.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub steps: Vec<Option<Tensor>>,
}

impl Targets {
    /// Supervise only the final step of a length-`seq_len` sequence.
    pub fn last(seq_len: usize, target: Tensor) -> Self {
        let mut steps = vec![None; seq_len];
        if let Some(s) = steps.last_mut() {
            *s = Some(target);
        }
        Self { steps }
    }

    pub fn every(targets: Vec<Tensor>) -> Self {
        Self {
            steps: targets.into_iter().map(Some).collect(),
        }
    }
}

/// Inputs and targets for one forward/backward pass.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Vec<Tensor>,
    pub targets: Targets,
}

/// Loss value plus `∂L/∂output` for every step, in the outputs' algebra.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub value: f64,
    pub seeds: Vec<Tensor>,
}

fn check_nll_targets(target: &Tensor) -> Result<()> {
    for c in 0..target.cols() {
        let mut sum = 0.0;
        for r in 0..target.rows() {
            let v = target.get(0, r, c);
            if !(v >= 0.0) {
                return Err(Error::NotProbabilities(format!("negative entry {v} in column {c}")));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NotProbabilities(format!("column {c} sums to {sum}")));
        }
    }
    Ok(())
}

/// Sum of the loss terms of one step and its gradient, unnormalized.
/// Returns `(sum, grad, normalizer_count)`.
fn step_terms(pred: &Tensor, target: &Tensor, kind: LossKind) -> Result<(f64, Tensor, usize)> {
    let real = pred.to_real();
    target.expect_algebra(Algebra::Real)?;
    if real.shape() != target.shape() {
        return Err(shape_err(format!(
            "prediction flattens to {}x{}, target is {}x{}",
            real.rows(),
            real.cols(),
            target.rows(),
            target.cols()
        )));
    }
    match kind {
        LossKind::Mse => {
            let diff = real.sub(target);
            let sum = diff.norm_squared();
            Ok((sum, diff.scale(2.0), real.real_len()))
        }
        LossKind::Nll => {
            check_nll_targets(target)?;
            let (rows, cols) = real.shape();
            let mut grad = Tensor::zeros(Algebra::Real, rows, cols);
            let mut sum = 0.0;
            for c in 0..cols {
                let max = (0..rows).map(|r| real.get(0, r, c)).fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = (0..rows).map(|r| (real.get(0, r, c) - max).exp()).sum();
                let log_z = z.ln() + max;
                for r in 0..rows {
                    let y = target.get(0, r, c);
                    let logp = real.get(0, r, c) - log_z;
                    if y > 0.0 {
                        sum -= y * logp;
                    }
                    grad.set(0, r, c, logp.exp() - y);
                }
            }
            Ok((sum, grad, cols))
        }
    }
}

/// Loss of a single prediction against its target.
pub fn loss(pred: &Tensor, target: &Tensor, kind: LossKind) -> Result<(f64, Tensor)> {
    let (sum, grad, n) = step_terms(pred, target, kind)?;
    let n = n as f64;
    Ok((sum / n, Tensor::from_real(&grad.scale(1.0 / n), pred.algebra())?))
}

/// Loss over a sequence, normalized over all supervised steps together.
pub fn sequence_loss(outputs: &[Tensor], targets: &Targets, kind: LossKind) -> Result<LossOutput> {
    if outputs.len() != targets.steps.len() {
        return Err(shape_err(format!(
            "{} outputs but {} target steps",
            outputs.len(),
            targets.steps.len()
        )));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    let mut grads = Vec::with_capacity(outputs.len());
    for (out, tgt) in outputs.iter().zip(&targets.steps) {
        match tgt {
            Some(t) => {
                let (s, g, n) = step_terms(out, t, kind)?;
                total += s;
                count += n;
                grads.push(Some(g));
            }
            None => grads.push(None),
        }
    }
    if count == 0 {
        return Err(Error::Config("no supervised steps in targets".into()));
    }
    let inv = 1.0 / count as f64;
    let seeds = grads
        .into_iter()
        .zip(outputs)
        .map(|(g, out)| match g {
            Some(g) => Tensor::from_real(&g.scale(inv), out.algebra()),
            None => Ok(Tensor::zeros(out.algebra(), out.rows(), out.cols())),
        })
        .collect::<Result<_>>()?;
    Ok(LossOutput {
        value: total * inv,
        seeds,
    })
}

/// `L(plus) − L(minus)` for two output sequences of the same model, computed
/// term by term so the shared part of the two losses cancels exactly instead
/// of through a rounded subtraction of the totals.
pub fn sequence_loss_difference(
    plus: &[Tensor],
    minus: &[Tensor],
    targets: &Targets,
    kind: LossKind,
) -> Result<f64> {
    if plus.len() != targets.steps.len() || minus.len() != targets.steps.len() {
        return Err(shape_err(format!(
            "{}/{} outputs but {} target steps",
            plus.len(),
            minus.len(),
            targets.steps.len()
        )));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for ((p, m), tgt) in plus.iter().zip(minus).zip(&targets.steps) {
        let Some(y) = tgt else { continue };
        y.expect_algebra(Algebra::Real)?;
        let (p, m) = (p.to_real(), m.to_real());
        if p.shape() != y.shape() || m.shape() != y.shape() {
            return Err(shape_err("outputs do not flatten to the target shape"));
        }
        match kind {
            LossKind::Mse => {
                for ((&a, &b), &t) in p.data().iter().zip(m.data()).zip(y.data()) {
                    total += (a - b) * ((a - t) + (b - t));
                }
                count += y.real_len();
            }
            LossKind::Nll => {
                check_nll_targets(y)?;
                let (rows, cols) = y.shape();
                for c in 0..cols {
                    let max = (0..rows).map(|r| m.get(0, r, c)).fold(f64::NEG_INFINITY, f64::max);
                    let z: f64 = (0..rows).map(|r| (m.get(0, r, c) - max).exp()).sum();
                    let mut ratio = 0.0;
                    let mut linear = 0.0;
                    for r in 0..rows {
                        let d = p.get(0, r, c) - m.get(0, r, c);
                        ratio += (m.get(0, r, c) - max).exp() / z * d.exp_m1();
                        linear += y.get(0, r, c) * d;
                    }
                    total += ratio.ln_1p() - linear;
                }
                count += cols;
            }
        }
    }
    if count == 0 {
        return Err(Error::Config("no supervised steps in targets".into()));
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_from_seed, uniform};

    fn rand_real(rows: usize, cols: usize, seed: u64) -> Tensor {
        let mut r = rng_from_seed(seed);
        Tensor::real(rows, cols, (0..rows * cols).map(|_| uniform(&mut r, -1.0, 1.0)).collect()).unwrap()
    }

    #[test]
    fn mse_of_exact_prediction_is_zero() {
        let p = rand_real(3, 2, 1);
        let (v, g) = loss(&p, &p, LossKind::Mse).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn uniform_softmax_gives_log_classes() {
        let c = 7;
        let p = Tensor::zeros(Algebra::Real, c, 1);
        let mut y = Tensor::zeros(Algebra::Real, c, 1);
        y.set(0, 3, 0, 1.0);
        let (v, _) = loss(&p, &y, LossKind::Nll).unwrap();
        assert!((v - (c as f64).ln()).abs() < 1e-15);
    }

    #[test]
    fn nll_rejects_non_probabilities() {
        let p = Tensor::zeros(Algebra::Real, 2, 1);
        let y = Tensor::real(2, 1, vec![0.7, 0.7]).unwrap();
        assert!(matches!(loss(&p, &y, LossKind::Nll), Err(Error::NotProbabilities(_))));
        let y = Tensor::real(2, 1, vec![1.5, -0.5]).unwrap();
        assert!(matches!(loss(&p, &y, LossKind::Nll), Err(Error::NotProbabilities(_))));
    }

    #[test]
    fn shape_mismatch() {
        let p = Tensor::zeros(Algebra::Quaternion, 2, 1);
        assert!(matches!(
            loss(&p, &Tensor::zeros(Algebra::Real, 2, 1), LossKind::Mse),
            Err(Error::Shape(_))
        ));
        assert!(loss(&p, &Tensor::zeros(Algebra::Real, 8, 1), LossKind::Mse).is_ok());
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        let pred = rand_real(8, 3, 2);
        let mse_target = rand_real(8, 3, 3);
        let mut probs = rand_real(8, 3, 4).map(|v| v.abs() + 0.05);
        for c in 0..3 {
            let s: f64 = (0..8).map(|r| probs.get(0, r, c)).sum();
            for r in 0..8 {
                probs.set(0, r, c, probs.get(0, r, c) / s);
            }
        }
        for (kind, target) in [(LossKind::Mse, &mse_target), (LossKind::Nll, &probs)] {
            let qpred = Tensor::from_real(&pred, Algebra::Quaternion).unwrap();
            let (_, g) = loss(&qpred, target, kind).unwrap();
            let g = g.to_real();
            let eps = 1e-6;
            for i in 0..pred.real_len() {
                let mut plus = pred.clone();
                plus.data_mut()[i] += eps;
                let mut minus = pred.clone();
                minus.data_mut()[i] -= eps;
                let fd = (loss(&plus, target, kind).unwrap().0 - loss(&minus, target, kind).unwrap().0)
                    / (2.0 * eps);
                assert!((fd - g.data()[i]).abs() < 1e-7, "{kind} coord {i}: {fd} vs {}", g.data()[i]);
            }
        }
    }

    #[test]
    fn sequence_normalization_spans_supervised_steps() {
        let a = rand_real(2, 1, 5);
        let b = rand_real(2, 1, 6);
        let t = Tensor::zeros(Algebra::Real, 2, 1);
        let out = sequence_loss(
            &[a.clone(), b.clone()],
            &Targets::every(vec![t.clone(), t.clone()]),
            LossKind::Mse,
        )
        .unwrap();
        let expect = (a.norm_squared() + b.norm_squared()) / 4.0;
        assert!((out.value - expect).abs() < 1e-15);
        let last = sequence_loss(&[a, b.clone()], &Targets::last(2, t), LossKind::Mse).unwrap();
        assert!((last.value - b.norm_squared() / 2.0).abs() < 1e-15);
        assert!(last.seeds[0].data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parse_kind() {
        assert_eq!("NLL".parse::<LossKind>().unwrap(), LossKind::Nll);
        assert!(matches!("hinge".parse::<LossKind>(), Err(Error::UnknownLoss(_))));
    }

    #[test]
    fn loss_difference_matches_direct_difference() {
        let a = rand_real(8, 3, 7);
        let b = a.add(&rand_real(8, 3, 8).scale(0.3));
        let mut probs = rand_real(8, 3, 9).map(|v| v.abs() + 0.05);
        for c in 0..3 {
            let s: f64 = (0..8).map(|r| probs.get(0, r, c)).sum();
            for r in 0..8 {
                probs.set(0, r, c, probs.get(0, r, c) / s);
            }
        }
        for (kind, y) in [(LossKind::Mse, rand_real(8, 3, 10)), (LossKind::Nll, probs)] {
            let targets = Targets { steps: vec![None, Some(y)] };
            let outs_a = [Tensor::zeros(Algebra::Real, 8, 3), a.clone()];
            let outs_b = [rand_real(8, 3, 11), b.clone()];
            let direct = sequence_loss(&outs_a, &targets, kind).unwrap().value
                - sequence_loss(&outs_b, &targets, kind).unwrap().value;
            let diff = sequence_loss_difference(&outs_a, &outs_b, &targets, kind).unwrap();
            assert!((direct - diff).abs() < 1e-13, "{kind}: {direct} vs {diff}");
        }
    }
}
