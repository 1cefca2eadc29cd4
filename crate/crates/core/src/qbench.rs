//! Parameter, operation and throughput comparisons between matched real and
//! quaternion layers.
//!
//! Matched models share the real signal width: `N` real units face `N/4`
//! quaternion units, with `N` real (or `N/4` quaternion) inputs.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qcore::{Activation, Algebra, Tensor};
use crate::qgrad::qbptt;
use crate::qnet::{param_count, ForwardMode, LayerKind, LayerSpec, Model, ModelSpec};
use crate::qtrain::{LossKind, Targets};
use crate::rng::{derive_seed, rng_from_seed, uniform};

/// Static operation count of one connection's product, read off the product table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OpCount {
    pub multiplies: usize,
    /// Additions merging products that land in the same output component.
    pub combines: usize,
    /// Output components, each folded into its accumulator by one addition.
    pub outputs: usize,
}

pub fn op_count(algebra: Algebra) -> OpCount {
    let terms = algebra.product_terms();
    let mut outputs: Vec<usize> = terms.iter().map(|t| t.out).collect();
    outputs.sort_unstable();
    outputs.dedup();
    OpCount {
        multiplies: terms.len(),
        combines: terms.len() - outputs.len(),
        outputs: outputs.len(),
    }
}

/// Operations for one connection: multiplies plus the additions that merge
/// them. A lone real product has nothing to merge and is charged its
/// accumulation instead, making it a multiply-accumulate.
pub fn ops_per_connection(algebra: Algebra) -> usize {
    let c = op_count(algebra);
    if c.combines > 0 {
        c.multiplies + c.combines
    } else {
        c.multiplies + c.outputs
    }
}

/// Operations the block-expanded real network spends on the signal one
/// quaternion connection carries: `dim²` real multiply-accumulates.
pub fn expanded_bundle_ops(algebra: Algebra) -> usize {
    algebra.dim() * algebra.dim() * ops_per_connection(Algebra::Real)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `a / b` in lowest terms.
pub fn exact_ratio(a: u64, b: u64) -> (u64, u64) {
    let g = gcd(a, b).max(1);
    (a / g, b / g)
}

/// A real layer and its quaternion twin of equal signal width.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchPair {
    /// Real kind of the pair (dense, rnn or lstm).
    pub kind: LayerKind,
    /// Real signal width, a multiple of 4.
    pub width: usize,
    pub seq_len: usize,
    pub batch: usize,
}

impl BenchPair {
    pub fn new(kind: LayerKind, width: usize) -> Self {
        Self {
            kind,
            width,
            seq_len: if kind.is_recurrent() { 10 } else { 1 },
            batch: 8,
        }
    }

    pub fn id(&self) -> String {
        format!("{}-{}x{}-b{}", self.kind, self.width, self.seq_len, self.batch)
    }

    fn validate(&self) -> Result<()> {
        if self.kind.algebra() != Algebra::Real {
            return Err(Error::Config(format!("bench pairs name the real kind, got {}", self.kind)));
        }
        if self.width == 0 || self.width % 4 != 0 {
            return Err(Error::Config(format!("bench width {} is not a positive multiple of 4", self.width)));
        }
        if self.seq_len == 0 || self.batch == 0 {
            return Err(Error::Config("bench sequence length and batch must be positive".into()));
        }
        Ok(())
    }

    fn spec(&self, algebra: Algebra) -> ModelSpec {
        let units = self.width / algebra.dim();
        let kind = match (self.kind, algebra) {
            (k, Algebra::Real) => k,
            (LayerKind::Dense, Algebra::Quaternion) => LayerKind::QDense,
            (LayerKind::Rnn, Algebra::Quaternion) => LayerKind::QRnn,
            (_, Algebra::Quaternion) => LayerKind::QLstm,
        };
        ModelSpec {
            input_units: units,
            layers: vec![LayerSpec::new(kind, units, Activation::Tanh)],
            dropout: 0.0,
        }
    }

    pub fn real_spec(&self) -> ModelSpec {
        self.spec(Algebra::Real)
    }

    pub fn quaternion_spec(&self) -> ModelSpec {
        self.spec(Algebra::Quaternion)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchConfig {
    /// Minimum wall time of one timing window.
    pub window: Duration,
    /// Independent measurements; each is the fastest of `windows` windows.
    pub repeats: usize,
    pub windows: usize,
    /// Worker threads; 1 measures on the calling thread.
    pub threads: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            window: Duration::from_millis(200),
            repeats: 5,
            windows: 3,
            threads: 1,
            seed: 0,
        }
    }
}

/// Rates in sequences per second, one entry per repeat.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Throughput {
    pub forward: Vec<f64>,
    pub train: Vec<f64>,
}

impl Throughput {
    pub fn forward_mean(&self) -> f64 {
        mean(&self.forward)
    }

    pub fn train_mean(&self) -> f64 {
        mean(&self.train)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Sample standard deviation over the mean.
pub fn coefficient_of_variation(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
    var.sqrt() / m
}

/// Slowdown above which the quaternion layer is flagged as slower than the
/// published observation.
pub const SLOWDOWN_FLAG: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub config_id: String,
    pub real_params: u64,
    pub quat_params: u64,
    /// Connection (weight) parameters; these carry the exact 4:1 ratio.
    pub real_weights: u64,
    pub quat_weights: u64,
    /// `real_weights / quat_weights` in lowest terms.
    pub ratio: (u64, u64),
    pub real_ops_per_connection: usize,
    pub quat_ops_per_connection: usize,
    pub real: Throughput,
    pub quaternion: Throughput,
    /// Real forward+backward rate over the quaternion one.
    pub slowdown: f64,
    pub flagged: bool,
    /// Output checksums from the timed loop agree with a plain forward pass.
    pub checksums_match: bool,
    pub threads: usize,
}

impl BenchReport {
    pub fn ratio_value(&self) -> f64 {
        self.ratio.0 as f64 / self.ratio.1 as f64
    }

    pub fn max_cv(&self) -> f64 {
        [&self.real.forward, &self.real.train, &self.quaternion.forward, &self.quaternion.train]
            .into_iter()
            .map(|v| coefficient_of_variation(v))
            .fold(0.0, f64::max)
    }
}

/// Order-sensitive FNV-1a hash of the output bits.
pub fn checksum(outputs: &[Tensor]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for t in outputs {
        for v in t.data() {
            for b in v.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
    }
    h
}

struct Workload {
    model: Model,
    inputs: Vec<Tensor>,
    targets: Targets,
}

impl Workload {
    fn new(spec: ModelSpec, pair: &BenchPair, seed: u64) -> Result<Self> {
        let model = Model::new(spec.clone(), derive_seed(seed, "bench.init"))?;
        let algebra = spec.input_algebra();
        let mut rng = rng_from_seed(derive_seed(seed, "bench.inputs"));
        let inputs = (0..pair.seq_len)
            .map(|_| {
                let n = spec.input_units * pair.batch * algebra.dim();
                let data = (0..n).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
                Tensor::from_data(algebra, spec.input_units, pair.batch, data)
            })
            .collect::<Result<Vec<_>>>()?;
        let targets = Targets::every(vec![Tensor::zeros(Algebra::Real, spec.output_reals(), pair.batch); pair.seq_len]);
        Ok(Self { model, inputs, targets })
    }

    fn forward(&self) -> Result<Vec<Tensor>> {
        Ok(self.model.forward(&self.inputs, ForwardMode::Eval)?.outputs)
    }

    fn train_step(&self) -> Result<Vec<Tensor>> {
        let cache = self.model.forward(&self.inputs, ForwardMode::Eval)?;
        let grads = qbptt(&self.model, &cache, &self.targets, LossKind::Mse)?;
        std::hint::black_box(grads);
        Ok(cache.outputs)
    }
}

/// Runs `op` until `window` elapses and returns sequences per second plus the
/// last outputs. With several threads every worker runs its own copy of the
/// workload and the rates add up.
fn rate(
    op: &(dyn Fn() -> Result<Vec<Tensor>> + Sync),
    batch: usize,
    window: Duration,
    threads: usize,
) -> Result<(f64, Vec<Tensor>)> {
    let run = || -> Result<(f64, Vec<Tensor>)> {
        let start = Instant::now();
        let mut calls = 0usize;
        let mut last;
        loop {
            last = op()?;
            calls += 1;
            if start.elapsed() >= window {
                break;
            }
        }
        Ok(((calls * batch) as f64 / start.elapsed().as_secs_f64(), last))
    };
    if threads <= 1 {
        return run();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let parts: Vec<(f64, Vec<Tensor>)> = pool.install(|| (0..threads).into_par_iter().map(|_| run()).collect::<Result<_>>())?;
    let total = parts.iter().map(|p| p.0).sum();
    let last = parts.into_iter().next().map(|p| p.1).unwrap_or_default();
    Ok((total, last))
}

fn measure(work: &Workload, pair: &BenchPair, cfg: &BenchConfig, expected: u64) -> Result<(Throughput, bool)> {
    let mut t = Throughput {
        forward: Vec::with_capacity(cfg.repeats),
        train: Vec::with_capacity(cfg.repeats),
    };
    let mut ok = true;
    for _ in 0..cfg.repeats {
        let mut best_f = 0.0f64;
        let mut best_t = 0.0f64;
        for _ in 0..cfg.windows.max(1) {
            let (f, out_f) = rate(&|| work.forward(), pair.batch, cfg.window, cfg.threads)?;
            let (b, out_t) = rate(&|| work.train_step(), pair.batch, cfg.window, cfg.threads)?;
            ok &= checksum(&out_f) == expected && checksum(&out_t) == expected;
            best_f = best_f.max(f);
            best_t = best_t.max(b);
        }
        t.forward.push(best_f);
        t.train.push(best_t);
    }
    Ok((t, ok))
}

/// Times forward and forward+backward passes of both halves of `pair`.
pub fn throughput_bench(pair: &BenchPair, cfg: &BenchConfig) -> Result<BenchReport> {
    pair.validate()?;
    if cfg.repeats == 0 {
        return Err(Error::Config("bench needs at least one repeat".into()));
    }
    let real_count = param_count(&pair.real_spec())?;
    let quat_count = param_count(&pair.quaternion_spec())?;
    let real_weights: u64 = real_count.layers.iter().map(|l| l.weights).sum();
    let quat_weights: u64 = quat_count.layers.iter().map(|l| l.weights).sum();

    let real = Workload::new(pair.real_spec(), pair, cfg.seed)?;
    let quat = Workload::new(pair.quaternion_spec(), pair, cfg.seed)?;
    let real_sum = checksum(&real.model.predict(&real.inputs)?);
    let quat_sum = checksum(&quat.model.predict(&quat.inputs)?);

    // Warm-up: touch every buffer and code path once before timing.
    real.train_step()?;
    quat.train_step()?;

    let (real_t, real_ok) = measure(&real, pair, cfg, real_sum)?;
    let (quat_t, quat_ok) = measure(&quat, pair, cfg, quat_sum)?;
    let slowdown = real_t.train_mean() / quat_t.train_mean();
    Ok(BenchReport {
        config_id: pair.id(),
        real_params: real_count.total,
        quat_params: quat_count.total,
        real_weights,
        quat_weights,
        ratio: exact_ratio(real_weights, quat_weights),
        real_ops_per_connection: ops_per_connection(Algebra::Real),
        quat_ops_per_connection: ops_per_connection(Algebra::Quaternion),
        real: real_t,
        quaternion: quat_t,
        slowdown,
        flagged: slowdown > SLOWDOWN_FLAG,
        checksums_match: real_ok && quat_ok,
        threads: cfg.threads,
    })
}

pub const BENCH_CSV_HEADER: &str = "config,threads,real_params,quat_params,real_weights,quat_weights,ratio,\
real_ops,quat_ops,real_fwd_seq_s,quat_fwd_seq_s,real_train_seq_s,quat_train_seq_s,slowdown,flagged,max_cv,checksums_match";

impl BenchReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}/{},{},{},{:.3},{:.3},{:.3},{:.3},{:.4},{},{:.4},{}",
            self.config_id,
            self.threads,
            self.real_params,
            self.quat_params,
            self.real_weights,
            self.quat_weights,
            self.ratio.0,
            self.ratio.1,
            self.real_ops_per_connection,
            self.quat_ops_per_connection,
            self.real.forward_mean(),
            self.quaternion.forward_mean(),
            self.real.train_mean(),
            self.quaternion.train_mean(),
            self.slowdown,
            self.flagged,
            self.max_cv(),
            self.checksums_match
        )
    }
}

/// One CSV row per report under [`BENCH_CSV_HEADER`].
pub fn reports_to_csv(reports: &[BenchReport]) -> String {
    let mut out = String::from(BENCH_CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}
