//! Command-line front end.
//!
//! Every subcommand resolves an effective configuration in four layers:
//! built-in defaults, then the `--config` file, then dedicated flags, then
//! `--set section.key=value` overrides. The result is written as
//! `config.ini` into a fresh, timestamped run directory alongside
//! `metrics.csv` and any artifacts. Only the directory name carries the
//! time, so equal seeds give byte-identical files.
//!
//! Exit codes: 0 success, 1 failed validation or runtime error, 2 usage or
//! configuration error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use ini::Ini;

use crate::error::{Error, Result};
use crate::qbench::{reports_to_csv, throughput_bench, BenchConfig, BenchPair};
use crate::qcore::{Activation, Algebra};
use crate::qdata::{
    assemble_quaternions, frames_dataset, gen_task, read_energy_csv, read_features, write_features, Dataset,
    QuaternionSequence, Split, TaskKind, TaskSpec,
};
use crate::qgrad::{grad_check_with_eps, CheckPoint};
use crate::qinit::{audit_init, Criterion, InitConfig};
use crate::qnet::{encode_checkpoint, load_checkpoint, LayerKind, LayerSpec, ModelSpec};
use crate::qtrain::{evaluate, train, LossKind, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "qnn", version, about = "Quaternion recurrent networks: training, gradient checks and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// INI file with [run], [model], [task], [train], ... sections.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Seed for generated data and batch order; defaults to --seed.
    #[arg(long)]
    data_seed: Option<u64>,
    /// Parent directory of run directories.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Override any configuration key, applied last.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug, Clone, Default)]
struct ModelArgs {
    /// rnn, lstm, qrnn, qlstm (dense and qdense also accepted).
    #[arg(long)]
    model: Option<String>,
    /// Hidden units per layer, in the layer's algebra.
    #[arg(long)]
    units: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
struct TaskArgs {
    /// adding, copy or identity.
    #[arg(long)]
    task: Option<String>,
    /// Labelled feature file; trains per-frame classification instead of a task.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    seq_len: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and save its best checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        dropout: Option<f64>,
    },
    /// Evaluate a checkpoint on both splits of a task.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoint written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        task: TaskArgs,
    },
    /// Compare backpropagated gradients against finite differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        seq_len: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        /// mse or nll.
        #[arg(long)]
        loss: Option<String>,
    },
    /// Audit the quaternion initializer.
    InitStats {
        #[command(flatten)]
        common: Common,
        /// Fan-in and fan-out, in quaternion units.
        #[arg(long)]
        units: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Time matched real and quaternion layers.
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        seq_len: Option<usize>,
    },
    /// Assemble quaternion features from an energy CSV, or inspect a feature file.
    Features {
        #[command(flatten)]
        common: Common,
        /// CSV with header `t,f,e`.
        #[arg(long)]
        energy: Option<PathBuf>,
        /// Existing feature file to inspect.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Generate a synthetic task and write it out.
    GenTask {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        task: Option<String>,
        #[arg(long)]
        seq_len: Option<usize>,
    },
}

const DEFAULTS: &[(&str, &[(&str, &str)])] = &[
    ("run", &[("seed", "0"), ("data_seed", "")]),
    (
        "model",
        &[
            ("kind", "qlstm"),
            ("units", "16"),
            ("layers", "1"),
            ("activation", "tanh"),
            ("bidirectional", "false"),
        ],
    ),
    (
        "task",
        &[
            ("kind", "adding"),
            ("seq_len", "30"),
            ("width", "4"),
            ("train_count", "1000"),
            ("valid_count", "200"),
            ("features", ""),
            ("valid_fraction", "0.2"),
        ],
    ),
    (
        "train",
        &[
            ("epochs", "25"),
            ("lr", "8e-4"),
            ("anneal_factor", "0.5"),
            ("patience", "1"),
            ("dropout", "0.2"),
            ("batch_size", "8"),
            ("clip_norm", "5.0"),
            ("rmsprop_decay", "0.95"),
            ("rmsprop_eps", "1e-8"),
            ("record_time", "false"),
        ],
    ),
    ("eval", &[("checkpoint", "")]),
    ("gradcheck", &[("seq_len", "5"), ("loss", "mse"), ("tol", "1e-5"), ("eps", "1e-6")]),
    ("init", &[("criterion", "glorot"), ("n_in", "64"), ("n_out", "64"), ("samples", "100000")]),
    (
        "bench",
        &[
            ("seq_len", "10"),
            ("batch", "8"),
            ("repeats", "5"),
            ("windows", "3"),
            ("window_ms", "200"),
            ("threads", "1"),
        ],
    ),
    ("features", &[("energy", ""), ("input", ""), ("frame_shift", "0.01")]),
];

/// Effective configuration: `section.key → value`, restricted to known keys.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    sections: Vec<&'static str>,
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Defaults for the given sections.
    pub fn defaults(sections: &[&'static str]) -> Self {
        let mut values = BTreeMap::new();
        for (sec, keys) in DEFAULTS {
            if sections.contains(sec) {
                for (k, v) in keys.iter() {
                    values.insert(format!("{sec}.{k}"), v.to_string());
                }
            }
        }
        Self {
            sections: sections.to_vec(),
            values,
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !self.values.contains_key(key) {
            let known = DEFAULTS.iter().any(|(s, keys)| keys.iter().any(|(k, _)| format!("{s}.{k}") == key));
            if known {
                // a key of a section this subcommand does not use
                return Ok(());
            }
            return Err(Error::Config(format!("unknown configuration key `{key}`")));
        }
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    /// Applies one `section.key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (k, v) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{spec}` is not section.key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let ini = Ini::load_from_file(path).map_err(|e| match e {
            ini::Error::Io(e) => Error::Io(e),
            ini::Error::Parse(e) => Error::Config(format!("{}: {e}", path.display())),
        })?;
        for (sec, props) in ini.iter() {
            for (k, v) in props.iter() {
                let Some(sec) = sec else {
                    return Err(Error::Config(format!("{}: key `{k}` outside any section", path.display())));
                };
                self.set(&format!("{sec}.{k}"), v)?;
            }
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|e| Error::Config(format!("`{key}` = `{raw}`: {e}")))
    }

    /// `None` for an empty value.
    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if self.raw(key).is_empty() {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    /// INI text, sections in declaration order and keys sorted.
    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        for sec in &self.sections {
            let _ = writeln!(out, "[{sec}]");
            let prefix = format!("{sec}.");
            for (k, v) in self.values.range(prefix.clone()..) {
                let Some(key) = k.strip_prefix(&prefix) else { break };
                let _ = writeln!(out, "{key} = {v}");
            }
            out.push('\n');
        }
        out
    }
}

fn resolve(common: &Common, sections: &[&'static str], flags: &[(&str, Option<String>)]) -> Result<RunConfig> {
    let mut cfg = RunConfig::defaults(sections);
    if let Some(path) = &common.config {
        cfg.merge_file(path)?;
    }
    if let Some(s) = common.seed {
        cfg.set("run.seed", s.to_string())?;
    }
    if let Some(s) = common.data_seed {
        cfg.set("run.data_seed", s.to_string())?;
    }
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, v.clone())?;
        }
    }
    for o in &common.set {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

fn opt<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(ToString::to_string)
}

fn path_opt(v: &Option<PathBuf>) -> Option<String> {
    v.as_ref().map(|p| p.display().to_string())
}

/// Creates `<out>/<command>-<UTC timestamp>-s<seed>`, suffixed when taken.
fn make_run_dir(out: &Path, command: &str, seed: u64) -> Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
    let base = format!("{command}-{stamp}-s{seed}");
    for n in 0.. {
        let name = if n == 0 { base.clone() } else { format!("{base}-{n}") };
        let dir = out.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!("unbounded suffix search")
}

struct Run {
    dir: PathBuf,
}

impl Run {
    fn start(common: &Common, command: &str, cfg: &RunConfig) -> Result<Self> {
        let seed: u64 = cfg.get("run.seed")?;
        let dir = make_run_dir(&common.out, command, seed)?;
        std::fs::write(dir.join("config.ini"), cfg.to_ini())?;
        Ok(Self { dir })
    }

    fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        Ok(())
    }

    fn finish(&self) {
        println!("run directory: {}", self.dir.display());
    }
}

fn seeds(cfg: &RunConfig) -> Result<(u64, u64)> {
    let seed: u64 = cfg.get("run.seed")?;
    let data = cfg.get_opt::<u64>("run.data_seed")?.unwrap_or(seed);
    Ok((seed, data))
}

fn dataset(cfg: &RunConfig, data_seed: u64) -> Result<Dataset> {
    if let Some(path) = cfg.get_opt::<String>("task.features")? {
        let seq = read_features(Path::new(&path))?;
        return frames_dataset(&seq, cfg.get("task.seq_len")?, cfg.get("task.valid_fraction")?);
    }
    let spec = TaskSpec {
        kind: cfg.get("task.kind")?,
        seq_len: cfg.get("task.seq_len")?,
        width: cfg.get("task.width")?,
        train_count: cfg.get("task.train_count")?,
        valid_count: cfg.get("task.valid_count")?,
        seed: data_seed,
    };
    gen_task(&spec)
}

/// `layers` hidden layers of the configured kind and a real linear head
/// sized to the task's targets.
pub fn model_for(kind: LayerKind, units: usize, layers: usize, activation: Activation, bidirectional: bool, data: &Dataset) -> Result<ModelSpec> {
    if layers == 0 {
        return Err(Error::Config("model needs at least one hidden layer".into()));
    }
    let mut hidden = LayerSpec::new(kind, units, activation);
    hidden.bidirectional = bidirectional;
    let mut specs = vec![hidden; layers];
    specs.push(LayerSpec::new(LayerKind::Dense, data.target_reals, Activation::Identity));
    let input_units = data.input_quaternions() * Algebra::Quaternion.dim() / kind.algebra().dim();
    let spec = ModelSpec {
        input_units,
        layers: specs,
        dropout: 0.0,
    };
    spec.validate()?;
    Ok(spec)
}

fn train_config(cfg: &RunConfig, seed: u64, data_seed: u64) -> Result<TrainConfig> {
    let clip = cfg.raw("train.clip_norm");
    let clip_norm = if clip.is_empty() || clip.eq_ignore_ascii_case("none") {
        None
    } else {
        Some(cfg.get("train.clip_norm")?)
    };
    let tc = TrainConfig {
        initial_lr: cfg.get("train.lr")?,
        anneal_factor: cfg.get("train.anneal_factor")?,
        epochs: cfg.get("train.epochs")?,
        dropout: cfg.get("train.dropout")?,
        rmsprop_decay: cfg.get("train.rmsprop_decay")?,
        rmsprop_eps: cfg.get("train.rmsprop_eps")?,
        seed,
        data_seed: Some(data_seed),
        loss_kind: None,
        patience: cfg.get("train.patience")?,
        batch_size: cfg.get("train.batch_size")?,
        clip_norm,
        record_time: cfg.get("train.record_time")?,
    };
    tc.validate()?;
    Ok(tc)
}

fn cmd_train(common: &Common, model: &ModelArgs, task: &TaskArgs, epochs: Option<usize>, lr: Option<f64>, dropout: Option<f64>) -> Result<i32> {
    let cfg = resolve(
        common,
        &["run", "model", "task", "train"],
        &[
            ("model.kind", model.model.clone()),
            ("model.units", opt(&model.units)),
            ("model.layers", opt(&model.layers)),
            ("task.kind", task.task.clone()),
            ("task.features", path_opt(&task.features)),
            ("task.seq_len", opt(&task.seq_len)),
            ("train.epochs", opt(&epochs)),
            ("train.lr", opt(&lr)),
            ("train.dropout", opt(&dropout)),
        ],
    )?;
    let (seed, data_seed) = seeds(&cfg)?;
    let data = dataset(&cfg, data_seed)?;
    let spec = model_for(
        cfg.get("model.kind")?,
        cfg.get("model.units")?,
        cfg.get("model.layers")?,
        cfg.get("model.activation")?,
        cfg.get("model.bidirectional")?,
        &data,
    )?;
    let tc = train_config(&cfg, seed, data_seed)?;
    let run = Run::start(common, "train", &cfg)?;
    let (best, metrics) = train(&spec, &data, &tc)?;
    run.write("metrics.csv", metrics.to_csv())?;
    run.write("checkpoint.qnn", encode_checkpoint(&best))?;
    println!(
        "best epoch {} valid loss {:.6e} {} {:.6e}",
        metrics.best_epoch, metrics.best_valid_loss, metrics.metric, metrics.best_valid_metric
    );
    run.finish();
    Ok(EXIT_OK)
}

fn cmd_eval(common: &Common, checkpoint: &Path, task: &TaskArgs) -> Result<i32> {
    let cfg = resolve(
        common,
        &["run", "task", "eval"],
        &[
            ("eval.checkpoint", Some(checkpoint.display().to_string())),
            ("task.kind", task.task.clone()),
            ("task.features", path_opt(&task.features)),
            ("task.seq_len", opt(&task.seq_len)),
        ],
    )?;
    let (_, data_seed) = seeds(&cfg)?;
    let model = load_checkpoint(Path::new(cfg.raw("eval.checkpoint")))?;
    let data = dataset(&cfg, data_seed)?;
    let run = Run::start(common, "eval", &cfg)?;
    let mut csv = format!("split,loss,{}\n", data.metric.name());
    for (name, split) in [("train", Split::Train), ("valid", Split::Valid)] {
        let (loss, metric) = evaluate(&model, &data, split, data.loss)?;
        let _ = writeln!(csv, "{name},{loss:.17e},{metric:.17e}");
        println!("{name}: loss {loss:.6e} {} {metric:.6e}", data.metric.name());
    }
    run.write("metrics.csv", csv)?;
    run.finish();
    Ok(EXIT_OK)
}

fn cmd_gradcheck(common: &Common, model: &ModelArgs, seq_len: Option<usize>, tol: Option<f64>, loss: &Option<String>) -> Result<i32> {
    let cfg = resolve(
        common,
        &["run", "model", "gradcheck"],
        &[
            ("model.kind", model.model.clone()),
            ("model.units", opt(&model.units)),
            ("model.layers", opt(&model.layers)),
            ("gradcheck.seq_len", opt(&seq_len)),
            ("gradcheck.tol", opt(&tol)),
            ("gradcheck.loss", loss.clone()),
        ],
    )?;
    let (seed, _) = seeds(&cfg)?;
    let mut point = CheckPoint::new(
        cfg.get("model.kind")?,
        cfg.get("model.units")?,
        cfg.get("gradcheck.seq_len")?,
        cfg.get::<LossKind>("gradcheck.loss")?,
        seed,
    );
    point.activation = cfg.get("model.activation")?;
    let (m, batch) = point.build()?;
    let run = Run::start(common, "gradcheck", &cfg)?;
    let report = grad_check_with_eps(&m, &batch, point.loss, cfg.get("gradcheck.tol")?, cfg.get("gradcheck.eps")?)?;
    run.write("metrics.csv", report.to_csv())?;
    run.write("report.txt", report.to_text())?;
    print!("{}", report.to_text());
    run.finish();
    Ok(if report.passed { EXIT_OK } else { EXIT_FAILED })
}

fn cmd_init_stats(common: &Common, units: Option<usize>, samples: Option<usize>) -> Result<i32> {
    let cfg = resolve(
        common,
        &["run", "init"],
        &[
            ("init.n_in", opt(&units)),
            ("init.n_out", opt(&units)),
            ("init.samples", opt(&samples)),
        ],
    )?;
    let (seed, _) = seeds(&cfg)?;
    let ic = InitConfig {
        criterion: cfg.get::<Criterion>("init.criterion")?,
        n_in: cfg.get("init.n_in")?,
        n_out: cfg.get("init.n_out")?,
        seed,
    };
    let run = Run::start(common, "init-stats", &cfg)?;
    let report = audit_init(&ic, cfg.get("init.samples")?)?;
    let kv = report.to_key_values();
    let mut csv = String::from("key,value\n");
    for line in kv.lines() {
        if let Some((k, v)) = line.split_once('=') {
            let _ = writeln!(csv, "{k},{v}");
        }
    }
    run.write("metrics.csv", csv)?;
    print!("{kv}");
    run.finish();
    // The magnitude bound and the polar identity are exact properties; the
    // statistical fields are reported, not enforced.
    let ok = report.max_magnitude_over_sigma <= 1.0 && report.max_polar_residual <= 1e-12;
    Ok(if ok { EXIT_OK } else { EXIT_FAILED })
}

fn cmd_bench(common: &Common, model: &ModelArgs, seq_len: Option<usize>) -> Result<i32> {
    let mut flags = vec![
        ("model.kind", model.model.clone()),
        ("model.units", opt(&model.units)),
        ("bench.seq_len", opt(&seq_len)),
    ];
    if model.model.is_none() {
        flags[0].1 = Some("dense".into());
    }
    if model.units.is_none() {
        flags[1].1 = Some("256".into());
    }
    let cfg = resolve(common, &["run", "model", "bench"], &flags)?;
    let (seed, _) = seeds(&cfg)?;
    let kind: LayerKind = cfg.get("model.kind")?;
    let units: usize = cfg.get("model.units")?;
    let real_kind = match kind {
        LayerKind::QDense => LayerKind::Dense,
        LayerKind::QRnn => LayerKind::Rnn,
        LayerKind::QLstm => LayerKind::Lstm,
        k => k,
    };
    let pair = BenchPair {
        kind: real_kind,
        width: units * kind.algebra().dim(),
        seq_len: cfg.get("bench.seq_len")?,
        batch: cfg.get("bench.batch")?,
    };
    let bc = BenchConfig {
        window: Duration::from_millis(cfg.get("bench.window_ms")?),
        repeats: cfg.get("bench.repeats")?,
        windows: cfg.get("bench.windows")?,
        threads: cfg.get("bench.threads")?,
        seed,
    };
    let run = Run::start(common, "bench", &cfg)?;
    let report = throughput_bench(&pair, &bc)?;
    // Timings go to bench.csv; metrics.csv keeps the reproducible columns.
    let csv = reports_to_csv(std::slice::from_ref(&report));
    run.write("bench.csv", &csv)?;
    let metrics = format!(
        "config,real_params,quat_params,real_weights,quat_weights,ratio,real_ops,quat_ops,checksums_match\n{},{},{},{},{},{}/{},{},{},{}\n",
        report.config_id,
        report.real_params,
        report.quat_params,
        report.real_weights,
        report.quat_weights,
        report.ratio.0,
        report.ratio.1,
        report.real_ops_per_connection,
        report.quat_ops_per_connection,
        report.checksums_match
    );
    run.write("metrics.csv", metrics)?;
    print!("{csv}");
    if report.flagged {
        println!(
            "note: quaternion layer is {:.2}x slower than its real twin (above {:.0}x)",
            report.slowdown,
            crate::qbench::SLOWDOWN_FLAG
        );
    }
    run.finish();
    Ok(if report.checksums_match { EXIT_OK } else { EXIT_FAILED })
}

fn features_csv(seq: &QuaternionSequence) -> String {
    let mut out = String::from("frame,feature,r,i,j,k\n");
    for t in 0..seq.frames() {
        for f in 0..seq.features() {
            let q = seq.quaternion(t, f);
            let _ = writeln!(out, "{t},{f},{:e},{:e},{:e},{:e}", q[0], q[1], q[2], q[3]);
        }
    }
    out
}

fn cmd_features(common: &Common, energy: &Option<PathBuf>, features: &Option<PathBuf>) -> Result<i32> {
    let cfg = resolve(
        common,
        &["run", "features"],
        &[("features.energy", path_opt(energy)), ("features.input", path_opt(features))],
    )?;
    let seq = match (cfg.get_opt::<String>("features.energy")?, cfg.get_opt::<String>("features.input")?) {
        (Some(e), None) => assemble_quaternions(&read_energy_csv(Path::new(&e), cfg.get("features.frame_shift")?)?)?,
        (None, Some(f)) => read_features(Path::new(&f))?,
        _ => return Err(Error::Config("give exactly one of --energy or --features".into())),
    };
    let run = Run::start(common, "features", &cfg)?;
    write_features(&run.dir.join("features.qft"), &seq)?;
    run.write("metrics.csv", features_csv(&seq))?;
    println!(
        "{} frames, {} quaternion features ({} reals) per frame",
        seq.frames(),
        seq.features(),
        seq.real_width()
    );
    run.finish();
    Ok(EXIT_OK)
}

fn cmd_gen_task(common: &Common, task: &Option<String>, seq_len: Option<usize>) -> Result<i32> {
    let cfg = resolve(
        common,
        &["run", "task"],
        &[("task.kind", task.clone()), ("task.seq_len", opt(&seq_len))],
    )?;
    let (_, data_seed) = seeds(&cfg)?;
    if cfg.get::<TaskKind>("task.kind")? == TaskKind::Frames {
        return Err(Error::Config("gen-task makes synthetic tasks; frames come from `features`".into()));
    }
    let data = dataset(&cfg, data_seed)?;
    let run = Run::start(common, "gen-task", &cfg)?;
    run.write("task.bin", data.to_bytes())?;
    let mut csv = String::from("split,samples,seq_len,input_reals,target_reals,target_mean\n");
    for (name, split) in [("train", Split::Train), ("valid", Split::Valid)] {
        let s = data.samples(split);
        let (sum, n) = s
            .iter()
            .flat_map(|x| &x.targets)
            .fold((0.0, 0usize), |(a, n), &v| (a + v, n + 1));
        let _ = writeln!(
            csv,
            "{name},{},{},{},{},{:.17e}",
            s.len(),
            data.seq_len(),
            data.input_reals,
            data.target_reals,
            sum / n.max(1) as f64
        );
    }
    run.write("metrics.csv", &csv)?;
    print!("{csv}");
    run.finish();
    Ok(EXIT_OK)
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("QNN_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("QNN_THREADS must be a positive integer, got `{v}`")))?;
    // Only the first call in a process can size the global pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(cli: Cli) -> Result<i32> {
    configure_threads()?;
    match &cli.command {
        Command::Train {
            common,
            model,
            task,
            epochs,
            lr,
            dropout,
        } => cmd_train(common, model, task, *epochs, *lr, *dropout),
        Command::Eval { common, checkpoint, task } => cmd_eval(common, checkpoint, task),
        Command::Gradcheck {
            common,
            model,
            seq_len,
            tol,
            loss,
        } => cmd_gradcheck(common, model, *seq_len, *tol, loss),
        Command::InitStats { common, units, samples } => cmd_init_stats(common, *units, *samples),
        Command::Bench { common, model, seq_len } => cmd_bench(common, model, *seq_len),
        Command::Features {
            common,
            energy,
            features,
        } => cmd_features(common, energy, features),
        Command::GenTask { common, task, seq_len } => cmd_gen_task(common, task, *seq_len),
    }
}

fn is_usage_error(e: &Error) -> bool {
    matches!(e, Error::Config(_) | Error::UnknownActivation(_) | Error::UnknownLoss(_))
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if is_usage_error(&e) {
                EXIT_USAGE
            } else {
                EXIT_FAILED
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layering_order() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.ini");
        std::fs::write(&file, "[train]\nlr = 0.01\nepochs = 3\n[run]\nseed = 4\n").unwrap();
        let common = Common {
            config: Some(file),
            seed: Some(9),
            data_seed: None,
            out: dir.path().into(),
            set: vec!["train.epochs=7".into()],
        };
        let cfg = resolve(&common, &["run", "train"], &[("train.lr", Some("0.5".into()))]).unwrap();
        assert_eq!(cfg.raw("train.lr"), "0.5");
        assert_eq!(cfg.raw("train.epochs"), "7");
        assert_eq!(cfg.raw("run.seed"), "9");
        assert_eq!(cfg.raw("train.patience"), "1");
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut cfg = RunConfig::defaults(&["run", "train"]);
        assert!(matches!(cfg.apply_override("train.nope=1"), Err(Error::Config(_))));
        assert!(cfg.apply_override("missing-equals").is_err());
        // known key of an unused section is accepted and ignored
        cfg.apply_override("bench.repeats=2").unwrap();
        assert_eq!(cfg.raw("bench.repeats"), "");
    }

    #[test]
    fn ini_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::defaults(&["run", "model", "train"]);
        cfg.set("model.units", "8").unwrap();
        let path = dir.path().join("echo.ini");
        std::fs::write(&path, cfg.to_ini()).unwrap();
        let mut back = RunConfig::defaults(&["run", "model", "train"]);
        back.merge_file(&path).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn usage_exit_codes() {
        assert_eq!(run(["qnn", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["qnn", "train", "--no-such-flag"]), EXIT_USAGE);
        assert_eq!(run(["qnn", "--help"]), EXIT_OK);
    }
}
