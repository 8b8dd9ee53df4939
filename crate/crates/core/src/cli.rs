//! Command-line interface. The binary is a thin wrapper around [`run`].

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::data::{
    generate_sbm_with, load_dataset_with, validate_splits, write_dataset, Dataset, LoadOptions, SbmConfig, Signal,
};
use crate::error::{Error, Result};
use crate::graph::{make_cyclic_graph, Graph};
use crate::nn::{accuracy, load_checkpoint, masked_softmax_xent, save_checkpoint, LayerKind, OperatorSet};
use crate::shift::{normalize, rescaled_laplacian, OperatorKind, ShiftOperator};
use crate::spectral::{spectral_decompose, spectral_filter_response};
use crate::theory::{convergence_report, random_aperiodic_graph, MonomialStackSpec};
use crate::trainer::{run_seeds, summarize, train_model_with, RunMetrics, TrainConfig};

/// Environment variable consulted when a dataset argument is not an existing path.
pub const DATA_DIR_ENV: &str = "TAGCN_DATA_DIR";

/// Final cosine a converged deep monomial stack must reach.
pub const CONVERGED_COSINE: f64 = 1.0 - 1e-6;

/// Name accepted by `reproduce` for the synthetic filter-size ablation.
pub const SBM_ABLATION: &str = "two-hop-sbm";

#[derive(Debug, Parser)]
#[command(name = "tagcn", version, about = "Topology-adaptive graph convolution: training, spectra and diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model and report test accuracy.
    Train(TrainArgs),
    /// Evaluate a saved checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Eigenvalues of a shift operator and the frequency response of a polynomial filter.
    Spectrum(SpectrumArgs),
    /// Convergence of a deep monomial filter stack to the dominant eigenvector.
    Theorem1(Theorem1Args),
    /// Generate a stochastic block model dataset.
    GenSbm(GenSbmArgs),
    /// Load a dataset file, check its invariants and report split statistics.
    ValidateData(ValidateArgs),
    /// Multi-seed training with the default protocol; prints mean ± std.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Args)]
pub struct HyperArgs {
    /// Maximum polynomial degree K of each filter.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u16).range(0..=16))]
    pub filter_size: u16,
    /// Width of each hidden layer.
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(1..=100_000))]
    pub hidden: u32,
    /// Number of graph convolution layers including the output layer.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u16).range(1..=64))]
    pub layers: u16,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    /// L2 coefficient on the first layer's weights.
    #[arg(long, default_value_t = 5e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    /// Early-stopping window, in epochs.
    #[arg(long, default_value_t = 45, value_parser = clap::value_parser!(u32).range(1..))]
    pub window: u32,
    #[arg(long, value_enum, default_value_t = ModelArg::Tagcn)]
    pub model: ModelArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Tagcn,
    Gcn,
    Cheb,
    Dcnn,
}

impl From<ModelArg> for LayerKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Tagcn => LayerKind::Tagcn,
            ModelArg::Gcn => LayerKind::Gcn,
            ModelArg::Cheb => LayerKind::Cheb,
            ModelArg::Dcnn => LayerKind::Dcnn,
        }
    }
}

impl HyperArgs {
    pub fn to_config(&self, seed: u64, runs: usize) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            learning_rate: self.lr,
            max_epochs: self.epochs,
            early_stop_window: self.window as usize,
            dropout_rate: self.dropout,
            weight_decay: self.weight_decay,
            hidden_units: self.hidden as usize,
            num_layers: self.layers as usize,
            filter_size: self.filter_size as usize,
            layer_kind: self.model.into(),
            seed,
            num_runs: runs,
            ..TrainConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset file, or a name looked up in $TAGCN_DATA_DIR.
    #[arg(long)]
    pub dataset: String,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long)]
    pub seed: u64,
    /// Scale feature rows to unit sum after loading.
    #[arg(long)]
    pub row_normalize: bool,
    /// Write the run metrics JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Save the trained model here.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Stream JSON lines (header, one object per epoch, summary) on stdout.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: String,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    #[arg(long)]
    pub row_normalize: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["cyclic", "dataset"])))]
pub struct SpectrumArgs {
    /// Directed cyclic graph with this many vertices.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=512))]
    pub cyclic: Option<u32>,
    /// Dataset whose graph is analysed (at most 512 vertices).
    #[arg(long)]
    pub dataset: Option<String>,
    /// Shift operator; defaults to `raw` for the cyclic graph and `sym-normalized` otherwise.
    #[arg(long)]
    pub operator: Option<String>,
    /// Filter coefficients g_0, g_1, ... (comma separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "1")]
    pub coeffs: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Theorem1Args {
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u32).range(3..=512))]
    pub nodes: u32,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u32).range(1..=100_000))]
    pub layers: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Probability of each extra chord on top of the base cycle.
    #[arg(long, default_value_t = 0.3)]
    pub edge_prob: f64,
    /// Monomial degree of every layer.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=8))]
    pub power: u32,
    /// Set the gain of this layer (1-based, at least 2) to zero.
    #[arg(long)]
    pub zero_gain_layer: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignalArg {
    Direct,
    TwoHop,
}

impl From<SignalArg> for Signal {
    fn from(s: SignalArg) -> Self {
        match s {
            SignalArg::Direct => Signal::Direct,
            SignalArg::TwoHop => Signal::TwoHop,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenSbmArgs {
    #[arg(long, default_value_t = 400, value_parser = clap::value_parser!(u32).range(2..=200_000))]
    pub nodes: u32,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..=1000))]
    pub classes: u32,
    #[arg(long, default_value_t = 0.05)]
    pub p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    pub p_out: f64,
    #[arg(long, default_value_t = 8)]
    pub features: usize,
    #[arg(long, value_enum, default_value_t = SignalArg::TwoHop)]
    pub signal: SignalArg,
    #[arg(long, default_value_t = 3.0)]
    pub signal_strength: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output dataset file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl GenSbmArgs {
    pub fn to_config(&self, seed: u64) -> SbmConfig {
        let (n, c) = (self.nodes as usize, self.classes as usize);
        let block_sizes = (0..c).map(|i| n / c + usize::from(i < n % c)).collect();
        let mut cfg = SbmConfig::new(block_sizes, self.p_in, self.p_out, self.features, self.signal.into(), seed);
        cfg.signal_strength = self.signal_strength;
        cfg.noise_std = self.noise;
        cfg
    }
}

impl Default for GenSbmArgs {
    /// The synthetic ablation preset; matches the flag defaults.
    fn default() -> Self {
        GenSbmArgs {
            nodes: 400,
            classes: 2,
            p_in: 0.05,
            p_out: 0.01,
            features: 8,
            signal: SignalArg::TwoHop,
            signal_strength: 3.0,
            noise: 1.0,
            seed: 0,
            out: None,
        }
    }
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub dataset: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Dataset file or name (looked up in $TAGCN_DATA_DIR), or `two-hop-sbm`
    /// for the synthetic filter-size comparison.
    pub dataset: String,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..=100_000))]
    pub runs: u32,
    #[arg(long)]
    pub seed: u64,
    /// Worker threads (defaults to the available parallelism).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Filter sizes compared by `two-hop-sbm`.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub sizes: Vec<usize>,
    #[arg(long)]
    pub row_normalize: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Emit JSON lines (header, one object per run, summary) on stdout.
    #[arg(long)]
    pub json: bool,
}

/// Resolves a dataset argument: an existing path is used as is, otherwise it
/// is looked up in `$TAGCN_DATA_DIR` (also with a `.tagcn` extension).
pub fn resolve_dataset(arg: &str) -> Result<PathBuf> {
    let direct = PathBuf::from(arg);
    if direct.is_file() {
        return Ok(direct);
    }
    if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
        let dir = PathBuf::from(dir);
        for candidate in [dir.join(arg), dir.join(format!("{arg}.tagcn"))] {
            if candidate.is_file() {
                return Ok(candidate);
            }
        }
    }
    Err(Error::InvalidArgument(format!(
        "dataset `{arg}` not found (not a file, and not in ${DATA_DIR_ENV})"
    )))
}

fn load(arg: &str, row_normalize: bool) -> Result<(PathBuf, Dataset)> {
    let path = resolve_dataset(arg)?;
    let (d, _) = load_dataset_with(&path, LoadOptions { row_normalize })?;
    Ok((path, d))
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            serde_json::to_writer_pretty(&mut w, value)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        None => {
            serde_json::to_writer_pretty(&mut *stdout, value)?;
            stdout.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn json_line(stdout: &mut dyn Write, value: &serde_json::Value) -> Result<()> {
    serde_json::to_writer(&mut *stdout, value)?;
    stdout.write_all(b"\n")?;
    stdout.flush()?;
    Ok(())
}

/// Defaults that are conventions rather than fixed protocol values.
pub const EXTRAPOLATED: [&str; 7] = [
    "dropout_rate",
    "weight_decay",
    "max_epochs",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
    "glorot_uniform_init",
];

fn header(cfg: &TrainConfig, dataset: &str) -> serde_json::Value {
    json!({
        "type": "header",
        "dataset": dataset,
        "config": cfg,
        "early_stopping": "val loss above mean of previous window; best val accuracy restored",
        "extrapolated": EXTRAPOLATED,
    })
}

fn human_header(cfg: &TrainConfig, dataset: &str, stderr: &mut dyn Write) -> Result<()> {
    writeln!(stderr, "# dataset {dataset}")?;
    writeln!(stderr, "# config {}", serde_json::to_string(cfg)?)?;
    writeln!(stderr, "# extrapolated defaults: {}", EXTRAPOLATED.join(", "))?;
    Ok(())
}

/// Runs a parsed command, writing results to `stdout` and diagnostics to `stderr`.
pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(a, stdout, stderr),
        Command::Eval(a) => cmd_eval(a, stdout),
        Command::Spectrum(a) => cmd_spectrum(a, stdout),
        Command::Theorem1(a) => cmd_theorem1(a, stdout),
        Command::GenSbm(a) => cmd_gen_sbm(a, stdout),
        Command::ValidateData(a) => cmd_validate(a, stdout),
        Command::Reproduce(a) => cmd_reproduce(a, stdout, stderr),
    }
}

/// Structured error object printed by the binary on failure.
pub fn error_json(e: &Error) -> serde_json::Value {
    json!({ "error": e.kind(), "message": e.to_string() })
}

pub fn cmd_train(a: TrainArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let cfg = a.hyper.to_config(a.seed, 1)?;
    let (path, d) = load(&a.dataset, a.row_normalize)?;
    let name = path.display().to_string();
    if a.json {
        json_line(stdout, &header(&cfg, &name))?;
    } else {
        human_header(&cfg, &name, stderr)?;
    }
    let mut io_err = None;
    let (model, metrics) = train_model_with(&d, &cfg, |rec| {
        if a.json && io_err.is_none() {
            let mut v = serde_json::to_value(rec).expect("epoch record serializes");
            v["type"] = json!("epoch");
            io_err = json_line(stdout, &v).err();
        }
    })?;
    if let Some(e) = io_err {
        return Err(e);
    }
    if a.json {
        json_line(stdout, &run_summary_json(&metrics))?;
    } else {
        writeln!(
            stdout,
            "test accuracy {:.4} after {} epochs (best epoch {})",
            metrics.test_accuracy,
            metrics.epochs_run,
            metrics.best_epoch.map_or("-".to_string(), |e| e.to_string())
        )?;
    }
    if let Some(out) = &a.out {
        write_json(&metrics, Some(out), stdout)?;
    }
    if let Some(ck) = &a.checkpoint {
        save_checkpoint(ck, &model)?;
    }
    Ok(())
}

fn run_summary_json(m: &RunMetrics) -> serde_json::Value {
    json!({
        "type": "summary",
        "seed": m.seed,
        "test_accuracy": m.test_accuracy,
        "epochs_run": m.epochs_run,
        "best_epoch": m.best_epoch,
        "stopped_early": m.stopped_early,
        "wall_time_secs": m.wall_time_secs,
    })
}

pub fn cmd_eval(a: EvalArgs, stdout: &mut dyn Write) -> Result<()> {
    let (_, d) = load(&a.dataset, a.row_normalize)?;
    let model = load_checkpoint(&a.checkpoint)?;
    if model.in_width() != d.num_features() || model.out_width() != d.num_classes() {
        return Err(Error::DimensionMismatch {
            expected: model.in_width(),
            found: d.num_features(),
        });
    }
    let idx = match a.split {
        SplitArg::Train => d.train_idx(),
        SplitArg::Val => d.val_idx(),
        SplitArg::Test => d.test_idx(),
    };
    let ops = OperatorSet::for_kinds(d.graph(), &model.kinds())?;
    let logits = model.predict(&ops, d.features().view())?;
    let loss = masked_softmax_xent(logits.view(), d.labels(), idx)?.0;
    let report = json!({
        "split": a.split,
        "nodes": idx.len(),
        "accuracy": accuracy(logits.view(), d.labels(), idx),
        "loss": loss,
    });
    write_json(&report, a.out.as_deref(), stdout)
}

fn operator_for(g: &Graph, kind: OperatorKind) -> Result<ShiftOperator> {
    match kind {
        OperatorKind::RescaledLaplacian => rescaled_laplacian(g, None),
        other => normalize(g, other),
    }
}

pub fn cmd_spectrum(a: SpectrumArgs, stdout: &mut dyn Write) -> Result<()> {
    let (graph, default_kind) = match (a.cyclic, &a.dataset) {
        (Some(n), _) => (make_cyclic_graph(n as usize)?, OperatorKind::Raw),
        (None, Some(ds)) => (load(ds, false)?.1.graph().clone(), OperatorKind::SymNormalized),
        (None, None) => return Err(Error::InvalidArgument("either --cyclic or --dataset is required".into())),
    };
    let kind = match &a.operator {
        Some(s) => s.parse()?,
        None => default_kind,
    };
    if a.coeffs.is_empty() || a.coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument("coefficients must be finite and nonempty".into()));
    }
    let op = operator_for(&graph, kind)?;
    let dec = spectral_decompose(&op)?;
    let response = spectral_filter_response(&a.coeffs, &dec);
    let pairs = |v: &[crate::spectral::Complex64]| v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>();
    let report = json!({
        "operator": kind,
        "num_nodes": op.num_nodes(),
        "coeffs": a.coeffs,
        "eigenvalues": pairs(dec.eigenvalues()),
        "response": pairs(&response),
    });
    write_json(&report, a.out.as_deref(), stdout)
}

pub fn cmd_theorem1(a: Theorem1Args, stdout: &mut dyn Write) -> Result<()> {
    let n = a.nodes as usize;
    let depth = a.layers as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let graph = random_aperiodic_graph(n, a.edge_prob, &mut rng)?;
    let s = normalize(&graph, OperatorKind::SymNormalized)?;
    let mut gains: Vec<f64> = (0..depth).map(|_| rng.random_range(0.5..1.5)).collect();
    if let Some(l) = a.zero_gain_layer {
        if l < 2 || l > depth {
            return Err(Error::InvalidArgument(format!("--zero-gain-layer must be in 2..={depth}")));
        }
        gains[l - 1] = 0.0;
    }
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let spec = MonomialStackSpec::new(gains, vec![a.power as usize; depth])?;
    let report = convergence_report(&spec, &s, &x)?;
    let out = json!({
        "nodes": n,
        "layers": depth,
        "seed": a.seed,
        "positive_tail": spec.has_positive_tail(),
        "converged": report.final_cosine >= CONVERGED_COSINE,
        "report": report,
    });
    write_json(&out, a.out.as_deref(), stdout)
}

pub fn cmd_gen_sbm(a: GenSbmArgs, stdout: &mut dyn Write) -> Result<()> {
    let d = generate_sbm_with(&a.to_config(a.seed))?;
    match &a.out {
        Some(path) => write_dataset(&d, BufWriter::new(File::create(path)?)),
        None => write_dataset(&d, stdout),
    }
}

pub fn cmd_validate(a: ValidateArgs, stdout: &mut dyn Write) -> Result<()> {
    let path = resolve_dataset(&a.dataset)?;
    let (d, load_report) = load_dataset_with(&path, LoadOptions::default())?;
    let splits = validate_splits(&d)?;
    let report = json!({
        "dataset": path.display().to_string(),
        "load": load_report,
        "splits": splits,
    });
    write_json(&report, a.out.as_deref(), stdout)
}

fn run_json(m: &RunMetrics, filter_size: usize) -> serde_json::Value {
    json!({
        "type": "run",
        "seed": m.seed,
        "filter_size": filter_size,
        "test_accuracy": m.test_accuracy,
        "epochs_run": m.epochs_run,
        "best_epoch": m.best_epoch,
    })
}

/// Formats a mean ± std pair of accuracies as percentages.
pub fn percent_pm(mean: f64, std: f64) -> String {
    format!("{:.1} ± {:.1}", 100.0 * mean, 100.0 * std)
}

pub fn cmd_reproduce(a: ReproduceArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let cfg = a.hyper.to_config(a.seed, a.runs as usize)?;
    let threads = a
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if a.dataset == SBM_ABLATION {
        return reproduce_ablation(&a, cfg, threads, stdout, stderr);
    }
    let (path, d) = load(&a.dataset, a.row_normalize)?;
    let name = path.display().to_string();
    if a.json {
        json_line(stdout, &header(&cfg, &name))?;
    } else {
        human_header(&cfg, &name, stderr)?;
    }
    let runs = run_seeds(&d, &cfg, threads)?;
    let summary = summarize(&runs.iter().map(|r| r.test_accuracy).collect::<Vec<_>>())?;
    if a.json {
        for r in &runs {
            json_line(stdout, &run_json(r, cfg.filter_size))?;
        }
        json_line(stdout, &json!({ "type": "summary", "dataset": name, "summary": summary }))?;
    } else {
        writeln!(
            stdout,
            "{}: {} ({} runs)",
            a.dataset,
            percent_pm(summary.mean_accuracy, summary.std_accuracy),
            summary.runs
        )?;
    }
    if let Some(out) = &a.out {
        let report = json!({
            "dataset": name,
            "config": cfg,
            "runs": runs.iter().map(|r| run_json(r, cfg.filter_size)).collect::<Vec<_>>(),
            "summary": summary,
        });
        write_json(&report, Some(out), stdout)?;
    }
    Ok(())
}

/// Per-filter-size results of the synthetic ablation.
#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub filter_size: usize,
    pub accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

/// Trains one model per (seed, filter size) on `two_hop` block-model datasets;
/// run `i` uses dataset seed and model seed `cfg.seed + i`.
pub fn sbm_ablation(sbm: &GenSbmArgs, cfg: &TrainConfig, sizes: &[usize], threads: usize) -> Result<Vec<AblationRow>> {
    let seeds: Vec<u64> = (0..cfg.num_runs as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
    let datasets: Vec<Dataset> = seeds
        .iter()
        .map(|&s| generate_sbm_with(&sbm.to_config(s)))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for &k in sizes {
        let mut accs = Vec::with_capacity(seeds.len());
        let jobs: Vec<(u64, &Dataset)> = seeds.iter().copied().zip(&datasets).collect();
        let chunk = jobs.len().div_ceil(threads.clamp(1, jobs.len()));
        let results: Vec<Result<Vec<f64>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = jobs
                .chunks(chunk)
                .map(|part| {
                    scope.spawn(move || {
                        part.iter()
                            .map(|&(seed, d)| {
                                let run_cfg = TrainConfig {
                                    seed,
                                    filter_size: k,
                                    ..cfg.clone()
                                };
                                train_model_with(d, &run_cfg, |_| {}).map(|(_, m)| m.test_accuracy)
                            })
                            .collect()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("training worker panicked")).collect()
        });
        for r in results {
            accs.extend(r?);
        }
        let s = summarize(&accs)?;
        rows.push(AblationRow {
            filter_size: k,
            accuracies: accs,
            mean_accuracy: s.mean_accuracy,
            std_accuracy: s.std_accuracy,
        });
    }
    Ok(rows)
}

fn reproduce_ablation(
    a: &ReproduceArgs,
    cfg: TrainConfig,
    threads: usize,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<()> {
    if a.sizes.is_empty() {
        return Err(Error::InvalidArgument("--sizes needs at least one filter size".into()));
    }
    let sbm = GenSbmArgs::default();
    if a.json {
        json_line(stdout, &header(&cfg, SBM_ABLATION))?;
    } else {
        human_header(&cfg, SBM_ABLATION, stderr)?;
    }
    let rows = sbm_ablation(&sbm, &cfg, &a.sizes, threads)?;
    if a.json {
        for row in &rows {
            let mut v = serde_json::to_value(row)?;
            v["type"] = json!("filter_size");
            json_line(stdout, &v)?;
        }
        json_line(stdout, &json!({ "type": "summary", "dataset": SBM_ABLATION, "rows": rows }))?;
    } else {
        for row in &rows {
            writeln!(
                stdout,
                "{SBM_ABLATION} K={}: {} ({} runs)",
                row.filter_size,
                percent_pm(row.mean_accuracy, row.std_accuracy),
                row.accuracies.len()
            )?;
        }
    }
    if let Some(out) = &a.out {
        write_json(&json!({ "dataset": SBM_ABLATION, "config": cfg, "rows": rows }), Some(out), stdout)?;
    }
    Ok(())
}
