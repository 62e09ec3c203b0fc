//! The `cpr` command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::complete::{fit_als, fit_amn, FitConfig, Regime};
use crate::infer::{PerformanceModel, DEFAULT_MAX_TERMS};
use crate::metrics::{evaluate_metrics, parse_metric_list, Metric};
use crate::model_file::ModelFile;
use crate::space::{build_grid, load_space, Value};
use crate::synth::{synthesize, Kernel, Range};
use crate::tensor::{bin_observations_with, ObservationSet, Table};

#[derive(Parser, Debug)]
#[command(name = "cpr", version, about = "Execution-time models from CP tensor completion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Bin observations onto a grid and fit a CP model.
    Train(TrainArgs),
    /// Predict execution times for the configurations in a CSV file.
    Predict(PredictArgs),
    /// Score a model against measured times.
    Evaluate(EvaluateArgs),
    /// Generate observations from a closed-form kernel.
    Synth(SynthArgs),
    /// Describe a saved model.
    Info(InfoArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Parameter-space file.
    #[arg(long)]
    pub space: PathBuf,
    /// Observations CSV with one column per parameter and a `time` column.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub rank: usize,
    #[arg(long, value_parser = parse_regime)]
    pub loss: Regime,
    #[arg(long)]
    pub out: PathBuf,
    /// Ridge weight λ.
    #[arg(long, default_value_t = 1e-4)]
    pub reg: f64,
    /// Sweep cap (per barrier level for logq2).
    #[arg(long, default_value_t = 100)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for row solves (0 = all cores).
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Parameters to build extrapolation models for (logq2 only).
    #[arg(long, value_delimiter = ',')]
    pub extrapolate: Vec<String>,
    /// Hinge-term cap for extrapolation splines.
    #[arg(long, default_value_t = DEFAULT_MAX_TERMS)]
    pub max_terms: usize,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with one column per parameter.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with one column per parameter and a `time` column.
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated metrics (mape, mae, mse, smape, lgmape, mlogq, mlogq2).
    #[arg(long, default_value = "mlogq")]
    pub metrics: String,
    /// Also write per-point truth, prediction and log-ratio here.
    #[arg(long)]
    pub per_point: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelName {
    GemmAnalytic,
    SeparablePower,
    PiecewiseBilinear,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kernel: KernelName,
    #[arg(long)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Standard deviation of the multiplicative noise `1 + N(0, σ)`.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Sampling range `name=lower:upper`, once per parameter. gemm-analytic
    /// defaults to m, n, k over [32, 4096].
    #[arg(long = "range")]
    pub ranges: Vec<String>,
    /// gemm-analytic: cost per flop δ.
    #[arg(long, default_value_t = 1e-9)]
    pub delta: f64,
    /// gemm-analytic: cost per word moved β.
    #[arg(long, default_value_t = 1e-8)]
    pub beta: f64,
    /// gemm-analytic: cache size H in words.
    #[arg(long, default_value_t = 4096.0)]
    pub cache: f64,
    /// separable-power: leading coefficient.
    #[arg(long, default_value_t = 1.0)]
    pub coeff: f64,
    /// separable-power: one exponent per parameter.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub exponents: Vec<f64>,
    /// piecewise-bilinear: threshold on the coordinate sum.
    #[arg(long, default_value_t = 100.0)]
    pub split: f64,
    /// piecewise-bilinear: slope of the upper regime.
    #[arg(long, default_value_t = 100.0)]
    pub high: f64,
}

#[derive(Args, Debug)]
pub struct InfoArgs {
    #[arg(long)]
    pub model: PathBuf,
}

fn parse_regime(s: &str) -> Result<Regime, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

/// Parses `args` and runs the command, writing reports to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    match cli.command {
        Command::Train(a) => train(a, out),
        Command::Predict(a) => predict(a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::Synth(a) => synth(a, out),
        Command::Info(a) => info(a, out),
    }
}

fn train(a: TrainArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    if !a.extrapolate.is_empty() && a.loss != Regime::LogRatioPositive {
        bail!("extrapolation requires logq2");
    }
    let specs = load_space(&a.space).with_context(|| format!("reading {}", a.space.display()))?;
    let grid = build_grid(specs)?;
    let table = Table::read(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let obs = ObservationSet::new(table.configurations(&grid)?, table.times()?)?;
    let binned = bin_observations_with(&obs, &grid, a.workers)?;
    let cfg = FitConfig {
        rank: a.rank,
        reg: a.reg,
        max_sweeps: a.sweeps,
        tol: a.tol,
        seed: a.seed,
        workers: a.workers,
        ..FitConfig::default()
    };
    let report = match a.loss {
        Regime::LogLs => fit_als(&binned.tensor, &cfg)?,
        Regime::LogRatioPositive => fit_amn(&binned.tensor, &cfg)?,
    };
    let mut model = PerformanceModel::new(grid, report.model)?;
    for name in &a.extrapolate {
        let j = model
            .grid()
            .position(name)
            .with_context(|| format!("unknown parameter `{name}` in --extrapolate"))?;
        model.add_extrapolation(j, a.max_terms)?;
    }

    // training error over in-domain observations
    let (mut preds, mut truths) = (Vec::new(), Vec::new());
    let results = model.predict_batch(&obs.configurations, a.workers);
    for ((x, t), r) in obs.configurations.iter().zip(&obs.times).zip(results) {
        if let (Ok(p), true) = (r, model.grid().cell_index(x).is_ok()) {
            preds.push(p.time);
            truths.push(*t);
        }
    }

    let density = binned.tensor.density();
    let file = ModelFile::new(model, a.reg, density);
    file.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    writeln!(out, "observations {}", obs.len())?;
    writeln!(out, "out_of_domain {}", binned.out_of_domain)?;
    writeln!(out, "density {density}")?;
    writeln!(out, "objective {}", report.objective)?;
    writeln!(out, "sweeps {}", report.sweeps)?;
    if !preds.is_empty() {
        writeln!(out, "train_mlogq {}", evaluate_metrics(&preds, &truths)?.mlogq)?;
    }
    Ok(())
}

fn predict(a: PredictArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let model = ModelFile::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?.model;
    let table = Table::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let configs = table.configurations(model.grid())?;
    let results = model.predict_batch(&configs, a.workers);

    let mut w = csv::Writer::from_path(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let mut header = table.headers.clone();
    header.push("predicted_time".into());
    w.write_record(&header)?;
    let mut missing = 0usize;
    for (rec, r) in table.records.iter().zip(&results) {
        let mut row = rec.clone();
        match r {
            Ok(p) => row.push(p.time.to_string()),
            Err(_) => {
                missing += 1;
                row.push("NA".into());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    if missing > 0 {
        eprintln!("warning: {missing} row(s) could not be predicted and were marked NA");
    }
    writeln!(out, "predicted {}", results.len() - missing)?;
    writeln!(out, "missing {missing}")?;
    Ok(())
}

fn evaluate(a: EvaluateArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let metrics = parse_metric_list(&a.metrics)?;
    if metrics.is_empty() {
        bail!("no metrics requested");
    }
    let model = ModelFile::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?.model;
    let table = Table::read(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let configs = table.configurations(model.grid())?;
    let truths = table.times()?;
    let preds = model
        .predict_batch(&configs, a.workers)
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map(|p| p.time).with_context(|| format!("row {}", i + 1)))
        .collect::<anyhow::Result<Vec<f64>>>()?;
    let report = evaluate_metrics(&preds, &truths)?;
    for m in &metrics {
        writeln!(out, "{} {}", m.token(), report.get(*m))?;
    }
    if metrics.contains(&Metric::Lgmape) && report.lgmape_exact_match {
        eprintln!("warning: lgmape is -inf because some prediction matches its truth exactly");
    }
    if let Some(path) = &a.per_point {
        write_per_point(path, &model, &configs, &truths, &preds)?;
    }
    Ok(())
}

fn write_per_point(
    path: &PathBuf,
    model: &PerformanceModel,
    configs: &[Vec<Value>],
    truths: &[f64],
    preds: &[f64],
) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let mut header: Vec<String> = model.grid().specs().iter().map(|s| s.name.clone()).collect();
    header.extend(["time", "predicted_time", "log_ratio"].map(String::from));
    w.write_record(&header)?;
    for ((x, t), p) in configs.iter().zip(truths).zip(preds) {
        let mut row: Vec<String> = x.iter().map(Value::to_string).collect();
        row.push(t.to_string());
        row.push(p.to_string());
        row.push((p / t).ln().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn synth(a: SynthArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let kernel = match a.kernel {
        KernelName::GemmAnalytic => Kernel::gemm(a.delta, a.beta, a.cache),
        KernelName::SeparablePower => Kernel::SeparablePower {
            coeff: a.coeff,
            exponents: a.exponents.clone(),
        },
        KernelName::PiecewiseBilinear => Kernel::PiecewiseBilinear {
            split: a.split,
            high: a.high,
        },
    };
    kernel.validate()?;
    let ranges = if a.ranges.is_empty() && a.kernel == KernelName::GemmAnalytic {
        ["m", "n", "k"].map(|n| Range::new(n, 32.0, 4096.0)).to_vec()
    } else {
        a.ranges.iter().map(|s| Range::parse(s)).collect::<crate::Result<Vec<_>>>()?
    };
    let data = synthesize(&kernel, &ranges, a.samples, a.noise, a.seed)?;
    data.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    writeln!(out, "wrote {} samples of {} to {}", a.samples, kernel.name(), a.out.display())?;
    Ok(())
}

fn info(a: InfoArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let file = ModelFile::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let m = &file.model;
    let dims: Vec<String> = m.grid().dims().iter().map(usize::to_string).collect();
    writeln!(out, "dims {}", dims.join("x"))?;
    writeln!(out, "rank {}", m.cp().rank())?;
    writeln!(out, "regime {}", m.regime())?;
    writeln!(out, "density {}", file.density)?;
    writeln!(out, "reg {}", file.reg)?;
    for (j, spec) in m.grid().specs().iter().enumerate() {
        let tag = if m.extrapolation(j).is_some() { " extrapolated" } else { "" };
        writeln!(out, "param {spec}{tag}")?;
    }
    Ok(())
}
