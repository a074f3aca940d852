//! Command-line front end. Every command is a thin wrapper over library calls.

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use tosca_core::data::{make_splits, synth_gaussian, DEFAULT_SPLIT_SEED};
use tosca_core::gradcheck::{self, TOLERANCE};
use tosca_core::{
    Activation, FeatureDataset, L1Mode, Method, ScenarioConfig, ScenarioReport, SplitPlan, SynthConfig,
};

use crate::formats::{load_features, save_bank, save_features};
use crate::report::{self, sweep_csv};
use crate::runner::{run_timed, sweep, SWEEP_LAMBDAS, SWEEP_RANKS};

#[derive(Debug, Parser)]
#[command(name = "tosca", version, about = "Exemplar-free class-incremental learning on frozen features")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic Gaussian train/test pair of feature files.
    Synth(SynthArgs),
    /// Run one class-incremental scenario and write its report.
    Run(RunArgs),
    /// Run a grid over L1 strength and bottleneck rank.
    Sweep(SweepArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Render saved JSON reports as CSV and/or an SVG chart.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output path for the training split.
    #[arg(long)]
    pub out: PathBuf,
    /// Output path for the test split.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 50)]
    pub classes: usize,
    #[arg(long, default_value_t = 100)]
    pub n_train: usize,
    #[arg(long, default_value_t = 50)]
    pub n_test: usize,
    /// Norm of every class mean.
    #[arg(long, default_value_t = 6.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = DEFAULT_SPLIT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Training feature file.
    #[arg(long)]
    pub data: PathBuf,
    /// Test feature file. Without it a seeded per-class holdout is used.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Fraction of each class held out when `--test` is absent.
    #[arg(long, default_value_t = 0.2)]
    pub holdout: f64,
    /// Classes in the first stage (B-m).
    #[arg(long, default_value_t = 0)]
    pub init: usize,
    /// Classes per incremental stage (Inc-n).
    #[arg(long)]
    pub inc: usize,
    /// Seed for the class order, the holdout and training.
    #[arg(long, default_value_t = DEFAULT_SPLIT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Bottleneck dimension.
    #[arg(long, default_value_t = 48)]
    pub r: usize,
    /// L1 strength.
    #[arg(long, default_value_t = 5e-4)]
    pub lambda: f64,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 48)]
    pub batch: usize,
    /// Peak learning rate of the cosine schedule.
    #[arg(long, default_value_t = 0.025)]
    pub lr: f64,
    /// SGD momentum.
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value = "subgradient", value_parser = parse_l1_mode)]
    pub l1_mode: L1Mode,
    /// Use `z * (1 + gate)` in the calibrator.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub gate_residual: bool,
    #[arg(long, default_value = "gelu", value_parser = parse_activation)]
    pub gate_act: Activation,
    #[arg(long, default_value = "gelu", value_parser = parse_activation)]
    pub adapter_act: Activation,
    /// Apply the calibrator before the adapter.
    #[arg(long)]
    pub reversed: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value = "tosca", value_parser = parse_method)]
    pub method: Method,
    /// JSON report path; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-stage CSV path.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// SVG accuracy curve path.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Bank file path for the trained modules (tosca and tosca_r only).
    #[arg(long)]
    pub bank: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value = "tosca", value_parser = parse_method)]
    pub method: Method,
    /// Comma-separated L1 strengths.
    #[arg(long, value_delimiter = ',', default_values_t = SWEEP_LAMBDAS)]
    pub lambdas: Vec<f64>,
    /// Comma-separated ranks.
    #[arg(long, value_delimiter = ',', default_values_t = SWEEP_RANKS)]
    pub ranks: Vec<usize>,
    /// CSV output path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Number of random modules; configurations are cycled.
    #[arg(long, default_value_t = 36)]
    pub count: usize,
    #[arg(long, default_value_t = 16)]
    pub max_dim: usize,
    #[arg(long, default_value_t = 4)]
    pub max_rank: usize,
    #[arg(long, default_value_t = DEFAULT_SPLIT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// JSON reports written by `run`.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Combined per-stage CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// SVG chart path.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: tosca_core::Error| e.to_string())
}

fn parse_l1_mode(s: &str) -> Result<L1Mode, String> {
    s.parse().map_err(|e: tosca_core::Error| e.to_string())
}

fn parse_activation(s: &str) -> Result<Activation, String> {
    s.parse().map_err(|e: tosca_core::Error| e.to_string())
}

impl TrainArgs {
    pub fn scenario_config(&self) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.train.rank = self.r;
        let o = &mut cfg.train.optim;
        o.lambda_l1 = self.lambda;
        o.epochs = self.epochs;
        o.batch_size = self.batch;
        o.lr_max = self.lr;
        o.l1_mode = self.l1_mode;
        o.momentum = self.momentum;
        let l = &mut cfg.train.luca;
        l.gate_residual = self.gate_residual;
        l.gate_act = self.gate_act;
        l.adapter_act = self.adapter_act;
        l.reversed = self.reversed;
        cfg
    }
}

/// Train/test sets and class order described by [`DataArgs`].
pub struct Workload {
    pub train: FeatureDataset,
    pub test: FeatureDataset,
    pub splits: SplitPlan,
}

impl DataArgs {
    pub fn load(&self) -> Result<Workload, CliError> {
        let full = load_features(&self.data)?;
        let (train, test) = match &self.test {
            Some(path) => (full, load_features(path)?),
            None => full.holdout(self.holdout, self.seed)?,
        };
        let splits = make_splits(&train.classes(), self.init, self.inc, self.seed)?;
        Ok(Workload { train, test, splits })
    }
}

/// Runtime failure of a command (exit code 1).
#[derive(Debug)]
pub struct CliError(String);

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

/// Parses `args` (without the program name) and runs the command.
///
/// Returns 0 on success, 1 on a runtime failure and 2 on a usage error.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv = std::iter::once(OsString::from("tosca")).chain(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth(a) => synth(&a),
        Command::Run(a) => run(&a),
        Command::Sweep(a) => run_sweep(&a),
        Command::Gradcheck(a) => run_gradcheck(&a),
        Command::Report(a) => render(&a),
    }
}

fn synth(a: &SynthArgs) -> Result<(), CliError> {
    let cfg = SynthConfig {
        dim: a.dim,
        num_classes: a.classes,
        n_train: a.n_train,
        n_test: a.n_test,
        separation: a.separation,
        sigma: a.sigma,
        seed: a.seed,
    };
    let (train, test) = synth_gaussian(&cfg)?;
    save_features(&train, &a.out)?;
    save_features(&test, &a.test)?;
    println!("wrote {} train and {} test samples", train.len(), test.len());
    Ok(())
}

fn run(a: &RunArgs) -> Result<(), CliError> {
    let w = a.data.load()?;
    let cfg = a.train.scenario_config();
    let outcome = run_timed(&w.train, &w.test, &w.splits, a.method, &cfg, a.data.seed)?;
    let r = &outcome.report;
    match &a.out {
        Some(path) => report::write_json(r, path)?,
        None => print!("{}", report::to_json(r)?),
    }
    if let Some(path) = &a.csv {
        report::write_csv(std::slice::from_ref(r), path)?;
    }
    if let Some(path) = &a.plot {
        report::write_plot(std::slice::from_ref(r), path)?;
    }
    if let Some(path) = &a.bank {
        let bank = outcome
            .bank
            .as_ref()
            .ok_or_else(|| CliError(format!("method {} does not produce a module bank", a.method)))?;
        save_bank(bank, path)?;
    }
    if a.out.is_some() {
        summarize(r);
    }
    Ok(())
}

fn summarize(r: &ScenarioReport) {
    let sel = r.selection_accuracy.map_or(String::new(), |s| format!(" selection {s:.2}%"));
    println!(
        "{} A_B {:.2} A_bar {:.2}{} ({} stages, {:.2}s)",
        r.method,
        r.final_accuracy(),
        r.average_accuracy,
        sel,
        r.stages.len(),
        r.wall_time_s
    );
}

fn run_sweep(a: &SweepArgs) -> Result<(), CliError> {
    let w = a.data.load()?;
    let cfg = a.train.scenario_config();
    let cells = sweep(&w.train, &w.test, &w.splits, a.method, &cfg, a.data.seed, &a.lambdas, &a.ranks)?;
    std::fs::write(&a.out, sweep_csv(&cells)?)?;
    println!("wrote {} sweep cells to {}", cells.len(), a.out.display());
    Ok(())
}

fn run_gradcheck(a: &GradcheckArgs) -> Result<(), CliError> {
    if a.count == 0 || a.max_dim == 0 || a.max_rank == 0 {
        return Err(CliError("count, max-dim and max-rank must be positive".into()));
    }
    let check = gradcheck::run_suite(a.count, a.max_dim, a.max_rank, a.seed)?;
    println!("max relative error: {:.3e} over {} entries", check.max_rel_error, check.entries);
    if check.max_rel_error <= TOLERANCE {
        println!("gradcheck passed (tolerance {TOLERANCE:e})");
        Ok(())
    } else {
        Err(CliError(format!("gradcheck failed: {:.3e} > {TOLERANCE:e}", check.max_rel_error)))
    }
}

fn render(a: &ReportArgs) -> Result<(), CliError> {
    let reports = a.reports.iter().map(report::read_json).collect::<Result<Vec<_>, _>>()?;
    if let Some(path) = &a.out {
        report::write_csv(&reports, path)?;
    }
    if let Some(path) = &a.plot {
        report::write_plot(&reports, path)?;
    }
    if a.out.is_none() && a.plot.is_none() {
        reports.iter().for_each(summarize);
    }
    Ok(())
}

