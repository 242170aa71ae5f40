//! Argument parsing and command execution for the `seagull` binary.
//!
//! [`parse_cli`] turns raw arguments into a validated [`Cli`];
//! [`execute`] runs it and writes human-facing output to a writer.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use seagull::bench::{
    self, emit_table, load_records, presets, ExperimentPlan, Metric, RecordWriter, RunOptions, RunRecord, TargetSpec,
};
use seagull::datagen::{make_dataset, Domain, NoiseMode, NoiseSpec, TargetKind, TransformKind};
use seagull::network::{Network, NetworkSpec};
use seagull::optimizer::LossKind;
use seagull::symmetry::{make_sinxy_network, measure_symmetry};
use seagull::{checkpoint, ActivationKind, Tensor};

#[derive(Debug, Parser)]
#[command(name = "seagull", version, about = "Even-activation regression benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one network on one target.
    Run(RunArgs),
    /// Run a preset experiment grid and print its table.
    Grid(GridArgs),
    /// Render tables from stored run records.
    Report(ReportArgs),
    /// Measure the exchange, trivial and evenness gaps of a network.
    Symmetry(SymmetryArgs),
    /// Check the exact two-layer network for sin(x*y).
    DemoSinxy(DemoArgs),
    /// Write a generated dataset as CSV.
    ExportDataset(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Md,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Best,
    Final,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Best => Metric::Best,
            MetricArg::Final => Metric::Final,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseModeArg {
    DatasetStd,
    PerLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Mse,
    Mae,
}

fn parse_activation(s: &str) -> Result<ActivationKind, String> {
    s.parse().map_err(|e: seagull::Error| e.to_string())
}

fn parse_target(s: &str) -> Result<TargetKind, String> {
    s.parse().map_err(|e: seagull::Error| e.to_string())
}

fn parse_transform(s: &str) -> Result<TransformKind, String> {
    s.parse().map_err(|e: seagull::Error| e.to_string())
}

fn parse_domain(s: &str) -> Result<Domain, String> {
    s.parse().map_err(|e: seagull::Error| e.to_string())
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        Ok(_) => Err("must be a positive number".into()),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long, value_parser = parse_target, default_value = "triangle-area")]
    pub target: TargetKind,
    #[arg(long, value_parser = parse_transform, default_value = "identity")]
    pub transform: TransformKind,
    /// Sampling domain; defaults to the target's natural one.
    #[arg(long, value_parser = parse_domain)]
    pub domain: Option<Domain>,
    /// Relative label-noise level, e.g. 0.05.
    #[arg(long, value_parser = positive_f64)]
    pub noise: Option<f64>,
    #[arg(long, value_enum, default_value_t = NoiseModeArg::DatasetStd)]
    pub noise_mode: NoiseModeArg,
}

impl DataArgs {
    pub fn noise_spec(&self) -> NoiseSpec {
        match self.noise {
            None => NoiseSpec::none(),
            Some(sigma) => NoiseSpec {
                enabled: true,
                relative_sigma: sigma,
                mode: match self.noise_mode {
                    NoiseModeArg::DatasetStd => NoiseMode::DatasetStd,
                    NoiseModeArg::PerLabel => NoiseMode::PerLabelRelative,
                },
                seed: 0,
            },
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain.unwrap_or_else(|| self.target.default_domain())
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Baseline activation of every hidden layer.
    #[arg(long, value_parser = parse_activation, default_value = "relu")]
    pub activation: ActivationKind,
    /// Replace the first hidden activation with Seagull.
    #[arg(long)]
    pub seagull_first: bool,
    #[arg(long, value_parser = positive, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = positive, default_value_t = 10_000)]
    pub train_n: usize,
    #[arg(long, value_parser = positive, default_value_t = 2_000)]
    pub test_n: usize,
    #[arg(long, value_parser = positive, default_value_t = 100)]
    pub batch_size: usize,
    #[arg(long, value_parser = positive_f64, default_value_t = 0.003)]
    pub lr: f64,
    #[arg(long, value_parser = positive, default_value_t = 100)]
    pub halve_every: usize,
    #[arg(long, value_enum, default_value_t = LossArg::Mse)]
    pub loss: LossArg,
    #[arg(long, value_parser = positive, default_value_t = 1_000)]
    pub symmetry_samples: usize,
    /// Directory for the record stream and the trained checkpoint.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    /// A one-cell, one-run plan with a single variant.
    pub fn plan(&self) -> ExperimentPlan {
        let mut plan = ExperimentPlan::new(
            "run",
            vec![TargetSpec {
                target: self.data.target,
                transform: self.data.transform,
            }],
            vec![self.activation],
        );
        plan.seagull_variants = vec![self.seagull_first];
        plan.runs_per_cell = 1;
        plan.train_n = self.train_n;
        plan.test_n = self.test_n;
        plan.noise = self.data.noise_spec();
        plan.train.epochs = self.epochs;
        plan.train.batch_size = self.batch_size;
        plan.train.lr0 = self.lr;
        plan.train.halve_every = self.halve_every;
        plan.train.loss = match self.loss {
            LossArg::Mse => LossKind::Mse,
            LossArg::Mae => LossKind::Mae,
        };
        plan.base_seed = self.seed;
        plan.symmetry_samples = self.symmetry_samples;
        plan.domain = self.data.domain;
        plan
    }
}

#[derive(Debug, Clone, Args)]
pub struct TableArgs {
    #[arg(long, value_enum, default_value_t = Format::Md)]
    pub format: Format,
    /// Print published reference values beside reproduced ones.
    #[arg(long)]
    pub compare_paper: bool,
    #[arg(long, value_enum, default_value_t = MetricArg::Best)]
    pub metric: MetricArg,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// One of: table1, table2, solid-angle, table1-mini, table2-mini.
    #[arg(long)]
    pub preset: String,
    #[arg(long, value_parser = positive)]
    pub runs: Option<usize>,
    #[arg(long, value_parser = positive)]
    pub epochs: Option<usize>,
    #[arg(long, value_parser = positive)]
    pub halve_every: Option<usize>,
    #[arg(long, value_parser = positive)]
    pub train_n: Option<usize>,
    #[arg(long, value_parser = positive)]
    pub test_n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = positive, default_value_t = 1)]
    pub workers: usize,
    /// Directory for record streams, checkpoints and tables.
    #[arg(long, default_value = "seagull-out")]
    pub out: PathBuf,
    /// Skip writing a checkpoint per trained network.
    #[arg(long)]
    pub no_checkpoints: bool,
    #[command(flatten)]
    pub table: TableArgs,
}

impl GridArgs {
    pub fn plans(&self) -> seagull::Result<Vec<ExperimentPlan>> {
        let mut plans = presets::expand(&self.preset)?;
        for p in &mut plans {
            if let Some(r) = self.runs {
                p.runs_per_cell = r;
            }
            if let Some(e) = self.epochs {
                p.train.epochs = e;
            }
            if let Some(h) = self.halve_every {
                p.train.halve_every = h;
            }
            if let Some(n) = self.train_n {
                p.train_n = n;
            }
            if let Some(n) = self.test_n {
                p.test_n = n;
            }
            p.base_seed = self.seed;
        }
        Ok(plans)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Record streams (`.jsonl`) to aggregate, one table per file.
    #[arg(required = true)]
    pub records: Vec<PathBuf>,
    /// Write each table next to this directory instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub table: TableArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SymmetryArgs {
    /// Network checkpoint; without it a fresh default network is built.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_parser = parse_activation, default_value = "relu")]
    pub activation: ActivationKind,
    #[arg(long)]
    pub seagull_first: bool,
    /// Build the fresh network without a first-layer bias.
    #[arg(long)]
    pub no_first_bias: bool,
    #[arg(long, value_parser = positive, default_value_t = 1_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = parse_domain, default_value = "cube")]
    pub domain: Domain,
}

#[derive(Debug, Clone, Args)]
pub struct DemoArgs {
    #[arg(long, value_parser = positive, default_value_t = 10_000)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Save the network checkpoint here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = positive, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses and validates arguments (excluding the program name handling,
/// which clap does: `args[0]` is the binary name).
pub fn parse_cli<I, T>(args: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let usage = |msg: String| Cli::command().error(ErrorKind::ValueValidation, msg);
    match &cli.command {
        Command::Run(a) => {
            a.data.target.check_domain(a.data.domain()).map_err(|e| usage(e.to_string()))?;
            a.plan().validate().map_err(|e| usage(e.to_string()))?;
        }
        Command::ExportDataset(a) => {
            a.data.target.check_domain(a.data.domain()).map_err(|e| usage(e.to_string()))?;
        }
        Command::Grid(a) => {
            for p in a.plans().map_err(|e| usage(e.to_string()))? {
                p.validate().map_err(|e| usage(e.to_string()))?;
            }
        }
        Command::Symmetry(a) if a.checkpoint.is_some() && (a.seagull_first || a.no_first_bias) => {
            return Err(usage("--seagull-first and --no-first-bias only apply without --checkpoint".into()));
        }
        _ => {}
    }
    Ok(cli)
}

fn render(records: &[RunRecord], t: &TableArgs) -> seagull::Result<String> {
    let table = emit_table(records, t.metric.into());
    Ok(match t.format {
        Format::Csv => table.to_csv(t.compare_paper),
        Format::Md => table.to_markdown(t.compare_paper),
        Format::Json => table.to_json()? + "\n",
    })
}

fn extension(f: Format) -> &'static str {
    match f {
        Format::Csv => "csv",
        Format::Md => "md",
        Format::Json => "json",
    }
}

fn json_line(out: &mut dyn Write, value: &impl serde::Serialize) -> seagull::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

/// Runs a parsed invocation.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> seagull::Result<()> {
    match &cli.command {
        Command::Run(a) => {
            let plan = a.plan();
            let job = plan.jobs()[0];
            let (record, net) = bench::run_job(&plan, &job)?;
            if let Some(dir) = &a.out {
                RecordWriter::append(dir.join("runs.jsonl"))?.write(&record)?;
                if let Some(net) = &net {
                    checkpoint::save(net, dir.join(format!("seed{}_{}", a.seed, bench::checkpoint_name(&record))))?;
                }
            }
            json_line(out, &record)?;
        }
        Command::Grid(a) => {
            fs::create_dir_all(&a.out)?;
            for plan in a.plans()? {
                let opts = RunOptions {
                    workers: a.workers,
                    records_path: Some(bench::records_path(&a.out, &plan)),
                    checkpoint_dir: (!a.no_checkpoints).then(|| a.out.join("checkpoints")),
                };
                let records = bench::run_plan(&plan, &opts)?;
                let text = render(&records, &a.table)?;
                fs::write(a.out.join(format!("{}.{}", plan.name, extension(a.table.format))), &text)?;
                writeln!(out, "## {}\n", plan.name)?;
                write!(out, "{text}")?;
                writeln!(out)?;
            }
        }
        Command::Report(a) => {
            for path in &a.records {
                let loaded = load_records(path)?;
                for w in &loaded.warnings {
                    log::warn!("{}: {w}", path.display());
                }
                let text = render(&loaded.records, &a.table)?;
                match &a.out {
                    Some(dir) => {
                        fs::create_dir_all(dir)?;
                        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
                        fs::write(dir.join(format!("{stem}.{}", extension(a.table.format))), &text)?;
                    }
                    None => write!(out, "{text}")?,
                }
            }
        }
        Command::Symmetry(a) => {
            let net = match &a.checkpoint {
                Some(p) => checkpoint::load(p)?,
                None => fresh_network(a)?,
            };
            let report = measure_symmetry(&net, a.samples, a.seed, a.domain)?;
            json_line(out, &report)?;
        }
        Command::DemoSinxy(a) => {
            let net = make_sinxy_network();
            let max_err = sinxy_max_error(&net, a.points, a.seed)?;
            if let Some(p) = &a.out {
                checkpoint::save(&net, p)?;
            }
            json_line(
                out,
                &serde_json::json!({ "points": a.points, "seed": a.seed, "max_abs_error": max_err }),
            )?;
        }
        Command::ExportDataset(a) => {
            let noise = NoiseSpec {
                seed: a.seed.wrapping_add(1),
                ..a.data.noise_spec()
            };
            let data = make_dataset(a.data.target, a.data.transform, noise, a.n, a.seed, a.data.domain())?;
            data.write_csv(&a.out)?;
            writeln!(out, "wrote {} rows to {}", data.len(), a.out.display())?;
        }
    }
    Ok(())
}

fn fresh_network(a: &SymmetryArgs) -> seagull::Result<Network> {
    let spec = if a.no_first_bias {
        let first = if a.seagull_first { ActivationKind::Seagull } else { a.activation };
        NetworkSpec::benchmark_unbiased_first(first, a.activation)
    } else {
        NetworkSpec::benchmark(a.activation)
    };
    let net = Network::build(spec, a.seed)?;
    if a.seagull_first && !a.no_first_bias {
        return net.replace_activation(0, ActivationKind::Seagull);
    }
    Ok(net)
}

/// Largest `|f̂(x, y) − sin(x·y)|` over `points` uniform draws from
/// `[-2, 2]^2`, generated by a SplitMix64 stream seeded with `seed`.
pub fn sinxy_max_error(net: &Network, points: usize, seed: u64) -> seagull::Result<f64> {
    use seagull::bench::splitmix64;
    let mut state = seed;
    let mut next = || {
        state = splitmix64(state);
        (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
    };
    let mut data = Vec::with_capacity(points * 2);
    for _ in 0..points {
        data.push(next());
        data.push(next());
    }
    let x = Tensor::new(vec![points, 2], data)?;
    let y = net.forward(&x)?;
    Ok((0..points)
        .map(|i| (y.data()[i] - (x.get2(i, 0) * x.get2(i, 1)).sin()).abs())
        .fold(0.0, f64::max))
}
