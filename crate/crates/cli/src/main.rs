use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sith::harness::{
    count_parameters, evaluate, preset, preset_names, run_experiment_with, run_probe, write_probe_csv,
    ExperimentConfig, ExperimentSummary, ProbeScenario,
};

#[derive(Parser)]
#[command(name = "sith", version, about = "Temporal memory representations for deep Q-learning on Catch")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate every run of one experiment.
    Train(ExperimentArgs),
    /// Score a saved network greedily on fresh games.
    Eval(EvalArgs),
    /// Write memory activation curves for a stimulus protocol as CSV.
    Probe(ProbeArgs),
    /// Run a set of presets one after another and tabulate their summaries.
    Sweep(SweepArgs),
    /// Print network parameter counts for a board size and slice counts.
    Params(ParamsArgs),
    /// List the shipped experiment presets.
    Presets,
}

#[derive(Args, Clone)]
struct Overrides {
    /// Base seed; run r uses a seed derived from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of independent runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Train on every transition of each replayed game (no session batch cap).
    #[arg(long)]
    faithful: bool,
    /// Runs executed concurrently.
    #[arg(long)]
    workers: Option<usize>,
    /// Training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Session batch cap in transitions.
    #[arg(long, conflicts_with = "faithful")]
    batch_cap: Option<usize>,
}

impl Overrides {
    fn apply(&self, mut cfg: ExperimentConfig) -> Result<ExperimentConfig> {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(runs) = self.runs {
            cfg.runs = runs;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(workers) = self.workers {
            cfg.workers = workers;
        }
        if let Some(epochs) = self.epochs {
            cfg.train.epochs = epochs;
        }
        if let Some(cap) = self.batch_cap {
            cfg.train.session_batch_cap = Some(cap);
        }
        if self.faithful {
            cfg = cfg.faithful();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment configuration file (TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Name of a shipped preset (see `sith presets`).
    #[arg(long)]
    preset: Option<String>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint written by `sith train`.
    checkpoint: PathBuf,
    /// Configuration describing the memory and board; defaults to the
    /// `config.snapshot` next to the checkpoint.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    games: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV file for the per-game scores.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProbeArgs {
    /// impulse, sweep-tau0, sweep-k, sweep-c or compare-representations.
    scenario: String,
    /// Comma-separated parameter values for the sweeps.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// CSV output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Preset names or name prefixes to include; every standard-length preset when omitted.
    #[arg(long = "preset")]
    presets: Vec<String>,
    /// Experiment configuration files to include.
    #[arg(long = "config")]
    configs: Vec<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct ParamsArgs {
    /// Features per frame (18 x 13 Catch board by default).
    #[arg(long, default_value_t = 234)]
    features: usize,
    /// Slice counts to report.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1, 5, 10, 17])]
    slices: Vec<usize>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    let broken = |io: &io::Error| io.kind() == io::ErrorKind::BrokenPipe;
    let broken_csv = |e: &csv::Error| matches!(e.kind(), csv::ErrorKind::Io(io) if broken(io));
    e.chain().any(|c| {
        c.downcast_ref::<io::Error>().is_some_and(broken)
            || c.downcast_ref::<csv::Error>().is_some_and(broken_csv)
            || match c.downcast_ref::<sith::Error>() {
                Some(sith::Error::Io(io)) => broken(io),
                Some(sith::Error::Csv(e)) => broken_csv(e),
                _ => false,
            }
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train(args) => train(args),
        Command::Eval(args) => eval(args),
        Command::Probe(args) => probe(args),
        Command::Sweep(args) => sweep(args),
        Command::Params(args) => params(args),
        Command::Presets => {
            let mut out = io::stdout().lock();
            for name in preset_names() {
                writeln!(out, "{name}")?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn named_preset(name: &str) -> Result<ExperimentConfig> {
    preset(name).with_context(|| format!("unknown preset {name:?}; `sith presets` lists them"))
}

fn run_one(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    eprintln!(
        "{}: {} run(s), {} epochs, batch cap {}, output {}",
        cfg.label,
        cfg.runs,
        cfg.train.epochs,
        cfg.train
            .session_batch_cap
            .map_or_else(|| "none".to_string(), |c| c.to_string()),
        cfg.experiment_dir().display()
    );
    let summary = run_experiment_with(cfg, |r| match r {
        Ok(s) => eprintln!(
            "  run {} finished: final mean {:.3} over {} games ({:.0} s)",
            s.run, s.final_mean, s.final_games, s.wall_clock_s
        ),
        Err((run, msg)) => eprintln!("  run {run} FAILED: {msg}"),
    })?;
    Ok(summary)
}

fn print_summary(s: &ExperimentSummary) {
    let means: Vec<String> = s.final_means().iter().map(|m| format!("{m:.3}")).collect();
    println!("{}", s.label);
    println!("  final means     {}", means.join(" "));
    println!("  mean {:.3}  median {:.3}  sd {:.3}", s.mean_of_means, s.median_of_means, s.sd_of_means);
    for ci in [s.ci90, s.ci95].into_iter().flatten() {
        println!("  {:.0}% CI        [{:.3}, {:.3}]", ci.level * 100.0, ci.low, ci.high);
    }
    for (run, msg) in &s.failed {
        println!("  run {run} incomplete: {msg}");
    }
}

fn train(args: ExperimentArgs) -> Result<ExitCode> {
    let base = match (&args.config, &args.preset) {
        (Some(path), _) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        (None, Some(name)) => named_preset(name)?,
        (None, None) => bail!("either --config or --preset is required"),
    };
    let cfg = args.overrides.apply(base)?;
    let summary = run_one(&cfg)?;
    print_summary(&summary);
    Ok(if summary.is_complete() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn eval(args: EvalArgs) -> Result<ExitCode> {
    let config_path = match args.config {
        Some(p) => p,
        None => args
            .checkpoint
            .parent()
            .unwrap_or(Path::new("."))
            .join("config.snapshot"),
    };
    let cfg = ExperimentConfig::load(&config_path).with_context(|| format!("loading {}", config_path.display()))?;
    let scores = evaluate(&args.checkpoint, &cfg.memory, &cfg.env, args.games, args.seed)
        .with_context(|| format!("evaluating {}", args.checkpoint.display()))?;
    if let Some(out) = &args.out {
        let mut w = csv::Writer::from_path(out)?;
        w.write_record(["game", "score"])?;
        for (g, s) in scores.iter().enumerate() {
            w.write_record([g.to_string(), s.to_string()])?;
        }
        w.flush()?;
    }
    let mean = scores.iter().sum::<i64>() as f64 / scores.len().max(1) as f64;
    println!("{} games, mean score {mean:.3}", scores.len());
    Ok(ExitCode::SUCCESS)
}

fn probe(args: ProbeArgs) -> Result<ExitCode> {
    let scenario: ProbeScenario = args.scenario.parse()?;
    let curves = run_probe(scenario, args.values.as_deref())?;
    match &args.out {
        Some(path) => write_probe_csv(&curves, BufWriter::new(File::create(path)?))?,
        None => write_probe_csv(&curves, io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep(args: SweepArgs) -> Result<ExitCode> {
    let mut configs = Vec::new();
    for path in &args.configs {
        configs.push(ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?);
    }
    let names: Vec<String> = if args.presets.is_empty() && args.configs.is_empty() {
        preset_names().into_iter().filter(|n| !n.ends_with("-long")).collect()
    } else {
        let all = preset_names();
        // An exact name selects just that preset; anything else is a prefix.
        let selects = |p: &String, n: &String| {
            if all.contains(p) {
                n == p
            } else {
                n.starts_with(p.as_str())
            }
        };
        all.iter()
            .filter(|n| args.presets.iter().any(|p| selects(p, n)))
            .cloned()
            .collect()
    };
    if names.is_empty() && configs.is_empty() {
        bail!("no presets match {:?}", args.presets);
    }
    for name in &names {
        configs.push(named_preset(name)?);
    }
    let configs: Vec<ExperimentConfig> = configs
        .into_iter()
        .map(|c| args.overrides.apply(c))
        .collect::<Result<_>>()?;

    let out_dir = configs[0].out_dir.clone();
    std::fs::create_dir_all(&out_dir)?;
    let table_path = out_dir.join("sweep.csv");
    let mut table = csv::Writer::from_path(&table_path)?;
    table.write_record([
        "label", "config_hash", "completed", "failed", "mean", "median", "sd", "ci90_low", "ci90_high", "ci95_low",
        "ci95_high",
    ])?;
    let mut all_complete = true;
    for cfg in &configs {
        let s = run_one(cfg)?;
        print_summary(&s);
        all_complete &= s.is_complete();
        let ci = |c: Option<sith::harness::Interval>| c.map_or((String::new(), String::new()), |c| (c.low.to_string(), c.high.to_string()));
        let (l90, h90) = ci(s.ci90);
        let (l95, h95) = ci(s.ci95);
        table.write_record([
            s.label.clone(),
            s.config_hash.clone(),
            s.runs.len().to_string(),
            s.failed.len().to_string(),
            s.mean_of_means.to_string(),
            s.median_of_means.to_string(),
            s.sd_of_means.to_string(),
            l90,
            h90,
            l95,
            h95,
        ])?;
        table.flush()?;
    }
    eprintln!("sweep table written to {}", table_path.display());
    Ok(if all_complete {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn params(args: ParamsArgs) -> Result<ExitCode> {
    if args.features == 0 || args.slices.contains(&0) {
        bail!("features and slice counts must be positive");
    }
    let mut out = io::stdout().lock();
    writeln!(out, "slices,inputs,weights,biases,total")?;
    for n in &args.slices {
        let c = count_parameters(args.features, *n);
        writeln!(out, "{n},{},{},{},{}", args.features * n, c.weights, c.biases, c.total)?;
    }
    Ok(ExitCode::SUCCESS)
}
