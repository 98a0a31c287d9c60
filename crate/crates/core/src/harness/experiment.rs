use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

use super::checkpoint::save_checkpoint;
use super::config::ExperimentConfig;
use super::train::{eval_round_seed, final_eval_seed, mean, train_run, EvalPoint};

pub const METRICS_SCHEMA_VERSION: u32 = 1;
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

/// Final-score statistics of one completed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub run: usize,
    pub seed: u64,
    pub config_hash: String,
    pub memory: String,
    pub epochs: usize,
    pub final_games: usize,
    pub final_mean: f64,
    pub final_median: f64,
    /// `(epoch, mean test score)` at every evaluation.
    pub curve: Vec<(usize, f64)>,
    pub wall_clock_s: f64,
}

/// Two-sided t-interval for the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub level: f64,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub label: String,
    pub config_hash: String,
    pub runs: Vec<RunSummary>,
    /// Run indices that failed, with the reason.
    pub failed: Vec<(usize, String)>,
    pub mean_of_means: f64,
    pub median_of_means: f64,
    pub sd_of_means: f64,
    /// `None` with fewer than two completed runs.
    pub ci90: Option<Interval>,
    pub ci95: Option<Interval>,
    pub ci_method: String,
}

impl ExperimentSummary {
    pub fn final_means(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.final_mean).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.failed.is_empty()
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sample standard deviation (n - 1 denominator).
pub fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = values.iter().sum::<f64>() / n as f64;
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// `mean +- t_{(1+level)/2, n-1} * sd / sqrt(n)` over independent run means.
pub fn t_interval(values: &[f64], level: f64) -> Option<Interval> {
    let n = values.len();
    if n < 2 || !(0.0..1.0).contains(&level) {
        return None;
    }
    let m = values.iter().sum::<f64>() / n as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).ok()?.inverse_cdf(0.5 + level / 2.0);
    let half = t * sample_sd(values) / (n as f64).sqrt();
    Some(Interval {
        level,
        low: m - half,
        high: m + half,
    })
}

pub fn summarize(config: &ExperimentConfig, mut runs: Vec<RunSummary>, failed: Vec<(usize, String)>) -> ExperimentSummary {
    runs.sort_by_key(|r| r.run);
    let means: Vec<f64> = runs.iter().map(|r| r.final_mean).collect();
    let mean_of_means = if means.is_empty() {
        f64::NAN
    } else {
        means.iter().sum::<f64>() / means.len() as f64
    };
    ExperimentSummary {
        label: config.label.clone(),
        config_hash: config.hash(),
        mean_of_means,
        median_of_means: median(&means),
        sd_of_means: sample_sd(&means),
        ci90: t_interval(&means, 0.90),
        ci95: t_interval(&means, 0.95),
        ci_method: "two-sided Student t interval over independent run final means".into(),
        runs,
        failed,
    }
}

fn join_scores(scores: &[i64]) -> String {
    scores.iter().map(i64::to_string).collect::<Vec<_>>().join(" ")
}

#[derive(Serialize)]
struct MetricsRow<'a> {
    phase: &'a str,
    epoch: usize,
    seed: u64,
    mean_score: f64,
    loss: f64,
    n_games: usize,
    scores: String,
}

#[derive(Serialize)]
struct TimingRow {
    epoch: usize,
    elapsed_s: f64,
}

/// Append-only metrics for one run. `metrics.csv` depends only on the
/// configuration and seed; wall-clock times go to `timing.csv`.
struct MetricsWriter {
    metrics: csv::Writer<BufWriter<File>>,
    timing: csv::Writer<BufWriter<File>>,
    run_seed: u64,
}

impl MetricsWriter {
    fn create(dir: &Path, config_hash: &str, run: usize, run_seed: u64) -> Result<Self> {
        let mut file = BufWriter::new(File::create(dir.join("metrics.csv"))?);
        writeln!(
            file,
            "# schema={METRICS_SCHEMA_VERSION} config_hash={config_hash} run={run} seed={run_seed}"
        )?;
        let metrics = csv::Writer::from_writer(file);
        let timing = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("timing.csv"))?));
        Ok(Self {
            metrics,
            timing,
            run_seed,
        })
    }

    fn record(&mut self, phase: &str, epoch: usize, seed: u64, scores: &[i64], loss: f64, elapsed_s: f64) -> Result<()> {
        self.metrics.serialize(MetricsRow {
            phase,
            epoch,
            seed,
            mean_score: mean(scores),
            loss,
            n_games: scores.len(),
            scores: join_scores(scores),
        })?;
        self.metrics.flush()?;
        self.timing.serialize(TimingRow { epoch, elapsed_s })?;
        self.timing.flush()?;
        Ok(())
    }

    fn eval_point(&mut self, p: &EvalPoint) -> Result<()> {
        let seed = eval_round_seed(self.run_seed, p.epoch);
        self.record("eval", p.epoch, seed, &p.scores, p.loss, p.elapsed_s)
    }
}

/// Trains and evaluates run `run` of `config`, writing everything into its run directory.
pub fn execute_run(config: &ExperimentConfig, run: usize) -> Result<RunSummary> {
    let dir = config.run_dir(run);
    fs::create_dir_all(&dir)?;
    let marker = dir.join(INCOMPLETE_MARKER);
    fs::write(&marker, "run started\n")?;
    let result = execute_run_inner(config, run, &dir);
    match &result {
        Ok(_) => fs::remove_file(&marker)?,
        Err(e) => fs::write(&marker, format!("run failed: {e}\n"))?,
    }
    result
}

fn execute_run_inner(config: &ExperimentConfig, run: usize, dir: &Path) -> Result<RunSummary> {
    let spec = config.run_spec(run);
    let hash = config.hash();
    fs::write(dir.join("config.snapshot"), config.to_toml()?)?;
    let mut writer = MetricsWriter::create(dir, &hash, run, spec.seed)?;
    let started = std::time::Instant::now();
    let outcome = train_run(&spec, |p| writer.eval_point(p))?;
    let elapsed = started.elapsed().as_secs_f64();
    writer.record(
        "final",
        config.train.epochs,
        final_eval_seed(spec.seed),
        &outcome.final_scores,
        f64::NAN,
        elapsed,
    )?;
    save_checkpoint(&outcome.network, &dir.join("checkpoint.bin"))?;
    let finals: Vec<f64> = outcome.final_scores.iter().map(|&s| s as f64).collect();
    let summary = RunSummary {
        label: config.label.clone(),
        run,
        seed: spec.seed,
        config_hash: hash,
        memory: config.memory.label(),
        epochs: config.train.epochs,
        final_games: outcome.final_scores.len(),
        final_mean: outcome.final_mean(),
        final_median: median(&finals),
        curve: outcome.curve.iter().map(|p| (p.epoch, p.mean_score)).collect(),
        wall_clock_s: elapsed,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, value)?;
    writeln!(file)?;
    file.flush()?;
    Ok(())
}

/// Runs every seeded run of `config` on a pool of `config.workers` threads and
/// writes the aggregate `summary.json` next to the run directories. Failed runs
/// keep their `INCOMPLETE` marker and are listed in the summary.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    run_experiment_with(config, |_| {})
}

/// As [`run_experiment`], calling `on_run` as each run finishes.
pub fn run_experiment_with<F>(config: &ExperimentConfig, on_run: F) -> Result<ExperimentSummary>
where
    F: Fn(&std::result::Result<RunSummary, (usize, String)>) + Sync,
{
    config.validate()?;
    let dir = config.experiment_dir();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.snapshot"), config.to_toml()?)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    let results: Vec<std::result::Result<RunSummary, (usize, String)>> = pool.install(|| {
        (0..config.runs)
            .into_par_iter()
            .map(|run| {
                let r = execute_run(config, run).map_err(|e| (run, e.to_string()));
                on_run(&r);
                r
            })
            .collect()
    });
    let mut runs = Vec::new();
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok(s) => runs.push(s),
            Err(f) => failed.push(f),
        }
    }
    let summary = summarize(config, runs, failed);
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Paths of the files a completed run leaves behind.
pub fn run_artifacts(run_dir: &Path) -> [PathBuf; 5] {
    ["metrics.csv", "timing.csv", "summary.json", "checkpoint.bin", "config.snapshot"].map(|f| run_dir.join(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_interval_matches_tabulated_quantiles() {
        // t_{0.975, 4} = 2.776445, t_{0.95, 4} = 2.131847
        let values = [1.0, 2.0, 3.0, 4.0, 5.0];
        let sd = sample_sd(&values);
        assert!((sd - 2.5f64.sqrt()).abs() < 1e-12);
        let ci95 = t_interval(&values, 0.95).unwrap();
        let half = 2.776445 * sd / 5f64.sqrt();
        assert!((ci95.low - (3.0 - half)).abs() < 1e-5);
        assert!((ci95.high - (3.0 + half)).abs() < 1e-5);
        let ci90 = t_interval(&values, 0.90).unwrap();
        assert!((ci90.high - (3.0 + 2.131847 * sd / 5f64.sqrt())).abs() < 1e-5);
        assert!(t_interval(&[1.0], 0.95).is_none());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}
