use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catch::CatchConfig;
use crate::error::{Error, Result};
use crate::memory::MemoryConfig;
use crate::qnet::TrainConfig;
use crate::rng::derive_seed;

use super::train::RunSpec;

/// Session batch cap used by the desk-scale presets.
pub const DESK_BATCH_CAP: usize = 256;

/// One experiment: a memory, an environment, a training recipe and how many
/// independently seeded runs to make of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub label: String,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Runs executed concurrently.
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub memory: MemoryConfig,
    #[serde(default)]
    pub env: CatchConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_runs() -> usize {
    5
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_workers() -> usize {
    1
}

// The fields that determine results; output location and parallelism do not.
#[derive(Serialize)]
struct Definition<'a> {
    label: &'a str,
    runs: usize,
    seed: u64,
    memory: &'a MemoryConfig,
    env: &'a CatchConfig,
    train: &'a TrainConfig,
}

impl ExperimentConfig {
    pub fn new(label: impl Into<String>, memory: MemoryConfig, env: CatchConfig, train: TrainConfig) -> Self {
        Self {
            label: label.into(),
            runs: default_runs(),
            seed: 0,
            out_dir: default_out_dir(),
            workers: default_workers(),
            memory,
            env,
            train,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: Self = toml::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.label.is_empty() || self.label.contains(['/', '\\']) {
            return Err(Error::InvalidConfig(format!("label {:?} is not a valid directory name", self.label)));
        }
        if self.runs == 0 {
            return Err(Error::InvalidConfig("runs must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        self.memory.validate()?;
        self.env.validate()?;
        self.train.validate()
    }

    /// SHA-256 over the result-determining fields, as lowercase hex.
    pub fn hash(&self) -> String {
        let definition = Definition {
            label: &self.label,
            runs: self.runs,
            seed: self.seed,
            memory: &self.memory,
            env: &self.env,
            train: &self.train,
        };
        let text = toml::to_string(&definition).expect("config serializes");
        hex(&Sha256::digest(text.as_bytes()))
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        derive_seed(self.seed, run as u64)
    }

    pub fn run_spec(&self, run: usize) -> RunSpec {
        RunSpec {
            memory: self.memory.clone(),
            env: self.env.clone(),
            train: self.train.clone(),
            seed: self.run_seed(run),
        }
    }

    /// Trains on every transition of each replayed game instead of a capped sample.
    pub fn faithful(mut self) -> Self {
        self.train.session_batch_cap = None;
        self
    }

    pub fn experiment_dir(&self) -> PathBuf {
        self.out_dir.join(&self.label)
    }

    pub fn run_dir(&self, run: usize) -> PathBuf {
        self.experiment_dir().join(format!("run-{run}"))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub const MASKS: [usize; 6] = [0, 1, 2, 4, 8, 16];
pub const BALLS: [usize; 2] = [10, 1];
pub const REPRESENTATIONS: [&str; 5] = ["buffer-1", "buffer-5", "buffer-10", "expdecay-5", "sith-5"];
const LONG_RUN_FACTOR: usize = 10;

fn representation(name: &str) -> Option<MemoryConfig> {
    Some(match name {
        "buffer-1" => MemoryConfig::buffer(1),
        "buffer-5" => MemoryConfig::buffer(5),
        "buffer-10" => MemoryConfig::buffer(10),
        "expdecay-5" => MemoryConfig::exp_decay_default(),
        "sith-5" => MemoryConfig::sith_default(),
        _ => return None,
    })
}

/// Names of the shipped presets: `<representation>-mask<M>-balls<B>` for the
/// whole grid, plus `expdecay-5-mask<M>-balls<B>-long` with ten times the epochs.
pub fn preset_names() -> Vec<String> {
    let mut names = Vec::new();
    for rep in REPRESENTATIONS {
        for mask in MASKS {
            for balls in BALLS {
                names.push(format!("{rep}-mask{mask}-balls{balls}"));
            }
        }
    }
    for mask in MASKS {
        for balls in BALLS {
            names.push(format!("expdecay-5-mask{mask}-balls{balls}-long"));
        }
    }
    names
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let (base, long) = match name.strip_suffix("-long") {
        Some(base) => (base, true),
        None => (name, false),
    };
    let (rest, balls) = base.rsplit_once("-balls")?;
    let (rep, mask) = rest.rsplit_once("-mask")?;
    let balls: usize = balls.parse().ok()?;
    let mask: usize = mask.parse().ok()?;
    if !MASKS.contains(&mask) || !BALLS.contains(&balls) || (long && rep != "expdecay-5") {
        return None;
    }
    let memory = representation(rep)?;
    let mut train = TrainConfig {
        session_batch_cap: Some(DESK_BATCH_CAP),
        ..TrainConfig::default()
    };
    if long {
        train.epochs *= LONG_RUN_FACTOR;
    }
    let env = CatchConfig::default().with_mask(mask).with_balls(balls);
    Some(ExperimentConfig::new(name, memory, env, train))
}
