use std::path::Path;

use crate::catch::CatchConfig;
use crate::error::{Error, Result};
use crate::memory::MemoryConfig;
use crate::qnet::{QNetwork, N_ACTIONS};

use super::checkpoint::load_checkpoint;
use super::train::evaluate_policy;

/// Errors unless `net` takes the rendered `memory` of `env` frames and outputs one value per action.
pub fn check_compatible(net: &QNetwork<f32>, memory: &MemoryConfig, env: &CatchConfig) -> Result<()> {
    let expected = memory.n_slices() * env.n_features();
    if net.input_size() != expected || net.output_size() != N_ACTIONS {
        return Err(Error::Shape(format!(
            "checkpoint maps {} inputs to {} outputs; {} on this board needs {expected} inputs and {N_ACTIONS} outputs",
            net.input_size(),
            net.output_size(),
            memory.label(),
        )));
    }
    Ok(())
}

/// Greedy scores of `net` on `n_games` fresh games.
pub fn evaluate_network(
    net: &QNetwork<f32>,
    memory: &MemoryConfig,
    env: &CatchConfig,
    n_games: usize,
    seed: u64,
) -> Result<Vec<i64>> {
    env.validate()?;
    memory.validate()?;
    check_compatible(net, memory, env)?;
    evaluate_policy(net, memory, env, n_games, seed)
}

/// Loads a checkpoint and scores it greedily on `n_games` fresh games.
pub fn evaluate(checkpoint: &Path, memory: &MemoryConfig, env: &CatchConfig, n_games: usize, seed: u64) -> Result<Vec<i64>> {
    evaluate_network(&load_checkpoint(checkpoint)?, memory, env, n_games, seed)
}
