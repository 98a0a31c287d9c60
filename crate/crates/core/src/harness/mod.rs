//! Experiment orchestration: training runs, evaluation, probes, parameter
//! accounting and result persistence.

mod checkpoint;
mod config;
mod evaluate;
mod experiment;
mod params;
mod probes;
mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use config::{preset, preset_names, ExperimentConfig, BALLS, DESK_BATCH_CAP, MASKS, REPRESENTATIONS};
pub use evaluate::{check_compatible, evaluate, evaluate_network};
pub use experiment::{
    execute_run, median, run_artifacts, run_experiment, run_experiment_with, sample_sd, summarize, t_interval,
    ExperimentSummary, Interval, RunSummary, INCOMPLETE_MARKER, METRICS_SCHEMA_VERSION,
};
pub use params::{count_parameters, ParameterCount};
pub use probes::{
    run_probe, write_probe_csv, ProbeCurve, ProbeScenario, COMPARE_IMPULSE_S, COMPARE_RECORD_S, PROBE_DT,
    SWEEP_IMPULSE_S, SWEEP_RECORD_S, SWEEP_SLICE_OFFSETS,
};
pub use train::{
    eval_round_seed, evaluate_policy, final_eval_seed, network_seed, train_run, EvalPoint, Policy, RunOutcome,
    RunSpec,
};
