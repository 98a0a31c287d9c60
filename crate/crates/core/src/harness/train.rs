use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::catch::{Action, CatchConfig, CatchGame};
use crate::error::{Error, Result};
use crate::memory::{MemoryConfig, WorkingMemory};
use crate::qnet::{
    epsilon_greedy, greedy_action, replay_session, QNetwork, ReplayStore, TrainConfig, TrajectoryBuilder,
};
use crate::rng::{derive_seed, stream_rng, Stream};

// Tags for sub-seeds derived from a run seed.
const TAG_TRAIN_GAMES: u64 = 0x7472_6169_6e00_0000;
const TAG_EVAL_ROUNDS: u64 = 0x6576_616c_0000_0000;
const TAG_FINAL_EVAL: u64 = 0x6669_6e61_6c00_0000;
const TAG_NETWORK: u64 = 0x6e65_7400_0000_0000;

// Games evaluated side by side in one forward pass.
const EVAL_LANES: usize = 100;

/// Everything one training run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub memory: MemoryConfig,
    pub env: CatchConfig,
    pub train: TrainConfig,
    pub seed: u64,
}

/// Greedy test scores at one point of training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub epoch: usize,
    pub mean_score: f64,
    pub scores: Vec<i64>,
    /// Mean replay loss over the sessions since the previous evaluation.
    pub loss: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub curve: Vec<EvalPoint>,
    pub final_scores: Vec<i64>,
    pub network: QNetwork<f32>,
    /// Mean replay loss per epoch.
    pub epoch_losses: Vec<f64>,
}

impl RunOutcome {
    pub fn final_mean(&self) -> f64 {
        mean(&self.final_scores)
    }
}

pub(crate) fn mean(scores: &[i64]) -> f64 {
    if scores.is_empty() {
        return f64::NAN;
    }
    scores.iter().sum::<i64>() as f64 / scores.len() as f64
}

fn to_f32(src: &[f64], dst: &mut [f32]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d = *s as f32);
}

/// Any greedy decision rule over rendered memory.
pub trait Policy {
    /// One action per row of `observations`.
    fn act(&self, observations: &Array2<f32>) -> Result<Vec<Action>>;
}

impl Policy for QNetwork<f32> {
    fn act(&self, observations: &Array2<f32>) -> Result<Vec<Action>> {
        let q = self.forward(observations.view())?;
        Ok(q.rows()
            .into_iter()
            .map(|row| Action::from_index(greedy_action(row.as_slice().expect("contiguous"))).expect("3 actions"))
            .collect())
    }
}

/// Plays `n_games` fresh games greedily, `EVAL_LANES` at a time in lockstep.
/// Game `g` uses environment seed `derive_seed(seed, g)`.
pub fn evaluate_policy<P: Policy>(
    policy: &P,
    memory: &MemoryConfig,
    env: &CatchConfig,
    n_games: usize,
    seed: u64,
) -> Result<Vec<i64>> {
    let n_features = env.n_features();
    let mut scores = Vec::with_capacity(n_games);
    let mut start = 0;
    while start < n_games {
        let lanes = EVAL_LANES.min(n_games - start);
        let mut games = Vec::with_capacity(lanes);
        let mut memories: Vec<Box<dyn WorkingMemory>> = Vec::with_capacity(lanes);
        for g in start..start + lanes {
            let (game, obs) = CatchGame::reset(env.clone().with_seed(derive_seed(seed, g as u64)))?;
            let mut m = memory.build(n_features)?;
            m.observe(&obs)?;
            games.push(game);
            memories.push(m);
        }
        let width = memories[0].input_size();
        let mut batch = Array2::<f32>::zeros((lanes, width));
        let mut scratch = vec![0.0f64; width];
        while games.iter().any(|g| !g.is_done()) {
            for (mut row, m) in batch.rows_mut().into_iter().zip(&memories) {
                m.render_into(&mut scratch);
                to_f32(&scratch, row.as_slice_mut().expect("contiguous"));
            }
            let actions = policy.act(&batch)?;
            for ((game, m), a) in games.iter_mut().zip(memories.iter_mut()).zip(actions) {
                if !game.is_done() {
                    let out = game.step(a)?;
                    m.observe(&out.observation)?;
                }
            }
        }
        scores.extend(games.iter().map(|g| g.state().score));
        start += lanes;
    }
    Ok(scores)
}

/// Seed of the evaluation round held after `epoch` training games.
pub fn eval_round_seed(run_seed: u64, epoch: usize) -> u64 {
    derive_seed(run_seed ^ TAG_EVAL_ROUNDS, epoch as u64)
}

pub fn final_eval_seed(run_seed: u64) -> u64 {
    derive_seed(run_seed, TAG_FINAL_EVAL)
}

pub fn network_seed(run_seed: u64) -> u64 {
    derive_seed(run_seed, TAG_NETWORK)
}

/// Trains one agent: each epoch plays one epsilon-greedy game, running a
/// replay session after every frame, and stores the game once it ends.
/// The greedy policy is scored on fresh games before training, every
/// `eval_every` epochs, and once more at the end on `final_eval_games` games.
pub fn train_run<F>(spec: &RunSpec, mut on_eval: F) -> Result<RunOutcome>
where
    F: FnMut(&EvalPoint) -> Result<()>,
{
    spec.env.validate()?;
    spec.train.validate()?;
    spec.memory.validate()?;
    let cfg = &spec.train;
    let started = Instant::now();
    let n_features = spec.env.n_features();
    let mut memory = spec.memory.build(n_features)?;
    let width = memory.input_size();
    let mut net = QNetwork::<f32>::for_input(n_features, memory.n_slices(), network_seed(spec.seed))?;
    let mut store = ReplayStore::new(cfg.replay_capacity)?;
    let mut explore_rng = stream_rng(spec.seed, Stream::Exploration);
    let mut replay_rng = stream_rng(spec.seed, Stream::Replay);

    let mut curve = Vec::new();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;

    let mut evaluate = |net: &QNetwork<f32>, epoch: usize, loss: f64| -> Result<EvalPoint> {
        let scores = evaluate_policy(net, &spec.memory, &spec.env, cfg.eval_games, eval_round_seed(spec.seed, epoch))?;
        let point = EvalPoint {
            epoch,
            mean_score: mean(&scores),
            scores,
            loss,
            elapsed_s: started.elapsed().as_secs_f64(),
        };
        on_eval(&point)?;
        Ok(point)
    };

    if cfg.eval_games > 0 {
        curve.push(evaluate(&net, 0, f64::NAN)?);
    }

    let mut rendered = vec![0.0f64; width];
    let mut obs = vec![0.0f32; width];
    let mut next = vec![0.0f32; width];
    for epoch in 0..cfg.epochs {
        let epsilon = cfg.epsilon.value(epoch, cfg.epochs);
        let env = spec.env.clone().with_seed(derive_seed(spec.seed ^ TAG_TRAIN_GAMES, epoch as u64));
        let (mut game, first) = CatchGame::reset(env)?;
        memory.reset();
        memory.observe(&first)?;
        memory.render_into(&mut rendered);
        to_f32(&rendered, &mut obs);
        let mut builder = TrajectoryBuilder::new(&obs);
        let mut epoch_loss = 0.0;
        let mut epoch_sessions = 0usize;
        loop {
            let q = net.forward_one(ndarray::aview1(&obs))?;
            let action = epsilon_greedy(q.as_slice().expect("contiguous"), epsilon, &mut explore_rng);
            let out = game.step(Action::from_index(action).expect("valid action"))?;
            memory.observe(&out.observation)?;
            memory.render_into(&mut rendered);
            to_f32(&rendered, &mut next);
            let terminal = out.game_done || (cfg.terminal_on_ball && out.ball_done);
            builder.push(action, out.reward as f32, &next, terminal)?;

            if !store.is_empty() {
                let stats = replay_session(&store, &mut net, cfg, &mut replay_rng)?;
                if !stats.loss.is_finite() {
                    return Err(Error::Divergence(format!("loss {} at epoch {epoch}", stats.loss)));
                }
                epoch_loss += stats.loss;
                epoch_sessions += 1;
            }
            std::mem::swap(&mut obs, &mut next);
            if out.game_done {
                break;
            }
        }
        store.push(builder.finish());
        let epoch_mean = if epoch_sessions > 0 {
            epoch_loss / epoch_sessions as f64
        } else {
            f64::NAN
        };
        epoch_losses.push(epoch_mean);
        if epoch_sessions > 0 {
            loss_sum += epoch_loss;
            loss_count += epoch_sessions;
        }
        if !net.is_finite() {
            return Err(Error::Divergence(format!("non-finite parameters after epoch {epoch}")));
        }
        if cfg.eval_games > 0 && (epoch + 1) % cfg.eval_every == 0 {
            let loss = if loss_count > 0 { loss_sum / loss_count as f64 } else { f64::NAN };
            curve.push(evaluate(&net, epoch + 1, loss)?);
            loss_sum = 0.0;
            loss_count = 0;
        }
    }

    let final_scores = evaluate_policy(&net, &spec.memory, &spec.env, cfg.final_eval_games, final_eval_seed(spec.seed))?;
    Ok(RunOutcome {
        curve,
        final_scores,
        network: net,
        epoch_losses,
    })
}
