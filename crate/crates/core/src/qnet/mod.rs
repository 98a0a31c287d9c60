//! Dense Q-network trained by Adagrad on replayed full games.

mod network;
mod replay;

use ndarray::{Array2, ArrayView2};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use network::{
    Activation, Dense, ForwardCache, Gradients, LayerGrad, QNetwork, Real, WeightGrad, N_ACTIONS,
};
pub use replay::{ReplayStore, Trajectory, TrajectoryBuilder, Transition};

use crate::error::{Error, Result};

/// Linear anneal from `start` to `end` over the first `anneal_fraction` of
/// training, then held at `end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_fraction: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.1,
            anneal_fraction: 0.1,
        }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, epoch: usize, total_epochs: usize) -> f64 {
        let span = self.anneal_fraction * total_epochs as f64;
        if span <= 0.0 || epoch as f64 >= span {
            return self.end;
        }
        self.start + (self.end - self.start) * (epoch as f64 / span)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub adagrad_eps: f64,
    /// Replay capacity, in complete games.
    pub replay_capacity: usize,
    pub games_per_session: usize,
    /// One epoch is one played game; a replay session follows every frame.
    pub epochs: usize,
    pub eval_every: usize,
    pub eval_games: usize,
    pub final_eval_games: usize,
    pub epsilon: EpsilonSchedule,
    /// Transitions per session; `None` trains on every transition of the sampled games.
    pub session_batch_cap: Option<usize>,
    /// Treat each scored ball as terminal for bootstrapping.
    pub terminal_on_ball: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            learning_rate: 0.01,
            adagrad_eps: 1e-8,
            replay_capacity: 50,
            games_per_session: 10,
            epochs: 500,
            eval_every: 5,
            eval_games: 100,
            final_eval_games: 1000,
            epsilon: EpsilonSchedule::default(),
            session_batch_cap: Some(256),
            terminal_on_ball: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(0.0..1.0).contains(&self.gamma) {
            return fail("gamma must lie in [0, 1)");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail("learning rate must be positive");
        }
        if !(self.adagrad_eps.is_finite() && self.adagrad_eps >= 0.0) {
            return fail("adagrad epsilon must be non-negative");
        }
        if self.replay_capacity == 0 || self.games_per_session == 0 {
            return fail("replay capacity and games per session must be positive");
        }
        if self.session_batch_cap == Some(0) {
            return fail("session batch cap must be positive");
        }
        if self.eval_every == 0 {
            return fail("eval_every must be positive");
        }
        let e = self.epsilon;
        if ![e.start, e.end].iter().all(|v| (0.0..=1.0).contains(v)) || e.anneal_fraction < 0.0 {
            return fail("epsilon schedule out of range");
        }
        Ok(())
    }
}

/// Index of the largest value, ties going to the lowest index.
pub fn greedy_action<T: PartialOrd + Copy>(qvals: &[T]) -> usize {
    let mut best = 0;
    for (i, q) in qvals.iter().enumerate().skip(1) {
        if *q > qvals[best] {
            best = i;
        }
    }
    best
}

/// Uniform action with probability `epsilon`, otherwise [`greedy_action`].
pub fn epsilon_greedy<T: PartialOrd + Copy, R: Rng>(qvals: &[T], epsilon: f64, rng: &mut R) -> usize {
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..qvals.len())
    } else {
        greedy_action(qvals)
    }
}

/// `y = r` for terminal transitions, `r + gamma * max_a Q(next, a)` otherwise.
pub fn td_targets<T: Real>(rewards: &[T], dones: &[bool], next_q: ArrayView2<T>, gamma: T) -> Vec<T> {
    rewards
        .iter()
        .zip(dones)
        .zip(next_q.rows())
        .map(|((&r, &done), q)| {
            if done {
                r
            } else {
                let best = q.iter().copied().fold(T::neg_infinity(), T::max);
                r + gamma * best
            }
        })
        .collect()
}

/// A training batch of transitions, stacked row-wise.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub observations: Array2<T>,
    pub actions: Vec<usize>,
    pub rewards: Vec<T>,
    pub next_observations: Array2<T>,
    pub dones: Vec<bool>,
}

impl Batch<f32> {
    pub fn from_transitions(transitions: &[Transition<'_>]) -> Result<Self> {
        let width = transitions.first().map(|t| t.observation.len()).ok_or(Error::EmptyReplay)?;
        let mut observations = Array2::zeros((transitions.len(), width));
        let mut next_observations = Array2::zeros((transitions.len(), width));
        for (i, t) in transitions.iter().enumerate() {
            observations.row_mut(i).assign(&ndarray::aview1(t.observation));
            next_observations.row_mut(i).assign(&ndarray::aview1(t.next_observation));
        }
        Ok(Self {
            observations,
            actions: transitions.iter().map(|t| t.action).collect(),
            rewards: transitions.iter().map(|t| t.reward).collect(),
            next_observations,
            dones: transitions.iter().map(|t| t.done).collect(),
        })
    }
}

impl<T: Real> Batch<T> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Targets for a batch using the network's current estimate of the next state.
pub fn q_targets<T: Real>(net: &QNetwork<T>, batch: &Batch<T>, gamma: T) -> Result<Vec<T>> {
    let next_q = net.forward(batch.next_observations.view())?;
    Ok(td_targets(&batch.rewards, &batch.dones, next_q.view(), gamma))
}

/// Mean squared error on the taken actions and its gradient w.r.t. the Q outputs.
pub fn squared_error<T: Real>(q: ArrayView2<T>, actions: &[usize], targets: &[T]) -> (T, Array2<T>) {
    let n = T::from_usize(actions.len()).expect("batch size");
    let two = T::from_f64(2.0).expect("2");
    let mut grad = Array2::zeros(q.dim());
    let mut loss = T::zero();
    for (i, (&a, &y)) in actions.iter().zip(targets).enumerate() {
        let err = q[[i, a]] - y;
        loss += err * err;
        grad[[i, a]] = two * err / n;
    }
    (loss / n, grad)
}

/// One squared-error Adagrad step on a batch; returns the pre-update loss.
pub fn train_on_batch<T: Real>(net: &mut QNetwork<T>, batch: &Batch<T>, gamma: T, lr: T, eps: T) -> Result<T> {
    let targets = q_targets(net, batch, gamma)?;
    let cache = net.forward_cached(batch.observations.view())?;
    let (loss, grad) = squared_error(cache.output().view(), &batch.actions, &targets);
    net.backward_adagrad(&cache, grad.view(), lr, eps)?;
    Ok(loss)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionStats {
    pub loss: f64,
    pub batch_size: usize,
    pub games: usize,
}

/// Gathers the transitions of one replay session: `min(games_per_session, stored)`
/// distinct games, optionally subsampled to `session_batch_cap` transitions.
pub fn sample_session<'a, R: Rng>(
    store: &'a ReplayStore,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<(Vec<Transition<'a>>, usize)> {
    if store.is_empty() {
        return Err(Error::EmptyReplay);
    }
    let n_games = config.games_per_session.min(store.len());
    let mut picked = index::sample(rng, store.len(), n_games).into_vec();
    picked.sort_unstable();
    let all: Vec<Transition<'a>> = picked
        .iter()
        .flat_map(|&g| {
            let game = store.get(g);
            (0..game.len()).map(move |t| game.transition(t))
        })
        .collect();
    let transitions = match config.session_batch_cap {
        Some(cap) if all.len() > cap => {
            let mut keep = index::sample(rng, all.len(), cap).into_vec();
            keep.sort_unstable();
            keep.into_iter().map(|i| all[i]).collect()
        }
        _ => all,
    };
    Ok((transitions, n_games))
}

/// One session of experience replay followed by a single batched update.
pub fn replay_session<R: Rng>(
    store: &ReplayStore,
    net: &mut QNetwork<f32>,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<SessionStats> {
    let (transitions, games) = sample_session(store, config, rng)?;
    if transitions.is_empty() {
        return Err(Error::EmptyReplay);
    }
    let batch = Batch::from_transitions(&transitions)?;
    let loss = train_on_batch(
        net,
        &batch,
        config.gamma as f32,
        config.learning_rate as f32,
        config.adagrad_eps as f32,
    )?;
    Ok(SessionStats {
        loss: loss as f64,
        batch_size: batch.len(),
        games,
    })
}

/// Convenience for stacking `f32` rows into a batch view.
pub fn stack_rows(rows: &[&[f32]]) -> Array2<f32> {
    let width = rows.first().map_or(0, |r| r.len());
    let mut out = Array2::zeros((rows.len(), width));
    for (i, r) in rows.iter().enumerate() {
        out.row_mut(i).assign(&ndarray::aview1(r));
    }
    out
}

#[cfg(test)]
mod tests {
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn greedy_ties_go_low() {
        assert_eq!(greedy_action(&[0.1, 0.9, 0.3]), 1);
        assert_eq!(greedy_action(&[0.5, 0.5, 0.2]), 0);
        assert_eq!(greedy_action(&[0.0f32, 0.0, 0.0]), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(epsilon_greedy(&[0.1, 0.9, 0.3], 0.0, &mut rng), 1);
    }

    #[test]
    fn targets() {
        let next_q: Array2<f64> = array![[0.2, 1.0, -0.5], [0.2, 1.0, -0.5], [3.0, 0.0, 0.0]];
        let y = td_targets(&[1.0, 0.0, 0.5], &[true, false, false], next_q.view(), 0.9);
        assert_eq!(y[0], 1.0);
        assert!((y[1] - 0.9).abs() < 1e-15);
        assert!((y[2] - (0.5 + 2.7)).abs() < 1e-12);
        let y0 = td_targets(&[0.25, -1.0], &[false, false], next_q.view(), 0.0);
        assert_eq!(y0, vec![0.25, -1.0]);
    }

    #[test]
    fn epsilon_schedule_anneals_then_holds() {
        let s = EpsilonSchedule::default();
        assert_eq!(s.value(0, 500), 1.0);
        assert!((s.value(25, 500) - 0.55).abs() < 1e-12);
        assert_eq!(s.value(50, 500), 0.1);
        assert_eq!(s.value(499, 500), 0.1);
    }

    #[test]
    fn squared_error_only_on_taken_action() {
        let q: Array2<f64> = array![[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]];
        let (loss, grad) = squared_error(q.view(), &[2, 0], &[1.0, 1.0]);
        assert!((loss - 2.5).abs() < 1e-15);
        assert_eq!(grad, array![[0.0, 0.0, 2.0], [-1.0, 0.0, 0.0]]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            gamma: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    fn toy_game(len: usize, width: usize, tag: f32) -> Trajectory {
        let mut b = TrajectoryBuilder::new(&vec![tag; width]);
        for t in 0..len {
            b.push(t % 3, if t + 1 == len { 1.0 } else { 0.0 }, &vec![tag + t as f32; width], t + 1 == len)
                .unwrap();
        }
        b.finish()
    }

    #[test]
    fn session_sampling_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let empty = ReplayStore::new(5).unwrap();
        assert!(matches!(sample_session(&empty, &TrainConfig::default(), &mut rng), Err(Error::EmptyReplay)));

        let mut store = ReplayStore::new(50).unwrap();
        store.push(toy_game(7, 2, 0.0));
        let cfg = TrainConfig {
            session_batch_cap: None,
            ..TrainConfig::default()
        };
        let (t, games) = sample_session(&store, &cfg, &mut rng).unwrap();
        assert_eq!((t.len(), games), (7, 1));

        for g in 0..20 {
            store.push(toy_game(180, 2, g as f32));
        }
        let (t, games) = sample_session(&store, &TrainConfig::default(), &mut rng).unwrap();
        assert_eq!((t.len(), games), (256, 10));
    }
}
