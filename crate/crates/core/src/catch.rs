//! Catch and Hidden Catch.
//!
//! A basket on the bottom row of an 18 x 13 binary screen catches balls that
//! fall one row per frame. Hidden Catch zeroes the `mask_rows` rows directly
//! above the bottom row, so the ball vanishes for the last stretch of its fall.
//!
//! Within a step the basket moves first, then the ball advances, then the
//! catch is scored. After a ball is scored on the bottom row, the next one
//! spawns at the top on the following step.

use std::fmt::Write as _;
use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Left = 0,
    Right = 1,
    Noop = 2,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Left, Action::Right, Action::Noop];

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CatchConfig {
    pub rows: usize,
    pub cols: usize,
    pub basket_width: usize,
    pub balls_per_game: usize,
    pub mask_rows: usize,
    pub seed: u64,
}

impl Default for CatchConfig {
    fn default() -> Self {
        Self {
            rows: 18,
            cols: 13,
            basket_width: 3,
            balls_per_game: 10,
            mask_rows: 0,
            seed: 0,
        }
    }
}

impl CatchConfig {
    pub fn with_mask(mut self, mask_rows: usize) -> Self {
        self.mask_rows = mask_rows;
        self
    }

    pub fn with_balls(mut self, balls_per_game: usize) -> Self {
        self.balls_per_game = balls_per_game;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_features(&self) -> usize {
        self.rows * self.cols
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.rows < 2 {
            return fail(format!("need at least 2 rows, got {}", self.rows));
        }
        if self.basket_width == 0 || self.basket_width > self.cols {
            return fail(format!("basket width {} does not fit {} columns", self.basket_width, self.cols));
        }
        if self.balls_per_game == 0 {
            return fail("balls_per_game must be at least 1".into());
        }
        if self.mask_rows > self.rows - 2 {
            return fail(format!("mask of {} rows exceeds {}", self.mask_rows, self.rows - 2));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GameState {
    pub ball_row: usize,
    pub ball_col: usize,
    pub basket_left: usize,
    pub balls_resolved: usize,
    pub catches: usize,
    pub score: i64,
    /// The ball on the bottom row was scored last step; the next step spawns a new one.
    pub awaiting_spawn: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub ball_done: bool,
    pub game_done: bool,
}

/// Zeroes the `mask_rows` rows directly above the bottom row of a row-major frame.
pub fn apply_mask(frame: &mut [f64], rows: usize, cols: usize, mask_rows: usize) {
    let bottom = rows - 1;
    let first = bottom.saturating_sub(mask_rows);
    frame[first * cols..bottom * cols].fill(0.0);
}

#[derive(Debug, Clone)]
pub struct CatchGame {
    config: CatchConfig,
    state: GameState,
    rng: ChaCha8Rng,
}

impl CatchGame {
    /// Starts a game: ball on the top row, basket centered.
    pub fn reset(config: CatchConfig) -> Result<(Self, Vec<f64>)> {
        config.validate()?;
        let mut rng = stream_rng(config.seed, Stream::Environment);
        let ball_col = rng.random_range(0..config.cols);
        let state = GameState {
            ball_row: 0,
            ball_col,
            basket_left: (config.cols - config.basket_width) / 2,
            balls_resolved: 0,
            catches: 0,
            score: 0,
            awaiting_spawn: false,
        };
        let game = Self { config, state, rng };
        let obs = game.observation();
        Ok((game, obs))
    }

    pub fn config(&self) -> &CatchConfig {
        &self.config
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.state.balls_resolved >= self.config.balls_per_game
    }

    pub fn basket_cols(&self) -> std::ops::Range<usize> {
        self.state.basket_left..self.state.basket_left + self.config.basket_width
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::GameFinished);
        }
        let max_left = self.config.cols - self.config.basket_width;
        let st = &mut self.state;
        st.basket_left = match action {
            Action::Left => st.basket_left.saturating_sub(1),
            Action::Right => (st.basket_left + 1).min(max_left),
            Action::Noop => st.basket_left,
        };

        let mut reward = 0.0;
        let mut ball_done = false;
        if st.awaiting_spawn {
            st.ball_row = 0;
            st.ball_col = self.rng.random_range(0..self.config.cols);
            st.awaiting_spawn = false;
        } else {
            st.ball_row += 1;
            if st.ball_row == self.config.rows - 1 {
                let caught = (st.basket_left..st.basket_left + self.config.basket_width).contains(&st.ball_col);
                reward = if caught { 1.0 } else { -1.0 };
                st.catches += caught as usize;
                st.score += reward as i64;
                st.balls_resolved += 1;
                st.awaiting_spawn = true;
                ball_done = true;
            }
        }
        Ok(StepOutcome {
            observation: self.observation(),
            reward,
            ball_done,
            game_done: self.is_done(),
        })
    }

    /// Unmasked board, row-major.
    pub fn raw_frame(&self) -> Vec<f64> {
        let CatchConfig { rows, cols, .. } = self.config;
        let mut frame = vec![0.0; rows * cols];
        let bottom = (rows - 1) * cols;
        for c in self.basket_cols() {
            frame[bottom + c] = 1.0;
        }
        frame[self.state.ball_row * cols + self.state.ball_col] = 1.0;
        frame
    }

    /// Board as the agent sees it.
    pub fn observation(&self) -> Vec<f64> {
        let mut frame = self.raw_frame();
        apply_mask(&mut frame, self.config.rows, self.config.cols, self.config.mask_rows);
        frame
    }

    /// `.` empty, `o` ball, `=` basket, `#` ball in the basket, `~` masked.
    pub fn ascii(&self) -> String {
        let CatchConfig {
            rows, cols, mask_rows, ..
        } = self.config;
        let frame = self.raw_frame();
        let mut out = String::with_capacity(rows * (cols + 1));
        for r in 0..rows {
            let masked = r + 1 + mask_rows >= rows && r + 1 < rows;
            for c in 0..cols {
                let on = frame[r * cols + c] > 0.0;
                let ch = match (r + 1 == rows, on, masked) {
                    (true, true, _) if self.basket_cols().contains(&c) && self.state.ball_row == r && self.state.ball_col == c => '#',
                    (true, true, _) if self.basket_cols().contains(&c) => '=',
                    (_, true, _) => 'o',
                    (_, false, true) => '~',
                    _ => '.',
                };
                out.push(ch);
            }
            out.push('\n');
        }
        let _ = writeln!(out, "score {} balls {}", self.state.score, self.state.balls_resolved);
        out
    }
}

/// One row of the per-step trajectory log.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRow {
    pub step: usize,
    pub ball_row: usize,
    pub ball_col: usize,
    pub basket_col: usize,
    pub action: usize,
    pub reward: f64,
}

/// Plays one game with `policy`, returning the final score and appending the
/// per-step trajectory to `log` when given.
pub fn play_game<P, W>(config: CatchConfig, mut policy: P, log: Option<&mut csv::Writer<W>>) -> Result<i64>
where
    P: FnMut(&CatchGame) -> Action,
    W: Write,
{
    let (mut game, _) = CatchGame::reset(config)?;
    let mut log = log;
    let mut step = 0;
    while !game.is_done() {
        let action = policy(&game);
        let out = game.step(action)?;
        step += 1;
        if let Some(w) = log.as_deref_mut() {
            let st = game.state();
            w.serialize(TrajectoryRow {
                step,
                ball_row: st.ball_row,
                ball_col: st.ball_col,
                basket_col: st.basket_left,
                action: action.index(),
                reward: out.reward,
            })?;
        }
    }
    Ok(game.state().score)
}

/// Mean score of uniformly random play; the chance level for a configuration.
pub fn random_policy_baseline(config: &CatchConfig, n_games: usize) -> Result<f64> {
    if n_games == 0 {
        return Err(Error::InvalidConfig("n_games must be at least 1".into()));
    }
    let mut rng = stream_rng(config.seed, Stream::Exploration);
    let mut total = 0i64;
    for g in 0..n_games {
        let cfg = config.clone().with_seed(derive_seed(config.seed, g as u64));
        total += play_game::<_, std::io::Sink>(cfg, |_| Action::ALL[rng.random_range(0..3)], None)?;
    }
    Ok(total as f64 / n_games as f64)
}

/// Moves the basket center toward the ball column; perfect on visible Catch.
pub fn tracker_action(game: &CatchGame) -> Action {
    let st = game.state();
    let center = st.basket_left + game.config().basket_width / 2;
    if st.awaiting_spawn {
        Action::Noop
    } else if st.ball_col < center {
        Action::Left
    } else if st.ball_col > center {
        Action::Right
    } else {
        Action::Noop
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(frame: &[f64]) -> usize {
        frame.iter().filter(|v| **v == 1.0).count()
    }

    #[test]
    fn reset_places_pieces() {
        let (game, obs) = CatchGame::reset(CatchConfig::default().with_seed(3)).unwrap();
        assert_eq!(obs.len(), 234);
        assert_eq!(ones(&obs), 4);
        assert_eq!(game.state().ball_row, 0);
        assert_eq!(game.basket_cols(), 5..8);
    }

    #[test]
    fn same_seed_same_spawn() {
        let cfg = CatchConfig::default().with_seed(99);
        let (a, _) = CatchGame::reset(cfg.clone()).unwrap();
        let (b, _) = CatchGame::reset(cfg).unwrap();
        assert_eq!(a.state().ball_col, b.state().ball_col);
    }

    #[test]
    fn full_mask_leaves_top_and_bottom() {
        let mut frame = vec![1.0; 234];
        apply_mask(&mut frame, 18, 13, 16);
        for r in 0..18 {
            let visible = frame[r * 13..(r + 1) * 13].iter().all(|v| *v == 1.0);
            assert_eq!(visible, r == 0 || r == 17, "row {r}");
        }
        let mut frame = vec![1.0; 234];
        apply_mask(&mut frame, 18, 13, 0);
        assert!(frame.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn masked_ball_vanishes_then_returns() {
        let cfg = CatchConfig::default().with_mask(4).with_seed(1);
        let (mut game, _) = CatchGame::reset(cfg).unwrap();
        for _ in 0..12 {
            let out = game.step(Action::Noop).unwrap();
            assert_eq!(ones(&out.observation), 4);
        }
        for row in 13..=16 {
            let out = game.step(Action::Noop).unwrap();
            assert_eq!(game.state().ball_row, row);
            assert_eq!(ones(&out.observation[..17 * 13]), 0);
            assert_eq!(ones(&out.observation[17 * 13..]), 3);
        }
        let out = game.step(Action::Noop).unwrap();
        assert!(out.ball_done);
        let bottom = &out.observation[17 * 13..];
        let col = game.state().ball_col;
        assert_eq!(bottom[col], 1.0);
    }

    fn place(game: &mut CatchGame, ball_row: usize, ball_col: usize, basket_left: usize) {
        game.state.ball_row = ball_row;
        game.state.ball_col = ball_col;
        game.state.basket_left = basket_left;
    }

    #[test]
    fn overlap_scores_plus_one() {
        let (mut game, _) = CatchGame::reset(CatchConfig::default()).unwrap();
        place(&mut game, 16, 6, 5);
        let out = game.step(Action::Left).unwrap();
        assert_eq!(out.reward, 1.0);
        assert!(out.ball_done && !out.game_done);
    }

    #[test]
    fn disjoint_scores_minus_one() {
        let (mut game, _) = CatchGame::reset(CatchConfig::default()).unwrap();
        place(&mut game, 16, 0, 10);
        let out = game.step(Action::Noop).unwrap();
        assert_eq!(out.reward, -1.0);
    }

    #[test]
    fn basket_clipped_at_walls() {
        let (mut game, _) = CatchGame::reset(CatchConfig::default()).unwrap();
        for _ in 0..10 {
            game.step(Action::Left).unwrap();
        }
        assert_eq!(game.state().basket_left, 0);
        for _ in 0..15 {
            if !game.is_done() {
                game.step(Action::Right).unwrap();
            }
        }
        assert_eq!(game.state().basket_left, 10);
    }

    #[test]
    fn ten_ball_game_spans_180_frames() {
        let (mut game, _) = CatchGame::reset(CatchConfig::default().with_seed(5)).unwrap();
        let mut steps = 0;
        let mut rewards = 0;
        loop {
            let out = game.step(Action::Noop).unwrap();
            steps += 1;
            rewards += (out.reward != 0.0) as usize;
            if out.game_done {
                break;
            }
        }
        // the reset frame plus 179 steps: 18 frames per ball
        assert_eq!(steps + 1, 180);
        assert_eq!(rewards, 10);
        assert!(matches!(game.step(Action::Noop), Err(Error::GameFinished)));
    }

    #[test]
    fn one_ball_on_board_at_all_times() {
        let (mut game, obs) = CatchGame::reset(CatchConfig::default().with_seed(8)).unwrap();
        assert_eq!(ones(&obs[..17 * 13]), 1);
        while !game.is_done() {
            let out = game.step(Action::Right).unwrap();
            let upper = ones(&out.observation[..17 * 13]);
            let ball_on_bottom = game.state().ball_row == 17;
            assert_eq!(upper, if ball_on_bottom { 0 } else { 1 });
        }
    }

    #[test]
    fn config_validation() {
        assert!(CatchConfig::default().with_mask(16).validate().is_ok());
        assert!(CatchConfig::default().with_mask(17).validate().is_err());
        let wide = CatchConfig {
            basket_width: 14,
            ..CatchConfig::default()
        };
        assert!(wide.validate().is_err());
        assert!(CatchConfig::default().with_balls(0).validate().is_err());
    }

    #[test]
    fn full_width_basket_always_catches() {
        let cfg = CatchConfig {
            basket_width: 13,
            ..CatchConfig::default()
        };
        assert_eq!(random_policy_baseline(&cfg, 20).unwrap(), 10.0);
    }

    #[test]
    fn random_policy_matches_analytic_chance() {
        // The spawn column is uniform and independent of the basket, so every
        // ball is caught with probability width / cols whatever the policy does.
        for (width, balls) in [(1, 10), (3, 10), (3, 1), (5, 10)] {
            let cfg = CatchConfig {
                basket_width: width,
                ..CatchConfig::default().with_balls(balls).with_seed(width as u64)
            };
            let n = 4000;
            let p = width as f64 / 13.0;
            let expected = balls as f64 * (2.0 * p - 1.0);
            let se = (balls as f64 * 4.0 * p * (1.0 - p) / n as f64).sqrt();
            let got = random_policy_baseline(&cfg, n).unwrap();
            assert!((got - expected).abs() < 4.0 * se, "width {width}: {got} vs {expected}");
        }
    }

    #[test]
    fn tracker_is_perfect_on_visible_catch() {
        for seed in 0..20 {
            let cfg = CatchConfig::default().with_seed(seed);
            assert_eq!(play_game::<_, std::io::Sink>(cfg, tracker_action, None).unwrap(), 10);
        }
    }

    #[test]
    fn trajectory_log_columns() {
        let mut w = csv::Writer::from_writer(Vec::new());
        let cfg = CatchConfig::default().with_balls(1);
        play_game(cfg, |_| Action::Noop, Some(&mut w)).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert!(text.starts_with("step,ball_row,ball_col,basket_col,action,reward\n"));
        assert_eq!(text.lines().count(), 1 + 17);
    }

    #[test]
    fn ascii_dump_shape() {
        let (game, _) = CatchGame::reset(CatchConfig::default().with_mask(2)).unwrap();
        let dump = game.ascii();
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines.len(), 19);
        assert_eq!(lines[17].matches('=').count(), 3);
        assert!(lines[15].contains('~') && lines[16].contains('~') && !lines[14].contains('~'));
    }
}
