use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sith::catch::CatchConfig;
use sith::harness::{train_run, RunSpec};
use sith::memory::MemoryConfig;
use sith::qnet::{epsilon_greedy, replay_session, ReplayStore, TrainConfig, TrajectoryBuilder, QNetwork};

proptest! {
    #[test]
    fn greedy_choice_ignores_constant_shift(
        q in prop::collection::vec(-64i32..64, 3),
        shift in -1024i32..1024,
    ) {
        // Eighths keep every sum exact in f64.
        let q: Vec<f64> = q.iter().map(|v| *v as f64 / 8.0).collect();
        let shifted: Vec<f64> = q.iter().map(|v| v + shift as f64 / 8.0).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        prop_assert_eq!(epsilon_greedy(&q, 0.0, &mut rng), epsilon_greedy(&shifted, 0.0, &mut rng));
    }
}

#[test]
fn training_leaves_stored_games_untouched() {
    let width = 12;
    let mut store = ReplayStore::new(10).unwrap();
    for g in 0..6 {
        let mut b = TrajectoryBuilder::new(&vec![0.0; width]);
        for t in 0..15 {
            let obs: Vec<f32> = (0..width).map(|j| ((j + t + g) % 4) as f32).collect();
            b.push(t % 3, if t == 14 { 1.0 } else { 0.0 }, &obs, t == 14).unwrap();
        }
        store.push(b.finish());
    }
    let digests: Vec<_> = store.iter().map(|g| g.digest()).collect();
    let mut net = QNetwork::<f32>::new(&[width, 8, 8, 3], 1).unwrap();
    let cfg = TrainConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..25 {
        replay_session(&store, &mut net, &cfg, &mut rng).unwrap();
    }
    let after: Vec<_> = store.iter().map(|g| g.digest()).collect();
    assert_eq!(digests, after);
}

fn tiny_spec(seed: u64) -> RunSpec {
    RunSpec {
        memory: MemoryConfig::buffer(1),
        env: CatchConfig::default().with_balls(2),
        train: TrainConfig {
            epochs: 4,
            eval_every: 2,
            eval_games: 5,
            final_eval_games: 5,
            session_batch_cap: Some(16),
            ..TrainConfig::default()
        },
        seed,
    }
}

#[test]
fn fixed_seed_gives_identical_training() {
    let a = train_run(&tiny_spec(11), |_| Ok(())).unwrap();
    let b = train_run(&tiny_spec(11), |_| Ok(())).unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.epoch_losses), bits(&b.epoch_losses));
    assert_eq!(a.final_scores, b.final_scores);
    assert_eq!(a.network, b.network);
    let c = train_run(&tiny_spec(12), |_| Ok(())).unwrap();
    assert_ne!(bits(&a.epoch_losses), bits(&c.epoch_losses));
}
