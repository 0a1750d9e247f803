use std::collections::{HashSet, VecDeque};

use ddqn_core::env::{EnvConfig, LanderEnv, NUM_ACTIONS, OBS_DIM};
use ddqn_core::{ReplayBuffer, Transition};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tagged(id: usize) -> Transition {
    Transition {
        state: [id as f64; OBS_DIM],
        action: id % NUM_ACTIONS,
        reward: id as f64,
        next_state: [0.0; OBS_DIM],
        done: false,
    }
}

proptest! {
    #[test]
    fn fifo_matches_list_model(capacity in 1usize..40, pushes in 0usize..200) {
        let mut buf = ReplayBuffer::new(capacity).unwrap();
        let mut model = VecDeque::new();
        for id in 0..pushes {
            buf.push(tagged(id));
            model.push_back(id);
            if model.len() > capacity {
                model.pop_front();
            }
            prop_assert_eq!(buf.len(), model.len());
        }
        let got: Vec<usize> = buf.iter_oldest_first().map(|t| t.reward as usize).collect();
        prop_assert_eq!(got, model.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn sample_is_distinct_and_read_only(count in 1usize..80, seed in any::<u64>()) {
        let mut buf = ReplayBuffer::new(100).unwrap();
        for id in 0..count {
            buf.push(tagged(id));
        }
        let snapshot = buf.clone();
        let batch = (count / 2).max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let drawn = buf.sample(batch, &mut rng).unwrap();
        let ids: HashSet<usize> = drawn.iter().map(|t| t.reward as usize).collect();
        prop_assert_eq!(ids.len(), batch);
        prop_assert_eq!(&buf, &snapshot);
    }
}

#[test]
fn with_replacement_mode_allows_repeats() {
    let mut buf = ReplayBuffer::new(4).unwrap();
    for id in 0..4 {
        buf.push(tagged(id));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let idx = buf.sample_indices(4, true, &mut rng).unwrap();
    assert_eq!(idx.len(), 4);
    let repeats = (0..200)
        .filter(|_| {
            let s = buf.sample_indices(4, true, &mut rng).unwrap();
            s.iter().collect::<HashSet<_>>().len() < 4
        })
        .count();
    assert!(repeats > 0);
}

#[test]
fn seeded_buffer_replays_environment() {
    let cfg = EnvConfig::default();
    let mut env = LanderEnv::new(cfg.clone()).unwrap();
    let mut buf = ReplayBuffer::new(300).unwrap();
    buf.seed_random(&mut env, 11).unwrap();
    assert!(buf.iter_oldest_first().all(Transition::is_valid));

    // Re-run every stored transition from its own state and action would
    // need the full physics state, so instead check episode chaining: each
    // non-terminal transition's next state is the following state.
    let all: Vec<&Transition> = buf.iter_oldest_first().collect();
    for pair in all.windows(2) {
        if !pair[0].done {
            assert_eq!(pair[0].next_state, pair[1].state);
        } else {
            assert_eq!(pair[1].state[6], 0.0);
            assert_eq!(pair[1].state[7], 0.0);
        }
    }
    assert!(
        all.iter().any(|t| t.done),
        "300 random steps should end an episode"
    );
}
