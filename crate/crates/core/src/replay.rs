//! Fixed-capacity FIFO experience memory with uniform minibatch sampling.

use std::io::{Read, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{Action, LanderEnv, Observation, NUM_ACTIONS, OBS_DIM};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// One experience tuple `(s, a, r, s', done)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_state: Observation,
    pub done: bool,
}

impl Transition {
    pub fn is_valid(&self) -> bool {
        self.action < NUM_ACTIONS
            && self.reward.is_finite()
            && self
                .state
                .iter()
                .chain(&self.next_state)
                .all(|v| v.is_finite())
    }
}

/// Ring buffer of transitions. Once full, each push overwrites the oldest entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    write_cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be at least 1".into()));
        }
        Ok(Self {
            capacity,
            storage: Vec::with_capacity(capacity.min(1 << 20)),
            write_cursor: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.storage.len() == self.capacity
    }

    pub fn write_cursor(&self) -> usize {
        self.write_cursor
    }

    pub fn push(&mut self, t: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.write_cursor] = t;
        }
        self.write_cursor = (self.write_cursor + 1) % self.capacity;
    }

    /// Raw slot access in storage order.
    pub fn get(&self, slot: usize) -> Option<&Transition> {
        self.storage.get(slot)
    }

    /// Stored transitions from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.is_full() { self.write_cursor } else { 0 };
        let (newer, older) = self.storage.split_at(split);
        older.iter().chain(newer.iter())
    }

    /// Fill an empty buffer to capacity with uniformly random rollouts.
    /// Episodes are restarted whenever they end.
    pub fn seed_random(&mut self, env: &mut LanderEnv, seed: u64) -> Result<()> {
        if !self.is_empty() {
            return Err(Error::State(format!(
                "replay buffer already holds {} transitions",
                self.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut episode = 0u64;
        let mut obs = env.reset(derive_seed(seed, &[episode]));
        while !self.is_full() {
            let action = rng.random_range(0..NUM_ACTIONS);
            let res = env.step(Action::try_from(action)?)?;
            self.push(Transition {
                state: obs,
                action,
                reward: res.reward,
                next_state: res.observation,
                done: res.done,
            });
            obs = if res.done {
                episode += 1;
                env.reset(derive_seed(seed, &[episode]))
            } else {
                res.observation
            };
        }
        Ok(())
    }

    /// Slot indices of a uniformly drawn minibatch.
    pub fn sample_indices<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        with_replacement: bool,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        if batch_size > self.len() || (with_replacement && self.is_empty()) {
            return Err(Error::InsufficientData {
                requested: batch_size,
                available: self.len(),
            });
        }
        Ok(if with_replacement {
            (0..batch_size)
                .map(|_| rng.random_range(0..self.len()))
                .collect()
        } else {
            rand::seq::index::sample(rng, self.len(), batch_size).into_vec()
        })
    }

    /// Minibatch drawn uniformly without replacement.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<&Transition>> {
        Ok(self
            .sample_indices(batch_size, false, rng)?
            .into_iter()
            .map(|i| &self.storage[i])
            .collect())
    }

    /// Write a little-endian snapshot: magic, then capacity/count/cursor as
    /// `u64`, then each slot in storage order as 19 `f64` values
    /// (state[8], action, reward, next_state[8], done).
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(SNAPSHOT_MAGIC)?;
        for v in [self.capacity, self.len(), self.write_cursor] {
            out.write_all(&(v as u64).to_le_bytes())?;
        }
        for t in &self.storage {
            let values = t
                .state
                .iter()
                .copied()
                .chain([t.action as f64, t.reward])
                .chain(t.next_state.iter().copied())
                .chain([t.done as u8 as f64]);
            for v in values {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::State("not a replay snapshot".into()));
        }
        let mut word = [0u8; 8];
        let mut next_u64 = |input: &mut R| -> Result<usize> {
            input.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word) as usize)
        };
        let capacity = next_u64(&mut input)?;
        let count = next_u64(&mut input)?;
        let write_cursor = next_u64(&mut input)?;
        if capacity == 0 || count > capacity || write_cursor >= capacity {
            return Err(Error::State("inconsistent replay snapshot header".into()));
        }
        let mut storage = Vec::with_capacity(count);
        let mut values = [0.0; SNAPSHOT_WIDTH];
        for _ in 0..count {
            for v in values.iter_mut() {
                input.read_exact(&mut word)?;
                *v = f64::from_le_bytes(word);
            }
            let mut state = [0.0; OBS_DIM];
            let mut next_state = [0.0; OBS_DIM];
            state.copy_from_slice(&values[..OBS_DIM]);
            next_state.copy_from_slice(&values[OBS_DIM + 2..2 * OBS_DIM + 2]);
            let t = Transition {
                state,
                action: values[OBS_DIM] as usize,
                reward: values[OBS_DIM + 1],
                next_state,
                done: values[SNAPSHOT_WIDTH - 1] != 0.0,
            };
            if !t.is_valid() {
                return Err(Error::State("invalid transition in replay snapshot".into()));
            }
            storage.push(t);
        }
        Ok(Self {
            capacity,
            storage,
            write_cursor,
        })
    }
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"DDQNRPL1";
const SNAPSHOT_WIDTH: usize = 2 * OBS_DIM + 3;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvConfig;

    fn t(id: usize) -> Transition {
        Transition {
            state: [id as f64; OBS_DIM],
            action: id % NUM_ACTIONS,
            reward: id as f64,
            next_state: [id as f64 + 0.5; OBS_DIM],
            done: id.is_multiple_of(3),
        }
    }

    fn ids(buf: &ReplayBuffer) -> Vec<usize> {
        buf.iter_oldest_first().map(|t| t.reward as usize).collect()
    }

    #[test]
    fn capacity_bounds() {
        assert!(ReplayBuffer::new(0).is_err());
        let b = ReplayBuffer::new(120_000).unwrap();
        assert_eq!((b.len(), b.capacity()), (0, 120_000));
        let mut one = ReplayBuffer::new(1).unwrap();
        one.push(t(1));
        one.push(t(2));
        assert_eq!(ids(&one), vec![2]);
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(3).unwrap();
        b.push(t(1));
        assert_eq!(b.len(), 1);
        for i in 2..=4 {
            b.push(t(i));
        }
        assert_eq!(ids(&b), vec![2, 3, 4]);
        assert_eq!(b.get(b.write_cursor()).unwrap().reward, 2.0);

        let mut b = ReplayBuffer::new(2).unwrap();
        for i in 1..=5 {
            b.push(t(i));
        }
        assert_eq!(ids(&b)[0], 4);
    }

    #[test]
    fn exhaustive_sample_and_errors() {
        let mut b = ReplayBuffer::new(64).unwrap();
        for i in 0..64 {
            b.push(t(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut got: Vec<usize> = b
            .sample(64, &mut rng)
            .unwrap()
            .iter()
            .map(|t| t.reward as usize)
            .collect();
        got.sort_unstable();
        assert_eq!(got, (0..64).collect::<Vec<_>>());

        let mut small = ReplayBuffer::new(20).unwrap();
        for i in 0..10 {
            small.push(t(i));
        }
        assert!(matches!(
            small.sample(11, &mut rng),
            Err(Error::InsufficientData {
                requested: 11,
                available: 10
            })
        ));
    }

    #[test]
    fn seed_random_fills_and_repeats() {
        let mut env = LanderEnv::new(EnvConfig::default()).unwrap();
        let mut a = ReplayBuffer::new(100).unwrap();
        a.seed_random(&mut env, 5).unwrap();
        assert_eq!(a.len(), 100);
        assert!(a.iter_oldest_first().all(Transition::is_valid));
        let mut b = ReplayBuffer::new(100).unwrap();
        b.seed_random(&mut env, 5).unwrap();
        assert_eq!(a, b);
        assert!(matches!(a.seed_random(&mut env, 5), Err(Error::State(_))));
    }

    #[test]
    fn snapshot_round_trip() {
        let mut b = ReplayBuffer::new(5).unwrap();
        for i in 0..7 {
            b.push(t(i));
        }
        let mut bytes = Vec::new();
        b.write_snapshot(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 8 + 24 + 5 * SNAPSHOT_WIDTH * 8);
        let back = ReplayBuffer::read_snapshot(bytes.as_slice()).unwrap();
        assert_eq!(back, b);
        assert!(ReplayBuffer::read_snapshot(&b"garbage!"[..]).is_err());
    }
}
