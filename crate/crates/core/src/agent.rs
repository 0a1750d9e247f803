//! Double deep Q-learning agent: epsilon-greedy acting, bootstrap targets,
//! masked squared-error updates and periodic target-network sync.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Observation, NUM_ACTIONS, OBS_DIM};
use crate::error::{Error, Result};
use crate::nn::{argmax, LayerSpec, MlpParams};
use crate::optim::{sgd_step, AdamaxState, OptimizerKind};
use crate::replay::{ReplayBuffer, Transition};

/// How the bootstrap value of the next state is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMode {
    /// `r + gamma * Q_target(s', argmax_a Q_online(s', a))`
    #[default]
    Double,
    /// `r + gamma * max_a Q_target(s', a)`
    Max,
}

/// Whether exploration decays with the episode index or the global step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsilonBasis {
    #[default]
    Episode,
    Step,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub episodes: usize,
    pub memory_capacity: usize,
    pub batch_size: usize,
    pub target_sync_steps: u64,
    pub hidden: [usize; 2],
    pub learning_rate: f64,
    pub target_mode: TargetMode,
    pub epsilon_basis: EpsilonBasis,
    pub max_steps_per_episode: usize,
    pub sample_with_replacement: bool,
    pub optimizer: OptimizerKind,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.5,
            episodes: 1000,
            memory_capacity: 120_000,
            batch_size: 64,
            target_sync_steps: 1200,
            hidden: [128, 256],
            learning_rate: 0.002,
            target_mode: TargetMode::Double,
            epsilon_basis: EpsilonBasis::Episode,
            max_steps_per_episode: 1000,
            sample_with_replacement: false,
            optimizer: OptimizerKind::Adamax,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return fail(format!("lambda must lie in (0, 1], got {}", self.lambda));
        }
        if self.memory_capacity == 0 || self.batch_size == 0 {
            return fail("memory_capacity and batch_size must be positive".into());
        }
        if self.batch_size > self.memory_capacity {
            return fail(format!(
                "batch_size {} exceeds memory_capacity {}",
                self.batch_size, self.memory_capacity
            ));
        }
        if self.target_sync_steps == 0 {
            return fail("target_sync_steps must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if self.max_steps_per_episode == 0 {
            return fail("max_steps_per_episode must be at least 1".into());
        }
        self.layer_spec().map(|_| ())
    }

    pub fn layer_spec(&self) -> Result<LayerSpec> {
        LayerSpec::two_hidden(OBS_DIM, self.hidden[0], self.hidden[1], NUM_ACTIONS)
    }
}

/// Exploration rate `min(1, lambda / sqrt(n))` for a 1-based index `n`.
pub fn epsilon(n: u64, lambda: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Argument("epsilon index is 1-based".into()));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Argument(format!(
            "lambda must lie in (0, 1], got {lambda}"
        )));
    }
    Ok((lambda / (n as f64).sqrt()).min(1.0))
}

/// Bootstrap targets for a batch of transitions.
pub fn compute_targets(
    batch: &[&Transition],
    online: &MlpParams,
    target: &MlpParams,
    gamma: f64,
    mode: TargetMode,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::Argument("batch must be non-empty".into()));
    }
    if online.spec() != target.spec() {
        return Err(Error::Config(
            "online and target networks differ in shape".into(),
        ));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Argument(format!(
            "gamma must lie in [0, 1], got {gamma}"
        )));
    }
    let next: Vec<f64> = batch.iter().flat_map(|t| t.next_state).collect();
    let q_target = target.forward_batch(&next, batch.len())?;
    let q_online = match mode {
        TargetMode::Double => Some(online.forward_batch(&next, batch.len())?),
        TargetMode::Max => None,
    };
    let width = online.spec().output_width();

    Ok(batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if t.done {
                return t.reward;
            }
            let row = &q_target[i * width..(i + 1) * width];
            let bootstrap = match &q_online {
                Some(q) => row[argmax(&q[i * width..(i + 1) * width])],
                None => row.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            };
            t.reward + gamma * bootstrap
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub(crate) online: MlpParams,
    pub(crate) target: MlpParams,
    pub(crate) opt: AdamaxState,
    pub(crate) action_steps: u64,
    pub(crate) episode_index: u64,
    pub(crate) last_sync: u64,
}

impl Agent {
    pub fn new(config: &AgentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let online = MlpParams::init(&config.layer_spec()?, seed);
        Ok(Self::from_online(online))
    }

    /// Fresh agent whose target network is a copy of `online`.
    pub fn from_online(online: MlpParams) -> Self {
        Self {
            target: online.clone(),
            opt: AdamaxState::new(&online),
            online,
            action_steps: 0,
            episode_index: 0,
            last_sync: 0,
        }
    }

    pub(crate) fn from_parts(
        online: MlpParams,
        target: MlpParams,
        opt: AdamaxState,
        action_steps: u64,
        episode_index: u64,
    ) -> Result<Self> {
        if online.spec() != target.spec() || !opt.matches(&online) {
            return Err(Error::Config("agent parts disagree in shape".into()));
        }
        Ok(Self {
            online,
            target,
            opt,
            action_steps,
            episode_index,
            last_sync: action_steps,
        })
    }

    pub fn online(&self) -> &MlpParams {
        &self.online
    }

    pub fn online_mut(&mut self) -> &mut MlpParams {
        &mut self.online
    }

    pub fn target(&self) -> &MlpParams {
        &self.target
    }

    pub fn optimizer(&self) -> &AdamaxState {
        &self.opt
    }

    pub fn action_steps(&self) -> u64 {
        self.action_steps
    }

    pub fn episode_index(&self) -> u64 {
        self.episode_index
    }

    pub(crate) fn begin_episode(&mut self) -> u64 {
        self.episode_index += 1;
        self.episode_index
    }

    pub(crate) fn record_action_step(&mut self) -> u64 {
        self.action_steps += 1;
        self.action_steps
    }

    pub fn greedy_action(&self, observation: &Observation) -> Result<usize> {
        Ok(argmax(&self.online.forward(observation)?))
    }

    /// Epsilon-greedy choice: uniform over actions with probability
    /// `epsilon`, otherwise greedy on the online network.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        observation: &Observation,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<usize> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Argument(format!(
                "epsilon must lie in [0, 1], got {epsilon}"
            )));
        }
        if rng.random::<f64>() < epsilon {
            Ok(rng.random_range(0..NUM_ACTIONS))
        } else {
            self.greedy_action(observation)
        }
    }

    /// Sample one minibatch, regress the online network toward the
    /// bootstrap targets and return the loss measured before the update.
    pub fn learn_step<R: Rng + ?Sized>(
        &mut self,
        buffer: &ReplayBuffer,
        config: &AgentConfig,
        rng: &mut R,
    ) -> Result<f64> {
        let slots =
            buffer.sample_indices(config.batch_size, config.sample_with_replacement, rng)?;
        let batch: Vec<&Transition> = slots
            .iter()
            .map(|&i| buffer.get(i).expect("sampled slot exists"))
            .collect();
        let targets = compute_targets(
            &batch,
            &self.online,
            &self.target,
            config.gamma,
            config.target_mode,
        )?;
        let inputs: Vec<f64> = batch.iter().flat_map(|t| t.state).collect();
        let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
        let (loss, grads) = self.online.masked_mse(&inputs, &targets, &actions)?;
        match config.optimizer {
            OptimizerKind::Adamax => {
                self.opt
                    .step(&mut self.online, &grads, config.learning_rate)?
            }
            OptimizerKind::Sgd => sgd_step(&mut self.online, &grads, config.learning_rate)?,
        }
        Ok(loss)
    }

    /// Copy the online weights into the target network when the global
    /// action-step count has just reached a multiple of the sync period.
    pub fn maybe_sync_target(&mut self, config: &AgentConfig) -> bool {
        let c = config.target_sync_steps.max(1);
        if self.action_steps == 0
            || !self.action_steps.is_multiple_of(c)
            || self.last_sync == self.action_steps
        {
            return false;
        }
        self.target
            .copy_from(&self.online)
            .expect("online and target share a spec");
        self.last_sync = self.action_steps;
        true
    }
}

/// Deterministic generator for an agent-facing stream.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
