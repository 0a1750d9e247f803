//! Training loop, greedy evaluation and episode statistics.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::agent::{epsilon, rng_from_seed, Agent, AgentConfig, EpsilonBasis};
use crate::env::{Action, EnvConfig, LanderEnv, Outcome};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::nn::{argmax, MlpParams};
use crate::replay::{ReplayBuffer, Transition};
use crate::seed::{derive_seed, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub cumulative_reward: f64,
    pub steps: usize,
    pub epsilon: f64,
    pub outcome: Outcome,
    pub mean_loss: f64,
}

/// What happened on one action step of training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvent {
    pub episode: usize,
    pub step_in_episode: usize,
    pub action_steps: u64,
    pub epsilon: f64,
    pub action: usize,
    pub reward: f64,
    pub loss: f64,
    pub synced: bool,
}

/// Hooks into [`train_with`]. Both methods default to no-ops.
pub trait TrainObserver {
    fn on_step(&mut self, _event: &StepEvent) {}
    fn on_episode(&mut self, _stats: &EpisodeStats, _agent: &Agent) {}
}

impl TrainObserver for () {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub master: u64,
    pub network_init: u64,
    pub replay_seed: u64,
    pub policy: u64,
    pub sampling: u64,
}

impl RunSeeds {
    pub fn derive(master: u64) -> Self {
        Self {
            master,
            network_init: derive_seed(master, &[stream::NETWORK_INIT]),
            replay_seed: derive_seed(master, &[stream::REPLAY_SEED]),
            policy: derive_seed(master, &[stream::POLICY]),
            sampling: derive_seed(master, &[stream::SAMPLING]),
        }
    }

    pub fn episode_reset(&self, episode: usize) -> u64 {
        derive_seed(self.master, &[stream::EPISODE_RESET, episode as u64])
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub stats: Vec<EpisodeStats>,
    pub ma10: Vec<f64>,
    pub ma100: Vec<f64>,
    pub agent: Agent,
    pub config: AgentConfig,
    pub env_config: EnvConfig,
    pub seeds: RunSeeds,
    pub duration_secs: f64,
}

/// Serializable digest of a [`RunResult`]. Wall-clock time is left out so
/// that identical runs produce identical digests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub agent: AgentConfig,
    pub env: EnvConfig,
    pub seeds: RunSeeds,
    pub episodes: usize,
    pub action_steps: u64,
    pub final_ma10: Option<f64>,
    pub final_ma100: Option<f64>,
    pub solved: bool,
    pub landed: usize,
    pub crashed: usize,
}

impl RunResult {
    pub fn rewards(&self) -> Vec<f64> {
        self.stats.iter().map(|s| s.cumulative_reward).collect()
    }

    pub fn summary(&self) -> RunSummary {
        let count = |o: Outcome| self.stats.iter().filter(|s| s.outcome == o).count();
        let final_ma100 = self.ma100.last().copied();
        RunSummary {
            agent: self.config.clone(),
            env: self.env_config.clone(),
            seeds: self.seeds.clone(),
            episodes: self.stats.len(),
            action_steps: self.agent.action_steps(),
            final_ma10: self.ma10.last().copied(),
            final_ma100,
            solved: self.stats.len() >= 100 && final_ma100.is_some_and(crate::env::is_solved),
            landed: count(Outcome::Landed),
            crashed: count(Outcome::Crashed),
        }
    }

    /// `episode,steps,reward,epsilon,ma10,ma100`, one row per episode.
    pub fn write_log_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{LOG_HEADER}")?;
        for ((s, a10), a100) in self.stats.iter().zip(&self.ma10).zip(&self.ma100) {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                s.episode, s.steps, s.cumulative_reward, s.epsilon, a10, a100
            )?;
        }
        Ok(())
    }
}

pub const LOG_HEADER: &str = "episode,steps,reward,epsilon,ma10,ma100";

/// Trailing mean over up to `window` entries; early entries average what is
/// available.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::Argument(
            "moving-average window must be at least 1".into(),
        ));
    }
    Ok((0..series.len())
        .map(|i| {
            let slice = &series[(i + 1).saturating_sub(window)..=i];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect())
}

/// Environment config with the agent's per-episode step cap applied.
fn capped_env_config(config: &AgentConfig, env_config: &EnvConfig) -> EnvConfig {
    let mut cfg = env_config.clone();
    cfg.max_steps = cfg.max_steps.min(config.max_steps_per_episode);
    cfg
}

pub fn train(config: &AgentConfig, env_config: &EnvConfig, seed: u64) -> Result<RunResult> {
    train_with(config, env_config, seed, &mut ())
}

/// Seed the replay memory to capacity, then run `config.episodes` episodes,
/// taking one learning step and one sync check per action step.
pub fn train_with<O: TrainObserver + ?Sized>(
    config: &AgentConfig,
    env_config: &EnvConfig,
    seed: u64,
    observer: &mut O,
) -> Result<RunResult> {
    config.validate()?;
    let started = Instant::now();
    let seeds = RunSeeds::derive(seed);
    let mut env = LanderEnv::new(capped_env_config(config, env_config))?;
    let mut agent = Agent::new(config, seeds.network_init)?;
    let mut buffer = ReplayBuffer::new(config.memory_capacity)?;
    buffer.seed_random(&mut env, seeds.replay_seed)?;
    let mut policy_rng = rng_from_seed(seeds.policy);
    let mut sample_rng = rng_from_seed(seeds.sampling);

    let mut stats = Vec::with_capacity(config.episodes);
    for episode in 1..=config.episodes {
        let n = agent.begin_episode();
        let episode_eps = epsilon(n, config.lambda)?;
        let mut obs = env.reset(seeds.episode_reset(episode));
        let mut total = 0.0;
        let mut loss_sum = 0.0;
        let mut steps = 0usize;
        let mut eps;
        loop {
            let at = |e: Error| Error::Training {
                episode,
                step: steps + 1,
                source: Box::new(e),
            };
            eps = match config.epsilon_basis {
                EpsilonBasis::Episode => episode_eps,
                EpsilonBasis::Step => {
                    epsilon(agent.action_steps() + 1, config.lambda).map_err(at)?
                }
            };
            let action = agent
                .select_action(&obs, eps, &mut policy_rng)
                .map_err(at)?;
            let res = env
                .step(Action::try_from(action).map_err(at)?)
                .map_err(at)?;
            buffer.push(Transition {
                state: obs,
                action,
                reward: res.reward,
                next_state: res.observation,
                done: res.done,
            });
            let action_steps = agent.record_action_step();
            let loss = agent
                .learn_step(&buffer, config, &mut sample_rng)
                .map_err(at)?;
            let synced = agent.maybe_sync_target(config);
            steps += 1;
            total += res.reward;
            loss_sum += loss;
            observer.on_step(&StepEvent {
                episode,
                step_in_episode: steps,
                action_steps,
                epsilon: eps,
                action,
                reward: res.reward,
                loss,
                synced,
            });
            if res.done {
                break;
            }
            obs = res.observation;
        }
        let s = EpisodeStats {
            episode,
            cumulative_reward: total,
            steps,
            epsilon: eps,
            outcome: env.outcome(),
            mean_loss: loss_sum / steps as f64,
        };
        observer.on_episode(&s, &agent);
        stats.push(s);
    }

    let rewards: Vec<f64> = stats.iter().map(|s| s.cumulative_reward).collect();
    Ok(RunResult {
        ma10: moving_average(&rewards, 10)?,
        ma100: moving_average(&rewards, 100)?,
        stats,
        agent,
        config: config.clone(),
        env_config: env_config.clone(),
        seeds,
        duration_secs: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mean: f64,
    pub std: f64,
    pub rewards: Vec<f64>,
    pub steps: Vec<usize>,
    pub outcomes: Vec<Outcome>,
}

/// Seed of greedy evaluation trial `trial` under master seed `seed`.
pub fn eval_trial_seed(seed: u64, trial: usize) -> u64 {
    derive_seed(seed, &[stream::EVALUATION, trial as u64])
}

/// Run one greedy episode and return (reward, steps, outcome).
pub fn greedy_episode(
    params: &MlpParams,
    env_config: &EnvConfig,
    reset_seed: u64,
) -> Result<(f64, usize, Outcome)> {
    let mut env = LanderEnv::new(env_config.clone())?;
    let mut obs = env.reset(reset_seed);
    let mut total = 0.0;
    let mut steps = 0;
    loop {
        let action = argmax(&params.forward(&obs)?);
        let res = env.step(Action::try_from(action)?)?;
        total += res.reward;
        steps += 1;
        if res.done {
            return Ok((total, steps, res.outcome));
        }
        obs = res.observation;
    }
}

/// Greedy (epsilon = 0) rollouts with no learning. Each trial has its own
/// environment and seed, so the result does not depend on `exec`.
pub fn evaluate(
    params: &MlpParams,
    env_config: &EnvConfig,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<EvalResult> {
    if trials == 0 {
        return Err(Error::Argument(
            "evaluation needs at least one trial".into(),
        ));
    }
    env_config.validate()?;
    let runs = map_indexed(trials, exec, |i| {
        greedy_episode(params, env_config, eval_trial_seed(seed, i))
    });
    let mut rewards = Vec::with_capacity(trials);
    let mut steps = Vec::with_capacity(trials);
    let mut outcomes = Vec::with_capacity(trials);
    for run in runs {
        let (r, s, o) = run?;
        rewards.push(r);
        steps.push(s);
        outcomes.push(o);
    }
    let (mean, std) = mean_std(&rewards);
    Ok(EvalResult {
        mean,
        std,
        rewards,
        steps,
        outcomes,
    })
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean reward of a uniformly random policy over `trials` episodes.
pub fn random_policy_baseline(
    env_config: &EnvConfig,
    trials: usize,
    seed: u64,
) -> Result<EvalResult> {
    if trials == 0 {
        return Err(Error::Argument("baseline needs at least one trial".into()));
    }
    let mut env = LanderEnv::new(env_config.clone())?;
    let mut rng = rng_from_seed(derive_seed(seed, &[stream::POLICY]));
    let mut rewards = Vec::with_capacity(trials);
    let mut steps = Vec::with_capacity(trials);
    let mut outcomes = Vec::with_capacity(trials);
    for trial in 0..trials {
        env.reset(eval_trial_seed(seed, trial));
        let mut total = 0.0;
        let mut n = 0;
        loop {
            let a = rand::Rng::random_range(&mut rng, 0..crate::env::NUM_ACTIONS);
            let res = env.step(Action::try_from(a)?)?;
            total += res.reward;
            n += 1;
            if res.done {
                outcomes.push(res.outcome);
                break;
            }
        }
        rewards.push(total);
        steps.push(n);
    }
    let (mean, std) = mean_std(&rewards);
    Ok(EvalResult {
        mean,
        std,
        rewards,
        steps,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> AgentConfig {
        AgentConfig {
            episodes: 3,
            memory_capacity: 200,
            batch_size: 8,
            target_sync_steps: 50,
            hidden: [8, 8],
            ..AgentConfig::default()
        }
    }

    #[test]
    fn moving_average_cases() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(moving_average(&s, 1).unwrap(), s.to_vec());
        assert_eq!(moving_average(&s, 5).unwrap()[4], 3.0);
        assert_eq!(
            moving_average(&s, 2).unwrap(),
            vec![1.0, 1.5, 2.5, 3.5, 4.5]
        );
        assert_eq!(moving_average(&[7.5; 20], 6).unwrap(), vec![7.5; 20]);
        assert!(moving_average(&s, 0).is_err());
        assert!(moving_average(&[], 3).unwrap().is_empty());
    }

    #[test]
    fn zero_episodes_is_valid() {
        let cfg = AgentConfig {
            episodes: 0,
            ..tiny()
        };
        let run = train(&cfg, &EnvConfig::default(), 1).unwrap();
        assert!(run.stats.is_empty() && run.ma10.is_empty() && run.ma100.is_empty());
        assert_eq!(run.agent.action_steps(), 0);
        assert!(run.agent.online().is_finite());
    }

    #[test]
    fn training_is_deterministic_and_counts_steps() {
        let env = EnvConfig::default();
        let a = train(&tiny(), &env, 9).unwrap();
        let b = train(&tiny(), &env, 9).unwrap();
        let bits = |r: &RunResult| r.rewards().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.agent, b.agent);
        let steps: usize = a.stats.iter().map(|s| s.steps).sum();
        assert_eq!(steps as u64, a.agent.action_steps());
        assert_eq!(a.ma10.len(), a.stats.len());
        for (i, s) in a.stats.iter().enumerate() {
            assert_eq!(s.epsilon, epsilon(i as u64 + 1, 0.5).unwrap());
        }
    }

    #[test]
    fn step_basis_epsilon() {
        let cfg = AgentConfig {
            epsilon_basis: EpsilonBasis::Step,
            ..tiny()
        };
        struct Check(u64);
        impl TrainObserver for Check {
            fn on_step(&mut self, e: &StepEvent) {
                assert_eq!(e.epsilon, epsilon(e.action_steps, 0.5).unwrap());
                self.0 += 1;
            }
        }
        let mut check = Check(0);
        let run = train_with(&cfg, &EnvConfig::default(), 2, &mut check).unwrap();
        assert_eq!(check.0, run.agent.action_steps());
    }

    #[test]
    fn evaluation_is_pure_and_repeatable() {
        let run = train(&tiny(), &EnvConfig::default(), 4).unwrap();
        let params = run.agent.online().clone();
        let env = EnvConfig::default();
        let a = evaluate(&params, &env, 5, 3, Execution::Sequential).unwrap();
        let b = evaluate(&params, &env, 5, 3, Execution::Parallel { threads: 2 }).unwrap();
        assert_eq!(a, b);
        assert_eq!(&params, run.agent.online());
        assert_eq!(a.rewards.len(), 5);
        assert!(evaluate(&params, &env, 0, 3, Execution::Sequential).is_err());
    }

    #[test]
    fn log_csv_layout() {
        let run = train(&tiny(), &EnvConfig::default(), 4).unwrap();
        let mut out = Vec::new();
        run.write_log_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], LOG_HEADER);
        assert_eq!(lines.len(), 4);
        let first: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(first[2], run.stats[0].cumulative_reward);
    }
}
