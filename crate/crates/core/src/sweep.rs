//! Grid sweeps over agent hyperparameters.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::harness::{evaluate, train};
use crate::seed::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisName {
    Gamma,
    Lambda,
    LearningRate,
    BatchSize,
    TargetSync,
    Memory,
    Episodes,
    Hidden,
}

impl AxisName {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisName::Gamma => "gamma",
            AxisName::Lambda => "lambda",
            AxisName::LearningRate => "lr",
            AxisName::BatchSize => "batch_size",
            AxisName::TargetSync => "sync",
            AxisName::Memory => "memory",
            AxisName::Episodes => "episodes",
            AxisName::Hidden => "hidden",
        }
    }
}

impl FromStr for AxisName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gamma" => AxisName::Gamma,
            "lambda" => AxisName::Lambda,
            "lr" | "learning_rate" => AxisName::LearningRate,
            "batch_size" => AxisName::BatchSize,
            "sync" | "target_sync_steps" => AxisName::TargetSync,
            "memory" | "memory_capacity" => AxisName::Memory,
            "episodes" => AxisName::Episodes,
            "hidden" => AxisName::Hidden,
            other => return Err(Error::Config(format!("unknown sweep axis '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AxisValue {
    Real(f64),
    Count(u64),
    Hidden(usize, usize),
}

impl AxisValue {
    fn key_bits(self) -> [u64; 2] {
        match self {
            AxisValue::Real(v) => [v.to_bits(), 0],
            AxisValue::Count(n) => [n, 1],
            AxisValue::Hidden(a, b) => [((a as u64) << 32) ^ b as u64, 2],
        }
    }
}

impl fmt::Display for AxisValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisValue::Real(v) => write!(f, "{v}"),
            AxisValue::Count(n) => write!(f, "{n}"),
            AxisValue::Hidden(a, b) => write!(f, "{a}x{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: AxisName,
    pub values: Vec<AxisValue>,
}

impl Axis {
    pub fn new(name: AxisName, values: Vec<AxisValue>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config(format!(
                "axis '{}' has no values",
                name.as_str()
            )));
        }
        for v in &values {
            let ok = matches!(
                (name, v),
                (
                    AxisName::Gamma | AxisName::Lambda | AxisName::LearningRate,
                    AxisValue::Real(_)
                ) | (
                    AxisName::BatchSize
                        | AxisName::TargetSync
                        | AxisName::Memory
                        | AxisName::Episodes,
                    AxisValue::Count(_)
                ) | (AxisName::Hidden, AxisValue::Hidden(..))
            );
            if !ok {
                return Err(Error::Config(format!(
                    "value {v} does not fit axis '{}'",
                    name.as_str()
                )));
            }
        }
        Ok(Self { name, values })
    }

    pub fn reals(name: AxisName, values: &[f64]) -> Result<Self> {
        Self::new(name, values.iter().map(|&v| AxisValue::Real(v)).collect())
    }

    pub fn hidden(values: &[(usize, usize)]) -> Result<Self> {
        Self::new(
            AxisName::Hidden,
            values
                .iter()
                .map(|&(a, b)| AxisValue::Hidden(a, b))
                .collect(),
        )
    }
}

/// Parse `name=v1,v2,...`; hidden sizes are written `128x256`.
impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, list) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("axis '{s}' is not of the form name=v1,v2")))?;
        let name: AxisName = name.trim().parse()?;
        let bad =
            |v: &str| Error::Config(format!("cannot parse '{v}' for axis '{}'", name.as_str()));
        let values = list
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| match name {
                AxisName::Gamma | AxisName::Lambda | AxisName::LearningRate => {
                    v.parse().map(AxisValue::Real).map_err(|_| bad(v))
                }
                AxisName::Hidden => {
                    let (a, b) = v.split_once('x').ok_or_else(|| bad(v))?;
                    Ok(AxisValue::Hidden(
                        a.parse().map_err(|_| bad(v))?,
                        b.parse().map_err(|_| bad(v))?,
                    ))
                }
                _ => v.parse().map(AxisValue::Count).map_err(|_| bad(v)),
            })
            .collect::<Result<Vec<_>>>()?;
        Axis::new(name, values)
    }
}

fn apply(config: &mut AgentConfig, name: AxisName, value: AxisValue) {
    match (name, value) {
        (AxisName::Gamma, AxisValue::Real(v)) => config.gamma = v,
        (AxisName::Lambda, AxisValue::Real(v)) => config.lambda = v,
        (AxisName::LearningRate, AxisValue::Real(v)) => config.learning_rate = v,
        (AxisName::BatchSize, AxisValue::Count(n)) => config.batch_size = n as usize,
        (AxisName::TargetSync, AxisValue::Count(n)) => config.target_sync_steps = n,
        (AxisName::Memory, AxisValue::Count(n)) => config.memory_capacity = n as usize,
        (AxisName::Episodes, AxisValue::Count(n)) => config.episodes = n as usize,
        (AxisName::Hidden, AxisValue::Hidden(a, b)) => config.hidden = [a, b],
        _ => unreachable!("axis values are checked on construction"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub eval_trials: usize,
    pub eval_seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            eval_trials: 100,
            eval_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub values: Vec<AxisValue>,
    pub seed: u64,
    pub trial_seed: u64,
    pub final_ma100: f64,
    pub eval_mean: f64,
    pub eval_std: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axes: Vec<AxisName>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn header(&self) -> String {
        let mut cols: Vec<&str> = self.axes.iter().map(|a| a.as_str()).collect();
        cols.extend(["seed", "final_ma100", "eval_mean", "eval_std", "status"]);
        cols.join(",")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.header())?;
        for row in &self.rows {
            let mut fields: Vec<String> = row.values.iter().map(ToString::to_string).collect();
            fields.push(row.seed.to_string());
            fields.push(row.final_ma100.to_string());
            fields.push(row.eval_mean.to_string());
            fields.push(row.eval_std.to_string());
            fields.push(row.status.replace([',', '\n', '\r'], " "));
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Cross product of axis values in row-major order (last axis fastest).
pub fn grid(axes: &[Axis]) -> Vec<Vec<AxisValue>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut row = prefix.clone();
                    row.push(*v);
                    row
                })
            })
            .collect()
    })
}

/// Trial seed: `derive_seed(seed, [sweep stream, bits of each axis value..., combination index])`.
pub fn trial_seed(seed: u64, values: &[AxisValue], combination: usize) -> u64 {
    let mut parts = vec![stream::SWEEP_TRIAL];
    for v in values {
        parts.extend(v.key_bits());
    }
    parts.push(combination as u64);
    derive_seed(seed, &parts)
}

/// Train and evaluate every (combination, seed) pair. Rows come back in
/// grid order, seeds innermost, regardless of `exec`. A failing trial is
/// recorded in its row's status.
pub fn sweep(
    base: &AgentConfig,
    env_config: &EnvConfig,
    axes: &[Axis],
    seeds: &[u64],
    options: &SweepOptions,
    exec: Execution,
) -> Result<SweepTable> {
    if axes.is_empty() {
        return Err(Error::Config("a sweep needs at least one axis".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Config("a sweep needs at least one seed".into()));
    }
    let combos = grid(axes);
    let jobs: Vec<(usize, &Vec<AxisValue>, u64)> = combos
        .iter()
        .enumerate()
        .flat_map(|(ci, values)| seeds.iter().map(move |&s| (ci, values, s)))
        .collect();

    let rows = map_indexed(jobs.len(), exec, |j| {
        let (ci, values, seed) = jobs[j];
        let mut config = base.clone();
        for (axis, value) in axes.iter().zip(values) {
            apply(&mut config, axis.name, *value);
        }
        let tseed = trial_seed(seed, values, ci);
        let outcome = train(&config, env_config, tseed).and_then(|run| {
            let ma = run.ma100.last().copied().unwrap_or(f64::NAN);
            let eval = evaluate(
                run.agent.online(),
                env_config,
                options.eval_trials,
                options.eval_seed,
                Execution::Sequential,
            )?;
            Ok((ma, eval.mean, eval.std))
        });
        let (final_ma100, eval_mean, eval_std, status) = match outcome {
            Ok((ma, mean, std)) => (ma, mean, std, "ok".to_string()),
            Err(e) => (f64::NAN, f64::NAN, f64::NAN, format!("error: {e}")),
        };
        SweepRow {
            values: values.clone(),
            seed,
            trial_seed: tseed,
            final_ma100,
            eval_mean,
            eval_std,
            status,
        }
    });

    Ok(SweepTable {
        axes: axes.iter().map(|a| a.name).collect(),
        rows,
    })
}
