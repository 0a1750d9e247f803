//! JSON checkpoints for networks, optimizer state and agents.
//!
//! Layout (version 1):
//!
//! ```text
//! {"version":1,"sizes":[8,128,256,4],"activations":["relu","tanh","linear"],
//!  "weights":[[row-major layer 1],...],"biases":[[layer 1],...],
//!  "adamax":{"m":{"weights":..,"biases":..},"u":{..},"t":N},"steps":N,
//!  "episodes":N,"target":{"weights":..,"biases":..}}
//! ```
//!
//! `episodes` and `target` are optional; a checkpoint without `target`
//! restores an agent whose target network equals the online one. Floats are
//! written in shortest round-trip form and parse back bit-exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::Agent;
use crate::error::{Error, Result};
use crate::nn::{Activation, Dense, Gradients, LayerSpec, MlpParams};
use crate::optim::AdamaxState;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerValues {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamaxValues {
    pub m: LayerValues,
    pub u: LayerValues,
    pub t: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub sizes: Vec<usize>,
    pub activations: Vec<Activation>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub adamax: AdamaxValues,
    pub steps: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episodes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<LayerValues>,
}

fn values_of(layers: &[Dense]) -> LayerValues {
    LayerValues {
        weights: layers.iter().map(|l| l.weights().to_vec()).collect(),
        biases: layers.iter().map(|l| l.biases().to_vec()).collect(),
    }
}

fn layers_from(spec: &LayerSpec, values: &LayerValues) -> Result<Vec<Dense>> {
    let n = spec.num_layers();
    if values.weights.len() != n {
        return Err(Error::shape(
            "checkpoint weight layers",
            n,
            values.weights.len(),
        ));
    }
    if values.biases.len() != n {
        return Err(Error::shape(
            "checkpoint bias layers",
            n,
            values.biases.len(),
        ));
    }
    spec.sizes()
        .windows(2)
        .zip(values.weights.iter().zip(&values.biases))
        .map(|(w, (weights, biases))| {
            Dense::from_parts(w[1], w[0], weights.clone(), biases.clone())
        })
        .collect()
}

impl Checkpoint {
    pub fn from_params(params: &MlpParams, opt: &AdamaxState, steps: u64) -> Self {
        let spec = params.spec();
        let v = values_of(params.layers());
        Self {
            version: CHECKPOINT_VERSION,
            sizes: spec.sizes().to_vec(),
            activations: spec.activations().to_vec(),
            weights: v.weights,
            biases: v.biases,
            adamax: AdamaxValues {
                m: values_of(opt.m().layers()),
                u: values_of(opt.u().layers()),
                t: opt.t(),
            },
            steps,
            episodes: None,
            target: None,
        }
    }

    pub fn from_agent(agent: &Agent) -> Self {
        let mut ck = Self::from_params(agent.online(), agent.optimizer(), agent.action_steps());
        ck.episodes = Some(agent.episode_index());
        ck.target = Some(values_of(agent.target().layers()));
        ck
    }

    fn spec(&self) -> Result<LayerSpec> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint version {}",
                self.version
            )));
        }
        LayerSpec::new(self.sizes.clone(), self.activations.clone())
    }

    /// The online network.
    pub fn params(&self) -> Result<MlpParams> {
        let spec = self.spec()?;
        let layers = layers_from(
            &spec,
            &LayerValues {
                weights: self.weights.clone(),
                biases: self.biases.clone(),
            },
        )?;
        MlpParams::from_layers(spec, layers)
    }

    pub fn optimizer(&self) -> Result<AdamaxState> {
        let spec = self.spec()?;
        let m = Gradients::from_layers(layers_from(&spec, &self.adamax.m)?);
        let u = Gradients::from_layers(layers_from(&spec, &self.adamax.u)?);
        if !m.is_finite() || !u.is_finite() || u.values().any(|&v| v < 0.0) {
            return Err(Error::Numeric(
                "invalid optimizer moments in checkpoint".into(),
            ));
        }
        Ok(AdamaxState::from_parts(m, u, self.adamax.t))
    }

    pub fn to_agent(&self) -> Result<Agent> {
        let online = self.params()?;
        let target = match &self.target {
            Some(values) => {
                let spec = self.spec()?;
                MlpParams::from_layers(spec.clone(), layers_from(&spec, values)?)?
            }
            None => online.clone(),
        };
        let opt = self.optimizer()?;
        Agent::from_parts(online, target, opt, self.steps, self.episodes.unwrap_or(0))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        ck.spec()?;
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::AgentConfig;

    #[test]
    fn agent_round_trip_is_exact() {
        let cfg = AgentConfig {
            hidden: [6, 5],
            ..AgentConfig::default()
        };
        let mut agent = Agent::new(&cfg, 4).unwrap();
        agent.online.layers_mut()[1].biases_mut()[2] = 0.1 + 0.2;
        agent.action_steps = 77;
        agent.episode_index = 3;
        let text = Checkpoint::from_agent(&agent).to_json().unwrap();
        let back = Checkpoint::from_json(&text).unwrap().to_agent().unwrap();
        assert_eq!(back.online(), agent.online());
        assert_eq!(back.target(), agent.target());
        assert_eq!(back.optimizer(), agent.optimizer());
        assert_eq!(back.action_steps(), 77);
        assert_eq!(back.episode_index(), 3);
    }

    #[test]
    fn header_fields_present() {
        let agent = Agent::new(&AgentConfig::default(), 0).unwrap();
        let text = Checkpoint::from_agent(&agent).to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["version"], 1);
        assert_eq!(v["sizes"], serde_json::json!([8, 128, 256, 4]));
        assert_eq!(
            v["activations"],
            serde_json::json!(["relu", "tanh", "linear"])
        );
        assert_eq!(v["weights"][0].as_array().unwrap().len(), 128 * 8);
        assert_eq!(v["adamax"]["t"], 0);
        assert_eq!(v["steps"], 0);
    }

    #[test]
    fn corrupt_checkpoints_rejected() {
        let agent = Agent::new(
            &AgentConfig {
                hidden: [3, 3],
                ..Default::default()
            },
            0,
        )
        .unwrap();
        let mut ck = Checkpoint::from_agent(&agent);
        ck.weights[0].pop();
        assert!(ck.params().is_err());

        let mut ck = Checkpoint::from_agent(&agent);
        ck.version = 2;
        assert!(Checkpoint::from_json(&ck.to_json().unwrap()).is_err());

        assert!(Checkpoint::from_json("{\"version\":1}").is_err());
        assert!(Checkpoint::from_json("not json").is_err());
        let text = Checkpoint::from_agent(&agent).to_json().unwrap();
        let extra = text.replacen('{', "{\"bogus\":1,", 1);
        assert!(Checkpoint::from_json(&extra).is_err());
    }
}
