//! First-order optimizers over [`MlpParams`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Gradients, MlpParams};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON_DIV: f64 = 1e-8;

/// Adamax moments: `m` is the first-moment average, `u` the exponentially
/// weighted infinity norm of past gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamaxState {
    pub(crate) m: Gradients,
    pub(crate) u: Gradients,
    pub(crate) t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon_div: f64,
}

impl AdamaxState {
    pub fn new(params: &MlpParams) -> Self {
        Self::with_constants(params, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON_DIV)
    }

    pub fn with_constants(params: &MlpParams, beta1: f64, beta2: f64, epsilon_div: f64) -> Self {
        Self {
            m: Gradients::zeros_like(params),
            u: Gradients::zeros_like(params),
            t: 0,
            beta1,
            beta2,
            epsilon_div,
        }
    }

    pub(crate) fn from_parts(m: Gradients, u: Gradients, t: u64) -> Self {
        Self {
            m,
            u,
            t,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon_div: DEFAULT_EPSILON_DIV,
        }
    }

    pub fn m(&self) -> &Gradients {
        &self.m
    }

    pub fn u(&self) -> &Gradients {
        &self.u
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub(crate) fn matches(&self, params: &MlpParams) -> bool {
        self.m.matches(params) && self.u.matches(params)
    }

    /// One Adamax update in place. A non-finite gradient rejects the whole
    /// update and leaves both `params` and `self` untouched.
    pub fn step(&mut self, params: &mut MlpParams, grads: &Gradients, lr: f64) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Argument(format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        if !grads.matches(params) || !self.matches(params) {
            return Err(Error::Config(
                "gradient or optimizer state shape does not match the parameters".into(),
            ));
        }
        if !grads.is_finite() {
            return Err(Error::Numeric(
                "non-finite gradient, update rejected".into(),
            ));
        }

        self.t += 1;
        let step_size = lr / (1.0 - self.beta1.powi(self.t as i32));
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon_div);
        for (((p, &g), m), u) in params
            .values_mut()
            .zip(grads.values())
            .zip(self.m.values_mut())
            .zip(self.u.values_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *u = (b2 * *u).max(g.abs());
            *p -= step_size * *m / u.max(eps);
        }
        Ok(())
    }
}

/// Functional form of [`AdamaxState::step`].
pub fn adamax_step(
    params: &MlpParams,
    grads: &Gradients,
    state: &AdamaxState,
    lr: f64,
) -> Result<(MlpParams, AdamaxState)> {
    let mut params = params.clone();
    let mut state = state.clone();
    state.step(&mut params, grads, lr)?;
    Ok((params, state))
}

/// Plain gradient descent, kept as a debugging baseline.
pub fn sgd_step(params: &mut MlpParams, grads: &Gradients, lr: f64) -> Result<()> {
    if !grads.matches(params) {
        return Err(Error::Config(
            "gradient shape does not match the parameters".into(),
        ));
    }
    if !grads.is_finite() {
        return Err(Error::Numeric(
            "non-finite gradient, update rejected".into(),
        ));
    }
    for (p, g) in params.values_mut().zip(grads.values()) {
        *p -= lr * g;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adamax,
    Sgd,
}
