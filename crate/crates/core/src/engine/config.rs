use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::StepSchedule;
use crate::error::{Error, Result};
use crate::response::PerturbationSpec;

/// Where each epoch starts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StatePolicy {
    /// Continue from the state reached at the end of the previous epoch.
    #[default]
    Continue,
    /// Start every epoch from the given state.
    Reset(usize),
}

impl fmt::Display for StatePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatePolicy::Continue => f.write_str("continue"),
            StatePolicy::Reset(s) => write!(f, "reset:{s}"),
        }
    }
}

impl FromStr for StatePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "continue" {
            return Ok(StatePolicy::Continue);
        }
        s.strip_prefix("reset:")
            .and_then(|x| x.parse().ok())
            .map(StatePolicy::Reset)
            .ok_or_else(|| {
                Error::InvalidConfig(format!("state policy must be continue or reset:<state>, got {s:?}"))
            })
    }
}

impl Serialize for StatePolicy {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StatePolicy {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which beliefs enter the value estimate returned by an SFP step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueBeliefs {
    /// Beliefs after the step's update (the printed line order).
    #[default]
    PostUpdate,
    /// Beliefs the response was computed from.
    PreUpdate,
}

pub const METRIC_NAMES: &[&str] = &["q_residual", "min_visits", "pi_distance", "q_error"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub epochs: usize,
    pub tau: f64,
    #[serde(default = "default_alpha")]
    pub alpha_exponent: f64,
    #[serde(default = "default_beta")]
    pub beta_exponent: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
    #[serde(default)]
    pub state_policy: StatePolicy,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<String>,
    /// First state of epoch 1 under the `continue` policy.
    #[serde(default)]
    pub initial_state: usize,
    /// Largest m kept in checkpoints; all slots when absent.
    #[serde(default)]
    pub snapshot_depth: Option<usize>,
    #[serde(default)]
    pub value_beliefs: ValueBeliefs,
}

fn default_alpha() -> f64 {
    0.7
}
fn default_beta() -> f64 {
    0.6
}
fn default_checkpoint_every() -> usize {
    10
}
fn default_metrics() -> Vec<String> {
    vec!["q_residual".into()]
}

impl RunConfig {
    pub fn new(epochs: usize, tau: f64) -> Self {
        RunConfig {
            epochs,
            tau,
            alpha_exponent: default_alpha(),
            beta_exponent: default_beta(),
            seed: 0,
            checkpoint_every: default_checkpoint_every(),
            state_policy: StatePolicy::Continue,
            metrics: default_metrics(),
            initial_state: 0,
            snapshot_depth: None,
            value_beliefs: ValueBeliefs::PostUpdate,
        }
    }

    pub fn perturbation(&self) -> Result<PerturbationSpec> {
        PerturbationSpec::entropy(self.tau)
    }

    pub fn alpha(&self) -> Result<StepSchedule> {
        StepSchedule::alpha(self.alpha_exponent)
    }

    pub fn beta(&self) -> Result<StepSchedule> {
        StepSchedule::beta(self.beta_exponent)
    }

    /// Checks everything that does not depend on the game.
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be positive".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::InvalidConfig("checkpoint_every must be positive".into()));
        }
        self.perturbation()?;
        self.alpha()?;
        self.beta()?;
        if let Some(m) = self.metrics.iter().find(|m| !METRIC_NAMES.contains(&m.as_str())) {
            return Err(Error::InvalidConfig(format!(
                "unknown metric {m:?}; expected one of {METRIC_NAMES:?}"
            )));
        }
        Ok(())
    }

    pub fn validate_for(&self, states: usize) -> Result<()> {
        self.validate()?;
        let start = match self.state_policy {
            StatePolicy::Reset(s) => s,
            StatePolicy::Continue => self.initial_state,
        };
        if start >= states {
            return Err(Error::InvalidConfig(format!(
                "start state {start} out of range for {states} states"
            )));
        }
        Ok(())
    }

    pub fn is_checkpoint(&self, epoch: usize) -> bool {
        epoch.is_multiple_of(self.checkpoint_every) || epoch == self.epochs
    }
}
