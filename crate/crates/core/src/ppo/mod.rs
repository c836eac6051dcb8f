//! Actor-critic policy optimisation on shaped rewards.
//!
//! - [`Policy`]: Gaussian policy with a tanh-squashed mean network, a
//!   state-independent log-std and a separate value network.
//! - [`compute_gae`] / [`compute_gae_truncated`]: advantage estimation,
//!   truncated at episode boundaries and optionally at a horizon `H`.
//! - [`collect_rollout`]: whole-episode rollouts with raw and shaped rewards.
//! - [`ppo_update`]: clipped surrogate plus value regression via Adam.

mod gae;
mod loss;
mod policy;
mod rollout;
mod update;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::AdamConfig;

pub use gae::{compute_gae, compute_gae_truncated};
pub use loss::{clipped_objective, policy_loss, value_loss, ClippedSurrogate, PpoObjective, Sample, ValueRegression};
pub use policy::{gaussian_log_prob, Policy, LOG_STD_MAX, LOG_STD_MIN};
pub use rollout::{collect_rollout, EpisodeRecord, RolloutBatch};
pub use update::{build_samples, normalize_advantages, ppo_update, PolicyOptimizer, UpdateStats};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub minibatch: usize,
    pub epochs: usize,
    pub critic_coef: f64,
    pub entropy_coef: f64,
    pub adam: AdamConfig,
    /// Advantage horizon H; `0` disables truncation.
    pub horizon: usize,
    /// Minimum transitions collected per iteration (whole episodes).
    pub rollout_steps: usize,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            minibatch: 512,
            epochs: 8,
            critic_coef: 2.0,
            entropy_coef: 0.0,
            adam: AdamConfig::default(),
            horizon: 32,
            rollout_steps: 2048,
            hidden: vec![256, 128, 64],
            init_log_std: 0.0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("ppo: {m}")));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.clip > 0.0) {
            return bad("clip must be positive");
        }
        if self.minibatch < 1 || self.rollout_steps < 1 {
            return bad("minibatch and rollout_steps must be at least 1");
        }
        if !(self.critic_coef >= 0.0) || !(self.entropy_coef >= 0.0) {
            return bad("loss coefficients must be non-negative");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        if !(LOG_STD_MIN..=LOG_STD_MAX).contains(&self.init_log_std) {
            return bad("init_log_std outside the clamp range");
        }
        self.adam.validate()
    }
}
