use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::numcore::{Activation, MlpParams, ParamVector};
use crate::Vector;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Diagonal Gaussian log-density.
pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, ls), a)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

/// Gaussian actor with tanh-squashed mean and state-independent log-std,
/// plus a scalar value network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub mean: MlpParams,
    pub log_std: Vec<f64>,
    pub value: MlpParams,
}

impl Policy {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        init_log_std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let sizes = |out: usize| {
            let mut s = vec![state_dim];
            s.extend_from_slice(hidden);
            s.push(out);
            s
        };
        let mut mean = MlpParams::init(&sizes(action_dim), Activation::Tanh, Activation::Tanh, rng)?;
        // start close to a zero-mean policy
        mean.scale_output_layer(0.01);
        let value = MlpParams::init(&sizes(1), Activation::Tanh, Activation::Identity, rng)?;
        let policy = Self {
            mean,
            log_std: vec![init_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX); action_dim],
            value,
        };
        policy.check()?;
        Ok(policy)
    }

    pub fn check(&self) -> Result<()> {
        ensure_dim("policy log-std", self.mean.output_dim(), self.log_std.len())?;
        ensure_dim("value network input", self.mean.input_dim(), self.value.input_dim())?;
        ensure_dim("value network output", 1, self.value.output_dim())?;
        ensure_finite("policy log-std", &self.log_std)
    }

    pub fn state_dim(&self) -> usize {
        self.mean.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.mean.output_dim()
    }

    /// Log-std as used by the distribution (clamped).
    pub fn clamped_log_std(&self) -> Vec<f64> {
        self.log_std.iter().map(|l| l.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect()
    }

    pub fn clamp_log_std(&mut self) {
        for l in &mut self.log_std {
            *l = l.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    pub fn mean_action(&self, state: &[f64]) -> Result<Vector> {
        self.mean.forward(state)
    }

    pub fn state_value(&self, state: &[f64]) -> Result<f64> {
        Ok(self.value.forward(state)?[0])
    }

    pub fn log_prob(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        ensure_dim("action", self.action_dim(), action.len())?;
        let mean = self.mean_action(state)?;
        let lp = gaussian_log_prob(&mean, &self.clamped_log_std(), action);
        if lp.is_finite() {
            Ok(lp)
        } else {
            Err(Error::NonFinite("action log-probability"))
        }
    }

    /// Sample an action; returns `(action, log_prob, value)`.
    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<(Vector, f64, f64)> {
        let mean = self.mean_action(state)?;
        let log_std = self.clamped_log_std();
        let action: Vector = mean
            .iter()
            .zip(&log_std)
            .map(|(m, ls)| {
                let z: f64 = StandardNormal.sample(rng);
                m + ls.exp() * z
            })
            .collect();
        let lp = gaussian_log_prob(&mean, &log_std, &action);
        if !lp.is_finite() {
            return Err(Error::NonFinite("action log-probability"));
        }
        Ok((action, lp, self.state_value(state)?))
    }

    pub fn entropy(&self) -> f64 {
        self.clamped_log_std().iter().map(|ls| ls + 0.5 + HALF_LN_2PI).sum()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            mean: self.mean.zeros_like(),
            log_std: vec![0.0; self.log_std.len()],
            value: self.value.zeros_like(),
        }
    }
}

impl ParamVector for Policy {
    fn param_count(&self) -> usize {
        self.mean.param_count() + self.log_std.len() + self.value.param_count()
    }

    fn param(&self, i: usize) -> f64 {
        let (m, l) = (self.mean.param_count(), self.log_std.len());
        if i < m {
            self.mean.param(i)
        } else if i < m + l {
            self.log_std[i - m]
        } else {
            self.value.param(i - m - l)
        }
    }

    fn set_param(&mut self, i: usize, value: f64) {
        let (m, l) = (self.mean.param_count(), self.log_std.len());
        if i < m {
            self.mean.set_param(i, value)
        } else if i < m + l {
            self.log_std[i - m] = value
        } else {
            self.value.set_param(i - m - l, value)
        }
    }
}
