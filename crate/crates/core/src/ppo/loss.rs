use crate::error::{Error, Result};
use crate::numcore::{DifferentiableLoss, MlpParams};
use crate::Vector;

use super::policy::{gaussian_log_prob, Policy};

/// One flattened training sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub state: Vector,
    pub action: Vector,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub value_target: f64,
}

/// Per-sample clipped objective `min(r A, clip(r, 1-eps, 1+eps) A)`.
pub fn clipped_objective(ratio: f64, advantage: f64, clip: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
    (ratio * advantage).min(clipped * advantage)
}

/// `d objective / d log pi`: `r A` when the unclipped branch is active,
/// zero when the clipped branch is strictly smaller.
fn clipped_objective_slope(ratio: f64, advantage: f64, clip: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
    if ratio * advantage <= clipped * advantage {
        ratio * advantage
    } else {
        0.0
    }
}

/// Negative mean clipped objective.
pub fn policy_loss(samples: &[Sample], policy: &Policy, clip: f64) -> Result<f64> {
    ClippedSurrogate { clip }.value(policy, samples)
}

/// `coef * mean((V(s) - target)^2)`.
pub fn value_loss(samples: &[Sample], value_net: &MlpParams, coef: f64) -> Result<f64> {
    ValueRegression { coef }.value(value_net, samples)
}

fn ensure_nonempty(samples: &[Sample]) -> Result<()> {
    if samples.is_empty() {
        Err(Error::Empty("ppo minibatch"))
    } else {
        Ok(())
    }
}

/// Clipped surrogate at fixed behaviour log-probabilities.
#[derive(Clone, Copy, Debug)]
pub struct ClippedSurrogate {
    pub clip: f64,
}

impl ClippedSurrogate {
    /// Adds the surrogate gradient into `grad` (mean net and log-std only)
    /// and returns `(loss, ratios)`.
    fn accumulate(&self, policy: &Policy, samples: &[Sample], grad: Option<&mut Policy>) -> Result<(f64, Vec<f64>)> {
        ensure_nonempty(samples)?;
        let scale = 1.0 / samples.len() as f64;
        let log_std = policy.clamped_log_std();
        let mut ratios = Vec::with_capacity(samples.len());
        let mut total = 0.0;
        let mut grad = grad;
        for s in samples {
            let cache = policy.mean.forward_cached(&s.state)?;
            let mean = cache.output();
            let lp = gaussian_log_prob(mean, &log_std, &s.action);
            let ratio = (lp - s.old_log_prob).exp();
            if !ratio.is_finite() {
                return Err(Error::NonFinite("policy ratio"));
            }
            ratios.push(ratio);
            total -= clipped_objective(ratio, s.advantage, self.clip);
            if let Some(g) = grad.as_deref_mut() {
                let slope = -scale * clipped_objective_slope(ratio, s.advantage, self.clip);
                if slope == 0.0 {
                    continue;
                }
                let mut d_mean = vec![0.0; mean.len()];
                for j in 0..mean.len() {
                    let var = (2.0 * log_std[j]).exp();
                    let diff = s.action[j] - mean[j];
                    d_mean[j] = slope * diff / var;
                    g.log_std[j] += slope * (diff * diff / var - 1.0);
                }
                policy.mean.backward(&cache, &d_mean, &mut g.mean)?;
            }
        }
        Ok((total * scale, ratios))
    }
}

impl DifferentiableLoss<Policy> for ClippedSurrogate {
    type Batch = [Sample];

    fn value(&self, policy: &Policy, samples: &[Sample]) -> Result<f64> {
        Ok(self.accumulate(policy, samples, None)?.0)
    }

    fn value_and_grad(&self, policy: &Policy, samples: &[Sample]) -> Result<(f64, Policy)> {
        let mut grad = policy.zeros_like();
        let (loss, _) = self.accumulate(policy, samples, Some(&mut grad))?;
        Ok((loss, grad))
    }
}

/// Scaled mean-squared value error.
#[derive(Clone, Copy, Debug)]
pub struct ValueRegression {
    pub coef: f64,
}

impl DifferentiableLoss<MlpParams> for ValueRegression {
    type Batch = [Sample];

    fn value(&self, net: &MlpParams, samples: &[Sample]) -> Result<f64> {
        ensure_nonempty(samples)?;
        let mut total = 0.0;
        for s in samples {
            let v = net.forward(&s.state)?[0];
            total += (v - s.value_target).powi(2);
        }
        Ok(self.coef * total / samples.len() as f64)
    }

    fn value_and_grad(&self, net: &MlpParams, samples: &[Sample]) -> Result<(f64, MlpParams)> {
        ensure_nonempty(samples)?;
        let scale = self.coef / samples.len() as f64;
        let mut grad = net.zeros_like();
        let mut total = 0.0;
        for s in samples {
            let cache = net.forward_cached(&s.state)?;
            let err = cache.output()[0] - s.value_target;
            total += err * err;
            net.backward(&cache, &[2.0 * scale * err], &mut grad)?;
        }
        Ok((scale * total, grad))
    }
}

/// Combined loss: surrogate + critic term - entropy bonus.
#[derive(Clone, Copy, Debug)]
pub struct PpoObjective {
    pub clip: f64,
    pub critic_coef: f64,
    pub entropy_coef: f64,
}

/// Diagnostics from one evaluation of [`PpoObjective`].
#[derive(Clone, Debug, Default)]
pub(crate) struct ObjectiveParts {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub ratios: Vec<f64>,
}

impl PpoObjective {
    pub(crate) fn evaluate(&self, policy: &Policy, samples: &[Sample], grad: Option<&mut Policy>) -> Result<ObjectiveParts> {
        let surrogate = ClippedSurrogate { clip: self.clip };
        let critic = ValueRegression { coef: self.critic_coef };
        let entropy = policy.entropy();
        match grad {
            Some(g) => {
                let (policy_loss, ratios) = surrogate.accumulate(policy, samples, Some(g))?;
                let (value_loss, vg) = critic.value_and_grad(&policy.value, samples)?;
                g.value = vg;
                for (gl, l) in g.log_std.iter_mut().zip(&policy.log_std) {
                    // entropy is linear in each (unclamped) log-std
                    if (super::LOG_STD_MIN..=super::LOG_STD_MAX).contains(l) {
                        *gl -= self.entropy_coef;
                    }
                }
                Ok(ObjectiveParts {
                    policy_loss,
                    value_loss,
                    entropy,
                    ratios,
                })
            }
            None => {
                let (policy_loss, ratios) = surrogate.accumulate(policy, samples, None)?;
                Ok(ObjectiveParts {
                    policy_loss,
                    value_loss: critic.value(&policy.value, samples)?,
                    entropy,
                    ratios,
                })
            }
        }
    }
}

impl DifferentiableLoss<Policy> for PpoObjective {
    type Batch = [Sample];

    fn value(&self, policy: &Policy, samples: &[Sample]) -> Result<f64> {
        let p = self.evaluate(policy, samples, None)?;
        Ok(p.policy_loss + p.value_loss - self.entropy_coef * p.entropy)
    }

    fn value_and_grad(&self, policy: &Policy, samples: &[Sample]) -> Result<(f64, Policy)> {
        let mut grad = policy.zeros_like();
        let p = self.evaluate(policy, samples, Some(&mut grad))?;
        Ok((p.policy_loss + p.value_loss - self.entropy_coef * p.entropy, grad))
    }
}
