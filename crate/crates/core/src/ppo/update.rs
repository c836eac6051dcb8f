use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::{adam_step, AdamState};

use super::gae::compute_gae_truncated;
use super::loss::{PpoObjective, Sample};
use super::policy::Policy;
use super::rollout::RolloutBatch;
use super::PpoConfig;

/// Adam state for the three parameter groups of a [`Policy`].
#[derive(Clone, Debug)]
pub struct PolicyOptimizer {
    mean: AdamState,
    log_std: AdamState,
    value: AdamState,
}

impl PolicyOptimizer {
    pub fn new(policy: &Policy, config: &PpoConfig) -> Self {
        Self {
            mean: AdamState::new(policy.mean.as_slice().len(), config.adam),
            log_std: AdamState::new(policy.log_std.len(), config.adam),
            value: AdamState::new(policy.value.as_slice().len(), config.adam),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.mean.step_count()
    }

    fn apply(&mut self, policy: &mut Policy, grad: &Policy) -> Result<()> {
        adam_step(policy.mean.as_mut_slice(), grad.mean.as_slice(), &mut self.mean)?;
        adam_step(&mut policy.log_std, &grad.log_std, &mut self.log_std)?;
        adam_step(policy.value.as_mut_slice(), grad.value.as_slice(), &mut self.value)?;
        policy.clamp_log_std();
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub minibatches: usize,
}

/// Flatten a batch into samples with per-episode truncated GAE on the shaped
/// rewards. Advantages are not normalised here.
pub fn build_samples(batch: &RolloutBatch, config: &PpoConfig) -> Result<Vec<Sample>> {
    let mut samples = Vec::with_capacity(batch.steps());
    for ep in &batch.episodes {
        let (adv, targets) = compute_gae_truncated(
            &ep.shaped_rewards,
            &ep.values,
            ep.bootstrap_value,
            config.gamma,
            config.gae_lambda,
            config.horizon,
        )?;
        for t in 0..ep.len() {
            samples.push(Sample {
                state: ep.trajectory.states[t].clone(),
                action: ep.trajectory.actions[t].clone(),
                old_log_prob: ep.log_probs[t],
                advantage: adv[t],
                value_target: targets[t],
            });
        }
    }
    Ok(samples)
}

/// Shift and scale advantages to mean 0, std 1 (std floored at 1e-8).
pub fn normalize_advantages(samples: &mut [Sample]) {
    if samples.is_empty() {
        return;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for s in samples {
        s.advantage = (s.advantage - mean) / std;
    }
}

/// `epochs` passes of shuffled minibatches over `samples`.
///
/// Advantages are normalised once over the whole batch first. A non-finite
/// loss or parameter aborts with [`Error::Diverged`].
pub fn ppo_update<R: Rng + ?Sized>(
    policy: &mut Policy,
    optimizer: &mut PolicyOptimizer,
    samples: &[Sample],
    config: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    if config.epochs == 0 || samples.is_empty() {
        return Ok(UpdateStats::default());
    }
    let mut samples = samples.to_vec();
    normalize_advantages(&mut samples);
    let objective = PpoObjective {
        clip: config.clip,
        critic_coef: config.critic_coef,
        entropy_coef: config.entropy_coef,
    };
    let mut stats = UpdateStats::default();
    let (mut kl_sum, mut clipped, mut seen) = (0.0, 0usize, 0usize);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut minibatch = Vec::with_capacity(config.minibatch);
    for epoch in 0..config.epochs {
        order.shuffle(rng);
        for (i, chunk) in order.chunks(config.minibatch).enumerate() {
            minibatch.clear();
            minibatch.extend(chunk.iter().map(|&j| samples[j].clone()));
            let mut grad = policy.zeros_like();
            let parts = objective.evaluate(policy, &minibatch, Some(&mut grad))?;
            let total = parts.policy_loss + parts.value_loss - config.entropy_coef * parts.entropy;
            if !total.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite ppo loss at epoch {epoch}, minibatch {i}: policy {} value {}",
                    parts.policy_loss, parts.value_loss
                )));
            }
            optimizer.apply(policy, &grad)?;
            if !policy.mean.is_finite() || !policy.value.is_finite() || policy.log_std.iter().any(|l| !l.is_finite()) {
                return Err(Error::Diverged(format!("non-finite policy parameters at epoch {epoch}, minibatch {i}")));
            }
            stats.policy_loss += parts.policy_loss;
            stats.value_loss += parts.value_loss;
            stats.entropy += parts.entropy;
            stats.minibatches += 1;
            for r in &parts.ratios {
                kl_sum += r - 1.0 - r.ln();
                if (r - 1.0).abs() > config.clip {
                    clipped += 1;
                }
            }
            seen += parts.ratios.len();
        }
    }
    let m = stats.minibatches as f64;
    stats.policy_loss /= m;
    stats.value_loss /= m;
    stats.entropy /= m;
    stats.approx_kl = kl_sum / seen as f64;
    stats.clip_fraction = clipped as f64 / seen as f64;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;

    #[test]
    fn zero_epochs_leaves_policy_unchanged() {
        let mut rng = seeding::rng(0);
        let mut policy = Policy::new(2, 1, &[4], 0.0, &mut rng).unwrap();
        let before = policy.clone();
        let config = PpoConfig {
            epochs: 0,
            ..PpoConfig::default()
        };
        let mut opt = PolicyOptimizer::new(&policy, &config);
        let s = vec![Sample {
            state: vec![0.1, 0.2],
            action: vec![0.5],
            old_log_prob: -1.0,
            advantage: 1.0,
            value_target: 0.0,
        }];
        ppo_update(&mut policy, &mut opt, &s, &config, &mut rng).unwrap();
        assert_eq!(policy, before);
    }

    #[test]
    fn normalisation_gives_zero_mean_unit_std() {
        let mut s: Vec<Sample> = [1.0, 2.0, 3.0, 6.0]
            .iter()
            .map(|&a| Sample {
                state: vec![],
                action: vec![],
                old_log_prob: 0.0,
                advantage: a,
                value_target: 0.0,
            })
            .collect();
        normalize_advantages(&mut s);
        let m: f64 = s.iter().map(|x| x.advantage).sum::<f64>() / 4.0;
        let v: f64 = s.iter().map(|x| x.advantage * x.advantage).sum::<f64>() / 4.0;
        assert!(m.abs() < 1e-15 && (v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_action_moves_toward_positive_advantage() {
        let mut rng = seeding::rng(5);
        let mut policy = Policy::new(1, 1, &[8], -1.0, &mut rng).unwrap();
        let state = vec![0.3];
        let mu0 = policy.mean_action(&state).unwrap()[0];
        // actions above the mean were good, actions below were bad
        let mut samples = Vec::new();
        for k in 0..64 {
            let offset = 0.05 + 0.3 * (k as f64 / 64.0);
            for (sign, adv) in [(1.0, 1.0), (-1.0, -1.0)] {
                let action = vec![mu0 + sign * offset];
                samples.push(Sample {
                    old_log_prob: policy.log_prob(&state, &action).unwrap(),
                    state: state.clone(),
                    action,
                    advantage: adv,
                    value_target: 0.0,
                });
            }
        }
        let config = PpoConfig {
            epochs: 4,
            minibatch: 32,
            adam: crate::numcore::AdamConfig {
                learning_rate: 1e-3,
                ..Default::default()
            },
            ..PpoConfig::default()
        };
        let mut opt = PolicyOptimizer::new(&policy, &config);
        let stats = ppo_update(&mut policy, &mut opt, &samples, &config, &mut rng).unwrap();
        let mu1 = policy.mean_action(&state).unwrap()[0];
        assert!(mu1 > mu0, "{mu0} -> {mu1}");
        assert!(stats.approx_kl >= 0.0);
    }

    #[test]
    fn value_net_fits_constant_target() {
        let mut rng = seeding::rng(8);
        let mut policy = Policy::new(1, 1, &[8], 0.0, &mut rng).unwrap();
        let samples: Vec<Sample> = (0..32)
            .map(|i| Sample {
                state: vec![i as f64 / 32.0],
                action: vec![0.0],
                old_log_prob: policy.log_prob(&[i as f64 / 32.0], &[0.0]).unwrap(),
                advantage: 0.0,
                value_target: 0.5,
            })
            .collect();
        let config = PpoConfig {
            epochs: 200,
            minibatch: 32,
            adam: crate::numcore::AdamConfig {
                learning_rate: 1e-2,
                ..Default::default()
            },
            ..PpoConfig::default()
        };
        let mut opt = PolicyOptimizer::new(&policy, &config);
        ppo_update(&mut policy, &mut opt, &samples, &config, &mut rng).unwrap();
        assert!((policy.state_value(&[0.5]).unwrap() - 0.5).abs() < 0.05);
    }
}
