use rand::Rng;

use crate::envs::Env;
use crate::error::Result;
use crate::rewards::{GoalSet, RewardShaper};
use crate::Trajectory;

use super::policy::Policy;

/// One collected episode with everything PPO needs.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub trajectory: Trajectory,
    pub log_probs: Vec<f64>,
    /// `V(s_t)` for every transition.
    pub values: Vec<f64>,
    pub shaped_rewards: Vec<f64>,
    /// Embedding distance behind each shaped reward (empty for raw rewards).
    pub distances: Vec<f64>,
    /// `V(s_n)` on a time-limit truncation, `0` on success.
    pub bootstrap_value: f64,
}

impl EpisodeRecord {
    pub fn len(&self) -> usize {
        self.trajectory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectory.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RolloutBatch {
    pub episodes: Vec<EpisodeRecord>,
}

impl RolloutBatch {
    pub fn steps(&self) -> usize {
        self.episodes.iter().map(EpisodeRecord::len).sum()
    }

    pub fn success_rate(&self) -> f64 {
        if self.episodes.is_empty() {
            return 0.0;
        }
        self.episodes.iter().filter(|e| e.trajectory.succeeded()).count() as f64 / self.episodes.len() as f64
    }

    pub fn mean_raw_return(&self) -> f64 {
        crate::stats::mean(&self.episodes.iter().map(|e| e.trajectory.raw_return()).collect::<Vec<_>>())
    }

    pub fn mean_shaped_reward(&self) -> f64 {
        let all: Vec<f64> = self.episodes.iter().flat_map(|e| e.shaped_rewards.iter().copied()).collect();
        crate::stats::mean(&all)
    }

    /// Mean embedding distance over shaped steps, NaN when nothing was shaped.
    pub fn mean_distance(&self) -> f64 {
        let all: Vec<f64> = self.episodes.iter().flat_map(|e| e.distances.iter().copied()).collect();
        crate::stats::mean(&all)
    }

    pub fn trajectories(&self) -> impl Iterator<Item = &Trajectory> {
        self.episodes.iter().map(|e| &e.trajectory)
    }
}

/// Run whole episodes until at least `steps` transitions are collected.
///
/// The shaped reward of transition `t` is computed from `s_t`. Final states of
/// successful episodes are appended to `goal_set` when one is given.
pub fn collect_rollout<R: Rng + ?Sized>(
    env: &mut Env,
    policy: &Policy,
    shaper: &RewardShaper,
    steps: usize,
    rng: &mut R,
    mut goal_set: Option<&mut GoalSet>,
) -> Result<RolloutBatch> {
    let mut batch = RolloutBatch::default();
    let mut collected = 0;
    while collected < steps.max(1) {
        let episode_seed: u64 = rng.random();
        let mut state = env.reset(episode_seed);
        let mut rec = EpisodeRecord {
            trajectory: Trajectory::new(state.clone()),
            log_probs: Vec::new(),
            values: Vec::new(),
            shaped_rewards: Vec::new(),
            distances: Vec::new(),
            bootstrap_value: 0.0,
        };
        loop {
            let (action, logp, value) = policy.act(&state, rng)?;
            let result = env.step(&action)?;
            let shaped = shaper.shape(result.reward, &state)?;
            rec.log_probs.push(logp);
            rec.values.push(value);
            rec.shaped_rewards.push(shaped.reward);
            if let Some(d) = shaped.distance {
                rec.distances.push(d);
            }
            rec.trajectory
                .push(action, result.reward, result.state.clone(), result.done, result.success);
            let (done, truncated) = (result.done, result.truncated());
            state = result.state;
            if done {
                if truncated {
                    rec.bootstrap_value = policy.state_value(&state)?;
                }
                break;
            }
        }
        collected += rec.len();
        if let Some(gs) = goal_set.as_deref_mut() {
            gs.update(rec.trajectory.final_state(), rec.trajectory.succeeded());
        }
        batch.episodes.push(rec);
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvSpec;
    use crate::seeding;

    #[test]
    fn raw_mode_passes_rewards_through() {
        let mut rng = seeding::rng(3);
        let spec = EnvSpec::chain();
        let policy = Policy::new(spec.state_dim(), spec.action_dim(), &[8], 0.0, &mut rng).unwrap();
        let mut env = Env::new(spec).unwrap();
        let batch = collect_rollout(&mut env, &policy, &RewardShaper::identity(), 200, &mut rng, None).unwrap();
        assert!(batch.steps() >= 200);
        for e in &batch.episodes {
            assert_eq!(e.shaped_rewards, e.trajectory.raw_rewards);
            assert!(e.distances.is_empty());
            assert_eq!(e.log_probs.len(), e.len());
        }
    }

    #[test]
    fn log_probs_match_collection_policy() {
        let mut rng = seeding::rng(4);
        let spec = EnvSpec::umaze();
        let policy = Policy::new(spec.state_dim(), spec.action_dim(), &[8], -0.5, &mut rng).unwrap();
        let mut env = Env::new(spec).unwrap();
        let batch = collect_rollout(&mut env, &policy, &RewardShaper::identity(), 50, &mut rng, None).unwrap();
        let e = &batch.episodes[0];
        for t in 0..e.len() {
            let lp = policy.log_prob(&e.trajectory.states[t], &e.trajectory.actions[t]).unwrap();
            assert_eq!(lp, e.log_probs[t]);
        }
    }

    #[test]
    fn same_seed_same_batch() {
        let run = || {
            let mut rng = seeding::rng(11);
            let spec = EnvSpec::umaze();
            let policy = Policy::new(spec.state_dim(), spec.action_dim(), &[8], 0.0, &mut rng).unwrap();
            let mut env = Env::new(spec).unwrap();
            collect_rollout(&mut env, &policy, &RewardShaper::identity(), 300, &mut rng, None).unwrap()
        };
        assert_eq!(run(), run());
    }
}
