use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand_chacha::ChaCha8Rng;

use crate::envs::{Env, EnvSpec};
use crate::error::{ensure_dim, Error, Result};
use crate::ppo::{build_samples, collect_rollout, ppo_update, Policy, PolicyOptimizer, RolloutBatch, UpdateStats};
use crate::rewards::{GoalSet, RewardMode, RewardShaper};
use crate::tdrp::{Encoder, TrainStats};
use crate::{seeding, stats, Trajectory, Vector};

use super::checkpoint::{checkpoint_dir, Checkpoint, CHECKPOINT_VERSION};
use super::config::ExperimentConfig;
use super::io;
use super::metrics::{write_metrics, write_timing, MetricsRow, TimingRow};

/// Encoder training data: pinned demonstrations plus a FIFO of recent
/// trajectories bounded by a transition count.
#[derive(Clone, Debug, Default)]
pub struct TrajectoryBuffer {
    pinned: Vec<Trajectory>,
    recent: VecDeque<Trajectory>,
    capacity: usize,
    transitions: usize,
}

impl TrajectoryBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            ..Self::default()
        }
    }

    pub fn pin(&mut self, trajectory: Trajectory) {
        self.pinned.push(trajectory);
    }

    /// Add a trajectory, evicting the oldest ones beyond capacity. The newest
    /// trajectory is always kept.
    pub fn push(&mut self, trajectory: Trajectory) {
        self.transitions += trajectory.len();
        self.recent.push_back(trajectory);
        while self.transitions > self.capacity && self.recent.len() > 1 {
            let old = self.recent.pop_front().unwrap();
            self.transitions -= old.len();
        }
    }

    /// Transitions held outside the pinned set.
    pub fn transitions(&self) -> usize {
        self.transitions
    }

    pub fn len(&self) -> usize {
        self.pinned.len() + self.recent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn trajectories(&self) -> Vec<&Trajectory> {
        self.pinned.iter().chain(self.recent.iter()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub success_rate: f64,
    pub mean_raw_return: f64,
    pub episodes: Vec<Trajectory>,
}

/// Run one episode from `state` with the given controller.
pub fn run_episode<F>(env: &mut Env, initial: Vector, mut actor: F) -> Result<Trajectory>
where
    F: FnMut(&[f64]) -> Result<Vector>,
{
    let mut traj = Trajectory::new(initial);
    loop {
        let action = actor(traj.final_state())?;
        let r = env.step(&action)?;
        let done = r.done;
        traj.push(action, r.reward, r.state, r.done, r.success);
        if done {
            return Ok(traj);
        }
    }
}

/// Evaluate an arbitrary controller on `episodes` seeded episodes.
pub fn eval_actor<F>(spec: &EnvSpec, episodes: usize, seed: u64, mut actor: F) -> Result<EvalResult>
where
    F: FnMut(&[f64]) -> Result<Vector>,
{
    if episodes == 0 {
        return Err(Error::InvalidConfig("evaluation needs at least one episode".into()));
    }
    let mut env = Env::new(spec.clone())?;
    let mut out = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let initial = env.reset(seeding::mix(seed, i as u64));
        out.push(run_episode(&mut env, initial, &mut actor)?);
    }
    let successes = out.iter().filter(|t| t.succeeded()).count();
    let returns: Vec<f64> = out.iter().map(Trajectory::raw_return).collect();
    Ok(EvalResult {
        success_rate: successes as f64 / episodes as f64,
        mean_raw_return: stats::mean(&returns),
        episodes: out,
    })
}

/// Deterministic evaluation with the policy mean action and raw rewards.
pub fn eval_policy(policy: &Policy, spec: &EnvSpec, episodes: usize, seed: u64) -> Result<EvalResult> {
    if policy.state_dim() != spec.state_dim() || policy.action_dim() != spec.action_dim() {
        return Err(Error::CheckpointMismatch(format!(
            "policy maps {} -> {} but env {} has state {} and action {}",
            policy.state_dim(),
            policy.action_dim(),
            spec.id.name(),
            spec.state_dim(),
            spec.action_dim()
        )));
    }
    eval_actor(spec, episodes, seed, |s| policy.mean_action(s))
}

/// Per-iteration outputs beyond the metrics row.
#[derive(Clone, Debug)]
pub struct IterationReport {
    pub row: MetricsRow,
    pub batch: RolloutBatch,
    pub update: UpdateStats,
    pub encoder_stats: Option<TrainStats>,
    pub wall_seconds: f64,
}

/// One seed of the joint encoder/policy loop.
#[derive(Clone, Debug)]
pub struct Trainer {
    config: ExperimentConfig,
    seed: u64,
    env: Env,
    policy: Policy,
    optimizer: PolicyOptimizer,
    encoder: Option<Encoder>,
    encoder_frozen: bool,
    fixed_centers: Option<Vec<Vector>>,
    goal_set: GoalSet,
    buffer: TrajectoryBuffer,
    rollout_rng: ChaCha8Rng,
    update_rng: ChaCha8Rng,
    encoder_rng: ChaCha8Rng,
    iteration: usize,
    env_steps: usize,
}

impl Trainer {
    pub fn new(config: &ExperimentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut spec = config.env.clone();
        spec.seed = seeding::mix(config.env.seed, seeding::derive(seed, "env"));
        let policy = Policy::new(
            spec.state_dim(),
            spec.action_dim(),
            &config.ppo.hidden,
            config.ppo.init_log_std,
            &mut seeding::child_rng(seed, "policy"),
        )?;
        let encoder = if config.reward.mode.uses_encoder() {
            Some(Encoder::new(
                spec.state_dim(),
                config.tdrp.clone(),
                &mut seeding::child_rng(seed, "encoder"),
            )?)
        } else {
            None
        };
        let mut goal_set = GoalSet::new(config.reward.goal_capacity);
        if let Some(path) = &config.demo_file {
            for s in io::read_states(path)? {
                ensure_dim("demonstration goal state", spec.state_dim(), s.len())?;
                goal_set.insert(s);
            }
        }
        let mut buffer = TrajectoryBuffer::new(config.buffer_capacity);
        if let Some(path) = &config.demo_trajectories {
            for t in io::read_trajectories(path)? {
                ensure_dim("demonstration trajectory state", spec.state_dim(), t.states[0].len())?;
                buffer.pin(t);
            }
        }
        let mut encoder = encoder;
        let mut encoder_rng = seeding::child_rng(seed, "encoder-train");
        if let Some(enc) = encoder.as_mut() {
            if config.encoder_warmup > 0 && !buffer.is_empty() {
                enc.train_steps(&buffer.trajectories(), config.encoder_warmup, &mut encoder_rng)?;
            }
        }
        Ok(Self {
            optimizer: PolicyOptimizer::new(&policy, &config.ppo),
            env: Env::new(spec)?,
            policy,
            encoder,
            encoder_frozen: false,
            fixed_centers: None,
            goal_set,
            buffer,
            rollout_rng: seeding::child_rng(seed, "rollout"),
            update_rng: seeding::child_rng(seed, "ppo-update"),
            encoder_rng,
            iteration: 0,
            env_steps: 0,
            config: config.clone(),
            seed,
        })
    }

    /// Continue from an existing policy (fine-tuning); optimizer state starts
    /// fresh.
    pub fn with_policy(mut self, policy: Policy) -> Result<Self> {
        ensure_dim("policy state", self.env.spec().state_dim(), policy.state_dim())?;
        ensure_dim("policy action", self.env.spec().action_dim(), policy.action_dim())?;
        self.optimizer = PolicyOptimizer::new(&policy, &self.config.ppo);
        self.policy = policy;
        Ok(self)
    }

    /// Use a fixed encoder and a fixed target set (skill-chain fine-tuning).
    pub fn with_frozen_targets(mut self, encoder: Encoder, centers: Vec<Vector>) -> Result<Self> {
        ensure_dim("encoder state", self.env.spec().state_dim(), encoder.state_dim())?;
        self.encoder = Some(encoder);
        self.encoder_frozen = true;
        self.fixed_centers = Some(centers);
        Ok(self)
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn encoder(&self) -> Option<&Encoder> {
        self.encoder.as_ref()
    }

    pub fn goal_set(&self) -> &GoalSet {
        &self.goal_set
    }

    pub fn buffer(&self) -> &TrajectoryBuffer {
        &self.buffer
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn env_spec(&self) -> &EnvSpec {
        self.env.spec()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            seed: self.seed,
            iteration: self.iteration,
            env_steps: self.env_steps,
            config: self.config.clone(),
            policy: self.policy.clone(),
            encoder: self.encoder.clone(),
            goal_set: self.goal_set.clone(),
        }
    }

    fn eval_seed(&self) -> u64 {
        seeding::derive(self.seed, "eval")
    }

    /// Reward function for the coming rollout, frozen at the current encoder.
    fn shaper(&mut self) -> Result<RewardShaper> {
        let reward = &self.config.reward;
        let Some(encoder) = &self.encoder else {
            return Ok(RewardShaper::identity());
        };
        let snapshot = encoder.snapshot();
        let centers: Vec<Vector> = match reward.mode {
            RewardMode::None => return Ok(RewardShaper::identity()),
            RewardMode::GoalState => Vec::new(),
            RewardMode::SkillChain => self.fixed_centers.clone().unwrap_or_default(),
            RewardMode::ClusteredGoals => match &self.fixed_centers {
                Some(c) => c.clone(),
                None if self.goal_set.is_empty() => Vec::new(),
                None => {
                    let seed = seeding::mix(seeding::derive(self.seed, "kmeans"), self.iteration as u64);
                    self.goal_set.refresh_centers(&snapshot, reward.clusters, seed)?.to_vec()
                }
            },
        };
        RewardShaper::new(reward, Some(&snapshot), &centers)
    }

    /// One outer iteration: rollout, encoder round, PPO update, evaluation.
    pub fn iterate(&mut self) -> Result<IterationReport> {
        let start = Instant::now();
        let shaper = self.shaper()?;
        let batch = collect_rollout(
            &mut self.env,
            &self.policy,
            &shaper,
            self.config.ppo.rollout_steps,
            &mut self.rollout_rng,
            Some(&mut self.goal_set),
        )?;
        self.env_steps += batch.steps();
        for t in batch.trajectories() {
            self.buffer.push(t.clone());
        }

        let mut encoder_stats = None;
        if let (Some(encoder), false) = (self.encoder.as_mut(), self.encoder_frozen) {
            if self.config.tdrp.grad_steps > 0 {
                match encoder.train(&self.buffer.trajectories(), &mut self.encoder_rng) {
                    Ok(s) => encoder_stats = Some(s),
                    // short episodes only so far; nothing to contrast yet
                    Err(Error::NoValidAnchors { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
        }

        let samples = build_samples(&batch, &self.config.ppo)?;
        let update = ppo_update(
            &mut self.policy,
            &mut self.optimizer,
            &samples,
            &self.config.ppo,
            &mut self.update_rng,
        )?;
        self.iteration += 1;

        let eval = eval_policy(&self.policy, self.env.spec(), self.config.eval_episodes, self.eval_seed())?;
        let row = MetricsRow {
            iteration: self.iteration,
            env_steps: self.env_steps,
            mean_raw_return: eval.mean_raw_return,
            success_rate: eval.success_rate,
            train_success_rate: batch.success_rate(),
            mean_shaped_reward: batch.mean_shaped_reward(),
            encoder_loss: encoder_stats.as_ref().map_or(f64::NAN, TrainStats::mean_loss),
            mean_goal_distance: batch.mean_distance(),
            policy_loss: update.policy_loss,
            value_loss: update.value_loss,
            approx_kl: update.approx_kl,
            clip_fraction: update.clip_fraction,
            goal_set_size: self.goal_set.len(),
        };
        Ok(IterationReport {
            row,
            batch,
            update,
            encoder_stats,
            wall_seconds: start.elapsed().as_secs_f64(),
        })
    }
}

/// Outcome of one seed of [`run_single_task`].
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub seed: u64,
    pub run_dir: PathBuf,
    pub rows: Vec<MetricsRow>,
    pub final_checkpoint: PathBuf,
}

pub fn run_dir(output_dir: &Path, seed: u64) -> PathBuf {
    output_dir.join(format!("seed_{seed}"))
}

fn save_crash_dump(dir: &Path, trainer: &Trainer, err: &Error) -> Result<()> {
    let crash = dir.join("crash");
    trainer.checkpoint().save(&crash)?;
    let path = crash.join("error.txt");
    std::fs::write(&path, format!("{err}\n")).map_err(|e| Error::io(&path, e))
}

/// Train one seed, writing metrics, timing and checkpoints under `dir`.
pub fn run_seed(config: &ExperimentConfig, seed: u64, dir: &Path) -> Result<(Trainer, RunSummary)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg_path = dir.join("config.txt");
    std::fs::write(&cfg_path, config.to_text()).map_err(|e| Error::io(&cfg_path, e))?;
    let mut trainer = Trainer::new(config, seed)?;
    let mut last = trainer.checkpoint().save(&checkpoint_dir(dir, 0))?;
    let mut rows = Vec::with_capacity(config.iterations);
    let mut timing = Vec::with_capacity(config.iterations);
    write_metrics(&dir.join("metrics.csv"), &rows)?;
    write_timing(&dir.join("timing.csv"), &timing)?;
    for _ in 0..config.iterations {
        let report = match trainer.iterate() {
            Ok(r) => r,
            Err(e) => {
                if matches!(e, Error::Diverged(_) | Error::NonFinite(_)) {
                    save_crash_dump(dir, &trainer, &e)?;
                }
                return Err(e);
            }
        };
        let i = report.row.iteration;
        rows.push(report.row);
        timing.push(TimingRow {
            iteration: i,
            wall_seconds: report.wall_seconds,
        });
        write_metrics(&dir.join("metrics.csv"), &rows)?;
        write_timing(&dir.join("timing.csv"), &timing)?;
        let periodic = config.checkpoint_every > 0 && i % config.checkpoint_every == 0;
        if periodic || i == config.iterations {
            last = trainer.checkpoint().save(&checkpoint_dir(dir, i))?;
        }
    }
    let summary = RunSummary {
        seed,
        run_dir: dir.to_path_buf(),
        rows,
        final_checkpoint: last,
    };
    Ok((trainer, summary))
}

/// The joint encoder/policy loop for every configured seed; each seed
/// writes to `output_dir/seed_<s>`.
pub fn run_single_task(config: &ExperimentConfig) -> Result<Vec<RunSummary>> {
    config.validate()?;
    config
        .seeds
        .iter()
        .map(|&seed| run_seed(config, seed, &run_dir(&config.output_dir, seed)).map(|(_, s)| s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::ScriptedPolicy;

    #[test]
    fn buffer_is_fifo_by_transitions() {
        let mut b = TrajectoryBuffer::new(10);
        b.pin(Trajectory::from_states(vec![vec![9.0]; 30]));
        for i in 0..5 {
            b.push(Trajectory::from_states(vec![vec![i as f64]; 5]));
        }
        // each holds 4 transitions; capacity 10 keeps the newest two
        assert_eq!(b.transitions(), 8);
        let firsts: Vec<f64> = b.trajectories().iter().map(|t| t.states[0][0]).collect();
        assert_eq!(firsts, vec![9.0, 3.0, 4.0]);
    }

    #[test]
    fn scripted_chain_policy_always_succeeds() {
        let spec = EnvSpec::chain();
        let mut rng = seeding::rng(0);
        let scripted = ScriptedPolicy::default();
        let r = eval_actor(&spec, 20, 1, |s| Ok(scripted.act(&spec, s, &mut rng))).unwrap();
        assert_eq!(r.success_rate, 1.0);
        assert_eq!(r.mean_raw_return, 1.0);
    }

    #[test]
    fn zero_eval_episodes_rejected() {
        let spec = EnvSpec::chain();
        let p = Policy::new(1, 1, &[4], 0.0, &mut seeding::rng(0)).unwrap();
        assert!(eval_policy(&p, &spec, 0, 0).is_err());
    }

    #[test]
    fn eval_rejects_mismatched_policy() {
        let p = Policy::new(3, 1, &[4], 0.0, &mut seeding::rng(0)).unwrap();
        assert!(matches!(eval_policy(&p, &EnvSpec::chain(), 1, 0), Err(Error::CheckpointMismatch(_))));
    }
}
