//! Flat `key=value` experiment configuration.
//!
//! Every field is addressable by a dotted key (`ppo.gamma`, `env.id`, ...).
//! Lines starting with `#` and blank lines are ignored. Lists are
//! comma-separated; optional values accept `none`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::envs::{EnvId, EnvSpec, Skill};
use crate::error::{Error, Result};
use crate::ppo::PpoConfig;
use crate::rewards::{RewardMode, RewardSpec};
use crate::tdrp::TdrpConfig;
use crate::Vector;

/// Settings specific to the skill-chaining pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// PPO iterations used to pretrain skill A and skill B.
    pub pretrain_a: usize,
    pub pretrain_b: usize,
    /// Fine-tuning iterations of skill A with the chain reward.
    pub finetune: usize,
    /// Cluster count over skill B's initial-state embeddings.
    pub clusters: usize,
    /// Skill B initial states sampled for clustering.
    pub init_samples: usize,
    /// Random-policy episodes added to the encoder buffer.
    pub explore_episodes: usize,
    /// Episodes per skill policy added to the encoder buffer.
    pub skill_episodes: usize,
    /// Chained evaluation episodes (before and after fine-tuning).
    pub eval_episodes: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            pretrain_a: 40,
            pretrain_b: 60,
            finetune: 40,
            clusters: 20,
            init_samples: 400,
            explore_episodes: 200,
            skill_episodes: 100,
            eval_episodes: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub tdrp: TdrpConfig,
    pub ppo: PpoConfig,
    pub reward: RewardSpec,
    /// Outer iterations I_end.
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Evaluation episodes after every iteration.
    pub eval_episodes: usize,
    /// Raw goal states, one per row, seeding the goal set.
    pub demo_file: Option<PathBuf>,
    /// Demonstration trajectories kept permanently in the encoder buffer.
    pub demo_trajectories: Option<PathBuf>,
    /// Gradient steps on the demonstration trajectories before the first
    /// iteration.
    pub encoder_warmup: usize,
    /// Transitions kept in the encoder training buffer.
    pub buffer_capacity: usize,
    /// Checkpoint period in iterations; `0` keeps only the first and last.
    pub checkpoint_every: usize,
    pub chain: ChainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvSpec::chain(),
            tdrp: TdrpConfig::default(),
            ppo: PpoConfig::default(),
            reward: RewardSpec::default(),
            iterations: 200,
            seeds: vec![0],
            output_dir: PathBuf::from("runs"),
            eval_episodes: 10,
            demo_file: None,
            demo_trajectories: None,
            encoder_warmup: 0,
            buffer_capacity: 50_000,
            checkpoint_every: 50,
            chain: ChainConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{key}: cannot parse `{value}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let value = value.trim();
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v)).collect()
}

fn is_none(value: &str) -> bool {
    matches!(value.trim(), "" | "none")
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or_else(|| "none".to_string(), |p| p.display().to_string())
}

impl ExperimentConfig {
    /// Apply one `key=value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let v = value.trim();
        match key {
            "env.id" => self.env.id = EnvId::parse(v)?,
            "env.skill" => self.env.skill = Skill::parse(v)?,
            "env.horizon" => self.env.horizon = parse(key, v)?,
            "env.distractors" => self.env.distractors = parse(key, v)?,
            "env.noise_scale" => self.env.noise_scale = parse(key, v)?,
            "env.seed" => self.env.seed = parse(key, v)?,
            "env.max_step" => self.env.max_step = parse(key, v)?,
            "env.goal_radius" => self.env.goal_radius = parse(key, v)?,
            "env.chain_length" => self.env.chain_length = parse(key, v)?,
            "env.arm_length" => self.env.arm_length = parse(key, v)?,

            "tdrp.step" => self.tdrp.step = parse(key, v)?,
            "tdrp.embedding_dim" => self.tdrp.embedding_dim = parse(key, v)?,
            "tdrp.hidden" => self.tdrp.hidden = parse_list(key, v)?,
            "tdrp.margin" => self.tdrp.margin = parse(key, v)?,
            "tdrp.anchors" => self.tdrp.anchors = parse(key, v)?,
            "tdrp.grad_steps" => self.tdrp.grad_steps = parse(key, v)?,
            "tdrp.pairs" => self.tdrp.pairs = parse(key, v)?,
            "tdrp.learning_rate" => self.tdrp.adam.learning_rate = parse(key, v)?,
            "tdrp.beta1" => self.tdrp.adam.beta1 = parse(key, v)?,
            "tdrp.beta2" => self.tdrp.adam.beta2 = parse(key, v)?,
            "tdrp.eps" => self.tdrp.adam.eps = parse(key, v)?,

            "ppo.gamma" => self.ppo.gamma = parse(key, v)?,
            "ppo.gae_lambda" => self.ppo.gae_lambda = parse(key, v)?,
            "ppo.clip" => self.ppo.clip = parse(key, v)?,
            "ppo.minibatch" => self.ppo.minibatch = parse(key, v)?,
            "ppo.epochs" => self.ppo.epochs = parse(key, v)?,
            "ppo.critic_coef" => self.ppo.critic_coef = parse(key, v)?,
            "ppo.entropy_coef" => self.ppo.entropy_coef = parse(key, v)?,
            "ppo.learning_rate" => self.ppo.adam.learning_rate = parse(key, v)?,
            "ppo.beta1" => self.ppo.adam.beta1 = parse(key, v)?,
            "ppo.beta2" => self.ppo.adam.beta2 = parse(key, v)?,
            "ppo.eps" => self.ppo.adam.eps = parse(key, v)?,
            "ppo.horizon" => self.ppo.horizon = parse(key, v)?,
            "ppo.rollout_steps" => self.ppo.rollout_steps = parse(key, v)?,
            "ppo.hidden" => self.ppo.hidden = parse_list(key, v)?,
            "ppo.init_log_std" => self.ppo.init_log_std = parse(key, v)?,

            "reward.mode" => self.reward.mode = RewardMode::parse(v)?,
            "reward.lambda1" => self.reward.lambda1 = parse(key, v)?,
            "reward.lambda2" => self.reward.lambda2 = parse(key, v)?,
            "reward.clusters" => self.reward.clusters = parse(key, v)?,
            "reward.goal" => {
                self.reward.goal_state = if is_none(v) { None } else { Some(parse_list::<f64>(key, v)?) }
            }
            "reward.goal_capacity" => self.reward.goal_capacity = parse(key, v)?,

            "iterations" => self.iterations = parse(key, v)?,
            "seeds" => self.seeds = parse_list(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "eval_episodes" => self.eval_episodes = parse(key, v)?,
            "demo_file" => self.demo_file = if is_none(v) { None } else { Some(PathBuf::from(v)) },
            "demo_trajectories" => {
                self.demo_trajectories = if is_none(v) { None } else { Some(PathBuf::from(v)) }
            }
            "encoder_warmup" => self.encoder_warmup = parse(key, v)?,
            "buffer_capacity" => self.buffer_capacity = parse(key, v)?,
            "checkpoint_every" => self.checkpoint_every = parse(key, v)?,

            "chain.pretrain_a" => self.chain.pretrain_a = parse(key, v)?,
            "chain.pretrain_b" => self.chain.pretrain_b = parse(key, v)?,
            "chain.finetune" => self.chain.finetune = parse(key, v)?,
            "chain.clusters" => self.chain.clusters = parse(key, v)?,
            "chain.init_samples" => self.chain.init_samples = parse(key, v)?,
            "chain.explore_episodes" => self.chain.explore_episodes = parse(key, v)?,
            "chain.skill_episodes" => self.chain.skill_episodes = parse(key, v)?,
            "chain.eval_episodes" => self.chain.eval_episodes = parse(key, v)?,

            other => return Err(Error::Parse(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Apply an assignment written as `key=value`.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got `{assignment}`")))?;
        self.set(k, v)
    }

    /// Apply every assignment of a config text.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            self.set_assignment(line)
                .map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Serialise every key; parsing the result reproduces `self`.
    pub fn to_text(&self) -> String {
        let e = &self.env;
        let t = &self.tdrp;
        let p = &self.ppo;
        let r = &self.reward;
        let c = &self.chain;
        let goal = r.goal_state.as_ref().map_or_else(|| "none".to_string(), |g: &Vector| join(g));
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("env.id", e.id.name().into());
        kv("env.skill", e.skill.name().into());
        kv("env.horizon", e.horizon.to_string());
        kv("env.distractors", e.distractors.to_string());
        kv("env.noise_scale", e.noise_scale.to_string());
        kv("env.seed", e.seed.to_string());
        kv("env.max_step", e.max_step.to_string());
        kv("env.goal_radius", e.goal_radius.to_string());
        kv("env.chain_length", e.chain_length.to_string());
        kv("env.arm_length", e.arm_length.to_string());
        kv("tdrp.step", t.step.to_string());
        kv("tdrp.embedding_dim", t.embedding_dim.to_string());
        kv("tdrp.hidden", join(&t.hidden));
        kv("tdrp.margin", t.margin.to_string());
        kv("tdrp.anchors", t.anchors.to_string());
        kv("tdrp.grad_steps", t.grad_steps.to_string());
        kv("tdrp.pairs", t.pairs.to_string());
        kv("tdrp.learning_rate", t.adam.learning_rate.to_string());
        kv("tdrp.beta1", t.adam.beta1.to_string());
        kv("tdrp.beta2", t.adam.beta2.to_string());
        kv("tdrp.eps", t.adam.eps.to_string());
        kv("ppo.gamma", p.gamma.to_string());
        kv("ppo.gae_lambda", p.gae_lambda.to_string());
        kv("ppo.clip", p.clip.to_string());
        kv("ppo.minibatch", p.minibatch.to_string());
        kv("ppo.epochs", p.epochs.to_string());
        kv("ppo.critic_coef", p.critic_coef.to_string());
        kv("ppo.entropy_coef", p.entropy_coef.to_string());
        kv("ppo.learning_rate", p.adam.learning_rate.to_string());
        kv("ppo.beta1", p.adam.beta1.to_string());
        kv("ppo.beta2", p.adam.beta2.to_string());
        kv("ppo.eps", p.adam.eps.to_string());
        kv("ppo.horizon", p.horizon.to_string());
        kv("ppo.rollout_steps", p.rollout_steps.to_string());
        kv("ppo.hidden", join(&p.hidden));
        kv("ppo.init_log_std", p.init_log_std.to_string());
        kv("reward.mode", r.mode.name().into());
        kv("reward.lambda1", r.lambda1.to_string());
        kv("reward.lambda2", r.lambda2.to_string());
        kv("reward.clusters", r.clusters.to_string());
        kv("reward.goal", goal);
        kv("reward.goal_capacity", r.goal_capacity.to_string());
        kv("iterations", self.iterations.to_string());
        kv("seeds", join(&self.seeds));
        kv("output_dir", self.output_dir.display().to_string());
        kv("eval_episodes", self.eval_episodes.to_string());
        kv("demo_file", opt_path(&self.demo_file));
        kv("demo_trajectories", opt_path(&self.demo_trajectories));
        kv("encoder_warmup", self.encoder_warmup.to_string());
        kv("buffer_capacity", self.buffer_capacity.to_string());
        kv("checkpoint_every", self.checkpoint_every.to_string());
        kv("chain.pretrain_a", c.pretrain_a.to_string());
        kv("chain.pretrain_b", c.pretrain_b.to_string());
        kv("chain.finetune", c.finetune.to_string());
        kv("chain.clusters", c.clusters.to_string());
        kv("chain.init_samples", c.init_samples.to_string());
        kv("chain.explore_episodes", c.explore_episodes.to_string());
        kv("chain.skill_episodes", c.skill_episodes.to_string());
        kv("chain.eval_episodes", c.eval_episodes.to_string());
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.tdrp.validate()?;
        self.ppo.validate()?;
        self.reward.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds must not be empty".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::InvalidConfig("eval_episodes must be at least 1".into()));
        }
        if self.buffer_capacity == 0 {
            return Err(Error::InvalidConfig("buffer_capacity must be at least 1".into()));
        }
        if let Some(goal) = &self.reward.goal_state {
            if goal.len() != self.env.state_dim() {
                return Err(Error::InvalidConfig(format!(
                    "reward.goal has {} coordinates, the env state has {}",
                    goal.len(),
                    self.env.state_dim()
                )));
            }
        }
        if self.chain.clusters == 0 {
            return Err(Error::InvalidConfig("chain.clusters must be at least 1".into()));
        }
        Ok(())
    }
}
