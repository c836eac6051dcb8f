use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::kmeans;
use crate::envs::{random_action, Env, EnvSpec, SKILL_B_INIT};
use crate::error::{Error, Result};
use crate::ppo::{collect_rollout, Policy};
use crate::rewards::{nearest_distance, RewardMode, RewardShaper};
use crate::tdrp::Encoder;
use crate::{seeding, stats, Trajectory, Vector};

use super::checkpoint::{checkpoint_dir, Checkpoint};
use super::config::ExperimentConfig;
use super::metrics::write_csv;
use super::train::{eval_policy, run_episode, run_seed, Trainer};

/// One line of `chain_report.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRow {
    pub iteration: usize,
    /// Mean embedding distance from skill A's rollout terminal states to the
    /// nearest center of skill B's initial set.
    pub mean_center_distance: f64,
    /// Same distance over the mean-action evaluation episodes.
    pub eval_center_distance: f64,
    pub chained_success_pre: f64,
    /// Chained success of the fine-tuned skill A after this iteration.
    pub chained_success_post: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainReport {
    pub seed: u64,
    pub rows: Vec<ChainRow>,
    pub success_pre: f64,
    pub success_post: f64,
    /// Fraction of skill A's evaluation terminals inside skill B's initial
    /// region, before and after fine-tuning.
    pub handoff_pre: f64,
    pub handoff_post: f64,
    pub centers: Vec<Vector>,
}

/// Chained evaluation with mean actions: skill A until done, then skill B
/// from A's terminal position. Returns `(chained success, handoff rate)`.
pub fn chained_eval(policy_a: &Policy, policy_b: &Policy, spec: &EnvSpec, episodes: usize, seed: u64) -> Result<(f64, f64)> {
    if episodes == 0 {
        return Err(Error::InvalidConfig("evaluation needs at least one episode".into()));
    }
    let spec_a = spec.skill_a();
    let spec_b = spec.skill_b();
    let mut env_a = Env::new(spec_a.clone())?;
    let mut env_b = Env::new(spec_b.clone())?;
    let (mut successes, mut handoffs) = (0usize, 0usize);
    for i in 0..episodes {
        let ep_seed = seeding::mix(seed, i as u64);
        let initial = env_a.reset(ep_seed);
        let a = run_episode(&mut env_a, initial, |s| policy_a.mean_action(s))?;
        if !a.succeeded() {
            continue;
        }
        let handoff = spec_a.intrinsic(a.final_state()).to_vec();
        if SKILL_B_INIT.contains(&handoff) {
            handoffs += 1;
        }
        let initial = env_b.reset_at(&handoff, seeding::derive(ep_seed, "skill-b"))?;
        let b = run_episode(&mut env_b, initial, |s| policy_b.mean_action(s))?;
        if b.succeeded() {
            successes += 1;
        }
    }
    Ok((successes as f64 / episodes as f64, handoffs as f64 / episodes as f64))
}

/// Random-action episodes from uniformly drawn free positions in the arena.
fn exploration_trajectories(spec: &EnvSpec, episodes: usize, seed: u64) -> Result<Vec<Trajectory>> {
    let mut env = Env::new(spec.clone())?;
    let mut rng = seeding::rng(seed);
    let mut out = Vec::with_capacity(episodes);
    while out.len() < episodes {
        let p = [
            rng.random_range(0.0..crate::envs::ARENA_WIDTH),
            rng.random_range(0.0..crate::envs::ARENA_HEIGHT),
        ];
        if !spec.is_free(&p) {
            continue;
        }
        let initial = env.reset_at(&p, rng.random())?;
        out.push(run_episode(&mut env, initial, |_| Ok(random_action(spec, &mut rng)))?);
    }
    Ok(out)
}

fn policy_trajectories(spec: &EnvSpec, policy: &Policy, episodes: usize, seed: u64) -> Result<Vec<Trajectory>> {
    let mut env = Env::new(spec.clone())?;
    let mut rng = seeding::rng(seed);
    let batch = collect_rollout(&mut env, policy, &RewardShaper::identity(), 1, &mut rng, None)?;
    let mut out: Vec<Trajectory> = batch.trajectories().cloned().collect();
    while out.len() < episodes {
        let b = collect_rollout(&mut env, policy, &RewardShaper::identity(), 1, &mut rng, None)?;
        out.extend(b.trajectories().cloned());
    }
    out.truncate(episodes);
    Ok(out)
}

/// Mean terminal-to-nearest-center distance of skill A's evaluation episodes.
fn eval_center_distance(
    policy: &Policy,
    spec_a: &EnvSpec,
    encoder: &Encoder,
    centers: &[Vector],
    episodes: usize,
    seed: u64,
) -> Result<f64> {
    let r = eval_policy(policy, spec_a, episodes, seed)?;
    let d: Vec<f64> = r
        .episodes
        .iter()
        .map(|t| Ok(nearest_distance(&encoder.encode(t.final_state())?, centers)?.1))
        .collect::<Result<_>>()?;
    Ok(stats::mean(&d))
}

fn load_policy(path: &Path) -> Result<Policy> {
    if !path.exists() {
        return Err(Error::CheckpointMismatch(format!("missing checkpoint {}", path.display())));
    }
    Ok(Checkpoint::load(path)?.policy)
}

/// Train skill A and skill B from scratch on raw rewards under
/// `out_dir/skill_a` and `out_dir/skill_b`. Returns both final checkpoints.
pub fn pretrain_skills(config: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    config.validate()?;
    let mut paths = Vec::with_capacity(2);
    for (name, spec, iterations) in [
        ("skill_a", config.env.skill_a(), config.chain.pretrain_a),
        ("skill_b", config.env.skill_b(), config.chain.pretrain_b),
    ] {
        let mut cfg = config.clone();
        cfg.env = spec;
        cfg.reward.mode = RewardMode::None;
        cfg.iterations = iterations;
        let (_, summary) = run_seed(&cfg, seeding::derive(seed, name), &out_dir.join(name))?;
        paths.push(summary.final_checkpoint);
    }
    let b = paths.pop().unwrap();
    let a = paths.pop().unwrap();
    Ok((a, b))
}

/// Skill-chain fine-tuning of skill A against skill B's initial set.
///
/// Trains a transition-distance encoder on exploration and skill rollouts,
/// clusters the embeddings of skill B's initial states into
/// `chain.clusters` centers, fine-tunes skill A with the chain reward and
/// compares chained success before and after. Writes `chain_report.csv` and
/// the fine-tuned checkpoint under `out_dir`.
pub fn run_skill_chain(config: &ExperimentConfig, seed: u64, ckpt_a: &Path, ckpt_b: &Path, out_dir: &Path) -> Result<ChainReport> {
    config.validate()?;
    let policy_a = load_policy(ckpt_a)?;
    let policy_b = load_policy(ckpt_b)?;
    let base = config.env.clone();
    let spec_a = base.skill_a();
    let spec_b = base.skill_b();
    let chain = &config.chain;

    let mut buffer = exploration_trajectories(&spec_b, chain.explore_episodes, seeding::derive(seed, "explore"))?;
    buffer.extend(policy_trajectories(&spec_a, &policy_a, chain.skill_episodes, seeding::derive(seed, "roll-a"))?);
    buffer.extend(policy_trajectories(&spec_b, &policy_b, chain.skill_episodes, seeding::derive(seed, "roll-b"))?);
    let mut encoder = Encoder::new(spec_a.state_dim(), config.tdrp.clone(), &mut seeding::child_rng(seed, "encoder"))?;
    encoder.train(&buffer, &mut seeding::child_rng(seed, "encoder-train"))?;

    let mut env_b = Env::new(spec_b.clone())?;
    let init_seed = seeding::derive(seed, "init-set");
    let init_embeddings: Vec<Vector> = (0..chain.init_samples.max(1))
        .map(|i| encoder.encode(&env_b.reset(seeding::mix(init_seed, i as u64))))
        .collect::<Result<_>>()?;
    let centers = kmeans(&init_embeddings, chain.clusters, seeding::derive(seed, "kmeans"), 100, 1e-9)?.centers;

    let eval_seed = seeding::derive(seed, "chain-eval");
    let (success_pre, handoff_pre) = chained_eval(&policy_a, &policy_b, &base, chain.eval_episodes, eval_seed)?;

    let mut ft_config = config.clone();
    ft_config.env = spec_a.clone();
    ft_config.reward.mode = RewardMode::SkillChain;
    ft_config.iterations = chain.finetune;
    let mut trainer = Trainer::new(&ft_config, seeding::derive(seed, "finetune"))?
        .with_policy(policy_a.clone())?
        .with_frozen_targets(encoder.clone(), centers.clone())?;
    let mut rows = Vec::with_capacity(chain.finetune);
    for _ in 0..chain.finetune {
        let report = trainer.iterate()?;
        let distances: Vec<f64> = report
            .batch
            .trajectories()
            .map(|t| Ok(nearest_distance(&encoder.encode(t.final_state())?, &centers)?.1))
            .collect::<Result<_>>()?;
        let (post, _) = chained_eval(trainer.policy(), &policy_b, &base, chain.eval_episodes, eval_seed)?;
        rows.push(ChainRow {
            iteration: report.row.iteration,
            mean_center_distance: stats::mean(&distances),
            eval_center_distance: eval_center_distance(trainer.policy(), &spec_a, &encoder, &centers, chain.eval_episodes, eval_seed)?,
            chained_success_pre: success_pre,
            chained_success_post: post,
        });
    }
    let (success_post, handoff_post) = chained_eval(trainer.policy(), &policy_b, &base, chain.eval_episodes, eval_seed)?;

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_csv(
        &out_dir.join("chain_report.csv"),
        &[
            "iteration",
            "mean_center_distance",
            "eval_center_distance",
            "chained_success_pre",
            "chained_success_post",
        ],
        &rows,
    )?;
    trainer.checkpoint().save(&checkpoint_dir(&out_dir.join("finetuned_a"), chain.finetune))?;
    Ok(ChainReport {
        seed,
        rows,
        success_pre,
        success_post,
        handoff_pre,
        handoff_post,
        centers,
    })
}
