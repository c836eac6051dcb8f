use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{Env, EnvSpec, ScriptedPolicy};
use crate::error::{Error, Result};
use crate::tdrp::{embedding_gap_correlation, raw_gap_correlation, valid_anchor_count, Encoder, TdrpConfig};
use crate::{seeding, Trajectory};

use super::io::export_embeddings;
use super::metrics::write_csv;
use super::train::run_episode;

/// Episodes of the noisy scripted controller, one seeded stream per episode.
pub fn scripted_trajectories(spec: &EnvSpec, policy: ScriptedPolicy, episodes: usize, seed: u64) -> Result<Vec<Trajectory>> {
    let mut env = Env::new(spec.clone())?;
    (0..episodes)
        .map(|i| {
            let ep_seed = seeding::mix(seed, i as u64);
            let mut rng = seeding::rng(seeding::derive(ep_seed, "scripted"));
            let initial = env.reset(ep_seed);
            run_episode(&mut env, initial, |s| Ok(policy.act(spec, s, &mut rng)))
        })
        .collect()
}

/// Scripted episodes starting from uniformly drawn free positions instead of
/// the task's start region.
pub fn scripted_trajectories_from_anywhere(
    spec: &EnvSpec,
    policy: ScriptedPolicy,
    episodes: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    let mut env = Env::new(spec.clone())?;
    let (lo, hi) = spec.extent();
    let mut out = Vec::with_capacity(episodes);
    let mut draw = seeding::child_rng(seed, "starts");
    let mut i = 0u64;
    while out.len() < episodes {
        let p: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| draw.random_range(*a..=*b)).collect();
        if !spec.is_free(&p) || spec.is_success(&p) {
            continue;
        }
        let ep_seed = seeding::mix(seed, i);
        i += 1;
        let mut rng = seeding::rng(seeding::derive(ep_seed, "scripted"));
        let initial = env.reset_at(&p, ep_seed)?;
        out.push(run_episode(&mut env, initial, |s| Ok(policy.act(spec, s, &mut rng)))?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub step: usize,
    /// Spearman correlation of embedding distance with timestep gap.
    pub spearman: f64,
    /// Same statistic for raw-state Euclidean distance.
    pub raw_spearman: f64,
    pub final_loss: f64,
}

/// Train one encoder per `step` on a shared, frozen buffer and report the
/// distance/gap correlation on `eval` (the training buffer when empty).
///
/// Every encoder starts from the same seeded initialisation. With
/// `out_dir` set, `ablation.csv` and `embeddings_step_<s>.csv` are written.
pub fn run_step_ablation(
    tdrp: &TdrpConfig,
    steps: &[usize],
    buffer: &[Trajectory],
    eval: &[Trajectory],
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<Vec<AblationRow>> {
    if buffer.is_empty() {
        return Err(Error::Empty("ablation buffer"));
    }
    if steps.is_empty() {
        return Err(Error::Empty("ablation step list"));
    }
    let longest = buffer.iter().map(Trajectory::len).max().unwrap_or(0);
    for &step in steps {
        let anchors: usize = buffer.iter().map(|t| valid_anchor_count(t.states.len(), step)).sum();
        if step == 0 || anchors == 0 {
            return Err(Error::InvalidConfig(format!(
                "step {step} leaves no anchor with a non-empty negative window (longest trajectory has {longest} transitions)"
            )));
        }
    }
    let eval: Vec<&Trajectory> = if eval.is_empty() { buffer.iter().collect() } else { eval.iter().collect() };
    let raw = raw_gap_correlation(&eval)?;
    let state_dim = buffer[0].states[0].len();
    let mut rows = Vec::with_capacity(steps.len());
    for &step in steps {
        let config = TdrpConfig { step, ..tdrp.clone() };
        let mut encoder = Encoder::new(state_dim, config, &mut seeding::child_rng(seed, "encoder"))?;
        let stats = encoder.train(buffer, &mut seeding::child_rng(seed, "encoder-train"))?;
        let tail = &stats.losses[stats.losses.len().saturating_sub(20)..];
        rows.push(AblationRow {
            step,
            spearman: embedding_gap_correlation(&encoder, &eval)?,
            raw_spearman: raw,
            final_loss: crate::stats::mean(tail),
        });
        if let Some(dir) = out_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            export_embeddings(&dir.join(format!("embeddings_step_{step}.csv")), &encoder, &eval)?;
        }
    }
    if let Some(dir) = out_dir {
        write_csv(&dir.join("ablation.csv"), &["step", "spearman", "raw_spearman", "final_loss"], &rows)?;
    }
    Ok(rows)
}
