//! Desk-scale configurations used by the acceptance suite and the CLI.
//!
//! `ExperimentConfig::default()` carries the paper's hyperparameters
//! (256-128-64 networks, 2048-step rollouts, lr 1e-4, step 50). The presets
//! below shrink networks and batches so a full experiment fits on one CPU
//! core in minutes.

use crate::envs::{EnvSpec, ScriptedPolicy};
use crate::numcore::AdamConfig;
use crate::ppo::PpoConfig;
use crate::rewards::{RewardMode, RewardSpec};
use crate::tdrp::TdrpConfig;

use super::config::{ChainConfig, ExperimentConfig};

fn adam(learning_rate: f64) -> AdamConfig {
    AdamConfig {
        learning_rate,
        ..AdamConfig::default()
    }
}

/// Small PPO used by every desk-scale preset.
pub fn desk_ppo() -> PpoConfig {
    PpoConfig {
        minibatch: 256,
        epochs: 8,
        adam: adam(3e-4),
        rollout_steps: 1024,
        hidden: vec![64, 64],
        init_log_std: -0.5,
        ..PpoConfig::default()
    }
}

/// Small encoder trained online, one short round per iteration.
pub fn desk_tdrp(step: usize) -> TdrpConfig {
    TdrpConfig {
        step,
        embedding_dim: 16,
        hidden: vec![64, 64],
        anchors: 64,
        grad_steps: 20,
        pairs: 4,
        adam: adam(1e-3),
        ..TdrpConfig::default()
    }
}

/// Sparse-reward U-maze with 8 distractor dimensions.
pub fn umaze(mode: RewardMode) -> ExperimentConfig {
    ExperimentConfig {
        env: EnvSpec::umaze(),
        tdrp: desk_tdrp(8),
        ppo: desk_ppo(),
        reward: RewardSpec {
            mode,
            ..RewardSpec::default()
        },
        iterations: 300,
        eval_episodes: 10,
        encoder_warmup: 3000,
        checkpoint_every: 100,
        ..ExperimentConfig::default()
    }
}

/// Controller used to record U-maze demonstrations and encoder data.
pub fn umaze_demonstrator() -> ScriptedPolicy {
    ScriptedPolicy { speed: 1.0, noise: 0.3 }
}

/// Encoder trained offline on U-maze demonstrations.
pub fn umaze_encoder() -> TdrpConfig {
    TdrpConfig {
        grad_steps: 3000,
        ..desk_tdrp(8)
    }
}

/// Chain long enough that a slow noisy walker never reaches the goal within
/// `T = 64`, so every trajectory spans the full horizon.
pub fn ablation_chain() -> EnvSpec {
    EnvSpec {
        chain_length: 8.0,
        ..EnvSpec::chain()
    }
}

pub fn ablation_walker() -> ScriptedPolicy {
    ScriptedPolicy { speed: 0.5, noise: 0.5 }
}

pub fn ablation_encoder() -> TdrpConfig {
    TdrpConfig {
        grad_steps: 1000,
        ..desk_tdrp(8)
    }
}

/// Default chain with raw rewards, the PPO sanity floor.
pub fn chain_sanity() -> ExperimentConfig {
    ExperimentConfig {
        env: EnvSpec::chain(),
        ppo: PpoConfig {
            rollout_steps: 512,
            minibatch: 128,
            ..desk_ppo()
        },
        iterations: 200,
        eval_episodes: 10,
        ..ExperimentConfig::default()
    }
}

/// Two-skill arena. `env.skill` selects the skill for single-skill training.
pub fn chain2skill() -> ExperimentConfig {
    ExperimentConfig {
        env: EnvSpec::chain2skill(),
        tdrp: TdrpConfig {
            grad_steps: 2000,
            ..desk_tdrp(8)
        },
        ppo: PpoConfig {
            rollout_steps: 512,
            minibatch: 128,
            ..desk_ppo()
        },
        reward: RewardSpec {
            lambda2: 0.1,
            ..RewardSpec::default()
        },
        eval_episodes: 10,
        chain: ChainConfig::default(),
        ..ExperimentConfig::default()
    }
}

/// Look a preset up by name.
pub fn by_name(name: &str) -> Option<ExperimentConfig> {
    Some(match name {
        "paper" => ExperimentConfig::default(),
        "umaze-shaped" => umaze(RewardMode::ClusteredGoals),
        "umaze-raw" => umaze(RewardMode::None),
        "chain-sanity" => chain_sanity(),
        "chain2skill" => chain2skill(),
        _ => return None,
    })
}

pub const NAMES: [&str; 5] = ["paper", "umaze-shaped", "umaze-raw", "chain-sanity", "chain2skill"];
