use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ppo::Policy;
use crate::rewards::GoalSet;
use crate::tdrp::Encoder;

use super::config::ExperimentConfig;

pub const CHECKPOINT_VERSION: u32 = 1;
const FILE_NAME: &str = "checkpoint.json";

/// Everything needed to resume or evaluate a run. Stored as JSON with
/// round-trip float formatting, so reloading is bit-exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub seed: u64,
    pub iteration: usize,
    pub env_steps: usize,
    pub config: ExperimentConfig,
    pub policy: Policy,
    pub encoder: Option<Encoder>,
    pub goal_set: GoalSet,
}

/// `<run_dir>/ckpt/iter_<n>`.
pub fn checkpoint_dir(run_dir: &Path, iteration: usize) -> PathBuf {
    run_dir.join("ckpt").join(format!("iter_{iteration}"))
}

impl Checkpoint {
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(FILE_NAME);
        let text = serde_json::to_string(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Load from a checkpoint directory or the JSON file itself.
    pub fn load(path: &Path) -> Result<Self> {
        let file = if path.is_dir() { path.join(FILE_NAME) } else { path.to_path_buf() };
        let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let ckpt: Checkpoint =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", file.display())))?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointMismatch(format!(
                "checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ckpt.version
            )));
        }
        ckpt.policy.check()?;
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;
    use crate::tdrp::TdrpConfig;

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut rng = seeding::rng(7);
        let policy = Policy::new(3, 2, &[5, 4], -0.7, &mut rng).unwrap();
        let cfg = TdrpConfig {
            hidden: vec![6],
            embedding_dim: 2,
            ..TdrpConfig::default()
        };
        let encoder = Encoder::new(3, cfg, &mut rng).unwrap();
        let mut goal_set = GoalSet::new(4);
        goal_set.insert(vec![0.1, 0.2, 1.0 / 3.0]);
        let ckpt = Checkpoint {
            version: CHECKPOINT_VERSION,
            seed: 9,
            iteration: 3,
            env_steps: 1234,
            config: ExperimentConfig::default(),
            policy,
            encoder: Some(encoder),
            goal_set,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = ckpt.save(&checkpoint_dir(dir.path(), 3)).unwrap();
        assert!(path.ends_with("ckpt/iter_3/checkpoint.json"));
        let back = Checkpoint::load(&checkpoint_dir(dir.path(), 3)).unwrap();
        assert_eq!(back, ckpt);
        for (a, b) in back.policy.mean.as_slice().iter().zip(ckpt.policy.mean.as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn missing_checkpoint_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(Checkpoint::load(&dir.path().join("nothing")).is_err());
    }
}
