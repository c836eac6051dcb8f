//! Experiment orchestration: configs, the joint encoder/policy training loop,
//! skill-chain fine-tuning, the `step` ablation, metrics and checkpoints.

mod ablation;
mod chain;
mod checkpoint;
mod config;
pub mod io;
mod metrics;
pub mod presets;
mod train;

pub use ablation::{run_step_ablation, scripted_trajectories, scripted_trajectories_from_anywhere, AblationRow};
pub use chain::{chained_eval, pretrain_skills, run_skill_chain, ChainReport, ChainRow};
pub use checkpoint::{checkpoint_dir, Checkpoint, CHECKPOINT_VERSION};
pub use config::{ChainConfig, ExperimentConfig};
pub use metrics::{read_csv, read_metrics, write_csv, write_metrics, MetricsRow, TimingRow, METRICS_HEADER};
pub use train::{
    eval_actor, eval_policy, run_dir, run_episode, run_seed, run_single_task, EvalResult, IterationReport, RunSummary,
    Trainer, TrajectoryBuffer,
};
