//! Transition-distance representation learning and auxiliary reward shaping.
//!
//! The crate is organised bottom-up:
//!
//! - [`numcore`]: dense feed-forward networks, analytic gradients, Adam and a
//!   finite-difference checker.
//! - [`envs`]: deterministic desk-scale environments (`chain`, `umaze`,
//!   `chain2skill`).
//! - [`tdrp`]: contrastive window construction, the triplet objective and the
//!   encoder whose embedding distance tracks the number of transitions
//!   between two states.
//! - [`clustering`]: seeded k-means used to summarise goal sets.
//! - [`rewards`]: goal, clustered-goal and skill-chain auxiliary rewards plus
//!   online goal-set maintenance.
//! - [`ppo`]: Gaussian actor-critic, GAE and the clipped surrogate update.
//! - [`harness`]: experiment configs, seeding, metrics files, checkpoints and
//!   the single-task, skill-chain and `step`-ablation pipelines.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod envs;
pub mod error;
pub mod harness;
pub mod numcore;
pub mod ppo;
pub mod rewards;
pub mod seeding;
pub mod stats;
pub mod tdrp;
pub mod trajectory;

pub use error::{Error, Result};
pub use trajectory::Trajectory;

/// Real-valued vector used for states, actions and embeddings.
pub type Vector = Vec<f64>;
