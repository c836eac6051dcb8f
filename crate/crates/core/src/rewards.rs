//! Auxiliary rewards built on embedding distance, and the online goal set.
//!
//! All three generators subtract a non-negative multiple of an embedding
//! distance from the raw reward, so the shaped reward never exceeds it:
//!
//! - goal state: `r' = r - l1 * |phi(s) - phi(s_g)|`
//! - clustered goals: `r' = r - l1 * min_k |phi(s) - c_k|`
//! - skill chain: `r' = r - l2 * min_k |phi(s) - c_k^next|`

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::clustering::kmeans;
use crate::error::{ensure_dim, Error, Result};
use crate::numcore::distance;
use crate::tdrp::EncoderSnapshot;
use crate::Vector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    None,
    GoalState,
    ClusteredGoals,
    SkillChain,
}

impl RewardMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(RewardMode::None),
            "goal_state" => Ok(RewardMode::GoalState),
            "clustered_goals" => Ok(RewardMode::ClusteredGoals),
            "skill_chain" => Ok(RewardMode::SkillChain),
            other => Err(Error::Parse(format!("unknown reward mode `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RewardMode::None => "none",
            RewardMode::GoalState => "goal_state",
            RewardMode::ClusteredGoals => "clustered_goals",
            RewardMode::SkillChain => "skill_chain",
        }
    }

    pub fn uses_encoder(self) -> bool {
        self != RewardMode::None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    pub mode: RewardMode,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Cluster count n.
    pub clusters: usize,
    pub goal_state: Option<Vector>,
    pub goal_capacity: usize,
}

impl Default for RewardSpec {
    fn default() -> Self {
        Self {
            mode: RewardMode::None,
            lambda1: 0.1,
            lambda2: 0.1,
            clusters: 8,
            goal_state: None,
            goal_capacity: 128,
        }
    }
}

impl RewardSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("reward: {m}")));
        if !(self.lambda1 >= 0.0) || !(self.lambda2 >= 0.0) {
            return bad("lambda1 and lambda2 must be non-negative");
        }
        if self.clusters < 1 {
            return bad("clusters must be at least 1");
        }
        if self.goal_capacity < 1 {
            return bad("goal_capacity must be at least 1");
        }
        if self.mode == RewardMode::GoalState && self.goal_state.is_none() {
            return bad("goal_state mode requires a goal state");
        }
        Ok(())
    }
}

/// Distance from `embedding` to its nearest center, with that center's index.
pub fn nearest_distance(embedding: &[f64], centers: &[Vector]) -> Result<(usize, f64)> {
    if centers.is_empty() {
        return Err(Error::Empty("reward centers"));
    }
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        ensure_dim("reward center", embedding.len(), c.len())?;
        let d = distance(embedding, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("shaping factor must be non-negative, got {lambda}")))
    }
}

pub fn goal_reward(raw: f64, state: &[f64], goal: &[f64], lambda1: f64, encoder: &EncoderSnapshot) -> Result<f64> {
    check_lambda(lambda1)?;
    ensure_dim("goal state", state.len(), goal.len())?;
    Ok(raw - lambda1 * encoder.embedding_distance(state, goal)?)
}

pub fn clustered_goal_reward(raw: f64, state: &[f64], centers: &[Vector], lambda1: f64, encoder: &EncoderSnapshot) -> Result<f64> {
    check_lambda(lambda1)?;
    let (_, d) = nearest_distance(&encoder.encode(state)?, centers)?;
    Ok(raw - lambda1 * d)
}

pub fn chain_reward(raw: f64, state: &[f64], next_init_centers: &[Vector], lambda2: f64, encoder: &EncoderSnapshot) -> Result<f64> {
    check_lambda(lambda2)?;
    let (_, d) = nearest_distance(&encoder.encode(state)?, next_init_centers)?;
    Ok(raw - lambda2 * d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CachedCenters {
    round: u64,
    centers: Vec<Vector>,
}

/// Final states of successful episodes (plus optional demonstrations) in
/// raw state space, with embedding-space centers cached per encoder round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalSet {
    states: VecDeque<Vector>,
    capacity: usize,
    cache: Option<CachedCenters>,
}

impl GoalSet {
    pub fn new(capacity: usize) -> Self {
        Self {
            states: VecDeque::new(),
            capacity: capacity.max(1),
            cache: None,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn states(&self) -> impl Iterator<Item = &Vector> {
        self.states.iter()
    }

    /// Append a state unconditionally (demonstration seeding).
    pub fn insert(&mut self, state: Vector) {
        if self.states.len() == self.capacity {
            self.states.pop_front();
        }
        self.states.push_back(state);
        self.cache = None;
    }

    /// Add `final_state` if the episode succeeded; oldest entries are evicted
    /// once the capacity is reached.
    pub fn update(&mut self, final_state: &[f64], success: bool) {
        if success {
            self.insert(final_state.to_vec());
        }
    }

    /// Cached centers, if still valid for `encoder_round`.
    pub fn cached_centers(&self, encoder_round: u64) -> Option<&[Vector]> {
        self.cache
            .as_ref()
            .filter(|c| c.round == encoder_round)
            .map(|c| c.centers.as_slice())
    }

    /// Encode every goal state and cluster into `min(n, len)` centers.
    pub fn refresh_centers(&mut self, encoder: &EncoderSnapshot, n: usize, seed: u64) -> Result<&[Vector]> {
        if self.states.is_empty() {
            return Err(Error::Empty("goal set"));
        }
        if self.cached_centers(encoder.round()).is_none() {
            let embedded: Vec<Vector> = self.states.iter().map(|s| encoder.encode(s)).collect::<Result<_>>()?;
            let result = kmeans(&embedded, n, seed, 100, 1e-9)?;
            self.cache = Some(CachedCenters {
                round: encoder.round(),
                centers: result.centers,
            });
        }
        Ok(&self.cache.as_ref().unwrap().centers)
    }
}

pub fn update_goal_set(goal_set: &mut GoalSet, final_state: &[f64], success: bool) {
    goal_set.update(final_state, success);
}

pub fn refresh_centers(goal_set: &mut GoalSet, encoder: &EncoderSnapshot, n: usize, seed: u64) -> Result<Vec<Vector>> {
    goal_set.refresh_centers(encoder, n, seed).map(<[Vector]>::to_vec)
}

/// Reward function frozen for one rollout: one encoder snapshot, one center
/// set.
#[derive(Clone, Debug)]
pub struct RewardShaper {
    mode: RewardMode,
    lambda: f64,
    encoder: Option<EncoderSnapshot>,
    /// Embedding-space targets; the goal embedding in goal-state mode.
    targets: Vec<Vector>,
}

/// A shaped reward and the embedding distance it was computed from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Shaped {
    pub reward: f64,
    pub distance: Option<f64>,
}

impl RewardShaper {
    /// Pass raw rewards through.
    pub fn identity() -> Self {
        Self {
            mode: RewardMode::None,
            lambda: 0.0,
            encoder: None,
            targets: Vec::new(),
        }
    }

    /// Build a shaper for `spec`. Center-based modes fall back to raw rewards
    /// when `centers` is empty (cold start).
    pub fn new(spec: &RewardSpec, encoder: Option<&EncoderSnapshot>, centers: &[Vector]) -> Result<Self> {
        spec.validate()?;
        let encoder = match (spec.mode, encoder) {
            (RewardMode::None, _) => return Ok(Self::identity()),
            (_, Some(e)) => e.clone(),
            (_, None) => return Err(Error::InvalidConfig(format!("reward mode {} needs an encoder", spec.mode.name()))),
        };
        let (lambda, targets) = match spec.mode {
            RewardMode::GoalState => {
                let goal = spec.goal_state.as_ref().expect("validated");
                (spec.lambda1, vec![encoder.encode(goal)?])
            }
            RewardMode::ClusteredGoals => (spec.lambda1, centers.to_vec()),
            RewardMode::SkillChain => (spec.lambda2, centers.to_vec()),
            RewardMode::None => unreachable!(),
        };
        if targets.is_empty() {
            return Ok(Self::identity());
        }
        Ok(Self {
            mode: spec.mode,
            lambda,
            encoder: Some(encoder),
            targets,
        })
    }

    pub fn mode(&self) -> RewardMode {
        self.mode
    }

    pub fn is_identity(&self) -> bool {
        self.encoder.is_none()
    }

    pub fn encoder_round(&self) -> Option<u64> {
        self.encoder.as_ref().map(EncoderSnapshot::round)
    }

    pub fn shape(&self, raw: f64, state: &[f64]) -> Result<Shaped> {
        match &self.encoder {
            None => Ok(Shaped {
                reward: raw,
                distance: None,
            }),
            Some(enc) => {
                let (_, d) = nearest_distance(&enc.encode(state)?, &self.targets)?;
                Ok(Shaped {
                    reward: raw - self.lambda * d,
                    distance: Some(d),
                })
            }
        }
    }
}
