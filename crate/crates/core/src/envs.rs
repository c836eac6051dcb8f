//! Deterministic desk-scale environments.
//!
//! All environments share the same observation layout: intrinsic
//! coordinates first, then `distractors` coordinates of i.i.d. Gaussian noise
//! that are resampled on every step and carry no task information. Rewards
//! are sparse: `1` on the transition that reaches the goal, `0` otherwise.
//!
//! - `chain`: 1-D position on `[0, L]`, start at `0`, goal at `L`.
//! - `umaze`: 2-D point mass in a U-shaped corridor. Start and goal sit at the
//!   tips of the two arms, close in Euclidean terms but far in transitions.
//! - `chain2skill`: 2-D arena split into two skills. Skill A walks from the
//!   left edge to a handoff line; skill B starts in a small initial region
//!   and must enter the upper lane to reach the final goal. Skill A's natural
//!   terminal set overlaps B's initial region only partially.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::{seeding, Vector};

/// Width of every U-maze corridor.
pub const UMAZE_CORRIDOR: f64 = 0.4;
/// Width of the wall block between the two U-maze arms.
pub const UMAZE_GAP: f64 = 0.4;

/// `chain2skill` arena `[0, 2] x [0, 1]`.
pub const ARENA_WIDTH: f64 = 2.0;
pub const ARENA_HEIGHT: f64 = 1.0;
/// Skill A succeeds once `x >= HANDOFF_X`.
pub const HANDOFF_X: f64 = 1.0;
/// Horizontal divider between the lower dead-end lane and the upper lane.
pub const DIVIDER: Rect = Rect {
    x0: 1.1,
    x1: 2.0,
    y0: 0.5,
    y1: 0.6,
};
/// Initial-state region of skill B.
pub const SKILL_B_INIT: Rect = Rect {
    x0: 1.0,
    x1: 1.1,
    y0: 0.65,
    y1: 0.95,
};
/// Skill B succeeds at `x >= FINAL_X` in the upper lane.
pub const FINAL_X: f64 = 1.8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, p: &[f64]) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        [
            rng.random_range(self.x0..=self.x1),
            rng.random_range(self.y0..=self.y1),
        ]
    }

    pub fn center(&self) -> [f64; 2] {
        [(self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvId {
    Chain,
    Umaze,
    Chain2Skill,
}

impl EnvId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "chain" => Ok(EnvId::Chain),
            "umaze" => Ok(EnvId::Umaze),
            "chain2skill" => Ok(EnvId::Chain2Skill),
            other => Err(Error::UnknownEnv(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvId::Chain => "chain",
            EnvId::Umaze => "umaze",
            EnvId::Chain2Skill => "chain2skill",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Skill {
    A,
    B,
}

impl Skill {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(Skill::A),
            "b" | "B" => Ok(Skill::B),
            other => Err(Error::Parse(format!("unknown skill `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Skill::A => "a",
            Skill::B => "b",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub id: EnvId,
    /// Only meaningful for `chain2skill`.
    pub skill: Skill,
    /// Episode length T.
    pub horizon: usize,
    pub distractors: usize,
    pub noise_scale: f64,
    pub seed: u64,
    /// Largest per-step displacement along each axis.
    pub max_step: f64,
    pub goal_radius: f64,
    pub chain_length: f64,
    pub arm_length: f64,
}

impl EnvSpec {
    fn base(id: EnvId, horizon: usize, distractors: usize) -> Self {
        Self {
            id,
            skill: Skill::A,
            horizon,
            distractors,
            noise_scale: 0.5,
            seed: 0,
            max_step: 0.1,
            goal_radius: 0.1,
            chain_length: 1.0,
            arm_length: 1.0,
        }
    }

    pub fn chain() -> Self {
        Self::base(EnvId::Chain, 64, 0)
    }

    pub fn umaze() -> Self {
        Self::base(EnvId::Umaze, 200, 8)
    }

    pub fn chain2skill() -> Self {
        Self::base(EnvId::Chain2Skill, 100, 0)
    }

    pub fn default_for(id: EnvId) -> Self {
        match id {
            EnvId::Chain => Self::chain(),
            EnvId::Umaze => Self::umaze(),
            EnvId::Chain2Skill => Self::chain2skill(),
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self.id {
            EnvId::Chain => 1,
            EnvId::Umaze | EnvId::Chain2Skill => 2,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.intrinsic_dim() + self.distractors
    }

    pub fn action_dim(&self) -> usize {
        self.intrinsic_dim()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("env: {msg}")));
        if self.horizon < 2 {
            return bad("horizon T must be at least 2");
        }
        if !(self.max_step > 0.0) || !self.max_step.is_finite() {
            return bad("max_step must be positive");
        }
        if !(self.goal_radius > 0.0) {
            return bad("goal_radius must be positive");
        }
        if !(self.noise_scale >= 0.0) {
            return bad("noise_scale must be non-negative");
        }
        if self.id == EnvId::Chain && !(self.chain_length > 0.0) {
            return bad("chain_length must be positive");
        }
        if self.id == EnvId::Umaze && !(self.arm_length > UMAZE_CORRIDOR) {
            return bad("arm_length must exceed the corridor width");
        }
        Ok(())
    }

    /// Intrinsic goal center (chain and umaze).
    pub fn goal(&self) -> Vector {
        match self.id {
            EnvId::Chain => vec![self.chain_length],
            EnvId::Umaze => {
                let top = UMAZE_CORRIDOR + self.arm_length - UMAZE_CORRIDOR / 2.0;
                vec![UMAZE_CORRIDOR + UMAZE_GAP + UMAZE_CORRIDOR / 2.0, top]
            }
            EnvId::Chain2Skill => match self.skill {
                Skill::A => SKILL_B_INIT.center().to_vec(),
                Skill::B => vec![(FINAL_X + ARENA_WIDTH) / 2.0, (DIVIDER.y1 + ARENA_HEIGHT) / 2.0],
            },
        }
    }

    /// Region initial intrinsic states are drawn from.
    pub fn start_region(&self) -> Rect {
        match self.id {
            EnvId::Chain => Rect {
                x0: 0.0,
                x1: 0.0,
                y0: 0.0,
                y1: 0.0,
            },
            EnvId::Umaze => {
                let top = UMAZE_CORRIDOR + self.arm_length - UMAZE_CORRIDOR / 2.0;
                Rect {
                    x0: 0.1,
                    x1: UMAZE_CORRIDOR - 0.1,
                    y0: top - 0.1,
                    y1: top + 0.1,
                }
            }
            EnvId::Chain2Skill => match self.skill {
                Skill::A => Rect {
                    x0: 0.1,
                    x1: 0.3,
                    y0: 0.05,
                    y1: 0.95,
                },
                Skill::B => SKILL_B_INIT,
            },
        }
    }

    /// Whether an intrinsic position satisfies the task's success rule.
    pub fn is_success(&self, p: &[f64]) -> bool {
        match self.id {
            EnvId::Chain | EnvId::Umaze => {
                crate::numcore::distance(p, &self.goal()) < self.goal_radius
            }
            EnvId::Chain2Skill => match self.skill {
                Skill::A => p[0] >= HANDOFF_X,
                Skill::B => p[0] >= FINAL_X && p[1] > DIVIDER.y1,
            },
        }
    }

    /// Whether an intrinsic position lies inside free space.
    pub fn is_free(&self, p: &[f64]) -> bool {
        match self.id {
            EnvId::Chain => p[0] >= 0.0 && p[0] <= self.chain_length,
            EnvId::Umaze => {
                let (w, h) = self.umaze_extent();
                p[0] >= 0.0 && p[0] <= w && p[1] >= 0.0 && p[1] <= h && !self.umaze_wall().contains(p)
            }
            EnvId::Chain2Skill => {
                p[0] >= 0.0
                    && p[0] <= ARENA_WIDTH
                    && p[1] >= 0.0
                    && p[1] <= ARENA_HEIGHT
                    && !DIVIDER.contains(p)
            }
        }
    }

    /// Bounding box of the intrinsic coordinates as `(lower, upper)`.
    pub fn extent(&self) -> (Vector, Vector) {
        match self.id {
            EnvId::Chain => (vec![0.0], vec![self.chain_length]),
            EnvId::Umaze => {
                let (w, h) = self.umaze_extent();
                (vec![0.0, 0.0], vec![w, h])
            }
            EnvId::Chain2Skill => (vec![0.0, 0.0], vec![ARENA_WIDTH, ARENA_HEIGHT]),
        }
    }

    fn umaze_extent(&self) -> (f64, f64) {
        (
            2.0 * UMAZE_CORRIDOR + UMAZE_GAP,
            UMAZE_CORRIDOR + self.arm_length,
        )
    }

    /// Inner wall block of the U.
    pub fn umaze_wall(&self) -> Rect {
        let (_, h) = self.umaze_extent();
        Rect {
            x0: UMAZE_CORRIDOR,
            x1: UMAZE_CORRIDOR + UMAZE_GAP,
            y0: UMAZE_CORRIDOR,
            y1: h,
        }
    }

    /// Skill A variant of a `chain2skill` spec.
    pub fn skill_a(&self) -> Self {
        Self {
            id: EnvId::Chain2Skill,
            skill: Skill::A,
            ..self.clone()
        }
    }

    /// Skill B variant of a `chain2skill` spec.
    pub fn skill_b(&self) -> Self {
        Self {
            id: EnvId::Chain2Skill,
            skill: Skill::B,
            ..self.clone()
        }
    }

    pub fn intrinsic<'a>(&self, state: &'a [f64]) -> &'a [f64] {
        &state[..self.intrinsic_dim()]
    }
}

pub fn skill_a_env(spec: &EnvSpec) -> EnvSpec {
    spec.skill_a()
}

pub fn skill_b_env(spec: &EnvSpec) -> EnvSpec {
    spec.skill_b()
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub state: Vector,
    pub reward: f64,
    pub done: bool,
    pub success: bool,
}

impl StepResult {
    /// Episode ended by the time limit rather than by success.
    pub fn truncated(&self) -> bool {
        self.done && !self.success
    }
}

/// A running environment instance.
#[derive(Clone, Debug)]
pub struct Env {
    spec: EnvSpec,
    position: [f64; 2],
    t: usize,
    done: bool,
    rng: ChaCha8Rng,
    noise: Normal<f64>,
}

impl Env {
    pub fn new(spec: EnvSpec) -> Result<Self> {
        spec.validate()?;
        let noise = Normal::new(0.0, spec.noise_scale)
            .map_err(|e| Error::InvalidConfig(format!("env noise: {e}")))?;
        let rng = seeding::rng(spec.seed);
        Ok(Self {
            spec,
            position: [0.0; 2],
            t: 0,
            done: true,
            rng,
            noise,
        })
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn position(&self) -> &[f64] {
        &self.position[..self.spec.intrinsic_dim()]
    }

    fn begin(&mut self, episode_seed: u64) {
        self.rng = seeding::rng(seeding::mix(self.spec.seed, episode_seed));
        self.t = 0;
        self.done = false;
    }

    pub fn reset(&mut self, episode_seed: u64) -> Vector {
        self.begin(episode_seed);
        let start = self.spec.start_region();
        self.position = match self.spec.id {
            EnvId::Chain => [0.0, 0.0],
            _ => start.sample(&mut self.rng),
        };
        self.observe()
    }

    /// Start an episode from a given intrinsic position (skill handoff).
    pub fn reset_at(&mut self, intrinsic: &[f64], episode_seed: u64) -> Result<Vector> {
        ensure_dim("reset position", self.spec.intrinsic_dim(), intrinsic.len())?;
        ensure_finite("reset position", intrinsic)?;
        if !self.spec.is_free(intrinsic) {
            return Err(Error::InvalidConfig(format!(
                "reset position {intrinsic:?} is not in free space"
            )));
        }
        self.begin(episode_seed);
        self.position = [0.0; 2];
        self.position[..intrinsic.len()].copy_from_slice(intrinsic);
        Ok(self.observe())
    }

    fn observe(&mut self) -> Vector {
        let dim = self.spec.intrinsic_dim();
        let mut state = Vec::with_capacity(self.spec.state_dim());
        state.extend_from_slice(&self.position[..dim]);
        for _ in 0..self.spec.distractors {
            state.push(self.noise.sample(&mut self.rng));
        }
        state
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        ensure_dim("action", self.spec.action_dim(), action.len())?;
        ensure_finite("action", action)?;
        let delta = self.spec.max_step;
        match self.spec.id {
            EnvId::Chain => {
                let x = self.position[0] + action[0].clamp(-1.0, 1.0) * delta;
                self.position[0] = x.clamp(0.0, self.spec.chain_length);
            }
            EnvId::Umaze | EnvId::Chain2Skill => {
                // axis-separated collision: each axis move is rejected on its own
                for axis in 0..2 {
                    let mut candidate = self.position;
                    candidate[axis] += action[axis].clamp(-1.0, 1.0) * delta;
                    candidate[axis] = self.clamp_axis(axis, candidate[axis]);
                    if self.spec.is_free(&candidate) {
                        self.position = candidate;
                    }
                }
            }
        }
        self.t += 1;
        let success = self.spec.is_success(self.position());
        self.done = success || self.t >= self.spec.horizon;
        let state = self.observe();
        Ok(StepResult {
            state,
            reward: if success { 1.0 } else { 0.0 },
            done: self.done,
            success,
        })
    }

    fn clamp_axis(&self, axis: usize, v: f64) -> f64 {
        let hi = match (self.spec.id, axis) {
            (EnvId::Umaze, 0) => self.spec.umaze_extent().0,
            (EnvId::Umaze, _) => self.spec.umaze_extent().1,
            (_, 0) => ARENA_WIDTH,
            _ => ARENA_HEIGHT,
        };
        v.clamp(0.0, hi)
    }
}

/// Initial state for `(spec, episode_seed)`.
pub fn env_reset(spec: &EnvSpec, episode_seed: u64) -> Result<Vector> {
    let mut env = Env::new(spec.clone())?;
    Ok(env.reset(episode_seed))
}

/// Uniform random action in `[-1, 1]^d`.
pub fn random_action<R: Rng + ?Sized>(spec: &EnvSpec, rng: &mut R) -> Vector {
    (0..spec.action_dim())
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect()
}

/// Waypoint controller that solves every built-in task.
///
/// `speed` is the commanded fraction of the maximum step; `noise` is the
/// standard deviation of Gaussian noise added to each action component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScriptedPolicy {
    pub speed: f64,
    pub noise: f64,
}

impl Default for ScriptedPolicy {
    fn default() -> Self {
        Self {
            speed: 1.0,
            noise: 0.0,
        }
    }
}

impl ScriptedPolicy {
    pub fn act<R: Rng + ?Sized>(&self, spec: &EnvSpec, state: &[f64], rng: &mut R) -> Vector {
        let p = spec.intrinsic(state);
        let target = self.waypoint(spec, p);
        let mut action: Vector = match spec.id {
            EnvId::Chain => vec![self.speed],
            _ => {
                let d = [target[0] - p[0], target[1] - p[1]];
                let n = (d[0] * d[0] + d[1] * d[1]).sqrt().max(1e-12);
                // do not overshoot the waypoint by more than one step
                let scale = self.speed.min(n / spec.max_step);
                vec![d[0] / n * scale, d[1] / n * scale]
            }
        };
        if self.noise > 0.0 {
            let normal = Normal::new(0.0, self.noise).expect("noise is positive");
            for a in &mut action {
                *a += normal.sample(rng);
            }
        }
        for a in &mut action {
            *a = a.clamp(-1.0, 1.0);
        }
        action
    }

    fn waypoint(&self, spec: &EnvSpec, p: &[f64]) -> [f64; 2] {
        match spec.id {
            EnvId::Chain => [spec.chain_length, 0.0],
            EnvId::Umaze => {
                let c = UMAZE_CORRIDOR / 2.0;
                let goal = spec.goal();
                let right_arm_x = goal[0];
                if p[0] < UMAZE_CORRIDOR && p[1] > c + 0.05 {
                    [c, c]
                } else if p[0] < right_arm_x - 0.05 {
                    [right_arm_x, c]
                } else {
                    [goal[0], goal[1]]
                }
            }
            EnvId::Chain2Skill => match spec.skill {
                Skill::A => {
                    let c = SKILL_B_INIT.center();
                    [c[0] + 0.02, c[1]]
                }
                Skill::B => {
                    if p[1] <= DIVIDER.y1 + 0.05 && p[0] < DIVIDER.x0 {
                        [p[0], SKILL_B_INIT.center()[1]]
                    } else {
                        [ARENA_WIDTH, (DIVIDER.y1 + ARENA_HEIGHT) / 2.0]
                    }
                }
            },
        }
    }
}
