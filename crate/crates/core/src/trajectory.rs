use serde::{Deserialize, Serialize};

use crate::Vector;

/// One episode: `states` holds `s_0 .. s_n`, the per-transition arrays hold
/// `n` entries each.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Vector>,
    pub actions: Vec<Vector>,
    pub raw_rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub successes: Vec<bool>,
}

impl Trajectory {
    pub fn new(initial: Vector) -> Self {
        Self {
            states: vec![initial],
            ..Self::default()
        }
    }

    /// Build from a bare state sequence (demonstrations, tests).
    pub fn from_states(states: Vec<Vector>) -> Self {
        let n = states.len().saturating_sub(1);
        Self {
            states,
            actions: vec![Vec::new(); n],
            raw_rewards: vec![0.0; n],
            dones: (0..n).map(|i| i + 1 == n).collect(),
            successes: vec![false; n],
        }
    }

    pub fn push(&mut self, action: Vector, reward: f64, next_state: Vector, done: bool, success: bool) {
        self.actions.push(action);
        self.raw_rewards.push(reward);
        self.states.push(next_state);
        self.dones.push(done);
        self.successes.push(success);
    }

    /// Number of transitions.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn final_state(&self) -> &Vector {
        self.states.last().expect("trajectory holds its initial state")
    }

    pub fn succeeded(&self) -> bool {
        self.successes.last().copied().unwrap_or(false)
    }

    pub fn raw_return(&self) -> f64 {
        self.raw_rewards.iter().sum()
    }
}

impl AsRef<Trajectory> for Trajectory {
    fn as_ref(&self) -> &Trajectory {
        self
    }
}
