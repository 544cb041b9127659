use serde::{Deserialize, Serialize};

use crate::learning::DecisionSource;
use crate::world::{ActionRecord, JointState};

/// One Q-cell change caused by a reward event at the step's state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub action: ActionRecord,
    pub reward: f64,
    pub state_index: usize,
    pub action_index: usize,
    pub before: f64,
    pub after: f64,
    pub next_state: JointState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u32,
    pub state: JointState,
    pub plan_action: ActionRecord,
    pub source: DecisionSource,
    pub draw: f64,
    pub fallback: bool,
    /// The executed action.
    pub chosen_action: ActionRecord,
    pub updates: Vec<UpdateRecord>,
    pub next_state: JointState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub episode: u32,
    pub epsilon: f64,
    pub steps: Vec<StepRecord>,
}

impl EpisodeTrace {
    pub fn new(episode: u32, epsilon: f64) -> Self {
        EpisodeTrace {
            episode,
            epsilon,
            steps: Vec::new(),
        }
    }

    pub fn cumulative_reward(&self) -> f64 {
        self.steps
            .iter()
            .flat_map(|s| &s.updates)
            .map(|u| u.reward)
            .sum()
    }

    /// Distinct states a decision was taken in, in first-visit order.
    pub fn visited_states(&self) -> Vec<&JointState> {
        let mut out: Vec<&JointState> = Vec::new();
        for s in &self.steps {
            if !out.contains(&&s.state) {
                out.push(&s.state);
            }
        }
        out
    }
}
