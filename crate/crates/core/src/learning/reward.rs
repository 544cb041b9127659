use serde::{Deserialize, Serialize};

use crate::world::{ActionRecord, JointState};

use super::decision::{Decision, DecisionSource};
use super::params::LearningParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardEvent {
    pub state: JointState,
    pub action: ActionRecord,
    pub reward: f64,
}

/// Turns a decision into the Q-update events it earns.
///
/// A plan decision credits the plan action with `r_plan`. A prediction that
/// agrees with the plan credits it with `r_match`. A prediction that
/// disagrees first charges the plan action `r_override_neg`, then credits the
/// predicted action `r_override_pos`.
pub fn reward(decision: &Decision, params: &LearningParams) -> Vec<RewardEvent> {
    let r = &params.rewards;
    let event = |action: &ActionRecord, reward| RewardEvent {
        state: decision.state.clone(),
        action: action.clone(),
        reward,
    };
    match decision.source {
        DecisionSource::Plan => vec![event(&decision.plan_action, r.r_plan)],
        DecisionSource::Prediction if decision.chosen_action == decision.plan_action => {
            vec![event(&decision.chosen_action, r.r_match)]
        }
        DecisionSource::Prediction => vec![
            event(&decision.plan_action, r.r_override_neg),
            event(&decision.chosen_action, r.r_override_pos),
        ],
    }
}
