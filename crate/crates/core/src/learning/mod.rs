//! Tabular Q-learning layer that sits between the planner and the acting
//! environment: epsilon-greedy arbitration, action prediction, reward
//! assignment, and the Q-update.

mod decision;
mod oracle;
mod params;
mod qtable;
mod reward;

pub use decision::{decide, draw_branch, resolve, Decision, DecisionSource};
pub use oracle::{
    predict, FeedbackChannel, FeedbackPrompt, Prediction, Preference, ScriptedOracle, UserOracle,
};
pub use params::{update_epsilon, LearningParams, RewardParams};
pub use qtable::{q_update, CellUpdate, QTable};
pub use reward::{reward, RewardEvent};
