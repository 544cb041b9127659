//! Learning layer for smart-home self-adaptation.
//!
//! A rule-based planner proposes value-aligned actions; an epsilon-greedy
//! decision maker increasingly defers to the user's own choices, and tabular
//! Q-learning folds both into one policy. When the user keeps choosing
//! something the plan did not, the learned policy follows the user.

pub mod error;
pub mod events;
pub mod learning;
pub mod planner;
pub mod runner;
pub mod world;

pub use error::{Error, Result};
