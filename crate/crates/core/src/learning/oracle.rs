//! Sources of the user's preferred action at a state.
//!
//! Scripted, greedy, and random oracles run without a human. The
//! collaborative oracle asks a person through a [`FeedbackChannel`] and falls
//! back to the plan when nobody answers in time.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use rand::Rng;

use crate::error::{Error, Result};
use crate::planner::PlanStep;
use crate::world::{ActionRecord, JointState};

use super::qtable::QTable;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Prediction {
    Action(ActionRecord),
    /// No answer; the caller uses the plan action instead.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preference {
    pub when: BTreeMap<String, String>,
    pub action: ActionRecord,
}

/// Fixed user policy. The first preference whose condition the state
/// satisfies wins; unmatched states either follow the plan or are a
/// configuration error.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ScriptedOracle {
    pub preferences: Vec<Preference>,
    pub default_to_plan: bool,
}

impl ScriptedOracle {
    pub fn preference(&self, state: &JointState, plan_action: &ActionRecord) -> Result<ActionRecord> {
        if let Some(p) = self.preferences.iter().find(|p| state.satisfies(&p.when)) {
            return Ok(p.action.clone());
        }
        if self.default_to_plan {
            Ok(plan_action.clone())
        } else {
            Err(Error::OracleConfig(format!(
                "scripted oracle has no preference for state {state}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackPrompt {
    pub state: JointState,
    pub plan_action: String,
    pub actions: Vec<String>,
    pub timeout: Duration,
}

/// Route to a human for collaborative prediction.
pub trait FeedbackChannel: Send {
    /// Blocks for at most `prompt.timeout`. `Ok(None)` means no answer in
    /// time.
    fn ask(&mut self, prompt: FeedbackPrompt) -> Result<Option<String>>;
}

pub enum UserOracle {
    Scripted(ScriptedOracle),
    GreedyFromQ,
    UniformRandom,
    Collaborative {
        channel: Box<dyn FeedbackChannel>,
        timeout: Duration,
    },
}

impl fmt::Debug for UserOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UserOracle::Scripted(s) => f.debug_tuple("Scripted").field(s).finish(),
            UserOracle::GreedyFromQ => f.write_str("GreedyFromQ"),
            UserOracle::UniformRandom => f.write_str("UniformRandom"),
            UserOracle::Collaborative { timeout, .. } => f
                .debug_struct("Collaborative")
                .field("timeout", timeout)
                .finish_non_exhaustive(),
        }
    }
}

pub fn predict<R: Rng + ?Sized>(
    oracle: &mut UserOracle,
    plan: &PlanStep,
    q: &QTable,
    rng: &mut R,
) -> Result<Prediction> {
    let state = &plan.state;
    let action = match oracle {
        UserOracle::Scripted(s) => s.preference(state, &plan.action)?,
        UserOracle::GreedyFromQ => q.greedy_action(state)?.clone(),
        UserOracle::UniformRandom => {
            let i = rng.random_range(0..q.vocab().len());
            q.vocab().decode(i)?.clone()
        }
        UserOracle::Collaborative { channel, timeout } => {
            let prompt = FeedbackPrompt {
                state: state.clone(),
                plan_action: plan.action.name().to_owned(),
                actions: q.vocab().names(),
                timeout: *timeout,
            };
            match channel.ask(prompt)? {
                None => return Ok(Prediction::Fallback),
                Some(name) => q
                    .vocab()
                    .get(&name)
                    .cloned()
                    .ok_or_else(|| Error::Feedback(format!("answer `{name}` is not offered")))?,
            }
        }
    };
    Ok(Prediction::Action(action))
}
