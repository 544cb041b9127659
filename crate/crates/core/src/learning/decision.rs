use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::PlanStep;
use crate::world::{ActionRecord, JointState};

use super::oracle::{predict, Prediction, UserOracle};
use super::qtable::QTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionSource {
    Plan,
    Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub source: DecisionSource,
    pub state: JointState,
    pub plan_action: ActionRecord,
    pub chosen_action: ActionRecord,
    /// Uniform draw in `[0, 1)` compared against epsilon.
    pub draw: f64,
    /// The prediction branch was drawn but the oracle gave no answer, so the
    /// step fell back to the plan.
    #[serde(default)]
    pub fallback: bool,
}

/// Draws `P ~ U[0,1)` and picks the branch: prediction when `P < ε`.
pub fn draw_branch<R: Rng + ?Sized>(epsilon: f64, rng: &mut R) -> Result<(DecisionSource, f64)> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidParam {
            name: "epsilon",
            value: epsilon,
        });
    }
    let draw: f64 = rng.random();
    let source = if draw < epsilon {
        DecisionSource::Prediction
    } else {
        DecisionSource::Plan
    };
    Ok((source, draw))
}

/// Completes a drawn branch into a decision, consulting the oracle on the
/// prediction branch.
pub fn resolve<R: Rng + ?Sized>(
    source: DecisionSource,
    draw: f64,
    plan: &PlanStep,
    oracle: &mut UserOracle,
    q: &QTable,
    rng: &mut R,
) -> Result<Decision> {
    let plan_decision = |fallback| Decision {
        source: DecisionSource::Plan,
        state: plan.state.clone(),
        plan_action: plan.action.clone(),
        chosen_action: plan.action.clone(),
        draw,
        fallback,
    };
    match source {
        DecisionSource::Plan => Ok(plan_decision(false)),
        DecisionSource::Prediction => match predict(oracle, plan, q, rng)? {
            Prediction::Action(chosen) => Ok(Decision {
                source,
                state: plan.state.clone(),
                plan_action: plan.action.clone(),
                chosen_action: chosen,
                draw,
                fallback: false,
            }),
            Prediction::Fallback => Ok(plan_decision(true)),
        },
    }
}

/// Epsilon-greedy arbitration between the plan and the user's predicted
/// action.
pub fn decide<R: Rng + ?Sized>(
    epsilon: f64,
    rng: &mut R,
    plan: &PlanStep,
    oracle: &mut UserOracle,
    q: &QTable,
) -> Result<Decision> {
    let (source, draw) = draw_branch(epsilon, rng)?;
    resolve(source, draw, plan, oracle, q, rng)
}
