use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reward magnitudes for the three reward-function branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    /// Plan-sourced decision.
    pub r_plan: f64,
    /// Prediction that agrees with the plan.
    pub r_match: f64,
    /// Prediction that overrides the plan: credit to the predicted action.
    pub r_override_pos: f64,
    /// Prediction that overrides the plan: charge to the plan action.
    pub r_override_neg: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            r_plan: 1.0,
            r_match: 5.0,
            r_override_pos: 5.0,
            r_override_neg: -5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon0: f64,
    pub rho: f64,
    pub rewards: RewardParams,
}

impl Default for LearningParams {
    fn default() -> Self {
        LearningParams {
            alpha: 0.5,
            gamma: 0.9,
            epsilon0: 0.1,
            rho: 0.9,
            rewards: RewardParams::default(),
        }
    }
}

impl LearningParams {
    pub fn validate(&self) -> Result<()> {
        let check = |name, value: f64, ok: bool| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParam { name, value })
            }
        };
        check("alpha", self.alpha, self.alpha > 0.0 && self.alpha <= 1.0)?;
        check("gamma", self.gamma, (0.0..=1.0).contains(&self.gamma))?;
        check("epsilon0", self.epsilon0, (0.0..=1.0).contains(&self.epsilon0))?;
        check("rho", self.rho, self.rho > 0.0 && self.rho < 1.0)?;
        let r = &self.rewards;
        check("r_plan", r.r_plan, true)?;
        check("r_match", r.r_match, true)?;
        check("r_override_pos", r.r_override_pos, true)?;
        check("r_override_neg", r.r_override_neg, true)
    }
}

/// Per-episode exploration update: `ε ← 1 − (1 − ε)·ρ`.
///
/// Moves geometrically toward 1, so the decision maker shifts from plans to
/// predictions as episodes accumulate.
pub fn update_epsilon(epsilon: f64, params: &LearningParams) -> f64 {
    let next = 1.0 - (1.0 - epsilon) * params.rho;
    // rounding must never move the schedule backwards
    next.max(epsilon).min(1.0)
}
