//! Engine event stream: what happened during a run, in causal order.
//!
//! For one step the order is `decision_made`, any feedback events,
//! one or two `q_updated`, then `state_changed`. Episode boundaries add
//! `episode_completed` followed by either a reset `state_changed` (with a null
//! action) or `run_completed`.

use serde::{Deserialize, Serialize};

use crate::learning::DecisionSource;
use crate::runner::TrainingReport;
use crate::world::JointState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRequest {
    pub request_id: u64,
    pub state: JointState,
    pub plan_action: String,
    pub actions: Vec<String>,
    /// Unix time in milliseconds after which answers are refused.
    pub deadline_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackOutcome {
    Answered,
    TimedOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    StateChanged {
        episode: u32,
        step: u32,
        /// `None` when the state was reset for a new episode.
        action: Option<String>,
        state: JointState,
    },
    DecisionMade {
        episode: u32,
        step: u32,
        epsilon: f64,
        state: JointState,
        source: DecisionSource,
        draw: f64,
        plan_action: String,
    },
    FeedbackRequested(FeedbackRequest),
    FeedbackResolved {
        request_id: u64,
        outcome: FeedbackOutcome,
        action: Option<String>,
    },
    QUpdated {
        episode: u32,
        step: u32,
        state: JointState,
        action: String,
        reward: f64,
        state_index: usize,
        action_index: usize,
        before: f64,
        after: f64,
        next_state: JointState,
    },
    EpisodeCompleted {
        episode: u32,
        epsilon: f64,
        steps: u32,
        cumulative_reward: f64,
        alignment_rate: Option<f64>,
    },
    RunCompleted {
        report: TrainingReport,
    },
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::StateChanged { .. } => "state_changed",
            EventBody::DecisionMade { .. } => "decision_made",
            EventBody::FeedbackRequested(_) => "feedback_requested",
            EventBody::FeedbackResolved { .. } => "feedback_resolved",
            EventBody::QUpdated { .. } => "q_updated",
            EventBody::EpisodeCompleted { .. } => "episode_completed",
            EventBody::RunCompleted { .. } => "run_completed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineEvent {
    pub seq: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

pub trait EventSink {
    fn emit(&mut self, body: EventBody);
}

impl EventSink for Vec<EventBody> {
    fn emit(&mut self, body: EventBody) {
        self.push(body);
    }
}

/// Discards everything.
pub struct NullSink;

impl EventSink for NullSink {
    fn emit(&mut self, _: EventBody) {}
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shape() {
        let ev = EngineEvent {
            seq: 3,
            body: EventBody::FeedbackResolved {
                request_id: 1,
                outcome: FeedbackOutcome::TimedOut,
                action: None,
            },
        };
        let v = serde_json::to_value(&ev).unwrap();
        assert_eq!(v["seq"], 3);
        assert_eq!(v["kind"], "feedback_resolved");
        assert_eq!(v["payload"]["outcome"], "timed_out");
        let back: EngineEvent = serde_json::from_value(v).unwrap();
        assert_eq!(back, ev);
    }

    #[test]
    fn q_updated_round_trips_exact_floats() {
        let ev = EngineEvent {
            seq: 0,
            body: EventBody::QUpdated {
                episode: 0,
                step: 0,
                state: JointState::from_pairs([("lamp", "off")]),
                action: "lamp:on".into(),
                reward: 5.0,
                state_index: 0,
                action_index: 1,
                before: 0.1 + 0.2,
                after: 1.0 / 3.0,
                next_state: JointState::from_pairs([("lamp", "on")]),
            },
        };
        let text = serde_json::to_string(&ev).unwrap();
        let back: EngineEvent = serde_json::from_str(&text).unwrap();
        assert_eq!(back, ev);
        assert_eq!(back.body.kind(), "q_updated");
    }
}
