use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::events::{EventBody, EventSink, NullSink};
use crate::learning::{
    draw_branch, q_update, resolve, reward, update_epsilon, FeedbackChannel, QTable, UserOracle,
};
use crate::world::JointState;

use super::metrics::{compute_metrics, episode_alignment, TrainingReport};
use super::scenario::Scenario;
use super::trace::{EpisodeTrace, StepRecord, UpdateRecord};

/// Owns one training run: the Q-table, the seeded RNG, epsilon, and the
/// position within the episode schedule. All mutation goes through
/// [`Engine::step`].
#[derive(Debug)]
pub struct Engine {
    scenario: Arc<Scenario>,
    q: QTable,
    rng: ChaCha8Rng,
    oracle: UserOracle,
    epsilon: f64,
    episode: u32,
    step: u32,
    state: JointState,
    current: EpisodeTrace,
    traces: Vec<EpisodeTrace>,
    report: Option<TrainingReport>,
}

pub struct TrainingOutcome {
    pub report: TrainingReport,
    pub qtable: QTable,
    pub traces: Vec<EpisodeTrace>,
}

impl Engine {
    pub fn new(scenario: Arc<Scenario>) -> Result<Self> {
        let oracle = scenario.build_oracle(None)?;
        Self::with_oracle(scenario, oracle)
    }

    pub fn with_feedback(scenario: Arc<Scenario>, channel: Box<dyn FeedbackChannel>) -> Result<Self> {
        let oracle = scenario.build_oracle(Some(channel))?;
        Self::with_oracle(scenario, oracle)
    }

    fn with_oracle(scenario: Arc<Scenario>, oracle: UserOracle) -> Result<Self> {
        let mut q = QTable::new(scenario.space.clone(), scenario.vocab.clone());
        for &t in &scenario.terminal {
            q.set_terminal(t)?;
        }
        let epsilon = scenario.params.epsilon0;
        Ok(Engine {
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            state: scenario.initial_state.clone(),
            current: EpisodeTrace::new(0, epsilon),
            q,
            oracle,
            epsilon,
            episode: 0,
            step: 0,
            traces: Vec::new(),
            report: None,
            scenario,
        })
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn qtable(&self) -> &QTable {
        &self.q
    }

    pub fn state(&self) -> &JointState {
        &self.state
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Index of the episode in progress (equals the episode count once
    /// finished).
    pub fn episode(&self) -> u32 {
        self.episode
    }

    /// Index of the next step within the current episode.
    pub fn step_index(&self) -> u32 {
        self.step
    }

    pub fn traces(&self) -> &[EpisodeTrace] {
        &self.traces
    }

    pub fn report(&self) -> Option<&TrainingReport> {
        self.report.as_ref()
    }

    pub fn is_finished(&self) -> bool {
        self.report.is_some()
    }

    /// Runs one decision step: plan, arbitrate, reward, update, transition.
    /// Closes the episode (and the run) when its last step completes.
    pub fn step(&mut self, sink: &mut dyn EventSink) -> Result<StepRecord> {
        if self.is_finished() {
            return Err(Error::RunFinished);
        }
        let (episode, step) = (self.episode, self.step);
        let record = self
            .decide_and_learn(sink)
            .map_err(|e| e.at_step(episode, step))?;
        self.current.steps.push(record.clone());
        self.state = record.next_state.clone();
        self.step += 1;
        let next_index = self.scenario.space.encode_state(&self.state)?;
        if self.step >= self.scenario.steps_per_episode || self.q.is_terminal(next_index) {
            self.finish_episode(sink)?;
        }
        Ok(record)
    }

    fn decide_and_learn(&mut self, sink: &mut dyn EventSink) -> Result<StepRecord> {
        let scenario = self.scenario.clone();
        let (episode, step) = (self.episode, self.step);
        let plan = scenario.plan_for(&self.state)?;
        let (source, draw) = draw_branch(self.epsilon, &mut self.rng)?;
        sink.emit(EventBody::DecisionMade {
            episode,
            step,
            epsilon: self.epsilon,
            state: self.state.clone(),
            source,
            draw,
            plan_action: plan.action.name().to_owned(),
        });
        let decision = resolve(source, draw, &plan, &mut self.oracle, &self.q, &mut self.rng)?;

        let mut updates = Vec::new();
        for ev in reward(&decision, &scenario.params) {
            let cell = q_update(&mut self.q, &ev, &scenario.params)?;
            sink.emit(EventBody::QUpdated {
                episode,
                step,
                state: ev.state.clone(),
                action: ev.action.name().to_owned(),
                reward: ev.reward,
                state_index: cell.state_index,
                action_index: cell.action_index,
                before: cell.before,
                after: cell.after,
                next_state: cell.next_state.clone(),
            });
            updates.push(UpdateRecord {
                action: ev.action,
                reward: ev.reward,
                state_index: cell.state_index,
                action_index: cell.action_index,
                before: cell.before,
                after: cell.after,
                next_state: cell.next_state,
            });
        }

        // the executed action is the user's when a prediction overrides the plan
        let next_state = scenario.space.apply_action(&self.state, &decision.chosen_action)?;
        sink.emit(EventBody::StateChanged {
            episode,
            step,
            action: Some(decision.chosen_action.name().to_owned()),
            state: next_state.clone(),
        });
        Ok(StepRecord {
            step,
            state: decision.state,
            plan_action: decision.plan_action,
            source: decision.source,
            draw,
            fallback: decision.fallback,
            chosen_action: decision.chosen_action,
            updates,
            next_state,
        })
    }

    fn finish_episode(&mut self, sink: &mut dyn EventSink) -> Result<()> {
        let next_epsilon = update_epsilon(self.epsilon, &self.scenario.params);
        let trace = std::mem::replace(&mut self.current, EpisodeTrace::new(self.episode + 1, next_epsilon));
        sink.emit(EventBody::EpisodeCompleted {
            episode: trace.episode,
            epsilon: trace.epsilon,
            steps: trace.steps.len() as u32,
            cumulative_reward: trace.cumulative_reward(),
            alignment_rate: episode_alignment(&self.scenario, &self.q, &trace)?,
        });
        self.traces.push(trace);
        self.epsilon = next_epsilon;
        self.episode += 1;
        self.step = 0;
        self.state = self.scenario.initial_state.clone();
        if self.episode >= self.scenario.episodes {
            let report = compute_metrics(&self.scenario, &self.traces)?;
            sink.emit(EventBody::RunCompleted {
                report: report.clone(),
            });
            self.report = Some(report);
        } else {
            sink.emit(EventBody::StateChanged {
                episode: self.episode,
                step: 0,
                action: None,
                state: self.state.clone(),
            });
        }
        Ok(())
    }

    /// Steps until the current episode closes and returns its trace.
    pub fn run_episode(&mut self, sink: &mut dyn EventSink) -> Result<EpisodeTrace> {
        if self.is_finished() {
            return Err(Error::RunFinished);
        }
        let episode = self.episode;
        while self.episode == episode {
            self.step(sink)?;
        }
        Ok(self.traces.last().expect("episode just closed").clone())
    }

    /// Runs every remaining episode.
    pub fn run(&mut self, sink: &mut dyn EventSink) -> Result<TrainingReport> {
        while !self.is_finished() {
            self.run_episode(sink)?;
        }
        Ok(self.report.clone().expect("finished runs have a report"))
    }

    pub fn into_outcome(self) -> Option<TrainingOutcome> {
        let report = self.report?;
        Some(TrainingOutcome {
            report,
            qtable: self.q,
            traces: self.traces,
        })
    }
}

/// Trains a non-collaborative scenario from scratch.
pub fn run_training(scenario: Arc<Scenario>) -> Result<TrainingOutcome> {
    let mut engine = Engine::new(scenario)?;
    engine.run(&mut NullSink)?;
    Ok(engine.into_outcome().expect("run finished"))
}
