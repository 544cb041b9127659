//! The engine thread and the state it shares with HTTP handlers.
//!
//! One dedicated thread owns the [`Engine`]; handlers reach it only through
//! the command channel. Between steps the thread publishes a snapshot so
//! reads never wait on a step in progress.

use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use homelearn_core::events::{EngineEvent, EventBody, FeedbackOutcome, FeedbackRequest};
use homelearn_core::learning::{FeedbackChannel, FeedbackPrompt};
use homelearn_core::runner::{Engine, OracleConfig, Scenario};
use homelearn_core::world::JointState;
use homelearn_core::Result as CoreResult;
use serde::{Deserialize, Serialize};
use tokio::sync::oneshot;

use crate::bus::{BusSink, EventBus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Running,
    WaitingFeedback,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Auto,
    Manual,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub state: JointState,
    pub step: u32,
    pub episode: u32,
    pub epsilon: f64,
    pub values: Vec<f64>,
}

impl Snapshot {
    fn of(engine: &Engine) -> Self {
        Snapshot {
            state: engine.state().clone(),
            step: engine.step_index(),
            episode: engine.episode(),
            epsilon: engine.epsilon(),
            values: engine.qtable().values().to_vec(),
        }
    }
}

#[derive(Debug)]
pub struct RunStatus {
    pub phase: Phase,
    pub mode: Option<RunMode>,
    pub step_in_flight: bool,
    pub error: Option<String>,
}

struct Pending {
    request: FeedbackRequest,
    deadline: Instant,
    reply: mpsc::Sender<String>,
}

#[derive(Default)]
struct FeedbackSlot {
    next_id: u64,
    pending: Option<Pending>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackRejection {
    /// No request with this id was ever issued.
    Unknown,
    /// The request was answered, timed out, or is past its deadline.
    Gone,
    /// The action is not among the offered ones; the request stays open.
    Invalid,
}

pub struct Shared {
    pub scenario: Arc<Scenario>,
    pub bus: Arc<EventBus>,
    pub status: Mutex<RunStatus>,
    pub snapshot: Mutex<Snapshot>,
    feedback: Mutex<FeedbackSlot>,
}

impl Shared {
    pub fn pending_feedback(&self) -> Option<FeedbackRequest> {
        let slot = self.feedback.lock().unwrap();
        slot.pending.as_ref().map(|p| p.request.clone())
    }

    /// Hands the answer to the blocked step if `request_id` is the open
    /// request, it is not past its deadline, and `action` was offered.
    pub fn resolve_feedback(&self, request_id: u64, action: &str) -> Result<(), FeedbackRejection> {
        let mut slot = self.feedback.lock().unwrap();
        let open = slot.pending.as_ref().filter(|p| p.request.request_id == request_id);
        let Some(pending) = open else {
            return Err(if request_id < slot.next_id {
                FeedbackRejection::Gone
            } else {
                FeedbackRejection::Unknown
            });
        };
        if Instant::now() >= pending.deadline {
            return Err(FeedbackRejection::Gone);
        }
        if !pending.request.actions.iter().any(|a| a == action) {
            return Err(FeedbackRejection::Invalid);
        }
        let pending = slot.pending.take().expect("checked above");
        // the engine thread holds the receiver until it has taken the slot back
        let _ = pending.reply.send(action.to_owned());
        Ok(())
    }
}

/// Feedback channel that parks the engine thread until an HTTP client
/// answers or the deadline passes.
struct GatewayChannel {
    shared: Arc<Shared>,
}

fn unix_ms(t: SystemTime) -> u64 {
    t.duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

impl FeedbackChannel for GatewayChannel {
    fn ask(&mut self, prompt: FeedbackPrompt) -> CoreResult<Option<String>> {
        let (tx, rx) = mpsc::channel();
        let request = {
            let mut slot = self.shared.feedback.lock().unwrap();
            let request = FeedbackRequest {
                request_id: slot.next_id,
                state: prompt.state,
                plan_action: prompt.plan_action,
                actions: prompt.actions,
                deadline_ms: unix_ms(SystemTime::now() + prompt.timeout),
            };
            slot.next_id += 1;
            slot.pending = Some(Pending {
                request: request.clone(),
                deadline: Instant::now() + prompt.timeout,
                reply: tx,
            });
            request
        };
        let request_id = request.request_id;
        self.shared.bus.publish(EventBody::FeedbackRequested(request));

        let answer = match rx.recv_timeout(prompt.timeout) {
            Ok(action) => Some(action),
            Err(RecvTimeoutError::Timeout | RecvTimeoutError::Disconnected) => {
                let mut slot = self.shared.feedback.lock().unwrap();
                match &slot.pending {
                    Some(p) if p.request.request_id == request_id => {
                        slot.pending = None;
                        None
                    }
                    // answered between the timeout and taking the lock
                    _ => rx.try_recv().ok(),
                }
            }
        };
        let outcome = if answer.is_some() {
            FeedbackOutcome::Answered
        } else {
            FeedbackOutcome::TimedOut
        };
        self.shared.bus.publish(EventBody::FeedbackResolved {
            request_id,
            outcome,
            action: answer.clone(),
        });
        Ok(answer)
    }
}

pub type StepReply = std::result::Result<Vec<EngineEvent>, String>;

pub enum Command {
    Start { mode: RunMode, delay: Duration },
    Step(oneshot::Sender<StepReply>),
}

/// Builds the engine (so configuration errors surface before serving) and
/// starts its thread. The thread exits once every command sender is gone.
pub fn spawn(scenario: Arc<Scenario>) -> CoreResult<(Arc<Shared>, mpsc::Sender<Command>)> {
    let initial = Snapshot {
        state: scenario.initial_state.clone(),
        step: 0,
        episode: 0,
        epsilon: scenario.params.epsilon0,
        values: vec![0.0; scenario.space.cardinality() * scenario.vocab.len()],
    };
    let shared = Arc::new(Shared {
        scenario: scenario.clone(),
        bus: Arc::new(EventBus::new()),
        status: Mutex::new(RunStatus {
            phase: Phase::Idle,
            mode: None,
            step_in_flight: false,
            error: None,
        }),
        snapshot: Mutex::new(initial),
        feedback: Mutex::new(FeedbackSlot::default()),
    });
    let engine = match scenario.oracle {
        OracleConfig::Collaborative { .. } => Engine::with_feedback(
            scenario,
            Box::new(GatewayChannel {
                shared: shared.clone(),
            }),
        )?,
        _ => Engine::new(scenario)?,
    };
    let (tx, rx) = mpsc::channel();
    let thread_shared = shared.clone();
    std::thread::Builder::new()
        .name("homelearn-engine".into())
        .spawn(move || engine_loop(engine, thread_shared, rx))
        .expect("spawn engine thread");
    Ok((shared, tx))
}

fn engine_loop(mut engine: Engine, shared: Arc<Shared>, commands: mpsc::Receiver<Command>) {
    let (mode, delay) = loop {
        match commands.recv() {
            Ok(Command::Start { mode, delay }) => break (mode, delay),
            Ok(Command::Step(reply)) => {
                let _ = reply.send(Err("run not started".into()));
            }
            Err(_) => return,
        }
    };
    match mode {
        RunMode::Auto => {
            while !engine.is_finished() {
                if let Err(e) = step_once(&mut engine, &shared) {
                    fail(&shared, e);
                    return;
                }
                if !delay.is_zero() {
                    std::thread::sleep(delay);
                }
            }
            finish(&shared);
        }
        RunMode::Manual => {
            while let Ok(cmd) = commands.recv() {
                let Command::Step(reply) = cmd else { continue };
                let result = step_once(&mut engine, &shared);
                shared.status.lock().unwrap().step_in_flight = false;
                match result {
                    Ok(events) => {
                        if engine.is_finished() {
                            finish(&shared);
                        }
                        let _ = reply.send(Ok(events));
                    }
                    Err(e) => {
                        let msg = e.to_string();
                        fail(&shared, e);
                        let _ = reply.send(Err(msg));
                    }
                }
            }
        }
    }
}

fn step_once(engine: &mut Engine, shared: &Shared) -> CoreResult<Vec<EngineEvent>> {
    let from = shared.bus.len();
    engine.step(&mut BusSink(&shared.bus))?;
    *shared.snapshot.lock().unwrap() = Snapshot::of(engine);
    Ok(shared.bus.since(from))
}

fn finish(shared: &Shared) {
    shared.status.lock().unwrap().phase = Phase::Done;
}

fn fail(shared: &Shared, e: homelearn_core::Error) {
    let mut status = shared.status.lock().unwrap();
    status.phase = Phase::Done;
    status.error = Some(e.to_string());
}
