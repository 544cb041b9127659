use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state space needs at least one device")]
    NoDevices,
    #[error("duplicate device id `{0}`")]
    DuplicateDevice(String),
    #[error("device `{0}` has no states")]
    EmptyDevice(String),
    #[error("device `{device}` lists state `{label}` twice")]
    DuplicateLabel { device: String, label: String },
    #[error("invalid {what} `{name}`: must be nonempty and free of whitespace and `:+=,`")]
    InvalidName { what: &'static str, name: String },
    #[error("state space is too large to index")]
    SpaceTooLarge,
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("unknown state `{label}` for device `{device}`")]
    UnknownLabel { device: String, label: String },
    #[error("state does not assign device `{0}`")]
    MissingDevice(String),
    #[error("state index {index} out of range for {cardinality} states")]
    StateIndexOutOfRange { index: usize, cardinality: usize },
    #[error("states are defined over different device sets")]
    SpaceMismatch,
    #[error("malformed state `{0}`: expected device=label,...")]
    MalformedState(String),
    #[error("malformed action name `{0}`")]
    MalformedAction(String),
    #[error("action `{0}` is not in the vocabulary")]
    UnknownAction(String),
    #[error("action index {index} out of range for {len} actions")]
    ActionIndexOutOfRange { index: usize, len: usize },
    #[error("ambiguous plan at state {state}: rules {rules:?} match with equal top priority")]
    AmbiguousPlan { state: String, rules: Vec<usize> },
    #[error("refusing to update terminal state {state}")]
    TerminalUpdate { state: String },
    #[error("invalid parameter {name} = {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("oracle configuration: {0}")]
    OracleConfig(String),
    #[error("scenario validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("manifest mismatch: {0}")]
    Manifest(String),
    #[error("non-finite Q-value at position {0}")]
    NonFinite(usize),
    #[error("replay diverged at episode {episode} step {step}: {detail}")]
    ReplayDiverged { episode: u32, step: u32, detail: String },
    #[error("feedback channel: {0}")]
    Feedback(String),
    #[error("run already finished")]
    RunFinished,
    #[error("step {step} of episode {episode}: {source}")]
    AtStep {
        episode: u32,
        step: u32,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// True for errors caused by bad input (scenario, rules, manifests), as
    /// opposed to failures while running.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Io { .. }
            | Error::ReplayDiverged { .. }
            | Error::Feedback(_)
            | Error::RunFinished
            | Error::TerminalUpdate { .. } => false,
            Error::AtStep { source, .. } => source.is_validation(),
            _ => true,
        }
    }

    pub(crate) fn at_step(self, episode: u32, step: u32) -> Error {
        Error::AtStep {
            episode,
            step,
            source: Box::new(self),
        }
    }
}
