//! Scenario loading, episode execution, metrics, and persistence.

mod engine;
mod metrics;
mod persist;
mod scenario;
mod trace;

pub use engine::{run_training, Engine, TrainingOutcome};
pub use metrics::{compute_metrics, episode_alignment, EpisodeMetrics, TrainingReport};
pub use persist::{
    check_manifest, load_qtable, load_qtable_for, load_trace, replay_trace, save_qtable,
    save_report, save_trace, QTableFile, TraceFile,
};
pub use scenario::{
    load_scenario, read_scenario_file, OracleConfig, OracleSpec, PreferenceSpec, Scenario,
    ScenarioFile, DEFAULT_FEEDBACK_TIMEOUT_MS,
};
pub use trace::{EpisodeTrace, StepRecord, UpdateRecord};
