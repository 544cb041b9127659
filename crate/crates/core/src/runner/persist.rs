//! JSON persistence for Q-tables, traces, and reports.

use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::{q_update, QTable, RewardEvent};
use crate::world::{build_state_space, ActionRecord, ActionVocabulary, DeviceSpec};

use super::scenario::{Scenario, ScenarioFile};
use super::trace::EpisodeTrace;

/// Q-table file: the row/column manifest plus row-major values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QTableFile {
    pub devices: Vec<DeviceSpec>,
    pub actions: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terminal: Vec<usize>,
    /// `null` entries are accepted by the parser so they can be reported as
    /// non-finite instead of as a syntax error.
    pub values: Vec<Option<f64>>,
}

impl QTableFile {
    pub fn from_table(q: &QTable) -> Self {
        QTableFile {
            devices: q.space().devices().to_vec(),
            actions: q.vocab().names(),
            terminal: q.terminal_states(),
            values: q.values().iter().copied().map(Some).collect(),
        }
    }

    pub fn into_table(self) -> Result<QTable> {
        let space = build_state_space(self.devices.iter().cloned())?;
        if space.devices() != self.devices.as_slice() {
            return Err(Error::Manifest("devices are not in id order".into()));
        }
        let mut actions = Vec::with_capacity(self.actions.len());
        for name in &self.actions {
            let a = ActionRecord::parse(name)?;
            space.check_action(&a)?;
            actions.push(a);
        }
        let vocab = ActionVocabulary::with_actions(actions);
        if vocab.names() != self.actions {
            return Err(Error::Manifest(
                "actions must be unique, start with noop, and be sorted by name".into(),
            ));
        }
        let values = self
            .values
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or(Error::NonFinite(i)))
            .collect::<Result<Vec<_>>>()?;
        QTable::from_values(Arc::new(space), Arc::new(vocab), values, &self.terminal)
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| Error::Json {
        path: path.to_owned(),
        source,
    })?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_owned(),
        source,
    })
}

pub fn save_qtable(q: &QTable, path: impl AsRef<Path>) -> Result<()> {
    write_json(&QTableFile::from_table(q), path.as_ref())
}

/// Loads a table using only its own manifest.
pub fn load_qtable(path: impl AsRef<Path>) -> Result<QTable> {
    read_json::<QTableFile>(path.as_ref())?.into_table()
}

/// Loads a table and checks that its manifest matches `scenario`.
pub fn load_qtable_for(path: impl AsRef<Path>, scenario: &Scenario) -> Result<QTable> {
    let q = load_qtable(path)?;
    check_manifest(&q, scenario)?;
    Ok(q)
}

pub fn check_manifest(q: &QTable, scenario: &Scenario) -> Result<()> {
    let ids = |devices: &[DeviceSpec]| devices.iter().map(|d| d.id.clone()).collect::<Vec<_>>();
    if q.space().as_ref() != scenario.space.as_ref() {
        return Err(Error::Manifest(format!(
            "table devices {:?} do not match scenario devices {:?}",
            ids(q.space().devices()),
            ids(scenario.space.devices())
        )));
    }
    if q.vocab().as_ref() != scenario.vocab.as_ref() {
        return Err(Error::Manifest(format!(
            "table actions {:?} do not match scenario actions {:?}",
            q.vocab().names(),
            scenario.vocab.names()
        )));
    }
    if q.terminal_states() != scenario.terminal {
        return Err(Error::Manifest("terminal states differ".into()));
    }
    Ok(())
}

/// Persisted run: the scenario it came from plus every episode trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub scenario: ScenarioFile,
    pub episodes: Vec<EpisodeTrace>,
}

pub fn save_trace(trace: &TraceFile, path: impl AsRef<Path>) -> Result<()> {
    write_json(trace, path.as_ref())
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<TraceFile> {
    read_json(path.as_ref())
}

pub fn save_report<T: Serialize>(report: &T, path: impl AsRef<Path>) -> Result<()> {
    write_json(report, path.as_ref())
}

/// Re-applies every recorded reward through `q_update`, starting from a
/// fresh table, and checks each recorded before/after value bit for bit.
pub fn replay_trace(trace: &TraceFile) -> Result<QTable> {
    let scenario = Scenario::from_file(trace.scenario.clone())?;
    let mut q = QTable::new(scenario.space.clone(), scenario.vocab.clone());
    for &t in &scenario.terminal {
        q.set_terminal(t)?;
    }
    for ep in &trace.episodes {
        for step in &ep.steps {
            let diverged = |detail: String| Error::ReplayDiverged {
                episode: ep.episode,
                step: step.step,
                detail,
            };
            for u in &step.updates {
                let ev = RewardEvent {
                    state: step.state.clone(),
                    action: u.action.clone(),
                    reward: u.reward,
                };
                let cell = q_update(&mut q, &ev, &scenario.params)?;
                if (cell.state_index, cell.action_index) != (u.state_index, u.action_index) {
                    return Err(diverged(format!(
                        "cell ({}, {}) recorded as ({}, {})",
                        cell.state_index, cell.action_index, u.state_index, u.action_index
                    )));
                }
                if cell.before.to_bits() != u.before.to_bits() || cell.after.to_bits() != u.after.to_bits() {
                    return Err(diverged(format!(
                        "{} -> {} recomputed as {} -> {}",
                        u.before, u.after, cell.before, cell.after
                    )));
                }
            }
        }
    }
    Ok(q)
}
