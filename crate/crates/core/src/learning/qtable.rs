use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{ActionRecord, ActionVocabulary, JointState, StateSpace};

use super::params::LearningParams;
use super::reward::RewardEvent;

/// Dense `states × actions` table of action values, row-major.
#[derive(Debug, Clone)]
pub struct QTable {
    space: Arc<StateSpace>,
    vocab: Arc<ActionVocabulary>,
    values: Vec<f64>,
    terminal: Vec<bool>,
}

impl PartialEq for QTable {
    fn eq(&self, other: &Self) -> bool {
        self.space == other.space
            && self.vocab == other.vocab
            && self.terminal == other.terminal
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl QTable {
    pub fn new(space: Arc<StateSpace>, vocab: Arc<ActionVocabulary>) -> Self {
        let rows = space.cardinality();
        let cols = vocab.len();
        QTable {
            space,
            vocab,
            values: vec![0.0; rows * cols],
            terminal: vec![false; rows],
        }
    }

    /// Builds a table from stored values. Every value must be finite and
    /// terminal rows must be zero.
    pub fn from_values(
        space: Arc<StateSpace>,
        vocab: Arc<ActionVocabulary>,
        values: Vec<f64>,
        terminal: &[usize],
    ) -> Result<Self> {
        let mut q = QTable::new(space, vocab);
        if values.len() != q.values.len() {
            return Err(Error::Manifest(format!(
                "expected {} values ({} states x {} actions), found {}",
                q.values.len(),
                q.rows(),
                q.cols(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        q.values = values;
        for &s in terminal {
            if s >= q.rows() {
                return Err(Error::StateIndexOutOfRange {
                    index: s,
                    cardinality: q.rows(),
                });
            }
            if q.row(s).iter().any(|v| *v != 0.0) {
                return Err(Error::Manifest(format!("terminal row {s} is not zero")));
            }
            q.terminal[s] = true;
        }
        Ok(q)
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn vocab(&self) -> &Arc<ActionVocabulary> {
        &self.vocab
    }

    pub fn rows(&self) -> usize {
        self.terminal.len()
    }

    pub fn cols(&self) -> usize {
        self.vocab.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.cols() + action]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        let cols = self.cols();
        &self.values[state * cols..(state + 1) * cols]
    }

    /// Pins a state's row at zero; updates to it are rejected from now on.
    pub fn set_terminal(&mut self, state: usize) -> Result<()> {
        if state >= self.rows() {
            return Err(Error::StateIndexOutOfRange {
                index: state,
                cardinality: self.rows(),
            });
        }
        let cols = self.cols();
        self.values[state * cols..(state + 1) * cols].fill(0.0);
        self.terminal[state] = true;
        Ok(())
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.terminal[state]
    }

    pub fn terminal_states(&self) -> Vec<usize> {
        (0..self.rows()).filter(|&s| self.terminal[s]).collect()
    }

    /// Writes a previously recorded cell value back, e.g. when rebuilding a
    /// table from a trace.
    pub fn restore_cell(&mut self, state: usize, action: usize, value: f64) -> Result<()> {
        if state >= self.rows() {
            return Err(Error::StateIndexOutOfRange {
                index: state,
                cardinality: self.rows(),
            });
        }
        if action >= self.cols() {
            return Err(Error::ActionIndexOutOfRange {
                index: action,
                len: self.cols(),
            });
        }
        let idx = state * self.cols() + action;
        if !value.is_finite() {
            return Err(Error::NonFinite(idx));
        }
        if self.terminal[state] && value != 0.0 {
            return Err(Error::TerminalUpdate {
                state: self.space.decode_state(state)?.key(),
            });
        }
        self.values[idx] = value;
        Ok(())
    }

    pub fn max_value(&self, state: usize) -> f64 {
        self.row(state).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Column with the largest value; ties go to the lowest index.
    pub fn greedy_index(&self, state: usize) -> usize {
        let row = self.row(state);
        let mut best = 0;
        for (i, v) in row.iter().enumerate().skip(1) {
            if *v > row[best] {
                best = i;
            }
        }
        best
    }

    pub fn greedy_action(&self, state: &JointState) -> Result<&ActionRecord> {
        let s = self.space.encode_state(state)?;
        self.vocab.decode(self.greedy_index(s))
    }
}

/// Record of a single-cell Q-update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellUpdate {
    pub state_index: usize,
    pub action_index: usize,
    pub before: f64,
    pub after: f64,
    pub next_state: JointState,
}

/// Applies `Q(s,a) ← Q(s,a) + α[R + γ·max_a' Q(s',a') − Q(s,a)]` for one
/// reward event, with `s' = apply(s, a)` and the max taken over the whole
/// vocabulary.
pub fn q_update(q: &mut QTable, ev: &RewardEvent, params: &LearningParams) -> Result<CellUpdate> {
    let s = q.space.encode_state(&ev.state)?;
    let a = q.vocab.encode(&ev.action)?;
    if q.terminal[s] {
        return Err(Error::TerminalUpdate {
            state: ev.state.key(),
        });
    }
    let next_state = q.space.apply_action(&ev.state, &ev.action)?;
    let s_next = q.space.encode_state(&next_state)?;
    let idx = s * q.cols() + a;
    let before = q.values[idx];
    let target = ev.reward + params.gamma * q.max_value(s_next);
    let after = before + params.alpha * (target - before);
    if !after.is_finite() {
        return Err(Error::NonFinite(idx));
    }
    q.values[idx] = after;
    Ok(CellUpdate {
        state_index: s,
        action_index: a,
        before,
        after,
        next_state,
    })
}
