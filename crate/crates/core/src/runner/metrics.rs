use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::{update_epsilon, QTable};

use super::scenario::Scenario;
use super::trace::EpisodeTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: u32,
    pub epsilon: f64,
    pub steps: u32,
    pub cumulative_reward: f64,
    /// Share of visited states whose greedy action is the scripted user's
    /// preference, measured at the end of the episode. `None` unless the
    /// oracle is scripted.
    pub alignment_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub scenario: String,
    pub seed: u64,
    pub episodes: Vec<EpisodeMetrics>,
    /// First episode from which the alignment rate stays at 1.0 through the
    /// end of the run.
    pub convergence_episode: Option<u32>,
    pub final_epsilon: f64,
}

pub fn episode_alignment(scenario: &Scenario, q: &QTable, trace: &EpisodeTrace) -> Result<Option<f64>> {
    let visited = trace.visited_states();
    if visited.is_empty() {
        return Ok(None);
    }
    let mut aligned = 0usize;
    for state in &visited {
        let Some(pref) = scenario.preference(state)? else {
            return Ok(None);
        };
        if q.greedy_action(state)? == &pref {
            aligned += 1;
        }
    }
    Ok(Some(aligned as f64 / visited.len() as f64))
}

/// Rebuilds per-episode metrics from traces by replaying their recorded
/// cell values into a fresh table.
pub fn compute_metrics(scenario: &Scenario, traces: &[EpisodeTrace]) -> Result<TrainingReport> {
    let last = traces
        .last()
        .ok_or_else(|| Error::Validation(vec!["no episodes to summarize".into()]))?;
    let mut q = QTable::new(scenario.space.clone(), scenario.vocab.clone());
    let mut episodes = Vec::with_capacity(traces.len());
    for trace in traces {
        for u in trace.steps.iter().flat_map(|s| &s.updates) {
            q.restore_cell(u.state_index, u.action_index, u.after)?;
        }
        episodes.push(EpisodeMetrics {
            episode: trace.episode,
            epsilon: trace.epsilon,
            steps: trace.steps.len() as u32,
            cumulative_reward: trace.cumulative_reward(),
            alignment_rate: episode_alignment(scenario, &q, trace)?,
        });
    }
    let convergence_episode = convergence(&episodes);
    Ok(TrainingReport {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        episodes,
        convergence_episode,
        final_epsilon: update_epsilon(last.epsilon, &scenario.params),
    })
}

fn convergence(episodes: &[EpisodeMetrics]) -> Option<u32> {
    let mut start = None;
    for m in episodes {
        match m.alignment_rate {
            Some(1.0) => {
                start.get_or_insert(m.episode);
            }
            _ => start = None,
        }
    }
    start
}
