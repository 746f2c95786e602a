//! Rebuild an episode from its event stream.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::campaign::mutation_label;
use super::{EpisodeRow, Event, Trajectory};
use crate::env::Outcome;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("event log has no {0} event")]
    Missing(&'static str),
    #[error("event {index} out of phase order: {detail}")]
    Order { index: usize, detail: String },
}

/// What an event log says about one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayedEpisode {
    pub trajectory: Trajectory,
    pub outcome: Outcome,
    pub row: EpisodeRow,
}

fn phase(e: &Event) -> u8 {
    match e {
        Event::Init { .. } => 0,
        Event::Reset { .. } => 1,
        Event::Step { .. } => 2,
        Event::End { .. } => 3,
        Event::Evolution { .. } => 4,
    }
}

/// Check phase order and reassemble trajectory, outcome and report row.
/// An episode that never reached `End` (a crash mid-run) is reported as
/// missing its end; its steps are still in the log for inspection.
pub fn replay_events(events: &[Event]) -> Result<ReplayedEpisode, ReplayError> {
    let mut last = 0;
    for (index, e) in events.iter().enumerate() {
        let p = phase(e);
        let ok = if index == 0 { p == 0 } else { p > last || (p == 2 && last == 2) };
        if !ok {
            return Err(ReplayError::Order {
                index,
                detail: "phases must run init, reset, steps, end, evolution".to_string(),
            });
        }
        last = p;
    }
    let Some(Event::Init { episode_id, task, mode, profile, learned, .. }) = events.first() else {
        return Err(ReplayError::Missing("init"));
    };
    let initial = events
        .iter()
        .find_map(|e| match e {
            Event::Reset { observation } => Some(observation.clone()),
            _ => None,
        })
        .ok_or(ReplayError::Missing("reset"))?;
    let steps: Vec<_> = events
        .iter()
        .filter_map(|e| match e {
            Event::Step { record } => Some(record.clone()),
            _ => None,
        })
        .collect();
    let (ended_by, outcome, error) = events
        .iter()
        .find_map(|e| match e {
            Event::End { ended_by, outcome, error } => Some((*ended_by, outcome.clone(), error.clone())),
            _ => None,
        })
        .ok_or(ReplayError::Missing("end"))?;
    let mutation = events.iter().find_map(|e| match e {
        Event::Evolution { record } => mutation_label(record),
        _ => None,
    });
    let row = EpisodeRow {
        episode_id: episode_id.clone(),
        task: task.kind,
        condition: task.condition.id,
        mode: *mode,
        profile: profile.clone(),
        ended_by: Some(ended_by),
        outcome: Some(outcome.clone()),
        error: error.clone(),
        learned_active: learned.clone(),
        mutation,
    };
    let trajectory = Trajectory { episode_id: episode_id.clone(), task: task.clone(), initial, steps, ended_by, error };
    Ok(ReplayedEpisode { trajectory, outcome, row })
}
