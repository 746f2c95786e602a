//! Multi-episode orchestration: evolution rounds over a shared store, and
//! the aggregate rows used by ablation and sweep reports.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{run_episode, EndReason, EpisodeConfig, EpisodeDeps, EpisodeReport, EventSink};
use crate::env::{ConditionId, Outcome, SatelliteModel, SimConfig, TaskKind, TaskSpec};
use crate::evolution::{EpisodeSummary, EvolutionRecord, LearnedStore, MutationAction};
use crate::reasoning::{DecisionProvider, ReasoningMode, ScriptedConfig};
use crate::skills::SkillCatalog;
use crate::tools::{EnvPort, ToolCatalog, ToolProfile};

/// One finished (or failed) episode, flattened for reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub episode_id: String,
    pub task: TaskKind,
    pub condition: ConditionId,
    pub mode: ReasoningMode,
    pub profile: String,
    pub ended_by: Option<EndReason>,
    pub outcome: Option<Outcome>,
    /// Set when the episode could not run at all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub learned_active: Vec<String>,
    /// `action target` of an accepted mutation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation: Option<String>,
}

impl EpisodeRow {
    pub fn from_report(config: &EpisodeConfig, report: &EpisodeReport) -> Self {
        let mutation = report.evolution.as_ref().and_then(mutation_label);
        EpisodeRow {
            error: report.trajectory.error.clone(),
            ended_by: Some(report.trajectory.ended_by),
            outcome: Some(report.outcome.clone()),
            learned_active: report.learned.clone(),
            mutation,
            ..Self::failed(config, String::new())
        }
    }

    pub fn failed(config: &EpisodeConfig, error: String) -> Self {
        EpisodeRow {
            episode_id: config.episode_id.clone(),
            task: config.task.kind,
            condition: config.task.condition.id,
            mode: config.mode,
            profile: config.profile.name.clone(),
            ended_by: None,
            outcome: None,
            error: (!error.is_empty()).then_some(error),
            learned_active: Vec::new(),
            mutation: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.outcome.as_ref().is_some_and(Outcome::passed)
    }
}

/// `action target` of an accepted, effective mutation.
pub(crate) fn mutation_label(e: &EvolutionRecord) -> Option<String> {
    let accepted = e.verdict.as_ref().is_some_and(|v| v.accepted);
    (accepted && e.decision.action != MutationAction::NoChange).then(|| {
        let target = e.skill.as_ref().map(|s| s.name.as_str()).or(e.decision.target.as_deref()).unwrap_or("-");
        format!("{} {target}", e.decision.action)
    })
}

/// Pass count and means over a set of rows. Means skip rows without the
/// quantity; distance and steps average over passing navigation runs only,
/// as in the result tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: u32,
    pub passes: u32,
    pub mean_distance: Option<f64>,
    pub mean_steps: Option<f64>,
    pub mean_score: Option<f64>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

impl Aggregate {
    pub fn of(rows: &[EpisodeRow]) -> Self {
        let outcomes: Vec<&Outcome> = rows.iter().filter_map(|r| r.outcome.as_ref()).collect();
        let passing_nav: Vec<&&Outcome> = outcomes.iter().filter(|o| o.success == Some(true)).collect();
        let inspection: Vec<&&Outcome> = outcomes.iter().filter(|o| o.score.is_some()).collect();
        let steps: Vec<f64> = if inspection.is_empty() {
            passing_nav.iter().map(|o| o.steps as f64).collect()
        } else {
            inspection.iter().map(|o| o.steps as f64).collect()
        };
        Aggregate {
            runs: rows.len() as u32,
            passes: rows.iter().filter(|r| r.passed()).count() as u32,
            mean_distance: mean(&passing_nav.iter().filter_map(|o| o.terminal_distance).collect::<Vec<_>>()),
            mean_steps: mean(&steps),
            mean_score: mean(&inspection.iter().filter_map(|o| o.score).collect::<Vec<_>>()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: u32,
    pub episodes: Vec<EpisodeRow>,
    pub aggregate: Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub rounds: Vec<RoundReport>,
    /// `name vN (origin)` of every learned skill in the store at the end.
    pub inventory: Vec<String>,
}

/// Shared dependencies of a campaign. One port and provider serve every
/// episode; rounds are strictly sequential.
pub struct CampaignDeps<'a> {
    pub port: &'a mut dyn EnvPort,
    pub provider: &'a mut dyn DecisionProvider,
    pub catalog: &'a SkillCatalog,
    pub tools: &'a ToolCatalog,
    pub knowledge: &'a [SatelliteModel],
    pub store: &'a mut dyn LearnedStore,
    pub sink: &'a mut dyn EventSink,
}

/// Run `rounds` rounds of `group` against one learned store. Episode ids
/// get an `-rN` suffix. Each group member sees the summaries of its own
/// earlier rounds as reflection history. A failing episode is recorded and
/// the campaign carries on.
pub fn run_campaign(group: &[EpisodeConfig], rounds: u32, deps: CampaignDeps<'_>) -> CampaignReport {
    let CampaignDeps { port, provider, catalog, tools, knowledge, store, sink } = deps;
    let mut history: Vec<Vec<EpisodeSummary>> = alloc::vec![Vec::new(); group.len()];
    let mut out = Vec::new();
    for round in 1..=rounds {
        let mut rows = Vec::new();
        for (i, base) in group.iter().enumerate() {
            let mut config = base.clone();
            config.episode_id = format!("{}-r{round}", base.episode_id);
            let result = run_episode(
                &config,
                EpisodeDeps {
                    port: &mut *port,
                    provider: &mut *provider,
                    catalog,
                    tools,
                    knowledge,
                    store: Some(&mut *store),
                    history: &history[i],
                    sink: &mut *sink,
                },
            );
            match result {
                Ok(report) => {
                    rows.push(EpisodeRow::from_report(&config, &report));
                    history[i].push(report.summary);
                }
                Err(e) => rows.push(EpisodeRow::failed(&config, e.to_string())),
            }
        }
        out.push(RoundReport { round, aggregate: Aggregate::of(&rows), episodes: rows });
    }
    let inventory = match store.skills() {
        Ok(skills) => skills
            .iter()
            .map(|s| {
                let state = if s.enabled { "" } else { ", disabled" };
                format!("{} v{} ({}{state})", s.name, s.version, s.provenance)
            })
            .collect(),
        Err(e) => alloc::vec![format!("inventory unavailable: {e}")],
    };
    CampaignReport { rounds: out, inventory }
}

/// A rendezvous group that fails on purpose: the policy walks in with a
/// forward step equal to the measured range, so without a learned step cap
/// its last step lands inside the keep-out zone.
#[derive(Clone, Debug)]
pub struct InducedFailure {
    pub config: EpisodeConfig,
    pub scripted: ScriptedConfig,
    pub sim: SimConfig,
}

pub fn induced_failure_group(profile: ToolProfile) -> InducedFailure {
    let mut task = TaskSpec::new(TaskKind::Rendezvous, "CAPSTONE", ConditionId::C1);
    task.start_range_m = 14.5;
    let mut config = EpisodeConfig::new("induced", task, ReasoningMode::Standard, profile);
    config.evolution = true;
    let scripted = ScriptedConfig { forward_gain: 1.0, step_cap_m: 2.0, ..ScriptedConfig::default() };
    let sim = SimConfig { jitter_m: 0.0, jitter_yaw_deg: 0.0, ..SimConfig::default() };
    InducedFailure { config, scripted, sim }
}
