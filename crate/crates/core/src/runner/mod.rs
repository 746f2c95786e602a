//! Episode execution: phase 1 (route, assemble, reset), phase 2 (the
//! closed decision loop) and phase 3 (evaluate, reflect, evolve).

mod campaign;
mod replay;
mod trajectory;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::env::{evaluate, Outcome, SatelliteModel, TaskSpec};
use crate::evolution::{
    evolve, select_learned, summarize_episode, EpisodeSummary, EvolutionRecord, GateConfig, LearnedStore, StoreError,
};
use crate::reasoning::{step, DecisionProvider, MemoryRecord, MemoryState, ReasoningMode, StepContext, DEFAULT_WINDOW};
use crate::skills::{assemble_prompt, route, AssembledPrompt, RoutingResult, Skill, SkillCatalog};
use crate::tools::{ToolCall, ToolCatalog, ToolLayer, ToolProfile, ToolResult};

pub use crate::tools::{DirectPort, EnvPort, PortError};
pub use campaign::{
    induced_failure_group, run_campaign, Aggregate, CampaignDeps, CampaignReport, EpisodeRow, InducedFailure,
    RoundReport,
};
pub use replay::{replay_events, ReplayError, ReplayedEpisode};
pub use trajectory::{EndReason, InnerCall, StepRecord, Trajectory};

/// Resolved configuration of one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub episode_id: String,
    pub task: TaskSpec,
    pub mode: ReasoningMode,
    pub profile: ToolProfile,
    pub memory_window: usize,
    /// Root seed: environment placement jitter and provider sampling.
    pub seed: u64,
    pub evolution: bool,
    pub top_k: usize,
    pub gate: GateConfig,
}

impl EpisodeConfig {
    pub fn new(episode_id: &str, task: TaskSpec, mode: ReasoningMode, profile: ToolProfile) -> Self {
        EpisodeConfig {
            episode_id: episode_id.to_string(),
            task,
            mode,
            profile,
            memory_window: DEFAULT_WINDOW,
            seed: 0,
            evolution: false,
            top_k: 2,
            gate: GateConfig::default(),
        }
    }

    pub fn validate(&self, tools: &ToolCatalog) -> Result<(), String> {
        self.task.validate()?;
        if self.episode_id.is_empty() || self.episode_id.chars().any(char::is_whitespace) {
            return Err(format!("bad episode id `{}`", self.episode_id));
        }
        if let Some(unknown) = self.profile.allowed.iter().find(|t| tools.get(t).is_none()) {
            return Err(format!("profile `{}` names unknown tool `{unknown}`", self.profile.name));
        }
        if !self.profile.allowed.contains(&tools.terminal().name) {
            return Err(format!("profile `{}` lacks the terminal tool", self.profile.name));
        }
        if self.memory_window == 0 {
            return Err("memory window must be >= 1".into());
        }
        Ok(())
    }
}

/// Structured progress events, in phase order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Init {
        episode_id: String,
        task: TaskSpec,
        mode: ReasoningMode,
        profile: String,
        routing: RoutingResult,
        skills: Vec<String>,
        learned: Vec<String>,
    },
    Reset {
        observation: crate::env::Observation,
    },
    Step {
        record: StepRecord,
    },
    End {
        ended_by: EndReason,
        outcome: Outcome,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    Evolution {
        record: EvolutionRecord,
    },
}

pub trait EventSink {
    fn event(&mut self, event: &Event);
}

/// Sink that drops everything.
pub struct NullSink;

impl EventSink for NullSink {
    fn event(&mut self, _: &Event) {}
}

impl EventSink for Vec<Event> {
    fn event(&mut self, event: &Event) {
        self.push(event.clone());
    }
}

/// Everything an episode needs besides its configuration.
pub struct EpisodeDeps<'a> {
    pub port: &'a mut dyn EnvPort,
    pub provider: &'a mut dyn DecisionProvider,
    pub catalog: &'a SkillCatalog,
    pub tools: &'a ToolCatalog,
    /// Knowledge-base content behind `kb_lookup`.
    pub knowledge: &'a [SatelliteModel],
    /// Learned skills are read from here; phase 3 writes here when enabled.
    pub store: Option<&'a mut dyn LearnedStore>,
    /// Prior summaries of the same group, oldest first.
    pub history: &'a [EpisodeSummary],
    pub sink: &'a mut dyn EventSink,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub trajectory: Trajectory,
    pub outcome: Outcome,
    pub routing: RoutingResult,
    pub skills: Vec<String>,
    pub learned: Vec<String>,
    pub summary: EpisodeSummary,
    pub evolution: Option<EvolutionRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("environment reset failed: {0}")]
    Reset(PortError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// How the loop ends after a committed call, if it does.
pub fn termination(
    call: &ToolCall,
    result: &ToolResult,
    collided: bool,
    step: u32,
    max_steps: u32,
    terminal: &str,
) -> Option<EndReason> {
    if call.tool == terminal {
        Some(EndReason::Terminate)
    } else if collided || result.error_kind.as_deref() == Some("Collision") {
        Some(EndReason::Collision)
    } else if step + 1 >= max_steps {
        Some(EndReason::Timeout)
    } else {
        None
    }
}

pub fn is_terminated(call: &ToolCall, result: &ToolResult, step: u32, max_steps: u32) -> bool {
    termination(call, result, false, step, max_steps, "terminate").is_some()
}

/// Run one episode end to end. Step-level failures end the episode with
/// `EndReason::Error` and a partial trajectory; they still go through
/// evaluation and, when enabled, reflection.
pub fn run_episode(config: &EpisodeConfig, deps: EpisodeDeps<'_>) -> Result<EpisodeReport, RunError> {
    let EpisodeDeps { port, provider, catalog, tools, knowledge, store, history, sink } = deps;
    config.validate(tools).map_err(RunError::Config)?;
    let task = &config.task;
    let satellite = knowledge
        .iter()
        .find(|s| s.id == task.satellite_id)
        .ok_or_else(|| RunError::Config(format!("unknown satellite `{}`", task.satellite_id)))?;

    // Phase 1.
    provider.begin_episode(&config.episode_id);
    let routing =
        route(&task.description, task.kind, &config.profile, config.mode, catalog, provider, &config.episode_id);
    let learned: Vec<Skill> = match store.as_deref() {
        Some(s) => select_learned(task.kind, config.mode, &task.description, &s.skills()?, config.top_k),
        None => Vec::new(),
    };
    let learned_refs: Vec<&Skill> = learned.iter().collect();
    let prompt: AssembledPrompt =
        assemble_prompt(&catalog.core(task.kind), &routing, catalog, &catalog.mode_skills(config.mode), &learned_refs)
            .map_err(|e| RunError::Config(e.to_string()))?;
    let learned_names: Vec<String> = learned.iter().map(|s| s.name.clone()).collect();
    sink.event(&Event::Init {
        episode_id: config.episode_id.clone(),
        task: task.clone(),
        mode: config.mode,
        profile: config.profile.name.clone(),
        routing: routing.clone(),
        skills: prompt.names.clone(),
        learned: learned_names.clone(),
    });
    let layer = ToolLayer::new(tools, &config.profile, knowledge.to_vec(), &task.satellite_id);
    let initial = port.reset(task, config.seed).map_err(RunError::Reset)?;
    sink.event(&Event::Reset { observation: initial.clone() });

    // Phase 2.
    let terminal = tools.terminal().name.clone();
    let mut memory = MemoryState::new(config.memory_window);
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut obs = initial.clone();
    let mut ended_by = EndReason::Timeout;
    let mut error = None;
    for t in 0..task.max_steps {
        let view = layer.agent_view(&obs);
        let ctx = StepContext {
            episode_id: &config.episode_id,
            step_index: t,
            prompt: &prompt.text,
            observation: &view,
            memory: &memory,
            tools: &layer,
        };
        let out = {
            let mut exec = |call: &ToolCall| layer.dispatch(call, &mut *port);
            step(config.mode, &ctx, provider, &mut exec)
        };
        let out = match out {
            Ok(out) => out,
            Err(e) => {
                ended_by = EndReason::Error;
                error = Some(format!("step {t}: {e}"));
                break;
            }
        };
        let result = layer.dispatch(&out.committed, &mut *port);
        let after = match port.latest() {
            Ok(o) => o,
            Err(e) => {
                ended_by = EndReason::Error;
                error = Some(format!("step {t}: {e}"));
                break;
            }
        };
        memory.update(
            MemoryRecord::new(&out.committed, &result, &layer.agent_view(&after), &out.analysis),
            Some(provider),
        );
        let record = StepRecord {
            step_index: t,
            inner: out.inner,
            committed: out.committed,
            result,
            observation: after.clone(),
            memory_hash: memory.hash(),
            provider_calls: out.calls.len() as u32,
            calls: out.calls,
            degraded: out.degraded,
            analysis: out.analysis,
        };
        sink.event(&Event::Step { record: record.clone() });
        let end = termination(&record.committed, &record.result, after.collision, t, task.max_steps, &terminal);
        steps.push(record);
        obs = after;
        if let Some(reason) = end {
            ended_by = reason;
            break;
        }
    }

    // Phase 3.
    let trajectory =
        Trajectory { episode_id: config.episode_id.clone(), task: task.clone(), initial, steps, ended_by, error };
    let outcome = evaluate(&trajectory, task, satellite);
    sink.event(&Event::End { ended_by, outcome: outcome.clone(), error: trajectory.error.clone() });
    let summary = summarize_episode(&trajectory, &outcome, &learned_names);
    let evolution = match (config.evolution, store) {
        (true, Some(store)) => {
            let record = evolve(&summary, history, store, provider, &config.gate)?;
            sink.event(&Event::Evolution { record: record.clone() });
            Some(record)
        }
        _ => None,
    };
    Ok(EpisodeReport { trajectory, outcome, routing, skills: prompt.names, learned: learned_names, summary, evolution })
}

/// Convenience wrapper: in-process simulator, built-in catalogs, no store.
pub fn run_direct(
    config: &EpisodeConfig,
    provider: &mut dyn DecisionProvider,
    sim: crate::env::Simulator,
) -> Result<EpisodeReport, RunError> {
    let knowledge = sim.satellites().to_vec();
    let mut port = DirectPort::new(sim);
    let catalog = SkillCatalog::builtin();
    let tools = crate::tools::builtin_catalog();
    run_episode(
        config,
        EpisodeDeps {
            port: &mut port,
            provider,
            catalog: &catalog,
            tools: &tools,
            knowledge: &knowledge,
            store: None,
            history: &[],
            sink: &mut NullSink,
        },
    )
}
