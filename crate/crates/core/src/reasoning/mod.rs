//! Decision core: the provider abstraction standing in for the frozen
//! vision-language model, the three reasoning-mode step functions and the
//! two-tier memory.

pub mod grammar;
mod memory;
mod modes;
mod replay;
mod scripted;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::env::Observation;
use crate::runner::InnerCall;

pub use grammar::{Candidate, Risk};
pub use memory::{LongTerm, MemoryRecord, MemoryState, DEFAULT_WINDOW};
pub use modes::{step, step_prospective, step_react, step_standard, StepContext, StepError, StepOutput, REACT_ROUNDS};
pub use replay::{RecordingProvider, ReplayProvider, TranscriptEntry};
pub use scripted::{ScriptedConfig, ScriptedProvider};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasoningMode {
    #[default]
    Standard,
    React,
    Prospective,
}

impl ReasoningMode {
    pub const ALL: [ReasoningMode; 3] = [ReasoningMode::Standard, ReasoningMode::React, ReasoningMode::Prospective];

    pub fn as_str(self) -> &'static str {
        match self {
            ReasoningMode::Standard => "standard",
            ReasoningMode::React => "react",
            ReasoningMode::Prospective => "prospective",
        }
    }
}

impl fmt::Display for ReasoningMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReasoningMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "standard" => Ok(ReasoningMode::Standard),
            "react" | "re-act" => Ok(ReasoningMode::React),
            "prospective" => Ok(ReasoningMode::Prospective),
            other => Err(alloc::format!("unknown reasoning mode `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    DecideAction,
    Plan,
    Select,
    Reflect,
    Summarize,
    Route,
}

impl CallKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CallKind::DecideAction => "decide_action",
            CallKind::Plan => "plan",
            CallKind::Select => "select",
            CallKind::Reflect => "reflect",
            CallKind::Summarize => "summarize",
            CallKind::Route => "route",
        }
    }
}

impl fmt::Display for CallKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Scripted,
    Replay,
    Remote,
}

/// Everything a provider sees for one call.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProviderRequest {
    pub call_kind: Option<CallKind>,
    pub episode_id: String,
    pub step_index: u32,
    pub round: u32,
    /// Assembled skill prompt.
    pub system: String,
    pub memory_text: String,
    /// Call-specific instructions and the rendered observation.
    pub user: String,
    pub observation: Option<Observation>,
    /// Tools the answer may name.
    pub allowed_tools: Vec<String>,
    /// Non-committing calls already made in this step.
    pub inner: Vec<InnerCall>,
    pub memory: MemoryState,
    pub candidates: Vec<Candidate>,
    pub context: Map<String, Value>,
}

impl ProviderRequest {
    pub fn new(kind: CallKind) -> Self {
        ProviderRequest { call_kind: Some(kind), ..Default::default() }
    }

    pub fn kind(&self) -> CallKind {
        self.call_kind.unwrap_or(CallKind::DecideAction)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("provider timed out")]
    Timeout,
    #[error("provider transport failure: {0}")]
    Transport(String),
    #[error("replay mismatch: {0}")]
    Replay(String),
}

/// The model behind every decision. Scripted and replay providers are
/// deterministic functions of their inputs.
pub trait DecisionProvider {
    fn identity(&self) -> String;

    fn kind(&self) -> ProviderKind;

    /// Raw grammar text for one call.
    fn complete(&mut self, request: &ProviderRequest) -> Result<String, ProviderError>;

    /// Called once before each episode.
    fn begin_episode(&mut self, _episode_id: &str) {}
}

impl<P: DecisionProvider + ?Sized> DecisionProvider for alloc::boxed::Box<P> {
    fn identity(&self) -> String {
        (**self).identity()
    }

    fn kind(&self) -> ProviderKind {
        (**self).kind()
    }

    fn complete(&mut self, request: &ProviderRequest) -> Result<String, ProviderError> {
        (**self).complete(request)
    }

    fn begin_episode(&mut self, episode_id: &str) {
        (**self).begin_episode(episode_id)
    }
}
