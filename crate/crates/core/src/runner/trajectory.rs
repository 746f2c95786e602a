use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::env::{InspectionReport, Observation, TaskSpec};
use crate::reasoning::CallKind;
use crate::tools::{ToolCall, ToolResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Terminate,
    Timeout,
    Collision,
    Error,
}

/// A non-committing tool call made inside a step (perception, knowledge,
/// auxiliary).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerCall {
    pub call: ToolCall,
    pub result: ToolResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step_index: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inner: Vec<InnerCall>,
    pub committed: ToolCall,
    pub result: ToolResult,
    /// Environment observation after the committed call.
    pub observation: Observation,
    pub memory_hash: u64,
    pub provider_calls: u32,
    /// Provider call kinds in order, e.g. plan then select.
    #[serde(default)]
    pub calls: Vec<CallKind>,
    #[serde(default)]
    pub degraded: bool,
    #[serde(default)]
    pub analysis: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub episode_id: String,
    pub task: TaskSpec,
    pub initial: Observation,
    pub steps: Vec<StepRecord>,
    pub ended_by: EndReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Trajectory {
    pub fn final_observation(&self) -> &Observation {
        self.steps.last().map_or(&self.initial, |s| &s.observation)
    }

    /// Report attached to a final `terminate` call, if any. Missing
    /// dimensions read as empty text.
    pub fn submitted_report(&self) -> Option<InspectionReport> {
        let last = self.steps.last()?;
        if last.committed.tool != "terminate" {
            return None;
        }
        let report = last.committed.args.get("report")?.as_object()?;
        let mut out = InspectionReport::default();
        for dim in InspectionReport::DIMENSIONS {
            if let Some(text) = report.get(dim).and_then(|v| v.as_str()) {
                *out.get_mut(dim).expect("known dimension") = String::from(text);
            }
        }
        Some(out)
    }
}
