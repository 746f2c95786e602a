use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{CallKind, DecisionProvider, ProviderKind, ProviderRequest};
use crate::env::Observation;
use crate::text::{stable_hash, truncate};
use crate::tools::{ToolCall, ToolResult};

pub const DEFAULT_WINDOW: usize = 5;
const LONG_TERM_MAX_CHARS: usize = 1200;

/// One committed step as remembered by the agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryRecord {
    pub step_index: u32,
    pub analysis: String,
    pub tool: String,
    pub args: BTreeMap<String, Value>,
    pub ok: bool,
    pub digest: String,
    /// Target bearing after the step, when visible.
    pub bearing: Option<(f64, f64)>,
}

impl MemoryRecord {
    pub fn new(call: &ToolCall, result: &ToolResult, after: &Observation, analysis: &str) -> Self {
        MemoryRecord {
            step_index: call.step_index,
            analysis: truncate(analysis, 200).to_string(),
            tool: call.tool.clone(),
            args: call.args.clone(),
            ok: result.ok,
            digest: result.digest(),
            bearing: after.visible.then_some((after.bearing_az, after.bearing_el)),
        }
    }

    fn arg(&self, name: &str) -> f64 {
        self.args.get(name).and_then(Value::as_f64).unwrap_or(0.0)
    }

    fn render(&self) -> String {
        let args = serde_json::to_string(&self.args).expect("json values serialize");
        let mut line = format!("- step {}: {} {} -> {}", self.step_index, self.tool, args, self.digest);
        if !self.analysis.is_empty() {
            line.push_str(&format!(" ({})", self.analysis));
        }
        line
    }
}

/// Aggregate of every step evicted from the recent window.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LongTerm {
    pub steps: u32,
    pub first_step: u32,
    pub last_step: u32,
    pub translations: u32,
    pub rotations: u32,
    pub exposure_changes: u32,
    pub failed: u32,
    pub net_dx: f64,
    pub net_dy: f64,
    pub net_dz: f64,
    pub net_yaw: f64,
    /// Sign of the most recent non-zero yaw command.
    pub last_yaw_sign: i8,
    pub last_bearing: Option<(f64, f64)>,
    /// Provider-written summary, replacing the template when present.
    pub text: Option<String>,
}

impl LongTerm {
    fn absorb(&mut self, r: &MemoryRecord) {
        if self.steps == 0 {
            self.first_step = r.step_index;
        }
        self.steps += 1;
        self.last_step = r.step_index;
        if !r.ok {
            self.failed += 1;
        } else {
            match r.tool.as_str() {
                "set_position" => {
                    self.translations += 1;
                    self.net_dx += r.arg("dx");
                    self.net_dy += r.arg("dy");
                    self.net_dz += r.arg("dz");
                }
                "set_attitude" => {
                    self.rotations += 1;
                    let yaw = r.arg("dyaw");
                    self.net_yaw += yaw;
                    if yaw != 0.0 {
                        self.last_yaw_sign = if yaw > 0.0 { 1 } else { -1 };
                    }
                }
                "set_exposure" => self.exposure_changes += 1,
                _ => {}
            }
        }
        if r.bearing.is_some() {
            self.last_bearing = r.bearing;
        }
    }

    pub fn template(&self) -> String {
        if self.steps == 0 {
            return String::new();
        }
        let mut s = format!(
            "Steps {}-{} ({} steps): {} translations (net dx={:.2} dy={:.2} dz={:.2} m), {} rotations (net yaw {:.1} deg), {} exposure changes, {} failed calls",
            self.first_step,
            self.last_step,
            self.steps,
            self.translations,
            self.net_dx,
            self.net_dy,
            self.net_dz,
            self.rotations,
            self.net_yaw,
            self.exposure_changes,
            self.failed
        );
        match self.last_bearing {
            Some((az, el)) => s.push_str(&format!("; last seen bearing az={az:.1} el={el:.1}")),
            None => s.push_str("; target not seen"),
        }
        s
    }

    pub fn render(&self) -> String {
        match &self.text {
            Some(t) => t.clone(),
            None => self.template(),
        }
    }
}

/// Recent window of at most `window` records plus a compressed long-term
/// summary of everything older.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryState {
    pub window: usize,
    pub recent: VecDeque<MemoryRecord>,
    pub long_term: LongTerm,
    /// Summarize calls that failed and fell back to truncation.
    pub summary_failures: u32,
}

impl Default for MemoryState {
    fn default() -> Self {
        MemoryState::new(DEFAULT_WINDOW)
    }
}

impl MemoryState {
    pub fn new(window: usize) -> Self {
        MemoryState {
            window: window.max(1),
            recent: VecDeque::new(),
            long_term: LongTerm::default(),
            summary_failures: 0,
        }
    }

    /// Append a record, evicting the oldest into long-term memory. Remote
    /// providers are asked to rewrite the summary; scripted and replay
    /// providers use the deterministic template.
    pub fn update(&mut self, record: MemoryRecord, provider: Option<&mut dyn DecisionProvider>) {
        self.recent.push_back(record);
        let mut provider = provider;
        while self.recent.len() > self.window {
            let old = self.recent.pop_front().expect("non-empty window");
            let previous = self.long_term.render();
            self.long_term.absorb(&old);
            let Some(p) = provider.as_deref_mut().filter(|p| p.kind() == ProviderKind::Remote) else {
                continue;
            };
            let mut req = ProviderRequest::new(CallKind::Summarize);
            req.step_index = old.step_index;
            req.user = format!(
                "Update this summary of earlier steps with one more step. Keep it under {LONG_TERM_MAX_CHARS} characters.\nSummary: {previous}\nStep: {}",
                old.render()
            );
            let text = match p.complete(&req) {
                Ok(t) if !t.trim().is_empty() => t.trim().to_string(),
                _ => {
                    self.summary_failures += 1;
                    format!("{previous}\n{}", old.render())
                }
            };
            let keep = text.chars().count().saturating_sub(LONG_TERM_MAX_CHARS);
            self.long_term.text = Some(text.chars().skip(keep).collect());
        }
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        let long = self.long_term.render();
        if !long.is_empty() {
            out.push_str("Earlier: ");
            out.push_str(&long);
            out.push('\n');
        }
        if !self.recent.is_empty() {
            out.push_str("Recent steps:\n");
            for r in &self.recent {
                out.push_str(&r.render());
                out.push('\n');
            }
        }
        out
    }

    pub fn hash(&self) -> u64 {
        stable_hash(self.text().as_bytes())
    }

    /// Net commanded yaw over the whole episode.
    pub fn net_yaw(&self) -> f64 {
        self.recent
            .iter()
            .filter(|r| r.ok && r.tool == "set_attitude")
            .fold(self.long_term.net_yaw, |acc, r| acc + r.arg("dyaw"))
    }

    /// Sign of the last non-zero yaw command, 0 if none.
    pub fn last_yaw_sign(&self) -> i8 {
        self.recent
            .iter()
            .rev()
            .filter(|r| r.ok && r.tool == "set_attitude")
            .map(|r| r.arg("dyaw"))
            .find(|y| *y != 0.0)
            .map_or(self.long_term.last_yaw_sign, |y| if y > 0.0 { 1 } else { -1 })
    }

    pub fn steps_seen(&self) -> u32 {
        self.long_term.steps + self.recent.len() as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn record(i: u32, tool: &str, args: Value) -> MemoryRecord {
        let call = ToolCall::new(tool, args).at(i, 0);
        let obs = Observation {
            visible: true,
            bearing_az: i as f64,
            bearing_el: 0.0,
            angular_size: 1.0,
            mean_brightness: 140.0,
            lidar_range: Some(10.0),
            exposure_gain: 1.0,
            step_index: i + 1,
            collision: false,
            parts_in_view: Default::default(),
        };
        MemoryRecord::new(&call, &ToolResult::ok(json!({})), &obs, "")
    }

    #[test]
    fn window_arithmetic() {
        let mut m = MemoryState::new(5);
        for i in 1..=5 {
            m.update(record(i, "set_position", json!({"dx": 1.0})), None);
        }
        assert_eq!(m.long_term.steps, 0);
        assert!(!m.text().contains("Earlier"));
        for i in 6..=7 {
            m.update(record(i, "set_position", json!({"dx": 1.0})), None);
        }
        let steps: Vec<u32> = m.recent.iter().map(|r| r.step_index).collect();
        assert_eq!(steps, [3, 4, 5, 6, 7]);
        assert!(m.text().contains("Steps 1-2 (2 steps)"), "{}", m.text());
        assert!(m.text().contains("net dx=2.00"));
    }

    #[test]
    fn yaw_bookkeeping_spans_eviction() {
        let mut m = MemoryState::new(2);
        for (i, yaw) in [15.0, 15.0, 15.0, -15.0].into_iter().enumerate() {
            m.update(record(i as u32, "set_attitude", json!({"dyaw": yaw})), None);
        }
        m.update(record(9, "set_exposure", json!({"gain_delta": 0.5})), None);
        m.update(record(10, "set_exposure", json!({"gain_delta": 0.5})), None);
        assert_eq!(m.net_yaw(), 30.0);
        assert_eq!(m.last_yaw_sign(), -1);
    }
}
