//! Deterministic stand-in for the vision-language model.
//!
//! The policy reads what a model would read: the observation, this step's
//! tool results, the memory and the assembled prompt (learned skills change
//! its behavior through the prompt text). It answers in the same grammar a
//! remote model must use.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::grammar::{render_decision, render_plan, Candidate, Risk};
use super::{CallKind, DecisionProvider, MemoryState, ProviderError, ProviderKind, ProviderRequest};
use crate::env::{InspectionReport, Observation, TaskKind};
use crate::skills::{keyword_fallback_router, render_route, SkillCatalog};
use crate::text::truncate;
use crate::tools::ToolCall;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptedConfig {
    /// Forward step as a fraction of the measured range.
    pub forward_gain: f64,
    pub min_step_m: f64,
    pub step_cap_m: f64,
    pub terminate_range_m: f64,
    pub sweep_step_deg: f64,
    pub sweep_limit_deg: f64,
    /// Bearing error above which the policy turns before translating.
    pub align_threshold_deg: f64,
    pub brightness_band: (f64, f64),
    /// Refuse to estimate range from the image; without LiDAR the policy
    /// then steps blindly at the cap.
    pub range_required: bool,
    /// Look up part attributes during inspection without being told to by
    /// a learned skill.
    pub inspection_lookup: bool,
}

impl Default for ScriptedConfig {
    fn default() -> Self {
        ScriptedConfig {
            forward_gain: 0.2,
            min_step_m: 0.1,
            step_cap_m: 2.0,
            terminate_range_m: 2.2,
            sweep_step_deg: 15.0,
            sweep_limit_deg: 90.0,
            align_threshold_deg: 10.0,
            brightness_band: (40.0, 220.0),
            range_required: false,
            inspection_lookup: true,
        }
    }
}

/// Facts gathered from tool results during the episode.
#[derive(Clone, Debug, Default)]
struct Knowledge {
    radius: Option<f64>,
    /// Part name -> (dimension, attributes) from the knowledge base.
    kb: BTreeMap<String, (String, String)>,
    kb_loaded: bool,
    seen: Vec<String>,
}

pub struct ScriptedProvider {
    pub config: ScriptedConfig,
    catalog: SkillCatalog,
    knowledge: Knowledge,
}

/// A learned hint that makes the inspection flow consult the knowledge base.
const KB_HINT: &str = "look up part attributes";

impl ScriptedProvider {
    pub fn new(config: ScriptedConfig) -> Self {
        ScriptedProvider { config, catalog: SkillCatalog::builtin(), knowledge: Knowledge::default() }
    }

    /// Catalog consulted for Route calls.
    pub fn with_catalog(mut self, catalog: SkillCatalog) -> Self {
        self.catalog = catalog;
        self
    }

    fn absorb(&mut self, req: &ProviderRequest) {
        for c in req.inner.iter().filter(|c| c.result.ok) {
            let p = &c.result.payload;
            match c.call.tool.as_str() {
                "kb_lookup" => {
                    self.knowledge.radius = p["bounding_radius_m"].as_f64();
                    for part in p["parts"].as_array().into_iter().flatten() {
                        let name = part["name"].as_str().unwrap_or_default().to_string();
                        let dim = part["dimension"].as_str().unwrap_or_default().to_string();
                        let attrs = part["attributes"].as_str().unwrap_or_default().to_string();
                        self.knowledge.kb.insert(name, (dim, attrs));
                    }
                    self.knowledge.kb_loaded = true;
                }
                "segment_parts" | "crop_region" | "zoom" => {
                    for part in p["parts"].as_array().into_iter().flatten() {
                        if let Some(name) = part["name"].as_str() {
                            if !self.knowledge.seen.iter().any(|s| s == name) {
                                self.knowledge.seen.push(name.to_string());
                            }
                        }
                    }
                }
                _ => {}
            }
        }
    }

    fn decide(&self, req: &ProviderRequest) -> (ToolCall, String) {
        let cfg = &self.config;
        let allowed = |t: &str| req.allowed_tools.iter().any(|a| a == t);
        let done = |t: &str| req.inner.iter().any(|c| c.call.tool == t);
        let can = |t: &str| allowed(t) && !done(t);
        let Some(obs) = req.observation.as_ref() else {
            return (ToolCall::new("terminate", json!({"reason": "no observation"})), "nothing observed".into());
        };
        let inspection = req.system.contains("### [task] inspection");

        // Exposure first: nothing else is reliable in a bad frame.
        if let Some(last) = req.inner.last() {
            if last.call.tool == "brightness_assess" && last.result.ok && allowed("set_exposure") {
                let gain = last.result.payload["exposure_gain"].as_f64().unwrap_or(obs.exposure_gain);
                return (exposure(gain), "correct exposure toward unit gain".into());
            }
        }
        let (lo, hi) = cfg.brightness_band;
        let badly_exposed = !(lo..=hi).contains(&obs.mean_brightness) && (obs.exposure_gain - 1.0).abs() > 1e-9;
        if badly_exposed {
            if can("brightness_assess") {
                return (ToolCall::new("brightness_assess", json!({})), "frame looks badly exposed".into());
            }
            if allowed("set_exposure") {
                return (exposure(obs.exposure_gain), "correct exposure toward unit gain".into());
            }
        }

        if !obs.visible {
            let yaw = self.sweep_increment(&req.memory);
            return (
                ToolCall::new("set_attitude", json!({"dyaw": yaw, "dpitch": 0.0, "droll": 0.0})),
                format!("target not visible, sweep yaw {yaw:+.0}"),
            );
        }

        let range = self.range(req, obs);
        if range.is_none() && !cfg.range_required && self.knowledge.radius.is_none() && can("kb_lookup") {
            return (ToolCall::new("kb_lookup", json!({})), "need the target size to estimate range".into());
        }
        if inspection {
            if self.knowledge.seen.is_empty() && can("segment_parts") {
                return (ToolCall::new("segment_parts", json!({})), "enumerate visible parts".into());
            }
            if (cfg.inspection_lookup || req.system.contains(KB_HINT)) && !self.knowledge.kb_loaded && can("kb_lookup")
            {
                return (ToolCall::new("kb_lookup", json!({})), "look up attributes of the seen parts".into());
            }
        }

        if obs.bearing_az.abs() > cfg.align_threshold_deg || obs.bearing_el.abs() > cfg.align_threshold_deg {
            let dyaw = obs.bearing_az.clamp(-90.0, 90.0);
            let dpitch = obs.bearing_el.clamp(-90.0, 90.0);
            return (
                ToolCall::new("set_attitude", json!({"dyaw": dyaw, "dpitch": dpitch, "droll": 0.0})),
                format!("center target, bearing az={:.1} el={:.1}", obs.bearing_az, obs.bearing_el),
            );
        }

        if let Some(r) = range {
            if r <= cfg.terminate_range_m {
                let mut args = json!({"reason": format!("holding at {r:.2} m")});
                if inspection {
                    args["report"] = self.report();
                }
                return (ToolCall::new("terminate", args), format!("range {r:.2} m inside the hold distance"));
            }
        }
        let step = match range {
            Some(r) => {
                let mut s = (cfg.forward_gain * r).clamp(cfg.min_step_m, cfg.step_cap_m);
                for (below, cap) in learned_caps(&req.system) {
                    if r < below {
                        s = s.min(cap);
                    }
                }
                s
            }
            None => cfg.step_cap_m,
        };
        let (az, el) = (obs.bearing_az.to_radians(), obs.bearing_el.to_radians());
        let (dx, dy, dz) =
            (step * libm::cos(el) * libm::cos(az), step * libm::cos(el) * libm::sin(az), -step * libm::sin(el));
        let why = match range {
            Some(r) => format!("range {r:.2} m, step {step:.2} m"),
            None => format!("range unknown, step {step:.2} m"),
        };
        (ToolCall::new("set_position", json!({"dx": trunc6(dx), "dy": trunc6(dy), "dz": trunc6(dz)})), why)
    }

    fn range(&self, req: &ProviderRequest, obs: &Observation) -> Option<f64> {
        if let Some(r) = obs.lidar_range {
            return Some(r);
        }
        let measured = req
            .inner
            .iter()
            .filter(|c| c.call.tool == "lidar_range" && c.result.ok)
            .find_map(|c| c.result.payload["range_m"].as_f64());
        if measured.is_some() || self.config.range_required {
            return measured;
        }
        let radius = self.knowledge.radius?;
        let half = (obs.angular_size / 2.0).to_radians();
        if !(half > 0.0 && half < core::f64::consts::FRAC_PI_2) {
            return None;
        }
        Some(radius / libm::tan(half) - radius)
    }

    /// Bounded sweep: right in fixed increments up to the limit, then left
    /// to the opposite limit, and so on.
    fn sweep_increment(&self, memory: &MemoryState) -> f64 {
        let (step, limit) = (self.config.sweep_step_deg, self.config.sweep_limit_deg);
        let heading = memory.net_yaw();
        let mut dir = if memory.last_yaw_sign() < 0 { -1.0 } else { 1.0 };
        if dir > 0.0 && heading + step > limit + 1e-6 {
            dir = -1.0;
        } else if dir < 0.0 && heading - step < -limit - 1e-6 {
            dir = 1.0;
        }
        dir * step
    }

    fn report(&self) -> Value {
        let mut report = InspectionReport::default();
        for name in &self.knowledge.seen {
            let (dim, text) = match self.knowledge.kb.get(name) {
                Some((dim, attrs)) => (dim.clone(), format!("{} {attrs}", name.replace('_', " "))),
                None => (guess_dimension(name).to_string(), name.replace('_', " ")),
            };
            if let Some(slot) = report.get_mut(&dim) {
                if !slot.is_empty() {
                    slot.push_str("; ");
                }
                slot.push_str(&text);
            }
        }
        serde_json::to_value(report).expect("report serializes")
    }

    fn plan(&self, req: &ProviderRequest) -> Vec<Candidate> {
        let (best, why) = self.decide(req);
        let cand =
            |action: ToolCall, outcome: &str, risk| Candidate { action, predicted_outcome: outcome.to_string(), risk };
        match best.tool.as_str() {
            "set_position" => {
                let n = |k: &str| best.number(k).unwrap_or(0.0);
                let v = (n("dx"), n("dy"), n("dz"));
                let norm = libm::sqrt(v.0 * v.0 + v.1 * v.1 + v.2 * v.2).max(1e-9);
                let scaled = |f: f64| {
                    let f = f.min(self.config.step_cap_m / norm);
                    ToolCall::new(
                        "set_position",
                        json!({"dx": trunc6(v.0 * f), "dy": trunc6(v.1 * f), "dz": trunc6(v.2 * f)}),
                    )
                };
                vec![
                    cand(scaled(1.5), "covers more distance but may overshoot the hold band", Risk::High),
                    cand(best.clone(), &why, Risk::Low),
                    cand(scaled(0.5), "safe but slow progress", Risk::Medium),
                ]
            }
            "set_attitude" => {
                let yaw = best.number("dyaw").unwrap_or(0.0);
                let wide = ToolCall::new(
                    "set_attitude",
                    json!({"dyaw": (2.0 * yaw).clamp(-90.0, 90.0), "dpitch": 0.0, "droll": 0.0}),
                );
                vec![
                    cand(best.clone(), &why, Risk::Low),
                    cand(wide, "faster sweep, may skip past the target", Risk::Medium),
                ]
            }
            "terminate" => vec![
                cand(best.clone(), &why, Risk::Low),
                cand(
                    ToolCall::new("set_position", json!({"dx": 0.0, "dy": 0.0, "dz": 0.0})),
                    "hold position one more step",
                    Risk::Medium,
                ),
            ],
            _ => vec![cand(best.clone(), &why, Risk::Low)],
        }
    }
}

impl Default for ScriptedProvider {
    fn default() -> Self {
        ScriptedProvider::new(ScriptedConfig::default())
    }
}

impl DecisionProvider for ScriptedProvider {
    fn identity(&self) -> String {
        "scripted".into()
    }

    fn kind(&self) -> ProviderKind {
        ProviderKind::Scripted
    }

    fn complete(&mut self, req: &ProviderRequest) -> Result<String, ProviderError> {
        self.absorb(req);
        Ok(match req.kind() {
            CallKind::DecideAction => {
                let (call, thought) = self.decide(req);
                render_decision(&call, &thought)
            }
            CallKind::Plan => render_plan(&self.plan(req)),
            CallKind::Select => {
                let best =
                    req.candidates.iter().enumerate().min_by_key(|(i, c)| (c.risk, *i)).map_or(1, |(i, _)| i + 1);
                format!("SELECT {best}")
            }
            CallKind::Route => {
                let description = req.context.get("description").and_then(Value::as_str).unwrap_or_default();
                let kind = req
                    .context
                    .get("task_kind")
                    .and_then(Value::as_str)
                    .and_then(|k| k.parse().ok())
                    .unwrap_or(TaskKind::Rendezvous);
                render_route(&keyword_fallback_router(description, &self.catalog, kind))
            }
            CallKind::Reflect => crate::evolution::scripted_reflect(req),
            CallKind::Summarize => truncate(req.user.trim(), 1200).to_string(),
        })
    }

    fn begin_episode(&mut self, _episode_id: &str) {
        self.knowledge = Knowledge::default();
    }
}

fn exposure(gain: f64) -> ToolCall {
    ToolCall::new("set_exposure", json!({"gain_delta": round6(1.0 - gain)}))
}

fn round6(x: f64) -> f64 {
    libm::round(x * 1e6) / 1e6
}

/// Toward zero, so a capped translation never rounds past the step limit.
fn trunc6(x: f64) -> f64 {
    libm::trunc(x * 1e6) / 1e6
}

fn guess_dimension(part: &str) -> &'static str {
    let p = part.to_ascii_lowercase();
    if p.contains("solar") || p.contains("power") || p.contains("rtg") || p.contains("array") {
        "power"
    } else if p.contains("antenna") || p.contains("dish") {
        "communication"
    } else if p.contains("blanket") || p.contains("surface") || p.contains("shield") {
        "surface"
    } else if p.contains("bus") || p.contains("frame") || p.contains("structure") {
        "structure"
    } else {
        "payload"
    }
}

/// Every "below X m range, cap forward step at Y m" rule in the prompt.
pub(crate) fn learned_caps(prompt: &str) -> Vec<(f64, f64)> {
    let lower = prompt.to_lowercase();
    let mut out = Vec::new();
    let mut rest = lower.as_str();
    while let Some(i) = rest.find("below ") {
        rest = &rest[i + 6..];
        let Some((below, tail)) = leading_number(rest) else {
            continue;
        };
        let Some(tail) = tail.strip_prefix(" m range, cap forward step at ") else {
            continue;
        };
        if let Some((cap, _)) = leading_number(tail) {
            out.push((below, cap));
        }
    }
    out
}

fn leading_number(s: &str) -> Option<(f64, &str)> {
    let end = s.find(|c: char| !(c.is_ascii_digit() || c == '.')).unwrap_or(s.len());
    let n = s[..end].parse().ok()?;
    Some((n, &s[end..]))
}
