//! Self-evolution: summarize a finished episode, reflect on it, gate the
//! proposed skill mutation and materialize accepted ones as learned skills.

mod gate;
mod mutation;
mod store;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::env::{ConditionId, Outcome, TaskKind};
use crate::reasoning::{CallKind, DecisionProvider, ProviderRequest};
use crate::runner::{EndReason, Trajectory};
use crate::skills::Skill;

pub use gate::{gate_and_audit, quality_gate, GateConfig, GateRejection, GateVerdict};
pub use mutation::{parse_mutation, render_mutation, MutationAction, MutationDecision, SkillContent};
pub use store::{
    fingerprint, known_fingerprints, materialize, rule_groups, select_learned, AuditLine, LearnedStore, MemoryStore,
    StoreError,
};

/// Steps kept verbatim at each end of the movement digest.
const DIGEST_EDGE: usize = 10;
/// Range under which forward steps count as "near the target".
const NEAR_RANGE_M: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode_id: String,
    pub task: TaskKind,
    pub satellite_id: String,
    pub condition: ConditionId,
    pub outcome: Outcome,
    pub ended_by: EndReason,
    /// Committed calls; the middle is elided beyond 2 x 10 steps.
    pub movements: Vec<String>,
    pub omitted_steps: u32,
    /// Visibility and brightness after each step, same elision.
    pub perception: Vec<String>,
    /// Mean forward step commanded while closer than 5 m.
    pub near_forward_step_m: Option<f64>,
    pub collided: bool,
    /// Learned skills injected into the episode.
    pub active_learned: Vec<String>,
}

fn elide<T: Clone>(items: &[T]) -> (Vec<T>, u32) {
    if items.len() <= 2 * DIGEST_EDGE {
        return (items.to_vec(), 0);
    }
    let mut out = items[..DIGEST_EDGE].to_vec();
    out.extend_from_slice(&items[items.len() - DIGEST_EDGE..]);
    (out, (items.len() - 2 * DIGEST_EDGE) as u32)
}

pub fn summarize_episode(trajectory: &Trajectory, outcome: &Outcome, active_learned: &[String]) -> EpisodeSummary {
    let moves: Vec<String> = trajectory
        .steps
        .iter()
        .map(|s| {
            let status = s.result.error_kind.as_deref().unwrap_or("ok");
            format!("{} {} {} -> {status}", s.step_index, s.committed.tool, s.committed.args_json())
        })
        .collect();
    let seen: Vec<String> = trajectory
        .steps
        .iter()
        .map(|s| {
            let o = &s.observation;
            format!(
                "{} {} brightness={:.0}",
                s.step_index,
                if o.visible { "visible" } else { "hidden" },
                o.mean_brightness
            )
        })
        .collect();
    let (movements, omitted_steps) = elide(&moves);
    let (perception, _) = elide(&seen);

    let mut near = Vec::new();
    let mut before = &trajectory.initial;
    for s in &trajectory.steps {
        if s.committed.tool == "set_position" {
            if let (Some(r), Some(dx)) = (before.lidar_range, s.committed.number("dx")) {
                if r < NEAR_RANGE_M && dx > 0.0 {
                    near.push(dx);
                }
            }
        }
        before = &s.observation;
    }
    let near_forward_step_m = (!near.is_empty()).then(|| near.iter().sum::<f64>() / near.len() as f64);
    let collided = trajectory.ended_by == EndReason::Collision
        || trajectory.steps.iter().any(|s| s.result.error_kind.as_deref() == Some("Collision"));

    EpisodeSummary {
        episode_id: trajectory.episode_id.clone(),
        task: trajectory.task.kind,
        satellite_id: trajectory.task.satellite_id.clone(),
        condition: trajectory.task.condition.id,
        outcome: outcome.clone(),
        ended_by: trajectory.ended_by,
        movements,
        omitted_steps,
        perception,
        near_forward_step_m,
        collided,
        active_learned: active_learned.to_vec(),
    }
}

impl EpisodeSummary {
    pub fn render(&self) -> String {
        let mut s = format!(
            "Episode {} ({} {} {}): ended by {:?}, {} steps",
            self.episode_id, self.task, self.satellite_id, self.condition, self.ended_by, self.outcome.steps
        );
        if let Some(ok) = self.outcome.success {
            s.push_str(if ok { ", success" } else { ", failure" });
        }
        if let Some(d) = self.outcome.terminal_distance {
            s.push_str(&format!(", final range {d:.2} m"));
        }
        if let Some(score) = self.outcome.score {
            s.push_str(&format!(", score {score:.0}"));
        }
        s.push('\n');
        for m in &self.movements {
            s.push_str(&format!("  {m}\n"));
        }
        if self.omitted_steps > 0 {
            s.push_str(&format!("  ({} middle steps omitted)\n", self.omitted_steps));
        }
        s
    }

    fn failed(&self) -> bool {
        self.outcome.success == Some(false)
    }
}

/// Ask the provider for a mutation. Malformed answers become NoChange.
pub fn reflect(
    summary: &EpisodeSummary,
    history: &[EpisodeSummary],
    active: &[Skill],
    provider: &mut dyn DecisionProvider,
) -> MutationDecision {
    let mut req = ProviderRequest::new(CallKind::Reflect);
    req.episode_id = summary.episode_id.clone();
    req.step_index = summary.outcome.steps;
    let mut user = String::from("Reflect on this episode and propose one skill mutation.\n");
    user.push_str(&summary.render());
    for h in history {
        user.push_str("Earlier: ");
        user.push_str(&h.render());
    }
    for s in active {
        user.push_str(&format!("Active learned skill {} v{}:\n{}\n", s.name, s.version, s.body));
    }
    user.push_str(
        "Answer with MUTATION <create|overlay|rewrite|disable|no_change>, then TARGET, SCOPE, INTENT, TRIGGER, RULE, CONSTRAINTS, EVIDENCE and BECAUSE lines as needed.",
    );
    req.user = user;
    req.context.insert("summary".into(), serde_json::to_value(summary).expect("summary serializes"));
    req.context.insert("history".into(), serde_json::to_value(history).expect("summary serializes"));
    let active_json: Vec<Value> =
        active.iter().map(|s| json!({"name": s.name, "version": s.version, "enabled": s.enabled})).collect();
    req.context.insert("active_learned".into(), Value::Array(active_json));
    match provider.complete(&req) {
        Ok(text) => parse_mutation(&text)
            .unwrap_or_else(|e| MutationDecision::no_change(summary.task, &format!("malformed reflection: {e}"))),
        Err(e) => MutationDecision::no_change(summary.task, &format!("reflection failed: {e}")),
    }
}

const STEP_CAP_RULE: &str = "Below 5 m range, cap forward step at 0.5 m.";
const KB_RULE: &str = "After segmenting the parts, look up part attributes with kb_lookup before writing the report.";
const REPORT_RULE: &str = "Fill every report field with the looked-up attributes of each part seen, not just its name.";

/// Rule table of the scripted reflector:
/// a failed approach with large steps near the target creates a step cap;
/// a collision while a learned skill was active disables that skill;
/// a low inspection score creates a lookup hint, and a repeated one overlays it.
pub(crate) fn scripted_reflect(req: &ProviderRequest) -> String {
    let Some(summary) =
        req.context.get("summary").and_then(|v| serde_json::from_value::<EpisodeSummary>(v.clone()).ok())
    else {
        return "MUTATION no_change\nSCOPE rendezvous\nBECAUSE no summary".into();
    };
    let active: Vec<String> = req
        .context
        .get("active_learned")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(|s| s["name"].as_str().map(String::from)).collect())
        .unwrap_or_default();
    let history: Vec<EpisodeSummary> =
        req.context.get("history").and_then(|v| serde_json::from_value(v.clone()).ok()).unwrap_or_default();
    let scope = summary.task;
    let ep = &summary.episode_id;
    let content = |intent: &str, trigger: &str, rule: &str, constraints: &str, evidence: String| SkillContent {
        intent: intent.into(),
        trigger: trigger.into(),
        rule: rule.into(),
        constraints: constraints.into(),
        evidence,
    };

    let decision = if summary.task.is_navigation() && summary.failed() {
        match (summary.collided, active.last(), summary.near_forward_step_m) {
            (true, Some(skill), _) => MutationDecision {
                action: MutationAction::Disable,
                target: Some(skill.clone()),
                content: None,
                scope,
                justification: format!("collision in {ep} while `{skill}` was active"),
            },
            (_, _, Some(step)) if step > 1.5 => MutationDecision {
                action: MutationAction::Create,
                target: Some("step-cap".into()),
                content: Some(content(
                    "Avoid overshooting into the keep-out zone during the final approach.",
                    "Measured range to the target is below 5 m while approaching.",
                    STEP_CAP_RULE,
                    "Stay within the 2 m per-step limit and keep 0.8 m from the target surface.",
                    format!(
                        "{ep} ended by {:?} after forward steps averaging {step:.2} m inside 5 m.",
                        summary.ended_by
                    ),
                )),
                scope,
                justification: format!("average forward step {step:.2} m near the target"),
            },
            _ => MutationDecision::no_change(scope, "failure without an actionable pattern"),
        }
    } else if summary.task == TaskKind::Inspection && summary.outcome.score.is_some_and(|s| s < 60.0) {
        let score = summary.outcome.score.unwrap_or_default();
        let repeated = history.iter().any(|h| h.outcome.score.is_some_and(|s| s < 60.0));
        match active.last() {
            Some(skill) if repeated => MutationDecision {
                action: MutationAction::Overlay,
                target: Some(skill.clone()),
                content: Some(content(
                    "Raise report accuracy beyond part names.",
                    "Writing the inspection report after a knowledge lookup.",
                    REPORT_RULE,
                    "Only report attributes that were observed or looked up.",
                    format!("{ep} scored {score:.0} with `{skill}` active."),
                )),
                scope,
                justification: format!("second low score ({score:.0})"),
            },
            Some(_) => MutationDecision::no_change(scope, "give the active skill another round"),
            None => MutationDecision {
                action: MutationAction::Create,
                target: Some("part-lookup".into()),
                content: Some(content(
                    "Ground each report field in known part attributes.",
                    "Parts have been segmented during an inspection.",
                    KB_RULE,
                    "Keep the standoff between 1 m and 3 m while looking things up.",
                    format!("{ep} scored {score:.0} with a names-only report."),
                )),
                scope,
                justification: format!("low inspection score {score:.0}"),
            },
        }
    } else {
        MutationDecision::no_change(scope, "no anomaly")
    };
    render_mutation(&decision)
}

/// What phase 3 did for one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionRecord {
    pub decision: MutationDecision,
    pub verdict: Option<GateVerdict>,
    pub skill: Option<Skill>,
}

/// Reflect, gate, audit and materialize.
pub fn evolve(
    summary: &EpisodeSummary,
    history: &[EpisodeSummary],
    store: &mut dyn LearnedStore,
    provider: &mut dyn DecisionProvider,
    config: &GateConfig,
) -> Result<EvolutionRecord, StoreError> {
    let active: Vec<Skill> = store.skills()?.into_iter().filter(|s| summary.active_learned.contains(&s.name)).collect();
    let decision = reflect(summary, history, &active, provider);
    let verdict = gate_and_audit(&decision, &summary.episode_id, summary.task, store, config)?;
    let skill = match &verdict {
        Some(v) if v.accepted => materialize(&decision, &summary.episode_id, store)?,
        _ => None,
    };
    Ok(EvolutionRecord { decision, verdict, skill })
}

#[cfg(test)]
mod tests;
