use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::mutation::{MutationAction, MutationDecision};
use super::store::{fingerprint, known_fingerprints, AuditLine, LearnedStore, StoreError};
use crate::env::TaskKind;
use crate::skills::{Skill, SkillCategory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateRejection {
    /// Structurally incomplete decision (missing target or sections).
    Malformed,
    SafetyPhrase,
    DuplicateFingerprint,
    ScopeMismatch,
    MissingParent,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateVerdict {
    pub accepted: bool,
    pub rejected_by: Option<GateRejection>,
    pub detail: String,
}

impl GateVerdict {
    fn accept() -> Self {
        GateVerdict { accepted: true, rejected_by: None, detail: "passed all checks".into() }
    }

    fn reject(by: GateRejection, detail: String) -> Self {
        GateVerdict { accepted: false, rejected_by: Some(by), detail }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateConfig {
    pub blacklist: Vec<String>,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            blacklist: [
                "ignore safety",
                "override safety",
                "disable constraints",
                "exceed max step",
                "skip quality gate",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
        }
    }
}

/// The four checks in order, behind a structural sanity check; the first
/// failure wins. `existing` is the store's current learned skills.
pub fn quality_gate(
    mutation: &MutationDecision,
    existing: &[Skill],
    episode_task: TaskKind,
    config: &GateConfig,
) -> GateVerdict {
    if let Err(e) = mutation.validate() {
        return GateVerdict::reject(GateRejection::Malformed, e);
    }
    if let Some(content) = &mutation.content {
        let texts = [content.rule.as_str(), content.trigger.as_str(), content.constraints.as_str()];
        for phrase in &config.blacklist {
            let needle = crate::text::normalize(phrase);
            if needle.is_empty() {
                continue;
            }
            if texts.iter().any(|t| crate::text::normalize(t).contains(&needle)) {
                return GateVerdict::reject(
                    GateRejection::SafetyPhrase,
                    format!("contains blacklisted phrase `{phrase}`"),
                );
            }
        }
        if matches!(mutation.action, MutationAction::Create | MutationAction::Overlay | MutationAction::Rewrite) {
            let fp = fingerprint(mutation.scope, &content.trigger, &content.rule);
            if known_fingerprints(existing).contains(&fp) {
                return GateVerdict::reject(
                    GateRejection::DuplicateFingerprint,
                    format!("fingerprint {fp:016x} already stored"),
                );
            }
        }
    }
    if mutation.scope != episode_task {
        return GateVerdict::reject(
            GateRejection::ScopeMismatch,
            format!("mutation scoped to {} during a {episode_task} episode", mutation.scope),
        );
    }
    if mutation.action.needs_parent() {
        let target = mutation.target.as_deref().unwrap_or_default();
        match existing.iter().find(|s| s.name == target) {
            Some(s) if s.category == SkillCategory::Learned && s.applies_to(episode_task) => {}
            Some(_) => {
                return GateVerdict::reject(
                    GateRejection::MissingParent,
                    format!("`{target}` is not a learned {episode_task} skill"),
                )
            }
            None => return GateVerdict::reject(GateRejection::MissingParent, format!("no learned skill `{target}`")),
        }
    }
    GateVerdict::accept()
}

/// Gate a mutation against the store and append the audit line. NoChange
/// decisions are not gated and leave no audit line.
pub fn gate_and_audit(
    mutation: &MutationDecision,
    episode_id: &str,
    episode_task: TaskKind,
    store: &mut dyn LearnedStore,
    config: &GateConfig,
) -> Result<Option<GateVerdict>, StoreError> {
    if mutation.action == MutationAction::NoChange {
        return Ok(None);
    }
    let verdict = quality_gate(mutation, &store.skills()?, episode_task, config);
    let reason = match verdict.rejected_by {
        Some(by) => format!(
            "{}: {}",
            serde_json::to_value(by).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            verdict.detail
        ),
        None => verdict.detail.to_string(),
    };
    store.append_audit(&AuditLine {
        episode: episode_id.to_string(),
        action: mutation.action,
        target: mutation.target.clone(),
        accepted: verdict.accepted,
        reason,
    })?;
    Ok(Some(verdict))
}
