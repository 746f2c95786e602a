use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::mutation::{MutationAction, MutationDecision, SkillContent};
use crate::env::TaskKind;
use crate::reasoning::ReasoningMode;
use crate::skills::{Provenance, Skill, SkillCategory};
use crate::text::{content_words, normalize, stable_hash, tokens, truncate};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum StoreError {
    #[error("store write failed: {0}")]
    Write(String),
    #[error("store read failed: {0}")]
    Read(String),
    #[error("no learned skill named `{0}`")]
    MissingSkill(String),
}

/// One audit-log entry per gate invocation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditLine {
    pub episode: String,
    pub action: MutationAction,
    pub target: Option<String>,
    pub accepted: bool,
    pub reason: String,
}

impl fmt::Display for AuditLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "episode={} action={} target={} verdict={} reason={}",
            self.episode,
            self.action,
            self.target.as_deref().unwrap_or("-"),
            if self.accepted { "accepted" } else { "rejected" },
            self.reason.replace('\n', " ")
        )
    }
}

impl core::str::FromStr for AuditLine {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let field = |key: &str, next: Option<&str>| -> Result<String, String> {
            let start =
                line.find(&format!("{key}=")).ok_or_else(|| format!("audit line lacks `{key}`"))? + key.len() + 1;
            let end = match next {
                Some(n) => line[start..].find(&format!(" {n}=")).map_or(line.len(), |i| start + i),
                None => line.len(),
            };
            Ok(line[start..end].to_string())
        };
        let target = field("target", Some("verdict"))?;
        Ok(AuditLine {
            episode: field("episode", Some("action"))?,
            action: field("action", Some("target"))?.parse()?,
            target: (target != "-").then_some(target),
            accepted: match field("verdict", Some("reason"))?.as_str() {
                "accepted" => true,
                "rejected" => false,
                other => return Err(format!("bad verdict `{other}`")),
            },
            reason: field("reason", None)?,
        })
    }
}

/// Persistent home of learned skills and the gate's audit log. Written only
/// between episodes.
pub trait LearnedStore {
    /// Current version of every learned skill, disabled ones included.
    fn skills(&self) -> Result<Vec<Skill>, StoreError>;

    /// Store `skill` as its current version; the previous version, if any,
    /// is archived rather than deleted.
    fn put(&mut self, skill: &Skill) -> Result<(), StoreError>;

    fn append_audit(&mut self, line: &AuditLine) -> Result<(), StoreError>;

    fn audit(&self) -> Result<Vec<AuditLine>, StoreError>;

    fn get(&self, name: &str) -> Result<Option<Skill>, StoreError> {
        Ok(self.skills()?.into_iter().find(|s| s.name == name))
    }
}

/// In-memory store.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MemoryStore {
    current: BTreeMap<String, Skill>,
    pub archive: Vec<Skill>,
    audit: Vec<AuditLine>,
}

impl LearnedStore for MemoryStore {
    fn skills(&self) -> Result<Vec<Skill>, StoreError> {
        Ok(self.current.values().cloned().collect())
    }

    fn put(&mut self, skill: &Skill) -> Result<(), StoreError> {
        if let Some(prev) = self.current.insert(skill.name.clone(), skill.clone()) {
            self.archive.push(prev);
        }
        Ok(())
    }

    fn append_audit(&mut self, line: &AuditLine) -> Result<(), StoreError> {
        self.audit.push(line.clone());
        Ok(())
    }

    fn audit(&self) -> Result<Vec<AuditLine>, StoreError> {
        Ok(self.audit.clone())
    }
}

/// Stable hash of lowercase, whitespace-collapsed scope, trigger and rule.
pub fn fingerprint(scope: TaskKind, trigger: &str, rule: &str) -> u64 {
    stable_hash(normalize(&format!("{} {} {}", scope.as_str(), trigger, rule)).as_bytes())
}

/// `(trigger, rule)` of the base sections and of every overlay in a learned
/// skill body.
pub fn rule_groups(body: &str) -> Vec<(String, String)> {
    let mut groups = Vec::new();
    let mut section = "";
    let (mut trigger, mut rule) = (String::new(), String::new());
    let mut flush = |t: &mut String, r: &mut String| {
        if !t.is_empty() || !r.is_empty() {
            groups.push((core::mem::take(t), core::mem::take(r)));
        }
    };
    for line in body.lines() {
        if let Some(h) = line.strip_prefix("## ") {
            section = h.trim();
            if section.starts_with("Overlay") {
                flush(&mut trigger, &mut rule);
            }
            continue;
        }
        let (slot, text) = if let Some(t) = line.strip_prefix("Trigger:") {
            (Some(&mut trigger), t)
        } else if let Some(r) = line.strip_prefix("Rule:") {
            (Some(&mut rule), r)
        } else {
            match section {
                "Trigger" => (Some(&mut trigger), line),
                "Rule" => (Some(&mut rule), line),
                _ => (None, line),
            }
        };
        if let Some(slot) = slot {
            if !slot.is_empty() {
                slot.push(' ');
            }
            slot.push_str(text.trim());
        }
    }
    flush(&mut trigger, &mut rule);
    groups
}

/// Fingerprints of every rule group of every learned skill, per scope.
pub fn known_fingerprints(skills: &[Skill]) -> Vec<u64> {
    let mut out = Vec::new();
    for s in skills {
        for (trigger, rule) in rule_groups(&s.body) {
            for kind in &s.scope {
                out.push(fingerprint(*kind, &trigger, &rule));
            }
        }
    }
    out
}

fn sections_body(content: &SkillContent) -> String {
    let mut body = String::new();
    for (label, text) in content.sections() {
        body.push_str(&format!("## {label}\n{}\n", text.trim()));
    }
    body.trim_end().to_string()
}

fn sanitize(name: &str) -> String {
    let words = tokens(name);
    let joined = words.join("-");
    truncate(&joined, 48).trim_matches('-').to_string()
}

fn keywords_for(content: &SkillContent) -> Vec<String> {
    let mut seen = Vec::new();
    for w in tokens(&format!("{} {}", content.trigger, content.rule)) {
        if content_words(&w).contains(&w) && !seen.contains(&w) && !w.chars().all(|c| c.is_ascii_digit()) {
            seen.push(w);
        }
        if seen.len() == 8 {
            break;
        }
    }
    seen
}

fn summary_for(content: &SkillContent) -> String {
    let intent = content.intent.split_whitespace().collect::<Vec<_>>().join(" ");
    truncate(&intent, 120).to_string()
}

/// Write an accepted mutation to the store and return the new current
/// version of the affected skill.
pub fn materialize(
    mutation: &MutationDecision,
    episode_id: &str,
    store: &mut dyn LearnedStore,
) -> Result<Option<Skill>, StoreError> {
    let existing = store.skills()?;
    let parent = || -> Result<Skill, StoreError> {
        let name = mutation.target.clone().unwrap_or_default();
        existing.iter().find(|s| s.name == name).cloned().ok_or(StoreError::MissingSkill(name))
    };
    let skill = match mutation.action {
        MutationAction::NoChange => return Ok(None),
        MutationAction::Create => {
            let content =
                mutation.content.as_ref().ok_or_else(|| StoreError::Write("create without content".into()))?;
            let base = mutation.target.as_deref().map(sanitize).filter(|n| !n.is_empty()).unwrap_or_else(|| {
                format!(
                    "learned-{}-{:08x}",
                    mutation.scope,
                    fingerprint(mutation.scope, &content.trigger, &content.rule) as u32
                )
            });
            let mut name = base.clone();
            let mut n = 2;
            while existing.iter().any(|s| s.name == name) {
                name = format!("{base}-{n}");
                n += 1;
            }
            Skill {
                name,
                category: SkillCategory::Learned,
                routing_summary: summary_for(content),
                keywords: keywords_for(content),
                body: sections_body(content),
                scope: alloc::vec![mutation.scope],
                mode: None,
                version: 1,
                provenance: Provenance::Evolved(episode_id.to_string()),
                enabled: true,
            }
        }
        MutationAction::Overlay => {
            let content =
                mutation.content.as_ref().ok_or_else(|| StoreError::Write("overlay without content".into()))?;
            let mut s = parent()?;
            s.version += 1;
            s.body.push_str(&format!("\n\n## Overlay v{} (episode {episode_id})\n", s.version));
            for (label, text) in content.sections() {
                s.body.push_str(&format!("{label}: {}\n", text.split_whitespace().collect::<Vec<_>>().join(" ")));
            }
            s.body = s.body.trim_end().to_string();
            for k in keywords_for(content) {
                if !s.keywords.contains(&k) && s.keywords.len() < 12 {
                    s.keywords.push(k);
                }
            }
            s
        }
        MutationAction::Rewrite => {
            let content =
                mutation.content.as_ref().ok_or_else(|| StoreError::Write("rewrite without content".into()))?;
            let mut s = parent()?;
            s.version += 1;
            s.body = sections_body(content);
            s.keywords = keywords_for(content);
            s.routing_summary = summary_for(content);
            s.provenance = Provenance::Evolved(episode_id.to_string());
            s
        }
        MutationAction::Disable => {
            let mut s = parent()?;
            s.enabled = false;
            s
        }
    };
    skill.validate().map_err(StoreError::Write)?;
    store.put(&skill)?;
    Ok(Some(skill))
}

fn provenance_episode(s: &Skill) -> &str {
    match &s.provenance {
        Provenance::Evolved(ep) => ep,
        Provenance::HandAuthored => "",
    }
}

/// Up to `k` enabled learned skills scoped to `task`, most relevant first:
/// keyword overlap with the description, then higher version, then newer
/// originating episode.
pub fn select_learned(
    task: TaskKind,
    _mode: ReasoningMode,
    description: &str,
    skills: &[Skill],
    k: usize,
) -> Vec<Skill> {
    let words = tokens(description);
    let mut ranked: Vec<(usize, &Skill)> = skills
        .iter()
        .filter(|s| s.enabled && s.category == SkillCategory::Learned && s.applies_to(task))
        .map(|s| (s.keywords.iter().filter(|kw| crate::text::contains_phrase(&words, kw)).count(), s))
        .collect();
    ranked.sort_by(|(sa, a), (sb, b)| {
        sb.cmp(sa)
            .then_with(|| b.version.cmp(&a.version))
            .then_with(|| provenance_episode(b).cmp(provenance_episode(a)))
            .then_with(|| a.name.cmp(&b.name))
    });
    ranked.into_iter().take(k).map(|(_, s)| s.clone()).collect()
}
