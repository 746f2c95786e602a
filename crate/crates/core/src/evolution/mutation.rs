use alloc::format;
use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

use crate::env::TaskKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationAction {
    Create,
    Overlay,
    Rewrite,
    Disable,
    NoChange,
}

impl MutationAction {
    pub const ALL: [MutationAction; 5] = [
        MutationAction::Create,
        MutationAction::Overlay,
        MutationAction::Rewrite,
        MutationAction::Disable,
        MutationAction::NoChange,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MutationAction::Create => "create",
            MutationAction::Overlay => "overlay",
            MutationAction::Rewrite => "rewrite",
            MutationAction::Disable => "disable",
            MutationAction::NoChange => "no_change",
        }
    }

    pub fn needs_parent(self) -> bool {
        matches!(self, MutationAction::Overlay | MutationAction::Rewrite | MutationAction::Disable)
    }

    pub fn needs_content(self) -> bool {
        matches!(self, MutationAction::Create | MutationAction::Overlay | MutationAction::Rewrite)
    }
}

impl core::fmt::Display for MutationAction {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for MutationAction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        MutationAction::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown mutation action `{s}`"))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillContent {
    pub intent: String,
    pub trigger: String,
    pub rule: String,
    pub constraints: String,
    pub evidence: String,
}

impl SkillContent {
    pub fn sections(&self) -> [(&'static str, &str); 5] {
        [
            ("Intent", &self.intent),
            ("Trigger", &self.trigger),
            ("Rule", &self.rule),
            ("Constraints", &self.constraints),
            ("Evidence", &self.evidence),
        ]
    }

    pub fn complete(&self) -> bool {
        self.sections().iter().all(|(_, t)| !t.trim().is_empty())
    }
}

/// Output of a reflection call.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationDecision {
    pub action: MutationAction,
    /// Existing learned skill for overlay/rewrite/disable; proposed name for
    /// create.
    pub target: Option<String>,
    pub content: Option<SkillContent>,
    pub scope: TaskKind,
    pub justification: String,
}

impl MutationDecision {
    pub fn no_change(scope: TaskKind, justification: &str) -> Self {
        MutationDecision {
            action: MutationAction::NoChange,
            target: None,
            content: None,
            scope,
            justification: justification.to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.action.needs_parent() && self.target.as_deref().is_none_or(|t| t.trim().is_empty()) {
            return Err(format!("{} needs a target", self.action));
        }
        match (&self.content, self.action.needs_content()) {
            (Some(c), true) if !c.complete() => Err(format!("{} needs all five sections", self.action)),
            (None, true) => Err(format!("{} needs content", self.action)),
            (Some(_), false) => Err(format!("{} carries no content", self.action)),
            _ => Ok(()),
        }?;
        if self.action == MutationAction::NoChange && self.target.is_some() {
            return Err("no_change carries no target".into());
        }
        Ok(())
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<alloc::vec::Vec<_>>().join(" ")
}

/// ```text
/// MUTATION <action>
/// TARGET <name>          (when present)
/// SCOPE <task kind>
/// INTENT / TRIGGER / RULE / CONSTRAINTS / EVIDENCE <text>   (with content)
/// BECAUSE <text>
/// ```
pub fn render_mutation(m: &MutationDecision) -> String {
    let mut out = format!("MUTATION {}\n", m.action);
    if let Some(t) = &m.target {
        out.push_str(&format!("TARGET {}\n", one_line(t)));
    }
    out.push_str(&format!("SCOPE {}\n", m.scope));
    if let Some(c) = &m.content {
        for (label, text) in c.sections() {
            out.push_str(&format!("{} {}\n", label.to_ascii_uppercase(), one_line(text)));
        }
    }
    out.push_str(&format!("BECAUSE {}", one_line(&m.justification)));
    out
}

pub fn parse_mutation(text: &str) -> Result<MutationDecision, String> {
    let mut action = None;
    let mut target = None;
    let mut scope = None;
    let mut content = SkillContent::default();
    let mut has_content = false;
    let mut because = None;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (tag, rest) = line.split_once(' ').unwrap_or((line, ""));
        let rest = rest.trim().to_string();
        let slot = match tag {
            "MUTATION" => {
                if action.is_some() {
                    return Err("more than one MUTATION line".into());
                }
                action = Some(rest.parse::<MutationAction>()?);
                continue;
            }
            "TARGET" => {
                target = Some(rest);
                continue;
            }
            "SCOPE" => {
                scope = Some(rest.parse::<TaskKind>()?);
                continue;
            }
            "BECAUSE" => {
                because = Some(rest);
                continue;
            }
            "THOUGHT" => continue,
            "INTENT" => &mut content.intent,
            "TRIGGER" => &mut content.trigger,
            "RULE" => &mut content.rule,
            "CONSTRAINTS" => &mut content.constraints,
            "EVIDENCE" => &mut content.evidence,
            other => return Err(format!("unexpected tag `{}`", crate::text::truncate(other, 40))),
        };
        *slot = rest;
        has_content = true;
    }
    let decision = MutationDecision {
        action: action.ok_or("no MUTATION line")?,
        target: target.filter(|t| !t.is_empty()),
        content: has_content.then_some(content),
        scope: scope.ok_or("no SCOPE line")?,
        justification: because.unwrap_or_default(),
    };
    decision.validate()?;
    Ok(decision)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn create() -> MutationDecision {
        MutationDecision {
            action: MutationAction::Create,
            target: Some("step-cap".into()),
            content: Some(SkillContent {
                intent: "avoid overshoot".into(),
                trigger: "range below 5 m".into(),
                rule: "Below 5 m range, cap forward step at 0.5 m.".into(),
                constraints: "respect the 2 m limit".into(),
                evidence: "episode ep-1 collided".into(),
            }),
            scope: TaskKind::Rendezvous,
            justification: "large steps near the target".into(),
        }
    }

    #[test]
    fn round_trip() {
        let m = create();
        assert_eq!(parse_mutation(&render_mutation(&m)).unwrap(), m);
        let n = MutationDecision::no_change(TaskKind::Inspection, "fine");
        assert_eq!(parse_mutation(&render_mutation(&n)).unwrap(), n);
    }

    #[test]
    fn invariants() {
        let mut m = create();
        m.action = MutationAction::Overlay;
        m.target = None;
        assert!(m.validate().is_err());
        let mut m = create();
        m.content.as_mut().unwrap().evidence.clear();
        assert!(m.validate().is_err());
        let mut m = create();
        m.action = MutationAction::Disable;
        assert!(m.validate().is_err(), "disable carries no content");
        assert!(parse_mutation("MUTATION create\nSCOPE search").is_err());
        assert!(parse_mutation("MUTATION explode\nSCOPE search").is_err());
    }
}
