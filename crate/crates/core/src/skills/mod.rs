//! Skill layer: skill files, the catalog, gateway routing and prompt
//! assembly.
//!
//! A skill is a header of `key: value` lines between two `---` delimiters
//! followed by a free-text body. Hand-authored and learned skills share the
//! format, so anything the evolution pipeline writes loads through
//! [`Skill::parse`] unchanged.

mod assemble;
mod catalog;
mod routing;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::TaskKind;
use crate::reasoning::ReasoningMode;

pub use assemble::{assemble, assemble_prompt, rank, AssembledPrompt, AssemblyError};
pub use catalog::{builtin_skill_sources, CatalogError, SkillCatalog, SkillDefaults};
pub use routing::{keyword_fallback_router, parse_route, render_route, route, route_request, RoutingResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillCategory {
    Core,
    Task,
    Helper,
    Mode,
    Learned,
}

impl SkillCategory {
    pub const ALL: [SkillCategory; 5] =
        [SkillCategory::Core, SkillCategory::Task, SkillCategory::Helper, SkillCategory::Mode, SkillCategory::Learned];

    pub fn as_str(self) -> &'static str {
        match self {
            SkillCategory::Core => "core",
            SkillCategory::Task => "task",
            SkillCategory::Helper => "helper",
            SkillCategory::Mode => "mode",
            SkillCategory::Learned => "learned",
        }
    }
}

impl fmt::Display for SkillCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SkillCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SkillCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| format!("unknown skill category `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    HandAuthored,
    /// Produced by self-evolution from the named episode.
    Evolved(String),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::HandAuthored => f.write_str("hand-authored"),
            Provenance::Evolved(ep) => write!(f, "evolved:{ep}"),
        }
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "hand-authored" {
            return Ok(Provenance::HandAuthored);
        }
        match s.strip_prefix("evolved:") {
            Some(ep) if !ep.trim().is_empty() => Ok(Provenance::Evolved(ep.trim().to_string())),
            _ => Err(format!("bad provenance `{s}`")),
        }
    }
}

/// The five labeled sections every learned skill body carries.
pub const LEARNED_SECTIONS: [&str; 5] = ["Intent", "Trigger", "Rule", "Constraints", "Evidence"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skill {
    pub name: String,
    pub category: SkillCategory,
    pub routing_summary: String,
    pub keywords: Vec<String>,
    pub body: String,
    pub scope: Vec<TaskKind>,
    /// Reasoning mode a mode skill activates.
    pub mode: Option<ReasoningMode>,
    pub version: u32,
    pub provenance: Provenance,
    pub enabled: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("skill {name}: {detail}")]
pub struct SkillFormatError {
    pub name: String,
    pub detail: String,
}

fn list(value: &str) -> Vec<String> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

impl Skill {
    pub fn applies_to(&self, kind: TaskKind) -> bool {
        self.scope.contains(&kind)
    }

    /// Parse a skill file. `origin` names the file in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Skill, SkillFormatError> {
        let err = |detail: String| SkillFormatError { name: origin.to_string(), detail };
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("---") {
            return Err(err("missing opening `---`".into()));
        }
        let mut name = None;
        let mut category = None;
        let mut summary = String::new();
        let mut keywords = Vec::new();
        let mut scope = Vec::new();
        let mut mode = None;
        let mut version = 1;
        let mut provenance = Provenance::HandAuthored;
        let mut enabled = true;
        let mut closed = false;
        for line in lines.by_ref() {
            let line = line.trim();
            if line == "---" {
                closed = true;
                break;
            }
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once(':').ok_or_else(|| err(format!("header line without `:`: {line}")))?;
            let value = value.trim();
            match key.trim() {
                "name" => name = Some(value.to_string()),
                "category" => category = Some(value.parse().map_err(err)?),
                "summary" => summary = value.to_string(),
                "keywords" => keywords = list(value),
                "scope" => {
                    scope = list(value).iter().map(|s| s.parse::<TaskKind>()).collect::<Result<_, _>>().map_err(err)?
                }
                "mode" => mode = Some(value.parse().map_err(err)?),
                "version" => version = value.parse().map_err(|_| err(format!("bad version `{value}`")))?,
                "provenance" => provenance = value.parse().map_err(err)?,
                "enabled" => {
                    enabled = match value {
                        "true" => true,
                        "false" => false,
                        _ => return Err(err(format!("bad enabled flag `{value}`"))),
                    }
                }
                other => return Err(err(format!("unknown header key `{other}`"))),
            }
        }
        if !closed {
            return Err(err("missing closing `---`".into()));
        }
        let body: Vec<&str> = lines.collect();
        let skill = Skill {
            name: name.ok_or_else(|| err("missing name".into()))?,
            category: category.ok_or_else(|| err("missing category".into()))?,
            routing_summary: summary,
            keywords,
            body: body.join("\n").trim().to_string(),
            scope,
            mode,
            version,
            provenance,
            enabled,
        };
        skill.validate().map_err(err)?;
        Ok(skill)
    }

    /// Render in the file format; `parse(render(s)) == s` for valid skills.
    pub fn render(&self) -> String {
        let scope: Vec<&str> = self.scope.iter().map(|k| k.as_str()).collect();
        let mut out = String::from("---\n");
        out.push_str(&format!("name: {}\n", self.name));
        out.push_str(&format!("category: {}\n", self.category));
        out.push_str(&format!("summary: {}\n", self.routing_summary));
        out.push_str(&format!("keywords: {}\n", self.keywords.join(", ")));
        out.push_str(&format!("scope: {}\n", scope.join(", ")));
        if let Some(mode) = self.mode {
            out.push_str(&format!("mode: {mode}\n"));
        }
        out.push_str(&format!("version: {}\n", self.version));
        out.push_str(&format!("provenance: {}\n", self.provenance));
        out.push_str(&format!("enabled: {}\n", self.enabled));
        out.push_str("---\n");
        out.push_str(&self.body);
        out.push('\n');
        out
    }

    pub fn validate(&self) -> Result<(), String> {
        let valid_name = !self.name.is_empty()
            && self.name.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-');
        if !valid_name {
            return Err(format!("name `{}` must be lowercase letters, digits and dashes", self.name));
        }
        if self.version == 0 {
            return Err("version starts at 1".into());
        }
        if self.scope.is_empty() {
            return Err("scope is empty".into());
        }
        if self.routing_summary.contains('\n') || self.keywords.iter().any(|k| k.contains(',')) {
            return Err("header values must be single-line".into());
        }
        match self.category {
            SkillCategory::Core if self.scope.len() != TaskKind::ALL.len() => {
                return Err("core skills apply to every task kind".into())
            }
            SkillCategory::Mode if self.mode.is_none() => return Err("mode skill without a mode".into()),
            SkillCategory::Learned => {
                if !matches!(self.provenance, Provenance::Evolved(_)) {
                    return Err("learned skills carry evolved provenance".into());
                }
                let headers = section_headers(&self.body);
                for section in LEARNED_SECTIONS {
                    if !headers.contains(&section) {
                        return Err(format!("learned skill lacks a `{section}` section"));
                    }
                }
            }
            _ => {}
        }
        if self.category != SkillCategory::Mode && self.mode.is_some() {
            return Err("only mode skills name a mode".into());
        }
        Ok(())
    }
}

fn section_headers(body: &str) -> Vec<&str> {
    body.lines().filter_map(|l| l.strip_prefix("## ")).map(str::trim).collect()
}
