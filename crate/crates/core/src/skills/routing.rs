use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Skill, SkillCatalog, SkillCategory};
use crate::env::TaskKind;
use crate::reasoning::{CallKind, DecisionProvider, ProviderRequest, ReasoningMode};
use crate::text::{contains_phrase, tokens};
use crate::tools::ToolProfile;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingResult {
    pub task_skill: String,
    pub helper_skills: Vec<String>,
    pub justification: String,
    pub used_fallback: bool,
    /// Why the router's own answer was rejected, when it was.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl RoutingResult {
    pub fn defaults(catalog: &SkillCatalog, kind: TaskKind, failure: Option<String>) -> Self {
        let d = catalog.defaults(kind);
        RoutingResult {
            task_skill: d.task.clone(),
            helper_skills: d.helpers.clone(),
            justification: format!("default skills for {kind}"),
            used_fallback: true,
            failure,
        }
    }

    /// Cardinality, existence, category and scope checks.
    pub fn validate(&self, catalog: &SkillCatalog, kind: TaskKind) -> Result<(), String> {
        let usable = |name: &str, category: SkillCategory| -> Result<&Skill, String> {
            match catalog.get(name) {
                Some(s) if !s.enabled => Err(format!("skill `{name}` is disabled")),
                Some(s) if s.category != category => Err(format!("`{name}` is not a {category} skill")),
                Some(s) if !s.applies_to(kind) => Err(format!("`{name}` does not apply to {kind}")),
                Some(s) => Ok(s),
                None => Err(format!("unknown skill `{name}`")),
            }
        };
        usable(&self.task_skill, SkillCategory::Task)?;
        if self.helper_skills.len() > 2 {
            return Err(format!("{} helper skills, at most 2 allowed", self.helper_skills.len()));
        }
        for (i, h) in self.helper_skills.iter().enumerate() {
            usable(h, SkillCategory::Helper)?;
            if self.helper_skills[..i].contains(h) {
                return Err(format!("helper `{h}` listed twice"));
            }
        }
        Ok(())
    }
}

/// `task=<name>; helpers=<a,b>; because=<text>`
pub fn parse_route(text: &str) -> Result<(String, Vec<String>, String), String> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let line = lines.next().ok_or("empty routing answer")?;
    if lines.next().is_some() {
        return Err("routing answer must be a single line".into());
    }
    let mut parts = line.splitn(3, ';').map(str::trim);
    let field = |part: Option<&str>, key: &str| -> Result<String, String> {
        part.and_then(|p| p.strip_prefix(key))
            .and_then(|p| p.strip_prefix('='))
            .map(|v| v.trim().to_string())
            .ok_or_else(|| format!("expected `{key}=`"))
    };
    let task = field(parts.next(), "task")?;
    let helpers = field(parts.next(), "helpers")?;
    let because = field(parts.next(), "because")?;
    if task.is_empty() {
        return Err("empty task skill".into());
    }
    let helpers = helpers.split(',').map(str::trim).filter(|h| !h.is_empty()).map(String::from).collect();
    Ok((task, helpers, because))
}

pub fn render_route(r: &RoutingResult) -> String {
    format!(
        "task={}; helpers={}; because={}",
        r.task_skill,
        r.helper_skills.join(","),
        r.justification.replace(['\n', ';'], " ")
    )
}

fn keyword_score(skill: &Skill, words: &[String]) -> usize {
    skill.keywords.iter().filter(|k| contains_phrase(words, k)).count()
}

/// Deterministic keyword router: among the task skills that apply to `kind`,
/// the one with the most keyword hits (ties go to the kind's default skill,
/// then to the smaller name), then up to two helpers sharing its scope with
/// at least one hit, by score then name.
pub fn keyword_fallback_router(description: &str, catalog: &SkillCatalog, kind: TaskKind) -> RoutingResult {
    let words = tokens(description);
    let default_task = &catalog.defaults(kind).task;
    let rank = |s: &Skill, score: usize| (score, s.name == *default_task, core::cmp::Reverse(s.name.clone()));
    let mut best: Option<(&Skill, usize)> = None;
    for s in catalog.enabled(SkillCategory::Task).filter(|s| s.applies_to(kind)) {
        let score = keyword_score(s, &words);
        let better = match best {
            None => score > 0,
            Some((b, bs)) => rank(s, score) > rank(b, bs),
        };
        if better {
            best = Some((s, score));
        }
    }
    let Some((task, task_score)) = best else {
        return RoutingResult::defaults(catalog, kind, Some("no keyword matched".into()));
    };
    let mut helpers: Vec<(&Skill, usize)> = catalog
        .enabled(SkillCategory::Helper)
        .filter(|h| h.scope.iter().any(|k| task.applies_to(*k)))
        .map(|h| (h, keyword_score(h, &words)))
        .filter(|(_, score)| *score >= 1)
        .collect();
    helpers.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.name.cmp(&b.0.name)));
    helpers.truncate(2);
    RoutingResult {
        task_skill: task.name.clone(),
        helper_skills: helpers.iter().map(|(h, _)| h.name.clone()).collect(),
        justification: format!("{} keyword hit(s) for {}", task_score, task.name),
        used_fallback: false,
        failure: None,
    }
}

/// The Route request sent to the router provider.
pub fn route_request(
    description: &str,
    kind: TaskKind,
    profile: &ToolProfile,
    mode: ReasoningMode,
    catalog: &SkillCatalog,
) -> ProviderRequest {
    let mut user = String::from("Pick one task skill and at most two helper skills for this task.\n");
    for category in [SkillCategory::Task, SkillCategory::Helper] {
        for s in catalog.enabled(category) {
            user.push_str(&format!("- {} [{}]: {}\n", s.name, category, s.routing_summary));
        }
    }
    let tools: Vec<&str> = profile.allowed.iter().map(String::as_str).collect();
    user.push_str(&format!("Tools: {}\nReasoning mode: {mode}\nTask: {description}\n", tools.join(", ")));
    user.push_str("Answer exactly: task=<name>; helpers=<a,b>; because=<text>");
    let mut req = ProviderRequest::new(CallKind::Route);
    req.user = user;
    req.allowed_tools = profile.allowed.iter().cloned().collect();
    req.context.insert("description".into(), Value::from(description));
    req.context.insert("task_kind".into(), Value::from(kind.as_str()));
    req
}

/// Gateway routing. Never fails: a malformed or invalid router answer, or a
/// provider error, yields the defaults for `kind` with `used_fallback` set.
pub fn route(
    description: &str,
    kind: TaskKind,
    profile: &ToolProfile,
    mode: ReasoningMode,
    catalog: &SkillCatalog,
    router: &mut dyn DecisionProvider,
    episode_id: &str,
) -> RoutingResult {
    let mut req = route_request(description, kind, profile, mode, catalog);
    req.episode_id = episode_id.to_string();
    let answer = match router.complete(&req) {
        Ok(text) => text,
        Err(e) => return RoutingResult::defaults(catalog, kind, Some(e.to_string())),
    };
    let parsed = parse_route(&answer).and_then(|(task_skill, helper_skills, because)| {
        let r =
            RoutingResult { task_skill, helper_skills, justification: because, used_fallback: false, failure: None };
        r.validate(catalog, kind)?;
        Ok(r)
    });
    match parsed {
        Ok(r) => r,
        Err(e) => RoutingResult::defaults(catalog, kind, Some(e)),
    }
}
