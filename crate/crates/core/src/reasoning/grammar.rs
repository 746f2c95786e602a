//! Line-oriented output grammars.
//!
//! ```text
//! THOUGHT <free text>                       (any number, optional)
//! TOOL <name> ARGS <json object>
//! CANDIDATE <i>: TOOL <name> ARGS <json> | OUTCOME <text> | RISK <low|medium|high>
//! SELECT <i>
//! ```
//!
//! Anything that does not match is malformed; nothing is coerced.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::tools::ToolCall;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Risk {
    Low,
    Medium,
    High,
}

impl fmt::Display for Risk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Risk::Low => "low",
            Risk::Medium => "medium",
            Risk::High => "high",
        })
    }
}

impl FromStr for Risk {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" => Ok(Risk::Low),
            "medium" => Ok(Risk::Medium),
            "high" => Ok(Risk::High),
            other => Err(format!("unknown risk `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub action: ToolCall,
    pub predicted_outcome: String,
    pub risk: Risk,
}

/// A parsed DecideAction answer.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub call: ToolCall,
    pub thought: String,
}

fn content_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty())
}

/// `<name> ARGS <json object>`
fn parse_tool_tail(rest: &str) -> Result<ToolCall, String> {
    let rest = rest.trim();
    let (name, args) = match rest.split_once(char::is_whitespace) {
        Some((name, tail)) => {
            let tail = tail.trim_start();
            let json = tail.strip_prefix("ARGS").ok_or_else(|| format!("expected ARGS after `{name}`"))?;
            (name, json.trim())
        }
        None => return Err(format!("missing ARGS for `{rest}`")),
    };
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(format!("bad tool name `{name}`"));
    }
    let value: Value = serde_json::from_str(args).map_err(|e| format!("ARGS is not JSON: {e}"))?;
    if !value.is_object() {
        return Err("ARGS must be a JSON object".into());
    }
    Ok(ToolCall::new(name, value))
}

pub fn parse_decision(text: &str) -> Result<Decision, String> {
    let mut thought = Vec::new();
    let mut call = None;
    for line in content_lines(text) {
        if let Some(t) = line.strip_prefix("THOUGHT") {
            if call.is_some() {
                return Err("THOUGHT after TOOL".into());
            }
            thought.push(t.trim().to_string());
        } else if let Some(rest) = line.strip_prefix("TOOL ") {
            if call.is_some() {
                return Err("more than one TOOL line".into());
            }
            call = Some(parse_tool_tail(rest)?);
        } else {
            return Err(format!("unexpected line `{}`", crate::text::truncate(line, 60)));
        }
    }
    let call = call.ok_or_else(|| String::from("no TOOL line"))?;
    Ok(Decision { call, thought: thought.join(" ") })
}

pub fn render_decision(call: &ToolCall, thought: &str) -> String {
    let mut out = String::new();
    if !thought.is_empty() {
        out.push_str(&format!("THOUGHT {thought}\n"));
    }
    out.push_str(&format!("TOOL {} ARGS {}", call.tool, call.args_json()));
    out
}

/// One to three candidates numbered 1..n in order.
pub fn parse_plan(text: &str) -> Result<Vec<Candidate>, String> {
    let mut out = Vec::new();
    for line in content_lines(text) {
        if line.starts_with("THOUGHT") {
            continue;
        }
        let rest = line
            .strip_prefix("CANDIDATE ")
            .ok_or_else(|| format!("unexpected line `{}`", crate::text::truncate(line, 60)))?;
        let (idx, rest) = rest.split_once(':').ok_or("CANDIDATE without `:`")?;
        let idx: usize = idx.trim().parse().map_err(|_| format!("bad candidate index `{idx}`"))?;
        if idx != out.len() + 1 {
            return Err(format!("candidate {idx} out of order"));
        }
        let parts: Vec<&str> = rest.split(" | ").collect();
        if parts.len() != 3 {
            return Err(format!("candidate {idx} needs TOOL | OUTCOME | RISK"));
        }
        let action = parse_tool_tail(parts[0].trim().strip_prefix("TOOL ").ok_or("candidate must start with TOOL")?)?;
        let outcome = parts[1].trim().strip_prefix("OUTCOME").ok_or("missing OUTCOME")?.trim();
        let risk = parts[2].trim().strip_prefix("RISK").ok_or("missing RISK")?.parse()?;
        out.push(Candidate { action, predicted_outcome: outcome.to_string(), risk });
    }
    if out.is_empty() || out.len() > 3 {
        return Err(format!("expected 1 to 3 candidates, got {}", out.len()));
    }
    Ok(out)
}

pub fn render_plan(candidates: &[Candidate]) -> String {
    let lines: Vec<String> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            format!(
                "CANDIDATE {}: TOOL {} ARGS {} | OUTCOME {} | RISK {}",
                i + 1,
                c.action.tool,
                c.action.args_json(),
                c.predicted_outcome.replace(" | ", " / "),
                c.risk
            )
        })
        .collect();
    lines.join("\n")
}

/// Zero-based index from a `SELECT i` answer over `n` candidates.
pub fn parse_select(text: &str, n: usize) -> Result<usize, String> {
    let mut found = None;
    for line in content_lines(text) {
        if line.starts_with("THOUGHT") {
            continue;
        }
        let idx = line
            .strip_prefix("SELECT ")
            .ok_or_else(|| format!("unexpected line `{}`", crate::text::truncate(line, 60)))?;
        if found.is_some() {
            return Err("more than one SELECT line".into());
        }
        let idx: usize = idx.trim().parse().map_err(|_| format!("bad index `{}`", idx.trim()))?;
        if idx == 0 || idx > n {
            return Err(format!("index {idx} outside 1..={n}"));
        }
        found = Some(idx - 1);
    }
    found.ok_or_else(|| "no SELECT line".into())
}
