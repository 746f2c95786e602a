//! Tool layer: catalog, profiles, call validation and dispatch.

mod dispatch;
pub mod expr;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use dispatch::{DirectPort, EnvPort, PortError, ToolLayer, EXPOSURE_THRESHOLDS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolCategory {
    Perception,
    Control,
    Knowledge,
    Auxiliary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Number,
    Text,
    Record,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    pub required: bool,
    pub description: String,
}

fn param(name: &str, kind: ParamKind, unit: Option<&str>, required: bool, description: &str) -> ParamSpec {
    ParamSpec {
        name: name.to_string(),
        kind,
        unit: unit.map(String::from),
        required,
        description: description.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolDescriptor {
    pub name: String,
    pub category: ToolCategory,
    pub params: Vec<ParamSpec>,
    pub description: String,
    pub terminal: bool,
}

impl ToolDescriptor {
    /// Control or terminal tools end a reasoning step when chosen.
    pub fn commits(&self) -> bool {
        self.category == ToolCategory::Control
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolCatalog {
    tools: Vec<ToolDescriptor>,
}

impl ToolCatalog {
    pub fn new(tools: Vec<ToolDescriptor>) -> Result<Self, String> {
        let mut seen = BTreeSet::new();
        for t in &tools {
            if !seen.insert(t.name.as_str()) {
                return Err(format!("duplicate tool `{}`", t.name));
            }
            if t.terminal && t.category != ToolCategory::Control {
                return Err(format!("terminal tool `{}` must be a control tool", t.name));
            }
        }
        let terminals = tools.iter().filter(|t| t.terminal).count();
        if terminals != 1 {
            return Err(format!("catalog needs exactly one terminal tool, found {terminals}"));
        }
        Ok(ToolCatalog { tools })
    }

    pub fn tools(&self) -> &[ToolDescriptor] {
        &self.tools
    }

    pub fn get(&self, name: &str) -> Option<&ToolDescriptor> {
        self.tools.iter().find(|t| t.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tools.iter().map(|t| t.name.as_str())
    }

    pub fn terminal(&self) -> &ToolDescriptor {
        self.tools.iter().find(|t| t.terminal).expect("validated catalog")
    }
}

/// The shipped tool catalog.
pub fn builtin_catalog() -> ToolCatalog {
    use ParamKind::*;
    use ToolCategory::*;
    let t = |name: &str, category, params, description: &str, terminal| ToolDescriptor {
        name: name.to_string(),
        category,
        params,
        description: description.to_string(),
        terminal,
    };
    let tools = vec![
        t(
            "brightness_assess",
            Perception,
            vec![],
            "Measure mean frame brightness and classify exposure as underexposed, nominal or overexposed.",
            false,
        ),
        t(
            "segment_parts",
            Perception,
            vec![],
            "List the target's parts visible in the current frame with their bearings.",
            false,
        ),
        t(
            "crop_region",
            Perception,
            vec![
                param("az_min", Number, Some("deg"), true, "left edge of the window"),
                param("az_max", Number, Some("deg"), true, "right edge of the window"),
                param("el_min", Number, Some("deg"), true, "bottom edge of the window"),
                param("el_max", Number, Some("deg"), true, "top edge of the window"),
            ],
            "Restrict part listing to a bearing window of the current frame.",
            false,
        ),
        t(
            "zoom",
            Perception,
            vec![param("factor", Number, None, true, "magnification between 1 and 8")],
            "Magnify the current frame; reports the apparent target size at the requested factor.",
            false,
        ),
        t("lidar_range", Perception, vec![], "Read the latest LiDAR range to the target surface.", false),
        t(
            "set_position",
            Control,
            vec![
                param("dx", Number, Some("m"), true, "forward translation in the body frame"),
                param("dy", Number, Some("m"), true, "rightward translation in the body frame"),
                param("dz", Number, Some("m"), true, "downward translation in the body frame"),
            ],
            "Translate the chaser in its body frame. At most 2 m per call.",
            false,
        ),
        t(
            "set_attitude",
            Control,
            vec![
                param("dyaw", Number, Some("deg"), true, "heading change, positive to the right"),
                param("dpitch", Number, Some("deg"), true, "pitch change, positive nose up"),
                param("droll", Number, Some("deg"), true, "roll change"),
            ],
            "Rotate the chaser in its body frame. At most 90 deg per axis per call.",
            false,
        ),
        t(
            "set_exposure",
            Control,
            vec![param("gain_delta", Number, None, true, "change of camera exposure gain")],
            "Adjust the camera exposure gain; the resulting gain must stay within [0.05, 8.0].",
            false,
        ),
        t(
            "terminate",
            Control,
            vec![
                param("reason", Text, None, false, "why the task is complete"),
                param(
                    "report",
                    Record,
                    None,
                    false,
                    "inspection report with structure, power, communication, payload and surface fields",
                ),
            ],
            "End the episode.",
            true,
        ),
        t(
            "kb_lookup",
            Knowledge,
            vec![param("satellite_id", Text, None, false, "satellite to describe; defaults to the current target")],
            "Describe a satellite's parts and their attributes from the knowledge base.",
            false,
        ),
        t(
            "eval_expr",
            Auxiliary,
            vec![param("expr", Text, None, true, "arithmetic expression")],
            "Evaluate an arithmetic expression with + - * / and parentheses.",
            false,
        ),
    ];
    ToolCatalog::new(tools).expect("builtin catalog is valid")
}

/// A named allow-list of tool names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolProfile {
    pub name: String,
    pub allowed: BTreeSet<String>,
}

impl ToolProfile {
    pub fn new<I, S>(name: &str, allowed: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ToolProfile { name: name.to_string(), allowed: allowed.into_iter().map(Into::into).collect() }
    }
}

const VISION_ONLY: &[&str] = &[
    "brightness_assess",
    "segment_parts",
    "crop_region",
    "zoom",
    "set_position",
    "set_attitude",
    "set_exposure",
    "terminate",
    "kb_lookup",
];

/// The three ablation profiles: camera only, camera plus LiDAR, and camera
/// plus LiDAR plus code execution.
pub fn builtin_profiles() -> Vec<ToolProfile> {
    let vision = ToolProfile::new("vision-only", VISION_ONLY.iter().copied());
    let mut nav = ToolProfile::new("hybrid-nav", VISION_ONLY.iter().copied());
    nav.allowed.insert("lidar_range".into());
    let mut code = nav.clone();
    code.name = "hybrid-nav-code".into();
    code.allowed.insert("eval_expr".into());
    vec![vision, nav, code]
}

/// Tools present in both the catalog and the profile, in catalog order.
pub fn visible_tools(catalog: &ToolCatalog, profile: &ToolProfile) -> Vec<ToolDescriptor> {
    catalog.tools.iter().filter(|t| profile.allowed.contains(&t.name)).cloned().collect()
}

/// An action: a named tool with arguments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: String,
    pub args: BTreeMap<String, Value>,
    pub step_index: u32,
    pub inner_round: u32,
}

impl ToolCall {
    pub fn new(tool: &str, args: Value) -> Self {
        let args = match args {
            Value::Object(map) => map.into_iter().collect(),
            _ => BTreeMap::new(),
        };
        ToolCall { tool: tool.to_string(), args, step_index: 0, inner_round: 0 }
    }

    pub fn at(mut self, step_index: u32, inner_round: u32) -> Self {
        self.step_index = step_index;
        self.inner_round = inner_round;
        self
    }

    pub fn number(&self, name: &str) -> Option<f64> {
        self.args.get(name).and_then(Value::as_f64)
    }

    pub fn text(&self, name: &str) -> Option<&str> {
        self.args.get(name).and_then(Value::as_str)
    }

    pub fn args_json(&self) -> String {
        serde_json::to_string(&self.args).expect("json values serialize")
    }
}

impl fmt::Display for ToolCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.tool, self.args_json())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolResult {
    pub ok: bool,
    pub payload: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<String>,
}

impl ToolResult {
    pub fn ok(payload: Value) -> Self {
        ToolResult { ok: true, payload, error_kind: None }
    }

    pub fn error(err: &ToolError) -> Self {
        ToolResult { ok: false, payload: json!({ "error": err.to_string() }), error_kind: Some(err.kind().to_string()) }
    }

    /// Short text used in memory records.
    pub fn digest(&self) -> String {
        let body = serde_json::to_string(&self.payload).unwrap_or_default();
        let body = crate::text::truncate(&body, 160);
        match &self.error_kind {
            None => format!("ok {body}"),
            Some(kind) => format!("error {kind}: {body}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ToolError {
    #[error("invalid arguments for `{tool}`: {detail}")]
    InvalidArgs { tool: String, detail: String },
    #[error("tool `{0}` is not visible under the active profile")]
    ToolNotVisible(String),
    #[error("no observation arrived before the timeout")]
    EnvTimeout,
    #[error("expression error: {0}")]
    ExpressionError(String),
    #[error("environment rejected the command: {detail}")]
    Env { kind: String, detail: String },
}

impl ToolError {
    pub fn kind(&self) -> &str {
        match self {
            ToolError::InvalidArgs { .. } => "InvalidArgs",
            ToolError::ToolNotVisible(_) => "ToolNotVisible",
            ToolError::EnvTimeout => "EnvTimeout",
            ToolError::ExpressionError(_) => "ExpressionError",
            ToolError::Env { kind, .. } => kind,
        }
    }
}

/// Check `args` against a descriptor's parameter schema: required
/// parameters present, no unknown names, kinds match, numbers finite.
pub fn validate_args(desc: &ToolDescriptor, args: &BTreeMap<String, Value>) -> Result<(), ToolError> {
    let invalid = |detail: String| ToolError::InvalidArgs { tool: desc.name.clone(), detail };
    for name in args.keys() {
        if !desc.params.iter().any(|p| &p.name == name) {
            return Err(invalid(format!("unknown parameter `{name}`")));
        }
    }
    for p in &desc.params {
        match args.get(&p.name) {
            None | Some(Value::Null) if p.required => return Err(invalid(format!("missing `{}`", p.name))),
            None | Some(Value::Null) => {}
            Some(v) => {
                let ok = match p.kind {
                    ParamKind::Number => v.as_f64().is_some_and(f64::is_finite),
                    ParamKind::Text => v.is_string(),
                    ParamKind::Record => v.is_object(),
                };
                if !ok {
                    return Err(invalid(format!("`{}` must be a {:?}", p.name, p.kind)));
                }
            }
        }
    }
    Ok(())
}

/// MCP-shaped description of a tool list (`tools/list` result shape).
pub fn mcp_schema(tools: &[ToolDescriptor]) -> Value {
    let entries: Vec<Value> = tools
        .iter()
        .map(|t| {
            let mut properties = serde_json::Map::new();
            let mut required = Vec::new();
            for p in &t.params {
                let ty = match p.kind {
                    ParamKind::Number => "number",
                    ParamKind::Text => "string",
                    ParamKind::Record => "object",
                };
                let mut prop = json!({ "type": ty, "description": p.description });
                if let Some(unit) = &p.unit {
                    prop["x-unit"] = json!(unit);
                }
                properties.insert(p.name.clone(), prop);
                if p.required {
                    required.push(json!(p.name));
                }
            }
            json!({
                "name": t.name,
                "description": t.description,
                "x-category": t.category,
                "x-terminal": t.terminal,
                "inputSchema": {
                    "type": "object",
                    "properties": properties,
                    "required": required,
                    "additionalProperties": false,
                },
            })
        })
        .collect();
    json!({ "tools": entries })
}
