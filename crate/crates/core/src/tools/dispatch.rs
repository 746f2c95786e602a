use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde_json::{json, Value};

use super::{
    validate_args, visible_tools, ToolCall, ToolCatalog, ToolCategory, ToolDescriptor, ToolError, ToolProfile,
    ToolResult,
};
use crate::bus::{ControlCommand, ExposureCommand, TerminateCommand};
use crate::env::{EnvError, Observation, PoseDelta, SatelliteModel, Simulator, TaskSpec};

/// Mean brightness below the first value is underexposed, above the second
/// overexposed.
pub const EXPOSURE_THRESHOLDS: (f64, f64) = (40.0, 220.0);

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum PortError {
    #[error("timed out waiting for an observation")]
    Timeout,
    #[error("{kind}: {detail}")]
    Env { kind: String, detail: String },
    #[error("backend failure: {0}")]
    Backend(String),
}

impl From<EnvError> for PortError {
    fn from(e: EnvError) -> Self {
        PortError::Env { kind: e.kind().to_string(), detail: e.to_string() }
    }
}

/// The agent's only handle on the environment.
pub trait EnvPort {
    /// Reset the environment for `task` and return the first observation.
    fn reset(&mut self, task: &TaskSpec, seed: u64) -> Result<Observation, PortError>;
    /// Send a command and wait for the observation it produced.
    fn command(&mut self, cmd: &ControlCommand) -> Result<Observation, PortError>;
    /// Latest observation.
    fn latest(&mut self) -> Result<Observation, PortError>;
}

/// Port that drives a simulator in-process without a bus.
pub struct DirectPort {
    pub sim: Simulator,
    pub seeded: bool,
}

impl DirectPort {
    pub fn new(sim: Simulator) -> Self {
        DirectPort { sim, seeded: true }
    }
}

impl EnvPort for DirectPort {
    fn reset(&mut self, task: &TaskSpec, seed: u64) -> Result<Observation, PortError> {
        let obs = if self.seeded { self.sim.reset_seeded(task, seed) } else { self.sim.reset(task) };
        Ok(obs?)
    }

    fn command(&mut self, cmd: &ControlCommand) -> Result<Observation, PortError> {
        let r = match cmd {
            ControlCommand::Pose(d) => self.sim.step(*d),
            ControlCommand::Exposure(e) => self.sim.set_exposure(e.gain_delta),
            ControlCommand::Terminate(_) => self.sim.observe(),
        };
        Ok(r?)
    }

    fn latest(&mut self) -> Result<Observation, PortError> {
        Ok(self.sim.observe()?)
    }
}

/// Profile-filtered dispatcher for one episode.
#[derive(Clone, Debug)]
pub struct ToolLayer {
    visible: Vec<ToolDescriptor>,
    knowledge: Vec<SatelliteModel>,
    target: String,
}

impl ToolLayer {
    pub fn new(catalog: &ToolCatalog, profile: &ToolProfile, knowledge: Vec<SatelliteModel>, target: &str) -> Self {
        ToolLayer { visible: visible_tools(catalog, profile), knowledge, target: target.to_string() }
    }

    pub fn visible(&self) -> &[ToolDescriptor] {
        &self.visible
    }

    pub fn descriptor(&self, name: &str) -> Option<&ToolDescriptor> {
        self.visible.iter().find(|t| t.name == name)
    }

    /// Whether LiDAR range sensing is part of the active profile.
    pub fn has_lidar(&self) -> bool {
        self.descriptor("lidar_range").is_some()
    }

    /// The observation as the agent is allowed to see it.
    pub fn agent_view(&self, obs: &Observation) -> Observation {
        obs.agent_view(self.has_lidar())
    }

    /// Visibility and schema check.
    pub fn check(&self, call: &ToolCall) -> Result<&ToolDescriptor, ToolError> {
        let desc = self.descriptor(&call.tool).ok_or_else(|| ToolError::ToolNotVisible(call.tool.clone()))?;
        validate_args(desc, &call.args)?;
        Ok(desc)
    }

    /// Execute one call. Control tools go through the port; everything else
    /// is computed from the latest observation or the knowledge base and
    /// leaves the environment untouched.
    pub fn dispatch(&self, call: &ToolCall, port: &mut dyn EnvPort) -> ToolResult {
        match self.try_dispatch(call, port) {
            Ok(payload) => ToolResult::ok(payload),
            Err(e) => ToolResult::error(&e),
        }
    }

    fn try_dispatch(&self, call: &ToolCall, port: &mut dyn EnvPort) -> Result<Value, ToolError> {
        let desc = self.check(call)?;
        match desc.category {
            ToolCategory::Control => {
                let cmd = control_command(call)?;
                let obs = port.command(&cmd).map_err(port_error)?;
                if matches!(cmd, ControlCommand::Terminate(_)) {
                    return Ok(json!({ "terminated": true }));
                }
                Ok(serde_json::to_value(self.agent_view(&obs)).expect("observation serializes"))
            }
            ToolCategory::Perception => {
                let obs = port.latest().map_err(port_error)?;
                perceive(call, &obs)
            }
            ToolCategory::Knowledge => self.lookup(call),
            ToolCategory::Auxiliary => {
                let expr = call.text("expr").unwrap_or_default();
                let value = super::expr::eval(expr).map_err(ToolError::ExpressionError)?;
                Ok(json!({ "value": value }))
            }
        }
    }

    fn lookup(&self, call: &ToolCall) -> Result<Value, ToolError> {
        let id = call.text("satellite_id").unwrap_or(&self.target);
        let sat = self.knowledge.iter().find(|s| s.id == id).ok_or_else(|| ToolError::InvalidArgs {
            tool: call.tool.clone(),
            detail: alloc::format!("no knowledge about `{id}`"),
        })?;
        let parts: Vec<Value> = sat
            .parts
            .iter()
            .map(|p| json!({ "name": p.name, "dimension": p.dimension, "attributes": p.attributes }))
            .collect();
        Ok(json!({ "satellite_id": sat.id, "bounding_radius_m": sat.bounding_radius, "parts": parts }))
    }
}

fn port_error(e: PortError) -> ToolError {
    match e {
        PortError::Timeout => ToolError::EnvTimeout,
        PortError::Env { kind, detail } => ToolError::Env { kind, detail },
        PortError::Backend(detail) => ToolError::Env { kind: "BackendUnavailable".into(), detail },
    }
}

fn control_command(call: &ToolCall) -> Result<ControlCommand, ToolError> {
    let n = |name: &str| call.number(name).unwrap_or(0.0);
    Ok(match call.tool.as_str() {
        "set_position" => ControlCommand::Pose(PoseDelta::translation(n("dx"), n("dy"), n("dz"))),
        "set_attitude" => ControlCommand::Pose(PoseDelta::rotation(n("dyaw"), n("dpitch"), n("droll"))),
        "set_exposure" => ControlCommand::Exposure(ExposureCommand { gain_delta: n("gain_delta") }),
        "terminate" => ControlCommand::Terminate(TerminateCommand { reason: call.text("reason").map(String::from) }),
        other => {
            return Err(ToolError::InvalidArgs {
                tool: other.to_string(),
                detail: "no command mapping for tool".into(),
            })
        }
    })
}

fn exposure_verdict(brightness: f64) -> &'static str {
    if brightness < EXPOSURE_THRESHOLDS.0 {
        "underexposed"
    } else if brightness > EXPOSURE_THRESHOLDS.1 {
        "overexposed"
    } else {
        "nominal"
    }
}

fn parts_json<'a>(parts: impl Iterator<Item = &'a crate::env::PartSighting>) -> Vec<Value> {
    parts.map(|p| json!({ "name": p.name, "bearing_az": p.bearing_az, "bearing_el": p.bearing_el })).collect()
}

fn perceive(call: &ToolCall, obs: &Observation) -> Result<Value, ToolError> {
    let invalid = |detail: &str| ToolError::InvalidArgs { tool: call.tool.clone(), detail: detail.to_string() };
    match call.tool.as_str() {
        "brightness_assess" => Ok(json!({
            "mean_brightness": obs.mean_brightness,
            "exposure_gain": obs.exposure_gain,
            "verdict": exposure_verdict(obs.mean_brightness),
        })),
        "segment_parts" => Ok(json!({ "visible": obs.visible, "parts": parts_json(obs.parts_in_view.iter()) })),
        "crop_region" => {
            let n = |k: &str| call.number(k).unwrap_or(0.0);
            let (az0, az1, el0, el1) = (n("az_min"), n("az_max"), n("el_min"), n("el_max"));
            if az0 > az1 || el0 > el1 {
                return Err(invalid("window minimum exceeds maximum"));
            }
            let inside = obs
                .parts_in_view
                .iter()
                .filter(|p| p.bearing_az >= az0 && p.bearing_az <= az1 && p.bearing_el >= el0 && p.bearing_el <= el1);
            Ok(json!({ "window": [az0, az1, el0, el1], "parts": parts_json(inside) }))
        }
        "zoom" => {
            let factor = call.number("factor").unwrap_or(1.0);
            if !(1.0..=8.0).contains(&factor) {
                return Err(invalid("factor must be within [1, 8]"));
            }
            Ok(json!({
                "factor": factor,
                "visible": obs.visible,
                "angular_size": obs.angular_size * factor,
                "parts": parts_json(obs.parts_in_view.iter()),
            }))
        }
        "lidar_range" => Ok(json!({ "range_m": obs.lidar_range })),
        _ => Err(invalid("unknown perception tool")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ConditionId, SimConfig, TaskKind};
    use crate::tools::{builtin_catalog, builtin_profiles};

    fn layer(profile: &str) -> (ToolLayer, DirectPort, TaskSpec) {
        let profile = builtin_profiles().into_iter().find(|p| p.name == profile).unwrap();
        let sim = Simulator::with_builtin(SimConfig::default());
        let layer = ToolLayer::new(&builtin_catalog(), &profile, sim.satellites().to_vec(), "CAPSTONE");
        let task = TaskSpec::new(TaskKind::Rendezvous, "CAPSTONE", ConditionId::C1);
        let mut port = DirectPort::new(sim);
        port.seeded = false;
        port.reset(&task, 0).unwrap();
        (layer, port, task)
    }

    #[test]
    fn set_position_moves_chaser() {
        let (layer, mut port, _) = layer("hybrid-nav");
        let r = layer.dispatch(&ToolCall::new("set_position", json!({"dx": 1.5, "dy": 0, "dz": 0})), &mut port);
        assert!(r.ok, "{r:?}");
        assert!((r.payload["lidar_range"].as_f64().unwrap() - 13.5).abs() < 1e-9);
    }

    #[test]
    fn brightness_assess_on_dark_start() {
        let (layer, mut port, mut task) = layer("hybrid-nav");
        task.condition = crate::env::InitialCondition::from_id(ConditionId::C2);
        port.reset(&task, 0).unwrap();
        let r = layer.dispatch(&ToolCall::new("brightness_assess", json!({})), &mut port);
        assert!((r.payload["mean_brightness"].as_f64().unwrap() - 14.0).abs() < 1e-9);
        assert_eq!(r.payload["verdict"], "underexposed");
    }

    #[test]
    fn lidar_not_visible_under_vision_only() {
        let (layer, mut port, _) = layer("vision-only");
        let r = layer.dispatch(&ToolCall::new("lidar_range", json!({})), &mut port);
        assert!(!r.ok);
        assert_eq!(r.error_kind.as_deref(), Some("ToolNotVisible"));
        let r = layer.dispatch(&ToolCall::new("set_position", json!({"dx": 1.0, "dy": 0, "dz": 0})), &mut port);
        assert_eq!(r.payload["lidar_range"], Value::Null, "agent view hides LiDAR");
    }

    #[test]
    fn non_control_tools_leave_env_untouched() {
        let (layer, mut port, _) = layer("hybrid-nav-code");
        let before = (port.sim.pose(), port.sim.observe().unwrap());
        for call in [
            ToolCall::new("brightness_assess", json!({})),
            ToolCall::new("segment_parts", json!({})),
            ToolCall::new("crop_region", json!({"az_min": -5, "az_max": 5, "el_min": -5, "el_max": 5})),
            ToolCall::new("zoom", json!({"factor": 2})),
            ToolCall::new("lidar_range", json!({})),
            ToolCall::new("kb_lookup", json!({})),
            ToolCall::new("eval_expr", json!({"expr": "0.2 * 9.5"})),
        ] {
            let r = layer.dispatch(&call, &mut port);
            assert!(r.ok, "{} -> {r:?}", call.tool);
        }
        assert_eq!((port.sim.pose(), port.sim.observe().unwrap()), before);
    }

    #[test]
    fn perception_payloads() {
        let (layer, mut port, _) = layer("hybrid-nav-code");
        let parts = layer.dispatch(&ToolCall::new("segment_parts", json!({})), &mut port);
        assert_eq!(parts.payload["parts"].as_array().unwrap().len(), 5);
        let crop = layer.dispatch(
            &ToolCall::new("crop_region", json!({"az_min": 0.0, "az_max": 30, "el_min": -30, "el_max": 30})),
            &mut port,
        );
        for p in crop.payload["parts"].as_array().unwrap() {
            assert!(p["bearing_az"].as_f64().unwrap() >= 0.0);
        }
        let zoom = layer.dispatch(&ToolCall::new("zoom", json!({"factor": 4})), &mut port);
        let size = port.sim.observe().unwrap().angular_size;
        assert!((zoom.payload["angular_size"].as_f64().unwrap() - 4.0 * size).abs() < 1e-12);
        let bad = layer.dispatch(&ToolCall::new("zoom", json!({"factor": 20})), &mut port);
        assert_eq!(bad.error_kind.as_deref(), Some("InvalidArgs"));
        let expr = layer.dispatch(&ToolCall::new("eval_expr", json!({"expr": "1/0"})), &mut port);
        assert_eq!(expr.error_kind.as_deref(), Some("ExpressionError"));
        let kb = layer.dispatch(&ToolCall::new("kb_lookup", json!({"satellite_id": "Huygens"})), &mut port);
        assert_eq!(kb.payload["satellite_id"], "Huygens");
    }

    #[test]
    fn env_rejections_surface_as_error_kinds() {
        let (layer, mut port, _) = layer("hybrid-nav");
        let r = layer.dispatch(&ToolCall::new("set_attitude", json!({"dyaw": 95, "dpitch": 0, "droll": 0})), &mut port);
        assert_eq!(r.error_kind.as_deref(), Some("StepLimitExceeded"));
        let r = layer.dispatch(&ToolCall::new("set_exposure", json!({"gain_delta": 10})), &mut port);
        assert_eq!(r.error_kind.as_deref(), Some("GainOutOfRange"));
    }
}
