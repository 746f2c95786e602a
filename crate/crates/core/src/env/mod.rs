//! Kinematic proximity-operations simulator.
//!
//! A single chaser with a 6-DoF pose approaches one satellite target. The
//! simulator produces structured observations (visibility, bearing,
//! brightness, LiDAR range) instead of rendered frames, applies body-frame
//! pose increments, tracks the camera exposure gain, and flags collisions.

mod catalog;
mod eval;
pub mod geometry;
mod sim;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

pub use catalog::builtin_satellites;
pub use eval::{evaluate, match_dimension, score_report, Outcome, INSPECTION_PASS_SCORE, SUCCESS_BAND_M};
pub use geometry::{Pose, Vec3};
pub use sim::{EnvError, PoseDelta, SimConfig, Simulator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Rendezvous,
    #[serde(rename = "search")]
    SearchAndApproach,
    Inspection,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::Rendezvous, TaskKind::SearchAndApproach, TaskKind::Inspection];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Rendezvous => "rendezvous",
            TaskKind::SearchAndApproach => "search",
            TaskKind::Inspection => "inspection",
        }
    }

    pub fn is_navigation(self) -> bool {
        !matches!(self, TaskKind::Inspection)
    }

    pub fn default_max_steps(self) -> u32 {
        match self {
            TaskKind::Inspection => 15,
            _ => 50,
        }
    }

    pub fn default_start_range(self) -> f64 {
        match self {
            TaskKind::Inspection => 6.0,
            _ => 15.0,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rendezvous" | "rndz" => Ok(TaskKind::Rendezvous),
            "search" | "search-and-approach" | "search_and_approach" => Ok(TaskKind::SearchAndApproach),
            "inspection" | "inspect" | "insp" => Ok(TaskKind::Inspection),
            other => Err(format!("unknown task kind `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConditionId {
    C1,
    C2,
    C3,
}

impl FromStr for ConditionId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "C1" => Ok(ConditionId::C1),
            "C2" => Ok(ConditionId::C2),
            "C3" => Ok(ConditionId::C3),
            other => Err(format!("unknown initial condition `{other}`")),
        }
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConditionId::C1 => "C1",
            ConditionId::C2 => "C2",
            ConditionId::C3 => "C3",
        };
        f.write_str(s)
    }
}

/// Degraded starting conditions. Offsets are world-frame and quoted for the
/// nominal 15 m start; they scale with the task's start range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub id: ConditionId,
    pub position_offset: Vec3,
    pub initial_exposure_gain: f64,
}

impl InitialCondition {
    pub const NOMINAL_RANGE_M: f64 = 15.0;

    pub fn from_id(id: ConditionId) -> Self {
        match id {
            ConditionId::C1 => InitialCondition { id, position_offset: Vec3::ZERO, initial_exposure_gain: 1.0 },
            ConditionId::C2 => {
                InitialCondition { id, position_offset: Vec3::new(0.0, 8.0, 0.0), initial_exposure_gain: 0.1 }
            }
            ConditionId::C3 => {
                InitialCondition { id, position_offset: Vec3::new(-12.0, 0.0, 0.0), initial_exposure_gain: 4.0 }
            }
        }
    }
}

/// Five descriptive dimensions of an inspection report.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InspectionReport {
    pub structure: String,
    pub power: String,
    pub communication: String,
    pub payload: String,
    pub surface: String,
}

impl InspectionReport {
    pub const DIMENSIONS: [&'static str; 5] = ["structure", "power", "communication", "payload", "surface"];

    pub fn get(&self, dimension: &str) -> Option<&str> {
        match dimension {
            "structure" => Some(&self.structure),
            "power" => Some(&self.power),
            "communication" => Some(&self.communication),
            "payload" => Some(&self.payload),
            "surface" => Some(&self.surface),
            _ => None,
        }
    }

    pub fn get_mut(&mut self, dimension: &str) -> Option<&mut String> {
        match dimension {
            "structure" => Some(&mut self.structure),
            "power" => Some(&mut self.power),
            "communication" => Some(&mut self.communication),
            "payload" => Some(&mut self.payload),
            "surface" => Some(&mut self.surface),
            _ => None,
        }
    }
}

/// A named component of a satellite. `offset` is relative to the satellite
/// center; `dimension` names the report dimension the part informs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatellitePart {
    pub name: String,
    pub dimension: String,
    pub attributes: String,
    #[serde(default)]
    pub offset: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatelliteModel {
    pub id: String,
    pub position: Vec3,
    pub bounding_radius: f64,
    #[serde(default = "default_luminance")]
    pub base_luminance: f64,
    pub parts: Vec<SatellitePart>,
    pub ground_truth_report: InspectionReport,
}

fn default_luminance() -> f64 {
    140.0
}

impl SatelliteModel {
    pub fn validate(&self) -> Result<(), String> {
        if self.bounding_radius.is_nan() || self.bounding_radius <= 0.0 {
            return Err(format!("satellite {}: bounding_radius must be > 0", self.id));
        }
        if self.base_luminance.is_nan() || self.base_luminance < 0.0 {
            return Err(format!("satellite {}: base_luminance must be >= 0", self.id));
        }
        for part in &self.parts {
            if self.ground_truth_report.get(&part.dimension).is_none() {
                return Err(format!(
                    "satellite {}: part {} names unknown dimension `{}`",
                    self.id, part.name, part.dimension
                ));
            }
        }
        Ok(())
    }
}

/// Bearing of one satellite part inside the current camera view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartSighting {
    pub name: String,
    pub bearing_az: f64,
    pub bearing_el: f64,
}

/// Structured sensor snapshot. `parts_in_view` is the perception-oracle
/// content behind the camera frame; agents read it only through perception
/// tools.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observation {
    pub visible: bool,
    pub bearing_az: f64,
    pub bearing_el: f64,
    pub angular_size: f64,
    pub mean_brightness: f64,
    pub lidar_range: Option<f64>,
    pub exposure_gain: f64,
    pub step_index: u32,
    #[serde(default)]
    pub collision: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts_in_view: Vec<PartSighting>,
}

impl Observation {
    /// Copy with the part-level content removed and, unless `with_lidar`,
    /// the LiDAR reading masked.
    pub fn agent_view(&self, with_lidar: bool) -> Observation {
        Observation {
            lidar_range: if with_lidar { self.lidar_range } else { None },
            parts_in_view: Vec::new(),
            ..self.clone()
        }
    }

    /// One-line description used in memory records and prompts.
    pub fn describe(&self) -> String {
        let range = match self.lidar_range {
            Some(r) => format!("{r:.3}m"),
            None => "n/a".to_string(),
        };
        if self.visible {
            format!(
                "visible az={:.2} el={:.2} size={:.2}deg brightness={:.1} range={} gain={:.2}",
                self.bearing_az, self.bearing_el, self.angular_size, self.mean_brightness, range, self.exposure_gain
            )
        } else {
            format!("not visible brightness={:.1} range={} gain={:.2}", self.mean_brightness, range, self.exposure_gain)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub description: String,
    pub satellite_id: String,
    pub condition: InitialCondition,
    pub max_steps: u32,
    /// LiDAR range to the target surface at reset, before condition offsets.
    pub start_range_m: f64,
}

impl TaskSpec {
    pub fn new(kind: TaskKind, satellite_id: &str, condition: ConditionId) -> Self {
        TaskSpec {
            kind,
            description: default_description(kind, satellite_id),
            satellite_id: satellite_id.to_string(),
            condition: InitialCondition::from_id(condition),
            max_steps: kind.default_max_steps(),
            start_range_m: kind.default_start_range(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_steps < 1 {
            return Err("max_steps must be >= 1".into());
        }
        if self.start_range_m.is_nan() || self.start_range_m <= 0.0 {
            return Err("start_range_m must be > 0".into());
        }
        Ok(())
    }
}

pub fn default_description(kind: TaskKind, satellite: &str) -> String {
    match kind {
        TaskKind::Rendezvous => format!("Rendezvous with {satellite} and hold about 2 m from it"),
        TaskKind::SearchAndApproach => {
            format!("Search for {satellite}, which starts out of view, then approach to about 2 m")
        }
        TaskKind::Inspection => format!(
            "Inspect {satellite} at close range and report its structure, power, communication, payload and surface condition"
        ),
    }
}
