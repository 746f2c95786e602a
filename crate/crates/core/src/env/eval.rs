use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

use super::{InspectionReport, SatelliteModel, TaskSpec};
use crate::runner::{EndReason, Trajectory};
use crate::text::content_words;

/// Terminal LiDAR range accepted as a successful approach, meters.
pub const SUCCESS_BAND_M: (f64, f64) = (1.0, 3.0);

/// Inspection score counted as a pass in campaign reports.
pub const INSPECTION_PASS_SCORE: f64 = 60.0;

/// Episode outcome. Navigation outcomes carry `success` and
/// `terminal_distance`; inspection outcomes carry `score`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub success: Option<bool>,
    pub terminal_distance: Option<f64>,
    pub steps: u32,
    pub score: Option<f64>,
    pub reason: String,
}

impl Outcome {
    /// Navigation success, or an inspection score of at least
    /// [`INSPECTION_PASS_SCORE`].
    pub fn passed(&self) -> bool {
        match (self.success, self.score) {
            (Some(ok), _) => ok,
            (None, Some(score)) => score >= INSPECTION_PASS_SCORE,
            (None, None) => false,
        }
    }
}

/// Score one report dimension by content-word overlap with the ground
/// truth: 1 at >= 60 % coverage, 0.5 at >= 30 %, else 0.
pub fn match_dimension(truth: &str, submitted: &str) -> f64 {
    let truth_words = content_words(truth);
    if truth_words.is_empty() {
        return 1.0;
    }
    let submitted_words = content_words(submitted);
    let hit = truth_words.intersection(&submitted_words).count();
    let coverage = hit as f64 / truth_words.len() as f64;
    if coverage >= 0.6 {
        1.0
    } else if coverage >= 0.3 {
        0.5
    } else {
        0.0
    }
}

/// 0-100 inspection score: 20 points per dimension times its match level.
pub fn score_report(truth: &InspectionReport, submitted: &InspectionReport) -> f64 {
    InspectionReport::DIMENSIONS
        .iter()
        .map(|d| 20.0 * match_dimension(truth.get(d).unwrap_or(""), submitted.get(d).unwrap_or("")))
        .sum()
}

fn reason_str(ended_by: EndReason) -> &'static str {
    match ended_by {
        EndReason::Terminate => "terminate",
        EndReason::Timeout => "timeout",
        EndReason::Collision => "collision",
        EndReason::Error => "error",
    }
}

/// Evaluate an ended trajectory against its task.
pub fn evaluate(trajectory: &Trajectory, task: &TaskSpec, satellite: &SatelliteModel) -> Outcome {
    let steps = trajectory.steps.len() as u32;
    let final_obs = trajectory.final_observation();
    let collided =
        final_obs.collision || trajectory.steps.iter().any(|s| s.result.error_kind.as_deref() == Some("Collision"));
    let terminated = trajectory.ended_by == EndReason::Terminate;

    if task.kind.is_navigation() {
        let distance = final_obs.lidar_range;
        let in_band = distance.is_some_and(|d| d >= SUCCESS_BAND_M.0 && d <= SUCCESS_BAND_M.1);
        let success = terminated && in_band && !collided;
        let reason = if terminated && !success {
            if collided {
                "collision".to_string()
            } else {
                "terminated outside success band".to_string()
            }
        } else {
            reason_str(trajectory.ended_by).to_string()
        };
        Outcome { success: Some(success), terminal_distance: distance, steps, score: None, reason }
    } else {
        let submitted = if terminated { trajectory.submitted_report() } else { None };
        let score = submitted.map_or(0.0, |r| score_report(&satellite.ground_truth_report, &r));
        Outcome {
            success: None,
            terminal_distance: None,
            steps,
            score: Some(score),
            reason: reason_str(trajectory.ended_by).to_string(),
        }
    }
}
