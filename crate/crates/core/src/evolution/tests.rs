use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::env::{ConditionId, Observation, TaskSpec};
use crate::reasoning::{ReasoningMode, ScriptedProvider};
use crate::runner::StepRecord;
use crate::skills::{Provenance, SkillCategory};
use crate::tools::{ToolCall, ToolResult};

fn content(trigger: &str, rule: &str) -> SkillContent {
    SkillContent {
        intent: "avoid overshoot".into(),
        trigger: trigger.into(),
        rule: rule.into(),
        constraints: "stay within the 2 m step limit".into(),
        evidence: "ep-1 collided".into(),
    }
}

fn create(name: &str, scope: TaskKind) -> MutationDecision {
    MutationDecision {
        action: MutationAction::Create,
        target: Some(name.into()),
        content: Some(content("range below 5 m", "Below 5 m range, cap forward step at 0.5 m.")),
        scope,
        justification: "large steps".into(),
    }
}

fn store_with_step_cap() -> MemoryStore {
    let mut store = MemoryStore::default();
    materialize(&create("step-cap", TaskKind::Rendezvous), "ep-1", &mut store).unwrap();
    store
}

#[test]
fn gate_accepts_a_clean_create() {
    let v = quality_gate(&create("step-cap", TaskKind::Rendezvous), &[], TaskKind::Rendezvous, &GateConfig::default());
    assert!(v.accepted, "{v:?}");
}

#[test]
fn gate_rejects_blacklisted_phrases_in_any_checked_field() {
    let cfg = GateConfig::default();
    let mut m = create("x", TaskKind::Rendezvous);
    m.content.as_mut().unwrap().rule = "When close, IGNORE   safety and push on.".into();
    assert_eq!(quality_gate(&m, &[], TaskKind::Rendezvous, &cfg).rejected_by, Some(GateRejection::SafetyPhrase));
    let mut m = create("x", TaskKind::Rendezvous);
    m.content.as_mut().unwrap().constraints = "Exceed max step if late.".into();
    assert_eq!(quality_gate(&m, &[], TaskKind::Rendezvous, &cfg).rejected_by, Some(GateRejection::SafetyPhrase));
    // Intent is not a checked field.
    let mut m = create("x", TaskKind::Rendezvous);
    m.content.as_mut().unwrap().intent = "never ignore safety".into();
    assert!(quality_gate(&m, &[], TaskKind::Rendezvous, &cfg).accepted);
}

#[test]
fn gate_rejects_duplicate_fingerprints_up_to_case_and_spacing() {
    let store = store_with_step_cap();
    let existing = store.skills().unwrap();
    let mut m = create("other-name", TaskKind::Rendezvous);
    let c = m.content.as_mut().unwrap();
    c.trigger = "RANGE  below 5 m".into();
    c.rule = "below 5 m range,   cap forward step at 0.5 m.".into();
    let v = quality_gate(&m, &existing, TaskKind::Rendezvous, &GateConfig::default());
    assert_eq!(v.rejected_by, Some(GateRejection::DuplicateFingerprint));
}

#[test]
fn gate_rejects_scope_mismatch_and_missing_parents() {
    let cfg = GateConfig::default();
    let v = quality_gate(&create("x", TaskKind::Inspection), &[], TaskKind::Rendezvous, &cfg);
    assert_eq!(v.rejected_by, Some(GateRejection::ScopeMismatch));

    let disable = MutationDecision {
        action: MutationAction::Disable,
        target: Some("ghost".into()),
        content: None,
        scope: TaskKind::Rendezvous,
        justification: String::new(),
    };
    assert_eq!(quality_gate(&disable, &[], TaskKind::Rendezvous, &cfg).rejected_by, Some(GateRejection::MissingParent));
    let existing = store_with_step_cap().skills().unwrap();
    let ok = MutationDecision { target: Some("step-cap".into()), ..disable };
    assert!(quality_gate(&ok, &existing, TaskKind::Rendezvous, &cfg).accepted);
}

#[test]
fn gate_rejects_malformed_decisions() {
    let mut m = create("x", TaskKind::Rendezvous);
    m.content.as_mut().unwrap().evidence.clear();
    let v = quality_gate(&m, &[], TaskKind::Rendezvous, &GateConfig::default());
    assert_eq!(v.rejected_by, Some(GateRejection::Malformed));
}

#[test]
fn every_gated_decision_is_audited() {
    let mut store = MemoryStore::default();
    let cfg = GateConfig::default();
    let good = create("step-cap", TaskKind::Rendezvous);
    let wrong_scope = create("y", TaskKind::Inspection);
    let nothing = MutationDecision::no_change(TaskKind::Rendezvous, "fine");
    assert!(gate_and_audit(&good, "ep-1", TaskKind::Rendezvous, &mut store, &cfg).unwrap().unwrap().accepted);
    assert!(!gate_and_audit(&wrong_scope, "ep-2", TaskKind::Rendezvous, &mut store, &cfg).unwrap().unwrap().accepted);
    assert_eq!(gate_and_audit(&nothing, "ep-3", TaskKind::Rendezvous, &mut store, &cfg).unwrap(), None);
    let audit = store.audit().unwrap();
    assert_eq!(audit.len(), 2);
    assert!(audit[0].accepted);
    assert!(audit[1].reason.starts_with("scope_mismatch"));
    for line in &audit {
        assert_eq!(&line.to_string().parse::<AuditLine>().unwrap(), line);
    }
}

#[test]
fn materialize_create_writes_a_parseable_learned_skill() {
    let store = store_with_step_cap();
    let s = store.get("step-cap").unwrap().unwrap();
    assert_eq!(s.category, SkillCategory::Learned);
    assert_eq!(s.version, 1);
    assert_eq!(s.provenance, Provenance::Evolved("ep-1".into()));
    assert_eq!(s.scope, [TaskKind::Rendezvous]);
    assert_eq!(Skill::parse(&s.render(), "step-cap.v1.skill").unwrap(), s);
    assert_eq!(
        rule_groups(&s.body),
        [("range below 5 m".to_string(), "Below 5 m range, cap forward step at 0.5 m.".to_string())]
    );
}

#[test]
fn materialize_create_avoids_name_collisions() {
    let mut store = store_with_step_cap();
    let mut m = create("step-cap", TaskKind::Rendezvous);
    m.content.as_mut().unwrap().rule = "Below 4 m range, cap forward step at 0.3 m.".into();
    let s = materialize(&m, "ep-2", &mut store).unwrap().unwrap();
    assert_eq!(s.name, "step-cap-2");
}

#[test]
fn materialize_overlay_bumps_version_and_archives() {
    let mut store = store_with_step_cap();
    let overlay = MutationDecision {
        action: MutationAction::Overlay,
        target: Some("step-cap".into()),
        content: Some(content("range below 3 m", "Below 3 m range, cap forward step at 0.3 m.")),
        scope: TaskKind::Rendezvous,
        justification: "still overshooting".into(),
    };
    let s = materialize(&overlay, "ep-2", &mut store).unwrap().unwrap();
    assert_eq!(s.version, 2);
    assert_eq!(s.provenance, Provenance::Evolved("ep-1".into()));
    assert!(s.body.contains("## Overlay v2 (episode ep-2)"));
    assert_eq!(Skill::parse(&s.render(), "step-cap.v2.skill").unwrap(), s);
    assert_eq!(rule_groups(&s.body).len(), 2);
    assert_eq!(store.archive.len(), 1);
    assert_eq!(store.archive[0].version, 1);

    // The overlay's rule is now known; proposing it again is a duplicate.
    let again = MutationDecision { action: MutationAction::Create, target: Some("z".into()), ..overlay };
    let v = quality_gate(&again, &store.skills().unwrap(), TaskKind::Rendezvous, &GateConfig::default());
    assert_eq!(v.rejected_by, Some(GateRejection::DuplicateFingerprint));
}

#[test]
fn materialize_rewrite_and_disable() {
    let mut store = store_with_step_cap();
    let rewrite = MutationDecision {
        action: MutationAction::Rewrite,
        target: Some("step-cap".into()),
        content: Some(content("range below 6 m", "Below 6 m range, cap forward step at 0.8 m.")),
        scope: TaskKind::Rendezvous,
        justification: "cleaner".into(),
    };
    let s = materialize(&rewrite, "ep-3", &mut store).unwrap().unwrap();
    assert_eq!((s.version, s.provenance.clone()), (2, Provenance::Evolved("ep-3".into())));
    assert!(s.body.contains("Below 6 m range"));
    assert!(!s.body.contains("Below 5 m range"));

    let disable = MutationDecision {
        action: MutationAction::Disable,
        target: Some("step-cap".into()),
        content: None,
        scope: TaskKind::Rendezvous,
        justification: "collided".into(),
    };
    let s = materialize(&disable, "ep-4", &mut store).unwrap().unwrap();
    assert!(!s.enabled);
    assert_eq!(Skill::parse(&s.render(), "x").unwrap(), s);
    assert!(select_learned(TaskKind::Rendezvous, ReasoningMode::Standard, "rendezvous", &store.skills().unwrap(), 2)
        .is_empty());
    assert_eq!(store.archive.len(), 2);
}

#[test]
fn select_learned_ranks_by_overlap_then_version_then_recency() {
    let mut store = MemoryStore::default();
    let mk = |name: &str, trigger: &str, rule: &str| MutationDecision {
        target: Some(name.into()),
        content: Some(content(trigger, rule)),
        ..create(name, TaskKind::Rendezvous)
    };
    materialize(&mk("a", "docking port visible", "Align with the docking port."), "ep-1", &mut store).unwrap();
    materialize(&mk("b", "range below 5 m", "Slow down near the target."), "ep-2", &mut store).unwrap();
    materialize(&mk("c", "range below 4 m", "Hold attitude while closing."), "ep-3", &mut store).unwrap();
    materialize(&create("d", TaskKind::Inspection), "ep-4", &mut store).unwrap();
    let skills = store.skills().unwrap();

    let names = |desc: &str, k| -> Vec<String> {
        select_learned(TaskKind::Rendezvous, ReasoningMode::Standard, desc, &skills, k)
            .into_iter()
            .map(|s| s.name)
            .collect()
    };
    assert_eq!(names("approach the docking port", 2), ["a", "c"]);
    // No overlap anywhere: newest originating episode first.
    assert_eq!(names("go", 3), ["c", "b", "a"]);
    assert_eq!(names("go", 0), Vec::<String>::new());
}

fn step(i: u32, call: ToolCall, range: f64, collision: bool) -> StepRecord {
    let result = if collision {
        ToolResult {
            ok: false,
            payload: serde_json::json!({"error": "collision"}),
            error_kind: Some("Collision".into()),
        }
    } else {
        ToolResult::ok(serde_json::json!({}))
    };
    StepRecord {
        step_index: i,
        inner: Vec::new(),
        committed: call,
        result,
        observation: obs(range - 2.0, collision),
        memory_hash: 0,
        provider_calls: 1,
        calls: Vec::new(),
        degraded: false,
        analysis: String::new(),
    }
}

fn obs(range: f64, collision: bool) -> Observation {
    Observation {
        visible: true,
        bearing_az: 0.0,
        bearing_el: 0.0,
        angular_size: 5.0,
        mean_brightness: 140.0,
        lidar_range: Some(range),
        exposure_gain: 1.0,
        step_index: 0,
        collision,
        parts_in_view: Vec::new(),
    }
}

fn collided_trajectory() -> Trajectory {
    let fwd = |dx: f64| ToolCall::new("set_position", serde_json::json!({"dx": dx, "dy": 0.0, "dz": 0.0}));
    let task = TaskSpec::new(TaskKind::Rendezvous, "CAPSTONE", ConditionId::C1);
    Trajectory {
        episode_id: "ep-9".into(),
        task,
        initial: obs(6.5, false),
        steps: vec![step(0, fwd(2.0), 6.5, false), step(1, fwd(2.0), 4.5, false), step(2, fwd(2.0), 2.5, true)],
        ended_by: EndReason::Collision,
        error: None,
    }
}

fn failed_outcome(steps: u32) -> Outcome {
    Outcome { success: Some(false), terminal_distance: Some(0.5), steps, score: None, reason: "collision".into() }
}

#[test]
fn summary_measures_near_target_steps() {
    let s = summarize_episode(&collided_trajectory(), &failed_outcome(3), &[]);
    assert!(s.collided);
    // Steps commanded from 4.5 m and 2.5 m.
    assert_eq!(s.near_forward_step_m, Some(2.0));
    assert_eq!(s.movements.len(), 3);
    assert_eq!(s.omitted_steps, 0);
}

#[test]
fn summary_elides_the_middle_of_long_episodes() {
    let mut t = collided_trajectory();
    let template = t.steps[0].clone();
    t.steps = (0..35).map(|i| StepRecord { step_index: i, ..template.clone() }).collect();
    let s = summarize_episode(&t, &failed_outcome(35), &[]);
    assert_eq!(s.movements.len(), 20);
    assert_eq!(s.omitted_steps, 15);
    assert!(s.movements[10].starts_with("25 "));
    assert!(s.render().contains("(15 middle steps omitted)"));
}

#[test]
fn scripted_reflection_creates_then_disables() {
    let mut provider = ScriptedProvider::default();
    let summary = summarize_episode(&collided_trajectory(), &failed_outcome(3), &[]);
    let m = reflect(&summary, &[], &[], &mut provider);
    assert_eq!((m.action, m.target.as_deref()), (MutationAction::Create, Some("step-cap")));
    assert!(m.content.as_ref().unwrap().rule.contains("cap forward step at 0.5 m"));

    let mut store = MemoryStore::default();
    let rec = evolve(&summary, &[], &mut store, &mut provider, &GateConfig::default()).unwrap();
    assert!(rec.verdict.unwrap().accepted);
    let skill = rec.skill.unwrap();

    // Collision again with the learned skill active: disable it.
    let summary = summarize_episode(&collided_trajectory(), &failed_outcome(3), core::slice::from_ref(&skill.name));
    let rec = evolve(&summary, &[], &mut store, &mut provider, &GateConfig::default()).unwrap();
    assert_eq!(rec.decision.action, MutationAction::Disable);
    assert!(!store.get("step-cap").unwrap().unwrap().enabled);
    assert_eq!(store.audit().unwrap().len(), 2);
}

#[test]
fn success_reflects_to_no_change_without_audit() {
    let mut provider = ScriptedProvider::default();
    let ok = Outcome { success: Some(true), terminal_distance: Some(2.0), steps: 3, score: None, reason: "ok".into() };
    let mut t = collided_trajectory();
    t.ended_by = EndReason::Terminate;
    let summary = summarize_episode(&t, &ok, &[]);
    let mut store = MemoryStore::default();
    let rec = evolve(&summary, &[], &mut store, &mut provider, &GateConfig::default()).unwrap();
    assert_eq!(rec.decision.action, MutationAction::NoChange);
    assert_eq!(rec.verdict, None);
    assert!(store.audit().unwrap().is_empty());
}
