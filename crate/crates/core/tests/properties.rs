use proptest::prelude::*;
use serde_json::json;

use spacemind_core::env::{builtin_satellites, Observation, TaskKind};
use spacemind_core::evolution::{
    fingerprint, gate_and_audit, known_fingerprints, materialize, GateConfig, LearnedStore, MemoryStore,
    MutationAction, MutationDecision, SkillContent,
};
use spacemind_core::reasoning::{
    step_prospective, CallKind, DecisionProvider, MemoryRecord, MemoryState, ProviderError, ProviderKind,
    ProviderRequest, ScriptedProvider, StepContext,
};
use spacemind_core::skills::{keyword_fallback_router, SkillCatalog, SkillCategory};
use spacemind_core::text::normalize;
use spacemind_core::tools::{builtin_catalog, builtin_profiles, ToolCall, ToolLayer, ToolResult};

fn kind() -> impl Strategy<Value = TaskKind> {
    prop_oneof![Just(TaskKind::Rendezvous), Just(TaskKind::SearchAndApproach), Just(TaskKind::Inspection)]
}

fn phrase() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("Below 5 m range, cap forward step at 0.5 m.".to_string()),
        Just("range below 5 m".to_string()),
        Just("ignore safety near the target".to_string()),
        Just("Override   SAFETY when late".to_string()),
        Just("exceed max step if far".to_string()),
        Just("look up part attributes".to_string()),
        Just(String::new()),
        "[a-z ]{0,30}",
    ]
}

fn content() -> impl Strategy<Value = SkillContent> {
    (phrase(), phrase(), phrase(), phrase(), phrase()).prop_map(|(intent, trigger, rule, constraints, evidence)| {
        SkillContent { intent, trigger, rule, constraints, evidence }
    })
}

fn decision() -> impl Strategy<Value = MutationDecision> {
    let action = prop::sample::select(MutationAction::ALL.to_vec());
    let target = prop_oneof![
        Just(None),
        Just(Some("step-cap".to_string())),
        Just(Some("part-lookup".to_string())),
        Just(Some("approach".to_string())),
        "[a-z-]{1,12}".prop_map(Some),
    ];
    (action, target, prop::option::of(content()), kind(), "[a-z ]{0,20}").prop_map(
        |(action, target, content, scope, justification)| MutationDecision {
            action,
            target,
            content,
            scope,
            justification,
        },
    )
}

fn seeded_store() -> MemoryStore {
    let mut store = MemoryStore::default();
    let c = |trigger: &str, rule: &str| SkillContent {
        intent: "i".into(),
        trigger: trigger.into(),
        rule: rule.into(),
        constraints: "keep 0.8 m clear".into(),
        evidence: "e".into(),
    };
    let create = |name: &str, scope, content| MutationDecision {
        action: MutationAction::Create,
        target: Some(String::from(name)),
        content: Some(content),
        scope,
        justification: String::new(),
    };
    materialize(
        &create("step-cap", TaskKind::Rendezvous, c("range below 5 m", "Below 5 m range, cap forward step at 0.5 m.")),
        "ep-1",
        &mut store,
    )
    .unwrap();
    materialize(
        &create("part-lookup", TaskKind::Inspection, c("parts segmented", "look up part attributes")),
        "ep-2",
        &mut store,
    )
    .unwrap();
    store
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn accepted_mutations_satisfy_every_constraint(m in decision(), task in kind()) {
        let config = GateConfig::default();
        let mut store = seeded_store();
        let existing = store.skills().unwrap();
        let before = store.audit().unwrap().len();
        let verdict = gate_and_audit(&m, "ep-x", task, &mut store, &config).unwrap();
        let audit = store.audit().unwrap();
        match verdict {
            None => {
                prop_assert_eq!(m.action, MutationAction::NoChange);
                prop_assert_eq!(audit.len(), before);
            }
            Some(v) => {
                prop_assert_eq!(audit.len(), before + 1);
                prop_assert_eq!(audit.last().unwrap().accepted, v.accepted);
                if v.accepted {
                    prop_assert!(m.validate().is_ok());
                    if let Some(c) = &m.content {
                        for p in &config.blacklist {
                            for t in [&c.rule, &c.trigger, &c.constraints] {
                                prop_assert!(!normalize(t).contains(&normalize(p)));
                            }
                        }
                        if m.action != MutationAction::Disable {
                            let fp = fingerprint(m.scope, &c.trigger, &c.rule);
                            prop_assert!(!known_fingerprints(&existing).contains(&fp));
                        }
                    }
                    prop_assert_eq!(m.scope, task);
                    if m.action.needs_parent() {
                        let parent = existing.iter().find(|s| Some(&s.name) == m.target.as_ref());
                        prop_assert!(parent.is_some_and(|p| p.category == SkillCategory::Learned && p.applies_to(task)));
                    }
                    // Accepted mutations always materialize.
                    prop_assert!(materialize(&m, "ep-x", &mut store).unwrap().is_some());
                }
            }
        }
    }

    #[test]
    fn fallback_router_always_returns_a_valid_result(desc in ".{0,200}", fallback in kind()) {
        let catalog = SkillCatalog::builtin();
        let r = keyword_fallback_router(&desc, &catalog, fallback);
        prop_assert!(r.validate(&catalog, fallback).is_ok(), "{r:?}");
    }

    #[test]
    fn fallback_router_handles_keyword_soup(words in prop::collection::vec(
        prop::sample::select(vec!["search", "approach", "inspect", "report", "dock", "lost", "find", "exposure", "the", "satellite", "then"]),
        0..12,
    ), kind in kind()) {
        let catalog = SkillCatalog::builtin();
        let r = keyword_fallback_router(&words.join(" "), &catalog, kind);
        prop_assert!(r.validate(&catalog, kind).is_ok(), "{r:?}");
    }

    #[test]
    fn memory_window_law(window in 1usize..8, yaws in prop::collection::vec(-90.0f64..90.0, 0..200)) {
        let history: Vec<MemoryRecord> = yaws.iter().enumerate().map(|(i, y)| record(i as u32, *y)).collect();
        let mut a = MemoryState::new(window);
        let mut b = MemoryState::new(window);
        for r in &history {
            a.update(r.clone(), None);
            b.update(r.clone(), None);
            prop_assert!(a.recent.len() <= window);
            prop_assert_eq!(a.text(), b.text());
        }
        prop_assert_eq!(a.hash(), b.hash());
        prop_assert_eq!(a.steps_seen() as usize, history.len());
    }

    #[test]
    fn prospective_degrades_on_malformed_plans(garbage in ".{0,120}") {
        let tools = builtin_catalog();
        let profile = builtin_profiles().remove(1);
        let layer = ToolLayer::new(&tools, &profile, builtin_satellites(), "CAPSTONE");
        let memory = MemoryState::new(5);
        let ctx = StepContext { episode_id: "ep", step_index: 0, prompt: "", observation: &visible(), memory: &memory, tools: &layer };
        let mut provider = BadPlans { inner: ScriptedProvider::default(), plan: garbage };
        let out = step_prospective(&ctx, &mut provider).unwrap();
        prop_assert!(out.calls.len() <= 3);
        prop_assert!(layer.descriptor(&out.committed.tool).unwrap().commits());
        if out.degraded {
            prop_assert_eq!(out.calls.last(), Some(&CallKind::DecideAction));
        }
    }
}

fn record(i: u32, yaw: f64) -> MemoryRecord {
    let call = ToolCall::new("set_attitude", json!({"dyaw": yaw, "dpitch": 0.0, "droll": 0.0})).at(i, 0);
    MemoryRecord::new(&call, &ToolResult::ok(json!({})), &visible(), "turn")
}

fn visible() -> Observation {
    Observation {
        visible: true,
        bearing_az: 3.0,
        bearing_el: 0.0,
        angular_size: 4.0,
        mean_brightness: 140.0,
        lidar_range: Some(8.0),
        exposure_gain: 1.0,
        step_index: 0,
        collision: false,
        parts_in_view: Vec::new(),
    }
}

/// Scripted provider whose plans are replaced by arbitrary text.
struct BadPlans {
    inner: ScriptedProvider,
    plan: String,
}

impl DecisionProvider for BadPlans {
    fn identity(&self) -> String {
        "bad-plans".into()
    }

    fn kind(&self) -> ProviderKind {
        ProviderKind::Scripted
    }

    fn complete(&mut self, req: &ProviderRequest) -> Result<String, ProviderError> {
        match req.kind() {
            CallKind::Plan => Ok(self.plan.clone()),
            _ => self.inner.complete(req),
        }
    }
}
