use spacemind_core::env::{ConditionId, SimConfig, Simulator, TaskKind, TaskSpec, SUCCESS_BAND_M};
use spacemind_core::evolution::{LearnedStore, MemoryStore};
use spacemind_core::reasoning::{CallKind, ReasoningMode, ScriptedConfig, ScriptedProvider};
use spacemind_core::runner::{
    induced_failure_group, run_campaign, run_direct, CampaignDeps, DirectPort, EndReason, EpisodeConfig, EpisodeReport,
    Event,
};
use spacemind_core::skills::SkillCatalog;
use spacemind_core::tools::{builtin_catalog, builtin_profiles, ToolProfile};

fn profile(name: &str) -> ToolProfile {
    builtin_profiles().into_iter().find(|p| p.name == name).unwrap()
}

fn run(
    kind: TaskKind,
    cond: ConditionId,
    mode: ReasoningMode,
    prof: &str,
    seed: u64,
    scripted: ScriptedConfig,
) -> EpisodeReport {
    let task = TaskSpec::new(kind, "CAPSTONE", cond);
    let mut config = EpisodeConfig::new(&format!("ep-{seed}"), task, mode, profile(prof));
    config.seed = seed;
    let mut provider = ScriptedProvider::new(scripted);
    run_direct(&config, &mut provider, Simulator::with_builtin(SimConfig::default())).unwrap()
}

const MODES: [ReasoningMode; 3] = [ReasoningMode::Standard, ReasoningMode::React, ReasoningMode::Prospective];
const CONDITIONS: [ConditionId; 3] = [ConditionId::C1, ConditionId::C2, ConditionId::C3];

#[test]
fn navigation_succeeds_across_seeds() {
    for kind in [TaskKind::Rendezvous, TaskKind::SearchAndApproach] {
        for seed in 0..20 {
            let r = run(kind, ConditionId::C1, ReasoningMode::Standard, "hybrid-nav", seed, ScriptedConfig::default());
            let d = r.outcome.terminal_distance.unwrap();
            assert_eq!(r.outcome.success, Some(true), "{kind} seed {seed}: {}", r.outcome.reason);
            assert!(d >= SUCCESS_BAND_M.0 && d <= SUCCESS_BAND_M.1);
            assert!(r.outcome.steps <= 50);
        }
    }
}

#[test]
fn full_cross_product_runs() {
    for kind in TaskKind::ALL {
        for mode in MODES {
            for cond in CONDITIONS {
                for p in builtin_profiles() {
                    let r = run(kind, cond, mode, &p.name, 3, ScriptedConfig::default());
                    assert!(r.trajectory.error.is_none(), "{kind} {mode} {cond} {}: {:?}", p.name, r.trajectory.error);
                    assert!(r.trajectory.steps.len() as u32 <= r.trajectory.task.max_steps);
                    let last = r.trajectory.steps.last().unwrap();
                    assert_eq!(r.trajectory.ended_by == EndReason::Terminate, last.committed.tool == "terminate");
                }
            }
        }
    }
}

#[test]
fn navigation_succeeds_in_every_mode_and_condition() {
    for kind in [TaskKind::Rendezvous, TaskKind::SearchAndApproach] {
        for mode in MODES {
            for cond in CONDITIONS {
                let r = run(kind, cond, mode, "hybrid-nav", 7, ScriptedConfig::default());
                assert_eq!(r.outcome.success, Some(true), "{kind} {mode} {cond}: {}", r.outcome.reason);
            }
        }
    }
}

#[test]
fn vision_only_fails_when_range_is_required() {
    let strict = ScriptedConfig { range_required: true, ..ScriptedConfig::default() };
    for kind in [TaskKind::Rendezvous, TaskKind::SearchAndApproach] {
        let blind = run(kind, ConditionId::C1, ReasoningMode::Standard, "vision-only", 0, strict.clone());
        assert_eq!(blind.outcome.success, Some(false), "{kind}");
        let nav = run(kind, ConditionId::C1, ReasoningMode::Standard, "hybrid-nav", 0, strict.clone());
        assert_eq!(nav.outcome.success, Some(true), "{kind}");
    }
}

#[test]
fn search_starts_with_a_yaw_sweep() {
    let r = run(
        TaskKind::SearchAndApproach,
        ConditionId::C1,
        ReasoningMode::Standard,
        "hybrid-nav",
        0,
        ScriptedConfig::default(),
    );
    let first = &r.trajectory.steps[0].committed;
    assert_eq!(first.tool, "set_attitude");
    assert_eq!(first.number("dyaw"), Some(15.0));
    let approach = r.trajectory.steps.iter().position(|s| s.committed.tool == "set_position").unwrap();
    assert!(r.trajectory.steps[..approach].iter().all(|s| s.committed.tool == "set_attitude"));
    assert_eq!(r.trajectory.steps.last().unwrap().committed.tool, "terminate");
}

#[test]
fn underexposed_start_is_corrected_within_two_steps() {
    for mode in MODES {
        let r = run(TaskKind::Rendezvous, ConditionId::C2, mode, "hybrid-nav", 0, ScriptedConfig::default());
        assert!((r.trajectory.initial.mean_brightness - 14.0).abs() < 1e-9);
        let fixed = r.trajectory.steps[..2]
            .iter()
            .position(|s| (100.0..=180.0).contains(&s.observation.mean_brightness))
            .unwrap_or_else(|| panic!("{mode}: not corrected"));
        assert_eq!(r.trajectory.steps[fixed].committed.tool, "set_exposure");
    }
    let std =
        run(TaskKind::Rendezvous, ConditionId::C2, ReasoningMode::Standard, "hybrid-nav", 0, ScriptedConfig::default());
    let s0 = &std.trajectory.steps[0];
    assert_eq!(s0.inner[0].call.tool, "brightness_assess");
    assert_eq!(s0.committed.tool, "set_exposure");
}

#[test]
fn provider_calls_per_step_respect_mode_bounds() {
    for kind in TaskKind::ALL {
        for cond in CONDITIONS {
            for mode in MODES {
                let r = run(kind, cond, mode, "hybrid-nav-code", 11, ScriptedConfig::default());
                for s in &r.trajectory.steps {
                    assert_eq!(s.provider_calls as usize, s.calls.len());
                    match mode {
                        ReasoningMode::Standard => assert!(s.calls.len() <= 2),
                        ReasoningMode::React => {
                            assert!(s.calls.len() <= 3);
                            assert!(s.inner.iter().all(|c| c.call.inner_round < 3));
                        }
                        ReasoningMode::Prospective => {
                            assert!(s.calls.len() <= 2);
                            assert_eq!(s.calls, [CallKind::Plan, CallKind::Select]);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn reruns_are_identical() {
    for mode in MODES {
        let a = run(TaskKind::SearchAndApproach, ConditionId::C3, mode, "hybrid-nav", 5, ScriptedConfig::default());
        let b = run(TaskKind::SearchAndApproach, ConditionId::C3, mode, "hybrid-nav", 5, ScriptedConfig::default());
        assert_eq!(serde_json::to_string(&a.trajectory).unwrap(), serde_json::to_string(&b.trajectory).unwrap());
    }
}

#[test]
fn inspection_reports_looked_up_attributes() {
    let r =
        run(TaskKind::Inspection, ConditionId::C1, ReasoningMode::Standard, "hybrid-nav", 0, ScriptedConfig::default());
    assert!(r.outcome.score.unwrap() >= 60.0, "{:?}", r.outcome);
    let names_only = ScriptedConfig { inspection_lookup: false, ..ScriptedConfig::default() };
    let r = run(TaskKind::Inspection, ConditionId::C1, ReasoningMode::Standard, "hybrid-nav", 0, names_only);
    assert!(r.outcome.score.unwrap() < 60.0);
}

#[test]
fn induced_failure_campaign_learns_a_step_cap() {
    let g = induced_failure_group(profile("hybrid-nav"));
    let sim = Simulator::with_builtin(g.sim.clone());
    let knowledge = sim.satellites().to_vec();
    let mut port = DirectPort::new(sim);
    let mut provider = ScriptedProvider::new(g.scripted.clone());
    let mut store = MemoryStore::default();
    let mut events: Vec<Event> = Vec::new();
    let report = run_campaign(
        std::slice::from_ref(&g.config),
        5,
        CampaignDeps {
            port: &mut port,
            provider: &mut provider,
            catalog: &SkillCatalog::builtin(),
            tools: &builtin_catalog(),
            knowledge: &knowledge,
            store: &mut store,
            sink: &mut events,
        },
    );
    let rows: Vec<_> = report.rounds.iter().map(|r| &r.episodes[0]).collect();
    assert_eq!(rows[0].ended_by, Some(EndReason::Collision));
    assert_eq!(rows[0].mutation.as_deref(), Some("create step-cap"));
    let steps: Vec<u32> = rows[1..].iter().map(|r| r.outcome.as_ref().unwrap().steps).collect();
    assert!(rows[1..].iter().all(|r| r.passed()));
    assert!(rows[1..].iter().all(|r| r.learned_active == ["step-cap"]));
    assert!(steps.windows(2).all(|w| w[1] <= w[0]), "{steps:?}");
    assert_eq!(store.skills().unwrap().len(), 1);
    assert_eq!(store.audit().unwrap().len(), 1);
    assert_eq!(report.inventory, ["step-cap v1 (evolved:induced-r1)"]);
}

#[test]
fn disabled_evolution_leaves_the_store_alone() {
    let mut g = induced_failure_group(profile("hybrid-nav"));
    g.config.evolution = false;
    let sim = Simulator::with_builtin(g.sim.clone());
    let knowledge = sim.satellites().to_vec();
    let mut port = DirectPort::new(sim);
    let mut provider = ScriptedProvider::new(g.scripted.clone());
    let mut store = MemoryStore::default();
    let report = run_campaign(
        &[g.config.clone()],
        3,
        CampaignDeps {
            port: &mut port,
            provider: &mut provider,
            catalog: &SkillCatalog::builtin(),
            tools: &builtin_catalog(),
            knowledge: &knowledge,
            store: &mut store,
            sink: &mut spacemind_core::runner::NullSink,
        },
    );
    assert_eq!(store, MemoryStore::default());
    assert!(report.inventory.is_empty());
    assert!(report.rounds.iter().all(|r| r.aggregate.passes == 0));
}

#[test]
fn events_follow_phase_order() {
    let g = induced_failure_group(profile("hybrid-nav"));
    let sim = Simulator::with_builtin(g.sim.clone());
    let knowledge = sim.satellites().to_vec();
    let mut port = DirectPort::new(sim);
    let mut provider = ScriptedProvider::new(g.scripted.clone());
    let mut store = MemoryStore::default();
    let mut events: Vec<Event> = Vec::new();
    run_campaign(
        std::slice::from_ref(&g.config),
        1,
        CampaignDeps {
            port: &mut port,
            provider: &mut provider,
            catalog: &SkillCatalog::builtin(),
            tools: &builtin_catalog(),
            knowledge: &knowledge,
            store: &mut store,
            sink: &mut events,
        },
    );
    let phase = |e: &Event| match e {
        Event::Init { .. } => 0,
        Event::Reset { .. } => 1,
        Event::Step { .. } => 2,
        Event::End { .. } => 3,
        Event::Evolution { .. } => 4,
    };
    let phases: Vec<u8> = events.iter().map(phase).collect();
    assert!(phases.windows(2).all(|w| w[0] <= w[1]), "{phases:?}");
    assert_eq!(phases.first(), Some(&0));
    assert_eq!(phases.last(), Some(&4));
}

#[test]
fn low_inspection_score_teaches_a_lookup() {
    let task = TaskSpec::new(TaskKind::Inspection, "IBEX", ConditionId::C1);
    let mut config = EpisodeConfig::new("insp", task, ReasoningMode::Standard, profile("hybrid-nav"));
    config.evolution = true;
    let sim = Simulator::with_builtin(SimConfig::default());
    let knowledge = sim.satellites().to_vec();
    let mut port = DirectPort::new(sim);
    let mut provider = ScriptedProvider::new(ScriptedConfig { inspection_lookup: false, ..ScriptedConfig::default() });
    let mut store = MemoryStore::default();
    let report = run_campaign(
        &[config],
        3,
        CampaignDeps {
            port: &mut port,
            provider: &mut provider,
            catalog: &SkillCatalog::builtin(),
            tools: &builtin_catalog(),
            knowledge: &knowledge,
            store: &mut store,
            sink: &mut spacemind_core::runner::NullSink,
        },
    );
    let scores: Vec<f64> = report.rounds.iter().map(|r| r.aggregate.mean_score.unwrap()).collect();
    assert!(scores[0] < 60.0);
    assert_eq!(report.rounds[0].episodes[0].mutation.as_deref(), Some("create part-lookup"));
    assert!(scores[1..].iter().all(|s| *s >= 60.0), "{scores:?}");
}

#[test]
fn event_stream_rebuilds_the_episode() {
    use spacemind_core::runner::{replay_events, EpisodeDeps, EpisodeRow};
    let catalog = SkillCatalog::builtin();
    let tools = builtin_catalog();
    for (kind, mode) in [
        (TaskKind::Rendezvous, ReasoningMode::Standard),
        (TaskKind::SearchAndApproach, ReasoningMode::React),
        (TaskKind::Inspection, ReasoningMode::Prospective),
    ] {
        let config = EpisodeConfig::new(
            "ep-r",
            TaskSpec::new(kind, "CAPSTONE", ConditionId::C2),
            mode,
            profile("hybrid-nav-code"),
        );
        let sim = Simulator::with_builtin(SimConfig::default());
        let knowledge = sim.satellites().to_vec();
        let mut events = Vec::new();
        let report = spacemind_core::runner::run_episode(
            &config,
            EpisodeDeps {
                port: &mut DirectPort::new(sim),
                provider: &mut ScriptedProvider::default(),
                catalog: &catalog,
                tools: &tools,
                knowledge: &knowledge,
                store: None,
                history: &[],
                sink: &mut events,
            },
        )
        .unwrap();
        let replayed = replay_events(&events).unwrap();
        assert_eq!(replayed.trajectory, report.trajectory);
        assert_eq!(replayed.outcome, report.outcome);
        assert_eq!(replayed.row, EpisodeRow::from_report(&config, &report));
        let kb = spacemind_core::env::builtin_satellites();
        let sat = kb.iter().find(|s| s.id == "CAPSTONE").unwrap();
        assert_eq!(spacemind_core::env::evaluate(&replayed.trajectory, &config.task, sat), report.outcome);

        let mut shuffled = events.clone();
        shuffled.swap(0, 1);
        assert!(replay_events(&shuffled).is_err());
        assert!(replay_events(&events[..events.len() - 1]).is_err());
    }
}
