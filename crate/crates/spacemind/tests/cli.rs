use std::fs;
use std::path::Path;

use spacemind::cli::{main, EXIT_CONFIG, EXIT_OK, EXIT_TASK_FAILED};
use spacemind::report::report_from_logs;
use spacemind_core::env::TaskKind;
use spacemind_core::reasoning::ReasoningMode;
use spacemind_core::runner::EpisodeReport;
use spacemind_core::tools::builtin_profiles;

fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["spacemind"];
    argv.extend_from_slice(args);
    let code = main(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("spacemind.toml");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn run_prints_a_summary_and_exits_zero() {
    let (code, out, _) =
        cli(&["run", "--task", "rendezvous", "--mode", "standard", "--profile", "hybrid-nav", "--condition", "C1"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("success dist="), "{out}");
    assert!(out.contains("steps="));
}

#[test]
fn unknown_profile_is_a_config_error() {
    let (code, _, err) = cli(&["run", "--task", "rendezvous", "--profile", "telepathy"]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("telepathy"), "{err}");
    let (code, _, _) = cli(&["run", "--task", "levitate"]);
    assert_eq!(code, EXIT_CONFIG);
    let (code, out, _) = cli(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("ablate"));
}

#[test]
fn task_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[provider.scripted]\nrange_required = true\n");
    let (code, out, _) = cli(&["-c", &config, "run", "--task", "rendezvous", "--profile", "vision-only"]);
    assert_eq!(code, EXIT_TASK_FAILED, "{out}");
    assert!(out.starts_with("failure"), "{out}");
}

#[test]
fn prospective_run_shows_plan_select_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("ep.jsonl");
    let (code, out, _) =
        cli(&["run", "--task", "rendezvous", "--mode", "prospective", "--json", "--log", log.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let report: EpisodeReport = serde_json::from_str(&out).unwrap();
    for step in &report.trajectory.steps {
        let kinds: Vec<String> = step.calls.iter().map(|c| c.as_str().to_string()).collect();
        assert_eq!(kinds, ["plan", "select"], "step {}", step.step_index);
    }
    let replayed = spacemind::logs::replay_log(&log).unwrap();
    assert_eq!(replayed.trajectory, report.trajectory);
}

#[test]
fn flags_beat_task_overrides_beat_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        r#"
[defaults]
mode = "react"
profile = "hybrid-nav"
seed = 4

[tasks.search]
mode = "prospective"
condition = "C3"
max_steps = 40
"#,
    );
    let config = spacemind::config::RootConfig::load(Path::new(&path)).unwrap();
    let none = spacemind::config::Flags::default();
    let r = config.episode(TaskKind::Rendezvous, &none, "a").unwrap();
    assert_eq!((r.mode, r.seed, r.task.max_steps), (ReasoningMode::React, 4, 50));
    let s = config.episode(TaskKind::SearchAndApproach, &none, "b").unwrap();
    assert_eq!(
        (s.mode, s.task.max_steps, format!("{:?}", s.task.condition.id)),
        (ReasoningMode::Prospective, 40, "C3".into())
    );
    let flags =
        spacemind::config::Flags { mode: Some(ReasoningMode::Standard), max_steps: Some(30), ..Default::default() };
    let f = config.episode(TaskKind::SearchAndApproach, &flags, "c").unwrap();
    assert_eq!((f.mode, f.task.max_steps), (ReasoningMode::Standard, 30));
}

#[test]
fn config_round_trips_and_rejects_unknown_keys() {
    let full = r#"
[paths]
workspace = "ws"
logs = "logs"

[defaults]
mode = "prospective"
profile = "nav-lite"
satellite = "IBEX"
condition = "C2"
memory_window = 7
top_k = 1
seed = 11
evolution = true

[bus]
backend = "in-process"
namespace = "lab"

[provider]
kind = "scripted"
record = "transcript.jsonl"

[provider.scripted]
range_required = true
brightness_band = [90.0, 170.0]

[provider.remote]
model = "local-vl"
timeout_s = 5

[sim]
jitter_m = 0.0

[gate]
blacklist = ["ignore safety"]

[[profiles]]
name = "nav-lite"
allowed = ["lidar_range", "set_position", "set_attitude", "terminate"]

[routing.rendezvous]
task = "approach"
helpers = []

[tasks.inspection]
satellite = "Huygens"
start_range_m = 5.0
"#;
    let a = spacemind::config::RootConfig::parse(full, Path::new("t.toml")).unwrap();
    a.validate().unwrap();
    let b = spacemind::config::RootConfig::parse(&a.to_toml(), Path::new("t.toml")).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_toml(), b.to_toml());
    let d = spacemind::config::RootConfig::default();
    assert_eq!(spacemind::config::RootConfig::parse(&d.to_toml(), Path::new("d")).unwrap(), d);

    for bad in ["[defaults]\nmood = \"x\"\n", "[sim]\nwarp = 9\n", "colour = 1\n", "[tasks.dance]\nmode = \"react\"\n"]
    {
        assert!(spacemind::config::RootConfig::parse(bad, Path::new("b")).is_err(), "{bad}");
    }
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "[[profiles]]\nname = \"x\"\nallowed = [\"teleport\", \"terminate\"]\n");
    let (code, _, err) = cli(&["-c", &path, "config", "show"]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("teleport"), "{err}");
}

#[test]
fn ablation_report_rerenders_from_logs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[provider.scripted]\nrange_required = true\n");
    let logs = dir.path().join("ab");
    let (code, live, _) = cli(&["-c", &config, "ablate", "--runs", "2", "--logs", logs.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let lines: Vec<&str> = live.lines().collect();
    assert_eq!(lines.len(), 1 + builtin_profiles().len(), "{live}");
    assert!(lines[1].starts_with("vision-only") && lines[1].matches("FAIL").count() == 2, "{live}");
    assert!(lines[2].starts_with("hybrid-nav ") && lines[2].contains("4/4"), "{live}");
    let (_, again, _) = cli(&["report", logs.to_str().unwrap()]);
    assert_eq!(again, live);
    let (_, json_live, _) =
        cli(&["-c", &config, "ablate", "--runs", "2", "--json", "--logs", dir.path().join("ab2").to_str().unwrap()]);
    let (_, json_again, _) = cli(&["report", "--json", dir.path().join("ab2").to_str().unwrap()]);
    assert_eq!(json_live, json_again);
    assert_eq!(report_from_logs(&logs).unwrap().rows.len(), 3);

    let (code, single, _) = cli(&["ablate", "--profiles", "hybrid-nav", "--tasks", "rendezvous"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(single.lines().count(), 2, "{single}");
}

#[test]
fn sweep_has_one_row_per_mode() {
    let (code, out, _) = cli(&["sweep", "--tasks", "rendezvous", "--conditions", "C1", "--runs", "5"]);
    assert_eq!(code, EXIT_OK);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 3, "{out}");
    assert!(rows.iter().all(|r| r.contains("5/5")), "{out}");
}

#[test]
fn evolve_logs_the_learned_skill_and_its_origin() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    let logs = dir.path().join("ev");
    let (code, out, _) =
        cli(&["evolve", "--rounds", "5", "--workspace", ws.to_str().unwrap(), "--logs", logs.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let rounds: Vec<&str> = out.lines().skip(1).take(5).collect();
    assert!(rounds[0].contains("create step-cap") && rounds[0].contains("FAIL"), "{out}");
    assert!(rounds[1..].iter().all(|r| r.contains("1/1")), "{out}");
    assert!(out.contains("step-cap v1 (evolved:induced-r1)"), "{out}");
    assert!(ws.join("step-cap.v1.skill").exists());
    let (_, again, _) = cli(&["report", logs.to_str().unwrap()]);
    assert_eq!(again, out);
    let (_, audit, _) = cli(&["skills", "audit", "--workspace", ws.to_str().unwrap()]);
    assert!(audit.contains("action=create target=step-cap verdict=accepted"), "{audit}");
    let (_, list, _) = cli(&["skills", "list", "--workspace", ws.to_str().unwrap()]);
    assert!(list.contains("step-cap") && list.contains("evolved:induced-r1"), "{list}");
}

#[test]
fn evolve_without_evolution_leaves_the_workspace_empty() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    let (code, out, _) = cli(&["evolve", "--rounds", "3", "--no-evolution", "--workspace", ws.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(!out.contains("learned skills:"), "{out}");
    let entries: Vec<_> = fs::read_dir(&ws).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(entries, vec![std::ffi::OsString::from("archive")]);
}

#[test]
fn every_combination_runs_from_flags() {
    for task in ["rendezvous", "search", "inspection"] {
        for mode in ["standard", "react", "prospective"] {
            for p in builtin_profiles() {
                for cond in ["C1", "C2", "C3"] {
                    let (code, out, err) =
                        cli(&["run", "--task", task, "--mode", mode, "--profile", &p.name, "--condition", cond]);
                    assert!(code == EXIT_OK || code == EXIT_TASK_FAILED, "{task} {mode} {} {cond}: {out}{err}", p.name);
                }
            }
        }
    }
}

#[test]
fn tool_schema_follows_the_profile() {
    let (_, nav, _) = cli(&["tools", "schema", "--profile", "hybrid-nav"]);
    let (_, vision, _) = cli(&["tools", "schema", "--profile", "vision-only"]);
    assert!(nav.contains("lidar_range"));
    assert!(!vision.contains("lidar_range"));
    serde_json::from_str::<serde_json::Value>(&nav).unwrap();
}

#[test]
fn skills_audit_needs_a_workspace() {
    assert_eq!(cli(&["skills", "audit"]).0, EXIT_CONFIG);
}

#[test]
fn runs_over_the_in_process_bus_match_direct_runs() {
    let dir = tempfile::tempdir().unwrap();
    let bus = write_config(dir.path(), "[bus]\nbackend = \"in-process\"\n");
    let args = ["run", "--task", "search", "--condition", "C2", "--seed", "3", "--json"];
    let (_, direct, _) = cli(&args);
    let mut with_cfg = vec!["-c", bus.as_str()];
    with_cfg.extend_from_slice(&args);
    let (code, over_bus, _) = cli(&with_cfg);
    assert_eq!(code, EXIT_OK);
    assert_eq!(direct, over_bus);
}
