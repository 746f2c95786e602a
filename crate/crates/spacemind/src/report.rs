//! Result tables for runs, ablations, sweeps and evolution campaigns.
//!
//! A report is a pure function of its episode rows (plus the learned-skill
//! inventory for campaigns), so rendering it from persisted logs gives the
//! same output as the live run.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use spacemind_core::runner::{Aggregate, EpisodeRow};

use crate::logs::{log_files, replay_log, LogError, SCHEMA_VERSION};

pub const REPORT_SCHEMA: &str = "spacemind.report";
pub const MANIFEST_FILE: &str = "report.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Run,
    Ablate,
    Sweep,
    Evolve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub column: String,
    pub aggregate: Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub labels: Vec<(String, String)>,
    pub cells: Vec<Cell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub version: u32,
    pub kind: ReportKind,
    pub rows: Vec<ReportRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inventory: Vec<String>,
}

/// Stored next to the episode logs of a run so `report` can rebuild it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema: String,
    pub version: u32,
    pub kind: ReportKind,
    #[serde(default)]
    pub inventory: Vec<String>,
}

/// Round number from an `-rN` episode-id suffix.
pub fn round_of(episode_id: &str) -> Option<u32> {
    episode_id.rsplit_once("-r")?.1.parse().ok()
}

/// Distinct values in first-appearance order.
fn distinct<T: PartialEq + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for i in items {
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

fn cells_by<K: PartialEq + Clone + ToString>(rows: &[&EpisodeRow], key: impl Fn(&EpisodeRow) -> K) -> Vec<Cell> {
    distinct(rows.iter().map(|r| key(r)))
        .into_iter()
        .map(|k| {
            let members: Vec<EpisodeRow> = rows.iter().filter(|r| key(r) == k).map(|r| (*r).clone()).collect();
            Cell { column: k.to_string(), aggregate: Aggregate::of(&members) }
        })
        .collect()
}

fn pair(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

impl Report {
    pub fn build(kind: ReportKind, rows: &[EpisodeRow], inventory: Vec<String>) -> Self {
        let all: Vec<&EpisodeRow> = rows.iter().collect();
        let out = match kind {
            ReportKind::Run => all
                .iter()
                .map(|r| ReportRow {
                    labels: vec![
                        pair("episode", &r.episode_id),
                        pair("task", r.task),
                        pair("mode", r.mode),
                        pair("profile", &r.profile),
                        pair("condition", format!("{:?}", r.condition)),
                        pair("ended", r.ended_by.map_or("error".to_string(), |e| format!("{e:?}").to_lowercase())),
                    ],
                    cells: vec![Cell { column: "result".into(), aggregate: Aggregate::of(&[(*r).clone()]) }],
                })
                .collect(),
            // Rows are profiles, columns are tasks.
            ReportKind::Ablate => distinct(all.iter().map(|r| r.profile.clone()))
                .into_iter()
                .map(|p| {
                    let members: Vec<&EpisodeRow> = all.iter().copied().filter(|r| r.profile == p).collect();
                    let owned: Vec<EpisodeRow> = members.iter().map(|r| (*r).clone()).collect();
                    let total = Aggregate::of(&owned);
                    ReportRow {
                        labels: vec![pair("profile", &p), pair("pass", format!("{}/{}", total.passes, total.runs))],
                        cells: cells_by(&members, |r| r.task),
                    }
                })
                .collect(),
            // Rows are (task, mode, profile), columns are conditions.
            ReportKind::Sweep => distinct(all.iter().map(|r| (r.task, r.mode, r.profile.clone())))
                .into_iter()
                .map(|(t, m, p)| {
                    let members: Vec<&EpisodeRow> =
                        all.iter().copied().filter(|r| r.task == t && r.mode == m && r.profile == p).collect();
                    ReportRow {
                        labels: vec![pair("task", t), pair("mode", m), pair("profile", &p)],
                        cells: cells_by(&members, |r| format!("{:?}", r.condition)),
                    }
                })
                .collect(),
            // Rows are rounds, columns are tasks.
            ReportKind::Evolve => distinct(all.iter().map(|r| round_of(&r.episode_id).unwrap_or(0)))
                .into_iter()
                .map(|round| {
                    let members: Vec<&EpisodeRow> =
                        all.iter().copied().filter(|r| round_of(&r.episode_id).unwrap_or(0) == round).collect();
                    let mutations: Vec<String> = members.iter().filter_map(|r| r.mutation.clone()).collect();
                    ReportRow {
                        labels: vec![
                            pair("round", round),
                            pair(
                                "mutations",
                                if mutations.is_empty() { "-".to_string() } else { mutations.join("; ") },
                            ),
                        ],
                        cells: cells_by(&members, |r| r.task),
                    }
                })
                .collect(),
        };
        Report { schema: REPORT_SCHEMA.into(), version: SCHEMA_VERSION, kind, rows: out, inventory }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned text table, then the inventory when there is one.
    pub fn render(&self) -> String {
        let mut header: Vec<String> = Vec::new();
        if let Some(first) = self.rows.first() {
            header.extend(first.labels.iter().map(|(k, _)| k.clone()));
        }
        let columns = distinct(self.rows.iter().flat_map(|r| r.cells.iter().map(|c| c.column.clone())));
        header.extend(columns.iter().cloned());
        let mut table = vec![header];
        for row in &self.rows {
            let mut line: Vec<String> = row.labels.iter().map(|(_, v)| v.clone()).collect();
            for col in &columns {
                line.push(
                    row.cells.iter().find(|c| &c.column == col).map_or("-".into(), |c| format_cell(&c.aggregate)),
                );
            }
            table.push(line);
        }
        let widths: Vec<usize> = (0..table[0].len())
            .map(|i| table.iter().map(|l| l.get(i).map_or(0, |s| s.chars().count())).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for line in &table {
            let cells: Vec<String> = line.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        if !self.inventory.is_empty() {
            let _ = writeln!(out, "\nlearned skills:");
            for i in &self.inventory {
                let _ = writeln!(out, "  {i}");
            }
        }
        out
    }
}

/// `passes/runs`, then the means that exist: distance and steps for
/// navigation, score and steps for inspection. No passes on a navigation
/// cell reads `FAIL`.
pub fn format_cell(a: &Aggregate) -> String {
    let mut s = format!("{}/{}", a.passes, a.runs);
    if let Some(score) = a.mean_score {
        let _ = write!(s, " score={score:.1}");
    } else if a.passes == 0 {
        return format!("FAIL {s}");
    }
    if let Some(d) = a.mean_distance {
        let _ = write!(s, " dist={d:.2}");
    }
    if let Some(st) = a.mean_steps {
        let _ = write!(s, " steps={st:.1}");
    }
    s
}

pub fn write_manifest(dir: &Path, kind: ReportKind, inventory: &[String]) -> std::io::Result<()> {
    let m = Manifest { schema: REPORT_SCHEMA.into(), version: SCHEMA_VERSION, kind, inventory: inventory.to_vec() };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&m).expect("manifest serializes"))
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("{path}: {detail}")]
    Manifest { path: String, detail: String },
}

/// Rebuild a run's report from its log directory.
pub fn report_from_logs(dir: &Path) -> Result<Report, ReportError> {
    let path = dir.join(MANIFEST_FILE);
    let bad = |detail: String| ReportError::Manifest { path: path.display().to_string(), detail };
    let text = fs::read_to_string(&path).map_err(|e| bad(e.to_string()))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    if manifest.schema != REPORT_SCHEMA || manifest.version != SCHEMA_VERSION {
        return Err(bad(format!("unsupported schema {} v{}", manifest.schema, manifest.version)));
    }
    let rows = log_files(dir)?.iter().map(|p| replay_log(p).map(|r| r.row)).collect::<Result<Vec<_>, _>>()?;
    Ok(Report::build(manifest.kind, &rows, manifest.inventory))
}
