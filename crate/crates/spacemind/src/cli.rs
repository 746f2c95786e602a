//! Command-line front end. [`main`] returns the process exit code:
//! 0 success, 2 task failure, 3 configuration error, 4 episode error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use spacemind_core::env::{ConditionId, TaskKind};
use spacemind_core::evolution::LearnedStore;
use spacemind_core::reasoning::ReasoningMode;
use spacemind_core::runner::{induced_failure_group, EndReason, EpisodeConfig, EpisodeRow, NullSink};
use spacemind_core::skills::SkillCategory;
use spacemind_core::tools::{mcp_schema, visible_tools};

use crate::app::{AppError, Runtime};
use crate::config::{ConfigError, Flags, RootConfig};
use crate::logs::{FileSink, Tee};
use crate::report::{report_from_logs, Report, ReportKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TASK_FAILED: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_EPISODE: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "spacemind", version, about = "Closed-loop space proximity-operations agent")]
pub struct Cli {
    /// Configuration file (TOML). Built-in defaults when omitted.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one episode.
    Run(RunArgs),
    /// Compare tool profiles over a task matrix.
    Ablate(AblateArgs),
    /// Sweep modes and initial conditions.
    Sweep(SweepArgs),
    /// Run self-evolution rounds over a shared workspace.
    Evolve(EvolveArgs),
    /// Re-render a report from a log directory.
    Report(ReportArgs),
    /// Inspect learned skills and the gate audit log.
    #[command(subcommand)]
    Skills(SkillsCommand),
    /// Show tool schemas.
    #[command(subcommand)]
    Tools(ToolsCommand),
    /// Show the effective configuration.
    #[command(subcommand)]
    Config(ConfigCommand),
}

#[derive(Args, Debug, Default)]
pub struct Overrides {
    #[arg(long)]
    pub mode: Option<ReasoningMode>,
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub condition: Option<ConditionId>,
    #[arg(long)]
    pub satellite: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_steps: Option<u32>,
}

impl Overrides {
    fn flags(&self) -> Flags {
        Flags {
            mode: self.mode,
            profile: self.profile.clone(),
            condition: self.condition,
            satellite: self.satellite.clone(),
            seed: self.seed,
            max_steps: self.max_steps,
            evolution: None,
        }
    }
}

#[derive(Args, Debug)]
pub struct Output {
    /// Directory for episode logs (default: under `paths.logs`).
    #[arg(long)]
    pub logs: Option<PathBuf>,
    /// Print the machine-readable report instead of the table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long)]
    pub task: TaskKind,
    #[command(flatten)]
    pub over: Overrides,
    /// Reflect and evolve after the episode.
    #[arg(long)]
    pub evolve: bool,
    /// Learned-skill workspace (default: `paths.workspace`).
    #[arg(long)]
    pub workspace: Option<PathBuf>,
    #[arg(long)]
    pub episode_id: Option<String>,
    /// Write the event log to this file.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    /// Profiles to compare (default: every known profile).
    #[arg(long, value_delimiter = ',')]
    pub profiles: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values = ["rendezvous", "search"])]
    pub tasks: Vec<TaskKind>,
    /// Seeds per cell, counted from `--seed` (or the configured seed).
    #[arg(long, default_value_t = 1)]
    pub runs: u64,
    #[command(flatten)]
    pub over: Overrides,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_values = ["rendezvous"])]
    pub tasks: Vec<TaskKind>,
    #[arg(long, value_delimiter = ',', default_values = ["standard", "react", "prospective"])]
    pub modes: Vec<ReasoningMode>,
    #[arg(long, value_delimiter = ',', default_values = ["C1", "C2", "C3"])]
    pub conditions: Vec<ConditionId>,
    #[arg(long, default_value_t = 5)]
    pub runs: u64,
    #[command(flatten)]
    pub over: Overrides,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Args, Debug)]
pub struct EvolveArgs {
    /// `induced` for the built-in failing group, or comma-separated tasks.
    #[arg(long, default_value = "induced")]
    pub group: String,
    #[arg(long, default_value_t = 5)]
    pub rounds: u32,
    /// Run the rounds without reflection (a control group).
    #[arg(long)]
    pub no_evolution: bool,
    #[arg(long)]
    pub workspace: Option<PathBuf>,
    #[command(flatten)]
    pub over: Overrides,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    pub dir: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Subcommand, Debug)]
pub enum SkillsCommand {
    /// Hand-authored and learned skills.
    List {
        #[arg(long)]
        workspace: Option<PathBuf>,
    },
    /// Gate decisions recorded in the workspace.
    Audit {
        #[arg(long)]
        workspace: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum ToolsCommand {
    /// Tool descriptors visible under a profile, as JSON.
    Schema {
        #[arg(long)]
        profile: Option<String>,
    },
}

#[derive(Subcommand, Debug)]
pub enum ConfigCommand {
    /// Validate the configuration and print it in full, defaults included.
    Show,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    App(#[from] AppError),
    #[error("{0}")]
    Usage(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::App(AppError::Config(e))
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::App(e) => e.exit_code(),
            CliError::Usage(_) => EXIT_CONFIG,
        }
    }
}

/// Parse `args` (program name first) and run. Output goes to `out`,
/// diagnostics to `err`.
pub fn main<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RootConfig, ConfigError> {
    match path {
        Some(p) => RootConfig::load(p),
        None => {
            let c = RootConfig::default();
            c.validate()?;
            Ok(c)
        }
    }
}

fn io(e: std::io::Error) -> CliError {
    CliError::App(AppError::Store(e.to_string()))
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let config = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Run(a) => cmd_run(Runtime::new(config)?, a, out),
        Command::Ablate(a) => cmd_ablate(Runtime::new(config)?, a, out),
        Command::Sweep(a) => cmd_sweep(Runtime::new(config)?, a, out),
        Command::Evolve(a) => cmd_evolve(config, a, out),
        Command::Report(a) => {
            let report = report_from_logs(&a.dir).map_err(|e| CliError::Usage(e.to_string()))?;
            print_report(&report, a.json, out)?;
            Ok(EXIT_OK)
        }
        Command::Skills(c) => cmd_skills(Runtime::new(config)?, c, out),
        Command::Tools(ToolsCommand::Schema { profile }) => {
            let rt = Runtime::new(config)?;
            let name = profile.clone().unwrap_or_else(|| rt.config.defaults.profile.clone());
            let p = rt.config.profile(&name)?;
            let schema = mcp_schema(&visible_tools(&rt.tools, &p));
            writeln!(out, "{}", serde_json::to_string_pretty(&schema).expect("schema serializes")).map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::Config(ConfigCommand::Show) => {
            Runtime::new(config.clone())?;
            write!(out, "{}", config.to_toml()).map_err(io)?;
            Ok(EXIT_OK)
        }
    }
}

fn print_report(report: &Report, json: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let text = if json { report.to_json() + "\n" } else { report.render() };
    out.write_all(text.as_bytes()).map_err(io)
}

/// One-line outcome summary.
pub fn summary_line(row: &EpisodeRow) -> String {
    let Some(o) = &row.outcome else {
        return format!("error {}", row.error.as_deref().unwrap_or("episode did not run"));
    };
    let verdict = match row.ended_by {
        Some(EndReason::Error) => "error",
        _ if o.passed() => "success",
        _ => "failure",
    };
    let mut s = verdict.to_string();
    if let Some(d) = o.terminal_distance {
        s.push_str(&format!(" dist={d:.2}"));
    }
    if let Some(score) = o.score {
        s.push_str(&format!(" score={score:.1}"));
    }
    s.push_str(&format!(" steps={}", o.steps));
    if verdict != "success" {
        s.push_str(&format!(" reason={}", row.error.as_deref().unwrap_or(&o.reason)));
    }
    s
}

fn cmd_run(rt: Runtime, a: &RunArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut flags = a.over.flags();
    flags.evolution = a.evolve.then_some(true);
    let id =
        a.episode_id.clone().unwrap_or_else(|| format!("{}-{}", a.task, flags.seed.unwrap_or(rt.config.defaults.seed)));
    let config = rt.config.episode(a.task, &flags, &id)?;
    let mut store = rt.workspace(a.workspace.as_deref())?;
    if config.evolution && store.is_none() {
        return Err(CliError::Usage("--evolve needs a workspace (--workspace or paths.workspace)".into()));
    }
    let mut events = Vec::new();
    let mut file = a.log.as_deref().map(FileSink::create).transpose().map_err(AppError::from)?;
    let report = {
        let mut null = NullSink;
        let log: &mut dyn spacemind_core::runner::EventSink = match file.as_mut() {
            Some(f) => f,
            None => &mut null,
        };
        let mut tee = Tee(&mut events, log);
        rt.run_one(&config, store.as_mut().map(|s| s as &mut dyn LearnedStore), &mut tee)?
    };
    if let Some(f) = file {
        f.finish().map_err(AppError::from)?;
    }
    let row = EpisodeRow::from_report(&config, &report);
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("report serializes")).map_err(io)?;
    } else {
        writeln!(out, "{}", summary_line(&row)).map_err(io)?;
        if let Some(m) = &row.mutation {
            writeln!(out, "evolution: {m}").map_err(io)?;
        }
    }
    Ok(match report.trajectory.ended_by {
        EndReason::Error => EXIT_EPISODE,
        _ if report.outcome.passed() => EXIT_OK,
        _ => EXIT_TASK_FAILED,
    })
}

fn seeds(base: u64, runs: u64) -> impl Iterator<Item = u64> {
    base..base + runs.max(1)
}

/// Run a batch, write its report, and map errors to the exit code.
fn finish_batch(
    rt: &Runtime,
    configs: Vec<EpisodeConfig>,
    kind: ReportKind,
    o: &Output,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let logs = rt.log_dir(
        o.logs.as_deref(),
        match kind {
            ReportKind::Ablate => "ablate",
            _ => "sweep",
        },
    );
    let rows = rt.run_batch(&configs, None, logs.as_deref(), kind)?;
    print_report(&Report::build(kind, &rows, Vec::new()), o.json, out)?;
    if let Some(dir) = logs {
        log::info!("episode logs in {}", dir.display());
    }
    Ok(if rows.iter().any(|r| r.outcome.is_none() || r.ended_by == Some(EndReason::Error)) {
        EXIT_EPISODE
    } else {
        EXIT_OK
    })
}

fn cmd_ablate(rt: Runtime, a: &AblateArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let profiles = match a.profiles.is_empty() {
        true => rt.config.all_profiles().into_iter().map(|p| p.name).collect(),
        false => a.profiles.clone(),
    };
    let mut configs = Vec::new();
    for p in &profiles {
        for task in &a.tasks {
            for seed in seeds(a.over.seed.unwrap_or(rt.config.defaults.seed), a.runs) {
                let flags = Flags { profile: Some(p.clone()), seed: Some(seed), ..a.over.flags() };
                configs.push(rt.config.episode(*task, &flags, &format!("{p}-{task}-s{seed}"))?);
            }
        }
    }
    finish_batch(&rt, configs, ReportKind::Ablate, &a.out, out)
}

fn cmd_sweep(rt: Runtime, a: &SweepArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut configs = Vec::new();
    for task in &a.tasks {
        for mode in &a.modes {
            for cond in &a.conditions {
                for seed in seeds(a.over.seed.unwrap_or(rt.config.defaults.seed), a.runs) {
                    let flags = Flags { mode: Some(*mode), condition: Some(*cond), seed: Some(seed), ..a.over.flags() };
                    configs.push(rt.config.episode(*task, &flags, &format!("{task}-{mode}-{cond:?}-s{seed}"))?);
                }
            }
        }
    }
    finish_batch(&rt, configs, ReportKind::Sweep, &a.out, out)
}

fn cmd_evolve(mut config: RootConfig, a: &EvolveArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    if a.rounds == 0 {
        return Err(CliError::Usage("--rounds must be >= 1".into()));
    }
    let group: Vec<EpisodeConfig> = if a.group == "induced" {
        let profile = config.profile(a.over.profile.as_deref().unwrap_or(&config.defaults.profile))?;
        let induced = induced_failure_group(profile);
        config.provider.scripted = induced.scripted;
        config.sim = induced.sim;
        let mut c = induced.config;
        if let Some(m) = a.over.mode {
            c.mode = m;
        }
        vec![c]
    } else {
        let tasks: Vec<TaskKind> = a
            .group
            .split(',')
            .map(|t| t.trim().parse::<TaskKind>())
            .collect::<Result<_, _>>()
            .map_err(CliError::Usage)?;
        tasks.iter().map(|t| config.episode(*t, &a.over.flags(), &format!("{t}"))).collect::<Result<_, _>>()?
    };
    let group: Vec<EpisodeConfig> = group
        .into_iter()
        .map(|mut c| {
            c.evolution = !a.no_evolution;
            c
        })
        .collect();
    let rt = Runtime::new(config)?;
    let mut store = rt.workspace(a.workspace.as_deref())?;
    let logs = rt.log_dir(a.out.logs.as_deref(), "evolve");
    let report =
        rt.run_campaign(&group, a.rounds, store.as_mut().map(|s| s as &mut dyn LearnedStore), logs.as_deref())?;
    let rows: Vec<EpisodeRow> = report.rounds.iter().flat_map(|r| r.episodes.clone()).collect();
    print_report(&Report::build(ReportKind::Evolve, &rows, report.inventory.clone()), a.out.json, out)?;
    Ok(if rows.iter().any(|r| r.outcome.is_none()) { EXIT_EPISODE } else { EXIT_OK })
}

fn cmd_skills(rt: Runtime, c: &SkillsCommand, out: &mut dyn Write) -> Result<i32, CliError> {
    match c {
        SkillsCommand::List { workspace } => {
            for s in rt.catalog.skills() {
                let state = if s.enabled { "" } else { " (disabled)" };
                writeln!(out, "{:<8} {:<24} v{} {}{state}", s.category, s.name, s.version, s.routing_summary)
                    .map_err(io)?;
            }
            if let Some(store) = rt.workspace(workspace.as_deref())? {
                for s in store.skills().map_err(|e| AppError::Store(e.to_string()))? {
                    let state = if s.enabled { "" } else { ", disabled" };
                    let scope: Vec<&str> = s.scope.iter().map(|k| k.as_str()).collect();
                    writeln!(
                        out,
                        "{:<8} {:<24} v{} ({}{state}) scope={}",
                        SkillCategory::Learned,
                        s.name,
                        s.version,
                        s.provenance,
                        scope.join(",")
                    )
                    .map_err(io)?;
                }
            }
        }
        SkillsCommand::Audit { workspace } => {
            let store = rt
                .workspace(workspace.as_deref())?
                .ok_or_else(|| CliError::Usage("no workspace (--workspace or paths.workspace)".into()))?;
            for line in store.audit().map_err(|e| AppError::Store(e.to_string()))? {
                writeln!(out, "{line}").map_err(io)?;
            }
        }
    }
    Ok(EXIT_OK)
}
