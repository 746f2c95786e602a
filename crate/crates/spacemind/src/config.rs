//! The declarative configuration file: paths, defaults, provider, bus,
//! simulator and gate parameters, tool profiles, routing defaults and
//! per-task overrides. Unknown keys are rejected everywhere.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spacemind_core::env::{ConditionId, SimConfig, TaskKind, TaskSpec};
use spacemind_core::evolution::GateConfig;
use spacemind_core::reasoning::{ReasoningMode, ScriptedConfig, DEFAULT_WINDOW};
use spacemind_core::runner::EpisodeConfig;
use spacemind_core::skills::{SkillCatalog, SkillDefaults};
use spacemind_core::tools::{builtin_catalog, builtin_profiles, ToolProfile};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {detail}")]
    Parse { path: PathBuf, detail: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Catalog root with `core/`, `task/`, `helper/`, `mode/`; the shipped
    /// skills when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skills: Option<PathBuf>,
    /// JSON satellite catalog; the built-in five when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub satellites: Option<PathBuf>,
    /// Learned-skill workspace.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workspace: Option<PathBuf>,
    /// Directory for episode logs and reports.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logs: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Defaults {
    pub mode: ReasoningMode,
    pub profile: String,
    pub satellite: String,
    pub condition: ConditionId,
    pub memory_window: usize,
    pub top_k: usize,
    pub seed: u64,
    pub evolution: bool,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            mode: ReasoningMode::Standard,
            profile: "hybrid-nav".into(),
            satellite: "CAPSTONE".into(),
            condition: ConditionId::C1,
            memory_window: DEFAULT_WINDOW,
            top_k: 2,
            seed: 0,
            evolution: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BusBackend {
    /// Call the simulator directly, no bus.
    #[default]
    Direct,
    InProcess,
    Resp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BusConfig {
    pub backend: BusBackend,
    pub address: String,
    pub namespace: String,
}

impl Default for BusConfig {
    fn default() -> Self {
        BusConfig { backend: BusBackend::Direct, address: "127.0.0.1:6379".into(), namespace: "spacemind".into() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderChoice {
    #[default]
    Scripted,
    Replay,
    Remote,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    /// Base URL of an OpenAI-compatible API, e.g. `http://host:8000/v1`.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_s: u64,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: "http://127.0.0.1:8000/v1".into(),
            model: "qwen3-vl-235b".into(),
            api_key_env: "SPACEMIND_API_KEY".into(),
            timeout_s: 60,
            temperature: 0.0,
            max_tokens: 1024,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderChoice,
    /// Transcript to answer from (replay).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transcript: Option<PathBuf>,
    /// Write every answer to this transcript (any provider).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record: Option<PathBuf>,
    pub scripted: ScriptedConfig,
    pub remote: RemoteConfig,
}

/// Per-task settings; anything left out falls back to `[defaults]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ReasoningMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub satellite: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<ConditionId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_range_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory_window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evolution: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RootConfig {
    pub paths: Paths,
    pub defaults: Defaults,
    pub bus: BusConfig,
    pub provider: ProviderConfig,
    pub sim: SimConfig,
    pub gate: GateConfig,
    /// Extra tool profiles, next to the three shipped ones.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub profiles: Vec<ToolProfile>,
    /// Default task and helper skills per task kind.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub routing: BTreeMap<TaskKind, SkillDefaults>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub tasks: BTreeMap<TaskKind, TaskOverrides>,
}

/// Command-line values; they win over per-task settings and defaults.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Flags {
    pub mode: Option<ReasoningMode>,
    pub profile: Option<String>,
    pub condition: Option<ConditionId>,
    pub satellite: Option<String>,
    pub seed: Option<u64>,
    pub max_steps: Option<u32>,
    pub evolution: Option<bool>,
}

impl RootConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: origin.to_path_buf(), detail: e.to_string() })
    }

    /// Load and validate; relative paths are resolved against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut config = Self::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.paths.resolve(base);
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Every profile by name: shipped ones first, then configured ones.
    pub fn all_profiles(&self) -> Vec<ToolProfile> {
        let mut all = builtin_profiles();
        all.retain(|p| !self.profiles.iter().any(|q| q.name == p.name));
        all.extend(self.profiles.iter().cloned());
        all
    }

    pub fn profile(&self, name: &str) -> Result<ToolProfile, ConfigError> {
        self.all_profiles().into_iter().find(|p| p.name == name).ok_or_else(|| {
            let known: Vec<String> = self.all_profiles().into_iter().map(|p| p.name).collect();
            ConfigError::Invalid(format!("unknown profile `{name}` (known: {})", known.join(", ")))
        })
    }

    pub fn routing_defaults(&self) -> BTreeMap<TaskKind, SkillDefaults> {
        let mut d = SkillCatalog::builtin_defaults();
        d.extend(self.routing.clone());
        d
    }

    /// Checks that need no file system: names resolve, numbers are in range.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        let tools = builtin_catalog();
        for p in &self.profiles {
            if let Some(t) = p.allowed.iter().find(|t| tools.get(t).is_none()) {
                return invalid(format!("profile `{}` names unknown tool `{t}`", p.name));
            }
            if !p.allowed.contains(&tools.terminal().name) {
                return invalid(format!("profile `{}` lacks the terminal tool", p.name));
            }
        }
        self.profile(&self.defaults.profile)?;
        if self.defaults.memory_window == 0 {
            return invalid("defaults.memory_window must be >= 1".into());
        }
        if self.defaults.top_k == 0 {
            return invalid("defaults.top_k must be >= 1".into());
        }
        for (kind, o) in &self.tasks {
            if let Some(p) = &o.profile {
                self.profile(p).map_err(|e| ConfigError::Invalid(format!("tasks.{kind}: {e}")))?;
            }
            if o.max_steps == Some(0) {
                return invalid(format!("tasks.{kind}.max_steps must be >= 1"));
            }
            if o.memory_window == Some(0) {
                return invalid(format!("tasks.{kind}.memory_window must be >= 1"));
            }
            if o.start_range_m.is_some_and(|r| r.is_nan() || r <= 0.0) {
                return invalid(format!("tasks.{kind}.start_range_m must be > 0"));
            }
        }
        if self.provider.kind == ProviderChoice::Replay && self.provider.transcript.is_none() {
            return invalid("provider.kind = \"replay\" needs provider.transcript".into());
        }
        let s = &self.provider.scripted;
        if !(s.min_step_m > 0.0 && s.min_step_m <= s.step_cap_m && s.step_cap_m <= self.sim.max_step_translation_m) {
            return invalid(
                "provider.scripted needs 0 < min_step_m <= step_cap_m <= sim.max_step_translation_m".into(),
            );
        }
        if !(self.sim.half_fov_deg > 0.0 && self.sim.half_fov_deg < 90.0) {
            return invalid("sim.half_fov_deg must lie in (0, 90)".into());
        }
        if !(self.sim.gain_min > 0.0 && self.sim.gain_min < self.sim.gain_max) {
            return invalid("sim needs 0 < gain_min < gain_max".into());
        }
        SkillCatalog::new(SkillCatalog::builtin().skills().to_vec(), self.routing_defaults())
            .map_err(|e| ConfigError::Invalid(format!("routing: {e}")))?;
        Ok(())
    }

    /// Resolve one episode: flags, then `[tasks.KIND]`, then `[defaults]`.
    pub fn episode(&self, kind: TaskKind, flags: &Flags, episode_id: &str) -> Result<EpisodeConfig, ConfigError> {
        let o = self.tasks.get(&kind).cloned().unwrap_or_default();
        let d = &self.defaults;
        let satellite = flags.satellite.clone().or(o.satellite).unwrap_or_else(|| d.satellite.clone());
        let condition = flags.condition.or(o.condition).unwrap_or(d.condition);
        let mut task = TaskSpec::new(kind, &satellite, condition);
        if let Some(desc) = o.description {
            task.description = desc;
        }
        if let Some(n) = flags.max_steps.or(o.max_steps) {
            task.max_steps = n;
        }
        if let Some(r) = o.start_range_m {
            task.start_range_m = r;
        }
        let profile = self.profile(flags.profile.as_deref().or(o.profile.as_deref()).unwrap_or(&d.profile))?;
        let mode = flags.mode.or(o.mode).unwrap_or(d.mode);
        let mut config = EpisodeConfig::new(episode_id, task, mode, profile);
        config.memory_window = o.memory_window.unwrap_or(d.memory_window);
        config.seed = flags.seed.unwrap_or(d.seed);
        config.evolution = flags.evolution.or(o.evolution).unwrap_or(d.evolution);
        config.top_k = d.top_k;
        config.gate = self.gate.clone();
        config.validate(&builtin_catalog()).map_err(ConfigError::Invalid)?;
        Ok(config)
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        for p in [&mut self.skills, &mut self.satellites, &mut self.workspace, &mut self.logs].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}
