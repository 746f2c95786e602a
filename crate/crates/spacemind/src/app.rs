//! Everything a command needs, assembled from a validated configuration.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use spacemind_core::bus::Bus;
use spacemind_core::env::{builtin_satellites, SatelliteModel, Simulator};
use spacemind_core::evolution::{LearnedStore, MemoryStore};
use spacemind_core::reasoning::{DecisionProvider, RecordingProvider, ReplayProvider, ScriptedProvider};
use spacemind_core::runner::{
    run_campaign, run_episode, CampaignDeps, CampaignReport, DirectPort, EnvPort, EpisodeConfig, EpisodeDeps,
    EpisodeReport, EpisodeRow, EventSink, NullSink, RunError,
};
use spacemind_core::skills::SkillCatalog;
use spacemind_core::tools::{builtin_catalog, ToolCatalog};

use crate::bus::{BusPort, EnvBridge, InProcessBus, RespBus};
use crate::config::{BusBackend, ConfigError, ProviderChoice, RootConfig};
use crate::logs::{load_satellites, read_transcript, write_transcript, LogDir, LogError};
use crate::remote::RemoteProvider;
use crate::report::{write_manifest, ReportKind};
use crate::store::{load_catalog, FileSkillStore};

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("bus: {0}")]
    Bus(String),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("workspace: {0}")]
    Store(String),
    #[error("episode {episode}: {source}")]
    Episode { episode: String, source: RunError },
}

impl AppError {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 3,
            _ => 4,
        }
    }
}

/// Shorten the trait-object lifetime so the store fits episode deps.
fn reborrow<'a>(store: &'a mut Option<&mut dyn LearnedStore>) -> Option<&'a mut dyn LearnedStore> {
    match store {
        Some(s) => Some(&mut **s),
        None => None,
    }
}

pub type Provider = RecordingProvider<Box<dyn DecisionProvider>>;

pub struct Runtime {
    pub config: RootConfig,
    pub catalog: SkillCatalog,
    pub satellites: Vec<SatelliteModel>,
    pub tools: ToolCatalog,
}

impl Runtime {
    /// Load catalogs and check every name the configuration refers to.
    pub fn new(config: RootConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let catalog = match &config.paths.skills {
            Some(dir) => {
                load_catalog(dir, config.routing_defaults()).map_err(|e| ConfigError::Invalid(e.to_string()))?
            }
            None => SkillCatalog::new(SkillCatalog::builtin().skills().to_vec(), config.routing_defaults())
                .map_err(|e| ConfigError::Invalid(e.to_string()))?,
        };
        let satellites = match &config.paths.satellites {
            Some(p) => load_satellites(p).map_err(|e| ConfigError::Invalid(e.to_string()))?,
            None => builtin_satellites(),
        };
        let names = std::iter::once(&config.defaults.satellite)
            .chain(config.tasks.values().filter_map(|o| o.satellite.as_ref()));
        for name in names {
            if !satellites.iter().any(|s| &s.id == name) {
                return Err(ConfigError::Invalid(format!("unknown satellite `{name}`")));
            }
        }
        if config.provider.kind == ProviderChoice::Remote && config.bus.backend == BusBackend::Direct {
            log::info!("remote provider with the direct port; set bus.backend to use a bus");
        }
        Ok(Runtime { config, catalog, satellites, tools: builtin_catalog() })
    }

    pub fn check_satellite(&self, id: &str) -> Result<(), ConfigError> {
        match self.satellites.iter().any(|s| s.id == id) {
            true => Ok(()),
            false => Err(ConfigError::Invalid(format!("unknown satellite `{id}`"))),
        }
    }

    pub fn simulator(&self) -> Simulator {
        Simulator::new(self.config.sim.clone(), self.satellites.clone())
    }

    /// Environment port for the configured backend, with a fresh simulator.
    pub fn port(&self) -> Result<Box<dyn EnvPort>, AppError> {
        let bus: Arc<dyn Bus> = match self.config.bus.backend {
            BusBackend::Direct => return Ok(Box::new(DirectPort::new(self.simulator()))),
            BusBackend::InProcess => Arc::new(InProcessBus::new()),
            BusBackend::Resp => Arc::new(
                RespBus::connect(&self.config.bus.address, &self.config.bus.namespace)
                    .map_err(|e| AppError::Bus(e.to_string()))?,
            ),
        };
        let bridge = EnvBridge::attach(bus.clone(), self.simulator()).map_err(|e| AppError::Bus(e.to_string()))?;
        Ok(Box::new(BusPort::new(bus, bridge).map_err(|e| AppError::Bus(e.to_string()))?))
    }

    pub fn provider(&self) -> Result<Provider, AppError> {
        let p = &self.config.provider;
        let inner: Box<dyn DecisionProvider> = match p.kind {
            ProviderChoice::Scripted => {
                Box::new(ScriptedProvider::new(p.scripted.clone()).with_catalog(self.catalog.clone()))
            }
            ProviderChoice::Replay => {
                let path = p.transcript.as_ref().expect("validated: replay has a transcript");
                let name = path.file_stem().map_or("transcript".into(), |s| s.to_string_lossy().into_owned());
                Box::new(ReplayProvider::new(&name, read_transcript(path)?))
            }
            ProviderChoice::Remote => Box::new(RemoteProvider::new(&p.remote)),
        };
        Ok(RecordingProvider::new(inner))
    }

    /// Save the provider transcript when the configuration asks for it.
    pub fn save_transcript(&self, provider: &Provider) -> Result<(), AppError> {
        if let Some(path) = &self.config.provider.record {
            write_transcript(path, &provider.transcript)?;
        }
        Ok(())
    }

    pub fn workspace(&self, override_dir: Option<&Path>) -> Result<Option<FileSkillStore>, AppError> {
        match override_dir.map(Path::to_path_buf).or_else(|| self.config.paths.workspace.clone()) {
            Some(dir) => Ok(Some(FileSkillStore::open(dir).map_err(|e| AppError::Store(e.to_string()))?)),
            None => Ok(None),
        }
    }

    /// A log directory named after the command, unless one is given.
    pub fn log_dir(&self, explicit: Option<&Path>, command: &str) -> Option<PathBuf> {
        explicit.map(Path::to_path_buf).or_else(|| {
            let stamp = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_millis());
            self.config.paths.logs.as_ref().map(|d| d.join(format!("{command}-{stamp}")))
        })
    }

    /// One episode. Learned skills are read from `store` when given.
    pub fn run_one(
        &self,
        config: &EpisodeConfig,
        mut store: Option<&mut dyn LearnedStore>,
        sink: &mut dyn EventSink,
    ) -> Result<EpisodeReport, AppError> {
        self.check_satellite(&config.task.satellite_id)?;
        let mut port = self.port()?;
        let mut provider = self.provider()?;
        let report = run_episode(
            config,
            EpisodeDeps {
                port: port.as_mut(),
                provider: &mut provider,
                catalog: &self.catalog,
                tools: &self.tools,
                knowledge: &self.satellites,
                store: reborrow(&mut store),
                history: &[],
                sink: &mut *sink,
            },
        )
        .map_err(|source| AppError::Episode { episode: config.episode_id.clone(), source })?;
        self.save_transcript(&provider)?;
        Ok(report)
    }

    /// Independent episodes (ablations, sweeps) with one port and provider.
    /// An episode that cannot run becomes an error row; the batch goes on.
    pub fn run_batch(
        &self,
        configs: &[EpisodeConfig],
        mut store: Option<&mut dyn LearnedStore>,
        logs: Option<&Path>,
        kind: ReportKind,
    ) -> Result<Vec<EpisodeRow>, AppError> {
        for c in configs {
            self.check_satellite(&c.task.satellite_id)?;
        }
        let mut port = self.port()?;
        let mut provider = self.provider()?;
        let mut log_dir = logs.map(LogDir::create).transpose()?;
        let mut null = NullSink;
        let mut rows = Vec::new();
        for c in configs {
            let sink: &mut dyn EventSink = match log_dir.as_mut() {
                Some(d) => d,
                None => &mut null,
            };
            let result = run_episode(
                c,
                EpisodeDeps {
                    port: port.as_mut(),
                    provider: &mut provider,
                    catalog: &self.catalog,
                    tools: &self.tools,
                    knowledge: &self.satellites,
                    store: reborrow(&mut store),
                    history: &[],
                    sink,
                },
            );
            rows.push(match result {
                Ok(report) => EpisodeRow::from_report(c, &report),
                Err(e) => EpisodeRow::failed(c, e.to_string()),
            });
        }
        self.save_transcript(&provider)?;
        if let Some(d) = log_dir {
            let dir = d.dir().to_path_buf();
            d.finish()?;
            write_manifest(&dir, kind, &[]).map_err(|source| LogError::Io { path: dir, source })?;
        }
        Ok(rows)
    }

    /// Evolution rounds against `store`, or a scratch in-memory store.
    pub fn run_campaign(
        &self,
        group: &[EpisodeConfig],
        rounds: u32,
        store: Option<&mut dyn LearnedStore>,
        logs: Option<&Path>,
    ) -> Result<CampaignReport, AppError> {
        for c in group {
            self.check_satellite(&c.task.satellite_id)?;
        }
        let mut port = self.port()?;
        let mut provider = self.provider()?;
        let mut log_dir = logs.map(LogDir::create).transpose()?;
        let mut null = NullSink;
        let mut scratch = MemoryStore::default();
        let report = run_campaign(
            group,
            rounds,
            CampaignDeps {
                port: port.as_mut(),
                provider: &mut provider,
                catalog: &self.catalog,
                tools: &self.tools,
                knowledge: &self.satellites,
                store: match store {
                    Some(s) => s,
                    None => &mut scratch,
                },
                sink: match log_dir.as_mut() {
                    Some(d) => d,
                    None => &mut null,
                },
            },
        );
        self.save_transcript(&provider)?;
        if let Some(d) = log_dir {
            let dir = d.dir().to_path_buf();
            d.finish()?;
            write_manifest(&dir, ReportKind::Evolve, &report.inventory)
                .map_err(|source| LogError::Io { path: dir, source })?;
        }
        Ok(report)
    }
}
