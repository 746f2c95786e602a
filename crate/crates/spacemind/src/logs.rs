//! Line-oriented JSON files: episode event logs, provider transcripts and
//! satellite catalogs.
//!
//! Every JSONL file opens with a header line naming its schema and version.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use spacemind_core::env::SatelliteModel;
use spacemind_core::reasoning::TranscriptEntry;
use spacemind_core::runner::{replay_events, Event, EventSink, ReplayError, ReplayedEpisode};

pub const EVENT_SCHEMA: &str = "spacemind.events";
pub const TRANSCRIPT_SCHEMA: &str = "spacemind.transcript";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub schema: String,
    pub version: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {detail}")]
    Parse { path: PathBuf, line: usize, detail: String },
    #[error("{path}: {source}")]
    Replay { path: PathBuf, source: ReplayError },
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> LogError + '_ {
    move |source| LogError::Io { path: path.to_path_buf(), source }
}

/// Writes one JSON value per line and flushes after each, so a crash loses
/// at most the line being written.
pub struct JsonlWriter<W: Write> {
    out: W,
}

impl<W: Write> JsonlWriter<W> {
    pub fn new(mut out: W, schema: &str) -> io::Result<Self> {
        let header = Header { schema: schema.to_string(), version: SCHEMA_VERSION };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(JsonlWriter { out })
    }

    pub fn write<T: Serialize>(&mut self, value: &T) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, value)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Read a JSONL file written by [`JsonlWriter`] with the given schema.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<T>, LogError> {
    let file = File::open(path).map_err(io_at(path))?;
    let parse = |line: usize, detail: String| LogError::Parse { path: path.to_path_buf(), line, detail };
    let mut lines = BufReader::new(file).lines().enumerate();
    let header: Header = match lines.next() {
        Some((_, l)) => {
            serde_json::from_str(&l.map_err(io_at(path))?).map_err(|e| parse(1, format!("bad header: {e}")))?
        }
        None => return Err(parse(1, "empty file".into())),
    };
    if header.schema != schema || header.version != SCHEMA_VERSION {
        return Err(parse(
            1,
            format!("expected {schema} v{SCHEMA_VERSION}, found {} v{}", header.schema, header.version),
        ));
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(io_at(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| parse(i + 1, e.to_string()))?);
    }
    Ok(out)
}

/// Event sink backed by a JSONL file. Write failures are remembered and
/// reported by [`FileSink::finish`]; the episode itself carries on.
pub struct FileSink {
    path: PathBuf,
    writer: JsonlWriter<BufWriter<File>>,
    error: Option<io::Error>,
}

impl FileSink {
    pub fn create(path: &Path) -> Result<Self, LogError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_at(dir))?;
        }
        let file = File::create(path).map_err(io_at(path))?;
        let writer = JsonlWriter::new(BufWriter::new(file), EVENT_SCHEMA).map_err(io_at(path))?;
        Ok(FileSink { path: path.to_path_buf(), writer, error: None })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn finish(self) -> Result<PathBuf, LogError> {
        match self.error {
            Some(source) => Err(LogError::Io { path: self.path, source }),
            None => Ok(self.path),
        }
    }
}

impl EventSink for FileSink {
    fn event(&mut self, event: &Event) {
        if self.error.is_some() {
            return;
        }
        if let Err(e) = self.writer.write(event) {
            log::error!("event log {} stopped: {e}", self.path.display());
            self.error = Some(e);
        }
    }
}

/// Fans events out to two sinks.
pub struct Tee<'a>(pub &'a mut dyn EventSink, pub &'a mut dyn EventSink);

impl EventSink for Tee<'_> {
    fn event(&mut self, event: &Event) {
        self.0.event(event);
        self.1.event(event);
    }
}

/// File name of the `index`-th episode of a run; the index keeps directory
/// order equal to execution order.
pub fn episode_log_name(index: usize, episode_id: &str) -> String {
    format!("{index:04}-{episode_id}.jsonl")
}

pub fn read_events(path: &Path) -> Result<Vec<Event>, LogError> {
    read_jsonl(path, EVENT_SCHEMA)
}

pub fn replay_log(path: &Path) -> Result<ReplayedEpisode, LogError> {
    replay_events(&read_events(path)?).map_err(|source| LogError::Replay { path: path.to_path_buf(), source })
}

/// Every `*.jsonl` episode log directly under `dir`, in file-name order.
pub fn log_files(dir: &Path) -> Result<Vec<PathBuf>, LogError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_at(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn write_transcript(path: &Path, entries: &[TranscriptEntry]) -> Result<(), LogError> {
    let file = File::create(path).map_err(io_at(path))?;
    let mut w = JsonlWriter::new(BufWriter::new(file), TRANSCRIPT_SCHEMA).map_err(io_at(path))?;
    for e in entries {
        w.write(e).map_err(io_at(path))?;
    }
    Ok(())
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptEntry>, LogError> {
    read_jsonl(path, TRANSCRIPT_SCHEMA)
}

/// Satellite catalog: a JSON array of satellite models, each validated.
pub fn load_satellites(path: &Path) -> Result<Vec<SatelliteModel>, LogError> {
    let text = fs::read_to_string(path).map_err(io_at(path))?;
    let parse = |detail: String| LogError::Parse { path: path.to_path_buf(), line: 0, detail };
    let sats: Vec<SatelliteModel> = serde_json::from_str(&text).map_err(|e| parse(e.to_string()))?;
    if sats.is_empty() {
        return Err(parse("catalog is empty".into()));
    }
    for (i, s) in sats.iter().enumerate() {
        s.validate().map_err(parse)?;
        if sats[..i].iter().any(|o| o.id == s.id) {
            return Err(parse(format!("duplicate satellite `{}`", s.id)));
        }
    }
    Ok(sats)
}

/// Event sink for a whole run: every `Init` event starts a new episode file
/// under `dir`, numbered in execution order.
pub struct LogDir {
    dir: PathBuf,
    next: usize,
    current: Option<FileSink>,
    written: Vec<PathBuf>,
    error: Option<LogError>,
}

impl LogDir {
    pub fn create(dir: &Path) -> Result<Self, LogError> {
        fs::create_dir_all(dir).map_err(io_at(dir))?;
        let next = log_files(dir)?.len();
        Ok(LogDir { dir: dir.to_path_buf(), next, current: None, written: Vec::new(), error: None })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn close(&mut self) {
        if let Some(sink) = self.current.take() {
            match sink.finish() {
                Ok(p) => self.written.push(p),
                Err(e) => self.error = self.error.take().or(Some(e)),
            }
        }
    }

    /// Close the last file; returns every file written, in order.
    pub fn finish(mut self) -> Result<Vec<PathBuf>, LogError> {
        self.close();
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.written),
        }
    }
}

impl EventSink for LogDir {
    fn event(&mut self, event: &Event) {
        if let Event::Init { episode_id, .. } = event {
            self.close();
            let path = self.dir.join(episode_log_name(self.next, episode_id));
            self.next += 1;
            match FileSink::create(&path) {
                Ok(s) => self.current = Some(s),
                Err(e) => {
                    log::error!("cannot open event log: {e}");
                    self.error = self.error.take().or(Some(e));
                }
            }
        }
        if let Some(sink) = self.current.as_mut() {
            sink.event(event);
        }
    }
}
