//! Skill files on disk: the hand-authored catalog directory and the learned
//! skill workspace.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use spacemind_core::env::TaskKind;
use spacemind_core::evolution::{AuditLine, LearnedStore, StoreError};
use spacemind_core::skills::{builtin_skill_sources, CatalogError, Skill, SkillCatalog, SkillDefaults};

/// Subdirectories of a catalog root, one per non-learned category.
pub const CATALOG_DIRS: [&str; 4] = ["core", "task", "helper", "mode"];

#[derive(Debug, thiserror::Error)]
pub enum CatalogLoadError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

/// Load `root/{core,task,helper,mode}/*.skill`, in file-name order.
pub fn load_catalog(
    root: &Path,
    defaults: BTreeMap<TaskKind, SkillDefaults>,
) -> Result<SkillCatalog, CatalogLoadError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CatalogLoadError::Io { path, source }
    };
    let mut sources = Vec::new();
    for dir in CATALOG_DIRS {
        let dir = root.join(dir);
        if !dir.is_dir() {
            continue;
        }
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "skill"))
            .collect();
        files.sort();
        for f in files {
            let text = fs::read_to_string(&f).map_err(io_err(&f))?;
            sources.push((f.display().to_string(), text));
        }
    }
    Ok(SkillCatalog::from_sources(sources.iter().map(|(o, t)| (o.as_str(), t.as_str())), defaults)?)
}

/// Write the shipped skill files under `root`, leaving existing files alone.
pub fn write_builtin_catalog(root: &Path) -> io::Result<usize> {
    let mut written = 0;
    for (rel, text) in builtin_skill_sources() {
        let path = root.join(rel);
        if path.exists() {
            continue;
        }
        fs::create_dir_all(path.parent().expect("skill paths have a directory"))?;
        write_atomic(&path, text.as_bytes())?;
        written += 1;
    }
    Ok(written)
}

/// Write via a temporary sibling and rename, so readers never see a torn
/// file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension(format!("{}.tmp", path.extension().and_then(|e| e.to_str()).unwrap_or("")));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Learned-skill workspace: `NAME.vK.skill` holds the current version of
/// each skill, superseded versions move to `archive/`, and `audit.log`
/// collects one line per gate decision.
#[derive(Clone, Debug)]
pub struct FileSkillStore {
    dir: PathBuf,
}

fn write_err(e: impl std::fmt::Display) -> StoreError {
    StoreError::Write(e.to_string())
}

fn read_err(e: impl std::fmt::Display) -> StoreError {
    StoreError::Read(e.to_string())
}

/// `(name, version)` of a file called `NAME.vK.skill`.
fn file_key(path: &Path) -> Option<(String, u32)> {
    let stem = path.file_name()?.to_str()?.strip_suffix(".skill")?;
    let (name, v) = stem.rsplit_once(".v")?;
    Some((name.to_string(), v.parse().ok()?))
}

impl FileSkillStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(dir.join("archive")).map_err(write_err)?;
        Ok(FileSkillStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn audit_path(&self) -> PathBuf {
        self.dir.join("audit.log")
    }

    pub fn skill_path(&self, name: &str, version: u32) -> PathBuf {
        self.dir.join(format!("{name}.v{version}.skill"))
    }

    fn files(&self) -> Result<Vec<(String, u32, PathBuf)>, StoreError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(read_err)? {
            let path = entry.map_err(read_err)?.path();
            if let Some((name, v)) = file_key(&path) {
                out.push((name, v, path));
            }
        }
        out.sort();
        Ok(out)
    }

    /// Every archived version, oldest file name first.
    pub fn archived(&self) -> Result<Vec<Skill>, StoreError> {
        let mut paths: Vec<PathBuf> = fs::read_dir(self.dir.join("archive"))
            .map_err(read_err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_str().is_some_and(|s| s.contains(".skill")))
            .collect();
        paths.sort();
        paths.iter().map(|p| read_skill(p)).collect()
    }

    fn archive(&self, path: &Path) -> Result<(), StoreError> {
        let name = path.file_name().expect("skill file has a name");
        let mut dest = self.dir.join("archive").join(name);
        let mut n = 1;
        while dest.exists() {
            dest = self.dir.join("archive").join(format!("{}.{n}", name.to_string_lossy()));
            n += 1;
        }
        fs::rename(path, dest).map_err(write_err)
    }
}

fn read_skill(path: &Path) -> Result<Skill, StoreError> {
    let text = fs::read_to_string(path).map_err(read_err)?;
    Skill::parse(&text, &path.display().to_string()).map_err(read_err)
}

impl LearnedStore for FileSkillStore {
    fn skills(&self) -> Result<Vec<Skill>, StoreError> {
        // A crash between writing a new version and archiving the old one
        // can leave both; the highest version wins.
        let mut current: BTreeMap<String, PathBuf> = BTreeMap::new();
        for (name, _, path) in self.files()? {
            current.insert(name, path);
        }
        current.values().map(|p| read_skill(p)).collect()
    }

    fn put(&mut self, skill: &Skill) -> Result<(), StoreError> {
        skill.validate().map_err(write_err)?;
        let path = self.skill_path(&skill.name, skill.version);
        let stale: Vec<PathBuf> =
            self.files()?.into_iter().filter(|(n, _, p)| *n == skill.name && *p != path).map(|(_, _, p)| p).collect();
        if path.exists() {
            self.archive(&path)?;
        }
        write_atomic(&path, skill.render().as_bytes()).map_err(write_err)?;
        for p in stale {
            self.archive(&p)?;
        }
        Ok(())
    }

    fn append_audit(&mut self, line: &AuditLine) -> Result<(), StoreError> {
        let mut f = OpenOptions::new().create(true).append(true).open(self.audit_path()).map_err(write_err)?;
        writeln!(f, "{line}").map_err(write_err)?;
        f.sync_data().map_err(write_err)
    }

    fn audit(&self) -> Result<Vec<AuditLine>, StoreError> {
        let text = match fs::read_to_string(self.audit_path()) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(read_err(e)),
        };
        text.lines().filter(|l| !l.trim().is_empty()).map(|l| l.parse().map_err(read_err)).collect()
    }
}
