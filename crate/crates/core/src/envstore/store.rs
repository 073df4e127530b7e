use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::{deserialize, serialize, EnvError, EnvironmentSnapshot};

/// Environment variable naming the default store directory.
pub const ENV_DIR_VAR: &str = "PSG_ENV_DIR";

const PREFIX: &str = "env-";
const SUFFIX: &str = ".json";

/// Directory of `env-<version>.json` documents. Writers publish through a
/// temporary file and a rename, so readers only ever see complete documents.
#[derive(Debug, Clone)]
pub struct EnvStore {
    dir: PathBuf,
    keep: usize,
}

impl EnvStore {
    /// Opens (and creates) `dir`, keeping the newest `keep` documents.
    pub fn open(dir: impl Into<PathBuf>, keep: usize) -> Result<Self, EnvError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, keep: keep.max(1) })
    }

    /// Store at `$PSG_ENV_DIR`, if set.
    pub fn from_env(keep: usize) -> Option<Result<Self, EnvError>> {
        std::env::var_os(ENV_DIR_VAR).map(|d| Self::open(PathBuf::from(d), keep))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, version: u64) -> PathBuf {
        self.dir.join(format!("{PREFIX}{version:020}{SUFFIX}"))
    }

    /// Versions present on disk, newest first, whether readable or not.
    pub fn versions(&self) -> Result<Vec<u64>, EnvError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let name = entry?.file_name();
            let Some(name) = name.to_str() else { continue };
            if let Some(v) = name.strip_prefix(PREFIX).and_then(|n| n.strip_suffix(SUFFIX)) {
                if let Ok(v) = v.parse::<u64>() {
                    out.push(v);
                }
            }
        }
        out.sort_unstable_by(|a, b| b.cmp(a));
        Ok(out)
    }

    /// Writes `snapshot` atomically. Its version must exceed every version
    /// already on disk.
    pub fn publish(&self, snapshot: &EnvironmentSnapshot) -> Result<PathBuf, EnvError> {
        if let Some(&newest) = self.versions()?.first() {
            if snapshot.version <= newest {
                return Err(EnvError::VersionRegression { current: newest, got: snapshot.version });
            }
        }
        let bytes = serialize(snapshot)?;
        let mut tmp = tempfile::Builder::new().prefix(".env-").suffix(".tmp").tempfile_in(&self.dir)?;
        tmp.write_all(&bytes)?;
        tmp.as_file().sync_all()?;
        let target = self.path_for(snapshot.version);
        tmp.persist(&target).map_err(|e| EnvError::Io(e.error))?;
        self.prune()?;
        Ok(target)
    }

    fn prune(&self) -> Result<(), EnvError> {
        for v in self.versions()?.into_iter().skip(self.keep) {
            // a concurrent reader may still be opening it; absence is fine
            let _ = fs::remove_file(self.path_for(v));
        }
        Ok(())
    }

    /// Highest-version readable document. Corrupt or vanished files are
    /// skipped with a warning.
    pub fn latest(&self) -> Result<Option<Arc<EnvironmentSnapshot>>, EnvError> {
        for v in self.versions()? {
            let path = self.path_for(v);
            let bytes = match fs::read(&path) {
                Ok(b) => b,
                Err(e) => {
                    log::warn!("skipping {}: {e}", path.display());
                    continue;
                }
            };
            match deserialize(&bytes) {
                Ok(s) if s.version == v => return Ok(Some(Arc::new(s))),
                Ok(s) => log::warn!("skipping {}: document claims version {}", path.display(), s.version),
                Err(e) => log::warn!("skipping {}: {e}", path.display()),
            }
        }
        Ok(None)
    }

    /// A snapshot newer than `current`, `None` if nothing newer exists.
    /// A readable store whose newest document is older than `current` is a
    /// regression.
    pub fn load_newer(&self, current: Option<u64>) -> Result<Option<Arc<EnvironmentSnapshot>>, EnvError> {
        let Some(snap) = self.latest()? else { return Ok(None) };
        match current {
            Some(c) if snap.version < c => Err(EnvError::VersionRegression { current: c, got: snap.version }),
            Some(c) if snap.version == c => Ok(None),
            _ => Ok(Some(snap)),
        }
    }
}
