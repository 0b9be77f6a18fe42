use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::spectral::{read_snapshot, write_snapshot, Snapshot};

/// Environment variable overriding the cache location.
pub const CACHE_ENV: &str = "EXPSTAB_CACHE_DIR";

/// Everything a cached reference depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceKey {
    pub problem: String,
    pub nx: usize,
    pub delta: Option<f64>,
    pub t_end: f64,
    pub times: Vec<f64>,
    pub method: String,
    pub steps: usize,
    pub repartition: Option<String>,
}

impl ReferenceKey {
    /// Canonical text; floats are written exactly.
    pub fn describe(&self) -> String {
        let times: Vec<String> = self.times.iter().map(|t| format!("{t:e}")).collect();
        format!(
            "expstab-reference v1\nproblem={}\nNx={}\ndelta={}\nt_end={:e}\ntimes={}\nmethod={}\nsteps={}\nrepartition={}\n",
            self.problem,
            self.nx,
            self.delta.map(|d| format!("{d:e}")).unwrap_or_else(|| "-".into()),
            self.t_end,
            times.join(","),
            self.method,
            self.steps,
            self.repartition.as_deref().unwrap_or("none")
        )
    }

    pub fn digest(&self) -> String {
        Sha256::digest(self.describe().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Directory of reference entries, one subdirectory per key. Entries are
/// built in a temporary directory and renamed into place, so a visible
/// entry is always complete.
#[derive(Debug, Clone)]
pub struct ReferenceCache {
    root: PathBuf,
}

impl ReferenceCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    /// `$EXPSTAB_CACHE_DIR`, else `$HOME/.cache/expstab`, else
    /// `.expstab-cache`.
    pub fn from_env() -> Self {
        if let Some(dir) = std::env::var_os(CACHE_ENV).filter(|d| !d.is_empty()) {
            return Self::new(dir);
        }
        match std::env::var_os("HOME").filter(|d| !d.is_empty()) {
            Some(home) => Self::new(Path::new(&home).join(".cache").join("expstab")),
            None => Self::new(".expstab-cache"),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entry_dir(&self, key: &ReferenceKey) -> PathBuf {
        self.root.join(key.digest())
    }

    pub fn contains(&self, key: &ReferenceKey) -> bool {
        self.entry_dir(key).join("key.txt").is_file()
    }

    /// The cached spectra, or `None` on a miss.
    pub fn load(&self, key: &ReferenceKey) -> Result<Option<Vec<Snapshot>>> {
        let dir = self.entry_dir(key);
        let Ok(stored) = fs::read_to_string(dir.join("key.txt")) else {
            return Ok(None);
        };
        if stored != key.describe() {
            return Err(Error::Format(format!(
                "cache entry {} does not match its key",
                dir.display()
            )));
        }
        let snaps = (0..key.times.len())
            .map(|i| read_snapshot(&dir.join(sample_name(i))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(snaps))
    }

    /// Publish an entry. If another writer got there first its entry is kept.
    pub fn store(&self, key: &ReferenceKey, snapshots: &[Snapshot]) -> Result<PathBuf> {
        if snapshots.len() != key.times.len() {
            return Err(Error::InvalidArgument(format!(
                "{} snapshots for {} reference times",
                snapshots.len(),
                key.times.len()
            )));
        }
        fs::create_dir_all(&self.root)?;
        let final_dir = self.entry_dir(key);
        let tmp = tempfile::Builder::new()
            .prefix(".partial-")
            .tempdir_in(&self.root)?;
        for (i, s) in snapshots.iter().enumerate() {
            write_snapshot(&tmp.path().join(sample_name(i)), s)?;
        }
        fs::write(tmp.path().join("key.txt"), key.describe())?;
        let tmp_path = tmp.keep();
        if let Err(e) = fs::rename(&tmp_path, &final_dir) {
            let _ = fs::remove_dir_all(&tmp_path);
            if !self.contains(key) {
                return Err(Error::Io(e));
            }
        }
        Ok(final_dir)
    }
}

fn sample_name(i: usize) -> String {
    format!("sample_{i:03}.txt")
}
