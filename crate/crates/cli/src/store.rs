use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dipolar_sense::chain::ChainConfig;
use dipolar_sense::varopt::{CellSettings, DecoderTier, RunKey, RunRecord, SCHEMA_VERSION};

pub const MANIFEST: &str = "manifest.json";

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("writing into {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(value)?;
    text.push(b'\n');
    write_atomic(path, &text)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `L{L}_N{N}_{tier}/seed{seed}.json`, relative to the output directory.
pub fn record_path(key: &RunKey) -> PathBuf {
    PathBuf::from(key.cell.label()).join(format!("seed{}.json", key.seed))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub layers: usize,
    pub n_spins: usize,
    pub tier: DecoderTier,
    pub seed: u64,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ManifestEntry {
    pub fn key(&self) -> RunKey {
        RunKey {
            cell: dipolar_sense::varopt::Cell::new(self.layers, self.n_spins, self.tier),
            seed: self.seed,
        }
    }

    fn new(key: &RunKey, status: Status) -> Self {
        Self {
            layers: key.cell.layers,
            n_spins: key.cell.n_spins,
            tier: key.cell.tier,
            seed: key.seed,
            status,
            path: None,
            sha256: None,
            error: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub entries: Vec<ManifestEntry>,
}

impl Default for Manifest {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            entries: Vec::new(),
        }
    }
}

impl Manifest {
    pub fn load(out: &Path) -> Result<Self> {
        let path = out.join(MANIFEST);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let m: Manifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if m.schema_version != SCHEMA_VERSION {
            bail!(
                "{} has schema version {}, this build reads {SCHEMA_VERSION}",
                path.display(),
                m.schema_version
            );
        }
        Ok(m)
    }

    pub fn load_or_default(out: &Path) -> Result<Self> {
        if out.join(MANIFEST).exists() {
            Self::load(out)
        } else {
            Ok(Self::default())
        }
    }

    fn upsert(&mut self, entry: ManifestEntry) {
        let key = entry.key();
        match self.entries.iter_mut().find(|e| e.key() == key) {
            Some(e) => *e = entry,
            None => self.entries.push(entry),
        }
        self.entries.sort_by_key(ManifestEntry::key);
    }

    pub fn ok_entries(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.status == Status::Ok)
    }
}

/// Owns the manifest on disk. Every update rewrites the file atomically while
/// holding the lock, so concurrent lineages never interleave writes.
pub struct ManifestWriter {
    out: PathBuf,
    state: Mutex<Manifest>,
}

impl ManifestWriter {
    pub fn new(out: &Path, manifest: Manifest) -> Self {
        Self {
            out: out.to_path_buf(),
            state: Mutex::new(manifest),
        }
    }

    fn update(&self, entry: ManifestEntry) -> Result<()> {
        let mut m = self.state.lock().expect("manifest lock");
        m.upsert(entry);
        write_json(&self.out.join(MANIFEST), &*m)
    }

    /// Writes the record file, then registers it.
    pub fn record(&self, record: &RunRecord) -> Result<()> {
        let key = RunKey::of(record);
        let rel = record_path(&key);
        let mut bytes = serde_json::to_vec_pretty(record)?;
        bytes.push(b'\n');
        write_atomic(&self.out.join(&rel), &bytes)?;
        let mut e = ManifestEntry::new(&key, Status::Ok);
        e.path = Some(rel.to_string_lossy().replace('\\', "/"));
        e.sha256 = Some(sha256_hex(&bytes));
        self.update(e)
    }

    pub fn failure(&self, key: &RunKey, error: &str) -> Result<()> {
        let mut e = ManifestEntry::new(key, Status::Failed);
        e.error = Some(error.to_string());
        self.update(e)
    }

    pub fn into_inner(self) -> Manifest {
        self.state.into_inner().expect("manifest lock")
    }
}

/// Reads one record, checking its checksum against the manifest and its
/// schema version against this build.
pub fn load_record(out: &Path, entry: &ManifestEntry) -> Result<RunRecord> {
    let rel = entry.path.as_deref().context("manifest entry without path")?;
    let path = out.join(rel);
    let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(want) = &entry.sha256 {
        let got = sha256_hex(&bytes);
        if &got != want {
            bail!("{}: checksum {got} does not match manifest {want}", path.display());
        }
    }
    let value: serde_json::Value =
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(v) => bail!(
            "{}: schema version {v}, this build reads {SCHEMA_VERSION}",
            path.display()
        ),
        None => bail!("{}: no schema_version field", path.display()),
    }
    let record: RunRecord = serde_json::from_value(value).with_context(|| format!("decoding {}", path.display()))?;
    if RunKey::of(&record) != entry.key() {
        bail!("{}: record does not match its manifest entry", path.display());
    }
    Ok(record)
}

/// True when `record` was produced with `settings` (up to the per-cell chain
/// length).
pub fn same_settings(record: &RunRecord, settings: &CellSettings) -> bool {
    let chain = ChainConfig {
        n_spins: record.settings.chain.n_spins,
        ..settings.chain
    };
    record.settings == CellSettings { chain, ..*settings }
}
