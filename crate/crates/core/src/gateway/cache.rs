//! Append-only JSON-lines record cache, one file per (backend, model).

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use log::warn;

use super::{GatewayError, GenerationRecord};

#[derive(Default)]
struct Shard {
    records: HashMap<String, GenerationRecord>,
    file: Option<File>,
}

/// Records keyed by content hash. Writes go through a single lock, so
/// concurrent callers never interleave lines.
pub struct GenerationCache {
    root: Option<PathBuf>,
    shards: Mutex<HashMap<(String, String), Shard>>,
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if matches!(c, '/' | '\\' | '\0') { '_' } else { c })
        .collect()
}

impl GenerationCache {
    /// A cache persisted under `root/<backend>/<model>.jsonl`.
    pub fn persistent(root: impl Into<PathBuf>) -> Self {
        Self {
            root: Some(root.into()),
            shards: Mutex::new(HashMap::new()),
        }
    }

    pub fn in_memory() -> Self {
        Self {
            root: None,
            shards: Mutex::new(HashMap::new()),
        }
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn shard_path(root: &Path, backend: &str, model: &str) -> PathBuf {
        root.join(sanitize(backend)).join(format!("{}.jsonl", sanitize(model)))
    }

    /// Reads a shard file. A truncated final line (interrupted write) is skipped.
    pub fn read_shard(path: &Path) -> Result<Vec<GenerationRecord>, GatewayError> {
        let file = match File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(GatewayError::Cache(format!("{}: {e}", path.display()))),
        };
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| GatewayError::Cache(format!("{}: {e}", path.display())))?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<GenerationRecord>(&line) {
                Ok(mut r) => {
                    r.from_cache = true;
                    out.push(r);
                }
                Err(e) => warn!("{}:{}: skipping unreadable cache line: {e}", path.display(), i + 1),
            }
        }
        Ok(out)
    }

    fn with_shard<T>(
        &self,
        backend: &str,
        model: &str,
        f: impl FnOnce(&mut Shard, Option<&Path>) -> Result<T, GatewayError>,
    ) -> Result<T, GatewayError> {
        let mut shards = self.shards.lock().expect("cache lock poisoned");
        let shard = match shards.entry((backend.to_owned(), model.to_owned())) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => {
                let mut shard = Shard::default();
                if let Some(root) = &self.root {
                    for r in Self::read_shard(&Self::shard_path(root, backend, model))? {
                        // first occurrence wins, matching what callers saw at write time
                        shard.records.entry(r.key.clone()).or_insert(r);
                    }
                }
                e.insert(shard)
            }
        };
        let path = self.root.as_ref().map(|r| Self::shard_path(r, backend, model));
        f(shard, path.as_deref())
    }

    pub fn get(&self, backend: &str, model: &str, key: &str) -> Result<Option<GenerationRecord>, GatewayError> {
        self.with_shard(backend, model, |shard, _| Ok(shard.records.get(key).cloned()))
    }

    /// Stores `record` unless its key is already present; returns the stored record.
    pub fn insert(&self, record: GenerationRecord) -> Result<GenerationRecord, GatewayError> {
        let backend = record.request.backend_id.clone();
        let model = record.request.model.clone();
        self.with_shard(&backend, &model, |shard, path| {
            if let Some(existing) = shard.records.get(&record.key) {
                let mut existing = existing.clone();
                existing.from_cache = true;
                return Ok(existing);
            }
            if let Some(path) = path {
                if shard.file.is_none() {
                    if let Some(dir) = path.parent() {
                        fs::create_dir_all(dir).map_err(|e| GatewayError::Cache(format!("{}: {e}", dir.display())))?;
                    }
                    let f = OpenOptions::new()
                        .create(true)
                        .append(true)
                        .open(path)
                        .map_err(|e| GatewayError::Cache(format!("{}: {e}", path.display())))?;
                    shard.file = Some(f);
                }
                let mut line = serde_json::to_string(&record).map_err(|e| GatewayError::Cache(e.to_string()))?;
                line.push('\n');
                let file = shard.file.as_mut().expect("opened above");
                file.write_all(line.as_bytes())
                    .and_then(|_| file.flush())
                    .map_err(|e| GatewayError::Cache(format!("{}: {e}", path.display())))?;
            }
            shard.records.insert(record.key.clone(), record.clone());
            Ok(record)
        })
    }

    /// Number of records currently loaded for (backend, model).
    pub fn len(&self, backend: &str, model: &str) -> Result<usize, GatewayError> {
        self.with_shard(backend, model, |shard, _| Ok(shard.records.len()))
    }
}
