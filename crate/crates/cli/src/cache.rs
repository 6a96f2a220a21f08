//! Content-addressed response cache.
//!
//! One file per request fingerprint, `<dir>/<fingerprint>.json`, holding the
//! request and the generation. Writes go to a temporary file that is then
//! renamed into place. Cache IO problems never fail a call: they are logged
//! and the call goes to the inner backend.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use terminators_core::{Backend, BackendError, BackendRequest, Generation};

/// Overrides `--cache-dir`.
pub const CACHE_VAR: &str = "TERMINATORS_CACHE";

#[derive(Debug, Serialize, Deserialize)]
pub struct CacheEntry {
    pub request: BackendRequest,
    pub generation: Generation,
}

#[derive(Debug, Default)]
pub struct CacheStats {
    pub hits: AtomicU64,
    pub misses: AtomicU64,
}

pub struct CachedBackend<B> {
    inner: B,
    dir: PathBuf,
    id: String,
    pub stats: CacheStats,
}

impl<B: Backend> CachedBackend<B> {
    pub fn new(inner: B, dir: impl Into<PathBuf>) -> Self {
        let id = inner.id().to_owned();
        CachedBackend { inner, dir: dir.into(), id, stats: CacheStats::default() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, req: &BackendRequest) -> PathBuf {
        self.dir.join(format!("{}.json", req.fingerprint()))
    }

    fn lookup(&self, req: &BackendRequest) -> Option<Generation> {
        let path = self.path_for(req);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return None,
            Err(e) => {
                tracing::warn!(path = %path.display(), error = %e, "cache read failed; calling backend");
                return None;
            }
        };
        match serde_json::from_str::<CacheEntry>(&text) {
            Ok(entry) if entry.request == *req => Some(entry.generation),
            Ok(_) => {
                tracing::warn!(path = %path.display(), "cache entry belongs to another request; ignoring");
                None
            }
            Err(e) => {
                tracing::warn!(path = %path.display(), error = %e, "unreadable cache entry; ignoring");
                None
            }
        }
    }

    fn store(&self, req: &BackendRequest, generation: &Generation) {
        let entry = CacheEntry { request: req.clone(), generation: generation.clone() };
        if let Err(e) = write_atomic(&self.dir, &self.path_for(req), &entry) {
            tracing::warn!(dir = %self.dir.display(), error = %e, "cache write failed; continuing uncached");
        }
    }
}

static TEMP_SEQ: AtomicU64 = AtomicU64::new(0);

fn write_atomic(dir: &Path, dest: &Path, entry: &CacheEntry) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".tmp-{}-{}", std::process::id(), TEMP_SEQ.fetch_add(1, Ordering::Relaxed)));
    let mut f = fs::File::create(&tmp)?;
    serde_json::to_writer_pretty(&mut f, entry)?;
    f.write_all(b"\n")?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, dest).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

impl<B: Backend> Backend for CachedBackend<B> {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, req: &BackendRequest) -> Result<Generation, BackendError> {
        if let Some(g) = self.lookup(req) {
            self.stats.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(g);
        }
        self.stats.misses.fetch_add(1, Ordering::Relaxed);
        let g = self.inner.generate(req)?;
        self.store(req, &g);
        Ok(g)
    }
}

/// Stands in for a backend when only cached responses may be used.
#[derive(Debug, Clone, Copy, Default)]
pub struct Offline;

impl Backend for Offline {
    fn id(&self) -> &str {
        "replay"
    }

    fn generate(&self, req: &BackendRequest) -> Result<Generation, BackendError> {
        Err(BackendError::Unavailable(format!("no cached response for request {}", req.fingerprint())))
    }
}
