//! Append-only JSONL store of sampler audits.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use keychord::sampler::{AcceptanceRecord, Suggestion};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub audit_id: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub request: serde_json::Value,
    pub suggestions: Vec<Suggestion>,
    pub records: Vec<AcceptanceRecord>,
}

pub fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

enum Backend {
    Memory(Vec<AuditEntry>),
    File(PathBuf),
}

pub struct AuditStore {
    retention: Duration,
    backend: Mutex<Backend>,
}

impl AuditStore {
    pub fn in_memory(retention: Duration) -> AuditStore {
        AuditStore { retention, backend: Mutex::new(Backend::Memory(Vec::new())) }
    }

    /// Opens (creating if needed) a JSONL store and drops expired entries.
    pub fn open(path: &Path, retention: Duration) -> io::Result<AuditStore> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        OpenOptions::new().create(true).append(true).open(path)?;
        let store = AuditStore { retention, backend: Mutex::new(Backend::File(path.to_path_buf())) };
        store.prune(now_secs())?;
        Ok(store)
    }

    fn cutoff(&self, now: u64) -> u64 {
        now.saturating_sub(self.retention.as_secs())
    }

    pub fn append(&self, entry: &AuditEntry) -> io::Result<()> {
        let mut backend = self.backend.lock().unwrap();
        match &mut *backend {
            Backend::Memory(v) => v.push(entry.clone()),
            Backend::File(path) => {
                let mut f = OpenOptions::new().append(true).open(&*path)?;
                let line = serde_json::to_string(entry).map_err(io::Error::other)?;
                writeln!(f, "{line}")?;
            }
        }
        Ok(())
    }

    pub fn get(&self, audit_id: &str) -> io::Result<Option<AuditEntry>> {
        Ok(self.entries()?.into_iter().find(|e| e.audit_id == audit_id))
    }

    pub fn entries(&self) -> io::Result<Vec<AuditEntry>> {
        let backend = self.backend.lock().unwrap();
        match &*backend {
            Backend::Memory(v) => Ok(v.clone()),
            Backend::File(path) => read_entries(path),
        }
    }

    /// Removes entries created before `now - retention`.
    pub fn prune(&self, now: u64) -> io::Result<usize> {
        let cutoff = self.cutoff(now);
        let mut backend = self.backend.lock().unwrap();
        match &mut *backend {
            Backend::Memory(v) => {
                let before = v.len();
                v.retain(|e| e.created_at >= cutoff);
                Ok(before - v.len())
            }
            Backend::File(path) => {
                let all = read_entries(path)?;
                let keep: Vec<_> = all.iter().filter(|e| e.created_at >= cutoff).collect();
                let removed = all.len() - keep.len();
                if removed > 0 {
                    let tmp = path.with_extension("jsonl.tmp");
                    let mut f = File::create(&tmp)?;
                    for e in keep {
                        writeln!(f, "{}", serde_json::to_string(e).map_err(io::Error::other)?)?;
                    }
                    fs::rename(&tmp, &*path)?;
                }
                Ok(removed)
            }
        }
    }
}

fn read_entries(path: &Path) -> io::Result<Vec<AuditEntry>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(e) => out.push(e),
            Err(e) => log::warn!("skipping unreadable audit line in {}: {e}", path.display()),
        }
    }
    Ok(out)
}
