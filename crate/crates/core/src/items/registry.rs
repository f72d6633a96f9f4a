use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::ItemError;
use crate::stimulus::SpecHash;

#[derive(Serialize, Deserialize)]
struct Record {
    subject_id: String,
    digest: SpecHash,
    ts_ms: u64,
}

struct Inner {
    seen: HashSet<(String, SpecHash)>,
    file: Option<File>,
}

/// Remembers which instances each subject has been shown. In global mode
/// every subject shares one namespace.
pub struct InstanceRegistry {
    global: bool,
    path: Option<PathBuf>,
    inner: Mutex<Inner>,
}

impl InstanceRegistry {
    pub fn in_memory(global: bool) -> Self {
        Self { global, path: None, inner: Mutex::new(Inner { seen: HashSet::new(), file: None }) }
    }

    /// Opens or creates an append-only registry file. A torn final line
    /// left by a crash is ignored; corruption elsewhere is an error.
    pub fn open(path: impl AsRef<Path>, global: bool) -> Result<Self, ItemError> {
        let path = path.as_ref().to_path_buf();
        let storage = |e: std::io::Error| ItemError::Storage(format!("{}: {e}", path.display()));
        let mut seen = HashSet::new();
        if path.exists() {
            let lines: Vec<String> =
                BufReader::new(File::open(&path).map_err(storage)?).lines().collect::<Result<_, _>>().map_err(storage)?;
            let last = lines.len().saturating_sub(1);
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Record>(line) {
                    Ok(r) => {
                        let subject = if global { String::new() } else { r.subject_id };
                        seen.insert((subject, r.digest));
                    }
                    Err(_) if i == last => {}
                    Err(e) => {
                        return Err(ItemError::Storage(format!("{} line {}: {e}", path.display(), i + 1)));
                    }
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(storage)?;
        Ok(Self { global, path: Some(path), inner: Mutex::new(Inner { seen, file: Some(file) }) })
    }

    pub fn is_global(&self) -> bool {
        self.global
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn key(&self, subject_id: &str, digest: SpecHash) -> (String, SpecHash) {
        (if self.global { String::new() } else { subject_id.to_string() }, digest)
    }

    pub fn contains(&self, subject_id: &str, digest: SpecHash) -> bool {
        self.inner.lock().unwrap().seen.contains(&self.key(subject_id, digest))
    }

    /// Records the digest and returns true, or returns false if it was
    /// already recorded. Safe to call from several threads.
    pub fn check_and_register(&self, subject_id: &str, digest: SpecHash) -> Result<bool, ItemError> {
        let key = self.key(subject_id, digest);
        let mut inner = self.inner.lock().unwrap();
        if inner.seen.contains(&key) {
            return Ok(false);
        }
        if let Some(file) = inner.file.as_mut() {
            let ts_ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0);
            let rec = Record { subject_id: subject_id.to_string(), digest, ts_ms };
            let mut line = serde_json::to_string(&rec).expect("record serializes");
            line.push('\n');
            file.write_all(line.as_bytes()).and_then(|_| file.flush()).map_err(|e| ItemError::Storage(e.to_string()))?;
        }
        inner.seen.insert(key);
        Ok(true)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(b: u8) -> SpecHash {
        SpecHash([b; 32])
    }

    #[test]
    fn per_subject_namespaces() {
        let r = InstanceRegistry::in_memory(false);
        assert!(r.check_and_register("a", h(1)).unwrap());
        assert!(!r.check_and_register("a", h(1)).unwrap());
        assert!(r.check_and_register("b", h(1)).unwrap());
        let g = InstanceRegistry::in_memory(true);
        assert!(g.check_and_register("a", h(1)).unwrap());
        assert!(!g.check_and_register("b", h(1)).unwrap());
    }

    #[test]
    fn survives_reopen_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("registry.jsonl");
        {
            let r = InstanceRegistry::open(&path, false).unwrap();
            r.check_and_register("a", h(1)).unwrap();
            r.check_and_register("a", h(2)).unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"subject_id\":\"a\",\"dig").unwrap();
        drop(f);
        let r = InstanceRegistry::open(&path, false).unwrap();
        assert_eq!(r.len(), 2);
        assert!(!r.check_and_register("a", h(2)).unwrap());
        assert!(r.contains("a", h(1)));
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("registry.jsonl");
        std::fs::write(&path, "garbage\n{\"subject_id\":\"a\",\"digest\":\"00\",\"ts_ms\":0}\n").unwrap();
        assert!(matches!(InstanceRegistry::open(&path, false), Err(ItemError::Storage(_))));
    }
}
