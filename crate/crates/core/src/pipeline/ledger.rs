//! Per-job run ledger that makes `--resume` idempotent.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::io::write_atomic;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum JobStatus {
    Pending,
    Done,
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub status: JobStatus,
    pub input_hash: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLedger {
    pub jobs: BTreeMap<String, JobRecord>,
}

impl RunLedger {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::MalformedModelFile(format!("ledger: {e}")))
    }

    /// Missing ledger means a fresh run.
    pub fn load_or_default(path: &Path) -> Result<Self> {
        if path.exists() {
            Self::load(path)
        } else {
            Ok(Self::default())
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }

    /// True when `key` finished with exactly these inputs.
    pub fn is_done(&self, key: &str, input_hash: &str) -> bool {
        self.jobs
            .get(key)
            .is_some_and(|r| r.status == JobStatus::Done && r.input_hash == input_hash)
    }

    pub fn status(&self, key: &str) -> Option<&JobStatus> {
        self.jobs.get(key).map(|r| &r.status)
    }

    pub fn set(&mut self, key: &str, status: JobStatus, input_hash: &str, seconds: f64) {
        self.jobs.insert(
            key.to_string(),
            JobRecord {
                status,
                input_hash: input_hash.to_string(),
                seconds,
            },
        );
    }
}

pub fn hash_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn done_requires_matching_hash() {
        let mut l = RunLedger::default();
        l.set("eng_latn/bpe_none_8192", JobStatus::Done, "h1", 0.5);
        assert!(l.is_done("eng_latn/bpe_none_8192", "h1"));
        assert!(!l.is_done("eng_latn/bpe_none_8192", "h2"));
        l.set("x", JobStatus::Failed { reason: "boom".into() }, "h1", 0.0);
        assert!(!l.is_done("x", "h1"));
    }

    #[test]
    fn round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.json");
        let mut l = RunLedger::default();
        l.set("a", JobStatus::Failed { reason: "r".into() }, "h", 1.0);
        l.save(&path).unwrap();
        assert_eq!(RunLedger::load(&path).unwrap(), l);
    }

    #[test]
    fn hash_separates_parts() {
        assert_ne!(hash_hex(&[b"ab", b"c"]), hash_hex(&[b"a", b"bc"]));
    }
}
