//! On-disk embedding cache.
//!
//! One text file per embedding under `<root>/<probe id>/`: the probe id,
//! the task identifier (`"a/b"` or `"trivial"`), the unit count, then one
//! value per line in decimal text. Values print in shortest round-trip form,
//! so a cache hit is byte-identical to recomputation under the same seed.
//! Each probe directory also carries a JSON manifest listing the seeds and
//! probe configuration that produced it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embed::distance::{TaskEmbedding, TaskKey};
use crate::embed::fisher::EmbedConfig;
use crate::embed::probe::{ProbeConfig, ProbeMeta};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Seeds and configuration behind one probe's cache directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheManifest {
    pub probe: ProbeConfig,
    pub probe_meta: ProbeMeta,
    pub embed: EmbedConfig,
    /// Task identifier -> seed used when the embedding was computed.
    pub embed_seeds: BTreeMap<String, u64>,
    pub unit_count: usize,
}

#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    root: PathBuf,
}

impl EmbeddingCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn record_path(&self, probe_id: &str, key: &TaskKey) -> PathBuf {
        let name = key.to_string().replace('/', "-");
        self.root.join(probe_id).join(format!("{name}.emb"))
    }

    fn manifest_path(&self, probe_id: &str) -> PathBuf {
        self.root.join(probe_id).join("manifest.json")
    }

    pub fn store<T: Scalar>(&self, emb: &TaskEmbedding<T>) -> Result<PathBuf> {
        let path = self.record_path(&emb.probe_id, &emb.task);
        fs::create_dir_all(path.parent().unwrap())?;
        let mut text = String::new();
        text.push_str(&emb.probe_id);
        text.push('\n');
        text.push_str(&emb.task.to_string());
        text.push('\n');
        text.push_str(&emb.values.len().to_string());
        text.push('\n');
        for v in &emb.values {
            text.push_str(&format!("{v}\n"));
        }
        fs::write(&path, text)?;
        Ok(path)
    }

    /// Loads a cached embedding, or `None` when it has not been computed.
    pub fn load<T: Scalar>(&self, probe_id: &str, key: &TaskKey) -> Result<Option<TaskEmbedding<T>>> {
        let path = self.record_path(probe_id, key);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)?;
        let mut lines = text.lines();
        let bad = |what: &str| Error::Data(format!("corrupt embedding record {path:?}: {what}"));

        let stored_probe = lines.next().ok_or_else(|| bad("missing probe id"))?;
        if stored_probe != probe_id {
            return Err(bad("probe id mismatch"));
        }
        let stored_key = lines.next().ok_or_else(|| bad("missing task id"))?;
        if stored_key != key.to_string() {
            return Err(bad("task id mismatch"));
        }
        let count: usize = lines
            .next()
            .ok_or_else(|| bad("missing unit count"))?
            .parse()
            .map_err(|_| bad("bad unit count"))?;
        let values = lines
            .map(|l| l.parse::<f64>().map(T::of).map_err(|_| bad("bad value")))
            .collect::<Result<Vec<T>>>()?;
        if values.len() != count {
            return Err(bad("value count does not match header"));
        }
        Ok(Some(TaskEmbedding {
            values,
            task: *key,
            probe_id: probe_id.to_string(),
        }))
    }

    pub fn write_manifest(&self, probe_id: &str, manifest: &CacheManifest) -> Result<()> {
        let path = self.manifest_path(probe_id);
        fs::create_dir_all(path.parent().unwrap())?;
        let json = serde_json::to_string_pretty(manifest)
            .map_err(|e| Error::Data(format!("manifest serialization failed: {e}")))?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load_manifest(&self, probe_id: &str) -> Result<Option<CacheManifest>> {
        let path = self.manifest_path(probe_id);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| Error::Data(format!("corrupt cache manifest: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::UnitTask;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cache = EmbeddingCache::new(dir.path());
        let emb = TaskEmbedding {
            values: vec![0.1f64, 1.0 / 3.0, 2.5e-17, 0.0, 7.25],
            task: TaskKey::Task(UnitTask::new(2, 9).unwrap()),
            probe_id: "probe-x".into(),
        };
        cache.store(&emb).unwrap();
        let back: TaskEmbedding<f64> = cache.load("probe-x", &emb.task).unwrap().unwrap();
        assert_eq!(back.values.len(), emb.values.len());
        for (a, b) in back.values.iter().zip(&emb.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }

        // A second store produces byte-identical files.
        let path = cache.store(&emb).unwrap();
        let bytes_a = fs::read(&path).unwrap();
        cache.store(&emb).unwrap();
        let bytes_b = fs::read(&path).unwrap();
        assert_eq!(bytes_a, bytes_b);
    }

    #[test]
    fn missing_records_return_none() {
        let dir = tempfile::tempdir().unwrap();
        let cache = EmbeddingCache::new(dir.path());
        let key = TaskKey::Trivial;
        assert!(cache.load::<f64>("nope", &key).unwrap().is_none());
        assert!(cache.load_manifest("nope").unwrap().is_none());
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let cache = EmbeddingCache::new(dir.path());
        let manifest = CacheManifest {
            probe: ProbeConfig::default(),
            probe_meta: ProbeMeta {
                seed: 42,
                epochs: 30,
                train_error: 0.05,
            },
            embed: EmbedConfig::default(),
            embed_seeds: [("2/9".to_string(), 7u64)].into_iter().collect(),
            unit_count: 256,
        };
        cache.write_manifest("p", &manifest).unwrap();
        let back = cache.load_manifest("p").unwrap().unwrap();
        assert_eq!(back, manifest);
    }
}
