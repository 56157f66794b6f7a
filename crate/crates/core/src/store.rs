//! Footage embeddings keyed by `(runner, recording point)`.
//!
//! A store holds vectors from one instance (`Fusion::Single`) or a fusion of
//! several. It is saved in the [`binfmt`](crate::binfmt) container with the
//! keys and instance metadata in the header.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binfmt::{read_container, write_container, ContainerError};
use crate::domain::{RecordingPointId, RunnerId};
use crate::inference::{fuse, FootageEmbedding, Fusion, InferenceError, InstanceName, InstanceSpec};

const STORE_FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store dimension is {expected}, embedding has {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("embedding from {actual:?} does not match store instances {expected:?}")]
    ProvenanceMismatch {
        expected: Vec<InstanceName>,
        actual: Vec<InstanceName>,
    },
    #[error("duplicate entry for runner {runner} at recording point {rp}")]
    DuplicateKey { runner: RunnerId, rp: RecordingPointId },
    #[error("runner {runner} at recording point {rp} is missing from the {instance} store")]
    MissingKey {
        runner: RunnerId,
        rp: RecordingPointId,
        instance: InstanceName,
    },
    #[error("store has {0} instances; only single-instance stores can be fused")]
    NotSingle(usize),
    #[error("no stores given")]
    Empty,
    #[error("unsupported store format {0}")]
    Format(u32),
    #[error("store payload has {actual} values, header implies {expected}")]
    Truncated { expected: usize, actual: usize },
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StoreHeader {
    format: u32,
    fusion: Fusion,
    dim: usize,
    instances: Vec<InstanceSpec>,
    param_counts: Vec<u64>,
    keys: Vec<(RunnerId, RecordingPointId)>,
    /// Clips used per key and instance, row-major.
    clip_counts: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    header: StoreHeader,
    values: Vec<f32>,
    index: HashMap<(RunnerId, RecordingPointId), usize>,
}

impl PartialEq for EmbeddingStore {
    fn eq(&self, other: &Self) -> bool {
        self.header.fusion == other.header.fusion
            && self.header.dim == other.header.dim
            && self.header.instances == other.header.instances
            && self.header.param_counts == other.header.param_counts
            && self.header.keys == other.header.keys
            && self.header.clip_counts == other.header.clip_counts
            && self.values == other.values
    }
}

impl EmbeddingStore {
    /// Empty store. `instances` are sorted into canonical order; `param_counts`
    /// follow the same order as `instances` on input.
    pub fn new(instances: Vec<InstanceSpec>, param_counts: Vec<u64>, fusion: Fusion) -> Result<Self, StoreError> {
        if instances.is_empty() {
            return Err(StoreError::Empty);
        }
        let mut paired: Vec<(InstanceSpec, u64)> = instances
            .into_iter()
            .zip(param_counts.into_iter().chain(std::iter::repeat(0)))
            .collect();
        paired.sort_by_key(|(s, _)| s.name);
        let dim = match fusion {
            Fusion::Concat => paired.iter().map(|(s, _)| s.embedding_dim).sum(),
            _ => paired[0].0.embedding_dim,
        };
        let (instances, param_counts) = paired.into_iter().unzip();
        Ok(Self {
            header: StoreHeader {
                format: STORE_FORMAT,
                fusion,
                dim,
                instances,
                param_counts,
                keys: Vec::new(),
                clip_counts: Vec::new(),
            },
            values: Vec::new(),
            index: HashMap::new(),
        })
    }

    pub fn insert(
        &mut self,
        runner: RunnerId,
        rp: RecordingPointId,
        embedding: &FootageEmbedding,
        clip_counts: &[u32],
    ) -> Result<(), StoreError> {
        if embedding.values.len() != self.header.dim {
            return Err(StoreError::DimensionMismatch {
                expected: self.header.dim,
                actual: embedding.values.len(),
            });
        }
        let names = self.instance_names();
        if embedding.provenance != names {
            return Err(StoreError::ProvenanceMismatch {
                expected: names,
                actual: embedding.provenance.clone(),
            });
        }
        if clip_counts.len() != names.len() {
            return Err(StoreError::DimensionMismatch {
                expected: names.len(),
                actual: clip_counts.len(),
            });
        }
        if embedding.values.iter().any(|v| !v.is_finite()) {
            return Err(InferenceError::NonFinite.into());
        }
        let key = (runner, rp);
        if self.index.contains_key(&key) {
            return Err(StoreError::DuplicateKey { runner: key.0, rp });
        }
        self.index.insert(key.clone(), self.header.keys.len());
        self.header.keys.push(key);
        self.header.clip_counts.extend_from_slice(clip_counts);
        self.values.extend_from_slice(&embedding.values);
        Ok(())
    }

    pub fn get(&self, runner: &RunnerId, rp: RecordingPointId) -> Option<&[f32]> {
        let &row = self.index.get(&(runner.clone(), rp))?;
        Some(&self.values[row * self.header.dim..(row + 1) * self.header.dim])
    }

    pub fn embedding(&self, runner: &RunnerId, rp: RecordingPointId) -> Option<FootageEmbedding> {
        self.get(runner, rp).map(|values| FootageEmbedding {
            values: values.to_vec(),
            provenance: self.instance_names(),
            fusion: self.header.fusion,
        })
    }

    pub fn clip_counts(&self, runner: &RunnerId, rp: RecordingPointId) -> Option<&[u32]> {
        let n = self.header.instances.len();
        let &row = self.index.get(&(runner.clone(), rp))?;
        Some(&self.header.clip_counts[row * n..(row + 1) * n])
    }

    pub fn keys(&self) -> &[(RunnerId, RecordingPointId)] {
        &self.header.keys
    }

    pub fn len(&self) -> usize {
        self.header.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.header.keys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.header.dim
    }

    pub fn fusion(&self) -> Fusion {
        self.header.fusion
    }

    pub fn instances(&self) -> &[InstanceSpec] {
        &self.header.instances
    }

    pub fn instance_names(&self) -> Vec<InstanceName> {
        self.header.instances.iter().map(|s| s.name).collect()
    }

    pub fn param_counts(&self) -> &[u64] {
        &self.header.param_counts
    }

    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        write_container(BufWriter::new(File::create(path)?), &self.header, &self.values)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let (header, values): (StoreHeader, Vec<f32>) = read_container(BufReader::new(File::open(path)?))?;
        if header.format != STORE_FORMAT {
            return Err(StoreError::Format(header.format));
        }
        let expected = header.keys.len() * header.dim;
        if values.len() != expected {
            return Err(StoreError::Truncated {
                expected,
                actual: values.len(),
            });
        }
        let expected = header.keys.len() * header.instances.len();
        if header.clip_counts.len() != expected {
            return Err(StoreError::Truncated {
                expected,
                actual: header.clip_counts.len(),
            });
        }
        let mut index = HashMap::with_capacity(header.keys.len());
        for (row, key) in header.keys.iter().enumerate() {
            if index.insert(key.clone(), row).is_some() {
                return Err(StoreError::DuplicateKey {
                    runner: key.0.clone(),
                    rp: key.1,
                });
            }
        }
        Ok(Self { header, values, index })
    }

    /// Fuses single-instance stores key by key. Keys follow the first store;
    /// every other store must contain each of them.
    pub fn fuse(stores: &[&EmbeddingStore], fusion: Fusion) -> Result<EmbeddingStore, StoreError> {
        let first = stores.first().ok_or(StoreError::Empty)?;
        if let Some(multi) = stores.iter().find(|s| s.header.instances.len() != 1) {
            return Err(StoreError::NotSingle(multi.header.instances.len()));
        }
        let mut ordered: Vec<&EmbeddingStore> = stores.to_vec();
        ordered.sort_by_key(|s| s.header.instances[0].name);
        let instances = ordered.iter().map(|s| s.header.instances[0]).collect();
        let params = ordered.iter().map(|s| s.header.param_counts[0]).collect();
        let mut out = EmbeddingStore::new(instances, params, fusion)?;
        for (runner, rp) in first.keys() {
            let mut parts = Vec::with_capacity(ordered.len());
            let mut clips = Vec::with_capacity(ordered.len());
            for s in &ordered {
                let e = s.embedding(runner, *rp).ok_or_else(|| StoreError::MissingKey {
                    runner: runner.clone(),
                    rp: *rp,
                    instance: s.header.instances[0].name,
                })?;
                parts.push(e);
                clips.push(s.clip_counts(runner, *rp).expect("key present")[0]);
            }
            out.insert(runner.clone(), *rp, &fuse(&parts, fusion)?, &clips)?;
        }
        Ok(out)
    }
}

/// Conventional file name: `embeddings_XS.bin`, `embeddings_avg_XS-S.bin`,
/// `embeddings_cat_XS-S.bin`.
pub fn store_file_name(instances: &[InstanceName], fusion: Fusion) -> String {
    let mut names = instances.to_vec();
    names.sort();
    let joined = names.iter().map(|n| n.as_str()).collect::<Vec<_>>().join("-");
    match fusion {
        Fusion::Single => format!("embeddings_{joined}.bin"),
        Fusion::Average => format!("embeddings_avg_{joined}.bin"),
        Fusion::Concat => format!("embeddings_cat_{joined}.bin"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(name: InstanceName, offset: f32) -> EmbeddingStore {
        let mut s = EmbeddingStore::new(vec![InstanceSpec::new(name, 8)], vec![7], Fusion::Single).unwrap();
        for (i, runner) in ["a", "b"].iter().enumerate() {
            let e = FootageEmbedding {
                values: vec![offset + i as f32; 192],
                provenance: vec![name],
                fusion: Fusion::Single,
            };
            s.insert(RunnerId::new(*runner).unwrap(), RecordingPointId(0), &e, &[3]).unwrap();
        }
        s
    }

    #[test]
    fn save_load_round_trip() {
        let s = single(InstanceName::M, 1.5);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(store_file_name(&[InstanceName::M], Fusion::Single));
        s.save(&p).unwrap();
        let back = EmbeddingStore::load(&p).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.get(&RunnerId::new("b").unwrap(), RecordingPointId(0)).unwrap()[0], 2.5);
        assert!(back.get(&RunnerId::new("c").unwrap(), RecordingPointId(0)).is_none());
    }

    #[test]
    fn fuse_average_and_concat() {
        let xs = single(InstanceName::XS, 0.0);
        let l = single(InstanceName::L, 2.0);
        let avg = EmbeddingStore::fuse(&[&l, &xs], Fusion::Average).unwrap();
        assert_eq!(avg.dim(), 192);
        assert_eq!(avg.instance_names(), vec![InstanceName::XS, InstanceName::L]);
        assert_eq!(avg.get(&RunnerId::new("a").unwrap(), RecordingPointId(0)).unwrap()[0], 1.0);
        let cat = EmbeddingStore::fuse(&[&l, &xs], Fusion::Concat).unwrap();
        let row = cat.get(&RunnerId::new("b").unwrap(), RecordingPointId(0)).unwrap();
        assert_eq!(row.len(), 384);
        assert_eq!((row[0], row[192]), (1.0, 3.0));
        assert_eq!(cat.param_counts(), &[7, 7]);
    }

    #[test]
    fn fuse_needs_matching_keys() {
        let xs = single(InstanceName::XS, 0.0);
        let mut s = EmbeddingStore::new(vec![InstanceSpec::new(InstanceName::S, 8)], vec![], Fusion::Single).unwrap();
        let e = FootageEmbedding {
            values: vec![0.0; 192],
            provenance: vec![InstanceName::S],
            fusion: Fusion::Single,
        };
        s.insert(RunnerId::new("a").unwrap(), RecordingPointId(0), &e, &[3]).unwrap();
        assert!(matches!(
            EmbeddingStore::fuse(&[&xs, &s], Fusion::Average),
            Err(StoreError::MissingKey { instance: InstanceName::S, .. })
        ));
    }

    #[test]
    fn insert_checks() {
        let mut s = single(InstanceName::XS, 0.0);
        let bad_dim = FootageEmbedding {
            values: vec![0.0; 10],
            provenance: vec![InstanceName::XS],
            fusion: Fusion::Single,
        };
        assert!(matches!(
            s.insert(RunnerId::new("z").unwrap(), RecordingPointId(1), &bad_dim, &[1]),
            Err(StoreError::DimensionMismatch { .. })
        ));
        let dup = FootageEmbedding {
            values: vec![0.0; 192],
            provenance: vec![InstanceName::XS],
            fusion: Fusion::Single,
        };
        assert!(matches!(
            s.insert(RunnerId::new("a").unwrap(), RecordingPointId(0), &dup, &[1]),
            Err(StoreError::DuplicateKey { .. })
        ));
        let wrong = FootageEmbedding {
            provenance: vec![InstanceName::S],
            ..dup
        };
        assert!(matches!(
            s.insert(RunnerId::new("q").unwrap(), RecordingPointId(0), &wrong, &[1]),
            Err(StoreError::ProvenanceMismatch { .. })
        ));
    }

    #[test]
    fn file_names() {
        assert_eq!(store_file_name(&[InstanceName::XS], Fusion::Single), "embeddings_XS.bin");
        assert_eq!(
            store_file_name(&[InstanceName::S, InstanceName::XS], Fusion::Average),
            "embeddings_avg_XS-S.bin"
        );
        assert_eq!(
            store_file_name(&[InstanceName::XS, InstanceName::S, InstanceName::M], Fusion::Concat),
            "embeddings_cat_XS-S-M.bin"
        );
    }
}
