//! Relation embeddings and cosine similarity.
//!
//! [`HashedNgramEncoder`] is the built-in encoder: the relation name is padded
//! with `<`/`>` markers, split into character n-grams, and each n-gram is
//! hashed into one of `dimension` buckets with a hashed ±1 sign. The summed
//! vector is L2-normalized, so dot product and cosine coincide.
//!
//! Other embedding providers plug in through [`RelationEncoder`];
//! [`PrecomputedEncoder`] reads vectors from a cache file.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kg::Relation;

pub const DEFAULT_DIMENSION: usize = 256;

/// Unit-norm embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Normalizes `values`; `None` for an all-zero or non-finite input.
    pub fn normalized(values: Vec<f64>) -> Option<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        Some(EmbeddingVector(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("dimension mismatch: {left} vs {right}")]
pub struct DimensionMismatch {
    pub left: usize,
    pub right: usize,
}

/// Cosine of two unit vectors, clamped to `[-1, 1]`.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, DimensionMismatch> {
    if u.dimension() != v.dimension() {
        return Err(DimensionMismatch {
            left: u.dimension(),
            right: v.dimension(),
        });
    }
    let dot: f64 = u.0.iter().zip(&v.0).map(|(a, b)| a * b).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

/// Anything that can embed a relation name.
pub trait RelationEncoder: Send + Sync {
    fn encode(&self, relation: &Relation) -> EmbeddingVector;

    fn dimension(&self) -> usize;

    /// Cosine between two relations under this encoder.
    fn similarity(&self, a: &Relation, b: &Relation) -> f64 {
        cosine(&self.encode(a), &self.encode(b)).expect("encoder emits a fixed dimension")
    }
}

impl<T: RelationEncoder + ?Sized> RelationEncoder for Arc<T> {
    fn encode(&self, relation: &Relation) -> EmbeddingVector {
        (**self).encode(relation)
    }

    fn dimension(&self) -> usize {
        (**self).dimension()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderConfig {
    pub dimension: usize,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub hash_seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            dimension: DEFAULT_DIMENSION,
            ngram_min: 2,
            ngram_max: 3,
            hash_seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension < 16 {
            return Err(Error::Invalid(format!("encoder dimension {} < 16", self.dimension)));
        }
        if self.ngram_min == 0 || self.ngram_min > self.ngram_max {
            return Err(Error::Invalid(format!(
                "bad n-gram range {}..={}",
                self.ngram_min, self.ngram_max
            )));
        }
        Ok(())
    }
}

/// Deterministic hashed character n-gram encoder.
#[derive(Debug, Clone, Default)]
pub struct HashedNgramEncoder {
    cfg: EncoderConfig,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const SIGN_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ seed;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    // Final avalanche so low bits depend on every input byte.
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h
}

impl HashedNgramEncoder {
    pub fn new(cfg: EncoderConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(HashedNgramEncoder { cfg })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.cfg
    }

    /// Character n-grams of the padded name, in extraction order.
    pub fn ngrams(&self, name: &str) -> Vec<String> {
        let padded: Vec<char> = std::iter::once('<').chain(name.chars()).chain(std::iter::once('>')).collect();
        let mut out = Vec::new();
        for n in self.cfg.ngram_min..=self.cfg.ngram_max {
            if n > padded.len() {
                break;
            }
            out.extend(padded.windows(n).map(|w| w.iter().collect::<String>()));
        }
        out
    }

    fn raw(&self, name: &str) -> Vec<f64> {
        let mut acc = vec![0.0; self.cfg.dimension];
        for gram in self.ngrams(name) {
            let bucket = (fnv1a(self.cfg.hash_seed, gram.as_bytes()) % self.cfg.dimension as u64) as usize;
            let sign = if fnv1a(self.cfg.hash_seed ^ SIGN_SALT, gram.as_bytes()) & 1 == 0 {
                1.0
            } else {
                -1.0
            };
            acc[bucket] += sign;
        }
        acc
    }
}

impl RelationEncoder for HashedNgramEncoder {
    fn encode(&self, relation: &Relation) -> EmbeddingVector {
        EmbeddingVector::normalized(self.raw(relation.as_str())).unwrap_or_else(|| {
            // Signed collisions cancelled out entirely; fall back to a one-hot
            // on the hash of the whole name so the vector stays unit-norm.
            let mut v = vec![0.0; self.cfg.dimension];
            let idx = (fnv1a(self.cfg.hash_seed, relation.as_str().as_bytes()) % self.cfg.dimension as u64) as usize;
            v[idx] = 1.0;
            EmbeddingVector(v)
        })
    }

    fn dimension(&self) -> usize {
        self.cfg.dimension
    }
}

/// Looks vectors up in a table, falling back to another encoder for
/// relations the table does not cover.
pub struct PrecomputedEncoder {
    vectors: HashMap<Relation, EmbeddingVector>,
    dimension: usize,
    fallback: Option<Arc<dyn RelationEncoder>>,
}

impl PrecomputedEncoder {
    pub fn new(vectors: HashMap<Relation, EmbeddingVector>, fallback: Option<Arc<dyn RelationEncoder>>) -> Result<Self> {
        let mut dims = vectors.values().map(EmbeddingVector::dimension);
        let dimension = match (dims.next(), &fallback) {
            (Some(d), _) => d,
            (None, Some(f)) => f.dimension(),
            (None, None) => return Err(Error::Invalid("empty vector table without fallback".into())),
        };
        if vectors.values().any(|v| v.dimension() != dimension) || fallback.as_ref().is_some_and(|f| f.dimension() != dimension) {
            return Err(Error::Invalid("precomputed vectors disagree on dimension".into()));
        }
        Ok(PrecomputedEncoder {
            vectors,
            dimension,
            fallback,
        })
    }

    /// Reads the cache format `relation<TAB>v1,v2,...`.
    pub fn from_reader<R: BufRead>(reader: R, origin: &Path, fallback: Option<Arc<dyn RelationEncoder>>) -> Result<Self> {
        let mut vectors = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (name, values) = line
                .split_once('\t')
                .ok_or_else(|| Error::malformed(origin, line_no, "expected relation<TAB>values"))?;
            let relation = Relation::new(name).map_err(|_| Error::malformed(origin, line_no, "empty relation"))?;
            let values = values
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::malformed(origin, line_no, format!("bad vector component: {e}")))?;
            let vector = EmbeddingVector::normalized(values)
                .ok_or_else(|| Error::malformed(origin, line_no, "zero or non-finite vector"))?;
            vectors.insert(relation, vector);
        }
        Self::new(vectors, fallback)
    }

    pub fn load(path: &Path, fallback: Option<Arc<dyn RelationEncoder>>) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(file), path, fallback)
    }
}

impl RelationEncoder for PrecomputedEncoder {
    fn encode(&self, relation: &Relation) -> EmbeddingVector {
        if let Some(v) = self.vectors.get(relation) {
            return v.clone();
        }
        match &self.fallback {
            Some(f) => f.encode(relation),
            None => {
                // Unknown relation with no fallback: a deterministic basis
                // vector keyed by the name.
                let mut v = vec![0.0; self.dimension];
                v[(fnv1a(0, relation.as_str().as_bytes()) % self.dimension as u64) as usize] = 1.0;
                EmbeddingVector(v)
            }
        }
    }

    fn dimension(&self) -> usize {
        self.dimension
    }
}
