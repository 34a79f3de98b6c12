//! Pluggable sentence-embedding providers and the two-provider
//! concatenation scheme that produces the classifier's input vector.
//!
//! Production deployments plug real sentence-embedding models in behind
//! [`EmbeddingProvider`] (an HTTP embedding service, or any other
//! implementation of the trait). The test suite and offline runs use the
//! deterministic [`HashEmbedder`], which needs no model downloads.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::normalize;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("text is empty after trimming")]
    EmptyText,
    #[error("text at batch index {index} is empty")]
    EmptyTextAt { index: usize },
    #[error("provider {provider} failed: {message}")]
    Provider { provider: String, message: String },
    #[error("embedding cache {path}: {message}")]
    Cache { path: PathBuf, message: String },
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// A sentence-embedding backend. Implementations must be deterministic for
/// a fixed provider state and must always return exactly `dim` finite
/// values.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbeddingError>;
}

/// A fixed-dimension real vector representing one review.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Concatenates the outputs of an ordered list of providers.
pub struct ConcatEmbedder {
    providers: Vec<Box<dyn EmbeddingProvider>>,
    total_dim: usize,
}

impl std::fmt::Debug for ConcatEmbedder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConcatEmbedder")
            .field("providers", &self.provider_names())
            .field("total_dim", &self.total_dim)
            .finish()
    }
}

impl ConcatEmbedder {
    pub fn new(providers: Vec<Box<dyn EmbeddingProvider>>) -> Self {
        let total_dim = providers.iter().map(|p| p.dim()).sum();
        Self {
            providers,
            total_dim,
        }
    }

    /// The default pairing used throughout the artifact: two hash
    /// providers of dims 384 and 768 (total 1152), mirroring the
    /// dimensions of the production sentence-embedding models.
    pub fn default_hash() -> Self {
        Self::new(vec![
            Box::new(HashEmbedder::new(384, 0)),
            Box::new(HashEmbedder::new(768, 1)),
        ])
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn provider_names(&self) -> Vec<&str> {
        self.providers.iter().map(|p| p.name()).collect()
    }
}

/// Embeds one text as the concatenation of every provider's vector, in
/// construction order.
pub fn concat_embed(
    embedder: &ConcatEmbedder,
    text: &str,
) -> Result<EmbeddingVector, EmbeddingError> {
    if text.trim().is_empty() {
        return Err(EmbeddingError::EmptyText);
    }
    let mut values = Vec::with_capacity(embedder.total_dim);
    for provider in &embedder.providers {
        let part = provider.embed(text)?;
        debug_assert_eq!(part.len(), provider.dim());
        values.extend_from_slice(&part);
    }
    Ok(EmbeddingVector { values })
}

/// Embeds a batch of texts; row `i` equals `concat_embed(texts[i])`.
pub fn embed_batch(
    embedder: &ConcatEmbedder,
    texts: &[impl AsRef<str>],
) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
    texts
        .iter()
        .enumerate()
        .map(|(index, text)| {
            let text = text.as_ref();
            if text.trim().is_empty() {
                return Err(EmbeddingError::EmptyTextAt { index });
            }
            concat_embed(embedder, text)
        })
        .collect()
}

/// Deterministic feature-hashing embedder, the reference test provider.
///
/// Tokenizes the normalized text on spaces; each token contributes ±1 to
/// the bucket `fnv1a64(seed_le_bytes ‖ token) mod dim`, with the sign
/// taken from bit 63 of the hash (0 → +1, 1 → −1). The result is
/// L2-normalized; an all-zero vector stays zero.
pub struct HashEmbedder {
    name: String,
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim >= 1, "dim must be positive");
        Self {
            name: format!("hash{dim}s{seed}"),
            dim,
            seed,
        }
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbeddingError> {
        if text.trim().is_empty() {
            return Err(EmbeddingError::EmptyText);
        }
        Ok(hash_embed(text, self.dim, self.seed))
    }
}

/// The hashing recipe behind [`HashEmbedder`], exposed for direct use.
pub fn hash_embed(text: &str, dim: usize, seed: u64) -> Vec<f64> {
    let mut values = vec![0.0f64; dim];
    for token in normalize(text).split(' ') {
        if token.is_empty() {
            continue;
        }
        let mut hash = FNV_OFFSET;
        for byte in seed.to_le_bytes() {
            hash = fnv1a_step(hash, byte);
        }
        for byte in token.as_bytes() {
            hash = fnv1a_step(hash, *byte);
        }
        let bucket = (hash % dim as u64) as usize;
        let sign = if hash >> 63 == 0 { 1.0 } else { -1.0 };
        values[bucket] += sign;
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut values {
            *v /= norm;
        }
    }
    values
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a_step(hash: u64, byte: u8) -> u64 {
    (hash ^ u64::from(byte)).wrapping_mul(FNV_PRIME)
}

/// Request body of the embedding-service wire protocol.
#[derive(Debug, Serialize, Deserialize)]
pub struct ServiceRequest {
    pub texts: Vec<String>,
}

/// Response body of the embedding-service wire protocol.
#[derive(Debug, Serialize, Deserialize)]
pub struct ServiceResponse {
    pub vectors: Vec<Vec<f64>>,
    pub dim: usize,
}

/// Provider backed by an HTTP embedding service.
///
/// POSTs `{"texts": [...]}` and expects `{"vectors": [[...]], "dim": D}`
/// with finite doubles. The declared `dim` is verified against every
/// response.
pub struct ServiceEmbedder {
    name: String,
    url: String,
    dim: usize,
}

impl ServiceEmbedder {
    pub fn new(url: impl Into<String>, dim: usize) -> Self {
        let url = url.into();
        Self {
            name: format!("service:{url}"),
            url,
            dim,
        }
    }

    /// Builds a provider by asking the service for its dimension with a
    /// single probe request.
    pub fn probe(url: impl Into<String>) -> Result<Self, EmbeddingError> {
        let url = url.into();
        let response = call_service(&url, &["dimension probe".to_string()])?;
        Ok(Self::new(url, response.dim))
    }

    fn call(&self, texts: &[String]) -> Result<ServiceResponse, EmbeddingError> {
        let parsed = call_service(&self.url, texts)?;
        if parsed.dim != self.dim {
            return Err(EmbeddingError::Provider {
                provider: self.name.clone(),
                message: format!(
                    "service dim {} does not match declared dim {}",
                    parsed.dim, self.dim
                ),
            });
        }
        Ok(parsed)
    }
}

fn call_service(url: &str, texts: &[String]) -> Result<ServiceResponse, EmbeddingError> {
    let err = |message: String| EmbeddingError::Provider {
        provider: format!("service:{url}"),
        message,
    };
    let request = ServiceRequest {
        texts: texts.to_vec(),
    };
    let mut response = ureq::post(url)
        .send_json(&request)
        .map_err(|e| err(e.to_string()))?;
    let parsed: ServiceResponse = response
        .body_mut()
        .read_json()
        .map_err(|e| err(format!("invalid response: {e}")))?;
    if parsed.vectors.len() != texts.len() {
        return Err(err(format!(
            "service returned {} vectors for {} texts",
            parsed.vectors.len(),
            texts.len()
        )));
    }
    for vector in &parsed.vectors {
        if vector.len() != parsed.dim || vector.iter().any(|v| !v.is_finite()) {
            return Err(err(
                "response vector has wrong length or non-finite values".into(),
            ));
        }
    }
    Ok(parsed)
}

impl EmbeddingProvider for ServiceEmbedder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbeddingError> {
        if text.trim().is_empty() {
            return Err(EmbeddingError::EmptyText);
        }
        let response = self.call(&[text.to_string()])?;
        response
            .vectors
            .into_iter()
            .next()
            .ok_or_else(|| EmbeddingError::Provider {
                provider: self.name.clone(),
                message: "service returned no vectors".into(),
            })
    }
}

/// Provider backed by a precomputed lookup table, for offline reproduction
/// with externally computed embeddings. The table file uses the cached
/// embeddings format with normalized review text in place of the id.
pub struct TableEmbedder {
    name: String,
    dim: usize,
    table: HashMap<String, Vec<f64>>,
}

impl TableEmbedder {
    pub fn from_file(path: &Path) -> Result<Self, EmbeddingError> {
        let (dim, table) = read_embedding_table(path)?;
        Ok(Self {
            name: format!("table:{}", path.display()),
            dim,
            table,
        })
    }
}

impl EmbeddingProvider for TableEmbedder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbeddingError> {
        let key = normalize(text);
        self.table
            .get(&key)
            .cloned()
            .ok_or_else(|| EmbeddingError::Provider {
                provider: self.name.clone(),
                message: format!("no table entry for {key:?}"),
            })
    }
}

/// Writes embeddings keyed by review id: a `dim=<D>` header line, then one
/// `id<TAB>v1 v2 ...` record per line. Floats round-trip exactly (Rust's
/// shortest round-trip formatting, at most 17 significant digits).
pub fn save_embeddings(
    path: &Path,
    dim: usize,
    records: &[(String, Vec<f64>)],
) -> Result<(), EmbeddingError> {
    let io_err = |source| EmbeddingError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = Vec::new();
    writeln!(out, "dim={dim}").map_err(io_err)?;
    for (id, values) in records {
        if values.len() != dim {
            return Err(EmbeddingError::Cache {
                path: path.to_path_buf(),
                message: format!("record {id:?} has {} values, expected {dim}", values.len()),
            });
        }
        let rendered: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{id}\t{}", rendered.join(" ")).map_err(io_err)?;
    }
    std::fs::write(path, out).map_err(io_err)
}

/// (id, vector) pairs as stored in a cached embeddings file.
pub type EmbeddingRecords = Vec<(String, Vec<f64>)>;

/// Reads a cached embeddings file back into (id, vector) pairs.
pub fn load_embeddings(path: &Path) -> Result<(usize, EmbeddingRecords), EmbeddingError> {
    let cache_err = |message: String| EmbeddingError::Cache {
        path: path.to_path_buf(),
        message,
    };
    let file = std::fs::File::open(path).map_err(|source| EmbeddingError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| cache_err("empty file".into()))?
        .map_err(|e| cache_err(e.to_string()))?;
    let dim: usize = header
        .strip_prefix("dim=")
        .ok_or_else(|| cache_err(format!("bad header {header:?}")))?
        .parse()
        .map_err(|e| cache_err(format!("bad dim: {e}")))?;
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| cache_err(e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let (id, rest) = line
            .split_once('\t')
            .ok_or_else(|| cache_err(format!("line {}: missing tab", i + 2)))?;
        let values: Vec<f64> = rest
            .split(' ')
            .map(|tok| tok.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| cache_err(format!("line {}: {e}", i + 2)))?;
        if values.len() != dim {
            return Err(cache_err(format!(
                "line {}: {} values, expected {dim}",
                i + 2,
                values.len()
            )));
        }
        records.push((id.to_string(), values));
    }
    Ok((dim, records))
}

fn read_embedding_table(path: &Path) -> Result<(usize, HashMap<String, Vec<f64>>), EmbeddingError> {
    let (dim, records) = load_embeddings(path)?;
    Ok((dim, records.into_iter().collect()))
}
