//! Embedding provider selection from a spec string.
//!
//! Grammar (comma-separated list, concatenated in order):
//!   - `hash` — the default pairing, two hash providers of dims 384 and
//!     768 with seeds 0 and 1
//!   - `hash:<dim>:<seed>` — one hash provider
//!   - `service:<url>[@<dim>]` — HTTP embedding service; without `@<dim>`
//!     the dimension is probed with one request at startup
//!   - `table:<path>` — precomputed lookup table keyed by normalized text
//!   - `local:<model-path>` — reserved for an in-process model runtime,
//!     not bundled in this build

use anyhow::{anyhow, bail};
use revaccess::embedding::{
    ConcatEmbedder, EmbeddingProvider, HashEmbedder, ServiceEmbedder, TableEmbedder,
};

pub fn build_embedder(spec: &str) -> anyhow::Result<ConcatEmbedder> {
    let spec = spec.trim();
    if spec.is_empty() {
        bail!("embedder spec is empty");
    }
    if spec == "hash" {
        return Ok(ConcatEmbedder::default_hash());
    }
    let mut providers: Vec<Box<dyn EmbeddingProvider>> = Vec::new();
    for part in spec.split(',') {
        providers.push(build_provider(part.trim())?);
    }
    Ok(ConcatEmbedder::new(providers))
}

fn build_provider(part: &str) -> anyhow::Result<Box<dyn EmbeddingProvider>> {
    if part == "hash" {
        bail!("bare `hash` expands to the default pair and cannot appear in a list; use hash:<dim>:<seed>");
    }
    if let Some(rest) = part.strip_prefix("hash:") {
        let (dim, seed) = rest
            .split_once(':')
            .ok_or_else(|| anyhow!("hash spec {part:?} must be hash:<dim>:<seed>"))?;
        let dim: usize = dim.parse().map_err(|_| anyhow!("bad dim in {part:?}"))?;
        let seed: u64 = seed.parse().map_err(|_| anyhow!("bad seed in {part:?}"))?;
        if dim == 0 {
            bail!("hash dim must be positive in {part:?}");
        }
        return Ok(Box::new(HashEmbedder::new(dim, seed)));
    }
    if let Some(rest) = part.strip_prefix("service:") {
        let (url, dim) = match rest.rsplit_once('@') {
            Some((url, dim)) => {
                let dim: usize = dim
                    .parse()
                    .map_err(|_| anyhow!("bad dim in service spec {part:?}"))?;
                (url.to_string(), Some(dim))
            }
            None => (rest.to_string(), None),
        };
        let provider = match dim {
            Some(dim) => ServiceEmbedder::new(url, dim),
            None => ServiceEmbedder::probe(url)
                .map_err(|e| anyhow!("cannot probe embedding service: {e}"))?,
        };
        return Ok(Box::new(provider));
    }
    if let Some(path) = part.strip_prefix("table:") {
        let provider = TableEmbedder::from_file(std::path::Path::new(path))
            .map_err(|e| anyhow!("cannot load embedding table: {e}"))?;
        return Ok(Box::new(provider));
    }
    if part.strip_prefix("local:").is_some() {
        bail!(
            "local model runtimes are not bundled in this build; \
             run the models behind an HTTP service (service:<url>) or \
             precompute embeddings into a lookup table (table:<path>)"
        );
    }
    bail!("unknown embedder spec {part:?}");
}
