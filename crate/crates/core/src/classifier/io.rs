//! Model persistence.
//!
//! File layout: the 6-byte magic `ARMLP1`, a compact JSON header line
//! (`layer_dims`, `activations`, `prelu_alpha`, `seed`, `format_version`)
//! terminated by `\n`, the parameter blob as little-endian `f32` in layer
//! order (W1, b1, …, W5, b5, row-major), and a little-endian CRC32 of the
//! blob. Parameters are stored exactly as held in memory, so a round trip
//! reproduces predictions bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassifierError, MlpModel, ACTIVATION_NAMES, NUM_LAYERS};

const MAGIC: &[u8; 6] = b"ARMLP1";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    layer_dims: Vec<usize>,
    activations: Vec<String>,
    prelu_alpha: f32,
    seed: u64,
    format_version: u32,
}

/// Serializes a model to `path`.
pub fn save_model(model: &MlpModel, path: &Path) -> Result<(), ClassifierError> {
    let header = ModelHeader {
        layer_dims: model.layer_dims.to_vec(),
        activations: ACTIVATION_NAMES.iter().map(|s| s.to_string()).collect(),
        prelu_alpha: model.prelu_alpha,
        seed: model.seed,
        format_version: FORMAT_VERSION,
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| ClassifierError::CorruptFile(format!("header encode: {e}")))?;

    let mut blob = Vec::new();
    for l in 0..NUM_LAYERS {
        for &w in &model.weights[l] {
            blob.extend_from_slice(&w.to_le_bytes());
        }
        for &b in &model.biases[l] {
            blob.extend_from_slice(&b.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&blob);

    let mut out = Vec::with_capacity(MAGIC.len() + header_bytes.len() + 1 + blob.len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&header_bytes);
    out.push(b'\n');
    out.extend_from_slice(&blob);
    out.extend_from_slice(&crc.to_le_bytes());
    std::fs::write(path, out).map_err(|source| ClassifierError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a model saved by [`save_model`].
pub fn load_model(path: &Path) -> Result<MlpModel, ClassifierError> {
    let bytes = std::fs::read(path).map_err(|source| ClassifierError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(ClassifierError::CorruptFile("bad magic bytes".into()));
    }
    let rest = &bytes[MAGIC.len()..];
    let newline = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| ClassifierError::CorruptFile("missing header terminator".into()))?;
    let header: ModelHeader = serde_json::from_slice(&rest[..newline])
        .map_err(|e| ClassifierError::CorruptFile(format!("header decode: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(ClassifierError::VersionMismatch {
            found: header.format_version,
            expected: FORMAT_VERSION,
        });
    }
    if header.layer_dims.len() != 6 {
        return Err(ClassifierError::CorruptFile(format!(
            "expected 6 layer dims, got {}",
            header.layer_dims.len()
        )));
    }
    let expected_names: Vec<&str> = ACTIVATION_NAMES.to_vec();
    if header.activations != expected_names {
        return Err(ClassifierError::CorruptFile(format!(
            "unsupported activations {:?}",
            header.activations
        )));
    }
    let mut layer_dims = [0usize; 6];
    layer_dims.copy_from_slice(&header.layer_dims);

    let param_count: usize = (0..NUM_LAYERS)
        .map(|l| layer_dims[l + 1] * layer_dims[l] + layer_dims[l + 1])
        .sum();
    let blob_len = param_count * 4;
    let body = &rest[newline + 1..];
    if body.len() < blob_len + 4 {
        // Truncated blob or checksum: the integrity check cannot pass.
        return Err(ClassifierError::ChecksumMismatch);
    }
    if body.len() > blob_len + 4 {
        return Err(ClassifierError::CorruptFile("trailing data".into()));
    }
    let (blob, crc_bytes) = body.split_at(blob_len);
    let stored_crc = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    if crc32fast::hash(blob) != stored_crc {
        return Err(ClassifierError::ChecksumMismatch);
    }

    let mut offset = 0usize;
    let mut take = |count: usize| {
        let values: Vec<f32> = blob[offset..offset + count * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        offset += count * 4;
        values
    };
    let mut weights = Vec::with_capacity(NUM_LAYERS);
    let mut biases = Vec::with_capacity(NUM_LAYERS);
    for l in 0..NUM_LAYERS {
        weights.push(take(layer_dims[l + 1] * layer_dims[l]));
        biases.push(take(layer_dims[l + 1]));
    }
    MlpModel::from_parts(layer_dims, weights, biases, header.prelu_alpha, header.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::forward;
    use crate::embedding::EmbeddingVector;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_model(seed: u64) -> MlpModel {
        MlpModel::init_with_dims([6, 5, 4, 3, 2, 2], seed)
    }

    #[test]
    fn round_trip_preserves_predictions_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.armlp");
        let model = small_model(21);
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, model);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let x = EmbeddingVector {
                values: (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            };
            let a = forward(&model, &x).unwrap();
            let b = forward(&loaded, &x).unwrap();
            assert_eq!(a[0].to_bits(), b[0].to_bits());
            assert_eq!(a[1].to_bits(), b[1].to_bits());
        }
    }

    #[test]
    fn wrong_magic_is_corrupt_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.armlp");
        std::fs::write(&path, b"NOTMLP{}\n").unwrap();
        assert!(matches!(
            load_model(&path),
            Err(ClassifierError::CorruptFile(_))
        ));
    }

    #[test]
    fn truncated_file_is_checksum_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.armlp");
        let model = small_model(3);
        save_model(&model, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(ClassifierError::ChecksumMismatch)
        ));
    }

    #[test]
    fn corrupted_blob_is_checksum_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.armlp");
        let model = small_model(3);
        save_model(&model, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() - 20;
        bytes[mid] ^= 0xff;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(ClassifierError::ChecksumMismatch)
        ));
    }

    #[test]
    fn future_format_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.armlp");
        let model = small_model(3);
        save_model(&model, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let text = String::from_utf8_lossy(&bytes).into_owned();
        let patched = text.replace("\"format_version\":1", "\"format_version\":2");
        std::fs::write(&path, patched).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(ClassifierError::VersionMismatch { found: 2, .. })
        ));
    }
}
