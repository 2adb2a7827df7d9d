//! Weight file container and sidecar manifest.
//!
//! Layout of the binary container:
//!
//! ```text
//! bytes 0..8    magic  b"PARDECW\0"
//! bytes 8..12   format version, u32 LE (currently 1)
//! bytes 12..16  reserved, u32 LE zero
//! bytes 16..48  spec: vocab_size, d_model, n_layers, n_heads, d_ff, max_seq
//!               as u32 LE, then seed as u64 LE
//! bytes 48..    tensor payload: raw f32 LE values in catalog order
//! ```
//!
//! The sidecar manifest lives at `<path>.manifest.json` and records the spec
//! plus a sha256 per tensor and for the whole payload. Loading verifies the
//! manifest and refuses corrupted files.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ModelError, ModelSpec, ToyModel};

pub const WEIGHT_MAGIC: &[u8; 8] = b"PARDECW\0";
pub const WEIGHT_FORMAT_VERSION: u32 = 1;

/// Sidecar manifest schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightManifest {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub weights_sha256: String,
    pub file_bytes: u64,
    pub tensors: Vec<TensorManifestEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorManifestEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub sha256: String,
}

fn hex(digest: &[u8]) -> String {
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn tensor_le_bytes(data: &[f32]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

/// `<path>.manifest.json` for a weight file at `path`.
pub fn manifest_path(weights: &Path) -> PathBuf {
    let mut name = weights
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".manifest.json");
    weights.with_file_name(name)
}

/// Expected container size in bytes for a spec, from the tensor catalog.
pub fn expected_file_bytes(spec: &ModelSpec) -> u64 {
    let payload: usize = ToyModel::tensor_catalog(spec)
        .iter()
        .map(|t| t.len() * 4)
        .sum();
    (16 + 32 + payload) as u64
}

impl ToyModel {
    /// Hex sha256 of the full tensor payload in catalog order; the model's
    /// identity checksum.
    pub fn weights_sha256(&self) -> String {
        let mut hasher = Sha256::new();
        for tensor in self.tensor_data() {
            hasher.update(tensor_le_bytes(tensor));
        }
        hex(&hasher.finalize())
    }

    /// Write the container and its sidecar manifest; returns the manifest.
    pub fn save(&self, path: &Path) -> Result<WeightManifest, ModelError> {
        let catalog = Self::tensor_catalog(&self.spec);
        let data = self.tensor_data();

        let mut file = fs::File::create(path)?;
        file.write_all(WEIGHT_MAGIC)?;
        file.write_all(&WEIGHT_FORMAT_VERSION.to_le_bytes())?;
        file.write_all(&0u32.to_le_bytes())?;
        for dim in [
            self.spec.vocab_size,
            self.spec.d_model,
            self.spec.n_layers,
            self.spec.n_heads,
            self.spec.d_ff,
            self.spec.max_seq,
        ] {
            file.write_all(&(dim as u32).to_le_bytes())?;
        }
        file.write_all(&self.spec.seed.to_le_bytes())?;

        let mut payload_hasher = Sha256::new();
        let mut tensors = Vec::with_capacity(catalog.len());
        for (desc, tensor) in catalog.iter().zip(&data) {
            let bytes = tensor_le_bytes(tensor);
            payload_hasher.update(&bytes);
            file.write_all(&bytes)?;
            tensors.push(TensorManifestEntry {
                name: desc.name.clone(),
                rows: desc.rows,
                cols: desc.cols,
                sha256: hex(&Sha256::digest(&bytes)),
            });
        }
        file.flush()?;

        let manifest = WeightManifest {
            format_version: WEIGHT_FORMAT_VERSION,
            spec: self.spec.clone(),
            weights_sha256: hex(&payload_hasher.finalize()),
            file_bytes: expected_file_bytes(&self.spec),
            tensors,
        };
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| ModelError::WeightFile(e.to_string()))?;
        fs::write(manifest_path(path), json)?;
        Ok(manifest)
    }

    /// Load a container, verifying it against its sidecar manifest.
    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let manifest_file = manifest_path(path);
        let manifest: WeightManifest =
            serde_json::from_str(&fs::read_to_string(&manifest_file).map_err(|e| {
                ModelError::WeightFile(format!(
                    "sidecar manifest {} not readable: {e}",
                    manifest_file.display()
                ))
            })?)
            .map_err(|e| ModelError::WeightFile(format!("manifest parse error: {e}")))?;

        let mut file = fs::File::open(path)?;
        let mut header = [0u8; 16];
        file.read_exact(&mut header)?;
        if &header[0..8] != WEIGHT_MAGIC {
            return Err(ModelError::WeightFile("bad magic".into()));
        }
        let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
        if version != WEIGHT_FORMAT_VERSION {
            return Err(ModelError::WeightFile(format!(
                "unsupported format version {version}"
            )));
        }

        let mut spec_block = [0u8; 32];
        file.read_exact(&mut spec_block)?;
        let dim = |i: usize| {
            u32::from_le_bytes(spec_block[i * 4..(i + 1) * 4].try_into().unwrap()) as usize
        };
        let spec = ModelSpec {
            vocab_size: dim(0),
            d_model: dim(1),
            n_layers: dim(2),
            n_heads: dim(3),
            d_ff: dim(4),
            max_seq: dim(5),
            seed: u64::from_le_bytes(spec_block[24..32].try_into().unwrap()),
        };
        spec.validate()?;
        if spec != manifest.spec {
            return Err(ModelError::ChecksumMismatch(
                "spec in weight file differs from manifest".into(),
            ));
        }

        let catalog = Self::tensor_catalog(&spec);
        if manifest.tensors.len() != catalog.len() {
            return Err(ModelError::ChecksumMismatch(format!(
                "manifest lists {} tensors, catalog has {}",
                manifest.tensors.len(),
                catalog.len()
            )));
        }

        let mut payload_hasher = Sha256::new();
        let mut tensors_data: Vec<Vec<f32>> = Vec::with_capacity(catalog.len());
        for (desc, entry) in catalog.iter().zip(&manifest.tensors) {
            if entry.name != desc.name || entry.rows != desc.rows || entry.cols != desc.cols {
                return Err(ModelError::ChecksumMismatch(format!(
                    "manifest tensor {} does not match catalog entry {}",
                    entry.name, desc.name
                )));
            }
            let mut bytes = vec![0u8; desc.len() * 4];
            file.read_exact(&mut bytes).map_err(|_| {
                ModelError::WeightFile(format!("truncated payload at tensor {}", desc.name))
            })?;
            let actual = hex(&Sha256::digest(&bytes));
            if actual != entry.sha256 {
                return Err(ModelError::ChecksumMismatch(format!(
                    "tensor {} hash {actual} does not match manifest {}",
                    desc.name, entry.sha256
                )));
            }
            payload_hasher.update(&bytes);
            tensors_data.push(
                bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            );
        }
        let mut trailing = Vec::new();
        file.read_to_end(&mut trailing)?;
        if !trailing.is_empty() {
            return Err(ModelError::WeightFile(format!(
                "{} trailing bytes after tensor payload",
                trailing.len()
            )));
        }
        let payload_hash = hex(&payload_hasher.finalize());
        if payload_hash != manifest.weights_sha256 {
            return Err(ModelError::ChecksumMismatch(format!(
                "payload hash {payload_hash} does not match manifest {}",
                manifest.weights_sha256
            )));
        }

        let mut iter = tensors_data.into_iter();
        Self::assemble(spec, |_| iter.next().expect("catalog length checked above"))
    }
}
