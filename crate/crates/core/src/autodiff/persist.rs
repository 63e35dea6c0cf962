//! Weight files: a JSON manifest plus a little-endian `f64` blob.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::fsutil;

pub const WEIGHTS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightEntry {
    pub name: String,
    pub shape: [usize; 2],
    /// Byte offset into the blob.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightManifest {
    pub format_version: u32,
    pub dtype: String,
    pub blob: String,
    pub blob_sha256: String,
    pub params: Vec<WeightEntry>,
}

/// Encode parameters as (manifest, blob) without touching the filesystem.
pub fn encode_weights(params: &ParamSet, blob_name: &str) -> Result<(WeightManifest, Vec<u8>)> {
    let mut blob = Vec::with_capacity(params.num_values() * 8);
    let mut entries = Vec::new();
    for id in params.ids() {
        let t = params.value(id);
        entries.push(WeightEntry {
            name: params.name(id).to_string(),
            shape: [t.rows(), t.cols()],
            offset: blob.len(),
        });
        for v in t.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = WeightManifest {
        format_version: WEIGHTS_VERSION,
        dtype: "f64".into(),
        blob: blob_name.into(),
        blob_sha256: fsutil::sha256_hex(&blob),
        params: entries,
    };
    Ok((manifest, blob))
}

pub fn decode_weights(manifest: &WeightManifest, blob: &[u8]) -> Result<ParamSet> {
    if manifest.format_version != WEIGHTS_VERSION {
        return Err(Error::Version {
            found: manifest.format_version,
            expected: WEIGHTS_VERSION,
        });
    }
    if manifest.dtype != "f64" {
        return Err(Error::Schema(format!("unsupported dtype `{}`", manifest.dtype)));
    }
    if fsutil::sha256_hex(blob) != manifest.blob_sha256 {
        return Err(Error::Schema("weight blob hash mismatch".into()));
    }
    let mut params = ParamSet::new();
    for e in &manifest.params {
        let n = e.shape[0] * e.shape[1];
        let bytes = blob
            .get(e.offset..e.offset + n * 8)
            .ok_or_else(|| Error::Schema(format!("blob too short for `{}`", e.name)))?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        params.add(e.name.clone(), Tensor::from_vec(e.shape[0], e.shape[1], data)?)?;
    }
    Ok(params)
}

/// Write `<stem>.weights.json` and `<stem>.weights.bin` under `dir`.
pub fn save_weights(params: &ParamSet, dir: &Path, stem: &str) -> Result<()> {
    let blob_name = format!("{stem}.weights.bin");
    let (manifest, blob) = encode_weights(params, &blob_name)?;
    fsutil::write_atomic(&dir.join(&blob_name), &blob)?;
    fsutil::write_atomic(
        &dir.join(format!("{stem}.weights.json")),
        fsutil::to_sorted_json(&manifest)?.as_bytes(),
    )
}

pub fn load_weights(dir: &Path, stem: &str, command: &'static str) -> Result<ParamSet> {
    let manifest_path = dir.join(format!("{stem}.weights.json"));
    let manifest: WeightManifest = serde_json::from_str(&fsutil::read_to_string(&manifest_path, command)?)?;
    let blob_path = dir.join(&manifest.blob);
    let blob = std::fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
    decode_weights(&manifest, &blob)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut p = ParamSet::new();
        p.add("a", Tensor::from_vec(2, 2, vec![1.0, -0.1, 1e-300, f64::MAX]).unwrap())
            .unwrap();
        p.add("b", Tensor::row(vec![std::f64::consts::PI])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_weights(&p, dir.path(), "m").unwrap();
        let back = load_weights(dir.path(), "m", "train").unwrap();
        assert_eq!(back, p);
        let (_, blob1) = encode_weights(&p, "x").unwrap();
        let (_, blob2) = encode_weights(&back, "x").unwrap();
        assert_eq!(blob1, blob2);
    }

    #[test]
    fn truncated_blob_rejected() {
        let mut p = ParamSet::new();
        p.add("a", Tensor::row(vec![1.0, 2.0])).unwrap();
        let (mut m, blob) = encode_weights(&p, "x").unwrap();
        m.blob_sha256 = fsutil::sha256_hex(&blob[..8]);
        assert!(decode_weights(&m, &blob[..8]).is_err());
        let (mut m, blob) = encode_weights(&p, "x").unwrap();
        m.format_version = 9;
        assert!(matches!(decode_weights(&m, &blob), Err(Error::Version { .. })));
    }
}
