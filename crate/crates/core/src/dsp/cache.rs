//! Feature cache: a flat little-endian `f32` blob with a JSON sidecar.
//!
//! `features.f32` holds all rows of all items back to back; `features.json`
//! records `shape = [total_rows, dim]`, the dtype, feature names, where each
//! item's rows start, and which normalization (if any) was applied.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{functional_names, NormStats, N_FUNCTIONALS, N_MELS};
use crate::error::{self, Error, Result};

pub const DTYPE: &str = "float32-le";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    LogMfb,
    Functionals,
}

impl FeatureKind {
    pub fn dim(self) -> usize {
        match self {
            FeatureKind::LogMfb => N_MELS,
            FeatureKind::Functionals => N_FUNCTIONALS,
        }
    }

    pub fn feature_names(self) -> Vec<String> {
        match self {
            FeatureKind::LogMfb => (0..N_MELS).map(|i| format!("log_mfb_{i:02}")).collect(),
            FeatureKind::Functionals => functional_names().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureItem {
    pub id: String,
    /// Row-major `rows x dim`.
    pub data: Vec<f64>,
    pub valid: bool,
}

impl FeatureItem {
    pub fn rows(&self, dim: usize) -> usize {
        self.data.len() / dim
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub kind: FeatureKind,
    pub items: Vec<FeatureItem>,
    pub norm: Option<NormProvenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormProvenance {
    pub stats: NormStats,
    /// Item ids whose rows were pooled to fit `stats`.
    pub fit_on: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ItemEntry {
    id: String,
    offset: usize,
    rows: usize,
    valid: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    kind: FeatureKind,
    dtype: String,
    shape: [usize; 2],
    feature_names: Vec<String>,
    items: Vec<ItemEntry>,
    norm_stats: Option<NormProvenance>,
}

impl FeatureSet {
    pub fn new(kind: FeatureKind) -> Self {
        FeatureSet {
            kind,
            items: Vec::new(),
            norm: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn get(&self, id: &str) -> Option<&FeatureItem> {
        self.items.iter().find(|i| i.id == id)
    }
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("f32"), stem.with_extension("json"))
}

/// Writes `<stem>.f32` and `<stem>.json`.
pub fn save_feature_set(set: &FeatureSet, stem: &Path) -> Result<()> {
    let dim = set.dim();
    let (bin, json) = paths(stem);
    let mut bytes = Vec::new();
    let mut items = Vec::with_capacity(set.items.len());
    let mut offset = 0;
    for it in &set.items {
        if it.data.len() % dim != 0 {
            return Err(Error::Shape(format!("item `{}` is not a multiple of {dim}", it.id)));
        }
        let rows = it.rows(dim);
        items.push(ItemEntry {
            id: it.id.clone(),
            offset,
            rows,
            valid: it.valid,
        });
        offset += rows;
        for &v in &it.data {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let sidecar = Sidecar {
        kind: set.kind,
        dtype: DTYPE.into(),
        shape: [offset, dim],
        feature_names: set.kind.feature_names(),
        items,
        norm_stats: set.norm.clone(),
    };
    if let Some(parent) = bin.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    error::write_json(&json, &sidecar)
}

/// Reads a feature set written by [`save_feature_set`]; `stem` may carry either extension.
pub fn load_feature_set(stem: &Path) -> Result<FeatureSet> {
    let (bin, json) = paths(stem);
    let sidecar: Sidecar = error::read_json(&json)?;
    if sidecar.dtype != DTYPE {
        return Err(Error::Format {
            field: "dtype",
            found: sidecar.dtype,
            expected: DTYPE.into(),
        });
    }
    let dim = sidecar.kind.dim();
    if sidecar.shape[1] != dim {
        return Err(Error::Shape(format!("sidecar dim {} != {dim}", sidecar.shape[1])));
    }
    let bytes = std::fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    if bytes.len() != sidecar.shape[0] * dim * 4 {
        return Err(Error::Shape(format!(
            "{} holds {} bytes, sidecar shape needs {}",
            bin.display(),
            bytes.len(),
            sidecar.shape[0] * dim * 4
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    let items = sidecar
        .items
        .into_iter()
        .map(|e| {
            let (a, b) = (e.offset * dim, (e.offset + e.rows) * dim);
            if b > values.len() {
                return Err(Error::Shape(format!("item `{}` runs past the blob", e.id)));
            }
            Ok(FeatureItem {
                id: e.id,
                data: values[a..b].to_vec(),
                valid: e.valid,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureSet {
        kind: sidecar.kind,
        items,
        norm: sidecar.norm_stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_f32_exact() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("feat");
        let mut set = FeatureSet::new(FeatureKind::LogMfb);
        set.items.push(FeatureItem {
            id: "a".into(),
            data: (0..80).map(|i| i as f64 * 0.25 - 3.0).collect(),
            valid: true,
        });
        set.items.push(FeatureItem {
            id: "b".into(),
            data: vec![],
            valid: true,
        });
        save_feature_set(&set, &stem).unwrap();
        let bytes = std::fs::read(dir.path().join("feat.f32")).unwrap();
        assert_eq!(bytes.len(), 80 * 4);
        assert_eq!(&bytes[..4], &(-3.0f32).to_le_bytes());
        let back = load_feature_set(&stem).unwrap();
        assert_eq!(back, set);

        let side: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("feat.json")).unwrap()).unwrap();
        assert_eq!(side["shape"], serde_json::json!([2, 40]));
        assert_eq!(side["dtype"], "float32-le");
        assert_eq!(side["feature_names"].as_array().unwrap().len(), 40);
    }

    #[test]
    fn truncated_blob_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("f");
        let mut set = FeatureSet::new(FeatureKind::Functionals);
        set.items.push(FeatureItem {
            id: "x".into(),
            data: vec![1.0; 88],
            valid: true,
        });
        save_feature_set(&set, &stem).unwrap();
        std::fs::write(dir.path().join("f.f32"), [0u8; 10]).unwrap();
        assert!(matches!(load_feature_set(&stem), Err(Error::Shape(_))));
    }
}
