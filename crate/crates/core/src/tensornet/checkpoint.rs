use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::{Error, Result};

pub const FORMAT: &str = "gits-tensors/1";

/// A named 2-D tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub value: Matrix,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        NamedTensor {
            name: name.into(),
            value,
        }
    }
}

/// Flat list of named tensors plus free-form metadata.
///
/// On disk: JSON with per-tensor shape headers and a base64 payload of
/// little-endian `f64`, so values round-trip bit for bit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub tensors: Vec<NamedTensor>,
    pub meta: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    rows: usize,
    cols: usize,
    data: String,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    #[serde(default)]
    meta: serde_json::Value,
    tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn new(tensors: Vec<NamedTensor>) -> Self {
        Checkpoint {
            tensors,
            meta: serde_json::Value::Null,
        }
    }

    pub fn with_meta(mut self, meta: serde_json::Value) -> Self {
        self.meta = meta;
        self
    }

    pub fn get(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Prefixes every tensor name, for nesting several models in one file.
    pub fn prefixed(self, prefix: &str) -> Vec<NamedTensor> {
        self.tensors
            .into_iter()
            .map(|t| NamedTensor::new(format!("{prefix}{}", t.name), t.value))
            .collect()
    }

    /// Tensors whose name starts with `prefix`, with the prefix stripped.
    pub fn sub(&self, prefix: &str) -> Checkpoint {
        let tensors = self
            .tensors
            .iter()
            .filter_map(|t| {
                t.name
                    .strip_prefix(prefix)
                    .map(|n| NamedTensor::new(n, t.value.clone()))
            })
            .collect();
        Checkpoint::new(tensors)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CheckpointFile {
            format: FORMAT.to_string(),
            meta: self.meta.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| {
                    let mut bytes = Vec::with_capacity(t.value.len() * 8);
                    for v in t.value.as_slice() {
                        bytes.extend_from_slice(&v.to_le_bytes());
                    }
                    TensorRecord {
                        name: t.name.clone(),
                        rows: t.value.rows(),
                        cols: t.value.cols(),
                        data: STANDARD.encode(bytes),
                    }
                })
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CheckpointFile = serde_json::from_str(text)?;
        if file.format != FORMAT {
            return Err(Error::Checkpoint(format!(
                "unsupported format {:?}",
                file.format
            )));
        }
        let mut tensors = Vec::with_capacity(file.tensors.len());
        for rec in file.tensors {
            let bytes = STANDARD
                .decode(rec.data.as_bytes())
                .map_err(|e| Error::Checkpoint(format!("tensor {}: {e}", rec.name)))?;
            if bytes.len() != rec.rows * rec.cols * 8 {
                return Err(Error::Checkpoint(format!(
                    "tensor {}: payload has {} bytes for shape {}x{}",
                    rec.name,
                    bytes.len(),
                    rec.rows,
                    rec.cols
                )));
            }
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect();
            tensors.push(NamedTensor::new(
                rec.name,
                Matrix::from_vec(rec.rows, rec.cols, data)?,
            ));
        }
        Ok(Checkpoint {
            tensors,
            meta: file.meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            rows in 0usize..5,
            cols in 0usize..5,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..rows * cols)
                .map(|_| f64::from_bits(rng.gen::<u64>() & 0x7fef_ffff_ffff_ffff))
                .collect();
            let ckpt = Checkpoint::new(vec![NamedTensor::new("t", Matrix::from_vec(rows, cols, data).unwrap())])
                .with_meta(serde_json::json!({"k": 1}));
            let back = Checkpoint::from_json(&ckpt.to_json().unwrap()).unwrap();
            prop_assert_eq!(back.tensors.len(), 1);
            let a: Vec<u64> = ckpt.tensors[0].value.as_slice().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.tensors[0].value.as_slice().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
            prop_assert_eq!(back.meta, ckpt.meta);
        }
    }

    #[test]
    fn rejects_truncated_payload() {
        let text = r#"{"format":"gits-tensors/1","tensors":[{"name":"a","rows":1,"cols":2,"data":"AAAAAAAAAAA="}]}"#;
        assert!(matches!(
            Checkpoint::from_json(text),
            Err(Error::Checkpoint(_))
        ));
    }
}
