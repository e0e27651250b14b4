//! Weight file: one JSON header line followed by little-endian f32 data.
//!
//! The header names every tensor with its shape and byte offset into the
//! data section (which starts right after the header's `\n`). Tensors are
//! row-major. The per-layer matrices come first, ordered by (layer, kind),
//! followed by `embed`, each layer's `attn_norm` and `mlp_norm`,
//! `final_norm` and `unembed`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::toy::{ToyModel, ToyModelConfig};
use super::{layer_descriptors, Tokenizer};
use crate::error::{Error, Result};

pub const WEIGHT_FORMAT: &str = "mutascreen-weights";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightHeader {
    pub format: String,
    pub version: u32,
    pub config: ToyModelConfig,
    pub tensors: Vec<WeightTensor>,
}

fn layout(config: &ToyModelConfig, vocab: usize) -> Vec<WeightTensor> {
    let mut shapes: Vec<(String, usize, usize)> = layer_descriptors(config.layers, config.d_model, config.d_hidden)
        .into_iter()
        .map(|d| (d.id.to_string(), d.rows, d.cols))
        .collect();
    shapes.push(("embed".into(), vocab, config.d_model));
    for l in 0..config.layers {
        shapes.push((format!("L{l}_attn_norm"), 1, config.d_model));
    }
    for l in 0..config.layers {
        shapes.push((format!("L{l}_mlp_norm"), 1, config.d_model));
    }
    shapes.push(("final_norm".into(), 1, config.d_model));
    shapes.push(("unembed".into(), config.d_model, vocab));

    let mut offset = 0;
    shapes
        .into_iter()
        .map(|(name, rows, cols)| {
            let t = WeightTensor {
                name,
                rows,
                cols,
                offset,
            };
            offset += rows * cols * 4;
            t
        })
        .collect()
}

impl ToyModel {
    fn tensors_in_order(&self) -> Vec<&[f32]> {
        let mut out: Vec<&[f32]> = self.matrices.iter().map(Vec::as_slice).collect();
        out.push(&self.embed);
        out.extend(self.attn_norm.iter().map(Vec::as_slice));
        out.extend(self.mlp_norm.iter().map(Vec::as_slice));
        out.push(&self.final_norm);
        out.push(&self.unembed);
        out
    }

    pub fn weight_header(&self) -> WeightHeader {
        WeightHeader {
            format: WEIGHT_FORMAT.into(),
            version: 1,
            config: self.config.clone(),
            tensors: layout(&self.config, self.tokenizer().len()),
        }
    }

    pub fn to_weight_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec(&self.weight_header()).expect("header serializes");
        bytes.push(b'\n');
        for tensor in self.tensors_in_order() {
            for v in tensor {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        bytes
    }

    pub fn from_weight_bytes(bytes: &[u8]) -> Result<Self> {
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::WeightFile("missing header line".into()))?;
        let header: WeightHeader = serde_json::from_slice(&bytes[..newline])
            .map_err(|e| Error::WeightFile(format!("bad header: {e}")))?;
        if header.format != WEIGHT_FORMAT || header.version != 1 {
            return Err(Error::WeightFile(format!(
                "unsupported format {} v{}",
                header.format, header.version
            )));
        }
        header.config.validate()?;
        let vocab = Tokenizer::new(&header.config.vocab)?.len();
        let expected = layout(&header.config, vocab);
        if header.tensors != expected {
            return Err(Error::WeightFile(
                "tensor table does not match the configured topology".into(),
            ));
        }
        let data = &bytes[newline + 1..];
        let total: usize = expected.iter().map(|t| t.rows * t.cols * 4).sum();
        if data.len() != total {
            return Err(Error::WeightFile(format!(
                "expected {total} data bytes, found {}",
                data.len()
            )));
        }
        let mut tensors = expected.iter().map(|t| {
            data[t.offset..t.offset + t.rows * t.cols * 4]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect::<Vec<f32>>()
        });
        let layers = header.config.layers;
        let mut take = |n: usize| (&mut tensors).take(n).collect::<Vec<_>>();
        let matrices = take(layers * 7);
        let embed = take(1).remove(0);
        let attn_norm = take(layers);
        let mlp_norm = take(layers);
        let final_norm = take(1).remove(0);
        let unembed = take(1).remove(0);
        ToyModel::from_parts(header.config, matrices, embed, attn_norm, mlp_norm, final_norm, unembed)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_weight_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_weight_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Backend, GenParams, MatrixId, MatrixKind};

    #[test]
    fn round_trip_preserves_behaviour() {
        let mut model = ToyModel::new(ToyModelConfig::default()).unwrap();
        model.set_weight(MatrixId::new(1, MatrixKind::Down), 3, 4, 0.75).unwrap();
        let bytes = model.to_weight_bytes();
        let mut loaded = ToyModel::from_weight_bytes(&bytes).unwrap();
        assert_eq!(loaded.to_weight_bytes(), bytes);
        let p = GenParams {
            max_length: 12,
            ..Default::default()
        };
        assert_eq!(model.generate("abc", &p).unwrap(), loaded.generate("abc", &p).unwrap());
        let id = MatrixId::new(1, MatrixKind::Down);
        assert_eq!(loaded.matrix_stats(id).unwrap().max, 0.75);
    }

    #[test]
    fn header_layout() {
        let model = ToyModel::new(ToyModelConfig::default()).unwrap();
        let header = model.weight_header();
        assert_eq!(header.tensors[0].name, "L0_K");
        assert_eq!(header.tensors[6].name, "L0_Gate");
        assert_eq!((header.tensors[6].rows, header.tensors[6].cols), (16, 32));
        assert_eq!(header.tensors[7].offset, header.tensors[6].offset + 16 * 32 * 4);
    }

    #[test]
    fn truncated_file_rejected() {
        let model = ToyModel::new(ToyModelConfig::default()).unwrap();
        let mut bytes = model.to_weight_bytes();
        bytes.truncate(bytes.len() - 4);
        assert!(matches!(ToyModel::from_weight_bytes(&bytes), Err(Error::WeightFile(_))));
        assert!(ToyModel::from_weight_bytes(b"no header").is_err());
    }
}
