//! Model backends: the contract every screened model satisfies, plus a
//! small Llama-shaped toy transformer that runs entirely on the CPU.

mod adapter;
mod rng;
mod tokenizer;
mod toy;
mod weights;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mutation::Mutation;

pub use adapter::{serve_adapter, AdapterBackend, AdapterRequest, AdapterResponse};
pub use rng::SplitMix64;
pub use tokenizer::Tokenizer;
pub use toy::{rms_norm, silu, ToyModel, ToyModelConfig, DEFAULT_VOCAB};
pub use weights::{WeightHeader, WeightTensor};

/// The seven weight matrices of every transformer layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MatrixKind {
    K,
    Q,
    V,
    O,
    Up,
    Down,
    Gate,
}

impl MatrixKind {
    pub const ALL: [MatrixKind; 7] = [
        MatrixKind::K,
        MatrixKind::Q,
        MatrixKind::V,
        MatrixKind::O,
        MatrixKind::Up,
        MatrixKind::Down,
        MatrixKind::Gate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MatrixKind::K => "K",
            MatrixKind::Q => "Q",
            MatrixKind::V => "V",
            MatrixKind::O => "O",
            MatrixKind::Up => "Up",
            MatrixKind::Down => "Down",
            MatrixKind::Gate => "Gate",
        }
    }

    /// Position of the kind within a layer, in `ALL` order.
    pub fn index(self) -> usize {
        self as usize
    }

    /// Up and Gate maps are drawn transposed.
    pub fn is_presented_transposed(self) -> bool {
        matches!(self, MatrixKind::Up | MatrixKind::Gate)
    }
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MatrixKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MatrixKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Input(format!("unknown matrix kind `{s}`")))
    }
}

/// Address of one weight matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MatrixId {
    pub layer: usize,
    pub kind: MatrixKind,
}

impl MatrixId {
    pub fn new(layer: usize, kind: MatrixKind) -> Self {
        Self { layer, kind }
    }
}

impl fmt::Display for MatrixId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}_{}", self.layer, self.kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixDescriptor {
    pub id: MatrixId,
    pub rows: usize,
    pub cols: usize,
}

/// Extrema of a pristine matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixStats {
    pub min: f32,
    pub max: f32,
}

impl MatrixStats {
    pub fn of(values: &[f32]) -> Self {
        let mut min = f32::INFINITY;
        let mut max = f32::NEG_INFINITY;
        for &v in values {
            min = min.min(v);
            max = max.max(v);
        }
        Self { min, max }
    }
}

/// Decoding parameters. A temperature of zero selects greedy decoding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub temperature: f64,
    pub max_length: usize,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            temperature: 0.7,
            max_length: 150,
            seed: 0,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::Config(format!(
                "temperature must be finite and non-negative, got {}",
                self.temperature
            )));
        }
        if self.max_length == 0 {
            return Err(Error::Config("max_length must be positive".into()));
        }
        Ok(())
    }
}

/// Operations a screen needs from a model.
///
/// At most one mutation is active on a backend at a time; the fill value
/// of a mutation always comes from the pristine matrix extrema.
pub trait Backend: Send {
    /// All matrices ordered by (layer, kind).
    fn list_matrices(&mut self) -> Result<Vec<MatrixDescriptor>>;

    fn matrix_stats(&mut self, id: MatrixId) -> Result<MatrixStats>;

    fn apply_mutation(&mut self, mutation: &Mutation) -> Result<()>;

    fn clear_mutation(&mut self) -> Result<()>;

    /// Generated text only; the prompt is not echoed.
    fn generate(&mut self, prompt: &str, params: &GenParams) -> Result<String>;

    /// Content hash of the current weights, when the backend can compute one.
    fn fingerprint(&self) -> Option<String> {
        None
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn list_matrices(&mut self) -> Result<Vec<MatrixDescriptor>> {
        (**self).list_matrices()
    }
    fn matrix_stats(&mut self, id: MatrixId) -> Result<MatrixStats> {
        (**self).matrix_stats(id)
    }
    fn apply_mutation(&mut self, mutation: &Mutation) -> Result<()> {
        (**self).apply_mutation(mutation)
    }
    fn clear_mutation(&mut self) -> Result<()> {
        (**self).clear_mutation()
    }
    fn generate(&mut self, prompt: &str, params: &GenParams) -> Result<String> {
        (**self).generate(prompt, params)
    }
    fn fingerprint(&self) -> Option<String> {
        (**self).fingerprint()
    }
}

/// `list_matrices` for a model with uniform per-kind shapes.
pub fn layer_descriptors(layers: usize, d_model: usize, d_hidden: usize) -> Vec<MatrixDescriptor> {
    let mut out = Vec::with_capacity(layers * 7);
    for layer in 0..layers {
        for kind in MatrixKind::ALL {
            let (rows, cols) = match kind {
                MatrixKind::K | MatrixKind::Q | MatrixKind::V | MatrixKind::O => (d_model, d_model),
                MatrixKind::Up | MatrixKind::Gate => (d_model, d_hidden),
                MatrixKind::Down => (d_hidden, d_model),
            };
            out.push(MatrixDescriptor {
                id: MatrixId::new(layer, kind),
                rows,
                cols,
            });
        }
    }
    out
}
