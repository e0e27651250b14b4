//! A seeded, untrained Llama-shaped transformer.
//!
//! Each layer is pre-norm: RMSNorm, single-head causal attention with
//! rotary position embeddings, residual add, RMSNorm, a SiLU-gated MLP
//! `down(silu(gate(x)) * up(x))`, residual add. A final RMSNorm feeds an
//! untied output projection.
//!
//! Every matrix `W` is stored row-major as `(in, out)` and applied as
//! `y = x W`, so K/Q/V/O are `d_model x d_model`, Up/Gate are
//! `d_model x d_hidden` and Down is `d_hidden x d_model`.
//!
//! Initialisation draws one [`SplitMix64`] stream seeded with `init_seed`,
//! one `next_weight` per value, in weight-file order: the seven matrices
//! of each layer by (layer, kind), then the token embedding, then the
//! output projection. RMSNorm gains start at 1.0 and consume no draws.
//!
//! Arithmetic is f32 with every dot product summed left to right, so a
//! given build reproduces its own outputs bit for bit.

use serde::{Deserialize, Serialize};

use super::rng::SplitMix64;
use super::tokenizer::Tokenizer;
use super::{layer_descriptors, Backend, GenParams, MatrixDescriptor, MatrixId, MatrixStats};
use crate::error::{Error, Result};
use crate::mutation::{validate_block, Extent, Mutation};

/// Printable ASCII followed by newline.
pub const DEFAULT_VOCAB: &str = " !\"#$%&'()*+,-./0123456789:;<=>?@ABCDEFGHIJKLMNOPQRSTUVWXYZ[\\]^_`abcdefghijklmnopqrstuvwxyz{|}~\n";

const RMS_EPS: f32 = 1e-6;
const ROPE_BASE: f32 = 10_000.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyModelConfig {
    pub layers: usize,
    pub d_model: usize,
    pub d_hidden: usize,
    #[serde(default = "default_vocab")]
    pub vocab: String,
    #[serde(default)]
    pub init_seed: u64,
}

fn default_vocab() -> String {
    DEFAULT_VOCAB.to_string()
}

impl Default for ToyModelConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            d_model: 16,
            d_hidden: 32,
            vocab: default_vocab(),
            init_seed: 0,
        }
    }
}

impl ToyModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.d_model == 0 || self.d_hidden == 0 {
            return Err(Error::Config(format!(
                "dimensions must be positive (layers={}, d_model={}, d_hidden={})",
                self.layers, self.d_model, self.d_hidden
            )));
        }
        for c in self.vocab.chars() {
            if !(c == '\n' || (' '..='~').contains(&c)) {
                return Err(Error::Config(format!(
                    "vocabulary character {c:?} is not printable ASCII or newline"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct ActiveMutation {
    matrix: usize,
    extent: Extent,
    saved: Vec<f32>,
}

#[derive(Debug, Clone)]
pub struct ToyModel {
    pub(super) config: ToyModelConfig,
    tokenizer: Tokenizer,
    descriptors: Vec<MatrixDescriptor>,
    /// `layers * 7` matrices indexed by `layer * 7 + kind`.
    pub(super) matrices: Vec<Vec<f32>>,
    pub(super) embed: Vec<f32>,
    pub(super) attn_norm: Vec<Vec<f32>>,
    pub(super) mlp_norm: Vec<Vec<f32>>,
    pub(super) final_norm: Vec<f32>,
    pub(super) unembed: Vec<f32>,
    pristine: Vec<MatrixStats>,
    active: Option<ActiveMutation>,
}

struct KvCache {
    keys: Vec<Vec<f32>>,
    values: Vec<Vec<f32>>,
}

pub fn silu(x: f32) -> f32 {
    x / (1.0 + (-x).exp())
}

/// `gain * x / rms(x)`.
pub fn rms_norm(x: &[f32], gain: &[f32], out: &mut [f32]) {
    let mut sum_sq = 0.0f32;
    for &v in x {
        sum_sq += v * v;
    }
    let scale = 1.0 / (sum_sq / x.len() as f32 + RMS_EPS).sqrt();
    for ((o, &v), &g) in out.iter_mut().zip(x).zip(gain) {
        *o = v * scale * g;
    }
}

/// `out = x W` for row-major `W` of shape `(x.len(), out.len())`.
fn vec_mat(x: &[f32], w: &[f32], out: &mut [f32]) {
    let cols = out.len();
    out.fill(0.0);
    for (i, &xi) in x.iter().enumerate() {
        let row = &w[i * cols..(i + 1) * cols];
        for (o, &wij) in out.iter_mut().zip(row) {
            *o += xi * wij;
        }
    }
}

fn rope(x: &mut [f32], pos: usize) {
    let d = x.len();
    for p in 0..d / 2 {
        let freq = 1.0 / ROPE_BASE.powf((2 * p) as f32 / d as f32);
        let (sin, cos) = (pos as f32 * freq).sin_cos();
        let (a, b) = (x[2 * p], x[2 * p + 1]);
        x[2 * p] = a * cos - b * sin;
        x[2 * p + 1] = a * sin + b * cos;
    }
}

impl ToyModel {
    pub fn new(config: ToyModelConfig) -> Result<Self> {
        config.validate()?;
        let tokenizer = Tokenizer::new(&config.vocab)?;
        let descriptors = layer_descriptors(config.layers, config.d_model, config.d_hidden);
        let mut rng = SplitMix64::new(config.init_seed);
        let mut draw = |n: usize| (0..n).map(|_| rng.next_weight()).collect::<Vec<f32>>();

        let matrices: Vec<Vec<f32>> = descriptors.iter().map(|d| draw(d.rows * d.cols)).collect();
        let vocab = tokenizer.len();
        let embed = draw(vocab * config.d_model);
        let unembed = draw(config.d_model * vocab);
        let ones = vec![1.0f32; config.d_model];

        Self::from_parts(
            config.clone(),
            matrices,
            embed,
            vec![ones.clone(); config.layers],
            vec![ones.clone(); config.layers],
            ones,
            unembed,
        )
    }

    pub(super) fn from_parts(
        config: ToyModelConfig,
        matrices: Vec<Vec<f32>>,
        embed: Vec<f32>,
        attn_norm: Vec<Vec<f32>>,
        mlp_norm: Vec<Vec<f32>>,
        final_norm: Vec<f32>,
        unembed: Vec<f32>,
    ) -> Result<Self> {
        config.validate()?;
        let tokenizer = Tokenizer::new(&config.vocab)?;
        let descriptors = layer_descriptors(config.layers, config.d_model, config.d_hidden);
        let pristine = matrices.iter().map(|m| MatrixStats::of(m)).collect();
        Ok(Self {
            config,
            tokenizer,
            descriptors,
            matrices,
            embed,
            attn_norm,
            mlp_norm,
            final_norm,
            unembed,
            pristine,
            active: None,
        })
    }

    pub fn config(&self) -> &ToyModelConfig {
        &self.config
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn descriptors(&self) -> &[MatrixDescriptor] {
        &self.descriptors
    }

    fn matrix_index(&self, id: MatrixId) -> Result<usize> {
        if id.layer >= self.config.layers {
            return Err(Error::Addressing(format!(
                "layer {} out of range (model has {} layers)",
                id.layer, self.config.layers
            )));
        }
        Ok(id.layer * 7 + id.kind.index())
    }

    /// Current (possibly mutated) values of a matrix, row-major.
    pub fn matrix(&self, id: MatrixId) -> Result<&[f32]> {
        Ok(&self.matrices[self.matrix_index(id)?])
    }

    /// Overwrites one element of a matrix and refreshes its pristine stats.
    /// Not allowed while a mutation is active.
    pub fn set_weight(&mut self, id: MatrixId, row: usize, col: usize, value: f32) -> Result<()> {
        if self.active.is_some() {
            return Err(Error::State("cannot edit weights while a mutation is active".into()));
        }
        let idx = self.matrix_index(id)?;
        let desc = self.descriptors[idx];
        if row >= desc.rows || col >= desc.cols {
            return Err(Error::Addressing(format!(
                "element ({row}, {col}) outside {}x{} matrix {id}",
                desc.rows, desc.cols
            )));
        }
        self.matrices[idx][row * desc.cols + col] = value;
        self.pristine[idx] = MatrixStats::of(&self.matrices[idx]);
        Ok(())
    }

    pub fn has_active_mutation(&self) -> bool {
        self.active.is_some()
    }

    fn forward(&self, token: u32, pos: usize, cache: &mut KvCache) -> Vec<f32> {
        let d = self.config.d_model;
        let h = self.config.d_hidden;
        let mut x = self.embed[token as usize * d..(token as usize + 1) * d].to_vec();
        let mut normed = vec![0.0f32; d];
        let (mut q, mut k, mut v) = (vec![0.0f32; d], vec![0.0f32; d], vec![0.0f32; d]);
        let mut attn = vec![0.0f32; d];
        let mut proj = vec![0.0f32; d];
        let (mut gate, mut up) = (vec![0.0f32; h], vec![0.0f32; h]);
        let inv_sqrt_d = 1.0 / (d as f32).sqrt();

        for layer in 0..self.config.layers {
            let m = &self.matrices[layer * 7..layer * 7 + 7];
            let [wk, wq, wv, wo, wup, wdown, wgate] = [&m[0], &m[1], &m[2], &m[3], &m[4], &m[5], &m[6]];

            rms_norm(&x, &self.attn_norm[layer], &mut normed);
            vec_mat(&normed, wq, &mut q);
            vec_mat(&normed, wk, &mut k);
            vec_mat(&normed, wv, &mut v);
            rope(&mut q, pos);
            rope(&mut k, pos);
            cache.keys[layer].extend_from_slice(&k);
            cache.values[layer].extend_from_slice(&v);

            let keys = &cache.keys[layer];
            let values = &cache.values[layer];
            let steps = keys.len() / d;
            let mut scores: Vec<f32> = (0..steps)
                .map(|t| {
                    let mut s = 0.0f32;
                    for (a, b) in q.iter().zip(&keys[t * d..(t + 1) * d]) {
                        s += a * b;
                    }
                    s * inv_sqrt_d
                })
                .collect();
            let peak = scores.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            let mut total = 0.0f32;
            for s in scores.iter_mut() {
                *s = (*s - peak).exp();
                total += *s;
            }
            attn.fill(0.0);
            for (t, s) in scores.iter().enumerate() {
                let p = s / total;
                for (a, &vv) in attn.iter_mut().zip(&values[t * d..(t + 1) * d]) {
                    *a += p * vv;
                }
            }
            vec_mat(&attn, wo, &mut proj);
            for (xi, pi) in x.iter_mut().zip(&proj) {
                *xi += pi;
            }

            rms_norm(&x, &self.mlp_norm[layer], &mut normed);
            vec_mat(&normed, wgate, &mut gate);
            vec_mat(&normed, wup, &mut up);
            for (g, u) in gate.iter_mut().zip(&up) {
                *g = silu(*g) * u;
            }
            vec_mat(&gate, wdown, &mut proj);
            for (xi, pi) in x.iter_mut().zip(&proj) {
                *xi += pi;
            }
        }

        rms_norm(&x, &self.final_norm, &mut normed);
        let mut logits = vec![0.0f32; self.tokenizer.len()];
        vec_mat(&normed, &self.unembed, &mut logits);
        logits
    }

    fn pick(logits: &[f32], temperature: f64, rng: &mut SplitMix64) -> u32 {
        if temperature == 0.0 {
            let mut best = 0;
            for (i, &l) in logits.iter().enumerate() {
                if l > logits[best] {
                    best = i;
                }
            }
            return best as u32;
        }
        let peak = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
        let weights: Vec<f64> = logits
            .iter()
            .map(|&l| ((l as f64 - peak) / temperature).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        let target = rng.next_unit_f64() * total;
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                return i as u32;
            }
        }
        (weights.len() - 1) as u32
    }

    fn generate_tokens(&self, prompt: &str, params: &GenParams) -> Result<String> {
        if prompt.is_empty() {
            return Err(Error::Input("prompt is empty".into()));
        }
        params.validate()?;
        let tokens = self.tokenizer.encode(prompt);
        let mut cache = KvCache {
            keys: vec![Vec::new(); self.config.layers],
            values: vec![Vec::new(); self.config.layers],
        };
        let mut logits = Vec::new();
        for (pos, &t) in tokens.iter().enumerate() {
            logits = self.forward(t, pos, &mut cache);
        }
        let mut rng = SplitMix64::new(params.seed);
        let mut out = Vec::with_capacity(params.max_length);
        for i in 0..params.max_length {
            let next = Self::pick(&logits, params.temperature, &mut rng);
            out.push(next);
            if i + 1 < params.max_length {
                logits = self.forward(next, tokens.len() + i, &mut cache);
            }
        }
        Ok(self.tokenizer.decode(&out))
    }

    /// SHA-256 of the weight-file encoding of the current weights.
    pub fn weights_digest(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.to_weight_bytes()))
    }
}

impl Backend for ToyModel {
    fn list_matrices(&mut self) -> Result<Vec<MatrixDescriptor>> {
        Ok(self.descriptors.clone())
    }

    fn matrix_stats(&mut self, id: MatrixId) -> Result<MatrixStats> {
        Ok(self.pristine[self.matrix_index(id)?])
    }

    fn apply_mutation(&mut self, mutation: &Mutation) -> Result<()> {
        if let Some(active) = &self.active {
            return Err(Error::State(format!(
                "mutation already active on {}",
                self.descriptors[active.matrix].id
            )));
        }
        let idx = self.matrix_index(mutation.block.matrix)?;
        let desc = self.descriptors[idx];
        validate_block(&desc, &mutation.block)?;
        let fill = mutation.kind.fill_value(self.pristine[idx]);
        let e = mutation.block.extent;
        let matrix = &mut self.matrices[idx];
        let mut saved = Vec::with_capacity(e.row_count * e.col_count);
        for r in e.row_start..e.row_start + e.row_count {
            let row = &mut matrix[r * desc.cols + e.col_start..r * desc.cols + e.col_start + e.col_count];
            saved.extend_from_slice(row);
            row.fill(fill);
        }
        self.active = Some(ActiveMutation {
            matrix: idx,
            extent: e,
            saved,
        });
        Ok(())
    }

    fn clear_mutation(&mut self) -> Result<()> {
        let Some(active) = self.active.take() else {
            return Ok(());
        };
        let cols = self.descriptors[active.matrix].cols;
        let e = active.extent;
        let matrix = &mut self.matrices[active.matrix];
        for (i, r) in (e.row_start..e.row_start + e.row_count).enumerate() {
            matrix[r * cols + e.col_start..r * cols + e.col_start + e.col_count]
                .copy_from_slice(&active.saved[i * e.col_count..(i + 1) * e.col_count]);
        }
        Ok(())
    }

    fn generate(&mut self, prompt: &str, params: &GenParams) -> Result<String> {
        self.generate_tokens(prompt, params)
    }

    fn fingerprint(&self) -> Option<String> {
        Some(self.weights_digest())
    }
}
