//! Self-attentive text encoder with a bilinear similarity head.
//!
//! A text is embedded token by token, summed with a fixed sinusoidal
//! positional table, passed through a stack of post-norm multi-head
//! self-attention layers (scaled dot-product attention, residual + layer
//! norm, position-wise feed-forward with ReLU, residual + layer norm) and
//! max-pooled over positions into one fixed-size vector. A statement vector
//! `s` and a proof vector `p` are scored as `sᵀ W p + b`.
//!
//! All parameters live in one flat `f64` buffer described by a named-tensor
//! layout; gradients are a parallel buffer. The backward pass is written by
//! hand and checked against central finite differences in the tests.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{
    layer_norm, layer_norm_backward, matmul, matmul_a_bt_acc, matmul_at_b_acc, softmax_row,
    softmax_row_backward, LayerNormCache,
};
use crate::math;
use crate::matrix::ScoreMatrix;
use crate::rng::Xoshiro256;

/// Pooled representation of one text.
pub type TextVector = Vec<f64>;

/// Encoder hyperparameters. Defaults follow the reference configuration:
/// 300-dimensional embeddings, two 4-head layers with 128-dimensional
/// queries and keys, texts up to 500 tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderConfig {
    /// Token embedding width `w`. Must equal `model_dim`: the layer stack
    /// has no input projection.
    pub embed_dim: usize,
    /// Number of self-attention layers.
    pub layers: usize,
    /// Width `d` of the contextualized token vectors.
    pub model_dim: usize,
    /// Attention heads per layer.
    pub heads: usize,
    /// Query/key width per head.
    pub key_dim: usize,
    /// Inner width of the position-wise feed-forward (2·d by default).
    pub ffn_dim: usize,
    /// Longest admissible text.
    pub max_len: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            embed_dim: 300,
            layers: 2,
            model_dim: 300,
            heads: 4,
            key_dim: 128,
            ffn_dim: 600,
            max_len: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    EmbedModelMismatch { embed_dim: usize, model_dim: usize },
    HeadsDontDivideModelDim { model_dim: usize, heads: usize },
    ZeroDimension(&'static str),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::EmbedModelMismatch {
                embed_dim,
                model_dim,
            } => write!(
                f,
                "embed_dim ({embed_dim}) must equal model_dim ({model_dim}); \
                 the layer stack has no input projection"
            ),
            ConfigError::HeadsDontDivideModelDim { model_dim, heads } => {
                write!(f, "model_dim ({model_dim}) must be divisible by heads ({heads})")
            }
            ConfigError::ZeroDimension(name) => write!(f, "{name} must be positive"),
        }
    }
}

impl core::error::Error for ConfigError {}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("embed_dim", self.embed_dim),
            ("layers", self.layers),
            ("model_dim", self.model_dim),
            ("heads", self.heads),
            ("key_dim", self.key_dim),
            ("ffn_dim", self.ffn_dim),
            ("max_len", self.max_len),
        ] {
            if v == 0 {
                return Err(ConfigError::ZeroDimension(name));
            }
        }
        if self.embed_dim != self.model_dim {
            return Err(ConfigError::EmbedModelMismatch {
                embed_dim: self.embed_dim,
                model_dim: self.model_dim,
            });
        }
        if self.model_dim % self.heads != 0 {
            return Err(ConfigError::HeadsDontDivideModelDim {
                model_dim: self.model_dim,
                heads: self.heads,
            });
        }
        Ok(())
    }

    /// Value width per head.
    pub fn value_dim(&self) -> usize {
        self.model_dim / self.heads
    }
}

/// One named tensor inside the flat parameter buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn build_layout(config: &EncoderConfig, vocab_size: usize) -> Vec<TensorSpec> {
    let d = config.model_dim;
    let hdk = config.heads * config.key_dim;
    let hdv = config.heads * config.value_dim();
    let f = config.ffn_dim;
    let mut specs = Vec::new();
    let mut offset = 0;
    let mut push = |name: String, shape: Vec<usize>| {
        let len: usize = shape.iter().product();
        specs.push(TensorSpec {
            name,
            shape,
            offset,
        });
        offset += len;
    };
    push("embedding".into(), vec![vocab_size, d]);
    for l in 0..config.layers {
        push(alloc::format!("layers.{l}.attn.wq"), vec![d, hdk]);
        push(alloc::format!("layers.{l}.attn.wk"), vec![d, hdk]);
        push(alloc::format!("layers.{l}.attn.wv"), vec![d, hdv]);
        push(alloc::format!("layers.{l}.attn.wo"), vec![hdv, d]);
        push(alloc::format!("layers.{l}.ln1.gain"), vec![d]);
        push(alloc::format!("layers.{l}.ln1.bias"), vec![d]);
        push(alloc::format!("layers.{l}.ffn.w1"), vec![d, f]);
        push(alloc::format!("layers.{l}.ffn.b1"), vec![f]);
        push(alloc::format!("layers.{l}.ffn.w2"), vec![f, d]);
        push(alloc::format!("layers.{l}.ffn.b2"), vec![d]);
        push(alloc::format!("layers.{l}.ln2.gain"), vec![d]);
        push(alloc::format!("layers.{l}.ln2.bias"), vec![d]);
    }
    push("bilinear.w".into(), vec![d, d]);
    push("bilinear.b".into(), vec![1]);
    specs
}

/// Fixed sinusoidal positional table: `pos[t, 2i] = sin(t / 10000^(2i/d))`,
/// `pos[t, 2i+1] = cos` of the same angle.
fn build_positional_table(max_len: usize, d: usize) -> Vec<f64> {
    let mut table = vec![0.0; max_len * d];
    for t in 0..max_len {
        for i in 0..d {
            let exponent = 2.0 * (i / 2) as f64 / d as f64;
            let angle = t as f64 / math::powf(10000.0, exponent);
            table[t * d + i] = if i % 2 == 0 {
                math::sin(angle)
            } else {
                math::cos(angle)
            };
        }
    }
    table
}

/// Gradient buffer shaped like a model's parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    values: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &EncoderModel) -> Self {
        Self {
            values: vec![0.0; model.params.len()],
        }
    }

    pub fn zero(&mut self) {
        self.values.fill(0.0);
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncodeError {
    EmptyText,
    TooLong { len: usize, max_len: usize },
    BadTokenId { id: u32, vocab_size: usize },
}

impl fmt::Display for EncodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EncodeError::EmptyText => write!(f, "cannot encode empty text"),
            EncodeError::TooLong { len, max_len } => {
                write!(f, "text of {len} tokens exceeds max_len {max_len}")
            }
            EncodeError::BadTokenId { id, vocab_size } => {
                write!(f, "token id {id} out of range for vocabulary of {vocab_size}")
            }
        }
    }
}

impl core::error::Error for EncodeError {}

struct LayerTrace {
    /// Query/key/value projections, `L x (h*dk)` / `L x (h*dv)`.
    qf: Vec<f64>,
    kf: Vec<f64>,
    vf: Vec<f64>,
    /// Attention distributions, one `L x L` block per head.
    probs: Vec<f64>,
    /// Concatenated per-head contexts, `L x (h*dv)`.
    ctx: Vec<f64>,
    ln1: LayerNormCache,
    /// Output of the first layer norm (input to the feed-forward).
    n1: Vec<f64>,
    /// Post-ReLU feed-forward hidden activations, `L x f`.
    h_act: Vec<f64>,
    ln2: LayerNormCache,
    /// Layer output, `L x d`.
    n2: Vec<f64>,
}

/// Recorded activations of one forward pass, consumed by the backward pass.
pub struct EncodeTrace {
    ids: Vec<u32>,
    /// Embedding + positional input, `L x d`.
    x0: Vec<f64>,
    layers: Vec<LayerTrace>,
    /// Winning row per output coordinate of the max-pool.
    argmax: Vec<usize>,
    pooled: TextVector,
}

impl EncodeTrace {
    pub fn pooled(&self) -> &TextVector {
        &self.pooled
    }
}

/// Embedding table, attention stack and bilinear head over one vocabulary.
#[derive(Debug, Clone)]
pub struct EncoderModel {
    config: EncoderConfig,
    vocab_size: usize,
    layout: Vec<TensorSpec>,
    params: Vec<f64>,
    pos_table: Vec<f64>,
}

impl EncoderModel {
    /// Initializes parameters from a seed: embeddings N(0, 1) so token
    /// content sits at the same scale as the sinusoidal positional table
    /// (a much smaller scale makes every text encode to nearly the same
    /// vector and stalls training at the uniform-softmax fixed point),
    /// weight matrices uniform Xavier, biases zero, layer-norm gains one.
    pub fn new(config: EncoderConfig, vocab_size: usize, seed: u64) -> Result<Self, ConfigError> {
        config.validate()?;
        let layout = build_layout(&config, vocab_size);
        let total: usize = layout.iter().map(TensorSpec::len).sum();
        let mut params = vec![0.0; total];
        let mut rng = Xoshiro256::from_seed(seed);
        for spec in &layout {
            let slice = &mut params[spec.offset..spec.offset + spec.len()];
            if spec.name == "embedding" {
                for v in slice {
                    *v = rng.next_normal();
                }
            } else if spec.name.ends_with(".gain") {
                slice.fill(1.0);
            } else if spec.name.ends_with(".bias")
                || spec.name.ends_with(".b1")
                || spec.name.ends_with(".b2")
                || spec.name == "bilinear.b"
            {
                slice.fill(0.0);
            } else {
                // Weight matrix: uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)).
                let fan_in = spec.shape[0];
                let fan_out = spec.shape[1];
                let mut a = math::sqrt(6.0 / (fan_in + fan_out) as f64);
                if spec.name == "bilinear.w" {
                    // Small random, not identity: pooled vectors have norm
                    // ~sqrt(d), so Xavier scale would make initial scores
                    // spread over tens of nats and saturate the in-batch
                    // softmax. Shrinking W starts training at the uniform
                    // softmax with bounded gradients.
                    a /= config.model_dim as f64;
                }
                for v in slice {
                    *v = rng.uniform(-a, a);
                }
            }
        }
        let pos_table = build_positional_table(config.max_len, config.model_dim);
        Ok(Self {
            config,
            vocab_size,
            layout,
            params,
            pos_table,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn layout(&self) -> &[TensorSpec] {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Replaces all parameters (shapes must match the layout).
    pub fn set_params(&mut self, params: Vec<f64>) {
        assert_eq!(params.len(), self.params.len(), "parameter count mismatch");
        self.params = params;
    }

    fn spec(&self, name: &str) -> &TensorSpec {
        self.layout
            .iter()
            .find(|s| s.name == name)
            .unwrap_or_else(|| panic!("unknown tensor {name:?}"))
    }

    pub fn tensor(&self, name: &str) -> &[f64] {
        let spec = self.spec(name);
        &self.params[spec.offset..spec.offset + spec.len()]
    }

    pub fn tensor_mut(&mut self, name: &str) -> &mut [f64] {
        let spec = self.spec(name);
        let (offset, len) = (spec.offset, spec.len());
        &mut self.params[offset..offset + len]
    }

    /// Gradient slice of a named tensor.
    pub fn grad_tensor<'g>(&self, grads: &'g Gradients, name: &str) -> &'g [f64] {
        let spec = self.spec(name);
        &grads.values[spec.offset..spec.offset + spec.len()]
    }

    fn check_ids(&self, ids: &[u32]) -> Result<(), EncodeError> {
        if ids.is_empty() {
            return Err(EncodeError::EmptyText);
        }
        if ids.len() > self.config.max_len {
            return Err(EncodeError::TooLong {
                len: ids.len(),
                max_len: self.config.max_len,
            });
        }
        for &id in ids {
            if id as usize >= self.vocab_size {
                return Err(EncodeError::BadTokenId {
                    id,
                    vocab_size: self.vocab_size,
                });
            }
        }
        Ok(())
    }

    /// Encodes a token-id sequence into a fixed-size vector.
    pub fn encode(&self, ids: &[u32]) -> Result<TextVector, EncodeError> {
        Ok(self.encode_with_trace(ids)?.pooled)
    }

    /// Encodes while recording every activation needed by
    /// [`EncoderModel::encode_backward`].
    pub fn encode_with_trace(&self, ids: &[u32]) -> Result<EncodeTrace, EncodeError> {
        self.check_ids(ids)?;
        let d = self.config.model_dim;
        let h = self.config.heads;
        let dk = self.config.key_dim;
        let dv = self.config.value_dim();
        let hdk = h * dk;
        let hdv = h * dv;
        let f = self.config.ffn_dim;
        let len = ids.len();
        let scale = 1.0 / math::sqrt(dk as f64);

        let emb = self.tensor("embedding");
        let mut x0 = vec![0.0; len * d];
        for (t, &id) in ids.iter().enumerate() {
            let erow = &emb[id as usize * d..(id as usize + 1) * d];
            let prow = &self.pos_table[t * d..(t + 1) * d];
            let xrow = &mut x0[t * d..(t + 1) * d];
            for ((x, &e), &p) in xrow.iter_mut().zip(erow).zip(prow) {
                *x = e + p;
            }
        }

        let mut layers = Vec::with_capacity(self.config.layers);
        let mut x = x0.clone();
        for l in 0..self.config.layers {
            let wq = self.tensor(&alloc::format!("layers.{l}.attn.wq"));
            let wk = self.tensor(&alloc::format!("layers.{l}.attn.wk"));
            let wv = self.tensor(&alloc::format!("layers.{l}.attn.wv"));
            let wo = self.tensor(&alloc::format!("layers.{l}.attn.wo"));
            let g1 = self.tensor(&alloc::format!("layers.{l}.ln1.gain"));
            let b1 = self.tensor(&alloc::format!("layers.{l}.ln1.bias"));
            let w1 = self.tensor(&alloc::format!("layers.{l}.ffn.w1"));
            let fb1 = self.tensor(&alloc::format!("layers.{l}.ffn.b1"));
            let w2 = self.tensor(&alloc::format!("layers.{l}.ffn.w2"));
            let fb2 = self.tensor(&alloc::format!("layers.{l}.ffn.b2"));
            let g2 = self.tensor(&alloc::format!("layers.{l}.ln2.gain"));
            let b2 = self.tensor(&alloc::format!("layers.{l}.ln2.bias"));

            let mut qf = vec![0.0; len * hdk];
            let mut kf = vec![0.0; len * hdk];
            let mut vf = vec![0.0; len * hdv];
            matmul(&mut qf, &x, wq, len, d, hdk);
            matmul(&mut kf, &x, wk, len, d, hdk);
            matmul(&mut vf, &x, wv, len, d, hdv);

            let mut probs = vec![0.0; h * len * len];
            let mut ctx = vec![0.0; len * hdv];
            for a in 0..h {
                let head = &mut probs[a * len * len..(a + 1) * len * len];
                for i in 0..len {
                    let qrow = &qf[i * hdk + a * dk..i * hdk + (a + 1) * dk];
                    let srow = &mut head[i * len..(i + 1) * len];
                    for (j, s) in srow.iter_mut().enumerate() {
                        let krow = &kf[j * hdk + a * dk..j * hdk + (a + 1) * dk];
                        *s = scale * crate::linalg::dot(qrow, krow);
                    }
                    softmax_row(srow);
                }
                for i in 0..len {
                    let prow = &head[i * len..(i + 1) * len];
                    // Split so the i-th ctx row can be written while vf is read.
                    for (j, &p) in prow.iter().enumerate() {
                        let vrow = &vf[j * hdv + a * dv..j * hdv + (a + 1) * dv];
                        let crow = &mut ctx[i * hdv + a * dv..i * hdv + (a + 1) * dv];
                        for (c, &v) in crow.iter_mut().zip(vrow) {
                            *c += p * v;
                        }
                    }
                }
            }

            let mut attn_out = vec![0.0; len * d];
            matmul(&mut attn_out, &ctx, wo, len, hdv, d);

            // Residual + first layer norm.
            let mut r1 = x.clone();
            for (r, &a) in r1.iter_mut().zip(&attn_out) {
                *r += a;
            }
            let mut n1 = vec![0.0; len * d];
            let ln1 = layer_norm(&mut n1, &r1, g1, b1, len, d);

            // Position-wise feed-forward with ReLU.
            let mut h_act = vec![0.0; len * f];
            matmul(&mut h_act, &n1, w1, len, d, f);
            for t in 0..len {
                let row = &mut h_act[t * f..(t + 1) * f];
                for (v, &b) in row.iter_mut().zip(fb1) {
                    *v = (*v + b).max(0.0);
                }
            }
            let mut ffn_out = vec![0.0; len * d];
            matmul(&mut ffn_out, &h_act, w2, len, f, d);
            for t in 0..len {
                let row = &mut ffn_out[t * d..(t + 1) * d];
                for (v, &b) in row.iter_mut().zip(fb2) {
                    *v += b;
                }
            }

            // Residual + second layer norm.
            let mut r2 = n1.clone();
            for (r, &v) in r2.iter_mut().zip(&ffn_out) {
                *r += v;
            }
            let mut n2 = vec![0.0; len * d];
            let ln2 = layer_norm(&mut n2, &r2, g2, b2, len, d);

            x = n2.clone();
            layers.push(LayerTrace {
                qf,
                kf,
                vf,
                probs,
                ctx,
                ln1,
                n1,
                h_act,
                ln2,
                n2,
            });
        }

        // Coordinate-wise max-pool over positions.
        let mut pooled = vec![f64::NEG_INFINITY; d];
        let mut argmax = vec![0usize; d];
        for t in 0..len {
            let row = &x[t * d..(t + 1) * d];
            for (c, &v) in row.iter().enumerate() {
                if v > pooled[c] {
                    pooled[c] = v;
                    argmax[c] = t;
                }
            }
        }

        Ok(EncodeTrace {
            ids: ids.to_vec(),
            x0,
            layers,
            argmax,
            pooled,
        })
    }

    /// Accumulates parameter gradients for one text given the gradient of
    /// the loss with respect to its pooled vector.
    pub fn encode_backward(&self, trace: &EncodeTrace, d_pooled: &[f64], grads: &mut Gradients) {
        let d = self.config.model_dim;
        let h = self.config.heads;
        let dk = self.config.key_dim;
        let dv = self.config.value_dim();
        let hdk = h * dk;
        let hdv = h * dv;
        let f = self.config.ffn_dim;
        let len = trace.ids.len();
        let scale = 1.0 / math::sqrt(dk as f64);
        debug_assert_eq!(d_pooled.len(), d);

        // Route pooled gradients to the argmax positions.
        let mut dy = vec![0.0; len * d];
        for (c, (&t, &g)) in trace.argmax.iter().zip(d_pooled).enumerate() {
            dy[t * d + c] += g;
        }

        for l in (0..self.config.layers).rev() {
            let trace_l = &trace.layers[l];
            let input: &[f64] = if l == 0 {
                &trace.x0
            } else {
                &trace.layers[l - 1].n2
            };
            let wq = self.tensor(&alloc::format!("layers.{l}.attn.wq"));
            let wk = self.tensor(&alloc::format!("layers.{l}.attn.wk"));
            let wv = self.tensor(&alloc::format!("layers.{l}.attn.wv"));
            let wo = self.tensor(&alloc::format!("layers.{l}.attn.wo"));
            let g1 = self.tensor(&alloc::format!("layers.{l}.ln1.gain"));
            let w1 = self.tensor(&alloc::format!("layers.{l}.ffn.w1"));
            let w2 = self.tensor(&alloc::format!("layers.{l}.ffn.w2"));
            let g2 = self.tensor(&alloc::format!("layers.{l}.ln2.gain"));

            // Second layer norm.
            let mut d_r2 = vec![0.0; len * d];
            {
                let (dgain, dbias) = grad_pair(
                    &self.layout,
                    grads,
                    &alloc::format!("layers.{l}.ln2.gain"),
                    &alloc::format!("layers.{l}.ln2.bias"),
                );
                layer_norm_backward(&mut d_r2, dgain, dbias, &dy, &trace_l.ln2, g2, len, d);
            }

            // Residual: r2 = n1 + ffn_out.
            let mut d_n1 = d_r2.clone();
            let d_ffn_out = d_r2;

            // Feed-forward backward.
            {
                let spec_w2 = self.spec(&alloc::format!("layers.{l}.ffn.w2")).clone();
                let dw2 = &mut grads.values[spec_w2.offset..spec_w2.offset + spec_w2.len()];
                matmul_at_b_acc(dw2, &trace_l.h_act, &d_ffn_out, len, f, d);
            }
            {
                let spec_b2 = self.spec(&alloc::format!("layers.{l}.ffn.b2")).clone();
                let db2 = &mut grads.values[spec_b2.offset..spec_b2.offset + spec_b2.len()];
                for t in 0..len {
                    for (b, &g) in db2.iter_mut().zip(&d_ffn_out[t * d..(t + 1) * d]) {
                        *b += g;
                    }
                }
            }
            let mut d_hact = vec![0.0; len * f];
            matmul_a_bt_acc(&mut d_hact, &d_ffn_out, w2, len, f, d);
            // ReLU mask: h_act stores the post-activation values.
            for (g, &a) in d_hact.iter_mut().zip(&trace_l.h_act) {
                if a <= 0.0 {
                    *g = 0.0;
                }
            }
            {
                let spec_w1 = self.spec(&alloc::format!("layers.{l}.ffn.w1")).clone();
                let dw1 = &mut grads.values[spec_w1.offset..spec_w1.offset + spec_w1.len()];
                matmul_at_b_acc(dw1, &trace_l.n1, &d_hact, len, d, f);
            }
            {
                let spec_b1 = self.spec(&alloc::format!("layers.{l}.ffn.b1")).clone();
                let db1 = &mut grads.values[spec_b1.offset..spec_b1.offset + spec_b1.len()];
                for t in 0..len {
                    for (b, &g) in db1.iter_mut().zip(&d_hact[t * f..(t + 1) * f]) {
                        *b += g;
                    }
                }
            }
            matmul_a_bt_acc(&mut d_n1, &d_hact, w1, len, d, f);

            // First layer norm.
            let mut d_r1 = vec![0.0; len * d];
            {
                let (dgain, dbias) = grad_pair(
                    &self.layout,
                    grads,
                    &alloc::format!("layers.{l}.ln1.gain"),
                    &alloc::format!("layers.{l}.ln1.bias"),
                );
                layer_norm_backward(&mut d_r1, dgain, dbias, &d_n1, &trace_l.ln1, g1, len, d);
            }

            // Residual: r1 = x + attn_out.
            let mut d_x = d_r1.clone();
            let d_attn_out = d_r1;

            // Attention output projection.
            {
                let spec_wo = self.spec(&alloc::format!("layers.{l}.attn.wo")).clone();
                let dwo = &mut grads.values[spec_wo.offset..spec_wo.offset + spec_wo.len()];
                matmul_at_b_acc(dwo, &trace_l.ctx, &d_attn_out, len, hdv, d);
            }
            let mut d_ctx = vec![0.0; len * hdv];
            matmul_a_bt_acc(&mut d_ctx, &d_attn_out, wo, len, hdv, d);

            // Per-head attention backward.
            let mut d_qf = vec![0.0; len * hdk];
            let mut d_kf = vec![0.0; len * hdk];
            let mut d_vf = vec![0.0; len * hdv];
            let mut d_probs_row = vec![0.0; len];
            let mut d_scores_row = vec![0.0; len];
            for a in 0..h {
                let head = &trace_l.probs[a * len * len..(a + 1) * len * len];
                for i in 0..len {
                    let prow = &head[i * len..(i + 1) * len];
                    let dctx_row = &d_ctx[i * hdv + a * dv..i * hdv + (a + 1) * dv];
                    // dP[i,j] = <dCtx_i, V_j>; dV_j += P[i,j] * dCtx_i.
                    for j in 0..len {
                        let vrow = &trace_l.vf[j * hdv + a * dv..j * hdv + (a + 1) * dv];
                        d_probs_row[j] = crate::linalg::dot(dctx_row, vrow);
                        let dvrow = &mut d_vf[j * hdv + a * dv..j * hdv + (a + 1) * dv];
                        let p = prow[j];
                        for (dv_c, &dc) in dvrow.iter_mut().zip(dctx_row) {
                            *dv_c += p * dc;
                        }
                    }
                    softmax_row_backward(&mut d_scores_row, prow, &d_probs_row);
                    // Scores were scaled by 1/sqrt(dk).
                    let qrow = &trace_l.qf[i * hdk + a * dk..i * hdk + (a + 1) * dk];
                    for j in 0..len {
                        let ds = d_scores_row[j] * scale;
                        if ds == 0.0 {
                            continue;
                        }
                        let krow = &trace_l.kf[j * hdk + a * dk..j * hdk + (a + 1) * dk];
                        let dqrow = &mut d_qf[i * hdk + a * dk..i * hdk + (a + 1) * dk];
                        for (dq, &k) in dqrow.iter_mut().zip(krow) {
                            *dq += ds * k;
                        }
                        let dkrow = &mut d_kf[j * hdk + a * dk..j * hdk + (a + 1) * dk];
                        for (dkv, &q) in dkrow.iter_mut().zip(qrow) {
                            *dkv += ds * q;
                        }
                    }
                }
            }

            // Projection weights and input gradients.
            {
                let spec = self.spec(&alloc::format!("layers.{l}.attn.wq")).clone();
                let dwq = &mut grads.values[spec.offset..spec.offset + spec.len()];
                matmul_at_b_acc(dwq, input, &d_qf, len, d, hdk);
            }
            {
                let spec = self.spec(&alloc::format!("layers.{l}.attn.wk")).clone();
                let dwk = &mut grads.values[spec.offset..spec.offset + spec.len()];
                matmul_at_b_acc(dwk, input, &d_kf, len, d, hdk);
            }
            {
                let spec = self.spec(&alloc::format!("layers.{l}.attn.wv")).clone();
                let dwv = &mut grads.values[spec.offset..spec.offset + spec.len()];
                matmul_at_b_acc(dwv, input, &d_vf, len, d, hdv);
            }
            matmul_a_bt_acc(&mut d_x, &d_qf, wq, len, d, hdk);
            matmul_a_bt_acc(&mut d_x, &d_kf, wk, len, d, hdk);
            matmul_a_bt_acc(&mut d_x, &d_vf, wv, len, d, hdv);

            dy = d_x;
        }

        // Embedding gradients (the positional table is fixed).
        let spec_emb = self.spec("embedding").clone();
        let demb = &mut grads.values[spec_emb.offset..spec_emb.offset + spec_emb.len()];
        for (t, &id) in trace.ids.iter().enumerate() {
            let row = &mut demb[id as usize * d..(id as usize + 1) * d];
            for (e, &g) in row.iter_mut().zip(&dy[t * d..(t + 1) * d]) {
                *e += g;
            }
        }
    }

    /// Bilinear association score `sᵀ W p + b`.
    pub fn bilinear_score(&self, s_vec: &[f64], p_vec: &[f64]) -> f64 {
        let d = self.config.model_dim;
        debug_assert_eq!(s_vec.len(), d);
        debug_assert_eq!(p_vec.len(), d);
        let w = self.tensor("bilinear.w");
        let b = self.tensor("bilinear.b")[0];
        let mut acc = 0.0;
        for (c, &sv) in s_vec.iter().enumerate() {
            acc += sv * crate::linalg::dot(&w[c * d..(c + 1) * d], p_vec);
        }
        acc + b
    }

    /// Scores every statement against every proof, encoding each text
    /// exactly once (`n + n` encoder passes).
    pub fn score_all(
        &self,
        statements: &[Vec<u32>],
        proofs: &[Vec<u32>],
    ) -> Result<ScoreMatrix, EncodeError> {
        let fwd = self.score_all_with_trace(statements, proofs)?;
        Ok(fwd.matrix)
    }

    /// Like [`EncoderModel::score_all`] but keeps the per-text activation
    /// traces so gradients can flow back from the score matrix.
    pub fn score_all_with_trace(
        &self,
        statements: &[Vec<u32>],
        proofs: &[Vec<u32>],
    ) -> Result<BatchForward, EncodeError> {
        assert_eq!(
            statements.len(),
            proofs.len(),
            "statement and proof lists must have equal length"
        );
        assert!(!statements.is_empty(), "empty batch");
        let n = statements.len();
        let d = self.config.model_dim;
        let mut s_traces = Vec::with_capacity(n);
        let mut p_traces = Vec::with_capacity(n);
        for ids in statements {
            s_traces.push(self.encode_with_trace(ids)?);
        }
        for ids in proofs {
            p_traces.push(self.encode_with_trace(ids)?);
        }

        // Flatten the pooled vectors into n x d matrices.
        let mut s_mat = vec![0.0; n * d];
        let mut p_mat = vec![0.0; n * d];
        for (i, t) in s_traces.iter().enumerate() {
            s_mat[i * d..(i + 1) * d].copy_from_slice(&t.pooled);
        }
        for (j, t) in p_traces.iter().enumerate() {
            p_mat[j * d..(j + 1) * d].copy_from_slice(&t.pooled);
        }

        // M = S W Pᵀ + b.
        let w = self.tensor("bilinear.w");
        let b = self.tensor("bilinear.b")[0];
        let mut sw = vec![0.0; n * d];
        matmul(&mut sw, &s_mat, w, n, d, d);
        let mut values = vec![0.0; n * n];
        matmul_a_bt_acc(&mut values, &sw, &p_mat, n, n, d);
        for v in values.iter_mut() {
            *v += b;
        }

        Ok(BatchForward {
            matrix: ScoreMatrix::from_values(n, values),
            s_mat,
            p_mat,
            s_traces,
            p_traces,
        })
    }

    /// Backpropagates a gradient on the score matrix through the bilinear
    /// head and both encoder passes of every text.
    pub fn backward_scores(
        &self,
        fwd: &BatchForward,
        d_scores: &ScoreMatrix,
        grads: &mut Gradients,
    ) {
        let n = fwd.s_traces.len();
        let d = self.config.model_dim;
        assert_eq!(d_scores.n(), n, "gradient matrix dimension mismatch");
        let g = d_scores.values();
        let w = self.tensor("bilinear.w");

        // GP = G · P and GS = Gᵀ · S, both n x d.
        let mut gp = vec![0.0; n * d];
        matmul(&mut gp, g, &fwd.p_mat, n, n, d);
        let mut gs = vec![0.0; n * d];
        matmul_at_b_acc(&mut gs, g, &fwd.s_mat, n, n, d);

        // dW += Sᵀ · GP; db += sum(G).
        {
            let spec = self.spec("bilinear.w").clone();
            let dw = &mut grads.values[spec.offset..spec.offset + spec.len()];
            matmul_at_b_acc(dw, &fwd.s_mat, &gp, n, d, d);
        }
        {
            let spec = self.spec("bilinear.b").clone();
            grads.values[spec.offset] += g.iter().sum::<f64>();
        }

        // dS = GP Wᵀ, dP = GS W.
        let mut d_s = vec![0.0; n * d];
        matmul_a_bt_acc(&mut d_s, &gp, w, n, d, d);
        let mut d_p = vec![0.0; n * d];
        matmul(&mut d_p, &gs, w, n, d, d);

        for (i, trace) in fwd.s_traces.iter().enumerate() {
            self.encode_backward(trace, &d_s[i * d..(i + 1) * d], grads);
        }
        for (j, trace) in fwd.p_traces.iter().enumerate() {
            self.encode_backward(trace, &d_p[j * d..(j + 1) * d], grads);
        }
    }
}

/// Disjoint gain/bias gradient slices for a layer-norm backward call.
fn grad_pair<'g>(
    layout: &[TensorSpec],
    grads: &'g mut Gradients,
    gain_name: &str,
    bias_name: &str,
) -> (&'g mut [f64], &'g mut [f64]) {
    let gain = layout.iter().find(|s| s.name == gain_name).unwrap();
    let bias = layout.iter().find(|s| s.name == bias_name).unwrap();
    debug_assert_eq!(gain.offset + gain.len(), bias.offset, "gain/bias not adjacent");
    let (left, right) = grads.values.split_at_mut(bias.offset);
    (
        &mut left[gain.offset..gain.offset + gain.len()],
        &mut right[..bias.len()],
    )
}

/// Forward pass over a batch: pooled vectors, per-text traces and the score
/// matrix. Consumed by [`EncoderModel::backward_scores`].
pub struct BatchForward {
    pub matrix: ScoreMatrix,
    s_mat: Vec<f64>,
    p_mat: Vec<f64>,
    s_traces: Vec<EncodeTrace>,
    p_traces: Vec<EncodeTrace>,
}

impl BatchForward {
    pub fn statement_vector(&self, i: usize) -> &[f64] {
        let d = self.s_mat.len() / self.s_traces.len();
        &self.s_mat[i * d..(i + 1) * d]
    }

    pub fn proof_vector(&self, j: usize) -> &[f64] {
        let d = self.p_mat.len() / self.p_traces.len();
        &self.p_mat[j * d..(j + 1) * d]
    }
}
