//! BERT-shaped transformer-encoder forward pass with per-category timing.

use serde::Deserialize;

use crate::dispatch::DispatchContext;
use crate::error::{invalid, Result};
use crate::gemm::{gemm_batched, GemmTask, PartitionParams, TransposeMode};
use crate::nn::kernels::{gelu, layer_norm, softmax_rows, LayerNormParams};
use crate::nn::linear::{
    linear_forward, profile_linear, LinearLayer, ProfileCache, ProfileTimer, TransposeFlags,
};
use crate::tensor::{random_matrix, Matrix, Rng};
use crate::timing::{Module, Sublayer, TimingBreakdown};

fn default_layers() -> usize {
    12
}
fn default_heads() -> usize {
    12
}
fn default_d_model() -> usize {
    768
}
fn default_d_ff() -> usize {
    3072
}
fn default_d_k() -> usize {
    64
}
fn default_max_len() -> usize {
    512
}
fn default_eps() -> f32 {
    1e-12
}
fn default_vocab() -> usize {
    1024
}

/// Encoder hyperparameters; the serde defaults are the BERT-base values.
#[derive(Debug, Clone, Copy, Deserialize)]
pub struct EncoderConfig {
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default = "default_heads")]
    pub heads: usize,
    #[serde(default = "default_d_model")]
    pub d_model: usize,
    #[serde(default = "default_d_ff")]
    pub d_ff: usize,
    #[serde(default = "default_d_k")]
    pub d_k: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    #[serde(default = "default_eps")]
    pub layernorm_eps: f32,
    #[serde(default = "default_vocab")]
    pub vocab: usize,
}

impl EncoderConfig {
    pub fn bert_base() -> Self {
        Self {
            layers: 12,
            heads: 12,
            d_model: 768,
            d_ff: 3072,
            d_k: 64,
            max_len: 512,
            layernorm_eps: 1e-12,
            vocab: 1024,
        }
    }

    pub fn bert_large() -> Self {
        Self { layers: 24, heads: 16, d_model: 1024, d_ff: 4096, ..Self::bert_base() }
    }

    pub fn distil() -> Self {
        Self { layers: 6, ..Self::bert_base() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0
            || self.heads == 0
            || self.d_model == 0
            || self.d_ff == 0
            || self.d_k == 0
            || self.max_len == 0
            || self.vocab == 0
        {
            return Err(invalid("all config counts must be >= 1"));
        }
        if self.heads * self.d_k != self.d_model {
            return Err(invalid(format!(
                "heads * d_k must equal d_model: {} * {} != {}",
                self.heads, self.d_k, self.d_model
            )));
        }
        if self.max_len > 512 {
            return Err(invalid("max_len must be <= 512"));
        }
        Ok(())
    }
}

/// Fused per-projection weights for multi-head attention.
#[derive(Debug, Clone)]
pub struct AttentionWeights {
    pub wq: LinearLayer,
    pub wk: LinearLayer,
    pub wv: LinearLayer,
    pub wo: LinearLayer,
}

#[derive(Debug, Clone)]
pub struct FfnWeights {
    pub w1: LinearLayer,
    pub w2: LinearLayer,
}

#[derive(Debug, Clone)]
pub struct EncoderLayerWeights {
    pub attn: AttentionWeights,
    pub ffn: FfnWeights,
    pub ln_attn: LayerNormParams,
    pub ln_ffn: LayerNormParams,
}

pub struct Model {
    pub config: EncoderConfig,
    pub embedding: Matrix,
    pub layers: Vec<EncoderLayerWeights>,
    pub pooler: LinearLayer,
    pub ctx: DispatchContext,
}

fn add_into(x: &Matrix, y: &Matrix) -> Matrix {
    let mut out = x.clone();
    for (a, b) in out.as_mut_slice().iter_mut().zip(y.as_slice()) {
        *a += b;
    }
    out
}

/// Splits a [len, d_model] activation into `heads` matrices of [len, d_k].
fn split_heads(x: &Matrix, heads: usize, d_k: usize) -> Vec<Matrix> {
    (0..heads)
        .map(|h| {
            let mut m = Matrix::zeros(x.rows(), d_k).expect("nonzero dims");
            for i in 0..x.rows() {
                let src = &x.row(i)[h * d_k..(h + 1) * d_k];
                m.row_mut(i).copy_from_slice(src);
            }
            m
        })
        .collect()
}

fn concat_heads(heads: &[Matrix], d_model: usize) -> Matrix {
    let len = heads[0].rows();
    let d_k = heads[0].cols();
    let mut out = Matrix::zeros(len, d_model).expect("nonzero dims");
    for (h, head) in heads.iter().enumerate() {
        for i in 0..len {
            out.row_mut(i)[h * d_k..(h + 1) * d_k].copy_from_slice(head.row(i));
        }
    }
    out
}

/// Multi-head self-attention: QKᵗ scores per head (one batched NT matmul),
/// softmax, attention-weighted values (one batched NN matmul), concat, and
/// the output projection.
pub fn self_attention(
    x: &Matrix,
    w: &AttentionWeights,
    cfg: &EncoderConfig,
    threads: usize,
    params: PartitionParams,
    ctx: &DispatchContext,
    bd: &mut TimingBreakdown,
) -> Result<Matrix> {
    if x.cols() != cfg.d_model {
        return Err(invalid(format!(
            "self_attention dim mismatch: input cols {} vs d_model {}",
            x.cols(),
            cfg.d_model
        )));
    }
    let q = bd.record(Module::Linear, Sublayer::AttnSelf, || {
        linear_forward(x, &w.wq, threads, params, ctx)
    })?;
    let k = bd.record(Module::Linear, Sublayer::AttnSelf, || {
        linear_forward(x, &w.wk, threads, params, ctx)
    })?;
    let v = bd.record(Module::Linear, Sublayer::AttnSelf, || {
        linear_forward(x, &w.wv, threads, params, ctx)
    })?;

    let (q_heads, k_heads, v_heads) = bd.record(Module::Other, Sublayer::AttnSelf, || {
        (
            split_heads(&q, cfg.heads, cfg.d_k),
            split_heads(&k, cfg.heads, cfg.d_k),
            split_heads(&v, cfg.heads, cfg.d_k),
        )
    });

    // First batched matmul: per-head score matrices S = Q·Kᵗ.
    let score_tasks: Vec<GemmTask> = q_heads
        .iter()
        .zip(&k_heads)
        .map(|(qh, kh)| GemmTask { a: qh.clone(), b: kh.clone(), mode: TransposeMode::NT })
        .collect();
    let mut scores =
        bd.record(Module::Bmm, Sublayer::AttnSelf, || gemm_batched(&score_tasks, params, threads))?;

    let scale = 1.0 / (cfg.d_k as f32).sqrt();
    bd.record(Module::Other, Sublayer::AttnSelf, || {
        for s in &mut scores {
            for v in s.as_mut_slice() {
                *v *= scale;
            }
        }
    });

    let probs: Vec<Matrix> = bd.record(Module::Softmax, Sublayer::AttnSelf, || {
        scores.iter().map(softmax_rows).collect()
    });

    // Second batched matmul: H = P·V.
    let ctx_tasks: Vec<GemmTask> = probs
        .iter()
        .zip(&v_heads)
        .map(|(p, vh)| GemmTask { a: p.clone(), b: vh.clone(), mode: TransposeMode::NN })
        .collect();
    let head_outs =
        bd.record(Module::Bmm, Sublayer::AttnSelf, || gemm_batched(&ctx_tasks, params, threads))?;

    let concat =
        bd.record(Module::Other, Sublayer::AttnSelf, || concat_heads(&head_outs, cfg.d_model));

    bd.record(Module::Linear, Sublayer::AttnDense, || {
        linear_forward(&concat, &w.wo, threads, params, ctx)
    })
}

/// Act(x·W1 + b1)·W2 + b2 with gelu as the activation.
pub fn feed_forward(
    x: &Matrix,
    w: &FfnWeights,
    threads: usize,
    params: PartitionParams,
    ctx: &DispatchContext,
    bd: &mut TimingBreakdown,
) -> Result<Matrix> {
    let h = bd.record(Module::Linear, Sublayer::FfnDense1, || {
        linear_forward(x, &w.w1, threads, params, ctx)
    })?;
    let a = bd.record(Module::Activation, Sublayer::FfnOther, || gelu(&h));
    bd.record(Module::Linear, Sublayer::FfnDense2, || {
        linear_forward(&a, &w.w2, threads, params, ctx)
    })
}

/// Post-norm residual ordering: y1 = LN(x + Attn(x)); y2 = LN(y1 + Ffn(y1)).
pub fn encoder_layer(
    x: &Matrix,
    lw: &EncoderLayerWeights,
    cfg: &EncoderConfig,
    threads: usize,
    params: PartitionParams,
    ctx: &DispatchContext,
    bd: &mut TimingBreakdown,
) -> Result<Matrix> {
    let attn = self_attention(x, &lw.attn, cfg, threads, params, ctx, bd)?;
    let sum = bd.record(Module::Other, Sublayer::AttnOther, || add_into(x, &attn));
    let y1 = bd.record(Module::LayerNorm, Sublayer::AttnLayerNorm, || {
        layer_norm(&sum, &lw.ln_attn)
    })?;

    let ffn = feed_forward(&y1, &lw.ffn, threads, params, ctx, bd)?;
    let sum = bd.record(Module::Other, Sublayer::FfnOther, || add_into(&y1, &ffn));
    bd.record(Module::LayerNorm, Sublayer::FfnLayerNorm, || layer_norm(&sum, &lw.ln_ffn))
}

fn random_layer_norm(d_model: usize, eps: f32) -> LayerNormParams {
    LayerNormParams::identity(d_model, eps)
}

/// Deterministically initializes all weights from the seed. When `profile`
/// is on, runs the one-time profiling phase per distinct linear shape via
/// the shared cache; when off, every flag defaults to the transposed form.
pub fn build_model(
    cfg: EncoderConfig,
    seed: u64,
    threads: usize,
    cache: &ProfileCache,
    profile: bool,
    timer: &mut dyn ProfileTimer,
) -> Result<Model> {
    cfg.validate()?;
    let mut rng = Rng::new(seed);
    let embedding = random_matrix(cfg.vocab, cfg.d_model, &mut rng)?;

    let mut flags_for = |in_dim: usize, out_dim: usize| -> Result<TransposeFlags> {
        if profile {
            profile_linear(in_dim, out_dim, threads, cache, timer)
        } else {
            Ok(TransposeFlags::all_transposed())
        }
    };

    let mut layers = Vec::with_capacity(cfg.layers);
    for _ in 0..cfg.layers {
        let mut square = || LinearLayer::random(cfg.d_model, cfg.d_model, &mut rng);
        let mut wq = square()?;
        let mut wk = square()?;
        let mut wv = square()?;
        let mut wo = square()?;
        let mut w1 = LinearLayer::random(cfg.d_model, cfg.d_ff, &mut rng)?;
        let mut w2 = LinearLayer::random(cfg.d_ff, cfg.d_model, &mut rng)?;
        for layer in [&mut wq, &mut wk, &mut wv, &mut wo, &mut w1, &mut w2] {
            layer.flags = flags_for(layer.in_dim, layer.out_dim)?;
        }
        layers.push(EncoderLayerWeights {
            attn: AttentionWeights { wq, wk, wv, wo },
            ffn: FfnWeights { w1, w2 },
            ln_attn: random_layer_norm(cfg.d_model, cfg.layernorm_eps),
            ln_ffn: random_layer_norm(cfg.d_model, cfg.layernorm_eps),
        });
    }

    let mut pooler = LinearLayer::random(cfg.d_model, cfg.d_model, &mut rng)?;
    pooler.flags = flags_for(pooler.in_dim, pooler.out_dim)?;

    Ok(Model { config: cfg, embedding, layers, pooler, ctx: DispatchContext::new() })
}

/// Embeds tokens, runs all encoder layers, pools the first token through the
/// pooler linear + tanh. Returns the pooled vector and the accumulated
/// timing breakdown.
pub fn model_forward(
    model: &Model,
    token_ids: &[usize],
    threads: usize,
    params: PartitionParams,
) -> Result<(Matrix, TimingBreakdown)> {
    let cfg = &model.config;
    if token_ids.is_empty() {
        return Err(invalid("token_ids must be non-empty"));
    }
    if token_ids.len() > cfg.max_len {
        return Err(invalid(format!(
            "sequence length {} exceeds max_len {}",
            token_ids.len(),
            cfg.max_len
        )));
    }
    if let Some(&bad) = token_ids.iter().find(|&&id| id >= cfg.vocab) {
        return Err(invalid(format!("token id {bad} out of vocab ({})", cfg.vocab)));
    }

    let mut bd = TimingBreakdown::new();
    let t0 = std::time::Instant::now();

    let mut x = bd.record(Module::Other, Sublayer::Other, || {
        let mut m = Matrix::zeros(token_ids.len(), cfg.d_model).expect("nonzero dims");
        for (i, &id) in token_ids.iter().enumerate() {
            m.row_mut(i).copy_from_slice(model.embedding.row(id));
        }
        m
    });

    for lw in &model.layers {
        x = encoder_layer(&x, lw, cfg, threads, params, &model.ctx, &mut bd)?;
    }

    let first = Matrix::from_vec(1, cfg.d_model, x.row(0).to_vec())?;
    let pooled =
        bd.record(Module::Linear, Sublayer::Other, || {
            linear_forward(&first, &model.pooler, threads, params, &model.ctx)
        })?;
    let pooled = bd.record(Module::Activation, Sublayer::Other, || {
        let mut p = pooled;
        for v in p.as_mut_slice() {
            *v = v.tanh();
        }
        p
    });

    bd.total_ns = t0.elapsed().as_nanos() as u64;
    Ok((pooled, bd))
}
