//! Miniature transformer over the character alphabet.
//!
//! The model runs in one of two attention modes: `Causal` for next-token
//! scoring and `Bidirectional` for embedding extraction. Each block can
//! optionally carry a single-head cross-attention layer that reads an
//! acoustic feature sequence; its value projection starts at zero so a
//! freshly built cross-attentive model behaves exactly like the plain one.

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::alphabet::{PAD, VOCAB_SIZE};
use crate::engine::{Init, ParamId, ParamStore, Tape, TapeBind, Var};
use crate::error::{Error, Result};

/// Attention masking mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LmMode {
    /// Position i attends to positions <= i; logits are produced.
    Causal,
    /// Every position attends to every position; no logits.
    Bidirectional,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LmConfig {
    pub mode: LmMode,
    pub n_blocks: usize,
    /// Width of every hidden state, usually called C.
    pub model_dim: usize,
    pub n_heads: usize,
    /// When true, every block reads `cross_inputs` through cross-attention.
    pub with_cross_attention: bool,
    /// Weight on the cross-attention branch, usually called alpha.
    pub cross_scale: f64,
    pub max_seq_len: usize,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            mode: LmMode::Causal,
            n_blocks: 2,
            model_dim: 64,
            n_heads: 2,
            with_cross_attention: false,
            cross_scale: 0.1,
            max_seq_len: 256,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_blocks == 0 {
            return Err(Error::config("n_blocks must be at least 1"));
        }
        if self.model_dim == 0 || self.n_heads == 0 {
            return Err(Error::config("model_dim and n_heads must be positive"));
        }
        if self.model_dim % self.n_heads != 0 {
            return Err(Error::config(format!(
                "model_dim {} is not divisible by n_heads {}",
                self.model_dim, self.n_heads
            )));
        }
        if !(self.cross_scale >= 0.0 && self.cross_scale.is_finite()) {
            return Err(Error::config(format!(
                "cross_scale must be finite and >= 0, got {}",
                self.cross_scale
            )));
        }
        if self.max_seq_len == 0 {
            return Err(Error::config("max_seq_len must be positive"));
        }
        Ok(())
    }
}

/// Everything a forward pass exposes: one hidden matrix per block, the
/// normalized final layer, and (in causal mode) per-position vocabulary
/// logits. All matrices are tape variables so losses can backpropagate
/// through them.
#[derive(Debug)]
pub struct LmStates {
    /// Hidden state after each block, each (N x C).
    pub blocks: Vec<Var>,
    /// Final layer norm output, (N x C).
    pub last: Var,
    /// (N x VOCAB_SIZE), present only in causal mode.
    pub logits: Option<Var>,
    pub seq_len: usize,
}

struct CrossIds {
    wq: ParamId,
    bq: ParamId,
    wk: ParamId,
    bk: ParamId,
    wv: ParamId,
    bv: ParamId,
}

struct BlockIds {
    ln1_g: ParamId,
    ln1_b: ParamId,
    wq: ParamId,
    bq: ParamId,
    wk: ParamId,
    bk: ParamId,
    wv: ParamId,
    bv: ParamId,
    wo: ParamId,
    bo: ParamId,
    ln2_g: ParamId,
    ln2_b: ParamId,
    mlp_w1: ParamId,
    mlp_b1: ParamId,
    mlp_w2: ParamId,
    mlp_b2: ParamId,
    cross: Option<CrossIds>,
}

/// A registered language model: parameter handles plus the configuration
/// they were built for. The parameters themselves live in a `ParamStore`.
pub struct LmModel {
    cfg: LmConfig,
    prefix: String,
    emb: ParamId,
    pos: ParamId,
    blocks: Vec<BlockIds>,
    final_g: ParamId,
    final_b: ParamId,
    head_w: ParamId,
    head_b: ParamId,
}

const LN_EPS: f64 = 1e-5;
/// Additive score for masked attention slots; exp() of it underflows to zero.
const MASKED: f64 = -1e9;

impl LmModel {
    /// Register all parameters under `prefix` and return the handle struct.
    ///
    /// Body parameters are drawn from `rng` first and cross-attention
    /// parameters afterwards, so two models built from equally seeded rngs
    /// share identical body weights whether or not one of them carries
    /// cross-attention.
    pub fn register(
        cfg: LmConfig,
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        prefix: &str,
    ) -> Result<LmModel> {
        cfg.validate()?;
        let c = cfg.model_dim;
        let v = VOCAB_SIZE;
        let p = prefix;

        let emb = store.add(&format!("{p}.emb"), (v, c), Init::UniformFanIn, rng);
        let pos = store.add(
            &format!("{p}.pos"),
            (cfg.max_seq_len, c),
            Init::Uniform(0.02),
            rng,
        );

        let mut blocks = Vec::with_capacity(cfg.n_blocks);
        for b in 0..cfg.n_blocks {
            let n = |part: &str| format!("{p}.block{b}.{part}");
            blocks.push(BlockIds {
                ln1_g: store.add(&n("ln1.g"), (1, c), Init::Const(1.0), rng),
                ln1_b: store.add(&n("ln1.b"), (1, c), Init::Zeros, rng),
                wq: store.add(&n("attn.wq"), (c, c), Init::UniformFanIn, rng),
                bq: store.add(&n("attn.bq"), (1, c), Init::Zeros, rng),
                wk: store.add(&n("attn.wk"), (c, c), Init::UniformFanIn, rng),
                bk: store.add(&n("attn.bk"), (1, c), Init::Zeros, rng),
                wv: store.add(&n("attn.wv"), (c, c), Init::UniformFanIn, rng),
                bv: store.add(&n("attn.bv"), (1, c), Init::Zeros, rng),
                wo: store.add(&n("attn.wo"), (c, c), Init::UniformFanIn, rng),
                bo: store.add(&n("attn.bo"), (1, c), Init::Zeros, rng),
                ln2_g: store.add(&n("ln2.g"), (1, c), Init::Const(1.0), rng),
                ln2_b: store.add(&n("ln2.b"), (1, c), Init::Zeros, rng),
                mlp_w1: store.add(&n("mlp.w1"), (c, 4 * c), Init::UniformFanIn, rng),
                mlp_b1: store.add(&n("mlp.b1"), (1, 4 * c), Init::Zeros, rng),
                mlp_w2: store.add(&n("mlp.w2"), (4 * c, c), Init::UniformFanIn, rng),
                mlp_b2: store.add(&n("mlp.b2"), (1, c), Init::Zeros, rng),
                cross: None,
            });
        }

        let final_g = store.add(&format!("{p}.final.g"), (1, c), Init::Const(1.0), rng);
        let final_b = store.add(&format!("{p}.final.b"), (1, c), Init::Zeros, rng);
        // Zero head: an untrained model emits all-equal logits, so its
        // next-token loss is exactly ln(vocab size).
        let head_w = store.add(&format!("{p}.head.w"), (c, v), Init::Zeros, rng);
        let head_b = store.add(&format!("{p}.head.b"), (1, v), Init::Zeros, rng);

        if cfg.with_cross_attention {
            for (b, ids) in blocks.iter_mut().enumerate() {
                let n = |part: &str| format!("{p}.block{b}.cross.{part}");
                ids.cross = Some(CrossIds {
                    wq: store.add(&n("wq"), (c, c), Init::UniformFanIn, rng),
                    bq: store.add(&n("bq"), (1, c), Init::Zeros, rng),
                    wk: store.add(&n("wk"), (c, c), Init::UniformFanIn, rng),
                    bk: store.add(&n("bk"), (1, c), Init::Zeros, rng),
                    // Zero value projection: cross-attention contributes
                    // nothing until training moves it, so a fresh model
                    // matches the plain forward bit for bit.
                    wv: store.add(&n("wv"), (c, c), Init::Zeros, rng),
                    bv: store.add(&n("bv"), (1, c), Init::Zeros, rng),
                });
            }
        }

        Ok(LmModel {
            cfg,
            prefix: prefix.to_string(),
            emb,
            pos,
            blocks,
            final_g,
            final_b,
            head_w,
            head_b,
        })
    }

    pub fn cfg(&self) -> &LmConfig {
        &self.cfg
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    /// Names of the cross-attention parameters only.
    pub fn cross_param_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (b, ids) in self.blocks.iter().enumerate() {
            if ids.cross.is_some() {
                for part in ["wq", "bq", "wk", "bk", "wv", "bv"] {
                    out.push(format!("{}.block{b}.cross.{part}", self.prefix));
                }
            }
        }
        out
    }

    /// Names of every parameter except the cross-attention ones. This is the
    /// set a fine-tuning schedule freezes when it locks the plain model.
    pub fn vanilla_param_names(&self) -> Vec<String> {
        let p = &self.prefix;
        let mut out = vec![format!("{p}.emb"), format!("{p}.pos")];
        for b in 0..self.blocks.len() {
            for part in [
                "ln1.g", "ln1.b", "attn.wq", "attn.bq", "attn.wk", "attn.bk", "attn.wv",
                "attn.bv", "attn.wo", "attn.bo", "ln2.g", "ln2.b", "mlp.w1", "mlp.b1", "mlp.w2",
                "mlp.b2",
            ] {
                out.push(format!("{p}.block{b}.{part}"));
            }
        }
        out.push(format!("{p}.final.g"));
        out.push(format!("{p}.final.b"));
        out.push(format!("{p}.head.w"));
        out.push(format!("{p}.head.b"));
        out
    }

    /// Run the model over a token sequence.
    ///
    /// `cross_inputs` must be a (T x model_dim) tape variable when the model
    /// was built with cross-attention and absent otherwise; anything else is
    /// a configuration error.
    pub fn forward(
        &self,
        t: &Tape,
        bind: &TapeBind,
        ids: &[u32],
        cross_inputs: Option<Var>,
    ) -> Result<LmStates> {
        let n = ids.len();
        if n == 0 {
            return Err(Error::contract("cannot run the model on an empty sequence"));
        }
        if n > self.cfg.max_seq_len {
            return Err(Error::contract(format!(
                "sequence length {} exceeds max_seq_len {}",
                n, self.cfg.max_seq_len
            )));
        }
        match (self.cfg.with_cross_attention, cross_inputs.is_some()) {
            (true, false) => {
                return Err(Error::config(
                    "model has cross-attention but no cross_inputs were given",
                ))
            }
            (false, true) => {
                return Err(Error::config(
                    "cross_inputs given to a model built without cross-attention",
                ))
            }
            _ => {}
        }
        if let Some(x) = cross_inputs {
            let (_, d) = t.dims(x);
            if d != self.cfg.model_dim {
                return Err(Error::contract(format!(
                    "cross_inputs have {} columns, the model expects {}",
                    d, self.cfg.model_dim
                )));
            }
        }

        let c = self.cfg.model_dim;
        let n_heads = self.cfg.n_heads;
        let d_h = c / n_heads;
        let idx: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
        for (pos, &i) in idx.iter().enumerate() {
            if i >= VOCAB_SIZE {
                return Err(Error::contract(format!(
                    "token id {i} at position {pos} is outside the vocabulary"
                )));
            }
        }

        let tok = t.row_select(bind.var(self.emb), idx);
        let pos = t.row_select(bind.var(self.pos), (0..n).collect());
        let mut x = t.add(tok, pos);

        // Additive attention mask, shared by every block.
        let mask = match self.cfg.mode {
            LmMode::Causal => {
                let m = Array2::from_shape_fn((n, n), |(i, j)| if j <= i { 0.0 } else { MASKED });
                Some(t.constant(m))
            }
            LmMode::Bidirectional => None,
        };

        let mut blocks = Vec::with_capacity(self.blocks.len());
        for ids in &self.blocks {
            // Self-attention with a pre-norm residual.
            let a = t.layer_norm(x, bind.var(ids.ln1_g), bind.var(ids.ln1_b), LN_EPS);
            let q = t.add_row(t.matmul(a, bind.var(ids.wq)), bind.var(ids.bq));
            let k = t.add_row(t.matmul(a, bind.var(ids.wk)), bind.var(ids.bk));
            let v = t.add_row(t.matmul(a, bind.var(ids.wv)), bind.var(ids.bv));
            let mut heads: Option<Var> = None;
            for h in 0..n_heads {
                let lo = h * d_h;
                let hi = lo + d_h;
                let qh = t.slice_cols(q, lo, hi);
                let kh = t.slice_cols(k, lo, hi);
                let vh = t.slice_cols(v, lo, hi);
                let mut scores = t.scale(t.matmul(qh, t.transpose(kh)), 1.0 / (d_h as f64).sqrt());
                if let Some(m) = mask {
                    scores = t.add(scores, m);
                }
                let att = t.softmax_rows(scores);
                let oh = t.matmul(att, vh);
                heads = Some(match heads {
                    None => oh,
                    Some(acc) => t.concat_cols(acc, oh),
                });
            }
            let o = t.add_row(t.matmul(heads.unwrap(), bind.var(ids.wo)), bind.var(ids.bo));
            x = t.add(x, o);

            // MLP with a pre-norm residual.
            let m = t.layer_norm(x, bind.var(ids.ln2_g), bind.var(ids.ln2_b), LN_EPS);
            let h1 = t.relu(t.add_row(t.matmul(m, bind.var(ids.mlp_w1)), bind.var(ids.mlp_b1)));
            let h2 = t.add_row(t.matmul(h1, bind.var(ids.mlp_w2)), bind.var(ids.mlp_b2));
            x = t.add(x, h2);

            // Single-head cross-attention over the acoustic features,
            // folded in with the cross_scale weight.
            if let (Some(cr), Some(xa)) = (&ids.cross, cross_inputs) {
                let cq = t.add_row(t.matmul(x, bind.var(cr.wq)), bind.var(cr.bq));
                let ck = t.add_row(t.matmul(xa, bind.var(cr.wk)), bind.var(cr.bk));
                let cv = t.add_row(t.matmul(xa, bind.var(cr.wv)), bind.var(cr.bv));
                let scores = t.scale(t.matmul(cq, t.transpose(ck)), 1.0 / (c as f64).sqrt());
                let att = t.softmax_rows(scores);
                let x_at = t.matmul(att, cv);
                x = t.add(x, t.scale(x_at, self.cfg.cross_scale));
            }
            blocks.push(x);
        }

        let last = t.layer_norm(x, bind.var(self.final_g), bind.var(self.final_b), LN_EPS);
        let logits = match self.cfg.mode {
            LmMode::Causal => Some(t.add_row(
                t.matmul(last, bind.var(self.head_w)),
                bind.var(self.head_b),
            )),
            LmMode::Bidirectional => None,
        };

        Ok(LmStates {
            blocks,
            last,
            logits,
            seq_len: n,
        })
    }
}

/// Mean cross-entropy of each next token given its prefix.
///
/// Position i is scored against the token at i+1; positions whose target is
/// PAD are left out, so the loss covers the characters and the closing EOS
/// but never the padding tail.
pub fn ntp_loss(t: &Tape, states: &LmStates, ids: &[u32]) -> Result<Var> {
    let logits = states.logits.ok_or_else(|| {
        Error::config("next-token prediction needs a CAUSAL model, this one is bidirectional")
    })?;
    if ids.len() != states.seq_len {
        return Err(Error::contract(format!(
            "{} ids were given for a forward pass over {} positions",
            ids.len(),
            states.seq_len
        )));
    }
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for i in 0..ids.len().saturating_sub(1) {
        if ids[i] != PAD && ids[i + 1] != PAD {
            rows.push(i);
            targets.push(ids[i + 1] as usize);
        }
    }
    if rows.is_empty() {
        return Err(Error::contract(
            "no scorable positions: the sequence has no token following a non-PAD token",
        ));
    }
    let lsm = t.log_softmax_rows(logits);
    let scored = t.row_select(lsm, rows);
    let picked = t.pick_per_row(scored, targets);
    Ok(t.neg(t.mean_all(picked)))
}
