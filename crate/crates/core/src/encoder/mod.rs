//! A small pre-layer-norm transformer encoder with three heads:
//!
//! * tweet classifier: `sigmoid(W . t_s + b)` on the `<s>` hidden vector;
//! * BIO tagger: softmax over {O, B, I} per non-special token;
//! * concept classifier: softmax over K concepts on `t_s`.
//!
//! Everything runs in `f64` on one sequence at a time. Gradients are
//! hand-derived; see [`backward`].

mod checkpoint;

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::preprocess::{normalize_text, ResourceTables};
use crate::tokenize::{encode_with_max_len, TokenizedTweet, Vocab};

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC};

pub const N_BIO_LABELS: usize = 3;
const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ffn: usize,
    pub max_len: usize,
    pub vocab_size: usize,
    pub dropout: f64,
    pub n_concepts: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            d_model: 128,
            n_layers: 2,
            n_heads: 4,
            ffn: 512,
            max_len: crate::tokenize::DEFAULT_MAX_LEN,
            vocab_size: crate::tokenize::DEFAULT_VOCAB_SIZE,
            dropout: 0.2,
            n_concepts: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad(format!(
                "d_model {} must be a positive multiple of n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if self.ffn == 0 {
            return bad("ffn width must be positive".into());
        }
        if self.max_len < 2 {
            return bad(format!("max_len {} leaves no room for <s> and </s>", self.max_len));
        }
        if self.vocab_size <= crate::tokenize::UNK as usize {
            return bad(format!("vocab_size {} is smaller than the special tokens", self.vocab_size));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} must lie in [0, 1)", self.dropout));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub ln1_g: Array1<f64>,
    pub ln1_b: Array1<f64>,
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub ln2_g: Array1<f64>,
    pub ln2_b: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// All trainable tensors. Matrices are stored input-major: `y = x . W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub tok_emb: Array2<f64>,
    pub pos_emb: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub lnf_g: Array1<f64>,
    pub lnf_b: Array1<f64>,
    /// Tweet classifier `W` (h x 1) and `b`.
    pub cls_w: Array2<f64>,
    pub cls_b: Array1<f64>,
    pub bio_w: Array2<f64>,
    pub bio_b: Array1<f64>,
    pub concept_w: Array2<f64>,
    pub concept_b: Array1<f64>,
}

/// One named tensor viewed as a flat slice.
pub struct Tensor<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
    /// Weight decay applies to matrices only.
    pub decay: bool,
}

pub struct TensorMut<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a mut [f64],
    pub decay: bool,
}

macro_rules! for_each_tensor {
    ($p:expr, $f:ident, $iter:ident, $as_slice:ident) => {{
        $f("tok_emb".to_string(), $p.tok_emb.shape().to_vec(), $p.tok_emb.$as_slice().unwrap(), true);
        $f("pos_emb".to_string(), $p.pos_emb.shape().to_vec(), $p.pos_emb.$as_slice().unwrap(), true);
        for (i, l) in $p.layers.$iter().enumerate() {
            for_each_tensor!(@layer i, l, $f, $as_slice,
                ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2);
        }
        $f("lnf_g".to_string(), $p.lnf_g.shape().to_vec(), $p.lnf_g.$as_slice().unwrap(), false);
        $f("lnf_b".to_string(), $p.lnf_b.shape().to_vec(), $p.lnf_b.$as_slice().unwrap(), false);
        $f("cls_w".to_string(), $p.cls_w.shape().to_vec(), $p.cls_w.$as_slice().unwrap(), true);
        $f("cls_b".to_string(), $p.cls_b.shape().to_vec(), $p.cls_b.$as_slice().unwrap(), false);
        $f("bio_w".to_string(), $p.bio_w.shape().to_vec(), $p.bio_w.$as_slice().unwrap(), true);
        $f("bio_b".to_string(), $p.bio_b.shape().to_vec(), $p.bio_b.$as_slice().unwrap(), false);
        $f("concept_w".to_string(), $p.concept_w.shape().to_vec(), $p.concept_w.$as_slice().unwrap(), true);
        $f("concept_b".to_string(), $p.concept_b.shape().to_vec(), $p.concept_b.$as_slice().unwrap(), false);
    }};
    (@layer $i:ident, $l:ident, $f:ident, $as_slice:ident, $($field:ident),*) => {
        $(
            let shape = $l.$field.shape().to_vec();
            let decay = shape.len() == 2;
            $f(format!("layer{}.{}", $i, stringify!($field)), shape, $l.$field.$as_slice().unwrap(), decay);
        )*
    };
}

impl ModelParams {
    /// Normal(0, 0.02) matrices, zero biases and shifts, unit scales.
    pub fn init(cfg: &EncoderConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.02).expect("valid std");
        let mut mat = |r: usize, c: usize| Array2::from_shape_simple_fn((r, c), || normal.sample(&mut rng));
        let (h, f) = (cfg.d_model, cfg.ffn);
        let tok_emb = mat(cfg.vocab_size, h);
        let pos_emb = mat(cfg.max_len, h);
        let layers = (0..cfg.n_layers)
            .map(|_| LayerParams {
                ln1_g: Array1::ones(h),
                ln1_b: Array1::zeros(h),
                wq: mat(h, h),
                bq: Array1::zeros(h),
                wk: mat(h, h),
                bk: Array1::zeros(h),
                wv: mat(h, h),
                bv: Array1::zeros(h),
                wo: mat(h, h),
                bo: Array1::zeros(h),
                ln2_g: Array1::ones(h),
                ln2_b: Array1::zeros(h),
                w1: mat(h, f),
                b1: Array1::zeros(f),
                w2: mat(f, h),
                b2: Array1::zeros(h),
            })
            .collect();
        Ok(ModelParams {
            tok_emb,
            pos_emb,
            layers,
            lnf_g: Array1::ones(h),
            lnf_b: Array1::zeros(h),
            cls_w: mat(h, 1),
            cls_b: Array1::zeros(1),
            bio_w: mat(h, N_BIO_LABELS),
            bio_b: Array1::zeros(N_BIO_LABELS),
            concept_w: mat(h, cfg.n_concepts),
            concept_b: Array1::zeros(cfg.n_concepts),
        })
    }

    /// Same shapes, all zeros; used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    pub fn fill(&mut self, value: f64) {
        for t in self.tensors_mut() {
            t.data.fill(value);
        }
    }

    pub fn tensors(&self) -> Vec<Tensor<'_>> {
        let mut out = Vec::new();
        let mut push = |name, shape, data, decay| out.push(Tensor { name, shape, data, decay });
        for_each_tensor!(self, push, iter, as_slice);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = Vec::new();
        let mut push = |name, shape, data, decay| out.push(TensorMut { name, shape, data, decay });
        for_each_tensor!(self, push, iter_mut, as_slice_mut);
        out
    }

    pub fn n_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.data.iter_mut().zip(b.data) {
                *x += scale * y;
            }
        }
    }

    pub fn check_shapes(&self, cfg: &EncoderConfig) -> Result<()> {
        let expected = ModelParams::init(cfg, 0)?;
        let a: Vec<(String, Vec<usize>)> = self.tensors().into_iter().map(|t| (t.name, t.shape)).collect();
        let b: Vec<(String, Vec<usize>)> = expected.tensors().into_iter().map(|t| (t.name, t.shape)).collect();
        if a != b {
            return Err(Error::Model("parameter shapes do not match the encoder config".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    /// Final hidden vector of every input position, `<s>` and `</s>` included.
    pub hidden: Array2<f64>,
    /// Hidden vector at `<s>`, after dropout in train mode.
    pub t_s: Array1<f64>,
}

struct LnCache {
    xhat: Array2<f64>,
    rstd: Array1<f64>,
}

struct LayerCache {
    ln1: LnCache,
    a: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    attn: Array2<f64>,
    ln2: LnCache,
    c: Array2<f64>,
    u: Array2<f64>,
    g: Array2<f64>,
}

/// Intermediate values kept by [`forward_cached`] for [`backward`].
pub struct ForwardCache {
    ids: Vec<u32>,
    layers: Vec<LayerCache>,
    lnf: LnCache,
    /// Scaled dropout mask applied to `t_s`, if any.
    mask: Option<Array1<f64>>,
}

fn layer_norm(x: &Array2<f64>, g: &Array1<f64>, b: &Array1<f64>) -> (Array2<f64>, LnCache) {
    let n = x.ncols() as f64;
    let mean = x.mean_axis(Axis(1)).expect("nonempty rows");
    let centered = x - &mean.view().insert_axis(Axis(1));
    let var = centered.mapv(|v| v * v).sum_axis(Axis(1)) / n;
    let rstd = var.mapv(|v| 1.0 / (v + LN_EPS).sqrt());
    let xhat = &centered * &rstd.view().insert_axis(Axis(1));
    let y = &xhat * g + b;
    (y, LnCache { xhat, rstd })
}

fn layer_norm_backward(dy: &Array2<f64>, cache: &LnCache, g: &Array1<f64>, dg: &mut Array1<f64>, db: &mut Array1<f64>) -> Array2<f64> {
    *dg += &(dy * &cache.xhat).sum_axis(Axis(0));
    *db += &dy.sum_axis(Axis(0));
    let dxhat = dy * g;
    let n = dy.ncols() as f64;
    let mean_d = dxhat.sum_axis(Axis(1)) / n;
    let mean_dx = (&dxhat * &cache.xhat).sum_axis(Axis(1)) / n;
    let inner = &dxhat - &mean_d.insert_axis(Axis(1)) - &(&cache.xhat * &mean_dx.insert_axis(Axis(1)));
    inner * cache.rstd.view().insert_axis(Axis(1))
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

fn gelu(u: f64) -> f64 {
    0.5 * u * (1.0 + (GELU_C * (u + 0.044715 * u * u * u)).tanh())
}

fn gelu_grad(u: f64) -> f64 {
    let t = (GELU_C * (u + 0.044715 * u * u * u)).tanh();
    0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * u * u)
}

fn softmax_rows(x: &mut Array2<f64>) {
    for mut row in x.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let mut x = logits.to_owned().insert_axis(Axis(0));
    softmax_rows(&mut x);
    x.remove_axis(Axis(0))
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Scaled inverted-dropout mask for `t_s`, drawn from `seed`.
pub fn dropout_mask(h: usize, p: f64, seed: u64) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = 1.0 - p;
    Array1::from_shape_simple_fn(h, || if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
}

pub fn forward(
    tok: &TokenizedTweet,
    params: &ModelParams,
    cfg: &EncoderConfig,
    mode: ForwardMode,
    seed: u64,
) -> Result<EncoderOutput> {
    forward_cached(&tok.ids, params, cfg, mode, seed).map(|(out, _)| out)
}

pub fn forward_cached(
    ids: &[u32],
    params: &ModelParams,
    cfg: &EncoderConfig,
    mode: ForwardMode,
    seed: u64,
) -> Result<(EncoderOutput, ForwardCache)> {
    let n = ids.len();
    if n == 0 || n > cfg.max_len {
        return Err(Error::Model(format!("sequence length {n} outside 1..={}", cfg.max_len)));
    }
    if let Some(&bad) = ids.iter().find(|&&i| i as usize >= cfg.vocab_size) {
        return Err(Error::Model(format!("token id {bad} out of range for vocab size {}", cfg.vocab_size)));
    }
    let h = cfg.d_model;
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    let mut x = Array2::zeros((n, h));
    for (t, &id) in ids.iter().enumerate() {
        let row = &params.tok_emb.row(id as usize) + &params.pos_emb.row(t);
        x.row_mut(t).assign(&row);
    }

    let mut caches = Vec::with_capacity(params.layers.len());
    for l in &params.layers {
        let (a, ln1) = layer_norm(&x, &l.ln1_g, &l.ln1_b);
        let q = a.dot(&l.wq) + &l.bq;
        let k = a.dot(&l.wk) + &l.bk;
        let v = a.dot(&l.wv) + &l.bv;
        let mut attn = Array2::zeros((n, h));
        let mut probs = Vec::with_capacity(cfg.n_heads);
        for hd in 0..cfg.n_heads {
            let cols = s![.., hd * dh..(hd + 1) * dh];
            let mut p = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            softmax_rows(&mut p);
            attn.slice_mut(cols).assign(&p.dot(&v.slice(cols)));
            probs.push(p);
        }
        x = &x + &attn.dot(&l.wo) + &l.bo;
        let (c, ln2) = layer_norm(&x, &l.ln2_g, &l.ln2_b);
        let u = c.dot(&l.w1) + &l.b1;
        let g = u.mapv(gelu);
        x = &x + &g.dot(&l.w2) + &l.b2;
        caches.push(LayerCache { ln1, a, q, k, v, probs, attn, ln2, c, u, g });
    }
    let (hidden, lnf) = layer_norm(&x, &params.lnf_g, &params.lnf_b);

    let mask = (mode == ForwardMode::Train && cfg.dropout > 0.0).then(|| dropout_mask(h, cfg.dropout, seed));
    let mut t_s = hidden.row(0).to_owned();
    if let Some(m) = &mask {
        t_s *= m;
    }
    if hidden.iter().any(|v| !v.is_finite()) {
        return Err(Error::Model("encoder produced non-finite activations".into()));
    }
    let cache = ForwardCache {
        ids: ids.to_vec(),
        layers: caches,
        lnf,
        mask,
    };
    Ok((EncoderOutput { hidden, t_s }, cache))
}

/// Accumulates into `grads` the gradient of a loss whose derivative is
/// `d_hidden` with respect to the final hidden states plus `d_ts` with
/// respect to the (post-dropout) `t_s`.
pub fn backward(
    cache: &ForwardCache,
    params: &ModelParams,
    cfg: &EncoderConfig,
    d_hidden: &Array2<f64>,
    d_ts: Option<&Array1<f64>>,
    grads: &mut ModelParams,
) {
    let mut dy = d_hidden.clone();
    if let Some(d) = d_ts {
        let d = match &cache.mask {
            Some(m) => d * m,
            None => d.clone(),
        };
        let mut row = dy.row_mut(0);
        row += &d;
    }
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dx = layer_norm_backward(&dy, &cache.lnf, &params.lnf_g, &mut grads.lnf_g, &mut grads.lnf_b);

    for (li, lc) in cache.layers.iter().enumerate().rev() {
        let l = &params.layers[li];
        let gl = &mut grads.layers[li];

        // Feed-forward block.
        gl.w2 += &lc.g.t().dot(&dx);
        gl.b2 += &dx.sum_axis(Axis(0));
        let dg = dx.dot(&l.w2.t());
        let du = &dg * &lc.u.mapv(gelu_grad);
        gl.w1 += &lc.c.t().dot(&du);
        gl.b1 += &du.sum_axis(Axis(0));
        let dc = du.dot(&l.w1.t());
        dx = dx + layer_norm_backward(&dc, &lc.ln2, &l.ln2_g, &mut gl.ln2_g, &mut gl.ln2_b);

        // Attention block.
        gl.wo += &lc.attn.t().dot(&dx);
        gl.bo += &dx.sum_axis(Axis(0));
        let dattn = dx.dot(&l.wo.t());
        let mut dq = Array2::zeros(lc.q.raw_dim());
        let mut dk = Array2::zeros(lc.k.raw_dim());
        let mut dv = Array2::zeros(lc.v.raw_dim());
        for (hd, p) in lc.probs.iter().enumerate() {
            let cols = s![.., hd * dh..(hd + 1) * dh];
            let d_out = dattn.slice(cols);
            let dp = d_out.dot(&lc.v.slice(cols).t());
            dv.slice_mut(cols).assign(&p.t().dot(&d_out));
            let row_dot = (&dp * p).sum_axis(Axis(1)).insert_axis(Axis(1));
            let ds = p * &(&dp - &row_dot) * scale;
            dq.slice_mut(cols).assign(&ds.dot(&lc.k.slice(cols)));
            dk.slice_mut(cols).assign(&ds.t().dot(&lc.q.slice(cols)));
        }
        gl.wq += &lc.a.t().dot(&dq);
        gl.bq += &dq.sum_axis(Axis(0));
        gl.wk += &lc.a.t().dot(&dk);
        gl.bk += &dk.sum_axis(Axis(0));
        gl.wv += &lc.a.t().dot(&dv);
        gl.bv += &dv.sum_axis(Axis(0));
        let da = dq.dot(&l.wq.t()) + dk.dot(&l.wk.t()) + dv.dot(&l.wv.t());
        dx = dx + layer_norm_backward(&da, &lc.ln1, &l.ln1_g, &mut gl.ln1_g, &mut gl.ln1_b);
    }

    for (t, &id) in cache.ids.iter().enumerate() {
        let row = dx.row(t);
        let mut e = grads.tok_emb.row_mut(id as usize);
        e += &row;
        let mut p = grads.pos_emb.row_mut(t);
        p += &row;
    }
}

/// Logit of the tweet classifier.
pub fn classifier_logit(t_s: ArrayView1<f64>, params: &ModelParams) -> f64 {
    t_s.dot(&params.cls_w.column(0)) + params.cls_b[0]
}

/// `sigmoid(W . t_s + b)`.
pub fn classify_tweet(t_s: ArrayView1<f64>, params: &ModelParams) -> f64 {
    sigmoid(classifier_logit(t_s, params))
}

/// BIO logits for the non-special positions (all but the first and last).
pub fn tag_logits(out: &EncoderOutput, params: &ModelParams) -> Array2<f64> {
    let n = out.hidden.nrows();
    if n < 2 {
        return Array2::zeros((0, N_BIO_LABELS));
    }
    out.hidden.slice(s![1..n - 1, ..]).dot(&params.bio_w) + &params.bio_b
}

/// Probabilities over {O, B, I}, one row per non-special token.
pub fn tag_tokens(out: &EncoderOutput, params: &ModelParams) -> Array2<f64> {
    let mut p = tag_logits(out, params);
    softmax_rows(&mut p);
    p
}

pub fn concept_logits(t_s: ArrayView1<f64>, params: &ModelParams) -> Array1<f64> {
    t_s.dot(&params.concept_w) + &params.concept_b
}

/// Concept distribution for a mention read on its own: normalize, encode,
/// eval-mode forward, softmax of the concept head on `t_s`.
pub fn normalize_mention(
    mention_text: &str,
    params: &ModelParams,
    vocab: &Vocab,
    cfg: &EncoderConfig,
    tables: &ResourceTables,
) -> Result<Array1<f64>> {
    if cfg.n_concepts == 0 {
        return Err(Error::Model("the concept head has no concepts".into()));
    }
    if mention_text.is_empty() {
        return Err(Error::InvalidArgument("empty mention text".into()));
    }
    let tok = encode_with_max_len(&normalize_text(mention_text, tables), vocab, cfg.max_len);
    let out = forward(&tok, params, cfg, ForwardMode::Eval, 0)?;
    Ok(softmax(concept_logits(out.t_s.view(), params).view()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenize::{BOS, EOS};

    fn toy() -> EncoderConfig {
        EncoderConfig {
            d_model: 16,
            n_layers: 2,
            n_heads: 4,
            ffn: 32,
            max_len: 16,
            vocab_size: 300,
            dropout: 0.2,
            n_concepts: 3,
        }
    }

    fn tok(ids: &[u32]) -> TokenizedTweet {
        TokenizedTweet {
            ids: ids.to_vec(),
            spans: (0..ids.len().saturating_sub(2)).map(|i| (2 * i, 2 * i + 1)).collect(),
        }
    }

    #[test]
    fn config_validation() {
        assert!(toy().validate().is_ok());
        assert!(EncoderConfig { n_heads: 3, ..toy() }.validate().is_err());
        assert!(EncoderConfig { dropout: 1.0, ..toy() }.validate().is_err());
        assert!(EncoderConfig::default().validate().is_ok());
    }

    #[test]
    fn shapes_and_determinism() {
        let cfg = toy();
        let p = ModelParams::init(&cfg, 1).unwrap();
        let t = tok(&[BOS, EOS]);
        let a = forward(&t, &p, &cfg, ForwardMode::Eval, 0).unwrap();
        assert_eq!(a.hidden.dim(), (2, 16));
        assert_eq!(a.t_s.len(), 16);
        let b = forward(&t, &p, &cfg, ForwardMode::Eval, 99).unwrap();
        assert_eq!(a, b);
        assert!(forward(&tok(&[BOS, 300, EOS]), &p, &cfg, ForwardMode::Eval, 0).is_err());
    }

    #[test]
    fn positions_matter() {
        let cfg = toy();
        let p = ModelParams::init(&cfg, 2).unwrap();
        let a = forward(&tok(&[BOS, 10, 20, EOS]), &p, &cfg, ForwardMode::Eval, 0).unwrap();
        let b = forward(&tok(&[BOS, 20, 10, EOS]), &p, &cfg, ForwardMode::Eval, 0).unwrap();
        assert_ne!(a.t_s, b.t_s);
    }

    #[test]
    fn dropout_only_in_train_mode() {
        let cfg = toy();
        let p = ModelParams::init(&cfg, 3).unwrap();
        let t = tok(&[BOS, 10, EOS]);
        let e = forward(&t, &p, &cfg, ForwardMode::Eval, 5).unwrap();
        let a = forward(&t, &p, &cfg, ForwardMode::Train, 5).unwrap();
        let b = forward(&t, &p, &cfg, ForwardMode::Train, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hidden, e.hidden);
        assert_ne!(a.t_s, e.t_s);
        for (x, y) in a.t_s.iter().zip(&e.t_s) {
            assert!(*x == 0.0 || (x - y / 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn classifier_examples() {
        let cfg = toy();
        let mut p = ModelParams::init(&cfg, 4).unwrap();
        let t_s = Array1::from_shape_fn(16, |i| (i as f64 * 0.37).sin());
        let expected = {
            let z: f64 = (0..16).map(|i| t_s[i] * p.cls_w[[i, 0]]).sum::<f64>() + p.cls_b[0];
            1.0 / (1.0 + (-z).exp())
        };
        assert!((classify_tweet(t_s.view(), &p) - expected).abs() < 1e-12);
        p.cls_w.fill(0.0);
        assert_eq!(classify_tweet(t_s.view(), &p), 0.5);
        p.cls_b[0] = 20.0;
        assert!((classify_tweet(t_s.view(), &p) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn tagger_probabilities() {
        let cfg = toy();
        let mut p = ModelParams::init(&cfg, 5).unwrap();
        let out = forward(&tok(&[BOS, 7, 8, 9, EOS]), &p, &cfg, ForwardMode::Eval, 0).unwrap();
        let probs = tag_tokens(&out, &p);
        assert_eq!(probs.dim(), (3, 3));
        for row in probs.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
        p.bio_w.fill(0.0);
        p.bio_b.fill(0.0);
        for v in tag_tokens(&out, &p) {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mention_normalization() {
        let vocab = Vocab::base();
        let tables = ResourceTables::builtin();
        let cfg = EncoderConfig { vocab_size: vocab.len(), ..toy() };
        let p = ModelParams::init(&cfg, 6).unwrap();
        let probs = normalize_mention("really bad headache", &p, &vocab, &cfg, &tables).unwrap();
        assert_eq!(probs.len(), 3);
        assert!((probs.sum() - 1.0).abs() < 1e-9);

        let one = EncoderConfig { n_concepts: 1, ..cfg.clone() };
        let p1 = ModelParams::init(&one, 6).unwrap();
        assert_eq!(normalize_mention("pain", &p1, &vocab, &one, &tables).unwrap()[0], 1.0);

        let none = EncoderConfig { n_concepts: 0, ..cfg };
        let p0 = ModelParams::init(&none, 6).unwrap();
        assert!(normalize_mention("pain", &p0, &vocab, &none, &tables).is_err());
    }

    #[test]
    fn tensor_listing() {
        let cfg = toy();
        let mut p = ModelParams::init(&cfg, 7).unwrap();
        let names: Vec<String> = p.tensors().into_iter().map(|t| t.name).collect();
        assert_eq!(names.len(), 2 + 16 * 2 + 8);
        assert_eq!(names[2], "layer0.ln1_g");
        let decayed: Vec<String> = p.tensors().into_iter().filter(|t| t.decay).map(|t| t.name).collect();
        assert!(decayed.contains(&"cls_w".to_string()));
        assert!(!decayed.iter().any(|n| n.ends_with("_b") || n.contains("ln")));
        p.fill(1.0);
        assert!(p.tensors().iter().all(|t| t.data.iter().all(|&v| v == 1.0)));
        assert!(p.check_shapes(&cfg).is_ok());
        assert!(p.check_shapes(&EncoderConfig { n_concepts: 4, ..cfg }).is_err());
    }
}
