//! Losses, AdamW, a finite-difference gradient checker, and the training
//! loops for tweet classification, mention extraction (single-task and
//! multi-task) and concept normalization.
//!
//! Training is single-threaded and processes examples in a fixed order, so
//! a run is bitwise reproducible from its seed.

use std::fmt;

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{BinaryLabel, ClassificationDataset, ExtractionDataset, Lexicon};
use crate::encoder::{
    backward, classifier_logit, concept_logits, forward_cached, softmax, tag_logits, EncoderConfig, ForwardMode,
    ModelParams,
};
use crate::error::{Error, Result};
use crate::eval::{EvalReport, MatchType, Mode};
use crate::preprocess::{normalize, normalize_text, project_span_to_normalized, ResourceTables};
use crate::spans::{bio_to_spans, expand_to_tokens, spans_to_bio, BioTag};
use crate::tokenize::{encode_with_max_len, TokenizedTweet, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Classify,
    Extract,
    Normalize,
}

impl Task {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "classify" => Some(Task::Classify),
            "extract" => Some(Task::Extract),
            "normalize" => Some(Task::Normalize),
            _ => None,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Classify => "classify",
            Task::Extract => "extract",
            Task::Normalize => "normalize",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Weight of the extraction loss in the multi-task objective.
    pub lambda: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    /// Log the training-set metric every this many epochs (0: final epoch
    /// only).
    pub eval_every: usize,
}

impl Hyperparams {
    /// Published settings for each task. `Extract` is the multi-task
    /// extractor; see [`Hyperparams::single_task_extractor`].
    pub fn for_task(task: Task) -> Self {
        let base = Hyperparams {
            learning_rate: 3e-5,
            batch_size: 128,
            epochs: 10,
            lambda: 0.8,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            eval_every: 0,
        };
        match task {
            Task::Classify | Task::Normalize => base,
            Task::Extract => Hyperparams {
                batch_size: 64,
                epochs: 30,
                ..base
            },
        }
    }

    pub fn single_task_extractor() -> Self {
        Hyperparams {
            epochs: 20,
            ..Self::for_task(Task::Extract)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda {} must lie in [0, 1]", self.lambda));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight decay {} must be nonnegative", self.weight_decay));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return bad("adam betas must lie in [0, 1) and eps must be positive".into());
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Losses

pub const PROB_CLAMP: f64 = 1e-7;

/// Binary cross-entropy with the probability clamped to
/// `[1e-7, 1 - 1e-7]`.
pub fn bce_loss(p: f64, y: BinaryLabel) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let y = y.as_u8() as f64;
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Derivative of [`bce_loss`] with respect to the sigmoid's logit; zero
/// where the clamp is active.
fn bce_logit_grad(p: f64, y: BinaryLabel) -> f64 {
    if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
        0.0
    } else {
        p - y.as_u8() as f64
    }
}

/// Softmax cross-entropy and its gradient with respect to the logits.
pub fn cross_entropy(logits: ArrayView1<f64>, target: usize) -> (f64, Array1<f64>) {
    let m = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = m + logits.mapv(|v| (v - m).exp()).sum().ln();
    let mut grad = softmax(logits);
    grad[target] -= 1.0;
    (lse - logits[target], grad)
}

/// `lambda * l_ade + (1 - lambda) * l_adr`, where `l_ade` is the extraction
/// loss and `l_adr` the detection loss.
pub fn mtl_loss(l_ade: f64, l_adr: f64, lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} must lie in [0, 1]")));
    }
    Ok(lambda * l_ade + (1.0 - lambda) * l_adr)
}

// ---------------------------------------------------------------------------
// Parameter containers

/// Anything made of named flat tensors: what AdamW and the gradient checker
/// operate on.
pub trait ParamTensors: Clone {
    /// `(name, values, decay)` per tensor.
    fn views(&self) -> Vec<(String, &[f64], bool)>;
    fn views_mut(&mut self) -> Vec<(String, &mut [f64], bool)>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, d, _) in z.views_mut() {
            d.fill(0.0);
        }
        z
    }
}

impl ParamTensors for ModelParams {
    fn views(&self) -> Vec<(String, &[f64], bool)> {
        self.tensors().into_iter().map(|t| (t.name, t.data, t.decay)).collect()
    }

    fn views_mut(&mut self) -> Vec<(String, &mut [f64], bool)> {
        self.tensors_mut().into_iter().map(|t| (t.name, t.data, t.decay)).collect()
    }
}

/// Plain named vectors, for small problems and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensors(pub Vec<(String, Vec<f64>, bool)>);

impl ParamTensors for NamedTensors {
    fn views(&self) -> Vec<(String, &[f64], bool)> {
        self.0.iter().map(|(n, v, d)| (n.clone(), v.as_slice(), *d)).collect()
    }

    fn views_mut(&mut self) -> Vec<(String, &mut [f64], bool)> {
        self.0.iter_mut().map(|(n, v, d)| (n.clone(), v.as_mut_slice(), *d)).collect()
    }
}

// ---------------------------------------------------------------------------
// AdamW

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<P> {
    pub m: P,
    pub v: P,
    pub step: u64,
}

impl<P: ParamTensors> OptimizerState<P> {
    pub fn new(params: &P) -> Self {
        OptimizerState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

/// One AdamW update with decoupled weight decay on matrices only. Nothing
/// changes if any gradient is non-finite.
pub fn adamw_step<P: ParamTensors>(
    params: &mut P,
    grads: &P,
    state: &mut OptimizerState<P>,
    hp: &Hyperparams,
) -> Result<()> {
    let gv = grads.views();
    if let Some((name, _, _)) = gv.iter().find(|(_, g, _)| g.iter().any(|x| !x.is_finite())) {
        return Err(Error::NonFiniteGradient(name.clone()));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - hp.beta1.powi(t);
    let c2 = 1.0 - hp.beta2.powi(t);
    let pv = params.views_mut();
    let mv = state.m.views_mut();
    let vv = state.v.views_mut();
    for (((_, p, decay), (_, g, _)), ((_, m, _), (_, v, _))) in pv.into_iter().zip(gv).zip(mv.into_iter().zip(vv)) {
        let wd = if decay { hp.weight_decay } else { 0.0 };
        for i in 0..p.len() {
            m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
            v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= hp.learning_rate * (m_hat / (v_hat.sqrt() + hp.eps) + wd * p[i]);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Gradient checking

pub const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub probes: Vec<Probe>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    /// Nonempty tensors whose analytic gradient is identically zero.
    pub dead_tensors: Vec<String>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        !self.probes.is_empty() && self.max_rel_error < self.tolerance
    }

    pub fn worst(&self) -> Option<&Probe> {
        self.probes.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares the analytic gradient from `loss_and_grad` with central
/// differences of its loss at `n_probes` scalars, spread over all nonempty
/// tensors (at least one each). Probes favour entries with a nonzero
/// analytic gradient.
pub fn grad_check<P: ParamTensors>(
    loss_and_grad: impl Fn(&P) -> Result<(f64, P)>,
    params: &P,
    n_probes: usize,
    tolerance: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let (_, grads) = loss_and_grad(params)?;
    let views = grads.views();
    let nonempty: Vec<usize> = (0..views.len()).filter(|&i| !views[i].1.is_empty()).collect();
    let dead_tensors = nonempty
        .iter()
        .filter(|&&i| views[i].1.iter().all(|&g| g == 0.0))
        .map(|&i| views[i].0.clone())
        .collect();
    let per_tensor = n_probes.div_ceil(nonempty.len().max(1)).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut targets = Vec::new();
    for &ti in &nonempty {
        let g = views[ti].1;
        let live: Vec<usize> = (0..g.len()).filter(|&j| g[j] != 0.0).collect();
        let pool = if live.is_empty() { (0..g.len()).collect() } else { live };
        let k = per_tensor.min(pool.len());
        for j in index::sample(&mut rng, pool.len(), k) {
            targets.push((ti, pool[j]));
        }
    }
    let mut probes = Vec::with_capacity(targets.len());
    for (ti, j) in targets {
        let at = |delta: f64| -> Result<f64> {
            let mut p = params.clone();
            p.views_mut()[ti].1[j] += delta;
            Ok(loss_and_grad(&p)?.0)
        };
        let numeric = (at(FD_STEP)? - at(-FD_STEP)?) / (2.0 * FD_STEP);
        let analytic = views[ti].1[j];
        probes.push(Probe {
            tensor: views[ti].0.clone(),
            index: j,
            analytic,
            numeric,
            rel_error: relative_error(analytic, numeric),
        });
    }
    let max_rel_error = probes.iter().map(|p| p.rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        probes,
        max_rel_error,
        tolerance,
        dead_tensors,
    })
}

// ---------------------------------------------------------------------------
// Examples

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyExample {
    pub tok: TokenizedTweet,
    pub label: BinaryLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagExample {
    pub tok: TokenizedTweet,
    pub tags: Vec<BioTag>,
    /// Gold mentions on normalized text, widened to whole tokens.
    pub spans: Vec<(usize, usize)>,
    /// Detection label: the tweet has at least one gold mention.
    pub has_mention: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptExample {
    pub tok: TokenizedTweet,
    pub concept: usize,
}

pub fn prepare_classification(
    d: &ClassificationDataset,
    tables: &ResourceTables,
    vocab: &Vocab,
    max_len: usize,
) -> Vec<ClassifyExample> {
    d.records
        .iter()
        .map(|(t, label)| ClassifyExample {
            tok: encode_with_max_len(&normalize(t, tables).text, vocab, max_len),
            label: *label,
        })
        .collect()
}

/// Normalizes each tweet, moves its gold mentions onto the normalized text
/// (mentions deleted by preprocessing are dropped, mentions that collide
/// after projection are merged) and tags the tokens.
pub fn prepare_extraction(
    d: &ExtractionDataset,
    tables: &ResourceTables,
    vocab: &Vocab,
    max_len: usize,
) -> Result<Vec<TagExample>> {
    d.records
        .iter()
        .map(|(t, mentions)| {
            let n = normalize(t, tables);
            let mut projected = Vec::new();
            for m in mentions {
                if let Some(s) = project_span_to_normalized(m.begin, m.end, &n)? {
                    projected.push(s);
                }
            }
            projected.sort_unstable();
            let mut merged: Vec<(usize, usize)> = Vec::new();
            for s in projected {
                match merged.last_mut() {
                    Some(last) if s.0 < last.1 => last.1 = last.1.max(s.1),
                    _ => merged.push(s),
                }
            }
            let tok = encode_with_max_len(&n.text, vocab, max_len);
            Ok(TagExample {
                tags: spans_to_bio(&tok, &merged)?,
                spans: expand_to_tokens(&tok, &merged),
                has_mention: !mentions.is_empty(),
                tok,
            })
        })
        .collect()
}

/// Encodes `(mention text, code)` pairs; every code must be in `lexicon`.
pub fn prepare_normalization(
    mentions: &[(String, String)],
    lexicon: &Lexicon,
    tables: &ResourceTables,
    vocab: &Vocab,
    max_len: usize,
) -> Result<Vec<ConceptExample>> {
    mentions
        .iter()
        .map(|(text, code)| {
            let concept = lexicon
                .index_of(code)
                .ok_or_else(|| Error::Dataset(format!("mention `{text}` has code `{code}`, which is not in the lexicon")))?;
            Ok(ConceptExample {
                tok: encode_with_max_len(&normalize_text(text, tables), vocab, max_len),
                concept,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Batch objectives. Each returns the batch loss and its gradient.

fn add_classifier_grad(t_s: ArrayView1<f64>, dz: f64, grads: &mut ModelParams) {
    grads.cls_w.column_mut(0).scaled_add(dz, &t_s);
    grads.cls_b[0] += dz;
}

/// Mean BCE of the tweet classifier.
pub fn classify_batch(
    batch: &[&ClassifyExample],
    params: &ModelParams,
    cfg: &EncoderConfig,
    seeds: &[u64],
    mode: ForwardMode,
) -> Result<(f64, ModelParams)> {
    let mut grads = params.zeros_like();
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for (ex, &seed) in batch.iter().zip(seeds) {
        let (out, cache) = forward_cached(&ex.tok.ids, params, cfg, mode, seed)?;
        let p = crate::encoder::sigmoid(classifier_logit(out.t_s.view(), params));
        loss += bce_loss(p, ex.label);
        let dz = bce_logit_grad(p, ex.label) * scale;
        add_classifier_grad(out.t_s.view(), dz, &mut grads);
        let d_ts = params.cls_w.column(0).to_owned() * dz;
        let d_hidden = Array2::zeros(out.hidden.raw_dim());
        backward(&cache, params, cfg, &d_hidden, Some(&d_ts), &mut grads);
    }
    Ok((loss * scale, grads))
}

/// Token-level cross-entropy of the BIO head, averaged over all real tokens
/// of the batch, plus (when `detection_weight` is given) the detection BCE.
/// Returns `(l_ade, l_adr)` and the gradient of
/// `lambda * l_ade + detection_weight * l_adr`.
fn extraction_objective(
    batch: &[&TagExample],
    params: &ModelParams,
    cfg: &EncoderConfig,
    seeds: &[u64],
    mode: ForwardMode,
    lambda: f64,
    detection_weight: Option<f64>,
) -> Result<((f64, f64), ModelParams)> {
    let mut grads = params.zeros_like();
    let n_tokens: usize = batch.iter().map(|e| e.tok.n_tokens()).sum();
    let tok_scale = if n_tokens == 0 { 0.0 } else { lambda / n_tokens as f64 };
    let (mut ce_sum, mut bce_sum) = (0.0, 0.0);
    for (ex, &seed) in batch.iter().zip(seeds) {
        let (out, cache) = forward_cached(&ex.tok.ids, params, cfg, mode, seed)?;
        let n = out.hidden.nrows();
        let logits = tag_logits(&out, params);
        let mut dlogits = Array2::zeros(logits.raw_dim());
        for (i, tag) in ex.tags.iter().enumerate() {
            let (l, g) = cross_entropy(logits.row(i), tag.index());
            ce_sum += l;
            dlogits.row_mut(i).assign(&(g * tok_scale));
        }
        let mut d_hidden = Array2::zeros(out.hidden.raw_dim());
        if n >= 2 {
            let inner = out.hidden.slice(s![1..n - 1, ..]);
            grads.bio_w += &inner.t().dot(&dlogits);
            grads.bio_b += &dlogits.sum_axis(Axis(0));
            d_hidden.slice_mut(s![1..n - 1, ..]).assign(&dlogits.dot(&params.bio_w.t()));
        }
        let d_ts = match detection_weight {
            Some(w) => {
                let y = BinaryLabel::from_bool(ex.has_mention);
                let p = crate::encoder::sigmoid(classifier_logit(out.t_s.view(), params));
                bce_sum += bce_loss(p, y);
                let dz = bce_logit_grad(p, y) * w / batch.len() as f64;
                add_classifier_grad(out.t_s.view(), dz, &mut grads);
                Some(params.cls_w.column(0).to_owned() * dz)
            }
            None => None,
        };
        backward(&cache, params, cfg, &d_hidden, d_ts.as_ref(), &mut grads);
    }
    let l_ade = if n_tokens == 0 { 0.0 } else { ce_sum / n_tokens as f64 };
    Ok(((l_ade, bce_sum / batch.len() as f64), grads))
}

/// Single-task extraction loss: mean token cross-entropy of the BIO head.
pub fn tag_batch(
    batch: &[&TagExample],
    params: &ModelParams,
    cfg: &EncoderConfig,
    seeds: &[u64],
    mode: ForwardMode,
) -> Result<(f64, ModelParams)> {
    let ((l_ade, _), grads) = extraction_objective(batch, params, cfg, seeds, mode, 1.0, None)?;
    Ok((l_ade, grads))
}

/// Multi-task loss `lambda * L_ADE + (1 - lambda) * L_ADR` on a shared
/// encoder: BIO tagging plus tweet-level detection.
pub fn mtl_batch(
    batch: &[&TagExample],
    params: &ModelParams,
    cfg: &EncoderConfig,
    lambda: f64,
    seeds: &[u64],
    mode: ForwardMode,
) -> Result<(f64, ModelParams)> {
    mtl_loss(0.0, 0.0, lambda)?;
    let ((l_ade, l_adr), grads) = extraction_objective(batch, params, cfg, seeds, mode, lambda, Some(1.0 - lambda))?;
    Ok((mtl_loss(l_ade, l_adr, lambda)?, grads))
}

/// Mean cross-entropy of the concept head on `t_s`.
pub fn concept_batch(
    batch: &[&ConceptExample],
    params: &ModelParams,
    cfg: &EncoderConfig,
    seeds: &[u64],
    mode: ForwardMode,
) -> Result<(f64, ModelParams)> {
    let mut grads = params.zeros_like();
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for (ex, &seed) in batch.iter().zip(seeds) {
        if ex.concept >= cfg.n_concepts {
            return Err(Error::Dataset(format!(
                "concept {} out of range for {} concepts",
                ex.concept, cfg.n_concepts
            )));
        }
        let (out, cache) = forward_cached(&ex.tok.ids, params, cfg, mode, seed)?;
        let (l, g) = cross_entropy(concept_logits(out.t_s.view(), params).view(), ex.concept);
        loss += l;
        let g = g * scale;
        let t_s = out.t_s.view().insert_axis(Axis(1));
        grads.concept_w += &t_s.dot(&g.view().insert_axis(Axis(0)));
        grads.concept_b += &g;
        let d_ts = params.concept_w.dot(&g);
        let d_hidden = Array2::zeros(out.hidden.raw_dim());
        backward(&cache, params, cfg, &d_hidden, Some(&d_ts), &mut grads);
    }
    Ok((loss * scale, grads))
}

// ---------------------------------------------------------------------------
// Inference helpers

pub fn predict_probability(tok: &TokenizedTweet, params: &ModelParams, cfg: &EncoderConfig) -> Result<f64> {
    let (out, _) = forward_cached(&tok.ids, params, cfg, ForwardMode::Eval, 0)?;
    Ok(crate::encoder::classify_tweet(out.t_s.view(), params))
}

/// Argmax tag per non-special token; ties go to the lower tag index.
pub fn predict_tags(tok: &TokenizedTweet, params: &ModelParams, cfg: &EncoderConfig) -> Result<Vec<BioTag>> {
    let (out, _) = forward_cached(&tok.ids, params, cfg, ForwardMode::Eval, 0)?;
    Ok(tag_logits(&out, params)
        .rows()
        .into_iter()
        .map(|r| BioTag::from_index(argmax(r)).expect("three tags"))
        .collect())
}

/// Most probable concept index and its probability.
pub fn predict_concept(tok: &TokenizedTweet, params: &ModelParams, cfg: &EncoderConfig) -> Result<(usize, f64)> {
    if cfg.n_concepts == 0 {
        return Err(Error::Model("the concept head has no concepts".into()));
    }
    let (out, _) = forward_cached(&tok.ids, params, cfg, ForwardMode::Eval, 0)?;
    let probs = softmax(concept_logits(out.t_s.view(), params).view());
    let k = argmax(probs.view());
    Ok((k, probs[k]))
}

fn argmax(v: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn classification_f1(data: &[ClassifyExample], params: &ModelParams, cfg: &EncoderConfig) -> Result<f64> {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for ex in data {
        let pred = predict_probability(&ex.tok, params, cfg)? >= 0.5;
        match (pred, ex.label.is_adr()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    Ok(EvalReport::from_counts(Mode::Classification, MatchType::NotApplicable, tp, fp, fn_).f1)
}

/// Strict span F1 of decoded predictions against the token-widened gold
/// spans, both on normalized text.
pub fn extraction_f1(data: &[TagExample], params: &ModelParams, cfg: &EncoderConfig) -> Result<f64> {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for ex in data {
        let pred = bio_to_spans(&predict_tags(&ex.tok, params, cfg)?, &ex.tok)?;
        let hits = pred.iter().filter(|s| ex.spans.contains(s)).count();
        tp += hits;
        fp += pred.len() - hits;
        fn_ += ex.spans.len() - hits;
    }
    Ok(EvalReport::from_counts(Mode::Ner, MatchType::Strict, tp, fp, fn_).f1)
}

pub fn concept_accuracy(data: &[ConceptExample], params: &ModelParams, cfg: &EncoderConfig) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut right = 0;
    for ex in data {
        if predict_concept(&ex.tok, params, cfg)?.0 == ex.concept {
            right += 1;
        }
    }
    Ok(right as f64 / data.len() as f64)
}

// ---------------------------------------------------------------------------
// Training loops

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    pub metric: Option<f64>,
}

/// Per-epoch losses. Epoch 0 is the loss of the initial parameters on the
/// training set (no dropout, no update); epochs 1.. are the mean training
/// loss while that epoch's updates were made.
#[derive(Debug, Clone, PartialEq)]
pub struct LossLog {
    pub task: Task,
    pub lambda: f64,
    pub rows: Vec<LogRow>,
}

impl LossLog {
    pub fn to_csv(&self) -> String {
        let mut out = format!("# task={} lambda={}\nepoch,split,loss,metric\n", self.task, self.lambda);
        for r in &self.rows {
            let metric = r.metric.map(|m| format!("{m:.6}")).unwrap_or_default();
            out.push_str(&format!("{},{},{:.10},{metric}\n", r.epoch, r.split, r.loss));
        }
        out
    }

    pub fn losses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.loss).collect()
    }

    pub fn final_metric(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.metric)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: ModelParams,
    pub log: LossLog,
}

type BatchFn<'a, E> = dyn Fn(&[&E], &ModelParams, &[u64], ForwardMode) -> Result<(f64, ModelParams)> + 'a;

fn train_loop<E>(
    task: Task,
    data: &[E],
    hp: &Hyperparams,
    cfg: &EncoderConfig,
    batch_fn: &BatchFn<'_, E>,
    metric_fn: &dyn Fn(&ModelParams) -> Result<f64>,
) -> Result<TrainOutput> {
    hp.validate()?;
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Dataset("cannot train on an empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut params = ModelParams::init(cfg, rng.random())?;
    let mut state = OptimizerState::new(&params);
    let all: Vec<&E> = data.iter().collect();
    let mut rows = vec![LogRow {
        epoch: 0,
        split: "train".into(),
        loss: batch_fn(&all, &params, &vec![0; all.len()], ForwardMode::Eval)?.0,
        metric: None,
    }];
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 1..=hp.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(hp.batch_size) {
            let batch: Vec<&E> = chunk.iter().map(|&i| &data[i]).collect();
            let seeds: Vec<u64> = (0..batch.len()).map(|_| rng.random()).collect();
            let (loss, grads) = batch_fn(&batch, &params, &seeds, ForwardMode::Train)?;
            if !loss.is_finite() {
                return Err(Error::Model(format!("non-finite loss at epoch {epoch}")));
            }
            adamw_step(&mut params, &grads, &mut state, hp)?;
            total += loss * batch.len() as f64;
        }
        let want_metric = epoch == hp.epochs || (hp.eval_every > 0 && epoch % hp.eval_every == 0);
        rows.push(LogRow {
            epoch,
            split: "train".into(),
            loss: total / data.len() as f64,
            metric: if want_metric { Some(metric_fn(&params)?) } else { None },
        });
    }
    Ok(TrainOutput {
        params,
        log: LossLog {
            task,
            lambda: hp.lambda,
            rows,
        },
    })
}

pub fn train_classifier(data: &[ClassifyExample], hp: &Hyperparams, cfg: &EncoderConfig) -> Result<TrainOutput> {
    train_loop(
        Task::Classify,
        data,
        hp,
        cfg,
        &|b, p, s, m| classify_batch(b, p, cfg, s, m),
        &|p| classification_f1(data, p, cfg),
    )
}

/// Extractor trained on the BIO loss alone.
pub fn train_extractor(data: &[TagExample], hp: &Hyperparams, cfg: &EncoderConfig) -> Result<TrainOutput> {
    train_loop(
        Task::Extract,
        data,
        hp,
        cfg,
        &|b, p, s, m| tag_batch(b, p, cfg, s, m),
        &|p| extraction_f1(data, p, cfg),
    )
}

/// Extractor trained jointly with tweet-level detection.
pub fn train_extractor_mtl(data: &[TagExample], hp: &Hyperparams, cfg: &EncoderConfig) -> Result<TrainOutput> {
    train_loop(
        Task::Extract,
        data,
        hp,
        cfg,
        &|b, p, s, m| mtl_batch(b, p, cfg, hp.lambda, s, m),
        &|p| extraction_f1(data, p, cfg),
    )
}

pub fn train_normalizer(data: &[ConceptExample], hp: &Hyperparams, cfg: &EncoderConfig) -> Result<TrainOutput> {
    if cfg.n_concepts == 0 {
        return Err(Error::InvalidArgument("normalizer needs at least one concept".into()));
    }
    train_loop(
        Task::Normalize,
        data,
        hp,
        cfg,
        &|b, p, s, m| concept_batch(b, p, cfg, s, m),
        &|p| concept_accuracy(data, p, cfg),
    )
}
