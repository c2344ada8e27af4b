//! A compact segment-aware encoder with exact backpropagation.
//!
//! Each position embeds as `token_embedding[id] + segment_embedding[segment]`.
//! An optional single-head self-attention block with a residual connection
//! mixes positions (PAD positions are masked out entirely). The comment
//! vector `c` is the L2-normalized mean over COMMENT positions; the diff
//! vector `s` is the L2-normalized mean over OLD, NEW and DIFF positions. The
//! head reads `[c; s]` and emits `p = sigmoid(w . [c; s] + b)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::PreprocessedRecord;
use crate::diff::flatten_untagged;
use crate::lexer::{lex_code, lex_comment, Token};
use crate::objective::{total_loss, BatchTensors, ContrastiveConfig, LossBreakdown, ObjectiveError};
use crate::vocab::{Vocabulary, PAD_ID, SEP_ID};

/// Pooled vectors whose norm falls below this are treated as degenerate.
pub const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum EncoderError {
    #[error("input has {ids} ids but {segments} segment marks")]
    Ragged { ids: usize, segments: usize },
    #[error("token id {id} outside vocabulary of size {vocab_size}")]
    IdOutOfRange { id: u32, vocab_size: usize },
    #[error("input length {len} exceeds max_len {max_len}")]
    TooLong { len: usize, max_len: usize },
    #[error("max_len must be at least 8, got {0}")]
    MaxLen(usize),
    #[error("model dimension must be positive")]
    ZeroDim,
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Segment {
    Old = 0,
    New = 1,
    Comment = 2,
    Diff = 3,
    Pad = 4,
}

impl Segment {
    /// Number of segments that carry an embedding (all but PAD).
    pub const EMBEDDED: usize = 4;

    fn index(self) -> usize {
        self as usize
    }
}

/// How the code-change part of the input is presented to the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    /// OLD = removed tokens, NEW = introduced tokens, DIFF = span-tagged diff.
    #[default]
    Tagged,
    /// OLD = full old code, NEW = full new code, DIFF = diff tokens without
    /// activity tags. The ablation baseline.
    Flat,
}

impl std::str::FromStr for InputMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tagged" => Ok(InputMode::Tagged),
            "flat" => Ok(InputMode::Flat),
            other => Err(format!("unknown input mode '{other}'")),
        }
    }
}

impl std::fmt::Display for InputMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InputMode::Tagged => "tagged",
            InputMode::Flat => "flat",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub dim: usize,
    pub max_len: usize,
    pub attention: bool,
    pub input_mode: InputMode,
}

/// Token ids and parallel segment marks, padded to `max_len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedInput {
    pub ids: Vec<u32>,
    pub segments: Vec<Segment>,
}

impl EncodedInput {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of non-PAD positions.
    pub fn content_len(&self) -> usize {
        self.segments.iter().filter(|s| **s != Segment::Pad).count()
    }
}

/// Row-major `dim x dim` projections, applied as `x . W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub query: Vec<f64>,
    pub key: Vec<f64>,
    pub value: Vec<f64>,
    pub output: Vec<f64>,
}

/// All trainable tensors. Gradients use the same structure.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    /// `vocab_size x dim`.
    pub embedding: Vec<f64>,
    /// `4 x dim`, one row per non-PAD segment.
    pub segment: Vec<f64>,
    pub attention: Option<AttentionParams>,
    /// `2 * dim`, the comment half first.
    pub head_weight: Vec<f64>,
    pub head_bias: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(config: ModelConfig) -> Self {
        let d = config.dim;
        Self {
            config,
            embedding: vec![0.0; config.vocab_size * d],
            segment: vec![0.0; Segment::EMBEDDED * d],
            attention: config.attention.then(|| AttentionParams {
                query: vec![0.0; d * d],
                key: vec![0.0; d * d],
                value: vec![0.0; d * d],
                output: vec![0.0; d * d],
            }),
            head_weight: vec![0.0; 2 * d],
            head_bias: vec![0.0],
        }
    }

    /// Small uniform initialization. The attention output projection starts
    /// near zero so the block begins close to the identity.
    pub fn init(config: ModelConfig, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(config);
        let d = config.dim as f64;
        let fill = |v: &mut [f64], scale: f64, rng: &mut dyn rand::RngCore| {
            for x in v {
                *x = rng.gen_range(-scale..scale);
            }
        };
        fill(&mut p.embedding, 1.0, rng);
        fill(&mut p.segment, 0.1, rng);
        if let Some(att) = p.attention.as_mut() {
            let s = 1.0 / d.sqrt();
            fill(&mut att.query, s, rng);
            fill(&mut att.key, s, rng);
            fill(&mut att.value, s, rng);
            fill(&mut att.output, 0.1 * s, rng);
        }
        fill(&mut p.head_weight, 0.1, rng);
        p
    }

    /// Tensors in a fixed order: embedding, segment, [query, key, value,
    /// output], head weight, head bias.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.embedding, &self.segment];
        if let Some(a) = &self.attention {
            out.extend([&a.query[..], &a.key[..], &a.value[..], &a.output[..]]);
        }
        out.push(&self.head_weight);
        out.push(&self.head_bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.embedding, &mut self.segment];
        if let Some(a) = &mut self.attention {
            out.extend([&mut a.query[..], &mut a.key[..], &mut a.value[..], &mut a.output[..]]);
        }
        out.push(&mut self.head_weight);
        out.push(&mut self.head_bias);
        out
    }

    pub fn tensor_names(&self) -> Vec<&'static str> {
        let mut out = vec!["embedding", "segment"];
        if self.attention.is_some() {
            out.extend(["attention.query", "attention.key", "attention.value", "attention.output"]);
        }
        out.extend(["head.weight", "head.bias"]);
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Checks every tensor length against the config.
    pub fn shapes_match(&self) -> bool {
        let c = self.config;
        let d = c.dim;
        self.embedding.len() == c.vocab_size * d
            && self.segment.len() == Segment::EMBEDDED * d
            && self.attention.is_some() == c.attention
            && self.attention.as_ref().map_or(true, |a| {
                [&a.query, &a.key, &a.value, &a.output].iter().all(|w| w.len() == d * d)
            })
            && self.head_weight.len() == 2 * d
            && self.head_bias.len() == 1
    }

    /// Rounds every parameter to the nearest `f32`, the storage precision of
    /// saved checkpoints.
    pub fn round_to_storage(&mut self) {
        for t in self.tensors_mut() {
            for x in t {
                *x = *x as f32 as f64;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairEncoding {
    pub comment: Vec<f64>,
    pub diff: Vec<f64>,
    pub prob: f64,
    pub logit: f64,
}

fn push_segment(ids: &mut Vec<u32>, segs: &mut Vec<Segment>, tokens: &[u32], seg: Segment) {
    ids.extend_from_slice(tokens);
    ids.push(SEP_ID);
    segs.extend(std::iter::repeat(seg).take(tokens.len() + 1));
}

fn to_ids(vocab: &Vocabulary, tokens: &[Token]) -> Vec<u32> {
    tokens.iter().map(|t| vocab.id(t.text())).collect()
}

/// Per-segment token lists for a record, before truncation.
pub fn segment_tokens(rec: &PreprocessedRecord, mode: InputMode) -> [Vec<Token>; 4] {
    let comment = lex_comment(&rec.record.comment).tokens;
    match mode {
        InputMode::Tagged => {
            let parts = rec.decomposition();
            [parts.s_old, parts.s_new, comment, rec.tagged_tokens().tokens]
        }
        InputMode::Flat => {
            let script = rec.script().unwrap_or_default();
            [
                lex_code(&rec.record.old_code).tokens,
                lex_code(&rec.record.new_code).tokens,
                comment,
                flatten_untagged(&script),
            ]
        }
    }
}

/// Builds `OLD <sep> NEW <sep> COMMENT <sep> DIFF <sep>` and pads to `max_len`.
///
/// Over-long inputs lose tokens from the DIFF tail first, then the COMMENT
/// tail, then NEW, then OLD. Separators are always kept.
pub fn assemble_input(
    rec: &PreprocessedRecord,
    vocab: &Vocabulary,
    max_len: usize,
    mode: InputMode,
) -> Result<EncodedInput, EncoderError> {
    if max_len < 8 {
        return Err(EncoderError::MaxLen(max_len));
    }
    let [old, new, comment, diff] = segment_tokens(rec, mode);
    let mut parts = [to_ids(vocab, &old), to_ids(vocab, &new), to_ids(vocab, &comment), to_ids(vocab, &diff)];

    let budget = max_len - Segment::EMBEDDED;
    let mut excess = parts.iter().map(Vec::len).sum::<usize>().saturating_sub(budget);
    for idx in [3, 2, 1, 0] {
        if excess == 0 {
            break;
        }
        let cut = excess.min(parts[idx].len());
        let keep = parts[idx].len() - cut;
        parts[idx].truncate(keep);
        excess -= cut;
    }

    let mut ids = Vec::with_capacity(max_len);
    let mut segments = Vec::with_capacity(max_len);
    for (part, seg) in parts.iter().zip([Segment::Old, Segment::New, Segment::Comment, Segment::Diff]) {
        push_segment(&mut ids, &mut segments, part, seg);
    }
    ids.resize(max_len, PAD_ID);
    segments.resize(max_len, Segment::Pad);
    Ok(EncodedInput { ids, segments })
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out[n x m] = a[n x k] . w[k x m]`.
fn matmul(a: &[f64], n: usize, k: usize, w: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let row = &mut out[i * m..(i + 1) * m];
        for (t, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (o, &wv) in row.iter_mut().zip(&w[t * m..(t + 1) * m]) {
                *o += av * wv;
            }
        }
    }
    out
}

/// `acc[k x m] += a^T . g` for `a[n x k]`, `g[n x m]`.
fn add_at_b(acc: &mut [f64], a: &[f64], g: &[f64], n: usize, k: usize, m: usize) {
    for i in 0..n {
        for t in 0..k {
            let av = a[i * k + t];
            if av == 0.0 {
                continue;
            }
            for j in 0..m {
                acc[t * m + j] += av * g[i * m + j];
            }
        }
    }
}

/// `out[n x k] = g[n x m] . w^T` for `w[k x m]`.
fn matmul_bt(g: &[f64], n: usize, m: usize, w: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * k];
    for i in 0..n {
        let grow = &g[i * m..(i + 1) * m];
        for t in 0..k {
            out[i * k + t] = dot(grow, &w[t * m..(t + 1) * m]);
        }
    }
    out
}

struct AttentionCache {
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// Row-stochastic `n x n` weights.
    weights: Vec<f64>,
    mixed: Vec<f64>,
}

struct Pooled {
    norm: f64,
    unit: Vec<f64>,
    count: usize,
}

/// Forward intermediates for one example, reused by the backward pass.
pub struct Forward {
    ids: Vec<u32>,
    segs: Vec<Segment>,
    embedded: Vec<f64>,
    attention: Option<AttentionCache>,
    comment: Pooled,
    diff: Pooled,
    logit: f64,
    prob: f64,
}

impl Forward {
    pub fn encoding(&self) -> PairEncoding {
        PairEncoding {
            comment: self.comment.unit.clone(),
            diff: self.diff.unit.clone(),
            prob: self.prob,
            logit: self.logit,
        }
    }
}

fn pool(hidden: &[f64], segs: &[Segment], d: usize, member: impl Fn(Segment) -> bool) -> Pooled {
    let mut mean = vec![0.0; d];
    let mut count = 0;
    for (t, seg) in segs.iter().enumerate() {
        if member(*seg) {
            count += 1;
            for (m, h) in mean.iter_mut().zip(&hidden[t * d..(t + 1) * d]) {
                *m += h;
            }
        }
    }
    if count > 0 {
        let inv = 1.0 / count as f64;
        mean.iter_mut().for_each(|m| *m *= inv);
    }
    let norm = dot(&mean, &mean).sqrt();
    let unit = if norm < DEGENERATE_NORM {
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        e
    } else {
        mean.iter().map(|m| m / norm).collect()
    };
    Pooled { norm, unit, count }
}

fn is_code_segment(seg: Segment) -> bool {
    matches!(seg, Segment::Old | Segment::New | Segment::Diff)
}

fn validate_input(input: &EncodedInput, params: &ModelParams) -> Result<(), EncoderError> {
    if input.ids.len() != input.segments.len() {
        return Err(EncoderError::Ragged { ids: input.ids.len(), segments: input.segments.len() });
    }
    if input.content_len() > params.config.max_len {
        return Err(EncoderError::TooLong { len: input.content_len(), max_len: params.config.max_len });
    }
    if let Some(&id) = input.ids.iter().find(|&&id| id as usize >= params.config.vocab_size) {
        return Err(EncoderError::IdOutOfRange { id, vocab_size: params.config.vocab_size });
    }
    Ok(())
}

/// Runs the encoder on one input and keeps what backprop needs.
pub fn forward(input: &EncodedInput, params: &ModelParams) -> Result<Forward, EncoderError> {
    validate_input(input, params)?;
    let d = params.config.dim;
    let (ids, segs): (Vec<u32>, Vec<Segment>) = input
        .ids
        .iter()
        .zip(&input.segments)
        .filter(|(_, s)| **s != Segment::Pad)
        .map(|(i, s)| (*i, *s))
        .unzip();
    let n = ids.len();

    let mut embedded = vec![0.0; n * d];
    for (t, (&id, &seg)) in ids.iter().zip(&segs).enumerate() {
        let tok = &params.embedding[id as usize * d..(id as usize + 1) * d];
        let sg = &params.segment[seg.index() * d..(seg.index() + 1) * d];
        for (j, out) in embedded[t * d..(t + 1) * d].iter_mut().enumerate() {
            *out = tok[j] + sg[j];
        }
    }

    let (hidden, attention) = match &params.attention {
        None => (embedded.clone(), None),
        Some(att) => {
            let q = matmul(&embedded, n, d, &att.query, d);
            let k = matmul(&embedded, n, d, &att.key, d);
            let v = matmul(&embedded, n, d, &att.value, d);
            let scale = 1.0 / (d as f64).sqrt();
            let mut weights = vec![0.0; n * n];
            for t in 0..n {
                let row = &mut weights[t * n..(t + 1) * n];
                let qt = &q[t * d..(t + 1) * d];
                for (s, w) in row.iter_mut().enumerate() {
                    *w = scale * dot(qt, &k[s * d..(s + 1) * d]);
                }
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for w in row.iter_mut() {
                    *w = (*w - max).exp();
                    z += *w;
                }
                row.iter_mut().for_each(|w| *w /= z);
            }
            let mixed = matmul(&weights, n, n, &v, d);
            let projected = matmul(&mixed, n, d, &att.output, d);
            let hidden = embedded.iter().zip(&projected).map(|(e, o)| e + o).collect();
            (hidden, Some(AttentionCache { q, k, v, weights, mixed }))
        }
    };

    let comment = pool(&hidden, &segs, d, |s| s == Segment::Comment);
    let diff = pool(&hidden, &segs, d, is_code_segment);
    let logit = dot(&params.head_weight[..d], &comment.unit)
        + dot(&params.head_weight[d..], &diff.unit)
        + params.head_bias[0];
    let prob = sigmoid(logit);

    Ok(Forward { ids, segs, embedded, attention, comment, diff, logit, prob })
}

/// Unit comment vector, unit diff vector and inconsistency probability for one input.
pub fn encode_pair(input: &EncodedInput, params: &ModelParams) -> Result<PairEncoding, EncoderError> {
    Ok(forward(input, params)?.encoding())
}

/// Gradient of a unit vector `u = m / |m|` pulled back to `m`.
fn normalize_backward(pooled: &Pooled, grad_unit: &[f64]) -> Vec<f64> {
    if pooled.norm < DEGENERATE_NORM {
        return vec![0.0; grad_unit.len()];
    }
    let proj = dot(&pooled.unit, grad_unit);
    grad_unit
        .iter()
        .zip(&pooled.unit)
        .map(|(g, u)| (g - u * proj) / pooled.norm)
        .collect()
}

/// Accumulates parameter gradients for one example given upstream gradients
/// on the comment vector, the diff vector and the logit.
pub fn backward(
    fwd: &Forward,
    params: &ModelParams,
    grad_comment: &[f64],
    grad_diff: &[f64],
    grad_logit: f64,
    grads: &mut ModelParams,
) {
    let d = params.config.dim;
    let n = fwd.ids.len();

    for j in 0..d {
        grads.head_weight[j] += grad_logit * fwd.comment.unit[j];
        grads.head_weight[d + j] += grad_logit * fwd.diff.unit[j];
    }
    grads.head_bias[0] += grad_logit;

    let gc: Vec<f64> = (0..d).map(|j| grad_comment[j] + grad_logit * params.head_weight[j]).collect();
    let gs: Vec<f64> = (0..d).map(|j| grad_diff[j] + grad_logit * params.head_weight[d + j]).collect();
    let gm_c = normalize_backward(&fwd.comment, &gc);
    let gm_s = normalize_backward(&fwd.diff, &gs);

    let mut grad_hidden = vec![0.0; n * d];
    for (t, seg) in fwd.segs.iter().enumerate() {
        let (src, count) = if *seg == Segment::Comment {
            (&gm_c, fwd.comment.count)
        } else if is_code_segment(*seg) {
            (&gm_s, fwd.diff.count)
        } else {
            continue;
        };
        let inv = 1.0 / count as f64;
        for (g, s) in grad_hidden[t * d..(t + 1) * d].iter_mut().zip(src) {
            *g = s * inv;
        }
    }

    let mut grad_embedded = grad_hidden.clone();
    if let (Some(att), Some(cache), Some(gatt)) =
        (&params.attention, &fwd.attention, grads.attention.as_mut())
    {
        let scale = 1.0 / (d as f64).sqrt();
        // hidden = embedded + mixed . Wo
        add_at_b(&mut gatt.output, &cache.mixed, &grad_hidden, n, d, d);
        let grad_mixed = matmul_bt(&grad_hidden, n, d, &att.output, d);
        // mixed = weights . v
        let mut grad_v = vec![0.0; n * d];
        add_at_b(&mut grad_v, &cache.weights, &grad_mixed, n, n, d);
        let mut grad_scores = vec![0.0; n * n];
        for t in 0..n {
            let gm = &grad_mixed[t * d..(t + 1) * d];
            let row = &cache.weights[t * n..(t + 1) * n];
            let gw: Vec<f64> = (0..n).map(|s| dot(gm, &cache.v[s * d..(s + 1) * d])).collect();
            let mix = dot(row, &gw);
            for s in 0..n {
                grad_scores[t * n + s] = row[s] * (gw[s] - mix) * scale;
            }
        }
        let grad_q = matmul(&grad_scores, n, n, &cache.k, d);
        let mut grad_k = vec![0.0; n * d];
        add_at_b(&mut grad_k, &grad_scores, &cache.q, n, n, d);

        add_at_b(&mut gatt.query, &fwd.embedded, &grad_q, n, d, d);
        add_at_b(&mut gatt.key, &fwd.embedded, &grad_k, n, d, d);
        add_at_b(&mut gatt.value, &fwd.embedded, &grad_v, n, d, d);
        for (grad, w) in [(&grad_q, &att.query), (&grad_k, &att.key), (&grad_v, &att.value)] {
            let back = matmul_bt(grad, n, d, w, d);
            grad_embedded.iter_mut().zip(&back).for_each(|(g, b)| *g += b);
        }
    }

    for (t, (&id, seg)) in fwd.ids.iter().zip(&fwd.segs).enumerate() {
        let ge = &grad_embedded[t * d..(t + 1) * d];
        let row = id as usize * d;
        let srow = seg.index() * d;
        for j in 0..d {
            grads.embedding[row + j] += ge[j];
            grads.segment[srow + j] += ge[j];
        }
    }
}

/// Loss values and parameter gradients for one batch.
#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub loss: LossBreakdown,
    pub grads: ModelParams,
    pub encodings: Vec<PairEncoding>,
}

fn batch_forward(
    params: &ModelParams,
    inputs: &[&EncodedInput],
    labels: &[u8],
) -> Result<(Vec<Forward>, BatchTensors), EncoderError> {
    let forwards = inputs.iter().map(|x| forward(x, params)).collect::<Result<Vec<_>, _>>()?;
    let batch = BatchTensors {
        comment: forwards.iter().map(|f| f.comment.unit.clone()).collect(),
        diff: forwards.iter().map(|f| f.diff.unit.clone()).collect(),
        probs: forwards.iter().map(|f| f.prob).collect(),
        labels: labels.to_vec(),
    };
    Ok((forwards, batch))
}

/// Loss only, no gradients.
pub fn batch_loss(
    params: &ModelParams,
    inputs: &[&EncodedInput],
    labels: &[u8],
    cfg: &ContrastiveConfig,
) -> Result<LossBreakdown, EncoderError> {
    let (_, batch) = batch_forward(params, inputs, labels)?;
    Ok(total_loss(&batch, cfg)?)
}

/// Full forward and backward pass over a batch. Gradients accumulate in
/// example order, so results are bitwise reproducible.
pub fn batch_loss_and_grad(
    params: &ModelParams,
    inputs: &[&EncodedInput],
    labels: &[u8],
    cfg: &ContrastiveConfig,
) -> Result<BatchOutcome, EncoderError> {
    let (forwards, batch) = batch_forward(params, inputs, labels)?;
    let loss = total_loss(&batch, cfg)?;
    let mut grads = ModelParams::zeros(params.config);
    for (i, fwd) in forwards.iter().enumerate() {
        let p = fwd.prob;
        let grad_logit = loss.grads.probs[i] * p * (1.0 - p);
        backward(fwd, params, &loss.grads.comment[i], &loss.grads.diff[i], grad_logit, &mut grads);
    }
    let encodings = forwards.iter().map(Forward::encoding).collect();
    Ok(BatchOutcome { loss, grads, encodings })
}
