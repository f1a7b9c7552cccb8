//! Forward and backward passes of the BiLSTM biaffine parser.
//!
//! Input per token is `[static vector | word embedding | char CNN | POS
//! embedding]`. Context vectors feed four tanh projections (arc head, arc
//! dependent, label head, label dependent). Arc scores are
//! `s[h][d] = head_h U dep_d' + head_h u' + b`; label scores for relation r are
//! `head_h U_r dep_d' + w_r head_h' + v_r dep_d' + b_r`.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::{LstmDirection, ParserParams};
use crate::decoder::ArcScoreMatrix;
use crate::error::{invalid, Error, Result};
use crate::lexicon::{lookup, EmbeddingTable, Vocabulary};
use crate::treebank::DepSentence;

/// Vocabulary ids and static vectors of one sentence, resolved once.
#[derive(Clone, Debug, PartialEq)]
pub struct SentenceFeatures {
    pub word_ids: Vec<usize>,
    pub char_ids: Vec<Vec<usize>>,
    pub pos_ids: Vec<usize>,
    /// `None` where the token uses the trainable UNK vector.
    pub statics: Vec<Option<Vec<f64>>>,
    pub heads: Vec<usize>,
    pub labels: Vec<Option<usize>>,
}

impl SentenceFeatures {
    pub fn len(&self) -> usize {
        self.word_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_ids.is_empty()
    }
}

pub fn featurize(
    sentence: &DepSentence,
    vocab: &Vocabulary,
    table: Option<&EmbeddingTable>,
) -> SentenceFeatures {
    let mut f = SentenceFeatures {
        word_ids: Vec::new(),
        char_ids: Vec::new(),
        pos_ids: Vec::new(),
        statics: Vec::new(),
        heads: Vec::new(),
        labels: Vec::new(),
    };
    for token in &sentence.tokens {
        match table {
            Some(table) => {
                let hit = lookup(vocab, table, &token.form);
                f.word_ids.push(hit.word_id);
                f.char_ids.push(hit.char_ids);
                f.statics.push(hit.vector.map(<[f64]>::to_vec));
            }
            None => {
                f.word_ids.push(vocab.word_id(&token.form));
                f.char_ids.push(vocab.char_ids(&token.form));
                f.statics.push(None);
            }
        }
        f.pos_ids.push(vocab.pos_id(&token.upos));
        f.heads.push(token.head);
        f.labels.push(vocab.label_id(&token.deprel));
    }
    f
}

/// Inverted-dropout settings for a training pass.
pub struct Dropout<'a> {
    pub rng: &'a mut ChaCha8Rng,
    pub input: f64,
    pub hidden: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dropout_mask(rng: &mut ChaCha8Rng, shape: (usize, usize), p: f64) -> Array2<f64> {
    let keep = 1.0 / (1.0 - p);
    Array2::from_shape_simple_fn(shape, || if rng.gen::<f64>() < p { 0.0 } else { keep })
}

struct CharCache {
    windows: Array2<f64>,
    activations: Array2<f64>,
    argmax: Vec<usize>,
}

fn char_forward(params: &ParserParams, chars: &[usize]) -> (Array1<f64>, CharCache) {
    let dc = params.char_emb.ncols();
    let k = params.char_conv.nrows() / dc;
    let pad = k / 2;
    let m = chars.len().max(1);
    let mut windows = Array2::zeros((m, k * dc));
    for j in 0..m {
        for o in 0..k {
            let pos = j as isize + o as isize - pad as isize;
            if pos >= 0 && (pos as usize) < chars.len() {
                windows
                    .slice_mut(s![j, o * dc..(o + 1) * dc])
                    .assign(&params.char_emb.row(chars[pos as usize]));
            }
        }
    }
    let mut activations = windows.dot(&params.char_conv) + &params.char_conv_bias;
    activations.mapv_inplace(f64::tanh);
    let filters = activations.ncols();
    let mut argmax = vec![0; filters];
    let mut feature = Array1::zeros(filters);
    for q in 0..filters {
        let column = activations.column(q);
        let mut best = 0;
        for j in 1..m {
            if column[j] > column[best] {
                best = j;
            }
        }
        argmax[q] = best;
        feature[q] = column[best];
    }
    (
        feature,
        CharCache {
            windows,
            activations,
            argmax,
        },
    )
}

fn char_backward(
    params: &ParserParams,
    chars: &[usize],
    cache: &CharCache,
    d_feature: ArrayView1<f64>,
    grads: &mut ParserParams,
) {
    let dc = params.char_emb.ncols();
    let k = params.char_conv.nrows() / dc;
    let pad = k / 2;
    let mut dz = Array2::zeros(cache.activations.dim());
    for (q, &j) in cache.argmax.iter().enumerate() {
        let a = cache.activations[[j, q]];
        dz[[j, q]] = d_feature[q] * (1.0 - a * a);
    }
    grads.char_conv += &cache.windows.t().dot(&dz);
    grads.char_conv_bias += &dz.sum_axis(Axis(0)).insert_axis(Axis(0));
    let d_windows = dz.dot(&params.char_conv.t());
    for j in 0..d_windows.nrows() {
        for o in 0..k {
            let pos = j as isize + o as isize - pad as isize;
            if pos >= 0 && (pos as usize) < chars.len() {
                let mut row = grads.char_emb.row_mut(chars[pos as usize]);
                row += &d_windows.slice(s![j, o * dc..(o + 1) * dc]);
            }
        }
    }
}

struct LstmCache {
    inputs: Array2<f64>,
    /// Activated gates per position: input, forget, output, cell candidate.
    gates: Array2<f64>,
    cells: Array2<f64>,
    tanh_cells: Array2<f64>,
    hidden: Array2<f64>,
    reverse: bool,
}

impl LstmCache {
    fn order(&self) -> Vec<usize> {
        let n = self.inputs.nrows();
        if self.reverse {
            (0..n).rev().collect()
        } else {
            (0..n).collect()
        }
    }

    fn previous(&self, t: usize) -> Option<usize> {
        let n = self.inputs.nrows();
        if self.reverse {
            (t + 1 < n).then_some(t + 1)
        } else {
            t.checked_sub(1)
        }
    }
}

fn lstm_forward(dir: &LstmDirection, inputs: Array2<f64>, reverse: bool) -> LstmCache {
    let n = inputs.nrows();
    let h = dir.w_hidden.nrows();
    let pre = inputs.dot(&dir.w_input) + &dir.bias;
    let mut cache = LstmCache {
        gates: Array2::zeros((n, 4 * h)),
        cells: Array2::zeros((n, h)),
        tanh_cells: Array2::zeros((n, h)),
        hidden: Array2::zeros((n, h)),
        inputs,
        reverse,
    };
    for t in cache.order() {
        let mut z = pre.row(t).to_owned();
        let prev = cache.previous(t);
        if let Some(p) = prev {
            z += &cache.hidden.row(p).dot(&dir.w_hidden);
        }
        for j in 0..h {
            let i = sigmoid(z[j]);
            let f = sigmoid(z[h + j]);
            let o = sigmoid(z[2 * h + j]);
            let g = z[3 * h + j].tanh();
            let c_prev = prev.map_or(0.0, |p| cache.cells[[p, j]]);
            let c = f * c_prev + i * g;
            let tc = c.tanh();
            cache.gates[[t, j]] = i;
            cache.gates[[t, h + j]] = f;
            cache.gates[[t, 2 * h + j]] = o;
            cache.gates[[t, 3 * h + j]] = g;
            cache.cells[[t, j]] = c;
            cache.tanh_cells[[t, j]] = tc;
            cache.hidden[[t, j]] = o * tc;
        }
    }
    cache
}

/// Backpropagation through time; returns the gradient w.r.t. the inputs.
fn lstm_backward(
    dir: &LstmDirection,
    cache: &LstmCache,
    d_hidden: &Array2<f64>,
    grads: &mut LstmDirection,
) -> Array2<f64> {
    let n = cache.inputs.nrows();
    let h = dir.w_hidden.nrows();
    let mut dz_all = Array2::zeros((n, 4 * h));
    let mut prev_hidden = Array2::zeros((n, h));
    let mut dh_next = Array1::<f64>::zeros(h);
    let mut dc_next = Array1::<f64>::zeros(h);
    for t in cache.order().into_iter().rev() {
        let prev = cache.previous(t);
        if let Some(p) = prev {
            prev_hidden.row_mut(t).assign(&cache.hidden.row(p));
        }
        let mut dc_carry = Array1::zeros(h);
        for j in 0..h {
            let i = cache.gates[[t, j]];
            let f = cache.gates[[t, h + j]];
            let o = cache.gates[[t, 2 * h + j]];
            let g = cache.gates[[t, 3 * h + j]];
            let tc = cache.tanh_cells[[t, j]];
            let c_prev = prev.map_or(0.0, |p| cache.cells[[p, j]]);
            let dh = d_hidden[[t, j]] + dh_next[j];
            let d_o = dh * tc;
            let dc = dc_next[j] + dh * o * (1.0 - tc * tc);
            dz_all[[t, j]] = dc * g * i * (1.0 - i);
            dz_all[[t, h + j]] = dc * c_prev * f * (1.0 - f);
            dz_all[[t, 2 * h + j]] = d_o * o * (1.0 - o);
            dz_all[[t, 3 * h + j]] = dc * i * (1.0 - g * g);
            dc_carry[j] = dc * f;
        }
        dh_next = dz_all.row(t).dot(&dir.w_hidden.t());
        dc_next = dc_carry;
    }
    grads.w_input += &cache.inputs.t().dot(&dz_all);
    grads.w_hidden += &prev_hidden.t().dot(&dz_all);
    grads.bias += &dz_all.sum_axis(Axis(0)).insert_axis(Axis(0));
    dz_all.dot(&dir.w_input.t())
}

fn project(contexts: &Array2<f64>, w: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    (contexts.dot(w) + b).mapv(f64::tanh)
}

/// Gradient of a tanh projection; accumulates weight grads, returns d contexts.
fn project_backward(
    contexts: &Array2<f64>,
    out: &Array2<f64>,
    d_out: &Array2<f64>,
    w: &Array2<f64>,
    dw: &mut Array2<f64>,
    db: &mut Array2<f64>,
) -> Array2<f64> {
    let dz = d_out * &out.mapv(|v| 1.0 - v * v);
    *dw += &contexts.t().dot(&dz);
    *db += &dz.sum_axis(Axis(0)).insert_axis(Axis(0));
    dz.dot(&w.t())
}

struct Forward {
    chars: Vec<(Array1<f64>, CharCache)>,
    input_mask: Option<Array2<f64>>,
    layers: Vec<(LstmCache, LstmCache)>,
    hidden_mask: Option<Array2<f64>>,
    contexts: Array2<f64>,
}

fn forward(params: &ParserParams, feats: &SentenceFeatures, mut dropout: Option<&mut Dropout>) -> Forward {
    let n = feats.len();
    let ds = params.static_unk.ncols();
    let dw = params.word_emb.ncols();
    let df = params.char_conv.ncols();
    let dp = params.pos_emb.ncols();
    let chars: Vec<_> = feats.char_ids.iter().map(|c| char_forward(params, c)).collect();

    let mut x = Array2::zeros((n, ds + dw + df + dp));
    for i in 0..n {
        let mut row = x.row_mut(i);
        if ds > 0 {
            match &feats.statics[i] {
                Some(v) => row.slice_mut(s![..ds]).assign(&ArrayView1::from(v.as_slice())),
                None => row.slice_mut(s![..ds]).assign(&params.static_unk.row(0)),
            }
        }
        row.slice_mut(s![ds..ds + dw]).assign(&params.word_emb.row(feats.word_ids[i]));
        row.slice_mut(s![ds + dw..ds + dw + df]).assign(&chars[i].0);
        row.slice_mut(s![ds + dw + df..]).assign(&params.pos_emb.row(feats.pos_ids[i]));
    }
    let input_mask = match dropout.as_deref_mut() {
        Some(d) if d.input > 0.0 => Some(dropout_mask(d.rng, x.dim(), d.input)),
        _ => None,
    };
    if let Some(mask) = &input_mask {
        x *= mask;
    }

    let mut layers = Vec::with_capacity(params.lstm.len());
    let mut current = x;
    for layer in &params.lstm {
        let fwd = lstm_forward(&layer.forward, current.clone(), false);
        let bwd = lstm_forward(&layer.backward, current, true);
        current = ndarray::concatenate![Axis(1), fwd.hidden, bwd.hidden];
        layers.push((fwd, bwd));
    }
    let hidden_mask = match dropout {
        Some(d) if d.hidden > 0.0 => Some(dropout_mask(d.rng, current.dim(), d.hidden)),
        _ => None,
    };
    if let Some(mask) = &hidden_mask {
        current *= mask;
    }
    let contexts = ndarray::concatenate![Axis(0), params.root, current];
    Forward {
        chars,
        input_mask,
        layers,
        hidden_mask,
        contexts,
    }
}

/// Context vectors: row 0 is the learned root, row i the BiLSTM state of
/// token i (forward half, then backward half).
pub fn encode_features(params: &ParserParams, feats: &SentenceFeatures) -> Array2<f64> {
    forward(params, feats, None).contexts
}

pub fn encode(
    sentence: &DepSentence,
    params: &ParserParams,
    vocab: &Vocabulary,
    table: Option<&EmbeddingTable>,
) -> Array2<f64> {
    encode_features(params, &featurize(sentence, vocab, table))
}

/// `s[h][d] = head_h U dep_d' + head_h u' + b` for heads `0..=n` and
/// dependents `1..=n` (rows of `deps`).
pub fn biaffine_arc_scores(
    heads: &Array2<f64>,
    deps: &Array2<f64>,
    u: &Array2<f64>,
    head_bias: &Array2<f64>,
    bias: f64,
) -> Array2<f64> {
    let bilinear = heads.dot(u).dot(&deps.t());
    let linear = heads.dot(&head_bias.t());
    bilinear + &linear + bias
}

struct Projections {
    arc_head: Array2<f64>,
    arc_dep: Array2<f64>,
    label_head: Array2<f64>,
    label_dep: Array2<f64>,
}

fn projections(params: &ParserParams, contexts: &Array2<f64>) -> Projections {
    Projections {
        arc_head: project(contexts, &params.arc_head_w, &params.arc_head_b),
        arc_dep: project(contexts, &params.arc_dep_w, &params.arc_dep_b),
        label_head: project(contexts, &params.label_head_w, &params.label_head_b),
        label_dep: project(contexts, &params.label_dep_w, &params.label_dep_b),
    }
}

fn arc_matrix(params: &ParserParams, p: &Projections) -> Array2<f64> {
    biaffine_arc_scores(
        &p.arc_head,
        &p.arc_dep.slice(s![1.., ..]).to_owned(),
        &params.arc_u,
        &params.arc_head_bias,
        params.arc_bias[[0, 0]],
    )
}

pub fn score_arcs(contexts: &Array2<f64>, params: &ParserParams) -> Result<ArcScoreMatrix> {
    ArcScoreMatrix::new(arc_matrix(params, &projections(params, contexts)))
}

fn label_row(params: &ParserParams, head: ArrayView1<f64>, dep: ArrayView1<f64>) -> Array1<f64> {
    let dl = head.len();
    let r = params.label_bias.ncols();
    let mut out = Array1::zeros(r);
    for label in 0..r {
        let block = params.label_u.slice(s![label * dl..(label + 1) * dl, ..]);
        out[label] = head.dot(&block.dot(&dep))
            + params.label_head_lin.row(label).dot(&head)
            + params.label_dep_lin.row(label).dot(&dep)
            + params.label_bias[[0, label]];
    }
    out
}

/// Label scores (`n x labels`) for each dependent under the given heads.
pub fn score_labels(contexts: &Array2<f64>, params: &ParserParams, heads: &[usize]) -> Result<Array2<f64>> {
    let n = contexts.nrows() - 1;
    if heads.len() != n {
        return invalid(format!("{} heads for {n} tokens", heads.len()));
    }
    if let Some(&h) = heads.iter().find(|&&h| h > n) {
        return invalid(format!("head index {h} out of range for {n} tokens"));
    }
    let p = projections(params, contexts);
    let mut out = Array2::zeros((n, params.label_bias.ncols()));
    for (d, &h) in heads.iter().enumerate() {
        out.row_mut(d)
            .assign(&label_row(params, p.label_head.row(h), p.label_dep.row(d + 1)));
    }
    Ok(out)
}

/// Turns scores into probabilities in place; returns `-log p[gold]`.
fn softmax_nll(v: &mut Array1<f64>, gold: usize) -> f64 {
    let max = v.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let shifted_gold = v[gold] - max;
    v.mapv_inplace(|x| (x - max).exp());
    let sum = v.sum();
    *v /= sum;
    sum.ln() - shifted_gold
}

/// Loss of one sentence, scaled by `1 / norm`; gradients accumulate into
/// `grads`.
pub(crate) fn sentence_loss(
    params: &ParserParams,
    feats: &SentenceFeatures,
    norm: f64,
    grads: &mut ParserParams,
    dropout: Option<&mut Dropout>,
) -> f64 {
    let n = feats.len();
    let fwd = forward(params, feats, dropout);
    let c = &fwd.contexts;
    let p = projections(params, c);
    let scores = arc_matrix(params, &p);

    let mut loss = 0.0;
    let mut d_scores = Array2::zeros(scores.dim());
    for d in 0..n {
        let mut prob = scores.column(d).to_owned();
        let gold = feats.heads[d];
        loss += softmax_nll(&mut prob, gold);
        prob[gold] -= 1.0;
        d_scores.column_mut(d).assign(&(prob / norm));
    }

    let dl = p.label_head.ncols();
    let mut d_label_head = Array2::zeros(p.label_head.dim());
    let mut d_label_dep = Array2::zeros(p.label_dep.dim());
    for d in 0..n {
        let Some(gold_label) = feats.labels[d] else {
            continue;
        };
        let h = feats.heads[d];
        let head = p.label_head.row(h);
        let dep = p.label_dep.row(d + 1);
        let mut prob = label_row(params, head, dep);
        loss += softmax_nll(&mut prob, gold_label);
        prob[gold_label] -= 1.0;
        let g = prob / norm;
        for (label, &gr) in g.iter().enumerate() {
            let block = params.label_u.slice(s![label * dl..(label + 1) * dl, ..]);
            {
                let mut row = d_label_head.row_mut(h);
                row.scaled_add(gr, &block.dot(&dep));
                row.scaled_add(gr, &params.label_head_lin.row(label));
            }
            {
                let mut row = d_label_dep.row_mut(d + 1);
                row.scaled_add(gr, &block.t().dot(&head));
                row.scaled_add(gr, &params.label_dep_lin.row(label));
            }
            let outer = head
                .to_owned()
                .insert_axis(Axis(1))
                .dot(&dep.to_owned().insert_axis(Axis(0)));
            grads
                .label_u
                .slice_mut(s![label * dl..(label + 1) * dl, ..])
                .scaled_add(gr, &outer);
            grads.label_head_lin.row_mut(label).scaled_add(gr, &head);
            grads.label_dep_lin.row_mut(label).scaled_add(gr, &dep);
            grads.label_bias[[0, label]] += gr;
        }
    }

    // Arc biaffine.
    let deps = p.arc_dep.slice(s![1.., ..]);
    let row_sums = d_scores.sum_axis(Axis(1));
    let mut d_arc_head = d_scores.dot(&deps).dot(&params.arc_u.t());
    d_arc_head += &row_sums
        .clone()
        .insert_axis(Axis(1))
        .dot(&params.arc_head_bias);
    let mut d_arc_dep = Array2::zeros(p.arc_dep.dim());
    d_arc_dep
        .slice_mut(s![1.., ..])
        .assign(&d_scores.t().dot(&p.arc_head).dot(&params.arc_u));
    grads.arc_u += &p.arc_head.t().dot(&d_scores).dot(&deps);
    grads.arc_head_bias += &row_sums.dot(&p.arc_head).insert_axis(Axis(0));
    grads.arc_bias[[0, 0]] += d_scores.sum();

    let mut dc = project_backward(
        c,
        &p.arc_head,
        &d_arc_head,
        &params.arc_head_w,
        &mut grads.arc_head_w,
        &mut grads.arc_head_b,
    );
    dc += &project_backward(
        c,
        &p.arc_dep,
        &d_arc_dep,
        &params.arc_dep_w,
        &mut grads.arc_dep_w,
        &mut grads.arc_dep_b,
    );
    dc += &project_backward(
        c,
        &p.label_head,
        &d_label_head,
        &params.label_head_w,
        &mut grads.label_head_w,
        &mut grads.label_head_b,
    );
    dc += &project_backward(
        c,
        &p.label_dep,
        &d_label_dep,
        &params.label_dep_w,
        &mut grads.label_dep_w,
        &mut grads.label_dep_b,
    );

    backward_encoder(params, feats, &fwd, dc, grads);
    loss / norm
}

fn backward_encoder(
    params: &ParserParams,
    feats: &SentenceFeatures,
    fwd: &Forward,
    dc: Array2<f64>,
    grads: &mut ParserParams,
) {
    let h = params.hidden();
    grads.root += &dc.slice(s![0..1, ..]);
    let mut d_out = dc.slice(s![1.., ..]).to_owned();
    if let Some(mask) = &fwd.hidden_mask {
        d_out *= mask;
    }
    for (l, (fc, bc)) in fwd.layers.iter().enumerate().rev() {
        let layer = &params.lstm[l];
        let d_fwd = d_out.slice(s![.., ..h]).to_owned();
        let d_bwd = d_out.slice(s![.., h..]).to_owned();
        let g = &mut grads.lstm[l];
        let mut d_in = lstm_backward(&layer.forward, fc, &d_fwd, &mut g.forward);
        d_in += &lstm_backward(&layer.backward, bc, &d_bwd, &mut g.backward);
        d_out = d_in;
    }
    if let Some(mask) = &fwd.input_mask {
        d_out *= mask;
    }

    let ds = params.static_unk.ncols();
    let dw = params.word_emb.ncols();
    let df = params.char_conv.ncols();
    for i in 0..feats.len() {
        let row = d_out.row(i);
        if ds > 0 && feats.statics[i].is_none() {
            let mut unk = grads.static_unk.row_mut(0);
            unk += &row.slice(s![..ds]);
        }
        {
            let mut w = grads.word_emb.row_mut(feats.word_ids[i]);
            w += &row.slice(s![ds..ds + dw]);
        }
        char_backward(
            params,
            &feats.char_ids[i],
            &fwd.chars[i].1,
            row.slice(s![ds + dw..ds + dw + df]),
            grads,
        );
        let mut pos = grads.pos_emb.row_mut(feats.pos_ids[i]);
        pos += &row.slice(s![ds + dw + df..]);
    }
}

/// Mean per-token loss (arc + label cross-entropy) over a batch and its
/// gradient for every tensor.
pub fn batch_loss(
    params: &ParserParams,
    batch: &[SentenceFeatures],
    mut dropout: Option<&mut Dropout>,
) -> Result<(f64, ParserParams)> {
    let tokens: usize = batch.iter().map(SentenceFeatures::len).sum();
    if batch.is_empty() || tokens == 0 {
        return invalid("loss needs a non-empty batch");
    }
    let norm = tokens as f64;
    let mut grads = params.zeros_like();
    let mut loss = 0.0;
    for feats in batch {
        loss += sentence_loss(params, feats, norm, &mut grads, dropout.as_deref_mut());
    }
    if !loss.is_finite() {
        return Err(Error::Divergence(format!("non-finite loss {loss}")));
    }
    Ok((loss, grads))
}

pub fn loss_and_gradients(
    batch: &[DepSentence],
    params: &ParserParams,
    vocab: &Vocabulary,
    table: Option<&EmbeddingTable>,
) -> Result<(f64, ParserParams)> {
    let feats: Vec<_> = batch.iter().map(|s| featurize(s, vocab, table)).collect();
    batch_loss(params, &feats, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::build_vocab;
    use crate::parser::params::{Hyperparams, Inventory};
    use crate::treebank::DepToken;
    use rand::SeedableRng;

    fn toy_hp() -> Hyperparams {
        Hyperparams {
            word_dim: 3,
            char_dim: 2,
            char_filters: 2,
            pos_dim: 2,
            hidden: 3,
            arc_dim: 3,
            label_dim: 2,
            min_frequency: 1,
            ..Default::default()
        }
    }

    fn sentence(words: &[(&str, &str, usize, &str)]) -> DepSentence {
        DepSentence {
            tokens: words
                .iter()
                .enumerate()
                .map(|(i, &(f, p, h, r))| DepToken::new(i + 1, f, p, h, r))
                .collect(),
            sent_id: None,
            language: "tst".into(),
        }
    }

    fn three_tokens() -> DepSentence {
        sentence(&[
            ("the", "DET", 2, "det"),
            ("dog", "NOUN", 3, "nsubj"),
            ("runs", "VERB", 0, "root"),
        ])
    }

    fn noisy_params(hp: &Hyperparams, inv: &Inventory, seed: u64) -> ParserParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParserParams::init(hp, inv, &mut rng);
        for t in p.tensors_mut() {
            t.mapv_inplace(|v| v + rng.gen_range(-0.3..0.3));
        }
        p
    }

    fn setup() -> (ParserParams, SentenceFeatures) {
        let s = three_tokens();
        let vocab = build_vocab(&[s.clone()], 1);
        let mut table = EmbeddingTable::new(2).unwrap();
        table.insert("dog", vec![0.4, -0.7]).unwrap();
        table.insert("runs", vec![-0.2, 0.9]).unwrap();
        let feats = featurize(&s, &vocab, Some(&table));
        assert!(feats.statics[0].is_none());
        let inv = crate::parser::inventory(&vocab, Some(&table));
        (noisy_params(&toy_hp(), &inv, 11), feats)
    }

    fn loss_at(params: &ParserParams, feats: &SentenceFeatures) -> f64 {
        batch_loss(params, std::slice::from_ref(feats), None).unwrap().0
    }

    #[test]
    fn gradients_match_central_differences() {
        let (params, feats) = setup();
        let (_, grads) = batch_loss(&params, std::slice::from_ref(&feats), None).unwrap();
        let names = params.names();
        let analytic: Vec<Array2<f64>> = grads.named().into_iter().map(|(_, t)| t.clone()).collect();
        for (k, name) in names.iter().enumerate() {
            let shape = analytic[k].dim();
            for r in 0..shape.0 {
                for c in 0..shape.1 {
                    let mut plus = params.clone();
                    let mut minus = params.clone();
                    let x = params.named()[k].1[[r, c]];
                    let eps = 1e-4 * x.abs().max(1.0);
                    plus.tensors_mut()[k][[r, c]] += eps;
                    minus.tensors_mut()[k][[r, c]] -= eps;
                    let numeric = (loss_at(&plus, &feats) - loss_at(&minus, &feats)) / (2.0 * eps);
                    let a = analytic[k][[r, c]];
                    let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-7);
                    assert!(err < 1e-4, "{name}[{r},{c}]: analytic {a} numeric {numeric}");
                }
            }
        }
    }

    #[test]
    fn zero_scores_give_uniform_loss() {
        let (mut params, feats) = setup();
        for t in [
            &mut params.arc_u,
            &mut params.arc_head_bias,
            &mut params.arc_bias,
            &mut params.label_u,
            &mut params.label_head_lin,
            &mut params.label_dep_lin,
            &mut params.label_bias,
        ] {
            t.fill(0.0);
        }
        let labels = params.label_bias.ncols() as f64;
        let expected = (4.0f64).ln() + labels.ln();
        assert!((loss_at(&params, &feats) - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_recurrence_is_input_projection() {
        let s = sentence(&[("a", "X", 0, "root"), ("b", "Y", 1, "dep")]);
        let vocab = build_vocab(&[s.clone()], 1);
        let hp = toy_hp();
        let inv = crate::parser::inventory(&vocab, None);
        let mut params = noisy_params(&hp, &inv, 5);
        for layer in &mut params.lstm {
            layer.forward.w_hidden.fill(0.0);
            layer.backward.w_hidden.fill(0.0);
        }
        let feats = featurize(&s, &vocab, None);
        let contexts = encode_features(&params, &feats);
        let h = hp.hidden;
        let mut inputs = Vec::new();
        for t in 0..2 {
            let (feature, _) = char_forward(&params, &feats.char_ids[t]);
            let x: Vec<f64> = params
                .word_emb
                .row(feats.word_ids[t])
                .iter()
                .chain(feature.iter())
                .chain(params.pos_emb.row(feats.pos_ids[t]).iter())
                .copied()
                .collect();
            inputs.push(x);
        }
        // Without recurrent weights the gates depend on the input alone; only
        // the cell state carries over (token 1 -> 2 forward, 2 -> 1 backward).
        for (half, dir) in [&params.lstm[0].forward, &params.lstm[0].backward].into_iter().enumerate() {
            for j in 0..h {
                let z = |t: usize, g: usize| {
                    dir.bias[[0, g * h + j]]
                        + inputs[t].iter().enumerate().map(|(k, v)| v * dir.w_input[[k, g * h + j]]).sum::<f64>()
                };
                let (first, second) = if half == 0 { (0, 1) } else { (1, 0) };
                let c_first = sigmoid(z(first, 0)) * z(first, 3).tanh();
                let c_second = sigmoid(z(second, 1)) * c_first + sigmoid(z(second, 0)) * z(second, 3).tanh();
                for (t, c) in [(first, c_first), (second, c_second)] {
                    let expected = sigmoid(z(t, 2)) * c.tanh();
                    assert!((contexts[[t + 1, half * h + j]] - expected).abs() < 1e-12);
                }
            }
        }
        assert_eq!(contexts.row(0), params.root.row(0));
    }

    #[test]
    fn one_token_and_order_sensitivity() {
        let (params, feats) = setup();
        let single = SentenceFeatures {
            word_ids: vec![feats.word_ids[0]],
            char_ids: vec![feats.char_ids[0].clone()],
            pos_ids: vec![feats.pos_ids[0]],
            statics: vec![None],
            heads: vec![0],
            labels: vec![Some(0)],
        };
        assert_eq!(encode_features(&params, &single).dim(), (2, 2 * params.hidden()));

        let mut reversed = feats.clone();
        reversed.word_ids.reverse();
        reversed.char_ids.reverse();
        reversed.pos_ids.reverse();
        reversed.statics.reverse();
        let a = encode_features(&params, &feats);
        let b = encode_features(&params, &reversed);
        // token 1 of the original is token 3 of the reversal
        let diff = (&a.row(1) - &b.row(3)).mapv(f64::abs).sum();
        assert!(diff > 1e-6);
    }

    #[test]
    fn biaffine_toy_values() {
        let s = biaffine_arc_scores(
            &Array2::from_elem((1, 1), 2.0),
            &Array2::from_elem((1, 1), 3.0),
            &Array2::from_elem((1, 1), 1.0),
            &Array2::zeros((1, 1)),
            0.0,
        );
        assert_eq!(s[[0, 0]], 6.0);

        let (mut params, feats) = setup();
        params.arc_u.fill(0.0);
        params.arc_head_bias.fill(0.0);
        params.arc_bias.fill(0.0);
        let scores = score_arcs(&encode_features(&params, &feats), &params).unwrap();
        assert_eq!(scores.matrix().dim(), (4, 3));
        assert!(scores.matrix().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn label_scores() {
        let (mut params, feats) = setup();
        let contexts = encode_features(&params, &feats);
        let heads = [2, 3, 0];
        let r = params.label_bias.ncols();
        assert_eq!(r, 3);

        let perm = [2, 0, 1];
        let dl = params.label_head_lin.ncols();
        let mut permuted = params.clone();
        for (new, &old) in perm.iter().enumerate() {
            permuted
                .label_u
                .slice_mut(s![new * dl..(new + 1) * dl, ..])
                .assign(&params.label_u.slice(s![old * dl..(old + 1) * dl, ..]));
            permuted.label_head_lin.row_mut(new).assign(&params.label_head_lin.row(old));
            permuted.label_dep_lin.row_mut(new).assign(&params.label_dep_lin.row(old));
            permuted.label_bias[[0, new]] = params.label_bias[[0, old]];
        }
        let base = score_labels(&contexts, &params, &heads).unwrap();
        let moved = score_labels(&contexts, &permuted, &heads).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            assert_eq!(moved.column(new), base.column(old));
        }

        for t in [
            &mut params.label_u,
            &mut params.label_head_lin,
            &mut params.label_dep_lin,
            &mut params.label_bias,
        ] {
            t.fill(0.0);
        }
        let zero = score_labels(&contexts, &params, &heads).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        assert_eq!(crate::decoder::assign_labels(&zero, &heads).unwrap(), vec![0, 0, 0]);

        params.label_bias[[0, 1]] = 5.0;
        let biased = score_labels(&contexts, &params, &heads).unwrap();
        assert_eq!(crate::decoder::assign_labels(&biased, &heads).unwrap(), vec![1, 1, 1]);

        assert!(score_labels(&contexts, &params, &[2, 9, 0]).is_err());
        assert!(score_labels(&contexts, &params, &[2, 0]).is_err());
    }

    #[test]
    fn descent_lowers_loss() {
        let (mut params, feats) = setup();
        let batch = [feats];
        let initial = batch_loss(&params, &batch, None).unwrap().0;
        let mut last = initial;
        for _ in 0..100 {
            let (loss, grads) = batch_loss(&params, &batch, None).unwrap();
            last = loss;
            params.add_scaled(&grads, -0.1);
        }
        assert!(last < initial);
        assert!(last >= 0.0);
        assert!(batch_loss(&params, &batch, None).unwrap().0 < 0.5 * initial);
    }

    #[test]
    fn divergence_and_empty_batch() {
        let (mut params, feats) = setup();
        assert!(batch_loss(&params, &[], None).is_err());
        params.arc_bias[[0, 0]] = f64::NAN;
        let err = batch_loss(&params, &[feats], None).unwrap_err();
        assert_eq!(err.kind(), "divergence");
    }

    #[test]
    fn dropout_changes_forward_but_not_eval() {
        let (params, feats) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut d = Dropout {
            rng: &mut rng,
            input: 0.5,
            hidden: 0.5,
        };
        let mut g = params.zeros_like();
        let with = sentence_loss(&params, &feats, 1.0, &mut g, Some(&mut d));
        let without = loss_at(&params, &feats);
        assert!((with - without).abs() > 1e-9);
    }
}
