//! Shared fixtures plus straight-line, value-level reimplementations of the
//! model's attention formulas. The oracles here deliberately share no code
//! with the library: plain index loops over tensor buffers, so a bug in the
//! tape machinery cannot hide behind itself.

use endgen_core::corpus::Story;
use endgen_core::model::{KnowledgeKind, ModelConfig, ModelParams, Variant};
use endgen_core::nn::{BiGruParams, GruParams};
use endgen_core::tensor::Tensor;
use rand::Rng;

/// One pass line per acceptance criterion.
pub fn pass(n: usize, what: &str) {
    println!("[PASS] criterion {n}: {what}");
}

// ── Value-level linear algebra ───────────────────────────────────────────────

/// Row `i` of a `[rows, cols]` tensor.
pub fn row(t: &Tensor, i: usize) -> Vec<f64> {
    let cols = t.shape[1];
    t.values[i * cols..(i + 1) * cols].to_vec()
}

/// `W·x` for a row-major `[rows, cols]` matrix.
pub fn mat_vec(w: &Tensor, x: &[f64]) -> Vec<f64> {
    let (rows, cols) = (w.shape[0], w.shape[1]);
    assert_eq!(cols, x.len(), "mat_vec width mismatch");
    (0..rows)
        .map(|i| (0..cols).map(|j| w.values[i * cols + j] * x[j]).sum())
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn vec_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn tanh_vec(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|x| x.tanh()).collect()
}

pub fn sigmoid_vec(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|x| 1.0 / (1.0 + (-x).exp())).collect()
}

/// Plain softmax without the max-shift trick — an intentionally different
/// formulation from the library's.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let exps: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}

/// Bilinear attention: score each key by `qᵀ·W·k`, softmax the scores, and
/// return `(weighted key sum, weights)`.
pub fn bilinear_attn_oracle(
    query: &[f64],
    keys: &[Vec<f64>],
    w: &Tensor,
) -> (Vec<f64>, Vec<f64>) {
    let scores: Vec<f64> = keys.iter().map(|k| dot(query, &mat_vec(w, k))).collect();
    let alpha = softmax(&scores);
    let dim = keys[0].len();
    let mut context = vec![0.0; dim];
    for (a, k) in alpha.iter().zip(keys) {
        for (c, x) in context.iter_mut().zip(k) {
            *c += a * x;
        }
    }
    (context, alpha)
}

/// Fused context: `W·[c_h; c_x] + b` (knowledge half optional).
pub fn msa_oracle(c_h: &[f64], c_x: Option<&[f64]>, w: &Tensor, b: &Tensor) -> Vec<f64> {
    let mut joined = c_h.to_vec();
    if let Some(cx) = c_x {
        joined.extend_from_slice(cx);
    }
    vec_add(&mat_vec(w, &joined), &b.values)
}

// ── Graph-vector oracles ────────────────────────────────────────────────────

/// Graph-attention vector over `(head, relation, tail)` id triples:
/// `β_i = (Wr·r_i)ᵀ tanh(Wh·h_i + Wt·t_i)`, softmax, weighted sum of the
/// `[head; tail]` embedding concatenations.
pub fn graph_ga_oracle(
    params: &ModelParams,
    triples: &[(usize, usize, usize)],
    query: usize,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let k = params.knowledge.as_ref().expect("knowledge params");
    let KnowledgeKind::GraphAttention { rel_proj, head_proj, tail_proj } = &k.kind else {
        panic!("GA oracle on non-GA params");
    };
    if triples.is_empty() {
        let e = row(&params.embedding, query);
        let mut v = e.clone();
        v.extend_from_slice(&e);
        return (v, None);
    }
    let mut scores = Vec::new();
    let mut cands = Vec::new();
    for &(h, r, t) in triples {
        let eh = row(&params.embedding, h);
        let et = row(&params.embedding, t);
        let er = row(&k.relation_embedding, r);
        let lhs = mat_vec(rel_proj, &er);
        let act = tanh_vec(&vec_add(&mat_vec(head_proj, &eh), &mat_vec(tail_proj, &et)));
        scores.push(dot(&lhs, &act));
        let mut cand = eh;
        cand.extend_from_slice(&et);
        cands.push(cand);
    }
    let alpha = softmax(&scores);
    let mut v = vec![0.0; cands[0].len()];
    for (a, c) in alpha.iter().zip(&cands) {
        for (vi, ci) in v.iter_mut().zip(c) {
            *vi += a * ci;
        }
    }
    (v, Some(alpha))
}

/// One GRU step, textbook form.
pub fn gru_oracle(p: &GruParams, h: &[f64], x: &[f64]) -> Vec<f64> {
    let mut z = x.to_vec();
    z.extend_from_slice(h);
    let r = sigmoid_vec(&vec_add(&mat_vec(&p.reset.w, &z), &p.reset.b.values));
    let u = sigmoid_vec(&vec_add(&mat_vec(&p.update.w, &z), &p.update.b.values));
    let mut zn = x.to_vec();
    zn.extend(r.iter().zip(h).map(|(ri, hi)| ri * hi));
    let n = tanh_vec(&vec_add(&mat_vec(&p.cand.w, &zn), &p.cand.b.values));
    u.iter()
        .zip(&n)
        .zip(h)
        .map(|((ui, ni), hi)| (1.0 - ui) * ni + ui * hi)
        .collect()
}

/// Final states of both GRU directions, concatenated `[fwd; bwd]`.
pub fn bigru_oracle(p: &BiGruParams, seq: &[Vec<f64>]) -> Vec<f64> {
    let mut hf = vec![0.0; p.fwd.hidden_dim];
    for x in seq {
        hf = gru_oracle(&p.fwd, &hf, x);
    }
    let mut hb = vec![0.0; p.bwd.hidden_dim];
    for x in seq.iter().rev() {
        hb = gru_oracle(&p.bwd, &hb, x);
    }
    hf.extend_from_slice(&hb);
    hf
}

/// Contextual-attention vector: BiGRU memory per triple, bilinear-scored
/// against the query-position hidden state.
pub fn graph_ca_oracle(
    params: &ModelParams,
    triples: &[(usize, usize, usize)],
    query: usize,
    query_hidden: &[f64],
) -> (Vec<f64>, Option<Vec<f64>>) {
    let k = params.knowledge.as_ref().expect("knowledge params");
    let KnowledgeKind::ContextualAttention { gru, memory_attn } = &k.kind else {
        panic!("CA oracle on non-CA params");
    };
    let width = 2 * params.config.gru_hidden;
    if triples.is_empty() {
        let mut v = row(&params.embedding, query);
        v.resize(width, 0.0);
        return (v, None);
    }
    let memories: Vec<Vec<f64>> = triples
        .iter()
        .map(|&(h, r, t)| {
            let seq = vec![
                row(&params.embedding, h),
                row(&k.relation_embedding, r),
                row(&params.embedding, t),
            ];
            bigru_oracle(gru, &seq)
        })
        .collect();
    let (context, alpha) = bilinear_attn_oracle(query_hidden, &memories, memory_attn);
    (context, Some(alpha))
}

// ── Fixtures ────────────────────────────────────────────────────────────────

/// Overwrite every parameter tensor with fresh uniform values — larger than
/// the initialization range, to exercise the formulas away from zero.
pub fn randomize_params(params: &mut ModelParams, range: f64, rng: &mut impl Rng) {
    for (_, t) in params.named_mut() {
        for v in &mut t.values {
            *v = rng.gen_range(-range..=range);
        }
    }
}

pub fn random_story(rng: &mut impl Rng, vocab: usize, max_len: usize, id: usize) -> Story {
    let mut sent = || -> Vec<usize> {
        let len = rng.gen_range(1..=max_len);
        (0..len).map(|_| rng.gen_range(4..vocab)).collect()
    };
    Story {
        id: format!("story{id:05}"),
        sentences: [sent(), sent(), sent(), sent()],
        ending: sent(),
        raw: std::array::from_fn(|_| String::new()),
    }
}

/// A small config with every width distinct, to surface transposition bugs.
pub fn oracle_config(variant: Variant) -> ModelConfig {
    ModelConfig {
        variant,
        num_layers: 2,
        hidden_dim: 7,
        word_dim: 5,
        context_dim: 4,
        vocab_size: 30,
        num_relations: 6,
        relation_dim: if variant == Variant::IeCa { 5 } else { 3 },
        gru_hidden: 3,
    }
}

/// Synthetic memorization corpus: each story carries a unique key token
/// through all four sentences, and its ending is a deterministic function
/// of that key.
pub fn overfit_corpus(n: usize) -> (Vec<Story>, usize) {
    let first_key = 4;
    let filler = first_key + n; // six filler words follow the keys
    let end_marker_word = filler + 6;
    let vocab_size = end_marker_word + 1;
    let stories = (0..n)
        .map(|i| {
            let k = first_key + i;
            Story {
                id: format!("synthetic{i:04}"),
                sentences: [
                    vec![k, filler, filler + 1],
                    vec![k, filler + 2],
                    vec![filler + 3, k],
                    vec![k, filler + 4],
                ],
                ending: vec![k, end_marker_word, k],
                raw: std::array::from_fn(|_| String::new()),
            }
        })
        .collect();
    (stories, vocab_size)
}
