//! The story-ending generator.
//!
//! Four context sentences are encoded incrementally by a shared LSTM stack:
//! sentence 1 plainly, sentences 2..4 with a per-token context vector built
//! by multi-source attention — a state context (attention over the preceding
//! sentence's hidden states) and, in the knowledge-augmented variants, a
//! knowledge context (attention over the preceding sentence's per-word graph
//! vectors), fused by one affine map. The decoder reuses the same LSTM stack
//! and attends to the fourth sentence. Training minimizes the sum of decoder
//! NLL and an encoder-side next-token NLL over sentences 2..4.
//!
//! Everything here runs on a [`Tape`]; inference entry points spin a private
//! tape per call and hand back plain values.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::{Story, BOS, EOS};
use crate::knowledge::{ConceptGraph, TripleStore};
use crate::nn::{
    self, bigru_final, lstm_step_ctx, BiGruParams, BiGruVars, LstmStackParams, LstmStackVars,
    LstmState,
};
use crate::rng::stream;
use crate::tensor::{ShapeError, Tape, Tensor, Var};

// ── Errors ──────────────────────────────────────────────────────────────────

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("attention: no unmasked positions to attend over")]
    AllMasked,
    #[error("model config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: not a checkpoint (bad magic)")]
    BadMagic { path: PathBuf },
    #[error("{path}: checkpoint format v{found} unsupported (this build reads v{supported})")]
    BadVersion { path: PathBuf, found: u32, supported: u32 },
    #[error("{path}: malformed checkpoint: {what}")]
    Malformed { path: PathBuf, what: String },
    #[error("{path}: checkpoint/config mismatch: {what}")]
    Mismatch { path: PathBuf, what: String },
}

// ── Configuration ───────────────────────────────────────────────────────────

/// Which context vector the encoder/decoder steps receive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Incremental encoding only: state context, no knowledge path.
    Ie,
    /// State + knowledge context with graph attention over triples.
    IeGa,
    /// State + knowledge context with contextual (BiGRU-memory) attention.
    IeCa,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Ie => "ie",
            Variant::IeGa => "ie-ga",
            Variant::IeCa => "ie-ca",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "ie" => Some(Variant::Ie),
            "ie-ga" => Some(Variant::IeGa),
            "ie-ca" => Some(Variant::IeCa),
            _ => None,
        }
    }

    pub fn uses_knowledge(self) -> bool {
        !matches!(self, Variant::Ie)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub variant: Variant,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub word_dim: usize,
    pub context_dim: usize,
    pub vocab_size: usize,
    pub num_relations: usize,
    pub relation_dim: usize,
    pub gru_hidden: usize,
}

impl ModelConfig {
    /// Reference scale: 2-layer LSTM of 512 units, 200-dim word vectors,
    /// 512-wide context, 256-unit BiGRU halves.
    pub fn reference(variant: Variant, vocab_size: usize, num_relations: usize) -> ModelConfig {
        ModelConfig {
            variant,
            num_layers: 2,
            hidden_dim: 512,
            word_dim: 200,
            context_dim: 512,
            vocab_size,
            num_relations,
            relation_dim: 200,
            gru_hidden: 256,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |s: String| Err(ModelError::BadConfig(s));
        if self.num_layers == 0 {
            return bad("num_layers must be ≥ 1".into());
        }
        for (name, v) in [
            ("hidden_dim", self.hidden_dim),
            ("word_dim", self.word_dim),
            ("context_dim", self.context_dim),
            ("relation_dim", self.relation_dim),
            ("gru_hidden", self.gru_hidden),
        ] {
            if v == 0 {
                return bad(format!("{name} must be ≥ 1"));
            }
        }
        if self.vocab_size <= EOS {
            return bad("vocab_size must exceed the reserved ids".into());
        }
        if self.variant == Variant::IeCa {
            if self.relation_dim != self.word_dim {
                return bad(format!(
                    "contextual attention feeds head/relation/tail vectors through one GRU, \
                     so relation_dim ({}) must equal word_dim ({})",
                    self.relation_dim, self.word_dim
                ));
            }
            if self.word_dim > 2 * self.gru_hidden {
                return bad(format!(
                    "empty-graph fallback zero-pads a word vector to 2·gru_hidden, \
                     so word_dim ({}) must be ≤ {}",
                    self.word_dim,
                    2 * self.gru_hidden
                ));
            }
        }
        Ok(())
    }

    /// Width of a graph vector under this variant (0 when knowledge is off).
    pub fn graph_dim(&self) -> usize {
        match self.variant {
            Variant::Ie => 0,
            Variant::IeGa => 2 * self.word_dim,
            Variant::IeCa => 2 * self.gru_hidden,
        }
    }

    /// Width of the LSTM stack's per-step input: word vector + context.
    pub fn lstm_input_dim(&self) -> usize {
        self.word_dim + self.context_dim
    }

    /// Width of the context projection's input: state context plus (for
    /// knowledge variants) the knowledge context.
    pub fn context_proj_in(&self) -> usize {
        self.hidden_dim + self.graph_dim()
    }
}

// ── Parameters ──────────────────────────────────────────────────────────────

/// Knowledge-path parameters specific to one attention flavor.
#[derive(Debug, Clone, PartialEq)]
pub enum KnowledgeKind {
    GraphAttention {
        /// Projects a relation vector into the scoring space (word_dim wide).
        rel_proj: Tensor,
        head_proj: Tensor,
        tail_proj: Tensor,
    },
    ContextualAttention {
        gru: BiGruParams,
        /// Bilinear map between a query hidden state and a triple memory.
        memory_attn: Tensor,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeParams {
    /// Bilinear map for knowledge attention (hidden × graph_dim).
    pub knowledge_attn: Tensor,
    /// Trainable relation vectors (≥1 row even for an empty store, so the
    /// table stays well-formed; the spare row simply never receives grads).
    pub relation_embedding: Tensor,
    pub kind: KnowledgeKind,
}

/// Every trainable tensor in the model. The LSTM stack is one object shared
/// by encoder and decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub embedding: Tensor,
    pub lstm: LstmStackParams,
    /// Bilinear map for state attention (hidden × hidden).
    pub state_attn: Tensor,
    /// Context fusion: context_dim × (hidden + graph_dim), plus bias.
    pub context_proj: Tensor,
    pub context_bias: Tensor,
    /// Output projection to the vocabulary, shared by encoder supervision
    /// and the decoder.
    pub output_proj: Tensor,
    pub output_bias: Tensor,
    pub knowledge: Option<KnowledgeParams>,
}

impl ModelParams {
    /// Fresh parameters. Every tensor draws from its own named stream, so
    /// the result is independent of initialization order.
    pub fn init(config: ModelConfig, seed: u64) -> Result<ModelParams, ModelError> {
        config.validate()?;
        let table = nn::uniform(
            vec![config.vocab_size, config.word_dim],
            crate::corpus::EMBED_INIT_RANGE,
            &mut stream(seed, "init/embedding"),
        );
        Self::init_with_embeddings(config, seed, table)
    }

    /// Fresh parameters around a pre-built (e.g. pretrained) embedding table.
    pub fn init_with_embeddings(
        config: ModelConfig,
        seed: u64,
        embedding: Tensor,
    ) -> Result<ModelParams, ModelError> {
        config.validate()?;
        if embedding.shape != [config.vocab_size, config.word_dim] {
            return Err(ModelError::BadConfig(format!(
                "embedding table {:?} does not match vocab {} × word_dim {}",
                embedding.shape, config.vocab_size, config.word_dim
            )));
        }
        let w = |name: &str, shape: Vec<usize>| {
            nn::uniform(shape, nn::WEIGHT_INIT_RANGE, &mut stream(seed, name))
        };
        let lstm = LstmStackParams::init(
            config.num_layers,
            config.lstm_input_dim(),
            config.hidden_dim,
            &mut stream(seed, "init/lstm"),
        );
        let knowledge = match config.variant {
            Variant::Ie => None,
            Variant::IeGa => Some(KnowledgeParams {
                knowledge_attn: w("init/knowledge_attn", vec![config.hidden_dim, config.graph_dim()]),
                relation_embedding: nn::uniform(
                    vec![config.num_relations.max(1), config.relation_dim],
                    crate::corpus::EMBED_INIT_RANGE,
                    &mut stream(seed, "init/relation_embedding"),
                ),
                kind: KnowledgeKind::GraphAttention {
                    rel_proj: w("init/graph.rel_proj", vec![config.word_dim, config.relation_dim]),
                    head_proj: w("init/graph.head_proj", vec![config.word_dim, config.word_dim]),
                    tail_proj: w("init/graph.tail_proj", vec![config.word_dim, config.word_dim]),
                },
            }),
            Variant::IeCa => Some(KnowledgeParams {
                knowledge_attn: w("init/knowledge_attn", vec![config.hidden_dim, config.graph_dim()]),
                relation_embedding: nn::uniform(
                    vec![config.num_relations.max(1), config.relation_dim],
                    crate::corpus::EMBED_INIT_RANGE,
                    &mut stream(seed, "init/relation_embedding"),
                ),
                kind: KnowledgeKind::ContextualAttention {
                    gru: BiGruParams::init(
                        config.word_dim,
                        config.gru_hidden,
                        &mut stream(seed, "init/ctx.gru"),
                    ),
                    memory_attn: w("init/ctx.memory_attn", vec![config.hidden_dim, 2 * config.gru_hidden]),
                },
            }),
        };
        Ok(ModelParams {
            embedding,
            lstm,
            state_attn: w("init/state_attn", vec![config.hidden_dim, config.hidden_dim]),
            context_proj: w("init/context_proj", vec![config.context_dim, config.context_proj_in()]),
            context_bias: Tensor::zeros(vec![config.context_dim, 1]),
            output_proj: w("init/output_proj", vec![config.vocab_size, config.hidden_dim]),
            output_bias: Tensor::zeros(vec![config.vocab_size, 1]),
            knowledge,
            config,
        })
    }

    /// Stable (name, tensor) listing; the order defines checkpoint layout
    /// and optimizer slot alignment.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = vec![("embedding".into(), &self.embedding)];
        for (l, layer) in self.lstm.layers.iter().enumerate() {
            for (gate, p) in layer.gates() {
                out.push((format!("lstm.{l}.{gate}.w"), &p.w));
                out.push((format!("lstm.{l}.{gate}.b"), &p.b));
            }
        }
        out.push(("state_attn".into(), &self.state_attn));
        out.push(("context_proj".into(), &self.context_proj));
        out.push(("context_bias".into(), &self.context_bias));
        out.push(("output_proj".into(), &self.output_proj));
        out.push(("output_bias".into(), &self.output_bias));
        if let Some(k) = &self.knowledge {
            out.push(("knowledge_attn".into(), &k.knowledge_attn));
            out.push(("relation_embedding".into(), &k.relation_embedding));
            match &k.kind {
                KnowledgeKind::GraphAttention { rel_proj, head_proj, tail_proj } => {
                    out.push(("graph.rel_proj".into(), rel_proj));
                    out.push(("graph.head_proj".into(), head_proj));
                    out.push(("graph.tail_proj".into(), tail_proj));
                }
                KnowledgeKind::ContextualAttention { gru, memory_attn } => {
                    for (dir, half) in [("fwd", &gru.fwd), ("bwd", &gru.bwd)] {
                        for (gate, p) in half.gates() {
                            out.push((format!("ctx.gru.{dir}.{gate}.w"), &p.w));
                            out.push((format!("ctx.gru.{dir}.{gate}.b"), &p.b));
                        }
                    }
                    out.push(("ctx.memory_attn".into(), memory_attn));
                }
            }
        }
        out
    }

    /// Mutable counterpart of [`named`](Self::named); identical order.
    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = vec![("embedding".into(), &mut self.embedding)];
        for (l, layer) in self.lstm.layers.iter_mut().enumerate() {
            for (gate, p) in layer.gates_mut() {
                out.push((format!("lstm.{l}.{gate}.w"), &mut p.w));
                out.push((format!("lstm.{l}.{gate}.b"), &mut p.b));
            }
        }
        out.push(("state_attn".into(), &mut self.state_attn));
        out.push(("context_proj".into(), &mut self.context_proj));
        out.push(("context_bias".into(), &mut self.context_bias));
        out.push(("output_proj".into(), &mut self.output_proj));
        out.push(("output_bias".into(), &mut self.output_bias));
        if let Some(k) = &mut self.knowledge {
            out.push(("knowledge_attn".into(), &mut k.knowledge_attn));
            out.push(("relation_embedding".into(), &mut k.relation_embedding));
            match &mut k.kind {
                KnowledgeKind::GraphAttention { rel_proj, head_proj, tail_proj } => {
                    out.push(("graph.rel_proj".into(), rel_proj));
                    out.push(("graph.head_proj".into(), head_proj));
                    out.push(("graph.tail_proj".into(), tail_proj));
                }
                KnowledgeKind::ContextualAttention { gru, memory_attn } => {
                    for (dir, half) in [("fwd", &mut gru.fwd), ("bwd", &mut gru.bwd)] {
                        for (gate, p) in half.gates_mut() {
                            out.push((format!("ctx.gru.{dir}.{gate}.w"), &mut p.w));
                            out.push((format!("ctx.gru.{dir}.{gate}.b"), &mut p.b));
                        }
                    }
                    out.push(("ctx.memory_attn".into(), memory_attn));
                }
            }
        }
        out
    }

    /// Register every parameter on a tape for one forward/backward pass.
    pub fn register(&self, tape: &mut Tape) -> ModelVars {
        let knowledge = self.knowledge.as_ref().map(|k| KnowledgeVars {
            knowledge_attn: tape.leaf(&k.knowledge_attn),
            relation_embedding: tape.leaf(&k.relation_embedding),
            kind: match &k.kind {
                KnowledgeKind::GraphAttention { rel_proj, head_proj, tail_proj } => {
                    KnowledgeKindVars::GraphAttention {
                        rel_proj: tape.leaf(rel_proj),
                        head_proj: tape.leaf(head_proj),
                        tail_proj: tape.leaf(tail_proj),
                    }
                }
                KnowledgeKind::ContextualAttention { gru, memory_attn } => {
                    KnowledgeKindVars::ContextualAttention {
                        gru: gru.register(tape),
                        memory_attn: tape.leaf(memory_attn),
                    }
                }
            },
        });
        ModelVars {
            config: self.config.clone(),
            embedding: tape.leaf(&self.embedding),
            lstm: self.lstm.register(tape),
            state_attn: tape.leaf(&self.state_attn),
            context_proj: tape.leaf(&self.context_proj),
            context_bias: tape.leaf(&self.context_bias),
            output_proj: tape.leaf(&self.output_proj),
            output_bias: tape.leaf(&self.output_bias),
            knowledge,
        }
    }

    /// Row of the embedding table as plain values (inference-side lookup).
    pub fn embedding_row(&self, id: usize) -> &[f64] {
        self.embedding.row(id)
    }

    /// Eq-21/Eq-3 style output distribution from a hidden-state value vector.
    pub fn token_distribution_values(&self, h: &[f64]) -> Vec<f64> {
        let mut logits = matvec(
            &self.output_proj.values,
            self.config.vocab_size,
            self.config.hidden_dim,
            h,
        );
        for (l, b) in logits.iter_mut().zip(&self.output_bias.values) {
            *l += b;
        }
        softmax_values(&logits)
    }
}

/// On-tape handles mirroring [`ModelParams`].
pub struct ModelVars {
    pub config: ModelConfig,
    pub embedding: Var,
    pub lstm: LstmStackVars,
    pub state_attn: Var,
    pub context_proj: Var,
    pub context_bias: Var,
    pub output_proj: Var,
    pub output_bias: Var,
    pub knowledge: Option<KnowledgeVars>,
}

pub struct KnowledgeVars {
    pub knowledge_attn: Var,
    pub relation_embedding: Var,
    pub kind: KnowledgeKindVars,
}

pub enum KnowledgeKindVars {
    GraphAttention { rel_proj: Var, head_proj: Var, tail_proj: Var },
    ContextualAttention { gru: BiGruVars, memory_attn: Var },
}

impl ModelVars {
    /// (name, var) listing in exactly [`ModelParams::named`]'s order.
    pub fn named(&self) -> Vec<(String, Var)> {
        let mut out: Vec<(String, Var)> = vec![("embedding".into(), self.embedding)];
        for (l, layer) in self.lstm.layers.iter().enumerate() {
            for (gi, gate) in ["input", "forget", "cell", "output"].iter().enumerate() {
                out.push((format!("lstm.{l}.{gate}.w"), layer.gates[gi].0));
                out.push((format!("lstm.{l}.{gate}.b"), layer.gates[gi].1));
            }
        }
        out.push(("state_attn".into(), self.state_attn));
        out.push(("context_proj".into(), self.context_proj));
        out.push(("context_bias".into(), self.context_bias));
        out.push(("output_proj".into(), self.output_proj));
        out.push(("output_bias".into(), self.output_bias));
        if let Some(k) = &self.knowledge {
            out.push(("knowledge_attn".into(), k.knowledge_attn));
            out.push(("relation_embedding".into(), k.relation_embedding));
            match &k.kind {
                KnowledgeKindVars::GraphAttention { rel_proj, head_proj, tail_proj } => {
                    out.push(("graph.rel_proj".into(), *rel_proj));
                    out.push(("graph.head_proj".into(), *head_proj));
                    out.push(("graph.tail_proj".into(), *tail_proj));
                }
                KnowledgeKindVars::ContextualAttention { gru, memory_attn } => {
                    for (dir, half) in [("fwd", &gru.fwd), ("bwd", &gru.bwd)] {
                        for (gi, gate) in ["reset", "update", "cand"].iter().enumerate() {
                            out.push((format!("ctx.gru.{dir}.{gate}.w"), half.gates[gi].0));
                            out.push((format!("ctx.gru.{dir}.{gate}.b"), half.gates[gi].1));
                        }
                    }
                    out.push(("ctx.memory_attn".into(), *memory_attn));
                }
            }
        }
        out
    }
}

// ── Attention primitives ────────────────────────────────────────────────────

/// Result of one attention application: the context vector, the weights over
/// the unmasked positions, and which positions those were.
pub struct AttentionOut {
    pub context: Var,
    /// `[n_valid, 1]` softmax weights, aligned with `valid`.
    pub weights: Var,
    pub valid: Vec<usize>,
}

/// Bilinear attention `β_k = queryᵀ · W · key_k` over the unmasked keys,
/// softmax to weights, context = weighted sum of keys.
fn bilinear_attention(
    tape: &mut Tape,
    query: Var,
    keys: &[Var],
    w: Var,
    mask: &[bool],
) -> Result<AttentionOut, ModelError> {
    debug_assert_eq!(keys.len(), mask.len());
    let valid: Vec<usize> = (0..keys.len()).filter(|&k| mask[k]).collect();
    if valid.is_empty() {
        return Err(ModelError::AllMasked);
    }
    let qt = tape.transpose(query)?;
    let qw = tape.matmul(qt, w)?;
    let betas: Vec<Var> = valid
        .iter()
        .map(|&k| tape.matmul(qw, keys[k]))
        .collect::<Result<_, _>>()?;
    let beta_col = tape.concat(&betas, 0)?;
    let weights = tape.softmax(beta_col)?;
    let key_mat = tape.concat(&valid.iter().map(|&k| keys[k]).collect::<Vec<_>>(), 1)?;
    let context = tape.matmul(key_mat, weights)?;
    Ok(AttentionOut { context, weights, valid })
}

/// State context: attention over the preceding sentence's hidden states.
pub fn state_context(
    tape: &mut Tape,
    query: Var,
    prev_hiddens: &[Var],
    state_attn: Var,
    mask: &[bool],
) -> Result<AttentionOut, ModelError> {
    bilinear_attention(tape, query, prev_hiddens, state_attn, mask)
}

/// Knowledge context: attention over the preceding sentence's graph vectors.
pub fn knowledge_context(
    tape: &mut Tape,
    query: Var,
    prev_graph_vectors: &[Var],
    knowledge_attn: Var,
    mask: &[bool],
) -> Result<AttentionOut, ModelError> {
    bilinear_attention(tape, query, prev_graph_vectors, knowledge_attn, mask)
}

/// Fuse state and (optionally) knowledge context: `c_l = W_l·[c_h; c_x] + b_l`
/// (knowledge half absent in the ablated variant).
pub fn msa_context(
    tape: &mut Tape,
    c_h: Var,
    c_x: Option<Var>,
    context_proj: Var,
    context_bias: Var,
) -> Result<Var, ShapeError> {
    let joined = match c_x {
        Some(cx) => tape.concat(&[c_h, cx], 0)?,
        None => c_h,
    };
    nn::linear(tape, context_proj, context_bias, joined)
}

// ── Graph vectors ───────────────────────────────────────────────────────────

/// One word's graph vector plus, when the graph had triples, the attention
/// weights over them (fallback vectors attend over nothing).
pub struct GraphVectorOut {
    pub vector: Var,
    pub triple_weights: Option<Var>,
}

impl ModelVars {
    fn knowledge(&self) -> &KnowledgeVars {
        self.knowledge.as_ref().expect("knowledge path requested on variant ie")
    }

    /// Graph-attention vector: score each triple by
    /// `β_i = (Wr·r_i)ᵀ tanh(Wh·h_i + Wt·t_i)`, softmax, and sum the
    /// `[head; tail]` concatenations. Empty graph → `[e(x); e(x)]`.
    pub fn graph_vector_ga(
        &self,
        tape: &mut Tape,
        graph: &ConceptGraph,
    ) -> Result<GraphVectorOut, ModelError> {
        let k = self.knowledge();
        let KnowledgeKindVars::GraphAttention { rel_proj, head_proj, tail_proj } = k.kind else {
            panic!("graph_vector_ga called on a non-GA variant");
        };
        if graph.is_empty() {
            let e = tape.row(self.embedding, graph.query)?;
            let vector = tape.concat(&[e, e], 0)?;
            return Ok(GraphVectorOut { vector, triple_weights: None });
        }
        let mut betas = Vec::with_capacity(graph.triples.len());
        let mut cands = Vec::with_capacity(graph.triples.len());
        for t in &graph.triples {
            let h = tape.row(self.embedding, t.head)?;
            let tl = tape.row(self.embedding, t.tail)?;
            let r = tape.row(k.relation_embedding, t.relation)?;
            let wr_r = tape.matmul(rel_proj, r)?;
            let wh_h = tape.matmul(head_proj, h)?;
            let wt_t = tape.matmul(tail_proj, tl)?;
            let pre = tape.add(wh_h, wt_t)?;
            let act = tape.tanh(pre);
            let wr_rt = tape.transpose(wr_r)?;
            betas.push(tape.matmul(wr_rt, act)?);
            cands.push(tape.concat(&[h, tl], 0)?);
        }
        let beta_col = tape.concat(&betas, 0)?;
        let alpha = tape.softmax(beta_col)?;
        let cand_mat = tape.concat(&cands, 1)?;
        let vector = tape.matmul(cand_mat, alpha)?;
        Ok(GraphVectorOut { vector, triple_weights: Some(alpha) })
    }

    /// Contextual-attention vector: each triple becomes a BiGRU memory over
    /// `(head, relation, tail)` vectors, scored against the hidden state at
    /// the query word's position. Empty graph → `e(x)` zero-padded.
    pub fn graph_vector_ca(
        &self,
        tape: &mut Tape,
        graph: &ConceptGraph,
        query_hidden: Var,
    ) -> Result<GraphVectorOut, ModelError> {
        let k = self.knowledge();
        let KnowledgeKindVars::ContextualAttention { ref gru, memory_attn } = k.kind else {
            panic!("graph_vector_ca called on a non-CA variant");
        };
        let width = 2 * self.config.gru_hidden;
        if graph.is_empty() {
            let e = tape.row(self.embedding, graph.query)?;
            let padding = width - self.config.word_dim;
            let vector = if padding == 0 {
                e
            } else {
                let zeros = tape.leaf(&Tensor::zeros(vec![padding, 1]));
                tape.concat(&[e, zeros], 0)?
            };
            return Ok(GraphVectorOut { vector, triple_weights: None });
        }
        let mut memories = Vec::with_capacity(graph.triples.len());
        for t in &graph.triples {
            let h = tape.row(self.embedding, t.head)?;
            let r = tape.row(k.relation_embedding, t.relation)?;
            let tl = tape.row(self.embedding, t.tail)?;
            memories.push(bigru_final(tape, gru, &[h, r, tl])?);
        }
        let out = bilinear_attention(
            tape,
            query_hidden,
            &memories,
            memory_attn,
            &vec![true; memories.len()],
        )?;
        Ok(GraphVectorOut { vector: out.context, triple_weights: Some(out.weights) })
    }

    /// Variant dispatch for one word's graph vector.
    fn graph_vector(
        &self,
        tape: &mut Tape,
        graph: &ConceptGraph,
        query_hidden: Var,
    ) -> Result<Option<GraphVectorOut>, ModelError> {
        match self.config.variant {
            Variant::Ie => Ok(None),
            Variant::IeGa => self.graph_vector_ga(tape, graph).map(Some),
            Variant::IeCa => self.graph_vector_ca(tape, graph, query_hidden).map(Some),
        }
    }

    /// Output distribution `softmax(W₀·h + b₀)` on the tape.
    pub fn token_distribution(&self, tape: &mut Tape, h: Var) -> Result<Var, ShapeError> {
        let logits = nn::linear(tape, self.output_proj, self.output_bias, h)?;
        tape.softmax(logits)
    }
}

// ── Story encoding ──────────────────────────────────────────────────────────

/// On-tape record of one story's encoding.
pub struct StoryEncoding {
    /// Per sentence, per position: the full stack state after consuming that
    /// token. The chain runs continuously across sentence boundaries.
    pub sentence_states: Vec<Vec<LstmState>>,
    /// Per sentence, per position: the word's graph vector (empty for ie).
    pub graph_vectors: Vec<Vec<Var>>,
    /// Per sentence, per position: attention over the word's triples
    /// (`None` for fallback vectors and for variant ie).
    pub triple_attn: Vec<Vec<Option<Var>>>,
    /// Per sentence i ≥ 2 (index i−1 here), per position: state-attention
    /// weights over sentence i−1 and the attended positions.
    pub state_attn: Vec<Vec<(Var, Vec<usize>)>>,
    /// Same layout for knowledge attention (empty for ie).
    pub knowledge_attn: Vec<Vec<(Var, Vec<usize>)>>,
    /// State after the last token of sentence 4; seeds the decoder.
    pub final_state: LstmState,
}

/// Encode all four context sentences incrementally.
///
/// Sentence 1 runs the plain stack; sentences 2..4 receive a fused context
/// vector per token, attending over sentence i−1's hidden states and graph
/// vectors keyed by the *previous* step's top hidden state. Hidden and cell
/// state carry across sentence boundaries. Graph vectors for sentence i are
/// computed right after it is encoded (contextual attention needs its hidden
/// states), so sentence i+1 and the decoder can attend over them.
pub fn encode_story(
    tape: &mut Tape,
    vars: &ModelVars,
    story: &Story,
    store: &TripleStore,
) -> Result<StoryEncoding, ModelError> {
    let cfg = &vars.config;
    let zero_ctx = tape.leaf(&Tensor::zeros(vec![cfg.context_dim, 1]));
    let mut state = LstmState::zeros(tape, cfg.num_layers, cfg.hidden_dim);

    let mut sentence_states: Vec<Vec<LstmState>> = Vec::with_capacity(4);
    let mut graph_vectors: Vec<Vec<Var>> = Vec::with_capacity(4);
    let mut triple_attn: Vec<Vec<Option<Var>>> = Vec::with_capacity(4);
    let mut state_attn = Vec::new();
    let mut knowledge_attn = Vec::new();

    for (i, sentence) in story.sentences.iter().enumerate() {
        let mut states_here = Vec::with_capacity(sentence.len());
        let mut alpha_h_here = Vec::with_capacity(sentence.len());
        let mut alpha_x_here = Vec::with_capacity(sentence.len());
        for &token in sentence {
            let e = tape.row(vars.embedding, token)?;
            let ctx = if i == 0 {
                zero_ctx
            } else {
                let query = state.top_h();
                let prev_hiddens: Vec<Var> =
                    sentence_states[i - 1].iter().map(|s| s.top_h()).collect();
                let mask = vec![true; prev_hiddens.len()];
                let att_h = state_context(tape, query, &prev_hiddens, vars.state_attn, &mask)?;
                let c_x = if cfg.variant.uses_knowledge() {
                    let att_x = knowledge_context(
                        tape,
                        query,
                        &graph_vectors[i - 1],
                        vars.knowledge().knowledge_attn,
                        &mask,
                    )?;
                    alpha_x_here.push((att_x.weights, att_x.valid));
                    Some(att_x.context)
                } else {
                    None
                };
                alpha_h_here.push((att_h.weights, att_h.valid));
                msa_context(tape, att_h.context, c_x, vars.context_proj, vars.context_bias)?
            };
            state = lstm_step_ctx(tape, &vars.lstm, &state, e, ctx)?;
            states_here.push(state.clone());
        }
        // Graph vectors for this sentence, for downstream attention.
        let mut graphs_here: Vec<Var> = Vec::new();
        let mut triples_here: Vec<Option<Var>> = Vec::new();
        if cfg.variant.uses_knowledge() {
            for (&token, st) in sentence.iter().zip(&states_here) {
                let graph = store.retrieve(token);
                let out =
                    vars.graph_vector(tape, &graph, st.top_h())?.expect("knowledge variant");
                graphs_here.push(out.vector);
                triples_here.push(out.triple_weights);
            }
        }
        sentence_states.push(states_here);
        graph_vectors.push(graphs_here);
        triple_attn.push(triples_here);
        if i > 0 {
            state_attn.push(alpha_h_here);
            knowledge_attn.push(alpha_x_here);
        }
    }

    Ok(StoryEncoding {
        final_state: state,
        sentence_states,
        graph_vectors,
        triple_attn,
        state_attn,
        knowledge_attn,
    })
}

// ── Loss ────────────────────────────────────────────────────────────────────

/// The three loss values (total = encoder + decoder) plus the decoder token
/// count (ending length + 1 for the end marker).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub encoder: f64,
    pub decoder: f64,
    pub ending_tokens: usize,
}

/// On-tape loss variables, for the trainer's backward pass.
pub struct LossVars {
    pub total: Var,
    pub encoder: Var,
    pub decoder: Var,
    pub ending_tokens: usize,
}

/// Decoder-side attention weights recorded while scoring an ending.
pub struct DecoderAttn {
    pub state: Vec<Vec<f64>>,
    pub knowledge: Vec<Vec<f64>>,
}

/// Build the full training loss on the tape.
///
/// Encoder side: next-token NLL over sentences 2..4, where the state after
/// token j−1 predicts token j and the first token of sentence i is predicted
/// from the last state of sentence i−1. Decoder side: teacher-forced NLL of
/// the ending plus the end marker, with per-step attention over sentence 4.
pub fn loss_on_tape(
    tape: &mut Tape,
    vars: &ModelVars,
    story: &Story,
    store: &TripleStore,
) -> Result<LossVars, ModelError> {
    let encoding = encode_story(tape, vars, story, store)?;

    // Encoder supervision over sentences 2..4.
    let mut phi_en = tape.scalar(0.0);
    for i in 1..4 {
        for (j, &target) in story.sentences[i].iter().enumerate() {
            let predictor = if j == 0 {
                encoding.sentence_states[i - 1]
                    .last()
                    .expect("sentences are non-empty")
                    .top_h()
            } else {
                encoding.sentence_states[i][j - 1].top_h()
            };
            let dist = vars.token_distribution(tape, predictor)?;
            let nll = tape.cross_entropy(dist, target)?;
            phi_en = tape.add(phi_en, nll)?;
        }
    }

    // Teacher-forced decoder over [ending; EOS].
    let mut phi_de = tape.scalar(0.0);
    let mut state = encoding.final_state.clone();
    let mut prev_token = BOS;
    let targets: Vec<usize> = story.ending.iter().copied().chain([EOS]).collect();
    for &target in &targets {
        let (next, dist, _, _) = decode_step_on_tape(tape, vars, &encoding, &state, prev_token)?;
        let nll = tape.cross_entropy(dist, target)?;
        phi_de = tape.add(phi_de, nll)?;
        state = next;
        prev_token = target;
    }

    let total = tape.add(phi_en, phi_de)?;
    Ok(LossVars { total, encoder: phi_en, decoder: phi_de, ending_tokens: targets.len() })
}

/// One decoder step on an existing tape: fused context over sentence 4 keyed
/// by the previous state's top hidden, one LSTM step, output distribution.
fn decode_step_on_tape(
    tape: &mut Tape,
    vars: &ModelVars,
    encoding: &StoryEncoding,
    state: &LstmState,
    y_prev: usize,
) -> Result<(LstmState, Var, AttentionOut, Option<AttentionOut>), ModelError> {
    let query = state.top_h();
    let last_hiddens: Vec<Var> = encoding.sentence_states[3].iter().map(|s| s.top_h()).collect();
    let mask = vec![true; last_hiddens.len()];
    let att_h = state_context(tape, query, &last_hiddens, vars.state_attn, &mask)?;
    let att_x = if vars.config.variant.uses_knowledge() {
        Some(knowledge_context(
            tape,
            query,
            &encoding.graph_vectors[3],
            vars.knowledge().knowledge_attn,
            &mask,
        )?)
    } else {
        None
    };
    let c_l = msa_context(
        tape,
        att_h.context,
        att_x.as_ref().map(|a| a.context),
        vars.context_proj,
        vars.context_bias,
    )?;
    let e = tape.row(vars.embedding, y_prev)?;
    let next = lstm_step_ctx(tape, &vars.lstm, state, e, c_l)?;
    let dist = vars.token_distribution(tape, next.top_h())?;
    Ok((next, dist, att_h, att_x))
}

/// Value-level loss (fresh private tape, no gradients).
pub fn loss(
    params: &ModelParams,
    story: &Story,
    store: &TripleStore,
) -> Result<LossBreakdown, ModelError> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let lv = loss_on_tape(&mut tape, &vars, story, store)?;
    Ok(LossBreakdown {
        total: tape.item(lv.total),
        encoder: tape.item(lv.encoder),
        decoder: tape.item(lv.decoder),
        ending_tokens: lv.ending_tokens,
    })
}

// ── Inference-side trace and decoding ───────────────────────────────────────

/// A row-per-query attention matrix: `values[j][k]` is the weight the j-th
/// query position put on the k-th attended position.
#[derive(Debug, Clone, PartialEq)]
pub struct AttnMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<Vec<f64>>,
}

/// Everything the decoder and the attention exporter need from an encoded
/// story, as plain values.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderTrace {
    /// Top-layer hidden state per sentence per position.
    pub sentence_hiddens: Vec<Vec<Vec<f64>>>,
    /// Graph vector per sentence per position (empty for ie).
    pub graph_vectors: Vec<Vec<Vec<f64>>>,
    /// Triple-attention weights per sentence per position; `None` where the
    /// word had no triples (fallback vector).
    pub triple_attn: Vec<Vec<Option<Vec<f64>>>>,
    /// For each adjacent pair (sentence i over i−1), i = 2..4: the
    /// state-attention matrix of shape (l_i, l_{i−1}).
    pub state_attn: Vec<AttnMatrix>,
    /// Same layout for knowledge attention (empty for ie).
    pub knowledge_attn: Vec<AttnMatrix>,
    /// Next-token output distribution at every encoder state.
    pub token_distributions: Vec<Vec<Vec<f64>>>,
    /// Per-layer (h, c) after the final context token; seeds the decoder.
    pub final_state: Vec<(Vec<f64>, Vec<f64>)>,
}

fn attn_rows_to_matrix(
    tape: &Tape,
    rows: &[(Var, Vec<usize>)],
    cols: usize,
) -> AttnMatrix {
    let values: Vec<Vec<f64>> = rows
        .iter()
        .map(|(weights, valid)| {
            let mut row = vec![0.0; cols];
            for (slot, &k) in tape.value(*weights).iter().zip(valid) {
                row[k] = *slot;
            }
            row
        })
        .collect();
    AttnMatrix { rows: values.len(), cols, values }
}

impl EncoderTrace {
    /// Extract values from an on-tape encoding.
    pub fn extract(
        tape: &Tape,
        params: &ModelParams,
        encoding: &StoryEncoding,
    ) -> EncoderTrace {
        let sentence_hiddens: Vec<Vec<Vec<f64>>> = encoding
            .sentence_states
            .iter()
            .map(|sent| sent.iter().map(|s| tape.value(s.top_h()).to_vec()).collect())
            .collect();
        let graph_vectors = encoding
            .graph_vectors
            .iter()
            .map(|sent| sent.iter().map(|&g| tape.value(g).to_vec()).collect())
            .collect();
        let triple_attn = encoding
            .triple_attn
            .iter()
            .map(|sent| {
                sent.iter().map(|w| w.map(|v| tape.value(v).to_vec())).collect()
            })
            .collect();
        let state_attn = encoding
            .state_attn
            .iter()
            .enumerate()
            .map(|(idx, rows)| attn_rows_to_matrix(tape, rows, sentence_hiddens[idx].len()))
            .collect();
        let knowledge_attn = encoding
            .knowledge_attn
            .iter()
            .enumerate()
            .map(|(idx, rows)| attn_rows_to_matrix(tape, rows, sentence_hiddens[idx].len()))
            .collect();
        let token_distributions = sentence_hiddens
            .iter()
            .map(|sent| sent.iter().map(|h| params.token_distribution_values(h)).collect())
            .collect();
        let final_state = encoding
            .final_state
            .layers
            .iter()
            .map(|&(h, c)| (tape.value(h).to_vec(), tape.value(c).to_vec()))
            .collect();
        EncoderTrace {
            sentence_hiddens,
            graph_vectors,
            triple_attn,
            state_attn,
            knowledge_attn,
            token_distributions,
            final_state,
        }
    }
}

/// Encode a story for inference: private tape, values extracted.
pub fn encode_trace(
    params: &ModelParams,
    story: &Story,
    store: &TripleStore,
) -> Result<EncoderTrace, ModelError> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let encoding = encode_story(&mut tape, &vars, story, store)?;
    Ok(EncoderTrace::extract(&tape, params, &encoding))
}

/// Decoder state as plain values, carried between inference steps.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl DecoderState {
    pub fn from_trace(trace: &EncoderTrace) -> DecoderState {
        DecoderState { layers: trace.final_state.clone() }
    }
}

/// One inference decoder step's outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderStep {
    pub state: DecoderState,
    pub distribution: Vec<f64>,
    /// Attention over sentence-4 positions (hidden states).
    pub attn_state: Vec<f64>,
    /// Attention over sentence-4 graph vectors (empty for ie).
    pub attn_knowledge: Vec<f64>,
}

/// One decoder step at inference time. Pure function of its inputs: a
/// private tape is built, consumed, and dropped.
pub fn decode_step(
    params: &ModelParams,
    state: &DecoderState,
    y_prev: usize,
    trace: &EncoderTrace,
) -> Result<DecoderStep, ModelError> {
    let cfg = &params.config;
    let mut tape = Tape::new();

    // Only the tensors this step touches go on the tape; the embedding table
    // is read row-wise off-tape.
    let lstm = params.lstm.register(&mut tape);
    let state_attn = tape.leaf(&params.state_attn);
    let context_proj = tape.leaf(&params.context_proj);
    let context_bias = tape.leaf(&params.context_bias);

    let prev = LstmState {
        layers: state
            .layers
            .iter()
            .map(|(h, c)| {
                let hv = tape.leaf_values(&[cfg.hidden_dim, 1], h.clone())?;
                let cv = tape.leaf_values(&[cfg.hidden_dim, 1], c.clone())?;
                Ok((hv, cv))
            })
            .collect::<Result<_, ShapeError>>()?,
    };
    let hiddens: Vec<Var> = trace.sentence_hiddens[3]
        .iter()
        .map(|h| tape.leaf_values(&[cfg.hidden_dim, 1], h.clone()))
        .collect::<Result<_, _>>()?;
    let mask = vec![true; hiddens.len()];
    let query = prev.layers.last().expect("nonempty state").0;
    let att_h = state_context(&mut tape, query, &hiddens, state_attn, &mask)?;
    let att_x = if cfg.variant.uses_knowledge() {
        let w_k = tape.leaf(&params.knowledge.as_ref().expect("knowledge variant").knowledge_attn);
        let gvecs: Vec<Var> = trace.graph_vectors[3]
            .iter()
            .map(|g| tape.leaf_values(&[cfg.graph_dim(), 1], g.clone()))
            .collect::<Result<_, _>>()?;
        Some(knowledge_context(&mut tape, query, &gvecs, w_k, &mask)?)
    } else {
        None
    };
    let c_l = msa_context(
        &mut tape,
        att_h.context,
        att_x.as_ref().map(|a| a.context),
        context_proj,
        context_bias,
    )?;
    let e = tape.leaf_values(&[cfg.word_dim, 1], params.embedding_row(y_prev).to_vec())?;
    let next = lstm_step_ctx(&mut tape, &lstm, &prev, e, c_l)?;

    let distribution = params.token_distribution_values(tape.value(next.top_h()));
    Ok(DecoderStep {
        state: DecoderState {
            layers: next
                .layers
                .iter()
                .map(|&(h, c)| (tape.value(h).to_vec(), tape.value(c).to_vec()))
                .collect(),
        },
        distribution,
        attn_state: tape.value(att_h.weights).to_vec(),
        attn_knowledge: att_x.map(|a| tape.value(a.weights).to_vec()).unwrap_or_default(),
    })
}

// ── Value-level numeric helpers ─────────────────────────────────────────────

/// `W (rows×cols) · x`, plain values.
pub(crate) fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), cols);
    (0..rows)
        .map(|r| w[r * cols..(r + 1) * cols].iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// Max-subtracted softmax over plain values.
pub(crate) fn softmax_values(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}

// ── Checkpoints ─────────────────────────────────────────────────────────────

const CKPT_MAGIC: &[u8; 8] = b"ENDGENCK";
const CKPT_VERSION: u32 = 1;

fn variant_code(v: Variant) -> u8 {
    match v {
        Variant::Ie => 0,
        Variant::IeGa => 1,
        Variant::IeCa => 2,
    }
}

fn variant_from_code(c: u8) -> Option<Variant> {
    match c {
        0 => Some(Variant::Ie),
        1 => Some(Variant::IeGa),
        2 => Some(Variant::IeCa),
        _ => None,
    }
}

/// Serialize config + every named parameter, little-endian, bit-exact.
pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<(), CheckpointError> {
    let io = |source| CheckpointError::Io { path: path.to_path_buf(), source };
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CKPT_MAGIC);
    buf.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    let c = &params.config;
    buf.push(variant_code(c.variant));
    for v in [
        c.num_layers,
        c.hidden_dim,
        c.word_dim,
        c.context_dim,
        c.vocab_size,
        c.num_relations,
        c.relation_dim,
        c.gru_hidden,
    ] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    let named = params.named();
    buf.extend_from_slice(&(named.len() as u64).to_le_bytes());
    for (name, t) in named {
        buf.extend_from_slice(&(name.len() as u64).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(t.shape.len() as u64).to_le_bytes());
        for &d in &t.shape {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &t.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(&buf).map_err(io)
}

/// Byte cursor over a loaded checkpoint image.
struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.at + n > self.bytes.len() {
            return Err(CheckpointError::Malformed {
                path: self.path.to_path_buf(),
                what: "truncated".into(),
            });
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn word(&mut self) -> Result<usize, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()) as usize)
    }

    fn float(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Load a checkpoint back into a full parameter set.
pub fn load_checkpoint(path: &Path) -> Result<ModelParams, CheckpointError> {
    let io = |source| CheckpointError::Io { path: path.to_path_buf(), source };
    let malformed =
        |what: &str| CheckpointError::Malformed { path: path.to_path_buf(), what: what.into() };
    let mut bytes = Vec::new();
    std::fs::File::open(path).map_err(io)?.read_to_end(&mut bytes).map_err(io)?;
    let mut r = Reader { bytes: &bytes, at: 0, path };
    if r.take(8)? != CKPT_MAGIC {
        return Err(CheckpointError::BadMagic { path: path.to_path_buf() });
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != CKPT_VERSION {
        return Err(CheckpointError::BadVersion {
            path: path.to_path_buf(),
            found: version,
            supported: CKPT_VERSION,
        });
    }
    let variant =
        variant_from_code(r.take(1)?[0]).ok_or_else(|| malformed("unknown variant code"))?;
    let config = ModelConfig {
        variant,
        num_layers: r.word()?,
        hidden_dim: r.word()?,
        word_dim: r.word()?,
        context_dim: r.word()?,
        vocab_size: r.word()?,
        num_relations: r.word()?,
        relation_dim: r.word()?,
        gru_hidden: r.word()?,
    };
    let n_params = r.word()?;

    // Build a skeleton with the right shapes, then fill by name.
    let mut params = ModelParams::init(config, 0)
        .map_err(|e| CheckpointError::Mismatch { path: path.to_path_buf(), what: e.to_string() })?;
    let expected = params.named().len();
    let mut filled = 0usize;
    {
        let mut named = params.named_mut();
        for _ in 0..n_params {
            let name_len = r.word()?;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| malformed("non-utf8 name"))?
                .to_string();
            let rank = r.word()?;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.word()?);
            }
            let numel: usize = shape.iter().product();
            let mut values = Vec::with_capacity(numel);
            for _ in 0..numel {
                values.push(r.float()?);
            }
            let slot = named.iter_mut().find(|(n, _)| *n == name).ok_or_else(|| {
                CheckpointError::Mismatch {
                    path: path.to_path_buf(),
                    what: format!("unknown parameter {name:?}"),
                }
            })?;
            if slot.1.shape != shape {
                return Err(CheckpointError::Mismatch {
                    path: path.to_path_buf(),
                    what: format!(
                        "parameter {name:?} has shape {:?}, expected {:?}",
                        shape, slot.1.shape
                    ),
                });
            }
            slot.1.values = values;
            filled += 1;
        }
    }
    if filled != expected {
        return Err(CheckpointError::Mismatch {
            path: path.to_path_buf(),
            what: format!("checkpoint fills {filled} of {expected} parameters"),
        });
    }
    Ok(params)
}

// ── Tests ───────────────────────────────────────────────────────────────────
