//! Ending generation: greedy argmax decoding and beam search over the
//! step-wise inference decoder, with per-step attention records.

use thiserror::Error;

use crate::corpus::{Story, BOS, EOS};
use crate::knowledge::TripleStore;
use crate::model::{
    decode_step, encode_trace, DecoderState, EncoderTrace, ModelError, ModelParams,
};

/// Generation stops after this many tokens when no end marker appears.
pub const DEFAULT_MAX_LEN: usize = 30;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("beam width must be ≥ 1")]
    ZeroBeam,
    #[error("max_len must be ≥ 1")]
    ZeroMaxLen,
}

/// One generated ending: tokens (end marker included when produced), the
/// log-probability the model assigned each token, and the attention rows
/// recorded at each step.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationResult {
    pub story_id: String,
    pub tokens: Vec<usize>,
    pub step_logprobs: Vec<f64>,
    /// Σ step_logprobs.
    pub total_logprob: f64,
    /// total / token count — the beam-ranking score.
    pub normalized_logprob: f64,
    /// Per step: attention over sentence-4 positions.
    pub attn_state: Vec<Vec<f64>>,
    /// Per step: attention over sentence-4 graph vectors (empty for ie).
    pub attn_knowledge: Vec<Vec<f64>>,
}

/// Highest-probability token, ties broken toward the lowest id.
fn argmax(dist: &[f64]) -> usize {
    let mut best = 0;
    let mut best_p = f64::NEG_INFINITY;
    for (i, &p) in dist.iter().enumerate() {
        if p > best_p {
            best = i;
            best_p = p;
        }
    }
    best
}

/// Greedy decoding from an encoded story: at each step feed the previous
/// token (start marker first), take the argmax, stop at the end marker or
/// after `max_len` tokens.
pub fn greedy_from_trace(
    params: &ModelParams,
    story_id: &str,
    trace: &EncoderTrace,
    max_len: usize,
) -> Result<GenerationResult, DecodeError> {
    if max_len == 0 {
        return Err(DecodeError::ZeroMaxLen);
    }
    let mut state = DecoderState::from_trace(trace);
    let mut prev = BOS;
    let mut out = GenerationResult {
        story_id: story_id.to_string(),
        tokens: Vec::new(),
        step_logprobs: Vec::new(),
        total_logprob: 0.0,
        normalized_logprob: 0.0,
        attn_state: Vec::new(),
        attn_knowledge: Vec::new(),
    };
    for _ in 0..max_len {
        let step = decode_step(params, &state, prev, trace)?;
        let token = argmax(&step.distribution);
        out.tokens.push(token);
        out.step_logprobs.push(step.distribution[token].ln());
        out.total_logprob += step.distribution[token].ln();
        out.attn_state.push(step.attn_state);
        if !step.attn_knowledge.is_empty() {
            out.attn_knowledge.push(step.attn_knowledge);
        }
        state = step.state;
        prev = token;
        if token == EOS {
            break;
        }
    }
    out.normalized_logprob = out.total_logprob / out.tokens.len() as f64;
    Ok(out)
}

struct Hypothesis {
    tokens: Vec<usize>,
    logps: Vec<f64>,
    attn_state: Vec<Vec<f64>>,
    attn_knowledge: Vec<Vec<f64>>,
    total: f64,
    state: DecoderState,
    prev: usize,
}

impl Hypothesis {
    fn into_result(self, story_id: &str) -> GenerationResult {
        let normalized = self.total / self.tokens.len() as f64;
        GenerationResult {
            story_id: story_id.to_string(),
            tokens: self.tokens,
            step_logprobs: self.logps,
            total_logprob: self.total,
            normalized_logprob: normalized,
            attn_state: self.attn_state,
            attn_knowledge: self.attn_knowledge,
        }
    }
}

/// Beam search: keep the `width` best partial endings by cumulative
/// log-probability; finished hypotheses are ranked by length-normalized
/// log-probability (total divided by token count, end marker included).
/// Width 1 reproduces greedy decoding exactly.
pub fn beam_from_trace(
    params: &ModelParams,
    story_id: &str,
    trace: &EncoderTrace,
    width: usize,
    max_len: usize,
) -> Result<GenerationResult, DecodeError> {
    let ranked = beam_ranked_from_trace(params, story_id, trace, width, max_len)?;
    Ok(ranked.into_iter().next().expect("beam search returns at least one hypothesis"))
}

/// All beam hypotheses, best first.
pub fn beam_ranked_from_trace(
    params: &ModelParams,
    story_id: &str,
    trace: &EncoderTrace,
    width: usize,
    max_len: usize,
) -> Result<Vec<GenerationResult>, DecodeError> {
    if width == 0 {
        return Err(DecodeError::ZeroBeam);
    }
    if max_len == 0 {
        return Err(DecodeError::ZeroMaxLen);
    }
    let mut live = vec![Hypothesis {
        tokens: Vec::new(),
        logps: Vec::new(),
        attn_state: Vec::new(),
        attn_knowledge: Vec::new(),
        total: 0.0,
        state: DecoderState::from_trace(trace),
        prev: BOS,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();

    for _ in 0..max_len {
        if live.is_empty() {
            break;
        }
        // One decoder step per live hypothesis; its outputs are shared by
        // every candidate extension of that hypothesis.
        let steps = live
            .iter()
            .map(|h| decode_step(params, &h.state, h.prev, trace))
            .collect::<Result<Vec<_>, _>>()?;
        // (cumulative logp, source hypothesis, token)
        let mut cands: Vec<(f64, usize, usize)> = Vec::new();
        for (hi, step) in steps.iter().enumerate() {
            for (tok, &p) in step.distribution.iter().enumerate() {
                cands.push((live[hi].total + p.ln(), hi, tok));
            }
        }
        // Best first; ties toward the lower token id, then the earlier
        // hypothesis — fully deterministic.
        cands.sort_by(|a, b| {
            b.0.partial_cmp(&a.0).unwrap().then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1))
        });
        cands.truncate(width);

        let mut next_live = Vec::with_capacity(width);
        for (total, hi, tok) in cands {
            let src = &live[hi];
            let step = &steps[hi];
            let mut tokens = src.tokens.clone();
            tokens.push(tok);
            let mut logps = src.logps.clone();
            logps.push(step.distribution[tok].ln());
            let mut attn_state = src.attn_state.clone();
            attn_state.push(step.attn_state.clone());
            let mut attn_knowledge = src.attn_knowledge.clone();
            if !step.attn_knowledge.is_empty() {
                attn_knowledge.push(step.attn_knowledge.clone());
            }
            let hyp = Hypothesis {
                tokens,
                logps,
                attn_state,
                attn_knowledge,
                total,
                state: step.state.clone(),
                prev: tok,
            };
            if tok == EOS {
                finished.push(hyp);
            } else {
                next_live.push(hyp);
            }
        }
        live = next_live;
    }
    // Length-capped leftovers compete too.
    finished.extend(live);

    let mut results: Vec<GenerationResult> =
        finished.into_iter().map(|h| h.into_result(story_id)).collect();
    results.sort_by(|a, b| {
        b.normalized_logprob
            .partial_cmp(&a.normalized_logprob)
            .unwrap()
            .then_with(|| a.tokens.cmp(&b.tokens))
    });
    Ok(results)
}

/// Encode a story and decode greedily.
pub fn greedy_decode(
    params: &ModelParams,
    story: &Story,
    store: &TripleStore,
    max_len: usize,
) -> Result<GenerationResult, DecodeError> {
    let trace = encode_trace(params, story, store)?;
    greedy_from_trace(params, &story.id, &trace, max_len)
}

/// Encode a story and beam-search an ending.
pub fn beam_search(
    params: &ModelParams,
    story: &Story,
    store: &TripleStore,
    width: usize,
    max_len: usize,
) -> Result<GenerationResult, DecodeError> {
    let trace = encode_trace(params, story, store)?;
    beam_from_trace(params, &story.id, &trace, width, max_len)
}

// ── Tests ───────────────────────────────────────────────────────────────────
