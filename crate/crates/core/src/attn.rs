//! Attention-weight export: every encoder state-attention and
//! knowledge-attention matrix, the per-word triple-attention rows, and the
//! decoder's per-step attention rows, written in a line-oriented text format
//! whose numbers parse back bit-exactly.
//!
//! File layout (all indices 0-based, one matrix row per line, values
//! space-separated):
//!
//! ```text
//! attention v1
//! story <id>
//! variant <ie|ie-ga|ie-ca>
//! encoder-state <pair> <rows> <cols>        three sections: pair 0..2 is
//! <rows lines of cols values>               sentence pair+1 over sentence pair
//! encoder-knowledge <pair> <rows> <cols>    knowledge variants only
//! triple <sentence> <position> <count>      one per encoded token with triples
//! <count values>
//! decoder-state <rows> <cols>               rows = generated steps
//! decoder-knowledge <rows> <cols>           knowledge variants only
//! end
//! ```

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::Story;
use crate::decode::{greedy_from_trace, DecodeError, GenerationResult};
use crate::knowledge::TripleStore;
use crate::model::{encode_trace, AttnMatrix, EncoderTrace, ModelParams, Variant};

#[derive(Debug, Error)]
pub enum AttnError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("attention export line {line}: {what}")]
    Parse { line: usize, what: String },
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// Attention over one encoded word's triples (or its contextual memory).
#[derive(Debug, Clone, PartialEq)]
pub struct TripleAttnRecord {
    /// 0-based sentence index (0..4).
    pub sentence: usize,
    /// 0-based token position within the sentence.
    pub position: usize,
    pub weights: Vec<f64>,
}

/// All attention weights recorded while encoding one story and generating
/// its ending.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionExport {
    pub story_id: String,
    pub variant: Variant,
    /// Three matrices: sentence i+1 attending over sentence i, i = 0..2.
    pub encoder_state: Vec<AttnMatrix>,
    /// Same layout for knowledge attention; empty for the plain variant.
    pub encoder_knowledge: Vec<AttnMatrix>,
    pub triples: Vec<TripleAttnRecord>,
    /// One row per generated token, over sentence-4 positions.
    pub decoder_state: AttnMatrix,
    /// Same rows over sentence-4 graph vectors; `None` for the plain variant.
    pub decoder_knowledge: Option<AttnMatrix>,
}

fn matrix_from_rows(rows: &[Vec<f64>], fallback_cols: usize) -> AttnMatrix {
    let cols = rows.first().map_or(fallback_cols, Vec::len);
    AttnMatrix {
        rows: rows.len(),
        cols,
        values: rows.to_vec(),
    }
}

/// Assemble an export from an encoder trace and a finished generation.
pub fn build_export(
    variant: Variant,
    trace: &EncoderTrace,
    gen: &GenerationResult,
) -> AttentionExport {
    let mut triples = Vec::new();
    for (sentence, rows) in trace.triple_attn.iter().enumerate() {
        for (position, weights) in rows.iter().enumerate() {
            if let Some(w) = weights {
                triples.push(TripleAttnRecord {
                    sentence,
                    position,
                    weights: w.clone(),
                });
            }
        }
    }
    let l4 = trace.sentence_hiddens[3].len();
    AttentionExport {
        story_id: gen.story_id.clone(),
        variant,
        encoder_state: trace.state_attn.clone(),
        encoder_knowledge: if variant.uses_knowledge() {
            trace.knowledge_attn.clone()
        } else {
            Vec::new()
        },
        triples,
        decoder_state: matrix_from_rows(&gen.attn_state, l4),
        decoder_knowledge: if variant.uses_knowledge() {
            Some(matrix_from_rows(&gen.attn_knowledge, l4))
        } else {
            None
        },
    }
}

/// Encode a story, generate its ending greedily, and collect every
/// attention weight along the way.
pub fn export_story(
    params: &ModelParams,
    story: &Story,
    store: &TripleStore,
    max_len: usize,
) -> Result<(AttentionExport, GenerationResult), AttnError> {
    let trace = encode_trace(params, story, store).map_err(DecodeError::from)?;
    let gen = greedy_from_trace(params, &story.id, &trace, max_len)?;
    let export = build_export(params.config.variant, &trace, &gen);
    Ok((export, gen))
}

/// Check that every exported attention row is a probability distribution:
/// non-negative entries summing to 1 within `tol`. Returns a description of
/// the first offending row.
pub fn validate_stochastic(export: &AttentionExport, tol: f64) -> Result<(), String> {
    let check_row = |label: &str, row: &[f64]| -> Result<(), String> {
        if let Some(x) = row.iter().find(|x| **x < 0.0) {
            return Err(format!("{label}: negative weight {x}"));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(format!("{label}: row sums to {sum}, expected 1"));
        }
        Ok(())
    };
    let check_matrix = |label: &str, m: &AttnMatrix| -> Result<(), String> {
        for (j, row) in m.values.iter().enumerate() {
            check_row(&format!("{label} row {j}"), row)?;
        }
        Ok(())
    };
    for (i, m) in export.encoder_state.iter().enumerate() {
        check_matrix(&format!("encoder-state {i}"), m)?;
    }
    for (i, m) in export.encoder_knowledge.iter().enumerate() {
        check_matrix(&format!("encoder-knowledge {i}"), m)?;
    }
    for t in &export.triples {
        check_row(
            &format!("triple {} {}", t.sentence, t.position),
            &t.weights,
        )?;
    }
    check_matrix("decoder-state", &export.decoder_state)?;
    if let Some(m) = &export.decoder_knowledge {
        check_matrix("decoder-knowledge", m)?;
    }
    Ok(())
}

// ── Writing ──────────────────────────────────────────────────────────────────

fn push_row(out: &mut String, row: &[f64]) {
    for (k, x) in row.iter().enumerate() {
        if k > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{x}");
    }
    out.push('\n');
}

fn push_matrix(out: &mut String, header: &str, m: &AttnMatrix) {
    let _ = writeln!(out, "{header} {} {}", m.rows, m.cols);
    for row in &m.values {
        push_row(out, row);
    }
}

/// Render an export in the line-oriented text format.
pub fn export_to_string(export: &AttentionExport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "attention v1");
    let _ = writeln!(out, "story {}", export.story_id);
    let _ = writeln!(out, "variant {}", export.variant.as_str());
    for (i, m) in export.encoder_state.iter().enumerate() {
        push_matrix(&mut out, &format!("encoder-state {i}"), m);
    }
    for (i, m) in export.encoder_knowledge.iter().enumerate() {
        push_matrix(&mut out, &format!("encoder-knowledge {i}"), m);
    }
    for t in &export.triples {
        let _ = writeln!(
            out,
            "triple {} {} {}",
            t.sentence,
            t.position,
            t.weights.len()
        );
        push_row(&mut out, &t.weights);
    }
    push_matrix(&mut out, "decoder-state", &export.decoder_state);
    if let Some(m) = &export.decoder_knowledge {
        push_matrix(&mut out, "decoder-knowledge", m);
    }
    out.push_str("end\n");
    out
}

/// Write an export to a file.
pub fn save_export(export: &AttentionExport, path: &Path) -> Result<(), AttnError> {
    let text = export_to_string(export);
    let mut file = std::fs::File::create(path).map_err(|source| AttnError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(text.as_bytes()).map_err(|source| AttnError::Io {
        path: path.to_path_buf(),
        source,
    })
}

// ── Parsing ──────────────────────────────────────────────────────────────────

struct LineReader<'a> {
    lines: std::str::Lines<'a>,
    at: usize,
}

impl<'a> LineReader<'a> {
    fn new(text: &'a str) -> Self {
        LineReader {
            lines: text.lines(),
            at: 0,
        }
    }

    fn next(&mut self) -> Result<&'a str, AttnError> {
        self.at += 1;
        self.lines.next().ok_or(AttnError::Parse {
            line: self.at,
            what: "unexpected end of input".to_string(),
        })
    }

    fn fail<T>(&self, what: impl Into<String>) -> Result<T, AttnError> {
        Err(AttnError::Parse {
            line: self.at,
            what: what.into(),
        })
    }

    fn row(&mut self, expected: usize) -> Result<Vec<f64>, AttnError> {
        let line = self.next()?;
        let mut row = Vec::with_capacity(expected);
        for piece in line.split_whitespace() {
            match piece.parse::<f64>() {
                Ok(x) => row.push(x),
                Err(_) => return self.fail(format!("bad number {piece:?}")),
            }
        }
        if row.len() != expected {
            return self.fail(format!(
                "expected {expected} values, found {}",
                row.len()
            ));
        }
        Ok(row)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<AttnMatrix, AttnError> {
        let mut values = Vec::with_capacity(rows);
        for _ in 0..rows {
            values.push(self.row(cols)?);
        }
        Ok(AttnMatrix { rows, cols, values })
    }
}

fn parse_index(reader: &LineReader, piece: Option<&str>, what: &str) -> Result<usize, AttnError> {
    match piece.and_then(|p| p.parse::<usize>().ok()) {
        Some(n) => Ok(n),
        None => reader.fail(format!("expected {what}")),
    }
}

/// Parse an export written by [`export_to_string`]. Every number round-trips
/// exactly.
pub fn parse_export(text: &str) -> Result<AttentionExport, AttnError> {
    let mut r = LineReader::new(text);

    if r.next()? != "attention v1" {
        return r.fail("expected header `attention v1`");
    }
    let story_id = match r.next()?.strip_prefix("story ") {
        Some(id) => id.to_string(),
        None => return r.fail("expected `story <id>`"),
    };
    let variant = match r.next()?.strip_prefix("variant ") {
        Some(v) => match Variant::parse(v) {
            Some(v) => v,
            None => return r.fail(format!("unknown variant {v:?}")),
        },
        None => return r.fail("expected `variant <name>`"),
    };

    let mut encoder_state: Vec<AttnMatrix> = Vec::new();
    let mut encoder_knowledge: Vec<AttnMatrix> = Vec::new();
    let mut triples: Vec<TripleAttnRecord> = Vec::new();
    let mut decoder_state: Option<AttnMatrix> = None;
    let mut decoder_knowledge: Option<AttnMatrix> = None;

    loop {
        let line = r.next()?;
        if line == "end" {
            break;
        }
        let mut words = line.split_whitespace();
        match words.next() {
            Some("encoder-state") => {
                let pair = parse_index(&r, words.next(), "pair index")?;
                if pair != encoder_state.len() {
                    return r.fail(format!(
                        "encoder-state pair {pair} out of order (expected {})",
                        encoder_state.len()
                    ));
                }
                let rows = parse_index(&r, words.next(), "row count")?;
                let cols = parse_index(&r, words.next(), "column count")?;
                encoder_state.push(r.matrix(rows, cols)?);
            }
            Some("encoder-knowledge") => {
                let pair = parse_index(&r, words.next(), "pair index")?;
                if pair != encoder_knowledge.len() {
                    return r.fail(format!(
                        "encoder-knowledge pair {pair} out of order (expected {})",
                        encoder_knowledge.len()
                    ));
                }
                let rows = parse_index(&r, words.next(), "row count")?;
                let cols = parse_index(&r, words.next(), "column count")?;
                encoder_knowledge.push(r.matrix(rows, cols)?);
            }
            Some("triple") => {
                let sentence = parse_index(&r, words.next(), "sentence index")?;
                let position = parse_index(&r, words.next(), "token position")?;
                let count = parse_index(&r, words.next(), "weight count")?;
                let weights = r.row(count)?;
                triples.push(TripleAttnRecord {
                    sentence,
                    position,
                    weights,
                });
            }
            Some("decoder-state") => {
                if decoder_state.is_some() {
                    return r.fail("duplicate decoder-state section");
                }
                let rows = parse_index(&r, words.next(), "row count")?;
                let cols = parse_index(&r, words.next(), "column count")?;
                decoder_state = Some(r.matrix(rows, cols)?);
            }
            Some("decoder-knowledge") => {
                if decoder_knowledge.is_some() {
                    return r.fail("duplicate decoder-knowledge section");
                }
                let rows = parse_index(&r, words.next(), "row count")?;
                let cols = parse_index(&r, words.next(), "column count")?;
                decoder_knowledge = Some(r.matrix(rows, cols)?);
            }
            _ => return r.fail(format!("unrecognized section {line:?}")),
        }
    }

    let decoder_state = match decoder_state {
        Some(m) => m,
        None => return r.fail("missing decoder-state section"),
    };
    Ok(AttentionExport {
        story_id,
        variant,
        encoder_state,
        encoder_knowledge,
        triples,
        decoder_state,
        decoder_knowledge,
    })
}

/// Read an export file.
pub fn load_export(path: &Path) -> Result<AttentionExport, AttnError> {
    let mut text = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| AttnError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    parse_export(&text)
}

// ── Tests ───────────────────────────────────────────────────────────────────
