//! Evaluation mathematics: perplexity over reference endings, BLEU-1/2
//! (corpus-level by default, sentence-level available), and the
//! human-annotation aggregates — majority voting, agreement proportions,
//! and Fleiss kappa.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::Story;
use crate::knowledge::TripleStore;
use crate::model::{loss, ModelError, ModelParams};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("evaluation needs at least one story")]
    EmptyDataset,
    #[error("bleu order must be 1 or 2, got {0}")]
    BadBleuOrder(usize),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: bad annotation row: {what}")]
    BadAnnotation { path: PathBuf, line: usize, what: String },
    #[error("annotation score {0} outside 0..=2")]
    BadScore(u8),
    #[error("count-matrix row {row} sums to {found}, expected {expected}")]
    BadRowSum { row: usize, found: usize, expected: usize },
    #[error("empty annotation table")]
    EmptyTable,
}

// ── Deterministic parallel map ──────────────────────────────────────────────

/// Apply `f` to every item, optionally across threads. Results come back in
/// input order, so any later fold is identical regardless of `workers`.
pub fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.max(1).min(items.len().max(1));
    if workers <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    let mut out: Vec<Vec<R>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|slice| scope.spawn(|| slice.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        out = handles.into_iter().map(|h| h.join().expect("evaluation worker panicked")).collect();
    });
    out.into_iter().flatten().collect()
}

// ── Perplexity ──────────────────────────────────────────────────────────────

/// Teacher-forced negative log-likelihood of one story's ending and the
/// number of scored tokens (ending length + 1 for the end marker).
pub fn story_decoder_nll(
    params: &ModelParams,
    story: &Story,
    store: &TripleStore,
) -> Result<(f64, usize), ModelError> {
    let lb = loss(params, story, store)?;
    Ok((lb.decoder, lb.ending_tokens))
}

/// Corpus perplexity: `exp(Σ ending NLL / Σ ending tokens)`. Decoder side
/// only — the encoder supervision term is a training aid, not part of the
/// reported metric.
pub fn perplexity(
    params: &ModelParams,
    stories: &[Story],
    store: &TripleStore,
    workers: usize,
) -> Result<f64, EvalError> {
    if stories.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let per_story = parallel_map(stories, workers, |s| story_decoder_nll(params, s, store));
    let mut total_nll = 0.0;
    let mut total_tokens = 0usize;
    for r in per_story {
        let (nll, tokens) = r?;
        total_nll += nll;
        total_tokens += tokens;
    }
    Ok((total_nll / total_tokens as f64).exp())
}

// ── BLEU ────────────────────────────────────────────────────────────────────

fn ngram_counts(tokens: &[usize], n: usize) -> HashMap<&[usize], usize> {
    let mut counts: HashMap<&[usize], usize> = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram matches and candidate n-gram total for one order.
fn clipped_counts(candidate: &[usize], reference: &[usize], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let refc = ngram_counts(reference, n);
    let clipped = cand
        .iter()
        .map(|(gram, &c)| c.min(refc.get(gram).copied().unwrap_or(0)))
        .sum();
    let total = candidate.len().saturating_sub(n - 1);
    (clipped, total)
}

fn brevity_penalty(cand_len: usize, ref_len: usize) -> f64 {
    if cand_len == 0 {
        return 0.0;
    }
    if cand_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    }
}

fn bleu_from_counts(
    clipped: &[usize],
    totals: &[usize],
    cand_len: usize,
    ref_len: usize,
) -> f64 {
    // Any order with zero matches (or no n-grams at all) zeroes the
    // geometric mean; no smoothing.
    let mut log_sum = 0.0;
    for (&c, &t) in clipped.iter().zip(totals) {
        if c == 0 || t == 0 {
            return 0.0;
        }
        log_sum += (c as f64 / t as f64).ln();
    }
    brevity_penalty(cand_len, ref_len) * (log_sum / clipped.len() as f64).exp()
}

/// Sentence-level BLEU-n (n ∈ {1, 2}): geometric mean of clipped modified
/// precisions for orders 1..=n with brevity penalty `exp(1 − r/c)` when the
/// candidate is shorter than the reference.
pub fn bleu_n(candidate: &[usize], reference: &[usize], n: usize) -> Result<f64, EvalError> {
    if !(1..=2).contains(&n) {
        return Err(EvalError::BadBleuOrder(n));
    }
    let mut clipped = Vec::with_capacity(n);
    let mut totals = Vec::with_capacity(n);
    for order in 1..=n {
        let (c, t) = clipped_counts(candidate, reference, order);
        clipped.push(c);
        totals.push(t);
    }
    Ok(bleu_from_counts(&clipped, &totals, candidate.len(), reference.len()))
}

/// Corpus-level BLEU accumulator: clipped and total counts are summed over
/// all pairs before the precision quotients are taken.
#[derive(Debug, Clone)]
pub struct BleuAccumulator {
    order: usize,
    clipped: Vec<usize>,
    totals: Vec<usize>,
    cand_len: usize,
    ref_len: usize,
}

impl BleuAccumulator {
    pub fn new(order: usize) -> Result<BleuAccumulator, EvalError> {
        if !(1..=2).contains(&order) {
            return Err(EvalError::BadBleuOrder(order));
        }
        Ok(BleuAccumulator {
            order,
            clipped: vec![0; order],
            totals: vec![0; order],
            cand_len: 0,
            ref_len: 0,
        })
    }

    pub fn add(&mut self, candidate: &[usize], reference: &[usize]) {
        for n in 1..=self.order {
            let (c, t) = clipped_counts(candidate, reference, n);
            self.clipped[n - 1] += c;
            self.totals[n - 1] += t;
        }
        self.cand_len += candidate.len();
        self.ref_len += reference.len();
    }

    pub fn score(&self) -> f64 {
        bleu_from_counts(&self.clipped, &self.totals, self.cand_len, self.ref_len)
    }
}

/// Mean of per-pair sentence BLEU — the alternative aggregation, for
/// sensitivity checks against the corpus-level default.
pub fn mean_sentence_bleu(
    pairs: &[(Vec<usize>, Vec<usize>)],
    n: usize,
) -> Result<f64, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let mut sum = 0.0;
    for (cand, reference) in pairs {
        sum += bleu_n(cand, reference, n)?;
    }
    Ok(sum / pairs.len() as f64)
}

// ── Annotation aggregation ──────────────────────────────────────────────────

pub const NUM_SCORE_CATEGORIES: usize = 3;

/// The label at least two of the three annotators chose; a three-way split
/// falls back to the median — the only symmetric order-respecting rule.
pub fn majority_vote(scores: [u8; 3]) -> Result<u8, EvalError> {
    for s in scores {
        if s as usize >= NUM_SCORE_CATEGORIES {
            return Err(EvalError::BadScore(s));
        }
    }
    let mut sorted = scores;
    sorted.sort_unstable();
    // After sorting, any ≥2 duplicate occupies the middle slot, and the
    // middle is also the median of a three-way split.
    Ok(sorted[1])
}

/// Proportions of items where all three / exactly two / no two annotators
/// agreed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgreementStats {
    pub unanimous: f64,
    pub majority: f64,
    pub split: f64,
}

pub fn agreement_stats(rows: &[[u8; 3]]) -> Result<AgreementStats, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::EmptyTable);
    }
    let (mut three, mut two, mut one) = (0usize, 0usize, 0usize);
    for row in rows {
        let [a, b, c] = *row;
        if a == b && b == c {
            three += 1;
        } else if a == b || b == c || a == c {
            two += 1;
        } else {
            one += 1;
        }
    }
    let n = rows.len() as f64;
    Ok(AgreementStats {
        unanimous: three as f64 / n,
        majority: two as f64 / n,
        split: one as f64 / n,
    })
}

/// Per-item category counts from score rows.
pub fn score_rows_to_counts(rows: &[[u8; 3]]) -> Vec<Vec<usize>> {
    rows.iter()
        .map(|row| {
            let mut counts = vec![0usize; NUM_SCORE_CATEGORIES];
            for &s in row {
                counts[s as usize] += 1;
            }
            counts
        })
        .collect()
}

/// Fleiss kappa over an items × categories count matrix:
/// `(P̄ − P̄ₑ) / (1 − P̄ₑ)`. The degenerate all-one-category table has
/// `P̄ₑ = 1`; agreement there is perfect by inspection, so the result is
/// defined as 1.0 (callers may warn).
pub fn fleiss_kappa(counts: &[Vec<usize>]) -> Result<f64, EvalError> {
    if counts.is_empty() {
        return Err(EvalError::EmptyTable);
    }
    let raters: usize = counts[0].iter().sum();
    let categories = counts[0].len();
    for (i, row) in counts.iter().enumerate() {
        let sum: usize = row.iter().sum();
        if sum != raters || row.len() != categories {
            return Err(EvalError::BadRowSum { row: i, found: sum, expected: raters });
        }
    }
    let n_items = counts.len() as f64;
    let n = raters as f64;

    let p_bar = counts
        .iter()
        .map(|row| {
            let sq: usize = row.iter().map(|&c| c * c).sum();
            (sq as f64 - n) / (n * (n - 1.0))
        })
        .sum::<f64>()
        / n_items;

    let p_e = (0..categories)
        .map(|j| {
            let col: usize = counts.iter().map(|row| row[j]).sum();
            let share = col as f64 / (n_items * n);
            share * share
        })
        .sum::<f64>();

    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(1.0);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

// ── Annotation table I/O ────────────────────────────────────────────────────

/// One annotated item under one metric: three scores in {0, 1, 2}.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRow {
    pub item: String,
    pub metric: usize,
    pub scores: [u8; 3],
}

/// Parsed `item \t metric \t s1 \t s2 \t s3` table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationTable {
    pub metrics: Vec<String>,
    pub rows: Vec<AnnotationRow>,
}

impl AnnotationTable {
    /// Rows of one metric, in file order.
    pub fn metric_rows(&self, metric: usize) -> Vec<[u8; 3]> {
        self.rows.iter().filter(|r| r.metric == metric).map(|r| r.scores).collect()
    }
}

pub fn load_annotations(path: &Path) -> Result<AnnotationTable, EvalError> {
    let file = std::fs::File::open(path)
        .map_err(|source| EvalError::Io { path: path.to_path_buf(), source })?;
    let mut table = AnnotationTable::default();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line =
            line.map_err(|source| EvalError::Io { path: path.to_path_buf(), source })?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(EvalError::BadAnnotation {
                path: path.to_path_buf(),
                line: lineno,
                what: format!("expected 5 tab-separated fields, found {}", fields.len()),
            });
        }
        let metric_name = fields[1].trim();
        let metric = match table.metrics.iter().position(|m| m == metric_name) {
            Some(i) => i,
            None => {
                table.metrics.push(metric_name.to_string());
                table.metrics.len() - 1
            }
        };
        let mut scores = [0u8; 3];
        for (slot, raw) in scores.iter_mut().zip(&fields[2..5]) {
            let v: u8 = raw.trim().parse().map_err(|_| EvalError::BadAnnotation {
                path: path.to_path_buf(),
                line: lineno,
                what: format!("score {raw:?} is not an integer"),
            })?;
            if v as usize >= NUM_SCORE_CATEGORIES {
                return Err(EvalError::BadAnnotation {
                    path: path.to_path_buf(),
                    line: lineno,
                    what: format!("score {v} outside 0..=2"),
                });
            }
            *slot = v;
        }
        table.rows.push(AnnotationRow { item: fields[0].trim().to_string(), metric, scores });
    }
    if table.rows.is_empty() {
        return Err(EvalError::EmptyTable);
    }
    Ok(table)
}

/// Per-metric aggregate: share of items voted into each category, the
/// agreement proportions, and Fleiss kappa.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub metric: String,
    pub vote_shares: [f64; NUM_SCORE_CATEGORIES],
    pub agreement: AgreementStats,
    pub kappa: f64,
}

pub fn summarize_annotations(table: &AnnotationTable) -> Result<Vec<MetricSummary>, EvalError> {
    let mut out = Vec::with_capacity(table.metrics.len());
    for (mi, name) in table.metrics.iter().enumerate() {
        let rows = table.metric_rows(mi);
        let mut votes = [0usize; NUM_SCORE_CATEGORIES];
        for &row in &rows {
            votes[majority_vote(row)? as usize] += 1;
        }
        let n = rows.len() as f64;
        out.push(MetricSummary {
            metric: name.clone(),
            vote_shares: votes.map(|v| v as f64 / n),
            agreement: agreement_stats(&rows)?,
            kappa: fleiss_kappa(&score_rows_to_counts(&rows))?,
        });
    }
    Ok(out)
}

// ── Tests ───────────────────────────────────────────────────────────────────
