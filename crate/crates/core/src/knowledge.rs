//! Commonsense knowledge triples, grouped into per-word one-hop graphs.
//!
//! The raw dump is line-oriented: `head \t relation \t tail \t weight?`.
//! Ingest keeps a triple only when both endpoints are in the corpus
//! vocabulary *and* both are tagged noun or verb in the part-of-speech
//! lexicon; each head's triples are then ranked (weight descending, file
//! order as tie-break) and truncated to [`MAX_TRIPLES_PER_WORD`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::Vocabulary;

/// Upper bound on triples retained per query word.
pub const MAX_TRIPLES_PER_WORD: usize = 10;

// ── Errors ──────────────────────────────────────────────────────────────────

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: bad store record")]
    BadStoreEntry { path: PathBuf, line: usize },
    #[error("{path}: store header missing or unsupported (expected \"{expected}\")")]
    BadHeader { path: PathBuf, expected: &'static str },
    #[error("{path}:{line}: word {word:?} not in vocabulary")]
    UnknownWord { path: PathBuf, line: usize, word: String },
}

fn io_err(path: &Path, source: std::io::Error) -> KnowledgeError {
    KnowledgeError::Io { path: path.to_path_buf(), source }
}

// ── Part-of-speech lexicon ──────────────────────────────────────────────────

/// Word → set of coarse part-of-speech tags, loaded from a static data file
/// with `word \t tag[,tag...]` lines. Only `noun` and `verb` matter to the
/// triple filter; other tags are retained but unused.
#[derive(Debug, Clone, Default)]
pub struct PosLexicon {
    tags: HashMap<String, u8>,
}

const POS_NOUN: u8 = 1;
const POS_VERB: u8 = 2;
const POS_OTHER: u8 = 4;

impl PosLexicon {
    pub fn load(path: &Path) -> Result<PosLexicon, KnowledgeError> {
        let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
        let mut tags: HashMap<String, u8> = HashMap::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| io_err(path, e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(word), Some(tag_list)) = (parts.next(), parts.next()) else {
                continue;
            };
            let entry = tags.entry(word.to_string()).or_insert(0);
            for tag in tag_list.split(',') {
                *entry |= match tag.trim() {
                    "noun" => POS_NOUN,
                    "verb" => POS_VERB,
                    _ => POS_OTHER,
                };
            }
        }
        Ok(PosLexicon { tags })
    }

    pub fn insert(&mut self, word: &str, noun: bool, verb: bool) {
        let mut bits = 0;
        if noun {
            bits |= POS_NOUN;
        }
        if verb {
            bits |= POS_VERB;
        }
        if bits == 0 {
            bits = POS_OTHER;
        }
        *self.tags.entry(word.to_string()).or_insert(0) |= bits;
    }

    /// The triple filter's test: tagged noun or verb.
    pub fn is_noun_or_verb(&self, word: &str) -> bool {
        self.tags.get(word).is_some_and(|t| t & (POS_NOUN | POS_VERB) != 0)
    }
}

// ── Triples and graphs ──────────────────────────────────────────────────────

/// Dense relation-name ↔ id map. The trainable relation vectors themselves
/// live with the model parameters; this type only names them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RelationVocabulary {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl RelationVocabulary {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }
}

/// `(head, relation, tail)` with all three resolved to ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnowledgeTriple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

/// One word's one-hop graph: every triple's head equals the query.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConceptGraph {
    pub query: usize,
    pub triples: Vec<KnowledgeTriple>,
}

impl ConceptGraph {
    pub fn empty(query: usize) -> ConceptGraph {
        ConceptGraph { query, triples: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IngestReport {
    /// Well-formed lines (3 or 4 tab-separated fields).
    pub considered: usize,
    /// Lines that failed to parse.
    pub malformed_skipped: usize,
    /// Triples surviving the vocabulary + POS filters, before the cap.
    pub passed_filters: usize,
    /// Triples actually stored, after the per-word cap.
    pub kept: usize,
}

/// Immutable triple store: per-head graphs in ranked order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TripleStore {
    graphs: BTreeMap<usize, Vec<KnowledgeTriple>>,
    relations: RelationVocabulary,
    report: IngestReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoreStats {
    pub total_triples: usize,
    pub distinct_heads: usize,
    /// Mean stored triples per head that has any — the "average triples per
    /// query word" figure.
    pub mean_triples_per_head: f64,
}

impl fmt::Display for StoreStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "triples={} heads={} mean_per_head={:.2}",
            self.total_triples, self.distinct_heads, self.mean_triples_per_head
        )
    }
}

impl TripleStore {
    /// Ingest a raw dump, filter, rank, and cap.
    pub fn ingest(
        path: &Path,
        vocab: &Vocabulary,
        pos: &PosLexicon,
    ) -> Result<TripleStore, KnowledgeError> {
        let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
        let mut report = IngestReport::default();
        // head id → (weight, file order, relation name, tail id)
        let mut groups: BTreeMap<usize, Vec<(f64, usize, String, usize)>> = BTreeMap::new();
        for (order, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| io_err(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let weight = match fields.len() {
                3 => 1.0,
                4 => match fields[3].trim().parse::<f64>() {
                    Ok(w) if w.is_finite() => w,
                    _ => {
                        report.malformed_skipped += 1;
                        continue;
                    }
                },
                _ => {
                    report.malformed_skipped += 1;
                    continue;
                }
            };
            report.considered += 1;
            let (head_w, rel, tail_w) = (fields[0].trim(), fields[1].trim(), fields[2].trim());
            let (Some(head), Some(tail)) = (vocab.lookup(head_w), vocab.lookup(tail_w)) else {
                continue;
            };
            if !pos.is_noun_or_verb(head_w) || !pos.is_noun_or_verb(tail_w) {
                continue;
            }
            report.passed_filters += 1;
            groups.entry(head).or_default().push((weight, order, rel.to_string(), tail));
        }

        let mut relations = RelationVocabulary::default();
        let mut graphs: BTreeMap<usize, Vec<KnowledgeTriple>> = BTreeMap::new();
        for (head, mut cands) in groups {
            cands.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            cands.truncate(MAX_TRIPLES_PER_WORD);
            let triples = cands
                .into_iter()
                .map(|(_, _, rel, tail)| KnowledgeTriple {
                    head,
                    relation: relations.intern(&rel),
                    tail,
                })
                .collect::<Vec<_>>();
            report.kept += triples.len();
            graphs.insert(head, triples);
        }
        Ok(TripleStore { graphs, relations, report })
    }

    /// A store with no triples at all; every retrieval yields an empty graph.
    pub fn empty() -> TripleStore {
        TripleStore {
            graphs: BTreeMap::new(),
            relations: RelationVocabulary::default(),
            report: IngestReport::default(),
        }
    }

    /// Programmatic store for small fixtures: `(head, relation name, tail)`
    /// entries, kept in the given per-head order (capped like ingest),
    /// relations interned over heads in ascending id order.
    pub fn from_entries(entries: &[(usize, &str, usize)]) -> TripleStore {
        let mut groups: BTreeMap<usize, Vec<(&str, usize)>> = BTreeMap::new();
        for &(head, rel, tail) in entries {
            groups.entry(head).or_default().push((rel, tail));
        }
        let mut relations = RelationVocabulary::default();
        let mut graphs: BTreeMap<usize, Vec<KnowledgeTriple>> = BTreeMap::new();
        let mut report = IngestReport::default();
        for (head, mut cands) in groups {
            cands.truncate(MAX_TRIPLES_PER_WORD);
            let triples: Vec<KnowledgeTriple> = cands
                .into_iter()
                .map(|(rel, tail)| KnowledgeTriple { head, relation: relations.intern(rel), tail })
                .collect();
            report.considered += triples.len();
            report.passed_filters += triples.len();
            report.kept += triples.len();
            graphs.insert(head, triples);
        }
        TripleStore { graphs, relations, report }
    }

    /// The word's graph; empty when the word has no triples.
    pub fn retrieve(&self, word: usize) -> ConceptGraph {
        match self.graphs.get(&word) {
            Some(triples) => ConceptGraph { query: word, triples: triples.clone() },
            None => ConceptGraph::empty(word),
        }
    }

    pub fn relations(&self) -> &RelationVocabulary {
        &self.relations
    }

    pub fn report(&self) -> &IngestReport {
        &self.report
    }

    pub fn stats(&self) -> StoreStats {
        let total: usize = self.graphs.values().map(Vec::len).sum();
        let heads = self.graphs.len();
        StoreStats {
            total_triples: total,
            distinct_heads: heads,
            mean_triples_per_head: if heads == 0 { 0.0 } else { total as f64 / heads as f64 },
        }
    }

    /// Line-oriented serialization with a version header. Triples are written
    /// in store order (head id ascending, rank order within a head), so a
    /// save → load round-trip is exact.
    pub fn save(&self, path: &Path, vocab: &Vocabulary) -> Result<(), KnowledgeError> {
        let mut f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
        let w = |e| io_err(path, e);
        writeln!(f, "{STORE_HEADER}").map_err(w)?;
        writeln!(f, "relations {}", self.relations.len()).map_err(w)?;
        for id in 0..self.relations.len() {
            writeln!(f, "{id}\t{}", self.relations.name(id)).map_err(w)?;
        }
        let total: usize = self.graphs.values().map(Vec::len).sum();
        writeln!(f, "triples {total}").map_err(w)?;
        for triples in self.graphs.values() {
            for t in triples {
                writeln!(
                    f,
                    "{}\t{}\t{}",
                    vocab.word(t.head),
                    self.relations.name(t.relation),
                    vocab.word(t.tail)
                )
                .map_err(w)?;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path, vocab: &Vocabulary) -> Result<TripleStore, KnowledgeError> {
        let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let mut next = || -> Result<(usize, String), KnowledgeError> {
            match lines.next() {
                Some((n, Ok(l))) => Ok((n + 1, l)),
                Some((_, Err(e))) => Err(io_err(path, e)),
                None => Err(KnowledgeError::BadHeader { path: path.to_path_buf(), expected: STORE_HEADER }),
            }
        };
        let (_, header) = next()?;
        if header != STORE_HEADER {
            return Err(KnowledgeError::BadHeader { path: path.to_path_buf(), expected: STORE_HEADER });
        }
        let bad = |line| KnowledgeError::BadStoreEntry { path: path.to_path_buf(), line };

        let (ln, rel_line) = next()?;
        let nrel: usize = rel_line
            .strip_prefix("relations ")
            .and_then(|s| s.parse().ok())
            .ok_or(bad(ln))?;
        let mut relations = RelationVocabulary::default();
        for _ in 0..nrel {
            let (ln, line) = next()?;
            let (id_s, name) = line.split_once('\t').ok_or(bad(ln))?;
            let id: usize = id_s.parse().map_err(|_| bad(ln))?;
            if relations.intern(name) != id {
                return Err(bad(ln));
            }
        }

        let (ln, triple_line) = next()?;
        let ntriples: usize = triple_line
            .strip_prefix("triples ")
            .and_then(|s| s.parse().ok())
            .ok_or(bad(ln))?;
        let mut graphs: BTreeMap<usize, Vec<KnowledgeTriple>> = BTreeMap::new();
        let mut report = IngestReport::default();
        for _ in 0..ntriples {
            let (ln, line) = next()?;
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(bad(ln));
            }
            let resolve = |w: &str| {
                vocab.lookup(w).ok_or_else(|| KnowledgeError::UnknownWord {
                    path: path.to_path_buf(),
                    line: ln,
                    word: w.to_string(),
                })
            };
            let head = resolve(fields[0])?;
            let tail = resolve(fields[2])?;
            let relation = relations.lookup(fields[1]).ok_or(bad(ln))?;
            graphs.entry(head).or_default().push(KnowledgeTriple { head, relation, tail });
            report.kept += 1;
        }
        report.considered = report.kept;
        report.passed_filters = report.kept;
        Ok(TripleStore { graphs, relations, report })
    }
}

const STORE_HEADER: &str = "triple-store v1";

// ── Tests ───────────────────────────────────────────────────────────────────
