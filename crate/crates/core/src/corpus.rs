//! Story corpus: tokenization, vocabulary, pretrained word vectors, batching.
//!
//! A corpus file holds one story per line: five tab-separated sentences, the
//! first four being context and the fifth the ending. Tokenization lowercases
//! and splits on whitespace after separating terminal punctuation (`.,!?;:`)
//! into tokens of their own — clean story prose needs nothing heavier.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use thiserror::Error;

use crate::rng::stream;
use crate::tensor::Tensor;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
/// Display forms of the reserved ids, in id order.
pub const SPECIAL_TOKENS: [&str; 4] = ["<pad>", "<unk>", "<bos>", "<eos>"];

/// Range for embedding rows of words absent from the pretrained file.
pub const EMBED_INIT_RANGE: f64 = 0.1;

const TERMINAL_PUNCT: &[char] = &['.', ',', '!', '?', ';', ':'];

// ── Errors ──────────────────────────────────────────────────────────────────

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: expected 5 tab-separated sentences, found {found}")]
    MalformedStory { path: PathBuf, line: usize, found: usize },
    #[error("{path}:{line}: story has an empty sentence or ending")]
    EmptySentence { path: PathBuf, line: usize },
    #[error("{path}: corpus contains no tokens")]
    EmptyCorpus { path: PathBuf },
    #[error("{path}:{line}: bad vocabulary entry")]
    BadVocabEntry { path: PathBuf, line: usize },
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io { path: path.to_path_buf(), source }
}

// ── Tokenization ────────────────────────────────────────────────────────────

/// Lowercase, split on whitespace, then peel terminal punctuation off each
/// token into standalone tokens ("cold." → "cold", ".").
pub fn tokenize(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in line.split_whitespace() {
        let lower = raw.to_lowercase();
        let mut core = lower.as_str();
        let mut tail = Vec::new();
        while let Some(last) = core.chars().last() {
            if TERMINAL_PUNCT.contains(&last) && core.chars().count() > 1 {
                core = &core[..core.len() - last.len_utf8()];
                tail.push(last.to_string());
            } else {
                break;
            }
        }
        out.push(core.to_string());
        out.extend(tail.into_iter().rev());
    }
    out
}

// ── Vocabulary ──────────────────────────────────────────────────────────────

/// Word ↔ id map with reserved specials and training frequencies.
///
/// Ids are dense: specials occupy 0..4, then words in decreasing frequency,
/// ties broken lexicographically, capped at `cap` total entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
    freqs: Vec<u64>,
}

impl Vocabulary {
    /// Build from a token stream. `cap` bounds the total size inclusive of
    /// the four specials.
    pub fn build<I, S>(tokens: I, cap: usize) -> Option<Vocabulary>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for t in tokens {
            *counts.entry(t.as_ref().to_string()).or_insert(0) += 1;
        }
        if counts.is_empty() {
            return None;
        }
        let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(cap.saturating_sub(SPECIAL_TOKENS.len()));

        let mut words: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        let mut freqs: Vec<u64> = vec![0; SPECIAL_TOKENS.len()];
        for (w, f) in ranked {
            words.push(w);
            freqs.push(f);
        }
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Some(Vocabulary { words, index, freqs })
    }

    /// Build over every token of every sentence in a corpus file.
    pub fn build_from_corpus(path: &Path, cap: usize) -> Result<Vocabulary, CorpusError> {
        let raw = read_raw_stories(path)?;
        let tokens = raw.iter().flat_map(|s| s.iter().flatten());
        Vocabulary::build(tokens, cap)
            .ok_or_else(|| CorpusError::EmptyCorpus { path: path.to_path_buf() })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Id for a word, `UNK` when absent.
    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    /// Id for a word only when it is truly in the vocabulary.
    pub fn lookup(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn freq(&self, id: usize) -> u64 {
        self.freqs[id]
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<&str> {
        ids.iter().map(|&i| self.word(i)).collect()
    }

    /// Dump as `word \t id \t freq` lines.
    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let mut out = String::new();
        for (i, w) in self.words.iter().enumerate() {
            out.push_str(&format!("{w}\t{i}\t{}\n", self.freqs[i]));
        }
        std::fs::write(path, out).map_err(|e| io_err(path, e))
    }

    pub fn load(path: &Path) -> Result<Vocabulary, CorpusError> {
        let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
        let mut words = Vec::new();
        let mut freqs = Vec::new();
        for (ln, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| io_err(path, e))?;
            if line.is_empty() {
                continue;
            }
            let bad = || CorpusError::BadVocabEntry { path: path.to_path_buf(), line: ln + 1 };
            let mut parts = line.split('\t');
            let word = parts.next().ok_or_else(bad)?;
            let id: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let freq: u64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            if id != words.len() {
                return Err(bad());
            }
            words.push(word.to_string());
            freqs.push(freq);
        }
        for (i, s) in SPECIAL_TOKENS.iter().enumerate() {
            if words.get(i).map(String::as_str) != Some(*s) {
                return Err(CorpusError::BadVocabEntry { path: path.to_path_buf(), line: i + 1 });
            }
        }
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(Vocabulary { words, index, freqs })
    }
}

// ── Stories ─────────────────────────────────────────────────────────────────

/// One story: four encoded context sentences plus the encoded ending, with
/// the raw sentence text retained for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct Story {
    pub id: String,
    pub sentences: [Vec<usize>; 4],
    pub ending: Vec<usize>,
    pub raw: [String; 5],
}

fn read_raw_stories(path: &Path) -> Result<Vec<[Vec<String>; 5]>, CorpusError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (ln, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(CorpusError::MalformedStory {
                path: path.to_path_buf(),
                line: ln + 1,
                found: fields.len(),
            });
        }
        let toks: Vec<Vec<String>> = fields.iter().map(|f| tokenize(f)).collect();
        if toks.iter().any(|t| t.is_empty()) {
            return Err(CorpusError::EmptySentence { path: path.to_path_buf(), line: ln + 1 });
        }
        out.push(toks.try_into().expect("5 fields checked"));
    }
    Ok(out)
}

/// Load and encode a corpus file against a fixed vocabulary.
pub fn load_corpus(path: &Path, vocab: &Vocabulary) -> Result<Vec<Story>, CorpusError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut stories = Vec::new();
    for (ln, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(CorpusError::MalformedStory {
                path: path.to_path_buf(),
                line: ln + 1,
                found: fields.len(),
            });
        }
        let toks: Vec<Vec<String>> = fields.iter().map(|f| tokenize(f)).collect();
        if toks.iter().any(|t| t.is_empty()) {
            return Err(CorpusError::EmptySentence { path: path.to_path_buf(), line: ln + 1 });
        }
        let encoded: Vec<Vec<usize>> = toks.iter().map(|t| vocab.encode(t)).collect();
        let [s1, s2, s3, s4, ending] = <[Vec<usize>; 5]>::try_from(encoded).expect("5 fields");
        stories.push(Story {
            id: format!("story{:05}", stories.len()),
            sentences: [s1, s2, s3, s4],
            ending,
            raw: fields
                .iter()
                .map(|f| f.to_string())
                .collect::<Vec<_>>()
                .try_into()
                .expect("5 fields"),
        });
    }
    Ok(stories)
}

// ── Statistics ──────────────────────────────────────────────────────────────

/// Per-position mean token counts plus the unique-token count of the corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub num_stories: usize,
    /// Mean token counts for X₁..X₄ and the ending, in order.
    pub mean_lengths: [f64; 5],
    pub unique_words: usize,
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.mean_lengths;
        write!(
            f,
            "stories={} mean_len={:.1}/{:.1}/{:.1}/{:.1}/{:.1} unique_words={}",
            self.num_stories, m[0], m[1], m[2], m[3], m[4], self.unique_words
        )
    }
}

pub fn corpus_stats(stories: &[Story]) -> CorpusStats {
    let n = stories.len().max(1) as f64;
    let mut sums = [0usize; 5];
    let mut unique: std::collections::HashSet<String> = std::collections::HashSet::new();
    for s in stories {
        for (i, sent) in s.sentences.iter().enumerate() {
            sums[i] += sent.len();
        }
        sums[4] += s.ending.len();
        for raw in &s.raw {
            unique.extend(tokenize(raw));
        }
    }
    CorpusStats {
        num_stories: stories.len(),
        mean_lengths: sums.map(|s| s as f64 / n),
        unique_words: unique.len(),
    }
}

// ── Batching ────────────────────────────────────────────────────────────────

/// Ids padded to the longest row, with a mask marking real tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedBlock {
    pub ids: Vec<Vec<usize>>,
    pub mask: Vec<Vec<bool>>,
}

impl PaddedBlock {
    fn from_rows(rows: Vec<&[usize]>) -> PaddedBlock {
        let width = rows.iter().map(|r| r.len()).max().unwrap_or(0);
        let ids = rows
            .iter()
            .map(|r| {
                let mut row = r.to_vec();
                row.resize(width, PAD);
                row
            })
            .collect();
        let mask = rows
            .iter()
            .map(|r| (0..width).map(|c| c < r.len()).collect())
            .collect();
        PaddedBlock { ids, mask }
    }
}

/// A shuffled slice of the dataset with padded id matrices per position.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Indices into the dataset this batch was drawn from.
    pub story_indices: Vec<usize>,
    pub sentences: [PaddedBlock; 4],
    pub endings: PaddedBlock,
}

/// Shuffle story order from `seed` and chunk into batches of `batch_size`;
/// the final partial batch is kept. Every story appears exactly once.
pub fn batch_iter(stories: &[Story], batch_size: usize, seed: u64) -> Vec<Batch> {
    assert!(batch_size >= 1, "batch_size must be ≥ 1");
    let mut order: Vec<usize> = (0..stories.len()).collect();
    let mut rng = stream(seed, "corpus/batch-shuffle");
    // Fisher–Yates, fixed traversal for reproducibility.
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    order
        .chunks(batch_size)
        .map(|chunk| {
            let sentences = std::array::from_fn(|pos| {
                PaddedBlock::from_rows(
                    chunk.iter().map(|&i| stories[i].sentences[pos].as_slice()).collect(),
                )
            });
            let endings =
                PaddedBlock::from_rows(chunk.iter().map(|&i| stories[i].ending.as_slice()).collect());
            Batch { story_indices: chunk.to_vec(), sentences, endings }
        })
        .collect()
}

// ── Pretrained embeddings ───────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbedReport {
    pub found: usize,
    pub missing: usize,
    pub malformed_lines: usize,
}

/// Build the `vocab_size × dim` embedding table.
///
/// Every row starts uniform in `[-EMBED_INIT_RANGE, EMBED_INIT_RANGE]` (drawn
/// in id order so the result is independent of file order), then rows for
/// words present in the pretrained file are overwritten with the file vector.
/// Lines whose dimensionality disagrees are skipped and counted.
pub fn load_embeddings(
    path: &Path,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<(Tensor, EmbedReport), CorpusError> {
    let mut rng = stream(seed, "corpus/embed-init");
    let mut table = Tensor::zeros(vec![vocab.len(), dim]);
    for v in table.values.iter_mut() {
        *v = rng.gen_range(-EMBED_INIT_RANGE..=EMBED_INIT_RANGE);
    }

    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut seen = vec![false; vocab.len()];
    let mut report = EmbedReport::default();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else {
            report.malformed_lines += 1;
            continue;
        };
        let vals: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
        let vals = match vals {
            Ok(v) if v.len() == dim => v,
            _ => {
                report.malformed_lines += 1;
                continue;
            }
        };
        if let Some(id) = vocab.lookup(word) {
            table.values[id * dim..(id + 1) * dim].copy_from_slice(&vals);
            if !seen[id] {
                seen[id] = true;
                report.found += 1;
            }
        }
    }
    report.missing = vocab.len() - report.found;
    Ok((table, report))
}

/// Write a corpus file (one story per line, 5 tab-separated sentences).
pub fn write_corpus(path: &Path, rows: &[[String; 5]]) -> Result<(), CorpusError> {
    let mut f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    for row in rows {
        writeln!(f, "{}", row.join("\t")).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

// ── Tests ───────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, content: &str) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn tokenize_separates_terminal_punctuation() {
        assert_eq!(tokenize("It was cold."), vec!["it", "was", "cold", "."]);
        assert_eq!(tokenize("Don't stop!"), vec!["don't", "stop", "!"]);
        assert_eq!(tokenize("well, yes"), vec!["well", ",", "yes"]);
        // A lone punctuation token survives as itself.
        assert_eq!(tokenize(". ."), vec![".", "."]);
        assert_eq!(tokenize("what?!"), vec!["what", "?", "!"]);
    }

    #[test]
    fn vocab_orders_by_frequency_then_word() {
        let v = Vocabulary::build(["a", "a", "b"], 6).unwrap();
        assert_eq!(v.id("a"), 4);
        assert_eq!(v.id("b"), 5);
        assert_eq!(v.len(), 6);

        // Tie at frequency 2: lexicographic order.
        let v = Vocabulary::build(["c", "b", "c", "b", "a"], 8).unwrap();
        assert_eq!(v.id("b"), 4);
        assert_eq!(v.id("c"), 5);
        assert_eq!(v.id("a"), 6);
    }

    #[test]
    fn words_below_the_cap_encode_to_unk() {
        let v = Vocabulary::build(["a", "a", "b"], 5).unwrap();
        assert_eq!(v.id("a"), 4);
        assert_eq!(v.id("b"), UNK);
        assert_eq!(v.id("zzz"), UNK);
        assert_eq!(v.lookup("b"), None);
    }

    #[test]
    fn empty_corpus_is_fatal() {
        assert!(Vocabulary::build(Vec::<String>::new(), 10).is_none());
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "empty.txt", "");
        assert!(matches!(
            Vocabulary::build_from_corpus(&p, 10),
            Err(CorpusError::EmptyCorpus { .. })
        ));
    }

    #[test]
    fn encode_decode_round_trips_in_vocab_tokens() {
        let v = Vocabulary::build(["the", "cat", "sat", "the"], 10).unwrap();
        let ids = v.encode(&["the", "cat", "sat"]);
        assert_eq!(v.decode(&ids), vec!["the", "cat", "sat"]);
    }

    #[test]
    fn vocab_save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let v = Vocabulary::build(["x", "y", "x", "z"], 16).unwrap();
        let p = dir.path().join("vocab.tsv");
        v.save(&p).unwrap();
        let v2 = Vocabulary::load(&p).unwrap();
        assert_eq!(v, v2);
    }

    #[test]
    fn corpus_loader_reports_malformed_lines() {
        let dir = tempfile::tempdir().unwrap();
        let good = "a b\tc d\te f\tg h\ti j";
        let bad = "only\tthree\tfields";
        let p = write_tmp(&dir, "c.tsv", &format!("{good}\n{bad}\n"));
        let v = Vocabulary::build(["a"], 10).unwrap();
        match load_corpus(&p, &v) {
            Err(CorpusError::MalformedStory { line, found, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(found, 3);
            }
            other => panic!("expected malformed-story error, got {other:?}"),
        }
    }

    #[test]
    fn stories_encode_against_the_vocabulary() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "c.tsv", "a b\ta c\tb b\tc a\ta b c\n");
        let v = Vocabulary::build_from_corpus(&p, 100).unwrap();
        let stories = load_corpus(&p, &v).unwrap();
        assert_eq!(stories.len(), 1);
        let s = &stories[0];
        assert_eq!(s.sentences[0], vec![v.id("a"), v.id("b")]);
        assert_eq!(s.ending, vec![v.id("a"), v.id("b"), v.id("c")]);
        assert!(s.ending.iter().all(|&id| id < v.len()));
    }

    #[test]
    fn stats_match_hand_computation() {
        let dir = tempfile::tempdir().unwrap();
        // Story 1 lengths: 2/1/1/2/3 ; story 2 lengths: 4/3/1/2/1.
        let p = write_tmp(
            &dir,
            "c.tsv",
            "a b\tc\td\te f\tg h i\nj k l m\tn o p\tq\tr s\tt\n",
        );
        let v = Vocabulary::build_from_corpus(&p, 100).unwrap();
        let stories = load_corpus(&p, &v).unwrap();
        let stats = corpus_stats(&stories);
        assert_eq!(stats.num_stories, 2);
        assert_eq!(stats.mean_lengths, [3.0, 2.0, 1.0, 2.0, 2.0]);
        assert_eq!(stats.unique_words, 20);

        // A single story's means are its own lengths.
        let solo = corpus_stats(&stories[..1]);
        assert_eq!(solo.mean_lengths, [2.0, 1.0, 1.0, 2.0, 3.0]);
    }

    fn synth_stories(n: usize) -> Vec<Story> {
        (0..n)
            .map(|i| Story {
                id: format!("story{i:05}"),
                sentences: [vec![4], vec![5], vec![6], vec![7, 8]],
                ending: vec![4 + (i % 3)],
                raw: std::array::from_fn(|j| format!("w{i}_{j}")),
            })
            .collect()
    }

    #[test]
    fn batches_partition_the_dataset() {
        let stories = synth_stories(10);
        let batches = batch_iter(&stories, 4, 99);
        let sizes: Vec<usize> = batches.iter().map(|b| b.story_indices.len()).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
        let mut seen: Vec<usize> = batches.iter().flat_map(|b| b.story_indices.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn batch_order_is_a_pure_function_of_seed() {
        let stories = synth_stories(100);
        let a = batch_iter(&stories, 8, 7);
        let b = batch_iter(&stories, 8, 7);
        assert_eq!(a, b);
        let c = batch_iter(&stories, 8, 8);
        assert_ne!(
            a.iter().map(|x| x.story_indices.clone()).collect::<Vec<_>>(),
            c.iter().map(|x| x.story_indices.clone()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn masks_exactly_cover_non_pad_positions() {
        let stories = synth_stories(10);
        for batch in batch_iter(&stories, 4, 3) {
            for block in batch.sentences.iter().chain([&batch.endings]) {
                for (row, mask) in block.ids.iter().zip(&block.mask) {
                    assert_eq!(row.len(), mask.len());
                    for (&id, &m) in row.iter().zip(mask) {
                        assert_eq!(m, id != PAD, "mask must mark exactly the real tokens");
                    }
                }
            }
        }
    }

    #[test]
    fn embeddings_copy_found_rows_and_bound_missing_ones() {
        let dir = tempfile::tempdir().unwrap();
        let v = Vocabulary::build(["cat", "dog", "emu"], 10).unwrap();
        let p = write_tmp(
            &dir,
            "vec.txt",
            "cat 0.5 -0.25 1.0\ndog 1.5 2.5 3.5\nbadline 1.0\nzebra 9.0 9.0 9.0\n",
        );
        let (table, report) = load_embeddings(&p, &v, 3, 42).unwrap();
        assert_eq!(report.found, 2);
        assert_eq!(report.malformed_lines, 1);
        assert_eq!(report.missing, v.len() - 2);
        let cat = v.id("cat");
        assert_eq!(&table.values[cat * 3..cat * 3 + 3], &[0.5, -0.25, 1.0]);
        let emu = v.id("emu");
        assert!(table.values[emu * 3..emu * 3 + 3].iter().all(|x| x.abs() <= EMBED_INIT_RANGE));
    }

    #[test]
    fn embedding_init_is_independent_of_file_order() {
        let dir = tempfile::tempdir().unwrap();
        let v = Vocabulary::build(["cat", "dog", "emu"], 10).unwrap();
        let p1 = write_tmp(&dir, "a.txt", "cat 1 2 3\ndog 4 5 6\n");
        let p2 = write_tmp(&dir, "b.txt", "dog 4 5 6\ncat 1 2 3\n");
        let (t1, _) = load_embeddings(&p1, &v, 3, 7).unwrap();
        let (t2, _) = load_embeddings(&p2, &v, 3, 7).unwrap();
        assert_eq!(t1.values, t2.values);
    }
}
