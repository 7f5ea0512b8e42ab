//! The six pipeline commands. Each one echoes the merged configuration,
//! does its work, and finishes with a single machine-readable line:
//! `RESULT <command> key=value ...`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use endgen_core::attn::{export_story, save_export, validate_stochastic};
use endgen_core::corpus::{
    corpus_stats, load_corpus, load_embeddings, Story, Vocabulary, EOS,
};
use endgen_core::decode::{beam_search, greedy_decode, GenerationResult};
use endgen_core::eval::{
    load_annotations, mean_sentence_bleu, perplexity, summarize_annotations, BleuAccumulator,
};
use endgen_core::knowledge::{PosLexicon, TripleStore};
use endgen_core::model::{
    load_checkpoint, save_checkpoint, ModelConfig, ModelParams, Variant,
};
use endgen_core::trainer::{train, TrainConfig};

use crate::config::RunConfig;
use crate::CliError;

// ── Artifact layout ─────────────────────────────────────────────────────────

/// Fixed file names under the working directory.
struct Artifacts {
    vocab: PathBuf,
    store: PathBuf,
    embeddings: PathBuf,
    checkpoint: PathBuf,
    endings: PathBuf,
    attn_dir: PathBuf,
}

impl Artifacts {
    fn new(cfg: &RunConfig) -> Artifacts {
        let dir = PathBuf::from(cfg.str_("workdir"));
        Artifacts {
            vocab: dir.join("vocab.txt"),
            store: dir.join("store.txt"),
            embeddings: dir.join("embeddings.txt"),
            checkpoint: dir.join("model.ckpt"),
            endings: dir.join("endings.tsv"),
            attn_dir: dir.join("attn"),
        }
    }

    fn dir(&self) -> &Path {
        self.vocab.parent().expect("workdir path")
    }
}

fn require_input(path: &Path, what: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} not found: {}", path.display())))
    }
}

fn require_artifact(path: &Path, what: &str, produced_by: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Data(format!(
            "{what} not found at {}; run `endgen {produced_by}` first",
            path.display()
        )))
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    Ok(hex)
}

/// The corpus used by generate/eval/attn: `eval_corpus` when set, else the
/// training corpus.
fn eval_corpus_path(cfg: &RunConfig) -> PathBuf {
    cfg.path("eval_corpus")
        .unwrap_or_else(|| PathBuf::from(cfg.str_("corpus")))
}

// ── Shared loading ──────────────────────────────────────────────────────────

fn load_vocab(arts: &Artifacts) -> Result<Vocabulary, CliError> {
    require_artifact(&arts.vocab, "vocabulary", "preprocess")?;
    Ok(Vocabulary::load(&arts.vocab)?)
}

/// The triple store if present; otherwise an empty store for the plain
/// variant and an error for knowledge variants.
fn load_store(
    arts: &Artifacts,
    vocab: &Vocabulary,
    variant: Variant,
) -> Result<TripleStore, CliError> {
    if arts.store.exists() {
        Ok(TripleStore::load(&arts.store, vocab)?)
    } else if variant.uses_knowledge() {
        Err(CliError::Data(format!(
            "variant {} needs a triple store, but {} does not exist; \
             run `endgen preprocess` with triples= and pos= inputs",
            variant.as_str(),
            arts.store.display()
        )))
    } else {
        Ok(TripleStore::empty())
    }
}

fn load_model(arts: &Artifacts, cfg: &RunConfig) -> Result<ModelParams, CliError> {
    require_artifact(&arts.checkpoint, "checkpoint", "train")?;
    let params = load_checkpoint(&arts.checkpoint)?;
    if cfg.was_set("variant") {
        let asked = cfg.variant()?;
        if asked != params.config.variant {
            return Err(CliError::Data(format!(
                "checkpoint {} was trained as variant {} but the run asks for {}",
                arts.checkpoint.display(),
                params.config.variant.as_str(),
                asked.as_str()
            )));
        }
    }
    Ok(params)
}

fn check_model_matches_vocab(params: &ModelParams, vocab: &Vocabulary) -> Result<(), CliError> {
    if params.config.vocab_size != vocab.len() {
        return Err(CliError::Data(format!(
            "checkpoint expects a vocabulary of {} words but {} are loaded",
            params.config.vocab_size,
            vocab.len()
        )));
    }
    Ok(())
}

fn decode_story(
    params: &ModelParams,
    story: &Story,
    store: &TripleStore,
    beam: usize,
    max_len: usize,
) -> Result<GenerationResult, CliError> {
    let gen = if beam == 1 {
        greedy_decode(params, story, store, max_len)?
    } else {
        beam_search(params, story, store, beam, max_len)?
    };
    if !gen.total_logprob.is_finite() {
        return Err(CliError::Numeric(format!(
            "non-finite generation score on story {}",
            story.id
        )));
    }
    Ok(gen)
}

fn ending_words(gen: &GenerationResult, vocab: &Vocabulary) -> String {
    let mut ids = gen.tokens.clone();
    if ids.last() == Some(&EOS) {
        ids.pop();
    }
    vocab.decode(&ids).join(" ")
}

/// Generated ids with the end marker stripped, for BLEU against references.
fn ending_ids(gen: &GenerationResult) -> Vec<usize> {
    let mut ids = gen.tokens.clone();
    if ids.last() == Some(&EOS) {
        ids.pop();
    }
    ids
}

// ── preprocess ───────────────────────────────────────────────────────────────

pub fn preprocess(cfg: &RunConfig) -> Result<(), CliError> {
    let arts = Artifacts::new(cfg);
    let corpus = PathBuf::from(cfg.str_("corpus"));
    require_input(&corpus, "corpus")?;
    std::fs::create_dir_all(arts.dir())
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", arts.dir().display())))?;

    let vocab = Vocabulary::build_from_corpus(&corpus, cfg.usize_("vocab_cap")?)?;
    let stories = load_corpus(&corpus, &vocab)?;
    vocab.save(&arts.vocab)?;
    let stats = corpus_stats(&stories);
    println!("corpus: {stats}");

    let variant = cfg.variant()?;
    let store = match (cfg.path("triples"), cfg.path("pos")) {
        (Some(triples), Some(pos)) => {
            require_input(&triples, "triples")?;
            require_input(&pos, "pos lexicon")?;
            let lexicon = PosLexicon::load(&pos)?;
            let store = TripleStore::ingest(&triples, &vocab, &lexicon)?;
            let r = store.report();
            println!(
                "ingest: considered={} malformed_skipped={} passed_filters={} kept={}",
                r.considered, r.malformed_skipped, r.passed_filters, r.kept
            );
            store
        }
        _ if variant.uses_knowledge() => {
            return Err(CliError::Usage(format!(
                "variant {} needs both triples= and pos= inputs",
                variant.as_str()
            )));
        }
        _ => {
            println!("no triples provided; writing an empty store");
            TripleStore::empty()
        }
    };
    store.save(&arts.store, &vocab)?;
    let sstats = store.stats();
    println!("store: {sstats}");

    let mut embeddings_found = 0usize;
    if let Some(pretrained) = cfg.path("embeddings") {
        require_input(&pretrained, "embeddings")?;
        let dim = cfg.usize_("word_dim")?;
        let (table, report) =
            load_embeddings(&pretrained, &vocab, dim, cfg.u64_("seed")?)?;
        embeddings_found = report.found;
        println!(
            "embeddings: found={} missing={} malformed_lines={}",
            report.found, report.missing, report.malformed_lines
        );
        let mut out = String::new();
        for id in 0..vocab.len() {
            let _ = write!(out, "{}", vocab.word(id));
            for v in &table.values[id * dim..(id + 1) * dim] {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        write_file(&arts.embeddings, &out)?;
    }

    println!(
        "RESULT preprocess stories={} vocab={} unique_words={} triples={} \
         mean_triples_per_head={} embeddings_found={}",
        stats.num_stories,
        vocab.len(),
        stats.unique_words,
        sstats.total_triples,
        sstats.mean_triples_per_head,
        embeddings_found
    );
    Ok(())
}

// ── train ───────────────────────────────────────────────────────────────────

pub fn cmd_train(cfg: &RunConfig) -> Result<(), CliError> {
    let arts = Artifacts::new(cfg);
    let vocab = load_vocab(&arts)?;
    let variant = cfg.variant()?;
    let store = load_store(&arts, &vocab, variant)?;
    let corpus = PathBuf::from(cfg.str_("corpus"));
    require_input(&corpus, "corpus")?;
    let stories = load_corpus(&corpus, &vocab)?;

    let model_cfg = ModelConfig {
        variant,
        num_layers: cfg.usize_("layers")?,
        hidden_dim: cfg.usize_("hidden_dim")?,
        word_dim: cfg.usize_("word_dim")?,
        context_dim: cfg.usize_("context_dim")?,
        vocab_size: vocab.len(),
        num_relations: store.relations().len().max(1),
        relation_dim: cfg.relation_dim()?,
        gru_hidden: cfg.usize_("gru_hidden")?,
    };
    let seed = cfg.u64_("seed")?;
    let mut params = if arts.embeddings.exists() {
        let dim = model_cfg.word_dim;
        let (table, report) = load_embeddings(&arts.embeddings, &vocab, dim, seed)?;
        if report.found != vocab.len() {
            return Err(CliError::Data(format!(
                "embedding table {} does not cover the vocabulary at width {dim} \
                 (found {} of {} words)",
                arts.embeddings.display(),
                report.found,
                vocab.len()
            )));
        }
        println!("initialized word vectors from {}", arts.embeddings.display());
        ModelParams::init_with_embeddings(model_cfg, seed, table)?
    } else {
        ModelParams::init(model_cfg, seed)?
    };

    let train_cfg = TrainConfig {
        epochs: cfg.usize_("epochs")?,
        batch_size: cfg.usize_("batch_size")?,
        learning_rate: cfg.f64_("learning_rate")?,
        clip_norm: cfg.f64_("clip_norm")?,
        dev_fraction: cfg.f64_("dev_fraction")?,
        eval_every: cfg.usize_("eval_every")?,
        checkpoint_path: Some(arts.checkpoint.clone()),
        seed,
        workers: cfg.usize_("workers")?,
        ..TrainConfig::default()
    };
    let epochs = train_cfg.epochs;
    let report = train(&mut params, &stories, &store, &train_cfg, |ep| {
        let dev = match ep.dev_perplexity {
            Some(p) => format!(" dev_ppl={p:.4}"),
            None => String::new(),
        };
        println!(
            "epoch {}/{} loss={:.4} encoder={:.4} decoder={:.4} nats_per_token={:.4}{dev} ({:.1}s)",
            ep.epoch,
            epochs,
            ep.mean_total,
            ep.mean_encoder,
            ep.mean_decoder,
            ep.decoder_nats_per_token,
            ep.seconds
        );
    })?;

    // The trainer checkpoints at eval points; guarantee the final state is
    // on disk even when the schedule skipped it.
    save_checkpoint(&params, &arts.checkpoint)?;
    let hash = sha256_file(&arts.checkpoint)?;
    let final_ppl = report.final_dev_perplexity;
    println!(
        "RESULT train epochs={} stories={} final_dev_ppl={} checkpoint={} sha256={}",
        report.epochs.len(),
        stories.len(),
        final_ppl,
        arts.checkpoint.display(),
        hash
    );
    Ok(())
}

// ── generate ─────────────────────────────────────────────────────────────────

pub fn generate(cfg: &RunConfig) -> Result<(), CliError> {
    let arts = Artifacts::new(cfg);
    let vocab = load_vocab(&arts)?;
    let params = load_model(&arts, cfg)?;
    check_model_matches_vocab(&params, &vocab)?;
    let store = load_store(&arts, &vocab, params.config.variant)?;
    let corpus = eval_corpus_path(cfg);
    require_input(&corpus, "corpus")?;
    let stories = load_corpus(&corpus, &vocab)?;

    let beam = cfg.usize_("beam")?;
    let max_len = cfg.usize_("max_len")?;
    let mut out = String::new();
    for story in &stories {
        let gen = decode_story(&params, story, &store, beam, max_len)?;
        let _ = writeln!(out, "{}\t{}", story.id, ending_words(&gen, &vocab));
    }
    write_file(&arts.endings, &out)?;
    println!(
        "RESULT generate stories={} beam={beam} max_len={max_len} output={}",
        stories.len(),
        arts.endings.display()
    );
    Ok(())
}

// ── eval ─────────────────────────────────────────────────────────────────────

pub fn eval(cfg: &RunConfig) -> Result<(), CliError> {
    let arts = Artifacts::new(cfg);
    let vocab = load_vocab(&arts)?;
    let params = load_model(&arts, cfg)?;
    check_model_matches_vocab(&params, &vocab)?;
    let store = load_store(&arts, &vocab, params.config.variant)?;
    let corpus = eval_corpus_path(cfg);
    require_input(&corpus, "corpus")?;
    let stories = load_corpus(&corpus, &vocab)?;

    let workers = cfg.usize_("workers")?;
    let ppl = perplexity(&params, &stories, &store, workers)?;
    if !ppl.is_finite() {
        return Err(CliError::Numeric(format!("perplexity is {ppl}")));
    }

    let beam = cfg.usize_("beam")?;
    let max_len = cfg.usize_("max_len")?;
    let pairs: Vec<(Vec<usize>, Vec<usize>)> = stories
        .iter()
        .map(|story| {
            decode_story(&params, story, &store, beam, max_len)
                .map(|gen| (ending_ids(&gen), story.ending.clone()))
        })
        .collect::<Result<_, _>>()?;

    let bleu_mode = cfg.str_("bleu");
    let (bleu1, bleu2) = match bleu_mode {
        "corpus" => {
            let mut acc1 = BleuAccumulator::new(1)?;
            let mut acc2 = BleuAccumulator::new(2)?;
            for (cand, reference) in &pairs {
                acc1.add(cand, reference);
                acc2.add(cand, reference);
            }
            (acc1.score(), acc2.score())
        }
        "sentence" => (
            mean_sentence_bleu(&pairs, 1)?,
            mean_sentence_bleu(&pairs, 2)?,
        ),
        other => {
            return Err(CliError::Usage(format!(
                "key `bleu` must be corpus or sentence, got {other:?}"
            )));
        }
    };

    println!("PPL {ppl}");
    println!("BLEU-1 {bleu1}");
    println!("BLEU-2 {bleu2}");

    if let Some(path) = cfg.path("annotations") {
        require_input(&path, "annotations")?;
        let table = load_annotations(&path)?;
        for summary in summarize_annotations(&table)? {
            let v = &summary.vote_shares;
            let a = &summary.agreement;
            println!(
                "annotation metric={} votes={}/{}/{} unanimous={} majority={} split={} kappa={}",
                summary.metric,
                v[0],
                v[1],
                v[2],
                a.unanimous,
                a.majority,
                a.split,
                summary.kappa
            );
        }
    }

    println!(
        "RESULT eval stories={} ppl={ppl} bleu1={bleu1} bleu2={bleu2} bleu_mode={bleu_mode}",
        pairs.len()
    );
    Ok(())
}

// ── attn ─────────────────────────────────────────────────────────────────────

pub fn attn(cfg: &RunConfig) -> Result<(), CliError> {
    let arts = Artifacts::new(cfg);
    let vocab = load_vocab(&arts)?;
    let params = load_model(&arts, cfg)?;
    check_model_matches_vocab(&params, &vocab)?;
    let store = load_store(&arts, &vocab, params.config.variant)?;
    let corpus = eval_corpus_path(cfg);
    require_input(&corpus, "corpus")?;
    let stories = load_corpus(&corpus, &vocab)?;

    std::fs::create_dir_all(&arts.attn_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", arts.attn_dir.display())))?;
    let max_len = cfg.usize_("max_len")?;
    for story in &stories {
        let (export, gen) = export_story(&params, story, &store, max_len)?;
        if !gen.total_logprob.is_finite() {
            return Err(CliError::Numeric(format!(
                "non-finite generation score on story {}",
                story.id
            )));
        }
        validate_stochastic(&export, 1e-6)
            .map_err(|e| CliError::Numeric(format!("story {}: {e}", story.id)))?;
        save_export(&export, &arts.attn_dir.join(format!("{}.txt", story.id)))?;
    }
    println!(
        "RESULT attn stories={} dir={}",
        stories.len(),
        arts.attn_dir.display()
    );
    Ok(())
}

// ── stats ────────────────────────────────────────────────────────────────────

pub fn stats(cfg: &RunConfig) -> Result<(), CliError> {
    let arts = Artifacts::new(cfg);
    let corpus = PathBuf::from(cfg.str_("corpus"));
    require_input(&corpus, "corpus")?;
    let vocab = if arts.vocab.exists() {
        Vocabulary::load(&arts.vocab)?
    } else {
        Vocabulary::build_from_corpus(&corpus, cfg.usize_("vocab_cap")?)?
    };
    let stories = load_corpus(&corpus, &vocab)?;
    let cstats = corpus_stats(&stories);
    println!("corpus: {cstats}");

    let mut triples = 0usize;
    let mut mean_per_head = 0.0;
    if arts.store.exists() {
        let store = TripleStore::load(&arts.store, &vocab)?;
        let sstats = store.stats();
        println!("store: {sstats}");
        triples = sstats.total_triples;
        mean_per_head = sstats.mean_triples_per_head;
    }
    println!(
        "RESULT stats stories={} unique_words={} vocab={} triples={triples} \
         mean_triples_per_head={mean_per_head}",
        cstats.num_stories,
        cstats.unique_words,
        vocab.len()
    );
    Ok(())
}
