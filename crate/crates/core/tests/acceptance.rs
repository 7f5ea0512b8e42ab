//! Acceptance gate: nine criteria, one test each, printed as one pass line
//! per criterion. Together they cover gradient correctness, small-corpus
//! overfitting, attention invariants, formula and metric oracles, the
//! knowledge-pipeline rules, encoder/decoder parameter sharing, bitwise
//! determinism, and the stated limits of a desk-scale run.

mod common;

use std::time::Instant;

use common::*;
use endgen_core::attn::{export_story, validate_stochastic};
use endgen_core::corpus::{corpus_stats, load_corpus, Story, Vocabulary, BOS, EOS};
use endgen_core::decode::{beam_search, greedy_decode, GenerationResult};
use endgen_core::eval::{bleu_n, fleiss_kappa, perplexity};
use endgen_core::gradcheck::{central_diff, worst_rel_err};
use endgen_core::knowledge::{
    ConceptGraph, KnowledgeTriple, PosLexicon, TripleStore, MAX_TRIPLES_PER_WORD,
};
use endgen_core::model::{
    decode_step, encode_trace, knowledge_context, loss, loss_on_tape, msa_context,
    save_checkpoint, state_context, DecoderState, ModelConfig, ModelParams, Variant,
};
use endgen_core::rng::stream;
use endgen_core::tensor::{Tape, Tensor};
use endgen_core::trainer::{train, TrainConfig};
use rand::Rng;

fn col(values: &[f64]) -> Tensor {
    Tensor::new(vec![values.len(), 1], values.to_vec()).unwrap()
}

fn rand_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-0.9..=0.9)).collect()
}

fn rand_mat(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::new(vec![rows, cols], rand_vec(rng, rows * cols)).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ── Criterion 1: every gradient matches finite differences ─────────────────

#[test]
fn c1_every_gradient_matches_finite_differences() {
    let started = Instant::now();
    let store = TripleStore::from_entries(&[
        (4, "r0", 5),
        (4, "r1", 6),
        (7, "r0", 8),
        (9, "r2", 10),
        (9, "r1", 4),
        (12, "r0", 12),
    ]);
    let story = Story {
        id: "gradcheck".to_string(),
        sentences: [vec![4, 7], vec![9, 11], vec![12, 5], vec![6, 9]],
        ending: vec![7, 12],
        raw: std::array::from_fn(|_| String::new()),
    };

    for variant in [Variant::IeGa, Variant::IeCa] {
        let config = ModelConfig {
            variant,
            num_layers: 2,
            hidden_dim: 8,
            word_dim: 6,
            context_dim: 6,
            vocab_size: 20,
            num_relations: 3,
            relation_dim: if variant == Variant::IeCa { 6 } else { 4 },
            gru_hidden: 4,
        };
        let params = ModelParams::init(config, 41).unwrap();

        // Analytic gradients: one tape pass.
        let mut tape = Tape::new();
        let vars = params.register(&mut tape);
        let lv = loss_on_tape(&mut tape, &vars, &story, &store).unwrap();
        tape.backward(lv.total).unwrap();
        let analytic: Vec<(String, Vec<f64>)> = vars
            .named()
            .into_iter()
            .map(|(n, v)| (n, tape.grad_or_zeros(v)))
            .collect();

        // Numeric gradients: central differences, one tensor at a time.
        let mut checked = 0usize;
        for (name, grad) in &analytic {
            let at = params
                .named()
                .into_iter()
                .find(|(n, _)| n == name)
                .unwrap()
                .1
                .values
                .clone();
            let numeric = central_diff(
                |xs| {
                    let mut p = params.clone();
                    p.named_mut()
                        .into_iter()
                        .find(|(n, _)| n == name)
                        .unwrap()
                        .1
                        .values
                        .copy_from_slice(xs);
                    loss(&p, &story, &store).unwrap().total
                },
                &at,
                1e-5,
            );
            let (idx, err) = worst_rel_err(grad, &numeric, 1e-7);
            assert!(
                err < 1e-4,
                "{variant:?} {name}[{idx}]: rel err {err:.3e} (analytic {}, numeric {})",
                grad[idx],
                numeric[idx]
            );
            checked += grad.len();
        }
        println!("  {variant:?}: {checked} coordinates checked");
    }

    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "gradient check took {elapsed:.1}s (limit 60s)");
    pass(1, &format!(
        "all parameter gradients match central differences (rel err < 1e-4) in {elapsed:.1}s"
    ));
}

// ── Criterion 2: overfit a 32-story synthetic corpus ───────────────────────

#[test]
fn c2_overfits_a_32_story_synthetic_corpus() {
    let started = Instant::now();
    let (stories, vocab_size) = overfit_corpus(32);
    let store = TripleStore::empty();
    let config = ModelConfig {
        variant: Variant::Ie,
        num_layers: 2,
        hidden_dim: 64,
        word_dim: 16,
        context_dim: 16,
        vocab_size,
        num_relations: 1,
        relation_dim: 1,
        gru_hidden: 1,
    };
    let mut params = ModelParams::init(config, 7).unwrap();
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 2,
        learning_rate: 5e-3,
        dev_fraction: 0.0,
        eval_every: 200,
        seed: 7,
        workers: 1,
        ..TrainConfig::default()
    };
    train(&mut params, &stories, &store, &cfg, |_| {}).unwrap();

    let ppl = perplexity(&params, &stories, &store, 1).unwrap();
    let nats_per_token = ppl.ln();
    assert!(
        nats_per_token < 0.1,
        "ending loss {nats_per_token:.4} nats/token (limit 0.1)"
    );
    assert!(ppl < 1.2, "perplexity {ppl:.4} (limit 1.2)");

    let mut verbatim = 0usize;
    for story in &stories {
        let gen = greedy_decode(&params, story, &store, 10).unwrap();
        let mut tokens = gen.tokens.clone();
        if tokens.last() == Some(&EOS) {
            tokens.pop();
        }
        if tokens == story.ending {
            verbatim += 1;
        }
    }
    assert!(
        verbatim * 10 >= stories.len() * 9,
        "only {verbatim}/{} endings reproduced verbatim (need ≥ 90%)",
        stories.len()
    );

    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 600.0, "overfit run took {elapsed:.1}s (limit 600s)");
    pass(2, &format!(
        "200 epochs: {nats_per_token:.4} nats/token, perplexity {ppl:.4}, \
         {verbatim}/32 verbatim endings in {elapsed:.1}s"
    ));
}

// ── Criterion 3: exported attention rows are stochastic ─────────────────────

#[test]
fn c3_every_exported_attention_row_is_stochastic() {
    let store = TripleStore::from_entries(&[
        (4, "near", 5),
        (4, "kind-of", 6),
        (5, "near", 7),
        (8, "part-of", 9),
        (10, "near", 4),
        (10, "part-of", 11),
        (10, "kind-of", 12),
    ]);
    let mut rng = stream(2024, "acceptance/attention-stories");
    let mut triple_rows = 0usize;
    for variant in [Variant::IeGa, Variant::IeCa] {
        let config = oracle_config(variant);
        let params = ModelParams::init(config, 11).unwrap();
        for i in 0..100 {
            let story = random_story(&mut rng, config.vocab_size, 5, i);
            let (export, _) = export_story(&params, &story, &store, 8).unwrap();
            validate_stochastic(&export, 1e-6)
                .unwrap_or_else(|e| panic!("{variant:?} {}: {e}", story.id));
            triple_rows += export.triples.len();
        }
    }
    assert!(triple_rows > 0, "no triple-attention rows were exercised");
    pass(3, &format!(
        "100 random stories × 2 knowledge variants: every state, knowledge, \
         and triple attention row sums to 1 ± 1e-6 ({triple_rows} triple rows)"
    ));
}

// ── Criterion 4: formula oracles ────────────────────────────────────────────

#[test]
fn c4_attention_formulas_match_brute_force_oracles() {
    const TOL: f64 = 1e-10;
    const INSTANCES: usize = 50;

    // Graph-attention vectors.
    let mut rng = stream(4100, "acceptance/oracle-ga");
    for i in 0..INSTANCES {
        let config = oracle_config(Variant::IeGa);
        let mut params = ModelParams::init(config, i as u64).unwrap();
        randomize_params(&mut params, 0.9, &mut rng);
        let query = rng.gen_range(4..config.vocab_size);
        let n_triples = if i % 5 == 0 { 0 } else { rng.gen_range(1..=4) };
        let triples: Vec<(usize, usize, usize)> = (0..n_triples)
            .map(|_| {
                (
                    query,
                    rng.gen_range(0..config.num_relations),
                    rng.gen_range(4..config.vocab_size),
                )
            })
            .collect();
        let graph = ConceptGraph {
            query,
            triples: triples
                .iter()
                .map(|&(head, relation, tail)| KnowledgeTriple { head, relation, tail })
                .collect(),
        };

        let mut tape = Tape::new();
        let vars = params.register(&mut tape);
        let out = vars.graph_vector_ga(&mut tape, &graph).unwrap();
        let got_vec = tape.value(out.vector).to_vec();
        let got_wts = out.triple_weights.map(|w| tape.value(w).to_vec());

        let (want_vec, want_wts) = graph_ga_oracle(&params, &triples, query);
        assert!(max_abs_diff(&got_vec, &want_vec) < TOL, "GA vector, instance {i}");
        match (got_wts, want_wts) {
            (Some(g), Some(w)) => {
                assert!(max_abs_diff(&g, &w) < TOL, "GA weights, instance {i}")
            }
            (None, None) => {}
            other => panic!("GA weight presence mismatch: {other:?}"),
        }
    }

    // Contextual-attention vectors.
    let mut rng = stream(4200, "acceptance/oracle-ca");
    for i in 0..INSTANCES {
        let config = oracle_config(Variant::IeCa);
        let mut params = ModelParams::init(config, 1000 + i as u64).unwrap();
        randomize_params(&mut params, 0.9, &mut rng);
        let query = rng.gen_range(4..config.vocab_size);
        let n_triples = if i % 5 == 0 { 0 } else { rng.gen_range(1..=4) };
        let triples: Vec<(usize, usize, usize)> = (0..n_triples)
            .map(|_| {
                (
                    query,
                    rng.gen_range(0..config.num_relations),
                    rng.gen_range(4..config.vocab_size),
                )
            })
            .collect();
        let graph = ConceptGraph {
            query,
            triples: triples
                .iter()
                .map(|&(head, relation, tail)| KnowledgeTriple { head, relation, tail })
                .collect(),
        };
        let hidden = rand_vec(&mut rng, config.hidden_dim);

        let mut tape = Tape::new();
        let vars = params.register(&mut tape);
        let q = tape.leaf(&col(&hidden));
        let out = vars.graph_vector_ca(&mut tape, &graph, q).unwrap();
        let got_vec = tape.value(out.vector).to_vec();
        let got_wts = out.triple_weights.map(|w| tape.value(w).to_vec());

        let (want_vec, want_wts) = graph_ca_oracle(&params, &triples, query, &hidden);
        assert!(max_abs_diff(&got_vec, &want_vec) < TOL, "CA vector, instance {i}");
        match (got_wts, want_wts) {
            (Some(g), Some(w)) => {
                assert!(max_abs_diff(&g, &w) < TOL, "CA weights, instance {i}")
            }
            (None, None) => {}
            other => panic!("CA weight presence mismatch: {other:?}"),
        }
    }

    // State-context and knowledge-context attention (bilinear scoring).
    let mut rng = stream(4300, "acceptance/oracle-context");
    for i in 0..INSTANCES {
        let h_dim = rng.gen_range(2..=6);
        let k_dim = rng.gen_range(2..=6);
        let n_keys = rng.gen_range(1..=5);
        let query = rand_vec(&mut rng, h_dim);
        let keys: Vec<Vec<f64>> = (0..n_keys).map(|_| rand_vec(&mut rng, k_dim)).collect();
        let w_state = rand_mat(&mut rng, h_dim, h_dim);
        let w_knowledge = rand_mat(&mut rng, h_dim, k_dim);
        let state_keys: Vec<Vec<f64>> =
            (0..n_keys).map(|_| rand_vec(&mut rng, h_dim)).collect();

        let mut tape = Tape::new();
        let q = tape.leaf(&col(&query));
        let sk: Vec<_> = state_keys.iter().map(|k| tape.leaf(&col(k))).collect();
        let ws = tape.leaf(&w_state);
        let out = state_context(&mut tape, q, &sk, ws, &vec![true; n_keys]).unwrap();
        let (want_ctx, want_wts) = bilinear_attn_oracle(&query, &state_keys, &w_state);
        assert!(
            max_abs_diff(tape.value(out.context), &want_ctx) < TOL,
            "state context, instance {i}"
        );
        assert!(
            max_abs_diff(tape.value(out.weights), &want_wts) < TOL,
            "state weights, instance {i}"
        );

        let kk: Vec<_> = keys.iter().map(|k| tape.leaf(&col(k))).collect();
        let wk = tape.leaf(&w_knowledge);
        let out = knowledge_context(&mut tape, q, &kk, wk, &vec![true; n_keys]).unwrap();
        let (want_ctx, want_wts) = bilinear_attn_oracle(&query, &keys, &w_knowledge);
        assert!(
            max_abs_diff(tape.value(out.context), &want_ctx) < TOL,
            "knowledge context, instance {i}"
        );
        assert!(
            max_abs_diff(tape.value(out.weights), &want_wts) < TOL,
            "knowledge weights, instance {i}"
        );
    }

    // Fused context projection.
    let mut rng = stream(4400, "acceptance/oracle-msa");
    for i in 0..INSTANCES {
        let h_dim = rng.gen_range(2..=6);
        let g_dim = rng.gen_range(2..=6);
        let c_dim = rng.gen_range(2..=6);
        let with_knowledge = i % 2 == 0;
        let c_h = rand_vec(&mut rng, h_dim);
        let c_x = rand_vec(&mut rng, g_dim);
        let in_dim = if with_knowledge { h_dim + g_dim } else { h_dim };
        let w = rand_mat(&mut rng, c_dim, in_dim);
        let b = col(&rand_vec(&mut rng, c_dim));

        let mut tape = Tape::new();
        let vh = tape.leaf(&col(&c_h));
        let vx = tape.leaf(&col(&c_x));
        let vw = tape.leaf(&w);
        let vb = tape.leaf(&b);
        let got = msa_context(
            &mut tape,
            vh,
            with_knowledge.then_some(vx),
            vw,
            vb,
        )
        .unwrap();
        let want = msa_oracle(&c_h, with_knowledge.then_some(c_x.as_slice()), &w, &b);
        assert!(
            max_abs_diff(tape.value(got), &want) < TOL,
            "fused context, instance {i}"
        );
    }

    pass(4, &format!(
        "graph vectors (both flavors), state/knowledge attention, and fused \
         context match brute-force oracles on {INSTANCES} instances each \
         (abs err < 1e-10)"
    ));
}

// ── Criterion 5: metric oracles ─────────────────────────────────────────────

#[test]
fn c5_metrics_match_hand_computed_oracles() {
    // BLEU: identical candidate and reference.
    let x = vec![10usize, 11, 12, 13];
    assert_eq!(bleu_n(&x, &x, 1).unwrap(), 1.0);
    assert_eq!(bleu_n(&x, &x, 2).unwrap(), 1.0);

    // BLEU-1 of "the cat sat" against "the cat ran": 2 of 3 unigrams match.
    let sat = vec![10usize, 11, 12];
    let ran = vec![10usize, 11, 13];
    let b1 = bleu_n(&sat, &ran, 1).unwrap();
    assert!((b1 - 2.0 / 3.0).abs() <= 1e-12, "{b1}");

    // BLEU-2 with zero bigram overlap.
    let disjoint_bigrams = vec![11usize, 10, 14];
    let b2 = bleu_n(&sat, &disjoint_bigrams, 2).unwrap();
    assert_eq!(b2, 0.0);

    // A constant-output model is exactly chance: perplexity = vocabulary
    // size (up to the 1e-12 smoothing guard inside the log).
    let config = ModelConfig {
        variant: Variant::Ie,
        num_layers: 2,
        hidden_dim: 4,
        word_dim: 3,
        context_dim: 3,
        vocab_size: 20,
        num_relations: 1,
        relation_dim: 1,
        gru_hidden: 1,
    };
    let mut params = ModelParams::init(config, 5).unwrap();
    params.output_proj.values.fill(0.0);
    params.output_bias.values.fill(0.0);
    let mut rng = stream(55, "acceptance/uniform-ppl");
    let stories: Vec<Story> = (0..4).map(|i| random_story(&mut rng, 20, 4, i)).collect();
    let ppl = perplexity(&params, &stories, &TripleStore::empty(), 1).unwrap();
    assert!(
        (ppl - 20.0).abs() < 1e-8,
        "uniform perplexity {ppl} differs from vocab size 20"
    );

    // Fleiss' kappa: perfect agreement.
    let unanimous = vec![vec![3usize, 0, 0], vec![0, 3, 0], vec![3, 0, 0]];
    assert_eq!(fleiss_kappa(&unanimous).unwrap(), 1.0);

    // Hand-computed 4-item, 3-category table: per-item agreements
    // 1, 1, 0, 1/3 → mean 7/12; column shares 6/12, 5/12, 1/12 →
    // chance 62/144; kappa = (7/12 − 62/144)/(1 − 62/144) = 11/41.
    let table = vec![vec![3usize, 0, 0], vec![0, 3, 0], vec![1, 1, 1], vec![2, 1, 0]];
    let k = fleiss_kappa(&table).unwrap();
    assert!((k - 11.0 / 41.0).abs() <= 1e-12, "{k}");

    pass(5, "BLEU hand cases, uniform-model perplexity, and Fleiss' kappa \
             all match hand-computed values");
}

// ── Criterion 6: knowledge-pipeline rules ───────────────────────────────────

#[test]
fn c6_triple_ingest_enforces_filters_and_cap() {
    let dir = tempfile::tempdir().unwrap();

    // Vocabulary drawn from a pretend corpus; "zebra" and "quux" are absent.
    let vocab_words = [
        "dog", "animal", "run", "blue", "park", "food", "walk", "sleep", "bone", "tail",
        "cat", "bird", "tree", "water",
    ];
    let vocab = Vocabulary::build(vocab_words.iter().copied(), 100).unwrap();

    let mut pos = PosLexicon::default();
    for w in ["dog", "animal", "park", "food", "bone", "tail", "cat", "bird", "tree", "water"] {
        pos.insert(w, true, false);
    }
    for w in ["run", "walk", "sleep"] {
        pos.insert(w, false, true);
    }
    pos.insert("blue", false, false); // adjective: filtered out as endpoint

    // 14 candidate triples for "run" with distinct weights, so the cap has
    // to pick exactly the 10 heaviest.
    let mut lines = vec![
        "dog\tIsA\tanimal".to_string(),          // kept
        "zebra\tIsA\tanimal".to_string(),        // head not in vocabulary
        "dog\tIsA\tquux".to_string(),            // tail not in vocabulary
        "blue\tRelatedTo\tdog".to_string(),      // head not noun/verb
        "dog\tRelatedTo\tblue".to_string(),      // tail not noun/verb
        "one\ttwo".to_string(),                  // malformed: 2 fields
        "dog\tIsA\tanimal\tnot-a-number".to_string(), // malformed weight
    ];
    let run_tails = [
        "park", "food", "walk", "sleep", "bone", "tail", "cat", "bird", "tree", "water",
        "dog", "animal",
    ];
    for (j, tail) in run_tails.iter().enumerate() {
        lines.push(format!("run\tRelatedTo\t{tail}\t{}", j + 1));
    }
    // Two more "run" rows without weights (default weight 1.0, the lightest).
    lines.push("run\tHasA\tdog".to_string());
    lines.push("run\tHasA\tcat".to_string());

    let path = dir.path().join("triples.tsv");
    std::fs::write(&path, lines.join("\n")).unwrap();

    let store = TripleStore::ingest(&path, &vocab, &pos).unwrap();
    let report = store.report();
    // 21 well-formed data lines: 7 header block lines minus the two
    // malformed ones gives 5, plus 12 weighted and 2 unweighted "run" rows.
    assert_eq!(report.considered, 19);
    assert_eq!(report.malformed_skipped, 2);
    // Filters drop the zebra/quux/blue rows, keeping dog→animal + 14 "run" rows.
    assert_eq!(report.passed_filters, 15);
    // The cap truncates "run" from 14 to 10.
    assert_eq!(report.kept, 11);

    let run_id = vocab.lookup("run").unwrap();
    let graph = store.retrieve(run_id);
    assert_eq!(graph.triples.len(), MAX_TRIPLES_PER_WORD);
    // The 10 heaviest candidates are the weighted rows 3..12 (weights 3..=12),
    // i.e. every weighted tail except the two lightest, in descending order.
    let kept_tails: Vec<usize> =
        graph.triples.iter().map(|t| t.tail).collect();
    let want_tails: Vec<usize> = run_tails[2..]
        .iter()
        .rev()
        .map(|w| vocab.lookup(w).unwrap())
        .collect();
    assert_eq!(kept_tails, want_tails);

    // Every stored head equals its query, across the whole vocabulary.
    for id in 0..vocab.len() {
        let g = store.retrieve(id);
        assert_eq!(g.query, id);
        assert!(g.triples.iter().all(|t| t.head == id));
    }

    pass(6, "ingest enforces the noun/verb and vocabulary filters and the \
             10-triple cap exactly; every stored head equals its query");
}

// ── Criterion 7: encoder and decoder share the LSTM parameters ──────────────

#[test]
fn c7_shared_lstm_drives_encoder_and_decoder() {
    let config = oracle_config(Variant::IeGa);
    let params = ModelParams::init(config, 23).unwrap();
    let store = TripleStore::from_entries(&[(4, "near", 5), (6, "near", 7)]);
    let mut rng = stream(23, "acceptance/sharing");
    let story = random_story(&mut rng, config.vocab_size, 4, 0);

    let base_trace = encode_trace(&params, &story, &store).unwrap();
    let base_state = DecoderState::from_trace(&base_trace);
    let base_step = decode_step(&params, &base_state, BOS, &base_trace).unwrap();

    // Perturb one shared LSTM weight — a single tensor in a single object.
    let mut perturbed = params.clone();
    perturbed.lstm.layers[0].cell.w.values[0] += 0.25;

    let new_trace = encode_trace(&perturbed, &story, &store).unwrap();
    let enc_diff = max_abs_diff(
        &base_trace.sentence_hiddens[3].last().unwrap().clone(),
        &new_trace.sentence_hiddens[3].last().unwrap().clone(),
    );
    assert!(enc_diff > 0.0, "encoder ignored the shared LSTM perturbation");

    // Same (unperturbed) encoding on both sides: any change in the decoder
    // distribution can only come from the shared weights.
    let new_step = decode_step(&perturbed, &base_state, BOS, &base_trace).unwrap();
    let dec_diff = max_abs_diff(&base_step.distribution, &new_step.distribution);
    assert!(dec_diff > 0.0, "decoder ignored the shared LSTM perturbation");

    pass(7, &format!(
        "one perturbed LSTM weight moved the encoder (Δ={enc_diff:.2e}) and \
         the decoder (Δ={dec_diff:.2e}) — a single shared parameter object"
    ));
}

// ── Criterion 8: bitwise determinism ────────────────────────────────────────

#[test]
fn c8_identical_seeds_give_bit_identical_checkpoints_and_generations() {
    fn one_run() -> (Vec<u8>, Vec<GenerationResult>, Vec<GenerationResult>) {
        let config = ModelConfig {
            variant: Variant::IeGa,
            num_layers: 2,
            hidden_dim: 6,
            word_dim: 4,
            context_dim: 4,
            vocab_size: 18,
            num_relations: 2,
            relation_dim: 3,
            gru_hidden: 2,
        };
        let store = TripleStore::from_entries(&[
            (4, "near", 5),
            (6, "kind-of", 7),
            (8, "near", 9),
        ]);
        let mut rng = stream(88, "acceptance/determinism-stories");
        let stories: Vec<Story> =
            (0..6).map(|i| random_story(&mut rng, 18, 4, i)).collect();

        let mut params = ModelParams::init(config, 7).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 2,
            learning_rate: 1e-3,
            dev_fraction: 0.0,
            eval_every: 3,
            seed: 7,
            workers: 1,
            ..TrainConfig::default()
        };
        train(&mut params, &stories, &store, &cfg, |_| {}).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&params, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        let greedy: Vec<GenerationResult> = stories
            .iter()
            .take(3)
            .map(|s| greedy_decode(&params, s, &store, 8).unwrap())
            .collect();
        let beam: Vec<GenerationResult> = stories
            .iter()
            .take(3)
            .map(|s| beam_search(&params, s, &store, 3, 8).unwrap())
            .collect();
        (bytes, greedy, beam)
    }

    let (bytes_a, greedy_a, beam_a) = one_run();
    let (bytes_b, greedy_b, beam_b) = one_run();

    assert_eq!(bytes_a, bytes_b, "checkpoint bytes differ between runs");
    let logprob_bits = |rs: &[GenerationResult]| -> Vec<u64> {
        rs.iter()
            .flat_map(|r| r.step_logprobs.iter().map(|x| x.to_bits()))
            .collect()
    };
    assert_eq!(greedy_a, greedy_b);
    assert_eq!(beam_a, beam_b);
    assert_eq!(logprob_bits(&greedy_a), logprob_bits(&greedy_b));
    assert_eq!(logprob_bits(&beam_a), logprob_bits(&beam_b));

    pass(8, &format!(
        "two cold runs with one seed: {} identical checkpoint bytes, \
         identical greedy and beam generations to the bit",
        bytes_a.len()
    ));
}

// ── Criterion 9: desk-scale limits, stated; real-data stats when mounted ────

#[test]
fn c9_full_scale_results_are_out_of_scope_and_said_so() {
    println!(
        "STATEMENT: the published reference figures this design is drawn from — \
         ending perplexity 8.79, BLEU-1 0.2682, BLEU-2 0.0936, and the reported \
         human-evaluation score distributions — were produced with a 90,000-story \
         training corpus, a complete commonsense knowledge base, optimizer \
         settings that were never published, and paid human annotators. None of \
         those inputs exist at desk scale, so this artifact does not attempt to \
         reproduce those absolute numbers; it validates the mechanisms through \
         the eight criteria above instead."
    );

    match std::env::var("ENDGEN_REAL_CORPUS") {
        Ok(path) => {
            let path = std::path::PathBuf::from(path);
            let vocab = Vocabulary::build_from_corpus(&path, usize::MAX).unwrap();
            let stories = load_corpus(&path, &vocab).unwrap();
            let stats = corpus_stats(&stories);
            let want_means = [8.9, 9.9, 10.1, 10.0, 10.5];
            for (got, want) in stats.mean_lengths.iter().zip(want_means) {
                assert!(
                    (got - want).abs() < 0.05,
                    "mean sentence length {got:.2} differs from published {want}"
                );
            }
            assert_eq!(stats.unique_words, 43_095, "unique-word count mismatch");
            println!("real corpus statistics verified: {stats}");

            if let (Ok(triples), Ok(pos_path)) = (
                std::env::var("ENDGEN_REAL_TRIPLES"),
                std::env::var("ENDGEN_REAL_POS"),
            ) {
                let pos = PosLexicon::load(std::path::Path::new(&pos_path)).unwrap();
                let store =
                    TripleStore::ingest(std::path::Path::new(&triples), &vocab, &pos).unwrap();
                let mean = store.stats().mean_triples_per_head;
                assert!(
                    (mean - 3.4).abs() < 0.1,
                    "mean triples per word {mean:.2} differs from published ≈3.4"
                );
                println!("real triple statistics verified: mean {mean:.2} per word");
            }
        }
        Err(_) => {
            println!(
                "real corpus not mounted (set ENDGEN_REAL_CORPUS, and optionally \
                 ENDGEN_REAL_TRIPLES + ENDGEN_REAL_POS, to run the data-pipeline \
                 statistics checks)"
            );
        }
    }

    pass(9, "desk-scale limits stated explicitly; published-corpus statistics \
             checked only when a real corpus is mounted");
}
