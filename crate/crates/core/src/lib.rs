//! Story-ending generation with an incremental encoder and multi-source
//! attention.
//!
//! The crate is layered bottom-up:
//!
//! * [`tensor`] — reverse-mode autodiff on flat `f64` buffers (tape based).
//! * [`gradcheck`] — finite-difference utilities used to validate gradients.
//! * [`nn`] — LSTM stack, GRU/BiGRU, embeddings, linear maps.
//! * [`corpus`] — tokenization, vocabulary, story corpus, pretrained vectors.
//! * [`knowledge`] — commonsense triple store keyed by story words.
//! * [`model`] — the encoder/decoder with state + knowledge attention.
//! * [`trainer`] — Adam, gradient clipping, checkpoints.
//! * [`decode`] — greedy and beam-search ending generation.
//! * [`eval`] — perplexity, BLEU, annotation aggregation (majority vote,
//!   agreement, Fleiss' kappa).
//! * [`attn`] — attention-weight export for inspection.
//!
//! All randomness in the crate flows from a single `u64` seed; every
//! stochastic site derives its own stream via [`rng::subseed`].

pub mod attn;
pub mod corpus;
pub mod decode;
pub mod eval;
pub mod gradcheck;
pub mod knowledge;
pub mod model;
pub mod nn;
pub mod rng;
pub mod tensor;
pub mod trainer;
