//! Optimization: Adam with global-norm gradient clipping over per-story
//! backward passes, a deterministic dev split for perplexity monitoring,
//! and periodic checkpoints.

use std::path::PathBuf;
use std::time::Instant;

use thiserror::Error;

use crate::corpus::Story;
use crate::eval::{self, EvalError};
use crate::knowledge::TripleStore;
use crate::model::{
    loss_on_tape, save_checkpoint, CheckpointError, ModelError, ModelParams,
};
use crate::rng::{stream, subseed};
use crate::tensor::Tape;

use rand::seq::SliceRandom;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("non-finite loss at epoch {epoch}, batch {batch} (story {story})")]
    NonFiniteLoss { epoch: usize, batch: usize, story: String },
    #[error("train config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub clip_norm: f64,
    /// Fraction of stories held out for perplexity monitoring; a split that
    /// rounds down to zero stories monitors on the training set instead.
    pub dev_fraction: f64,
    /// Run the dev pass (and write a checkpoint, when a path is set) every
    /// this many epochs; the final epoch always gets both.
    pub eval_every: usize,
    pub checkpoint_path: Option<PathBuf>,
    pub seed: u64,
    /// Worker threads for the dev perplexity pass.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 8,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            clip_norm: 5.0,
            dev_fraction: 0.05,
            eval_every: 1,
            checkpoint_path: None,
            seed: 0,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |s: &str| Err(TrainError::BadConfig(s.into()));
        if self.epochs == 0 {
            return bad("epochs must be ≥ 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be ≥ 1");
        }
        if !(self.learning_rate >= 0.0) {
            return bad("learning_rate must be ≥ 0");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("betas must lie in [0, 1)");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be > 0");
        }
        if !(0.0..1.0).contains(&self.dev_fraction) {
            return bad("dev_fraction must lie in [0, 1)");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be ≥ 1");
        }
        Ok(())
    }
}

/// First/second-moment slots, one pair per named parameter, in
/// [`ModelParams::named`] order.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> AdamState {
        let sizes: Vec<usize> = params.named().iter().map(|(_, t)| t.values.len()).collect();
        AdamState {
            step: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// Scale all gradients so their joint L2 norm is at most `clip`; returns the
/// pre-clip norm.
pub fn clip_global_norm(grads: &mut [Vec<f64>], clip: f64) -> f64 {
    let sq: f64 = grads.iter().flat_map(|g| g.iter()).map(|x| x * x).sum();
    let norm = sq.sqrt();
    if norm > clip {
        let scale = clip / norm;
        for g in grads.iter_mut() {
            for x in g.iter_mut() {
                *x *= scale;
            }
        }
    }
    norm
}

/// One Adam update with bias correction:
/// `m ← β₁m + (1−β₁)g`, `v ← β₂v + (1−β₂)g²`,
/// `p ← p − lr·m̂/(√v̂ + ε)`.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &[Vec<f64>],
    state: &mut AdamState,
    cfg: &TrainConfig,
) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (pi, (_, tensor)) in params.named_mut().into_iter().enumerate() {
        let (m, v) = (&mut state.m[pi], &mut state.v[pi]);
        debug_assert_eq!(tensor.values.len(), grads[pi].len());
        for (i, &g) in grads[pi].iter().enumerate() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            tensor.values[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
        }
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub mean_total: f64,
    pub mean_encoder: f64,
    pub mean_decoder: f64,
    /// Mean decoder NLL per ending token over the training stories.
    pub decoder_nats_per_token: f64,
    /// Perplexity on the monitor set; `None` between eval points.
    pub dev_perplexity: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs: Vec<EpochReport>,
    /// Indices of the held-out monitor stories (empty → monitored on train).
    pub dev_indices: Vec<usize>,
    pub final_dev_perplexity: f64,
}

/// Deterministic dev split: shuffle indices under the seed, hold out
/// `floor(dev_fraction · n)` stories.
fn dev_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, "trainer/dev-split"));
    let dev_n = ((n as f64) * fraction).floor() as usize;
    let dev: Vec<usize> = order[..dev_n].to_vec();
    let mut train: Vec<usize> = order[dev_n..].to_vec();
    train.sort_unstable();
    (train, dev)
}

/// Train in place. Per batch: per-story backward passes accumulate into one
/// mean gradient, which is clipped and fed to Adam. Deterministic for a
/// fixed seed: batch order, dev split, and all arithmetic are seed-driven.
pub fn train(
    params: &mut ModelParams,
    stories: &[Story],
    store: &TripleStore,
    cfg: &TrainConfig,
    mut progress: impl FnMut(&EpochReport),
) -> Result<TrainReport, TrainError> {
    cfg.validate()?;
    if stories.is_empty() {
        return Err(TrainError::BadConfig("training needs at least one story".into()));
    }
    let (train_idx, dev_idx) = dev_split(stories.len(), cfg.dev_fraction, cfg.seed);
    if train_idx.is_empty() {
        return Err(TrainError::BadConfig(
            "dev_fraction leaves no training stories".into(),
        ));
    }
    // Monitor on the dev split when it exists, else on the training set.
    let monitor: Vec<Story> = if dev_idx.is_empty() {
        train_idx.iter().map(|&i| stories[i].clone()).collect()
    } else {
        dev_idx.iter().map(|&i| stories[i].clone()).collect()
    };

    let mut adam = AdamState::new(params);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut final_ppl = f64::NAN;

    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let mut order = train_idx.clone();
        order.shuffle(&mut stream(subseed(cfg.seed, "trainer/epoch-order"), &format!("epoch-{epoch}")));

        let (mut sum_total, mut sum_enc, mut sum_dec) = (0.0, 0.0, 0.0);
        let mut sum_tokens = 0usize;

        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut grad_acc: Vec<Vec<f64>> =
                params.named().iter().map(|(_, t)| vec![0.0; t.values.len()]).collect();
            for &si in batch {
                let story = &stories[si];
                let mut tape = Tape::new();
                let vars = params.register(&mut tape);
                let lv = loss_on_tape(&mut tape, &vars, story, store)?;
                let total = tape.item(lv.total);
                if !total.is_finite() {
                    return Err(TrainError::NonFiniteLoss {
                        epoch: epoch + 1,
                        batch: batch_no + 1,
                        story: story.id.clone(),
                    });
                }
                sum_total += total;
                sum_enc += tape.item(lv.encoder);
                sum_dec += tape.item(lv.decoder);
                sum_tokens += lv.ending_tokens;
                let named_vars = vars.named();
                tape.backward(lv.total).map_err(ModelError::from)?;
                for (pi, (_, var)) in named_vars.iter().enumerate() {
                    if let Some(g) = tape.grad(*var) {
                        for (acc, &x) in grad_acc[pi].iter_mut().zip(g) {
                            *acc += x;
                        }
                    }
                }
            }
            let inv = 1.0 / batch.len() as f64;
            for g in grad_acc.iter_mut() {
                for x in g.iter_mut() {
                    *x *= inv;
                }
            }
            clip_global_norm(&mut grad_acc, cfg.clip_norm);
            adam_step(params, &grad_acc, &mut adam, cfg);
        }

        let n_train = order.len() as f64;
        let eval_now = (epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs;
        let dev_perplexity = if eval_now {
            let ppl = eval::perplexity(params, &monitor, store, cfg.workers)?;
            final_ppl = ppl;
            if let Some(path) = &cfg.checkpoint_path {
                save_checkpoint(params, path)?;
            }
            Some(ppl)
        } else {
            None
        };

        let report = EpochReport {
            epoch: epoch + 1,
            mean_total: sum_total / n_train,
            mean_encoder: sum_enc / n_train,
            mean_decoder: sum_dec / n_train,
            decoder_nats_per_token: sum_dec / sum_tokens as f64,
            dev_perplexity,
            seconds: start.elapsed().as_secs_f64(),
        };
        progress(&report);
        epochs.push(report);
    }

    Ok(TrainReport { epochs, dev_indices: dev_idx, final_dev_perplexity: final_ppl })
}

// ── Tests ───────────────────────────────────────────────────────────────────
