//! Training: the in-batch softmax (local) loss, the max-margin structured
//! (global) loss with loss-augmented decoding, averaged SGD, and the
//! training loop with periodic dev evaluation and model selection.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::assignment::{assignment_score, solve_dense, Assignment};
use crate::corpus::{PairCorpus, Split, Vocabulary};
use crate::encoder::{EncodeError, EncoderModel, Gradients};
use crate::eval::{decode_local, mrr};
use crate::math;
use crate::matrix::ScoreMatrix;
use crate::rng::Xoshiro256;
use crate::token::InputMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Local,
    HybridGlobal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMetric {
    DevMrrLocal,
    DevAccLocal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Learning rate multiplier applied after each epoch.
    pub lr_decay: f64,
    /// Evaluate on dev (and consider checkpointing) every this many epochs.
    pub eval_every: usize,
    pub objective: Objective,
    pub seed: u64,
    pub selection_metric: SelectionMetric,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 60,
            epochs: 400,
            lr: 0.02,
            lr_decay: 0.99,
            eval_every: 20,
            objective: Objective::Local,
            seed: 0,
            selection_metric: SelectionMetric::DevMrrLocal,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size < 2 {
            return Err(TrainError::BatchTooSmall(self.batch_size));
        }
        if self.eval_every == 0 {
            return Err(TrainError::BadConfig("eval_every must be positive".into()));
        }
        if self.epochs % self.eval_every != 0 {
            return Err(TrainError::BadConfig(alloc::format!(
                "eval_every ({}) must divide epochs ({})",
                self.eval_every,
                self.epochs
            )));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(TrainError::BadConfig("lr must be positive".into()));
        }
        if !(self.lr_decay.is_finite() && self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(TrainError::BadConfig("lr_decay must be in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    BatchTooSmall(usize),
    Diverged,
    EmptySplit(&'static str),
    Encode(EncodeError),
    BadConfig(String),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::BatchTooSmall(b) => {
                write!(f, "batch size {b} too small; the in-batch softmax needs at least 2")
            }
            TrainError::Diverged => write!(f, "diverged"),
            TrainError::EmptySplit(which) => write!(f, "{which} split is empty"),
            TrainError::Encode(e) => write!(f, "{e}"),
            TrainError::BadConfig(msg) => write!(f, "{msg}"),
        }
    }
}

impl core::error::Error for TrainError {}

impl From<EncodeError> for TrainError {
    fn from(e: EncodeError) -> Self {
        TrainError::Encode(e)
    }
}

/// Token-id views of the train and dev pairs under one input mode.
#[derive(Debug, Clone)]
pub struct EncodedCorpus {
    pub train: Vec<(Vec<u32>, Vec<u32>)>,
    pub dev: Vec<(Vec<u32>, Vec<u32>)>,
}

/// Maps one split of the corpus to id sequences, in corpus order.
pub fn encode_split(
    corpus: &PairCorpus,
    vocab: &Vocabulary,
    mode: InputMode,
    split: Split,
) -> Vec<(Vec<u32>, Vec<u32>)> {
    corpus
        .subset(split)
        .into_iter()
        .map(|p| {
            (
                vocab.text_to_ids(&p.statement, mode),
                vocab.text_to_ids(&p.proof, mode),
            )
        })
        .collect()
}

pub fn encode_corpus(corpus: &PairCorpus, vocab: &Vocabulary, mode: InputMode) -> EncodedCorpus {
    EncodedCorpus {
        train: encode_split(corpus, vocab, mode, Split::Train),
        dev: encode_split(corpus, vocab, mode, Split::Dev),
    }
}

/// In-batch softmax loss over a score matrix: each statement must pick its
/// own proof out of the batch. Returns the loss and its gradient on the
/// scores (`softmax - onehot`, row by row), computed with the max-shift
/// trick.
pub fn local_loss_from_scores(m: &ScoreMatrix) -> (f64, ScoreMatrix) {
    let n = m.n();
    debug_assert!(n >= 2, "in-batch softmax needs at least 2 pairs");
    let mut grad = ScoreMatrix::zeros(n);
    let mut loss = 0.0;
    for i in 0..n {
        let row = m.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for &v in row {
            sum += math::exp(v - max);
        }
        let logsum = max + math::ln(sum);
        loss += logsum - row[i];
        let grow = grad.row_mut(i);
        for (j, &v) in row.iter().enumerate() {
            grow[j] = math::exp(v - logsum);
        }
        grow[i] -= 1.0;
    }
    (loss, grad)
}

/// Local training step objective: runs the batch through the encoder,
/// applies the in-batch softmax loss and accumulates exact gradients.
pub fn local_loss(
    model: &EncoderModel,
    statements: &[Vec<u32>],
    proofs: &[Vec<u32>],
    grads: &mut Gradients,
) -> Result<f64, TrainError> {
    if statements.len() < 2 {
        return Err(TrainError::BatchTooSmall(statements.len()));
    }
    let fwd = model.score_all_with_trace(statements, proofs)?;
    let (loss, upstream) = local_loss_from_scores(&fwd.matrix);
    model.backward_scores(&fwd, &upstream, grads);
    Ok(loss)
}

/// Structured cost of a predicted assignment against the identity gold:
/// the number of rows assigned the wrong column.
pub fn structured_cost(assignment: &Assignment) -> usize {
    assignment.n() - assignment.fixed_points()
}

/// Max-margin structured loss. Decodes the loss-augmented matrix
/// `M' = M + (1 - I)`, whose off-diagonal bonus charges one unit of margin
/// per wrong assignment, and hinges on
/// `Δ(Â, I) + score(Â, M) - score(I, M)`.
///
/// Returns the loss, the gradient on the scores (`+1` on predicted edges,
/// `-1` on gold edges, zero when the hinge is inactive) and the predicted
/// assignment.
pub fn global_loss_from_scores(m: &ScoreMatrix) -> (f64, ScoreMatrix, Assignment) {
    let n = m.n();
    let augmented = ScoreMatrix::from_fn(n, |i, j| m.get(i, j) + if i == j { 0.0 } else { 1.0 });
    let predicted = solve_dense(&augmented);
    let delta = structured_cost(&predicted) as f64;
    let gold = Assignment::identity(n);
    let hinge = delta + assignment_score(&predicted, m) - assignment_score(&gold, m);
    let loss = hinge.max(0.0);
    let mut grad = ScoreMatrix::zeros(n);
    if loss > 0.0 {
        for (i, &j) in predicted.perm().iter().enumerate() {
            let row = grad.row_mut(i);
            row[j] += 1.0;
            row[i] -= 1.0;
        }
    }
    (loss, grad, predicted)
}

/// Global training step objective: exact loss-augmented decoding on the
/// batch, gradients through the two score terms only (the predicted
/// assignment is treated as a constant).
pub fn global_loss(
    model: &EncoderModel,
    statements: &[Vec<u32>],
    proofs: &[Vec<u32>],
    grads: &mut Gradients,
) -> Result<f64, TrainError> {
    if statements.is_empty() {
        return Err(TrainError::BatchTooSmall(0));
    }
    let fwd = model.score_all_with_trace(statements, proofs)?;
    let (loss, upstream, _) = global_loss_from_scores(&fwd.matrix);
    if loss > 0.0 {
        model.backward_scores(&fwd, &upstream, grads);
    }
    Ok(loss)
}

/// Averaged SGD: plain SGD iterates plus a running average of them, which
/// is what gets evaluated and checkpointed. Averaging starts at the first
/// step.
#[derive(Debug, Clone)]
pub struct AsgdState {
    avg: Vec<f64>,
    steps: u64,
    lr: f64,
    decay: f64,
}

impl AsgdState {
    pub fn new(initial_params: &[f64], lr: f64, decay: f64) -> Self {
        Self {
            avg: initial_params.to_vec(),
            steps: 0,
            lr,
            decay,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// The ASGD averaged iterate.
    pub fn averaged(&self) -> &[f64] {
        &self.avg
    }

    /// One SGD step `θ ← θ − lr·g` followed by the running-average update
    /// `θ̄ ← θ̄ + (θ − θ̄)/t`. Non-finite gradients abort with `Diverged`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), TrainError> {
        debug_assert_eq!(params.len(), grads.len());
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(TrainError::Diverged);
        }
        self.steps += 1;
        let t = self.steps as f64;
        for (p, (&g, a)) in params.iter_mut().zip(grads.iter().zip(self.avg.iter_mut())) {
            *p -= self.lr * g;
            *a += (*p - *a) / t;
        }
        Ok(())
    }

    /// Applies the exponential learning-rate schedule at an epoch boundary.
    pub fn end_epoch(&mut self) {
        self.lr *= self.decay;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Local,
    Global,
}

/// Progress callbacks from the training loop.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainEvent {
    Step {
        epoch: usize,
        step: u64,
        kind: StepKind,
        loss: f64,
        lr: f64,
    },
    DevEval(EvalPoint),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub epoch: usize,
    pub dev_mrr: f64,
    pub dev_accuracy: f64,
    pub is_best: bool,
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// Model loaded with the best averaged parameters seen on dev (the
    /// initial parameters if no evaluation ever ran).
    pub model: EncoderModel,
    pub best_epoch: usize,
    pub best_metric: f64,
    pub history: Vec<EvalPoint>,
}

/// Draws `b` distinct indices from `indices` by partial Fisher-Yates.
/// `indices` stays a permutation across calls, which keeps every draw
/// uniform without re-initializing.
fn sample_batch(rng: &mut Xoshiro256, indices: &mut [usize], b: usize) {
    let n = indices.len();
    for t in 0..b {
        let j = t + rng.below((n - t) as u64) as usize;
        indices.swap(t, j);
    }
}

fn gather_batch(
    data: &[(Vec<u32>, Vec<u32>)],
    indices: &[usize],
) -> (Vec<Vec<u32>>, Vec<Vec<u32>>) {
    let statements = indices.iter().map(|&i| data[i].0.clone()).collect();
    let proofs = indices.iter().map(|&i| data[i].1.clone()).collect();
    (statements, proofs)
}

/// Scores the whole dev set with the averaged parameters and reads off
/// local-decoding MRR and accuracy.
fn dev_metrics(
    model: &EncoderModel,
    avg_params: &[f64],
    dev: &[(Vec<u32>, Vec<u32>)],
) -> Result<(f64, f64), TrainError> {
    let mut eval_model = model.clone();
    eval_model.set_params(avg_params.to_vec());
    let statements: Vec<Vec<u32>> = dev.iter().map(|(s, _)| s.clone()).collect();
    let proofs: Vec<Vec<u32>> = dev.iter().map(|(_, p)| p.clone()).collect();
    let matrix = eval_model.score_all(&statements, &proofs)?;
    let local = decode_local(&matrix);
    let dev_mrr = mrr(local.gold_ranks()).map_err(|_| TrainError::EmptySplit("dev"))?;
    Ok((dev_mrr, local.accuracy()))
}

/// Trains a model: `epochs * (N/b)` local steps for the local objective, or
/// strictly alternating local/global steps (local first, `N/b` of each per
/// epoch) for the hybrid one. Every `eval_every` epochs the ASGD-averaged
/// parameters are scored on dev and the best snapshot is retained.
pub fn train(
    model: EncoderModel,
    data: &EncodedCorpus,
    config: &TrainConfig,
    observer: &mut dyn FnMut(TrainEvent),
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let n_train = data.train.len();
    if config.epochs > 0 {
        if n_train == 0 {
            return Err(TrainError::EmptySplit("train"));
        }
        if data.dev.is_empty() {
            return Err(TrainError::EmptySplit("dev"));
        }
        if n_train < 2 {
            return Err(TrainError::BatchTooSmall(n_train));
        }
    }

    let mut model = model;
    let b = config.batch_size.min(n_train.max(2));
    let steps_per_epoch = if n_train == 0 { 0 } else { (n_train / b).max(1) };

    let mut rng = Xoshiro256::from_seed(config.seed);
    let mut asgd = AsgdState::new(model.params(), config.lr, config.lr_decay);
    let mut grads = Gradients::zeros_like(&model);
    let mut indices: Vec<usize> = (0..n_train).collect();

    let mut best_params: Vec<f64> = asgd.averaged().to_vec();
    let mut best_metric = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut history = Vec::new();
    let mut step_counter: u64 = 0;

    for epoch in 1..=config.epochs {
        for _ in 0..steps_per_epoch {
            sample_batch(&mut rng, &mut indices, b);
            let (statements, proofs) = gather_batch(&data.train, &indices[..b]);
            grads.zero();
            let loss = local_loss(&model, &statements, &proofs, &mut grads)?;
            asgd.step(model.params_mut(), grads.values())?;
            step_counter += 1;
            observer(TrainEvent::Step {
                epoch,
                step: step_counter,
                kind: StepKind::Local,
                loss,
                lr: asgd.lr(),
            });

            if config.objective == Objective::HybridGlobal {
                sample_batch(&mut rng, &mut indices, b);
                let (statements, proofs) = gather_batch(&data.train, &indices[..b]);
                grads.zero();
                let loss = global_loss(&model, &statements, &proofs, &mut grads)?;
                asgd.step(model.params_mut(), grads.values())?;
                step_counter += 1;
                observer(TrainEvent::Step {
                    epoch,
                    step: step_counter,
                    kind: StepKind::Global,
                    loss,
                    lr: asgd.lr(),
                });
            }
        }
        asgd.end_epoch();

        if epoch % config.eval_every == 0 {
            let (dev_mrr, dev_accuracy) = dev_metrics(&model, asgd.averaged(), &data.dev)?;
            let metric = match config.selection_metric {
                SelectionMetric::DevMrrLocal => dev_mrr,
                SelectionMetric::DevAccLocal => dev_accuracy,
            };
            let is_best = metric > best_metric;
            if is_best {
                best_metric = metric;
                best_epoch = epoch;
                best_params = asgd.averaged().to_vec();
            }
            let point = EvalPoint {
                epoch,
                dev_mrr,
                dev_accuracy,
                is_best,
            };
            history.push(point.clone());
            observer(TrainEvent::DevEval(point));
        }
    }

    model.set_params(best_params);
    Ok(TrainOutcome {
        model,
        best_epoch,
        best_metric,
        history,
    })
}
