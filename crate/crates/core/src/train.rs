//! Training loop: per-sample momentum SGD over CTC losses with component
//! clipping, validation-based early stopping, and the hidden-size sweep
//! harness. Wall-clock time is injected so the loop stays pure; in
//! reproducible mode timing fields are pinned to zero.

use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Alphabet, LabelSequence, SampleId};
use crate::ctc::{best_path_decode, ctc_loss, edit_distance, label_error_rate, min_frames, CtcError};
use crate::net::{
    blstm_backward, blstm_forward, init_model, verify_fingerprint, BlstmGradients, BlstmModel,
    NetError,
};
use crate::segment::FrameSequence;

#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    InvalidConfig(&'static str),
    /// The named split has no usable samples.
    EmptySplit(&'static str),
    /// Samples disagree on frame width.
    MixedFrameWidths { expected: usize, got: usize },
    /// Sweep sizes must be non-empty and strictly increasing.
    BadSweepSizes,
    Net(NetError),
    Ctc(CtcError),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::InvalidConfig(msg) => write!(f, "invalid train config: {msg}"),
            TrainError::EmptySplit(name) => write!(f, "empty split: {name}"),
            TrainError::MixedFrameWidths { expected, got } => {
                write!(f, "mixed frame widths: {expected} vs {got}")
            }
            TrainError::BadSweepSizes => {
                write!(f, "sweep sizes must be non-empty and strictly increasing")
            }
            TrainError::Net(e) => write!(f, "{e}"),
            TrainError::Ctc(e) => write!(f, "{e}"),
        }
    }
}

impl From<NetError> for TrainError {
    fn from(e: NetError) -> Self {
        TrainError::Net(e)
    }
}

impl From<CtcError> for TrainError {
    fn from(e: CtcError) -> Self {
        TrainError::Ctc(e)
    }
}

/// One ready-to-train text line: its frames and encoded target.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub id: SampleId,
    pub frames: FrameSequence,
    pub target: LabelSequence,
}

/// Trainer knobs; defaults follow the artifact's standard configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Per-component gradient bound.
    pub gradient_clip: f64,
    pub seed: u64,
    /// Pin timing fields to zero so outputs are byte-comparable.
    pub reproducible: bool,
    /// Samples per parameter update; gradients within a batch are summed
    /// in sample order.
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_size: 100,
            learning_rate: 1e-4,
            momentum: 0.9,
            max_epochs: 100,
            patience: 20,
            gradient_clip: 1.0,
            seed: 0,
            reproducible: false,
            batch_size: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.hidden_size == 0 {
            return Err(TrainError::InvalidConfig("hidden_size must be >= 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(TrainError::InvalidConfig("learning_rate must be > 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(TrainError::InvalidConfig("momentum must be in [0, 1)"));
        }
        if self.max_epochs == 0 {
            return Err(TrainError::InvalidConfig("max_epochs must be >= 1"));
        }
        if self.patience == 0 {
            return Err(TrainError::InvalidConfig("patience must be >= 1"));
        }
        if !(self.gradient_clip > 0.0) {
            return Err(TrainError::InvalidConfig("gradient_clip must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be >= 1"));
        }
        Ok(())
    }
}

/// Per-epoch learning-curve row.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean CTC negative log-probability per target token.
    pub train_ctc_loss: f64,
    pub train_label_error: f64,
    pub val_label_error: f64,
    pub wall_seconds: f64,
}

/// Everything a training run produces.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Checkpoint with the best validation error seen.
    pub model: BlstmModel,
    pub history: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub best_val_error: f64,
    /// Samples excluded because their frame count cannot emit their target;
    /// constant across epochs, so (processed + skipped) == split size.
    pub skipped: Vec<SampleId>,
}

/// Per-sample decode from an evaluation pass.
#[derive(Debug, Clone)]
pub struct SampleDecode {
    pub id: SampleId,
    pub decoded: LabelSequence,
    pub target: LabelSequence,
    pub distance: usize,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub label_error: f64,
    pub per_sample: Vec<SampleDecode>,
}

/// One sweep row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub hidden_size: usize,
    pub best_val_label_error: f64,
    pub test_label_error: f64,
    pub train_seconds: f64,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

fn frame_width(samples: &[TrainSample]) -> Result<usize, TrainError> {
    let mut width = None;
    for s in samples {
        let w = s.frames.frame_len();
        match width {
            None => width = Some(w),
            Some(expected) if expected != w => {
                return Err(TrainError::MixedFrameWidths { expected, got: w })
            }
            _ => {}
        }
    }
    width.ok_or(TrainError::EmptySplit("train"))
}

/// Train a fresh model with momentum SGD and patience-based early stopping.
///
/// Per epoch: shuffle the feasible training samples (seeded), run
/// forward -> CTC -> backward per sample, clip each gradient component,
/// update, then score the validation split; the checkpoint with the lowest
/// validation label error is returned together with the full history.
pub fn train(
    train_set: &[TrainSample],
    val_set: &[TrainSample],
    alphabet: &Alphabet,
    cfg: &TrainConfig,
    mut clock: impl FnMut() -> f64,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if val_set.is_empty() {
        return Err(TrainError::EmptySplit("val"));
    }

    // Feasibility is a pure function of (frame count, target), so the
    // skip set is fixed up front and reported once.
    let mut usable: Vec<&TrainSample> = Vec::new();
    let mut skipped = Vec::new();
    for s in train_set {
        if s.target.is_empty() || s.frames.len() < min_frames(&s.target) {
            skipped.push(s.id);
        } else {
            usable.push(s);
        }
    }
    if usable.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    let input_size = frame_width(train_set)?;

    let mut model = init_model(input_size, cfg.hidden_size, alphabet.len(), cfg.seed)?;
    model.alphabet_fingerprint = alphabet.fingerprint();
    let mut velocity = BlstmGradients::zeros_like(&model);

    let mut order: Vec<usize> = (0..usable.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7261_696e);

    let mut history = Vec::new();
    let mut best_model = model.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut epochs_without_improvement = 0usize;

    for epoch in 1..=cfg.max_epochs {
        let epoch_start = clock();
        order.shuffle(&mut rng);

        let mut nll_sum = 0.0;
        let mut token_sum = 0usize;
        let mut train_pairs: Vec<(LabelSequence, LabelSequence)> = Vec::new();

        for chunk in order.chunks(cfg.batch_size) {
            let mut batch_grads: Option<BlstmGradients> = None;
            for &i in chunk {
                let sample = usable[i];
                let (posteriors, cache) = blstm_forward(&model, &sample.frames)?;
                let loss = ctc_loss(&posteriors, &sample.target)?;
                let grads =
                    blstm_backward(&model, &sample.frames, &cache, &loss.logit_gradient)?;
                nll_sum += loss.neg_log_prob;
                token_sum += sample.target.len();
                train_pairs.push((best_path_decode(&posteriors).labels, sample.target.clone()));
                match batch_grads.as_mut() {
                    None => batch_grads = Some(grads),
                    Some(acc) => acc.add_assign(&grads),
                }
            }
            if let Some(grads) = batch_grads {
                model.apply_update(
                    &mut velocity,
                    &grads,
                    cfg.learning_rate,
                    cfg.momentum,
                    cfg.gradient_clip,
                );
            }
        }

        let train_label_error = label_error_rate(&train_pairs)?;
        let val_report = evaluate(&model, val_set, alphabet)?;
        let wall_seconds = if cfg.reproducible {
            0.0
        } else {
            (clock() - epoch_start).max(0.0)
        };
        history.push(EpochMetrics {
            epoch,
            train_ctc_loss: nll_sum / token_sum.max(1) as f64,
            train_label_error,
            val_label_error: val_report.label_error,
            wall_seconds,
        });

        if val_report.label_error < best_val {
            best_val = val_report.label_error;
            best_model = model.clone();
            best_epoch = epoch;
            epochs_without_improvement = 0;
        } else {
            epochs_without_improvement += 1;
            if epochs_without_improvement >= cfg.patience {
                break;
            }
        }
    }

    Ok(TrainOutcome {
        model: best_model,
        history,
        best_epoch,
        best_val_error: best_val,
        skipped,
    })
}

/// Decode every sample with the best-path decoder and aggregate the label
/// error rate. Pure given (model, samples).
pub fn evaluate(
    model: &BlstmModel,
    samples: &[TrainSample],
    alphabet: &Alphabet,
) -> Result<EvalReport, TrainError> {
    if samples.is_empty() {
        return Err(TrainError::EmptySplit("eval"));
    }
    verify_fingerprint(model, alphabet.fingerprint())?;
    let mut per_sample = Vec::with_capacity(samples.len());
    let mut pairs = Vec::with_capacity(samples.len());
    for s in samples {
        let (posteriors, _) = blstm_forward(model, &s.frames)?;
        let decoded = best_path_decode(&posteriors).labels;
        per_sample.push(SampleDecode {
            id: s.id,
            distance: edit_distance(decoded.indices(), s.target.indices()),
            decoded: decoded.clone(),
            target: s.target.clone(),
        });
        pairs.push((decoded, s.target.clone()));
    }
    Ok(EvalReport {
        label_error: label_error_rate(&pairs)?,
        per_sample,
    })
}

/// Train once per hidden size (shared seed and data), recording the best
/// validation error, the selected checkpoint's test error, and wall time.
pub fn sweep_hidden_sizes(
    train_set: &[TrainSample],
    val_set: &[TrainSample],
    test_set: &[TrainSample],
    alphabet: &Alphabet,
    sizes: &[usize],
    base_cfg: &TrainConfig,
    mut clock: impl FnMut() -> f64,
) -> Result<SweepResult, TrainError> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(TrainError::BadSweepSizes);
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &hidden_size in sizes {
        let cfg = TrainConfig {
            hidden_size,
            ..base_cfg.clone()
        };
        let started = clock();
        let outcome = train(train_set, val_set, alphabet, &cfg, &mut clock)?;
        let train_seconds = (clock() - started).max(0.0);
        let test_report = evaluate(&outcome.model, test_set, alphabet)?;
        rows.push(SweepRow {
            hidden_size,
            best_val_label_error: outcome.best_val_error,
            test_label_error: test_report.label_error,
            train_seconds,
            epochs_run: outcome.history.len(),
        });
    }
    Ok(SweepResult { rows })
}
