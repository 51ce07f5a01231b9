//! Wall-clock-backed wrappers around the core trainer plus the CSV
//! emitters for learning curves and sweep results.

use std::fs;
use std::path::Path;
use std::time::Instant;

use nastaliq_core::corpus::Alphabet;
use nastaliq_core::train::{
    evaluate, sweep_hidden_sizes, train, EpochMetrics, EvalReport, SweepResult, TrainConfig,
    TrainOutcome, TrainSample,
};

use crate::error::{CliError, Result};

/// Seconds since an arbitrary origin; the trainer only uses differences.
fn wall_clock() -> impl FnMut() -> f64 {
    let origin = Instant::now();
    move || origin.elapsed().as_secs_f64()
}

pub fn train_with_clock(
    train_set: &[TrainSample],
    val_set: &[TrainSample],
    alphabet: &Alphabet,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    Ok(train(train_set, val_set, alphabet, cfg, wall_clock())?)
}

pub fn evaluate_split(
    model: &nastaliq_core::net::BlstmModel,
    samples: &[TrainSample],
    alphabet: &Alphabet,
) -> Result<EvalReport> {
    Ok(evaluate(model, samples, alphabet)?)
}

pub fn sweep_with_clock(
    train_set: &[TrainSample],
    val_set: &[TrainSample],
    test_set: &[TrainSample],
    alphabet: &Alphabet,
    sizes: &[usize],
    base_cfg: &TrainConfig,
) -> Result<SweepResult> {
    Ok(sweep_hidden_sizes(
        train_set,
        val_set,
        test_set,
        alphabet,
        sizes,
        base_cfg,
        wall_clock(),
    )?)
}

/// Learning-curve CSV: one row per epoch.
pub fn write_metrics_csv(path: &Path, history: &[EpochMetrics]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = String::from("epoch,train_ctc_loss,train_label_error,val_label_error,wall_seconds\n");
    for m in history {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            m.epoch, m.train_ctc_loss, m.train_label_error, m.val_label_error, m.wall_seconds
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Sweep CSV: one row per hidden size.
pub fn write_sweep_csv(path: &Path, result: &SweepResult) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = String::from("hidden_size,best_val_label_error,test_label_error,train_seconds\n");
    for row in &result.rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.hidden_size, row.best_val_label_error, row.test_label_error, row.train_seconds
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Per-sample decode dump: `id<TAB>distance<TAB>target<TAB>decoded`.
pub fn write_eval_tsv(path: &Path, report: &EvalReport, alphabet: &Alphabet) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let render = |seq: &nastaliq_core::corpus::LabelSequence| -> Result<String> {
        let tokens = seq
            .decode(alphabet)
            .ok_or_else(|| CliError::Internal("decode index out of range".into()))?;
        Ok(tokens.join(" "))
    };
    let mut out = String::from("id\tdistance\ttarget\tdecoded\n");
    for s in &report.per_sample {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            s.id,
            s.distance,
            render(&s.target)?,
            render(&s.decoded)?
        ));
    }
    fs::write(path, out)?;
    Ok(())
}
