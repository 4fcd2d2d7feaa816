use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::backward::{batch_gradients, predicted_label};
use super::layers::{cross_entropy, forward};
use super::{adam_step, init_parameters, AdamHyper, AdamState, ModelConfig, ModelParameters, NnError};
use crate::dataset::{DatasetSplit, NormStats, RowMatrix, SplitFractions};

/// Losses and accuracies after one epoch, as means over examples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub validation_loss: f64,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone, Default)]
pub struct EpochTrace {
    pub records: Vec<EpochRecord>,
    /// Wall-clock duration of each epoch; kept apart from the metrics so
    /// that traces of identical runs compare equal.
    pub seconds: Vec<f64>,
}

impl EpochTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,train_accuracy,validation_loss,validation_accuracy\n");
        for r in &self.records {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch, r.train_loss, r.train_accuracy, r.validation_loss, r.validation_accuracy
            ));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<EpochTrace, NnError> {
        let mut trace = EpochTrace::default();
        for (n, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || NnError::Format(format!("trace line {}: {line:?}", n + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad());
            }
            let num = |i: usize| f[i].trim().parse::<f64>().map_err(|_| bad());
            trace.records.push(EpochRecord {
                epoch: f[0].trim().parse().map_err(|_| bad())?,
                train_loss: num(1)?,
                train_accuracy: num(2)?,
                validation_loss: num(3)?,
                validation_accuracy: num(4)?,
            });
        }
        Ok(trace)
    }
}

/// Trained network with everything needed to score raw rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: ModelConfig,
    /// Statistics of the training split, applied to every input row.
    pub norm: NormStats,
    pub params: ModelParameters<f32>,
    /// Split the model was trained on, so evaluation can rebuild it.
    pub split_fractions: SplitFractions,
    pub split_seed: u64,
    /// Epoch (1-based) these parameters came from.
    pub epoch: usize,
}

/// Result of [`train`]: the model after the last epoch and the model with
/// the best validation accuracy.
#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub final_model: TrainedModel,
    pub best_model: TrainedModel,
    pub trace: EpochTrace,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// Probability of apnoea (class 1).
    pub probability: f64,
    pub label: u8,
}

/// Mean cross-entropy and accuracy over already-normalised rows.
pub fn evaluate_rows(params: &ModelParameters<f32>, rows: &RowMatrix) -> Result<(f64, f64), NnError> {
    if rows.is_empty() {
        return Err(NnError::Config("cannot evaluate an empty row set".into()));
    }
    let per_row: Vec<(f64, bool)> = (0..rows.n_rows())
        .into_par_iter()
        .map(|i| {
            let out = forward(rows.row(i), params)?;
            let y = rows.label(i);
            Ok((cross_entropy(&out.mlp.logits, y as usize), predicted_label(&out.mlp.probs) == y))
        })
        .collect::<Result<_, NnError>>()?;
    let n = per_row.len() as f64;
    let loss = per_row.iter().map(|(l, _)| l).sum::<f64>() / n;
    let acc = per_row.iter().filter(|(_, c)| *c).count() as f64 / n;
    Ok((loss, acc))
}

impl TrainedModel {
    fn check_width(&self, rows: &RowMatrix) -> Result<(), NnError> {
        if rows.width() != self.config.window_size {
            return Err(NnError::Shape(format!(
                "rows have width {}, model expects {}",
                rows.width(),
                self.config.window_size
            )));
        }
        Ok(())
    }

    /// Scores raw (unnormalised) rows.
    pub fn predict(&self, rows: &RowMatrix) -> Result<Vec<Prediction>, NnError> {
        self.check_width(rows)?;
        (0..rows.n_rows())
            .into_par_iter()
            .map(|i| {
                let x: Vec<f32> = rows.row(i).iter().map(|&v| self.norm.apply(v)).collect();
                let out = forward(&x, &self.params)?;
                Ok(Prediction {
                    probability: out.mlp.probs[1],
                    label: predicted_label(&out.mlp.probs),
                })
            })
            .collect()
    }

    /// Mean loss and accuracy on raw rows.
    pub fn evaluate(&self, rows: &RowMatrix) -> Result<(f64, f64), NnError> {
        self.check_width(rows)?;
        evaluate_rows(&self.params, &self.norm.normalize(rows))
    }
}

/// Scores raw rows; same as [`TrainedModel::predict`].
pub fn predict(model: &TrainedModel, rows: &RowMatrix) -> Result<Vec<Prediction>, NnError> {
    model.predict(rows)
}

/// Minibatch Adam training.
///
/// Normalisation statistics come from the training rows only. Every epoch
/// reshuffles the training rows with a seeded generator, sweeps all
/// minibatches (the last one may be short), then records loss and accuracy
/// on the training and validation rows.
pub fn train(split: &DatasetSplit, cfg: &ModelConfig) -> Result<TrainingOutcome, NnError> {
    cfg.validate()?;
    if split.window_size() != cfg.window_size {
        return Err(NnError::Config(format!(
            "dataset window {} does not match model window {}",
            split.window_size(),
            cfg.window_size
        )));
    }
    if split.train.is_empty() || split.validation.is_empty() {
        return Err(NnError::Config("training and validation splits must be non-empty".into()));
    }

    let norm = NormStats::from_rows(&split.train);
    let train_rows = norm.normalize(&split.train);
    let val_rows = norm.normalize(&split.validation);

    let mut params: ModelParameters<f32> = init_parameters(cfg)?;
    let mut adam = AdamState::new(&params);
    let hyper = AdamHyper::from(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let model = |params: ModelParameters<f32>, epoch: usize| TrainedModel {
        config: cfg.clone(),
        norm,
        params,
        split_fractions: split.fractions,
        split_seed: split.seed,
        epoch,
    };

    let mut order: Vec<usize> = (0..train_rows.n_rows()).collect();
    let mut trace = EpochTrace::default();
    let mut best: Option<(f64, TrainedModel)> = None;
    let mut since_best = 0;

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let rows: Vec<&[f32]> = batch.iter().map(|&i| train_rows.row(i)).collect();
            let labels: Vec<u8> = batch.iter().map(|&i| train_rows.label(i)).collect();
            let at = |e: NnError| e.at(epoch, b + 1);
            let (mut grads, _, _) = batch_gradients(&rows, &labels, &params).map_err(at)?;
            grads.scale(1.0 / batch.len() as f64);
            adam_step(&mut params, &grads, &mut adam, &hyper).map_err(at)?;
        }
        let (train_loss, train_accuracy) = evaluate_rows(&params, &train_rows)?;
        let (validation_loss, validation_accuracy) = evaluate_rows(&params, &val_rows)?;
        let rec = EpochRecord {
            epoch,
            train_loss,
            train_accuracy,
            validation_loss,
            validation_accuracy,
        };
        let secs = started.elapsed().as_secs_f64();
        log::info!(
            "epoch {epoch}/{}: loss {train_loss:.4} acc {train_accuracy:.4} val_loss {validation_loss:.4} val_acc {validation_accuracy:.4} ({secs:.1}s)",
            cfg.epochs
        );
        trace.records.push(rec);
        trace.seconds.push(secs);

        if best.as_ref().is_none_or(|(acc, _)| validation_accuracy > *acc) {
            best = Some((validation_accuracy, model(params.clone(), epoch)));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if cfg.early_stopping_patience.is_some_and(|p| since_best >= p) {
            log::info!("early stop after epoch {epoch}: no validation improvement for {since_best} epochs");
            break;
        }
    }

    let last_epoch = trace.len();
    let (_, best_model) = best.expect("at least one epoch runs");
    Ok(TrainingOutcome {
        final_model: model(params, last_epoch),
        best_model,
        trace,
    })
}
