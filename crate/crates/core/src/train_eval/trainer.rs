use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use super::metrics::{evaluate, MetricsReport};
use super::optim::{Optimizer, OptimizerKind};
use super::report::RunRecord;
use crate::corpus::ClassLabel;
use crate::error::{Error, Result};
use crate::linear::{epoch_order, ClassWeights};
use crate::recurrent::{cast, GradientSet, Real, RecurrentClassifier};
use crate::vocab::TokenSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Double,
    Single,
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::Double => "double",
            Precision::Single => "single",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "double" | "f64" => Some(Precision::Double),
            "single" | "f32" => Some(Precision::Single),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Zero is allowed and leaves every parameter untouched.
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub class_weights: Option<ClassWeights>,
    /// Stop after this many epochs without a held-out macro-F1 improvement
    /// and keep the best epoch's parameters. Needs a validation set.
    pub early_stop_patience: Option<usize>,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            learning_rate: 0.005,
            optimizer: OptimizerKind::adam(),
            seed: 42,
            class_weights: None,
            early_stop_patience: None,
            precision: Precision::Double,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(Error::InvalidArgument(
                "epochs and batch_size must be >= 1".into(),
            ));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.early_stop_patience == Some(0) {
            return Err(Error::InvalidArgument(
                "early_stop_patience must be >= 1".into(),
            ));
        }
        self.optimizer.validate()
    }

    pub fn snapshot(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(format!("train.{}", k), v);
        };
        put("epochs", self.epochs.to_string());
        put("batch_size", self.batch_size.to_string());
        put("learning_rate", self.learning_rate.to_string());
        put("optimizer", self.optimizer.name().to_string());
        if let OptimizerKind::Adam { beta1, beta2, eps } = self.optimizer {
            put("adam_beta1", beta1.to_string());
            put("adam_beta2", beta2.to_string());
            put("adam_eps", eps.to_string());
        }
        put("seed", self.seed.to_string());
        if let Some(w) = self.class_weights {
            put("class_weights", format!("{} {} {}", w.0[0], w.0[1], w.0[2]));
        }
        if let Some(p) = self.early_stop_patience {
            put("early_stop_patience", p.to_string());
        }
        put("precision", self.precision.name().to_string());
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub seq: TokenSequence,
    pub label: ClassLabel,
}

pub fn predict_all<T: Real>(
    model: &RecurrentClassifier<T>,
    examples: &[Example],
) -> Result<Vec<ClassLabel>> {
    examples
        .iter()
        .map(|e| model.predict(&e.seq).map(|(l, _)| l))
        .collect()
}

pub fn evaluate_model<T: Real>(
    model: &RecurrentClassifier<T>,
    examples: &[Example],
) -> Result<MetricsReport> {
    let gold: Vec<ClassLabel> = examples.iter().map(|e| e.label).collect();
    evaluate(&predict_all(model, examples)?, &gold)
}

/// Mini-batch training on the (class-weighted) mean cross-entropy.
///
/// Batches come from a fresh shuffle each epoch, drawn from `seed` with the
/// epoch index as stream, so a run is a pure function of its inputs. The
/// recorded loss of an epoch is the mean weighted loss over the examples of
/// that epoch, each measured just before its batch update.
pub fn train<T: Real>(
    mut model: RecurrentClassifier<T>,
    name: &str,
    train_set: &[Example],
    validation: Option<&[Example]>,
    config: &TrainConfig,
) -> Result<(RecurrentClassifier<T>, RunRecord)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if config.early_stop_patience.is_some() && validation.is_none_or(<[Example]>::is_empty) {
        return Err(Error::InvalidArgument(
            "early stopping needs a non-empty validation set".into(),
        ));
    }
    let start = Instant::now();
    let weights = config.class_weights.unwrap_or_default();
    let mut optimizer = Optimizer::<T>::new(config.optimizer, config.learning_rate);
    let mut grads = GradientSet::zeros_for(&model);
    let mut losses = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, RecurrentClassifier<T>)> = None;
    let mut since_best = 0usize;

    for epoch in 0..config.epochs {
        let order = epoch_order(train_set.len(), config.seed, epoch);
        let mut total = 0.0f64;
        for batch in order.chunks(config.batch_size) {
            grads.clear();
            let share = 1.0 / batch.len() as f64;
            for &i in batch {
                let ex = &train_set[i];
                let w = weights.get(ex.label.code());
                let (_, cache) = model.forward(&ex.seq)?;
                total += cache.loss(ex.label, cast(w)).to_f64().unwrap_or(f64::NAN);
                model.accumulate_gradients(&cache, ex.label, cast(w * share), &mut grads)?;
            }
            optimizer.step(&mut model, &grads).map_err(|e| match e {
                Error::NonFinite(m) => Error::NonFinite(format!("{} in epoch {}", m, epoch + 1)),
                other => other,
            })?;
        }
        let loss = total / train_set.len() as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "training loss in epoch {}",
                epoch + 1
            )));
        }
        losses.push(loss);

        if let (Some(patience), Some(val)) = (config.early_stop_patience, validation) {
            let f1 = evaluate_model(&model, val)?.macro_f1;
            if best.as_ref().is_none_or(|(b, _)| f1 > *b) {
                best = Some((f1, model.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= patience {
                    break;
                }
            }
        }
    }
    if let Some((_, m)) = best {
        model = m;
    }
    model.check_finite()?;

    let train_metrics = evaluate_model(&model, train_set)?;
    let heldout_metrics = match validation {
        Some(v) if !v.is_empty() => Some(evaluate_model(&model, v)?),
        _ => None,
    };
    let record = RunRecord {
        model: name.to_string(),
        seed: config.seed,
        config: config.snapshot(),
        epoch_losses: losses,
        train_metrics,
        heldout_metrics,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((model, record))
}
