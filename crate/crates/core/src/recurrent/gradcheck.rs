//! Central finite-difference verification of the analytic gradients.

use super::model::{GradientSet, RecurrentClassifier};
use crate::corpus::ClassLabel;
use crate::error::Result;
use crate::vocab::TokenSequence;

/// Max over every trainable scalar of
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-12)`, where the
/// numeric gradient is `(L(p + eps) - L(p - eps)) / (2 eps)` of the
/// cross-entropy loss on one example.
pub fn grad_check(
    model: &RecurrentClassifier<f64>,
    seq: &TokenSequence,
    gold: ClassLabel,
    epsilon: f64,
) -> Result<f64> {
    let (_, cache) = model.forward(seq)?;
    let grads = model.backward(&cache, gold)?;
    grad_check_against(model, seq, gold, epsilon, &grads)
}

/// [`grad_check`] against a caller-supplied gradient.
pub fn grad_check_against(
    model: &RecurrentClassifier<f64>,
    seq: &TokenSequence,
    gold: ClassLabel,
    epsilon: f64,
    analytic: &GradientSet<f64>,
) -> Result<f64> {
    let mut flat: Vec<Vec<f64>> = Vec::new();
    // index into all_tensors(): the embedding is tensor 0
    let first = match analytic.embedding_dense(model.arch.vocab_size, model.arch.embed_dim) {
        Some(e) => {
            flat.push(e);
            0
        }
        None => 1,
    };
    flat.extend(
        analytic
            .dense_tensors()
            .into_iter()
            .map(|(_, t)| t.to_vec()),
    );

    let mut work = model.clone();
    let mut worst = 0.0f64;
    for (k, grad) in flat.iter().enumerate() {
        let ti = first + k;
        for (j, &a) in grad.iter().enumerate() {
            let orig = work.all_tensors_mut()[ti][j];
            work.all_tensors_mut()[ti][j] = orig + epsilon;
            let plus = work.loss(seq, gold)?;
            work.all_tensors_mut()[ti][j] = orig - epsilon;
            let minus = work.loss(seq, gold)?;
            work.all_tensors_mut()[ti][j] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let denom = a.abs().max(numeric.abs()).max(1e-12);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}
