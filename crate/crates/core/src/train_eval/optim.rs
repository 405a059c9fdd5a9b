use serde::Serialize;

use crate::error::{Error, Result};
use crate::recurrent::{cast, GradientSet, Real, RecurrentClassifier};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam { .. } => "adam",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let OptimizerKind::Adam { beta1, beta2, eps } = *self {
            let beta_ok = |b: f64| (0.0..1.0).contains(&b);
            if !beta_ok(beta1) || !beta_ok(beta2) || eps.is_nan() || eps <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "adam needs betas in [0, 1) and eps > 0, got ({}, {}, {})",
                    beta1, beta2, eps
                )));
            }
        }
        Ok(())
    }
}

pub fn sgd_update<T: Real>(params: &mut [T], grads: &[T], lr: T) {
    for (p, &g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdamStep<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    /// 1-based step count used for bias correction.
    pub t: i32,
}

pub fn adam_update<T: Real>(
    params: &mut [T],
    grads: &[T],
    m: &mut [T],
    v: &mut [T],
    s: AdamStep<T>,
) {
    let one = T::one();
    let c1 = one - s.beta1.powi(s.t);
    let c2 = one - s.beta2.powi(s.t);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = s.beta1 * m[i] + (one - s.beta1) * g;
        v[i] = s.beta2 * v[i] + (one - s.beta2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        params[i] -= s.lr * m_hat / (v_hat.sqrt() + s.eps);
    }
}

/// Optimizer state for a [`RecurrentClassifier`]. Adam keeps dense moments
/// for every tensor including the embedding; SGD touches only the embedding
/// rows that received a gradient.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    kind: OptimizerKind,
    lr: f64,
    step: i32,
    moments: Vec<(Vec<T>, Vec<T>)>,
    embedding_moments: Option<(Vec<T>, Vec<T>)>,
}

impl<T: Real> Optimizer<T> {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Optimizer {
            kind,
            lr,
            step: 0,
            moments: Vec::new(),
            embedding_moments: None,
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    pub fn step(
        &mut self,
        model: &mut RecurrentClassifier<T>,
        grads: &GradientSet<T>,
    ) -> Result<()> {
        grads.check_finite()?;
        let lr: T = cast(self.lr);
        self.step += 1;
        let dim = model.arch.embed_dim;
        let vocab = model.arch.vocab_size;
        let grad_tensors: Vec<Vec<T>> = grads
            .dense_tensors()
            .into_iter()
            .map(|(_, g)| g.to_vec())
            .collect();
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in model.dense_tensors_mut().into_iter().zip(&grad_tensors) {
                    sgd_update(p, g, lr);
                }
                if let Some(rows) = &grads.embedding {
                    for (&id, g) in rows {
                        sgd_update(model.embedding.row_mut(id), g, lr);
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let s = AdamStep {
                    lr,
                    beta1: cast(beta1),
                    beta2: cast(beta2),
                    eps: cast(eps),
                    t: self.step,
                };
                if self.moments.is_empty() {
                    self.moments = grad_tensors
                        .iter()
                        .map(|g| (vec![T::zero(); g.len()], vec![T::zero(); g.len()]))
                        .collect();
                }
                for ((p, g), (m, v)) in model
                    .dense_tensors_mut()
                    .into_iter()
                    .zip(&grad_tensors)
                    .zip(self.moments.iter_mut())
                {
                    adam_update(p, g, m, v, s);
                }
                if let Some(dense) = grads.embedding_dense(vocab, dim) {
                    let (m, v) = self.embedding_moments.get_or_insert_with(|| {
                        (vec![T::zero(); dense.len()], vec![T::zero(); dense.len()])
                    });
                    adam_update(&mut model.embedding.data, &dense, m, v, s);
                }
            }
        }
        Ok(())
    }
}
