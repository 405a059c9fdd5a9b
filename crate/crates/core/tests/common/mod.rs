//! Independent reference implementations shared by the integration and
//! acceptance tests. None of them calls into the code under test beyond
//! plain data types.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hsd::corpus::ClassLabel;
use hsd::recurrent::{Architecture, CellKind, Pooling, RecurrentClassifier};
use hsd::vocab::{EmbeddingMatrix, TokenSequence};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense tf-idf rows over the sorted feature list, straight from the
/// formulas: raw count times ln((1+N)/(1+df)) + 1, then unit L2 norm.
pub fn tfidf_reference(corpus: &[Vec<String>], min_df: usize) -> (Vec<String>, Vec<Vec<f64>>) {
    let n = corpus.len() as f64;
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in corpus {
        let uniq: BTreeSet<&str> = doc.iter().map(String::as_str).collect();
        for t in uniq {
            *df.entry(t).or_default() += 1;
        }
    }
    let features: Vec<String> = df
        .iter()
        .filter(|(_, &d)| d >= min_df)
        .map(|(t, _)| t.to_string())
        .collect();
    let rows = corpus
        .iter()
        .map(|doc| {
            let raw: Vec<f64> = features
                .iter()
                .map(|f| {
                    let tf = doc.iter().filter(|t| *t == f).count() as f64;
                    let idf = ((1.0 + n) / (1.0 + df[f.as_str()] as f64)).ln() + 1.0;
                    tf * idf
                })
                .collect();
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            raw.iter()
                .map(|v| if norm > 0.0 { v / norm } else { 0.0 })
                .collect()
        })
        .collect();
    (features, rows)
}

pub struct BruteMetrics {
    pub confusion: [[usize; 3]; 3],
    pub precision: [f64; 3],
    pub recall: [f64; 3],
    pub f1: [f64; 3],
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
}

/// Per-class TP/FP/FN counted one class at a time.
#[allow(clippy::needless_range_loop)]
pub fn brute_metrics(pred: &[usize], gold: &[usize]) -> BruteMetrics {
    let mut confusion = [[0usize; 3]; 3];
    for g in 0..3 {
        for p in 0..3 {
            confusion[g][p] = pred
                .iter()
                .zip(gold)
                .filter(|(a, b)| **a == p && **b == g)
                .count();
        }
    }
    let mut precision = [0.0; 3];
    let mut recall = [0.0; 3];
    let mut f1 = [0.0; 3];
    let mut support = [0usize; 3];
    for c in 0..3 {
        let tp = pred
            .iter()
            .zip(gold)
            .filter(|(p, g)| **p == c && **g == c)
            .count() as f64;
        let fp = pred
            .iter()
            .zip(gold)
            .filter(|(p, g)| **p == c && **g != c)
            .count() as f64;
        let fn_ = pred
            .iter()
            .zip(gold)
            .filter(|(p, g)| **p != c && **g == c)
            .count() as f64;
        support[c] = gold.iter().filter(|g| **g == c).count();
        precision[c] = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        recall[c] = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        f1[c] = if precision[c] + recall[c] > 0.0 {
            2.0 * precision[c] * recall[c] / (precision[c] + recall[c])
        } else {
            0.0
        };
    }
    let n = gold.len() as f64;
    BruteMetrics {
        confusion,
        precision,
        recall,
        f1,
        macro_f1: (f1[0] + f1[1] + f1[2]) / 3.0,
        weighted_f1: (0..3).map(|c| f1[c] * support[c] as f64).sum::<f64>() / n,
        accuracy: pred.iter().zip(gold).filter(|(p, g)| p == g).count() as f64 / n,
    }
}

/// Central finite-difference gradient of `f` at `x`.
pub fn numeric_gradient(x: &[f64], eps: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + eps;
            let up = f(&p);
            p[i] = x[i] - eps;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// Largest elementwise `|a - b| / max(|a|, |b|, 1e-12)`, ignoring pairs
/// that agree to within `atol`. An exactly cancelling component differs
/// from its finite difference only by rounding noise, which would
/// otherwise read as a relative error near 1.
pub fn max_rel_err(a: &[f64], b: &[f64], atol: f64) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(x, y)| (*x - *y).abs() > atol)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-12))
        .fold(0.0, f64::max)
}

/// Linear SVM `min lambda ||w||^2 + mean hinge` (bias free) through its
/// dual, solved by two-coordinate descent on the most violating pair.
/// Returns `(w, b)`.
pub fn svm_dual_reference(xs: &[Vec<f64>], ys: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let n = xs.len();
    let c = 1.0 / (2.0 * lambda * n as f64);
    let k = |i: usize, j: usize| xs[i].iter().zip(&xs[j]).map(|(a, b)| a * b).sum::<f64>();
    let kern: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| k(i, j)).collect()).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let (mut gmax, mut gmin) = (0.0, 0.0);
    for _ in 0..200_000 {
        let mut up = None;
        let mut low = None;
        gmax = f64::NEG_INFINITY;
        gmin = f64::INFINITY;
        for t in 0..n {
            let v = -ys[t] * grad[t];
            let in_up = (ys[t] > 0.0 && alpha[t] < c) || (ys[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (ys[t] > 0.0 && alpha[t] > 0.0) || (ys[t] < 0.0 && alpha[t] < c);
            if in_up && v > gmax {
                gmax = v;
                up = Some(t);
            }
            if in_low && v < gmin {
                gmin = v;
                low = Some(t);
            }
        }
        let (Some(i), Some(j)) = (up, low) else { break };
        if gmax - gmin < 1e-12 {
            break;
        }
        let curv = (kern[i][i] + kern[j][j] - 2.0 * kern[i][j]).max(1e-12);
        let cap_i = if ys[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let cap_j = if ys[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        let step = ((gmax - gmin) / curv).min(cap_i).min(cap_j);
        alpha[i] += ys[i] * step;
        alpha[j] -= ys[j] * step;
        for t in 0..n {
            grad[t] += ys[t] * step * (kern[t][i] - kern[t][j]);
        }
    }
    let dim = xs[0].len();
    let mut w = vec![0.0; dim];
    for i in 0..n {
        for d in 0..dim {
            w[d] += alpha[i] * ys[i] * xs[i][d];
        }
    }
    let free: Vec<usize> = (0..n)
        .filter(|&i| alpha[i] > 1e-9 && alpha[i] < c - 1e-9)
        .collect();
    let b = if free.is_empty() {
        (gmax + gmin) / 2.0
    } else {
        free.iter()
            .map(|&i| ys[i] - w.iter().zip(&xs[i]).map(|(a, b)| a * b).sum::<f64>())
            .sum::<f64>()
            / free.len() as f64
    };
    (w, b)
}

/// Tiny architecture; bits 0..3 of `combo` pick cell kind, direction and
/// pooling so that consecutive combos cover all eight variants.
pub fn tiny_arch(r: &mut ChaCha8Rng, combo: usize) -> Architecture {
    Architecture {
        cell: if combo & 1 == 0 {
            CellKind::Lstm
        } else {
            CellKind::Gru
        },
        hidden: r.gen_range(1..=3),
        embed_dim: r.gen_range(1..=3),
        vocab_size: 6,
        bidirectional: combo & 2 != 0,
        pooling: if combo & 4 == 0 {
            Pooling::FinalState
        } else {
            Pooling::MeanOverTime
        },
        trainable_embedding: true,
    }
}

pub fn random_arch(r: &mut ChaCha8Rng) -> Architecture {
    let combo = r.gen_range(0..8);
    tiny_arch(r, combo)
}

/// Model with every parameter drawn from uniform(-scale, scale), pad row
/// left at zero.
pub fn random_model(arch: Architecture, seed: u64, scale: f64) -> RecurrentClassifier<f64> {
    let emb = EmbeddingMatrix::random(arch.vocab_size, arch.embed_dim, 0.25, seed);
    let mut m = RecurrentClassifier::new(arch, &emb, seed).expect("valid arch");
    let mut r = rng(seed ^ 0x5eed);
    let d = arch.embed_dim;
    for (k, t) in m.all_tensors_mut().into_iter().enumerate() {
        for (i, v) in t.iter_mut().enumerate() {
            if k == 0 && i < d {
                continue;
            }
            *v = r.gen_range(-scale..scale);
        }
    }
    m
}

pub fn random_seq(
    r: &mut ChaCha8Rng,
    vocab: usize,
    max_len: usize,
    min_len: usize,
) -> TokenSequence {
    let len = r.gen_range(min_len..=max_len);
    let mut ids: Vec<usize> = (0..len).map(|_| r.gen_range(1..vocab)).collect();
    ids.resize(max_len, 0);
    TokenSequence {
        ids,
        true_length: len,
    }
}

/// Max relative error of the model's own backward pass against a
/// five-point stencil `(-f(2h) + 8f(h) - 8f(-h) + f(-2h)) / 12h`, whose
/// truncation error is O(h^4) so a wide step keeps rounding noise near
/// 1e-14. Pairs within 1e-12 of each other count as agreeing.
pub fn five_point_check(
    model: &RecurrentClassifier<f64>,
    seq: &TokenSequence,
    gold: ClassLabel,
    h: f64,
) -> f64 {
    let (_, cache) = model.forward(seq).expect("valid sequence");
    let grads = model.backward(&cache, gold).expect("matching cache");
    let mut flat: Vec<Vec<f64>> = Vec::new();
    let first = match grads.embedding_dense(model.arch.vocab_size, model.arch.embed_dim) {
        Some(e) => {
            flat.push(e);
            0
        }
        None => 1,
    };
    flat.extend(grads.dense_tensors().into_iter().map(|(_, t)| t.to_vec()));
    let mut work = model.clone();
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for (k, g) in flat.iter().enumerate() {
        for (j, &a) in g.iter().enumerate() {
            let orig = work.all_tensors_mut()[first + k][j];
            let mut f = |d: f64| {
                work.all_tensors_mut()[first + k][j] = orig + d;
                let v = work.loss(seq, gold).expect("valid sequence");
                work.all_tensors_mut()[first + k][j] = orig;
                v
            };
            numeric.push((-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h));
            analytic.push(a);
        }
    }
    max_rel_err(&analytic, &numeric, 1e-12)
}
