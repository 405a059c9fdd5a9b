use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::cell::{Cell, Chain, GruCell, LstmCell};
use super::tensor::{cast, log_sum_exp, softmax, Matrix, Real};
use crate::corpus::ClassLabel;
use crate::error::{Error, Result};
use crate::vocab::{EmbeddingMatrix, TokenSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Lstm,
    Gru,
}

impl CellKind {
    pub fn name(self) -> &'static str {
        match self {
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lstm" => Some(CellKind::Lstm),
            "gru" => Some(CellKind::Gru),
            _ => None,
        }
    }
}

/// How per-step hidden states become the classifier input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pooling {
    /// Last hidden state of each direction (for the backward chain, the
    /// state after reading the first token).
    #[default]
    FinalState,
    /// Mean of each direction's hidden states over the unpadded steps.
    MeanOverTime,
}

impl Pooling {
    pub fn name(self) -> &'static str {
        match self {
            Pooling::FinalState => "final_state",
            Pooling::MeanOverTime => "mean_over_time",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "final_state" => Some(Pooling::FinalState),
            "mean_over_time" => Some(Pooling::MeanOverTime),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub cell: CellKind,
    pub hidden: usize,
    pub embed_dim: usize,
    pub vocab_size: usize,
    pub bidirectional: bool,
    pub pooling: Pooling,
    pub trainable_embedding: bool,
}

impl Architecture {
    /// Width of the pooled representation fed to the head.
    pub fn head_input(&self) -> usize {
        if self.bidirectional {
            2 * self.hidden
        } else {
            self.hidden
        }
    }

    fn new_cell<T: Real>(&self, rng: Option<&mut ChaCha8Rng>) -> Cell<T> {
        match (self.cell, rng) {
            (CellKind::Lstm, Some(rng)) => {
                Cell::Lstm(LstmCell::init(self.embed_dim, self.hidden, rng))
            }
            (CellKind::Gru, Some(rng)) => {
                Cell::Gru(GruCell::init(self.embed_dim, self.hidden, rng))
            }
            (CellKind::Lstm, None) => Cell::Lstm(LstmCell::zeros(self.embed_dim, self.hidden)),
            (CellKind::Gru, None) => Cell::Gru(GruCell::zeros(self.embed_dim, self.hidden)),
        }
    }
}

/// Embedding lookup, one or two recurrent chains, pooling, and a dense
/// softmax head over the three classes.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentClassifier<T> {
    pub arch: Architecture,
    /// vocab_size x embed_dim; row 0 (padding) is never read.
    pub embedding: Matrix<T>,
    pub forward_cell: Cell<T>,
    pub backward_cell: Option<Cell<T>>,
    /// 3 x head_input
    pub head_w: Matrix<T>,
    pub head_b: Vec<T>,
}

/// Forward-chain states and, when bidirectional, backward-chain states.
pub type HiddenStates<T> = (Vec<Vec<T>>, Option<Vec<Vec<T>>>);

/// Everything `backward` needs from a `forward` call.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    arch: Architecture,
    ids: Vec<usize>,
    fwd: Chain<T>,
    bwd: Option<Chain<T>>,
    pooled: Vec<T>,
    logits: Vec<T>,
    pub probabilities: Vec<T>,
}

impl<T: Real> ForwardCache<T> {
    pub fn logits(&self) -> &[T] {
        &self.logits
    }

    pub fn pooled(&self) -> &[T] {
        &self.pooled
    }

    /// `weight * -ln p_gold`, computed from the logits.
    pub fn loss(&self, gold: ClassLabel, weight: T) -> T {
        weight * (log_sum_exp(&self.logits) - self.logits[gold.code()])
    }
}

/// Gradients congruent with a [`RecurrentClassifier`]. Embedding gradients
/// are kept as sparse rows (only rows of tokens that occurred) and are
/// absent altogether for a frozen embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T> {
    pub embedding: Option<BTreeMap<usize, Vec<T>>>,
    pub forward_cell: Cell<T>,
    pub backward_cell: Option<Cell<T>>,
    pub head_w: Matrix<T>,
    pub head_b: Vec<T>,
}

impl<T: Real> RecurrentClassifier<T> {
    /// Model with cells and head initialized from `seed` and the given
    /// (pretrained or random) embedding table.
    pub fn new(arch: Architecture, embedding: &EmbeddingMatrix, seed: u64) -> Result<Self> {
        if embedding.rows() != arch.vocab_size || embedding.dim() != arch.embed_dim {
            return Err(Error::DimensionMismatch(format!(
                "embedding is {}x{}, architecture wants {}x{}",
                embedding.rows(),
                embedding.dim(),
                arch.vocab_size,
                arch.embed_dim
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let forward_cell = arch.new_cell(Some(&mut rng));
        let backward_cell = arch.bidirectional.then(|| arch.new_cell(Some(&mut rng)));
        let hb = 1.0 / (arch.head_input().max(1) as f64).sqrt();
        let head_w = Matrix::uniform(ClassLabel::COUNT, arch.head_input(), hb, &mut rng);
        Ok(RecurrentClassifier {
            arch,
            embedding: Matrix::from_vec(
                arch.vocab_size,
                arch.embed_dim,
                embedding.as_slice().iter().map(|&v| cast(v)).collect(),
            ),
            forward_cell,
            backward_cell,
            head_w,
            head_b: vec![T::zero(); ClassLabel::COUNT],
        })
    }

    /// All parameters zero.
    pub fn zeros(arch: Architecture) -> Self {
        RecurrentClassifier {
            arch,
            embedding: Matrix::zeros(arch.vocab_size, arch.embed_dim),
            forward_cell: arch.new_cell(None),
            backward_cell: arch.bidirectional.then(|| arch.new_cell(None)),
            head_w: Matrix::zeros(ClassLabel::COUNT, arch.head_input()),
            head_b: vec![T::zero(); ClassLabel::COUNT],
        }
    }

    fn check_ids(&self, seq: &TokenSequence) -> Result<()> {
        if seq.true_length > seq.ids.len() {
            return Err(Error::DimensionMismatch(
                "true_length exceeds sequence length".into(),
            ));
        }
        if let Some(&bad) = seq.content().iter().find(|&&id| id >= self.arch.vocab_size) {
            return Err(Error::DimensionMismatch(format!(
                "token id {} outside vocabulary of {}",
                bad, self.arch.vocab_size
            )));
        }
        Ok(())
    }

    fn pool(&self, chain: &Chain<T>, out: &mut Vec<T>) {
        let len = chain.len();
        let h = self.arch.hidden;
        if len == 0 {
            out.extend(std::iter::repeat_n(T::zero(), h));
            return;
        }
        match self.arch.pooling {
            Pooling::FinalState => out.extend_from_slice(chain.hidden_at(len - 1)),
            Pooling::MeanOverTime => {
                let mut acc = vec![T::zero(); h];
                for t in 0..len {
                    for (a, &v) in acc.iter_mut().zip(chain.hidden_at(t)) {
                        *a += v;
                    }
                }
                let n: T = cast(len as f64);
                out.extend(acc.into_iter().map(|v| v / n));
            }
        }
    }

    /// Class probabilities plus the cache for [`backward`](Self::backward).
    /// Only the first `true_length` positions are read.
    pub fn forward(&self, seq: &TokenSequence) -> Result<(Vec<T>, ForwardCache<T>)> {
        self.check_ids(seq)?;
        let ids = seq.content().to_vec();
        let xs: Vec<&[T]> = ids.iter().map(|&id| self.embedding.row(id)).collect();
        let fwd = self.forward_cell.run(&xs);
        let bwd = self.backward_cell.as_ref().map(|cell| {
            let rev: Vec<&[T]> = xs.iter().rev().copied().collect();
            cell.run(&rev)
        });
        let mut pooled = Vec::with_capacity(self.arch.head_input());
        self.pool(&fwd, &mut pooled);
        if let Some(b) = &bwd {
            self.pool(b, &mut pooled);
        }
        let mut logits = self.head_b.clone();
        self.head_w.matvec_add(&pooled, &mut logits);
        let probabilities = softmax(&logits);
        let cache = ForwardCache {
            arch: self.arch,
            ids,
            fwd,
            bwd,
            pooled,
            logits,
            probabilities: probabilities.clone(),
        };
        Ok((probabilities, cache))
    }

    pub fn predict_proba(&self, seq: &TokenSequence) -> Result<Vec<T>> {
        Ok(self.forward(seq)?.0)
    }

    /// Predicted class (ties to the lower code) and probabilities.
    pub fn predict(&self, seq: &TokenSequence) -> Result<(ClassLabel, Vec<T>)> {
        let p = self.predict_proba(seq)?;
        let mut best = 0;
        for c in 1..p.len() {
            if p[c] > p[best] {
                best = c;
            }
        }
        Ok((ClassLabel::from_code(best).expect("three classes"), p))
    }

    pub fn loss(&self, seq: &TokenSequence, gold: ClassLabel) -> Result<T> {
        let (_, cache) = self.forward(seq)?;
        Ok(cache.loss(gold, T::one()))
    }

    /// Per-step hidden states of the forward chain and (if present) the
    /// backward chain, each in processing order.
    pub fn hidden_states(&self, seq: &TokenSequence) -> Result<HiddenStates<T>> {
        let (_, cache) = self.forward(seq)?;
        let collect = |c: &Chain<T>| (0..c.len()).map(|t| c.hidden_at(t).to_vec()).collect();
        Ok((collect(&cache.fwd), cache.bwd.as_ref().map(collect)))
    }

    /// Exact cross-entropy gradients for one example.
    pub fn backward(&self, cache: &ForwardCache<T>, gold: ClassLabel) -> Result<GradientSet<T>> {
        let mut grads = GradientSet::zeros_for(self);
        self.accumulate_gradients(cache, gold, T::one(), &mut grads)?;
        Ok(grads)
    }

    /// Add `scale *` the gradient of the unweighted cross-entropy into `grads`.
    /// Class weighting and batch averaging are both folded into `scale`.
    pub fn accumulate_gradients(
        &self,
        cache: &ForwardCache<T>,
        gold: ClassLabel,
        scale: T,
        grads: &mut GradientSet<T>,
    ) -> Result<()> {
        if cache.arch != self.arch || cache.pooled.len() != self.arch.head_input() {
            return Err(Error::DimensionMismatch(
                "forward cache does not belong to this model".into(),
            ));
        }
        if !grads.matches(self) {
            return Err(Error::DimensionMismatch(
                "gradient set does not match this model".into(),
            ));
        }
        let h = self.arch.hidden;
        let dlogits: Vec<T> = cache
            .probabilities
            .iter()
            .enumerate()
            .map(|(c, &p)| {
                scale
                    * (p - if c == gold.code() {
                        T::one()
                    } else {
                        T::zero()
                    })
            })
            .collect();
        grads.head_w.add_outer(&dlogits, &cache.pooled);
        for (g, &d) in grads.head_b.iter_mut().zip(&dlogits) {
            *g += d;
        }
        let len = cache.ids.len();
        if len == 0 {
            return Ok(());
        }
        let mut dpooled = vec![T::zero(); self.arch.head_input()];
        self.head_w.t_matvec_add(&dlogits, &mut dpooled);

        let spread = |part: &[T]| -> Vec<Vec<T>> {
            let mut dh = vec![vec![T::zero(); h]; len];
            match self.arch.pooling {
                Pooling::FinalState => dh[len - 1].copy_from_slice(part),
                Pooling::MeanOverTime => {
                    let n: T = cast(len as f64);
                    for row in dh.iter_mut() {
                        for (r, &p) in row.iter_mut().zip(part) {
                            *r = p / n;
                        }
                    }
                }
            }
            dh
        };

        let d = self.arch.embed_dim;
        let mut dxs = vec![vec![T::zero(); d]; len];
        self.forward_cell.backprop(
            &cache.fwd,
            &spread(&dpooled[..h]),
            &mut grads.forward_cell,
            &mut dxs,
        );
        if let (Some(cell), Some(chain), Some(g)) = (
            &self.backward_cell,
            &cache.bwd,
            grads.backward_cell.as_mut(),
        ) {
            let mut dxs_rev = vec![vec![T::zero(); d]; len];
            cell.backprop(chain, &spread(&dpooled[h..]), g, &mut dxs_rev);
            for (t, dx) in dxs_rev.into_iter().enumerate() {
                for (a, b) in dxs[len - 1 - t].iter_mut().zip(dx) {
                    *a += b;
                }
            }
        }
        if let Some(emb) = grads.embedding.as_mut() {
            for (&id, dx) in cache.ids.iter().zip(dxs) {
                let row = emb.entry(id).or_insert_with(|| vec![T::zero(); d]);
                for (a, b) in row.iter_mut().zip(dx) {
                    *a += b;
                }
            }
        }
        Ok(())
    }

    /// Named non-embedding tensors in a fixed order (forward cell, backward
    /// cell, head).
    pub fn dense_tensors(&self) -> Vec<(String, &[T])> {
        let mut out: Vec<(String, &[T])> = self
            .forward_cell
            .tensors()
            .into_iter()
            .map(|(n, t)| (format!("forward.{}", n), t))
            .collect();
        if let Some(b) = &self.backward_cell {
            out.extend(
                b.tensors()
                    .into_iter()
                    .map(|(n, t)| (format!("backward.{}", n), t)),
            );
        }
        out.push(("head.W".into(), self.head_w.data.as_slice()));
        out.push(("head.b".into(), self.head_b.as_slice()));
        out
    }

    pub fn dense_tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.forward_cell.tensors_mut();
        if let Some(b) = self.backward_cell.as_mut() {
            out.extend(b.tensors_mut());
        }
        out.push(self.head_w.data.as_mut_slice());
        out.push(self.head_b.as_mut_slice());
        out
    }

    /// Every tensor, embedding first.
    pub fn all_tensors(&self) -> Vec<(String, &[T])> {
        let mut out = vec![("embedding".to_string(), self.embedding.data.as_slice())];
        out.extend(self.dense_tensors());
        out
    }

    pub fn all_tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = vec![self.embedding.data.as_mut_slice()];
        out.extend(self.forward_cell.tensors_mut());
        if let Some(b) = self.backward_cell.as_mut() {
            out.extend(b.tensors_mut());
        }
        out.push(self.head_w.data.as_mut_slice());
        out.push(self.head_b.as_mut_slice());
        out
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, t) in self.all_tensors() {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("parameter {}", name)));
            }
        }
        Ok(())
    }

    /// Same model at another precision.
    pub fn convert<U: Real>(&self) -> RecurrentClassifier<U> {
        let mut out = RecurrentClassifier::<U>::zeros(self.arch);
        for (dst, (_, src)) in out.all_tensors_mut().into_iter().zip(self.all_tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = cast(s.to_f64().expect("finite float"));
            }
        }
        out
    }
}

impl<T: Real> GradientSet<T> {
    pub fn zeros_for(model: &RecurrentClassifier<T>) -> Self {
        GradientSet {
            embedding: model.arch.trainable_embedding.then(BTreeMap::new),
            forward_cell: model.forward_cell.zeros_like(),
            backward_cell: model.backward_cell.as_ref().map(Cell::zeros_like),
            head_w: Matrix::zeros(model.head_w.rows, model.head_w.cols),
            head_b: vec![T::zero(); model.head_b.len()],
        }
    }

    fn matches(&self, model: &RecurrentClassifier<T>) -> bool {
        let cell_match = |a: &Cell<T>, b: &Cell<T>| {
            std::mem::discriminant(a) == std::mem::discriminant(b)
                && a.tensor_shapes() == b.tensor_shapes()
        };
        self.embedding.is_some() == model.arch.trainable_embedding
            && cell_match(&self.forward_cell, &model.forward_cell)
            && match (&self.backward_cell, &model.backward_cell) {
                (Some(a), Some(b)) => cell_match(a, b),
                (None, None) => true,
                _ => false,
            }
            && self.head_w.same_shape(&model.head_w)
    }

    /// Reset to zero, keeping allocations.
    pub fn clear(&mut self) {
        if let Some(e) = self.embedding.as_mut() {
            e.clear();
        }
        for t in self.dense_tensors_mut() {
            t.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    /// Same order as [`RecurrentClassifier::dense_tensors`].
    pub fn dense_tensors(&self) -> Vec<(String, &[T])> {
        let mut out: Vec<(String, &[T])> = self
            .forward_cell
            .tensors()
            .into_iter()
            .map(|(n, t)| (format!("forward.{}", n), t))
            .collect();
        if let Some(b) = &self.backward_cell {
            out.extend(
                b.tensors()
                    .into_iter()
                    .map(|(n, t)| (format!("backward.{}", n), t)),
            );
        }
        out.push(("head.W".into(), self.head_w.data.as_slice()));
        out.push(("head.b".into(), self.head_b.as_slice()));
        out
    }

    pub fn dense_tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.forward_cell.tensors_mut();
        if let Some(b) = self.backward_cell.as_mut() {
            out.extend(b.tensors_mut());
        }
        out.push(self.head_w.data.as_mut_slice());
        out.push(self.head_b.as_mut_slice());
        out
    }

    /// Embedding gradient as a dense `vocab x dim` table (zeros for rows
    /// that were not touched).
    pub fn embedding_dense(&self, vocab_size: usize, dim: usize) -> Option<Vec<T>> {
        self.embedding.as_ref().map(|rows| {
            let mut out = vec![T::zero(); vocab_size * dim];
            for (&id, row) in rows {
                out[id * dim..(id + 1) * dim].copy_from_slice(row);
            }
            out
        })
    }

    pub fn scale(&mut self, factor: T) {
        if let Some(e) = self.embedding.as_mut() {
            for row in e.values_mut() {
                row.iter_mut().for_each(|v| *v *= factor);
            }
        }
        for t in self.dense_tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Error naming the first tensor holding a NaN or infinity.
    pub fn check_finite(&self) -> Result<()> {
        if let Some(e) = &self.embedding {
            if let Some((id, _)) = e.iter().find(|(_, r)| r.iter().any(|v| !v.is_finite())) {
                return Err(Error::NonFinite(format!(
                    "gradient of embedding row {}",
                    id
                )));
            }
        }
        for (name, t) in self.dense_tensors() {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of {}", name)));
            }
        }
        Ok(())
    }
}
