//! Linear classifiers over sparse TF-IDF features: multinomial logistic
//! regression, L2-regularized linear SVM (hinge loss), and the two-stage
//! SVM cascade (CLEAN vs rest, then OFFENSIVE vs HATE).

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::ClassLabel;
use crate::error::{Error, Result};
use crate::tfidf::SparseVector;

const LINEAR_TAG: &str = "hsd-linear v1";
const CASCADE_TAG: &str = "hsd-cascade v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearKind {
    Logistic,
    Hinge,
}

impl LinearKind {
    fn name(self) -> &'static str {
        match self {
            LinearKind::Logistic => "logistic",
            LinearKind::Hinge => "hinge",
        }
    }
}

/// `C x F` weights (row-major) and `C` biases.
///
/// A binary hinge model is stored with `C = 2` as rows `(-w, w)` and biases
/// `(-b, b)`, so the class scores are `(-s, s)` with `s = w.x + b` and the
/// usual argmax applies.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub classes: usize,
    pub features: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(kind: LinearKind, classes: usize, features: usize) -> Self {
        LinearModel {
            kind,
            classes,
            features,
            weights: vec![0.0; classes * features],
            bias: vec![0.0; classes],
        }
    }

    fn from_margin(w: &[f64], b: f64) -> Self {
        let features = w.len();
        let mut weights = Vec::with_capacity(2 * features);
        weights.extend(w.iter().map(|v| -v));
        weights.extend_from_slice(w);
        LinearModel {
            kind: LinearKind::Hinge,
            classes: 2,
            features,
            weights,
            bias: vec![-b, b],
        }
    }

    /// Hinge model that always predicts `class` (0 or 1).
    pub fn constant_binary(features: usize, class: usize) -> Self {
        let b = if class == 1 { 1.0 } else { -1.0 };
        Self::from_margin(&vec![0.0; features], b)
    }

    pub fn row(&self, c: usize) -> &[f64] {
        &self.weights[c * self.features..(c + 1) * self.features]
    }

    /// Margin weight vector and bias of a binary hinge model.
    pub fn margin_params(&self) -> (&[f64], f64) {
        (self.row(1), self.bias[1])
    }

    /// Raw affine scores `W x + b`.
    pub fn scores(&self, x: &SparseVector) -> Vec<f64> {
        (0..self.classes)
            .map(|c| x.dot(self.row(c)) + self.bias[c])
            .collect()
    }

    /// Margin `w.x + b` of a binary hinge model.
    pub fn margin(&self, x: &SparseVector) -> f64 {
        let (w, b) = self.margin_params();
        x.dot(w) + b
    }

    /// Class index and score vector: softmax probabilities for logistic
    /// models, raw margins for hinge models. Ties go to the lower index.
    pub fn predict(&self, x: &SparseVector) -> (usize, Vec<f64>) {
        let raw = self.scores(x);
        let scores = match self.kind {
            LinearKind::Logistic => softmax(&raw),
            LinearKind::Hinge => raw,
        };
        (argmax(&scores), scores)
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.weights.iter().chain(&self.bias).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(format!(
                "{} model parameters",
                self.kind.name()
            )))
        }
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn write_text(&self, out: &mut String) {
        let _ = writeln!(out, "{}", LINEAR_TAG);
        let _ = writeln!(out, "kind {}", self.kind.name());
        let _ = writeln!(out, "shape {} {}", self.classes, self.features);
        let _ = writeln!(out, "bias {}", join_floats(&self.bias));
        for c in 0..self.classes {
            let _ = writeln!(out, "row {}", join_floats(self.row(c)));
        }
    }

    fn read_text<'a>(lines: &mut impl Iterator<Item = &'a str>) -> Result<Self> {
        let bad = |m: &str| Error::ModelFormat(format!("linear model: {}", m));
        if lines.next() != Some(LINEAR_TAG) {
            return Err(bad("missing format tag"));
        }
        let kind = match lines.next() {
            Some("kind logistic") => LinearKind::Logistic,
            Some("kind hinge") => LinearKind::Hinge,
            _ => return Err(bad("bad kind line")),
        };
        let shape: Vec<usize> = lines
            .next()
            .and_then(|l| l.strip_prefix("shape "))
            .ok_or_else(|| bad("missing shape"))?
            .split(' ')
            .map(|v| v.parse().map_err(|_| bad("bad shape")))
            .collect::<Result<_>>()?;
        let [classes, features] = shape[..] else {
            return Err(bad("bad shape"));
        };
        let bias = parse_floats(lines.next().and_then(|l| l.strip_prefix("bias")), classes)?;
        let mut weights = Vec::with_capacity(classes * features);
        for _ in 0..classes {
            weights.extend(parse_floats(
                lines.next().and_then(|l| l.strip_prefix("row")),
                features,
            )?);
        }
        Ok(LinearModel {
            kind,
            classes,
            features,
            weights,
            bias,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        self.write_text(&mut s);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::read_text(&mut text.lines())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn join_floats(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_floats(line: Option<&str>, n: usize) -> Result<Vec<f64>> {
    let line = line.ok_or_else(|| Error::ModelFormat("truncated linear model".into()))?;
    let v: Vec<f64> = line
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::ModelFormat(format!("bad float: {}", e)))?;
    if v.len() != n {
        return Err(Error::ModelFormat(format!(
            "expected {} values, found {}",
            n,
            v.len()
        )));
    }
    Ok(v)
}

/// Numerically stable softmax (max-shifted), floored at the smallest
/// positive normal `f64`.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    crate::recurrent::softmax(logits)
}

/// First index of the maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Per-class loss weights, rescaled to mean 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassWeights(pub [f64; 3]);

impl Default for ClassWeights {
    fn default() -> Self {
        ClassWeights([1.0; 3])
    }
}

impl ClassWeights {
    pub fn new(w: [f64; 3]) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "class weights must be positive, got {:?}",
                w
            )));
        }
        let mean = (w[0] + w[1] + w[2]) / 3.0;
        Ok(ClassWeights(w.map(|v| v / mean)))
    }

    /// `N / (3 n_c)` for classes present in `labels`, 1 for absent ones.
    pub fn inverse_frequency(labels: &[ClassLabel]) -> Result<Self> {
        let mut counts = [0usize; 3];
        for l in labels {
            counts[l.code()] += 1;
        }
        let n = labels.len() as f64;
        Self::new(counts.map(|c| if c == 0 { 1.0 } else { n / (3.0 * c as f64) }))
    }

    pub fn get(&self, label: usize) -> f64 {
        self.0[label]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegHyper {
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub class_weights: Option<ClassWeights>,
}

impl Default for LogRegHyper {
    fn default() -> Self {
        LogRegHyper {
            lr: 0.5,
            epochs: 30,
            l2: 1e-4,
            seed: 42,
            batch_size: 32,
            class_weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmHyper {
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
    pub batch_size: usize,
}

impl Default for SvmHyper {
    fn default() -> Self {
        SvmHyper {
            lr: 0.1,
            epochs: 30,
            l2: 1e-4,
            seed: 42,
            batch_size: 32,
        }
    }
}

fn check_hyper(lr: f64, epochs: usize, l2: f64, batch_size: usize) -> Result<()> {
    // lr = 0 is accepted as an explicit no-op run.
    if !lr.is_finite() || lr < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be >= 0, got {}",
            lr
        )));
    }
    if epochs < 1 || batch_size < 1 {
        return Err(Error::InvalidArgument(
            "epochs and batch_size must be >= 1".into(),
        ));
    }
    if l2.is_nan() || l2 < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "l2 must be >= 0, got {}",
            l2
        )));
    }
    Ok(())
}

fn check_dims(features: &[SparseVector], n_labels: usize) -> Result<usize> {
    if features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if features.len() != n_labels {
        return Err(Error::DimensionMismatch(format!(
            "{} feature vectors vs {} labels",
            features.len(),
            n_labels
        )));
    }
    let dim = features[0].dim;
    if let Some(x) = features.iter().find(|x| x.dim != dim) {
        return Err(Error::DimensionMismatch(format!(
            "feature dims {} and {}",
            dim, x.dim
        )));
    }
    Ok(dim)
}

/// Mean weighted cross-entropy plus `l2 * ||W||^2` (bias unregularized).
pub fn logistic_objective(
    model: &LinearModel,
    xs: &[SparseVector],
    ys: &[usize],
    weights: &ClassWeights,
    l2: f64,
) -> f64 {
    let n = xs.len() as f64;
    let data: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| {
            let z = model.scores(x);
            let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            weights.get(y) * (lse - z[y])
        })
        .sum();
    data / n + l2 * model.weights.iter().map(|w| w * w).sum::<f64>()
}

/// Gradient of [`logistic_objective`] as `(dW, db)`.
pub fn logistic_gradient(
    model: &LinearModel,
    xs: &[SparseVector],
    ys: &[usize],
    weights: &ClassWeights,
    l2: f64,
) -> (Vec<f64>, Vec<f64>) {
    let f = model.features;
    let n = xs.len() as f64;
    let mut dw: Vec<f64> = model.weights.iter().map(|w| 2.0 * l2 * w).collect();
    let mut db = vec![0.0; model.classes];
    for (x, &y) in xs.iter().zip(ys) {
        let p = softmax(&model.scores(x));
        let cw = weights.get(y) / n;
        for c in 0..model.classes {
            let delta = cw * (p[c] - if c == y { 1.0 } else { 0.0 });
            db[c] += delta;
            for (j, v) in x.iter() {
                dw[c * f + j] += delta * v;
            }
        }
    }
    (dw, db)
}

/// Mean hinge loss `max(0, 1 - y (w.x + b))` with `y = ±1`, plus `l2 * ||w||^2`.
pub fn hinge_objective(w: &[f64], b: f64, xs: &[SparseVector], ys: &[f64], l2: f64) -> f64 {
    let n = xs.len() as f64;
    let data: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| (1.0 - y * (x.dot(w) + b)).max(0.0))
        .sum();
    data / n + l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// A subgradient of [`hinge_objective`]; the true gradient away from
/// margins of exactly 1.
pub fn hinge_gradient(
    w: &[f64],
    b: f64,
    xs: &[SparseVector],
    ys: &[f64],
    l2: f64,
) -> (Vec<f64>, f64) {
    let n = xs.len() as f64;
    let mut dw: Vec<f64> = w.iter().map(|v| 2.0 * l2 * v).collect();
    let mut db = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        if y * (x.dot(w) + b) < 1.0 {
            db -= y / n;
            for (j, v) in x.iter() {
                dw[j] -= y * v / n;
            }
        }
    }
    (dw, db)
}

pub(crate) fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    order.shuffle(&mut rng);
    order
}

/// Multinomial logistic regression by mini-batch gradient descent.
/// Returns the model and the full training objective after every epoch.
pub fn train_logreg(
    features: &[SparseVector],
    labels: &[ClassLabel],
    hyper: &LogRegHyper,
) -> Result<(LinearModel, Vec<f64>)> {
    check_hyper(hyper.lr, hyper.epochs, hyper.l2, hyper.batch_size)?;
    let dim = check_dims(features, labels.len())?;
    let ys: Vec<usize> = labels.iter().map(|l| l.code()).collect();
    let weights = hyper.class_weights.unwrap_or_default();
    let mut model = LinearModel::zeros(LinearKind::Logistic, ClassLabel::COUNT, dim);
    let mut losses = Vec::with_capacity(hyper.epochs);
    let mut bx = Vec::with_capacity(hyper.batch_size);
    let mut by = Vec::with_capacity(hyper.batch_size);
    for epoch in 0..hyper.epochs {
        let order = epoch_order(features.len(), hyper.seed, epoch);
        for batch in order.chunks(hyper.batch_size) {
            bx.clear();
            by.clear();
            for &i in batch {
                bx.push(features[i].clone());
                by.push(ys[i]);
            }
            let (dw, db) = logistic_gradient(&model, &bx, &by, &weights, hyper.l2);
            for (w, g) in model.weights.iter_mut().zip(&dw) {
                *w -= hyper.lr * g;
            }
            for (b, g) in model.bias.iter_mut().zip(&db) {
                *b -= hyper.lr * g;
            }
        }
        let loss = logistic_objective(&model, features, &ys, &weights, hyper.l2);
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "logistic loss at epoch {}",
                epoch + 1
            )));
        }
        losses.push(loss);
    }
    model.check_finite()?;
    Ok((model, losses))
}

/// Linear SVM by mini-batch subgradient descent on the hinge objective.
/// Labels are binary codes `{0, 1}`; both must be present.
pub fn train_svm_binary(
    features: &[SparseVector],
    labels: &[usize],
    hyper: &SvmHyper,
) -> Result<(LinearModel, Vec<f64>)> {
    check_hyper(hyper.lr, hyper.epochs, hyper.l2, hyper.batch_size)?;
    let dim = check_dims(features, labels.len())?;
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidArgument(format!(
            "binary labels must be 0 or 1, got {}",
            l
        )));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::InvalidArgument(
            "svm training needs both classes present".into(),
        ));
    }
    let ys: Vec<f64> = labels
        .iter()
        .map(|&l| if l == 1 { 1.0 } else { -1.0 })
        .collect();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut losses = Vec::with_capacity(hyper.epochs);
    let mut bx = Vec::with_capacity(hyper.batch_size);
    let mut by = Vec::with_capacity(hyper.batch_size);
    for epoch in 0..hyper.epochs {
        let order = epoch_order(features.len(), hyper.seed, epoch);
        for batch in order.chunks(hyper.batch_size) {
            bx.clear();
            by.clear();
            for &i in batch {
                bx.push(features[i].clone());
                by.push(ys[i]);
            }
            let (dw, db) = hinge_gradient(&w, b, &bx, &by, hyper.l2);
            for (wi, g) in w.iter_mut().zip(&dw) {
                *wi -= hyper.lr * g;
            }
            b -= hyper.lr * db;
        }
        let loss = hinge_objective(&w, b, features, &ys, hyper.l2);
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "hinge loss at epoch {}",
                epoch + 1
            )));
        }
        losses.push(loss);
    }
    let model = LinearModel::from_margin(&w, b);
    model.check_finite()?;
    Ok((model, losses))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    /// CLEAN (0) vs OFFENSIVE-or-HATE (1).
    pub stage_a: LinearModel,
    /// OFFENSIVE (0) vs HATE (1).
    pub stage_b: LinearModel,
}

/// Per-stage training objectives, epoch by epoch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CascadeLosses {
    pub stage_a: Vec<f64>,
    pub stage_b: Vec<f64>,
}

impl CascadeLosses {
    /// Sum of the two stages' objectives per epoch (a stage that was not
    /// trained contributes 0).
    pub fn combined(&self) -> Vec<f64> {
        let n = self.stage_a.len().max(self.stage_b.len());
        (0..n)
            .map(|i| self.stage_a.get(i).unwrap_or(&0.0) + self.stage_b.get(i).unwrap_or(&0.0))
            .collect()
    }
}

/// Train both stages. Stage A sees every document; stage B only the
/// OFFENSIVE and HATE ones. A stage whose training data holds a single
/// class becomes a constant predictor of that class.
pub fn train_cascade(
    features: &[SparseVector],
    labels: &[ClassLabel],
    hyper: &SvmHyper,
) -> Result<(CascadeModel, CascadeLosses)> {
    let dim = check_dims(features, labels.len())?;
    let a_labels: Vec<usize> = labels
        .iter()
        .map(|l| usize::from(*l != ClassLabel::Clean))
        .collect();
    let (stage_a, loss_a) = train_stage(features, &a_labels, dim, hyper)?;

    let mut b_feats = Vec::new();
    let mut b_labels = Vec::new();
    for (x, l) in features.iter().zip(labels) {
        if *l != ClassLabel::Clean {
            b_feats.push(x.clone());
            b_labels.push(usize::from(*l == ClassLabel::Hate));
        }
    }
    let (stage_b, loss_b) = train_stage(&b_feats, &b_labels, dim, hyper)?;
    Ok((
        CascadeModel { stage_a, stage_b },
        CascadeLosses {
            stage_a: loss_a,
            stage_b: loss_b,
        },
    ))
}

fn train_stage(
    features: &[SparseVector],
    labels: &[usize],
    dim: usize,
    hyper: &SvmHyper,
) -> Result<(LinearModel, Vec<f64>)> {
    match labels.first() {
        None => Ok((LinearModel::constant_binary(dim, 0), Vec::new())),
        Some(&first) if labels.iter().all(|&l| l == first) => {
            Ok((LinearModel::constant_binary(dim, first), Vec::new()))
        }
        Some(_) => train_svm_binary(features, labels, hyper),
    }
}

impl CascadeModel {
    pub fn features(&self) -> usize {
        self.stage_a.features
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", CASCADE_TAG);
        self.stage_a.write_text(&mut s);
        self.stage_b.write_text(&mut s);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(CASCADE_TAG) {
            return Err(Error::ModelFormat("cascade: missing format tag".into()));
        }
        let stage_a = LinearModel::read_text(&mut lines)?;
        let stage_b = LinearModel::read_text(&mut lines)?;
        if stage_a.features != stage_b.features {
            return Err(Error::ModelFormat(
                "cascade stages disagree on feature count".into(),
            ));
        }
        Ok(CascadeModel { stage_a, stage_b })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Route through stage A, then (for non-clean) stage B. A margin of exactly
/// zero resolves to the lower class code at either stage.
///
/// Scores are `(-m_a, -m_b, m_b)`: positive values favour the class.
pub fn cascade_predict(cascade: &CascadeModel, x: &SparseVector) -> (ClassLabel, [f64; 3]) {
    let ma = cascade.stage_a.margin(x);
    let mb = cascade.stage_b.margin(x);
    let label = if ma <= 0.0 {
        ClassLabel::Clean
    } else if mb <= 0.0 {
        ClassLabel::Offensive
    } else {
        ClassLabel::Hate
    };
    (label, [-ma, -mb, mb])
}

/// Three-class prediction of a logistic model.
pub fn predict_linear(model: &LinearModel, x: &SparseVector) -> (ClassLabel, Vec<f64>) {
    let (c, scores) = model.predict(x);
    (
        ClassLabel::from_code(c).unwrap_or(ClassLabel::Clean),
        scores,
    )
}
