//! TOML pipeline configuration.
//!
//! ```toml
//! [paths]
//! train = "data/train.csv"      # labeled csv
//! eval = "data/test.csv"        # optional; otherwise train is split
//! embeddings = "vectors.txt"    # optional pretrained vectors
//! stopwords = "stopwords.txt"   # optional, one word per line
//! out = "runs/bilstm"
//!
//! [model]
//! kind = "bilstm"               # lr | svm_cascade | gru | bilstm | lstm
//!
//! [train]
//! seed = 42
//! ```
//!
//! Every other key has a default; see the section structs. Relative paths
//! are resolved against the directory holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::{ClassWeights, LogRegHyper, SvmHyper};
use crate::preprocess::{load_stopwords, PreprocessConfig};
use crate::recurrent::{Architecture, CellKind, Pooling};
use crate::train_eval::{OptimizerKind, Precision, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lr,
    SvmCascade,
    Gru,
    #[default]
    Bilstm,
    Lstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Lr,
        ModelKind::SvmCascade,
        ModelKind::Gru,
        ModelKind::Bilstm,
        ModelKind::Lstm,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ModelKind::Lr => "lr",
            ModelKind::SvmCascade => "svm_cascade",
            ModelKind::Gru => "gru",
            ModelKind::Bilstm => "bilstm",
            ModelKind::Lstm => "lstm",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Lr => "Logistic Regression",
            ModelKind::SvmCascade => "SVM",
            ModelKind::Gru => "GRU",
            ModelKind::Bilstm => "Bi-LSTM",
            ModelKind::Lstm => "LSTM",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.key() == s.trim())
    }

    pub fn is_recurrent(self) -> bool {
        matches!(self, ModelKind::Gru | ModelKind::Bilstm | ModelKind::Lstm)
    }
}

/// `"none"`, `"balanced"` (inverse class frequency) or explicit weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassWeightSpec {
    Named(String),
    Values([f64; 3]),
}

impl ClassWeightSpec {
    pub fn resolve(&self, labels: &[crate::corpus::ClassLabel]) -> Result<Option<ClassWeights>> {
        match self {
            ClassWeightSpec::Named(n) if n == "none" => Ok(None),
            ClassWeightSpec::Named(n) if n == "balanced" => {
                ClassWeights::inverse_frequency(labels).map(Some)
            }
            ClassWeightSpec::Named(n) => Err(Error::Config(format!(
                "class_weights must be \"none\", \"balanced\" or three numbers, got {:?}",
                n
            ))),
            ClassWeightSpec::Values(v) => ClassWeights::new(*v)
                .map(Some)
                .map_err(|e| Error::Config(e.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub train: Option<PathBuf>,
    pub eval: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub lowercase: bool,
    pub strip_urls: bool,
    pub strip_mentions: bool,
    pub strip_non_alphabetic: bool,
    pub collapse_whitespace: bool,
    /// Characters deleted outright (no space left behind).
    pub replace_empty: String,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        PreprocessSection {
            lowercase: true,
            strip_urls: true,
            strip_mentions: true,
            strip_non_alphabetic: true,
            collapse_whitespace: true,
            replace_empty: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabSection {
    pub min_freq: usize,
    pub max_size: Option<usize>,
    pub max_len: usize,
    /// Embedding width when no pretrained file is given, and the expected
    /// width when one is.
    pub embed_dim: usize,
}

impl Default for VocabSection {
    fn default() -> Self {
        VocabSection {
            min_freq: 1,
            max_size: None,
            max_len: 100,
            embed_dim: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TfidfSection {
    pub min_df: usize,
    pub ngram_max: usize,
}

impl Default for TfidfSection {
    fn default() -> Self {
        TfidfSection {
            min_df: 1,
            ngram_max: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    /// Row label in comparison tables; defaults to the family name.
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub batch_size: usize,
    pub class_weights: Option<ClassWeightSpec>,
}

impl Default for LogRegSection {
    fn default() -> Self {
        let h = LogRegHyper::default();
        LogRegSection {
            learning_rate: h.lr,
            epochs: h.epochs,
            l2: h.l2,
            batch_size: h.batch_size,
            class_weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub batch_size: usize,
}

impl Default for SvmSection {
    fn default() -> Self {
        let h = SvmHyper::default();
        SvmSection {
            learning_rate: h.lr,
            epochs: h.epochs,
            l2: h.l2,
            batch_size: h.batch_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecurrentSection {
    pub hidden: usize,
    /// `final_state` or `mean_over_time`.
    pub pooling: String,
    pub trainable_embedding: bool,
}

impl Default for RecurrentSection {
    fn default() -> Self {
        RecurrentSection {
            hidden: 128,
            pooling: Pooling::FinalState.name().to_string(),
            trainable_embedding: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub seed: u64,
    pub split_ratio: f64,
    pub stratified: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// `adam` or `sgd`.
    pub optimizer: String,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub class_weights: Option<ClassWeightSpec>,
    pub early_stop_patience: Option<usize>,
    /// `double` or `single`; applies to the recurrent models.
    pub precision: String,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            seed: t.seed,
            split_ratio: 0.8,
            stratified: true,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            optimizer: "adam".into(),
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            class_weights: None,
            early_stop_patience: None,
            precision: Precision::Double.name().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsSection,
    pub preprocess: PreprocessSection,
    pub vocab: VocabSection,
    pub tfidf: TfidfSection,
    pub model: ModelSection,
    pub lr: LogRegSection,
    pub svm: SvmSection,
    pub recurrent: RecurrentSection,
    pub train: TrainSection,
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p.as_mut() {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse a config file, resolve relative paths against its directory
    /// and, if `check_paths`, require every referenced input to exist.
    pub fn load(path: impl AsRef<Path>, check_paths: bool) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e)))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e)))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        if check_paths {
            cfg.check_paths()?;
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        for slot in [
            &mut p.train,
            &mut p.eval,
            &mut p.embeddings,
            &mut p.stopwords,
            &mut p.out,
        ] {
            resolve(base, slot);
        }
    }

    pub fn check_paths(&self) -> Result<()> {
        let p = &self.paths;
        for (key, slot) in [
            ("train", &p.train),
            ("eval", &p.eval),
            ("embeddings", &p.embeddings),
            ("stopwords", &p.stopwords),
        ] {
            if let Some(path) = slot {
                if !path.is_file() {
                    return Err(Error::Config(format!(
                        "paths.{}: {} does not exist",
                        key,
                        path.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.vocab.max_len < 1 || self.vocab.embed_dim < 1 || self.vocab.min_freq < 1 {
            return bad("vocab.max_len, vocab.embed_dim and vocab.min_freq must be >= 1".into());
        }
        if self.tfidf.min_df < 1 || self.tfidf.ngram_max < 1 {
            return bad("tfidf.min_df and tfidf.ngram_max must be >= 1".into());
        }
        if self.recurrent.hidden < 1 {
            return bad("recurrent.hidden must be >= 1".into());
        }
        if Pooling::parse(&self.recurrent.pooling).is_none() {
            return bad(format!(
                "unknown recurrent.pooling {:?}",
                self.recurrent.pooling
            ));
        }
        if !(self.train.split_ratio > 0.0 && self.train.split_ratio < 1.0) {
            return bad(format!(
                "train.split_ratio must lie in (0, 1), got {}",
                self.train.split_ratio
            ));
        }
        self.precision()?;
        self.train_config(&[])?
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn precision(&self) -> Result<Precision> {
        Precision::parse(&self.train.precision).ok_or_else(|| {
            Error::Config(format!(
                "unknown train.precision {:?}",
                self.train.precision
            ))
        })
    }

    pub fn display_name(&self) -> String {
        self.model
            .name
            .clone()
            .unwrap_or_else(|| self.model.kind.display_name().to_string())
    }

    pub fn preprocess_config(&self) -> Result<PreprocessConfig> {
        let s = &self.preprocess;
        let mut cfg = PreprocessConfig::identity().with_replace_empty(&s.replace_empty);
        cfg.lowercase = s.lowercase;
        cfg.strip_urls = s.strip_urls;
        cfg.strip_mentions = s.strip_mentions;
        cfg.strip_non_alphabetic = s.strip_non_alphabetic;
        cfg.collapse_whitespace = s.collapse_whitespace;
        if let Some(path) = &self.paths.stopwords {
            cfg = cfg.with_stopwords(load_stopwords(path)?);
        }
        Ok(cfg)
    }

    pub fn logreg_hyper(&self, labels: &[crate::corpus::ClassLabel]) -> Result<LogRegHyper> {
        let s = &self.lr;
        Ok(LogRegHyper {
            lr: s.learning_rate,
            epochs: s.epochs,
            l2: s.l2,
            seed: self.train.seed,
            batch_size: s.batch_size,
            class_weights: match &s.class_weights {
                Some(spec) => spec.resolve(labels)?,
                None => None,
            },
        })
    }

    pub fn svm_hyper(&self) -> SvmHyper {
        let s = &self.svm;
        SvmHyper {
            lr: s.learning_rate,
            epochs: s.epochs,
            l2: s.l2,
            seed: self.train.seed,
            batch_size: s.batch_size,
        }
    }

    pub fn train_config(&self, labels: &[crate::corpus::ClassLabel]) -> Result<TrainConfig> {
        let t = &self.train;
        let optimizer = match t.optimizer.as_str() {
            "sgd" => OptimizerKind::Sgd,
            "adam" => OptimizerKind::Adam {
                beta1: t.adam_beta1,
                beta2: t.adam_beta2,
                eps: t.adam_eps,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown train.optimizer {:?}",
                    other
                )))
            }
        };
        Ok(TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            optimizer,
            seed: t.seed,
            class_weights: match (&t.class_weights, labels.is_empty()) {
                (Some(spec), false) => spec.resolve(labels)?,
                _ => None,
            },
            early_stop_patience: t.early_stop_patience,
            precision: self.precision()?,
        })
    }

    pub fn architecture(&self, vocab_size: usize, embed_dim: usize) -> Architecture {
        let (cell, bidirectional) = match self.model.kind {
            ModelKind::Gru => (CellKind::Gru, false),
            ModelKind::Lstm => (CellKind::Lstm, false),
            _ => (CellKind::Lstm, true),
        };
        Architecture {
            cell,
            hidden: self.recurrent.hidden,
            embed_dim,
            vocab_size,
            bidirectional,
            pooling: Pooling::parse(&self.recurrent.pooling).unwrap_or_default(),
            trainable_embedding: self.recurrent.trainable_embedding,
        }
    }

    /// Flattened `section.key -> value` view of every setting except paths,
    /// for run records.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        let value = toml::Value::try_from(self).expect("config converts");
        if let toml::Value::Table(sections) = value {
            for (section, body) in sections {
                if section == "paths" {
                    continue;
                }
                if let toml::Value::Table(keys) = body {
                    for (k, v) in keys {
                        let text = match v {
                            toml::Value::String(s) => s,
                            other => other.to_string(),
                        };
                        out.insert(format!("{}.{}", section, k), text);
                    }
                }
            }
        }
        out
    }
}
