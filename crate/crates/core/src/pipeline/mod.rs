//! End-to-end commands behind the `hsd` binary: stats, train, predict,
//! eval and compare.
//!
//! `train` writes a self-contained model directory:
//!
//! | file | content |
//! |---|---|
//! | `pipeline.toml` | effective configuration |
//! | `stopwords.txt` | copy of the stopword list, if any |
//! | `model.txt` | linear, cascade or recurrent checkpoint |
//! | `tfidf.tsv` / `vocab.tsv` | feature space or vocabulary |
//! | `run_record.txt` / `run_record.json` | losses and metrics |
//! | `train_split.csv` / `heldout.csv` | the documents used for each side |

pub mod config;
mod predictor;

use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{ClassWeightSpec, ModelKind, PipelineConfig};
pub use predictor::{
    read_predictions, write_predictions, PredictionOutput, Predictor, TrainedModel,
};

use crate::corpus::{
    class_stats, load_csv, save_csv, split, ClassDistribution, ClassLabel, DatasetSplit,
    LabeledDocument,
};
use crate::error::{Error, Result};
use crate::linear::{train_cascade, train_logreg};
use crate::preprocess::{normalize, PreprocessConfig};
use crate::recurrent::{Real, RecurrentClassifier};
use crate::tfidf::TfidfModel;
use crate::train_eval::{
    comparison_table, evaluate, rank, train, ComparisonRow, Example, MetricsReport, Precision,
    RankBy, RunRecord,
};
use crate::vocab::{
    build_vocab, encode, load_embeddings, EmbeddingMatrix, Vocabulary, OOV_INIT_RANGE,
};

pub const PIPELINE_FILE: &str = "pipeline.toml";
pub const MODEL_FILE: &str = "model.txt";
pub const VOCAB_FILE: &str = "vocab.tsv";
pub const TFIDF_FILE: &str = "tfidf.tsv";
pub const STOPWORDS_FILE: &str = "stopwords.txt";
pub const HELDOUT_FILE: &str = "heldout.csv";
pub const TRAIN_SPLIT_FILE: &str = "train_split.csv";

fn require_train_path(cfg: &PipelineConfig) -> Result<&Path> {
    cfg.paths
        .train
        .as_deref()
        .ok_or_else(|| Error::Config("paths.train is not set".into()))
}

/// Class distribution table of a labeled csv.
pub fn cmd_stats(path: &Path) -> Result<(ClassDistribution, String)> {
    let docs = load_csv(path, true)?;
    if docs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dist = class_stats(&docs)?;
    let table = dist.table();
    Ok((dist, table))
}

/// The train/held-out partition a config describes: the eval file when one
/// is given, otherwise a (stratified) split of the training file.
pub fn make_split(cfg: &PipelineConfig) -> Result<DatasetSplit> {
    let train_path = require_train_path(cfg)?;
    let docs = load_csv(train_path, true).map_err(|e| e.in_stage("load"))?;
    if docs.is_empty() {
        return Err(Error::EmptyDataset.in_stage("load"));
    }
    class_stats(&docs).map_err(|e| e.in_stage("load"))?;
    match &cfg.paths.eval {
        Some(eval) => {
            let held_out = load_csv(eval, true).map_err(|e| e.in_stage("load"))?;
            class_stats(&held_out).map_err(|e| e.in_stage("load"))?;
            Ok(DatasetSplit {
                train: docs,
                held_out,
                seed: cfg.train.seed,
                ratio: 1.0,
            })
        }
        None => split(
            &docs,
            cfg.train.split_ratio,
            cfg.train.seed,
            cfg.train.stratified,
        )
        .map_err(|e| e.in_stage("split")),
    }
}

fn labels_of(docs: &[LabeledDocument]) -> Vec<ClassLabel> {
    docs.iter()
        .map(|d| d.label.expect("labels checked at load"))
        .collect()
}

pub struct TrainOutcome {
    pub record: RunRecord,
    pub predictor: Predictor,
}

fn cleaned(docs: &[LabeledDocument], pre: &PreprocessConfig) -> Vec<crate::preprocess::CleanText> {
    docs.iter().map(|d| normalize(&d.text, pre)).collect()
}

fn examples(
    docs: &[LabeledDocument],
    pre: &PreprocessConfig,
    vocab: &Vocabulary,
    max_len: usize,
) -> Vec<Example> {
    docs.iter()
        .map(|d| Example {
            seq: encode(&normalize(&d.text, pre), vocab, max_len),
            label: d.label.expect("labels checked at load"),
        })
        .collect()
}

fn linear_metrics(predictor: &Predictor, docs: &[LabeledDocument]) -> Result<MetricsReport> {
    let preds: Vec<ClassLabel> = docs
        .iter()
        .map(|d| predictor.predict_text(&d.text).map(|p| p.0))
        .collect::<Result<_>>()?;
    evaluate(&preds, &labels_of(docs))
}

fn train_recurrent<T: Real>(
    cfg: &PipelineConfig,
    data: &DatasetSplit,
    pre: &PreprocessConfig,
    vocab: &Vocabulary,
    embedding: &EmbeddingMatrix,
) -> Result<(RecurrentClassifier<T>, RunRecord)> {
    let arch = cfg.architecture(vocab.len(), embedding.dim());
    let model = RecurrentClassifier::<T>::new(arch, embedding, cfg.train.seed.wrapping_add(1))
        .map_err(|e| e.in_stage("init"))?;
    let train_set = examples(&data.train, pre, vocab, cfg.vocab.max_len);
    let held_out = examples(&data.held_out, pre, vocab, cfg.vocab.max_len);
    let tc = cfg
        .train_config(&labels_of(&data.train))
        .map_err(|e| e.in_stage("config"))?;
    let validation = (!held_out.is_empty()).then_some(held_out.as_slice());
    train(model, &cfg.display_name(), &train_set, validation, &tc).map_err(|e| e.in_stage("train"))
}

/// Fit the configured model on `data.train` and evaluate it on
/// `data.held_out`. Nothing is written to disk.
pub fn fit(cfg: &PipelineConfig, data: &DatasetSplit) -> Result<TrainOutcome> {
    let start = Instant::now();
    let pre = cfg
        .preprocess_config()
        .map_err(|e| e.in_stage("preprocess"))?;
    let labels = labels_of(&data.train);
    let name = cfg.display_name();
    let kind = cfg.model.kind;
    if kind.is_recurrent() {
        let corpus = cleaned(&data.train, &pre);
        let vocab = build_vocab(&corpus, cfg.vocab.min_freq, cfg.vocab.max_size)
            .map_err(|e| e.in_stage("vocab"))?;
        let embedding = match &cfg.paths.embeddings {
            Some(path) => load_embeddings(path, &vocab, Some(cfg.vocab.embed_dim), cfg.train.seed),
            None => Ok(EmbeddingMatrix::random(
                vocab.len(),
                cfg.vocab.embed_dim,
                OOV_INIT_RANGE,
                cfg.train.seed,
            )),
        }
        .map_err(|e| e.in_stage("embeddings"))?;
        let (model, mut record) = match cfg.precision()? {
            Precision::Double => {
                let (m, r) = train_recurrent::<f64>(cfg, data, &pre, &vocab, &embedding)?;
                (TrainedModel::RecurrentDouble(m), r)
            }
            Precision::Single => {
                let (m, r) = train_recurrent::<f32>(cfg, data, &pre, &vocab, &embedding)?;
                (TrainedModel::RecurrentSingle(m), r)
            }
        };
        record.config = cfg.snapshot();
        record.wall_clock_seconds = start.elapsed().as_secs_f64();
        let predictor = Predictor {
            preprocess: pre,
            kind,
            max_len: cfg.vocab.max_len,
            vocab: Some(vocab),
            tfidf: None,
            model,
        };
        return Ok(TrainOutcome { record, predictor });
    }

    let corpus = cleaned(&data.train, &pre);
    let tfidf = TfidfModel::fit_ngrams(&corpus, cfg.tfidf.min_df, cfg.tfidf.ngram_max)
        .map_err(|e| e.in_stage("tfidf"))?;
    let features: Vec<_> = corpus.iter().map(|d| tfidf.transform(d)).collect();
    let (model, losses) = match kind {
        ModelKind::Lr => {
            let hyper = cfg
                .logreg_hyper(&labels)
                .map_err(|e| e.in_stage("config"))?;
            let (m, l) =
                train_logreg(&features, &labels, &hyper).map_err(|e| e.in_stage("train"))?;
            (TrainedModel::Linear(m), l)
        }
        _ => {
            let (m, l) = train_cascade(&features, &labels, &cfg.svm_hyper())
                .map_err(|e| e.in_stage("train"))?;
            (TrainedModel::Cascade(m), l.combined())
        }
    };
    let predictor = Predictor {
        preprocess: pre,
        kind,
        max_len: cfg.vocab.max_len,
        vocab: None,
        tfidf: Some(tfidf),
        model,
    };
    let train_metrics = linear_metrics(&predictor, &data.train)?;
    let heldout_metrics = if data.held_out.is_empty() {
        None
    } else {
        Some(linear_metrics(&predictor, &data.held_out)?)
    };
    let record = RunRecord {
        model: name,
        seed: cfg.train.seed,
        config: cfg.snapshot(),
        epoch_losses: losses,
        train_metrics,
        heldout_metrics,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome { record, predictor })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Write every artifact of a trained model into `dir`.
pub fn save_outcome(
    cfg: &PipelineConfig,
    data: &DatasetSplit,
    outcome: &TrainOutcome,
    dir: &Path,
) -> Result<()> {
    create_dir(dir)?;
    let mut saved = cfg.clone();
    saved.paths.out = None;
    if let Some(stop) = &cfg.paths.stopwords {
        let dst = dir.join(STOPWORDS_FILE);
        std::fs::copy(stop, &dst).map_err(|e| Error::io(&dst, e))?;
        saved.paths.stopwords = Some(PathBuf::from(STOPWORDS_FILE));
    }
    let cfg_path = dir.join(PIPELINE_FILE);
    std::fs::write(&cfg_path, saved.to_toml()).map_err(|e| Error::io(&cfg_path, e))?;
    outcome.predictor.save_artifacts(dir)?;
    outcome.record.save(dir)?;
    save_csv(dir.join(TRAIN_SPLIT_FILE), &data.train)?;
    save_csv(dir.join(HELDOUT_FILE), &data.held_out)?;
    Ok(())
}

/// split, preprocess, fit, and (when `out` is given) save.
pub fn cmd_train(cfg: &PipelineConfig, out: Option<&Path>) -> Result<TrainOutcome> {
    let data = make_split(cfg)?;
    let outcome = fit(cfg, &data)?;
    if let Some(dir) = out {
        save_outcome(cfg, &data, &outcome, dir).map_err(|e| e.in_stage("write"))?;
    }
    Ok(outcome)
}

/// Predict every row of an (optionally labeled) csv with a saved model.
/// Nothing is written if the model directory is inconsistent.
pub fn cmd_predict(model_dir: &Path, input: &Path) -> Result<Vec<PredictionOutput>> {
    let predictor = Predictor::load(model_dir)?;
    let docs = load_csv(input, false).map_err(|e| e.in_stage("load"))?;
    predictor.predict_docs(&docs)
}

/// Join predictions to gold labels on id and score them.
pub fn cmd_eval(gold_path: &Path, predictions_path: &Path) -> Result<MetricsReport> {
    let gold = load_csv(gold_path, true)?;
    class_stats(&gold)?;
    let preds = read_predictions(predictions_path)?;
    eval_joined(&gold, &preds)
}

pub fn eval_joined(gold: &[LabeledDocument], preds: &[PredictionOutput]) -> Result<MetricsReport> {
    let by_id: std::collections::HashMap<&str, ClassLabel> =
        preds.iter().map(|p| (p.id.as_str(), p.predicted)).collect();
    let gold_ids: std::collections::HashSet<&str> = gold.iter().map(|d| d.id.as_str()).collect();
    let mut offenders: Vec<String> = gold
        .iter()
        .filter(|d| !by_id.contains_key(d.id.as_str()))
        .map(|d| format!("{} (no prediction)", d.id))
        .collect();
    offenders.extend(
        preds
            .iter()
            .filter(|p| !gold_ids.contains(p.id.as_str()))
            .map(|p| format!("{} (no gold label)", p.id)),
    );
    if by_id.len() != preds.len() {
        offenders.push("duplicate prediction ids".into());
    }
    if !offenders.is_empty() {
        let total = offenders.len();
        offenders.truncate(5);
        return Err(Error::IdMismatch(format!(
            "{} offending ids, first: {}",
            total,
            offenders.join(", ")
        )));
    }
    let predicted: Vec<ClassLabel> = gold.iter().map(|d| by_id[d.id.as_str()]).collect();
    evaluate(&predicted, &labels_of(gold))
}

pub struct CompareOutcome {
    pub rows: Vec<ComparisonRow>,
    pub records: Vec<RunRecord>,
    pub table: String,
}

impl CompareOutcome {
    pub fn all_failed(&self) -> bool {
        self.rows.iter().all(|r| r.score.is_none())
    }
}

/// Train and evaluate every config on one shared split (computed from the
/// first config) and rank them. A model that fails becomes a `failed` row.
pub fn cmd_compare(
    configs: &[PipelineConfig],
    by: RankBy,
    out: Option<&Path>,
) -> Result<CompareOutcome> {
    let first = configs
        .first()
        .ok_or_else(|| Error::InvalidArgument("compare needs at least one config".into()))?;
    let data = make_split(first)?;
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for (i, cfg) in configs.iter().enumerate() {
        let name = cfg.display_name();
        let result = fit(cfg, &data).and_then(|o| {
            if let Some(dir) = out {
                let sub = dir.join(format!("{:02}_{}", i + 1, cfg.model.kind.key()));
                save_outcome(cfg, &data, &o, &sub).map_err(|e| e.in_stage("write"))?;
            }
            Ok(o)
        });
        match result {
            Ok(o) => {
                rows.push(ComparisonRow::from_record(&o.record, by));
                records.push(o.record);
            }
            Err(e) => rows.push(ComparisonRow::failed(&name, e.to_string())),
        }
    }
    let rows = rank(rows);
    let table = comparison_table(&rows);
    if let Some(dir) = out {
        create_dir(dir)?;
        let path = dir.join("comparison.txt");
        std::fs::write(&path, &table).map_err(|e| Error::io(&path, e))?;
    }
    Ok(CompareOutcome {
        rows,
        records,
        table,
    })
}
