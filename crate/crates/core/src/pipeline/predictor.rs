use std::path::Path;

use super::config::{ModelKind, PipelineConfig};
use super::{MODEL_FILE, PIPELINE_FILE, TFIDF_FILE, VOCAB_FILE};
use crate::corpus::{ClassLabel, LabeledDocument};
use crate::error::{Error, Result};
use crate::linear::{cascade_predict, predict_linear, CascadeModel, LinearKind, LinearModel};
use crate::preprocess::{normalize, PreprocessConfig};
use crate::recurrent::{checkpoint, Real, RecurrentClassifier};
use crate::tfidf::TfidfModel;
use crate::vocab::{encode, Vocabulary};

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Linear(LinearModel),
    Cascade(CascadeModel),
    RecurrentDouble(RecurrentClassifier<f64>),
    RecurrentSingle(RecurrentClassifier<f32>),
}

impl TrainedModel {
    fn to_text(&self) -> String {
        match self {
            TrainedModel::Linear(m) => m.to_text(),
            TrainedModel::Cascade(m) => m.to_text(),
            TrainedModel::RecurrentDouble(m) => checkpoint::to_text(m),
            TrainedModel::RecurrentSingle(m) => checkpoint::to_text(m),
        }
    }
}

/// One row of a predictions csv. Scores are class probabilities, except
/// for the SVM cascade where they are signed margins.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionOutput {
    pub id: String,
    pub predicted: ClassLabel,
    pub scores: [f64; 3],
}

const PREDICTION_HEADER: [&str; 5] = [
    "id",
    "predicted",
    "score_clean",
    "score_offensive",
    "score_hate",
];

pub fn write_predictions<W: std::io::Write>(writer: W, rows: &[PredictionOutput]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(PREDICTION_HEADER)?;
    for r in rows {
        w.write_record([
            r.id.clone(),
            r.predicted.code().to_string(),
            r.scores[0].to_string(),
            r.scores[1].to_string(),
            r.scores[2].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<predictions>", e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionOutput>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != PREDICTION_HEADER {
        return Err(Error::MalformedRow {
            path: path.to_path_buf(),
            row: 1,
            message: format!("expected header {}", PREDICTION_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let bad = |m: String| Error::MalformedRow {
            path: path.to_path_buf(),
            row,
            message: m,
        };
        if rec.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", rec.len())));
        }
        let predicted: ClassLabel = rec[1].parse()?;
        let mut scores = [0.0; 3];
        for (k, s) in scores.iter_mut().enumerate() {
            *s = rec[2 + k]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad score {:?}", &rec[2 + k])))?;
        }
        out.push(PredictionOutput {
            id: rec[0].to_string(),
            predicted,
            scores,
        });
    }
    Ok(out)
}

/// Everything needed to label raw text: preprocessing, features and model.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub preprocess: PreprocessConfig,
    pub kind: ModelKind,
    pub max_len: usize,
    pub vocab: Option<Vocabulary>,
    pub tfidf: Option<TfidfModel>,
    pub model: TrainedModel,
}

fn recurrent_predict<T: Real>(
    model: &RecurrentClassifier<T>,
    vocab: &Vocabulary,
    text: &crate::preprocess::CleanText,
    max_len: usize,
) -> Result<(ClassLabel, [f64; 3])> {
    let (label, probs) = model.predict(&encode(text, vocab, max_len))?;
    let p: Vec<f64> = probs
        .iter()
        .map(|v| v.to_f64().unwrap_or(f64::NAN))
        .collect();
    // renormalize in double so single-precision runs also sum to 1 closely
    let sum: f64 = p.iter().sum();
    Ok((label, [p[0] / sum, p[1] / sum, p[2] / sum]))
}

fn missing(what: &str) -> Error {
    Error::ModelFormat(format!("model directory has no {}", what))
}

impl Predictor {
    pub fn predict_text(&self, text: &str) -> Result<(ClassLabel, [f64; 3])> {
        let clean = normalize(text, &self.preprocess);
        let (label, scores) = match &self.model {
            TrainedModel::Linear(m) => {
                let tfidf = self.tfidf.as_ref().ok_or_else(|| missing("tf-idf model"))?;
                let (label, s) = predict_linear(m, &tfidf.transform(&clean));
                (label, [s[0], s[1], s[2]])
            }
            TrainedModel::Cascade(m) => {
                let tfidf = self.tfidf.as_ref().ok_or_else(|| missing("tf-idf model"))?;
                cascade_predict(m, &tfidf.transform(&clean))
            }
            TrainedModel::RecurrentDouble(m) => recurrent_predict(
                m,
                self.vocab.as_ref().ok_or_else(|| missing("vocabulary"))?,
                &clean,
                self.max_len,
            )?,
            TrainedModel::RecurrentSingle(m) => recurrent_predict(
                m,
                self.vocab.as_ref().ok_or_else(|| missing("vocabulary"))?,
                &clean,
                self.max_len,
            )?,
        };
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("prediction scores".into()));
        }
        Ok((label, scores))
    }

    pub fn predict_docs(&self, docs: &[LabeledDocument]) -> Result<Vec<PredictionOutput>> {
        docs.iter()
            .map(|d| {
                self.predict_text(&d.text)
                    .map(|(predicted, scores)| PredictionOutput {
                        id: d.id.clone(),
                        predicted,
                        scores,
                    })
            })
            .collect()
    }

    /// Write the model checkpoint and its vocabulary or tf-idf table.
    pub fn save_artifacts(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MODEL_FILE);
        std::fs::write(&path, self.model.to_text()).map_err(|e| Error::io(&path, e))?;
        if let Some(v) = &self.vocab {
            v.save(dir.join(VOCAB_FILE))?;
        }
        if let Some(t) = &self.tfidf {
            t.save(dir.join(TFIDF_FILE))?;
        }
        Ok(())
    }

    /// Load a model directory written by `train`, checking that the
    /// checkpoint, its feature space and the saved config agree.
    pub fn load(dir: &Path) -> Result<Self> {
        let cfg = PipelineConfig::load(dir.join(PIPELINE_FILE), false)?;
        let preprocess = cfg.preprocess_config()?;
        let model_path = dir.join(MODEL_FILE);
        let text = std::fs::read_to_string(&model_path).map_err(|e| Error::io(&model_path, e))?;
        let kind = cfg.model.kind;
        let mismatch = |m: String| Error::ModelFormat(format!("{}: {}", dir.display(), m));
        let mut vocab = None;
        let mut tfidf = None;
        let model = if kind.is_recurrent() {
            let v = Vocabulary::load(dir.join(VOCAB_FILE))?;
            let (arch, precision) = checkpoint::read_descriptor(&text)?;
            if arch.vocab_size != v.len() {
                return Err(mismatch(format!(
                    "checkpoint expects {} vocabulary entries, vocab file has {}",
                    arch.vocab_size,
                    v.len()
                )));
            }
            if arch != cfg.architecture(v.len(), arch.embed_dim) {
                return Err(mismatch(format!(
                    "checkpoint architecture does not match a {} model",
                    kind.key()
                )));
            }
            vocab = Some(v);
            match precision.as_str() {
                "single" => TrainedModel::RecurrentSingle(checkpoint::from_text(&text)?),
                _ => TrainedModel::RecurrentDouble(checkpoint::from_text(&text)?),
            }
        } else {
            let t = TfidfModel::load(dir.join(TFIDF_FILE))?;
            let (model, features) = match kind {
                ModelKind::Lr => {
                    let m = LinearModel::from_text(&text)?;
                    if m.kind != LinearKind::Logistic || m.classes != ClassLabel::COUNT {
                        return Err(mismatch(
                            "checkpoint is not a three-class logistic model".into(),
                        ));
                    }
                    let f = m.features;
                    (TrainedModel::Linear(m), f)
                }
                _ => {
                    let m = CascadeModel::from_text(&text)?;
                    let f = m.features();
                    (TrainedModel::Cascade(m), f)
                }
            };
            if features != t.dim() {
                return Err(mismatch(format!(
                    "checkpoint has {} features, tf-idf table has {}",
                    features,
                    t.dim()
                )));
            }
            tfidf = Some(t);
            model
        };
        Ok(Predictor {
            preprocess,
            kind,
            max_len: cfg.vocab.max_len,
            vocab,
            tfidf,
            model,
        })
    }
}
