//! TF-IDF features: raw term counts times smoothed idf
//! `ln((1 + N) / (1 + df)) + 1`, then L2 normalization.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::error::{Error, Result};
use crate::preprocess::CleanText;

const FORMAT_TAG: &str = "hsd-tfidf v1";

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub dim: usize,
}

impl SparseVector {
    pub fn new(indices: Vec<usize>, values: Vec<f64>, dim: usize) -> Self {
        debug_assert_eq!(indices.len(), values.len());
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(indices.iter().all(|&i| i < dim));
        SparseVector {
            indices,
            values,
            dim,
        }
    }

    /// One nonzero per `(index, value)`; indices must be distinct.
    pub fn from_pairs(mut pairs: Vec<(usize, f64)>, dim: usize) -> Self {
        pairs.sort_by_key(|p| p.0);
        let (indices, values) = pairs.into_iter().unzip();
        SparseVector::new(indices, values, dim)
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| dense[i] * v).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            d[i] = v;
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    features: Vec<String>,
    index: HashMap<String, usize>,
    pub df: Vec<usize>,
    pub idf: Vec<f64>,
    pub n_docs: usize,
    /// Largest n-gram order (1 = unigrams).
    pub ngram_max: usize,
}

/// Unigrams plus, for `ngram_max > 1`, space-joined higher-order n-grams.
pub fn ngrams(doc: &CleanText, ngram_max: usize) -> Vec<String> {
    let mut out = doc.tokens.clone();
    for n in 2..=ngram_max {
        for w in doc.tokens.windows(n) {
            out.push(w.join(" "));
        }
    }
    out
}

impl TfidfModel {
    pub fn fit(corpus: &[CleanText], min_df: usize) -> Result<Self> {
        Self::fit_ngrams(corpus, min_df, 1)
    }

    pub fn fit_ngrams(corpus: &[CleanText], min_df: usize, ngram_max: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if min_df < 1 || ngram_max < 1 {
            return Err(Error::InvalidArgument(
                "min_df and ngram_max must be >= 1".into(),
            ));
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in corpus {
            let mut terms = ngrams(doc, ngram_max);
            terms.sort_unstable();
            terms.dedup();
            for t in terms {
                *df.entry(t).or_default() += 1;
            }
        }
        let n = corpus.len();
        let kept: Vec<(String, usize)> = df.into_iter().filter(|&(_, c)| c >= min_df).collect();
        Ok(Self::from_parts(
            kept.iter().map(|(t, _)| t.clone()).collect(),
            kept.iter().map(|&(_, c)| c).collect(),
            n,
            ngram_max,
        ))
    }

    fn from_parts(features: Vec<String>, df: Vec<usize>, n_docs: usize, ngram_max: usize) -> Self {
        let idf = df.iter().map(|&d| smoothed_idf(n_docs, d)).collect();
        let index = features
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        TfidfModel {
            features,
            index,
            df,
            idf,
            n_docs,
            ngram_max,
        }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn feature_index(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    /// Empty (all-zero) vector when the document has no known feature.
    pub fn transform(&self, doc: &CleanText) -> SparseVector {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for term in ngrams(doc, self.ngram_max) {
            if let Some(j) = self.feature_index(&term) {
                *counts.entry(j).or_default() += 1.0;
            }
        }
        let (indices, mut values): (Vec<usize>, Vec<f64>) = counts
            .into_iter()
            .map(|(j, c)| (j, c * self.idf[j]))
            .unzip();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        }
        SparseVector::new(indices, values, self.dim())
    }

    /// Tab-separated: a tag line, a `n_docs`/`ngram_max` line, then
    /// `feature<TAB>df<TAB>idf` per feature.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = format!(
            "{}\nn_docs\t{}\tngram_max\t{}\n",
            FORMAT_TAG, self.n_docs, self.ngram_max
        );
        for ((f, df), idf) in self.features.iter().zip(&self.df).zip(&self.idf) {
            out.push_str(&format!("{}\t{}\t{}\n", f, df, idf));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |m: String| Error::ModelFormat(format!("{}: {}", path.display(), m));
        let mut lines = content.lines();
        if lines.next() != Some(FORMAT_TAG) {
            return Err(bad("missing format tag".into()));
        }
        let meta: Vec<&str> = lines.next().unwrap_or("").split('\t').collect();
        let (n_docs, ngram_max) = match meta.as_slice() {
            ["n_docs", n, "ngram_max", g] => (
                n.parse::<usize>().map_err(|e| bad(e.to_string()))?,
                g.parse::<usize>().map_err(|e| bad(e.to_string()))?,
            ),
            _ => return Err(bad("bad metadata line".into())),
        };
        let mut features = Vec::new();
        let mut df = Vec::new();
        let mut idf = Vec::new();
        for (i, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(bad(format!("feature line {}: expected 3 columns", i + 1)));
            }
            features.push(cols[0].to_string());
            df.push(cols[1].parse::<usize>().map_err(|e| bad(e.to_string()))?);
            idf.push(cols[2].parse::<f64>().map_err(|e| bad(e.to_string()))?);
        }
        let mut model = Self::from_parts(features, df, n_docs, ngram_max);
        // keep stored idf values verbatim
        model.idf = idf;
        Ok(model)
    }
}

pub fn smoothed_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}
