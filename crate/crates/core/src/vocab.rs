//! Token vocabularies, fixed-length integer encoding and pretrained
//! word-vector loading (word2vec / fastText text format).

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::preprocess::CleanText;

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Default half-width of the uniform distribution used for word vectors
/// that have no pretrained value.
pub const OOV_INIT_RANGE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary {
            token_to_id: HashMap::new(),
            id_to_token: vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()],
        }
    }
}

impl Vocabulary {
    /// Vocabulary with corpus tokens assigned ids 2.. in the given order.
    /// Duplicates keep their first id.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocabulary::default();
        for t in tokens {
            let t = t.into();
            if !v.token_to_id.contains_key(&t) {
                v.token_to_id.insert(t.clone(), v.id_to_token.len());
                v.id_to_token.push(t);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    /// True when only the reserved pad/unk entries exist.
    pub fn is_empty(&self) -> bool {
        self.id_to_token.len() <= 2
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    /// Corpus tokens (ids >= 2) in id order.
    pub fn tokens(&self) -> impl Iterator<Item = (usize, &str)> {
        self.id_to_token
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, t)| (i, t.as_str()))
    }

    /// `id<TAB>token` per line, pad and unk included.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for (i, t) in self.id_to_token.iter().enumerate() {
            out.push_str(&format!("{}\t{}\n", i, t));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut tokens = Vec::new();
        for (n, line) in content.lines().enumerate() {
            let (id, tok) = line
                .split_once('\t')
                .ok_or_else(|| Error::ModelFormat(format!("vocab line {}: missing tab", n + 1)))?;
            if id.parse::<usize>().ok() != Some(n) {
                return Err(Error::ModelFormat(format!(
                    "vocab line {}: bad id {:?}",
                    n + 1,
                    id
                )));
            }
            tokens.push(tok.to_string());
        }
        if tokens.len() < 2 || tokens[0] != PAD_TOKEN || tokens[1] != UNK_TOKEN {
            return Err(Error::ModelFormat(
                "vocab must start with <pad>, <unk>".into(),
            ));
        }
        Ok(Vocabulary::from_tokens(tokens.into_iter().skip(2)))
    }
}

/// Tokens with frequency >= `min_freq`, ranked by descending frequency then
/// ascending token, truncated to `max_size` corpus entries.
pub fn build_vocab(
    corpus: &[CleanText],
    min_freq: usize,
    max_size: Option<usize>,
) -> Result<Vocabulary> {
    if min_freq < 1 {
        return Err(Error::InvalidArgument("min_freq must be >= 1".into()));
    }
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for doc in corpus {
        for t in &doc.tokens {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = freq.into_iter().filter(|&(_, c)| c >= min_freq).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if let Some(max) = max_size {
        ranked.truncate(max);
    }
    Ok(Vocabulary::from_tokens(ranked.into_iter().map(|(t, _)| t)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<usize>,
    pub true_length: usize,
}

impl TokenSequence {
    /// The non-padding prefix.
    pub fn content(&self) -> &[usize] {
        &self.ids[..self.true_length]
    }
}

/// Map tokens to ids (unknowns to [`UNK_ID`]), keep the first `max_len`,
/// and post-pad with [`PAD_ID`].
pub fn encode(text: &CleanText, vocab: &Vocabulary, max_len: usize) -> TokenSequence {
    assert!(max_len >= 1, "max_len must be >= 1");
    let mut ids: Vec<usize> = text
        .tokens
        .iter()
        .take(max_len)
        .map(|t| vocab.id(t).unwrap_or(UNK_ID))
        .collect();
    let true_length = ids.len();
    ids.resize(max_len, PAD_ID);
    TokenSequence { ids, true_length }
}

pub fn decode(seq: &TokenSequence, vocab: &Vocabulary) -> Vec<String> {
    seq.content()
        .iter()
        .map(|&id| vocab.token(id).unwrap_or(UNK_TOKEN).to_string())
        .collect()
}

/// |V| x d word-vector table, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    data: Vec<f64>,
    rows: usize,
    dim: usize,
    /// Fraction of corpus tokens (ids >= 2) found in the pretrained file.
    pub coverage: f64,
}

impl EmbeddingMatrix {
    pub fn from_rows(data: Vec<f64>, rows: usize, dim: usize) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::DimensionMismatch(format!(
                "embedding data has {} values, expected {}x{}",
                data.len(),
                rows,
                dim
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "embedding row {}",
                i / dim.max(1)
            )));
        }
        Ok(EmbeddingMatrix {
            data,
            rows,
            dim,
            coverage: 0.0,
        })
    }

    /// Every row from uniform(-range, range) except the zero pad row.
    pub fn random(vocab_size: usize, dim: usize, range: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new_inclusive(-range, range);
        let mut data: Vec<f64> = (0..vocab_size * dim)
            .map(|_| dist.sample(&mut rng))
            .collect();
        for v in &mut data[..dim.min(vocab_size * dim)] {
            *v = 0.0;
        }
        EmbeddingMatrix {
            data,
            rows: vocab_size,
            dim,
            coverage: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Load pretrained vectors for `vocab` from a text-format embedding file.
///
/// Tokens present in the file are copied verbatim. All other rows, `unk`
/// included, are drawn from uniform(-0.25, 0.25) with `seed`; every row is
/// drawn before copying, so a missing token's vector does not depend on the
/// file contents. The pad row is zero.
pub fn load_embeddings(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    expected_dim: Option<usize>,
    seed: u64,
) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file), vocab, expected_dim, seed)
}

pub fn read_embeddings<R: BufRead>(
    reader: R,
    vocab: &Vocabulary,
    expected_dim: Option<usize>,
    seed: u64,
) -> Result<EmbeddingMatrix> {
    let mut dim = expected_dim;
    let mut found: HashMap<usize, Vec<f64>> = HashMap::new();
    for (n, line) in reader.lines().enumerate() {
        let lineno = n + 1;
        let line = line.map_err(|e| Error::Embedding {
            line: lineno,
            message: e.to_string(),
        })?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(' ').collect();
        if n == 0 && fields.len() == 2 {
            if let (Ok(_count), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                if let Some(e) = expected_dim {
                    if e != d {
                        return Err(Error::Embedding {
                            line: lineno,
                            message: format!("header dimension {} != expected {}", d, e),
                        });
                    }
                }
                dim = Some(d);
                continue;
            }
        }
        let d = fields.len() - 1;
        match dim {
            None => dim = Some(d),
            Some(want) if want != d => {
                return Err(Error::Embedding {
                    line: lineno,
                    message: format!("vector has {} components, expected {}", d, want),
                })
            }
            _ => {}
        }
        let mut v = Vec::with_capacity(d);
        for f in &fields[1..] {
            let x: f64 = f.parse().map_err(|_| Error::Embedding {
                line: lineno,
                message: format!("non-numeric component {:?}", f),
            })?;
            if !x.is_finite() {
                return Err(Error::Embedding {
                    line: lineno,
                    message: format!("non-finite component {:?}", f),
                });
            }
            v.push(x);
        }
        if let Some(id) = vocab.id(fields[0]) {
            found.entry(id).or_insert(v);
        }
    }
    let dim = dim.ok_or_else(|| Error::Embedding {
        line: 0,
        message: "file has no vectors and no dimension was given".into(),
    })?;
    let mut m = EmbeddingMatrix::random(vocab.len(), dim, OOV_INIT_RANGE, seed);
    for (&id, v) in &found {
        m.data[id * dim..(id + 1) * dim].copy_from_slice(v);
    }
    let corpus_tokens = vocab.len().saturating_sub(2);
    m.coverage = if corpus_tokens == 0 {
        0.0
    } else {
        found.len() as f64 / corpus_tokens as f64
    };
    Ok(m)
}

/// Write in the headered text format.
pub fn write_embeddings<W: Write>(
    mut w: W,
    m: &EmbeddingMatrix,
    vocab: &Vocabulary,
) -> std::io::Result<()> {
    writeln!(w, "{} {}", vocab.len(), m.dim)?;
    for id in 0..vocab.len() {
        let tok = vocab.token(id).unwrap_or(UNK_TOKEN);
        let vals: Vec<String> = m.row(id).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{} {}", tok, vals.join(" "))?;
    }
    Ok(())
}
