//! Social-media text normalization.
//!
//! Steps run in a fixed order: lowercase, URL removal, mention removal,
//! configured character deletions, non-alphabetic removal, whitespace
//! collapse, whitespace split, stopword filtering.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use unicode_normalization::char::is_combining_mark;

use crate::corpus::{ClassLabel, LabeledDocument};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub lowercase: bool,
    pub strip_urls: bool,
    pub strip_mentions: bool,
    /// Removes digits, punctuation and symbols; keeps letters (with their
    /// combining diacritics) and whitespace.
    pub strip_non_alphabetic: bool,
    stopwords: BTreeSet<String>,
    /// Characters deleted outright. Whitespace entries have no effect.
    pub replace_empty: BTreeSet<char>,
    pub collapse_whitespace: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            lowercase: true,
            strip_urls: true,
            strip_mentions: true,
            strip_non_alphabetic: true,
            stopwords: BTreeSet::new(),
            replace_empty: BTreeSet::new(),
            collapse_whitespace: true,
        }
    }
}

impl PreprocessConfig {
    /// Every flag off, no stopwords: `normalize` only splits on whitespace.
    pub fn identity() -> Self {
        PreprocessConfig {
            lowercase: false,
            strip_urls: false,
            strip_mentions: false,
            strip_non_alphabetic: false,
            stopwords: BTreeSet::new(),
            replace_empty: BTreeSet::new(),
            collapse_whitespace: false,
        }
    }

    /// Replace the stopword set. Entries are lowercased when `lowercase` is on.
    pub fn with_stopwords<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.stopwords = words
            .into_iter()
            .map(|w| {
                let w = w.as_ref().trim();
                if self.lowercase {
                    w.to_lowercase()
                } else {
                    w.to_string()
                }
            })
            .filter(|w| !w.is_empty())
            .collect();
        self
    }

    /// Whitespace in `chars` is ignored: it separates tokens and deleting
    /// it would make normalization depend on how tokens were joined.
    pub fn with_replace_empty(mut self, chars: &str) -> Self {
        self.replace_empty = chars.chars().filter(|c| !c.is_whitespace()).collect();
        self
    }

    pub fn stopwords(&self) -> &BTreeSet<String> {
        &self.stopwords
    }

    /// Re-apply the lowercase invariant after toggling `lowercase`.
    pub fn set_lowercase(&mut self, on: bool) {
        self.lowercase = on;
        if on {
            self.stopwords = self.stopwords.iter().map(|w| w.to_lowercase()).collect();
        }
    }
}

/// Normalized token list. Tokens are nonempty, whitespace-free and never
/// stopwords of the config that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CleanText {
    pub tokens: Vec<String>,
}

impl CleanText {
    pub fn new(tokens: Vec<String>) -> Self {
        CleanText { tokens }
    }

    pub fn from_strs(tokens: &[&str]) -> Self {
        CleanText {
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
        }
    }

    pub fn join(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }
}

fn url_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:https?://|www\.)\S*").unwrap())
}

fn mention_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"@\S+").unwrap())
}

fn keep_alphabetic(c: char) -> bool {
    c.is_alphabetic() || c.is_whitespace() || is_combining_mark(c)
}

pub fn normalize(text: &str, config: &PreprocessConfig) -> CleanText {
    let mut s = if config.lowercase {
        text.to_lowercase()
    } else {
        text.to_string()
    };
    if config.strip_urls {
        s = url_pattern().replace_all(&s, " ").into_owned();
    }
    if config.strip_mentions {
        s = mention_pattern().replace_all(&s, " ").into_owned();
    }
    if !config.replace_empty.is_empty() {
        s.retain(|c| c.is_whitespace() || !config.replace_empty.contains(&c));
    }
    if config.strip_non_alphabetic {
        s = s
            .chars()
            .map(|c| {
                if keep_alphabetic(c) {
                    c
                } else if c.is_whitespace() {
                    ' '
                } else {
                    '\0'
                }
            })
            .filter(|&c| c != '\0')
            .collect();
    }
    if config.collapse_whitespace {
        s = s.split_whitespace().collect::<Vec<_>>().join(" ");
    }
    let tokens = s
        .split_whitespace()
        .filter(|t| !config.stopwords.contains(*t))
        .map(str::to_string)
        .collect();
    CleanText { tokens }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedDocument {
    pub id: String,
    pub text: CleanText,
    pub label: Option<ClassLabel>,
}

/// Order-preserving `normalize` over a corpus. Documents that normalize to
/// nothing are kept.
pub fn preprocess_corpus(
    docs: &[LabeledDocument],
    config: &PreprocessConfig,
) -> Vec<ProcessedDocument> {
    docs.iter()
        .map(|d| ProcessedDocument {
            id: d.id.clone(),
            text: normalize(&d.text, config),
            label: d.label,
        })
        .collect()
}

/// One stopword per line; `#` starts a comment; blank lines ignored.
pub fn parse_stopwords(content: &str) -> Vec<String> {
    content
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn load_stopwords(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_stopwords(&content))
}
