//! Short-text classification toolkit for three-class abusive-language
//! detection (CLEAN / OFFENSIVE / HATE).
//!
//! The pipeline is: [`corpus`] ingestion and splitting, [`preprocess`]
//! normalization, [`vocab`] integer encoding and pretrained embeddings,
//! then either [`tfidf`] features with the [`linear`] models, or the
//! [`recurrent`] LSTM/GRU classifiers trained by [`train_eval`].
//! [`pipeline`] glues it all together for the `hsd` binary.

pub mod corpus;
pub mod error;
pub mod linear;
pub mod pipeline;
pub mod preprocess;
pub mod recurrent;
pub mod synthetic;
pub mod tfidf;
pub mod train_eval;
pub mod vocab;

pub use corpus::{ClassDistribution, ClassLabel, DatasetSplit, LabeledDocument};
pub use error::{Error, Result};
pub use preprocess::{CleanText, PreprocessConfig};
pub use vocab::{EmbeddingMatrix, TokenSequence, Vocabulary};
