//! Small generated corpora with known answers.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{ClassLabel, LabeledDocument};

/// Filler words for the order corpus. None of them is "not" or "good".
pub const FILLERS: [&str; 12] = [
    "the", "movie", "was", "really", "very", "food", "day", "this", "is", "so", "service", "quite",
];

pub const ORDER_LENGTH: usize = 6;
pub const ORDER_TRAIN_SEED: u64 = 1;
pub const ORDER_TEST_SEED: u64 = 2;

/// Six-token sentences holding "not" and "good" once each plus four random
/// fillers. Label is OFFENSIVE when "not" comes before "good", CLEAN
/// otherwise. Both classes have the same bag of words distribution, so
/// only word order separates them.
pub fn negation_order(n: usize, seed: u64, id_prefix: &str) -> Vec<LabeledDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut words: Vec<&str> = (0..ORDER_LENGTH - 2)
                .map(|_| *FILLERS.choose(&mut rng).expect("non-empty pool"))
                .collect();
            let a = rng.gen_range(0..ORDER_LENGTH - 1);
            let b = rng.gen_range(a + 1..ORDER_LENGTH);
            let not_first = rng.gen_bool(0.5);
            let (first, second) = if not_first {
                ("not", "good")
            } else {
                ("good", "not")
            };
            words.insert(a, first);
            words.insert(b, second);
            let label = if not_first {
                ClassLabel::Offensive
            } else {
                ClassLabel::Clean
            };
            LabeledDocument::new(format!("{}{}", id_prefix, i), words.join(" "), Some(label))
        })
        .collect()
}

/// Default 500 train / 200 test order corpus.
pub fn negation_order_split() -> (Vec<LabeledDocument>, Vec<LabeledDocument>) {
    (
        negation_order(500, ORDER_TRAIN_SEED, "train-"),
        negation_order(200, ORDER_TEST_SEED, "test-"),
    )
}

/// Documents built from per-class keyword sets that do not overlap, so a
/// bag-of-words model can separate them perfectly.
pub fn keyword_blobs(n: usize, seed: u64) -> Vec<LabeledDocument> {
    const KEYWORDS: [[&str; 4]; 3] = [
        ["sunny", "lovely", "friendly", "calm"],
        ["damn", "crap", "stupid", "idiot"],
        ["vermin", "subhuman", "expel", "purge"],
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = ClassLabel::ALL[i % 3];
            let len = rng.gen_range(2..6);
            let words: Vec<&str> = (0..len)
                .map(|_| *KEYWORDS[label.code()].choose(&mut rng).expect("non-empty"))
                .collect();
            LabeledDocument::new(format!("blob-{}", i), words.join(" "), Some(label))
        })
        .collect()
}
