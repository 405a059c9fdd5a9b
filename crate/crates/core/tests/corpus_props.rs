use proptest::prelude::*;

use hsd::corpus::{
    class_stats, read_csv, split, stratified_quota, write_csv, ClassLabel, LabeledDocument,
};

fn label() -> impl Strategy<Value = ClassLabel> {
    (0usize..3).prop_map(|c| ClassLabel::from_code(c).unwrap())
}

fn labeled_docs(max: usize) -> impl Strategy<Value = Vec<LabeledDocument>> {
    prop::collection::vec((".{0,40}", label()), 0..max).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (text, l))| LabeledDocument::new(format!("d{}", i), text, Some(l)))
            .collect()
    })
}

proptest! {
    #[test]
    fn csv_round_trip(docs in labeled_docs(30), extra in "[,\"\n\r ]{0,6}") {
        let mut docs = docs;
        if let Some(d) = docs.first_mut() {
            d.text.push_str(&extra);
        }
        let mut buf = Vec::new();
        write_csv(&mut buf, &docs).unwrap();
        // an empty list has no labels to announce, so its header is `id,text`
        let back = read_csv(buf.as_slice(), !docs.is_empty()).unwrap();
        prop_assert_eq!(back, docs);
    }

    #[test]
    fn unlabeled_round_trip(texts in prop::collection::vec(".{0,20}", 0..10)) {
        let docs: Vec<_> = texts.into_iter().enumerate()
            .map(|(i, t)| LabeledDocument::new(format!("u{}", i), t, None))
            .collect();
        let mut buf = Vec::new();
        write_csv(&mut buf, &docs).unwrap();
        prop_assert_eq!(read_csv(buf.as_slice(), false).unwrap(), docs);
    }

    #[test]
    fn stats_fractions_sum_to_one(docs in labeled_docs(200).prop_filter("nonempty", |d| !d.is_empty())) {
        let s = class_stats(&docs).unwrap();
        prop_assert_eq!(s.counts.iter().sum::<usize>(), s.total);
        prop_assert!((s.percentages.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for c in ClassLabel::ALL {
            prop_assert_eq!(s.fraction(c), s.counts[c.code()] as f64 / s.total as f64);
        }
        let shown = s.display_percentages();
        prop_assert!((shown.iter().sum::<f64>() - 100.0).abs() < 1e-6);
    }

    #[test]
    fn stratified_split_keeps_proportions(
        docs in labeled_docs(300).prop_filter("nonempty", |d| !d.is_empty()),
        ratio in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let s = split(&docs, ratio, seed, true).unwrap();
        let n = docs.len();
        prop_assert_eq!(s.train.len(), (ratio * n as f64).round() as usize);
        prop_assert_eq!(s.train.len() + s.held_out.len(), n);
        let mut ids: Vec<&str> = s.train.iter().chain(&s.held_out).map(|d| d.id.as_str()).collect();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), n);
        for c in ClassLabel::ALL {
            let total = docs.iter().filter(|d| d.label == Some(c)).count() as f64;
            let got = s.train.iter().filter(|d| d.label == Some(c)).count() as f64;
            prop_assert!((got - ratio * total).abs() <= 1.0 + 1e-9, "class {} got {} of {}", c, got, total);
        }
        prop_assert_eq!(split(&docs, ratio, seed, true).unwrap(), s);
    }

    #[test]
    fn unstratified_split_sizes(docs in labeled_docs(100).prop_filter("nonempty", |d| !d.is_empty()), seed in any::<u64>()) {
        let s = split(&docs, 0.8, seed, false).unwrap();
        prop_assert_eq!(s.train.len(), (0.8 * docs.len() as f64).round() as usize);
        prop_assert_eq!(s.train.len() + s.held_out.len(), docs.len());
    }
}

#[test]
fn ten_doc_split() {
    let docs: Vec<_> = (0..10)
        .map(|i| LabeledDocument::new(format!("{}", i), "x", Some(ClassLabel::ALL[i % 3])))
        .collect();
    let s = split(&docs, 0.8, 7, false).unwrap();
    assert_eq!((s.train.len(), s.held_out.len()), (8, 2));
    assert!(s
        .held_out
        .iter()
        .all(|h| s.train.iter().all(|t| t.id != h.id)));
}

#[test]
fn quota_on_large_imbalanced_counts() {
    let q = stratified_quota(&[18614, 1022, 709], 0.8);
    for (got, n) in q.iter().zip([18614.0, 1022.0, 709.0]) {
        assert!((*got as f64 - 0.8 * n).abs() <= 1.0);
    }
    assert_eq!(q.iter().sum::<usize>(), 16276);
}
