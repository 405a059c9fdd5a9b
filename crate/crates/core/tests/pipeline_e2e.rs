use std::path::{Path, PathBuf};
use std::process::Command;

use hsd::corpus::{save_csv, ClassLabel, LabeledDocument};
use hsd::linear::{LinearKind, LinearModel};
use hsd::pipeline::{
    cmd_compare, cmd_eval, cmd_predict, cmd_stats, cmd_train, read_predictions, write_predictions,
    ModelKind, PipelineConfig, Predictor, TrainedModel, HELDOUT_FILE, MODEL_FILE, TRAIN_SPLIT_FILE,
    VOCAB_FILE,
};
use hsd::train_eval::{RankBy, WALL_CLOCK_PREFIX};
use hsd::Error;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

/// Order corpus config with a small network so each run takes well under
/// a second.
fn small(kind: ModelKind) -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.paths.train = Some(data("order_train.csv"));
    c.paths.eval = Some(data("order_test.csv"));
    c.model.kind = kind;
    c.vocab.embed_dim = 8;
    c.vocab.max_len = 8;
    c.recurrent.hidden = 8;
    c.train.epochs = 3;
    c
}

fn write_and_eval(dir: &Path, input: &Path) -> hsd::train_eval::MetricsReport {
    let preds = cmd_predict(dir, input).unwrap();
    let path = dir.join("preds.csv");
    write_predictions(std::fs::File::create(&path).unwrap(), &preds).unwrap();
    assert_eq!(read_predictions(&path).unwrap(), preds);
    cmd_eval(input, &path).unwrap()
}

#[test]
fn saved_model_reproduces_reports() {
    for kind in ModelKind::ALL {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("run");
        let cfg = small(kind);
        let outcome = cmd_train(&cfg, Some(&out)).unwrap();
        let heldout = write_and_eval(&out, &out.join(HELDOUT_FILE));
        assert_eq!(Some(heldout), outcome.record.heldout_metrics, "{:?}", kind);
        let train = write_and_eval(&out, &out.join(TRAIN_SPLIT_FILE));
        assert_eq!(train, outcome.record.train_metrics, "{:?}", kind);
        assert_eq!(
            Predictor::load(&out).unwrap().model,
            outcome.predictor.model
        );
    }
}

fn strip_wall_clock(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with(WALL_CLOCK_PREFIX) && !l.contains("wall_clock_seconds"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn reruns_are_identical() {
    for kind in [ModelKind::Bilstm, ModelKind::Lr, ModelKind::SvmCascade] {
        let tmp = tempfile::tempdir().unwrap();
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        let cfg = small(kind);
        let ra = cmd_train(&cfg, Some(&a)).unwrap().record;
        let rb = cmd_train(&cfg, Some(&b)).unwrap().record;
        assert_eq!(ra.epoch_losses, rb.epoch_losses);
        assert_eq!(ra.train_metrics, rb.train_metrics);
        assert_eq!(ra.heldout_metrics, rb.heldout_metrics);
        for entry in std::fs::read_dir(&a).unwrap() {
            let name = entry.unwrap().file_name();
            let x = std::fs::read_to_string(a.join(&name)).unwrap();
            let y = std::fs::read_to_string(b.join(&name)).unwrap();
            assert_eq!(strip_wall_clock(&x), strip_wall_clock(&y), "{:?}", name);
        }
    }
}

#[test]
fn zero_learning_rate_leaves_initial_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(ModelKind::Lr);
    cfg.lr.learning_rate = 0.0;
    cfg.lr.epochs = 1;
    let outcome = cmd_train(&cfg, Some(tmp.path())).unwrap();
    let dim = outcome.predictor.tfidf.as_ref().unwrap().dim();
    let zero = TrainedModel::Linear(LinearModel::zeros(LinearKind::Logistic, 3, dim));
    assert_eq!(outcome.predictor.model, zero);
    assert_eq!(Predictor::load(tmp.path()).unwrap().model, zero);
}

#[test]
fn inconsistent_artifacts_fail_before_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    cmd_train(&small(ModelKind::Gru), Some(&out)).unwrap();
    let vocab = out.join(VOCAB_FILE);
    let mut text = std::fs::read_to_string(&vocab).unwrap();
    text.push_str("intruder\n");
    std::fs::write(&vocab, text).unwrap();
    let err = cmd_predict(&out, &out.join(HELDOUT_FILE)).unwrap_err();
    assert!(matches!(err, Error::ModelFormat(_)), "{}", err);

    let preds = tmp.path().join("preds.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_hsd"))
        .args(["predict", "--model-dir"])
        .arg(&out)
        .arg("--input")
        .arg(out.join(HELDOUT_FILE))
        .arg("--output")
        .arg(&preds)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    assert!(!preds.exists());
}

#[test]
fn degenerate_rows_get_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in.csv");
    let docs: Vec<LabeledDocument> = ["", "   ", "zzz qqq", "!!! 123 @who", "not good"]
        .iter()
        .enumerate()
        .map(|(i, t)| LabeledDocument::new(format!("r{}", 5 - i), *t, None))
        .collect();
    save_csv(&input, &docs).unwrap();
    for kind in ModelKind::ALL {
        let out = tmp.path().join(kind.key());
        cmd_train(&small(kind), Some(&out)).unwrap();
        let preds = cmd_predict(&out, &input).unwrap();
        let ids: Vec<&str> = preds.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["r5", "r4", "r3", "r2", "r1"]);
        for p in &preds {
            assert!(p.scores.iter().all(|s| s.is_finite()));
            if kind != ModelKind::SvmCascade {
                assert!((p.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        // the three texts that clean to nothing share one prediction
        assert_eq!(
            preds[0],
            hsd::pipeline::PredictionOutput {
                id: "r5".into(),
                ..preds[1].clone()
            }
        );
    }
}

#[test]
fn single_precision_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(ModelKind::Lstm);
    cfg.train.precision = "single".into();
    let outcome = cmd_train(&cfg, Some(tmp.path())).unwrap();
    assert!(matches!(
        outcome.predictor.model,
        TrainedModel::RecurrentSingle(_)
    ));
    let heldout = write_and_eval(tmp.path(), &tmp.path().join(HELDOUT_FILE));
    assert_eq!(Some(heldout), outcome.record.heldout_metrics);
}

#[test]
fn compare_shares_split_and_ranks() {
    let one = cmd_compare(&[small(ModelKind::Lr)], RankBy::MacroF1, None).unwrap();
    assert_eq!(one.rows.len(), 1);

    let twins = cmd_compare(
        &[small(ModelKind::Gru), small(ModelKind::Gru)],
        RankBy::MacroF1,
        None,
    )
    .unwrap();
    assert_eq!(twins.rows[0].score, twins.rows[1].score);

    let mut deep = small(ModelKind::Bilstm);
    deep.recurrent.hidden = 16;
    deep.train.epochs = 10;
    let tmp = tempfile::tempdir().unwrap();
    let all = cmd_compare(
        &[small(ModelKind::Lr), small(ModelKind::SvmCascade), deep],
        RankBy::MacroF1,
        Some(tmp.path()),
    )
    .unwrap();
    assert_eq!(all.rows[0].model, "Bi-LSTM", "{}", all.table);
    assert!(tmp.path().join("comparison.txt").exists());
    assert!(tmp.path().join("03_bilstm").join(MODEL_FILE).exists());
}

#[test]
fn compare_records_failures() {
    // 4-dimensional vectors against an 8-dimensional embedding setting
    let mut bad_gru = small(ModelKind::Gru);
    bad_gru.paths.embeddings = Some(data("toy_embeddings.txt"));
    let out = cmd_compare(
        &[small(ModelKind::Lr), bad_gru.clone()],
        RankBy::MacroF1,
        None,
    )
    .unwrap();
    assert_eq!(out.rows.len(), 2);
    assert!(out.rows[1].score.is_none() && !out.all_failed());
    assert!(out.table.contains("failed"), "{}", out.table);
    let none = cmd_compare(&[bad_gru], RankBy::MacroF1, None).unwrap();
    assert!(none.all_failed());
}

#[test]
fn stats_table_for_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("s.csv");
    let docs: Vec<LabeledDocument> = (0..10)
        .map(|i| {
            let label = if i < 7 {
                ClassLabel::Clean
            } else if i < 9 {
                ClassLabel::Offensive
            } else {
                ClassLabel::Hate
            };
            LabeledDocument::new(i.to_string(), "x", Some(label))
        })
        .collect();
    save_csv(&path, &docs).unwrap();
    let (dist, table) = cmd_stats(&path).unwrap();
    assert_eq!(dist.counts, [7, 2, 1]);
    assert!(
        table.contains("70.00") && table.contains("20.00") && table.contains("10.00"),
        "{}",
        table
    );
}

fn hsd(args: &[&str], dir: &Path) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_hsd"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn binary_commands_and_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let train = data("order_train.csv");
    let test = data("order_test.csv");
    let cfg = format!(
        "[paths]\ntrain = {:?}\neval = {:?}\n[model]\nkind = \"lr\"\n",
        train.to_str().unwrap(),
        test.to_str().unwrap()
    );
    std::fs::write(dir.join("c.toml"), cfg).unwrap();

    let (code, stdout, _) = hsd(&["stats", "--config", "c.toml"], dir);
    assert_eq!(code, 0);
    assert!(stdout.contains("CLEAN"));

    let (code, stdout, err) = hsd(
        &["train", "--config", "c.toml", "--out", "run", "--seed", "5"],
        dir,
    );
    assert_eq!(code, 0, "{}", err);
    assert!(stdout.contains("macro"));
    let (code, preds, _) = hsd(
        &[
            "predict",
            "--model-dir",
            "run",
            "--input",
            test.to_str().unwrap(),
        ],
        dir,
    );
    assert_eq!(code, 0);
    assert!(preds.starts_with("id,predicted,score_clean,score_offensive,score_hate\n"));
    assert_eq!(preds.lines().count(), 201);
    let (code, _, _) = hsd(
        &[
            "predict",
            "--model-dir",
            "run",
            "--input",
            test.to_str().unwrap(),
            "--output",
            "p.csv",
        ],
        dir,
    );
    assert_eq!(code, 0);
    let (code, report, _) = hsd(
        &[
            "eval",
            "--gold",
            test.to_str().unwrap(),
            "--predictions",
            "p.csv",
        ],
        dir,
    );
    assert_eq!(code, 0);
    assert!(report.contains("accuracy"));
    let (code, _, err) = hsd(
        &[
            "eval",
            "--gold",
            train.to_str().unwrap(),
            "--predictions",
            "p.csv",
        ],
        dir,
    );
    assert_eq!(code, 2);
    assert!(err.contains("offending"), "{}", err);

    let (code, table, _) = hsd(
        &[
            "compare",
            "--config",
            "c.toml",
            "--models",
            "lr,svm_cascade",
        ],
        dir,
    );
    assert_eq!(code, 0);
    assert!(table.contains("Logistic Regression") && table.contains("SVM"));

    // usage and config errors
    assert_eq!(hsd(&["train"], dir).0, 1);
    assert_eq!(hsd(&["frobnicate"], dir).0, 1);
    assert_eq!(hsd(&["train", "--config", "missing.toml"], dir).0, 1);
    std::fs::write(dir.join("bad.toml"), "[model]\nkind = \"transformer\"\n").unwrap();
    assert_eq!(hsd(&["train", "--config", "bad.toml"], dir).0, 1);
    assert_eq!(
        hsd(&["compare", "--config", "c.toml", "--models", "cnn"], dir).0,
        1
    );

    // data errors
    assert_eq!(hsd(&["stats", "--input", "nowhere.csv"], dir).0, 2);
    std::fs::write(dir.join("empty.csv"), "id,text,label\n").unwrap();
    assert_eq!(hsd(&["stats", "--input", "empty.csv"], dir).0, 2);
    std::fs::write(
        dir.join("unlabeled.csv"),
        "id,text,label\na,hello,0\nb,world,\n",
    )
    .unwrap();
    let (code, _, err) = hsd(&["stats", "--input", "unlabeled.csv"], dir);
    assert_eq!(code, 2);
    assert!(err.contains('b'), "{}", err);

    // numeric failure
    let blowup = format!(
        "[paths]\ntrain = {:?}\n[model]\nkind = \"gru\"\n[recurrent]\nhidden = 4\n[vocab]\nembed_dim = 4\n[train]\nlearning_rate = 1e300\noptimizer = \"sgd\"\nepochs = 2\n",
        train.to_str().unwrap()
    );
    std::fs::write(dir.join("blowup.toml"), blowup).unwrap();
    let (code, _, err) = hsd(&["train", "--config", "blowup.toml"], dir);
    assert_eq!(code, 3, "{}", err);
}
