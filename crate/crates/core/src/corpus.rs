//! Dataset ingestion, the three-class label schema, class statistics and
//! deterministic train/held-out splits.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// The task's label schema. Integer codes are stable and used on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassLabel {
    Clean = 0,
    Offensive = 1,
    Hate = 2,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [ClassLabel::Clean, ClassLabel::Offensive, ClassLabel::Hate];
    pub const COUNT: usize = 3;

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Clean => "CLEAN",
            ClassLabel::Offensive => "OFFENSIVE",
            ClassLabel::Hate => "HATE",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    /// Accepts bare digits (`0`, `1`, `2`) or case-insensitive names.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "0" | "clean" => Ok(ClassLabel::Clean),
            "1" | "offensive" => Ok(ClassLabel::Offensive),
            "2" | "hate" => Ok(ClassLabel::Hate),
            _ => Err(Error::UnknownLabel(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDocument {
    pub id: String,
    pub text: String,
    pub label: Option<ClassLabel>,
}

impl LabeledDocument {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<ClassLabel>) -> Self {
        LabeledDocument {
            id: id.into(),
            text: text.into(),
            label,
        }
    }
}

/// Read a dataset in the `id,text[,label]` CSV schema.
///
/// Rows are returned in file order. When `has_labels` is set the header must
/// carry a `label` column; an empty label field leaves the document
/// unlabeled.
pub fn load_csv(path: impl AsRef<Path>, has_labels: bool) -> Result<Vec<LabeledDocument>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, has_labels).map_err(|e| match e {
        Error::MalformedRow { row, message, .. } => Error::MalformedRow {
            path: path.to_path_buf(),
            row,
            message,
        },
        other => other,
    })
}

/// Same as [`load_csv`] over any reader. Row numbers in errors are 1-based
/// data rows (the header is row 0).
pub fn read_csv<R: std::io::Read>(reader: R, has_labels: bool) -> Result<Vec<LabeledDocument>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Ok(Vec::new()),
    };
    let header: Vec<String> = header
        .iter()
        .map(|h| h.trim().trim_start_matches('\u{feff}').to_ascii_lowercase())
        .collect();
    let malformed = |row: usize, message: String| Error::MalformedRow {
        path: Default::default(),
        row,
        message,
    };
    let expected_header: &[&str] = if header.len() == 3 {
        &["id", "text", "label"]
    } else {
        &["id", "text"]
    };
    if header != expected_header {
        return Err(malformed(0, format!("unexpected header {:?}", header)));
    }
    if has_labels && header.len() != 3 {
        return Err(malformed(0, "expected a label column".into()));
    }
    let width = header.len();

    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in records.enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != width {
            return Err(malformed(
                row,
                format!("expected {} columns, found {}", width, record.len()),
            ));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(malformed(row, "empty id".into()));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let label = if has_labels && !record[2].trim().is_empty() {
            Some(record[2].parse::<ClassLabel>()?)
        } else {
            None
        };
        docs.push(LabeledDocument {
            id,
            text: record[1].to_string(),
            label,
        });
    }
    Ok(docs)
}

/// Write documents in the CSV schema. A label column is written whenever
/// any document is labeled; labels are emitted as digit codes.
pub fn write_csv<W: std::io::Write>(writer: W, docs: &[LabeledDocument]) -> Result<()> {
    let labeled = docs.iter().any(|d| d.label.is_some());
    let mut wtr = csv::Writer::from_writer(writer);
    if labeled {
        wtr.write_record(["id", "text", "label"])?;
    } else {
        wtr.write_record(["id", "text"])?;
    }
    for d in docs {
        if labeled {
            let code = d.label.map(|l| l.code().to_string()).unwrap_or_default();
            wtr.write_record([d.id.as_str(), d.text.as_str(), code.as_str()])?;
        } else {
            wtr.write_record([d.id.as_str(), d.text.as_str()])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_csv(path: impl AsRef<Path>, docs: &[LabeledDocument]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(std::io::BufWriter::new(file), docs)
}

fn require_labels(docs: &[LabeledDocument]) -> Result<Vec<ClassLabel>> {
    let missing: Vec<&str> = docs
        .iter()
        .filter(|d| d.label.is_none())
        .map(|d| d.id.as_str())
        .collect();
    if !missing.is_empty() {
        let shown: Vec<&str> = missing.iter().take(5).copied().collect();
        let more = if missing.len() > 5 {
            format!(" (and {} more)", missing.len() - 5)
        } else {
            String::new()
        };
        return Err(Error::Unlabeled(format!("{}{}", shown.join(", "), more)));
    }
    Ok(docs.iter().filter_map(|d| d.label).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution {
    pub counts: [usize; 3],
    pub total: usize,
    /// Full-precision fractions; rounding only happens in [`display_percentages`](Self::display_percentages).
    pub percentages: [f64; 3],
}

impl ClassDistribution {
    pub fn count(&self, label: ClassLabel) -> usize {
        self.counts[label.code()]
    }

    pub fn fraction(&self, label: ClassLabel) -> f64 {
        self.percentages[label.code()]
    }

    /// Percentages rounded to two decimals with the largest-remainder rule,
    /// so that the displayed values always add up to exactly 100.00.
    pub fn display_percentages(&self) -> [f64; 3] {
        if self.total == 0 {
            return [0.0; 3];
        }
        let hundredths = largest_remainder(&self.counts, 10_000);
        hundredths.map(|h| h as f64 / 100.0)
    }

    /// Fixed-width frequency/percentage table.
    pub fn table(&self) -> String {
        let pct = self.display_percentages();
        let mut out = format!(
            "{:<12}{:>10}{:>11}{:>10}{:>10}\n",
            "", "CLEAN", "OFFENSIVE", "HATE", "TOTAL"
        );
        out.push_str(&format!(
            "{:<12}{:>10}{:>11}{:>10}{:>10}\n",
            "Frequency", self.counts[0], self.counts[1], self.counts[2], self.total
        ));
        out.push_str(&format!(
            "{:<12}{:>10}{:>11}{:>10}{:>10}\n",
            "Percentage",
            format!("{:.2}%", pct[0]),
            format!("{:.2}%", pct[1]),
            format!("{:.2}%", pct[2]),
            "100%"
        ));
        out
    }
}

/// Apportion `units` among parts proportional to `weights` (Hamilton's
/// method). Remainder ties go to the lower index.
fn largest_remainder(weights: &[usize; 3], units: u64) -> [u64; 3] {
    let total: u64 = weights.iter().map(|&w| w as u64).sum();
    let mut shares = [0u64; 3];
    let mut rems = [0u64; 3];
    for c in 0..3 {
        let num = weights[c] as u64 * units;
        shares[c] = num / total;
        rems[c] = num % total;
    }
    let mut left = units - shares.iter().sum::<u64>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| rems[b].cmp(&rems[a]).then(a.cmp(&b)));
    for &c in order.iter().cycle() {
        if left == 0 {
            break;
        }
        shares[c] += 1;
        left -= 1;
    }
    shares
}

pub fn class_stats(docs: &[LabeledDocument]) -> Result<ClassDistribution> {
    let labels = require_labels(docs)?;
    let mut counts = [0usize; 3];
    for l in &labels {
        counts[l.code()] += 1;
    }
    let total = labels.len();
    let percentages = if total == 0 {
        [0.0; 3]
    } else {
        counts.map(|c| c as f64 / total as f64)
    };
    Ok(ClassDistribution {
        counts,
        total,
        percentages,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<LabeledDocument>,
    pub held_out: Vec<LabeledDocument>,
    pub seed: u64,
    pub ratio: f64,
}

/// Number of training documents per class for a stratified split: each
/// class gets `floor(ratio * n_c)` and the documents needed to reach
/// `round(ratio * N)` go to the largest fractional remainders.
pub fn stratified_quota(counts: &[usize; 3], ratio: f64) -> [usize; 3] {
    let n: usize = counts.iter().sum();
    let target = (ratio * n as f64).round() as usize;
    let mut quota = [0usize; 3];
    let mut rems = [0f64; 3];
    for c in 0..3 {
        let exact = ratio * counts[c] as f64;
        // guard against 0.8 * 15 = 11.999.. style representation error
        let fl = (exact + 1e-9).floor();
        quota[c] = (fl as usize).min(counts[c]);
        rems[c] = exact - fl;
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| rems[b].total_cmp(&rems[a]).then(a.cmp(&b)));
    let mut assigned: usize = quota.iter().sum();
    for &c in &order {
        if assigned >= target {
            break;
        }
        if quota[c] < counts[c] {
            quota[c] += 1;
            assigned += 1;
        }
    }
    quota
}

/// Deterministic train/held-out partition. Both halves keep the input order.
pub fn split(
    docs: &[LabeledDocument],
    ratio: f64,
    seed: u64,
    stratified: bool,
) -> Result<DatasetSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split ratio must lie in (0,1), got {}",
            ratio
        )));
    }
    let mut in_train = vec![false; docs.len()];
    if stratified {
        let labels = require_labels(docs)?;
        let mut members: [Vec<usize>; 3] = Default::default();
        for (i, l) in labels.iter().enumerate() {
            members[l.code()].push(i);
        }
        let counts = [members[0].len(), members[1].len(), members[2].len()];
        let quota = stratified_quota(&counts, ratio);
        for c in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64 + 1);
            members[c].shuffle(&mut rng);
            for &i in &members[c][..quota[c]] {
                in_train[i] = true;
            }
        }
    } else {
        let target = (ratio * docs.len() as f64).round() as usize;
        let mut order: Vec<usize> = (0..docs.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        for &i in &order[..target] {
            in_train[i] = true;
        }
    }
    let mut train = Vec::new();
    let mut held_out = Vec::new();
    for (doc, t) in docs.iter().zip(in_train) {
        if t {
            train.push(doc.clone());
        } else {
            held_out.push(doc.clone());
        }
    }
    Ok(DatasetSplit {
        train,
        held_out,
        seed,
        ratio,
    })
}
