use std::collections::HashMap;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ContextDataset, ExamplePair};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("reading dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset is empty")]
    Empty,
    #[error("missing column {0:?}")]
    MissingColumn(&'static str),
    #[error("missing label at line {line}")]
    MissingLabel { line: u64 },
    #[error("missing text at line {line}")]
    MissingText { line: u64 },
    #[error("invalid UTF-8 at line {line}")]
    InvalidEncoding { line: u64 },
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("need at least two distinct labels, found {0}")]
    TooFewLabels(usize),
    #[error("unknown dataset format {0:?} (expected tsv, csv or jsonl)")]
    UnknownFormat(String),
    #[error("label {label:?} has {available} examples, {needed} needed")]
    InsufficientClass {
        label: String,
        needed: usize,
        available: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Tsv,
    Csv,
    Jsonl,
}

impl DatasetFormat {
    pub fn from_path(path: &Path) -> Result<Self, DatasetError> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or_default()
            .to_ascii_lowercase();
        ext.parse()
    }
}

impl std::str::FromStr for DatasetFormat {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(Self::Tsv),
            "csv" => Ok(Self::Csv),
            "jsonl" | "ndjson" => Ok(Self::Jsonl),
            other => Err(DatasetError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextRecord {
    pub text: String,
    pub label: String,
}

/// Labelled text records with the label set in first-appearance order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledTextDataset {
    records: Vec<TextRecord>,
    labels: Vec<String>,
}

impl LabeledTextDataset {
    pub fn new(records: Vec<TextRecord>) -> Result<Self, DatasetError> {
        if records.is_empty() {
            return Err(DatasetError::Empty);
        }
        let mut labels: Vec<String> = Vec::new();
        for r in &records {
            if !labels.contains(&r.label) {
                labels.push(r.label.clone());
            }
        }
        if labels.len() < 2 {
            return Err(DatasetError::TooFewLabels(labels.len()));
        }
        Ok(Self { records, labels })
    }

    pub fn records(&self) -> &[TextRecord] {
        &self.records
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// The dataset minus the record at `index`; the label set is unchanged.
    pub fn without(&self, index: usize) -> Self {
        let mut records = self.records.clone();
        records.remove(index);
        Self {
            records,
            labels: self.labels.clone(),
        }
    }
}

/// Loads a UTF-8 dataset with `text` and `label` columns (TSV/CSV header or
/// JSONL fields).
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<LabeledTextDataset, DatasetError> {
    let bytes = std::fs::read(path)?;
    let content = String::from_utf8(bytes).map_err(|e| {
        let valid = &e.as_bytes()[..e.utf8_error().valid_up_to()];
        DatasetError::InvalidEncoding {
            line: 1 + valid.iter().filter(|&&b| b == b'\n').count() as u64,
        }
    })?;
    let content = content.strip_prefix('\u{feff}').unwrap_or(&content);
    let records = match format {
        DatasetFormat::Tsv => parse_delimited(content, b'\t')?,
        DatasetFormat::Csv => parse_delimited(content, b',')?,
        DatasetFormat::Jsonl => parse_jsonl(content)?,
    };
    LabeledTextDataset::new(records)
}

fn parse_delimited(content: &str, delimiter: u8) -> Result<Vec<TextRecord>, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .quoting(delimiter == b',')
        .flexible(true)
        .from_reader(content.as_bytes());
    let headers = reader.headers().map_err(|e| DatasetError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(DatasetError::Empty);
    }
    let col = |name: &'static str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or(DatasetError::MissingColumn(name))
    };
    let text_col = col("text")?;
    let label_col = col("label")?;

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| DatasetError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() == 1 && row[0].trim().is_empty() {
            continue;
        }
        let text = row.get(text_col).unwrap_or_default();
        let label = row.get(label_col).unwrap_or_default().trim();
        if text.trim().is_empty() {
            return Err(DatasetError::MissingText { line });
        }
        if label.is_empty() {
            return Err(DatasetError::MissingLabel { line });
        }
        records.push(TextRecord {
            text: text.to_string(),
            label: label.to_string(),
        });
    }
    Ok(records)
}

fn parse_jsonl(content: &str) -> Result<Vec<TextRecord>, DatasetError> {
    let mut records = Vec::new();
    for (i, raw) in content.lines().enumerate() {
        let line = i as u64 + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(raw).map_err(|e| DatasetError::Parse {
            line,
            message: e.to_string(),
        })?;
        let field = |name: &str| {
            value
                .get(name)
                .and_then(|v| v.as_str())
                .map(str::to_string)
                .unwrap_or_default()
        };
        let text = field("text");
        let label = field("label").trim().to_string();
        if text.trim().is_empty() {
            return Err(DatasetError::MissingText { line });
        }
        if label.is_empty() {
            return Err(DatasetError::MissingLabel { line });
        }
        records.push(TextRecord { text, label });
    }
    Ok(records)
}

/// Renames labels (e.g. `Sci/Tech` to `Science`), keeping label order.
pub fn relabel(dataset: &LabeledTextDataset, mapping: &[(&str, &str)]) -> LabeledTextDataset {
    let map: HashMap<&str, &str> = mapping.iter().copied().collect();
    let rename = |l: &str| map.get(l).map_or_else(|| l.to_string(), |r| r.to_string());
    let records = dataset
        .records
        .iter()
        .map(|r| TextRecord {
            text: r.text.clone(),
            label: rename(&r.label),
        })
        .collect();
    let mut labels: Vec<String> = Vec::new();
    for l in &dataset.labels {
        let l = rename(l);
        if !labels.contains(&l) {
            labels.push(l);
        }
    }
    LabeledTextDataset { records, labels }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LengthMode {
    Chars,
    WhitespaceTokens,
}

impl LengthMode {
    pub fn measure(self, text: &str) -> usize {
        match self {
            LengthMode::Chars => text.chars().count(),
            LengthMode::WhitespaceTokens => text.split_whitespace().count(),
        }
    }
}

/// Drops records whose text is longer than `max_units`; returns the kept
/// dataset and the number removed.
pub fn filter_by_length(
    dataset: &LabeledTextDataset,
    max_units: usize,
    mode: LengthMode,
) -> (LabeledTextDataset, usize) {
    let records: Vec<TextRecord> = dataset
        .records
        .iter()
        .filter(|r| mode.measure(&r.text) <= max_units)
        .cloned()
        .collect();
    let removed = dataset.records.len() - records.len();
    (
        LabeledTextDataset {
            records,
            labels: dataset.labels.clone(),
        },
        removed,
    )
}

/// Draws a label-balanced context of `n` examples.
///
/// Each label receives `⌊n / C⌋` examples and `n mod C` labels chosen
/// uniformly without replacement receive one more. Picks within a label are
/// uniform without replacement and the result is shuffled.
pub fn balanced_sample<R: Rng + ?Sized>(
    dataset: &LabeledTextDataset,
    n: usize,
    rng: &mut R,
) -> Result<ContextDataset<String, String>, DatasetError> {
    let num_labels = dataset.labels.len();
    let base = n / num_labels;
    let extra = n % num_labels;
    let mut quota = vec![base; num_labels];
    for c in index::sample(rng, num_labels, extra) {
        quota[c] += 1;
    }

    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); num_labels];
    for (i, r) in dataset.records.iter().enumerate() {
        let c = dataset
            .labels
            .iter()
            .position(|l| *l == r.label)
            .expect("record label in label set");
        by_label[c].push(i);
    }

    let mut picked = Vec::with_capacity(n);
    for (c, members) in by_label.iter().enumerate() {
        if members.len() < quota[c] {
            return Err(DatasetError::InsufficientClass {
                label: dataset.labels[c].clone(),
                needed: quota[c],
                available: members.len(),
            });
        }
        picked.extend(index::sample(rng, members.len(), quota[c]).into_iter().map(|k| members[k]));
    }
    picked.shuffle(rng);
    Ok(picked
        .into_iter()
        .map(|i| {
            let r = &dataset.records[i];
            ExamplePair::new(r.text.clone(), r.label.clone())
        })
        .collect())
}
