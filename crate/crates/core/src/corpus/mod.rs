//! Dataset ingestion, character handling and vocabulary bookkeeping.

mod vocab;

pub use vocab::{CharTable, TokenId, Vocabulary, PAD_ID, PAD_TOKEN, UNK_ID, UNK_TOKEN};

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// One labelled sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub text: String,
    pub label: usize,
    pub id: u64,
}

impl LabeledExample {
    pub fn chars(&self) -> Vec<char> {
        chars_of(&self.text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn file_name(self) -> &'static str {
        match self {
            Split::Train => "train.jsonl",
            Split::Valid => "valid.jsonl",
            Split::Test => "test.jsonl",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

/// Options applied while reading JSONL files.
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Apply NFKC normalization to every text.
    pub nfkc: bool,
    /// Reject labels at or above this count.
    pub num_labels: Option<usize>,
}

/// Train/valid/test splits with a shared label count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub train: Vec<LabeledExample>,
    pub valid: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
    pub num_labels: usize,
}

impl Dataset {
    /// Assemble splits, renumbering ids so that they are disjoint across splits.
    pub fn from_splits(
        train: Vec<LabeledExample>,
        valid: Vec<LabeledExample>,
        test: Vec<LabeledExample>,
        num_labels: Option<usize>,
    ) -> Result<Self> {
        let observed = train
            .iter()
            .chain(&valid)
            .chain(&test)
            .map(|e| e.label + 1)
            .max()
            .unwrap_or(0);
        let num_labels = num_labels.unwrap_or(observed).max(2);
        if observed > num_labels {
            return Err(Error::Schema(format!(
                "label {} out of range for {num_labels} labels",
                observed - 1
            )));
        }
        let mut next = 0u64;
        let mut renumber = |split: Vec<LabeledExample>| -> Vec<LabeledExample> {
            split
                .into_iter()
                .map(|mut e| {
                    e.id = next;
                    next += 1;
                    e
                })
                .collect()
        };
        let train = renumber(train);
        let valid = renumber(valid);
        let test = renumber(test);
        Ok(Dataset {
            train,
            valid,
            test,
            num_labels,
        })
    }

    /// Read `train.jsonl`, `valid.jsonl` and `test.jsonl` from `dir`.
    pub fn load_dir(dir: &Path, options: LoadOptions) -> Result<Self> {
        let read = |split: Split| load_jsonl(&dir.join(split.file_name()), options);
        Self::from_splits(
            read(Split::Train)?,
            read(Split::Valid)?,
            read(Split::Test)?,
            options.num_labels,
        )
    }

    pub fn split(&self, split: Split) -> &[LabeledExample] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    /// Write the three splits as JSONL files into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        for split in [Split::Train, Split::Valid, Split::Test] {
            let path = dir.join(split.file_name());
            let mut out = String::new();
            for ex in self.split(split) {
                out.push_str(&serde_json::to_string(&JsonlRecord {
                    label: ex.label,
                    text: ex.text.clone(),
                })?);
                out.push('\n');
            }
            crate::fsutil::write_atomic(&path, out.as_bytes())?;
            written.push(path);
        }
        Ok(written)
    }
}

#[derive(Serialize)]
struct JsonlRecord {
    label: usize,
    text: String,
}

/// Read one JSONL split. Blank lines are skipped; ids count records in file order.
pub fn load_jsonl(path: &Path, options: LoadOptions) -> Result<Vec<LabeledExample>> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| parse_err(format!("malformed json: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| parse_err("expected a json object".into()))?;
        let text = match obj.get("text") {
            Some(serde_json::Value::String(s)) => s.clone(),
            Some(_) => return Err(parse_err("schema error: \"text\" must be a string".into())),
            None => return Err(parse_err("schema error: missing text".into())),
        };
        let label = match obj.get("label") {
            Some(v) => v
                .as_u64()
                .ok_or_else(|| parse_err("schema error: \"label\" must be a non-negative integer".into()))?
                as usize,
            None => return Err(parse_err("schema error: missing label".into())),
        };
        if let Some(n) = options.num_labels {
            if label >= n {
                return Err(parse_err(format!("schema error: label {label} >= {n}")));
            }
        }
        let text = if options.nfkc { text.nfkc().collect() } else { text };
        if text.trim().is_empty() {
            return Err(parse_err("schema error: empty text".into()));
        }
        out.push(LabeledExample {
            text,
            label,
            id: out.len() as u64,
        });
    }
    Ok(out)
}

/// Characters (Unicode scalar values) of `text`.
pub fn chars_of(text: &str) -> Vec<char> {
    text.chars().collect()
}

/// Character table over the training texts, in first-occurrence order.
pub fn build_char_table(train: &[LabeledExample]) -> CharTable {
    CharTable::from_texts(train.iter().map(|e| e.text.as_str()))
}
