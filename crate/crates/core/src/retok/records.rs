use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::lattice::Segmentation;

/// One D̂′ line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetokRecord {
    pub id: u64,
    pub text: String,
    pub tokens: Vec<String>,
    pub spans: Vec<(usize, usize)>,
    pub loss: f64,
    pub label: usize,
    pub n_candidates: usize,
}

impl RetokRecord {
    pub fn chars(&self) -> Vec<char> {
        self.text.chars().collect()
    }

    pub fn segmentation(&self) -> Result<Segmentation> {
        Segmentation::from_spans(self.spans.clone(), self.text.chars().count())
    }
}

/// The harvested training data, one record per training sentence in id order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RetokDataset {
    pub records: Vec<RetokRecord>,
}

impl RetokDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn mean_loss(&self) -> f64 {
        self.records.iter().map(|r| r.loss).sum::<f64>() / self.records.len().max(1) as f64
    }

    pub fn segmentations(&self) -> Result<Vec<Segmentation>> {
        self.records.iter().map(RetokRecord::segmentation).collect()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str, path: &Path) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let r: RetokRecord = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
            let seg = r.segmentation().map_err(|e| parse_err(e.to_string()))?;
            let chars = r.chars();
            if seg.tokens(&chars) != r.tokens {
                return Err(parse_err("tokens disagree with spans".into()));
            }
            records.push(r);
        }
        Ok(RetokDataset { records })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, self.to_jsonl()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_jsonl(&fsutil::read_to_string(path, "collect")?, path)
    }
}
