use std::fmt::Write;

use serde::{Deserialize, Serialize};

/// Scores of one tokenization method on one split. Trained tokenizers carry
/// one entry per seed in `trials`; the top-level values are their means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScores {
    pub method: String,
    pub macro_f1: Option<f64>,
    pub per_label_f1: Vec<Option<f64>>,
    pub unk_ratio: Option<f64>,
    pub avg_tokens: Option<f64>,
    pub perplexity: Option<f64>,
    pub bi_tag_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trials: Vec<MethodScores>,
}

impl MethodScores {
    pub fn named(method: impl Into<String>) -> Self {
        MethodScores {
            method: method.into(),
            macro_f1: None,
            per_label_f1: Vec::new(),
            unk_ratio: None,
            avg_tokens: None,
            perplexity: None,
            bi_tag_accuracy: None,
            trials: Vec::new(),
        }
    }

    /// Mean of every metric over `trials`, keeping the trials.
    pub fn mean_of(method: impl Into<String>, trials: Vec<MethodScores>) -> Self {
        fn mean(vals: impl Iterator<Item = Option<f64>>) -> Option<f64> {
            let v: Vec<f64> = vals.flatten().collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        }
        let labels = trials.iter().map(|t| t.per_label_f1.len()).max().unwrap_or(0);
        MethodScores {
            method: method.into(),
            macro_f1: mean(trials.iter().map(|t| t.macro_f1)),
            per_label_f1: (0..labels)
                .map(|l| mean(trials.iter().map(|t| t.per_label_f1.get(l).copied().flatten())))
                .collect(),
            unk_ratio: mean(trials.iter().map(|t| t.unk_ratio)),
            avg_tokens: mean(trials.iter().map(|t| t.avg_tokens)),
            perplexity: mean(trials.iter().map(|t| t.perplexity)),
            bi_tag_accuracy: mean(trials.iter().map(|t| t.bi_tag_accuracy)),
            trials,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub f1: String,
    pub perplexity: String,
    pub unk_ratio: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            f1: "macro-F1; labels absent from both gold and predictions are excluded from the mean".into(),
            perplexity: "exp of the entropy of the empirical token distribution".into(),
            unk_ratio: "single unknown characters are not counted as unknown tokens".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    pub tokenizer_kind: String,
    pub seeds: Vec<u64>,
    pub n: usize,
    pub methods: Vec<MethodScores>,
    /// Token statistics of the training split: original tokenization and D̂′.
    #[serde(default)]
    pub train_statistics: Vec<MethodScores>,
    pub conventions: Conventions,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn method(&self, name: &str) -> Option<&MethodScores> {
        self.methods.iter().find(|m| m.method == name)
    }

    /// Methods as columns, metrics as rows. F1 and ratios are shown in percent.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "split={} tokenizer={} N={} seeds={:?}",
            self.split, self.tokenizer_kind, self.n, self.seeds
        );
        let rows: [(&str, fn(&MethodScores) -> Option<f64>, f64); 5] = [
            ("macro-F1 (%)", |m| m.macro_f1, 100.0),
            ("unk ratio (%)", |m| m.unk_ratio, 100.0),
            ("avg tokens", |m| m.avg_tokens, 1.0),
            ("perplexity", |m| m.perplexity, 1.0),
            ("BI-tag acc (%)", |m| m.bi_tag_accuracy, 100.0),
        ];
        let width = self.methods.iter().map(|m| m.method.len()).max().unwrap_or(0).max(9);
        let _ = write!(out, "{:<16}", "");
        for m in &self.methods {
            let _ = write!(out, " {:>width$}", m.method);
        }
        out.push('\n');
        for (name, get, factor) in rows {
            if self.methods.iter().all(|m| get(m).is_none()) {
                continue;
            }
            let _ = write!(out, "{name:<16}");
            for m in &self.methods {
                match get(m) {
                    Some(v) => {
                        let _ = write!(out, " {:>width$.2}", v * factor);
                    }
                    None => {
                        let _ = write!(out, " {:>width$}", "-");
                    }
                }
            }
            out.push('\n');
        }
        if !self.train_statistics.is_empty() {
            let _ = write!(out, "{:<16}", "train split");
            for m in &self.train_statistics {
                let _ = write!(out, " {:>width$}", m.method);
            }
            out.push('\n');
            for (name, get) in [
                ("avg tokens", (|m: &MethodScores| m.avg_tokens) as fn(&MethodScores) -> Option<f64>),
                ("perplexity", |m: &MethodScores| m.perplexity),
            ] {
                let _ = write!(out, "{name:<16}");
                for m in &self.train_statistics {
                    let _ = write!(out, " {:>width$.2}", get(m).unwrap_or(f64::NAN));
                }
                out.push('\n');
            }
        }
        let _ = writeln!(out, "F1: {}", self.conventions.f1);
        let _ = writeln!(out, "perplexity: {}", self.conventions.perplexity);
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}
