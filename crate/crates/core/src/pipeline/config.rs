use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierConfig;
use crate::error::{Error, Result};
use crate::fsutil;
use crate::metrics::PerplexityMode;
use crate::retok::{BiTagConfig, CandidateOptions, SpanConfig, TrainConfig};
use crate::tokenizers::{Sampling, TokenizerKind};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TokenizerSettings {
    pub kind: TokenizerKind,
    pub vocab_size: usize,
}

impl Default for TokenizerSettings {
    fn default() -> Self {
        TokenizerSettings {
            kind: TokenizerKind::Unigram,
            vocab_size: 800,
        }
    }
}

/// Tokenizers fitted on D̂′.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptKind {
    Span,
    Bitag,
    UnigramOpt,
}

impl OptKind {
    /// Column name used in reports.
    pub fn display(self) -> &'static str {
        match self {
            OptKind::Span => "Proposed",
            OptKind::Bitag => "BI-Tag",
            OptKind::UnigramOpt => "Unigram^OPT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptSettings {
    pub kinds: Vec<OptKind>,
    /// Independent training runs of each neural tokenizer.
    pub trials: usize,
    pub span: SpanConfig,
    pub bitag: BiTagConfig,
}

impl Default for OptSettings {
    fn default() -> Self {
        OptSettings {
            kinds: vec![OptKind::UnigramOpt, OptKind::Bitag, OptKind::Span],
            trials: 3,
            span: SpanConfig::default(),
            bitag: BiTagConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSettings {
    pub exclude_unknown_chars: bool,
    pub perplexity: PerplexityMode,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            exclude_unknown_chars: true,
            perplexity: PerplexityMode::Entropy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub ns: Vec<usize>,
    /// Refit the optimized tokenizers for every N; otherwise only the
    /// oracle is recomputed.
    pub retrain: bool,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            ns: vec![3, 10, 50, 100, 150, 200],
            retrain: true,
        }
    }
}

/// One file drives every pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub version: u32,
    /// Directory with train/valid/test JSONL files. Relative paths are
    /// resolved against the directory of the config file.
    pub dataset_dir: PathBuf,
    pub seed: u64,
    pub nfkc: bool,
    pub tokenizer: TokenizerSettings,
    pub classifier: ClassifierConfig,
    pub candidates: CandidateOptions,
    pub opt: OptSettings,
    pub evaluate: EvalSettings,
    pub sweep: SweepSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            dataset_dir: PathBuf::from("data"),
            seed: 0,
            nfkc: false,
            tokenizer: TokenizerSettings::default(),
            classifier: ClassifierConfig::default(),
            candidates: CandidateOptions {
                n: 25,
                ..CandidateOptions::default()
            },
            opt: OptSettings::default(),
            evaluate: EvalSettings::default(),
            sweep: SweepSettings::default(),
        }
    }
}

impl ExperimentConfig {
    /// Smaller networks and epoch caps that fit a single CPU core; sizes
    /// and N stay at the defaults.
    pub fn desk() -> Self {
        let train = TrainConfig {
            epochs: 10,
            patience: Some(3),
            ..TrainConfig::default()
        };
        ExperimentConfig {
            classifier: ClassifierConfig {
                embed_dim: 32,
                hidden: 32,
                sampling: Sampling {
                    alpha: 0.2,
                    dropout: 0.1,
                },
                ..ClassifierConfig::default()
            },
            opt: OptSettings {
                span: SpanConfig {
                    char_dim: 24,
                    hidden: 32,
                    mlp_hidden: 32,
                    proj_dim: 24,
                    negative_sampling: false,
                    train,
                },
                bitag: BiTagConfig {
                    char_dim: 24,
                    hidden: 32,
                    train,
                },
                ..OptSettings::default()
            },
            sweep: SweepSettings {
                ns: vec![1, 3, 10, 25],
                retrain: false,
            },
            ..ExperimentConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "version: found {}, expected {CONFIG_VERSION}",
                self.version
            )));
        }
        if self.dataset_dir.as_os_str().is_empty() {
            return Err(Error::Config("dataset_dir: must not be empty".into()));
        }
        if self.tokenizer.vocab_size == 0 {
            return Err(Error::Config("tokenizer.vocab_size: must be positive".into()));
        }
        self.classifier.validate()?;
        self.candidates.validate()?;
        self.opt.span.validate()?;
        self.opt.bitag.validate()?;
        if self.opt.trials == 0 {
            return Err(Error::Config("opt.trials: must be at least 1".into()));
        }
        if self.sweep.ns.contains(&0) {
            return Err(Error::Config("sweep.ns: every N must be at least 1".into()));
        }
        Ok(())
    }

    /// Parse and validate; unknown keys are rejected with the offending field named.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if cfg.dataset_dir.is_relative() {
            if let Some(parent) = path.parent() {
                cfg.dataset_dir = parent.join(&cfg.dataset_dir);
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        fsutil::to_sorted_json(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        for cfg in [ExperimentConfig::default(), ExperimentConfig::desk()] {
            cfg.validate().unwrap();
            let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = ExperimentConfig::from_json(r#"{"classifier": {"hiden": 3}}"#).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("hiden")), "{err}");
        let err = ExperimentConfig::from_json(r#"{"version": 9}"#).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("version")));
        let err = ExperimentConfig::from_json(r#"{"candidates": {"n": 0}}"#).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"seed": 5, "tokenizer": {"kind": "bpe"}}"#).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.tokenizer.kind, TokenizerKind::Bpe);
        assert_eq!(cfg.tokenizer.vocab_size, 800);
        assert_eq!(cfg.classifier.hidden, 256);
    }
}
