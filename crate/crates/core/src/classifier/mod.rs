//! The downstream text classifier: token embeddings, a one-layer BiLSTM and
//! a linear softmax head.

mod train;

pub use train::{evaluate_split, predict_split, train_classifier, EpochLog, TrainingLog};

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{self, BiLstm, Graph, Mlp, ParamId, ParamSet, Tensor, Var};
use crate::corpus::{TokenId, Vocabulary};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::lattice::Segmentation;
use crate::tokenizers::{self, Sampling};

pub const CLASSIFIER_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// concat(last forward state, first backward state)
    #[default]
    Final,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub embed_dim: usize,
    /// Per direction.
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub pooling: Pooling,
    /// Subword regularization used while training.
    pub sampling: Sampling,
    pub adam: autodiff::AdamConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            embed_dim: 64,
            hidden: 256,
            epochs: 20,
            batch_size: 16,
            pooling: Pooling::Final,
            sampling: Sampling::default(),
            adam: autodiff::AdamConfig::default(),
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden == 0 {
            return Err(Error::Config("classifier: embed_dim and hidden must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("classifier: batch_size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.sampling.dropout) || self.sampling.alpha < 0.0 {
            return Err(Error::Config(
                "classifier: sampling.dropout must be in [0, 1] and sampling.alpha non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// A classifier over a fixed downstream vocabulary. Parameters cannot be
/// changed once training has returned the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    config: ClassifierConfig,
    vocab: Vocabulary,
    num_labels: usize,
    params: ParamSet,
    embedding: ParamId,
    encoder: BiLstm,
    output: Mlp,
}

impl ClassifierModel {
    pub fn new<R: Rng + ?Sized>(
        config: ClassifierConfig,
        vocab: Vocabulary,
        num_labels: usize,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        if num_labels < 2 {
            return Err(Error::Config("classifier needs at least two labels".into()));
        }
        let mut params = ParamSet::new();
        let embedding = params.add_xavier("embedding", vocab.len(), config.embed_dim, rng)?;
        let encoder = BiLstm::new(&mut params, "encoder", config.embed_dim, config.hidden, rng)?;
        let output = Mlp::new(&mut params, "output", &[2 * config.hidden, num_labels], rng)?;
        Ok(ClassifierModel {
            config,
            vocab,
            num_labels,
            params,
            embedding,
            encoder,
            output,
        })
    }

    /// Rebuild from stored parameters, checking every shape.
    pub fn from_params(config: ClassifierConfig, vocab: Vocabulary, num_labels: usize, params: ParamSet) -> Result<Self> {
        config.validate()?;
        let embedding = params
            .id("embedding")
            .ok_or_else(|| Error::Schema("missing parameter `embedding`".into()))?;
        if params.value(embedding).shape() != (vocab.len(), config.embed_dim) {
            return Err(Error::Shape {
                op: "classifier",
                detail: format!(
                    "embedding is {:?}, vocabulary has {} entries",
                    params.value(embedding).shape(),
                    vocab.len()
                ),
            });
        }
        let encoder = BiLstm::bind(&params, "encoder", config.embed_dim, config.hidden)?;
        let output = Mlp::bind(&params, "output", &[2 * config.hidden, num_labels])?;
        Ok(ClassifierModel {
            config,
            vocab,
            num_labels,
            params,
            embedding,
            encoder,
            output,
        })
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn token_ids(&self, chars: &[char], seg: &Segmentation) -> Vec<TokenId> {
        tokenizers::token_ids(&self.vocab, chars, seg)
    }

    /// `1 × num_labels` log-probabilities. `g` may be built over any
    /// parameter set with this model's layout.
    pub fn log_probs_var(&self, g: &mut Graph, ids: &[TokenId]) -> Result<Var> {
        if ids.is_empty() {
            return Err(Error::Invalid("cannot classify an empty segmentation".into()));
        }
        let rows: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
        let table = g.param(self.embedding);
        let x = g.row_select(table, &rows)?;
        let out = self.encoder.forward(g, x)?;
        let pooled = match self.config.pooling {
            Pooling::Final => {
                let last = g.row_select(out.forward, &[ids.len() - 1])?;
                let first = g.row_select(out.backward, &[0])?;
                g.concat_cols(&[last, first])?
            }
            Pooling::Mean => {
                let w = g.input(Tensor::filled(1, ids.len(), 1.0 / ids.len() as f64));
                g.matmul(w, out.states)?
            }
        };
        let logits = self.output.forward(g, pooled)?;
        g.log_softmax(logits)
    }

    /// Cross-entropy against `label`.
    pub fn loss_var(&self, g: &mut Graph, ids: &[TokenId], label: usize) -> Result<Var> {
        if label >= self.num_labels {
            return Err(Error::Invalid(format!("label {label} out of range 0..{}", self.num_labels)));
        }
        let lp = self.log_probs_var(g, ids)?;
        let picked = g.gather(lp, &[(0, label)])?;
        let s = g.sum(picked)?;
        g.neg(s)
    }

    pub fn predict_ids(&self, ids: &[TokenId]) -> Result<Vec<f64>> {
        let mut g = Graph::new(&self.params);
        let lp = self.log_probs_var(&mut g, ids)?;
        Ok(g.value(lp).data().iter().map(|v| v.exp()).collect())
    }

    pub fn classify_loss_ids(&self, ids: &[TokenId], label: usize) -> Result<f64> {
        let mut g = Graph::new(&self.params);
        let loss = self.loss_var(&mut g, ids, label)?;
        Ok(g.value(loss).item())
    }

    /// Label distribution for one tokenized sentence.
    pub fn predict(&self, chars: &[char], seg: &Segmentation) -> Result<Vec<f64>> {
        self.predict_ids(&self.token_ids(chars, seg))
    }

    /// `−log predict(chars, seg)[label]`.
    pub fn classify_loss(&self, chars: &[char], seg: &Segmentation, label: usize) -> Result<f64> {
        self.classify_loss_ids(&self.token_ids(chars, seg), label)
    }

    pub fn predict_label(&self, chars: &[char], seg: &Segmentation) -> Result<usize> {
        Ok(argmax(&self.predict(chars, seg)?))
    }
}

/// Index of the largest value; the first one on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Sidecar stored next to the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierMeta {
    pub format_version: u32,
    pub config: ClassifierConfig,
    pub num_labels: usize,
    pub vocab_size: usize,
    pub tokenizer_sha256: String,
    pub best_epoch: Option<usize>,
    pub valid_macro_f1: Option<f64>,
    pub log: TrainingLog,
}

/// Write `<stem>.json` plus the weight files.
pub fn save_classifier(model: &ClassifierModel, meta: &ClassifierMeta, dir: &Path, stem: &str) -> Result<()> {
    autodiff::save_weights(model.params(), dir, stem)?;
    fsutil::write_atomic(&dir.join(format!("{stem}.json")), fsutil::to_sorted_json(meta)?.as_bytes())
}

pub fn load_classifier(dir: &Path, stem: &str, vocab: Vocabulary) -> Result<(ClassifierModel, ClassifierMeta)> {
    let meta_path = dir.join(format!("{stem}.json"));
    let meta: ClassifierMeta = serde_json::from_str(&fsutil::read_to_string(&meta_path, "train-downstream")?)?;
    if meta.format_version != CLASSIFIER_FORMAT_VERSION {
        return Err(Error::Version {
            found: meta.format_version,
            expected: CLASSIFIER_FORMAT_VERSION,
        });
    }
    if meta.vocab_size != vocab.len() {
        return Err(Error::Schema(format!(
            "classifier was trained over {} tokens, tokenizer has {}",
            meta.vocab_size,
            vocab.len()
        )));
    }
    let params = autodiff::load_weights(dir, stem, "train-downstream")?;
    let model = ClassifierModel::from_params(meta.config.clone(), vocab, meta.num_labels, params)?;
    Ok((model, meta))
}
