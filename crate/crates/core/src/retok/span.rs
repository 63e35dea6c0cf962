//! The vocabulary-restricted span tokenizer.
//!
//! A character BiLSTM feeds two MLPs; the dot product of the begin vector at
//! `i` and the end vector at `j` scores the span `i..=j`. Only spans in the
//! downstream vocabulary ever receive a probability, so decoding cannot emit
//! an unknown multi-character token.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::seqtrain::{self, EpochRecord, Example, SeqModel, TrainConfig};
use super::RetokDataset;
use crate::autodiff::{self, log_sigmoid, sigmoid, BiLstm, Graph, Mlp, ParamId, ParamSet, Tensor, Var};
use crate::corpus::{CharTable, Vocabulary, UNK_ID};
use crate::error::{Error, Result};
use crate::lattice::{build_lattice, Segmentation};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpanConfig {
    pub char_dim: usize,
    /// Per direction.
    pub hidden: usize,
    pub mlp_hidden: usize,
    pub proj_dim: usize,
    /// Also push down the scores of in-vocabulary spans that are not gold.
    pub negative_sampling: bool,
    pub train: TrainConfig,
}

impl Default for SpanConfig {
    fn default() -> Self {
        SpanConfig {
            char_dim: 128,
            hidden: 256,
            mlp_hidden: 256,
            proj_dim: 128,
            negative_sampling: false,
            train: TrainConfig::default(),
        }
    }
}

impl SpanConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.char_dim, self.hidden, self.mlp_hidden, self.proj_dim].contains(&0) {
            return Err(Error::Config("span tokenizer dimensions must be positive".into()));
        }
        self.train.validate()
    }

    fn mlp_sizes(&self) -> [usize; 3] {
        [2 * self.hidden, self.mlp_hidden, self.proj_dim]
    }
}

/// Span probabilities of one sentence; only in-vocabulary spans are present.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanScores {
    len: usize,
    cells: Vec<Vec<Option<f64>>>,
}

impl SpanScores {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Probability of the span `[start, end)`, `None` if the span is masked.
    pub fn get(&self, start: usize, end: usize) -> Option<f64> {
        if end <= start || end > self.len {
            return None;
        }
        self.cells[start].get(end - start - 1).copied().flatten()
    }

    /// Every present cell as `(start, end, probability)`.
    pub fn present(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.cells.iter().enumerate().flat_map(|(s, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(k, p)| p.map(|p| (s, s + k + 1, p)))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanTokenizer {
    config: SpanConfig,
    vocab: Vocabulary,
    chars: CharTable,
    params: ParamSet,
    embedding: ParamId,
    encoder: BiLstm,
    begin: Mlp,
    end: Mlp,
    log: Vec<EpochRecord>,
}

impl SpanTokenizer {
    pub fn new<R: Rng + ?Sized>(config: SpanConfig, vocab: Vocabulary, chars: CharTable, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut params = ParamSet::new();
        let embedding = params.add_xavier("embedding", chars.len(), config.char_dim, rng)?;
        let encoder = BiLstm::new(&mut params, "encoder", config.char_dim, config.hidden, rng)?;
        let begin = Mlp::new(&mut params, "begin", &config.mlp_sizes(), rng)?;
        let end = Mlp::new(&mut params, "end", &config.mlp_sizes(), rng)?;
        Ok(SpanTokenizer {
            config,
            vocab,
            chars,
            params,
            embedding,
            encoder,
            begin,
            end,
            log: Vec::new(),
        })
    }

    pub fn from_params(config: SpanConfig, vocab: Vocabulary, chars: CharTable, params: ParamSet) -> Result<Self> {
        config.validate()?;
        let embedding = params
            .id("embedding")
            .ok_or_else(|| Error::Schema("missing parameter `embedding`".into()))?;
        if params.value(embedding).shape() != (chars.len(), config.char_dim) {
            return Err(Error::Shape {
                op: "span tokenizer",
                detail: format!("embedding is {:?}", params.value(embedding).shape()),
            });
        }
        let encoder = BiLstm::bind(&params, "encoder", config.char_dim, config.hidden)?;
        let begin = Mlp::bind(&params, "begin", &config.mlp_sizes())?;
        let end = Mlp::bind(&params, "end", &config.mlp_sizes())?;
        Ok(SpanTokenizer {
            config,
            vocab,
            chars,
            params,
            embedding,
            encoder,
            begin,
            end,
            log: Vec::new(),
        })
    }

    pub fn config(&self) -> &SpanConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn char_table(&self) -> &CharTable {
        &self.chars
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    #[cfg(test)]
    pub(crate) fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Per-epoch training record.
    pub fn log(&self) -> &[EpochRecord] {
        &self.log
    }

    /// `T × T` matrix of begin·end dot products for a non-empty sentence.
    pub fn score_matrix_var(&self, g: &mut Graph, chars: &[char]) -> Result<Var> {
        if chars.is_empty() {
            return Err(Error::Invalid("span scores of an empty sentence".into()));
        }
        let table = g.param(self.embedding);
        let x = g.row_select(table, &self.chars.encode(chars))?;
        let h = self.encoder.forward(g, x)?.states;
        let hb = self.begin.forward(g, h)?;
        let he = self.end.forward(g, h)?;
        let het = g.transpose(he)?;
        g.matmul(hb, het)
    }

    fn score_matrix(&self, chars: &[char]) -> Result<Tensor> {
        let mut g = Graph::new(&self.params);
        let s = self.score_matrix_var(&mut g, chars)?;
        Ok(g.value(s).clone())
    }

    /// σ(begin_i · end_j) for every in-vocabulary span.
    pub fn span_scores(&self, chars: &[char]) -> Result<SpanScores> {
        let s = self.score_matrix(chars)?;
        let max = self.vocab.max_token_chars();
        let cells = (0..chars.len())
            .map(|i| {
                (i + 1..=(i + max).min(chars.len()))
                    .map(|e| {
                        self.vocab
                            .lookup_span(chars, i, e)
                            .map(|_| sigmoid(s.get(i, e - 1)))
                    })
                    .collect()
            })
            .collect();
        Ok(SpanScores {
            len: chars.len(),
            cells,
        })
    }

    /// −Σ log p over the gold spans. Single unknown characters contribute
    /// nothing; `None` if no span contributes.
    pub fn loss_var(&self, g: &mut Graph, chars: &[char], gold: &Segmentation) -> Result<Option<Var>> {
        if gold.char_len() != chars.len() {
            return Err(Error::Invalid("gold segmentation does not cover the sentence".into()));
        }
        let mut cells = Vec::new();
        for &(s, e) in gold.spans() {
            if self.vocab.lookup_span(chars, s, e).is_some() {
                cells.push((s, e - 1));
            } else if e - s > 1 {
                return Err(Error::Invalid(format!(
                    "gold token `{}` is outside the vocabulary",
                    self.vocab.span_string(chars, s, e)
                )));
            }
        }
        let mut negatives = Vec::new();
        if self.config.negative_sampling {
            let gold_cells: std::collections::HashSet<(usize, usize)> = cells.iter().copied().collect();
            let max = self.vocab.max_token_chars();
            for s in 0..chars.len() {
                for e in s + 1..=(s + max).min(chars.len()) {
                    if !gold_cells.contains(&(s, e - 1)) && self.vocab.lookup_span(chars, s, e).is_some() {
                        negatives.push((s, e - 1));
                    }
                }
            }
        }
        if cells.is_empty() && negatives.is_empty() {
            return Ok(None);
        }
        let scores = self.score_matrix_var(g, chars)?;
        let mut terms = Vec::new();
        if !cells.is_empty() {
            let picked = g.gather(scores, &cells)?;
            let logp = g.log_sigmoid(picked)?;
            terms.push(g.sum(logp)?);
        }
        if !negatives.is_empty() {
            let picked = g.gather(scores, &negatives)?;
            let flipped = g.neg(picked)?;
            let logq = g.log_sigmoid(flipped)?;
            terms.push(g.sum(logq)?);
        }
        let mut total = terms[0];
        for t in &terms[1..] {
            total = g.add(total, *t)?;
        }
        Ok(Some(g.neg(total)?))
    }

    pub fn loss(&self, chars: &[char], gold: &Segmentation) -> Result<f64> {
        let mut g = Graph::new(&self.params);
        Ok(match self.loss_var(&mut g, chars, gold)? {
            Some(v) => g.value(v).item(),
            None => 0.0,
        })
    }

    /// Viterbi over log span probabilities; unknown-character edges get log 0.5.
    pub fn tokenize(&self, chars: &[char]) -> Segmentation {
        if chars.is_empty() {
            return Segmentation::default();
        }
        let s = self.score_matrix(chars).expect("non-empty sentence with a bound model");
        let lattice = build_lattice(chars, &self.vocab, |start, end, token| {
            if token == UNK_ID {
                0.5f64.ln()
            } else {
                log_sigmoid(s.get(start, end - 1))
            }
        });
        lattice.viterbi_best()
    }

    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let meta = NeuralMeta {
            format_version: NEURAL_FORMAT_VERSION,
            kind: "span".into(),
            config: self.config,
            vocab: Some(self.vocab.clone()),
            char_table: self.chars.clone(),
            log: self.log.clone(),
        };
        meta.save(&self.params, dir, stem)
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let (meta, params) = NeuralMeta::<SpanConfig>::load(dir, stem, "span")?;
        let vocab = meta
            .vocab
            .ok_or_else(|| Error::Schema("span tokenizer sidecar lacks a vocabulary".into()))?;
        let mut tok = Self::from_params(meta.config, vocab, meta.char_table, params)?;
        tok.log = meta.log;
        Ok(tok)
    }
}

impl SeqModel for SpanTokenizer {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn example_loss(&self, g: &mut Graph, ex: &Example) -> Result<Option<Var>> {
        self.loss_var(g, &ex.chars, &ex.gold)
    }

    fn tokenize(&self, chars: &[char]) -> Segmentation {
        SpanTokenizer::tokenize(self, chars)
    }
}

pub fn span_tokenize(tok: &SpanTokenizer, chars: &[char]) -> Segmentation {
    tok.tokenize(chars)
}

pub(crate) fn examples(data: &RetokDataset) -> Result<Vec<Example>> {
    if data.is_empty() {
        return Err(Error::Invalid("cannot train a tokenizer on an empty dataset".into()));
    }
    data.records
        .iter()
        .map(|r| {
            Ok(Example {
                chars: r.chars(),
                gold: r.segmentation()?,
            })
        })
        .collect()
}

/// Fit on D̂′ with Adam; returns the final-epoch model with its log.
pub fn train_span_tokenizer(
    data: &RetokDataset,
    vocab: &Vocabulary,
    chars: &CharTable,
    config: &SpanConfig,
    seed: u64,
) -> Result<SpanTokenizer> {
    let examples = examples(data)?;
    let mut tok = SpanTokenizer::new(
        *config,
        vocab.clone(),
        chars.clone(),
        &mut rng::stream(seed, "span.init", 0),
    )?;
    tok.log = seqtrain::train(&mut tok, &examples, &config.train, seed, "span.shuffle")?;
    Ok(tok)
}

pub(crate) const NEURAL_FORMAT_VERSION: u32 = 1;

/// Sidecar of a neural tokenizer checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct NeuralMeta<C> {
    pub format_version: u32,
    pub kind: String,
    pub config: C,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<Vocabulary>,
    pub char_table: CharTable,
    pub log: Vec<EpochRecord>,
}

impl<C: Serialize + serde::de::DeserializeOwned> NeuralMeta<C> {
    pub fn save(&self, params: &ParamSet, dir: &Path, stem: &str) -> Result<()> {
        autodiff::save_weights(params, dir, stem)?;
        crate::fsutil::write_atomic(
            &dir.join(format!("{stem}.json")),
            crate::fsutil::to_sorted_json(self)?.as_bytes(),
        )
    }

    pub fn load(dir: &Path, stem: &str, kind: &str) -> Result<(Self, ParamSet)> {
        let path = dir.join(format!("{stem}.json"));
        let meta: Self = serde_json::from_str(&crate::fsutil::read_to_string(&path, "train-opt")?)?;
        if meta.format_version != NEURAL_FORMAT_VERSION {
            return Err(Error::Version {
                found: meta.format_version,
                expected: NEURAL_FORMAT_VERSION,
            });
        }
        if meta.kind != kind {
            return Err(Error::Schema(format!("{} holds a {} tokenizer, not {kind}", path.display(), meta.kind)));
        }
        let params = autodiff::load_weights(dir, stem, "train-opt")?;
        Ok((meta, params))
    }
}
