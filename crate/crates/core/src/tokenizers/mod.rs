//! Downstream tokenizers: unigram LM, BPE and maximum matching, with their
//! stochastic variants and a JSON file format.

mod bpe;
mod maxmatch;
mod unigram;

pub use bpe::{bpe_train, BpeModel};
pub use maxmatch::{maxmatch_build, MaxMatchModel, DEFAULT_CONTINUATION_PREFIX};
pub use unigram::{UnigramModel, UnigramTrainer};

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus::{TokenId, Vocabulary};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::lattice::Segmentation;

pub const TOKENIZER_FORMAT_VERSION: u32 = 1;

pub fn is_mergeable(c: char) -> bool {
    !c.is_whitespace()
}

/// Maximal non-whitespace runs and single whitespace characters, in order.
pub(crate) fn word_spans(chars: &[char]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !is_mergeable(chars[i]) {
            out.push((i, i + 1));
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && is_mergeable(chars[i]) {
            i += 1;
        }
        out.push((start, i));
    }
    out
}

/// Distinct non-empty texts with multiplicities, sorted by text.
pub(crate) fn count_texts<S: AsRef<str>>(corpus: &[S]) -> Vec<(String, u64)> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for t in corpus {
        let t = t.as_ref();
        if !t.is_empty() {
            *counts.entry(t).or_default() += 1;
        }
    }
    counts.into_iter().map(|(t, c)| (t.to_string(), c)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerKind {
    Unigram,
    Bpe,
    Maxmatch,
}

impl TokenizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenizerKind::Unigram => "unigram",
            TokenizerKind::Bpe => "bpe",
            TokenizerKind::Maxmatch => "maxmatch",
        }
    }
}

/// Stochastic tokenization settings: `alpha` for unigram sampling, `dropout`
/// for BPE- and MaxMatch-dropout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sampling {
    pub alpha: f64,
    pub dropout: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            alpha: 0.2,
            dropout: 0.1,
        }
    }
}

/// How candidate tokenizations are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateMode {
    /// Exact N-best where available, sampling otherwise.
    Nbest,
    Sample,
}

/// A trained downstream tokenizer.
#[derive(Debug, Clone, PartialEq)]
pub enum Tokenizer {
    Unigram(UnigramModel),
    Bpe(BpeModel),
    MaxMatch(MaxMatchModel),
}

impl Tokenizer {
    pub fn train<S: AsRef<str>>(kind: TokenizerKind, corpus: &[S], vocab_size: usize) -> Result<Self> {
        Ok(match kind {
            TokenizerKind::Unigram => Tokenizer::Unigram(UnigramTrainer::with_vocab_size(vocab_size).train(corpus)?),
            TokenizerKind::Bpe => Tokenizer::Bpe(bpe_train(corpus, vocab_size)?),
            TokenizerKind::Maxmatch => {
                Tokenizer::MaxMatch(maxmatch_build(corpus, vocab_size, DEFAULT_CONTINUATION_PREFIX)?)
            }
        })
    }

    pub fn kind(&self) -> TokenizerKind {
        match self {
            Tokenizer::Unigram(_) => TokenizerKind::Unigram,
            Tokenizer::Bpe(_) => TokenizerKind::Bpe,
            Tokenizer::MaxMatch(_) => TokenizerKind::Maxmatch,
        }
    }

    /// The downstream vocabulary.
    pub fn vocab(&self) -> &Vocabulary {
        match self {
            Tokenizer::Unigram(m) => m.vocab(),
            Tokenizer::Bpe(m) => m.vocab(),
            Tokenizer::MaxMatch(m) => m.vocab(),
        }
    }

    /// Deterministic tokenization.
    pub fn encode(&self, chars: &[char]) -> Segmentation {
        match self {
            Tokenizer::Unigram(m) => m.encode(chars),
            Tokenizer::Bpe(m) => m.encode_deterministic(chars),
            Tokenizer::MaxMatch(m) => m.encode_deterministic(chars),
        }
    }

    /// One stochastic tokenization (subword regularization).
    pub fn sample<R: Rng + ?Sized>(&self, chars: &[char], sampling: Sampling, rng: &mut R) -> Segmentation {
        match self {
            Tokenizer::Unigram(m) => m.sample(chars, sampling.alpha, rng),
            Tokenizer::Bpe(m) => m.encode(chars, sampling.dropout, rng),
            Tokenizer::MaxMatch(m) => m.encode(chars, sampling.dropout, rng),
        }
    }

    /// Up to `n` candidates; candidate 0 is always the deterministic tokenization.
    ///
    /// Unigram with [`CandidateMode::Nbest`] returns the exact N-best list.
    /// Otherwise the deterministic tokenization is followed by samples drawn
    /// until `n` distinct ones are found or `5n` draws were made; with
    /// `dedup` off, the first `n − 1` draws are kept as they are.
    pub fn candidates<R: Rng + ?Sized>(
        &self,
        chars: &[char],
        n: usize,
        mode: CandidateMode,
        sampling: Sampling,
        dedup: bool,
        rng: &mut R,
    ) -> Vec<Segmentation> {
        if n == 0 {
            return Vec::new();
        }
        if let (Tokenizer::Unigram(m), CandidateMode::Nbest) = (self, mode) {
            return m.nbest(chars, n);
        }
        let first = self.encode(chars);
        let mut out = vec![first.clone()];
        if !dedup {
            out.extend((1..n).map(|_| self.sample(chars, sampling, rng)));
            return out;
        }
        let mut seen: HashSet<Segmentation> = HashSet::from([first]);
        let mut attempts = 0;
        while out.len() < n && attempts < 5 * n {
            attempts += 1;
            let s = self.sample(chars, sampling, rng);
            if seen.insert(s.clone()) {
                out.push(s);
            }
        }
        out
    }

    /// Downstream ids of a segmentation; out-of-vocabulary spans map to UNK.
    pub fn token_ids(&self, chars: &[char], seg: &Segmentation) -> Vec<TokenId> {
        token_ids(self.vocab(), chars, seg)
    }

    pub fn to_json(&self) -> Result<String> {
        let vocab = self.vocab().tokens();
        let value = match self {
            Tokenizer::Unigram(m) => json!({
                "kind": "unigram",
                "version": TOKENIZER_FORMAT_VERSION,
                "vocab": vocab,
                "log_probs": m.log_probs(),
                "continuation_prefix": m.vocab().continuation_prefix(),
            }),
            Tokenizer::Bpe(m) => json!({
                "kind": "bpe",
                "version": TOKENIZER_FORMAT_VERSION,
                "vocab": vocab,
                "alphabet": m.alphabet().iter().map(|c| c.to_string()).collect::<Vec<_>>(),
                "merges": m.merges().iter().map(|(l, r)| [l, r]).collect::<Vec<_>>(),
            }),
            Tokenizer::MaxMatch(m) => json!({
                "kind": "maxmatch",
                "version": TOKENIZER_FORMAT_VERSION,
                "vocab": vocab,
                "continuation_prefix": m.vocab().continuation_prefix(),
            }),
        };
        fsutil::to_sorted_json(&value)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Schema("tokenizer file must be a json object".into()))?;
        let version = obj
            .get("version")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Schema("tokenizer file lacks a version".into()))? as u32;
        if version != TOKENIZER_FORMAT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: TOKENIZER_FORMAT_VERSION,
            });
        }
        let field = |name: &str| {
            obj.get(name)
                .cloned()
                .ok_or_else(|| Error::Schema(format!("tokenizer file lacks `{name}`")))
        };
        let kind: TokenizerKind = serde_json::from_value(field("kind")?)?;
        let tokens: Vec<String> = serde_json::from_value(field("vocab")?)?;
        let prefix: Option<String> = match obj.get("continuation_prefix") {
            Some(v) => serde_json::from_value(v.clone())?,
            None => None,
        };
        let vocab: Vocabulary = serde_json::from_value(json!({
            "tokens": tokens,
            "continuation_prefix": prefix,
        }))
        .map_err(|e| Error::Schema(e.to_string()))?;
        Ok(match kind {
            TokenizerKind::Unigram => {
                let log_probs: Vec<f64> = serde_json::from_value(field("log_probs")?)?;
                Tokenizer::Unigram(UnigramModel::from_log_probs(vocab, log_probs)?)
            }
            TokenizerKind::Bpe => {
                let alphabet: Vec<String> = serde_json::from_value(field("alphabet")?)?;
                let alphabet = alphabet
                    .iter()
                    .map(|s| {
                        let mut it = s.chars();
                        match (it.next(), it.next()) {
                            (Some(c), None) => Ok(c),
                            _ => Err(Error::Schema(format!("alphabet entry `{s}` is not one character"))),
                        }
                    })
                    .collect::<Result<Vec<char>>>()?;
                let merges: Vec<(String, String)> = serde_json::from_value(field("merges")?)?;
                let model = BpeModel::from_merges(alphabet, merges)?;
                if model.vocab() != &vocab {
                    return Err(Error::Schema("bpe vocabulary does not match its merges".into()));
                }
                Tokenizer::Bpe(model)
            }
            TokenizerKind::Maxmatch => Tokenizer::MaxMatch(MaxMatchModel::from_vocab(vocab)),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fsutil::read_to_string(path, "train-tokenizer")?)
    }
}

pub fn token_ids(vocab: &Vocabulary, chars: &[char], seg: &Segmentation) -> Vec<TokenId> {
    seg.spans().iter().map(|&(s, e)| vocab.span_id(chars, s, e)).collect()
}
