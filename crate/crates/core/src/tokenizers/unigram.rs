//! Unigram language-model tokenizer and its EM trainer.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{count_texts, is_mergeable};
use crate::corpus::{TokenId, Vocabulary, UNK_ID};
use crate::error::{Error, Result};
use crate::exec;
use crate::lattice::{build_lattice, Lattice, Segmentation};

/// Unigram model: a vocabulary with a normalized log probability per piece.
#[derive(Debug, Clone, PartialEq)]
pub struct UnigramModel {
    vocab: Vocabulary,
    /// Indexed by token id; the special ids hold 0.0 and are never scored.
    log_probs: Vec<f64>,
    unk_log_prob: f64,
}

/// Penalty of an unknown-character edge relative to the rarest piece.
const UNK_PENALTY: f64 = 10.0;

impl UnigramModel {
    /// Build from `(piece, weight)` pairs; weights are normalized to probabilities.
    pub fn from_weights(pieces: Vec<(String, f64)>, continuation_prefix: Option<String>) -> Result<Self> {
        let vocab = Vocabulary::new(pieces.iter().map(|(p, _)| p.clone()), continuation_prefix);
        if vocab.num_pieces() != pieces.len() {
            return Err(Error::Invalid("duplicate or empty unigram pieces".into()));
        }
        let total: f64 = pieces.iter().map(|(_, w)| *w).sum();
        if pieces.iter().any(|(_, w)| !(*w > 0.0)) || !total.is_finite() {
            return Err(Error::Invalid("unigram weights must be positive".into()));
        }
        let mut log_probs = vec![0.0; vocab.len()];
        for (piece, w) in &pieces {
            let id = vocab.lookup(piece).expect("inserted above");
            log_probs[id as usize] = (w / total).ln();
        }
        Self::from_log_probs(vocab, log_probs)
    }

    pub(crate) fn from_log_probs(vocab: Vocabulary, log_probs: Vec<f64>) -> Result<Self> {
        if log_probs.len() != vocab.len() || log_probs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("log probabilities must be finite, one per token".into()));
        }
        let min = vocab
            .piece_ids()
            .map(|id| log_probs[id as usize])
            .fold(0.0f64, f64::min);
        Ok(UnigramModel {
            vocab,
            log_probs,
            unk_log_prob: min - UNK_PENALTY,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn log_prob(&self, id: TokenId) -> f64 {
        if id == UNK_ID {
            self.unk_log_prob
        } else {
            self.log_probs[id as usize]
        }
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn lattice(&self, chars: &[char]) -> Lattice {
        build_lattice(chars, &self.vocab, |_, _, id| self.log_prob(id))
    }

    /// Most probable segmentation.
    pub fn encode(&self, chars: &[char]) -> Segmentation {
        self.lattice(chars).viterbi_best()
    }

    pub fn nbest(&self, chars: &[char], n: usize) -> Vec<Segmentation> {
        self.lattice(chars).nbest(n)
    }

    /// Sample with `P(seg) ∝ P_unigram(seg)^alpha`.
    pub fn sample<R: Rng + ?Sized>(&self, chars: &[char], alpha: f64, rng: &mut R) -> Segmentation {
        self.lattice(chars).sample(alpha, rng)
    }
}

/// Trainer settings. `vocab_size` counts pieces (special tokens excluded).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnigramTrainer {
    pub vocab_size: usize,
    pub max_piece_len: usize,
    pub seed_multiplier: usize,
    pub prune_fraction: f64,
    pub min_frequency: u64,
    pub em_iterations: usize,
}

impl Default for UnigramTrainer {
    fn default() -> Self {
        UnigramTrainer {
            vocab_size: 16_000,
            max_piece_len: 8,
            seed_multiplier: 20,
            prune_fraction: 0.2,
            min_frequency: 2,
            em_iterations: 2,
        }
    }
}

struct Sentence {
    chars: Vec<char>,
    weight: f64,
}

impl UnigramTrainer {
    pub fn with_vocab_size(vocab_size: usize) -> Self {
        UnigramTrainer {
            vocab_size,
            ..Default::default()
        }
    }

    pub fn train<S: AsRef<str>>(&self, corpus: &[S]) -> Result<UnigramModel> {
        let sentences: Vec<Sentence> = count_texts(corpus)
            .into_iter()
            .map(|(t, w)| Sentence {
                chars: t.chars().collect(),
                weight: w as f64,
            })
            .collect();
        if sentences.is_empty() {
            return Err(Error::Invalid("empty training corpus".into()));
        }
        let mut alphabet: HashMap<char, f64> = HashMap::new();
        for s in &sentences {
            for c in &s.chars {
                *alphabet.entry(*c).or_default() += s.weight;
            }
        }
        if self.vocab_size < alphabet.len() + 1 {
            return Err(Error::Invalid(format!(
                "vocabulary size {} below alphabet size {} + 1",
                self.vocab_size,
                alphabet.len()
            )));
        }

        // seed: frequent substrings
        let mut substrings: HashMap<String, f64> = HashMap::new();
        for s in &sentences {
            let n = s.chars.len();
            for i in 0..n {
                let mut piece = String::new();
                piece.push(s.chars[i]);
                for j in i + 1..n.min(i + self.max_piece_len) {
                    piece.push(s.chars[j]);
                    if !is_mergeable(s.chars[j]) || !is_mergeable(s.chars[i]) {
                        break;
                    }
                    *substrings.entry(piece.clone()).or_default() += s.weight;
                }
            }
        }
        let mut seeds: Vec<(String, f64)> = substrings
            .into_iter()
            .filter(|(_, f)| *f >= self.min_frequency as f64)
            .collect();
        seeds.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        seeds.truncate(self.seed_multiplier * self.vocab_size);
        let mut chars: Vec<(char, f64)> = alphabet.into_iter().collect();
        chars.sort_by(|a, b| a.0.cmp(&b.0));
        let mut pieces: Vec<(String, f64)> = chars.iter().map(|(c, f)| (c.to_string(), *f)).collect();
        // frequency x length favours longer seeds, as in SentencePiece
        pieces.extend(seeds.into_iter().map(|(p, f)| {
            let l = p.chars().count() as f64;
            (p, f * l)
        }));
        let mut model = UnigramModel::from_weights(pieces, None)?;

        loop {
            for _ in 0..self.em_iterations.max(1) {
                model = self.em_step(&model, &sentences)?;
            }
            if model.vocab.num_pieces() <= self.vocab_size {
                break;
            }
            model = self.prune(&model, &sentences)?;
        }
        Ok(model)
    }

    /// One expectation-maximization round; drops multi-character pieces whose
    /// expected count falls below one half while the vocabulary is above target.
    fn em_step(&self, model: &UnigramModel, sentences: &[Sentence]) -> Result<UnigramModel> {
        let partial: Vec<Vec<(TokenId, f64)>> = exec::map(sentences, |s| {
            let lattice = model.lattice(&s.chars);
            let (_, marginals) = lattice.edge_marginals();
            marginals
                .into_iter()
                .map(|(start, k, p)| (lattice.edges_from(start)[k].token, p * s.weight))
                .collect()
        });
        let mut counts = vec![0.0; model.vocab.len()];
        for part in partial {
            for (id, c) in part {
                counts[id as usize] += c;
            }
        }
        let mut excess = model.vocab.num_pieces().saturating_sub(self.vocab_size);
        let mut kept = Vec::new();
        for id in model.vocab.piece_ids() {
            let piece = model.vocab.token(id);
            let single = piece.chars().count() == 1;
            let c = counts[id as usize];
            if !single && c < 0.5 && excess > 0 {
                excess -= 1;
                continue;
            }
            kept.push((piece.to_string(), c.max(0.5)));
        }
        UnigramModel::from_weights(kept, None)
    }

    /// Remove the prunable pieces whose removal costs the least likelihood.
    fn prune(&self, model: &UnigramModel, sentences: &[Sentence]) -> Result<UnigramModel> {
        let vocab = &model.vocab;
        let segs: Vec<Vec<TokenId>> = exec::map(sentences, |s| {
            let l = model.lattice(&s.chars);
            l.path_tokens(&l.viterbi_best())
        });
        let mut freq = vec![0.0; vocab.len()];
        for (s, ids) in sentences.iter().zip(&segs) {
            for id in ids {
                freq[*id as usize] += s.weight;
            }
        }
        let total: f64 = freq.iter().sum();
        let log_total = total.ln();
        let candidates: Vec<TokenId> = vocab
            .piece_ids()
            .filter(|id| vocab.token(*id).chars().count() > 1)
            .collect();
        let losses: Vec<f64> = exec::map(&candidates, |&id| {
            let f = freq[id as usize];
            if f == 0.0 {
                return 0.0;
            }
            let chars: Vec<char> = vocab.token(id).chars().collect();
            let alternative = model
                .lattice(&chars)
                .nbest(2)
                .into_iter()
                .find(|seg| seg.len() > 1);
            let Some(alt) = alternative else {
                return f64::INFINITY;
            };
            let l = model.lattice(&chars);
            let alt_ids = l.path_tokens(&alt);
            let log_prob_piece = f.ln() - log_total;
            let log_total_alt = (total + f * (alt_ids.len() as f64 - 1.0)).ln();
            let log_prob_alt: f64 = alt_ids
                .iter()
                .map(|a| (freq[*a as usize] + f).ln() - log_total_alt)
                .sum();
            (f / total) * (log_prob_piece - log_prob_alt)
        });
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&a, &b| {
            losses[a]
                .partial_cmp(&losses[b])
                .unwrap()
                .then_with(|| vocab.token(candidates[a]).cmp(vocab.token(candidates[b])))
        });
        let excess = vocab.num_pieces() - self.vocab_size;
        let quota = ((candidates.len() as f64 * self.prune_fraction).ceil() as usize).clamp(1, excess.max(1));
        let removed: std::collections::HashSet<TokenId> =
            order.iter().take(quota).map(|&k| candidates[k]).collect();
        let kept: Vec<(String, f64)> = vocab
            .piece_ids()
            .filter(|id| !removed.contains(id))
            .map(|id| (vocab.token(id).to_string(), model.log_probs[id as usize].exp()))
            .collect();
        UnigramModel::from_weights(kept, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    fn toy() -> UnigramModel {
        UnigramModel::from_weights(
            vec![("a".into(), 0.5), ("b".into(), 0.25), ("ab".into(), 0.25)],
            None,
        )
        .unwrap()
    }

    #[test]
    fn encode_prefers_higher_probability_path() {
        let m = toy();
        // log 0.25 > log 0.5 + log 0.25
        assert_eq!(m.encode(&chars("ab")).spans(), &[(0, 2)]);
        let two = m.nbest(&chars("ab"), 2);
        assert_eq!(two[1].spans(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn alpha_zero_sampling_is_uniform() {
        let m = toy();
        let mut r = rng::stream(5, "t", 0);
        let whole = (0..10_000)
            .filter(|_| m.sample(&chars("ab"), 0.0, &mut r).len() == 1)
            .count();
        assert!((whole as f64 / 10_000.0 - 0.5).abs() < 0.03);
    }

    #[test]
    fn repeated_corpus_learns_long_piece() {
        let corpus = vec!["aaaa"; 100];
        let m = UnigramTrainer::with_vocab_size(3).train(&corpus).unwrap();
        assert_eq!(m.vocab().num_pieces(), 3);
        assert!(m.vocab().contains("aa") || m.vocab().contains("aaaa"));
        assert!(m.vocab().contains("a"));
    }

    #[test]
    fn target_below_alphabet_is_error() {
        assert!(UnigramTrainer::with_vocab_size(2).train(&["abc"]).is_err());
        assert!(UnigramTrainer::with_vocab_size(10).train(&Vec::<String>::new()).is_err());
    }

    #[test]
    fn trained_model_is_normalized_and_covers_chars() {
        let corpus = ["the cat sat", "a cat ran", "the rat sat on the mat", "cats and rats"];
        let m = UnigramTrainer::with_vocab_size(30).train(&corpus).unwrap();
        let total: f64 = m.vocab().piece_ids().map(|id| m.log_prob(id).exp()).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(m.vocab().num_pieces() <= 30);
        for t in corpus {
            let c = chars(t);
            let l = m.lattice(&c);
            assert!(!l.has_fallback());
            let seg = m.encode(&c);
            assert_eq!(seg.tokens(&c).concat(), t);
        }
        // no piece spans whitespace
        assert!(m
            .vocab()
            .piece_ids()
            .all(|id| { let t = m.vocab().token(id); t.chars().count() == 1 || !t.contains(' ') }));
    }
}
