//! Greedy longest-match (WordPiece-style) tokenizer with MaxMatch-dropout.

use rand::Rng;

use super::bpe::train_with_words;
use super::{is_mergeable, word_spans};
use crate::corpus::Vocabulary;
use crate::error::Result;
use crate::lattice::Segmentation;

pub const DEFAULT_CONTINUATION_PREFIX: &str = "##";

#[derive(Debug, Clone, PartialEq)]
pub struct MaxMatchModel {
    vocab: Vocabulary,
}

impl MaxMatchModel {
    pub fn from_vocab(vocab: Vocabulary) -> Self {
        MaxMatchModel { vocab }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Longest match from the left inside every word. A found multi-character
    /// match is rejected with probability `dropout` and the next shorter one
    /// is tried; single characters are never rejected. Characters with no
    /// match at all become single unknown tokens.
    pub fn encode<R: Rng + ?Sized>(&self, chars: &[char], dropout: f64, rng: &mut R) -> Segmentation {
        let max_len = self.vocab.max_token_chars().max(1);
        let mut spans = Vec::with_capacity(chars.len());
        for (ws, we) in word_spans(chars) {
            let mut i = ws;
            while i < we {
                let mut end = i + 1;
                for len in (1..=max_len.min(we - i)).rev() {
                    if self.vocab.lookup_span(chars, i, i + len).is_none() {
                        continue;
                    }
                    if len > 1 && dropout > 0.0 && rng.gen::<f64>() < dropout {
                        continue;
                    }
                    end = i + len;
                    break;
                }
                spans.push((i, end));
                i = end;
            }
        }
        Segmentation::from_spans(spans, chars.len()).expect("contiguous by construction")
    }

    pub fn encode_deterministic(&self, chars: &[char]) -> Segmentation {
        let mut unused = rand::rngs::mock::StepRng::new(0, 0);
        self.encode(chars, 0.0, &mut unused)
    }
}

/// Vocabulary from BPE training at the same target: tokens seen word-initially
/// keep their surface form, tokens seen word-internally get the continuation
/// prefix. Every character is present in both forms.
pub fn maxmatch_build<S: AsRef<str>>(corpus: &[S], vocab_size: usize, prefix: &str) -> Result<MaxMatchModel> {
    let (bpe, words) = train_with_words(corpus, vocab_size)?;
    let mut pieces: Vec<String> = Vec::new();
    for c in bpe.alphabet() {
        pieces.push(c.to_string());
        if is_mergeable(*c) {
            pieces.push(format!("{prefix}{c}"));
        }
    }
    for (tokens, _) in &words {
        for (k, t) in tokens.iter().enumerate() {
            if t.chars().count() == 1 {
                continue;
            }
            pieces.push(if k == 0 { t.clone() } else { format!("{prefix}{t}") });
        }
    }
    // order by BPE rank so the vocabulary does not depend on word order
    let rank = |p: &String| {
        let body = p.strip_prefix(prefix).filter(|b| !b.is_empty()).unwrap_or(p);
        bpe.vocab().lookup(body).unwrap_or(u32::MAX)
    };
    pieces.sort_by(|a, b| rank(a).cmp(&rank(b)).then_with(|| a.cmp(b)));
    pieces.dedup();
    Ok(MaxMatchModel {
        vocab: Vocabulary::new(pieces, Some(prefix.to_string())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn longest_match_and_full_dropout() {
        let m = MaxMatchModel::from_vocab(Vocabulary::new(["a", "b", "ab", "##a", "##b", "##ab"], Some("##".into())));
        let c = chars("ab");
        assert_eq!(m.encode_deterministic(&c).spans(), &[(0, 2)]);
        let mut r = rng::stream(0, "t", 0);
        assert_eq!(m.encode(&c, 1.0, &mut r).spans(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn unknown_character_is_single_token() {
        let m = MaxMatchModel::from_vocab(Vocabulary::new(["a"], Some("##".into())));
        let c = chars("z");
        let seg = m.encode_deterministic(&c);
        assert_eq!(seg.spans(), &[(0, 1)]);
        assert_eq!(m.vocab().lookup_span(&c, 0, 1), None);
    }

    #[test]
    fn build_adds_continuation_forms() {
        let m = maxmatch_build(&["abab"], 3, "##").unwrap();
        assert!(m.vocab().contains("ab"));
        assert!(m.vocab().contains("##ab"));
        let c = chars("abab");
        assert_eq!(m.encode_deterministic(&c).tokens(&c), vec!["ab", "ab"]);
    }

    #[test]
    fn characters_only_at_alphabet_target() {
        let m = maxmatch_build(&["abab", "ba"], 2, "##").unwrap();
        assert!(m.vocab().piece_ids().all(|id| m.vocab().token(id).trim_start_matches("##").chars().count() == 1));
    }

    #[test]
    fn every_entry_comes_from_training_words() {
        let corpus = ["the cat sat", "cats sat on mats", "the mat"];
        let m = maxmatch_build(&corpus, 20, "##").unwrap();
        let bpe = crate::tokenizers::bpe_train(&corpus, 20).unwrap();
        let mut seen = std::collections::HashSet::new();
        for t in corpus {
            let c = chars(t);
            let seg = bpe.encode_deterministic(&c);
            for &(s, e) in seg.spans() {
                seen.insert(m.vocab().span_string(&c, s, e));
            }
        }
        for id in m.vocab().piece_ids() {
            let tok = m.vocab().token(id);
            if tok.trim_start_matches("##").chars().count() > 1 {
                assert!(seen.contains(tok), "{tok}");
            }
        }
    }
}
