use std::collections::BTreeMap;

use super::RetokDataset;
use crate::corpus::{CharTable, Vocabulary};
use crate::error::{Error, Result};
use crate::tokenizers::{is_mergeable, UnigramModel};

/// Pseudo-count given to every known character so that any sentence over
/// the training alphabet stays segmentable.
pub const BACKOFF_COUNT: f64 = 0.5;

/// Relative-frequency unigram model over the tokens of D̂′, plus
/// [`BACKOFF_COUNT`] for every character of `chars` (in both surface and
/// continuation form when `vocab` uses a continuation prefix).
pub fn build_unigram_opt(data: &RetokDataset, vocab: &Vocabulary, chars: &CharTable) -> Result<UnigramModel> {
    if data.is_empty() {
        return Err(Error::Invalid("cannot build a unigram model from an empty dataset".into()));
    }
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    for r in &data.records {
        let text = r.chars();
        for &(s, e) in &r.spans {
            *counts.entry(vocab.span_string(&text, s, e)).or_default() += 1.0;
        }
    }
    let prefix = vocab.continuation_prefix();
    for &c in chars.chars() {
        *counts.entry(c.to_string()).or_default() += BACKOFF_COUNT;
        if let Some(p) = prefix {
            if is_mergeable(c) {
                *counts.entry(format!("{p}{c}")).or_default() += BACKOFF_COUNT;
            }
        }
    }
    UnigramModel::from_weights(counts.into_iter().collect(), prefix.map(str::to_string))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::UNK_ID;
    use crate::retok::RetokRecord;

    fn record(id: u64, tokens: &[&str]) -> RetokRecord {
        let text: String = tokens.concat();
        let mut spans = Vec::new();
        let mut pos = 0;
        for t in tokens {
            let l = t.chars().count();
            spans.push((pos, pos + l));
            pos += l;
        }
        RetokRecord {
            id,
            text,
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            spans,
            loss: 0.0,
            label: 0,
            n_candidates: 1,
        }
    }

    #[test]
    fn hand_counts_with_backoff() {
        let data = RetokDataset {
            records: vec![record(0, &["ab", "ab", "a"]), record(1, &["ab", "b"])],
        };
        let vocab = Vocabulary::new(["a", "b", "ab", "ba"], None);
        let chars = CharTable::from_texts(["ab"]);
        let m = build_unigram_opt(&data, &vocab, &chars).unwrap();
        // ab: 3, a: 1 + 0.5, b: 1 + 0.5 → total 6
        let p = |t: &str| m.log_prob(m.vocab().lookup(t).unwrap()).exp();
        assert!((p("ab") - 3.0 / 6.0).abs() < 1e-12);
        assert!((p("a") - 1.5 / 6.0).abs() < 1e-12);
        assert!(m.vocab().lookup("ba").is_none());
        let c: Vec<char> = "ba".chars().collect();
        assert_eq!(m.encode(&c).len(), 2);
        let again = build_unigram_opt(&data, &vocab, &chars).unwrap();
        assert_eq!(again, m);
        assert!(m.lattice(&c).edges_from(0).iter().all(|e| e.token != UNK_ID));
    }
}
