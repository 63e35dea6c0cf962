//! Byte-pair-encoding over characters, with BPE-dropout.

use std::collections::HashMap;

use rand::Rng;

use super::{count_texts, is_mergeable, word_spans};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::lattice::Segmentation;

/// Merge-based tokenizer. Merges apply in training order; multi-character
/// symbols never contain whitespace.
#[derive(Debug, Clone, PartialEq)]
pub struct BpeModel {
    alphabet: Vec<char>,
    merges: Vec<(String, String)>,
    vocab: Vocabulary,
    symbol_ids: HashMap<String, u32>,
    /// (left, right) -> (rank, merged symbol)
    ranks: HashMap<(u32, u32), (usize, u32)>,
}

const UNKNOWN_SYMBOL: u32 = u32::MAX;

impl BpeModel {
    /// Rebuild the model from its alphabet and ordered merges.
    pub fn from_merges(alphabet: Vec<char>, merges: Vec<(String, String)>) -> Result<Self> {
        fn intern(symbols: &mut Vec<String>, ids: &mut HashMap<String, u32>, s: String) -> u32 {
            if let Some(id) = ids.get(&s) {
                return *id;
            }
            symbols.push(s.clone());
            ids.insert(s, (symbols.len() - 1) as u32);
            (symbols.len() - 1) as u32
        }
        let mut symbols: Vec<String> = Vec::new();
        let mut symbol_ids: HashMap<String, u32> = HashMap::new();
        for c in &alphabet {
            intern(&mut symbols, &mut symbol_ids, c.to_string());
        }
        let mut ranks = HashMap::new();
        for (rank, (l, r)) in merges.iter().enumerate() {
            let (Some(&li), Some(&ri)) = (symbol_ids.get(l), symbol_ids.get(r)) else {
                return Err(Error::Invalid(format!("merge ({l}, {r}) uses an unknown symbol")));
            };
            let merged = intern(&mut symbols, &mut symbol_ids, format!("{l}{r}"));
            ranks.entry((li, ri)).or_insert((rank, merged));
        }
        let vocab = Vocabulary::new(symbols.iter().cloned(), None);
        Ok(BpeModel {
            alphabet,
            merges,
            vocab,
            symbol_ids,
            ranks,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn alphabet(&self) -> &[char] {
        &self.alphabet
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    fn encode_word<R: Rng + ?Sized>(&self, word: &[char], dropout: f64, rng: &mut R) -> Vec<(u32, usize)> {
        // (symbol, char length)
        let mut syms: Vec<(u32, usize)> = word
            .iter()
            .map(|c| {
                let id = self.symbol_ids.get(c.to_string().as_str()).copied().unwrap_or(UNKNOWN_SYMBOL);
                (id, 1)
            })
            .collect();
        loop {
            let mut best: Option<(usize, usize, u32)> = None;
            for i in 0..syms.len().saturating_sub(1) {
                let Some(&(rank, merged)) = self.ranks.get(&(syms[i].0, syms[i + 1].0)) else {
                    continue;
                };
                if dropout > 0.0 && rng.gen::<f64>() < dropout {
                    continue;
                }
                if best.is_none_or(|(r, _, _)| rank < r) {
                    best = Some((rank, i, merged));
                }
            }
            let Some((_, i, merged)) = best else { break };
            syms[i] = (merged, syms[i].1 + syms[i + 1].1);
            syms.remove(i + 1);
        }
        syms
    }

    /// Apply merges (lowest rank, leftmost first); each possible merge is
    /// skipped with probability `dropout` at every step.
    pub fn encode<R: Rng + ?Sized>(&self, chars: &[char], dropout: f64, rng: &mut R) -> Segmentation {
        let mut lengths = Vec::with_capacity(chars.len());
        for (start, end) in word_spans(chars) {
            for (_, l) in self.encode_word(&chars[start..end], dropout, rng) {
                lengths.push(l);
            }
        }
        Segmentation::from_lengths(lengths).expect("positive lengths")
    }

    /// Deterministic encoding (no dropout).
    pub fn encode_deterministic(&self, chars: &[char]) -> Segmentation {
        let mut unused = rand::rngs::mock::StepRng::new(0, 0);
        self.encode(chars, 0.0, &mut unused)
    }
}

/// Greedy BPE training to `vocab_size` symbols (special tokens excluded).
/// Ties in pair frequency go to the lexicographically smallest (left, right).
pub fn bpe_train<S: AsRef<str>>(corpus: &[S], vocab_size: usize) -> Result<BpeModel> {
    Ok(train_with_words(corpus, vocab_size)?.0)
}

pub(crate) fn train_with_words<S: AsRef<str>>(
    corpus: &[S],
    vocab_size: usize,
) -> Result<(BpeModel, Vec<(Vec<String>, u64)>)> {
    let texts = count_texts(corpus);
    if texts.is_empty() {
        return Err(Error::Invalid("empty training corpus".into()));
    }
    let mut alphabet: Vec<char> = texts.iter().flat_map(|(t, _)| t.chars()).collect();
    alphabet.sort_unstable();
    alphabet.dedup();
    if vocab_size < alphabet.len() {
        return Err(Error::Invalid(format!(
            "vocabulary size {vocab_size} below alphabet size {}",
            alphabet.len()
        )));
    }
    let mut symbols: Vec<String> = alphabet.iter().map(|c| c.to_string()).collect();
    let mut symbol_ids: HashMap<String, u32> =
        symbols.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect();

    let mut word_counts: HashMap<Vec<char>, u64> = HashMap::new();
    for (t, w) in &texts {
        let chars: Vec<char> = t.chars().collect();
        for (s, e) in word_spans(&chars) {
            if e - s > 1 {
                *word_counts.entry(chars[s..e].to_vec()).or_default() += w;
            }
        }
    }
    let mut words: Vec<(Vec<u32>, u64)> = word_counts
        .into_iter()
        .map(|(w, c)| (w.iter().map(|ch| symbol_ids[&ch.to_string()]).collect(), c))
        .collect();
    words.sort();

    let mut merges = Vec::new();
    let mut vocab_len = symbols.len();
    while vocab_len < vocab_size {
        let mut pairs: HashMap<(u32, u32), u64> = HashMap::new();
        for (w, c) in &words {
            for p in w.windows(2) {
                *pairs.entry((p[0], p[1])).or_default() += c;
            }
        }
        let best = pairs.into_iter().max_by(|a, b| {
            a.1.cmp(&b.1).then_with(|| {
                let ka = (&symbols[a.0 .0 as usize], &symbols[a.0 .1 as usize]);
                let kb = (&symbols[b.0 .0 as usize], &symbols[b.0 .1 as usize]);
                kb.cmp(&ka)
            })
        });
        let Some(((l, r), _)) = best else { break };
        let merged = format!("{}{}", symbols[l as usize], symbols[r as usize]);
        let id = match symbol_ids.get(&merged) {
            Some(id) => *id,
            None => {
                symbols.push(merged.clone());
                symbol_ids.insert(merged, (symbols.len() - 1) as u32);
                vocab_len += 1;
                (symbols.len() - 1) as u32
            }
        };
        merges.push((symbols[l as usize].clone(), symbols[r as usize].clone()));
        for (w, _) in words.iter_mut() {
            let mut i = 0;
            let mut out = Vec::with_capacity(w.len());
            while i < w.len() {
                if i + 1 < w.len() && w[i] == l && w[i + 1] == r {
                    out.push(id);
                    i += 2;
                } else {
                    out.push(w[i]);
                    i += 1;
                }
            }
            *w = out;
        }
    }
    debug_assert!(symbols.iter().all(|s| s.chars().count() == 1 || s.chars().all(is_mergeable)));
    let model = BpeModel::from_merges(alphabet, merges)?;
    let final_words = words
        .into_iter()
        .map(|(w, c)| (w.into_iter().map(|s| symbols[s as usize].clone()).collect(), c))
        .collect();
    Ok((model, final_words))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn first_merge_is_most_frequent_pair() {
        let m = bpe_train(&["abab", "ab"], 3).unwrap();
        assert_eq!(m.merges()[0], ("a".to_string(), "b".to_string()));
    }

    #[test]
    fn target_equal_alphabet_means_no_merges() {
        let m = bpe_train(&["abab", "ab"], 2).unwrap();
        assert!(m.merges().is_empty());
        assert!(bpe_train(&["abc"], 2).is_err());
        assert!(bpe_train(&Vec::<String>::new(), 5).is_err());
    }

    #[test]
    fn hand_application() {
        let m = BpeModel::from_merges(vec!['a', 'b'], vec![("a".into(), "b".into())]).unwrap();
        let c = chars("abab");
        assert_eq!(m.encode_deterministic(&c).tokens(&c), vec!["ab", "ab"]);
        let mut r = rng::stream(0, "t", 0);
        assert_eq!(m.encode(&c, 1.0, &mut r), Segmentation::single_chars(4));
    }

    #[test]
    fn merges_reproduce_training_segmentation() {
        let corpus = ["low lower lowest", "newer wider new", "lowlow newnew", "aaa aaaa"];
        let (m, words) = train_with_words(&corpus, 24).unwrap();
        for (w, _) in words {
            let c: Vec<char> = w.concat().chars().collect();
            assert_eq!(m.encode_deterministic(&c).tokens(&c), w);
        }
    }

    #[test]
    fn dropout_outputs_stay_in_vocab() {
        let corpus = ["lowlowlow", "lowerlower", "newestnew"];
        let m = bpe_train(&corpus, 20).unwrap();
        let mut r = rng::stream(9, "t", 0);
        for t in corpus {
            let c = chars(t);
            for _ in 0..50 {
                let seg = m.encode(&c, 0.4, &mut r);
                for tok in seg.tokens(&c) {
                    assert!(m.vocab().contains(&tok), "{tok}");
                }
            }
        }
    }
}
