//! Evaluation quantities: macro-F1, BI-tag accuracy, unknown-token ratio,
//! average token count and unigram perplexity.

mod report;

pub use report::{Conventions, EvalReport, MethodScores};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{CharTable, Vocabulary};
use crate::error::{Error, Result};
use crate::lattice::Segmentation;

/// Per-label F1; `None` for labels absent from both gold and predictions.
pub fn per_label_f1(predictions: &[usize], gold: &[usize], num_labels: usize) -> Result<Vec<Option<f64>>> {
    if predictions.len() != gold.len() {
        return Err(Error::Invalid(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::Invalid("f1 over an empty split".into()));
    }
    let mut tp = vec![0usize; num_labels];
    let mut fp = vec![0usize; num_labels];
    let mut fn_ = vec![0usize; num_labels];
    for (&p, &g) in predictions.iter().zip(gold) {
        if p >= num_labels || g >= num_labels {
            return Err(Error::Invalid(format!("label out of range 0..{num_labels}")));
        }
        if p == g {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }
    Ok((0..num_labels)
        .map(|l| {
            let denom = 2 * tp[l] + fp[l] + fn_[l];
            (denom > 0).then(|| 2.0 * tp[l] as f64 / denom as f64)
        })
        .collect())
}

/// Unweighted mean of per-label F1 over the labels that occur in the gold
/// labels or the predictions.
pub fn macro_f1(predictions: &[usize], gold: &[usize], num_labels: usize) -> Result<f64> {
    let per = per_label_f1(predictions, gold, num_labels)?;
    let present: Vec<f64> = per.into_iter().flatten().collect();
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

/// Fraction of characters whose B/I tag agrees.
pub fn bi_tag_accuracy(hyp: &Segmentation, reference: &Segmentation) -> Result<f64> {
    let (matched, total) = bi_tag_matches(hyp, reference)?;
    if total == 0 {
        return Ok(1.0);
    }
    Ok(matched as f64 / total as f64)
}

fn bi_tag_matches(hyp: &Segmentation, reference: &Segmentation) -> Result<(usize, usize)> {
    if hyp.char_len() != reference.char_len() {
        return Err(Error::Invalid(format!(
            "segmentations cover {} and {} characters",
            hyp.char_len(),
            reference.char_len()
        )));
    }
    let (a, b) = (hyp.bi_tags(), reference.bi_tags());
    Ok((a.iter().zip(&b).filter(|(x, y)| x == y).count(), a.len()))
}

/// Character-weighted BI-tag accuracy over a split.
pub fn corpus_bi_tag_accuracy(pairs: &[(Segmentation, Segmentation)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Invalid("bi-tag accuracy over an empty split".into()));
    }
    let mut matched = 0;
    let mut total = 0;
    for (h, r) in pairs {
        let (m, t) = bi_tag_matches(h, r)?;
        matched += m;
        total += t;
    }
    Ok(if total == 0 { 1.0 } else { matched as f64 / total as f64 })
}

/// Share of tokens outside `vocab`. With `exclude_unknown_chars`, a
/// single-character token whose character is missing from `chars` is not
/// counted as unknown (it still counts as a token).
pub fn unk_ratio(
    sentences: &[(Vec<char>, Segmentation)],
    vocab: &Vocabulary,
    chars: &CharTable,
    exclude_unknown_chars: bool,
) -> Result<f64> {
    let mut unknown = 0usize;
    let mut total = 0usize;
    for (text, seg) in sentences {
        for &(s, e) in seg.spans() {
            total += 1;
            if vocab.lookup_span(text, s, e).is_some() {
                continue;
            }
            if exclude_unknown_chars && e - s == 1 && !chars.contains(text[s]) {
                continue;
            }
            unknown += 1;
        }
    }
    if total == 0 {
        return Err(Error::Invalid("unknown-token ratio over an empty split".into()));
    }
    Ok(unknown as f64 / total as f64)
}

/// Mean number of tokens per sentence.
pub fn avg_tokens(segmentations: &[Segmentation]) -> Result<f64> {
    if segmentations.is_empty() {
        return Err(Error::Invalid("average token count over an empty split".into()));
    }
    Ok(segmentations.iter().map(Segmentation::len).sum::<usize>() as f64 / segmentations.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerplexityMode {
    /// exp of the entropy of the split's own token distribution.
    #[default]
    Entropy,
    /// exp of the cross-entropy against the training split's add-one
    /// smoothed unigram distribution.
    CrossEntropy,
}

fn token_counts<'a>(tokens: impl IntoIterator<Item = &'a str>) -> HashMap<&'a str, u64> {
    let mut counts = HashMap::new();
    for t in tokens {
        *counts.entry(t).or_insert(0u64) += 1;
    }
    counts
}

/// exp of the Shannon entropy (natural log) of the empirical token distribution.
pub fn unigram_perplexity<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Result<f64> {
    let counts = token_counts(tokens);
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(Error::Invalid("perplexity over an empty split".into()));
    }
    let mut sorted: Vec<u64> = counts.into_values().collect();
    sorted.sort_unstable();
    let n = total as f64;
    let entropy: f64 = sorted
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    Ok(entropy.exp())
}

/// exp of the cross-entropy of `tokens` under an add-one smoothed unigram
/// model of `reference` (one extra type reserved for unseen tokens).
pub fn cross_perplexity<'a>(
    tokens: impl IntoIterator<Item = &'a str>,
    reference: impl IntoIterator<Item = &'a str>,
) -> Result<f64> {
    let reference = token_counts(reference);
    let ref_total: u64 = reference.values().sum();
    let types = reference.len() as f64 + 1.0;
    let mut sum = 0.0;
    let mut n = 0u64;
    for t in tokens {
        let c = reference.get(t).copied().unwrap_or(0) as f64;
        sum -= ((c + 1.0) / (ref_total as f64 + types)).ln();
        n += 1;
    }
    if n == 0 {
        return Err(Error::Invalid("perplexity over an empty split".into()));
    }
    Ok((sum / n as f64).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(lengths: &[usize]) -> Segmentation {
        Segmentation::from_lengths(lengths.iter().copied()).unwrap()
    }

    #[test]
    fn macro_f1_hand_values() {
        assert_eq!(macro_f1(&[0, 1, 1], &[0, 1, 1], 2).unwrap(), 1.0);
        let m = macro_f1(&[0, 0, 0, 0], &[0, 0, 1, 1], 2).unwrap();
        assert!((m - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(macro_f1(&[2], &[2], 3).unwrap(), 1.0);
        assert!(macro_f1(&[], &[], 2).is_err());
        assert!(macro_f1(&[0], &[0, 1], 2).is_err());
    }

    #[test]
    fn bi_tag_hand_values() {
        assert!((bi_tag_accuracy(&seg(&[2, 1]), &seg(&[1, 1, 1])).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((bi_tag_accuracy(&seg(&[1, 1, 1, 1, 1]), &seg(&[5])).unwrap() - 0.2).abs() < 1e-12);
        assert!(bi_tag_accuracy(&seg(&[2]), &seg(&[1, 1, 1])).is_err());
    }

    #[test]
    fn unk_ratio_counts() {
        let vocab = Vocabulary::new(["a", "b"], None);
        let table = CharTable::from_texts(["ab"]);
        let text: Vec<char> = "abababaabz".chars().collect();
        let s = Segmentation::from_lengths([1, 1, 1, 1, 1, 1, 1, 1, 1, 1]).unwrap();
        let with_z = vec![(text.clone(), s.clone())];
        assert!((unk_ratio(&with_z, &vocab, &table, false).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(unk_ratio(&with_z, &vocab, &table, true).unwrap(), 0.0);
        let ab: Vec<char> = "ab".chars().collect();
        let merged = vec![(ab, seg(&[2]))];
        assert_eq!(unk_ratio(&merged, &vocab, &table, true).unwrap(), 1.0);
        assert!(unk_ratio(&[], &vocab, &table, true).is_err());
    }

    #[test]
    fn averages_and_perplexity() {
        assert_eq!(avg_tokens(&[seg(&[1, 1, 1]), seg(&[1, 1, 1, 1, 1])]).unwrap(), 4.0);
        assert_eq!(unigram_perplexity(["x", "x", "x"]).unwrap(), 1.0);
        assert!((unigram_perplexity(["a", "b", "c", "d"]).unwrap() - 4.0).abs() < 1e-12);
        let p = unigram_perplexity(["a", "a", "a", "b"]).unwrap();
        let expected = (-(0.75f64) * 0.75f64.ln() - 0.25 * 0.25f64.ln()).exp();
        assert!((p - expected).abs() < 1e-12);
        assert!((p - 1.75477).abs() < 1e-5);
        assert!(unigram_perplexity(std::iter::empty()).is_err());
    }

    #[test]
    fn cross_perplexity_of_uniform_reference() {
        // reference {a, b} plus one unseen slot: every seen token has p = 2/5
        let p = cross_perplexity(["a", "b"], ["a", "b"]).unwrap();
        assert!((p - 2.5).abs() < 1e-12);
    }
}
