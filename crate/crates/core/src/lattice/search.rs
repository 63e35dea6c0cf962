use std::cmp::Ordering;

use rand::Rng;

use super::{build_lattice, Lattice, Segmentation};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

/// Longest sentence `enumerate_all` accepts.
pub const ENUMERATION_LIMIT: usize = 16;

#[derive(Debug, Clone, Copy)]
struct Entry {
    score: f64,
    end: usize,
    /// Rank of the continuation in the list at `end`.
    rank: usize,
}

/// Order candidates: higher score, then longer first span, then better continuation.
fn entry_order(a: &Entry, b: &Entry) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then(b.end.cmp(&a.end))
        .then(a.rank.cmp(&b.rank))
}

impl Lattice {
    /// Backward k-best lists: `lists[i]` holds the best suffixes from position `i`.
    fn kbest_lists(&self, k: usize) -> Vec<Vec<Entry>> {
        let n = self.len;
        let mut lists: Vec<Vec<Entry>> = vec![Vec::new(); n + 1];
        lists[n].push(Entry {
            score: 0.0,
            end: n,
            rank: 0,
        });
        let mut pool = Vec::new();
        for i in (0..n).rev() {
            pool.clear();
            for e in &self.edges[i] {
                for (rank, cont) in lists[e.end].iter().enumerate() {
                    pool.push(Entry {
                        score: e.weight + cont.score,
                        end: e.end,
                        rank,
                    });
                }
            }
            pool.sort_by(entry_order);
            pool.truncate(k);
            lists[i] = pool.clone();
        }
        lists
    }

    fn trace(&self, lists: &[Vec<Entry>], mut rank: usize) -> Segmentation {
        let mut spans = Vec::new();
        let mut pos = 0;
        while pos < self.len {
            let entry = lists[pos][rank];
            spans.push((pos, entry.end));
            pos = entry.end;
            rank = entry.rank;
        }
        Segmentation::from_spans_unchecked(spans)
    }

    /// Highest-scoring segmentation.
    pub fn viterbi_best(&self) -> Segmentation {
        let n = self.len;
        // best[i] = (score, end of first span)
        let mut best: Vec<Option<(f64, usize)>> = vec![None; n + 1];
        best[n] = Some((0.0, n));
        for i in (0..n).rev() {
            for e in &self.edges[i] {
                let Some((cont, _)) = best[e.end] else { continue };
                let cand = e.weight + cont;
                // edges are visited longest first, so only a strictly better score replaces
                match best[i] {
                    Some((cur, _)) if cand <= cur => {}
                    _ => best[i] = Some((cand, e.end)),
                }
            }
        }
        let mut spans = Vec::new();
        let mut pos = 0;
        while pos < n {
            let end = best[pos].expect("lattice is connected").1;
            spans.push((pos, end));
            pos = end;
        }
        Segmentation::from_spans_unchecked(spans)
    }

    /// Viterbi score, for convenience.
    pub fn best_score(&self) -> f64 {
        self.path_score(&self.viterbi_best()).unwrap_or(0.0)
    }

    /// Up to `n` distinct segmentations in path order; element 0 is the Viterbi path.
    pub fn nbest(&self, n: usize) -> Vec<Segmentation> {
        if n == 0 {
            return Vec::new();
        }
        let lists = self.kbest_lists(n);
        (0..lists[0].len()).map(|r| self.trace(&lists, r)).collect()
    }

    /// `nbest` together with the path scores.
    pub fn nbest_scored(&self, n: usize) -> Vec<(Segmentation, f64)> {
        if n == 0 {
            return Vec::new();
        }
        let lists = self.kbest_lists(n);
        lists[0]
            .iter()
            .enumerate()
            .map(|(r, e)| (self.trace(&lists, r), e.score))
            .collect()
    }

    /// Draw a path with probability proportional to `exp(alpha * score)`
    /// (backward filtering, forward sampling).
    pub fn sample<R: Rng + ?Sized>(&self, alpha: f64, rng: &mut R) -> Segmentation {
        let beta = self.backward_log_partition(alpha);
        let mut spans = Vec::new();
        let mut pos = 0;
        while pos < self.len {
            let edges = &self.edges[pos];
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut chosen = None;
            for e in edges {
                let lp = alpha * e.weight + beta[e.end] - beta[pos];
                if lp == f64::NEG_INFINITY {
                    continue;
                }
                acc += lp.exp();
                chosen = Some(e.end);
                if u < acc {
                    break;
                }
            }
            let end = chosen.expect("lattice is connected");
            spans.push((pos, end));
            pos = end;
        }
        Segmentation::from_spans_unchecked(spans)
    }

    /// Every complete path, in path order for equal scores (longest first span first).
    pub fn all_paths(&self) -> Vec<Segmentation> {
        let mut out = Vec::new();
        let mut stack = Vec::new();
        self.walk(0, &mut stack, &mut out);
        out
    }

    fn walk(&self, pos: usize, stack: &mut Vec<(usize, usize)>, out: &mut Vec<Segmentation>) {
        if pos == self.len {
            out.push(Segmentation::from_spans_unchecked(stack.clone()));
            return;
        }
        for e in &self.edges[pos] {
            stack.push((pos, e.end));
            self.walk(e.end, stack, out);
            stack.pop();
        }
    }
}

/// Every segmentation of `chars` into vocabulary pieces (plus connectivity
/// fallbacks). Refuses sentences longer than `max_len`.
pub fn enumerate_all(chars: &[char], vocab: &Vocabulary, max_len: usize) -> Result<Vec<Segmentation>> {
    if max_len > ENUMERATION_LIMIT {
        return Err(Error::Invalid(format!(
            "enumeration limit {max_len} exceeds {ENUMERATION_LIMIT}"
        )));
    }
    if chars.len() > max_len {
        return Err(Error::TooLong {
            len: chars.len(),
            max: max_len,
        });
    }
    Ok(build_lattice(chars, vocab, |_, _, _| 0.0).all_paths())
}
