//! Segmentation lattices and the searches run over them.
//!
//! A lattice holds one edge per in-vocabulary span of a sentence. Spans
//! outside the vocabulary are simply absent, so no search can ever return
//! them. Where the vocabulary leaves a reachable position with no outgoing
//! edge, a single-character unknown edge is added so that a complete path
//! always exists.
//!
//! Paths are totally ordered by score (descending), then by the span
//! sequence with longer spans first at the first point of difference.

mod search;
mod segmentation;

pub use search::{enumerate_all, ENUMERATION_LIMIT};
pub use segmentation::Segmentation;

use std::fmt::Write as _;

use crate::corpus::{TokenId, Vocabulary, UNK_ID};

/// One outgoing edge of a lattice position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub end: usize,
    pub token: TokenId,
    /// Log-domain score.
    pub weight: f64,
    /// Single-character unknown edge added for connectivity.
    pub fallback: bool,
}

/// Span lattice over a sentence of `len` characters.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    len: usize,
    /// `edges[start]`, ordered by decreasing `end`.
    edges: Vec<Vec<Edge>>,
}

/// Build the lattice of `chars` under `vocab`, scoring edges with `weight(start, end, token)`.
///
/// Fallback edges carry token [`UNK_ID`]; `weight` sees them like any other edge.
pub fn build_lattice<W>(chars: &[char], vocab: &Vocabulary, weight: W) -> Lattice
where
    W: Fn(usize, usize, TokenId) -> f64,
{
    let n = chars.len();
    let max_len = vocab.max_token_chars();
    let mut edges: Vec<Vec<Edge>> = vec![Vec::new(); n];
    for (start, out) in edges.iter_mut().enumerate() {
        let longest = max_len.min(n - start);
        for end in (start + 1..=start + longest).rev() {
            if let Some(token) = vocab.lookup_span(chars, start, end) {
                let w = weight(start, end, token);
                debug_assert!(w.is_finite(), "edge weight must be finite");
                out.push(Edge {
                    end,
                    token,
                    weight: w,
                    fallback: false,
                });
            }
        }
    }
    let mut reachable = vec![false; n + 1];
    if n > 0 {
        reachable[0] = true;
    }
    for start in 0..n {
        if !reachable[start] {
            continue;
        }
        if edges[start].is_empty() {
            let w = weight(start, start + 1, UNK_ID);
            edges[start].push(Edge {
                end: start + 1,
                token: UNK_ID,
                weight: w,
                fallback: true,
            });
        }
        for e in &edges[start] {
            reachable[e.end] = true;
        }
    }
    Lattice { len: n, edges }
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = values.collect();
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl Lattice {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Edges leaving `start`, longest first.
    pub fn edges_from(&self, start: usize) -> &[Edge] {
        &self.edges[start]
    }

    pub fn num_edges(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn edge(&self, start: usize, end: usize) -> Option<&Edge> {
        self.edges.get(start)?.iter().find(|e| e.end == end)
    }

    pub fn has_fallback(&self) -> bool {
        self.edges.iter().flatten().any(|e| e.fallback)
    }

    /// Score of a segmentation, summed from the last span backwards (the
    /// order every search here uses). `None` if a span is not an edge.
    pub fn path_score(&self, seg: &Segmentation) -> Option<f64> {
        let mut total = 0.0;
        for &(s, e) in seg.spans().iter().rev() {
            total = self.edge(s, e)?.weight + total;
        }
        Some(total)
    }

    /// Token ids along a segmentation; spans that are not edges map to UNK.
    pub fn path_tokens(&self, seg: &Segmentation) -> Vec<TokenId> {
        seg.spans()
            .iter()
            .map(|&(s, e)| self.edge(s, e).map_or(UNK_ID, |edge| edge.token))
            .collect()
    }

    /// Backward log partition values `beta[i]` of `alpha * weight` over suffixes from `i`.
    fn backward_log_partition(&self, alpha: f64) -> Vec<f64> {
        let n = self.len;
        let mut beta = vec![f64::NEG_INFINITY; n + 1];
        beta[n] = 0.0;
        for i in (0..n).rev() {
            beta[i] = log_sum_exp(self.edges[i].iter().map(|e| alpha * e.weight + beta[e.end]));
        }
        beta
    }

    /// Log of the partition function `sum over paths exp(alpha * score)`.
    pub fn log_partition(&self, alpha: f64) -> f64 {
        self.backward_log_partition(alpha)[0]
    }

    /// Posterior probability of every edge under `P(path) ∝ exp(score)`,
    /// as `(start, edge index, probability)`, plus the log partition.
    pub fn edge_marginals(&self) -> (f64, Vec<(usize, usize, f64)>) {
        let n = self.len;
        let beta = self.backward_log_partition(1.0);
        let mut fwd = vec![f64::NEG_INFINITY; n + 1];
        fwd[0] = 0.0;
        let mut incoming: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
        for i in 0..n {
            if i > 0 {
                fwd[i] = log_sum_exp(incoming[i].drain(..));
            }
            if fwd[i] == f64::NEG_INFINITY {
                continue;
            }
            for e in &self.edges[i] {
                incoming[e.end].push(fwd[i] + e.weight);
            }
        }
        let log_z = beta[0];
        let mut out = Vec::with_capacity(self.num_edges());
        for i in 0..n {
            if fwd[i] == f64::NEG_INFINITY {
                continue;
            }
            for (k, e) in self.edges[i].iter().enumerate() {
                let lp = fwd[i] + e.weight + beta[e.end] - log_z;
                if lp > f64::NEG_INFINITY {
                    out.push((i, k, lp.exp()));
                }
            }
        }
        (log_z, out)
    }

    /// Triangular text rendering: row = start, column = end; `.` marks an absent span.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:>5}", "");
        for end in 1..=self.len {
            let _ = write!(out, "{end:>9}");
        }
        out.push('\n');
        for start in 0..self.len {
            let _ = write!(out, "{start:>5}");
            for end in 1..=self.len {
                if end <= start {
                    let _ = write!(out, "{:>9}", "");
                    continue;
                }
                match self.edge(start, end) {
                    Some(e) if e.fallback => {
                        let _ = write!(out, "{:>8.3}?", e.weight);
                    }
                    Some(e) => {
                        let _ = write!(out, "{:>9.3}", e.weight);
                    }
                    None => {
                        let _ = write!(out, "{:>9}", ".");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    fn spans(l: &Lattice) -> Vec<(usize, usize, String, bool)> {
        let mut v = Vec::new();
        for s in 0..l.len() {
            for e in l.edges_from(s) {
                v.push((s, e.end, e.token.to_string(), e.fallback));
            }
        }
        v.sort();
        v
    }

    #[test]
    fn full_vocab_edges() {
        let v = Vocabulary::new(["a", "b", "ab"], None);
        let l = build_lattice(&chars("ab"), &v, |_, _, _| 0.0);
        let got: Vec<(usize, usize)> = spans(&l).into_iter().map(|x| (x.0, x.1)).collect();
        assert_eq!(got, vec![(0, 1), (0, 2), (1, 2)]);
        assert!(!l.has_fallback());
    }

    #[test]
    fn whole_token_only() {
        let v = Vocabulary::new(["ab"], None);
        let l = build_lattice(&chars("ab"), &v, |_, _, _| 0.0);
        assert_eq!(l.num_edges(), 1);
        assert!(!l.has_fallback());
    }

    #[test]
    fn empty_vocab_falls_back() {
        let v = Vocabulary::new(Vec::<String>::new(), None);
        let l = build_lattice(&chars("xy"), &v, |_, _, _| -1.0);
        let got = spans(&l);
        assert_eq!(got.len(), 2);
        assert!(got.iter().all(|x| x.3 && x.2 == UNK_ID.to_string()));
    }

    #[test]
    fn dead_end_gets_fallback() {
        // "abc" with {ab}: position 2 is reachable but has no edge.
        let v = Vocabulary::new(["ab", "bc"], None);
        let l = build_lattice(&chars("abc"), &v, |_, _, _| 0.0);
        assert!(l.edge(2, 3).unwrap().fallback);
        // position 1 is unreachable, so it gets no fallback
        assert!(l.edge(1, 2).is_none());
    }

    #[test]
    fn marginals_sum_per_position() {
        let v = Vocabulary::new(["a", "b", "ab", "ba"], None);
        let l = build_lattice(&chars("abab"), &v, |s, e, _| -((e - s) as f64) * 0.3 + s as f64 * 0.1);
        let (_, m) = l.edge_marginals();
        // every path crosses position 0 exactly once
        let total0: f64 = m.iter().filter(|x| x.0 == 0).map(|x| x.2).sum();
        assert!((total0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dump_marks_absent_cells() {
        let v = Vocabulary::new(["a", "ab"], None);
        let l = build_lattice(&chars("ab"), &v, |_, _, _| 0.0);
        let text = l.dump();
        assert!(text.contains('.'));
        assert!(text.contains('?'));
    }
}
