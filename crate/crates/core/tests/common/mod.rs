//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::cmp::Ordering;

use rand::Rng;
use tokopt::corpus::Vocabulary;
use tokopt::lattice::Segmentation;

/// A random search problem: sentence, vocabulary and a score for every span.
pub struct Problem {
    pub chars: Vec<char>,
    pub vocab: Vocabulary,
    /// `weights[start][end]`, used for vocabulary and fallback edges alike.
    pub weights: Vec<Vec<f64>>,
}

impl Problem {
    pub fn random<R: Rng>(rng: &mut R, max_len: usize, integer_weights: bool) -> Problem {
        let alphabet = ['a', 'b', 'c'];
        let len = rng.gen_range(1..=max_len);
        let chars: Vec<char> = (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
        let mut pieces = Vec::new();
        for _ in 0..rng.gen_range(1..12) {
            let l = rng.gen_range(1..=4);
            let p: String = (0..l).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
            pieces.push(p);
        }
        // leave some characters out so fallback edges appear
        if rng.gen_bool(0.5) {
            pieces.retain(|p| p != "c");
        }
        let vocab = Vocabulary::new(pieces, None);
        let weights = (0..=len)
            .map(|_| {
                (0..=len)
                    .map(|_| {
                        if integer_weights {
                            -(rng.gen_range(1..=3) as f64)
                        } else {
                            -rng.gen::<f64>() * 4.0
                        }
                    })
                    .collect()
            })
            .collect();
        Problem { chars, vocab, weights }
    }

    pub fn weight(&self, start: usize, end: usize) -> f64 {
        self.weights[start][end]
    }

    /// Outgoing spans at `start`: vocabulary matches, else one unknown character.
    fn edges(&self, start: usize) -> Vec<usize> {
        let n = self.chars.len();
        let mut ends: Vec<usize> = (start + 1..=n)
            .filter(|&e| {
                let s: String = self.chars[start..e].iter().collect();
                self.vocab.contains(&s)
            })
            .collect();
        if ends.is_empty() {
            ends.push(start + 1);
        }
        ends
    }

    /// Every path with its score, summed right to left.
    pub fn all_paths(&self) -> Vec<(Vec<(usize, usize)>, f64)> {
        let mut out = Vec::new();
        let mut stack = Vec::new();
        self.walk(0, &mut stack, &mut out);
        out
    }

    fn walk(&self, pos: usize, stack: &mut Vec<(usize, usize)>, out: &mut Vec<(Vec<(usize, usize)>, f64)>) {
        if pos == self.chars.len() {
            let score = stack.iter().rev().fold(0.0, |acc, &(s, e)| self.weight(s, e) + acc);
            out.push((stack.clone(), score));
            return;
        }
        for end in self.edges(pos) {
            stack.push((pos, end));
            self.walk(end, stack, out);
            stack.pop();
        }
    }

    /// All paths, best first: score descending, then the longer span at the
    /// first point of difference.
    pub fn ranked(&self) -> Vec<Segmentation> {
        let mut paths = self.all_paths();
        paths.sort_by(|(a, sa), (b, sb)| {
            sb.partial_cmp(sa).unwrap().then_with(|| {
                for (x, y) in a.iter().zip(b) {
                    if x != y {
                        return y.1.cmp(&x.1);
                    }
                }
                Ordering::Equal
            })
        });
        paths
            .into_iter()
            .map(|(spans, _)| Segmentation::from_spans(spans, self.chars.len()).unwrap())
            .collect()
    }

    pub fn lattice(&self) -> tokopt::lattice::Lattice {
        tokopt::lattice::build_lattice(&self.chars, &self.vocab, |s, e, _| self.weight(s, e))
    }
}

/// Total-variation distance between an empirical histogram and a distribution.
pub fn total_variation(counts: &[usize], probs: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    counts
        .iter()
        .zip(probs)
        .map(|(c, p)| (*c as f64 / n as f64 - p).abs())
        .sum::<f64>()
        / 2.0
}

/// Pearson chi-square statistic against a uniform distribution.
pub fn chi_square_uniform(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    let expected = n as f64 / counts.len() as f64;
    counts.iter().map(|c| (*c as f64 - expected).powi(2) / expected).sum()
}

/// Upper 0.001 critical values of chi-square for 1..=10 degrees of freedom.
pub const CHI2_CRIT_001: [f64; 10] = [10.828, 13.816, 16.266, 18.467, 20.515, 22.458, 24.322, 26.124, 27.877, 29.588];

pub mod grads;

/// Four segmentations of "abab" with distinct scores.
pub fn four_paths() -> (Problem, Vec<Segmentation>, Vec<f64>) {
    let chars: Vec<char> = "abab".chars().collect();
    let vocab = Vocabulary::new(["a", "b", "ab"], None);
    let mut weights = vec![vec![0.0; 5]; 5];
    for (s, e, w) in [(0, 1, -0.3), (1, 2, -0.9), (2, 3, -0.3), (3, 4, -0.9), (0, 2, -0.5), (2, 4, -2.0)] {
        weights[s][e] = w;
    }
    let p = Problem { chars, vocab, weights };
    let paths = p.all_paths();
    let segs = paths
        .iter()
        .map(|(s, _)| Segmentation::from_spans(s.clone(), 4).unwrap())
        .collect();
    let z: f64 = paths.iter().map(|(_, s)| s.exp()).sum();
    let probs = paths.iter().map(|(_, s)| s.exp() / z).collect();
    (p, segs, probs)
}

/// Counts of `draws` samples at temperature `alpha`, indexed like `segs`.
pub fn histogram(p: &Problem, segs: &[Segmentation], alpha: f64, draws: usize, seed: u64) -> Vec<usize> {
    let lattice = p.lattice();
    let mut rng = tokopt::rng::stream(seed, "test.sample", 0);
    let mut counts = vec![0; segs.len()];
    for _ in 0..draws {
        let s = lattice.sample(alpha, &mut rng);
        counts[segs.iter().position(|x| *x == s).expect("sampled a real path")] += 1;
    }
    counts
}

pub mod pipe;
