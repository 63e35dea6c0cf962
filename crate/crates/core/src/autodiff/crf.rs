//! Linear-chain CRF over `T × K` emissions and `K × K` transitions. The
//! first position must carry tag 0 (B); other tags are disallowed there.

use super::tensor::Tensor;

fn lse(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn forward_table(e: &Tensor, t: &Tensor) -> Vec<Vec<f64>> {
    let (n, k) = e.shape();
    let mut alpha = vec![vec![f64::NEG_INFINITY; k]; n];
    alpha[0][0] = e.get(0, 0);
    let mut buf = vec![0.0; k];
    for pos in 1..n {
        for j in 0..k {
            for i in 0..k {
                buf[i] = alpha[pos - 1][i] + t.get(i, j);
            }
            alpha[pos][j] = lse(&buf) + e.get(pos, j);
        }
    }
    alpha
}

fn backward_table(e: &Tensor, t: &Tensor) -> Vec<Vec<f64>> {
    let (n, k) = e.shape();
    let mut beta = vec![vec![0.0; k]; n];
    let mut buf = vec![0.0; k];
    for pos in (0..n.saturating_sub(1)).rev() {
        for i in 0..k {
            for j in 0..k {
                buf[j] = t.get(i, j) + e.get(pos + 1, j) + beta[pos + 1][j];
            }
            beta[pos][i] = lse(&buf);
        }
    }
    beta
}

/// `log Z` by the forward algorithm.
pub fn log_partition(e: &Tensor, t: &Tensor) -> f64 {
    let alpha = forward_table(e, t);
    lse(alpha.last().expect("non-empty sequence"))
}

/// Unnormalized score of a tag sequence.
pub fn score(e: &Tensor, t: &Tensor, tags: &[usize]) -> f64 {
    let mut s = 0.0;
    for (pos, tag) in tags.iter().enumerate() {
        s += e.get(pos, *tag);
        if pos > 0 {
            s += t.get(tags[pos - 1], *tag);
        }
    }
    s
}

/// Expected emission indicators (`T × K`) and transition counts (`K × K`).
pub fn marginals(e: &Tensor, t: &Tensor) -> (Tensor, Tensor) {
    let (n, k) = e.shape();
    let alpha = forward_table(e, t);
    let beta = backward_table(e, t);
    let log_z = lse(&alpha[n - 1]);
    let mut ge = Tensor::zeros(n, k);
    let mut gt = Tensor::zeros(k, k);
    for pos in 0..n {
        for j in 0..k {
            let lp = alpha[pos][j] + beta[pos][j] - log_z;
            ge.set(pos, j, if lp == f64::NEG_INFINITY { 0.0 } else { lp.exp() });
        }
        if pos > 0 {
            for i in 0..k {
                for j in 0..k {
                    let lp = alpha[pos - 1][i] + t.get(i, j) + e.get(pos, j) + beta[pos][j] - log_z;
                    if lp > f64::NEG_INFINITY {
                        let cur = gt.get(i, j);
                        gt.set(i, j, cur + lp.exp());
                    }
                }
            }
        }
    }
    (ge, gt)
}

/// Viterbi tag sequence; always starts with tag 0. Ties prefer the lower tag.
pub fn decode(e: &Tensor, t: &Tensor) -> Vec<usize> {
    let (n, k) = e.shape();
    if n == 0 {
        return Vec::new();
    }
    let mut delta = vec![vec![f64::NEG_INFINITY; k]; n];
    let mut back = vec![vec![0usize; k]; n];
    delta[0][0] = e.get(0, 0);
    for pos in 1..n {
        for j in 0..k {
            let mut best = (f64::NEG_INFINITY, 0);
            for i in 0..k {
                let s = delta[pos - 1][i] + t.get(i, j);
                if s > best.0 {
                    best = (s, i);
                }
            }
            delta[pos][j] = best.0 + e.get(pos, j);
            back[pos][j] = best.1;
        }
    }
    let mut tag = 0;
    for j in 1..k {
        if delta[n - 1][j] > delta[n - 1][tag] {
            tag = j;
        }
    }
    let mut tags = vec![0; n];
    for pos in (0..n).rev() {
        tags[pos] = tag;
        if pos > 0 {
            tag = back[pos][tag];
        }
    }
    tags
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_sequences(n: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![0]];
        for _ in 1..n {
            out = out
                .into_iter()
                .flat_map(|s| {
                    (0..k).map(move |t| {
                        let mut s2 = s.clone();
                        s2.push(t);
                        s2
                    })
                })
                .collect();
        }
        out
    }

    #[test]
    fn single_position_decodes_b() {
        let e = Tensor::from_vec(1, 2, vec![-5.0, 5.0]).unwrap();
        let t = Tensor::zeros(2, 2);
        assert_eq!(decode(&e, &t), vec![0]);
    }

    #[test]
    fn uniform_two_positions() {
        let e = Tensor::zeros(2, 2);
        let t = Tensor::zeros(2, 2);
        // valid sequences: BB, BI
        assert!((log_partition(&e, &t) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn partition_matches_enumeration() {
        let mut seed = 17u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        };
        for n in 1..=6 {
            let e = Tensor::from_vec(n, 2, (0..2 * n).map(|_| next()).collect()).unwrap();
            let t = Tensor::from_vec(2, 2, (0..4).map(|_| next()).collect()).unwrap();
            let log_z = log_partition(&e, &t);
            let seqs = all_sequences(n, 2);
            let total: f64 = seqs.iter().map(|s| (score(&e, &t, s) - log_z).exp()).sum();
            assert!((total - 1.0).abs() < 1e-9);
            let best = seqs
                .iter()
                .max_by(|a, b| score(&e, &t, a).partial_cmp(&score(&e, &t, b)).unwrap())
                .unwrap();
            assert_eq!(&decode(&e, &t), best);
            let (ge, _) = marginals(&e, &t);
            for pos in 0..n {
                assert!((ge.get(pos, 0) + ge.get(pos, 1) - 1.0).abs() < 1e-12);
            }
        }
    }
}
