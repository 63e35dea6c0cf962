//! Finite-difference gradient checks over every graph op and the three
//! training objectives.

use rand::Rng;
use tokopt::autodiff::{grad_check, GradCheck, BiLstm, Graph, Mlp, ParamSet, Tensor, Var};
use tokopt::classifier::{ClassifierConfig, ClassifierModel, Pooling};
use tokopt::corpus::{CharTable, Vocabulary};
use tokopt::lattice::{enumerate_all, Segmentation};
use tokopt::retok::{BiTagConfig, BiTagTokenizer, SpanConfig, SpanTokenizer};
use tokopt::rng;
use tokopt::Result;

pub const EPS: f64 = 1e-5;

/// Worst errors over a batch of checks: the raw relative error and the one
/// restricted to discrepancies above the finite-difference roundoff bound.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Worst {
    pub raw: f64,
    pub resolved: f64,
}

impl Worst {
    fn add(&mut self, check: &GradCheck) {
        self.raw = self.raw.max(check.max_rel_err);
        self.resolved = self.resolved.max(check.max_resolved_err);
    }
}

fn random(r: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| r.gen_range(-scale..scale)).collect()).unwrap()
}

/// `Σ op(x) ⊙ W` for a fixed random `W`, so every output cell matters.
fn weighted(g: &mut Graph, v: Var, seed: u64) -> Result<Var> {
    let (rows, cols) = g.shape(v);
    let w = g.input(random(&mut rng::stream(seed, "test.weights", 0), rows, cols, 1.0));
    let m = g.mul(v, w)?;
    g.sum(m)
}

type Build = fn(&mut Graph, &[Var]) -> Result<Var>;

/// Named op cases: parameter shapes and the op under test.
fn op_cases() -> Vec<(&'static str, Vec<(usize, usize)>, Build)> {
    vec![
        ("matmul", vec![(2, 3), (3, 4)], |g, p| g.matmul(p[0], p[1])),
        ("transpose", vec![(2, 3)], |g, p| g.transpose(p[0])),
        ("add", vec![(2, 3), (2, 3)], |g, p| g.add(p[0], p[1])),
        ("add_row", vec![(3, 4), (1, 4)], |g, p| g.add_row(p[0], p[1])),
        ("mul", vec![(2, 3), (2, 3)], |g, p| g.mul(p[0], p[1])),
        ("scale", vec![(2, 3)], |g, p| g.scale(p[0], -1.7)),
        ("neg", vec![(2, 3)], |g, p| g.neg(p[0])),
        ("add_scalar", vec![(2, 3)], |g, p| g.add_scalar(p[0], 0.3)),
        ("concat_cols", vec![(2, 3), (2, 2)], |g, p| g.concat_cols(&[p[0], p[1], p[0]])),
        ("concat_rows", vec![(2, 3), (1, 3)], |g, p| g.concat_rows(&[p[0], p[1], p[1]])),
        ("slice_cols", vec![(2, 5)], |g, p| g.slice_cols(p[0], 1, 4)),
        ("row_select", vec![(4, 3)], |g, p| g.row_select(p[0], &[2, 0, 2])),
        ("tanh", vec![(2, 3)], |g, p| g.tanh(p[0])),
        ("sigmoid", vec![(2, 3)], |g, p| g.sigmoid(p[0])),
        ("log_sigmoid", vec![(2, 3)], |g, p| {
            let big = g.scale(p[0], 8.0)?;
            g.log_sigmoid(big)
        }),
        ("log_softmax", vec![(3, 4)], |g, p| g.log_softmax(p[0])),
        ("sum", vec![(2, 3)], |g, p| {
            let s = g.sum(p[0])?;
            g.mul(s, s)
        }),
        ("mean", vec![(2, 3)], |g, p| {
            let s = g.mean(p[0])?;
            g.mul(s, s)
        }),
        ("gather", vec![(3, 4)], |g, p| g.gather(p[0], &[(0, 1), (2, 3), (0, 1)])),
        ("crf_nll", vec![(5, 3), (3, 3)], |g, p| g.crf_nll(p[0], p[1], &[0, 2, 2, 1, 0])),
        ("lstm", vec![(4, 8), (2, 8)], |g, p| g.lstm(p[0], p[1], false)),
        ("lstm_reverse", vec![(4, 8), (2, 8)], |g, p| g.lstm(p[0], p[1], true)),
    ]
}

/// Worst relative error of every op over `trials` random draws.
pub fn op_errors(trials: u64) -> Vec<(&'static str, Worst)> {
    op_cases()
        .into_iter()
        .enumerate()
        .map(|(k, (name, shapes, build))| {
            let mut worst = Worst::default();
            for t in 0..trials {
                let mut r = rng::stream(t, "test.op", k as u64);
                let mut params = ParamSet::new();
                let ids: Vec<_> = shapes
                    .iter()
                    .enumerate()
                    .map(|(i, &(rows, cols))| params.add(format!("p{i}"), random(&mut r, rows, cols, 1.5)).unwrap())
                    .collect();
                let check = grad_check(
                    &mut params,
                    |g| {
                        let vars: Vec<Var> = ids.iter().map(|id| g.param(*id)).collect();
                        let out = build(g, &vars)?;
                        weighted(g, out, t)
                    },
                    EPS,
                )
                .unwrap();
        worst.add(&check);
            }
            (name, worst)
        })
        .collect()
}

fn random_text(r: &mut impl Rng, alphabet: &[char], min: usize, max: usize) -> Vec<char> {
    let n = r.gen_range(min..=max);
    (0..n).map(|_| alphabet[r.gen_range(0..alphabet.len())]).collect()
}

fn random_vocab(r: &mut impl Rng, alphabet: &[char]) -> Vocabulary {
    let mut pieces: Vec<String> = alphabet.iter().map(|c| c.to_string()).collect();
    for _ in 0..8 {
        pieces.push(random_text(r, alphabet, 2, 3).into_iter().collect());
    }
    Vocabulary::new(pieces, None)
}

fn random_segmentation(r: &mut impl Rng, chars: &[char], vocab: &Vocabulary) -> Segmentation {
    let all = enumerate_all(chars, vocab, chars.len().min(16)).unwrap();
    all[r.gen_range(0..all.len())].clone()
}

const ALPHABET: [char; 4] = ['a', 'b', 'c', ' '];

/// Worst error of the span loss over `configs` random models and sentences.
pub fn span_loss_errors(configs: u64) -> Worst {
    let mut worst = Worst::default();
    for k in 0..configs {
        let mut r = rng::stream(k, "test.span", 0);
        let vocab = random_vocab(&mut r, &ALPHABET);
        let chars = random_text(&mut r, &ALPHABET, 2, 7);
        let gold = random_segmentation(&mut r, &chars, &vocab);
        let config = SpanConfig {
            char_dim: r.gen_range(2..=4),
            hidden: r.gen_range(2..=3),
            mlp_hidden: r.gen_range(2..=3),
            proj_dim: r.gen_range(2..=3),
            negative_sampling: k % 4 == 3,
            ..SpanConfig::default()
        };
        let table = CharTable::from_texts(["abc "]);
        let tok = SpanTokenizer::new(config, vocab, table, &mut r).unwrap();
        let mut params = tok.params().clone();
        let check = grad_check(
            &mut params,
            |g| Ok(tok.loss_var(g, &chars, &gold)?.expect("in-vocabulary gold")),
            EPS,
        )
        .unwrap();
        worst.add(&check);
    }
    worst
}

pub fn classifier_loss_errors(configs: u64) -> Worst {
    let mut worst = Worst::default();
    for k in 0..configs {
        let mut r = rng::stream(k, "test.classifier", 0);
        let vocab = random_vocab(&mut r, &ALPHABET);
        let num_labels = r.gen_range(2..=4);
        let config = ClassifierConfig {
            embed_dim: r.gen_range(2..=4),
            hidden: r.gen_range(2..=3),
            pooling: if k % 2 == 0 { Pooling::Final } else { Pooling::Mean },
            ..ClassifierConfig::default()
        };
        let n = vocab.len() as u32;
        let ids: Vec<u32> = (0..r.gen_range(1..=6)).map(|_| r.gen_range(0..n)).collect();
        let label = r.gen_range(0..num_labels);
        let model = ClassifierModel::new(config, vocab, num_labels, &mut r).unwrap();
        let mut params = model.params().clone();
        let check = grad_check(&mut params, |g| model.loss_var(g, &ids, label), EPS).unwrap();
        worst.add(&check);
    }
    worst
}

pub fn crf_nll_errors(configs: u64) -> Worst {
    let mut worst = Worst::default();
    for k in 0..configs {
        let mut r = rng::stream(k, "test.bitag", 0);
        let chars = random_text(&mut r, &ALPHABET, 1, 7);
        let lengths = {
            let mut out = Vec::new();
            let mut left = chars.len();
            while left > 0 {
                let l = r.gen_range(1..=left.min(3));
                out.push(l);
                left -= l;
            }
            out
        };
        let gold = Segmentation::from_lengths(lengths).unwrap();
        let config = BiTagConfig {
            char_dim: r.gen_range(2..=4),
            hidden: r.gen_range(2..=3),
            ..BiTagConfig::default()
        };
        let mut tok = BiTagTokenizer::new(config, CharTable::from_texts(["abc "]), &mut r).unwrap();
        // non-zero transitions so their gradient is exercised too
        let mut params = tok.params().clone();
        if let Some(id) = params.id("transitions") {
            *params.value_mut(id) = random(&mut r, 2, 2, 1.0);
        }
        tok = BiTagTokenizer::from_params(*tok.config(), tok.char_table().clone(), params.clone()).unwrap();
        let check = grad_check(&mut params, |g| tok.loss_var(g, &chars, &gold), EPS).unwrap();
        worst.add(&check);
    }
    worst
}

/// A BiLSTM feeding an MLP, the shared encoder stack of all three models.
pub fn encoder_stack_error(seed: u64) -> Worst {
    let mut r = rng::stream(seed, "test.stack", 0);
    let mut params = ParamSet::new();
    let bi = BiLstm::new(&mut params, "enc", 3, 2, &mut r).unwrap();
    let mlp = Mlp::new(&mut params, "mlp", &[4, 3, 2], &mut r).unwrap();
    let x = random(&mut r, 5, 3, 1.0);
    let check = grad_check(
        &mut params,
        |g| {
            let xv = g.input(x.clone());
            let h = bi.forward(g, xv)?.states;
            let o = mlp.forward(g, h)?;
            weighted(g, o, seed)
        },
        EPS,
    )
    .unwrap();
    let mut worst = Worst::default();
    worst.add(&check);
    worst
}
