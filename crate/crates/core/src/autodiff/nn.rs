//! LSTM, BiLSTM and MLP blocks built from graph ops.

use rand::Rng;

use super::graph::{Graph, Var};
use super::params::{ParamId, ParamSet};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

fn bind(params: &ParamSet, name: &str) -> Result<ParamId> {
    params
        .id(name)
        .ok_or_else(|| Error::Schema(format!("missing parameter `{name}`")))
}

fn check_shape(params: &ParamSet, id: ParamId, shape: (usize, usize)) -> Result<()> {
    let got = params.value(id).shape();
    if got != shape {
        return Err(Error::Shape {
            op: "bind",
            detail: format!("{} is {got:?}, expected {shape:?}", params.name(id)),
        });
    }
    Ok(())
}

/// One LSTM direction. Gates are packed as `[input, forget, output, candidate]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmParams {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
    pub input_size: usize,
    pub hidden: usize,
}

impl LstmParams {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        prefix: &str,
        input_size: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let w_input = params.add_xavier(format!("{prefix}.w_input"), input_size, 4 * hidden, rng)?;
        let w_hidden = params.add_xavier(format!("{prefix}.w_hidden"), hidden, 4 * hidden, rng)?;
        let mut b = Tensor::zeros(1, 4 * hidden);
        for v in &mut b.data_mut()[hidden..2 * hidden] {
            *v = 1.0;
        }
        let bias = params.add(format!("{prefix}.bias"), b)?;
        Ok(LstmParams {
            w_input,
            w_hidden,
            bias,
            input_size,
            hidden,
        })
    }

    pub fn bind(params: &ParamSet, prefix: &str, input_size: usize, hidden: usize) -> Result<Self> {
        let w_input = bind(params, &format!("{prefix}.w_input"))?;
        let w_hidden = bind(params, &format!("{prefix}.w_hidden"))?;
        let bias = bind(params, &format!("{prefix}.bias"))?;
        check_shape(params, w_input, (input_size, 4 * hidden))?;
        check_shape(params, w_hidden, (hidden, 4 * hidden))?;
        check_shape(params, bias, (1, 4 * hidden))?;
        Ok(LstmParams {
            w_input,
            w_hidden,
            bias,
            input_size,
            hidden,
        })
    }

    /// Run over the rows of `inputs` (`T × input_size`) from a zero state.
    /// Returns the `T × hidden` states, row `t` aligned with input `t` for
    /// both directions.
    pub fn forward(&self, g: &mut Graph, inputs: Var, direction: Direction) -> Result<Var> {
        let (steps, width) = g.shape(inputs);
        if steps == 0 {
            return Err(Error::Invalid("lstm over an empty sequence".into()));
        }
        if width != self.input_size {
            return Err(Error::Shape {
                op: "lstm",
                detail: format!("input width {width}, expected {}", self.input_size),
            });
        }
        let w_in = g.param(self.w_input);
        let w_h = g.param(self.w_hidden);
        let b = g.param(self.bias);
        let proj = g.matmul(inputs, w_in)?;
        let proj = g.add_row(proj, b)?;
        g.lstm(proj, w_h, direction == Direction::Backward)
    }
}

/// Outputs of a bidirectional LSTM.
pub struct BiLstmOutput {
    /// `T × 2h`, row k = concat(forward_k, backward_k).
    pub states: Var,
    /// `T × h` each.
    pub forward: Var,
    pub backward: Var,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiLstm {
    pub forward: LstmParams,
    pub backward: LstmParams,
}

impl BiLstm {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        prefix: &str,
        input_size: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(BiLstm {
            forward: LstmParams::new(params, &format!("{prefix}.fwd"), input_size, hidden, rng)?,
            backward: LstmParams::new(params, &format!("{prefix}.bwd"), input_size, hidden, rng)?,
        })
    }

    pub fn bind(params: &ParamSet, prefix: &str, input_size: usize, hidden: usize) -> Result<Self> {
        Ok(BiLstm {
            forward: LstmParams::bind(params, &format!("{prefix}.fwd"), input_size, hidden)?,
            backward: LstmParams::bind(params, &format!("{prefix}.bwd"), input_size, hidden)?,
        })
    }

    pub fn output_size(&self) -> usize {
        self.forward.hidden + self.backward.hidden
    }

    pub fn forward(&self, g: &mut Graph, inputs: Var) -> Result<BiLstmOutput> {
        let fwd = self.forward.forward(g, inputs, Direction::Forward)?;
        let bwd = self.backward.forward(g, inputs, Direction::Backward)?;
        let states = g.concat_cols(&[fwd, bwd])?;
        Ok(BiLstmOutput {
            states,
            forward: fwd,
            backward: bwd,
        })
    }
}

/// Feed-forward layers with tanh between them (none after the last).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    pub layers: Vec<(ParamId, ParamId)>,
}

impl Mlp {
    /// `sizes` lists layer widths including input and output, e.g. `[512, 256, 128]`.
    pub fn new<R: Rng + ?Sized>(params: &mut ParamSet, prefix: &str, sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut layers = Vec::new();
        for (k, w) in sizes.windows(2).enumerate() {
            let weight = params.add_xavier(format!("{prefix}.{k}.weight"), w[0], w[1], rng)?;
            let bias = params.add_zeros(format!("{prefix}.{k}.bias"), 1, w[1])?;
            layers.push((weight, bias));
        }
        Ok(Mlp { layers })
    }

    pub fn bind(params: &ParamSet, prefix: &str, sizes: &[usize]) -> Result<Self> {
        let mut layers = Vec::new();
        for (k, w) in sizes.windows(2).enumerate() {
            let weight = bind(params, &format!("{prefix}.{k}.weight"))?;
            let bias = bind(params, &format!("{prefix}.{k}.bias"))?;
            check_shape(params, weight, (w[0], w[1]))?;
            check_shape(params, bias, (1, w[1]))?;
            layers.push((weight, bias));
        }
        Ok(Mlp { layers })
    }

    pub fn forward(&self, g: &mut Graph, mut x: Var) -> Result<Var> {
        for (k, (w, b)) in self.layers.iter().enumerate() {
            if k > 0 {
                x = g.tanh(x)?;
            }
            let wv = g.param(*w);
            let bv = g.param(*b);
            x = g.matmul(x, wv)?;
            x = g.add_row(x, bv)?;
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::graph::sigmoid;
    use crate::rng;

    fn rows(g: &Graph, v: Var) -> Vec<Vec<f64>> {
        let t = g.value(v);
        (0..t.rows()).map(|r| t.row_slice(r).to_vec()).collect()
    }

    /// Step-by-step LSTM from elementary ops.
    fn composite(lstm: &LstmParams, g: &mut Graph, inputs: Var, direction: Direction) -> Var {
        let steps = g.shape(inputs).0;
        let h = lstm.hidden;
        let w_in = g.param(lstm.w_input);
        let w_h = g.param(lstm.w_hidden);
        let b = g.param(lstm.bias);
        let proj = g.matmul(inputs, w_in).unwrap();
        let proj = g.add_row(proj, b).unwrap();
        let order: Vec<usize> = match direction {
            Direction::Forward => (0..steps).collect(),
            Direction::Backward => (0..steps).rev().collect(),
        };
        let mut outputs = vec![None; steps];
        let mut state: Option<(Var, Var)> = None;
        for t in order {
            let mut z = g.row_select(proj, &[t]).unwrap();
            if let Some((h_prev, _)) = state {
                let rec = g.matmul(h_prev, w_h).unwrap();
                z = g.add(z, rec).unwrap();
            }
            let gates = g.slice_cols(z, 0, 3 * h).unwrap();
            let gates = g.sigmoid(gates).unwrap();
            let cand = g.slice_cols(z, 3 * h, 4 * h).unwrap();
            let cand = g.tanh(cand).unwrap();
            let i = g.slice_cols(gates, 0, h).unwrap();
            let o = g.slice_cols(gates, 2 * h, 3 * h).unwrap();
            let mut cell = g.mul(i, cand).unwrap();
            if let Some((_, c_prev)) = state {
                let f = g.slice_cols(gates, h, 2 * h).unwrap();
                let kept = g.mul(f, c_prev).unwrap();
                cell = g.add(cell, kept).unwrap();
            }
            let squashed = g.tanh(cell).unwrap();
            let hidden = g.mul(o, squashed).unwrap();
            outputs[t] = Some(hidden);
            state = Some((hidden, cell));
        }
        let outs: Vec<Var> = outputs.into_iter().map(Option::unwrap).collect();
        g.concat_rows(&outs).unwrap()
    }

    #[test]
    fn zero_params_give_zero_states() {
        let mut p = ParamSet::new();
        let mut r = rng::stream(0, "t", 0);
        let bi = BiLstm::new(&mut p, "enc", 3, 4, &mut r).unwrap();
        p.zero_all();
        let mut g = Graph::new(&p);
        let x = g.input(Tensor::filled(5, 3, 0.7));
        let out = bi.forward(&mut g, x).unwrap();
        assert_eq!(g.shape(out.states), (5, 8));
        assert!(g.value(out.states).data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn one_step_matches_hand_algebra() {
        // hidden 2, input 1: w_input = [[1, 0, 0.5, 0, 1, -1, 2, 0.5]], bias zero
        let mut p = ParamSet::new();
        let w = Tensor::from_vec(1, 8, vec![1.0, 0.0, 0.5, 0.0, 1.0, -1.0, 2.0, 0.5]).unwrap();
        p.add("l.w_input", w).unwrap();
        p.add("l.w_hidden", Tensor::zeros(2, 8)).unwrap();
        p.add("l.bias", Tensor::zeros(1, 8)).unwrap();
        let lstm = LstmParams::bind(&p, "l", 1, 2).unwrap();
        let mut g = Graph::new(&p);
        let x = g.input(Tensor::scalar(0.8));
        let out = lstm.forward(&mut g, x, Direction::Forward).unwrap();
        let x = 0.8f64;
        let i = [sigmoid(x), sigmoid(0.0)];
        let o = [sigmoid(x), sigmoid(-x)];
        let c = [i[0] * (2.0 * x).tanh(), i[1] * (0.5 * x).tanh()];
        let h = [o[0] * c[0].tanh(), o[1] * c[1].tanh()];
        let got = g.value(out).data();
        assert!((got[0] - h[0]).abs() < 1e-15 && (got[1] - h[1]).abs() < 1e-15);
    }

    #[test]
    fn backward_direction_aligns_with_positions() {
        let mut p = ParamSet::new();
        let mut r = rng::stream(1, "t", 0);
        let lstm = LstmParams::new(&mut p, "l", 2, 3, &mut r).unwrap();
        let seq = Tensor::from_vec(4, 2, vec![0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8]).unwrap();
        let rev = Tensor::from_vec(4, 2, vec![0.7, 0.8, 0.5, -0.6, -0.3, 0.4, 0.1, 0.2]).unwrap();
        let mut g = Graph::new(&p);
        let a = g.input(seq);
        let b = g.input(rev);
        let back = lstm.forward(&mut g, a, Direction::Backward).unwrap();
        let fwd_rev = lstm.forward(&mut g, b, Direction::Forward).unwrap();
        let mut expected = rows(&g, fwd_rev);
        expected.reverse();
        assert_eq!(rows(&g, back), expected);
    }

    #[test]
    fn fused_matches_composite() {
        let mut p = ParamSet::new();
        let mut r = rng::stream(4, "t", 0);
        let lstm = LstmParams::new(&mut p, "l", 3, 4, &mut r).unwrap();
        let data: Vec<f64> = (0..15).map(|k| ((k * 7 % 11) as f64 - 5.0) / 4.0).collect();
        let seq = Tensor::from_vec(5, 3, data).unwrap();
        let weights = Tensor::from_vec(5, 4, (0..20).map(|k| (k as f64 * 0.37).sin()).collect()).unwrap();
        for dir in [Direction::Forward, Direction::Backward] {
            let run = |fused: bool| {
                let mut g = Graph::new(&p);
                let x = g.input(seq.clone());
                let out = if fused {
                    lstm.forward(&mut g, x, dir).unwrap()
                } else {
                    composite(&lstm, &mut g, x, dir)
                };
                let w = g.input(weights.clone());
                let prod = g.mul(out, w).unwrap();
                let loss = g.sum(prod).unwrap();
                let value = g.value(out).clone();
                (value, g.backward(loss).unwrap())
            };
            let (va, ga) = run(true);
            let (vb, gb) = run(false);
            for (a, b) in va.data().iter().zip(vb.data()) {
                assert!((a - b).abs() < 1e-14);
            }
            for id in [lstm.w_input, lstm.w_hidden, lstm.bias] {
                let (a, b) = (ga.get(id).unwrap(), gb.get(id).unwrap());
                for (x, y) in a.data().iter().zip(b.data()) {
                    assert!((x - y).abs() < 1e-12, "{x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn bilstm_width_is_twice_hidden() {
        let mut p = ParamSet::new();
        let mut r = rng::stream(2, "t", 0);
        let bi = BiLstm::new(&mut p, "enc", 4, 256, &mut r).unwrap();
        let mut g = Graph::new(&p);
        let x = g.input(Tensor::filled(2, 4, 0.1));
        let out = bi.forward(&mut g, x).unwrap();
        assert_eq!(g.shape(out.states), (2, 512));
    }

    #[test]
    fn empty_sequence_is_error() {
        let mut p = ParamSet::new();
        let mut r = rng::stream(3, "t", 0);
        let lstm = LstmParams::new(&mut p, "l", 2, 2, &mut r).unwrap();
        let mut g = Graph::new(&p);
        let x = g.input(Tensor::zeros(0, 2));
        assert!(lstm.forward(&mut g, x, Direction::Forward).is_err());
    }
}
