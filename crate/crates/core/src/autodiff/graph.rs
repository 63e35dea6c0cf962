use super::crf;
use super::params::{Gradients, ParamId, ParamSet};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize, usize),
    RowSelect(Var, Vec<usize>),
    Tanh(Var),
    Sigmoid(Var),
    LogSigmoid(Var),
    LogSoftmax(Var),
    Sum(Var),
    Mean(Var),
    Gather(Var, Vec<(usize, usize)>),
    CrfNll {
        emissions: Var,
        transitions: Var,
        gold: Vec<usize>,
    },
    Lstm(Box<LstmTape>),
}

/// Activations kept by a fused LSTM pass for its backward sweep.
#[derive(Debug, Clone)]
struct LstmTape {
    proj: Var,
    w_hidden: Var,
    reverse: bool,
    /// `T × 4h`, post-activation `[i, f, o, g]` per position.
    gates: Tensor,
    /// `T × h` cell states.
    cells: Tensor,
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param(_) => "param",
            Op::MatMul(..) => "matmul",
            Op::Transpose(_) => "transpose",
            Op::Add(..) => "add",
            Op::AddRow(..) => "add_row",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::ConcatCols(_) => "concat_cols",
            Op::ConcatRows(_) => "concat_rows",
            Op::SliceCols(..) => "slice_cols",
            Op::RowSelect(..) => "row_select",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::LogSigmoid(_) => "log_sigmoid",
            Op::LogSoftmax(_) => "log_softmax",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
            Op::Gather(..) => "gather",
            Op::CrfNll { .. } => "crf_nll",
            Op::Lstm(_) => "lstm",
        }
    }
}

struct Node {
    op: Op,
    /// Empty for parameter nodes, whose value lives in the `ParamSet`.
    value: Tensor,
}

/// Tape of operations recorded in creation (topological) order.
pub struct Graph<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log σ(x)`, stable for large |x|.
pub(crate) fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn shape_err(op: &'static str, detail: String) -> Error {
    Error::Shape { op, detail }
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
            param_vars: vec![None; params.len()],
        }
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor) -> Result<Var> {
        if cfg!(debug_assertions) && !value.is_finite() {
            return Err(Error::NonFinite(op.name().into()));
        }
        self.nodes.push(Node { op, value });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match self.nodes[v.0].op {
            Op::Param(id) => self.params.value(id),
            _ => &self.nodes[v.0].value,
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            op: Op::Input,
            value: t,
        });
        Var(self.nodes.len() - 1)
    }

    /// Node for a parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.index()] {
            return v;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: Tensor::zeros(0, 0),
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.index()] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.cols() != y.rows() {
            return Err(shape_err("matmul", format!("{:?} x {:?}", x.shape(), y.shape())));
        }
        let out = x.matmul(y);
        self.push(Op::MatMul(a, b), out)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose();
        self.push(Op::Transpose(a), out)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (x, y) = (self.shape(a), self.shape(b));
        if x != y {
            return Err(shape_err(op, format!("{x:?} vs {y:?}")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        self.push(Op::Add(a, b), out)
    }

    /// Add a `1 × c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (x, r) = (self.value(a), self.value(row));
        if r.rows() != 1 || r.cols() != x.cols() {
            return Err(shape_err("add_row", format!("{:?} + {:?}", x.shape(), r.shape())));
        }
        let mut out = x.clone();
        let c = x.cols();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v += r.data()[i % c];
        }
        self.push(Op::AddRow(a, row), out)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let y = self.value(b).data();
        let mut out = self.value(a).clone();
        for (o, v) in out.data_mut().iter_mut().zip(y) {
            *o *= v;
        }
        self.push(Op::Mul(a, b), out)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let out = self.value(a).map(|v| v * s);
        self.push(Op::Scale(a, s), out)
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.scale(a, -1.0)
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Result<Var> {
        let out = self.value(a).map(|v| v + s);
        self.push(Op::AddScalar(a), out)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map_or(0, |p| self.shape(*p).0);
        if parts.is_empty() || parts.iter().any(|p| self.shape(*p).0 != rows) {
            let shapes: Vec<_> = parts.iter().map(|p| self.shape(*p)).collect();
            return Err(shape_err("concat_cols", format!("{shapes:?}")));
        }
        let cols: usize = parts.iter().map(|p| self.shape(*p).1).sum();
        let mut out = Tensor::zeros(rows, cols);
        let mut off = 0;
        for p in parts {
            let v = self.value(*p);
            for r in 0..rows {
                out.data_mut()[r * cols + off..r * cols + off + v.cols()].copy_from_slice(v.row_slice(r));
            }
            off += v.cols();
        }
        self.push(Op::ConcatCols(parts.to_vec()), out)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts.first().map_or(0, |p| self.shape(*p).1);
        if parts.is_empty() || parts.iter().any(|p| self.shape(*p).1 != cols) {
            let shapes: Vec<_> = parts.iter().map(|p| self.shape(*p)).collect();
            return Err(shape_err("concat_rows", format!("{shapes:?}")));
        }
        let mut data = Vec::new();
        for p in parts {
            data.extend_from_slice(self.value(*p).data());
        }
        let rows = data.len() / cols.max(1);
        let out = Tensor::from_vec(rows, cols, data)?;
        self.push(Op::ConcatRows(parts.to_vec()), out)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let x = self.value(a);
        if start >= end || end > x.cols() {
            return Err(shape_err("slice_cols", format!("{start}..{end} of {:?}", x.shape())));
        }
        let mut data = Vec::with_capacity(x.rows() * (end - start));
        for r in 0..x.rows() {
            data.extend_from_slice(&x.row_slice(r)[start..end]);
        }
        let out = Tensor::from_vec(x.rows(), end - start, data)?;
        self.push(Op::SliceCols(a, start, end), out)
    }

    /// Gather rows of `a` (embedding lookup).
    pub fn row_select(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let x = self.value(a);
        if let Some(bad) = rows.iter().find(|r| **r >= x.rows()) {
            return Err(shape_err("row_select", format!("row {bad} of {:?}", x.shape())));
        }
        let mut data = Vec::with_capacity(rows.len() * x.cols());
        for r in rows {
            data.extend_from_slice(x.row_slice(*r));
        }
        let out = Tensor::from_vec(rows.len(), x.cols(), data)?;
        self.push(Op::RowSelect(a, rows.to_vec()), out)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), out)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), out)
    }

    pub fn log_sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(log_sigmoid);
        self.push(Op::LogSigmoid(a), out)
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let mut out = x.clone();
        let c = x.cols();
        for row in out.data_mut().chunks_mut(c.max(1)) {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            for v in row.iter_mut() {
                *v -= lse;
            }
        }
        self.push(Op::LogSoftmax(a), out)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.push(Op::Sum(a), Tensor::scalar(s))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.is_empty() {
            return Err(shape_err("mean", "empty tensor".into()));
        }
        let s = x.data().iter().sum::<f64>() / x.len() as f64;
        self.push(Op::Mean(a), Tensor::scalar(s))
    }

    /// Pick single cells into a `1 × k` row.
    pub fn gather(&mut self, a: Var, cells: &[(usize, usize)]) -> Result<Var> {
        let x = self.value(a);
        if let Some(bad) = cells.iter().find(|(r, c)| *r >= x.rows() || *c >= x.cols()) {
            return Err(shape_err("gather", format!("cell {bad:?} of {:?}", x.shape())));
        }
        let data: Vec<f64> = cells.iter().map(|(r, c)| x.get(*r, *c)).collect();
        let out = Tensor::row(data);
        self.push(Op::Gather(a, cells.to_vec()), out)
    }

    /// Negative log-likelihood of `gold` under a linear-chain CRF whose
    /// first tag is forced to be tag 0.
    pub fn crf_nll(&mut self, emissions: Var, transitions: Var, gold: &[usize]) -> Result<Var> {
        let (e, t) = (self.value(emissions), self.value(transitions));
        let k = e.cols();
        if t.shape() != (k, k) || gold.len() != e.rows() || e.rows() == 0 {
            return Err(shape_err(
                "crf_nll",
                format!("emissions {:?}, transitions {:?}, gold {}", e.shape(), t.shape(), gold.len()),
            ));
        }
        if gold[0] != 0 || gold.iter().any(|g| *g >= k) {
            return Err(Error::Invalid("gold tags must start with tag 0 and be in range".into()));
        }
        let nll = crf::log_partition(e, t) - crf::score(e, t, gold);
        self.push(
            Op::CrfNll {
                emissions,
                transitions,
                gold: gold.to_vec(),
            },
            Tensor::scalar(nll),
        )
    }

    /// One LSTM direction over pre-projected inputs `proj` (`T × 4h`, bias
    /// included) with recurrent weights `w_hidden` (`h × 4h`). Gates are
    /// packed `[input, forget, output, candidate]`. Row `t` of the `T × h`
    /// result is the state after reading position `t`; with `reverse` the
    /// sequence is read right to left.
    pub fn lstm(&mut self, proj: Var, w_hidden: Var, reverse: bool) -> Result<Var> {
        let (z, w) = (self.value(proj), self.value(w_hidden));
        let (steps, h) = (z.rows(), w.rows());
        if w.cols() != 4 * h || z.cols() != 4 * h || steps == 0 {
            return Err(shape_err("lstm", format!("proj {:?}, w_hidden {:?}", z.shape(), w.shape())));
        }
        let mut gates = Tensor::zeros(steps, 4 * h);
        let mut cells = Tensor::zeros(steps, h);
        let mut hidden = Tensor::zeros(steps, h);
        let mut prev: Option<usize> = None;
        let mut pre = vec![0.0; 4 * h];
        for k in 0..steps {
            let t = if reverse { steps - 1 - k } else { k };
            pre.copy_from_slice(z.row_slice(t));
            if let Some(p) = prev {
                for (j, hv) in hidden.row_slice(p).iter().enumerate() {
                    if *hv == 0.0 {
                        continue;
                    }
                    for (o, wv) in pre.iter_mut().zip(w.row_slice(j)) {
                        *o += hv * wv;
                    }
                }
            }
            let grow = &mut gates.data_mut()[t * 4 * h..(t + 1) * 4 * h];
            for (o, v) in grow[..3 * h].iter_mut().zip(&pre[..3 * h]) {
                *o = sigmoid(*v);
            }
            for (o, v) in grow[3 * h..].iter_mut().zip(&pre[3 * h..]) {
                *o = v.tanh();
            }
            for j in 0..h {
                let g = &gates.data()[t * 4 * h..(t + 1) * 4 * h];
                let mut c = g[j] * g[3 * h + j];
                if let Some(p) = prev {
                    c += g[h + j] * cells.data()[p * h + j];
                }
                cells.data_mut()[t * h + j] = c;
                hidden.data_mut()[t * h + j] = g[2 * h + j] * c.tanh();
            }
            prev = Some(t);
        }
        let tape = LstmTape {
            proj,
            w_hidden,
            reverse,
            gates,
            cells,
        };
        self.push(Op::Lstm(Box::new(tape)), hidden)
    }

    fn lstm_backward(&self, tape: &LstmTape, y: &Tensor, gy: &Tensor) -> (Tensor, Tensor) {
        let w = self.value(tape.w_hidden);
        let (steps, h) = (y.rows(), y.cols());
        let mut gproj = Tensor::zeros(steps, 4 * h);
        let mut gw = Tensor::zeros(h, 4 * h);
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        for k in (0..steps).rev() {
            let t = if tape.reverse { steps - 1 - k } else { k };
            let prev = (k > 0).then(|| if tape.reverse { t + 1 } else { t - 1 });
            let g = tape.gates.row_slice(t);
            let c = tape.cells.row_slice(t);
            for j in 0..h {
                let dh = gy.data()[t * h + j] + dh_next[j];
                let tc = c[j].tanh();
                let (i, f, o, cand) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
                let c_prev = prev.map_or(0.0, |p| tape.cells.data()[p * h + j]);
                dz[j] = dc * cand * i * (1.0 - i);
                dz[h + j] = dc * c_prev * f * (1.0 - f);
                dz[2 * h + j] = dh * tc * o * (1.0 - o);
                dz[3 * h + j] = dc * i * (1.0 - cand * cand);
                dc_next[j] = dc * f;
            }
            gproj.data_mut()[t * 4 * h..(t + 1) * 4 * h].copy_from_slice(&dz);
            match prev {
                Some(p) => {
                    let h_prev = y.row_slice(p);
                    for (j, hv) in h_prev.iter().enumerate() {
                        let wrow = w.row_slice(j);
                        dh_next[j] = wrow.iter().zip(&dz).map(|(a, b)| a * b).sum();
                        if *hv != 0.0 {
                            for (o, d) in gw.data_mut()[j * 4 * h..(j + 1) * 4 * h].iter_mut().zip(&dz) {
                                *o += hv * d;
                            }
                        }
                    }
                }
                None => dh_next.iter_mut().for_each(|v| *v = 0.0),
            }
        }
        (gproj, gw)
    }

    /// Reverse-mode sweep from a scalar `loss`; returns parameter gradients.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let mut grads = Gradients::zeros_like(self.params);
        self.backward_into(loss, &mut grads)?;
        Ok(grads)
    }

    /// Like [`Graph::backward`] but accumulates into `out`.
    pub fn backward_into(&self, loss: Var, out: &mut Gradients) -> Result<()> {
        if self.shape(loss) != (1, 1) {
            return Err(shape_err("backward", format!("loss shape {:?}", self.shape(loss))));
        }
        let mut g: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        g[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(grad) = g[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => out.accumulate(*id, &grad),
                op => self.apply_rule(op, &node.value, &grad, &mut g),
            }
        }
        Ok(())
    }

    fn apply_rule(&self, op: &Op, y: &Tensor, gy: &Tensor, g: &mut [Option<Tensor>]) {
        let acc = |g: &mut [Option<Tensor>], v: Var, t: Tensor| match &mut g[v.0] {
            Some(existing) => existing.add_assign(&t),
            slot => *slot = Some(t),
        };
        match op {
            Op::Input | Op::Param(_) => unreachable!(),
            Op::MatMul(a, b) => {
                let ga = gy.matmul_t(self.value(*b));
                let gb = self.value(*a).t_matmul(gy);
                acc(g, *a, ga);
                acc(g, *b, gb);
            }
            Op::Transpose(a) => acc(g, *a, gy.transpose()),
            Op::Add(a, b) => {
                acc(g, *a, gy.clone());
                acc(g, *b, gy.clone());
            }
            Op::AddRow(a, r) => {
                let c = gy.cols();
                let mut gr = Tensor::zeros(1, c);
                for (i, v) in gy.data().iter().enumerate() {
                    gr.data_mut()[i % c] += v;
                }
                acc(g, *a, gy.clone());
                acc(g, *r, gr);
            }
            Op::Mul(a, b) => {
                let (x, z) = (self.value(*a), self.value(*b));
                let mut ga = gy.clone();
                for (o, v) in ga.data_mut().iter_mut().zip(z.data()) {
                    *o *= v;
                }
                let mut gb = gy.clone();
                for (o, v) in gb.data_mut().iter_mut().zip(x.data()) {
                    *o *= v;
                }
                acc(g, *a, ga);
                acc(g, *b, gb);
            }
            Op::Scale(a, s) => acc(g, *a, gy.map(|v| v * s)),
            Op::AddScalar(a) => acc(g, *a, gy.clone()),
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for p in parts {
                    let w = self.shape(*p).1;
                    let mut gp = Tensor::zeros(gy.rows(), w);
                    for r in 0..gy.rows() {
                        gp.data_mut()[r * w..(r + 1) * w].copy_from_slice(&gy.row_slice(r)[off..off + w]);
                    }
                    off += w;
                    acc(g, *p, gp);
                }
            }
            Op::ConcatRows(parts) => {
                let c = gy.cols();
                let mut off = 0;
                for p in parts {
                    let h = self.shape(*p).0;
                    let gp = Tensor::from_vec(h, c, gy.data()[off * c..(off + h) * c].to_vec())
                        .expect("shape recorded at forward");
                    off += h;
                    acc(g, *p, gp);
                }
            }
            Op::SliceCols(a, start, end) => {
                let (rows, cols) = self.shape(*a);
                let mut ga = Tensor::zeros(rows, cols);
                for r in 0..rows {
                    ga.data_mut()[r * cols + start..r * cols + end].copy_from_slice(gy.row_slice(r));
                }
                acc(g, *a, ga);
            }
            Op::RowSelect(a, rows) => {
                let (n, cols) = self.shape(*a);
                let mut ga = Tensor::zeros(n, cols);
                for (k, r) in rows.iter().enumerate() {
                    for (o, v) in ga.data_mut()[r * cols..(r + 1) * cols].iter_mut().zip(gy.row_slice(k)) {
                        *o += v;
                    }
                }
                acc(g, *a, ga);
            }
            Op::Tanh(a) => {
                let mut ga = gy.clone();
                for (o, t) in ga.data_mut().iter_mut().zip(y.data()) {
                    *o *= 1.0 - t * t;
                }
                acc(g, *a, ga);
            }
            Op::Sigmoid(a) => {
                let mut ga = gy.clone();
                for (o, s) in ga.data_mut().iter_mut().zip(y.data()) {
                    *o *= s * (1.0 - s);
                }
                acc(g, *a, ga);
            }
            Op::LogSigmoid(a) => {
                let mut ga = gy.clone();
                for (o, x) in ga.data_mut().iter_mut().zip(self.value(*a).data()) {
                    *o *= sigmoid(-x);
                }
                acc(g, *a, ga);
            }
            Op::LogSoftmax(a) => {
                let c = y.cols();
                let mut ga = gy.clone();
                for (grow, yrow) in ga.data_mut().chunks_mut(c).zip(y.data().chunks(c)) {
                    let total: f64 = grow.iter().sum();
                    for (o, lv) in grow.iter_mut().zip(yrow) {
                        *o -= lv.exp() * total;
                    }
                }
                acc(g, *a, ga);
            }
            Op::Sum(a) => {
                let (r, c) = self.shape(*a);
                acc(g, *a, Tensor::filled(r, c, gy.item()));
            }
            Op::Mean(a) => {
                let (r, c) = self.shape(*a);
                acc(g, *a, Tensor::filled(r, c, gy.item() / (r * c) as f64));
            }
            Op::Gather(a, cells) => {
                let (r, c) = self.shape(*a);
                let mut ga = Tensor::zeros(r, c);
                for (k, (i, j)) in cells.iter().enumerate() {
                    ga.data_mut()[i * c + j] += gy.data()[k];
                }
                acc(g, *a, ga);
            }
            Op::CrfNll {
                emissions,
                transitions,
                gold,
            } => {
                let (e, t) = (self.value(*emissions), self.value(*transitions));
                let (mut ge, mut gt) = crf::marginals(e, t);
                for (pos, tag) in gold.iter().enumerate() {
                    ge.data_mut()[pos * e.cols() + tag] -= 1.0;
                    if pos > 0 {
                        gt.data_mut()[gold[pos - 1] * t.cols() + tag] -= 1.0;
                    }
                }
                let s = gy.item();
                ge.scale_assign(s);
                gt.scale_assign(s);
                acc(g, *emissions, ge);
                acc(g, *transitions, gt);
            }
            Op::Lstm(tape) => {
                let (gproj, gw) = self.lstm_backward(tape, y, gy);
                acc(g, tape.proj, gproj);
                acc(g, tape.w_hidden, gw);
            }
        }
    }
}
