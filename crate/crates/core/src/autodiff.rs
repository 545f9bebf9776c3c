//! Minimal reverse-mode differentiation over [`Tensor`] values.
//!
//! Model code is written once against [`Ops`] and runs either on [`Eval`]
//! (plain forward evaluation) or on [`Tape`] (records every operation so a
//! scalar result can be differentiated with respect to the parameters).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::tensor::{self, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Named trainable tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Arc<Tensor>>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.values.push(Arc::new(value));
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub(crate) fn shared(&self, id: ParamId) -> Arc<Tensor> {
        Arc::clone(&self.values[id.0])
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        Arc::make_mut(&mut self.values[id.0])
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    /// Total number of scalar coordinates.
    pub fn n_scalars(&self) -> usize {
        self.values.iter().map(|t| t.len()).sum()
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.values.iter().map(|t| t.as_ref())
    }

    pub fn zeros_like(&self) -> Gradients {
        Gradients {
            grads: self
                .values
                .iter()
                .map(|t| Tensor::zeros(t.rows(), t.cols()))
                .collect(),
        }
    }
}

/// One gradient tensor per parameter, aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.grads[id.0]
    }

    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            a.add_scaled(b, scale);
        }
    }

    pub fn scale(&mut self, c: f64) {
        for g in &mut self.grads {
            g.data_mut().iter_mut().for_each(|x| *x *= c);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.grads.iter().flat_map(|g| g.data().iter().copied()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().all(|g| g.data().iter().all(|x| x.is_finite()))
    }
}

/// Operations available to model code.
pub trait Ops {
    type Node: Clone;

    fn param(&mut self, id: ParamId) -> Self::Node;
    fn constant(&mut self, value: Tensor) -> Self::Node;
    fn value<'a>(&'a self, node: &'a Self::Node) -> &'a Tensor;

    fn matmul(&mut self, a: &Self::Node, b: &Self::Node) -> Self::Node;
    /// `a * b^T`
    fn matmul_nt(&mut self, a: &Self::Node, b: &Self::Node) -> Self::Node;
    fn add(&mut self, a: &Self::Node, b: &Self::Node) -> Self::Node;
    fn mul(&mut self, a: &Self::Node, b: &Self::Node) -> Self::Node;
    fn scale(&mut self, a: &Self::Node, c: f64) -> Self::Node;
    fn sigmoid(&mut self, a: &Self::Node) -> Self::Node;
    fn tanh(&mut self, a: &Self::Node) -> Self::Node;
    fn concat_cols(&mut self, parts: &[Self::Node]) -> Self::Node;
    fn slice_cols(&mut self, a: &Self::Node, start: usize, len: usize) -> Self::Node;
    /// Stacks single-row nodes into a matrix.
    fn stack_rows(&mut self, rows: &[Self::Node]) -> Self::Node;
    fn select_row(&mut self, a: &Self::Node, row: usize) -> Self::Node;
    /// Row-wise.
    fn softmax(&mut self, a: &Self::Node) -> Self::Node;
    /// Row-wise.
    fn log_softmax(&mut self, a: &Self::Node) -> Self::Node;
    /// Scalar `sum_k w_k * a.data[i_k]` over flat indices.
    fn weighted_sum(&mut self, a: &Self::Node, weights: &[(usize, f64)]) -> Self::Node;
}

/// Forward-only evaluation.
pub struct Eval<'p> {
    params: &'p ParamStore,
}

impl<'p> Eval<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Eval { params }
    }
}

fn concat(parts: &[&Tensor]) -> Tensor {
    let rows = parts[0].rows();
    let cols: usize = parts.iter().map(|p| p.cols()).sum();
    let mut out = Tensor::zeros(rows, cols);
    for r in 0..rows {
        let mut offset = 0;
        let out_row = out.row_mut(r);
        for p in parts {
            assert_eq!(p.rows(), rows, "concat_cols row mismatch");
            out_row[offset..offset + p.cols()].copy_from_slice(p.row(r));
            offset += p.cols();
        }
    }
    out
}

fn slice(a: &Tensor, start: usize, len: usize) -> Tensor {
    let mut out = Tensor::zeros(a.rows(), len);
    for r in 0..a.rows() {
        out.row_mut(r).copy_from_slice(&a.row(r)[start..start + len]);
    }
    out
}

fn stack(rows: &[&Tensor]) -> Tensor {
    let cols = rows[0].cols();
    let mut data = Vec::with_capacity(rows.len() * cols);
    for r in rows {
        assert_eq!(r.shape(), (1, cols), "stack_rows expects 1x{cols} rows");
        data.extend_from_slice(r.data());
    }
    Tensor::from_vec(rows.len(), cols, data)
}

fn row_wise(a: &Tensor, f: fn(&[f64]) -> Vec<f64>) -> Tensor {
    let mut data = Vec::with_capacity(a.len());
    for r in 0..a.rows() {
        data.extend(f(a.row(r)));
    }
    Tensor::from_vec(a.rows(), a.cols(), data)
}

fn weighted(a: &Tensor, weights: &[(usize, f64)]) -> Tensor {
    let s = weights.iter().map(|&(i, w)| w * a.data()[i]).sum();
    Tensor::from_vec(1, 1, vec![s])
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Ops for Eval<'_> {
    type Node = Arc<Tensor>;

    fn param(&mut self, id: ParamId) -> Self::Node {
        self.params.shared(id)
    }
    fn constant(&mut self, value: Tensor) -> Self::Node {
        Arc::new(value)
    }
    fn value<'a>(&'a self, node: &'a Self::Node) -> &'a Tensor {
        node
    }
    fn matmul(&mut self, a: &Self::Node, b: &Self::Node) -> Self::Node {
        Arc::new(a.matmul(b))
    }
    fn matmul_nt(&mut self, a: &Self::Node, b: &Self::Node) -> Self::Node {
        Arc::new(a.matmul_nt(b))
    }
    fn add(&mut self, a: &Self::Node, b: &Self::Node) -> Self::Node {
        Arc::new(a.zip_map(b, |x, y| x + y))
    }
    fn mul(&mut self, a: &Self::Node, b: &Self::Node) -> Self::Node {
        Arc::new(a.zip_map(b, |x, y| x * y))
    }
    fn scale(&mut self, a: &Self::Node, c: f64) -> Self::Node {
        Arc::new(a.map(|x| c * x))
    }
    fn sigmoid(&mut self, a: &Self::Node) -> Self::Node {
        Arc::new(a.map(sigmoid))
    }
    fn tanh(&mut self, a: &Self::Node) -> Self::Node {
        Arc::new(a.map(f64::tanh))
    }
    fn concat_cols(&mut self, parts: &[Self::Node]) -> Self::Node {
        let refs: Vec<&Tensor> = parts.iter().map(|p| p.as_ref()).collect();
        Arc::new(concat(&refs))
    }
    fn slice_cols(&mut self, a: &Self::Node, start: usize, len: usize) -> Self::Node {
        Arc::new(slice(a, start, len))
    }
    fn stack_rows(&mut self, rows: &[Self::Node]) -> Self::Node {
        let refs: Vec<&Tensor> = rows.iter().map(|p| p.as_ref()).collect();
        Arc::new(stack(&refs))
    }
    fn select_row(&mut self, a: &Self::Node, row: usize) -> Self::Node {
        Arc::new(Tensor::row_vector(a.row(row).to_vec()))
    }
    fn softmax(&mut self, a: &Self::Node) -> Self::Node {
        Arc::new(row_wise(a, tensor::softmax))
    }
    fn log_softmax(&mut self, a: &Self::Node) -> Self::Node {
        Arc::new(row_wise(a, tensor::log_softmax))
    }
    fn weighted_sum(&mut self, a: &Self::Node, weights: &[(usize, f64)]) -> Self::Node {
        Arc::new(weighted(a, weights))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Param(ParamId),
    Constant,
    MatMul(usize, usize),
    MatMulNt(usize, usize),
    Add(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Sigmoid(usize),
    Tanh(usize),
    Concat(Vec<usize>),
    Slice(usize, usize),
    Stack(Vec<usize>),
    SelectRow(usize, usize),
    Softmax(usize),
    LogSoftmax(usize),
    Weighted(usize, Vec<(usize, f64)>),
}

struct Entry {
    value: Arc<Tensor>,
    op: Op,
}

/// Recording evaluator. Each parameter is materialized at most once per tape
/// so its gradient accumulates in one place.
pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Entry>,
    param_nodes: Vec<Option<usize>>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            param_nodes: vec![None; params.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Entry {
            value: Arc::new(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn val(&self, v: usize) -> &Tensor {
        &self.nodes[v].value
    }

    /// Accumulates `scale * d(root)/d(params)` into `grads`. `root` must be
    /// a 1x1 node.
    pub fn backward(&self, root: &Var, scale: f64, grads: &mut Gradients) {
        assert_eq!(self.val(root.0).shape(), (1, 1), "backward from non-scalar");
        let mut adj: Vec<Option<Tensor>> = (0..=root.0).map(|_| None).collect();
        adj[root.0] = Some(Tensor::from_vec(1, 1, vec![scale]));

        for i in (0..=root.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Constant => {}
                Op::Param(id) => grads.get_mut(*id).add_scaled(&g, 1.0),
                Op::MatMul(a, b) => {
                    let (a, b) = (*a, *b);
                    let ga = g.matmul_nt(self.val(b));
                    accumulate(&mut adj, self, a, |t| t.add_scaled(&ga, 1.0));
                    let av = Arc::clone(&self.nodes[a].value);
                    accumulate(&mut adj, self, b, |t| t.add_matmul_tn(&av, &g));
                }
                Op::MatMulNt(a, b) => {
                    let (a, b) = (*a, *b);
                    let ga = g.matmul(self.val(b));
                    accumulate(&mut adj, self, a, |t| t.add_scaled(&ga, 1.0));
                    let av = Arc::clone(&self.nodes[a].value);
                    accumulate(&mut adj, self, b, |t| t.add_matmul_tn(&g, &av));
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj, self, *a, |t| t.add_scaled(&g, 1.0));
                    accumulate(&mut adj, self, *b, |t| t.add_scaled(&g, 1.0));
                }
                Op::Mul(a, b) => {
                    let ga = g.zip_map(self.val(*b), |x, y| x * y);
                    let gb = g.zip_map(self.val(*a), |x, y| x * y);
                    accumulate(&mut adj, self, *a, |t| t.add_scaled(&ga, 1.0));
                    accumulate(&mut adj, self, *b, |t| t.add_scaled(&gb, 1.0));
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    accumulate(&mut adj, self, *a, |t| t.add_scaled(&g, c));
                }
                Op::Sigmoid(a) => {
                    let d = g.zip_map(self.val(i), |g, y| g * y * (1.0 - y));
                    accumulate(&mut adj, self, *a, |t| t.add_scaled(&d, 1.0));
                }
                Op::Tanh(a) => {
                    let d = g.zip_map(self.val(i), |g, y| g * (1.0 - y * y));
                    accumulate(&mut adj, self, *a, |t| t.add_scaled(&d, 1.0));
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.val(p).cols();
                        let part = slice(&g, offset, w);
                        accumulate(&mut adj, self, p, |t| t.add_scaled(&part, 1.0));
                        offset += w;
                    }
                }
                Op::Slice(a, start) => {
                    let start = *start;
                    accumulate(&mut adj, self, *a, |t| {
                        for r in 0..g.rows() {
                            for (o, &x) in t.row_mut(r)[start..start + g.cols()].iter_mut().zip(g.row(r)) {
                                *o += x;
                            }
                        }
                    });
                }
                Op::Stack(rows) => {
                    for (r, &p) in rows.iter().enumerate() {
                        accumulate(&mut adj, self, p, |t| {
                            for (o, &x) in t.data_mut().iter_mut().zip(g.row(r)) {
                                *o += x;
                            }
                        });
                    }
                }
                Op::SelectRow(a, row) => {
                    let row = *row;
                    accumulate(&mut adj, self, *a, |t| {
                        for (o, &x) in t.row_mut(row).iter_mut().zip(g.data()) {
                            *o += x;
                        }
                    });
                }
                Op::Softmax(a) => {
                    let y = self.val(i);
                    let mut d = Tensor::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let gy = tensor::dot(g.row(r), y.row(r));
                        for ((o, &gi), &yi) in d.row_mut(r).iter_mut().zip(g.row(r)).zip(y.row(r)) {
                            *o = yi * (gi - gy);
                        }
                    }
                    accumulate(&mut adj, self, *a, |t| t.add_scaled(&d, 1.0));
                }
                Op::LogSoftmax(a) => {
                    let y = self.val(i);
                    let mut d = Tensor::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let gs: f64 = g.row(r).iter().sum();
                        for ((o, &gi), &yi) in d.row_mut(r).iter_mut().zip(g.row(r)).zip(y.row(r)) {
                            *o = gi - yi.exp() * gs;
                        }
                    }
                    accumulate(&mut adj, self, *a, |t| t.add_scaled(&d, 1.0));
                }
                Op::Weighted(a, weights) => {
                    let s = g.scalar();
                    accumulate(&mut adj, self, *a, |t| {
                        let data = t.data_mut();
                        for &(k, w) in weights {
                            data[k] += s * w;
                        }
                    });
                }
            }
        }
    }
}

fn accumulate(adj: &mut [Option<Tensor>], tape: &Tape<'_>, node: usize, f: impl FnOnce(&mut Tensor)) {
    if matches!(tape.nodes[node].op, Op::Constant) {
        return;
    }
    let slot = adj[node].get_or_insert_with(|| {
        let (r, c) = tape.nodes[node].value.shape();
        Tensor::zeros(r, c)
    });
    f(slot);
}

impl Ops for Tape<'_> {
    type Node = Var;

    fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return Var(v);
        }
        self.nodes.push(Entry {
            value: self.params.shared(id),
            op: Op::Param(id),
        });
        let v = self.nodes.len() - 1;
        self.param_nodes[id.0] = Some(v);
        Var(v)
    }
    fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant)
    }
    fn value<'a>(&'a self, node: &'a Var) -> &'a Tensor {
        self.val(node.0)
    }
    fn matmul(&mut self, a: &Var, b: &Var) -> Var {
        let v = self.val(a.0).matmul(self.val(b.0));
        self.push(v, Op::MatMul(a.0, b.0))
    }
    fn matmul_nt(&mut self, a: &Var, b: &Var) -> Var {
        let v = self.val(a.0).matmul_nt(self.val(b.0));
        self.push(v, Op::MatMulNt(a.0, b.0))
    }
    fn add(&mut self, a: &Var, b: &Var) -> Var {
        let v = self.val(a.0).zip_map(self.val(b.0), |x, y| x + y);
        self.push(v, Op::Add(a.0, b.0))
    }
    fn mul(&mut self, a: &Var, b: &Var) -> Var {
        let v = self.val(a.0).zip_map(self.val(b.0), |x, y| x * y);
        self.push(v, Op::Mul(a.0, b.0))
    }
    fn scale(&mut self, a: &Var, c: f64) -> Var {
        let v = self.val(a.0).map(|x| c * x);
        self.push(v, Op::Scale(a.0, c))
    }
    fn sigmoid(&mut self, a: &Var) -> Var {
        let v = self.val(a.0).map(sigmoid);
        self.push(v, Op::Sigmoid(a.0))
    }
    fn tanh(&mut self, a: &Var) -> Var {
        let v = self.val(a.0).map(f64::tanh);
        self.push(v, Op::Tanh(a.0))
    }
    fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let refs: Vec<&Tensor> = parts.iter().map(|p| self.val(p.0)).collect();
        let v = concat(&refs);
        self.push(v, Op::Concat(parts.iter().map(|p| p.0).collect()))
    }
    fn slice_cols(&mut self, a: &Var, start: usize, len: usize) -> Var {
        let v = slice(self.val(a.0), start, len);
        self.push(v, Op::Slice(a.0, start))
    }
    fn stack_rows(&mut self, rows: &[Var]) -> Var {
        let refs: Vec<&Tensor> = rows.iter().map(|p| self.val(p.0)).collect();
        let v = stack(&refs);
        self.push(v, Op::Stack(rows.iter().map(|p| p.0).collect()))
    }
    fn select_row(&mut self, a: &Var, row: usize) -> Var {
        let v = Tensor::row_vector(self.val(a.0).row(row).to_vec());
        self.push(v, Op::SelectRow(a.0, row))
    }
    fn softmax(&mut self, a: &Var) -> Var {
        let v = row_wise(self.val(a.0), tensor::softmax);
        self.push(v, Op::Softmax(a.0))
    }
    fn log_softmax(&mut self, a: &Var) -> Var {
        let v = row_wise(self.val(a.0), tensor::log_softmax);
        self.push(v, Op::LogSoftmax(a.0))
    }
    fn weighted_sum(&mut self, a: &Var, weights: &[(usize, f64)]) -> Var {
        let v = weighted(self.val(a.0), weights);
        self.push(v, Op::Weighted(a.0, weights.to_vec()))
    }
}

/// Adaptive-moment optimizer over a [`ParamStore`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, params: &mut ParamStore, grads: &Gradients) {
        if self.m.is_empty() {
            self.m = params.tensors().map(|t| vec![0.0; t.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for id in params.ids().collect::<Vec<_>>() {
            let g = grads.get(id).data();
            let (m, v) = (&mut self.m[id.0], &mut self.v[id.0]);
            let p = params.get_mut(id).data_mut();
            for k in 0..p.len() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Builds a scalar from every op so one finite-difference sweep covers
    /// all backward rules.
    fn all_ops<O: Ops>(ops: &mut O, w: ParamId, e: ParamId) -> O::Node {
        let w = ops.param(w);
        let e = ops.param(e);
        let x = ops.select_row(&e, 1);
        let y = ops.select_row(&e, 2);
        let xy = ops.concat_cols(&[x.clone(), y.clone()]);
        let h = ops.matmul(&xy, &w);
        let s = ops.sigmoid(&h);
        let t = ops.tanh(&h);
        let m = ops.mul(&s, &t);
        let a = ops.add(&m, &h);
        let a = ops.scale(&a, 0.7);
        let left = ops.slice_cols(&a, 0, 2);
        let right = ops.slice_cols(&a, 1, 2);
        let mem = ops.stack_rows(&[left.clone(), right, x]);
        let scores = ops.matmul_nt(&left, &mem);
        let attn = ops.softmax(&scores);
        let ctx = ops.matmul(&attn, &mem);
        let lp = ops.log_softmax(&ctx);
        ops.weighted_sum(&lp, &[(0, -1.0), (1, 0.3)])
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = ParamStore::new();
        let w = params.add("w", Tensor::uniform(4, 3, 0.8, &mut rng));
        let e = params.add("e", Tensor::uniform(3, 2, 0.8, &mut rng));

        let mut tape = Tape::new(&params);
        let out = all_ops(&mut tape, w, e);
        let mut grads = params.zeros_like();
        tape.backward(&out, 1.0, &mut grads);

        let f = |p: &ParamStore| {
            let mut ev = Eval::new(p);
            let n = all_ops(&mut ev, w, e);
            n.scalar()
        };
        let h = 1e-5;
        for id in [w, e] {
            for k in 0..params.get(id).len() {
                let mut plus = params.clone();
                plus.get_mut(id).data_mut()[k] += h;
                let mut minus = params.clone();
                minus.get_mut(id).data_mut()[k] -= h;
                let numeric = (f(&plus) - f(&minus)) / (2.0 * h);
                let analytic = grads.get(id).data()[k];
                assert!((numeric - analytic).abs() < 1e-8, "{} [{k}]: {analytic} vs {numeric}", params.name(id));
            }
        }
    }

    #[test]
    fn eval_and_tape_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut params = ParamStore::new();
        let w = params.add("w", Tensor::uniform(4, 3, 0.8, &mut rng));
        let e = params.add("e", Tensor::uniform(3, 2, 0.8, &mut rng));
        let mut tape = Tape::new(&params);
        let a = all_ops(&mut tape, w, e);
        let mut ev = Eval::new(&params);
        let b = all_ops(&mut ev, w, e);
        assert_eq!(tape.value(&a).scalar(), b.scalar());
    }

    #[test]
    fn adam_descends_a_quadratic() {
        let mut params = ParamStore::new();
        let x = params.add("x", Tensor::row_vector(vec![3.0, -2.0]));
        let mut opt = Adam::new(0.1);
        for _ in 0..500 {
            let mut g = params.zeros_like();
            let v = params.get(x).clone();
            g.get_mut(x).data_mut().copy_from_slice(&[2.0 * v.data()[0], 2.0 * v.data()[1]]);
            opt.update(&mut params, &g);
        }
        assert!(params.get(x).data().iter().all(|v| v.abs() < 1e-2));
        assert_eq!(opt.steps(), 500);
    }
}
