use std::sync::Arc;

use rand::Rng;

use super::neighborhood::{Aggregator, Neighborhood};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

const NO_SOURCE: u32 = u32::MAX;

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    OneMinus(Var),
    Concat(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Dropout(Var, Vec<T>),
    Aggregate {
        input: Var,
        graph: Arc<Neighborhood>,
        agg: Aggregator,
        /// For max: the input row that won each output element.
        argmax: Vec<u32>,
    },
    Sum(Var),
    Mse(Var, Tensor<T>),
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::AddRow(..) => "add_row",
            Op::OneMinus(..) => "one_minus",
            Op::Concat(..) => "concat",
            Op::Sigmoid(..) => "sigmoid",
            Op::Tanh(..) => "tanh",
            Op::Relu(..) => "relu",
            Op::Dropout(..) => "dropout",
            Op::Aggregate { .. } => "neighbor_aggregate",
            Op::Sum(..) => "sum",
            Op::Mse(..) => "mse_loss",
        }
    }
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Records primitives in evaluation order, so every input precedes its use.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    empty_max_rows: usize,
}

fn matmul_kernel<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
    out
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), empty_max_rows: 0 }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Output rows of max aggregations taken over an empty neighborhood.
    pub fn empty_max_rows(&self) -> usize {
        self.empty_max_rows
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, data: Vec<T>, shape: Vec<usize>, op: Op<T>) -> Result<Var> {
        let index = self.nodes.len();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: op.name(), node: index });
        }
        let requires_grad = match &op {
            Op::Leaf => false,
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::AddRow(a, b) | Op::Concat(a, b) => {
                self.nodes[a.0].requires_grad || self.nodes[b.0].requires_grad
            }
            Op::OneMinus(a)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Relu(a)
            | Op::Dropout(a, _)
            | Op::Sum(a)
            | Op::Mse(a, _)
            | Op::Aggregate { input: a, .. } => self.nodes[a.0].requires_grad,
        };
        let value = Tensor::new(shape, data)?;
        self.nodes.push(Node { value, op, requires_grad });
        Ok(Var(index))
    }

    fn dims2(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        let s = self.shape(v);
        if s.len() != 2 {
            return Err(Error::shape(op, format!("expected a 2-D tensor, got {s:?}")));
        }
        Ok((s[0], s[1]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2("matmul", a)?;
        let (k2, n) = self.dims2("matmul", b)?;
        if k != k2 {
            return Err(Error::shape("matmul", format!("{:?} x {:?}", self.shape(a), self.shape(b))));
        }
        let out = matmul_kernel(self.value(a).data(), self.value(b).data(), m, k, n);
        self.push(out, vec![m, n], Op::MatMul(a, b))
    }

    fn zip_same(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T, op: Op<T>) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(name, format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        let out = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| f(x, y)).collect();
        let shape = self.shape(a).to_vec();
        self.push(out, shape, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// `a[m, n] + bias[n]` broadcast over rows.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (m, n) = self.dims2("add_row", a)?;
        if self.shape(bias) != [n] {
            return Err(Error::shape("add_row", format!("{:?} + {:?}", self.shape(a), self.shape(bias))));
        }
        let b = self.value(bias).data();
        let mut out = self.value(a).data().to_vec();
        for row in out.chunks_exact_mut(n) {
            for (o, &x) in row.iter_mut().zip(b) {
                *o = *o + x;
            }
        }
        self.push(out, vec![m, n], Op::AddRow(a, bias))
    }

    /// `1 - a`.
    pub fn one_minus(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(|x| T::one() - x);
        let shape = v.shape().to_vec();
        self.push(v.into_data(), shape, Op::OneMinus(a))
    }

    /// Concatenation along the last axis of two 2-D tensors.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, p) = self.dims2("concat", a)?;
        let (m2, q) = self.dims2("concat", b)?;
        if m != m2 {
            return Err(Error::shape("concat", format!("{:?} ++ {:?}", self.shape(a), self.shape(b))));
        }
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let mut out = Vec::with_capacity(m * (p + q));
        for i in 0..m {
            out.extend_from_slice(&av[i * p..(i + 1) * p]);
            out.extend_from_slice(&bv[i * q..(i + 1) * q]);
        }
        self.push(out, vec![m, p + q], Op::Concat(a, b))
    }

    fn unary(&mut self, a: Var, f: impl Fn(T) -> T, op: Op<T>) -> Result<Var> {
        let v = self.value(a).map(f);
        let shape = v.shape().to_vec();
        self.push(v.into_data(), shape, op)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x.tanh(), Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| if x > T::zero() { x } else { T::zero() }, Op::Relu(a))
    }

    /// Inverted dropout with a freshly sampled mask. Rate 0 returns `a` itself.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: Var, rate: f64, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::invalid(format!("dropout rate {rate} outside [0, 1)")));
        }
        if rate == 0.0 {
            return Ok(a);
        }
        let keep = T::of(1.0 / (1.0 - rate));
        let mask: Vec<T> = (0..self.value(a).numel())
            .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
            .collect();
        let mask = Tensor::new(self.shape(a).to_vec(), mask)?;
        self.dropout_with_mask(a, mask)
    }

    /// Multiplies by a fixed, already scaled mask.
    pub fn dropout_with_mask(&mut self, a: Var, mask: Tensor<T>) -> Result<Var> {
        if mask.shape() != self.shape(a) {
            return Err(Error::shape("dropout", format!("mask {:?} for {:?}", mask.shape(), self.shape(a))));
        }
        let out = self.value(a).data().iter().zip(mask.data()).map(|(&x, &m)| x * m).collect();
        let shape = self.shape(a).to_vec();
        self.push(out, shape, Op::Dropout(a, mask.into_data()))
    }

    /// Aggregates neighbor rows. The input has `B * N` rows laid out as `B`
    /// consecutive blocks of the graph's `N` nodes; aggregation stays within
    /// a block. Empty neighborhoods yield zero rows for every aggregator.
    pub fn neighbor_aggregate(&mut self, h: Var, graph: &Arc<Neighborhood>, agg: Aggregator) -> Result<Var> {
        let (rows, d) = self.dims2("neighbor_aggregate", h)?;
        let n = graph.len();
        if n == 0 || rows % n != 0 {
            return Err(Error::shape(
                "neighbor_aggregate",
                format!("{rows} rows is not a multiple of {n} graph nodes"),
            ));
        }
        graph.warn_isolated_once(agg);
        let hv = self.value(h).data();
        let mut out = vec![T::zero(); rows * d];
        let mut argmax = Vec::new();
        if agg == Aggregator::Max {
            argmax = vec![NO_SOURCE; rows * d];
        }
        let mut empty_max = 0;
        for block in 0..rows / n {
            let base = block * n;
            for v in 0..n {
                let nbrs = graph.neighbors(v);
                let dst = &mut out[(base + v) * d..(base + v + 1) * d];
                match agg {
                    Aggregator::Sum | Aggregator::Mean => {
                        for &u in nbrs {
                            for (o, &x) in dst.iter_mut().zip(&hv[(base + u) * d..(base + u + 1) * d]) {
                                *o = *o + x;
                            }
                        }
                        if agg == Aggregator::Mean && !nbrs.is_empty() {
                            let c = T::of(nbrs.len() as f64);
                            dst.iter_mut().for_each(|o| *o = *o / c);
                        }
                    }
                    Aggregator::Max => {
                        if nbrs.is_empty() {
                            empty_max += 1;
                            continue;
                        }
                        for j in 0..d {
                            // Neighbor lists are ascending, so strict '>' keeps the lowest index on ties.
                            let mut best = nbrs[0];
                            for &u in &nbrs[1..] {
                                if hv[(base + u) * d + j] > hv[(base + best) * d + j] {
                                    best = u;
                                }
                            }
                            dst[j] = hv[(base + best) * d + j];
                            argmax[(base + v) * d + j] = (base + best) as u32;
                        }
                    }
                }
            }
        }
        self.empty_max_rows += empty_max;
        self.push(
            out,
            vec![rows, d],
            Op::Aggregate { input: h, graph: Arc::clone(graph), agg, argmax },
        )
    }

    /// Sum of all elements.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().copied().sum();
        self.push(vec![s], vec![], Op::Sum(a))
    }

    /// Mean squared error against a constant target.
    pub fn mse_loss(&mut self, pred: Var, target: &Tensor<T>) -> Result<Var> {
        if self.shape(pred) != target.shape() {
            return Err(Error::shape("mse_loss", format!("{:?} vs {:?}", self.shape(pred), target.shape())));
        }
        let p = self.value(pred).data();
        let count = T::of(p.len().max(1) as f64);
        let s: T = p.iter().zip(target.data()).map(|(&a, &b)| (a - b) * (a - b)).sum();
        self.push(vec![s / count], vec![], Op::Mse(pred, target.clone()))
    }

    /// Reverse pass from a scalar `loss`; gradients accumulate over every use
    /// of a value.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::NotScalar(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(lv.shape(), T::one()));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let gd = g.data();
            let out = node.value.data();
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                    if self.nodes[a.0].requires_grad {
                        // dA = dOut · Bᵀ, accumulated row by row so the inner loop vectorizes.
                        let mut bt = vec![T::zero(); n * k];
                        for p in 0..k {
                            for j in 0..n {
                                bt[j * k + p] = bv.data()[p * n + j];
                            }
                        }
                        let da = matmul_kernel(gd, &bt, m, n, k);
                        self.accumulate(&mut grads, *a, da);
                    }
                    if self.nodes[b.0].requires_grad {
                        let mut db = vec![T::zero(); k * n];
                        for r in 0..m {
                            let grow = &gd[r * n..(r + 1) * n];
                            for p in 0..k {
                                let x = av.data()[r * k + p];
                                for (o, &y) in db[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                    *o = *o + x * y;
                                }
                            }
                        }
                        self.accumulate(&mut grads, *b, db);
                    }
                }
                Op::Add(a, b) => {
                    self.accumulate(&mut grads, *a, gd.to_vec());
                    self.accumulate(&mut grads, *b, gd.to_vec());
                }
                Op::Sub(a, b) => {
                    self.accumulate(&mut grads, *a, gd.to_vec());
                    self.accumulate(&mut grads, *b, gd.iter().map(|&x| -x).collect());
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                    self.accumulate(&mut grads, *a, gd.iter().zip(bv).map(|(&x, &y)| x * y).collect());
                    self.accumulate(&mut grads, *b, gd.iter().zip(av).map(|(&x, &y)| x * y).collect());
                }
                Op::AddRow(a, bias) => {
                    self.accumulate(&mut grads, *a, gd.to_vec());
                    let n = self.value(*bias).numel();
                    let mut db = vec![T::zero(); n];
                    for row in gd.chunks_exact(n) {
                        for (o, &x) in db.iter_mut().zip(row) {
                            *o = *o + x;
                        }
                    }
                    self.accumulate(&mut grads, *bias, db);
                }
                Op::OneMinus(a) => {
                    self.accumulate(&mut grads, *a, gd.iter().map(|&x| -x).collect());
                }
                Op::Concat(a, b) => {
                    let p = self.value(*a).cols();
                    let q = self.value(*b).cols();
                    let m = self.value(*a).rows();
                    let mut da = Vec::with_capacity(m * p);
                    let mut db = Vec::with_capacity(m * q);
                    for r in 0..m {
                        let row = &gd[r * (p + q)..(r + 1) * (p + q)];
                        da.extend_from_slice(&row[..p]);
                        db.extend_from_slice(&row[p..]);
                    }
                    self.accumulate(&mut grads, *a, da);
                    self.accumulate(&mut grads, *b, db);
                }
                Op::Sigmoid(a) => {
                    let d = gd.iter().zip(out).map(|(&x, &s)| x * s * (T::one() - s)).collect();
                    self.accumulate(&mut grads, *a, d);
                }
                Op::Tanh(a) => {
                    let d = gd.iter().zip(out).map(|(&x, &t)| x * (T::one() - t * t)).collect();
                    self.accumulate(&mut grads, *a, d);
                }
                Op::Relu(a) => {
                    let inp = self.value(*a).data();
                    let d = gd
                        .iter()
                        .zip(inp)
                        .map(|(&x, &v)| if v > T::zero() { x } else { T::zero() })
                        .collect();
                    self.accumulate(&mut grads, *a, d);
                }
                Op::Dropout(a, mask) => {
                    let d = gd.iter().zip(mask).map(|(&x, &m)| x * m).collect();
                    self.accumulate(&mut grads, *a, d);
                }
                Op::Aggregate { input, graph, agg, argmax } => {
                    let (rows, d) = (self.value(*input).rows(), self.value(*input).cols());
                    let n = graph.len();
                    let mut dh = vec![T::zero(); rows * d];
                    match agg {
                        Aggregator::Sum | Aggregator::Mean => {
                            for block in 0..rows / n {
                                let base = block * n;
                                for v in 0..n {
                                    let nbrs = graph.neighbors(v);
                                    if nbrs.is_empty() {
                                        continue;
                                    }
                                    let scale = if *agg == Aggregator::Mean {
                                        T::one() / T::of(nbrs.len() as f64)
                                    } else {
                                        T::one()
                                    };
                                    let src = &gd[(base + v) * d..(base + v + 1) * d];
                                    for &u in nbrs {
                                        for (o, &x) in dh[(base + u) * d..(base + u + 1) * d].iter_mut().zip(src) {
                                            *o = *o + x * scale;
                                        }
                                    }
                                }
                            }
                        }
                        Aggregator::Max => {
                            for (k, &src) in argmax.iter().enumerate() {
                                if src != NO_SOURCE {
                                    let j = k % d;
                                    let o = src as usize * d + j;
                                    dh[o] = dh[o] + gd[k];
                                }
                            }
                        }
                    }
                    self.accumulate(&mut grads, *input, dh);
                }
                Op::Sum(a) => {
                    let n = self.value(*a).numel();
                    self.accumulate(&mut grads, *a, vec![gd[0]; n]);
                }
                Op::Mse(pred, target) => {
                    let p = self.value(*pred).data();
                    let scale = gd[0] * T::of(2.0) / T::of(p.len().max(1) as f64);
                    let d = p.iter().zip(target.data()).map(|(&a, &b)| (a - b) * scale).collect();
                    self.accumulate(&mut grads, *pred, d);
                }
            }
        }
        Ok(Gradients {
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
            grads,
        })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, g: Vec<T>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let g = Tensor::new(self.shape(v).to_vec(), g).expect("gradient shape matches value");
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients<T> {
    shapes: Vec<Vec<usize>>,
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient for `v`; zeros when `v` did not influence the loss.
    pub fn wrt(&self, v: Var) -> Tensor<T> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }

    pub fn wrt_all(&self, vars: &[Var]) -> Vec<Tensor<T>> {
        vars.iter().map(|&v| self.wrt(v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(shape, data).unwrap()
    }

    #[test]
    fn square_gradient() {
        let mut tape = Tape::new();
        let w = tape.param(t(&[1], &[3.0]));
        let y = tape.mul(w, w).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.wrt(w).data(), &[6.0]);
    }

    #[test]
    fn unused_parameter_has_zero_gradient() {
        let mut tape = Tape::new();
        let w = tape.param(t(&[1], &[3.0]));
        let unused = tape.param(t(&[2], &[1.0, 2.0]));
        let y = tape.mul(w, w).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.wrt(unused).data(), &[0.0, 0.0]);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut tape = Tape::new();
        let w = tape.param(t(&[2], &[1.0, 2.0]));
        assert!(matches!(tape.backward(w), Err(Error::NotScalar(_))));
    }

    #[test]
    fn closed_form_activations() {
        let mut tape = Tape::<f64>::new();
        let z = tape.constant(t(&[1, 1], &[0.0]));
        let s = tape.sigmoid(z).unwrap();
        let th = tape.tanh(z).unwrap();
        assert_eq!(tape.value(s).item(), 0.5);
        assert_eq!(tape.value(th).item(), 0.0);
    }

    #[test]
    fn mean_aggregate_of_two_neighbors() {
        let g = Neighborhood::from_edges(3, [(0, 1), (0, 2)]);
        let mut tape = Tape::<f64>::new();
        let h = tape.constant(t(&[3, 1], &[10.0, 1.0, 3.0]));
        let m = tape.neighbor_aggregate(h, &g, Aggregator::Mean).unwrap();
        assert_eq!(tape.value(m).data(), &[2.0, 10.0, 10.0]);
    }

    #[test]
    fn isolated_node_aggregates_to_zero() {
        let g = Neighborhood::empty(2);
        let mut tape = Tape::<f64>::new();
        let h = tape.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        for agg in [Aggregator::Mean, Aggregator::Sum, Aggregator::Max] {
            let a = tape.neighbor_aggregate(h, &g, agg).unwrap();
            assert_eq!(tape.value(a).data(), &[0.0; 4]);
        }
        assert_eq!(tape.empty_max_rows(), 2);
    }

    #[test]
    fn max_ties_route_gradient_to_lowest_neighbor() {
        let g = Neighborhood::from_edges(3, [(0, 1), (0, 2)]);
        let mut tape = Tape::<f64>::new();
        let h = tape.param(t(&[3, 1], &[0.0, 5.0, 5.0]));
        let m = tape.neighbor_aggregate(h, &g, Aggregator::Max).unwrap();
        let s = tape.sum(m).unwrap();
        let grads = tape.backward(s).unwrap();
        // node 0 takes neighbor 1 (tie with 2); nodes 1 and 2 take node 0
        assert_eq!(grads.wrt(h).data(), &[2.0, 1.0, 0.0]);
    }

    #[test]
    fn mse_gradient_is_two_residual_over_count() {
        let mut tape = Tape::new();
        let p = tape.param(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let target = t(&[2, 2], &[0.0, 2.0, 5.0, 3.5]);
        let l = tape.mse_loss(p, &target).unwrap();
        let g = tape.backward(l).unwrap().wrt(p);
        let expected: Vec<f64> = [1.0, 0.0, -2.0, 0.5].iter().map(|r| 2.0 * r / 4.0).collect();
        assert_eq!(g.data(), expected.as_slice());
    }

    #[test]
    fn concat_splits_gradient_at_boundary() {
        let mut tape = Tape::new();
        let a = tape.param(t(&[2, 1], &[1.0, 2.0]));
        let b = tape.param(t(&[2, 2], &[3.0, 4.0, 5.0, 6.0]));
        let c = tape.concat(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let w = tape.constant(t(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let prod = tape.mul(c, w).unwrap();
        let s = tape.sum(prod).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.wrt(a).data(), &[1.0, 4.0]);
        assert_eq!(g.wrt(b).data(), &[2.0, 3.0, 5.0, 6.0]);
    }

    #[test]
    fn dropout_zero_rate_is_identity_and_mask_is_deterministic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(t(&[1, 4], &[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(tape.dropout(x, 0.0, &mut rng).unwrap(), x);
        let mask = t(&[1, 4], &[2.0, 0.0, 2.0, 0.0]);
        let a = tape.dropout_with_mask(x, mask.clone()).unwrap();
        let b = tape.dropout_with_mask(x, mask).unwrap();
        assert_eq!(tape.value(a), tape.value(b));
        assert_eq!(tape.value(a).data(), &[2.0, 0.0, 6.0, 0.0]);
        let d = tape.dropout(x, 0.5, &mut rng).unwrap();
        assert!(tape.value(d).data().iter().zip([1.0, 2.0, 3.0, 4.0]).all(|(&v, x)| v == 0.0 || v == 2.0 * x));
    }

    #[test]
    fn shape_errors_name_the_primitive() {
        let mut tape = Tape::<f64>::new();
        let a = tape.constant(t(&[2, 3], &[0.0; 6]));
        let b = tape.constant(t(&[2, 3], &[0.0; 6]));
        match tape.matmul(a, b) {
            Err(Error::Shape { op, .. }) => assert_eq!(op, "matmul"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_output_reports_location() {
        let mut tape = Tape::<f64>::new();
        let a = tape.constant(t(&[1, 1], &[f64::MAX]));
        let b = tape.add(a, a);
        assert!(matches!(b, Err(Error::NonFinite { op: "add", node: 1 })));
    }
}
