//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Tape`] is an append-only list of nodes. Every operation reads
//! earlier nodes only, so the node order is already a topological order and
//! [`backward`] is a single reverse sweep.

use std::sync::Arc;

use rand::Rng;

use super::tensor::{dropout_mask, matmul_kernel, softmax_kernel, Tensor};
use super::PROB_FLOOR;
use crate::error::{NluError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    MatVec(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    OneMinus(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Concat(Vec<NodeId>),
    Slice(NodeId, usize),
    Row(NodeId, usize),
    Stack(Vec<NodeId>),
    Gather(NodeId, Vec<usize>),
    Softmax(NodeId),
    CrossEntropy(NodeId, usize),
    SoftmaxCrossEntropy(NodeId, usize),
    Sum(Vec<NodeId>),
    Mask(NodeId, Vec<f64>),
}

#[derive(Debug)]
struct Node {
    op: Op,
    shape: Vec<usize>,
    value: Arc<Vec<f64>>,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<NodeId>,
}

fn shape_err(op: &'static str, left: &[usize], right: &[usize]) -> NluError {
    NluError::Shape {
        op,
        left: left.to_vec(),
        right: right.to_vec(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, shape: Vec<usize>, value: Vec<f64>, requires_grad: bool) -> NodeId {
        self.push_shared(op, shape, Arc::new(value), requires_grad)
    }

    fn push_shared(&mut self, op: Op, shape: Vec<usize>, value: Arc<Vec<f64>>, requires_grad: bool) -> NodeId {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node {
            op,
            shape,
            value,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Records a tensor as an input. Its `requires_grad` flag decides whether
    /// a gradient is collected for it.
    pub fn leaf(&mut self, t: &Tensor) -> NodeId {
        self.push_shared(Op::Leaf, t.shape().to_vec(), t.shared_data(), t.requires_grad())
    }

    /// Records a non-differentiable input.
    pub fn constant(&mut self, t: &Tensor) -> NodeId {
        self.push_shared(Op::Leaf, t.shape().to_vec(), t.shared_data(), false)
    }

    /// Like [`Tape::leaf`], but also appends the node to the parameter list
    /// returned by [`Tape::params`], in registration order.
    pub fn param(&mut self, t: &Tensor) -> NodeId {
        let id = self.leaf(t);
        self.params.push(id);
        id
    }

    pub fn params(&self) -> &[NodeId] {
        &self.params
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value[0]
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn tensor(&self, id: NodeId) -> Tensor {
        let n = &self.nodes[id.0];
        Tensor::from_parts(n.shape.clone(), Arc::clone(&n.value))
    }

    fn rg(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|i| self.nodes[i.0].requires_grad)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(shape_err("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let v = matmul_kernel(self.value(a), self.value(b), m, k, n);
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::MatMul(a, b), vec![m, n], v, rg))
    }

    /// `[m×k] · [k] -> [m]`.
    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> Result<NodeId> {
        let (sw, sx) = (self.shape(w), self.shape(x));
        if sw.len() != 2 || sx.len() != 1 || sw[1] != sx[0] {
            return Err(shape_err("matvec", sw, sx));
        }
        let (m, k) = (sw[0], sw[1]);
        let (wv, xv) = (self.value(w), self.value(x));
        let v: Vec<f64> = (0..m)
            .map(|i| wv[i * k..(i + 1) * k].iter().zip(xv).map(|(a, b)| a * b).sum())
            .collect();
        let rg = self.rg(&[w, x]);
        Ok(self.push(Op::MatVec(w, x), vec![m], v, rg))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let s = self.shape(a);
        if s.len() != 2 {
            return Err(shape_err("transpose", s, &[]));
        }
        let (m, n) = (s[0], s[1]);
        let av = self.value(a);
        let mut v = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                v[j * m + i] = av[i * n + j];
            }
        }
        let rg = self.rg(&[a]);
        Ok(self.push(Op::Transpose(a), vec![n, m], v, rg))
    }

    fn zip_with(&mut self, a: NodeId, b: NodeId, name: &'static str, f: fn(f64, f64) -> f64, op: Op) -> Result<NodeId> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(name, self.shape(a), self.shape(b)));
        }
        let v = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| f(x, y)).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a, b]);
        Ok(self.push(op, shape, v, rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_with(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_with(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_with(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    fn map(&mut self, a: NodeId, f: fn(f64) -> f64, op: Op) -> NodeId {
        let v = self.value(a).iter().map(|&x| f(x)).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a]);
        self.push(op, shape, v, rg)
    }

    /// `1 - a`, elementwise.
    pub fn one_minus(&mut self, a: NodeId) -> NodeId {
        self.map(a, |x| 1.0 - x, Op::OneMinus(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    /// Concatenates 1-D nodes.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let mut v = Vec::new();
        for &p in parts {
            if self.shape(p).len() != 1 {
                return Err(shape_err("concat", self.shape(p), &[]));
            }
            v.extend_from_slice(self.value(p));
        }
        if v.is_empty() {
            return Err(NluError::Contract("concat of nothing".into()));
        }
        let rg = self.rg(parts);
        let n = v.len();
        Ok(self.push(Op::Concat(parts.to_vec()), vec![n], v, rg))
    }

    /// Elements `start..start + len` of a 1-D node.
    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let s = self.shape(a);
        if s.len() != 1 || len == 0 || start + len > s[0] {
            return Err(shape_err("slice", s, &[start, len]));
        }
        let v = self.value(a)[start..start + len].to_vec();
        let rg = self.rg(&[a]);
        Ok(self.push(Op::Slice(a, start), vec![len], v, rg))
    }

    /// Row `r` of a 2-D node as a 1-D node.
    pub fn row(&mut self, a: NodeId, r: usize) -> Result<NodeId> {
        let s = self.shape(a);
        if s.len() != 2 {
            return Err(shape_err("row", s, &[r]));
        }
        if r >= s[0] {
            return Err(NluError::Index { index: r, len: s[0] });
        }
        let c = s[1];
        let v = self.value(a)[r * c..(r + 1) * c].to_vec();
        let rg = self.rg(&[a]);
        Ok(self.push(Op::Row(a, r), vec![c], v, rg))
    }

    /// Stacks equally sized 1-D nodes into a matrix.
    pub fn stack(&mut self, rows: &[NodeId]) -> Result<NodeId> {
        let first = *rows.first().ok_or_else(|| NluError::Contract("stack of nothing".into()))?;
        let width = self.shape(first).to_vec();
        let mut v = Vec::with_capacity(rows.len() * width.iter().product::<usize>());
        for &r in rows {
            if self.shape(r) != width.as_slice() || width.len() != 1 {
                return Err(shape_err("stack", &width, self.shape(r)));
            }
            v.extend_from_slice(self.value(r));
        }
        let rg = self.rg(rows);
        Ok(self.push(Op::Stack(rows.to_vec()), vec![rows.len(), width[0]], v, rg))
    }

    /// Gathers rows of a 2-D table.
    pub fn gather(&mut self, table: NodeId, indices: &[usize]) -> Result<NodeId> {
        let s = self.shape(table);
        if s.len() != 2 {
            return Err(shape_err("gather", s, &[]));
        }
        if indices.is_empty() {
            return Err(NluError::Contract("gather of no rows".into()));
        }
        let (rows, d) = (s[0], s[1]);
        let tv = self.value(table);
        let mut v = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            if i >= rows {
                return Err(NluError::Index { index: i, len: rows });
            }
            v.extend_from_slice(&tv[i * d..(i + 1) * d]);
        }
        let rg = self.rg(&[table]);
        Ok(self.push(Op::Gather(table, indices.to_vec()), vec![indices.len(), d], v, rg))
    }

    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let s = self.shape(a);
        if s.len() != 1 {
            return Err(shape_err("softmax", s, &[]));
        }
        if self.value(a).iter().any(|v| !v.is_finite()) {
            return Err(NluError::NumericInput("softmax"));
        }
        let v = softmax_kernel(self.value(a));
        let shape = s.to_vec();
        let rg = self.rg(&[a]);
        Ok(self.push(Op::Softmax(a), shape, v, rg))
    }

    /// `-ln(max(p[target], 1e-12))` for a probability vector.
    pub fn cross_entropy(&mut self, probs: NodeId, target: usize) -> Result<NodeId> {
        let n = self.value(probs).len();
        if target >= n {
            return Err(NluError::Index { index: target, len: n });
        }
        let loss = -self.value(probs)[target].max(PROB_FLOOR).ln();
        let rg = self.rg(&[probs]);
        Ok(self.push(Op::CrossEntropy(probs, target), vec![], vec![loss], rg))
    }

    /// Fused `cross_entropy(softmax(logits), target)`, computed via log-sum-exp.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, target: usize) -> Result<NodeId> {
        let z = self.value(logits);
        if self.shape(logits).len() != 1 {
            return Err(shape_err("softmax_cross_entropy", self.shape(logits), &[]));
        }
        if target >= z.len() {
            return Err(NluError::Index { index: target, len: z.len() });
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(NluError::NumericInput("softmax_cross_entropy"));
        }
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        let loss = lse - z[target];
        let rg = self.rg(&[logits]);
        Ok(self.push(Op::SoftmaxCrossEntropy(logits, target), vec![], vec![loss], rg))
    }

    /// Sum of scalar nodes.
    pub fn sum(&mut self, terms: &[NodeId]) -> Result<NodeId> {
        if terms.is_empty() {
            return Err(NluError::Contract("sum of nothing".into()));
        }
        let mut total = 0.0;
        for &t in terms {
            if self.value(t).len() != 1 {
                return Err(shape_err("sum", self.shape(t), &[]));
            }
            total += self.value(t)[0];
        }
        let rg = self.rg(terms);
        Ok(self.push(Op::Sum(terms.to_vec()), vec![], vec![total], rg))
    }

    /// Inverted dropout; returns `a` itself at inference or for rate 0.
    pub fn dropout<R: Rng>(&mut self, a: NodeId, rate: f64, rng: &mut R, training: bool) -> Result<NodeId> {
        let n = self.value(a).len();
        match dropout_mask(n, rate, rng, training)? {
            None => Ok(a),
            Some(mask) => {
                let v = self.value(a).iter().zip(&mask).map(|(x, m)| x * m).collect();
                let shape = self.shape(a).to_vec();
                let rg = self.rg(&[a]);
                Ok(self.push(Op::Mask(a, mask), shape, v, rg))
            }
        }
    }
}

/// Gradients produced by [`backward`], indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&[f64]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    /// Takes the gradients of the tape's registered parameters, in order.
    pub fn take_params(&mut self, tape: &Tape) -> Vec<Option<Vec<f64>>> {
        tape.params.iter().map(|p| self.grads[p.0].take()).collect()
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, len: usize) -> &mut Vec<f64> {
    slot.get_or_insert_with(|| vec![0.0; len])
}

/// Reverse sweep from a scalar `loss`. Only nodes that require a gradient
/// and are ancestors of the loss receive an entry.
pub fn backward(tape: &Tape, loss: NodeId) -> Result<Gradients> {
    let root = &tape.nodes[loss.0];
    if root.value.len() != 1 {
        return Err(NluError::Contract(format!(
            "backward needs a scalar loss, got shape {:?}",
            root.shape
        )));
    }
    let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
    if !root.requires_grad {
        return Ok(Gradients { grads });
    }
    grads[loss.0] = Some(vec![1.0]);

    for idx in (0..=loss.0).rev() {
        let node = &tape.nodes[idx];
        if matches!(node.op, Op::Leaf) {
            continue;
        }
        let Some(g) = grads[idx].take() else { continue };
        let y = &node.value;
        let wants = |id: NodeId| tape.nodes[id.0].requires_grad;
        let len_of = |id: NodeId| tape.nodes[id.0].value.len();

        match &node.op {
            Op::Leaf => unreachable!(),
            Op::MatMul(a, b) => {
                let (sa, sb) = (&tape.nodes[a.0].shape, &tape.nodes[b.0].shape);
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let (av, bv) = (tape.value(*a), tape.value(*b));
                if wants(*a) {
                    let ga = accumulate(&mut grads[a.0], m * k);
                    for i in 0..m {
                        for p in 0..k {
                            let mut acc = 0.0;
                            for j in 0..n {
                                acc += g[i * n + j] * bv[p * n + j];
                            }
                            ga[i * k + p] += acc;
                        }
                    }
                }
                if wants(*b) {
                    let gb = accumulate(&mut grads[b.0], k * n);
                    for i in 0..m {
                        for p in 0..k {
                            let aip = av[i * k + p];
                            for j in 0..n {
                                gb[p * n + j] += aip * g[i * n + j];
                            }
                        }
                    }
                }
            }
            Op::MatVec(w, x) => {
                let k = tape.nodes[w.0].shape[1];
                let m = g.len();
                let (wv, xv) = (tape.value(*w), tape.value(*x));
                if wants(*w) {
                    let gw = accumulate(&mut grads[w.0], m * k);
                    for i in 0..m {
                        let gi = g[i];
                        if gi == 0.0 {
                            continue;
                        }
                        for (o, &xj) in gw[i * k..(i + 1) * k].iter_mut().zip(xv) {
                            *o += gi * xj;
                        }
                    }
                }
                if wants(*x) {
                    let gx = accumulate(&mut grads[x.0], k);
                    for i in 0..m {
                        let gi = g[i];
                        for (o, &wij) in gx.iter_mut().zip(&wv[i * k..(i + 1) * k]) {
                            *o += gi * wij;
                        }
                    }
                }
            }
            Op::Transpose(a) => {
                if wants(*a) {
                    let s = &node.shape;
                    let (n, m) = (s[0], s[1]);
                    let ga = accumulate(&mut grads[a.0], m * n);
                    for i in 0..m {
                        for j in 0..n {
                            ga[i * n + j] += g[j * m + i];
                        }
                    }
                }
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                if wants(*a) {
                    for (o, gv) in accumulate(&mut grads[a.0], g.len()).iter_mut().zip(&g) {
                        *o += gv;
                    }
                }
                if wants(*b) {
                    for (o, gv) in accumulate(&mut grads[b.0], g.len()).iter_mut().zip(&g) {
                        *o += sign * gv;
                    }
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (tape.value(*a), tape.value(*b));
                if wants(*a) {
                    for ((o, gv), bj) in accumulate(&mut grads[a.0], g.len()).iter_mut().zip(&g).zip(bv) {
                        *o += gv * bj;
                    }
                }
                if wants(*b) {
                    for ((o, gv), aj) in accumulate(&mut grads[b.0], g.len()).iter_mut().zip(&g).zip(av) {
                        *o += gv * aj;
                    }
                }
            }
            Op::OneMinus(a) => {
                if wants(*a) {
                    for (o, gv) in accumulate(&mut grads[a.0], g.len()).iter_mut().zip(&g) {
                        *o -= gv;
                    }
                }
            }
            Op::Sigmoid(a) => {
                if wants(*a) {
                    for ((o, gv), yv) in accumulate(&mut grads[a.0], g.len()).iter_mut().zip(&g).zip(y.iter()) {
                        *o += gv * yv * (1.0 - yv);
                    }
                }
            }
            Op::Tanh(a) => {
                if wants(*a) {
                    for ((o, gv), yv) in accumulate(&mut grads[a.0], g.len()).iter_mut().zip(&g).zip(y.iter()) {
                        *o += gv * (1.0 - yv * yv);
                    }
                }
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = len_of(*p);
                    if wants(*p) {
                        for (o, gv) in accumulate(&mut grads[p.0], n).iter_mut().zip(&g[offset..offset + n]) {
                            *o += gv;
                        }
                    }
                    offset += n;
                }
            }
            Op::Slice(a, start) => {
                if wants(*a) {
                    let n = len_of(*a);
                    let ga = accumulate(&mut grads[a.0], n);
                    for (o, gv) in ga[*start..*start + g.len()].iter_mut().zip(&g) {
                        *o += gv;
                    }
                }
            }
            Op::Row(a, r) => {
                if wants(*a) {
                    let n = len_of(*a);
                    let c = g.len();
                    let ga = accumulate(&mut grads[a.0], n);
                    for (o, gv) in ga[r * c..(r + 1) * c].iter_mut().zip(&g) {
                        *o += gv;
                    }
                }
            }
            Op::Stack(rows) => {
                let c = node.shape[1];
                for (r, id) in rows.iter().enumerate() {
                    if wants(*id) {
                        for (o, gv) in accumulate(&mut grads[id.0], c).iter_mut().zip(&g[r * c..(r + 1) * c]) {
                            *o += gv;
                        }
                    }
                }
            }
            Op::Gather(table, indices) => {
                if wants(*table) {
                    let d = node.shape[1];
                    let n = len_of(*table);
                    let gt = accumulate(&mut grads[table.0], n);
                    for (r, &i) in indices.iter().enumerate() {
                        for (o, gv) in gt[i * d..(i + 1) * d].iter_mut().zip(&g[r * d..(r + 1) * d]) {
                            *o += gv;
                        }
                    }
                }
            }
            Op::Softmax(a) => {
                if wants(*a) {
                    let dot: f64 = g.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
                    for ((o, gv), yv) in accumulate(&mut grads[a.0], g.len()).iter_mut().zip(&g).zip(y.iter()) {
                        *o += yv * (gv - dot);
                    }
                }
            }
            Op::CrossEntropy(p, t) => {
                if wants(*p) {
                    let pt = tape.value(*p)[*t];
                    let n = len_of(*p);
                    let gp = accumulate(&mut grads[p.0], n);
                    if pt > PROB_FLOOR {
                        gp[*t] -= g[0] / pt;
                    }
                }
            }
            Op::SoftmaxCrossEntropy(z, t) => {
                if wants(*z) {
                    let probs = softmax_kernel(tape.value(*z));
                    let gz = accumulate(&mut grads[z.0], probs.len());
                    for (j, (o, pj)) in gz.iter_mut().zip(&probs).enumerate() {
                        let target = if j == *t { 1.0 } else { 0.0 };
                        *o += g[0] * (pj - target);
                    }
                }
            }
            Op::Sum(terms) => {
                for t in terms {
                    if wants(*t) {
                        accumulate(&mut grads[t.0], 1)[0] += g[0];
                    }
                }
            }
            Op::Mask(a, mask) => {
                if wants(*a) {
                    for ((o, gv), m) in accumulate(&mut grads[a.0], g.len()).iter_mut().zip(&g).zip(mask) {
                        *o += gv * m;
                    }
                }
            }
        }
        // keep intermediate gradients inspectable
        grads[idx] = Some(g);
    }
    Ok(Gradients { grads })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(&Tensor::scalar(3.0).with_grad(true));
        let y = tape.mul(x, x).unwrap();
        let g = backward(&tape, y).unwrap();
        assert_eq!(tape.scalar(y), 9.0);
        assert_eq!(g.get(x).unwrap(), &[6.0]);
    }

    #[test]
    fn constants_and_non_ancestors_get_nothing() {
        let mut tape = Tape::new();
        let x = tape.leaf(&Tensor::scalar(2.0).with_grad(true));
        let c = tape.constant(&Tensor::scalar(5.0));
        let unrelated = tape.leaf(&Tensor::scalar(1.0).with_grad(true));
        let _dangling = tape.tanh(unrelated);
        let y = tape.mul(x, c).unwrap();
        let g = backward(&tape, y).unwrap();
        assert_eq!(g.get(x).unwrap(), &[5.0]);
        assert!(g.get(c).is_none());
        assert!(g.get(unrelated).is_none());
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf(&Tensor::vector(vec![1.0, 2.0]).with_grad(true));
        let y = tape.tanh(x);
        assert!(matches!(backward(&tape, y), Err(NluError::Contract(_))));
    }

    #[test]
    fn replaying_a_tape_is_bit_identical() {
        let run = || {
            let mut tape = Tape::new();
            let w = tape.leaf(&Tensor::matrix(2, 3, vec![0.1, -0.4, 0.3, 0.9, 0.2, -0.7]).unwrap().with_grad(true));
            let x = tape.constant(&Tensor::vector(vec![0.5, -1.5, 2.0]));
            let z = tape.matvec(w, x).unwrap();
            let loss = tape.softmax_cross_entropy(z, 1).unwrap();
            let g = backward(&tape, loss).unwrap();
            (tape.scalar(loss).to_bits(), g.get(w).unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
        };
        assert_eq!(run(), run());
    }
}
