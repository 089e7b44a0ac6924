//! Two interpreters for the same model code. `Eval` computes values only and
//! is what inference and beam search use; `Graph` records a tape so that a
//! loss can be differentiated with respect to every parameter it touched.

use super::loss::masked_softmax;
use super::params::{Gradients, ParamId, Params};

pub trait Backend {
    type V: Clone;

    fn params(&self) -> &Params;
    fn constant(&mut self, v: Vec<f64>) -> Self::V;
    /// A whole parameter tensor, flattened.
    fn param(&mut self, p: ParamId) -> Self::V;
    /// Row `r` of a matrix parameter (embedding lookup).
    fn row(&mut self, p: ParamId, r: usize) -> Self::V;
    fn matvec(&mut self, p: ParamId, x: &Self::V) -> Self::V;
    fn add(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn mul(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn sigmoid(&mut self, a: &Self::V) -> Self::V;
    fn tanh(&mut self, a: &Self::V) -> Self::V;
    fn concat(&mut self, parts: &[Self::V]) -> Self::V;
    fn slice(&mut self, a: &Self::V, start: usize, len: usize) -> Self::V;
    /// Cross-entropy in bits of `target` under softmax(logits), restricted to
    /// `mask` when given. Result has length 1.
    fn xent(&mut self, logits: &Self::V, target: usize, mask: Option<&[bool]>) -> Self::V;
    fn value<'s>(&'s self, v: &'s Self::V) -> &'s [f64];

    /// `W x + b`
    fn affine(&mut self, w: ParamId, b: ParamId, x: &Self::V) -> Self::V {
        let wx = self.matvec(w, x);
        let bias = self.param(b);
        self.add(&wx, &bias)
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

fn matvec_into(params: &Params, p: ParamId, x: &[f64]) -> Vec<f64> {
    let w = params.get(p);
    assert_eq!(
        w.cols,
        x.len(),
        "matvec: `{}` has {} columns, input has length {}",
        params.name(p),
        w.cols,
        x.len()
    );
    w.data
        .chunks_exact(w.cols)
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn zip_with(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "elementwise op on lengths {} and {}", a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect()
}

fn xent_value(logits: &[f64], target: usize, mask: Option<&[bool]>) -> (f64, Vec<f64>) {
    let probs = masked_softmax(logits, mask);
    let p = probs[target];
    assert!(p > 0.0 || mask.is_none_or(|m| m[target]), "target {target} is masked out");
    (-p.log2(), probs)
}

/// Value-only interpreter.
pub struct Eval<'a> {
    params: &'a Params,
}

impl<'a> Eval<'a> {
    pub fn new(params: &'a Params) -> Self {
        Eval { params }
    }
}

impl Backend for Eval<'_> {
    type V = Vec<f64>;

    fn params(&self) -> &Params {
        self.params
    }

    fn constant(&mut self, v: Vec<f64>) -> Vec<f64> {
        v
    }

    fn param(&mut self, p: ParamId) -> Vec<f64> {
        self.params.get(p).data.clone()
    }

    fn row(&mut self, p: ParamId, r: usize) -> Vec<f64> {
        self.params.get(p).row(r).to_vec()
    }

    fn matvec(&mut self, p: ParamId, x: &Vec<f64>) -> Vec<f64> {
        matvec_into(self.params, p, x)
    }

    fn add(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        zip_with(a, b, |x, y| x + y)
    }

    fn mul(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        zip_with(a, b, |x, y| x * y)
    }

    fn sigmoid(&mut self, a: &Vec<f64>) -> Vec<f64> {
        a.iter().map(|&x| sigmoid(x)).collect()
    }

    fn tanh(&mut self, a: &Vec<f64>) -> Vec<f64> {
        a.iter().map(|x| x.tanh()).collect()
    }

    fn concat(&mut self, parts: &[Vec<f64>]) -> Vec<f64> {
        parts.concat()
    }

    fn slice(&mut self, a: &Vec<f64>, start: usize, len: usize) -> Vec<f64> {
        a[start..start + len].to_vec()
    }

    fn xent(&mut self, logits: &Vec<f64>, target: usize, mask: Option<&[bool]>) -> Vec<f64> {
        vec![xent_value(logits, target, mask).0]
    }

    fn value<'s>(&'s self, v: &'s Vec<f64>) -> &'s [f64] {
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

enum Op {
    Leaf,
    Param(ParamId),
    Row(ParamId, usize),
    MatVec(ParamId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Concat(Vec<NodeId>),
    Slice(NodeId, usize),
    Xent { logits: NodeId, target: usize, probs: Vec<f64> },
}

struct Node {
    value: Vec<f64>,
    op: Op,
}

/// Tape-recording interpreter.
pub struct Graph<'a> {
    params: &'a Params,
    nodes: Vec<Node>,
}

impl<'a> Graph<'a> {
    pub fn new(params: &'a Params) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    fn val(&self, n: NodeId) -> &[f64] {
        &self.nodes[n.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Accumulates d(sum of `roots`)/d(params) into `grads`. Each root must be
    /// a scalar node.
    pub fn backward(&self, roots: &[NodeId], grads: &mut Gradients) {
        let mut adj: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        fn acc(adj: &mut [Option<Vec<f64>>], n: NodeId, len: usize) -> &mut Vec<f64> {
            adj[n.0].get_or_insert_with(|| vec![0.0; len])
        }
        for r in roots {
            assert_eq!(self.nodes[r.0].value.len(), 1, "backward root must be scalar");
            acc(&mut adj, *r, 1)[0] += 1.0;
        }
        for i in (0..self.nodes.len()).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Param(p) => {
                    for (d, x) in grads.get_mut(*p).iter_mut().zip(&g) {
                        *d += x;
                    }
                }
                Op::Row(p, r) => {
                    let cols = self.params.get(*p).cols;
                    let buf = &mut grads.get_mut(*p)[r * cols..(r + 1) * cols];
                    for (d, x) in buf.iter_mut().zip(&g) {
                        *d += x;
                    }
                }
                Op::MatVec(p, x) => {
                    let w = self.params.get(*p);
                    let xv = self.val(*x);
                    let gw = grads.get_mut(*p);
                    for (r, gr) in g.iter().enumerate() {
                        if *gr == 0.0 {
                            continue;
                        }
                        let row = &mut gw[r * w.cols..(r + 1) * w.cols];
                        for (d, xj) in row.iter_mut().zip(xv) {
                            *d += gr * xj;
                        }
                    }
                    let dx = acc(&mut adj, *x, w.cols);
                    for (r, gr) in g.iter().enumerate() {
                        if *gr == 0.0 {
                            continue;
                        }
                        for (d, wrj) in dx.iter_mut().zip(w.row(r)) {
                            *d += gr * wrj;
                        }
                    }
                }
                Op::Add(a, b) => {
                    for n in [a, b] {
                        for (d, x) in acc(&mut adj, *n, g.len()).iter_mut().zip(&g) {
                            *d += x;
                        }
                    }
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.val(*a).to_vec(), self.val(*b).to_vec());
                    for (d, (x, y)) in acc(&mut adj, *a, g.len()).iter_mut().zip(g.iter().zip(&vb)) {
                        *d += x * y;
                    }
                    for (d, (x, y)) in acc(&mut adj, *b, g.len()).iter_mut().zip(g.iter().zip(&va)) {
                        *d += x * y;
                    }
                }
                Op::Sigmoid(a) => {
                    let d = acc(&mut adj, *a, g.len());
                    for ((d, x), y) in d.iter_mut().zip(&g).zip(&node.value) {
                        *d += x * y * (1.0 - y);
                    }
                }
                Op::Tanh(a) => {
                    let d = acc(&mut adj, *a, g.len());
                    for ((d, x), y) in d.iter_mut().zip(&g).zip(&node.value) {
                        *d += x * (1.0 - y * y);
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let len = self.nodes[p.0].value.len();
                        for (d, x) in acc(&mut adj, *p, len).iter_mut().zip(&g[off..off + len]) {
                            *d += x;
                        }
                        off += len;
                    }
                }
                Op::Slice(a, start) => {
                    let len = self.nodes[a.0].value.len();
                    let d = &mut acc(&mut adj, *a, len)[*start..start + g.len()];
                    for (d, x) in d.iter_mut().zip(&g) {
                        *d += x;
                    }
                }
                Op::Xent { logits, target, probs } => {
                    let scale = g[0] / std::f64::consts::LN_2;
                    let d = acc(&mut adj, *logits, probs.len());
                    for (k, (d, p)) in d.iter_mut().zip(probs).enumerate() {
                        let onehot = if k == *target { 1.0 } else { 0.0 };
                        *d += scale * (p - onehot);
                    }
                }
            }
        }
    }
}

impl Backend for Graph<'_> {
    type V = NodeId;

    fn params(&self) -> &Params {
        self.params
    }

    fn constant(&mut self, v: Vec<f64>) -> NodeId {
        self.push(v, Op::Leaf)
    }

    fn param(&mut self, p: ParamId) -> NodeId {
        let v = self.params.get(p).data.clone();
        self.push(v, Op::Param(p))
    }

    fn row(&mut self, p: ParamId, r: usize) -> NodeId {
        let v = self.params.get(p).row(r).to_vec();
        self.push(v, Op::Row(p, r))
    }

    fn matvec(&mut self, p: ParamId, x: &NodeId) -> NodeId {
        let v = matvec_into(self.params, p, self.val(*x));
        self.push(v, Op::MatVec(p, *x))
    }

    fn add(&mut self, a: &NodeId, b: &NodeId) -> NodeId {
        let v = zip_with(self.val(*a), self.val(*b), |x, y| x + y);
        self.push(v, Op::Add(*a, *b))
    }

    fn mul(&mut self, a: &NodeId, b: &NodeId) -> NodeId {
        let v = zip_with(self.val(*a), self.val(*b), |x, y| x * y);
        self.push(v, Op::Mul(*a, *b))
    }

    fn sigmoid(&mut self, a: &NodeId) -> NodeId {
        let v = self.val(*a).iter().map(|&x| sigmoid(x)).collect();
        self.push(v, Op::Sigmoid(*a))
    }

    fn tanh(&mut self, a: &NodeId) -> NodeId {
        let v = self.val(*a).iter().map(|x| x.tanh()).collect();
        self.push(v, Op::Tanh(*a))
    }

    fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let v = parts.iter().flat_map(|p| self.val(*p).iter().copied()).collect();
        self.push(v, Op::Concat(parts.to_vec()))
    }

    fn slice(&mut self, a: &NodeId, start: usize, len: usize) -> NodeId {
        let v = self.val(*a)[start..start + len].to_vec();
        self.push(v, Op::Slice(*a, start))
    }

    fn xent(&mut self, logits: &NodeId, target: usize, mask: Option<&[bool]>) -> NodeId {
        let (loss, probs) = xent_value(self.val(*logits), target, mask);
        self.push(
            vec![loss],
            Op::Xent {
                logits: *logits,
                target,
                probs,
            },
        )
    }

    fn value<'s>(&'s self, v: &'s NodeId) -> &'s [f64] {
        self.val(*v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::Tensor;
    use approx::assert_relative_eq;

    fn toy() -> (Params, ParamId, ParamId) {
        let mut p = Params::new();
        let w = p.add(
            "w",
            Tensor {
                rows: 2,
                cols: 3,
                data: vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.0],
            },
        );
        let b = p.add(
            "b",
            Tensor {
                rows: 2,
                cols: 1,
                data: vec![0.1, -0.2],
            },
        );
        (p, w, b)
    }

    #[test]
    fn eval_and_graph_agree_on_values() {
        let (p, w, b) = toy();
        let x = vec![0.5, -1.0, 2.0];
        let mut e = Eval::new(&p);
        let xe = e.constant(x.clone());
        let ye = e.affine(w, b, &xe);
        let ye = e.tanh(&ye);
        let mut g = Graph::new(&p);
        let xg = g.constant(x);
        let yg = g.affine(w, b, &xg);
        let yg = g.tanh(&yg);
        assert_eq!(e.value(&ye), g.value(&yg));
        assert_relative_eq!(ye[0], (0.5f64 - 2.0 + 6.0 + 0.1).tanh(), epsilon = 1e-15);
    }

    #[test]
    fn matvec_backward_is_outer_product() {
        let (p, w, b) = toy();
        let mut g = Graph::new(&p);
        let x = g.constant(vec![1.0, 2.0, 3.0]);
        let y = g.affine(w, b, &x);
        let loss = g.xent(&y, 0, None);
        let mut grads = Gradients::zeros_like(&p);
        g.backward(&[loss], &mut grads);
        // logits (14.1, -0.2): d loss / d logit = (softmax - onehot) / ln 2
        let z = [14.1f64, -0.2];
        let p1 = z[1].exp() / (z[0].exp() + z[1].exp());
        let d0 = -p1 / std::f64::consts::LN_2;
        let d1 = p1 / std::f64::consts::LN_2;
        assert_relative_eq!(grads.get(b)[0], d0, max_relative = 1e-12);
        assert_relative_eq!(grads.get(b)[1], d1, max_relative = 1e-12);
        assert_relative_eq!(grads.get(w)[5], 3.0 * d1, max_relative = 1e-12);
    }

    #[test]
    fn shared_nodes_accumulate() {
        let (p, _, b) = toy();
        let mut g = Graph::new(&p);
        let v = g.param(b);
        let sq = g.mul(&v, &v);
        let s0 = g.slice(&sq, 0, 1);
        let s1 = g.slice(&sq, 1, 1);
        let mut grads = Gradients::zeros_like(&p);
        g.backward(&[s0, s1], &mut grads);
        assert_relative_eq!(grads.get(b)[0], 0.2, epsilon = 1e-15);
        assert_relative_eq!(grads.get(b)[1], -0.4, epsilon = 1e-15);
    }
}
