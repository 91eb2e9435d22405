//! Reverse-mode automatic differentiation over a fixed primitive set.
//!
//! Operations are recorded eagerly into a flat tape; `backward` replays it
//! in reverse, accumulating adjoints. The primitive set is exactly what the
//! regularized auto-encoder loss needs: products, elementwise maps, the
//! reductions, and the Gram/centering kernels of the independence terms.
//!
//! A tape is single-owner and single-threaded; independent tapes may live on
//! different threads.

use crate::error::{Error, Result};
use crate::ndcore::Tensor2;

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(VarId, VarId),
    Sub(VarId, VarId),
    Hadamard(VarId, VarId),
    MatMul(VarId, VarId),
    /// `A * B^T`
    MatMulTb(VarId, VarId),
    Transpose(VarId),
    Scale(VarId, f64),
    AddRowBroadcast(VarId, VarId),
    Cos(VarId),
    Tanh(VarId),
    Relu(VarId),
    Dot(VarId, VarId),
    Sum(VarId),
    RowSum(VarId),
    /// `H K H` with `H = I - (1/n) 11^T`
    CenterGram(VarId),
    /// RBF kernel Gram matrix of the rows, fixed bandwidth.
    RbfGram(VarId, f64),
    SliceCols(VarId, usize, usize),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Hadamard(..) => "hadamard",
            Op::MatMul(..) => "matmul",
            Op::MatMulTb(..) => "matmul_tb",
            Op::Transpose(..) => "transpose",
            Op::Scale(..) => "scale",
            Op::AddRowBroadcast(..) => "add_row_broadcast",
            Op::Cos(..) => "cos",
            Op::Tanh(..) => "tanh",
            Op::Relu(..) => "relu",
            Op::Dot(..) => "dot",
            Op::Sum(..) => "sum",
            Op::RowSum(..) => "row_sum",
            Op::CenterGram(..) => "center_gram",
            Op::RbfGram(..) => "rbf_gram",
            Op::SliceCols(..) => "slice_cols",
        }
    }
}

struct Node {
    op: Op,
    value: Tensor2,
    needs_grad: bool,
}

/// Gradients produced by a backward pass, keyed by tape node.
pub struct Grads {
    adjoints: Vec<Option<Tensor2>>,
}

impl Grads {
    /// Gradient of the loss w.r.t. the node, zero-filled when the node did
    /// not influence the loss (the gradient of a constant is zero).
    pub fn get(&self, id: VarId, shape_of: &Tape) -> Tensor2 {
        match &self.adjoints[id.0] {
            Some(t) => t.clone(),
            None => {
                let (r, c) = shape_of.value(id).shape();
                Tensor2::zeros(r, c)
            }
        }
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: VarId) -> &Tensor2 {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor2, needs_grad: bool) -> VarId {
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        VarId(self.nodes.len() - 1)
    }

    fn needs(&self, id: VarId) -> bool {
        self.nodes[id.0].needs_grad
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor2) -> VarId {
        self.push(Op::Leaf, value, true)
    }

    /// Non-trainable leaf (data, frozen weights).
    pub fn constant(&mut self, value: Tensor2) -> VarId {
        self.push(Op::Leaf, value, false)
    }

    pub fn add(&mut self, a: VarId, b: VarId) -> VarId {
        let v = self.value(a).add(self.value(b));
        self.push(Op::Add(a, b), v, self.needs(a) || self.needs(b))
    }

    pub fn sub(&mut self, a: VarId, b: VarId) -> VarId {
        let v = self.value(a).sub(self.value(b));
        self.push(Op::Sub(a, b), v, self.needs(a) || self.needs(b))
    }

    pub fn hadamard(&mut self, a: VarId, b: VarId) -> VarId {
        let v = self.value(a).hadamard(self.value(b));
        self.push(Op::Hadamard(a, b), v, self.needs(a) || self.needs(b))
    }

    pub fn matmul(&mut self, a: VarId, b: VarId) -> VarId {
        let v = self.value(a).matmul(self.value(b));
        self.push(Op::MatMul(a, b), v, self.needs(a) || self.needs(b))
    }

    /// `a * b^T`; the natural shape for `X * W^T` layer forwards.
    pub fn matmul_tb(&mut self, a: VarId, b: VarId) -> VarId {
        let v = self.value(a).matmul_tb(self.value(b));
        self.push(Op::MatMulTb(a, b), v, self.needs(a) || self.needs(b))
    }

    pub fn transpose(&mut self, a: VarId) -> VarId {
        let v = self.value(a).transpose();
        self.push(Op::Transpose(a), v, self.needs(a))
    }

    pub fn scale(&mut self, a: VarId, c: f64) -> VarId {
        let v = self.value(a).scale(c);
        self.push(Op::Scale(a, c), v, self.needs(a))
    }

    /// Adds a 1 x c row to every row of `a`.
    pub fn add_row_broadcast(&mut self, a: VarId, row: VarId) -> VarId {
        let v = self.value(a).add_row_broadcast(self.value(row));
        self.push(
            Op::AddRowBroadcast(a, row),
            v,
            self.needs(a) || self.needs(row),
        )
    }

    pub fn cos(&mut self, a: VarId) -> VarId {
        let v = self.value(a).map(f64::cos);
        self.push(Op::Cos(a), v, self.needs(a))
    }

    pub fn tanh(&mut self, a: VarId) -> VarId {
        let v = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), v, self.needs(a))
    }

    pub fn relu(&mut self, a: VarId) -> VarId {
        let v = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        self.push(Op::Relu(a), v, self.needs(a))
    }

    /// Sum of the elementwise product, as a 1x1 node.
    pub fn dot(&mut self, a: VarId, b: VarId) -> VarId {
        let v = self.value(a).dot(self.value(b));
        self.push(
            Op::Dot(a, b),
            Tensor2::from_vec(1, 1, vec![v]),
            self.needs(a) || self.needs(b),
        )
    }

    /// Sum of all entries, as a 1x1 node.
    pub fn sum(&mut self, a: VarId) -> VarId {
        let v = self.value(a).sum();
        self.push(Op::Sum(a), Tensor2::from_vec(1, 1, vec![v]), self.needs(a))
    }

    /// Row sums, as an n x 1 node.
    pub fn row_sum(&mut self, a: VarId) -> VarId {
        let v = self.value(a).row_sums();
        self.push(Op::RowSum(a), v, self.needs(a))
    }

    /// Doubly-centered square matrix `H a H`.
    pub fn center_gram(&mut self, a: VarId) -> VarId {
        let v = center(self.value(a));
        self.push(Op::CenterGram(a), v, self.needs(a))
    }

    /// RBF Gram matrix of the rows of `a` with bandwidth `sigma`.
    pub fn rbf_gram(&mut self, a: VarId, sigma: f64) -> VarId {
        assert!(sigma > 0.0, "rbf bandwidth must be positive");
        let v = rbf_gram(self.value(a), sigma);
        self.push(Op::RbfGram(a, sigma), v, self.needs(a))
    }

    pub fn slice_cols(&mut self, a: VarId, lo: usize, hi: usize) -> VarId {
        let v = self.value(a).slice_cols(lo, hi);
        self.push(Op::SliceCols(a, lo, hi), v, self.needs(a))
    }

    // ----- composites -----

    /// `(1/rows) * sum of squared entries`: the mean-over-samples squared
    /// row norm used by the reconstruction and prediction terms.
    pub fn mean_sq(&mut self, a: VarId) -> VarId {
        let n = self.value(a).rows() as f64;
        let d = self.dot(a, a);
        self.scale(d, 1.0 / n)
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, id: VarId) -> f64 {
        let v = self.value(id);
        assert_eq!(v.shape(), (1, 1), "node is not a scalar");
        v.get(0, 0)
    }

    /// First node holding a non-finite value, if any.
    pub fn first_nonfinite(&self) -> Option<(usize, &'static str)> {
        self.nodes
            .iter()
            .enumerate()
            .find(|(_, n)| !n.value.is_finite())
            .map(|(i, n)| (i, n.op.name()))
    }

    /// Reverse pass from a scalar loss node.
    pub fn backward(&self, loss: VarId) -> Result<Grads> {
        if let Some((node, op)) = self.first_nonfinite() {
            return Err(Error::NonFinite { op, node });
        }
        assert_eq!(
            self.value(loss).shape(),
            (1, 1),
            "backward root must be a scalar"
        );
        let mut adj: Vec<Option<Tensor2>> = (0..self.nodes.len()).map(|_| None).collect();
        adj[loss.0] = Some(Tensor2::from_vec(1, 1, vec![1.0]));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let Some(g) = adj[idx].take() else { continue };
            self.accumulate(idx, &g, &mut adj);
            adj[idx] = Some(g);
        }

        for (idx, a) in adj.iter().enumerate() {
            if let Some(t) = a {
                if !t.is_finite() {
                    return Err(Error::NonFinite {
                        op: self.nodes[idx].op.name(),
                        node: idx,
                    });
                }
            }
        }
        Ok(Grads { adjoints: adj })
    }

    /// Loss value plus gradients for the given parameter leaves.
    pub fn value_and_grad(&self, loss: VarId, params: &[VarId]) -> Result<(f64, Vec<Tensor2>)> {
        let grads = self.backward(loss)?;
        let value = self.scalar(loss);
        Ok((
            value,
            params.iter().map(|&p| grads.get(p, self)).collect(),
        ))
    }

    fn accumulate(&self, idx: usize, g: &Tensor2, adj: &mut [Option<Tensor2>]) {
        let mut push = |id: VarId, delta: Tensor2| {
            if !self.nodes[id.0].needs_grad {
                return;
            }
            match &mut adj[id.0] {
                Some(acc) => acc.add_assign(&delta),
                slot => *slot = Some(delta),
            }
        };

        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                push(*a, g.clone());
                push(*b, g.clone());
            }
            Op::Sub(a, b) => {
                push(*a, g.clone());
                push(*b, g.scale(-1.0));
            }
            Op::Hadamard(a, b) => {
                push(*a, g.hadamard(self.value(*b)));
                push(*b, g.hadamard(self.value(*a)));
            }
            Op::MatMul(a, b) => {
                push(*a, g.matmul_tb(self.value(*b)));
                push(*b, self.value(*a).matmul_ta(g));
            }
            Op::MatMulTb(a, b) => {
                push(*a, g.matmul(self.value(*b)));
                push(*b, g.matmul_ta(self.value(*a)));
            }
            Op::Transpose(a) => push(*a, g.transpose()),
            Op::Scale(a, c) => push(*a, g.scale(*c)),
            Op::AddRowBroadcast(a, row) => {
                push(*a, g.clone());
                push(*row, g.col_sums());
            }
            Op::Cos(a) => {
                let da = self.value(*a).map(|x| -x.sin());
                push(*a, g.hadamard(&da));
            }
            Op::Tanh(a) => {
                let y = &self.nodes[idx].value;
                let da = y.map(|t| 1.0 - t * t);
                push(*a, g.hadamard(&da));
            }
            Op::Relu(a) => {
                let mask = self.value(*a).map(|x| if x > 0.0 { 1.0 } else { 0.0 });
                push(*a, g.hadamard(&mask));
            }
            Op::Dot(a, b) => {
                let s = g.get(0, 0);
                push(*a, self.value(*b).scale(s));
                push(*b, self.value(*a).scale(s));
            }
            Op::Sum(a) => {
                let s = g.get(0, 0);
                let (r, c) = self.value(*a).shape();
                push(*a, Tensor2::from_fn(r, c, |_, _| s));
            }
            Op::RowSum(a) => {
                let (r, c) = self.value(*a).shape();
                let mut d = Tensor2::zeros(r, c);
                for i in 0..r {
                    let gi = g.get(i, 0);
                    d.row_mut(i).fill(gi);
                }
                push(*a, d);
            }
            Op::CenterGram(a) => {
                // linear and self-adjoint: the adjoint is centered the same way
                push(*a, center(g));
            }
            Op::RbfGram(a, sigma) => {
                push(*a, rbf_gram_backward(self.value(*a), &self.nodes[idx].value, g, *sigma));
            }
            Op::SliceCols(a, lo, _hi) => {
                let (r, c) = self.value(*a).shape();
                let mut d = Tensor2::zeros(r, c);
                for i in 0..r {
                    d.row_mut(i)[*lo..*lo + g.cols()].copy_from_slice(g.row(i));
                }
                push(*a, d);
            }
        }
    }
}

/// `H K H` computed as `K - rowmean - colmean + grandmean`.
fn center(k: &Tensor2) -> Tensor2 {
    let (n, m) = k.shape();
    assert_eq!(n, m, "center_gram expects a square matrix");
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| k.row(i).iter().sum::<f64>() / nf).collect();
    let mut col_means = vec![0.0; n];
    for i in 0..n {
        for (cm, &v) in col_means.iter_mut().zip(k.row(i)) {
            *cm += v;
        }
    }
    for cm in &mut col_means {
        *cm /= nf;
    }
    let grand = row_means.iter().sum::<f64>() / nf;
    Tensor2::from_fn(n, n, |i, j| k.get(i, j) - row_means[i] - col_means[j] + grand)
}

fn rbf_gram(x: &Tensor2, sigma: f64) -> Tensor2 {
    let n = x.rows();
    let g = x.matmul_tb(x);
    let sq: Vec<f64> = (0..n).map(|i| g.get(i, i)).collect();
    let inv = 1.0 / (2.0 * sigma * sigma);
    Tensor2::from_fn(n, n, |i, j| {
        let d2 = (sq[i] + sq[j] - 2.0 * g.get(i, j)).max(0.0);
        (-d2 * inv).exp()
    })
}

/// Adjoint of the RBF Gram map: with `w = (G + G^T) .* K`, the input adjoint
/// is `(W X - diag(W 1) X) / sigma^2`.
fn rbf_gram_backward(x: &Tensor2, k: &Tensor2, g: &Tensor2, sigma: f64) -> Tensor2 {
    let n = x.rows();
    let w = Tensor2::from_fn(n, n, |i, j| (g.get(i, j) + g.get(j, i)) * k.get(i, j));
    let wx = w.matmul(x);
    let row_tot = w.row_sums();
    let mut out = wx;
    for i in 0..n {
        let t = row_tot.get(i, 0);
        for (o, &xv) in out.row_mut(i).iter_mut().zip(x.row(i)) {
            *o -= t * xv;
        }
    }
    out.scale(1.0 / (sigma * sigma))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_identity() {
        // f(w) = w^T w at w = [1, 2]: value 5, grad [2, 4]
        let mut t = Tape::new();
        let w = t.param(Tensor2::from_vec(1, 2, vec![1.0, 2.0]));
        let loss = t.dot(w, w);
        let (v, g) = t.value_and_grad(loss, &[w]).unwrap();
        assert_eq!(v, 5.0);
        assert_eq!(g[0].data(), &[2.0, 4.0]);
    }

    #[test]
    fn cos_at_zero() {
        let mut t = Tape::new();
        let w = t.param(Tensor2::from_vec(1, 1, vec![0.0]));
        let c = t.cos(w);
        let loss = t.sum(c);
        let (v, g) = t.value_and_grad(loss, &[w]).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(g[0].get(0, 0), 0.0);
    }

    #[test]
    fn constant_has_zero_grad() {
        let mut t = Tape::new();
        let w = t.param(Tensor2::from_vec(1, 1, vec![3.0]));
        let c = t.constant(Tensor2::from_vec(1, 1, vec![4.0]));
        let p = t.hadamard(w, c);
        let loss = t.sum(p);
        let (_, g) = t.value_and_grad(loss, &[w, c]).unwrap();
        assert_eq!(g[0].get(0, 0), 4.0);
        assert_eq!(g[1].get(0, 0), 0.0);
    }

    #[test]
    fn nonfinite_is_reported_with_node() {
        let mut t = Tape::new();
        let w = t.param(Tensor2::from_vec(1, 1, vec![f64::INFINITY]));
        let loss = t.dot(w, w);
        match t.backward(loss) {
            Err(Error::NonFinite { node, .. }) => assert_eq!(node, 0),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn centering_annihilates_constants() {
        let k = Tensor2::from_fn(5, 5, |_, _| 3.25);
        let c = center(&k);
        assert!(c.frob_norm() < 1e-12);
    }
}
