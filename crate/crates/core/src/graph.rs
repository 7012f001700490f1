//! Reverse-mode automatic differentiation over a dynamic computation graph.
//!
//! The graph is a tape: nodes are appended in evaluation order, so every
//! input id of a node is smaller than the node's own id and a single
//! reverse sweep visits each node exactly once. Values are computed
//! eagerly when an op is recorded and every output is checked for
//! non-finite entries on the spot.

use crate::tensor::Tensor;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("{op}: incompatible shapes {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: non-finite output at node {node}")]
    NonFinite { op: &'static str, node: usize },
    #[error("backward needs a scalar loss, node {node} has shape {shape:?}")]
    LossNotScalar { node: usize, shape: Vec<usize> },
}

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone)]
enum Op {
    /// Constant leaf; gradients are accumulated but never consumed.
    Input,
    /// Trainable leaf; gradients are read back after `backward`.
    Param,
    /// y = x · Wᵀ + b, x: [n×in], w: [out×in], b: [out].
    Linear { x: usize, w: usize, b: usize },
    /// C = Aᵀ · B, a: [n×p], b: [n×q].
    MatmulTn { a: usize, b: usize },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    AddScalar { a: usize },
    Scale { a: usize, c: f64 },
    Relu { a: usize },
    Tanh { a: usize },
    Sigmoid { a: usize },
    Exp { a: usize },
    Ln { a: usize },
    Square { a: usize },
    Recip { a: usize },
    Clamp { a: usize, lo: f64, hi: f64 },
    SumAll { a: usize },
    RowSum { a: usize },
    MeanRows { a: usize },
    /// y = a − 1·r (subtract a [1×d] row vector from every row of a).
    BroadcastSubRow { a: usize, r: usize },
    /// D[i][j] = ‖a_i − b_j‖².
    PairwiseSqDist { a: usize, b: usize },
    SliceCols { a: usize, start: usize, len: usize },
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Dynamic computation graph, rebuilt per mini-batch.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Vec<f64>>,
}

pub(crate) fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// y = x · Wᵀ + b with fixed loop order; shared by the graph evaluator and
/// by the no-grad network application so both paths are bit-identical.
pub(crate) fn linear_vals(
    x: &[f64],
    n: usize,
    d_in: usize,
    w: &[f64],
    d_out: usize,
    b: &[f64],
) -> Vec<f64> {
    let mut y = vec![0.0; n * d_out];
    for i in 0..n {
        let xr = &x[i * d_in..(i + 1) * d_in];
        let yr = &mut y[i * d_out..(i + 1) * d_out];
        for (o, yo) in yr.iter_mut().enumerate() {
            let wr = &w[o * d_in..(o + 1) * d_in];
            let mut acc = 0.0;
            for k in 0..d_in {
                acc += xr[k] * wr[k];
            }
            *yo = acc + b[o];
        }
    }
    y
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient of the last backward pass, zero-filled for unreachable nodes.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.grads.get(id.0).map(|g| g.as_slice())
    }

    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push_unchecked(Op::Input, value)
    }

    pub fn param(&mut self, value: &Tensor) -> NodeId {
        self.push_unchecked(Op::Param, value.clone())
    }

    fn push_unchecked(&mut self, op: Op, value: Tensor) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node { op, value });
        NodeId(id)
    }

    fn push(&mut self, name: &'static str, op: Op, value: Tensor) -> Result<NodeId, GraphError> {
        if value.first_non_finite().is_some() {
            return Err(GraphError::NonFinite {
                op: name,
                node: self.nodes.len(),
            });
        }
        Ok(self.push_unchecked(op, value))
    }

    fn matrix_dims(&self, name: &'static str, id: NodeId) -> Result<(usize, usize), GraphError> {
        let t = &self.nodes[id.0].value;
        match t.shape() {
            [n, d] => Ok((*n, *d)),
            other => Err(GraphError::ShapeMismatch {
                op: name,
                lhs: other.to_vec(),
                rhs: vec![],
            }),
        }
    }

    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let (n, d_in) = self.matrix_dims("linear", x)?;
        let (d_out, w_in) = self.matrix_dims("linear", w)?;
        let bt = &self.nodes[b.0].value;
        if w_in != d_in || bt.len() != d_out {
            return Err(GraphError::ShapeMismatch {
                op: "linear",
                lhs: self.nodes[x.0].value.shape().to_vec(),
                rhs: self.nodes[w.0].value.shape().to_vec(),
            });
        }
        let y = linear_vals(
            self.nodes[x.0].value.values(),
            n,
            d_in,
            self.nodes[w.0].value.values(),
            d_out,
            self.nodes[b.0].value.values(),
        );
        let t = Tensor::matrix(n, d_out, y).expect("linear output shape");
        self.push(
            "linear",
            Op::Linear {
                x: x.0,
                w: w.0,
                b: b.0,
            },
            t,
        )
    }

    pub fn matmul_tn(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let (na, p) = self.matrix_dims("matmul_tn", a)?;
        let (nb, q) = self.matrix_dims("matmul_tn", b)?;
        if na != nb {
            return Err(GraphError::ShapeMismatch {
                op: "matmul_tn",
                lhs: vec![na, p],
                rhs: vec![nb, q],
            });
        }
        let av = self.nodes[a.0].value.values();
        let bv = self.nodes[b.0].value.values();
        let mut c = vec![0.0; p * q];
        for r in 0..na {
            let ar = &av[r * p..(r + 1) * p];
            let br = &bv[r * q..(r + 1) * q];
            for (i, &ai) in ar.iter().enumerate() {
                let row = &mut c[i * q..(i + 1) * q];
                for (j, &bj) in br.iter().enumerate() {
                    row[j] += ai * bj;
                }
            }
        }
        let t = Tensor::matrix(p, q, c).expect("matmul_tn output shape");
        self.push("matmul_tn", Op::MatmulTn { a: a.0, b: b.0 }, t)
    }

    fn elementwise(
        &mut self,
        name: &'static str,
        a: NodeId,
        b: NodeId,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<NodeId, GraphError> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if ta.shape() != tb.shape() {
            return Err(GraphError::ShapeMismatch {
                op: name,
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let vals: Vec<f64> = ta
            .values()
            .iter()
            .zip(tb.values())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let t = Tensor::new(ta.shape().to_vec(), vals).expect("elementwise shape");
        self.push(name, op, t)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        self.elementwise("add", a, b, |x, y| x + y, Op::Add { a: a.0, b: b.0 })
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        self.elementwise("sub", a, b, |x, y| x - y, Op::Sub { a: a.0, b: b.0 })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        self.elementwise("mul", a, b, |x, y| x * y, Op::Mul { a: a.0, b: b.0 })
    }

    fn unary(
        &mut self,
        name: &'static str,
        a: NodeId,
        f: impl Fn(f64) -> f64,
        op: Op,
    ) -> Result<NodeId, GraphError> {
        let ta = &self.nodes[a.0].value;
        let vals: Vec<f64> = ta.values().iter().map(|&x| f(x)).collect();
        let t = Tensor::new(ta.shape().to_vec(), vals).expect("unary shape");
        self.push(name, op, t)
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> Result<NodeId, GraphError> {
        self.unary("add_scalar", a, |x| x + c, Op::AddScalar { a: a.0 })
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId, GraphError> {
        self.unary("scale", a, |x| x * c, Op::Scale { a: a.0, c })
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId, GraphError> {
        self.unary("relu", a, |x| if x > 0.0 { x } else { 0.0 }, Op::Relu { a: a.0 })
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId, GraphError> {
        self.unary("tanh", a, f64::tanh, Op::Tanh { a: a.0 })
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId, GraphError> {
        self.unary("sigmoid", a, sigmoid_scalar, Op::Sigmoid { a: a.0 })
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId, GraphError> {
        self.unary("exp", a, f64::exp, Op::Exp { a: a.0 })
    }

    pub fn ln(&mut self, a: NodeId) -> Result<NodeId, GraphError> {
        self.unary("ln", a, f64::ln, Op::Ln { a: a.0 })
    }

    pub fn square(&mut self, a: NodeId) -> Result<NodeId, GraphError> {
        self.unary("square", a, |x| x * x, Op::Square { a: a.0 })
    }

    pub fn recip(&mut self, a: NodeId) -> Result<NodeId, GraphError> {
        self.unary("recip", a, |x| 1.0 / x, Op::Recip { a: a.0 })
    }

    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> Result<NodeId, GraphError> {
        self.unary(
            "clamp",
            a,
            |x| x.clamp(lo, hi),
            Op::Clamp { a: a.0, lo, hi },
        )
    }

    pub fn sum_all(&mut self, a: NodeId) -> Result<NodeId, GraphError> {
        let s: f64 = self.nodes[a.0].value.values().iter().sum();
        self.push("sum_all", Op::SumAll { a: a.0 }, Tensor::scalar(s))
    }

    pub fn row_sum(&mut self, a: NodeId) -> Result<NodeId, GraphError> {
        let (n, d) = self.matrix_dims("row_sum", a)?;
        let v = self.nodes[a.0].value.values();
        let sums: Vec<f64> = (0..n).map(|i| v[i * d..(i + 1) * d].iter().sum()).collect();
        let t = Tensor::matrix(n, 1, sums).expect("row_sum shape");
        self.push("row_sum", Op::RowSum { a: a.0 }, t)
    }

    pub fn mean_rows(&mut self, a: NodeId) -> Result<NodeId, GraphError> {
        let (n, d) = self.matrix_dims("mean_rows", a)?;
        let v = self.nodes[a.0].value.values();
        let mut m = vec![0.0; d];
        for i in 0..n {
            for j in 0..d {
                m[j] += v[i * d + j];
            }
        }
        for mj in &mut m {
            *mj /= n as f64;
        }
        let t = Tensor::matrix(1, d, m).expect("mean_rows shape");
        self.push("mean_rows", Op::MeanRows { a: a.0 }, t)
    }

    pub fn broadcast_sub_row(&mut self, a: NodeId, r: NodeId) -> Result<NodeId, GraphError> {
        let (n, d) = self.matrix_dims("broadcast_sub_row", a)?;
        let rt = &self.nodes[r.0].value;
        if rt.len() != d {
            return Err(GraphError::ShapeMismatch {
                op: "broadcast_sub_row",
                lhs: vec![n, d],
                rhs: rt.shape().to_vec(),
            });
        }
        let av = self.nodes[a.0].value.values();
        let rv = self.nodes[r.0].value.values();
        let mut y = vec![0.0; n * d];
        for i in 0..n {
            for j in 0..d {
                y[i * d + j] = av[i * d + j] - rv[j];
            }
        }
        let t = Tensor::matrix(n, d, y).expect("broadcast_sub_row shape");
        self.push(
            "broadcast_sub_row",
            Op::BroadcastSubRow { a: a.0, r: r.0 },
            t,
        )
    }

    pub fn pairwise_sqdist(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let (n, da) = self.matrix_dims("pairwise_sqdist", a)?;
        let (m, db) = self.matrix_dims("pairwise_sqdist", b)?;
        if da != db {
            return Err(GraphError::ShapeMismatch {
                op: "pairwise_sqdist",
                lhs: vec![n, da],
                rhs: vec![m, db],
            });
        }
        let av = self.nodes[a.0].value.values();
        let bv = self.nodes[b.0].value.values();
        let mut dmat = vec![0.0; n * m];
        for i in 0..n {
            let ai = &av[i * da..(i + 1) * da];
            for j in 0..m {
                let bj = &bv[j * da..(j + 1) * da];
                let mut s = 0.0;
                for k in 0..da {
                    let diff = ai[k] - bj[k];
                    s += diff * diff;
                }
                dmat[i * m + j] = s;
            }
        }
        let t = Tensor::matrix(n, m, dmat).expect("pairwise shape");
        self.push(
            "pairwise_sqdist",
            Op::PairwiseSqDist { a: a.0, b: b.0 },
            t,
        )
    }

    pub fn slice_cols(
        &mut self,
        a: NodeId,
        start: usize,
        len: usize,
    ) -> Result<NodeId, GraphError> {
        let (n, d) = self.matrix_dims("slice_cols", a)?;
        if start + len > d {
            return Err(GraphError::ShapeMismatch {
                op: "slice_cols",
                lhs: vec![n, d],
                rhs: vec![start, len],
            });
        }
        let av = self.nodes[a.0].value.values();
        let mut y = vec![0.0; n * len];
        for i in 0..n {
            y[i * len..(i + 1) * len]
                .copy_from_slice(&av[i * d + start..i * d + start + len]);
        }
        let t = Tensor::matrix(n, len, y).expect("slice shape");
        self.push("slice_cols", Op::SliceCols { a: a.0, start, len }, t)
    }

    /// Populates gradients of every node reachable from `loss`; unreachable
    /// nodes keep a zero gradient.
    pub fn backward(&mut self, loss: NodeId) -> Result<(), GraphError> {
        let loss_t = &self.nodes[loss.0].value;
        if loss_t.len() != 1 {
            return Err(GraphError::LossNotScalar {
                node: loss.0,
                shape: loss_t.shape().to_vec(),
            });
        }
        self.grads = self
            .nodes
            .iter()
            .map(|n| vec![0.0; n.value.len()])
            .collect();
        self.grads[loss.0][0] = 1.0;

        for out in (0..=loss.0).rev() {
            let g_out = std::mem::take(&mut self.grads[out]);
            self.propagate(out, &g_out);
            self.grads[out] = g_out;
        }
        Ok(())
    }

    fn propagate(&mut self, out: usize, g: &[f64]) {
        // Clones of the op are cheap (ids and scalars only).
        let op = self.nodes[out].op.clone();
        match op {
            Op::Input | Op::Param => {}
            Op::Linear { x, w, b } => {
                let n = self.nodes[x].value.rows();
                let d_in = self.nodes[x].value.cols();
                let d_out = self.nodes[w].value.rows();
                let xv = self.nodes[x].value.values().to_vec();
                let wv = self.nodes[w].value.values().to_vec();
                {
                    let gx = &mut self.grads[x];
                    for i in 0..n {
                        let gr = &g[i * d_out..(i + 1) * d_out];
                        let gxr = &mut gx[i * d_in..(i + 1) * d_in];
                        for (o, &go) in gr.iter().enumerate() {
                            let wr = &wv[o * d_in..(o + 1) * d_in];
                            for k in 0..d_in {
                                gxr[k] += go * wr[k];
                            }
                        }
                    }
                }
                {
                    let gw = &mut self.grads[w];
                    for i in 0..n {
                        let gr = &g[i * d_out..(i + 1) * d_out];
                        let xr = &xv[i * d_in..(i + 1) * d_in];
                        for (o, &go) in gr.iter().enumerate() {
                            let gwr = &mut gw[o * d_in..(o + 1) * d_in];
                            for k in 0..d_in {
                                gwr[k] += go * xr[k];
                            }
                        }
                    }
                }
                {
                    let gb = &mut self.grads[b];
                    for i in 0..n {
                        let gr = &g[i * d_out..(i + 1) * d_out];
                        for (o, &go) in gr.iter().enumerate() {
                            gb[o] += go;
                        }
                    }
                }
            }
            Op::MatmulTn { a, b } => {
                let n = self.nodes[a].value.rows();
                let p = self.nodes[a].value.cols();
                let q = self.nodes[b].value.cols();
                let av = self.nodes[a].value.values().to_vec();
                let bv = self.nodes[b].value.values().to_vec();
                {
                    // dA[r,i] += Σ_j B[r,j] · g[i,j]
                    let ga = &mut self.grads[a];
                    for r in 0..n {
                        let br = &bv[r * q..(r + 1) * q];
                        let gar = &mut ga[r * p..(r + 1) * p];
                        for i in 0..p {
                            let gi = &g[i * q..(i + 1) * q];
                            let mut acc = 0.0;
                            for j in 0..q {
                                acc += br[j] * gi[j];
                            }
                            gar[i] += acc;
                        }
                    }
                }
                {
                    // dB[r,j] += Σ_i A[r,i] · g[i,j]
                    let gb = &mut self.grads[b];
                    for r in 0..n {
                        let ar = &av[r * p..(r + 1) * p];
                        let gbr = &mut gb[r * q..(r + 1) * q];
                        for (i, &ai) in ar.iter().enumerate() {
                            let gi = &g[i * q..(i + 1) * q];
                            for j in 0..q {
                                gbr[j] += ai * gi[j];
                            }
                        }
                    }
                }
            }
            Op::Add { a, b } => {
                for (ga, &gi) in self.grads[a].iter_mut().zip(g) {
                    *ga += gi;
                }
                for (gb, &gi) in self.grads[b].iter_mut().zip(g) {
                    *gb += gi;
                }
            }
            Op::Sub { a, b } => {
                for (ga, &gi) in self.grads[a].iter_mut().zip(g) {
                    *ga += gi;
                }
                for (gb, &gi) in self.grads[b].iter_mut().zip(g) {
                    *gb -= gi;
                }
            }
            Op::Mul { a, b } => {
                let av = self.nodes[a].value.values().to_vec();
                let bv = self.nodes[b].value.values().to_vec();
                for i in 0..g.len() {
                    self.grads[a][i] += g[i] * bv[i];
                }
                for i in 0..g.len() {
                    self.grads[b][i] += g[i] * av[i];
                }
            }
            Op::AddScalar { a } => {
                for (ga, &gi) in self.grads[a].iter_mut().zip(g) {
                    *ga += gi;
                }
            }
            Op::Scale { a, c } => {
                for (ga, &gi) in self.grads[a].iter_mut().zip(g) {
                    *ga += c * gi;
                }
            }
            Op::Relu { a } => {
                let av = self.nodes[a].value.values().to_vec();
                for i in 0..g.len() {
                    if av[i] > 0.0 {
                        self.grads[a][i] += g[i];
                    }
                }
            }
            Op::Tanh { a } => {
                let yv = self.nodes[out].value.values().to_vec();
                for i in 0..g.len() {
                    self.grads[a][i] += g[i] * (1.0 - yv[i] * yv[i]);
                }
            }
            Op::Sigmoid { a } => {
                let yv = self.nodes[out].value.values().to_vec();
                for i in 0..g.len() {
                    self.grads[a][i] += g[i] * yv[i] * (1.0 - yv[i]);
                }
            }
            Op::Exp { a } => {
                let yv = self.nodes[out].value.values().to_vec();
                for i in 0..g.len() {
                    self.grads[a][i] += g[i] * yv[i];
                }
            }
            Op::Ln { a } => {
                let av = self.nodes[a].value.values().to_vec();
                for i in 0..g.len() {
                    self.grads[a][i] += g[i] / av[i];
                }
            }
            Op::Square { a } => {
                let av = self.nodes[a].value.values().to_vec();
                for i in 0..g.len() {
                    self.grads[a][i] += g[i] * 2.0 * av[i];
                }
            }
            Op::Recip { a } => {
                let yv = self.nodes[out].value.values().to_vec();
                for i in 0..g.len() {
                    self.grads[a][i] -= g[i] * yv[i] * yv[i];
                }
            }
            Op::Clamp { a, lo, hi } => {
                let av = self.nodes[a].value.values().to_vec();
                for i in 0..g.len() {
                    if av[i] >= lo && av[i] <= hi {
                        self.grads[a][i] += g[i];
                    }
                }
            }
            Op::SumAll { a } => {
                let gi = g[0];
                for ga in self.grads[a].iter_mut() {
                    *ga += gi;
                }
            }
            Op::RowSum { a } => {
                let d = self.nodes[a].value.cols();
                let ga = &mut self.grads[a];
                for (i, &gi) in g.iter().enumerate() {
                    for gaj in &mut ga[i * d..(i + 1) * d] {
                        *gaj += gi;
                    }
                }
            }
            Op::MeanRows { a } => {
                let n = self.nodes[a].value.rows();
                let d = self.nodes[a].value.cols();
                let inv = 1.0 / n as f64;
                let ga = &mut self.grads[a];
                for i in 0..n {
                    for j in 0..d {
                        ga[i * d + j] += g[j] * inv;
                    }
                }
            }
            Op::BroadcastSubRow { a, r } => {
                let d = self.nodes[a].value.cols();
                for (ga, &gi) in self.grads[a].iter_mut().zip(g) {
                    *ga += gi;
                }
                let gr = &mut self.grads[r];
                for (i, &gi) in g.iter().enumerate() {
                    gr[i % d] -= gi;
                }
            }
            Op::PairwiseSqDist { a, b } => {
                let n = self.nodes[a].value.rows();
                let m = self.nodes[b].value.rows();
                let d = self.nodes[a].value.cols();
                let av = self.nodes[a].value.values().to_vec();
                let bv = self.nodes[b].value.values().to_vec();
                {
                    let ga = &mut self.grads[a];
                    for i in 0..n {
                        let ai = &av[i * d..(i + 1) * d];
                        let gai = &mut ga[i * d..(i + 1) * d];
                        for j in 0..m {
                            let gij = g[i * m + j];
                            if gij == 0.0 {
                                continue;
                            }
                            let bj = &bv[j * d..(j + 1) * d];
                            for k in 0..d {
                                gai[k] += gij * 2.0 * (ai[k] - bj[k]);
                            }
                        }
                    }
                }
                {
                    let gb = &mut self.grads[b];
                    for j in 0..m {
                        let bj = &bv[j * d..(j + 1) * d];
                        let gbj = &mut gb[j * d..(j + 1) * d];
                        for i in 0..n {
                            let gij = g[i * m + j];
                            if gij == 0.0 {
                                continue;
                            }
                            let ai = &av[i * d..(i + 1) * d];
                            for k in 0..d {
                                gbj[k] += gij * 2.0 * (bj[k] - ai[k]);
                            }
                        }
                    }
                }
            }
            Op::SliceCols { a, start, len } => {
                let d = self.nodes[a].value.cols();
                let n = self.nodes[a].value.rows();
                let ga = &mut self.grads[a];
                for i in 0..n {
                    for k in 0..len {
                        ga[i * d + start + k] += g[i * len + k];
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_input(g: &mut Graph, v: f64) -> NodeId {
        g.input(Tensor::scalar(v))
    }

    #[test]
    fn square_loss_gradient() {
        // loss = x² at x = 3 → grad 6
        let mut g = Graph::new();
        let x = g.param(&Tensor::scalar(3.0));
        let loss = g.square(x).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[6.0]);
    }

    #[test]
    fn relu_flat_region_gradient_is_zero() {
        let mut g = Graph::new();
        let x = g.param(&Tensor::scalar(-1.0));
        let y = g.relu(x).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[0.0]);
    }

    #[test]
    fn relu_at_exact_zero_has_zero_gradient() {
        let mut g = Graph::new();
        let x = g.param(&Tensor::scalar(0.0));
        let y = g.relu(x).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[0.0]);
    }

    #[test]
    fn relu_values() {
        let mut g = Graph::new();
        let x = g.input(Tensor::vector(vec![-1.0, 0.0, 2.0]));
        let y = g.relu(x).unwrap();
        assert_eq!(g.value(y).values(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn linear_hand_example() {
        // W = I₂, b = (1,1), x = (3,4) → (4,5)
        let mut g = Graph::new();
        let x = g.input(Tensor::matrix(1, 2, vec![3.0, 4.0]).unwrap());
        let w = g.param(&Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let b = g.param(&Tensor::vector(vec![1.0, 1.0]));
        let y = g.linear(x, w, b).unwrap();
        assert_eq!(g.value(y).values(), &[4.0, 5.0]);
    }

    #[test]
    fn identity_passthrough() {
        let mut g = Graph::new();
        let x = g.input(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let y = g.add_scalar(x, 0.0).unwrap();
        assert_eq!(g.value(y).values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut g = Graph::new();
        let x = g.input(Tensor::vector(vec![1.0, 2.0]));
        let y = g.square(x).unwrap();
        assert!(matches!(
            g.backward(y),
            Err(GraphError::LossNotScalar { .. })
        ));
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let mut g = Graph::new();
        let a = g.input(Tensor::matrix(2, 2, vec![0.0; 4]).unwrap());
        let b = g.input(Tensor::matrix(2, 3, vec![0.0; 6]).unwrap());
        match g.add(a, b) {
            Err(GraphError::ShapeMismatch { lhs, rhs, .. }) => {
                assert_eq!(lhs, vec![2, 2]);
                assert_eq!(rhs, vec![2, 3]);
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_output_is_detected_with_node_id() {
        let mut g = Graph::new();
        let x = scalar_input(&mut g, -1.0);
        match g.ln(x) {
            Err(GraphError::NonFinite { node, .. }) => assert_eq!(node, 1),
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn forward_is_pure() {
        let run = || {
            let mut g = Graph::new();
            let x = g.input(Tensor::vector(vec![0.3, -1.7, 2.5]));
            let y = g.tanh(x).unwrap();
            let z = g.square(y).unwrap();
            let s = g.sum_all(z).unwrap();
            g.value(s).item()
        };
        assert_eq!(run().to_bits(), run().to_bits());
    }

    #[test]
    fn gradient_of_sum_equals_sum_of_gradients() {
        // d(l1+l2)/dx vs dl1/dx + dl2/dx on separate tapes
        let build = |with: u8| -> f64 {
            let mut g = Graph::new();
            let x = g.param(&Tensor::scalar(0.7));
            let l1 = g.square(x).unwrap();
            let t = g.tanh(x).unwrap();
            let l2 = g.mul(t, x).unwrap();
            let loss = match with {
                0 => g.add(l1, l2).unwrap(),
                1 => l1,
                _ => l2,
            };
            g.backward(loss).unwrap();
            g.grad(x).unwrap()[0]
        };
        let combined = build(0);
        let separate = build(1) + build(2);
        assert!((combined - separate).abs() < 1e-15);
    }

    #[test]
    fn unreachable_parameter_gets_zero_gradient() {
        let mut g = Graph::new();
        let x = g.param(&Tensor::scalar(2.0));
        let unused = g.param(&Tensor::scalar(5.0));
        let loss = g.square(x).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(unused).unwrap(), &[0.0]);
    }

    #[test]
    fn slice_cols_roundtrip() {
        let mut g = Graph::new();
        let a = g.input(Tensor::matrix(2, 4, (0..8).map(|v| v as f64).collect()).unwrap());
        let s = g.slice_cols(a, 1, 2).unwrap();
        assert_eq!(g.value(s).values(), &[1.0, 2.0, 5.0, 6.0]);
    }

    #[test]
    fn pairwise_sqdist_values() {
        let mut g = Graph::new();
        let a = g.input(Tensor::matrix(2, 2, vec![0.0, 0.0, 1.0, 0.0]).unwrap());
        let b = g.input(Tensor::matrix(1, 2, vec![0.0, 2.0]).unwrap());
        let d = g.pairwise_sqdist(a, b).unwrap();
        assert_eq!(g.value(d).values(), &[4.0, 5.0]);
    }
}
