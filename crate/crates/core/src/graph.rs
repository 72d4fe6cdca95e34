//! Reverse-mode automatic differentiation over a linear tape.
//!
//! A [`Graph`] borrows the parameter set read-only for the duration of one
//! forward pass. Operations are appended in execution order and
//! [`Graph::backward`] replays them in exact reverse order, producing a
//! [`Gradients`] value the optimizer consumes afterwards.

use crate::error::{Error, Result};
use crate::params::{Gradients, ParamId, ParamSet};
use crate::tensor::{gemm, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul {
        a: NodeId,
        b: NodeId,
        ta: bool,
        tb: bool,
    },
    AddRowBias {
        x: NodeId,
        bias: NodeId,
    },
    AddColumn {
        x: NodeId,
        col: NodeId,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Mul {
        a: NodeId,
        b: NodeId,
    },
    Scale {
        x: NodeId,
        s: f64,
    },
    Sigmoid(NodeId),
    Tanh(NodeId),
    Sum(NodeId),
    Reshape(NodeId),
    ConcatCols(Vec<NodeId>),
    SliceCols {
        x: NodeId,
        start: usize,
    },
    RowDot {
        z: NodeId,
        u: NodeId,
    },
    Softmax(NodeId),
    SoftmaxCrossEntropy {
        logits: NodeId,
        targets: Vec<usize>,
        probs: Vec<f64>,
    },
    Normalize {
        x: NodeId,
        width: usize,
        lo: Vec<usize>,
        hi: Vec<usize>,
        range: Vec<f64>,
    },
    StraightThrough(NodeId),
    GruGates {
        gi: NodeId,
        gh: NodeId,
        h: NodeId,
        r: Vec<f64>,
        z: Vec<f64>,
        n: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Option<Tensor>,
    requires_grad: bool,
}

/// Degenerate-word threshold for min-max normalization.
pub const NORMALIZE_EPS: f64 = 1e-12;

pub struct Graph<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<NodeId>>,
    track_params: bool,
    consumed: bool,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl<'p> Graph<'p> {
    /// Tape whose parameter leaves collect gradients.
    pub fn new(params: &'p ParamSet) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
            param_nodes: vec![None; params.len()],
            track_params: true,
            consumed: false,
        }
    }

    /// Tape for forward-only evaluation; nothing requires a gradient.
    pub fn inference(params: &'p ParamSet) -> Self {
        Graph {
            track_params: false,
            ..Graph::new(params)
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

    pub fn value(&self, id: NodeId) -> &Tensor {
        let node = &self.nodes[id.0];
        match (&node.op, &node.value) {
            (_, Some(v)) => v,
            (Op::Param(pid), None) => self.params.get(*pid),
            _ => unreachable!("every non-parameter node owns its value"),
        }
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("{:?}", op_name(&op))));
        }
        self.nodes.push(Node {
            op,
            value: Some(value),
            requires_grad,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    fn rg(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Result<NodeId> {
        self.push(Op::Leaf, value, false)
    }

    /// Leaf that requires a gradient without being a registered parameter.
    /// Used for gradient checks on inputs.
    pub fn variable(&mut self, value: Tensor) -> Result<NodeId> {
        self.push(Op::Leaf, value, true)
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(node) = self.param_nodes[id.0] {
            return node;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
            requires_grad: self.track_params,
        });
        let node = NodeId(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(node);
        node
    }

    /// `op(a) · op(b)` where `op` optionally transposes a rank-2 operand.
    pub fn matmul_t(&mut self, a: NodeId, b: NodeId, ta: bool, tb: bool) -> Result<NodeId> {
        let (ar, ac) = self.value(a).dims2()?;
        let (br, bc) = self.value(b).dims2()?;
        let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
        let (k2, n) = if tb { (bc, br) } else { (br, bc) };
        if k != k2 {
            return Err(Error::dim(
                "matmul",
                format!("[{m}x{k}] · [{k2}x{n}]"),
            ));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.value(a).data(), ta, self.value(b).data(), tb, 0.0, &mut out);
        let rg = self.rg(&[a, b]);
        self.push(Op::MatMul { a, b, ta, tb }, Tensor::new(vec![m, n], out)?, rg)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.matmul_t(a, b, false, false)
    }

    /// `x [m×n] + bias [n]`, broadcast over rows.
    pub fn add_row_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let (m, n) = self.value(x).dims2()?;
        if self.value(bias).len() != n {
            return Err(Error::dim(
                "add_row_bias",
                format!("bias of {} for {n} columns", self.value(bias).len()),
            ));
        }
        let mut out = self.value(x).data().to_vec();
        let b = self.value(bias).data();
        for row in out.chunks_mut(n) {
            add_into(row, b);
        }
        let rg = self.rg(&[x, bias]);
        self.push(Op::AddRowBias { x, bias }, Tensor::new(vec![m, n], out)?, rg)
    }

    /// `x [m×n] + col [m]`, broadcast over columns.
    pub fn add_column(&mut self, x: NodeId, col: NodeId) -> Result<NodeId> {
        let (m, n) = self.value(x).dims2()?;
        if self.value(col).len() != m {
            return Err(Error::dim(
                "add_column",
                format!("column of {} for {m} rows", self.value(col).len()),
            ));
        }
        let mut out = self.value(x).data().to_vec();
        let c = self.value(col).data();
        for (row, &cv) in out.chunks_mut(n).zip(c) {
            row.iter_mut().for_each(|v| *v += cv);
        }
        let rg = self.rg(&[x, col]);
        self.push(Op::AddColumn { x, col }, Tensor::new(vec![m, n], out)?, rg)
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::dim(
                op,
                format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        let rg = self.rg(&[a, b]);
        self.push(Op::Add { a, b }, Tensor::new(shape, out)?, rg)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        let rg = self.rg(&[a, b]);
        self.push(Op::Mul { a, b }, Tensor::new(shape, out)?, rg)
    }

    pub fn scale(&mut self, x: NodeId, s: f64) -> Result<NodeId> {
        let v = self.value(x);
        let out = v.data().iter().map(|a| a * s).collect();
        let shape = v.shape().to_vec();
        let rg = self.rg(&[x]);
        self.push(Op::Scale { x, s }, Tensor::new(shape, out)?, rg)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x);
        let out = v.data().iter().map(|&a| sigmoid(a)).collect();
        let shape = v.shape().to_vec();
        let rg = self.rg(&[x]);
        self.push(Op::Sigmoid(x), Tensor::new(shape, out)?, rg)
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x);
        let out = v.data().iter().map(|a| a.tanh()).collect();
        let shape = v.shape().to_vec();
        let rg = self.rg(&[x]);
        self.push(Op::Tanh(x), Tensor::new(shape, out)?, rg)
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(&[x]);
        self.push(Op::Sum(x), Tensor::scalar(s), rg)
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let t = self.value(x).clone().reshape(shape)?;
        let rg = self.rg(&[x]);
        self.push(Op::Reshape(x), t, rg)
    }

    /// Concatenates rank-2 tensors with equal row counts along columns.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = parts
            .first()
            .ok_or_else(|| Error::dim("concat_cols", "no inputs"))?;
        let (rows, _) = self.value(*first).dims2()?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.value(p).dims2()?;
            if r != rows {
                return Err(Error::dim("concat_cols", format!("{r} rows vs {rows}")));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let rg = self.rg(parts);
        self.push(Op::ConcatCols(parts.to_vec()), Tensor::new(vec![rows, total], out)?, rg)
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let (rows, cols) = self.value(x).dims2()?;
        if start + len > cols {
            return Err(Error::dim(
                "slice_cols",
                format!("{start}..{} of {cols} columns", start + len),
            ));
        }
        let data = self.value(x).data();
        let mut out = Vec::with_capacity(rows * len);
        for i in 0..rows {
            out.extend_from_slice(&data[i * cols + start..i * cols + start + len]);
        }
        let rg = self.rg(&[x]);
        self.push(Op::SliceCols { x, start }, Tensor::new(vec![rows, len], out)?, rg)
    }

    /// `out[i, j] = z[i] · u[i * n + j]` for `z [b×h]` and `u [(b·n)×h]`.
    pub fn row_dot(&mut self, z: NodeId, u: NodeId) -> Result<NodeId> {
        let (b, h) = self.value(z).dims2()?;
        let (bn, h2) = self.value(u).dims2()?;
        if h != h2 || b == 0 || bn % b != 0 {
            return Err(Error::dim("row_dot", format!("[{b}x{h}] against [{bn}x{h2}]")));
        }
        let n = bn / b;
        let zv = self.value(z).data();
        let uv = self.value(u).data();
        let mut out = vec![0.0; b * n];
        for i in 0..b {
            let zi = &zv[i * h..(i + 1) * h];
            for j in 0..n {
                let uj = &uv[(i * n + j) * h..(i * n + j + 1) * h];
                out[i * n + j] = zi.iter().zip(uj).map(|(p, q)| p * q).sum();
            }
        }
        let rg = self.rg(&[z, u]);
        self.push(Op::RowDot { z, u }, Tensor::new(vec![b, n], out)?, rg)
    }

    /// Row-wise softmax of a rank-2 tensor.
    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let (m, n) = self.value(x).dims2()?;
        let out = softmax_rows(self.value(x).data(), n);
        let rg = self.rg(&[x]);
        self.push(Op::Softmax(x), Tensor::new(vec![m, n], out)?, rg)
    }

    /// Mean over rows of `-log softmax(logits)[target]`.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
        let (m, n) = self.value(logits).dims2()?;
        if targets.len() != m {
            return Err(Error::dim(
                "softmax_cross_entropy",
                format!("{} targets for {m} rows", targets.len()),
            ));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= n) {
            return Err(Error::Contract(format!(
                "target index {t} outside [0, {n})"
            )));
        }
        let data = self.value(logits).data();
        let mut probs = vec![0.0; m * n];
        let mut loss = 0.0;
        for i in 0..m {
            let row = &data[i * n..(i + 1) * n];
            let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (p, &v) in probs[i * n..(i + 1) * n].iter_mut().zip(row) {
                *p = (v - mx).exp();
                z += *p;
            }
            probs[i * n..(i + 1) * n].iter_mut().for_each(|p| *p /= z);
            loss += z.ln() - (row[targets[i]] - mx);
        }
        loss /= m as f64;
        let rg = self.rg(&[logits]);
        self.push(
            Op::SoftmaxCrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            Tensor::scalar(loss),
            rg,
        )
    }

    /// Min-max normalizes every consecutive group of `width` values to
    /// `[0, 1]`. A group whose range is below [`NORMALIZE_EPS`] maps to zeros.
    pub fn normalize(&mut self, x: NodeId, width: usize) -> Result<NodeId> {
        let v = self.value(x);
        if width == 0 || !v.len().is_multiple_of(width) {
            return Err(Error::dim(
                "normalize",
                format!("{} values in words of {width}", v.len()),
            ));
        }
        let words = v.len() / width;
        let mut out = vec![0.0; v.len()];
        let mut lo = Vec::with_capacity(words);
        let mut hi = Vec::with_capacity(words);
        let mut range = Vec::with_capacity(words);
        for w in 0..words {
            let word = &v.data()[w * width..(w + 1) * width];
            let (mut li, mut hi_i) = (0, 0);
            for (i, &val) in word.iter().enumerate() {
                if val < word[li] {
                    li = i;
                }
                if val > word[hi_i] {
                    hi_i = i;
                }
            }
            let r = word[hi_i] - word[li];
            if r > NORMALIZE_EPS {
                for (o, &val) in out[w * width..(w + 1) * width].iter_mut().zip(word) {
                    *o = (val - word[li]) / r;
                }
                // exact endpoints
                out[w * width + li] = 0.0;
                out[w * width + hi_i] = 1.0;
            }
            lo.push(li);
            hi.push(hi_i);
            range.push(r);
        }
        let shape = v.shape().to_vec();
        let rg = self.rg(&[x]);
        self.push(
            Op::Normalize {
                x,
                width,
                lo,
                hi,
                range,
            },
            Tensor::new(shape, out)?,
            rg,
        )
    }

    /// Records `forward` as the output while passing gradients straight
    /// through to `x` during backward.
    pub fn straight_through(&mut self, x: NodeId, forward: Tensor) -> Result<NodeId> {
        if forward.shape() != self.value(x).shape() {
            return Err(Error::dim(
                "straight_through",
                format!("{:?} vs {:?}", forward.shape(), self.value(x).shape()),
            ));
        }
        let rg = self.rg(&[x]);
        self.push(Op::StraightThrough(x), forward, rg)
    }

    /// Gated-recurrent-unit state update from pre-computed input and hidden
    /// projections `gi, gh [b×3H]` (gate blocks ordered reset, update,
    /// candidate) and previous state `h [b×H]`.
    pub fn gru_gates(&mut self, gi: NodeId, gh: NodeId, h: NodeId) -> Result<NodeId> {
        let (b, hd) = self.value(h).dims2()?;
        for (name, id) in [("input projection", gi), ("hidden projection", gh)] {
            let (r, c) = self.value(id).dims2()?;
            if r != b || c != 3 * hd {
                return Err(Error::dim(
                    "gru",
                    format!("{name} is [{r}x{c}], expected [{b}x{}]", 3 * hd),
                ));
            }
        }
        let giv = self.value(gi).data();
        let ghv = self.value(gh).data();
        let hv = self.value(h).data();
        let mut r = vec![0.0; b * hd];
        let mut z = vec![0.0; b * hd];
        let mut n = vec![0.0; b * hd];
        let mut out = vec![0.0; b * hd];
        for i in 0..b {
            let gir = &giv[i * 3 * hd..(i * 3 + 1) * hd];
            let giz = &giv[(i * 3 + 1) * hd..(i * 3 + 2) * hd];
            let gin = &giv[(i * 3 + 2) * hd..(i * 3 + 3) * hd];
            let ghr = &ghv[i * 3 * hd..(i * 3 + 1) * hd];
            let ghz = &ghv[(i * 3 + 1) * hd..(i * 3 + 2) * hd];
            let ghn = &ghv[(i * 3 + 2) * hd..(i * 3 + 3) * hd];
            for j in 0..hd {
                let k = i * hd + j;
                r[k] = sigmoid(gir[j] + ghr[j]);
                z[k] = sigmoid(giz[j] + ghz[j]);
                n[k] = (gin[j] + r[k] * ghn[j]).tanh();
                out[k] = (1.0 - z[k]) * n[k] + z[k] * hv[k];
            }
        }
        let rg = self.rg(&[gi, gh, h]);
        self.push(
            Op::GruGates { gi, gh, h, r, z, n },
            Tensor::new(vec![b, hd], out)?,
            rg,
        )
    }

    /// Back-propagates from `output`, seeding its gradient with ones.
    /// A tape may be replayed only once.
    pub fn backward(&mut self, output: NodeId) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::Tape(
                "backward already ran on this tape; record a new forward pass".into(),
            ));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(vec![1.0; self.value(output).len()]);
        let mut out = Gradients::new(self.params.len());

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            self.backward_node(idx, g, &mut grads, &mut out)?;
        }
        Ok(out)
    }

    fn backward_node(
        &self,
        idx: usize,
        g: Vec<f64>,
        grads: &mut [Option<Vec<f64>>],
        out: &mut Gradients,
    ) -> Result<()> {
        let nodes = &self.nodes;
        macro_rules! slot {
            ($id:expr) => {{
                let id: NodeId = $id;
                if nodes[id.0].requires_grad {
                    let len = self.value(id).len();
                    Some(grads[id.0].get_or_insert_with(|| vec![0.0; len]))
                } else {
                    None
                }
            }};
        }
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::Param(pid) => {
                let shape = self.params.get(*pid).shape().to_vec();
                if !g.iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "gradient of {}",
                        self.params.name(*pid)
                    )));
                }
                out.set(*pid, Tensor::new(shape, g)?);
            }
            &Op::MatMul { a, b, ta, tb } => {
                let (ar, ac) = self.value(a).dims2()?;
                let (br, bc) = self.value(b).dims2()?;
                let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
                let n = if tb { br } else { bc };
                let av = self.value(a).data();
                let bv = self.value(b).data();
                if let Some(da) = slot!(a) {
                    if ta {
                        gemm(k, n, m, bv, tb, &g, true, 1.0, da);
                    } else {
                        gemm(m, n, k, &g, false, bv, !tb, 1.0, da);
                    }
                }
                if let Some(db) = slot!(b) {
                    if tb {
                        gemm(n, m, k, &g, true, av, ta, 1.0, db);
                    } else {
                        gemm(k, m, n, av, !ta, &g, false, 1.0, db);
                    }
                }
            }
            &Op::AddRowBias { x, bias } => {
                let n = self.value(bias).len();
                if let Some(dx) = slot!(x) {
                    add_into(dx, &g);
                }
                if let Some(db) = slot!(bias) {
                    for row in g.chunks(n) {
                        add_into(db, row);
                    }
                }
            }
            &Op::AddColumn { x, col } => {
                let m = self.value(col).len();
                let n = g.len() / m.max(1);
                if let Some(dx) = slot!(x) {
                    add_into(dx, &g);
                }
                if let Some(dc) = slot!(col) {
                    for (d, row) in dc.iter_mut().zip(g.chunks(n)) {
                        *d += row.iter().sum::<f64>();
                    }
                }
            }
            &Op::Add { a, b } => {
                if let Some(da) = slot!(a) {
                    add_into(da, &g);
                }
                if let Some(db) = slot!(b) {
                    add_into(db, &g);
                }
            }
            &Op::Mul { a, b } => {
                let av = self.value(a).data();
                let bv = self.value(b).data();
                if let Some(da) = slot!(a) {
                    for ((d, gi), bi) in da.iter_mut().zip(&g).zip(bv) {
                        *d += gi * bi;
                    }
                }
                if let Some(db) = slot!(b) {
                    for ((d, gi), ai) in db.iter_mut().zip(&g).zip(av) {
                        *d += gi * ai;
                    }
                }
            }
            &Op::Scale { x, s } => {
                if let Some(dx) = slot!(x) {
                    for (d, gi) in dx.iter_mut().zip(&g) {
                        *d += s * gi;
                    }
                }
            }
            &Op::Sigmoid(x) => {
                let y = self.nodes[idx].value.as_ref().expect("owned").data();
                if let Some(dx) = slot!(x) {
                    for ((d, gi), yi) in dx.iter_mut().zip(&g).zip(y) {
                        *d += gi * yi * (1.0 - yi);
                    }
                }
            }
            &Op::Tanh(x) => {
                let y = self.nodes[idx].value.as_ref().expect("owned").data();
                if let Some(dx) = slot!(x) {
                    for ((d, gi), yi) in dx.iter_mut().zip(&g).zip(y) {
                        *d += gi * (1.0 - yi * yi);
                    }
                }
            }
            &Op::Sum(x) => {
                if let Some(dx) = slot!(x) {
                    dx.iter_mut().for_each(|d| *d += g[0]);
                }
            }
            &Op::Reshape(x) | &Op::StraightThrough(x) => {
                if let Some(dx) = slot!(x) {
                    add_into(dx, &g);
                }
            }
            Op::ConcatCols(parts) => {
                let rows = self.value(parts[0]).dims2()?.0;
                let total = g.len() / rows.max(1);
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).dims2()?.1;
                    if let Some(dp) = slot!(p) {
                        for i in 0..rows {
                            add_into(
                                &mut dp[i * w..(i + 1) * w],
                                &g[i * total + offset..i * total + offset + w],
                            );
                        }
                    }
                    offset += w;
                }
            }
            &Op::SliceCols { x, start } => {
                let (rows, cols) = self.value(x).dims2()?;
                let len = g.len() / rows.max(1);
                if let Some(dx) = slot!(x) {
                    for i in 0..rows {
                        add_into(
                            &mut dx[i * cols + start..i * cols + start + len],
                            &g[i * len..(i + 1) * len],
                        );
                    }
                }
            }
            &Op::RowDot { z, u } => {
                let (b, h) = self.value(z).dims2()?;
                let n = g.len() / b;
                let zv = self.value(z).data();
                let uv = self.value(u).data();
                if let Some(dz) = slot!(z) {
                    for i in 0..b {
                        for j in 0..n {
                            let gij = g[i * n + j];
                            let uj = &uv[(i * n + j) * h..(i * n + j + 1) * h];
                            for (d, q) in dz[i * h..(i + 1) * h].iter_mut().zip(uj) {
                                *d += gij * q;
                            }
                        }
                    }
                }
                if let Some(du) = slot!(u) {
                    for i in 0..b {
                        let zi = &zv[i * h..(i + 1) * h];
                        for j in 0..n {
                            let gij = g[i * n + j];
                            for (d, p) in du[(i * n + j) * h..(i * n + j + 1) * h].iter_mut().zip(zi) {
                                *d += gij * p;
                            }
                        }
                    }
                }
            }
            &Op::Softmax(x) => {
                let y = self.nodes[idx].value.as_ref().expect("owned");
                let n = y.dims2()?.1;
                if let Some(dx) = slot!(x) {
                    for ((drow, grow), yrow) in dx.chunks_mut(n).zip(g.chunks(n)).zip(y.data().chunks(n)) {
                        let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                        for ((d, gi), yi) in drow.iter_mut().zip(grow).zip(yrow) {
                            *d += yi * (gi - dot);
                        }
                    }
                }
            }
            Op::SoftmaxCrossEntropy {
                logits,
                targets,
                probs,
            } => {
                let m = targets.len();
                let n = probs.len() / m;
                let scale = g[0] / m as f64;
                if let Some(dl) = slot!(*logits) {
                    for (i, &t) in targets.iter().enumerate() {
                        let row = &mut dl[i * n..(i + 1) * n];
                        for (d, p) in row.iter_mut().zip(&probs[i * n..(i + 1) * n]) {
                            *d += scale * p;
                        }
                        row[t] -= scale;
                    }
                }
            }
            Op::Normalize {
                x,
                width,
                lo,
                hi,
                range,
            } => {
                let y = self.nodes[idx].value.as_ref().expect("owned").data();
                let width = *width;
                if let Some(dx) = slot!(*x) {
                    for w in 0..range.len() {
                        let r = range[w];
                        if r <= NORMALIZE_EPS {
                            continue;
                        }
                        let base = w * width;
                        let gw = &g[base..base + width];
                        let yw = &y[base..base + width];
                        let mut to_lo = 0.0;
                        let mut to_hi = 0.0;
                        for (gi, yi) in gw.iter().zip(yw) {
                            to_lo += gi * (yi - 1.0);
                            to_hi -= gi * yi;
                        }
                        for (d, gi) in dx[base..base + width].iter_mut().zip(gw) {
                            *d += gi / r;
                        }
                        dx[base + lo[w]] += to_lo / r;
                        dx[base + hi[w]] += to_hi / r;
                    }
                }
            }
            Op::GruGates { gi, gh, h, r, z, n } => {
                let hd = self.value(*h).dims2()?.1;
                let b = g.len() / hd;
                let hv = self.value(*h).data();
                let ghv = self.value(*gh).data();
                // pre-activation gradients, laid out like gi/gh: [b x 3H]
                let mut d_pre_i = vec![0.0; b * 3 * hd];
                let mut d_pre_h = vec![0.0; b * 3 * hd];
                let mut dh = vec![0.0; b * hd];
                for i in 0..b {
                    for j in 0..hd {
                        let k = i * hd + j;
                        let gk = g[k];
                        dh[k] = gk * z[k];
                        let dz = gk * (hv[k] - n[k]) * z[k] * (1.0 - z[k]);
                        let dn = gk * (1.0 - z[k]) * (1.0 - n[k] * n[k]);
                        let ghn = ghv[(i * 3 + 2) * hd + j];
                        let dr = dn * ghn * r[k] * (1.0 - r[k]);
                        d_pre_i[i * 3 * hd + j] = dr;
                        d_pre_h[i * 3 * hd + j] = dr;
                        d_pre_i[(i * 3 + 1) * hd + j] = dz;
                        d_pre_h[(i * 3 + 1) * hd + j] = dz;
                        d_pre_i[(i * 3 + 2) * hd + j] = dn;
                        d_pre_h[(i * 3 + 2) * hd + j] = dn * r[k];
                    }
                }
                if let Some(d) = slot!(*gi) {
                    add_into(d, &d_pre_i);
                }
                if let Some(d) = slot!(*gh) {
                    add_into(d, &d_pre_h);
                }
                if let Some(d) = slot!(*h) {
                    add_into(d, &dh);
                }
            }
        }
        Ok(())
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::Param(_) => "param",
        Op::MatMul { .. } => "matmul",
        Op::AddRowBias { .. } => "add_row_bias",
        Op::AddColumn { .. } => "add_column",
        Op::Add { .. } => "add",
        Op::Mul { .. } => "mul",
        Op::Scale { .. } => "scale",
        Op::Sigmoid(_) => "sigmoid",
        Op::Tanh(_) => "tanh",
        Op::Sum(_) => "sum",
        Op::Reshape(_) => "reshape",
        Op::ConcatCols(_) => "concat_cols",
        Op::SliceCols { .. } => "slice_cols",
        Op::RowDot { .. } => "row_dot",
        Op::Softmax(_) => "softmax",
        Op::SoftmaxCrossEntropy { .. } => "softmax_cross_entropy",
        Op::Normalize { .. } => "normalize",
        Op::StraightThrough(_) => "straight_through",
        Op::GruGates { .. } => "gru",
    }
}

/// Numerically stable row-wise softmax over a flat `[m×n]` buffer.
pub fn softmax_rows(data: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for (orow, row) in out.chunks_mut(n).zip(data.chunks(n)) {
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (o, &v) in orow.iter_mut().zip(row) {
            *o = (v - mx).exp();
            z += *o;
        }
        orow.iter_mut().for_each(|o| *o /= z);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_matmul() {
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        let a = g.constant(Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]])).unwrap();
        let b = g.constant(Tensor::from_rows(&[vec![3.0], vec![4.0]])).unwrap();
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c).data(), &[3.0, 4.0]);
    }

    #[test]
    fn row_vector_matmul() {
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        let a = g.constant(Tensor::from_rows(&[vec![1.0, 2.0]])).unwrap();
        let b = g.constant(Tensor::from_rows(&[vec![3.0], vec![4.0]])).unwrap();
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c).data(), &[11.0]);
    }

    #[test]
    fn matmul_shape_mismatch() {
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        let a = g.constant(Tensor::zeros(&[2, 3])).unwrap();
        let b = g.constant(Tensor::zeros(&[2, 3])).unwrap();
        assert!(matches!(g.matmul(a, b), Err(Error::Dimension { .. })));
    }

    #[test]
    fn uniform_logits_cross_entropy() {
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        let l = g.constant(Tensor::zeros(&[1, 4])).unwrap();
        let loss = g.softmax_cross_entropy(l, &[2]).unwrap();
        assert!((g.value(loss).item() - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_cross_entropy() {
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        let l = g
            .constant(Tensor::from_rows(&[vec![0.0, 1000.0, 0.0]]))
            .unwrap();
        let loss = g.softmax_cross_entropy(l, &[1]).unwrap();
        assert!(g.value(loss).item().abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_index_out_of_range() {
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        let l = g.constant(Tensor::zeros(&[1, 4])).unwrap();
        assert!(g.softmax_cross_entropy(l, &[4]).is_err());
    }

    #[test]
    fn second_backward_is_error() {
        let mut ps = ParamSet::new();
        let w = ps.add("w", Tensor::new(vec![2], vec![1.0, 2.0]).unwrap());
        let mut g = Graph::new(&ps);
        let wn = g.param(w);
        let s = g.sum(wn).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[1.0, 1.0]);
        assert!(matches!(g.backward(s), Err(Error::Tape(_))));
    }

    #[test]
    fn zero_gru_stays_zero() {
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        let gi = g.constant(Tensor::zeros(&[2, 9])).unwrap();
        let gh = g.constant(Tensor::zeros(&[2, 9])).unwrap();
        let h = g.constant(Tensor::zeros(&[2, 3])).unwrap();
        let out = g.gru_gates(gi, gh, h).unwrap();
        assert!(g.value(out).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalize_examples() {
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        let x = g.constant(Tensor::new(vec![2], vec![0.0, 2.0]).unwrap()).unwrap();
        let y = g.normalize(x, 2).unwrap();
        assert_eq!(g.value(y).data(), &[0.0, 1.0]);
        let x = g.constant(Tensor::new(vec![3], vec![5.0; 3]).unwrap()).unwrap();
        let y = g.normalize(x, 3).unwrap();
        assert_eq!(g.value(y).data(), &[0.0, 0.0, 0.0]);
        let x = g
            .constant(Tensor::new(vec![3], vec![-1.0, 0.0, 3.0]).unwrap())
            .unwrap();
        let y = g.normalize(x, 3).unwrap();
        assert_eq!(g.value(y).data(), &[0.0, 0.25, 1.0]);
    }

    #[test]
    fn non_finite_is_rejected() {
        let ps = ParamSet::new();
        let mut g = Graph::new(&ps);
        assert!(matches!(
            g.constant(Tensor::new(vec![1], vec![f64::NAN]).unwrap()),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let data = [1.0, 2.0, 3.0, -50.0, 0.0, 700.0];
        let p = softmax_rows(&data, 3);
        for row in p.chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
