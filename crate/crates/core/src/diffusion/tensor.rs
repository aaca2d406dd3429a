//! Dense row-major matrices and a small reverse-mode tape over them.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "tensor shape {rows}x{cols} vs {} values", data.len());
        Self { rows, cols, data }
    }

    pub fn row_vector(data: Vec<f64>) -> Self {
        let n = data.len();
        Self::from_vec(1, n, data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols);
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// `a · b`
fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    assert_eq!(a.cols, b.rows, "matmul {}x{} · {}x{}", a.rows, a.cols, b.rows, b.cols);
    let mut out = Tensor::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for k in 0..a.cols {
            let av = a.data[i * a.cols + k];
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[k * b.cols..(k + 1) * b.cols];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `a · bᵀ`
fn matmul_nt(a: &Tensor, b: &Tensor) -> Tensor {
    assert_eq!(a.cols, b.cols);
    let mut out = Tensor::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let ar = a.row(i);
        for j in 0..b.rows {
            out.data[i * b.rows + j] = ar.iter().zip(b.row(j)).map(|(x, y)| x * y).sum();
        }
    }
    out
}

/// `aᵀ · b`
fn matmul_tn(a: &Tensor, b: &Tensor) -> Tensor {
    assert_eq!(a.rows, b.rows);
    let mut out = Tensor::zeros(a.cols, b.cols);
    for k in 0..a.rows {
        let ar = a.row(k);
        let br = b.row(k);
        for (i, av) in ar.iter().enumerate() {
            if *av == 0.0 {
                continue;
            }
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, bv) in orow.iter_mut().zip(br) {
                *o += av * bv;
            }
        }
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    /// Position on the tape; indexes the output of [`Tape::backward`].
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulNT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Silu(Var),
    SoftmaxRows(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    SumGroups(Var, Vec<usize>),
    MulConst(Var, Tensor),
    LinearConst(Var, Tensor),
    WeightedSse(Var, Tensor, Tensor),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Records operations for one forward pass; [`Tape::backward`] returns the
/// gradient of a scalar node with respect to every node.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = matmul(self.value(a), self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let v = matmul_nt(self.value(a), self.value(b));
        self.push(v, Op::MatMulNT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        assert_eq!(v.shape(), self.value(b).shape());
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    /// Adds the `1 × m` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let bias = self.value(b);
        assert_eq!(bias.rows, 1);
        let mut v = self.value(a).clone();
        assert_eq!(v.cols, bias.cols);
        for r in 0..v.rows {
            for (x, y) in v.data[r * v.cols..(r + 1) * v.cols].iter_mut().zip(&bias.data) {
                *x += y;
            }
        }
        self.push(v, Op::AddRow(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let mut v = self.value(a).clone();
        v.data.iter_mut().for_each(|x| *x *= s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        v.data.iter_mut().for_each(|x| *x *= sigmoid(*x));
        self.push(v, Op::Silu(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        let cols = v.cols;
        for r in 0..v.rows {
            let row = &mut v.data[r * cols..(r + 1) * cols];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for x in row.iter_mut() {
                *x = (*x - m).exp();
                s += *x;
            }
            row.iter_mut().for_each(|x| *x /= s);
        }
        self.push(v, Op::SoftmaxRows(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|p| self.value(*p).cols).sum();
        let mut v = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for p in parts {
                let t = self.value(*p);
                assert_eq!(t.rows, rows, "concat_cols row mismatch");
                v.data[r * cols + off..r * cols + off + t.cols].copy_from_slice(t.row(r));
                off += t.cols;
            }
        }
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let t = self.value(a);
        assert!(start + len <= t.cols);
        let mut v = Tensor::zeros(t.rows, len);
        for r in 0..t.rows {
            v.data[r * len..(r + 1) * len].copy_from_slice(&t.row(r)[start..start + len]);
        }
        self.push(v, Op::SliceCols(a, start))
    }

    /// Output row `r` is row `idx[r]` of `a`.
    pub fn gather_rows(&mut self, a: Var, idx: Vec<usize>) -> Var {
        let t = self.value(a);
        let mut v = Tensor::zeros(idx.len(), t.cols);
        for (r, i) in idx.iter().enumerate() {
            v.data[r * t.cols..(r + 1) * t.cols].copy_from_slice(t.row(*i));
        }
        self.push(v, Op::GatherRows(a, idx))
    }

    /// Output row `g` is the sum of rows `r` of `a` with `group[r] == g`.
    pub fn sum_groups(&mut self, a: Var, group: Vec<usize>, n_groups: usize) -> Var {
        let t = self.value(a);
        assert_eq!(group.len(), t.rows);
        let mut v = Tensor::zeros(n_groups, t.cols);
        for (r, g) in group.iter().enumerate() {
            for (x, y) in v.data[g * t.cols..(g + 1) * t.cols].iter_mut().zip(t.row(r)) {
                *x += y;
            }
        }
        self.push(v, Op::SumGroups(a, group))
    }

    pub fn mul_const(&mut self, a: Var, c: Tensor) -> Var {
        let mut v = self.value(a).clone();
        assert_eq!(v.shape(), c.shape());
        for (x, y) in v.data.iter_mut().zip(&c.data) {
            *x *= y;
        }
        self.push(v, Op::MulConst(a, c))
    }

    /// Flattens `a` row-major, multiplies by the constant `m`, and reshapes
    /// the result to `rows × cols`.
    pub fn linear_const(&mut self, a: Var, m: Tensor, rows: usize, cols: usize) -> Var {
        let t = self.value(a);
        assert_eq!(m.cols, t.data.len());
        assert_eq!(m.rows, rows * cols);
        let flat = Tensor::from_vec(t.data.len(), 1, t.data.clone());
        let out = matmul(&m, &flat);
        self.push(Tensor::from_vec(rows, cols, out.data), Op::LinearConst(a, m))
    }

    /// `Σ w ⊙ (a − target)²` as a `1 × 1` node.
    pub fn weighted_sse(&mut self, a: Var, target: Tensor, weights: Tensor) -> Var {
        let t = self.value(a);
        assert_eq!(t.shape(), target.shape());
        assert_eq!(t.shape(), weights.shape());
        let s: f64 = t.data.iter().zip(&target.data).zip(&weights.data).map(|((x, y), w)| w * (x - y) * (x - y)).sum();
        self.push(Tensor::from_vec(1, 1, vec![s]), Op::WeightedSse(a, target, weights))
    }

    /// Gradients of the scalar `root` with respect to every node.
    pub fn backward(&self, root: Var) -> Vec<Option<Tensor>> {
        assert_eq!(self.value(root).shape(), (1, 1), "backward needs a scalar root");
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Tensor::from_vec(1, 1, vec![1.0]));
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let acc = |grads: &mut Vec<Option<Tensor>>, v: Var, d: Tensor| match &mut grads[v.0] {
                Some(t) => t.add_assign(&d),
                slot @ None => *slot = Some(d),
            };
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    acc(&mut grads, *a, matmul_nt(&g, bv));
                    acc(&mut grads, *b, matmul_tn(av, &g));
                }
                Op::MatMulNT(a, b) => {
                    // out = a bᵀ: da = g b, db = gᵀ a
                    let (av, bv) = (self.value(*a), self.value(*b));
                    acc(&mut grads, *a, matmul(&g, bv));
                    acc(&mut grads, *b, matmul_tn(&g, av));
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g.clone());
                }
                Op::AddRow(a, b) => {
                    let mut db = Tensor::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (x, y) in db.data.iter_mut().zip(g.row(r)) {
                            *x += y;
                        }
                    }
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, db);
                }
                Op::Scale(a, s) => {
                    let mut d = g.clone();
                    d.data.iter_mut().for_each(|x| *x *= s);
                    acc(&mut grads, *a, d);
                }
                Op::Silu(a) => {
                    let x = self.value(*a);
                    let mut d = g.clone();
                    for (dv, xv) in d.data.iter_mut().zip(&x.data) {
                        let s = sigmoid(*xv);
                        *dv *= s * (1.0 + xv * (1.0 - s));
                    }
                    acc(&mut grads, *a, d);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut d = Tensor::zeros(y.rows, y.cols);
                    for r in 0..y.rows {
                        let yr = y.row(r);
                        let gr = g.row(r);
                        let dotp: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for c in 0..y.cols {
                            d.data[r * y.cols + c] = yr[c] * (gr[c] - dotp);
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let w = self.value(*p).cols;
                        let mut d = Tensor::zeros(g.rows, w);
                        for r in 0..g.rows {
                            d.data[r * w..(r + 1) * w].copy_from_slice(&g.row(r)[off..off + w]);
                        }
                        off += w;
                        acc(&mut grads, *p, d);
                    }
                }
                Op::SliceCols(a, start) => {
                    let src = self.value(*a);
                    let mut d = Tensor::zeros(src.rows, src.cols);
                    for r in 0..g.rows {
                        d.data[r * src.cols + start..r * src.cols + start + g.cols].copy_from_slice(g.row(r));
                    }
                    acc(&mut grads, *a, d);
                }
                Op::GatherRows(a, idx) => {
                    let src = self.value(*a);
                    let mut d = Tensor::zeros(src.rows, src.cols);
                    for (r, i) in idx.iter().enumerate() {
                        for (x, y) in d.data[i * src.cols..(i + 1) * src.cols].iter_mut().zip(g.row(r)) {
                            *x += y;
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::SumGroups(a, group) => {
                    let src = self.value(*a);
                    let mut d = Tensor::zeros(src.rows, src.cols);
                    for (r, gi) in group.iter().enumerate() {
                        d.data[r * src.cols..(r + 1) * src.cols].copy_from_slice(g.row(*gi));
                    }
                    acc(&mut grads, *a, d);
                }
                Op::MulConst(a, c) => {
                    let mut d = g.clone();
                    for (x, y) in d.data.iter_mut().zip(&c.data) {
                        *x *= y;
                    }
                    acc(&mut grads, *a, d);
                }
                Op::LinearConst(a, m) => {
                    let src = self.value(*a);
                    let gflat = Tensor::from_vec(g.data.len(), 1, g.data.clone());
                    let d = matmul_tn(m, &gflat);
                    acc(&mut grads, *a, Tensor::from_vec(src.rows, src.cols, d.data));
                }
                Op::WeightedSse(a, target, w) => {
                    let x = self.value(*a);
                    let s = g.data[0];
                    let data = x
                        .data
                        .iter()
                        .zip(&target.data)
                        .zip(&w.data)
                        .map(|((xv, tv), wv)| 2.0 * wv * (xv - tv) * s)
                        .collect();
                    acc(&mut grads, *a, Tensor::from_vec(x.rows, x.cols, data));
                }
            }
            grads[i] = Some(g);
        }
        grads
    }
}
