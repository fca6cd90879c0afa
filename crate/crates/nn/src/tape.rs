//! Reverse-mode differentiation over a recorded tape of matrix operations.
//!
//! Every value on the tape is viewed as a `rows × cols` matrix. Forward
//! operations append a node holding the computed value together with the
//! data its backward rule needs; [`Tape::backward`] walks the nodes in
//! reverse and returns the gradient of a scalar loss with respect to every
//! node.

use std::collections::HashMap;

use crate::error::{NnError, Result};
use crate::loss;
use crate::params::ParameterStore;
use crate::tensor::{matmul, matmul_at, matmul_bt, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(String),
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Scale(Var, f64),
    Gelu(Var),
    Tanh(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        rstd: Vec<f64>,
    },
    SoftmaxRows(Var),
    ConcatCols(Vec<Var>),
    SliceCols {
        x: Var,
        start: usize,
    },
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    SelectRows {
        x: Var,
        rows: Vec<usize>,
    },
    MaskedCe {
        logits: Var,
        probs: Vec<f64>,
        targets: Vec<usize>,
        mask: Vec<bool>,
        count: usize,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// A forward computation recorded for differentiation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<String, Var>,
}

/// Gradients of a scalar loss with respect to every node on a tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn wrt(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
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

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        let t = &self.nodes[v.0].value;
        (t.rows(), t.cols())
    }

    fn check(&self, v: Var) -> Result<()> {
        if v.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(NnError::ForeignVar(v.0))
        }
    }

    /// A constant input (no gradient flows to any parameter through it).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Loads a named parameter onto the tape. Repeated loads of the same name
    /// return the same variable.
    pub fn param(&mut self, store: &ParameterStore, name: &str) -> Result<Var> {
        if let Some(&v) = self.params.get(name) {
            return Ok(v);
        }
        let value = store.get(name)?.clone();
        let v = self.push(value, Op::Param(name.to_string()));
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let (n, k) = self.dims(a);
        let (k2, m) = self.dims(b);
        if k != k2 {
            return Err(NnError::ShapeMismatch {
                op: "matmul",
                expected: vec![k, m],
                got: vec![k2, m],
            });
        }
        let out = matmul(self.value(a).data(), self.value(b).data(), n, k, m);
        Ok(self.push(Tensor::raw(vec![n, m], out), Op::MatMul(a, b)))
    }

    /// `a · bᵀ`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let (n, k) = self.dims(a);
        let (m, k2) = self.dims(b);
        if k != k2 {
            return Err(NnError::ShapeMismatch {
                op: "matmul_bt",
                expected: vec![m, k],
                got: vec![m, k2],
            });
        }
        let out = matmul_bt(self.value(a).data(), self.value(b).data(), n, k, m);
        Ok(self.push(Tensor::raw(vec![n, m], out), Op::MatMulBt(a, b)))
    }

    /// Adds a row vector to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        self.check(a)?;
        self.check(bias)?;
        let (n, m) = self.dims(a);
        let b = self.value(bias);
        if b.len() != m {
            return Err(NnError::ShapeMismatch {
                op: "add_bias",
                expected: vec![m],
                got: b.shape().to_vec(),
            });
        }
        let bd = b.data().to_vec();
        let mut out = self.value(a).data().to_vec();
        for row in out.chunks_mut(m) {
            for (o, bv) in row.iter_mut().zip(&bd) {
                *o += bv;
            }
        }
        Ok(self.push(Tensor::raw(vec![n, m], out), Op::AddBias(a, bias)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        if self.dims(a) != self.dims(b) {
            let (ar, ac) = self.dims(a);
            let (br, bc) = self.dims(b);
            return Err(NnError::ShapeMismatch {
                op: "add",
                expected: vec![ar, ac],
                got: vec![br, bc],
            });
        }
        let (n, m) = self.dims(a);
        let out = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        Ok(self.push(Tensor::raw(vec![n, m], out), Op::Add(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.check(a)?;
        let (n, m) = self.dims(a);
        let out = self.value(a).data().iter().map(|x| x * s).collect();
        Ok(self.push(Tensor::raw(vec![n, m], out), Op::Scale(a, s)))
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let (n, m) = self.dims(a);
        let out = self.value(a).data().iter().map(|&x| gelu(x)).collect();
        Ok(self.push(Tensor::raw(vec![n, m], out), Op::Gelu(a)))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let (n, m) = self.dims(a);
        let out = self.value(a).data().iter().map(|x| x.tanh()).collect();
        Ok(self.push(Tensor::raw(vec![n, m], out), Op::Tanh(a)))
    }

    /// Row-wise layer normalization with learned gain and bias.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        self.check(x)?;
        let (n, m) = self.dims(x);
        if self.value(gamma).len() != m || self.value(beta).len() != m {
            return Err(NnError::ShapeMismatch {
                op: "layer_norm",
                expected: vec![m],
                got: self.value(gamma).shape().to_vec(),
            });
        }
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let xs = self.value(x).data();
        let mut xhat = vec![0.0; n * m];
        let mut rstd = vec![0.0; n];
        let mut out = vec![0.0; n * m];
        for r in 0..n {
            let row = &xs[r * m..(r + 1) * m];
            let mean = row.iter().sum::<f64>() / m as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
            let rs = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            rstd[r] = rs;
            for c in 0..m {
                let h = (row[c] - mean) * rs;
                xhat[r * m + c] = h;
                out[r * m + c] = g[c] * h + b[c];
            }
        }
        Ok(self.push(
            Tensor::raw(vec![n, m], out),
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            },
        ))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let (n, m) = self.dims(a);
        let mut out = self.value(a).data().to_vec();
        for row in out.chunks_mut(m) {
            loss::softmax_in_place(row);
        }
        Ok(self.push(Tensor::raw(vec![n, m], out), Op::SoftmaxRows(a)))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| NnError::InvalidConfig("concat of nothing".into()))?;
        for &p in parts {
            self.check(p)?;
        }
        let n = self.dims(first).0;
        if let Some(&bad) = parts.iter().find(|&&p| self.dims(p).0 != n) {
            return Err(NnError::ShapeMismatch {
                op: "concat_cols",
                expected: vec![n],
                got: vec![self.dims(bad).0],
            });
        }
        let total: usize = parts.iter().map(|&p| self.dims(p).1).sum();
        let mut out = Vec::with_capacity(n * total);
        for r in 0..n {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        Ok(self.push(Tensor::raw(vec![n, total], out), Op::ConcatCols(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        self.check(x)?;
        let (n, m) = self.dims(x);
        if start + len > m {
            return Err(NnError::ShapeMismatch {
                op: "slice_cols",
                expected: vec![m],
                got: vec![start + len],
            });
        }
        let mut out = Vec::with_capacity(n * len);
        for r in 0..n {
            out.extend_from_slice(&self.value(x).row(r)[start..start + len]);
        }
        Ok(self.push(Tensor::raw(vec![n, len], out), Op::SliceCols { x, start }))
    }

    /// Embedding lookup: row `ids[i]` of `table` becomes output row `i`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        self.check(table)?;
        let (vocab, m) = self.dims(table);
        let mut out = Vec::with_capacity(ids.len() * m);
        for &id in ids {
            if id >= vocab {
                return Err(NnError::TokenOutOfRange { id, vocab });
            }
            out.extend_from_slice(self.value(table).row(id));
        }
        Ok(self.push(
            Tensor::raw(vec![ids.len(), m], out),
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    pub fn select_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        self.check(x)?;
        let (n, m) = self.dims(x);
        let mut out = Vec::with_capacity(rows.len() * m);
        for &r in rows {
            if r >= n {
                return Err(NnError::ShapeMismatch {
                    op: "select_rows",
                    expected: vec![n],
                    got: vec![r],
                });
            }
            out.extend_from_slice(self.value(x).row(r));
        }
        Ok(self.push(
            Tensor::raw(vec![rows.len(), m], out),
            Op::SelectRows {
                x,
                rows: rows.to_vec(),
            },
        ))
    }

    /// Mean softmax cross-entropy over the rows where `mask` is true.
    pub fn masked_softmax_ce(&mut self, logits: Var, targets: &[usize], mask: &[bool]) -> Result<Var> {
        self.check(logits)?;
        let out = loss::softmax_cross_entropy(self.value(logits), targets, mask)?;
        Ok(self.push(
            Tensor::scalar(out.loss),
            Op::MaskedCe {
                logits,
                probs: out.probs.into_data(),
                targets: targets.to_vec(),
                mask: mask.to_vec(),
                count: out.count,
            },
        ))
    }

    /// Differentiates the scalar `loss` with respect to every node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(NnError::EmptyTape);
        }
        self.check(loss)?;
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(NnError::NotScalar(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(dout) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            let (n, m) = (node.value.rows(), node.value.cols());
            match &node.op {
                Op::Leaf | Op::Param(_) => {}
                Op::MatMul(a, b) => {
                    let k = self.dims(*a).1;
                    let da = matmul_bt(&dout, self.value(*b).data(), n, m, k);
                    let db = matmul_at(self.value(*a).data(), &dout, n, k, m);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::MatMulBt(a, b) => {
                    let k = self.dims(*a).1;
                    let da = matmul(&dout, self.value(*b).data(), n, m, k);
                    let db = matmul_at(&dout, self.value(*a).data(), n, m, k);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::AddBias(a, bias) => {
                    let mut db = vec![0.0; m];
                    for row in dout.chunks(m) {
                        for (d, g) in db.iter_mut().zip(row) {
                            *d += g;
                        }
                    }
                    accumulate(&mut grads, *bias, db);
                    accumulate(&mut grads, *a, dout.clone());
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, dout.clone());
                    accumulate(&mut grads, *a, dout.clone());
                }
                Op::Scale(a, s) => {
                    accumulate(&mut grads, *a, dout.iter().map(|g| g * s).collect());
                }
                Op::Gelu(a) => {
                    let x = self.value(*a).data();
                    let d = dout.iter().zip(x).map(|(g, &xv)| g * gelu_grad(xv)).collect();
                    accumulate(&mut grads, *a, d);
                }
                Op::Tanh(a) => {
                    let y = node.value.data();
                    let d = dout.iter().zip(y).map(|(g, yv)| g * (1.0 - yv * yv)).collect();
                    accumulate(&mut grads, *a, d);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    rstd,
                } => {
                    let g = self.value(*gamma).data();
                    let mut dgamma = vec![0.0; m];
                    let mut dbeta = vec![0.0; m];
                    let mut dx = vec![0.0; n * m];
                    for r in 0..n {
                        let dy = &dout[r * m..(r + 1) * m];
                        let xh = &xhat[r * m..(r + 1) * m];
                        let mut mean_dxh = 0.0;
                        let mut mean_dxh_xh = 0.0;
                        for c in 0..m {
                            dgamma[c] += dy[c] * xh[c];
                            dbeta[c] += dy[c];
                            let dxh = dy[c] * g[c];
                            mean_dxh += dxh;
                            mean_dxh_xh += dxh * xh[c];
                        }
                        mean_dxh /= m as f64;
                        mean_dxh_xh /= m as f64;
                        for c in 0..m {
                            let dxh = dy[c] * g[c];
                            dx[r * m + c] = rstd[r] * (dxh - mean_dxh - xh[c] * mean_dxh_xh);
                        }
                    }
                    accumulate(&mut grads, *gamma, dgamma);
                    accumulate(&mut grads, *beta, dbeta);
                    accumulate(&mut grads, *x, dx);
                }
                Op::SoftmaxRows(a) => {
                    let y = node.value.data();
                    let mut dx = vec![0.0; n * m];
                    for r in 0..n {
                        let yr = &y[r * m..(r + 1) * m];
                        let dr = &dout[r * m..(r + 1) * m];
                        let dot: f64 = yr.iter().zip(dr).map(|(a, b)| a * b).sum();
                        for c in 0..m {
                            dx[r * m + c] = yr[c] * (dr[c] - dot);
                        }
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.dims(p).1;
                        let mut d = Vec::with_capacity(n * w);
                        for r in 0..n {
                            d.extend_from_slice(&dout[r * m + offset..r * m + offset + w]);
                        }
                        accumulate(&mut grads, p, d);
                        offset += w;
                    }
                }
                Op::SliceCols { x, start } => {
                    let (xn, xm) = self.dims(*x);
                    let mut d = vec![0.0; xn * xm];
                    for r in 0..n {
                        d[r * xm + start..r * xm + start + m].copy_from_slice(&dout[r * m..(r + 1) * m]);
                    }
                    accumulate(&mut grads, *x, d);
                }
                Op::Gather { table, ids } => {
                    let (tn, tm) = self.dims(*table);
                    let mut d = vec![0.0; tn * tm];
                    for (i, &id) in ids.iter().enumerate() {
                        for c in 0..tm {
                            d[id * tm + c] += dout[i * m + c];
                        }
                    }
                    accumulate(&mut grads, *table, d);
                }
                Op::SelectRows { x, rows } => {
                    let (xn, xm) = self.dims(*x);
                    let mut d = vec![0.0; xn * xm];
                    for (i, &r) in rows.iter().enumerate() {
                        for c in 0..xm {
                            d[r * xm + c] += dout[i * m + c];
                        }
                    }
                    accumulate(&mut grads, *x, d);
                }
                Op::MaskedCe {
                    logits,
                    probs,
                    targets,
                    mask,
                    count,
                } => {
                    let (ln, lm) = self.dims(*logits);
                    let scale = dout[0] / *count as f64;
                    let mut d = vec![0.0; ln * lm];
                    for r in 0..ln {
                        if !mask[r] {
                            continue;
                        }
                        for c in 0..lm {
                            let onehot = if c == targets[r] { 1.0 } else { 0.0 };
                            d[r * lm + c] = scale * (probs[r * lm + c] - onehot);
                        }
                    }
                    accumulate(&mut grads, *logits, d);
                }
            }
            grads[idx] = Some(dout);
        }

        let grads = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| g.map(|d| Tensor::raw(self.nodes[i].value.shape().to_vec(), d)))
            .collect();
        Ok(Gradients { grads })
    }

    /// Runs [`Tape::backward`] and adds every parameter gradient into `store`.
    pub fn backward_into(&self, loss: Var, store: &mut ParameterStore) -> Result<Gradients> {
        let grads = self.backward(loss)?;
        for node_idx in self.params.values() {
            let Op::Param(name) = &self.nodes[node_idx.0].op else {
                continue;
            };
            if let Some(g) = grads.wrt(*node_idx) {
                if !g.is_finite() {
                    return Err(NnError::NanGradient(name.clone()));
                }
                store.accumulate_grad(name, g)?;
            }
        }
        Ok(grads)
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], var: Var, d: Vec<f64>) {
    match &mut grads[var.0] {
        Some(existing) => {
            for (e, v) in existing.iter_mut().zip(d) {
                *e += v;
            }
        }
        slot @ None => *slot = Some(d),
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

pub fn gelu(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_K * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_K * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
}
