use crate::error::{NnError, Result};

/// Dense row-major tensor of `f64`.
///
/// Rank-1 tensors are viewed as a single row when used as a matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(NnError::DataLength {
                shape,
                len: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFinite(format!("tensor of shape {shape:?}")));
        }
        Ok(Self { shape, data })
    }

    /// Builds a tensor without validating finiteness. Shape must match.
    pub(crate) fn raw(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(NnError::InvalidConfig("ragged rows".into()));
        }
        Self::new(vec![rows.len(), cols], rows.concat())
    }

    pub fn scalar(value: f64) -> Self {
        Self::raw(vec![1, 1], vec![value])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Number of rows in the matrix view.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            0 => 1,
            1 => 1,
            _ => self.shape[..self.shape.len() - 1].iter().product(),
        }
    }

    /// Number of columns in the matrix view.
    pub fn cols(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows()).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }
}

/// `out[..] += Σ_j coef[j] * rows[j][..]` for up to four rows at a time.
fn axpy_rows(out: &mut [f64], coef: &[f64], rows: &[&[f64]]) {
    let m = out.len();
    let mut j = 0;
    while j + 4 <= rows.len() {
        let (c0, c1, c2, c3) = (coef[j], coef[j + 1], coef[j + 2], coef[j + 3]);
        let (r0, r1, r2, r3) = (&rows[j][..m], &rows[j + 1][..m], &rows[j + 2][..m], &rows[j + 3][..m]);
        for x in 0..m {
            out[x] += c0 * r0[x] + c1 * r1[x] + c2 * r2[x] + c3 * r3[x];
        }
        j += 4;
    }
    for (c, r) in coef[j..].iter().zip(&rows[j..]) {
        for (o, v) in out.iter_mut().zip(&r[..m]) {
            *o += c * v;
        }
    }
}

/// `a (n×k) · b (k×m)`.
pub(crate) fn matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    let brows: Vec<&[f64]> = b.chunks_exact(m.max(1)).take(k).collect();
    for (orow, arow) in out.chunks_exact_mut(m.max(1)).zip(a.chunks_exact(k.max(1))).take(n) {
        axpy_rows(orow, arow, &brows);
    }
    out
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let xs = x.chunks_exact(4);
    let ys = y.chunks_exact(4);
    let tail: f64 = xs.remainder().iter().zip(ys.remainder()).map(|(a, b)| a * b).sum();
    for (a, b) in xs.zip(ys) {
        acc[0] += a[0] * b[0];
        acc[1] += a[1] * b[1];
        acc[2] += a[2] * b[2];
        acc[3] += a[3] * b[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `a (n×k) · bᵀ` where `b` is `m×k`.
pub(crate) fn matmul_bt(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..m {
            out[i * m + j] = dot(arow, &b[j * k..(j + 1) * k]);
        }
    }
    out
}

/// `aᵀ · b` where `a` is `n×k` and `b` is `n×m`, giving `k×m`.
pub(crate) fn matmul_at(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * m];
    let brows: Vec<&[f64]> = (0..n).map(|i| &b[i * m..(i + 1) * m]).collect();
    let mut coef = vec![0.0; n];
    for p in 0..k {
        for (c, i) in coef.iter_mut().zip(0..n) {
            *c = a[i * k + p];
        }
        axpy_rows(&mut out[p * m..(p + 1) * m], &coef, &brows);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_length_and_nan() {
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::new(vec![1], vec![f64::NAN]).is_err());
    }

    #[test]
    fn matmul_variants_agree() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let b = [1.0, 0.0, 2.0, 1.0, 0.0, 3.0]; // 3x2
        assert_eq!(matmul(&a, &b, 2, 3, 2), vec![5.0, 11.0, 14.0, 23.0]);
        // bᵀ as 2x3
        let bt = [1.0, 2.0, 0.0, 0.0, 1.0, 3.0];
        assert_eq!(matmul_bt(&a, &bt, 2, 3, 2), vec![5.0, 11.0, 14.0, 23.0]);
        // aᵀ·c with a as 2x3 and c as 2x2
        let c = [1.0, 0.0, 0.0, 1.0];
        assert_eq!(matmul_at(&a, &c, 2, 3, 2), vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }
}
