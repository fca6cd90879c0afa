use crate::error::{NnError, Result};
use crate::tensor::Tensor;

/// Numerically stable softmax of one row.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    let mut out = row.to_vec();
    softmax_in_place(&mut out);
    out
}

/// `-log softmax(row)[target]`, accurate when the target dominates.
pub fn cross_entropy_row(row: &[f64], target: usize) -> f64 {
    let (argmax, max) = row
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let rest: f64 = row
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != argmax)
        .map(|(_, v)| (v - max).exp())
        .sum();
    (max - row[target]) + rest.ln_1p()
}

#[derive(Debug, Clone)]
pub struct CrossEntropy {
    pub loss: f64,
    /// Softmax of every row, masked or not.
    pub probs: Tensor,
    /// d loss / d logits; exactly zero on masked-out rows.
    pub grad: Tensor,
    pub count: usize,
}

/// Mean softmax cross-entropy over rows with `mask[r] == true`.
///
/// Targets of masked-out rows are ignored.
pub fn softmax_cross_entropy(logits: &Tensor, targets: &[usize], mask: &[bool]) -> Result<CrossEntropy> {
    let (n, m) = (logits.rows(), logits.cols());
    if targets.len() != n || mask.len() != n {
        return Err(NnError::ShapeMismatch {
            op: "softmax_cross_entropy",
            expected: vec![n],
            got: vec![targets.len(), mask.len()],
        });
    }
    let count = mask.iter().filter(|&&b| b).count();
    if count == 0 {
        return Err(NnError::AllMasked);
    }
    let mut probs = logits.clone();
    let mut grad = Tensor::zeros(&[n, m]);
    let mut total = 0.0;
    for r in 0..n {
        softmax_in_place(probs.row_mut(r));
        if !mask[r] {
            continue;
        }
        let t = targets[r];
        if t >= m {
            return Err(NnError::TargetOutOfRange { target: t, classes: m });
        }
        total += cross_entropy_row(logits.row(r), t);
        let p = probs.row(r).to_vec();
        let g = grad.row_mut(r);
        for c in 0..m {
            g[c] = (p[c] - if c == t { 1.0 } else { 0.0 }) / count as f64;
        }
    }
    Ok(CrossEntropy {
        loss: total / count as f64,
        probs,
        grad,
        count,
    })
}
