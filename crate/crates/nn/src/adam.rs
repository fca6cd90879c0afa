use std::collections::BTreeMap;

use crate::error::{NnError, Result};
use crate::params::ParameterStore;

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first_moment: BTreeMap<String, Vec<f64>>,
    second_moment: BTreeMap<String, Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self::with_betas(lr, (0.9, 0.999), 1e-8)
    }

    pub fn with_betas(lr: f64, betas: (f64, f64), eps: f64) -> Self {
        Self {
            lr,
            beta1: betas.0,
            beta2: betas.1,
            eps,
            step: 0,
            first_moment: BTreeMap::new(),
            second_moment: BTreeMap::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update using the gradients currently stored in `params`.
    /// Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, params: &mut ParameterStore) -> Result<()> {
        if let Some((name, _)) = params.grads().find(|(_, g)| !g.is_finite()) {
            return Err(NnError::NanGradient(name.to_string()));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (name, value, grad) in params.iter_with_grads_mut() {
            let m = self
                .first_moment
                .entry(name.to_string())
                .or_insert_with(|| vec![0.0; grad.len()]);
            let v = self
                .second_moment
                .entry(name.to_string())
                .or_insert_with(|| vec![0.0; grad.len()]);
            for (i, (p, &g)) in value.data_mut().iter_mut().zip(grad.data()).enumerate() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = ParameterStore::new();
        s.insert("w", Tensor::filled(&[3], 0.25)).unwrap();
        let before = s.clone();
        let mut adam = Adam::new(0.1);
        adam.step(&mut s).unwrap();
        assert_eq!(s.get("w").unwrap(), before.get("w").unwrap());
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m̂ = 1, v̂ = 1, so Δ = lr / (1 + eps).
        let mut s = ParameterStore::new();
        s.insert("w", Tensor::filled(&[1], 0.0)).unwrap();
        s.accumulate_grad("w", &Tensor::filled(&[1], 1.0)).unwrap();
        let mut adam = Adam::new(0.1);
        adam.step(&mut s).unwrap();
        let w = s.get("w").unwrap().data()[0];
        assert!((w + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut s = ParameterStore::new();
        s.insert("layer.w", Tensor::filled(&[1], 0.0)).unwrap();
        s.accumulate_grad("layer.w", &Tensor::raw(vec![1], vec![f64::NAN])).unwrap();
        let err = Adam::new(0.1).step(&mut s).unwrap_err();
        assert!(err.to_string().contains("layer.w"));
        assert_eq!(s.get("layer.w").unwrap().data()[0], 0.0);
    }
}
