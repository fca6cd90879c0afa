use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{NnError, Result};
use crate::tensor::Tensor;

/// Half-width of the uniform initialization range for weights and embeddings.
pub const INIT_RANGE: f64 = 0.08;

/// Named parameters and their gradient accumulators.
///
/// Names are kept in a `BTreeMap` so iteration order (and therefore
/// serialization and optimizer updates) is deterministic.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterStore {
    params: BTreeMap<String, Tensor>,
    grads: BTreeMap<String, Tensor>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(NnError::DuplicateParameter(name));
        }
        self.grads.insert(name.clone(), Tensor::zeros(value.shape()));
        self.params.insert(name, value);
        Ok(())
    }

    /// Inserts a tensor drawn from uniform(-INIT_RANGE, INIT_RANGE).
    pub fn insert_uniform<R: Rng>(&mut self, name: &str, shape: &[usize], rng: &mut R) -> Result<()> {
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| rng.random_range(-INIT_RANGE..INIT_RANGE))
            .collect();
        self.insert(name, Tensor::new(shape.to_vec(), data)?)
    }

    pub fn insert_filled(&mut self, name: &str, shape: &[usize], value: f64) -> Result<()> {
        self.insert(name, Tensor::filled(shape, value))
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.params
            .get(name)
            .ok_or_else(|| NnError::UnknownParameter(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.params
            .get_mut(name)
            .ok_or_else(|| NnError::UnknownParameter(name.to_string()))
    }

    /// Replaces a parameter's value, keeping its shape.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let slot = self.get_mut(name)?;
        if slot.shape() != value.shape() {
            return Err(NnError::ShapeMismatch {
                op: "set",
                expected: slot.shape().to_vec(),
                got: value.shape().to_vec(),
            });
        }
        *slot = value;
        Ok(())
    }

    pub fn grad(&self, name: &str) -> Result<&Tensor> {
        self.grads
            .get(name)
            .ok_or_else(|| NnError::UnknownParameter(name.to_string()))
    }

    pub fn accumulate_grad(&mut self, name: &str, grad: &Tensor) -> Result<()> {
        let slot = self
            .grads
            .get_mut(name)
            .ok_or_else(|| NnError::UnknownParameter(name.to_string()))?;
        if slot.len() != grad.len() {
            return Err(NnError::ShapeMismatch {
                op: "accumulate_grad",
                expected: slot.shape().to_vec(),
                got: grad.shape().to_vec(),
            });
        }
        slot.add_assign(grad);
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for g in self.grads.values_mut() {
            g.fill(0.0);
        }
    }

    pub fn scale_grads(&mut self, s: f64) {
        for g in self.grads.values_mut() {
            g.scale(s);
        }
    }

    /// Adds every gradient of `other` into this store's gradients.
    pub fn merge_grads(&mut self, other: &ParameterStore) -> Result<()> {
        for (name, g) in &other.grads {
            self.accumulate_grad(name, g)?;
        }
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub(crate) fn iter_with_grads_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor, &Tensor)> {
        self.params
            .iter_mut()
            .zip(self.grads.values())
            .map(|((k, p), g)| (k.as_str(), p, g))
    }

    pub fn grads(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.grads.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn num_scalars(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    /// Same names with the same shapes.
    pub fn same_layout(&self, other: &ParameterStore) -> bool {
        self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|((ka, va), (kb, vb))| ka == kb && va.shape() == vb.shape())
    }

    /// Copies the subset of parameters under `prefix` into a new store with
    /// the prefix stripped.
    pub fn extract_prefix(&self, prefix: &str) -> ParameterStore {
        let mut out = ParameterStore::new();
        for (name, value) in &self.params {
            if let Some(rest) = name.strip_prefix(prefix) {
                out.insert(rest, value.clone()).expect("unique names");
            }
        }
        out
    }

    /// Inserts every parameter of `other` under `prefix`.
    pub fn absorb_prefixed(&mut self, prefix: &str, other: &ParameterStore) -> Result<()> {
        for (name, value) in &other.params {
            self.insert(format!("{prefix}{name}"), value.clone())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParameterStore::new();
        s.insert("w", Tensor::zeros(&[2])).unwrap();
        assert!(matches!(
            s.insert("w", Tensor::zeros(&[2])),
            Err(NnError::DuplicateParameter(_))
        ));
    }

    #[test]
    fn gradients_mirror_shapes() {
        let mut s = ParameterStore::new();
        s.insert("a", Tensor::zeros(&[3, 4])).unwrap();
        assert_eq!(s.grad("a").unwrap().shape(), &[3, 4]);
        assert!(s.accumulate_grad("a", &Tensor::zeros(&[2])).is_err());
    }

    #[test]
    fn prefix_roundtrip() {
        let mut s = ParameterStore::new();
        s.insert("x.w", Tensor::filled(&[2], 1.0)).unwrap();
        s.insert("y.w", Tensor::filled(&[2], 2.0)).unwrap();
        let x = s.extract_prefix("x.");
        assert_eq!(x.names().collect::<Vec<_>>(), vec!["w"]);
        let mut t = ParameterStore::new();
        t.absorb_prefixed("z.", &x).unwrap();
        assert!(t.contains("z.w"));
    }
}
