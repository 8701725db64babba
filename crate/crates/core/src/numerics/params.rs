use std::collections::BTreeMap;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// A learnable tensor and its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct GradPair {
    pub value: Tensor,
    pub grad: Tensor,
}

impl GradPair {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self { value, grad }
    }
}

/// Named learnable tensors, iterated in name order.
///
/// The version counter changes whenever a value may have been mutated, which
/// lets cached forward state detect that it no longer matches the parameters.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: BTreeMap<String, GradPair>,
    version: u64,
}

impl PartialEq for ParamStore {
    fn eq(&self, other: &Self) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((a, x), (b, y))| a == b && x.value == y.value)
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::Conflict(format!("parameter `{name}` already defined")));
        }
        self.entries.insert(name, GradPair::new(value));
        self.version += 1;
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.entries
            .get(name)
            .map(|p| &p.value)
            .ok_or_else(|| Error::NotFound(format!("parameter `{name}`")))
    }

    pub fn grad(&self, name: &str) -> Result<&Tensor> {
        self.entries
            .get(name)
            .map(|p| &p.grad)
            .ok_or_else(|| Error::NotFound(format!("parameter `{name}`")))
    }

    pub fn value_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.version += 1;
        self.entries
            .get_mut(name)
            .map(|p| &mut p.value)
            .ok_or_else(|| Error::NotFound(format!("parameter `{name}`")))
    }

    pub fn grad_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.entries
            .get_mut(name)
            .map(|p| &mut p.grad)
            .ok_or_else(|| Error::NotFound(format!("parameter `{name}`")))
    }

    /// Adds `delta` into the gradient slot of `name`.
    pub fn accumulate(&mut self, name: &str, delta: &[f64]) -> Result<()> {
        let g = self.grad_mut(name)?;
        if g.len() != delta.len() {
            return Err(Error::Dimension(format!(
                "gradient for `{name}` has {} entries, got {}",
                g.len(),
                delta.len()
            )));
        }
        g.add_assign_slice(delta);
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in self.entries.values_mut() {
            p.grad.fill(0.0);
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &GradPair)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut GradPair)> {
        self.version += 1;
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.values().map(|p| p.value.len()).sum()
    }

    pub fn version(&self) -> u64 {
        self.version
    }
}
