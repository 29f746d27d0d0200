//! Flat, named parameter storage shared by every learnable component.

use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::tensor::Tensor;

/// Index of a tensor inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    /// Whether the optimizer applies weight decay to this tensor.
    pub decay: bool,
}

/// Parameters in declaration order. The order is part of the checkpoint
/// format, so builders must register tensors deterministically.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor, decay: bool) -> ParamId {
        self.params.push(Param {
            name: name.into(),
            value,
            decay,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn get(&self, i: usize) -> &Param {
        &self.params[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Total number of learnable scalars.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Zero-filled gradient accumulators, one per parameter.
    pub fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.params.iter().map(|p| vec![0.0; p.value.len()]).collect()
    }

    /// Overwrite every value from `other`, which must have the same layout.
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<()> {
        if self.params.len() != other.params.len() {
            return Err(Error::Format(format!(
                "parameter count {} vs {}",
                self.params.len(),
                other.params.len()
            )));
        }
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            if a.name != b.name || a.value.shape() != b.value.shape() {
                return Err(Error::Format(format!(
                    "parameter {} {:?} vs {} {:?}",
                    a.name,
                    a.value.shape(),
                    b.name,
                    b.value.shape()
                )));
            }
            a.value = b.value.clone();
        }
        Ok(())
    }

    pub fn validate_finite(&self) -> Result<()> {
        for p in &self.params {
            p.value.validate_finite(&p.name)?;
        }
        Ok(())
    }
}

/// Registers parameters with the initialization scheme used throughout:
/// truncated-normal weights, zero biases, unit layer-norm gains.
pub struct ParamBuilder<'a> {
    pub store: &'a mut ParamStore,
    pub rng: &'a mut Rng,
    pub init_std: f64,
}

impl ParamBuilder<'_> {
    pub fn weight(&mut self, name: &str, shape: &[usize]) -> ParamId {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng::trunc_normal(self.rng, self.init_std)).collect();
        self.store.add(name, Tensor::new(shape, data).expect("weight shape"), true)
    }

    pub fn normal(&mut self, name: &str, shape: &[usize]) -> ParamId {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng::normal(self.rng, self.init_std)).collect();
        self.store.add(name, Tensor::new(shape, data).expect("param shape"), true)
    }

    pub fn zeros(&mut self, name: &str, shape: &[usize]) -> ParamId {
        self.store.add(name, Tensor::zeros(shape), true)
    }

    pub fn ones(&mut self, name: &str, shape: &[usize]) -> ParamId {
        self.store.add(name, Tensor::full(shape, 1.0), true)
    }

    /// Scalar excluded from weight decay.
    pub fn free_scalar(&mut self, name: &str, value: f64) -> ParamId {
        self.store.add(name, Tensor::scalar(value), false)
    }
}
