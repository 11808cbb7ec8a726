//! Named parameter storage.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Whether a parameter is a weight (matrix or kernel, subject to penalties) or a bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamRole {
    Weight,
    Bias,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub role: ParamRole,
}

/// Ordered collection of named parameters with their gradients.
///
/// Iteration follows insertion order; reductions over parameters rely on it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet<T> {
    entries: IndexMap<String, Param<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        Self {
            entries: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, value: Tensor<T>, role: ParamRole) -> Result<()> {
        if self.entries.contains_key(name) {
            return Err(Error::invalid(format!("duplicate parameter {name}")));
        }
        let grad = Tensor::zeros(value.shape());
        self.entries.insert(name.to_string(), Param { value, grad, role });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Param<T>> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::invalid(format!("unknown parameter {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Param<T>> {
        self.entries
            .get_mut(name)
            .ok_or_else(|| Error::invalid(format!("unknown parameter {name}")))
    }

    pub fn value(&self, name: &str) -> Result<&Tensor<T>> {
        Ok(&self.get(name)?.value)
    }

    /// Adds `g` into the stored gradient of `name`.
    pub fn accumulate_grad(&mut self, name: &str, g: &Tensor<T>) -> Result<()> {
        self.get_mut(name)?.grad.add_assign(g)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param<T>)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.values().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in self.entries.values_mut() {
            p.grad.fill(T::zero());
        }
    }

    /// Copies values from `other`, which must have identical names and shapes.
    pub fn copy_values_from(&mut self, other: &ParamSet<T>) -> Result<()> {
        if self.entries.len() != other.entries.len() {
            return Err(Error::invalid("parameter sets differ in size"));
        }
        for ((name, dst), (oname, src)) in self.entries.iter_mut().zip(&other.entries) {
            if name != oname || dst.value.shape() != src.value.shape() {
                return Err(Error::invalid(format!(
                    "parameter mismatch: {name} {:?} vs {oname} {:?}",
                    dst.value.shape(),
                    src.value.shape()
                )));
            }
            dst.value = src.value.clone();
        }
        Ok(())
    }

    /// All values concatenated in iteration order.
    pub fn flat_values(&self) -> Vec<T> {
        self.entries
            .values()
            .flat_map(|p| p.value.data().iter().copied())
            .collect()
    }

    pub fn flat_grads(&self) -> Vec<T> {
        self.entries
            .values()
            .flat_map(|p| p.grad.data().iter().copied())
            .collect()
    }

    pub fn set_flat_values(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.scalar_count() {
            return Err(Error::invalid(format!(
                "expected {} values, got {}",
                self.scalar_count(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for p in self.entries.values_mut() {
            let n = p.value.len();
            p.value.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insertion_order_and_flatten() {
        let mut ps = ParamSet::<f64>::new();
        ps.insert("b", Tensor::full(&[2], 1.0), ParamRole::Bias).unwrap();
        ps.insert("a", Tensor::full(&[1, 2], 2.0), ParamRole::Weight).unwrap();
        assert_eq!(ps.names().collect::<Vec<_>>(), vec!["b", "a"]);
        assert_eq!(ps.flat_values(), vec![1.0, 1.0, 2.0, 2.0]);
        ps.set_flat_values(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(ps.value("a").unwrap().data(), &[2.0, 3.0]);
        assert!(ps.insert("a", Tensor::zeros(&[1]), ParamRole::Bias).is_err());
    }
}
