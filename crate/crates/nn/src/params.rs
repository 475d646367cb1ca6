use std::collections::BTreeMap;

use crate::array::NumArray;
use crate::error::{NnError, Result};

/// Named collection of trainable arrays.
///
/// Iteration order is the lexical order of names, which keeps optimizer
/// updates, serialization and gradient accumulation reproducible.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    params: BTreeMap<String, NumArray>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: NumArray) -> Result<()> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(NnError::DuplicateParam(name));
        }
        self.params.insert(name, value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&NumArray> {
        self.params
            .get(name)
            .ok_or_else(|| NnError::MissingParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut NumArray> {
        self.params
            .get_mut(name)
            .ok_or_else(|| NnError::MissingParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &NumArray)> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut NumArray)> {
        self.params.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.params.keys()
    }

    /// Total number of scalars.
    pub fn num_scalars(&self) -> usize {
        self.params.values().map(NumArray::len).sum()
    }

    /// Name and shape of every parameter.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        self.params
            .iter()
            .map(|(k, v)| (k.clone(), v.shape().to_vec()))
            .collect()
    }

    /// Same names and shapes, all zeros. Used as a gradient buffer.
    pub fn zeros_like(&self) -> Self {
        Self {
            params: self
                .params
                .iter()
                .map(|(k, v)| (k.clone(), NumArray::zeros(v.shape())))
                .collect(),
        }
    }

    pub fn same_layout(&self, other: &ParamSet) -> bool {
        self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|((ka, va), (kb, vb))| ka == kb && va.shape() == vb.shape())
    }

    pub fn check_layout(&self, other: &ParamSet, op: &'static str) -> Result<()> {
        for (name, value) in &self.params {
            let theirs = other
                .params
                .get(name)
                .ok_or_else(|| NnError::MissingParam(name.clone()))?;
            if theirs.shape() != value.shape() {
                return Err(NnError::dim(op, value.shape(), theirs.shape()));
            }
        }
        if other.params.len() != self.params.len() {
            let extra = other
                .params
                .keys()
                .find(|k| !self.params.contains_key(*k))
                .cloned()
                .unwrap_or_default();
            return Err(NnError::Argument(format!("{op}: unexpected parameter `{extra}`")));
        }
        Ok(())
    }

    /// `self += alpha * other`, parameter by parameter.
    pub fn axpy(&mut self, alpha: f64, other: &ParamSet) -> Result<()> {
        self.check_layout(other, "ParamSet::axpy")?;
        for (name, value) in self.params.iter_mut() {
            value.axpy(alpha, &other.params[name])?;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for value in self.params.values_mut() {
            value.data_mut().iter_mut().for_each(|v| *v *= alpha);
        }
    }

    pub fn fill(&mut self, value: f64) {
        for v in self.params.values_mut() {
            v.fill(value);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.params.values().fold(0.0, |m, v| m.max(v.max_abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.params.values().all(NumArray::is_finite)
    }

    /// Copies every parameter whose name starts with `prefix` into a new set
    /// with the prefix stripped.
    pub fn extract_prefix(&self, prefix: &str) -> ParamSet {
        ParamSet {
            params: self
                .params
                .iter()
                .filter_map(|(k, v)| k.strip_prefix(prefix).map(|s| (s.to_string(), v.clone())))
                .collect(),
        }
    }

    /// Inserts all of `other` under `prefix`.
    pub fn merge_prefixed(&mut self, prefix: &str, other: &ParamSet) -> Result<()> {
        for (k, v) in &other.params {
            self.insert(format!("{prefix}{k}"), v.clone())?;
        }
        Ok(())
    }
}

impl FromIterator<(String, NumArray)> for ParamSet {
    fn from_iter<I: IntoIterator<Item = (String, NumArray)>>(iter: I) -> Self {
        Self {
            params: iter.into_iter().collect(),
        }
    }
}
