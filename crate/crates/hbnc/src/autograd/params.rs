//! Named parameter storage shared by all networks of a model.

use ndarray::ArrayD;
use std::collections::HashMap;

/// Index of a parameter inside its [`ParamStore`].
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub struct ParamId(pub usize);

/// One learnable tensor.
pub struct Param {
    pub name: String,
    pub value: ArrayD<f64>,
}

/// Flat store of named parameters. Names are hierarchical
/// (`"motion.enc.conv1.w"`); registration order is the canonical order
/// used by the optimizer, the checkpoint format and gradient reduction.
#[derive(Default)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a parameter. Names must be unique.
    pub fn register(&mut self, name: impl Into<String>, value: ArrayD<f64>) -> ParamId {
        let name = name.into();
        assert!(
            !self.index.contains_key(&name),
            "duplicate parameter name {name}"
        );
        let id = self.params.len();
        self.index.insert(name.clone(), id);
        self.params.push(Param { name, value });
        ParamId(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn value(&self, id: ParamId) -> &ArrayD<f64> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut ArrayD<f64> {
        &mut self.params[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn lookup(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Total scalar count across all parameters.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}
