//! Named parameter collections and their bridge onto the tape.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::tape::{Gradients, NodeId, Tape};
use super::tensor::Tensor;

/// All trainable weights of a model, keyed by a stable dotted name. The map
/// is ordered so iteration, checkpoints, and update loops are deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterSet {
    map: BTreeMap<String, Tensor>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor) {
        let prev = self.map.insert(name.to_string(), value);
        assert!(prev.is_none(), "duplicate parameter {name}");
    }

    pub fn get(&self, name: &str) -> &Tensor {
        self.map.get(name).unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor {
        self.map.get_mut(name).unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn n_scalars(&self) -> usize {
        self.map.values().map(Tensor::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.map.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    /// Zero tensors with the same names and shapes.
    pub fn zeros_like(&self) -> Self {
        let map = self.map.iter().map(|(k, v)| (k.clone(), Tensor::zeros(v.dims()))).collect();
        Self { map }
    }

    /// self += c * other over matching names. Key sets must be identical.
    pub fn axpy(&mut self, c: f64, other: &ParameterSet) {
        assert_eq!(self.map.len(), other.map.len(), "parameter sets differ in size");
        for (name, t) in &mut self.map {
            let o = other.map.get(name).unwrap_or_else(|| panic!("missing parameter {name}"));
            t.axpy(c, o);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.map.values().all(Tensor::all_finite)
    }
}

impl FromIterator<(String, Tensor)> for ParameterSet {
    fn from_iter<I: IntoIterator<Item = (String, Tensor)>>(iter: I) -> Self {
        Self { map: iter.into_iter().collect() }
    }
}

/// Lazily places parameters onto a tape as leaves, one node per name, so a
/// forward pass can mention the same weight many times while gradients still
/// accumulate into a single slot.
#[derive(Debug, Default)]
pub struct Binder {
    nodes: BTreeMap<String, NodeId>,
}

impl Binder {
    pub fn new() -> Self {
        Self::default()
    }

    /// The leaf node holding `name`, created on first use.
    pub fn node(&mut self, tape: &mut Tape, params: &ParameterSet, name: &str) -> NodeId {
        if let Some(&id) = self.nodes.get(name) {
            return id;
        }
        let id = tape.leaf(params.get(name).clone());
        self.nodes.insert(name.to_string(), id);
        id
    }

    /// Gradients for every parameter in `like`; names the forward pass never
    /// touched come back as zeros.
    pub fn grads(&self, grads: &Gradients, like: &ParameterSet) -> ParameterSet {
        like.iter()
            .map(|(name, t)| {
                let g = self
                    .nodes
                    .get(name)
                    .and_then(|&id| grads.get(id))
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(t.dims()));
                (name.to_string(), g)
            })
            .collect()
    }

    pub fn bound_names(&self) -> Vec<&str> {
        self.nodes.keys().map(String::as_str).collect()
    }
}
