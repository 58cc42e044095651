//! The reverse-mode tape.

use ndarray::ArrayD;
use std::collections::HashMap;

use super::params::{ParamId, ParamStore};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Var(pub(crate) usize);

pub(crate) enum NodeKind {
    Leaf,
    Param(ParamId),
}

/// Backward closure: receives the tape (to read parent values), the
/// gradient flowing into this node, and the gradient store to update.
pub(crate) type BackFn = Box<dyn Fn(&Tape, &ArrayD<f64>, &mut Grads)>;

pub(crate) struct Node {
    pub value: ArrayD<f64>,
    pub back: Option<BackFn>,
    pub kind: NodeKind,
}

/// Per-node gradient accumulator used during backward.
pub struct Grads {
    by_node: Vec<Option<ArrayD<f64>>>,
}

impl Grads {
    pub(crate) fn add(&mut self, v: Var, g: ArrayD<f64>) {
        match &mut self.by_node[v.0] {
            Some(acc) => *acc += &g,
            slot @ None => *slot = Some(g),
        }
    }
}

/// Gradients with respect to store parameters, indexed by [`ParamId`].
pub struct ParamGrads {
    pub by_param: Vec<Option<ArrayD<f64>>>,
}

impl ParamGrads {
    pub fn zeros(n: usize) -> Self {
        Self {
            by_param: (0..n).map(|_| None).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&ArrayD<f64>> {
        self.by_param[id.0].as_ref()
    }

    /// Accumulate another gradient set, in place.
    pub fn merge(&mut self, other: ParamGrads) {
        for (slot, g) in self.by_param.iter_mut().zip(other.by_param) {
            match (slot.as_mut(), g) {
                (Some(a), Some(b)) => *a += &b,
                (None, Some(b)) => *slot = Some(b),
                _ => {}
            }
        }
    }

    /// Scale all gradients by a constant.
    pub fn scale(&mut self, c: f64) {
        for g in self.by_param.iter_mut().flatten() {
            g.mapv_inplace(|x| x * c);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.by_param
            .iter()
            .flatten()
            .all(|g| g.iter().all(|x| x.is_finite()))
    }
}

/// Reverse-mode tape. One tape per forward pass; not shared across threads.
pub struct Tape {
    pub(crate) nodes: Vec<Node>,
    recording: bool,
    param_cache: HashMap<ParamId, Var>,
}

impl Tape {
    /// `recording = false` builds an inference-only tape: values are kept
    /// (later ops consume them) but no backward closures are stored.
    pub fn new(recording: bool) -> Self {
        Self {
            nodes: Vec::with_capacity(256),
            recording,
            param_cache: HashMap::new(),
        }
    }

    pub fn recording(&self) -> bool {
        self.recording
    }

    pub fn value(&self, v: Var) -> &ArrayD<f64> {
        &self.nodes[v.0].value
    }

    /// First element of a node's value; for `[1]`-shaped loss nodes.
    pub fn scalar(&self, v: Var) -> f64 {
        *self.nodes[v.0].value.iter().next().expect("empty tensor")
    }

    pub(crate) fn push(&mut self, value: ArrayD<f64>, back: Option<BackFn>) -> Var {
        let back = if self.recording { back } else { None };
        self.nodes.push(Node {
            value,
            back,
            kind: NodeKind::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    /// Non-differentiable leaf (network inputs, noise draws, constants).
    pub fn input(&mut self, value: ArrayD<f64>) -> Var {
        self.push(value, None)
    }

    /// Leaf bound to a store parameter; gradients accumulate per parameter.
    /// Repeated calls for the same parameter share one node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.param_cache.get(&id) {
            return v;
        }
        let v = self.push(store.value(id).clone(), None);
        self.nodes[v.0].kind = NodeKind::Param(id);
        self.param_cache.insert(id, v);
        v
    }

    /// Cut the graph: same value, no gradient flow.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.nodes[v.0].value.clone();
        self.input(value)
    }

    /// Reverse sweep from `loss` (a `[1]`-shaped node). Returns gradients
    /// for every parameter that participated.
    pub fn backward(&self, loss: Var, store: &ParamStore) -> ParamGrads {
        assert!(self.recording, "backward on an inference tape");
        let mut grads = Grads {
            by_node: (0..self.nodes.len()).map(|_| None).collect(),
        };
        grads.by_node[loss.0] = Some(ndarray::ArrayD::ones(self.nodes[loss.0].value.raw_dim()));

        let mut out = ParamGrads::zeros(store.len());
        for id in (0..=loss.0).rev() {
            let Some(g) = grads.by_node[id].take() else {
                continue;
            };
            if let Some(back) = &self.nodes[id].back {
                back(self, &g, &mut grads);
            }
            if let NodeKind::Param(pid) = self.nodes[id].kind {
                match &mut out.by_param[pid.0] {
                    Some(acc) => *acc += &g,
                    slot @ None => *slot = Some(g),
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}
