use std::collections::HashMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Position of a parameter inside its [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// One named trainable array plus its optimizer state.
#[derive(Clone, Debug)]
pub struct Param {
    name: String,
    pub(crate) value: Array2<f64>,
    /// First moment (Adam) or velocity (SGD with momentum).
    pub(crate) moment1: Array2<f64>,
    /// Second moment (Adam only).
    pub(crate) moment2: Array2<f64>,
}

impl Param {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Array2<f64> {
        &self.value
    }
}

/// Named parameters in registration order. Names are unique and shapes
/// never change after registration.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, value: Array2<f64>) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::Parameter {
                name,
                detail: "already registered".into(),
            });
        }
        let id = ParamId(self.params.len());
        let dim = value.dim();
        self.params.push(Param {
            name: name.clone(),
            value,
            moment1: Array2::zeros(dim),
            moment2: Array2::zeros(dim),
        });
        self.by_name.insert(name, id);
        Ok(id)
    }

    /// He-uniform weights `U(-√(6/fan_in), √(6/fan_in))`.
    pub fn register_he(&mut self, name: impl Into<String>, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Result<ParamId> {
        let bound = (6.0 / fan_in.max(1) as f64).sqrt();
        let value = Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-bound..bound));
        self.register(name, value)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Array2<f64> {
        &self.params[id.0].value
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub(crate) fn param_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    /// Writable view of a value; the shape cannot change through it.
    pub fn value_mut(&mut self, id: ParamId) -> ndarray::ArrayViewMut2<'_, f64> {
        self.params[id.0].value.view_mut()
    }

    /// Replaces a value with one of identical shape.
    pub fn set_value(&mut self, id: ParamId, value: Array2<f64>) -> Result<()> {
        let p = &mut self.params[id.0];
        if p.value.dim() != value.dim() {
            return Err(Error::Parameter {
                name: p.name.clone(),
                detail: format!("shape {:?} does not match stored {:?}", value.dim(), p.value.dim()),
            });
        }
        p.value = value;
        Ok(())
    }

    pub fn total_len(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Resets optimizer state to zero.
    pub fn reset_state(&mut self) {
        for p in &mut self.params {
            p.moment1.fill(0.0);
            p.moment2.fill(0.0);
        }
    }
}

/// Per-parameter adjoints from one or more backward passes.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Array2<f64>> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    pub(crate) fn accumulate(&mut self, id: ParamId, g: Array2<f64>) {
        if self.grads.len() <= id.0 {
            self.grads.resize(id.0 + 1, None);
        }
        match &mut self.grads[id.0] {
            Some(existing) => *existing += &g,
            slot => *slot = Some(g),
        }
    }

    /// Adds every gradient of `other` into `self`.
    pub fn merge(&mut self, other: Gradients) {
        for (i, g) in other.grads.into_iter().enumerate() {
            if let Some(g) = g {
                self.accumulate(ParamId(i), g);
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.grads.iter_mut().flatten() {
            g.mapv_inplace(|v| v * factor);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Array2<f64>)> {
        self.grads
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|g| (ParamId(i), g)))
    }
}

pub(crate) fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
