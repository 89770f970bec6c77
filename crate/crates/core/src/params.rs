//! Named parameter storage and gradient containers.

use std::collections::BTreeMap;

use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// What a parameter is used for; drives regularization coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamKind {
    /// Word or character n-gram embedding table.
    Embedding,
    LstmWeight,
    LstmBias,
    ClassifierWeight,
    ClassifierBias,
    LabelEmbedding,
}

impl ParamKind {
    pub fn is_classifier(self) -> bool {
        matches!(self, ParamKind::ClassifierWeight | ParamKind::ClassifierBias)
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamKind::Embedding => "embedding",
            ParamKind::LstmWeight => "lstm_weight",
            ParamKind::LstmBias => "lstm_bias",
            ParamKind::ClassifierWeight => "classifier_weight",
            ParamKind::ClassifierBias => "classifier_bias",
            ParamKind::LabelEmbedding => "label_embedding",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParamEntry {
    pub name: String,
    pub kind: ParamKind,
    /// Depth of the task group the parameter belongs to; 0 for the shared embeddings.
    pub owner_depth: usize,
    pub tensor: Tensor,
}

/// All model weights, addressed by [`ParamId`] or by unique name.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    by_name: BTreeMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter. Panics if the name is already taken.
    pub fn add(
        &mut self,
        name: impl Into<String>,
        kind: ParamKind,
        owner_depth: usize,
        tensor: Tensor,
    ) -> ParamId {
        let name = name.into();
        let id = ParamId(self.entries.len());
        let prev = self.by_name.insert(name.clone(), id);
        assert!(prev.is_none(), "duplicate parameter name {name}");
        self.entries.push(ParamEntry {
            name,
            kind,
            owner_depth,
            tensor,
        });
        id
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].tensor
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].tensor
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry {
        &self.entries[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &ParamEntry)> {
        self.entries.iter().enumerate().map(|(i, e)| (ParamId(i), e))
    }

    pub fn total_values(&self) -> usize {
        self.entries.iter().map(|e| e.tensor.len()).sum()
    }

    /// Squared L2 distance between `self` and `other` over `ids`.
    pub fn squared_distance(&self, other: &ParamStore, ids: &[ParamId]) -> f64 {
        ids.iter()
            .map(|&id| self.get(id).squared_distance(other.get(id)))
            .sum()
    }
}

/// Gradients of a scalar loss with respect to parameter leaves.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    grads: BTreeMap<ParamId, Tensor>,
}

impl Gradients {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(&id)
    }

    /// Accumulates `values` into the gradient of `id`, creating it with `shape` if absent.
    pub fn accumulate(&mut self, id: ParamId, shape: &[usize], values: &[f64]) {
        let g = self.grads.entry(id).or_insert_with(|| Tensor::zeros(shape));
        for (a, b) in g.data_mut().iter_mut().zip(values) {
            *a += b;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.grads.iter().map(|(k, v)| (*k, v))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.grads.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    /// L2 norm of the concatenated gradient vector.
    pub fn norm(&self) -> f64 {
        self.grads.values().map(Tensor::sum_squares).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.grads.values_mut() {
            for v in g.data_mut() {
                *v *= factor;
            }
        }
    }

    /// Rescales the whole gradient so its norm does not exceed `threshold`.
    /// Returns the norm before clipping.
    pub fn clip_norm(&mut self, threshold: f64) -> f64 {
        let norm = self.norm();
        if norm > threshold && norm > 0.0 {
            self.scale(threshold / norm);
        }
        norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clipping_rescales_to_threshold() {
        let mut g = Gradients::new();
        g.accumulate(ParamId(0), &[2], &[3.0, 4.0]);
        assert_eq!(g.clip_norm(1.0), 5.0);
        assert!((g.norm() - 1.0).abs() < 1e-12);
        let d = g.get(ParamId(0)).unwrap().data();
        assert!((d[0] - 0.6).abs() < 1e-12 && (d[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn clipping_leaves_small_gradients_alone() {
        let mut g = Gradients::new();
        g.accumulate(ParamId(0), &[2], &[0.3, 0.4]);
        g.clip_norm(1.0);
        assert_eq!(g.get(ParamId(0)).unwrap().data(), &[0.3, 0.4]);
    }

    #[test]
    #[should_panic(expected = "duplicate parameter name")]
    fn names_are_unique() {
        let mut s = ParamStore::new();
        s.add("w", ParamKind::LstmWeight, 1, Tensor::scalar(0.0));
        s.add("w", ParamKind::LstmWeight, 1, Tensor::scalar(0.0));
    }
}
