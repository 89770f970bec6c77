//! Sentence-pair heads: max-pooled sentence vectors, relatedness as a
//! distribution over five score bins, and entailment classification.

use rand::Rng;

use crate::error::{Error, GraphError, Result};
use crate::graph::{Graph, NodeId};
use crate::init::uniform_matrix;
use crate::params::{ParamId, ParamKind, ParamStore};
use crate::taggers::LabelEmbeddings;
use crate::tensor::Tensor;

pub const SCORE_BINS: usize = 5;
pub const ENTAILMENT_CLASSES: usize = 3;

/// Elementwise maximum over the token states.
pub fn sentence_representation(graph: &mut Graph, states: &[NodeId]) -> Result<NodeId, GraphError> {
    graph.row_max_pool(states)
}

/// `[|a − b|; a ⊙ b]`
pub fn relatedness_features(graph: &mut Graph, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
    let d = graph.sub(a, b)?;
    let d = graph.abs(d)?;
    let m = graph.mul(a, b)?;
    graph.concat(&[d, m])
}

/// `[a − b; a ⊙ b]` with `a` the premise.
pub fn entailment_features(graph: &mut Graph, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
    let d = graph.sub(a, b)?;
    let m = graph.mul(a, b)?;
    graph.concat(&[d, m])
}

/// Piecewise-linear target over the bins 1..=5: a score between two
/// integers splits its mass between them.
pub fn gold_score_distribution(score: f64) -> Result<[f64; SCORE_BINS]> {
    if !(1.0..=5.0).contains(&score) {
        return Err(Error::InvalidArgument(format!(
            "relatedness score {score} is outside [1, 5]"
        )));
    }
    let mut p = [0.0; SCORE_BINS];
    let floor = score.floor();
    let i = floor as usize;
    let frac = score - floor;
    p[i - 1] = 1.0 - frac;
    if frac > 0.0 {
        p[i] = frac;
    }
    Ok(p)
}

/// `Σ_i i · p_i` over the bins 1..=5.
pub fn expected_score(probs: &[f64]) -> f64 {
    probs.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
}

/// Affine map to `out * pool` units followed by a max over each group of
/// `pool` consecutive units.
#[derive(Clone, Debug)]
pub struct MaxoutLayer {
    pub w: ParamId,
    pub b: ParamId,
    pub pool: usize,
    pub output: usize,
}

impl MaxoutLayer {
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        owner_depth: usize,
        input: usize,
        output: usize,
        pool: usize,
        rng: &mut R,
    ) -> Self {
        let w = store.add(
            format!("{prefix}.w"),
            ParamKind::ClassifierWeight,
            owner_depth,
            uniform_matrix(output * pool, input, rng),
        );
        let b = store.add(
            format!("{prefix}.b"),
            ParamKind::ClassifierBias,
            owner_depth,
            Tensor::zeros(&[output * pool]),
        );
        MaxoutLayer { w, b, pool, output }
    }

    pub fn apply(&self, graph: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId, GraphError> {
        let w = graph.param(store, self.w);
        let b = graph.param(store, self.b);
        let a = graph.matmul(w, x)?;
        let a = graph.add2(a, b)?;
        graph.maxout(a, self.pool)
    }
}

/// Zero-initialized softmax layer.
#[derive(Clone, Debug)]
pub struct OutputLayer {
    pub w: ParamId,
    pub b: ParamId,
}

impl OutputLayer {
    pub fn register(store: &mut ParamStore, prefix: &str, owner_depth: usize, input: usize, classes: usize) -> Self {
        let w = store.add(
            format!("{prefix}.w"),
            ParamKind::ClassifierWeight,
            owner_depth,
            Tensor::zeros(&[classes, input]),
        );
        let b = store.add(
            format!("{prefix}.b"),
            ParamKind::ClassifierBias,
            owner_depth,
            Tensor::zeros(&[classes]),
        );
        OutputLayer { w, b }
    }

    pub fn logits(&self, graph: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId, GraphError> {
        let w = graph.param(store, self.w);
        let b = graph.param(store, self.b);
        let a = graph.matmul(w, x)?;
        graph.add2(a, b)
    }
}

fn maybe_dropout(graph: &mut Graph, x: NodeId, dropout: Option<(f64, u64)>) -> Result<NodeId, GraphError> {
    match dropout {
        Some((rate, seed)) if rate > 0.0 => graph.dropout(x, rate, seed),
        _ => Ok(x),
    }
}

/// One maxout layer over `d1`, then a softmax over the score bins.
#[derive(Clone, Debug)]
pub struct RelatednessHead {
    pub hidden: MaxoutLayer,
    pub output: OutputLayer,
}

impl RelatednessHead {
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        owner_depth: usize,
        input: usize,
        hidden: usize,
        pool: usize,
        rng: &mut R,
    ) -> Self {
        RelatednessHead {
            hidden: MaxoutLayer::register(store, &format!("{prefix}.maxout"), owner_depth, input, hidden, pool, rng),
            output: OutputLayer::register(store, &format!("{prefix}.out"), owner_depth, hidden, SCORE_BINS),
        }
    }

    pub fn logits(
        &self,
        graph: &mut Graph,
        store: &ParamStore,
        d1: NodeId,
        dropout: Option<(f64, u64)>,
    ) -> Result<NodeId, GraphError> {
        let h = self.hidden.apply(graph, store, d1)?;
        let h = maybe_dropout(graph, h, dropout)?;
        self.output.logits(graph, store, h)
    }
}

/// Three maxout layers over `[Σ p_i ℓ_rel(i); d2]`, then a softmax over
/// entailment, contradiction and neutral.
#[derive(Clone, Debug)]
pub struct EntailmentHead {
    /// Absent when no relatedness layer feeds the entailment layer.
    pub label_embeddings: Option<LabelEmbeddings>,
    pub hidden: Vec<MaxoutLayer>,
    pub output: OutputLayer,
}

impl EntailmentHead {
    #[allow(clippy::too_many_arguments)]
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        owner_depth: usize,
        label_owner_depth: usize,
        feature_width: usize,
        label_dim: Option<usize>,
        hidden: usize,
        pool: usize,
        rng: &mut R,
    ) -> Self {
        let label_embeddings = label_dim.map(|dim| {
            LabelEmbeddings::register(
                store,
                &format!("{prefix}.rel_labels"),
                label_owner_depth,
                SCORE_BINS,
                dim,
                rng,
            )
        });
        let mut layers = Vec::with_capacity(3);
        let mut input = feature_width + label_dim.unwrap_or(0);
        for k in 0..3 {
            layers.push(MaxoutLayer::register(
                store,
                &format!("{prefix}.maxout{k}"),
                owner_depth,
                input,
                hidden,
                pool,
                rng,
            ));
            input = hidden;
        }
        EntailmentHead {
            label_embeddings,
            hidden: layers,
            output: OutputLayer::register(store, &format!("{prefix}.out"), owner_depth, hidden, ENTAILMENT_CLASSES),
        }
    }

    pub fn logits(
        &self,
        graph: &mut Graph,
        store: &ParamStore,
        d2: NodeId,
        relatedness_probs: Option<NodeId>,
        dropout: Option<(f64, u64)>,
    ) -> Result<NodeId, GraphError> {
        let mut h = match (&self.label_embeddings, relatedness_probs) {
            (Some(e), Some(p)) => {
                let y = e.weighted(graph, store, p)?;
                graph.concat(&[y, d2])?
            }
            (None, None) => d2,
            _ => {
                return Err(GraphError::Attribute {
                    op: "entailment",
                    reason: "relatedness probabilities must be given exactly when the head has relatedness label embeddings".into(),
                })
            }
        };
        for (k, layer) in self.hidden.iter().enumerate() {
            h = layer.apply(graph, store, h)?;
            h = maybe_dropout(graph, h, dropout.map(|(r, s)| (r, s.wrapping_add(k as u64))))?;
        }
        self.output.logits(graph, store, h)
    }
}
