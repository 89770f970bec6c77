//! Softmax classifiers with one ReLU layer, and label embeddings.

use rand::Rng;

use crate::error::GraphError;
use crate::graph::{self, Graph, NodeId};
use crate::init::uniform_matrix;
use crate::params::{ParamId, ParamKind, ParamStore};
use crate::tensor::Tensor;

/// `softmax(W_o relu(W_h x + b_h) + b_o)`. The hidden layer is drawn
/// uniformly; the output layer starts at zero.
#[derive(Clone, Debug)]
pub struct TokenClassifier {
    pub w_hidden: ParamId,
    pub b_hidden: ParamId,
    pub w_out: ParamId,
    pub b_out: ParamId,
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl TokenClassifier {
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        owner_depth: usize,
        input: usize,
        hidden: usize,
        classes: usize,
        rng: &mut R,
    ) -> Self {
        let name = |s: &str| format!("{prefix}.{s}");
        let w_hidden = store.add(
            name("w_hidden"),
            ParamKind::ClassifierWeight,
            owner_depth,
            uniform_matrix(hidden, input, rng),
        );
        let b_hidden = store.add(
            name("b_hidden"),
            ParamKind::ClassifierBias,
            owner_depth,
            Tensor::zeros(&[hidden]),
        );
        let w_out = store.add(
            name("w_out"),
            ParamKind::ClassifierWeight,
            owner_depth,
            Tensor::zeros(&[classes, hidden]),
        );
        let b_out = store.add(
            name("b_out"),
            ParamKind::ClassifierBias,
            owner_depth,
            Tensor::zeros(&[classes]),
        );
        TokenClassifier {
            w_hidden,
            b_hidden,
            w_out,
            b_out,
            input,
            hidden,
            classes,
        }
    }

    pub fn ids(&self) -> [ParamId; 4] {
        [self.w_hidden, self.b_hidden, self.w_out, self.b_out]
    }

    /// Unnormalized scores. `dropout` is `(rate, seed)` applied to the hidden
    /// activations.
    pub fn logits(
        &self,
        graph: &mut Graph,
        store: &ParamStore,
        x: NodeId,
        dropout: Option<(f64, u64)>,
    ) -> Result<NodeId, GraphError> {
        let wh = graph.param(store, self.w_hidden);
        let bh = graph.param(store, self.b_hidden);
        let wo = graph.param(store, self.w_out);
        let bo = graph.param(store, self.b_out);
        let a = graph.matmul(wh, x)?;
        let a = graph.add2(a, bh)?;
        let mut hid = graph.relu(a)?;
        if let Some((rate, seed)) = dropout {
            if rate > 0.0 {
                hid = graph.dropout(hid, rate, seed)?;
            }
        }
        let o = graph.matmul(wo, hid)?;
        graph.add2(o, bo)
    }

    pub fn probabilities(
        &self,
        graph: &mut Graph,
        store: &ParamStore,
        x: NodeId,
    ) -> Result<NodeId, GraphError> {
        let l = self.logits(graph, store, x, None)?;
        graph.softmax(l)
    }

    /// Plain evaluation outside a graph.
    pub fn predict(&self, store: &ParamStore, x: &[f64]) -> Vec<f64> {
        let hidden = affine(store.get(self.w_hidden), store.get(self.b_hidden), x)
            .into_iter()
            .map(|v| v.max(0.0))
            .collect::<Vec<_>>();
        graph::softmax(&affine(store.get(self.w_out), store.get(self.b_out), &hidden))
    }
}

fn affine(w: &Tensor, b: &Tensor, x: &[f64]) -> Vec<f64> {
    (0..w.shape()[0])
        .map(|r| graph::dot(w.row(r), x) + b.data()[r])
        .collect()
}

/// Label embedding table `[classes, dim]`.
#[derive(Clone, Copy, Debug)]
pub struct LabelEmbeddings {
    pub table: ParamId,
    pub classes: usize,
    pub dim: usize,
}

impl LabelEmbeddings {
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        owner_depth: usize,
        classes: usize,
        dim: usize,
        rng: &mut R,
    ) -> Self {
        let init = uniform_matrix(classes, dim, rng);
        let table = store.add(name, ParamKind::LabelEmbedding, owner_depth, init);
        LabelEmbeddings {
            table,
            classes,
            dim,
        }
    }

    /// `Σ_j p_j ℓ(j)` for a probability node of width `classes`.
    pub fn weighted(
        &self,
        graph: &mut Graph,
        store: &ParamStore,
        probs: NodeId,
    ) -> Result<NodeId, GraphError> {
        let table = graph.param(store, self.table);
        graph.matmul(probs, table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::check_gradients;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn randomize(store: &mut ParamStore, ids: &[ParamId], rng: &mut ChaCha8Rng) {
        for id in ids {
            for v in store.get_mut(*id).data_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
    }

    #[test]
    fn zero_output_layer_is_uniform() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = TokenClassifier::register(&mut store, "c", 1, 3, 4, 5, &mut rng);
        let mut g = Graph::new();
        let x = g.constant_vector(&[0.3, 1.0, -2.0]);
        let p = c.probabilities(&mut g, &store, x).unwrap();
        g.forward(&store).unwrap();
        assert!(g.value(p).iter().all(|v| (v - 0.2).abs() < 1e-15));

        let one = TokenClassifier::register(&mut store, "one", 1, 3, 4, 1, &mut rng);
        randomize(&mut store, &one.ids(), &mut rng);
        let mut g = Graph::new();
        let x = g.constant_vector(&[0.3, 1.0, -2.0]);
        let p = one.probabilities(&mut g, &store, x).unwrap();
        g.forward(&store).unwrap();
        assert_eq!(g.value(p), &[1.0]);
    }

    #[test]
    fn graph_matches_direct_evaluation() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = TokenClassifier::register(&mut store, "c", 1, 4, 6, 3, &mut rng);
        randomize(&mut store, &c.ids(), &mut rng);
        let x = [0.5, -0.25, 1.5, 0.1];
        // independent evaluation with explicit loops
        let wh = store.get(c.w_hidden).clone();
        let bh = store.get(c.b_hidden).clone();
        let wo = store.get(c.w_out).clone();
        let bo = store.get(c.b_out).clone();
        let mut hid = vec![0.0; 6];
        for r in 0..6 {
            let mut s = bh.data()[r];
            for k in 0..4 {
                s += wh.data()[r * 4 + k] * x[k];
            }
            hid[r] = if s > 0.0 { s } else { 0.0 };
        }
        let mut z = vec![0.0; 3];
        for r in 0..3 {
            z[r] = bo.data()[r];
            for k in 0..6 {
                z[r] += wo.data()[r * 6 + k] * hid[k];
            }
        }
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        let want: Vec<f64> = e.iter().map(|v| v / s).collect();

        let mut g = Graph::new();
        let xn = g.constant_vector(&x);
        let p = c.probabilities(&mut g, &store, xn).unwrap();
        g.forward(&store).unwrap();
        for (a, b) in g.value(p).iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in c.predict(&store, &x).iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn classifier_gradients() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = TokenClassifier::register(&mut store, "c", 1, 3, 5, 4, &mut rng);
        randomize(&mut store, &c.ids(), &mut rng);
        let mut g = Graph::new();
        let x = g.constant_vector(&[0.4, -0.9, 0.35]);
        let l = c.logits(&mut g, &store, x, None).unwrap();
        let loss = g.cross_entropy(l, 2).unwrap();
        let err = check_gradients(&mut g, &mut store, loss, 1e-5).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    fn weighted(rows: &[&[f64]], p: &[f64]) -> Vec<f64> {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = LabelEmbeddings::register(&mut store, "e", 2, rows.len(), rows[0].len(), &mut rng);
        *store.get_mut(e.table) = Tensor::matrix(rows);
        let mut g = Graph::new();
        let pn = g.constant_vector(p);
        let y = e.weighted(&mut g, &store, pn).unwrap();
        g.forward(&store).unwrap();
        g.value(y).to_vec()
    }

    #[test]
    fn weighted_label_embedding_examples() {
        let rows: [&[f64]; 3] = [&[1.0, 2.0], &[-1.0, 0.5], &[4.0, -3.0]];
        assert_eq!(weighted(&rows, &[0.0, 1.0, 0.0]), vec![-1.0, 0.5]);
        assert_eq!(weighted(&[&[1.0, 0.0], &[0.0, 1.0]], &[0.5, 0.5]), vec![0.5, 0.5]);
        let got = weighted(&rows, &[0.2, 0.3, 0.5]);
        let want = [0.2 - 0.3 + 2.0, 0.4 + 0.15 - 1.5];
        for (a, b) in got.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn label_embedding_init_bound() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = LabelEmbeddings::register(&mut store, "e", 2, 45, 100, &mut rng);
        let b = (6.0f64 / 145.0).sqrt();
        assert_eq!(store.get(e.table).shape(), &[45, 100]);
        assert!(store.get(e.table).data().iter().all(|v| v.abs() <= b));
    }

    proptest! {
        #[test]
        fn rows_sum_to_one(seed in 0u64..1000) {
            let mut store = ParamStore::new();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = TokenClassifier::register(&mut store, "c", 1, 3, 4, 6, &mut rng);
            randomize(&mut store, &c.ids(), &mut rng);
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let p = c.predict(&store, &x);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|v| *v >= 0.0));
        }

        #[test]
        fn weighted_embedding_is_linear(a in 0.0f64..1.0, p0 in 0.0f64..1.0, q0 in 0.0f64..1.0) {
            let rows: [&[f64]; 2] = [&[1.5, -2.0, 0.25], &[0.5, 3.0, -1.0]];
            let p = [p0, 1.0 - p0];
            let q = [q0, 1.0 - q0];
            let mix = [a * p[0] + (1.0 - a) * q[0], a * p[1] + (1.0 - a) * q[1]];
            let fp = weighted(&rows, &p);
            let fq = weighted(&rows, &q);
            let fm = weighted(&rows, &mix);
            for k in 0..3 {
                prop_assert!((fm[k] - (a * fp[k] + (1.0 - a) * fq[k])).abs() < 1e-12);
            }
        }
    }
}
