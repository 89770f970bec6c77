//! Bi-LSTM layers and the per-layer input composition.

use rand::Rng;

use crate::error::{Error, GraphError, Result};
use crate::graph::{Graph, NodeId};
use crate::init::uniform_matrix;
use crate::params::{ParamId, ParamKind, ParamStore};
use crate::task::{Task, TaskSet};
use crate::tensor::Tensor;

/// Weights of one LSTM direction. Each gate matrix is `[hidden, input + hidden]`
/// and multiplies `[g_t; h_{t-1}]`.
#[derive(Clone, Debug)]
pub struct LstmParams {
    pub w_i: ParamId,
    pub w_f: ParamId,
    pub w_o: ParamId,
    pub w_u: ParamId,
    pub b_i: ParamId,
    pub b_f: ParamId,
    pub b_o: ParamId,
    pub b_u: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmParams {
    /// Uniform gate weights, zero biases except the forget bias (ones).
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        owner_depth: usize,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let cols = input + hidden;
        let mut weight = |name: &str, rng: &mut R| {
            store.add(
                format!("{prefix}.{name}"),
                ParamKind::LstmWeight,
                owner_depth,
                uniform_matrix(hidden, cols, rng),
            )
        };
        let w_i = weight("w_i", rng);
        let w_f = weight("w_f", rng);
        let w_o = weight("w_o", rng);
        let w_u = weight("w_u", rng);
        let mut bias = |name: &str, value: f64| {
            store.add(
                format!("{prefix}.{name}"),
                ParamKind::LstmBias,
                owner_depth,
                Tensor::filled(&[hidden], value),
            )
        };
        let b_i = bias("b_i", 0.0);
        let b_f = bias("b_f", 1.0);
        let b_o = bias("b_o", 0.0);
        let b_u = bias("b_u", 0.0);
        LstmParams {
            w_i,
            w_f,
            w_o,
            w_u,
            b_i,
            b_f,
            b_o,
            b_u,
            input,
            hidden,
        }
    }

    pub fn ids(&self) -> [ParamId; 8] {
        [
            self.w_i, self.w_f, self.w_o, self.w_u, self.b_i, self.b_f, self.b_o, self.b_u,
        ]
    }
}

/// One LSTM step; returns `(h_t, c_t)`.
///
/// `i, f, o = σ(W[g; h_prev] + b)`, `u = tanh(W_u[g; h_prev] + b_u)`,
/// `c = i⊙u + f⊙c_prev`, `h = o⊙tanh(c)`.
pub fn lstm_step(
    graph: &mut Graph,
    store: &ParamStore,
    p: &LstmParams,
    input: NodeId,
    prev_h: NodeId,
    prev_c: NodeId,
) -> Result<(NodeId, NodeId), GraphError> {
    let widths = [graph.width(input), graph.width(prev_h), graph.width(prev_c)];
    if widths != [p.input, p.hidden, p.hidden] {
        return Err(GraphError::Shape {
            op: "lstm_step",
            shapes: vec![
                vec![widths[0]],
                vec![widths[1]],
                vec![widths[2]],
                vec![p.input],
                vec![p.hidden],
            ],
        });
    }
    let z = graph.concat(&[input, prev_h])?;
    let affine = |w: ParamId, b: ParamId, graph: &mut Graph| -> Result<NodeId, GraphError> {
        let wn = graph.param(store, w);
        let bn = graph.param(store, b);
        let m = graph.matmul(wn, z)?;
        graph.add2(m, bn)
    };
    let a_i = affine(p.w_i, p.b_i, graph)?;
    let a_f = affine(p.w_f, p.b_f, graph)?;
    let a_o = affine(p.w_o, p.b_o, graph)?;
    let a_u = affine(p.w_u, p.b_u, graph)?;
    let i = graph.sigmoid(a_i)?;
    let f = graph.sigmoid(a_f)?;
    let o = graph.sigmoid(a_o)?;
    let u = graph.tanh(a_u)?;
    let iu = graph.mul(i, u)?;
    let fc = graph.mul(f, prev_c)?;
    let c = graph.add2(iu, fc)?;
    let tc = graph.tanh(c)?;
    let h = graph.mul(o, tc)?;
    Ok((h, c))
}

/// Forward and backward directions with separate weights.
#[derive(Clone, Debug)]
pub struct BiLstmParams {
    pub forward: LstmParams,
    pub backward: LstmParams,
}

impl BiLstmParams {
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        owner_depth: usize,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        BiLstmParams {
            forward: LstmParams::register(store, &format!("{prefix}.fwd"), owner_depth, input, hidden, rng),
            backward: LstmParams::register(store, &format!("{prefix}.bwd"), owner_depth, input, hidden, rng),
        }
    }

    pub fn output_width(&self) -> usize {
        2 * self.forward.hidden
    }
}

/// Runs both directions from zero initial states and returns
/// `[→h_t; ←h_t]` for every position.
pub fn bilstm_run(
    graph: &mut Graph,
    store: &ParamStore,
    p: &BiLstmParams,
    inputs: &[NodeId],
) -> Result<Vec<NodeId>, GraphError> {
    let fwd = run_direction(graph, store, &p.forward, inputs.iter().copied())?;
    let mut bwd = run_direction(graph, store, &p.backward, inputs.iter().rev().copied())?;
    bwd.reverse();
    fwd.into_iter()
        .zip(bwd)
        .map(|(f, b)| graph.concat(&[f, b]))
        .collect()
}

fn run_direction(
    graph: &mut Graph,
    store: &ParamStore,
    p: &LstmParams,
    inputs: impl Iterator<Item = NodeId>,
) -> Result<Vec<NodeId>, GraphError> {
    let mut h = graph.constant(Tensor::zeros(&[p.hidden]));
    let mut c = graph.constant(Tensor::zeros(&[p.hidden]));
    let mut out = Vec::new();
    for x in inputs {
        let (nh, nc) = lstm_step(graph, store, p, x, h, c)?;
        out.push(nh);
        h = nh;
        c = nc;
    }
    Ok(out)
}

/// Ablation switches and the active task set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerWiring {
    /// Feed the word representation into every layer above the lowest.
    pub use_shortcut: bool,
    /// Feed weighted POS/chunk label embeddings into higher layers.
    pub use_label_embeddings: bool,
    /// Feed the nearest lower layer's hidden state into the next layer.
    pub use_vertical: bool,
    pub tasks: TaskSet,
}

impl Default for LayerWiring {
    fn default() -> Self {
        LayerWiring {
            use_shortcut: true,
            use_label_embeddings: true,
            use_vertical: true,
            tasks: TaskSet::all(),
        }
    }
}

/// Which components make up a layer's input `g_t`, in concatenation order
/// `[lower h_t; x_t; label embedding sum]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerPlan {
    pub task: Task,
    pub vertical_from: Option<Task>,
    pub shortcut: bool,
    /// Tasks whose weighted label embeddings are summed into the input.
    pub label_sources: Vec<Task>,
}

/// Widths of the possible input components.
#[derive(Clone, Copy, Debug)]
pub struct InputWidths {
    pub lower_hidden: usize,
    pub word: usize,
    pub label: usize,
}

impl LayerPlan {
    pub fn input_width(&self, w: InputWidths) -> usize {
        let mut n = 0;
        if self.vertical_from.is_some() {
            n += w.lower_hidden;
        }
        if self.shortcut {
            n += w.word;
        }
        if !self.label_sources.is_empty() {
            n += w.label;
        }
        n
    }
}

impl LayerWiring {
    /// Input plan for `task`'s layer. The lowest active layer reads only
    /// `x_t`; a layer whose switches leave it without any input keeps `x_t`.
    pub fn plan(&self, task: Task) -> Result<LayerPlan> {
        if !self.tasks.contains(task) {
            return Err(Error::Config(format!("task {task} is not active")));
        }
        let lower = self.tasks.below(task);
        if lower.is_none() {
            return Ok(LayerPlan {
                task,
                vertical_from: None,
                shortcut: true,
                label_sources: Vec::new(),
            });
        }
        let vertical_from = if self.use_vertical { lower } else { None };
        let label_sources: Vec<Task> = if self.use_label_embeddings {
            [Task::Pos, Task::Chunk]
                .into_iter()
                .filter(|t| *t < task && self.tasks.contains(*t))
                .collect()
        } else {
            Vec::new()
        };
        let mut shortcut = self.use_shortcut;
        if vertical_from.is_none() && label_sources.is_empty() {
            shortcut = true;
        }
        Ok(LayerPlan {
            task,
            vertical_from,
            shortcut,
            label_sources,
        })
    }

    /// Whether some active layer consumes `source`'s label embeddings.
    pub fn label_embedding_used(&self, source: Task) -> bool {
        self.tasks
            .tasks()
            .filter(|t| *t > source)
            .any(|t| self.plan(t).map(|p| p.label_sources.contains(&source)).unwrap_or(false))
    }
}

/// Per-token input components supplied by the caller.
#[derive(Clone, Debug, Default)]
pub struct InputParts {
    pub lower_hidden: Option<NodeId>,
    pub word: Option<NodeId>,
    pub label_embeddings: Vec<NodeId>,
}

/// Concatenates the components `plan` asks for into `g_t`.
pub fn compose_input(graph: &mut Graph, plan: &LayerPlan, parts: &InputParts) -> Result<NodeId> {
    let missing = |what: &str| {
        Error::InvalidArgument(format!("layer {} input needs {what}", plan.task))
    };
    let mut pieces = Vec::with_capacity(3);
    if plan.vertical_from.is_some() {
        pieces.push(parts.lower_hidden.ok_or_else(|| missing("the lower hidden state"))?);
    }
    if plan.shortcut {
        pieces.push(parts.word.ok_or_else(|| missing("the word representation"))?);
    }
    if !plan.label_sources.is_empty() {
        if parts.label_embeddings.len() != plan.label_sources.len() {
            return Err(missing(&format!(
                "{} label embeddings, got {}",
                plan.label_sources.len(),
                parts.label_embeddings.len()
            )));
        }
        pieces.push(graph.add(&parts.label_embeddings)?);
    }
    if pieces.is_empty() {
        return Err(missing("at least one component"));
    }
    Ok(graph.concat(&pieces)?)
}
