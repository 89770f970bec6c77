//! Reverse-mode differentiable computation graph over a fixed op catalog.
//!
//! A [`Graph`] records nodes in construction order, which is also a valid
//! topological order. Parameter leaves refer into a [`ParamStore`] by id and
//! are read during [`Graph::forward`]; constants carry their own value.
//! Graphs are cheap and meant to be rebuilt per mini-batch.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::GraphError;
use crate::params::{Gradients, ParamId, ParamStore};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Graph operations. Inputs are passed separately to [`Graph::build`].
#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Param(ParamId),
    Constant,
    /// `[m,n]·[n] -> [m]`, `[n]·[n,p] -> [p]`, or `[n]·[n] -> [1]`.
    MatMul,
    /// Elementwise sum of one or more same-shaped inputs.
    Add,
    /// Concatenation of rank-1 inputs.
    Concat,
    Mul,
    Sub,
    Abs,
    Sigmoid,
    Tanh,
    Relu,
    /// Max over consecutive groups of `pool` elements.
    Maxout { pool: usize },
    Softmax,
    /// Elementwise max across same-shaped inputs.
    RowMaxPool,
    /// Inverted dropout with a mask drawn from `seed`.
    Dropout { rate: f64, seed: u64 },
    /// `-log softmax(x)[target]` over logits `x`.
    CrossEntropy { target: usize },
    /// `KL(target || softmax(x))` over logits `x`.
    KlDivergence { target: Vec<f64> },
    SumSquares,
    Scale(f64),
    /// Flat row-major slice `[offset, offset + len)`.
    Slice { offset: usize, len: usize },
}

/// Op names, used when ops are specified by string.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    MatMul,
    Add,
    Concat,
    Mul,
    Sub,
    Abs,
    Sigmoid,
    Tanh,
    Relu,
    Maxout,
    Softmax,
    RowMaxPool,
    Dropout,
    CrossEntropy,
    KlDivergence,
    SumSquares,
    Scale,
    Slice,
}

impl FromStr for OpKind {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "matmul" => OpKind::MatMul,
            "add" => OpKind::Add,
            "concat" => OpKind::Concat,
            "elementwise_mul" | "mul" => OpKind::Mul,
            "subtract" | "sub" => OpKind::Sub,
            "abs" => OpKind::Abs,
            "sigmoid" => OpKind::Sigmoid,
            "tanh" => OpKind::Tanh,
            "relu" => OpKind::Relu,
            "maxout" => OpKind::Maxout,
            "softmax" => OpKind::Softmax,
            "row_max_pool" => OpKind::RowMaxPool,
            "dropout" => OpKind::Dropout,
            "cross_entropy" => OpKind::CrossEntropy,
            "kl_divergence" => OpKind::KlDivergence,
            "sum_squares" => OpKind::SumSquares,
            "scalar_scale" | "scale" => OpKind::Scale,
            "slice" => OpKind::Slice,
            other => return Err(GraphError::UnknownOp(other.to_string())),
        })
    }
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Param(_) => "param",
            Op::Constant => "constant",
            Op::MatMul => "matmul",
            Op::Add => "add",
            Op::Concat => "concat",
            Op::Mul => "elementwise_mul",
            Op::Sub => "subtract",
            Op::Abs => "abs",
            Op::Sigmoid => "sigmoid",
            Op::Tanh => "tanh",
            Op::Relu => "relu",
            Op::Maxout { .. } => "maxout",
            Op::Softmax => "softmax",
            Op::RowMaxPool => "row_max_pool",
            Op::Dropout { .. } => "dropout",
            Op::CrossEntropy { .. } => "cross_entropy",
            Op::KlDivergence { .. } => "kl_divergence",
            Op::SumSquares => "sum_squares",
            Op::Scale(_) => "scalar_scale",
            Op::Slice { .. } => "slice",
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    inputs: Vec<NodeId>,
    shape: Vec<usize>,
    value: Vec<f64>,
    requires_grad: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    param_nodes: BTreeMap<ParamId, NodeId>,
    evaluated: usize,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf node for parameter `id`; repeated calls return the same node.
    pub fn param(&mut self, params: &ParamStore, id: ParamId) -> NodeId {
        if let Some(&n) = self.param_nodes.get(&id) {
            return n;
        }
        let n = NodeId(self.nodes.len());
        self.nodes.push(Node {
            op: Op::Param(id),
            inputs: Vec::new(),
            shape: params.get(id).shape().to_vec(),
            value: Vec::new(),
            requires_grad: true,
        });
        self.param_nodes.insert(id, n);
        n
    }

    pub fn constant(&mut self, tensor: Tensor) -> NodeId {
        let n = NodeId(self.nodes.len());
        let shape = tensor.shape().to_vec();
        self.nodes.push(Node {
            op: Op::Constant,
            inputs: Vec::new(),
            shape,
            value: tensor.into_data(),
            requires_grad: false,
        });
        n
    }

    pub fn constant_vector(&mut self, values: &[f64]) -> NodeId {
        self.constant(Tensor::vector(values))
    }

    /// Parameters that appear as leaves, in id order.
    pub fn param_leaves(&self) -> Vec<ParamId> {
        self.param_nodes.keys().copied().collect()
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn width(&self, id: NodeId) -> usize {
        numel(&self.nodes[id.0].shape)
    }

    pub fn op(&self, id: NodeId) -> &Op {
        &self.nodes[id.0].op
    }

    /// Value of an evaluated non-parameter node.
    ///
    /// Panics for parameter leaves and for nodes not yet evaluated.
    pub fn value(&self, id: NodeId) -> &[f64] {
        let node = &self.nodes[id.0];
        assert!(
            !matches!(node.op, Op::Param(_)),
            "parameter leaves are read from the ParamStore"
        );
        assert!(
            matches!(node.op, Op::Constant) || id.0 < self.evaluated,
            "node {} has not been evaluated",
            id.0
        );
        &node.value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.value(id)[0]
    }

    /// Appends a node after checking input arity and shapes.
    pub fn build(&mut self, op: Op, inputs: &[NodeId]) -> Result<NodeId, GraphError> {
        let shape = self.infer_shape(&op, inputs)?;
        let requires_grad = inputs.iter().any(|i| self.nodes[i.0].requires_grad);
        let n = NodeId(self.nodes.len());
        self.nodes.push(Node {
            op,
            inputs: inputs.to_vec(),
            shape,
            value: Vec::new(),
            requires_grad,
        });
        Ok(n)
    }

    fn infer_shape(&self, op: &Op, inputs: &[NodeId]) -> Result<Vec<usize>, GraphError> {
        let name = op.name();
        let shapes: Vec<&[usize]> = inputs.iter().map(|i| self.shape(*i)).collect();
        let owned = || shapes.iter().map(|s| s.to_vec()).collect::<Vec<_>>();
        let mismatch = || GraphError::Shape {
            op: name,
            shapes: owned(),
        };
        let arity = |expected: &'static str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(GraphError::Arity {
                    op: name,
                    expected,
                    got: inputs.len(),
                })
            }
        };
        let attr = |reason: String| GraphError::Attribute { op: name, reason };
        match op {
            Op::Param(_) | Op::Constant => Err(attr("leaves are created with param()/constant()".into())),
            Op::MatMul => {
                arity("2", inputs.len() == 2)?;
                match (shapes[0], shapes[1]) {
                    ([m, n], [k]) if n == k => Ok(vec![*m]),
                    ([n], [k, p]) if n == k => Ok(vec![*p]),
                    ([n], [k]) if n == k => Ok(vec![1]),
                    _ => Err(mismatch()),
                }
            }
            Op::Add | Op::RowMaxPool => {
                arity(">= 1", !inputs.is_empty())?;
                if shapes.iter().all(|s| *s == shapes[0]) {
                    Ok(shapes[0].to_vec())
                } else {
                    Err(mismatch())
                }
            }
            Op::Sub | Op::Mul => {
                arity("2", inputs.len() == 2)?;
                if shapes[0] == shapes[1] {
                    Ok(shapes[0].to_vec())
                } else {
                    Err(mismatch())
                }
            }
            Op::Concat => {
                arity(">= 1", !inputs.is_empty())?;
                if shapes.iter().all(|s| s.len() == 1) {
                    Ok(vec![shapes.iter().map(|s| s[0]).sum()])
                } else {
                    Err(mismatch())
                }
            }
            Op::Abs | Op::Sigmoid | Op::Tanh | Op::Relu | Op::Scale(_) => {
                arity("1", inputs.len() == 1)?;
                Ok(shapes[0].to_vec())
            }
            Op::Dropout { rate, .. } => {
                arity("1", inputs.len() == 1)?;
                if !(0.0..1.0).contains(rate) {
                    return Err(attr(format!("rate {rate} outside [0, 1)")));
                }
                Ok(shapes[0].to_vec())
            }
            Op::Maxout { pool } => {
                arity("1", inputs.len() == 1)?;
                if shapes[0].len() != 1 {
                    return Err(mismatch());
                }
                if *pool == 0 || !shapes[0][0].is_multiple_of(*pool) {
                    return Err(attr(format!(
                        "pool size {pool} does not divide width {}",
                        shapes[0][0]
                    )));
                }
                Ok(vec![shapes[0][0] / pool])
            }
            Op::Softmax => {
                arity("1", inputs.len() == 1)?;
                if shapes[0].len() != 1 {
                    return Err(mismatch());
                }
                Ok(shapes[0].to_vec())
            }
            Op::CrossEntropy { target } => {
                arity("1", inputs.len() == 1)?;
                if shapes[0].len() != 1 {
                    return Err(mismatch());
                }
                if *target >= shapes[0][0] {
                    return Err(attr(format!(
                        "target {target} out of range for {} classes",
                        shapes[0][0]
                    )));
                }
                Ok(vec![1])
            }
            Op::KlDivergence { target } => {
                arity("1", inputs.len() == 1)?;
                if shapes[0].len() != 1 || shapes[0][0] != target.len() {
                    return Err(attr(format!(
                        "target distribution of length {} for input shape {:?}",
                        target.len(),
                        shapes[0]
                    )));
                }
                let sum: f64 = target.iter().sum();
                if target.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                    return Err(attr("target is not a probability distribution".into()));
                }
                Ok(vec![1])
            }
            Op::SumSquares => {
                arity("1", inputs.len() == 1)?;
                Ok(vec![1])
            }
            Op::Slice { offset, len } => {
                arity("1", inputs.len() == 1)?;
                if *len == 0 || offset + len > numel(shapes[0]) {
                    return Err(attr(format!(
                        "slice [{offset}, {}) out of bounds for shape {:?}",
                        offset + len,
                        shapes[0]
                    )));
                }
                Ok(vec![*len])
            }
        }
    }

    /// Marks every node stale so the next [`Graph::forward`] recomputes all.
    pub fn invalidate(&mut self) {
        self.evaluated = 0;
    }

    /// Evaluates all nodes added since the last forward pass.
    pub fn forward(&mut self, params: &ParamStore) -> Result<(), GraphError> {
        for i in self.evaluated..self.nodes.len() {
            let out = match &self.nodes[i].op {
                Op::Param(_) => Vec::new(),
                Op::Constant => continue,
                _ => self.eval_node(i, params),
            };
            if !out.iter().all(|v| v.is_finite()) {
                self.evaluated = i;
                return Err(GraphError::NonFinite {
                    node: i,
                    op: self.nodes[i].op.name(),
                });
            }
            self.nodes[i].value = out;
        }
        self.evaluated = self.nodes.len();
        Ok(())
    }

    fn input_value<'a>(&'a self, params: &'a ParamStore, id: NodeId) -> &'a [f64] {
        match self.nodes[id.0].op {
            Op::Param(p) => params.get(p).data(),
            _ => &self.nodes[id.0].value,
        }
    }

    fn eval_node(&self, i: usize, params: &ParamStore) -> Vec<f64> {
        let node = &self.nodes[i];
        let ins: Vec<&[f64]> = node
            .inputs
            .iter()
            .map(|id| self.input_value(params, *id))
            .collect();
        let in_shapes: Vec<&[usize]> = node.inputs.iter().map(|id| self.shape(*id)).collect();
        match &node.op {
            Op::Param(_) | Op::Constant => unreachable!(),
            Op::MatMul => match (in_shapes[0], in_shapes[1]) {
                ([m, n], [_]) => (0..*m)
                    .map(|r| dot(&ins[0][r * n..(r + 1) * n], ins[1]))
                    .collect(),
                ([n], [_, p]) => {
                    let mut out = vec![0.0; *p];
                    for r in 0..*n {
                        let a = ins[0][r];
                        if a == 0.0 {
                            continue;
                        }
                        for (o, m) in out.iter_mut().zip(&ins[1][r * p..(r + 1) * p]) {
                            *o += a * m;
                        }
                    }
                    out
                }
                _ => vec![dot(ins[0], ins[1])],
            },
            Op::Add => {
                let mut out = ins[0].to_vec();
                for x in &ins[1..] {
                    for (o, v) in out.iter_mut().zip(x.iter()) {
                        *o += v;
                    }
                }
                out
            }
            Op::Sub => ins[0].iter().zip(ins[1]).map(|(a, b)| a - b).collect(),
            Op::Mul => ins[0].iter().zip(ins[1]).map(|(a, b)| a * b).collect(),
            Op::Concat => ins.concat(),
            Op::Abs => ins[0].iter().map(|v| v.abs()).collect(),
            Op::Sigmoid => ins[0].iter().map(|&v| sigmoid(v)).collect(),
            Op::Tanh => ins[0].iter().map(|v| v.tanh()).collect(),
            Op::Relu => ins[0].iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect(),
            Op::Maxout { pool } => ins[0]
                .chunks(*pool)
                .map(|g| g[argmax(g)])
                .collect(),
            Op::Softmax => softmax(ins[0]),
            Op::RowMaxPool => {
                let mut out = ins[0].to_vec();
                for x in &ins[1..] {
                    for (o, v) in out.iter_mut().zip(x.iter()) {
                        if *v > *o {
                            *o = *v;
                        }
                    }
                }
                out
            }
            Op::Dropout { rate, seed } => {
                let mask = dropout_mask(ins[0].len(), *rate, *seed);
                ins[0].iter().zip(&mask).map(|(v, m)| v * m).collect()
            }
            Op::CrossEntropy { target } => vec![log_sum_exp(ins[0]) - ins[0][*target]],
            Op::KlDivergence { target } => {
                let lse = log_sum_exp(ins[0]);
                let kl = target
                    .iter()
                    .zip(ins[0])
                    .filter(|(p, _)| **p > 0.0)
                    .map(|(p, z)| p * (p.ln() - (z - lse)))
                    .sum();
                vec![kl]
            }
            Op::SumSquares => vec![ins[0].iter().map(|v| v * v).sum()],
            Op::Scale(c) => ins[0].iter().map(|v| c * v).collect(),
            Op::Slice { offset, len } => ins[0][*offset..offset + len].to_vec(),
        }
    }

    /// Back-propagates from the scalar `loss` node and returns gradients for
    /// every parameter leaf reachable from it.
    pub fn backward(&self, params: &ParamStore, loss: NodeId) -> Result<Gradients, GraphError> {
        let loss_node = &self.nodes[loss.0];
        if numel(&loss_node.shape) != 1 {
            return Err(GraphError::NonScalarLoss {
                node: loss.0,
                shape: loss_node.shape.clone(),
            });
        }
        if loss.0 >= self.evaluated && !matches!(loss_node.op, Op::Constant) {
            return Err(GraphError::NotEvaluated(loss.0));
        }
        let mut result = Gradients::new();
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); loss.0 + 1];
        grads[loss.0] = vec![1.0];
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || grads[i].is_empty() {
                continue;
            }
            let g = std::mem::take(&mut grads[i]);
            if let Op::Param(p) = node.op {
                result.accumulate(p, &node.shape, &g);
                continue;
            }
            self.backprop_node(i, &g, params, &mut grads);
        }
        Ok(result)
    }

    fn backprop_node(&self, i: usize, g: &[f64], params: &ParamStore, grads: &mut [Vec<f64>]) {
        let node = &self.nodes[i];
        let inputs = &node.inputs;
        let wants = |k: usize| self.nodes[inputs[k].0].requires_grad;
        let val = |k: usize| self.input_value(params, inputs[k]);
        // Accumulator for input k, allocated on first use.
        fn acc<'g>(grads: &'g mut [Vec<f64>], graph: &Graph, id: NodeId) -> &'g mut [f64] {
            let slot = &mut grads[id.0];
            if slot.is_empty() {
                *slot = vec![0.0; graph.width(id)];
            }
            slot
        }
        match &node.op {
            Op::Param(_) | Op::Constant => {}
            Op::MatMul => {
                let (a, b) = (val(0), val(1));
                match (self.shape(inputs[0]), self.shape(inputs[1])) {
                    ([m, n], [_]) => {
                        let (m, n) = (*m, *n);
                        if wants(0) {
                            let ga = acc(grads, self, inputs[0]);
                            for r in 0..m {
                                if g[r] == 0.0 {
                                    continue;
                                }
                                for (o, bv) in ga[r * n..(r + 1) * n].iter_mut().zip(b) {
                                    *o += g[r] * bv;
                                }
                            }
                        }
                        if wants(1) {
                            let gb = acc(grads, self, inputs[1]);
                            for r in 0..m {
                                if g[r] == 0.0 {
                                    continue;
                                }
                                for (o, av) in gb.iter_mut().zip(&a[r * n..(r + 1) * n]) {
                                    *o += g[r] * av;
                                }
                            }
                        }
                    }
                    ([n], [_, p]) => {
                        let (n, p) = (*n, *p);
                        if wants(0) {
                            let ga = acc(grads, self, inputs[0]);
                            for r in 0..n {
                                ga[r] += dot(&b[r * p..(r + 1) * p], g);
                            }
                        }
                        if wants(1) {
                            let gb = acc(grads, self, inputs[1]);
                            for r in 0..n {
                                if a[r] == 0.0 {
                                    continue;
                                }
                                for (o, gv) in gb[r * p..(r + 1) * p].iter_mut().zip(g) {
                                    *o += a[r] * gv;
                                }
                            }
                        }
                    }
                    _ => {
                        if wants(0) {
                            for (o, bv) in acc(grads, self, inputs[0]).iter_mut().zip(b) {
                                *o += g[0] * bv;
                            }
                        }
                        if wants(1) {
                            for (o, av) in acc(grads, self, inputs[1]).iter_mut().zip(a) {
                                *o += g[0] * av;
                            }
                        }
                    }
                }
            }
            Op::Add => {
                for (k, id) in inputs.iter().enumerate() {
                    if wants(k) {
                        add_into(acc(grads, self, *id), g);
                    }
                }
            }
            Op::Sub => {
                if wants(0) {
                    add_into(acc(grads, self, inputs[0]), g);
                }
                if wants(1) {
                    for (o, gv) in acc(grads, self, inputs[1]).iter_mut().zip(g) {
                        *o -= gv;
                    }
                }
            }
            Op::Mul => {
                let (a, b) = (val(0), val(1));
                if wants(0) {
                    for ((o, gv), bv) in acc(grads, self, inputs[0]).iter_mut().zip(g).zip(b) {
                        *o += gv * bv;
                    }
                }
                if wants(1) {
                    for ((o, gv), av) in acc(grads, self, inputs[1]).iter_mut().zip(g).zip(a) {
                        *o += gv * av;
                    }
                }
            }
            Op::Concat => {
                let mut offset = 0;
                for (k, id) in inputs.iter().enumerate() {
                    let w = self.width(*id);
                    if wants(k) {
                        add_into(acc(grads, self, *id), &g[offset..offset + w]);
                    }
                    offset += w;
                }
            }
            Op::Abs => {
                let x = val(0);
                for ((o, gv), xv) in acc(grads, self, inputs[0]).iter_mut().zip(g).zip(x) {
                    if *xv > 0.0 {
                        *o += gv;
                    } else if *xv < 0.0 {
                        *o -= gv;
                    }
                }
            }
            Op::Sigmoid => {
                let y = &node.value;
                for ((o, gv), yv) in acc(grads, self, inputs[0]).iter_mut().zip(g).zip(y) {
                    *o += gv * yv * (1.0 - yv);
                }
            }
            Op::Tanh => {
                let y = &node.value;
                for ((o, gv), yv) in acc(grads, self, inputs[0]).iter_mut().zip(g).zip(y) {
                    *o += gv * (1.0 - yv * yv);
                }
            }
            Op::Relu => {
                let x = val(0);
                for ((o, gv), xv) in acc(grads, self, inputs[0]).iter_mut().zip(g).zip(x) {
                    if *xv > 0.0 {
                        *o += gv;
                    }
                }
            }
            Op::Maxout { pool } => {
                let x = val(0);
                let winners: Vec<usize> = x
                    .chunks(*pool)
                    .enumerate()
                    .map(|(j, grp)| j * pool + argmax(grp))
                    .collect();
                let gx = acc(grads, self, inputs[0]);
                for (gv, w) in g.iter().zip(winners) {
                    gx[w] += gv;
                }
            }
            Op::Softmax => {
                let y = &node.value;
                let s = dot(g, y);
                for ((o, gv), yv) in acc(grads, self, inputs[0]).iter_mut().zip(g).zip(y) {
                    *o += yv * (gv - s);
                }
            }
            Op::RowMaxPool => {
                let width = g.len();
                for j in 0..width {
                    let mut best = 0;
                    let mut best_v = val(0)[j];
                    for k in 1..inputs.len() {
                        let v = val(k)[j];
                        if v > best_v {
                            best = k;
                            best_v = v;
                        }
                    }
                    if wants(best) {
                        acc(grads, self, inputs[best])[j] += g[j];
                    }
                }
            }
            Op::Dropout { rate, seed } => {
                let mask = dropout_mask(g.len(), *rate, *seed);
                for ((o, gv), m) in acc(grads, self, inputs[0]).iter_mut().zip(g).zip(&mask) {
                    *o += gv * m;
                }
            }
            Op::CrossEntropy { target } => {
                let p = softmax(val(0));
                let gx = acc(grads, self, inputs[0]);
                for (k, (o, pv)) in gx.iter_mut().zip(&p).enumerate() {
                    let t = if k == *target { 1.0 } else { 0.0 };
                    *o += g[0] * (pv - t);
                }
            }
            Op::KlDivergence { target } => {
                let p = softmax(val(0));
                let gx = acc(grads, self, inputs[0]);
                for ((o, pv), tv) in gx.iter_mut().zip(&p).zip(target) {
                    *o += g[0] * (pv - tv);
                }
            }
            Op::SumSquares => {
                let x = val(0);
                for (o, xv) in acc(grads, self, inputs[0]).iter_mut().zip(x) {
                    *o += 2.0 * g[0] * xv;
                }
            }
            Op::Scale(c) => {
                for (o, gv) in acc(grads, self, inputs[0]).iter_mut().zip(g) {
                    *o += c * gv;
                }
            }
            Op::Slice { offset, len } => {
                let gx = acc(grads, self, inputs[0]);
                add_into(&mut gx[*offset..offset + len], g);
            }
        }
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        self.build(Op::MatMul, &[a, b])
    }

    pub fn add(&mut self, inputs: &[NodeId]) -> Result<NodeId, GraphError> {
        self.build(Op::Add, inputs)
    }

    pub fn add2(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        self.build(Op::Add, &[a, b])
    }

    pub fn concat(&mut self, inputs: &[NodeId]) -> Result<NodeId, GraphError> {
        self.build(Op::Concat, inputs)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        self.build(Op::Mul, &[a, b])
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        self.build(Op::Sub, &[a, b])
    }

    pub fn abs(&mut self, x: NodeId) -> Result<NodeId, GraphError> {
        self.build(Op::Abs, &[x])
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId, GraphError> {
        self.build(Op::Sigmoid, &[x])
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId, GraphError> {
        self.build(Op::Tanh, &[x])
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId, GraphError> {
        self.build(Op::Relu, &[x])
    }

    pub fn maxout(&mut self, x: NodeId, pool: usize) -> Result<NodeId, GraphError> {
        self.build(Op::Maxout { pool }, &[x])
    }

    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId, GraphError> {
        self.build(Op::Softmax, &[x])
    }

    pub fn row_max_pool(&mut self, rows: &[NodeId]) -> Result<NodeId, GraphError> {
        self.build(Op::RowMaxPool, rows)
    }

    pub fn dropout(&mut self, x: NodeId, rate: f64, seed: u64) -> Result<NodeId, GraphError> {
        self.build(Op::Dropout { rate, seed }, &[x])
    }

    pub fn cross_entropy(&mut self, logits: NodeId, target: usize) -> Result<NodeId, GraphError> {
        self.build(Op::CrossEntropy { target }, &[logits])
    }

    pub fn kl_divergence(&mut self, logits: NodeId, target: &[f64]) -> Result<NodeId, GraphError> {
        self.build(
            Op::KlDivergence {
                target: target.to_vec(),
            },
            &[logits],
        )
    }

    pub fn sum_squares(&mut self, x: NodeId) -> Result<NodeId, GraphError> {
        self.build(Op::SumSquares, &[x])
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> Result<NodeId, GraphError> {
        self.build(Op::Scale(factor), &[x])
    }

    pub fn slice(&mut self, x: NodeId, offset: usize, len: usize) -> Result<NodeId, GraphError> {
        self.build(Op::Slice { offset, len }, &[x])
    }

    /// Row `row` of a rank-2 node.
    pub fn row(&mut self, matrix: NodeId, row: usize) -> Result<NodeId, GraphError> {
        let shape = self.shape(matrix).to_vec();
        if shape.len() != 2 || row >= shape[0] {
            return Err(GraphError::Attribute {
                op: "slice",
                reason: format!("row {row} out of range for shape {shape:?}"),
            });
        }
        self.slice(matrix, row * shape[1], shape[1])
    }
}

/// Max relative error between analytic and central-difference gradients over
/// every element of every parameter leaf in `graph`.
///
/// Each element's error is `|a - n| / max(1e-8, |a| + |n|)`. Parameters are
/// restored afterwards and the graph is left evaluated.
pub fn check_gradients(
    graph: &mut Graph,
    params: &mut ParamStore,
    loss: NodeId,
    step: f64,
) -> Result<f64, GraphError> {
    check_gradients_sampled(graph, params, loss, step, usize::MAX, 0)
}

/// Like [`check_gradients`] but probes at most `per_param` randomly chosen
/// elements of each parameter.
pub fn check_gradients_sampled(
    graph: &mut Graph,
    params: &mut ParamStore,
    loss: NodeId,
    step: f64,
    per_param: usize,
    seed: u64,
) -> Result<f64, GraphError> {
    graph.invalidate();
    graph.forward(params)?;
    let analytic = graph.backward(params, loss)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for id in graph.param_leaves() {
        let len = params.get(id).len();
        let elements: Vec<usize> = if len <= per_param {
            (0..len).collect()
        } else {
            (0..per_param).map(|_| rng.gen_range(0..len)).collect()
        };
        for k in elements {
            let original = params.get(id).data()[k];
            params.get_mut(id).data_mut()[k] = original + step;
            graph.invalidate();
            graph.forward(params)?;
            let plus = graph.scalar(loss);
            params.get_mut(id).data_mut()[k] = original - step;
            graph.invalidate();
            graph.forward(params)?;
            let minus = graph.scalar(loss);
            params.get_mut(id).data_mut()[k] = original;
            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic.get(id).map_or(0.0, |t| t.data()[k]);
            let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            worst = worst.max(err);
        }
    }
    graph.invalidate();
    graph.forward(params)?;
    Ok(worst)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Index of the maximum; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

fn dropout_mask(len: usize, rate: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}
