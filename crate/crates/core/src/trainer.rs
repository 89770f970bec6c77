//! Joint training: per-task objectives with L2 and successive
//! regularization, mini-batch SGD with clipping, and the epoch loop.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Corpus, Sentence, SentencePair};
use crate::error::{Error, Result};
use crate::eval::{evaluate_model, Metric, MetricReport};
use crate::graph::{Graph, NodeId};
use crate::model::{JointModel, Noise};
use crate::params::{Gradients, ParamId, ParamKind, ParamStore};
use crate::task::{Task, TaskSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskOrder {
    /// POS, chunking, dependencies, relatedness, entailment.
    Fixed,
    /// A fresh permutation of the active tasks every epoch.
    Random,
}

impl FromStr for TaskOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(TaskOrder::Fixed),
            "random" => Ok(TaskOrder::Random),
            _ => Err(Error::InvalidArgument(format!("unknown task order `{s}`"))),
        }
    }
}

impl fmt::Display for TaskOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskOrder::Fixed => "fixed",
            TaskOrder::Random => "random",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lambda_lstm: f64,
    pub lambda_classifier: f64,
    /// Successive-regularization weight for shared non-classifier parameters.
    pub delta: f64,
    /// Successive-regularization weight for lower-task classifier parameters.
    pub delta_classifier: f64,
    pub epsilon: f64,
    pub rho: f64,
    /// Mini-batch size per task, indexed by depth − 1.
    pub batch_sizes: [usize; 5],
    pub epochs: usize,
    pub seed: u64,
    pub order: TaskOrder,
    /// Dev metric for model selection; `None` picks UAS when parsing is
    /// active, otherwise the metric of the highest active task.
    pub select: Option<Metric>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_lstm: 1e-6,
            lambda_classifier: 1e-5,
            delta: 1e-3,
            delta_classifier: 1e-2,
            epsilon: 1.0,
            rho: 0.3,
            batch_sizes: [25, 25, 15, 25, 25],
            epochs: 100,
            seed: 1,
            order: TaskOrder::Fixed,
            select: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let coefficients = [
            ("lambda_lstm", self.lambda_lstm),
            ("lambda_classifier", self.lambda_classifier),
            ("delta", self.delta),
            ("delta_classifier", self.delta_classifier),
            ("rho", self.rho),
        ];
        for (name, v) in coefficients {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a finite value >= 0, got {v}")));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.batch_sizes.contains(&0) {
            return Err(Error::Config("batch sizes must be positive".into()));
        }
        Ok(())
    }

    /// `ε / (1 + ρ(k − 1))` for 1-based epoch `k`.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        assert!(epoch >= 1, "epochs are 1-based");
        self.epsilon / (1.0 + self.rho * (epoch - 1) as f64)
    }

    pub fn batch_size(&self, task: Task) -> usize {
        self.batch_sizes[task.depth() - 1]
    }
}

/// Gradient-norm clipping threshold `min(3, depth)`.
pub fn clip_threshold(task: Task) -> f64 {
    (task.depth() as f64).min(3.0)
}

/// Frozen copy of the parameters, tagged with when it was taken.
#[derive(Clone, Debug)]
pub struct ParamSnapshot {
    epoch: usize,
    task: Option<Task>,
    params: ParamStore,
}

impl ParamSnapshot {
    pub fn capture(params: &ParamStore, epoch: usize, task: Option<Task>) -> Self {
        ParamSnapshot { epoch, task, params: params.clone() }
    }

    /// Epoch of capture; 0 for the initial parameters.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Task trained just before capture, `None` for epoch boundaries.
    pub fn task(&self) -> Option<Task> {
        self.task
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }
}

/// Reference points for the successive-regularization terms.
#[derive(Clone, Debug)]
pub struct Snapshots {
    /// Parameters at the end of the previous epoch (initial ones before epoch 1).
    pub epoch_start: ParamSnapshot,
    /// Latest snapshot taken after training each task, indexed by depth − 1.
    pub after_task: [Option<ParamSnapshot>; 5],
}

impl Snapshots {
    pub fn new(initial: &ParamStore) -> Self {
        Snapshots {
            epoch_start: ParamSnapshot::capture(initial, 0, None),
            after_task: Default::default(),
        }
    }

    pub fn record(&mut self, params: &ParamStore, epoch: usize, task: Task) {
        self.after_task[task.depth() - 1] = Some(ParamSnapshot::capture(params, epoch, Some(task)));
    }

    /// Snapshot and owner-depth cutoff that `task` is anchored to: the
    /// embeddings against the epoch start for the lowest active task, and
    /// everything up to the task below otherwise.
    pub fn reference(&self, task: Task, tasks: TaskSet) -> Result<(&ParamSnapshot, usize)> {
        match tasks.below(task) {
            None => Ok((&self.epoch_start, 0)),
            Some(below) => self.after_task[below.depth() - 1]
                .as_ref()
                .map(|s| (s, below.depth()))
                .ok_or_else(|| Error::MissingSnapshot(format!("{task} (none taken after training {below})"))),
        }
    }
}

/// Examples of one mini-batch.
#[derive(Clone, Copy, Debug)]
pub enum Batch<'a> {
    Sentences(&'a [&'a Sentence]),
    Pairs(&'a [&'a SentencePair]),
}

impl Batch<'_> {
    pub fn len(&self) -> usize {
        match self {
            Batch::Sentences(s) => s.len(),
            Batch::Pairs(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Graph nodes of a task objective; `total` is the sum of the other three.
#[derive(Clone, Copy, Debug)]
pub struct Objective {
    pub total: NodeId,
    pub data: NodeId,
    pub l2: NodeId,
    pub successive: NodeId,
}

fn sum_or_zero(g: &mut Graph, terms: &[NodeId]) -> Result<NodeId> {
    if terms.is_empty() {
        Ok(g.constant_vector(&[0.0]))
    } else {
        Ok(g.add(terms)?)
    }
}

/// Builds the objective of `task` on `batch`: summed data loss, L2 on the
/// task's own weight matrices, and the successive term against `snapshots`.
pub fn task_objective(
    model: &JointModel,
    g: &mut Graph,
    task: Task,
    batch: Batch<'_>,
    snapshots: &Snapshots,
    config: &TrainConfig,
    mut noise: Option<&mut Noise>,
) -> Result<Objective> {
    let mut data = Vec::with_capacity(batch.len());
    match batch {
        Batch::Sentences(sentences) => {
            for s in sentences {
                data.push(model.sentence_loss(g, s, task, noise.as_deref_mut())?);
            }
        }
        Batch::Pairs(pairs) => {
            for p in pairs {
                if let Some(l) = model.pair_loss(g, p, task, noise.as_deref_mut())? {
                    data.push(l);
                }
            }
        }
    }
    let data = sum_or_zero(g, &data)?;

    let store = &model.params;
    let mut l2 = Vec::new();
    for (id, entry) in store.iter() {
        if entry.owner_depth != task.depth() {
            continue;
        }
        let coefficient = match entry.kind {
            ParamKind::LstmWeight => config.lambda_lstm,
            ParamKind::ClassifierWeight => config.lambda_classifier,
            _ => 0.0,
        };
        if coefficient > 0.0 {
            let p = g.param(store, id);
            let sq = g.sum_squares(p)?;
            l2.push(g.scale(sq, coefficient)?);
        }
    }
    let l2 = sum_or_zero(g, &l2)?;

    let (reference, cutoff) = snapshots.reference(task, model.tasks())?;
    let mut successive = Vec::new();
    for (id, entry) in store.iter() {
        if entry.owner_depth > cutoff {
            continue;
        }
        let coefficient = if entry.kind.is_classifier() { config.delta_classifier } else { config.delta };
        if coefficient > 0.0 {
            let anchor = reference.params().get(id).clone();
            let p = g.param(store, id);
            let a = g.constant(anchor);
            let diff = g.sub(p, a)?;
            let sq = g.sum_squares(diff)?;
            successive.push(g.scale(sq, coefficient)?);
        }
    }
    let successive = sum_or_zero(g, &successive)?;

    let total = g.add(&[data, l2, successive])?;
    Ok(Objective { total, data, l2, successive })
}

/// Outcome of one SGD step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub data_loss: f64,
    pub objective: f64,
    /// Gradient norm before clipping.
    pub grad_norm: f64,
}

/// `param -= lr * grad` for every parameter with a gradient.
pub fn apply_sgd(params: &mut ParamStore, grads: &Gradients, lr: f64) {
    for (id, g) in grads.iter() {
        for (p, d) in params.get_mut(id).data_mut().iter_mut().zip(g.data()) {
            *p -= lr * d;
        }
    }
}

/// Forward, backward, clip and update on one mini-batch.
pub fn train_step(
    model: &mut JointModel,
    task: Task,
    batch: Batch<'_>,
    snapshots: &Snapshots,
    config: &TrainConfig,
    lr: f64,
    noise_seed: u64,
) -> Result<StepStats> {
    let mut noise = Noise::new(noise_seed, &model.config);
    let mut g = Graph::new();
    let obj = task_objective(model, &mut g, task, batch, snapshots, config, Some(&mut noise))?;
    g.forward(&model.params)?;
    let mut grads = g.backward(&model.params, obj.total)?;
    let grad_norm = grads.clip_norm(clip_threshold(task));
    apply_sgd(&mut model.params, &grads, lr);
    Ok(StepStats {
        data_loss: g.scalar(obj.data),
        objective: g.scalar(obj.total),
        grad_norm,
    })
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRecord {
    pub epoch: usize,
    pub task: Task,
    /// Mean data loss per example.
    pub loss: f64,
    /// Mean full objective per mini-batch.
    pub objective: f64,
    pub lr: f64,
    pub clip: f64,
    pub examples: usize,
    pub seconds: f64,
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch={} task={} loss={:.6} objective={:.6} lr={:.6} clip={} examples={} time={:.3}",
            self.epoch, self.task, self.loss, self.objective, self.lr, self.clip, self.examples, self.seconds
        )
    }
}

enum Dataset<'a> {
    Sentences(Vec<&'a Sentence>),
    Pairs(Vec<&'a SentencePair>),
}

impl Dataset<'_> {
    fn len(&self) -> usize {
        match self {
            Dataset::Sentences(s) => s.len(),
            Dataset::Pairs(p) => p.len(),
        }
    }
}

fn dataset<'a>(corpus: &'a Corpus, task: Task) -> Result<Dataset<'a>> {
    let d = match task {
        Task::Pos => Dataset::Sentences(corpus.pos.iter().collect()),
        Task::Chunk => Dataset::Sentences(corpus.chunk.iter().collect()),
        Task::Dep => Dataset::Sentences(corpus.dep.iter().collect()),
        Task::Rel => Dataset::Pairs(corpus.pairs.iter().filter(|p| p.score.is_some()).collect()),
        Task::Ent => Dataset::Pairs(corpus.pairs.iter().filter(|p| p.label.is_some()).collect()),
    };
    if d.len() == 0 {
        return Err(Error::EmptyDataset(task.to_string()));
    }
    Ok(d)
}

/// Epoch loop state: the RNG, the snapshots and the epoch counter.
#[derive(Clone, Debug)]
pub struct Trainer {
    config: TrainConfig,
    rng: ChaCha8Rng,
    snapshots: Snapshots,
    epoch: usize,
}

impl Trainer {
    pub fn new(model: &JointModel, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut snapshots = Snapshots::new(&model.params);
        if config.order == TaskOrder::Random {
            // a task may run before the one below it has been trained
            for task in model.tasks().tasks() {
                snapshots.after_task[task.depth() - 1] = Some(ParamSnapshot::capture(&model.params, 0, None));
            }
        }
        Ok(Trainer {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            snapshots,
            epoch: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn snapshots(&self) -> &Snapshots {
        &self.snapshots
    }

    /// Number of completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Trains every active task once over its full dataset.
    pub fn train_epoch(&mut self, model: &mut JointModel, corpus: &Corpus) -> Result<Vec<LogRecord>> {
        let tasks = model.tasks();
        let mut order: Vec<Task> = tasks.tasks().collect();
        let data = order.iter().map(|&t| dataset(corpus, t)).collect::<Result<Vec<_>>>()?;
        let mut data: Vec<(Task, Dataset<'_>)> = order.iter().copied().zip(data).collect();
        if self.config.order == TaskOrder::Random {
            order.shuffle(&mut self.rng);
            data.sort_by_key(|(t, _)| order.iter().position(|o| o == t));
        }

        let epoch = self.epoch + 1;
        let lr = self.config.learning_rate(epoch);
        let mut log = Vec::with_capacity(data.len());
        for (task, set) in &mut data {
            let task = *task;
            let start = Instant::now();
            let size = self.config.batch_size(task);
            let (mut loss, mut objective, mut batches) = (0.0, 0.0, 0usize);
            let examples = set.len();
            match set {
                Dataset::Sentences(items) => {
                    items.shuffle(&mut self.rng);
                    for chunk in items.chunks(size) {
                        let seed = self.rng.gen();
                        let s = train_step(model, task, Batch::Sentences(chunk), &self.snapshots, &self.config, lr, seed)?;
                        loss += s.data_loss;
                        objective += s.objective;
                        batches += 1;
                        debug!("epoch={epoch} task={task} batch={batches} loss={} grad_norm={}", s.data_loss, s.grad_norm);
                    }
                }
                Dataset::Pairs(items) => {
                    items.shuffle(&mut self.rng);
                    for chunk in items.chunks(size) {
                        let seed = self.rng.gen();
                        let s = train_step(model, task, Batch::Pairs(chunk), &self.snapshots, &self.config, lr, seed)?;
                        loss += s.data_loss;
                        objective += s.objective;
                        batches += 1;
                        debug!("epoch={epoch} task={task} batch={batches} loss={} grad_norm={}", s.data_loss, s.grad_norm);
                    }
                }
            }
            self.snapshots.record(&model.params, epoch, task);
            let record = LogRecord {
                epoch,
                task,
                loss: loss / examples as f64,
                objective: objective / batches as f64,
                lr,
                clip: clip_threshold(task),
                examples,
                seconds: start.elapsed().as_secs_f64(),
            };
            info!("{record}");
            log.push(record);
        }
        self.snapshots.epoch_start = ParamSnapshot::capture(&model.params, epoch, None);
        self.epoch = epoch;
        Ok(log)
    }
}

/// Dev metric used for model selection when none is configured.
pub fn default_selection_metric(tasks: TaskSet) -> Metric {
    if tasks.contains(Task::Dep) {
        return Metric::Uas;
    }
    match tasks.highest() {
        Task::Pos => Metric::PosAccuracy,
        Task::Chunk => Metric::ChunkF1,
        Task::Dep => Metric::Uas,
        Task::Rel => Metric::RelMse,
        Task::Ent => Metric::EntAccuracy,
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    pub log: Vec<LogRecord>,
    /// Dev metrics after each epoch, when a dev corpus was given.
    pub dev: Vec<MetricReport>,
    /// 1-based epoch whose parameters were kept, and its dev score.
    pub best: Option<(usize, f64)>,
}

/// Runs `config.epochs` epochs. With a dev corpus the parameters of the
/// best epoch on the selection metric are restored at the end.
pub fn train(model: &mut JointModel, config: TrainConfig, corpus: &Corpus, dev: Option<&Corpus>) -> Result<TrainReport> {
    let metric = config.select.unwrap_or_else(|| default_selection_metric(model.tasks()));
    let mut trainer = Trainer::new(model, config)?;
    let mut report = TrainReport::default();
    let mut best_params: Option<ParamStore> = None;
    for _ in 0..trainer.config().epochs {
        report.log.extend(trainer.train_epoch(model, corpus)?);
        let Some(dev) = dev else { continue };
        let metrics = evaluate_model(model, dev)?;
        let score = metrics.get(metric).ok_or_else(|| {
            Error::Config(format!("selection metric {metric} is not produced by the dev data"))
        })?;
        info!("epoch={} dev_{metric}={score:?}", trainer.epoch());
        if report.best.is_none_or(|(_, b)| metric.better(score, b)) {
            report.best = Some((trainer.epoch(), score));
            best_params = Some(model.params.clone());
        }
        report.dev.push(metrics);
    }
    if let Some(p) = best_params {
        model.params = p;
    }
    Ok(report)
}

/// Parameter ids anchored by the successive term of `task`.
pub fn successive_ids(model: &JointModel, task: Task, snapshots: &Snapshots) -> Result<Vec<ParamId>> {
    let (_, cutoff) = snapshots.reference(task, model.tasks())?;
    Ok(model
        .params
        .iter()
        .filter(|(_, e)| e.owner_depth <= cutoff)
        .map(|(id, _)| id)
        .collect())
}
