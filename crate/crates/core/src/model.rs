//! The joint many-task model: shared embeddings, one bi-LSTM layer per task
//! and the task heads on top of them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{EntailmentLabel, Sentence, SentencePair};
use crate::dep::{self, DepParams, ParseResult};
use crate::embedding::{EmbeddingParams, TokenVectors, WordDropout};
use crate::encoder::{bilstm_run, compose_input, BiLstmParams, InputParts, InputWidths, LayerPlan, LayerWiring};
use crate::error::{Error, Result};
use crate::graph::{self, Graph, NodeId};
use crate::init::uniform_matrix;
use crate::params::{ParamKind, ParamStore};
use crate::semantic::{
    entailment_features, expected_score, gold_score_distribution, relatedness_features,
    sentence_representation, EntailmentHead, RelatednessHead,
};
use crate::taggers::{LabelEmbeddings, TokenClassifier};
use crate::task::Task;
use crate::vocab::{Index, Vocabulary};

/// Dropout rates indexed by task depth − 1.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutRates {
    /// Lower-layer hidden state fed into the next layer.
    pub vertical: f64,
    /// Word representation and label embeddings entering each layer.
    pub input: [f64; 5],
    /// Hidden activations of each task's classifier.
    pub classifier: [f64; 5],
}

impl Default for DropoutRates {
    fn default() -> Self {
        DropoutRates {
            vertical: 0.2,
            input: [0.4, 0.4, 0.4, 0.2, 0.2],
            classifier: [0.2, 0.2, 0.2, 0.4, 0.2],
        }
    }
}

impl DropoutRates {
    pub fn none() -> Self {
        DropoutRates {
            vertical: 0.0,
            input: [0.0; 5],
            classifier: [0.0; 5],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Width of the word table and of the n-gram table; `x_t` is twice this.
    pub embedding_dim: usize,
    /// LSTM units per direction.
    pub hidden: usize,
    pub classifier_hidden: usize,
    pub label_dim: usize,
    pub semantic_hidden: usize,
    pub maxout_pool: usize,
    pub ngram_sizes: Vec<usize>,
    pub lowercase_words: bool,
    pub wiring: LayerWiring,
    pub dropout: DropoutRates,
    /// 0 disables word dropout.
    pub word_dropout_alpha: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embedding_dim: 100,
            hidden: 100,
            classifier_hidden: 100,
            label_dim: 100,
            semantic_hidden: 100,
            maxout_pool: 4,
            ngram_sizes: vec![2, 3, 4],
            lowercase_words: true,
            wiring: LayerWiring::default(),
            dropout: DropoutRates::default(),
            word_dropout_alpha: 0.25,
            seed: 1,
        }
    }
}

impl ModelConfig {
    /// Every width set to `dim`.
    pub fn with_width(dim: usize) -> Self {
        ModelConfig {
            embedding_dim: dim,
            hidden: dim,
            classifier_hidden: dim,
            label_dim: dim,
            semantic_hidden: dim,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [
            self.embedding_dim,
            self.hidden,
            self.classifier_hidden,
            self.label_dim,
            self.semantic_hidden,
            self.maxout_pool,
        ];
        if widths.contains(&0) {
            return Err(Error::Config("model widths and maxout pool must be positive".into()));
        }
        let rates = std::iter::once(self.dropout.vertical)
            .chain(self.dropout.input)
            .chain(self.dropout.classifier);
        for r in rates {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Config(format!("dropout rate {r} is outside [0, 1)")));
            }
        }
        if !(self.word_dropout_alpha >= 0.0 && self.word_dropout_alpha.is_finite()) {
            return Err(Error::Config("word-dropout alpha must be >= 0".into()));
        }
        Ok(())
    }
}

/// Output label sets of the tagging and parsing tasks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Labels {
    pub pos: Index,
    pub chunk: Index,
    pub dep: Index,
}

impl Labels {
    /// Collects labels in order of first appearance.
    pub fn from_data(pos: &[Sentence], chunk: &[Sentence], dep: &[Sentence]) -> Self {
        let mut l = Labels::default();
        for t in pos.iter().flat_map(|s| &s.tokens) {
            if let Some(p) = &t.pos {
                l.pos.insert(p);
            }
        }
        for t in chunk.iter().flat_map(|s| &s.tokens) {
            if let Some(c) = &t.chunk {
                l.chunk.insert(c);
            }
        }
        for t in dep.iter().flat_map(|s| &s.tokens) {
            if let Some(d) = &t.deprel {
                l.dep.insert(d);
            }
        }
        l
    }
}

/// Parameter handles, rebuilt deterministically from the configuration.
#[derive(Clone, Debug)]
pub struct Handles {
    pub embedding: EmbeddingParams,
    /// Indexed by task depth − 1; `None` for inactive tasks.
    pub layers: [Option<BiLstmParams>; 5],
    pub plans: [Option<LayerPlan>; 5],
    pub pos: Option<TokenClassifier>,
    pub chunk: Option<TokenClassifier>,
    pub pos_labels: Option<LabelEmbeddings>,
    pub chunk_labels: Option<LabelEmbeddings>,
    pub dep: Option<DepParams>,
    pub rel: Option<RelatednessHead>,
    pub ent: Option<EntailmentHead>,
}

/// Randomness used at training time: dropout seeds and word-dropout draws.
pub struct Noise {
    rng: ChaCha8Rng,
    alpha: f64,
    rates: DropoutRates,
}

impl Noise {
    pub fn new(seed: u64, config: &ModelConfig) -> Self {
        Noise {
            rng: ChaCha8Rng::seed_from_u64(seed),
            alpha: config.word_dropout_alpha,
            rates: config.dropout.clone(),
        }
    }

    fn seed(&mut self) -> u64 {
        self.rng.gen()
    }

    fn drop(&mut self, g: &mut Graph, x: NodeId, rate: f64) -> Result<NodeId> {
        if rate > 0.0 {
            Ok(g.dropout(x, rate, self.seed())?)
        } else {
            Ok(x)
        }
    }

    fn classifier(&mut self, task: Task) -> Option<(f64, u64)> {
        let rate = self.rates.classifier[task.depth() - 1];
        (rate > 0.0).then(|| (rate, self.seed()))
    }
}

fn maybe_drop(noise: &mut Option<&mut Noise>, g: &mut Graph, x: NodeId, rate: impl Fn(&DropoutRates) -> f64) -> Result<NodeId> {
    match noise {
        Some(n) => {
            let r = rate(&n.rates);
            n.drop(g, x, r)
        }
        None => Ok(x),
    }
}

fn classifier_dropout(noise: &mut Option<&mut Noise>, task: Task) -> Option<(f64, u64)> {
    noise.as_mut().and_then(|n| n.classifier(task))
}

/// Graph nodes of one encoded sentence.
#[derive(Clone, Debug, Default)]
pub struct Encoding {
    /// Hidden states per layer, indexed by task depth − 1.
    pub states: [Vec<NodeId>; 5],
    pub pos_logits: Vec<NodeId>,
    pub chunk_logits: Vec<NodeId>,
    pub pos_probs: Vec<NodeId>,
    pub chunk_probs: Vec<NodeId>,
}

impl Encoding {
    pub fn layer(&self, task: Task) -> &[NodeId] {
        &self.states[task.depth() - 1]
    }
}

/// Predicted annotations for one sentence.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SentencePrediction {
    pub pos_probs: Option<Vec<Vec<f64>>>,
    pub chunk_probs: Option<Vec<Vec<f64>>>,
    /// Row `t − 1` holds `p(head | token t)`, column 0 for ROOT.
    pub head_probs: Option<Vec<Vec<f64>>>,
    pub parse: Option<ParseResult>,
}

impl SentencePrediction {
    pub fn pos(&self) -> Option<Vec<usize>> {
        self.pos_probs.as_ref().map(|p| p.iter().map(|r| graph::argmax(r)).collect())
    }

    pub fn chunk(&self) -> Option<Vec<usize>> {
        self.chunk_probs.as_ref().map(|p| p.iter().map(|r| graph::argmax(r)).collect())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairPrediction {
    pub relatedness_probs: Option<Vec<f64>>,
    pub entailment_probs: Option<Vec<f64>>,
}

impl PairPrediction {
    pub fn score(&self) -> Option<f64> {
        self.relatedness_probs.as_deref().map(expected_score)
    }

    pub fn label(&self) -> Option<EntailmentLabel> {
        self.entailment_probs
            .as_deref()
            .and_then(|p| EntailmentLabel::from_index(graph::argmax(p)))
    }
}

#[derive(Clone, Debug)]
pub struct JointModel {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub labels: Labels,
    pub params: ParamStore,
    pub handles: Handles,
}

impl JointModel {
    /// Registers and initializes every parameter of the active tasks.
    pub fn new(config: ModelConfig, vocab: Vocabulary, labels: Labels) -> Result<Self> {
        config.validate()?;
        let wiring = config.wiring;
        let tasks = wiring.tasks;
        let need = |task: Task, idx: &Index, what: &str| -> Result<()> {
            if tasks.contains(task) && idx.is_empty() {
                return Err(Error::Config(format!("task {task} is active but no {what} labels are known")));
            }
            Ok(())
        };
        need(Task::Pos, &labels.pos, "POS")?;
        need(Task::Chunk, &labels.chunk, "chunk")?;
        need(Task::Dep, &labels.dep, "dependency")?;

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let d = config.embedding_dim;
        let word = store.add(
            "embedding.word",
            ParamKind::Embedding,
            0,
            uniform_matrix(vocab.num_words(), d, &mut rng),
        );
        let ngram = store.add(
            "embedding.ngram",
            ParamKind::Embedding,
            0,
            uniform_matrix(vocab.num_ngrams().max(1), d, &mut rng),
        );
        let embedding = EmbeddingParams { word, ngram, dim: d };

        let state = 2 * config.hidden;
        let widths = InputWidths {
            lower_hidden: state,
            word: 2 * d,
            label: config.label_dim,
        };
        let mut layers: [Option<BiLstmParams>; 5] = Default::default();
        let mut plans: [Option<LayerPlan>; 5] = Default::default();
        let mut handles = Handles {
            embedding,
            layers: Default::default(),
            plans: Default::default(),
            pos: None,
            chunk: None,
            pos_labels: None,
            chunk_labels: None,
            dep: None,
            rel: None,
            ent: None,
        };
        for task in tasks.tasks() {
            let k = task.depth();
            let plan = wiring.plan(task)?;
            let input = plan.input_width(widths);
            layers[k - 1] = Some(BiLstmParams::register(
                &mut store,
                &format!("layer{k}.{}", task.name()),
                k,
                input,
                config.hidden,
                &mut rng,
            ));
            plans[k - 1] = Some(plan);
            let prefix = task.name();
            match task {
                Task::Pos | Task::Chunk => {
                    let classes = if task == Task::Pos { labels.pos.len() } else { labels.chunk.len() };
                    let clf = TokenClassifier::register(
                        &mut store,
                        &format!("{prefix}.classifier"),
                        k,
                        state,
                        config.classifier_hidden,
                        classes,
                        &mut rng,
                    );
                    // the table belongs to the first layer that reads it
                    let emb = wiring.label_embedding_used(task).then(|| {
                        LabelEmbeddings::register(
                            &mut store,
                            &format!("{prefix}.label_embedding"),
                            k + 1,
                            classes,
                            config.label_dim,
                            &mut rng,
                        )
                    });
                    if task == Task::Pos {
                        handles.pos = Some(clf);
                        handles.pos_labels = emb;
                    } else {
                        handles.chunk = Some(clf);
                        handles.chunk_labels = emb;
                    }
                }
                Task::Dep => {
                    handles.dep = Some(DepParams::register(
                        &mut store,
                        prefix,
                        k,
                        state,
                        config.classifier_hidden,
                        labels.dep.len(),
                        &mut rng,
                    ));
                }
                Task::Rel => {
                    handles.rel = Some(RelatednessHead::register(
                        &mut store,
                        prefix,
                        k,
                        2 * state,
                        config.semantic_hidden,
                        config.maxout_pool,
                        &mut rng,
                    ));
                }
                Task::Ent => {
                    let rel_dim = tasks.contains(Task::Rel).then_some(config.label_dim);
                    handles.ent = Some(EntailmentHead::register(
                        &mut store,
                        prefix,
                        k,
                        k,
                        2 * state,
                        rel_dim,
                        config.semantic_hidden,
                        config.maxout_pool,
                        &mut rng,
                    ));
                }
            }
        }
        handles.layers = layers;
        handles.plans = plans;
        Ok(JointModel {
            config,
            vocab,
            labels,
            params: store,
            handles,
        })
    }

    pub fn tasks(&self) -> crate::task::TaskSet {
        self.config.wiring.tasks
    }

    /// Copies pre-trained rows into the embedding tables.
    pub fn load_pretrained(&mut self, words: Option<&TokenVectors>, ngrams: Option<&TokenVectors>) -> Result<(usize, usize)> {
        self.handles
            .embedding
            .load_pretrained(&mut self.params, &self.vocab, words, ngrams)
    }

    /// Runs the active layers up to `upto` over `words`. With `noise`, word
    /// and regular dropout are applied.
    pub fn encode<S: AsRef<str>>(
        &self,
        g: &mut Graph,
        words: &[S],
        upto: Task,
        mut noise: Option<&mut Noise>,
    ) -> Result<Encoding> {
        if words.is_empty() {
            return Err(Error::InvalidArgument("cannot encode an empty sentence".into()));
        }
        let h = &self.handles;
        let mut xs = Vec::with_capacity(words.len());
        for w in words {
            let x = match noise.as_mut().filter(|n| n.alpha > 0.0) {
                Some(n) => {
                    let mut wd = WordDropout {
                        alpha: n.alpha,
                        rng: &mut n.rng,
                    };
                    h.embedding.word_representation(g, &self.params, &self.vocab, w.as_ref(), Some(&mut wd))?
                }
                None => h
                    .embedding
                    .word_representation::<ChaCha8Rng>(g, &self.params, &self.vocab, w.as_ref(), None)?,
            };
            xs.push(x);
        }
        let mut enc = Encoding::default();
        for task in self.tasks().tasks().filter(|t| *t <= upto) {
            let k = task.depth() - 1;
            let plan = h.plans[k].as_ref().expect("active layer has a plan");
            let lstm = h.layers[k].as_ref().expect("active layer has weights");
            let mut inputs = Vec::with_capacity(xs.len());
            for (i, &x) in xs.iter().enumerate() {
                let mut parts = InputParts::default();
                if let Some(v) = plan.vertical_from {
                    let lower = enc.layer(v)[i];
                    parts.lower_hidden = Some(maybe_drop(&mut noise, g, lower, |r| r.vertical)?);
                }
                if plan.shortcut {
                    parts.word = Some(maybe_drop(&mut noise, g, x, |r| r.input[k])?);
                }
                for src in &plan.label_sources {
                    let (table, probs) = match src {
                        Task::Pos => (h.pos_labels.as_ref(), &enc.pos_probs),
                        _ => (h.chunk_labels.as_ref(), &enc.chunk_probs),
                    };
                    let table = table.expect("label embeddings registered for used sources");
                    let y = table.weighted(g, &self.params, probs[i])?;
                    parts.label_embeddings.push(maybe_drop(&mut noise, g, y, |r| r.input[k])?);
                }
                inputs.push(compose_input(g, plan, &parts)?);
            }
            let states = bilstm_run(g, &self.params, lstm, &inputs)?;
            if matches!(task, Task::Pos | Task::Chunk) {
                let clf = if task == Task::Pos { h.pos.as_ref() } else { h.chunk.as_ref() }.expect("active classifier");
                for &s in &states {
                    let dropout = classifier_dropout(&mut noise, task);
                    let logits = clf.logits(g, &self.params, s, dropout)?;
                    let probs = g.softmax(logits)?;
                    if task == Task::Pos {
                        enc.pos_logits.push(logits);
                        enc.pos_probs.push(probs);
                    } else {
                        enc.chunk_logits.push(logits);
                        enc.chunk_probs.push(probs);
                    }
                }
            }
            enc.states[k] = states;
        }
        Ok(enc)
    }

    fn require(&self, task: Task) -> Result<()> {
        if self.tasks().contains(task) {
            Ok(())
        } else {
            Err(Error::Config(format!("task {task} is not active in this model")))
        }
    }

    fn label_id(idx: &Index, value: Option<&String>, what: &str, position: usize) -> Result<usize> {
        let v = value.ok_or_else(|| Error::InvalidArgument(format!("token {position} has no {what} annotation")))?;
        idx.get(v)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown {what} label `{v}`")))
    }

    /// Negative log-likelihood of a sentence's gold annotation for a
    /// token-level task.
    pub fn sentence_loss(&self, g: &mut Graph, sentence: &Sentence, task: Task, mut noise: Option<&mut Noise>) -> Result<NodeId> {
        self.require(task)?;
        let forms = sentence.forms();
        let enc = self.encode(g, &forms, task, noise.as_deref_mut())?;
        let mut terms = Vec::with_capacity(2 * forms.len());
        match task {
            Task::Pos | Task::Chunk => {
                for (i, tok) in sentence.tokens.iter().enumerate() {
                    let (idx, value, logits) = if task == Task::Pos {
                        (&self.labels.pos, tok.pos.as_ref(), enc.pos_logits[i])
                    } else {
                        (&self.labels.chunk, tok.chunk.as_ref(), enc.chunk_logits[i])
                    };
                    let y = Self::label_id(idx, value, task.name(), i + 1)?;
                    terms.push(g.cross_entropy(logits, y)?);
                }
            }
            Task::Dep => {
                let dep = self.handles.dep.as_ref().expect("active parser");
                let states = enc.layer(Task::Dep);
                let len = states.len();
                for (i, tok) in sentence.tokens.iter().enumerate() {
                    let t = i + 1;
                    let head = tok
                        .head
                        .ok_or_else(|| Error::InvalidArgument(format!("token {t} has no head")))?;
                    let idx = DepParams::candidate_index(t, head, len)
                        .ok_or_else(|| Error::InvalidArgument(format!("token {t} has invalid head {head}")))?;
                    let logits = dep.head_logits(g, &self.params, states, t)?;
                    terms.push(g.cross_entropy(logits, idx)?);
                    let y = Self::label_id(&self.labels.dep, tok.deprel.as_ref(), "dependency", t)?;
                    let dropout = classifier_dropout(&mut noise, task);
                    let ll = dep.label_logits(g, &self.params, states, t, head, dropout)?;
                    terms.push(g.cross_entropy(ll, y)?);
                }
            }
            _ => {
                return Err(Error::InvalidArgument(format!("{task} is not a token-level task")));
            }
        }
        Ok(g.add(&terms)?)
    }

    fn pair_states<S: AsRef<str>>(
        &self,
        g: &mut Graph,
        premise: &[S],
        hypothesis: &[S],
        upto: Task,
        mut noise: Option<&mut Noise>,
    ) -> Result<(Encoding, Encoding)> {
        let a = self.encode(g, premise, upto, noise.as_deref_mut())?;
        let b = self.encode(g, hypothesis, upto, noise)?;
        Ok((a, b))
    }

    fn relatedness_logits(&self, g: &mut Graph, a: &Encoding, b: &Encoding, noise: &mut Option<&mut Noise>) -> Result<NodeId> {
        let head = self.handles.rel.as_ref().expect("active relatedness head");
        let ra = sentence_representation(g, a.layer(Task::Rel))?;
        let rb = sentence_representation(g, b.layer(Task::Rel))?;
        let d1 = relatedness_features(g, ra, rb)?;
        let dropout = classifier_dropout(noise, Task::Rel);
        Ok(head.logits(g, &self.params, d1, dropout)?)
    }

    fn entailment_logits(&self, g: &mut Graph, a: &Encoding, b: &Encoding, noise: &mut Option<&mut Noise>) -> Result<(NodeId, Option<NodeId>)> {
        let rel_probs = if self.tasks().contains(Task::Rel) {
            let l = self.relatedness_logits(g, a, b, noise)?;
            Some(g.softmax(l)?)
        } else {
            None
        };
        let head = self.handles.ent.as_ref().expect("active entailment head");
        let ra = sentence_representation(g, a.layer(Task::Ent))?;
        let rb = sentence_representation(g, b.layer(Task::Ent))?;
        let d2 = entailment_features(g, ra, rb)?;
        let dropout = classifier_dropout(noise, Task::Ent);
        Ok((head.logits(g, &self.params, d2, rel_probs, dropout)?, rel_probs))
    }

    /// Loss of a sentence pair for the relatedness or entailment task, or
    /// `None` when the pair lacks that annotation.
    pub fn pair_loss(&self, g: &mut Graph, pair: &SentencePair, task: Task, mut noise: Option<&mut Noise>) -> Result<Option<NodeId>> {
        self.require(task)?;
        match task {
            Task::Rel => {
                let Some(score) = pair.score else { return Ok(None) };
                let target = gold_score_distribution(score)?;
                let (a, b) = self.pair_states(g, &pair.premise, &pair.hypothesis, task, noise.as_deref_mut())?;
                let logits = self.relatedness_logits(g, &a, &b, &mut noise)?;
                Ok(Some(g.kl_divergence(logits, &target)?))
            }
            Task::Ent => {
                let Some(label) = pair.label else { return Ok(None) };
                let (a, b) = self.pair_states(g, &pair.premise, &pair.hypothesis, task, noise.as_deref_mut())?;
                let (logits, _) = self.entailment_logits(g, &a, &b, &mut noise)?;
                Ok(Some(g.cross_entropy(logits, label.index())?))
            }
            _ => Err(Error::InvalidArgument(format!("{task} is not a sentence-pair task"))),
        }
    }

    /// Tags and parses with every active token-level task.
    pub fn predict_sentence<S: AsRef<str>>(&self, words: &[S]) -> Result<SentencePrediction> {
        let tasks = self.tasks();
        let Some(top) = tasks.tasks().filter(|t| t.is_token_level()).last() else {
            return Ok(SentencePrediction::default());
        };
        let mut g = Graph::new();
        let enc = self.encode(&mut g, words, top, None)?;
        g.forward(&self.params)?;
        let rows = |nodes: &[NodeId]| nodes.iter().map(|&n| g.value(n).to_vec()).collect::<Vec<_>>();
        let mut out = SentencePrediction {
            pos_probs: tasks.contains(Task::Pos).then(|| rows(&enc.pos_probs)),
            chunk_probs: tasks.contains(Task::Chunk).then(|| rows(&enc.chunk_probs)),
            ..Default::default()
        };
        if let Some(dep) = &self.handles.dep {
            let states = rows(enc.layer(Task::Dep));
            let head_probs = dep.head_probabilities(&self.params, &states);
            let parse = dep::parse_sentence(&head_probs, |t, head| {
                dep.label_probabilities(&self.params, &states, t, head)
            })?;
            out.head_probs = Some(head_probs);
            out.parse = Some(parse);
        }
        Ok(out)
    }

    /// Copy of `sentence` with the predicted columns filled in.
    pub fn annotate(&self, sentence: &Sentence) -> Result<Sentence> {
        let pred = self.predict_sentence(&sentence.forms())?;
        let mut out = sentence.clone();
        if let Some(pos) = pred.pos() {
            for (tok, p) in out.tokens.iter_mut().zip(pos) {
                tok.pos = Some(self.labels.pos.item(p).to_string());
            }
        }
        if let Some(chunk) = pred.chunk() {
            for (tok, c) in out.tokens.iter_mut().zip(chunk) {
                tok.chunk = Some(self.labels.chunk.item(c).to_string());
            }
        }
        if let Some(parse) = &pred.parse {
            for (i, tok) in out.tokens.iter_mut().enumerate() {
                tok.head = Some(parse.heads[i]);
                tok.deprel = Some(self.labels.dep.item(parse.labels[i]).to_string());
            }
        }
        Ok(out)
    }

    pub fn predict_pair<S: AsRef<str>>(&self, premise: &[S], hypothesis: &[S]) -> Result<PairPrediction> {
        let tasks = self.tasks();
        let upto = if tasks.contains(Task::Ent) {
            Task::Ent
        } else if tasks.contains(Task::Rel) {
            Task::Rel
        } else {
            return Ok(PairPrediction::default());
        };
        let mut g = Graph::new();
        let (a, b) = self.pair_states(&mut g, premise, hypothesis, upto, None)?;
        let mut none = None;
        let (rel, ent) = if tasks.contains(Task::Ent) {
            let (logits, rel) = self.entailment_logits(&mut g, &a, &b, &mut none)?;
            (rel, Some(g.softmax(logits)?))
        } else {
            let logits = self.relatedness_logits(&mut g, &a, &b, &mut none)?;
            (Some(g.softmax(logits)?), None)
        };
        g.forward(&self.params)?;
        Ok(PairPrediction {
            relatedness_probs: rel.map(|n| g.value(n).to_vec()),
            entailment_probs: ent.map(|n| g.value(n).to_vec()),
        })
    }

    /// Copy of `pair` with the predicted score and label.
    pub fn annotate_pair(&self, pair: &SentencePair) -> Result<SentencePair> {
        let pred = self.predict_pair(&pair.premise, &pair.hypothesis)?;
        let mut out = pair.clone();
        out.score = pred.score();
        out.label = pred.label();
        Ok(out)
    }
}
