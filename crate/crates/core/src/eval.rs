//! Task metrics and the `key=value` metric report.

use std::fmt;
use std::str::FromStr;

use crate::data::{Corpus, Sentence, SentencePair};
use crate::dep::{AttachmentCounts, PUNCTUATION_TAGS};
use crate::error::{Error, Result};
use crate::iobes::{tags_to_spans, SpanCounts};
use crate::model::JointModel;
use crate::task::Task;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    PosAccuracy,
    ChunkF1,
    Uas,
    Las,
    RelMse,
    EntAccuracy,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::PosAccuracy,
        Metric::ChunkF1,
        Metric::Uas,
        Metric::Las,
        Metric::RelMse,
        Metric::EntAccuracy,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Metric::PosAccuracy => "pos_accuracy",
            Metric::ChunkF1 => "chunk_f1",
            Metric::Uas => "uas",
            Metric::Las => "las",
            Metric::RelMse => "rel_mse",
            Metric::EntAccuracy => "ent_accuracy",
        }
    }

    pub fn higher_is_better(self) -> bool {
        self != Metric::RelMse
    }

    /// True when `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        if self.higher_is_better() {
            a > b
        } else {
            a < b
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.key() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric `{s}`")))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricReport {
    pub pos_accuracy: Option<f64>,
    pub chunk_f1: Option<f64>,
    pub uas: Option<f64>,
    pub las: Option<f64>,
    pub rel_mse: Option<f64>,
    pub ent_accuracy: Option<f64>,
}

impl MetricReport {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::PosAccuracy => self.pos_accuracy,
            Metric::ChunkF1 => self.chunk_f1,
            Metric::Uas => self.uas,
            Metric::Las => self.las,
            Metric::RelMse => self.rel_mse,
            Metric::EntAccuracy => self.ent_accuracy,
        }
    }

    /// Takes every metric present in `other`.
    pub fn merge(&mut self, other: MetricReport) {
        for m in Metric::ALL {
            if let Some(v) = other.get(m) {
                *self.slot(m) = Some(v);
            }
        }
    }

    fn slot(&mut self, m: Metric) -> &mut Option<f64> {
        match m {
            Metric::PosAccuracy => &mut self.pos_accuracy,
            Metric::ChunkF1 => &mut self.chunk_f1,
            Metric::Uas => &mut self.uas,
            Metric::Las => &mut self.las,
            Metric::RelMse => &mut self.rel_mse,
            Metric::EntAccuracy => &mut self.ent_accuracy,
        }
    }
}

/// One `key=value` line per present metric.
impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in Metric::ALL {
            if let Some(v) = self.get(m) {
                writeln!(f, "{}={v:?}", m.key())?;
            }
        }
        Ok(())
    }
}

fn check_aligned(gold: &[Sentence], pred: &[Sentence]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch(format!(
            "{} gold sentences but {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.forms() != p.forms() {
            return Err(Error::LengthMismatch(format!(
                "sentence {} differs between gold and predictions",
                i + 1
            )));
        }
    }
    Ok(())
}

fn missing(what: &str, i: usize) -> Error {
    Error::InvalidArgument(format!("sentence {} lacks {what} annotation", i + 1))
}

/// Scores predicted token annotations for a token-level task.
pub fn evaluate_sentences(task: Task, gold: &[Sentence], pred: &[Sentence]) -> Result<MetricReport> {
    check_aligned(gold, pred)?;
    let mut report = MetricReport::default();
    match task {
        Task::Pos => {
            let (mut right, mut total) = (0usize, 0usize);
            for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
                for (gt, pt) in g.tokens.iter().zip(&p.tokens) {
                    let gp = gt.pos.as_ref().ok_or_else(|| missing("gold POS", i))?;
                    let pp = pt.pos.as_ref().ok_or_else(|| missing("predicted POS", i))?;
                    total += 1;
                    right += usize::from(gp == pp);
                }
            }
            report.pos_accuracy = Some(if total == 0 { 0.0 } else { right as f64 / total as f64 });
        }
        Task::Chunk => {
            let mut counts = SpanCounts::default();
            for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
                let tags = |s: &Sentence, what: &str| -> Result<Vec<String>> {
                    s.tokens
                        .iter()
                        .map(|t| t.chunk.clone().ok_or_else(|| missing(what, i)))
                        .collect()
                };
                counts.add_sentence(
                    &tags_to_spans(&tags(g, "gold chunk")?),
                    &tags_to_spans(&tags(p, "predicted chunk")?),
                );
            }
            report.chunk_f1 = Some(counts.scores().2);
        }
        Task::Dep => {
            let mut counts = AttachmentCounts::default();
            for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
                if !g.has_dependencies() {
                    return Err(missing("gold dependency", i));
                }
                if !p.has_dependencies() {
                    return Err(missing("predicted dependency", i));
                }
                let heads = |s: &Sentence| s.tokens.iter().map(|t| t.head.unwrap()).collect::<Vec<_>>();
                let labels = |s: &Sentence| s.tokens.iter().map(|t| t.deprel.clone().unwrap()).collect::<Vec<_>>();
                // tokens without a gold POS tag are never punctuation
                let pos: Vec<String> = g.tokens.iter().map(|t| t.pos.clone().unwrap_or_default()).collect();
                counts.add_sentence(&heads(g), &labels(g), &heads(p), &labels(p), &pos, &PUNCTUATION_TAGS)?;
            }
            let (uas, las) = counts.scores();
            report.uas = Some(uas);
            report.las = Some(las);
        }
        _ => return Err(Error::InvalidArgument(format!("{task} is not a token-level task"))),
    }
    Ok(report)
}

/// Scores predicted relatedness scores (MSE) or entailment labels
/// (accuracy) over the gold pairs that carry that annotation.
pub fn evaluate_pairs(task: Task, gold: &[SentencePair], pred: &[SentencePair]) -> Result<MetricReport> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch(format!(
            "{} gold pairs but {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    let mut report = MetricReport::default();
    let mut n = 0usize;
    let mut acc = 0.0;
    for (g, p) in gold.iter().zip(pred) {
        if g.id != p.id {
            return Err(Error::LengthMismatch(format!("pair ids `{}` and `{}` differ", g.id, p.id)));
        }
        match task {
            Task::Rel => {
                let Some(gs) = g.score else { continue };
                let ps = p
                    .score
                    .ok_or_else(|| Error::InvalidArgument(format!("pair `{}` has no predicted score", p.id)))?;
                acc += (gs - ps).powi(2);
                n += 1;
            }
            Task::Ent => {
                let Some(gl) = g.label else { continue };
                let pl = p
                    .label
                    .ok_or_else(|| Error::InvalidArgument(format!("pair `{}` has no predicted label", p.id)))?;
                acc += f64::from(u8::from(gl == pl));
                n += 1;
            }
            _ => return Err(Error::InvalidArgument(format!("{task} is not a sentence-pair task"))),
        }
    }
    let value = if n == 0 { 0.0 } else { acc / n as f64 };
    if task == Task::Rel {
        report.rel_mse = Some(value);
    } else {
        report.ent_accuracy = Some(value);
    }
    Ok(report)
}

/// Predicts and scores every active task that has data in `corpus`.
pub fn evaluate_model(model: &JointModel, corpus: &Corpus) -> Result<MetricReport> {
    let mut report = MetricReport::default();
    for task in model.tasks().tasks() {
        match task {
            Task::Pos | Task::Chunk | Task::Dep => {
                let gold = match task {
                    Task::Pos => &corpus.pos,
                    Task::Chunk => &corpus.chunk,
                    _ => &corpus.dep,
                };
                if gold.is_empty() {
                    continue;
                }
                let pred = gold.iter().map(|s| model.annotate(s)).collect::<Result<Vec<_>>>()?;
                report.merge(evaluate_sentences(task, gold, &pred)?);
            }
            Task::Rel | Task::Ent => {
                let has = |p: &SentencePair| if task == Task::Rel { p.score.is_some() } else { p.label.is_some() };
                if !corpus.pairs.iter().any(has) {
                    continue;
                }
                let pred = corpus
                    .pairs
                    .iter()
                    .map(|p| model.annotate_pair(p))
                    .collect::<Result<Vec<_>>>()?;
                report.merge(evaluate_pairs(task, &corpus.pairs, &pred)?);
            }
        }
    }
    Ok(report)
}
