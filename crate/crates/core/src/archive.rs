//! `JMT1` model archives and the `key=value` configuration text format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "JMT1" | version: u32 | config length: u64 | config (UTF-8)
//! then per tensor until EOF:
//! name length: u32 | name (UTF-8) | rank: u32 | dims: u64 * rank | values: f64 * prod(dims)
//! ```
//!
//! The config block holds sorted `key=value` lines; list values are
//! tab-separated.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{DataError, Error, Result};
use crate::model::{JointModel, Labels, ModelConfig};
use crate::task::TaskSet;
use crate::trainer::TrainConfig;
use crate::tensor::Tensor;
use crate::vocab::{Index, Vocabulary};

pub const MAGIC: &[u8; 4] = b"JMT1";
pub const VERSION: u32 = 1;

fn format_err(reason: impl Into<String>) -> Error {
    DataError::Format(format!("model archive: {}", reason.into())).into()
}

/// Parses `key=value` lines. Blank lines and lines starting with `#` are
/// skipped; later duplicates win.
pub fn parse_key_values(text: &str, name: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| DataError::line(name, i + 1, "expected `key=value`"))?;
        out.insert(k.trim().to_string(), v.to_string());
    }
    Ok(out)
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split('\t').map(|x| parse_value(key, x)).collect()
}

fn parse_rates(key: &str, v: &str) -> Result<[f64; 5]> {
    let list: Vec<f64> = parse_list(key, &v.replace(',', "\t"))?;
    list.try_into()
        .map_err(|_| Error::Config(format!("`{key}` needs five rates")))
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join("\t")
}

fn join_f64(items: &[f64]) -> String {
    items.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join("\t")
}

/// The model configuration as `model.*` entries.
pub fn model_config_entries(cfg: &ModelConfig) -> Vec<(String, String)> {
    let w = &cfg.wiring;
    let d = &cfg.dropout;
    [
        ("model.embedding_dim", cfg.embedding_dim.to_string()),
        ("model.hidden", cfg.hidden.to_string()),
        ("model.classifier_hidden", cfg.classifier_hidden.to_string()),
        ("model.label_dim", cfg.label_dim.to_string()),
        ("model.semantic_hidden", cfg.semantic_hidden.to_string()),
        ("model.maxout_pool", cfg.maxout_pool.to_string()),
        ("model.ngram_sizes", join(&cfg.ngram_sizes)),
        ("model.lowercase_words", cfg.lowercase_words.to_string()),
        ("model.tasks", w.tasks.code()),
        ("model.shortcut", w.use_shortcut.to_string()),
        ("model.label_embeddings", w.use_label_embeddings.to_string()),
        ("model.vertical", w.use_vertical.to_string()),
        ("model.dropout.vertical", format!("{:?}", d.vertical)),
        ("model.dropout.input", join_f64(&d.input)),
        ("model.dropout.classifier", join_f64(&d.classifier)),
        ("model.word_dropout_alpha", format!("{:?}", cfg.word_dropout_alpha)),
        ("model.seed", cfg.seed.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Applies one `model.*` entry; returns `false` for keys outside that
/// namespace. Lists accept tabs or commas as separators.
pub fn apply_model_entry(cfg: &mut ModelConfig, key: &str, value: &str) -> Result<bool> {
    match key {
        "model.embedding_dim" => cfg.embedding_dim = parse_value(key, value)?,
        "model.hidden" => cfg.hidden = parse_value(key, value)?,
        "model.classifier_hidden" => cfg.classifier_hidden = parse_value(key, value)?,
        "model.label_dim" => cfg.label_dim = parse_value(key, value)?,
        "model.semantic_hidden" => cfg.semantic_hidden = parse_value(key, value)?,
        "model.maxout_pool" => cfg.maxout_pool = parse_value(key, value)?,
        "model.ngram_sizes" => cfg.ngram_sizes = parse_list(key, &value.replace(',', "\t"))?,
        "model.lowercase_words" => cfg.lowercase_words = parse_value(key, value)?,
        "model.tasks" => cfg.wiring.tasks = value.trim().parse::<TaskSet>()?,
        "model.shortcut" => cfg.wiring.use_shortcut = parse_value(key, value)?,
        "model.label_embeddings" => cfg.wiring.use_label_embeddings = parse_value(key, value)?,
        "model.vertical" => cfg.wiring.use_vertical = parse_value(key, value)?,
        "model.dropout.vertical" => cfg.dropout.vertical = parse_value(key, value)?,
        "model.dropout.input" => cfg.dropout.input = parse_rates(key, value)?,
        "model.dropout.classifier" => cfg.dropout.classifier = parse_rates(key, value)?,
        "model.word_dropout_alpha" => cfg.word_dropout_alpha = parse_value(key, value)?,
        "model.seed" => cfg.seed = parse_value(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

/// Applies one `train.*` entry; returns `false` for other keys.
pub fn apply_train_entry(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<bool> {
    match key {
        "train.lambda_lstm" => cfg.lambda_lstm = parse_value(key, value)?,
        "train.lambda_classifier" => cfg.lambda_classifier = parse_value(key, value)?,
        "train.delta" => cfg.delta = parse_value(key, value)?,
        "train.delta_classifier" => cfg.delta_classifier = parse_value(key, value)?,
        "train.epsilon" => cfg.epsilon = parse_value(key, value)?,
        "train.rho" => cfg.rho = parse_value(key, value)?,
        "train.batch_sizes" => {
            let sizes: Vec<usize> = parse_list(key, &value.replace(',', "\t"))?;
            cfg.batch_sizes = sizes
                .try_into()
                .map_err(|_| Error::Config(format!("`{key}` needs five sizes")))?;
        }
        "train.epochs" => cfg.epochs = parse_value(key, value)?,
        "train.seed" => cfg.seed = parse_value(key, value)?,
        "train.order" => cfg.order = value.trim().parse()?,
        "train.select" => cfg.select = Some(value.trim().parse()?),
        _ => return Ok(false),
    }
    Ok(true)
}

fn check_items(key: &str, items: &[String]) -> Result<()> {
    match items.iter().find(|s| s.is_empty() || s.contains(['\t', '\n', '\r'])) {
        Some(bad) => Err(format_err(format!("{key} entry {bad:?} cannot be stored"))),
        None => Ok(()),
    }
}

fn config_block(model: &JointModel) -> Result<String> {
    let mut entries: BTreeMap<String, String> = model_config_entries(&model.config).into_iter().collect();
    let v = &model.vocab;
    let lists: [(&str, &Index); 5] = [
        ("vocab.words", v.words()),
        ("vocab.ngrams", v.ngrams()),
        ("labels.pos", &model.labels.pos),
        ("labels.chunk", &model.labels.chunk),
        ("labels.dep", &model.labels.dep),
    ];
    for (key, idx) in lists {
        check_items(key, idx.items())?;
        entries.insert(key.into(), idx.items().join("\t"));
    }
    entries.insert("vocab.word_counts".into(), join(v.word_counts()));
    entries.insert("vocab.ngram_sizes".into(), join(v.ngram_sizes()));
    entries.insert("vocab.lowercase_words".into(), v.lowercase_words().to_string());
    Ok(entries.into_iter().map(|(k, v)| format!("{k}={v}\n")).collect())
}

/// Writes `model` as a `JMT1` archive. Tensors appear in registration order.
pub fn write_archive<W: Write>(model: &JointModel, w: &mut W) -> Result<()> {
    let config = config_block(model)?;
    let io = |e: std::io::Error| format_err(e.to_string());
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(config.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(config.as_bytes()).map_err(io)?;
    for (_, entry) in model.params.iter() {
        let name = entry.name.as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(name).map_err(io)?;
        let shape = entry.tensor.shape();
        w.write_all(&(shape.len() as u32).to_le_bytes()).map_err(io)?;
        for d in shape {
            w.write_all(&(*d as u64).to_le_bytes()).map_err(io)?;
        }
        for v in entry.tensor.data() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

/// Saves to `path` via a temporary file in the same directory.
pub fn save_model(model: &JointModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let file = File::create(&tmp).map_err(|e| DataError::io(&tmp, e))?;
        let mut w = BufWriter::new(file);
        write_archive(model, &mut w)?;
        w.flush().map_err(|e| DataError::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| DataError::io(path, e))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<JointModel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    read_archive(BufReader::new(file))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.buf.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn at_end(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn split_items(v: Option<&String>) -> Vec<String> {
    match v {
        Some(v) if !v.is_empty() => v.split('\t').map(String::from).collect(),
        _ => Vec::new(),
    }
}

fn restore_config(block: &str) -> Result<(ModelConfig, Vocabulary, Labels)> {
    let entries = parse_key_values(block, "archive config")?;
    let mut config = ModelConfig::default();
    for (k, v) in &entries {
        if k.starts_with("model.") && !apply_model_entry(&mut config, k, v)? {
            return Err(format_err(format!("unknown config key `{k}`")));
        }
    }
    let get = |k: &str| entries.get(k).ok_or_else(|| format_err(format!("config lacks `{k}`")));
    let vocab = Vocabulary::from_parts(
        split_items(Some(get("vocab.words")?)),
        parse_list("vocab.word_counts", get("vocab.word_counts")?)?,
        split_items(entries.get("vocab.ngrams")),
        parse_list("vocab.ngram_sizes", get("vocab.ngram_sizes")?)?,
        parse_value("vocab.lowercase_words", get("vocab.lowercase_words")?)?,
    )?;
    let labels = Labels {
        pos: Index::from_items(split_items(entries.get("labels.pos"))),
        chunk: Index::from_items(split_items(entries.get("labels.chunk"))),
        dep: Index::from_items(split_items(entries.get("labels.dep"))),
    };
    Ok((config, vocab, labels))
}

/// Reads a `JMT1` archive, rebuilding the model from its config block and
/// then replacing every tensor.
pub fn read_archive<R: Read>(mut r: R) -> Result<JointModel> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|e| format_err(e.to_string()))?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    if c.take(4) != Some(MAGIC.as_slice()) {
        return Err(format_err("bad magic, not a JMT1 model archive"));
    }
    match c.u32() {
        Some(VERSION) => {}
        Some(v) => return Err(format_err(format!("unsupported version {v}, expected {VERSION}"))),
        None => return Err(format_err("truncated header")),
    }
    let len = c.u64().ok_or_else(|| format_err("truncated header"))?;
    let block = usize::try_from(len)
        .ok()
        .and_then(|n| c.take(n))
        .ok_or_else(|| format_err("truncated config block"))?;
    let block = std::str::from_utf8(block).map_err(|_| format_err("config block is not UTF-8"))?;
    let (config, vocab, labels) = restore_config(block)?;
    let mut model = JointModel::new(config, vocab, labels)?;

    let mut seen = BTreeSet::new();
    while !c.at_end() {
        let name_len = c.u32().ok_or_else(|| format_err("truncated tensor header"))? as usize;
        let name = c.take(name_len).ok_or_else(|| format_err("truncated tensor name"))?;
        let name = String::from_utf8(name.to_vec()).map_err(|_| format_err("tensor name is not UTF-8"))?;
        let truncated = || Error::from(DataError::TruncatedTensor(name.clone()));
        let rank = c.u32().ok_or_else(truncated)? as usize;
        let mut dims = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            dims.push(c.u64().ok_or_else(truncated)? as usize);
        }
        let count = dims.iter().try_fold(1usize, |a, d| a.checked_mul(*d)).ok_or_else(truncated)?;
        let bytes = count.checked_mul(8).and_then(|n| c.take(n)).ok_or_else(truncated)?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let id = model
            .params
            .id(&name)
            .ok_or_else(|| format_err(format!("unexpected tensor `{name}`")))?;
        if model.params.get(id).shape() != dims.as_slice() {
            return Err(format_err(format!(
                "tensor `{name}` has shape {dims:?}, model expects {:?}",
                model.params.get(id).shape()
            )));
        }
        if !seen.insert(name.clone()) {
            return Err(format_err(format!("tensor `{name}` appears twice")));
        }
        *model.params.get_mut(id) = Tensor::new(dims, values)?;
    }
    let missing: Vec<String> = model
        .params
        .iter()
        .filter(|(_, e)| !seen.contains(&e.name))
        .map(|(_, e)| e.name.clone())
        .collect();
    if !missing.is_empty() {
        return Err(DataError::MissingTensors(missing).into());
    }
    Ok(model)
}
