//! Word/character embedding tables, their text file format, and the word
//! representation fed to every layer.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{DataError, Error, GraphError, Result};
use crate::graph::{Graph, NodeId};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;
use crate::vocab::{self, Vocabulary, UNK_ID};

/// Token-keyed vectors, the unit of the embedding text format.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenVectors {
    pub tokens: Vec<String>,
    pub dim: usize,
    /// Row-major `[tokens.len(), dim]`.
    pub values: Vec<f64>,
}

impl TokenVectors {
    pub fn vector(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn position(&self, token: &str) -> Option<usize> {
        self.tokens.iter().position(|t| t == token)
    }

    /// Writes `count dim` followed by one `token v1 .. vd` line per entry.
    /// Values use 17 significant digits.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| DataError::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| DataError::io(path, e))?;
        w.flush().map_err(|e| DataError::io(path, e))?;
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.tokens.len(), self.dim)?;
        for (i, tok) in self.tokens.iter().enumerate() {
            w.write_all(tok.as_bytes())?;
            for v in self.vector(i) {
                write!(w, " {v:.16e}")?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| DataError::io(path, e))?;
        Self::read_from(BufReader::new(file), &path.display().to_string())
    }

    pub fn read_from<R: BufRead>(reader: R, name: &str) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| DataError::line(name, 1, "missing `count dim` header"))?;
        let header = header.map_err(|e| DataError::io(name, e))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parse = |s: &str| s.parse::<usize>().ok();
        let (count, dim) = match fields.as_slice() {
            [c, d] => match (parse(c), parse(d)) {
                (Some(c), Some(d)) if d > 0 => (c, d),
                _ => return Err(DataError::line(name, 1, "malformed header").into()),
            },
            _ => return Err(DataError::line(name, 1, "header must be `count dim`").into()),
        };
        let mut tokens = Vec::with_capacity(count);
        let mut values = Vec::with_capacity(count * dim);
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| DataError::io(name, e))?;
            if line.is_empty() {
                continue;
            }
            if tokens.len() == count {
                return Err(DataError::line(
                    name,
                    lineno,
                    format!("more entries than the header count {count}"),
                )
                .into());
            }
            let mut parts = line.split(' ');
            let token = parts.next().unwrap_or_default();
            if token.is_empty() {
                return Err(DataError::line(name, lineno, "empty token").into());
            }
            let before = values.len();
            for p in parts {
                let v: f64 = p
                    .parse()
                    .map_err(|_| DataError::line(name, lineno, format!("bad number `{p}`")))?;
                values.push(v);
            }
            if values.len() - before != dim {
                return Err(DataError::line(
                    name,
                    lineno,
                    format!("expected {dim} values, found {}", values.len() - before),
                )
                .into());
            }
            tokens.push(token.to_string());
        }
        if tokens.len() != count {
            return Err(DataError::Format(format!(
                "{name}: header announces {count} entries, found {}",
                tokens.len()
            ))
            .into());
        }
        Ok(TokenVectors {
            tokens,
            dim,
            values,
        })
    }
}

/// Word table `[V_w, d]` and character n-gram table `[V_c, d]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub word_vectors: Tensor,
    pub ngram_vectors: Tensor,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.word_vectors.shape()[1]
    }

    /// Mean of the word's unique known n-gram vectors; zero when none is known.
    pub fn char_word_embedding(&self, word: &str, vocab: &Vocabulary) -> Vec<f64> {
        let ids = vocab.ngram_ids(word);
        let mut out = vec![0.0; self.dim()];
        if ids.is_empty() {
            return out;
        }
        for id in &ids {
            for (o, v) in out.iter_mut().zip(self.ngram_vectors.row(*id)) {
                *o += v;
            }
        }
        let k = ids.len() as f64;
        out.iter_mut().for_each(|o| *o /= k);
        out
    }
}

/// Parameter handles of the shared embedding tables.
#[derive(Clone, Copy, Debug)]
pub struct EmbeddingParams {
    pub word: ParamId,
    pub ngram: ParamId,
    pub dim: usize,
}

/// Settings for word-dropout at training time.
pub struct WordDropout<'r, R: Rng + ?Sized> {
    pub alpha: f64,
    pub rng: &'r mut R,
}

impl EmbeddingParams {
    /// `[word vector; character embedding]`, width `2d`.
    ///
    /// Out-of-vocabulary words use the unknown-word vector. With
    /// `word_dropout`, known words are replaced by it with probability
    /// `alpha / (alpha + freq)`. The character part averages the word's
    /// unique known n-grams, or is zero if none is known.
    pub fn word_representation<R: Rng + ?Sized>(
        &self,
        graph: &mut Graph,
        params: &ParamStore,
        vocab: &Vocabulary,
        word: &str,
        word_dropout: Option<&mut WordDropout<'_, R>>,
    ) -> Result<NodeId> {
        let mut id = vocab.word_id(word);
        if let Some(wd) = word_dropout {
            if id != UNK_ID && vocab::apply_word_dropout(vocab.word_count(id), wd.alpha, wd.rng)? {
                id = UNK_ID;
            }
        }
        let table = graph.param(params, self.word);
        let word_vec = graph.row(table, id)?;
        let char_vec = self.char_embedding(graph, params, vocab, word)?;
        Ok(graph.concat(&[word_vec, char_vec])?)
    }

    pub fn char_embedding(
        &self,
        graph: &mut Graph,
        params: &ParamStore,
        vocab: &Vocabulary,
        word: &str,
    ) -> Result<NodeId, GraphError> {
        let ids = vocab.ngram_ids(word);
        if ids.is_empty() {
            return Ok(graph.constant(Tensor::zeros(&[self.dim])));
        }
        let table = graph.param(params, self.ngram);
        let rows = ids
            .iter()
            .map(|&i| graph.row(table, i))
            .collect::<Result<Vec<_>, _>>()?;
        let sum = graph.add(&rows)?;
        graph.scale(sum, 1.0 / ids.len() as f64)
    }

    /// Copies pre-trained vectors into the tables for every vocabulary entry
    /// found in `words` / `ngrams`. Returns how many rows were filled.
    pub fn load_pretrained(
        &self,
        params: &mut ParamStore,
        vocab: &Vocabulary,
        words: Option<&TokenVectors>,
        ngrams: Option<&TokenVectors>,
    ) -> Result<(usize, usize)> {
        let mut filled = (0, 0);
        if let Some(src) = words {
            filled.0 = self.copy_rows(params, self.word, src, vocab.words().items())?;
        }
        if let Some(src) = ngrams {
            filled.1 = self.copy_rows(params, self.ngram, src, vocab.ngrams().items())?;
        }
        Ok(filled)
    }

    fn copy_rows(
        &self,
        params: &mut ParamStore,
        table: ParamId,
        src: &TokenVectors,
        items: &[String],
    ) -> Result<usize> {
        if src.dim != self.dim {
            return Err(Error::Config(format!(
                "pre-trained vectors have width {}, model expects {}",
                src.dim, self.dim
            )));
        }
        let lookup: std::collections::HashMap<&str, usize> = src
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let t = params.get_mut(table);
        let mut n = 0;
        for (row, item) in items.iter().enumerate() {
            if let Some(&i) = lookup.get(item.as_str()) {
                t.row_mut(row).copy_from_slice(src.vector(i));
                n += 1;
            }
        }
        Ok(n)
    }
}
