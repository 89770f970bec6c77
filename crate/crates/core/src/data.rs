//! Token and sentence-pair datasets.
//!
//! Token files are tab-separated with the columns FORM, POS, CHUNK, HEAD and
//! DEPREL, one token per line, `_` for an absent value and a blank line
//! between sentences. HEAD is 1-based with 0 for ROOT.
//!
//! Pair files are tab-separated with the columns id, premise, hypothesis,
//! score and label; the two texts are split on whitespace.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{DataError, Error, Result};

pub const ABSENT: &str = "_";

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub form: String,
    pub pos: Option<String>,
    pub chunk: Option<String>,
    pub head: Option<usize>,
    pub deprel: Option<String>,
}

impl Token {
    pub fn new(form: impl Into<String>) -> Self {
        Token {
            form: form.into(),
            pos: None,
            chunk: None,
            head: None,
            deprel: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn from_forms<S: AsRef<str>>(forms: &[S]) -> Self {
        Sentence {
            tokens: forms.iter().map(|f| Token::new(f.as_ref())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn forms(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.form.as_str()).collect()
    }

    pub fn has_pos(&self) -> bool {
        self.tokens.iter().all(|t| t.pos.is_some())
    }

    pub fn has_chunks(&self) -> bool {
        self.tokens.iter().all(|t| t.chunk.is_some())
    }

    pub fn has_dependencies(&self) -> bool {
        self.tokens.iter().all(|t| t.head.is_some() && t.deprel.is_some())
    }
}

fn optional(field: &str) -> Option<String> {
    (field != ABSENT).then(|| field.to_string())
}

fn valid_chunk_tag(tag: &str) -> bool {
    if tag == "O" {
        return true;
    }
    match tag.split_once('-') {
        Some((p, l)) => matches!(p, "B" | "I" | "E" | "S") && !l.is_empty(),
        None => false,
    }
}

pub fn read_token_file(path: impl AsRef<Path>) -> Result<Vec<Sentence>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    parse_tokens(BufReader::new(file), &path.display().to_string())
}

/// Parses token TSV; `name` labels error messages.
pub fn parse_tokens<R: BufRead>(reader: R, name: &str) -> Result<Vec<Sentence>> {
    let mut sentences = Vec::new();
    let mut current = Sentence::default();
    // line numbers of the current sentence's tokens, for head range errors
    let mut lines = Vec::new();
    let finish = |s: &mut Sentence, lines: &mut Vec<usize>, out: &mut Vec<Sentence>| -> Result<()> {
        let len = s.len();
        for (tok, &line) in s.tokens.iter().zip(lines.iter()) {
            if let Some(h) = tok.head {
                if h > len {
                    return Err(DataError::line(
                        name,
                        line,
                        format!("head {h} is out of range for a sentence of {len} tokens"),
                    )
                    .into());
                }
            }
        }
        if !s.is_empty() {
            out.push(std::mem::take(s));
        }
        lines.clear();
        Ok(())
    };
    for (i, line) in reader.lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| DataError::io(name, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            finish(&mut current, &mut lines, &mut sentences)?;
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(DataError::line(name, n, format!("expected 5 columns, found {}", cols.len())).into());
        }
        if cols[0].is_empty() || cols[0] == ABSENT {
            return Err(DataError::line(name, n, "missing word form").into());
        }
        let head = match cols[3] {
            ABSENT => None,
            h => Some(h.parse::<usize>().map_err(|_| {
                DataError::line(name, n, format!("HEAD `{h}` is not a non-negative integer"))
            })?),
        };
        let chunk = optional(cols[2]);
        if let Some(c) = &chunk {
            if !valid_chunk_tag(c) {
                return Err(DataError::line(name, n, format!("`{c}` is not an IOBES chunk tag")).into());
            }
        }
        current.tokens.push(Token {
            form: cols[0].to_string(),
            pos: optional(cols[1]),
            chunk,
            head,
            deprel: optional(cols[4]),
        });
        lines.push(n);
    }
    finish(&mut current, &mut lines, &mut sentences)?;
    Ok(sentences)
}

pub fn write_tokens<W: Write>(w: &mut W, sentences: &[Sentence]) -> std::io::Result<()> {
    for (i, s) in sentences.iter().enumerate() {
        if i > 0 {
            writeln!(w)?;
        }
        for t in &s.tokens {
            let or_absent = |v: &Option<String>| v.clone().unwrap_or_else(|| ABSENT.to_string());
            let head = t.head.map(|h| h.to_string()).unwrap_or_else(|| ABSENT.to_string());
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                t.form,
                or_absent(&t.pos),
                or_absent(&t.chunk),
                head,
                or_absent(&t.deprel)
            )?;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntailmentLabel {
    Entailment,
    Contradiction,
    Neutral,
}

impl EntailmentLabel {
    pub const ALL: [EntailmentLabel; 3] = [
        EntailmentLabel::Entailment,
        EntailmentLabel::Contradiction,
        EntailmentLabel::Neutral,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EntailmentLabel::Entailment => "ENTAILMENT",
            EntailmentLabel::Contradiction => "CONTRADICTION",
            EntailmentLabel::Neutral => "NEUTRAL",
        }
    }
}

impl fmt::Display for EntailmentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntailmentLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown entailment label `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SentencePair {
    pub id: String,
    pub premise: Vec<String>,
    pub hypothesis: Vec<String>,
    pub score: Option<f64>,
    pub label: Option<EntailmentLabel>,
}

pub fn read_pair_file(path: impl AsRef<Path>) -> Result<Vec<SentencePair>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    parse_pairs(BufReader::new(file), &path.display().to_string())
}

pub fn parse_pairs<R: BufRead>(reader: R, name: &str) -> Result<Vec<SentencePair>> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| DataError::io(name, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(DataError::line(name, n, format!("expected 5 columns, found {}", cols.len())).into());
        }
        let split = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
        let premise = split(cols[1]);
        let hypothesis = split(cols[2]);
        if premise.is_empty() || hypothesis.is_empty() {
            return Err(DataError::line(name, n, "premise and hypothesis must be non-empty").into());
        }
        let score = match cols[3] {
            ABSENT => None,
            s => {
                let v: f64 = s
                    .parse()
                    .map_err(|_| DataError::line(name, n, format!("score `{s}` is not a number")))?;
                if !(1.0..=5.0).contains(&v) {
                    return Err(DataError::line(name, n, format!("score {v} is outside [1, 5]")).into());
                }
                Some(v)
            }
        };
        let label = match cols[4] {
            ABSENT => None,
            s => Some(
                s.parse::<EntailmentLabel>()
                    .map_err(|_| DataError::line(name, n, format!("unknown entailment label `{s}`")))?,
            ),
        };
        if score.is_none() && label.is_none() {
            return Err(DataError::line(name, n, "pair has neither a score nor a label").into());
        }
        pairs.push(SentencePair {
            id: cols[0].to_string(),
            premise,
            hypothesis,
            score,
            label,
        });
    }
    Ok(pairs)
}

pub fn write_pairs<W: Write>(w: &mut W, pairs: &[SentencePair]) -> std::io::Result<()> {
    for p in pairs {
        let score = p.score.map(|s| format!("{s:?}")).unwrap_or_else(|| ABSENT.into());
        let label = p.label.map(|l| l.to_string()).unwrap_or_else(|| ABSENT.into());
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            p.id,
            p.premise.join(" "),
            p.hypothesis.join(" "),
            score,
            label
        )?;
    }
    Ok(())
}

/// Datasets of all tasks; any of them may be empty.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    pub pos: Vec<Sentence>,
    pub chunk: Vec<Sentence>,
    pub dep: Vec<Sentence>,
    pub pairs: Vec<SentencePair>,
}

impl Corpus {
    /// Every word form, for building the vocabulary.
    pub fn forms(&self) -> impl Iterator<Item = &str> {
        let sentences = self.pos.iter().chain(&self.chunk).chain(&self.dep);
        sentences
            .flat_map(|s| s.tokens.iter().map(|t| t.form.as_str()))
            .chain(
                self.pairs
                    .iter()
                    .flat_map(|p| p.premise.iter().chain(&p.hypothesis).map(String::as_str)),
            )
    }
}
