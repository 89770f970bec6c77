//! Word and character n-gram vocabularies, plus word-dropout.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";
pub const UNK_ID: usize = 0;

const BEGIN_MARK: &str = "#B#";
const END_MARK: &str = "#E#";

/// Unique character n-grams of `word`, in order of increasing `n` and then
/// position.
///
/// Unigrams are plain characters. For `n >= 2` the word is padded with a
/// begin and an end symbol, rendered as `#B#` and `#E#`, and every window of
/// `n` symbols is taken. Repeated n-grams keep their first occurrence.
pub fn extract_char_ngrams(word: &str, n_values: &[usize]) -> Result<Vec<String>> {
    if word.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot extract n-grams of an empty word".into(),
        ));
    }
    let chars: Vec<char> = word.chars().collect();
    let mut sizes: Vec<usize> = n_values.iter().copied().filter(|n| *n > 0).collect();
    sizes.sort_unstable();
    sizes.dedup();

    let mut out: Vec<String> = Vec::new();
    let mut push = |s: String| {
        if !out.contains(&s) {
            out.push(s);
        }
    };
    for n in sizes {
        if n == 1 {
            for c in &chars {
                push(c.to_string());
            }
            continue;
        }
        // padded symbols: 0 = begin, 1..=len = chars, len + 1 = end
        let padded = chars.len() + 2;
        if n > padded {
            continue;
        }
        for start in 0..=(padded - n) {
            let mut s = String::new();
            for pos in start..start + n {
                if pos == 0 {
                    s.push_str(BEGIN_MARK);
                } else if pos == padded - 1 {
                    s.push_str(END_MARK);
                } else {
                    s.push(chars[pos - 1]);
                }
            }
            push(s);
        }
    }
    Ok(out)
}

/// Probability that word-dropout replaces a word seen `frequency` times:
/// `alpha / (alpha + frequency)`.
pub fn word_dropout_probability(frequency: u64, alpha: f64) -> Result<f64> {
    if frequency == 0 {
        return Err(Error::InvalidArgument(
            "word-dropout needs a training frequency of at least 1".into(),
        ));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "word-dropout alpha must be positive, got {alpha}"
        )));
    }
    Ok(alpha / (alpha + frequency as f64))
}

/// Draws whether a word should be replaced by the unknown-word vector.
pub fn apply_word_dropout<R: Rng + ?Sized>(frequency: u64, alpha: f64, rng: &mut R) -> Result<bool> {
    let p = word_dropout_probability(frequency, alpha)?;
    Ok(rng.gen::<f64>() < p)
}

/// Dense index map from strings to ids, in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Index {
    items: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Index {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_items<I: IntoIterator<Item = String>>(items: I) -> Self {
        let mut idx = Index::new();
        for it in items {
            idx.insert(&it);
        }
        idx
    }

    /// Returns the id of `item`, inserting it if needed.
    pub fn insert(&mut self, item: &str) -> usize {
        if let Some(&id) = self.ids.get(item) {
            return id;
        }
        let id = self.items.len();
        self.items.push(item.to_string());
        self.ids.insert(item.to_string(), id);
        id
    }

    pub fn get(&self, item: &str) -> Option<usize> {
        self.ids.get(item).copied()
    }

    pub fn item(&self, id: usize) -> &str {
        &self.items[id]
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Word and character n-gram vocabularies shared by all tasks.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    words: Index,
    word_counts: Vec<u64>,
    ngrams: Index,
    ngram_sizes: Vec<usize>,
    lowercase_words: bool,
}

impl Vocabulary {
    /// Builds vocabularies from training tokens. Word lookup lowercases when
    /// `lowercase_words` is set; n-grams are always case-sensitive.
    pub fn build<'a, I>(tokens: I, ngram_sizes: &[usize], lowercase_words: bool) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut words = Index::new();
        words.insert(UNK);
        let mut word_counts = vec![0u64];
        let mut ngrams = Index::new();
        let mut seen_forms: HashMap<String, ()> = HashMap::new();
        for tok in tokens {
            if tok.is_empty() {
                continue;
            }
            let key = normalize(tok, lowercase_words);
            let id = words.insert(&key);
            if id == word_counts.len() {
                word_counts.push(0);
            }
            word_counts[id] += 1;
            if seen_forms.insert(tok.to_string(), ()).is_none() {
                for g in extract_char_ngrams(tok, ngram_sizes).expect("non-empty token") {
                    ngrams.insert(&g);
                }
            }
        }
        Vocabulary {
            words,
            word_counts,
            ngrams,
            ngram_sizes: ngram_sizes.to_vec(),
            lowercase_words,
        }
    }

    /// Restores a vocabulary from its persisted parts.
    pub fn from_parts(
        words: Vec<String>,
        word_counts: Vec<u64>,
        ngrams: Vec<String>,
        ngram_sizes: Vec<usize>,
        lowercase_words: bool,
    ) -> Result<Self> {
        if words.first().map(String::as_str) != Some(UNK) {
            return Err(Error::Config(format!("word vocabulary must start with {UNK}")));
        }
        if words.len() != word_counts.len() {
            return Err(Error::Config("word counts do not match the word list".into()));
        }
        Ok(Vocabulary {
            words: Index::from_items(words),
            word_counts,
            ngrams: Index::from_items(ngrams),
            ngram_sizes,
            lowercase_words,
        })
    }

    /// Word id, or [`UNK_ID`] for out-of-vocabulary words.
    pub fn word_id(&self, word: &str) -> usize {
        self.words
            .get(&normalize(word, self.lowercase_words))
            .unwrap_or(UNK_ID)
    }

    pub fn word_count(&self, id: usize) -> u64 {
        self.word_counts[id]
    }

    /// Ids of the word's unique, known character n-grams.
    pub fn ngram_ids(&self, word: &str) -> Vec<usize> {
        if word.is_empty() {
            return Vec::new();
        }
        extract_char_ngrams(word, &self.ngram_sizes)
            .expect("non-empty word")
            .iter()
            .filter_map(|g| self.ngrams.get(g))
            .collect()
    }

    pub fn words(&self) -> &Index {
        &self.words
    }

    pub fn word_counts(&self) -> &[u64] {
        &self.word_counts
    }

    pub fn ngrams(&self) -> &Index {
        &self.ngrams
    }

    pub fn ngram_sizes(&self) -> &[usize] {
        &self.ngram_sizes
    }

    pub fn lowercase_words(&self) -> bool {
        self.lowercase_words
    }

    pub fn num_words(&self) -> usize {
        self.words.len()
    }

    pub fn num_ngrams(&self) -> usize {
        self.ngrams.len()
    }
}

fn normalize(word: &str, lowercase: bool) -> String {
    if lowercase {
        word.to_lowercase()
    } else {
        word.to_string()
    }
}
