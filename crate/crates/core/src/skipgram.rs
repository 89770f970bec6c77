//! Skip-gram with negative sampling, for word vectors or for character
//! n-gram vectors whose average stands in for the centre word.

use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding::TokenVectors;
use crate::error::{Error, Result};
use crate::graph::sigmoid;
use crate::vocab::{extract_char_ngrams, Index};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SkipGramMode {
    Word,
    CharNgram,
}

#[derive(Clone, Debug)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    /// Subsampling coefficient; `None` keeps every token.
    pub subsample: Option<f64>,
    pub epochs: usize,
    pub lr: f64,
    pub mode: SkipGramMode,
    pub ngram_sizes: Vec<usize>,
    /// Lowercase tokens before training (word mode only).
    pub lowercase: bool,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 100,
            window: 1,
            negatives: 15,
            subsample: Some(1e-5),
            epochs: 1,
            lr: 0.025,
            mode: SkipGramMode::Word,
            ngram_sizes: vec![1, 2, 3, 4],
            lowercase: true,
            seed: 1,
        }
    }
}

/// Negative-sampling loss for one (centre, context) pair:
/// `-log σ(v·c) - Σ_i log σ(-v·n_i)`.
pub fn pair_loss(input: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    let pos = dot(input, context);
    let mut loss = -log_sigmoid(pos);
    for n in negatives {
        loss -= log_sigmoid(-dot(input, n));
    }
    loss
}

/// Gradients of [`pair_loss`] w.r.t. the input vector, the positive context
/// vector and each negative context vector.
pub fn pair_gradients(
    input: &[f64],
    context: &[f64],
    negatives: &[&[f64]],
) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    // d/dx -log σ(x) = σ(x) - 1 ; d/dx -log σ(-x) = σ(x)
    let gp = sigmoid(dot(input, context)) - 1.0;
    let mut g_in: Vec<f64> = context.iter().map(|c| gp * c).collect();
    let g_ctx: Vec<f64> = input.iter().map(|v| gp * v).collect();
    let mut g_neg = Vec::with_capacity(negatives.len());
    for n in negatives {
        let gn = sigmoid(dot(input, n));
        for (g, nv) in g_in.iter_mut().zip(n.iter()) {
            *g += gn * nv;
        }
        g_neg.push(input.iter().map(|v| gn * v).collect());
    }
    (g_in, g_ctx, g_neg)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Draws context words with probability proportional to `count^power`.
#[derive(Clone, Debug)]
pub struct NegativeSampler {
    dist: WeightedIndex<f64>,
}

impl NegativeSampler {
    pub fn new(counts: &[u64], power: f64) -> Result<Self> {
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(power)).collect();
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| Error::InvalidArgument(format!("negative sampler: {e}")))?;
        Ok(NegativeSampler { dist })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.dist.sample(rng)
    }
}

/// Skip-gram training state.
pub struct SkipGram {
    config: SkipGramConfig,
    words: Index,
    counts: Vec<u64>,
    total: u64,
    /// Input-side rows: one per word (word mode) or per n-gram (char mode).
    input_tokens: Index,
    input: Vec<f64>,
    /// Context-side rows, one per word.
    context: Vec<f64>,
    /// Char mode: n-gram ids of each word.
    word_ngrams: Vec<Vec<usize>>,
    sampler: NegativeSampler,
    rng: ChaCha8Rng,
}

impl SkipGram {
    pub fn new(corpus: &[Vec<String>], config: SkipGramConfig) -> Result<Self> {
        if config.dim == 0 {
            return Err(Error::InvalidArgument("embedding width must be positive".into()));
        }
        let mut words = Index::new();
        let mut counts: Vec<u64> = Vec::new();
        for tok in corpus.iter().flatten() {
            let key = normalize(tok, &config);
            let id = words.insert(&key);
            if id == counts.len() {
                counts.push(0);
            }
            counts[id] += 1;
        }
        if words.is_empty() {
            return Err(Error::InvalidArgument("skip-gram corpus is empty".into()));
        }
        let total = counts.iter().sum();
        let mut input_tokens = Index::new();
        let mut word_ngrams = Vec::new();
        match config.mode {
            SkipGramMode::Word => {
                for w in words.items() {
                    input_tokens.insert(w);
                }
            }
            SkipGramMode::CharNgram => {
                for w in words.items() {
                    let ids = extract_char_ngrams(w, &config.ngram_sizes)?
                        .iter()
                        .map(|g| input_tokens.insert(g))
                        .collect();
                    word_ngrams.push(ids);
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.dim;
        let input = (0..input_tokens.len() * d)
            .map(|_| (rng.gen::<f64>() - 0.5) / d as f64)
            .collect();
        let context = vec![0.0; words.len() * d];
        let sampler = NegativeSampler::new(&counts, 0.75)?;
        Ok(SkipGram {
            config,
            words,
            counts,
            total,
            input_tokens,
            input,
            context,
            word_ngrams,
            sampler,
            rng,
        })
    }

    pub fn word_id(&self, word: &str) -> Option<usize> {
        self.words.get(&normalize(word, &self.config))
    }

    /// Input vector of word `w`: its own row, or the mean of its n-gram rows.
    pub fn input_vector(&self, w: usize) -> Vec<f64> {
        let d = self.config.dim;
        match self.config.mode {
            SkipGramMode::Word => self.input[w * d..(w + 1) * d].to_vec(),
            SkipGramMode::CharNgram => {
                let ids = &self.word_ngrams[w];
                let mut v = vec![0.0; d];
                for &g in ids {
                    for (o, x) in v.iter_mut().zip(&self.input[g * d..(g + 1) * d]) {
                        *o += x;
                    }
                }
                let k = ids.len().max(1) as f64;
                v.iter_mut().for_each(|o| *o /= k);
                v
            }
        }
    }

    pub fn context_vector(&self, w: usize) -> &[f64] {
        let d = self.config.dim;
        &self.context[w * d..(w + 1) * d]
    }

    /// One SGD step on the pair (`center`, `context`) with freshly drawn
    /// negatives. Returns the loss before the update.
    pub fn step(&mut self, center: usize, context: usize, lr: f64) -> f64 {
        let negs: Vec<usize> = (0..self.config.negatives)
            .map(|_| self.sampler.sample(&mut self.rng))
            .filter(|&n| n != context)
            .collect();
        let v = self.input_vector(center);
        let ctx = self.context_vector(context).to_vec();
        let neg_vecs: Vec<Vec<f64>> = negs.iter().map(|&n| self.context_vector(n).to_vec()).collect();
        let neg_refs: Vec<&[f64]> = neg_vecs.iter().map(Vec::as_slice).collect();
        let loss = pair_loss(&v, &ctx, &neg_refs);
        let (g_in, g_ctx, g_neg) = pair_gradients(&v, &ctx, &neg_refs);

        let d = self.config.dim;
        let update = |buf: &mut [f64], row: usize, g: &[f64], scale: f64| {
            for (p, gv) in buf[row * d..(row + 1) * d].iter_mut().zip(g) {
                *p -= scale * gv;
            }
        };
        update(&mut self.context, context, &g_ctx, lr);
        for (n, g) in negs.iter().zip(&g_neg) {
            update(&mut self.context, *n, g, lr);
        }
        match self.config.mode {
            SkipGramMode::Word => update(&mut self.input, center, &g_in, lr),
            SkipGramMode::CharNgram => {
                let ids = self.word_ngrams[center].clone();
                let k = ids.len().max(1) as f64;
                for g in ids {
                    update(&mut self.input, g, &g_in, lr / k);
                }
            }
        }
        loss
    }

    fn keep(&mut self, w: usize) -> bool {
        match self.config.subsample {
            None => true,
            Some(t) => {
                let f = self.counts[w] as f64 / self.total as f64;
                let p = ((f / t).sqrt() + 1.0) * t / f;
                p >= 1.0 || self.rng.gen::<f64>() < p
            }
        }
    }

    /// Runs the configured number of epochs; returns the mean pair loss of
    /// each epoch.
    pub fn train(&mut self, corpus: &[Vec<String>]) -> Vec<f64> {
        let mut history = Vec::with_capacity(self.config.epochs);
        for _ in 0..self.config.epochs {
            let (mut sum, mut n) = (0.0, 0usize);
            for sentence in corpus {
                let ids: Vec<usize> = sentence
                    .iter()
                    .filter_map(|t| self.word_id(t))
                    .collect();
                let kept: Vec<usize> = ids.into_iter().filter(|&w| self.keep(w)).collect();
                for (i, &center) in kept.iter().enumerate() {
                    let lo = i.saturating_sub(self.config.window);
                    let hi = (i + self.config.window).min(kept.len() - 1);
                    for (j, &ctx) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                        if j == i {
                            continue;
                        }
                        sum += self.step(center, ctx, self.config.lr);
                        n += 1;
                    }
                }
            }
            history.push(if n == 0 { 0.0 } else { sum / n as f64 });
        }
        history
    }

    /// The input-side table: words in word mode, n-grams in char mode.
    pub fn input_table(&self) -> TokenVectors {
        TokenVectors {
            tokens: self.input_tokens.items().to_vec(),
            dim: self.config.dim,
            values: self.input.clone(),
        }
    }
}

fn normalize(tok: &str, config: &SkipGramConfig) -> String {
    if config.lowercase && config.mode == SkipGramMode::Word {
        tok.to_lowercase()
    } else {
        tok.to_string()
    }
}

/// Trains skip-gram embeddings on a tokenized corpus.
pub fn pretrain_skipgram(corpus: &[Vec<String>], config: SkipGramConfig) -> Result<TokenVectors> {
    let mut model = SkipGram::new(corpus, config)?;
    let history = model.train(corpus);
    log::debug!("skip-gram epoch losses: {history:?}");
    Ok(model.input_table())
}

/// Tokenizes plain text on whitespace, one sentence per non-empty line.
pub fn tokenize_corpus(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split_whitespace().map(str::to_string).collect::<Vec<_>>())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Counts of each word in `corpus`, keyed by surface form.
pub fn count_words(corpus: &[Vec<String>]) -> HashMap<String, u64> {
    let mut counts = HashMap::new();
    for tok in corpus.iter().flatten() {
        *counts.entry(tok.clone()).or_insert(0) += 1;
    }
    counts
}
