//! Fixtures shared by the benchmarks in `benches/`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use jmt_core::{synthetic, Corpus, JointModel, Labels, ModelConfig, Vocabulary};

/// Random `(len + 1) x (len + 1)` arc-score matrix for the decoder.
pub fn score_matrix(len: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..=len)
        .map(|_| (0..=len).map(|_| rng.gen_range(-5.0..0.0)).collect())
        .collect()
}

/// All-task model of width `dim` over the synthetic corpus.
pub fn synthetic_model(dim: usize) -> (JointModel, Corpus) {
    let corpus = synthetic::corpus(1);
    let vocab = Vocabulary::build(corpus.forms(), &[2, 3, 4], true);
    let labels = Labels::from_data(&corpus.pos, &corpus.chunk, &corpus.dep);
    let mut config = ModelConfig::with_width(dim);
    config.maxout_pool = 2;
    let model = JointModel::new(config, vocab, labels).expect("valid configuration");
    (model, corpus)
}
