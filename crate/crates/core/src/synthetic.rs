//! Small generated corpus for smoke tests and the memorization check.
//!
//! Sentences follow `NP VB [NP] [PP]` with `NP = DT [JJ] NN` and
//! `PP = IN NP`. Every word has a single POS tag, chunks use IOBES, and
//! the trees use four labels: `det`, `mod`, `arg` and `root`. Pairs are
//! built from generated premises: dropping an adjective gives
//! entailment, inserting "not" after the verb gives contradiction, and
//! swapping a noun gives a neutral pair.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Corpus, EntailmentLabel, Sentence, SentencePair, Token};

pub const DETERMINERS: [&str; 3] = ["the", "a", "every"];
pub const ADJECTIVES: [&str; 5] = ["big", "small", "red", "old", "happy"];
pub const NOUNS: [&str; 10] = ["cat", "dog", "man", "woman", "bird", "car", "house", "park", "tree", "book"];
pub const VERBS: [&str; 7] = ["sees", "likes", "chases", "finds", "takes", "watches", "sleeps"];
pub const PREPOSITIONS: [&str; 4] = ["in", "near", "with", "under"];
pub const NEGATION: &str = "not";

pub const SENTENCES: usize = 50;
pub const PAIRS: usize = 40;

struct Builder {
    tokens: Vec<Token>,
}

impl Builder {
    fn push(&mut self, form: &str, pos: &str, chunk: String, head: usize, deprel: &str) -> usize {
        self.tokens.push(Token {
            form: form.into(),
            pos: Some(pos.into()),
            chunk: Some(chunk),
            head: Some(head),
            deprel: Some(deprel.into()),
        });
        self.tokens.len()
    }

    /// Adds a noun phrase attached to `head` and returns the noun's position.
    /// Heads of words inside the phrase are patched once the noun is placed.
    fn noun_phrase<R: Rng>(&mut self, rng: &mut R, head: usize, deprel: &str, adjective: bool) -> usize {
        let start = self.tokens.len();
        self.push(DETERMINERS.choose(rng).unwrap(), "DT", "B-NP".into(), 0, "det");
        if adjective {
            self.push(ADJECTIVES.choose(rng).unwrap(), "JJ", "I-NP".into(), 0, "mod");
        }
        let noun = self.push(NOUNS.choose(rng).unwrap(), "NN", "E-NP".into(), head, deprel);
        for t in &mut self.tokens[start..noun - 1] {
            t.head = Some(noun);
        }
        noun
    }
}

/// One random sentence; `adjective` forces an adjective into the subject.
pub fn sentence<R: Rng>(rng: &mut R, adjective: bool) -> Sentence {
    let mut b = Builder { tokens: Vec::new() };
    // the subject attaches to the verb, which is placed next
    let adj = rng.gen_bool(0.4) || adjective;
    let subject = b.noun_phrase(rng, 0, "arg", adj);
    let verb = subject + 1;
    b.tokens[subject - 1].head = Some(verb);
    b.push(VERBS.choose(rng).unwrap(), "VB", "S-VP".into(), 0, "root");
    if rng.gen_bool(0.7) {
        let adj = rng.gen_bool(0.4);
        b.noun_phrase(rng, verb, "arg", adj);
    }
    if rng.gen_bool(0.5) {
        let prep = b.push(PREPOSITIONS.choose(rng).unwrap(), "IN", "S-PP".into(), verb, "mod");
        let adj = rng.gen_bool(0.3);
        b.noun_phrase(rng, prep, "arg", adj);
    }
    Sentence { tokens: b.tokens }
}

fn jitter<R: Rng>(rng: &mut R, centre: f64) -> f64 {
    // two decimals so the written files round-trip exactly
    let v = centre + rng.gen_range(-0.3..=0.3);
    (v * 100.0).round() / 100.0
}

fn pair<R: Rng>(rng: &mut R, id: usize, label: EntailmentLabel) -> SentencePair {
    let s = sentence(rng, label == EntailmentLabel::Entailment);
    let premise: Vec<String> = s.forms().iter().map(|f| f.to_string()).collect();
    let mut hypothesis = premise.clone();
    let score = match label {
        EntailmentLabel::Entailment => {
            let adj = s.tokens.iter().position(|t| t.pos.as_deref() == Some("JJ")).expect("forced adjective");
            hypothesis.remove(adj);
            jitter(rng, 4.5)
        }
        EntailmentLabel::Contradiction => {
            let verb = s.tokens.iter().position(|t| t.pos.as_deref() == Some("VB")).unwrap();
            hypothesis.insert(verb + 1, NEGATION.into());
            jitter(rng, 3.5)
        }
        EntailmentLabel::Neutral => {
            let nouns: Vec<usize> = (0..s.len()).filter(|&i| s.tokens[i].pos.as_deref() == Some("NN")).collect();
            let i = *nouns.choose(rng).unwrap();
            let current = premise[i].clone();
            let others: Vec<&str> = NOUNS.iter().copied().filter(|n| *n != current).collect();
            hypothesis[i] = others.choose(rng).unwrap().to_string();
            jitter(rng, 2.0)
        }
    };
    SentencePair {
        id: format!("p{id:02}"),
        premise,
        hypothesis,
        score: Some(score),
        label: Some(label),
    }
}

/// The bundled corpus: the same 50 sentences serve POS, chunking and
/// parsing, plus 40 pairs cycling through the three entailment labels.
pub fn corpus(seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sentences: Vec<Sentence> = (0..SENTENCES).map(|_| sentence(&mut rng, false)).collect();
    let pairs = (0..PAIRS)
        .map(|i| pair(&mut rng, i + 1, EntailmentLabel::ALL[i % 3]))
        .collect();
    Corpus {
        pos: sentences.clone(),
        chunk: sentences.clone(),
        dep: sentences,
        pairs,
    }
}
