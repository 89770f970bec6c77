//! IOBES chunk tags and span-level F1.

use std::collections::HashSet;

/// Chunk covering tokens `start..end`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl Span {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        Span {
            start,
            end,
            label: label.into(),
        }
    }
}

/// IOBES tags for `len` tokens. Spans must be non-empty, in bounds and
/// non-overlapping.
pub fn spans_to_tags(spans: &[Span], len: usize) -> Vec<String> {
    let mut tags = vec!["O".to_string(); len];
    for s in spans {
        debug_assert!(s.start < s.end && s.end <= len);
        if s.end - s.start == 1 {
            tags[s.start] = format!("S-{}", s.label);
            continue;
        }
        tags[s.start] = format!("B-{}", s.label);
        for t in &mut tags[s.start + 1..s.end - 1] {
            *t = format!("I-{}", s.label);
        }
        tags[s.end - 1] = format!("E-{}", s.label);
    }
    tags
}

fn split_tag(tag: &str) -> Option<(char, &str)> {
    let (prefix, label) = tag.split_once('-')?;
    
    
    let c = match prefix {
        "B" | "I" | "E" | "S" => prefix.chars().next()?,
        _ => return None,
    };
    if label.is_empty() {
        return None;
    }
    Some((c, label))
}

/// Decodes tags into spans. Never fails: an `I`/`E` that does not continue
/// an open span of its type opens a new one, `O` and unrecognized tags close
/// any open span, and a span still open at the end is closed there.
pub fn tags_to_spans<S: AsRef<str>>(tags: &[S]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (t, tag) in tags.iter().enumerate() {
        let tag = tag.as_ref();
        let Some((kind, label)) = split_tag(tag) else {
            if let Some((s, l)) = open.take() {
                spans.push(Span::new(s, t, l));
            }
            continue;
        };
        let continues = matches!(open, Some((_, l)) if l == label);
        match kind {
            'B' | 'S' => {
                if let Some((s, l)) = open.take() {
                    spans.push(Span::new(s, t, l));
                }
                if kind == 'S' {
                    spans.push(Span::new(t, t + 1, label));
                } else {
                    open = Some((t, label));
                }
            }
            'I' => {
                if !continues {
                    if let Some((s, l)) = open.take() {
                        spans.push(Span::new(s, t, l));
                    }
                    open = Some((t, label));
                }
            }
            _ => {
                let start = if continues {
                    open.take().map(|(s, _)| s).unwrap_or(t)
                } else {
                    if let Some((s, l)) = open.take() {
                        spans.push(Span::new(s, t, l));
                    }
                    t
                };
                spans.push(Span::new(start, t + 1, label));
            }
        }
    }
    if let Some((s, l)) = open {
        spans.push(Span::new(s, tags.len(), l));
    }
    spans
}

/// Exact-match span counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SpanCounts {
    pub correct: usize,
    pub gold: usize,
    pub predicted: usize,
}

impl SpanCounts {
    pub fn add_sentence(&mut self, gold: &[Span], predicted: &[Span]) {
        let g: HashSet<&Span> = gold.iter().collect();
        let p: HashSet<&Span> = predicted.iter().collect();
        self.correct += g.intersection(&p).count();
        self.gold += g.len();
        self.predicted += p.len();
    }

    /// `(precision, recall, F1)`; each is 0 when its denominator is 0.
    pub fn scores(&self) -> (f64, f64, f64) {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let p = ratio(self.correct, self.predicted);
        let r = ratio(self.correct, self.gold);
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        (p, r, f)
    }
}

/// Precision, recall and F1 over parallel lists of per-sentence spans.
pub fn chunk_f1(gold: &[Vec<Span>], predicted: &[Vec<Span>]) -> (f64, f64, f64) {
    let mut c = SpanCounts::default();
    for (g, p) in gold.iter().zip(predicted) {
        c.add_sentence(g, p);
    }
    c.scores()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn encode_examples() {
        assert_eq!(spans_to_tags(&[Span::new(1, 2, "NP")], 3), ["O", "S-NP", "O"]);
        assert_eq!(
            spans_to_tags(&[Span::new(0, 3, "VP")], 3),
            ["B-VP", "I-VP", "E-VP"]
        );
    }

    #[test]
    fn lenient_decode() {
        assert_eq!(tags_to_spans(&["B-NP", "O"]), [Span::new(0, 1, "NP")]);
        assert_eq!(tags_to_spans(&["I-NP", "E-NP"]), [Span::new(0, 2, "NP")]);
        assert_eq!(
            tags_to_spans(&["B-NP", "E-VP"]),
            [Span::new(0, 1, "NP"), Span::new(1, 2, "VP")]
        );
        assert_eq!(tags_to_spans(&["E-PP"]), [Span::new(0, 1, "PP")]);
        assert_eq!(
            tags_to_spans(&["B-NP", "I-NP", "B-VP"]),
            [Span::new(0, 2, "NP"), Span::new(2, 3, "VP")]
        );
        assert_eq!(
            tags_to_spans(&["I-NP", "I-VP", "X"]),
            [Span::new(0, 1, "NP"), Span::new(1, 2, "VP")]
        );
        assert!(tags_to_spans::<&str>(&[]).is_empty());
    }

    #[test]
    fn f1_examples() {
        let a = Span::new(0, 2, "NP");
        let b = Span::new(2, 3, "VP");
        let c = Span::new(3, 5, "PP");
        let gold = vec![vec![a.clone(), b.clone()]];
        assert_eq!(chunk_f1(&gold, &gold), (1.0, 1.0, 1.0));
        assert_eq!(chunk_f1(&gold, &[vec![c.clone()]]), (0.0, 0.0, 0.0));
        let (p, r, f) = chunk_f1(&gold, &[vec![a, c]]);
        assert_eq!((p, r, f), (0.5, 0.5, 0.5));
        assert_eq!(chunk_f1(&[vec![]], &[vec![]]), (0.0, 0.0, 0.0));
    }

    fn span_sets() -> impl Strategy<Value = (Vec<Span>, usize)> {
        // each segment: (gap before, length, label index)
        proptest::collection::vec((0usize..3, 1usize..5, 0usize..3), 0..8).prop_map(|segs| {
            let labels = ["NP", "VP", "PP"];
            let mut pos = 0;
            let mut spans = Vec::new();
            for (gap, len, l) in segs {
                pos += gap;
                spans.push(Span::new(pos, pos + len, labels[l]));
                pos += len;
            }
            (spans, pos + 1)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn round_trip((spans, len) in span_sets()) {
            let tags = spans_to_tags(&spans, len);
            prop_assert_eq!(tags_to_spans(&tags), spans);
        }

        #[test]
        fn swapping_swaps_precision_and_recall((a, la) in span_sets(), (b, lb) in span_sets()) {
            let _ = (la, lb);
            let (p1, r1, f1) = chunk_f1(std::slice::from_ref(&a), std::slice::from_ref(&b));
            let (p2, r2, f2) = chunk_f1(&[b], &[a]);
            prop_assert_eq!((p1, r1), (r2, p2));
            prop_assert!((f1 - f2).abs() < 1e-15);
        }
    }
}
