//! Dependency parsing: bilinear head selection, label classification,
//! greedy decoding with Eisner repair, and attachment scores.
//!
//! Heads are 1-based token positions with 0 for ROOT.

use rand::Rng;

use crate::error::{Error, GraphError, Result};
use crate::graph::{self, Graph, NodeId};
use crate::params::{ParamId, ParamKind, ParamStore};
use crate::taggers::TokenClassifier;
use crate::tensor::Tensor;

pub const ROOT: usize = 0;

/// Gold POS tags excluded from attachment scores.
pub const PUNCTUATION_TAGS: [&str; 5] = ["``", "''", ":", ",", "."];

/// Bilinear matrix `W_d`, root vector `r` and the label classifier over
/// `[h_t; h_head]`.
#[derive(Clone, Debug)]
pub struct DepParams {
    pub w_d: ParamId,
    pub root: ParamId,
    pub labels: TokenClassifier,
    pub width: usize,
}

impl DepParams {
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        owner_depth: usize,
        width: usize,
        hidden: usize,
        num_labels: usize,
        rng: &mut R,
    ) -> Self {
        let w_d = store.add(
            format!("{prefix}.w_d"),
            ParamKind::ClassifierWeight,
            owner_depth,
            Tensor::zeros(&[width, width]),
        );
        let root = store.add(
            format!("{prefix}.root"),
            ParamKind::ClassifierBias,
            owner_depth,
            Tensor::zeros(&[width]),
        );
        let labels = TokenClassifier::register(
            store,
            &format!("{prefix}.label"),
            owner_depth,
            2 * width,
            hidden,
            num_labels,
            rng,
        );
        DepParams {
            w_d,
            root,
            labels,
            width,
        }
    }

    /// Head candidates of token `t` (1-based) in scoring order: the other
    /// tokens left to right, then ROOT.
    pub fn candidates(t: usize, len: usize) -> Vec<usize> {
        (1..=len).filter(|&j| j != t).chain([ROOT]).collect()
    }

    /// Position of `head` among `candidates(t, len)`.
    pub fn candidate_index(t: usize, head: usize, len: usize) -> Option<usize> {
        if head == t || head > len {
            return None;
        }
        Some(match head {
            ROOT => len - 1,
            h if h < t => h - 1,
            h => h - 2,
        })
    }

    /// Scores `m(t, j) = h_t · (W_d h_j)` over `candidates(t, L)`.
    pub fn head_logits(
        &self,
        graph: &mut Graph,
        store: &ParamStore,
        states: &[NodeId],
        t: usize,
    ) -> Result<NodeId, GraphError> {
        let wd = graph.param(store, self.w_d);
        let v = graph.matmul(states[t - 1], wd)?;
        let mut scores = Vec::with_capacity(states.len());
        for j in Self::candidates(t, states.len()) {
            let hj = self.head_state(graph, store, states, j);
            scores.push(graph.matmul(v, hj)?);
        }
        graph.concat(&scores)
    }

    fn head_state(&self, graph: &mut Graph, store: &ParamStore, states: &[NodeId], head: usize) -> NodeId {
        if head == ROOT {
            graph.param(store, self.root)
        } else {
            states[head - 1]
        }
    }

    /// Label scores for token `t` attached to `head`.
    pub fn label_logits(
        &self,
        graph: &mut Graph,
        store: &ParamStore,
        states: &[NodeId],
        t: usize,
        head: usize,
        dropout: Option<(f64, u64)>,
    ) -> Result<NodeId, GraphError> {
        let hh = self.head_state(graph, store, states, head);
        let x = graph.concat(&[states[t - 1], hh])?;
        self.labels.logits(graph, store, x, dropout)
    }

    /// `P[t-1][j] = p(j | h_t)` with column 0 for ROOT and `P[t-1][t] = 0`.
    pub fn head_probabilities(&self, store: &ParamStore, states: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let len = states.len();
        let wd = store.get(self.w_d);
        let root = store.get(self.root).data();
        // W_d h_j for every head state
        let projected: Vec<Vec<f64>> = std::iter::once(root)
            .chain(states.iter().map(Vec::as_slice))
            .map(|h| (0..self.width).map(|r| graph::dot(wd.row(r), h)).collect())
            .collect();
        (1..=len)
            .map(|t| {
                let cands = Self::candidates(t, len);
                let scores: Vec<f64> = cands
                    .iter()
                    .map(|&j| graph::dot(&states[t - 1], &projected[j]))
                    .collect();
                let p = graph::softmax(&scores);
                let mut row = vec![0.0; len + 1];
                for (j, pj) in cands.into_iter().zip(p) {
                    row[j] = pj;
                }
                row
            })
            .collect()
    }

    /// Label distribution for token `t` attached to `head`.
    pub fn label_probabilities(&self, store: &ParamStore, states: &[Vec<f64>], t: usize, head: usize) -> Vec<f64> {
        let hh = if head == ROOT {
            store.get(self.root).data()
        } else {
            &states[head - 1]
        };
        let x: Vec<f64> = states[t - 1].iter().chain(hh).copied().collect();
        self.labels.predict(store, &x)
    }
}

/// Highest-probability head per token. Ties go to the earliest candidate,
/// so tokens win over ROOT.
pub fn greedy_heads(head_probs: &[Vec<f64>]) -> Vec<usize> {
    let len = head_probs.len();
    (1..=len)
        .map(|t| {
            let cands = DepParams::candidates(t, len);
            let scores: Vec<f64> = cands.iter().map(|&j| head_probs[t - 1][j]).collect();
            cands[graph::argmax(&scores)]
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TreeCheck {
    Ok,
    NoRoot,
    MultipleRoots,
    Cyclic,
}

/// Classifies a head assignment; checks run in the order no root,
/// multiple roots, cycle.
pub fn check_well_formed(heads: &[usize]) -> TreeCheck {
    let roots = heads.iter().filter(|&&h| h == ROOT).count();
    if roots == 0 {
        return TreeCheck::NoRoot;
    }
    if roots > 1 {
        return TreeCheck::MultipleRoots;
    }
    let len = heads.len();
    for start in 1..=len {
        let mut node = start;
        let mut steps = 0;
        while node != ROOT {
            node = heads[node - 1];
            if node > len {
                return TreeCheck::Cyclic;
            }
            steps += 1;
            if steps > len {
                return TreeCheck::Cyclic;
            }
        }
    }
    TreeCheck::Ok
}

/// Total score `Σ_m s[head(m)][m]`.
pub fn tree_score(scores: &[Vec<f64>], heads: &[usize]) -> f64 {
    heads
        .iter()
        .enumerate()
        .map(|(m, &h)| scores[h][m + 1])
        .sum()
}

/// Highest-scoring projective tree with exactly one child of ROOT.
///
/// `scores[h][m]` is the score of head `h` (0 = ROOT) for modifier `m`,
/// both indexed `0..=L`; row/column 0 as modifier and the diagonal are
/// ignored.
pub fn eisner_decode(scores: &[Vec<f64>]) -> Result<Vec<usize>> {
    let n = scores.len().saturating_sub(1);
    if n == 0 {
        return Err(Error::InvalidArgument("cannot decode an empty sentence".into()));
    }
    if scores.iter().any(|r| r.len() != n + 1) {
        return Err(Error::InvalidArgument("score matrix must be square".into()));
    }
    // token i (0-based) is position i + 1; s(h, m) over 0-based tokens
    let s = |h: usize, m: usize| scores[h + 1][m + 1];
    const NEG: f64 = f64::NEG_INFINITY;
    // [start][end][dir]: dir 0 = head at end, 1 = head at start
    let mut complete = vec![vec![[0.0f64; 2]; n]; n];
    let mut incomplete = vec![vec![[NEG; 2]; n]; n];
    let mut complete_bp = vec![vec![[0usize; 2]; n]; n];
    let mut incomplete_bp = vec![vec![[0usize; 2]; n]; n];
    for k in 1..n {
        for st in 0..n - k {
            let t = st + k;
            let mut best = NEG;
            let mut arg = st;
            for r in st..t {
                let v = complete[st][r][1] + complete[r + 1][t][0];
                if v > best || r == st {
                    best = v;
                    arg = r;
                }
            }
            incomplete[st][t][0] = best + s(t, st);
            incomplete[st][t][1] = best + s(st, t);
            incomplete_bp[st][t] = [arg, arg];

            let mut best = NEG;
            let mut arg = st;
            for r in st..t {
                let v = complete[st][r][0] + incomplete[r][t][0];
                if v > best || r == st {
                    best = v;
                    arg = r;
                }
            }
            complete[st][t][0] = best;
            complete_bp[st][t][0] = arg;

            let mut best = NEG;
            let mut arg = st + 1;
            for r in st + 1..=t {
                let v = incomplete[st][r][1] + complete[r][t][1];
                if v > best || r == st + 1 {
                    best = v;
                    arg = r;
                }
            }
            complete[st][t][1] = best;
            complete_bp[st][t][1] = arg;
        }
    }
    let mut best = NEG;
    let mut root_child = 0;
    for r in 0..n {
        let v = complete[0][r][0] + complete[r][n - 1][1] + scores[0][r + 1];
        if v > best || r == 0 {
            best = v;
            root_child = r;
        }
    }
    let mut heads = vec![ROOT; n];
    let mut stack = vec![(0, root_child, 0u8, true), (root_child, n - 1, 1u8, true)];
    while let Some((st, t, dir, is_complete)) = stack.pop() {
        if st == t {
            continue;
        }
        let d = dir as usize;
        if is_complete {
            let r = complete_bp[st][t][d];
            if d == 0 {
                stack.push((st, r, 0, true));
                stack.push((r, t, 0, false));
            } else {
                stack.push((st, r, 1, false));
                stack.push((r, t, 1, true));
            }
        } else {
            let r = incomplete_bp[st][t][d];
            if d == 0 {
                heads[st] = t + 1;
            } else {
                heads[t] = st + 1;
            }
            stack.push((st, r, 1, true));
            stack.push((r + 1, t, 0, true));
        }
    }
    Ok(heads)
}

/// Heads and labels for one sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct ParseResult {
    pub heads: Vec<usize>,
    pub labels: Vec<usize>,
    pub repaired: bool,
}

/// Greedy heads, replaced by the Eisner tree over `log p(head | token)`
/// when they do not form a tree. Labels are the argmax of `label_probs(t,
/// head)` for the final heads.
pub fn parse_sentence<F>(head_probs: &[Vec<f64>], mut label_probs: F) -> Result<ParseResult>
where
    F: FnMut(usize, usize) -> Vec<f64>,
{
    let len = head_probs.len();
    if len == 0 {
        return Err(Error::InvalidArgument("cannot parse an empty sentence".into()));
    }
    let mut heads = greedy_heads(head_probs);
    let mut repaired = false;
    if check_well_formed(&heads) != TreeCheck::Ok {
        let mut scores = vec![vec![f64::NEG_INFINITY; len + 1]; len + 1];
        for m in 1..=len {
            for h in 0..=len {
                if h != m {
                    scores[h][m] = head_probs[m - 1][h].ln();
                }
            }
        }
        heads = eisner_decode(&scores)?;
        repaired = true;
    }
    let labels = heads
        .iter()
        .enumerate()
        .map(|(i, &h)| graph::argmax(&label_probs(i + 1, h)))
        .collect();
    Ok(ParseResult {
        heads,
        labels,
        repaired,
    })
}

/// Running attachment counts over non-punctuation tokens.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AttachmentCounts {
    pub scored: usize,
    pub heads: usize,
    pub labeled: usize,
}

impl AttachmentCounts {
    #[allow(clippy::too_many_arguments)]
    pub fn add_sentence<S: AsRef<str>>(
        &mut self,
        gold_heads: &[usize],
        gold_labels: &[S],
        pred_heads: &[usize],
        pred_labels: &[S],
        gold_pos: &[S],
        punctuation: &[&str],
    ) -> Result<()> {
        let n = gold_heads.len();
        if [gold_labels.len(), pred_heads.len(), pred_labels.len(), gold_pos.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::LengthMismatch(format!(
                "attachment scoring needs aligned sequences of length {n}"
            )));
        }
        for i in 0..n {
            if punctuation.contains(&gold_pos[i].as_ref()) {
                continue;
            }
            self.scored += 1;
            if gold_heads[i] == pred_heads[i] {
                self.heads += 1;
                if gold_labels[i].as_ref() == pred_labels[i].as_ref() {
                    self.labeled += 1;
                }
            }
        }
        Ok(())
    }

    /// `(UAS, LAS)`, both 0 when nothing was scored.
    pub fn scores(&self) -> (f64, f64) {
        if self.scored == 0 {
            return (0.0, 0.0);
        }
        let n = self.scored as f64;
        (self.heads as f64 / n, self.labeled as f64 / n)
    }
}

/// UAS and LAS for one sentence with the default punctuation set.
pub fn attachment_scores<S: AsRef<str>>(
    gold_heads: &[usize],
    gold_labels: &[S],
    pred_heads: &[usize],
    pred_labels: &[S],
    gold_pos: &[S],
) -> Result<(f64, f64)> {
    let mut c = AttachmentCounts::default();
    c.add_sentence(gold_heads, gold_labels, pred_heads, pred_labels, gold_pos, &PUNCTUATION_TAGS)?;
    Ok(c.scores())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::check_gradients;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive search over single-root projective trees.
    fn brute_force(scores: &[Vec<f64>]) -> f64 {
        fn crosses(a: (usize, usize), b: (usize, usize)) -> bool {
            let (a0, a1) = (a.0.min(a.1), a.0.max(a.1));
            let (b0, b1) = (b.0.min(b.1), b.0.max(b.1));
            (a0 < b0 && b0 < a1 && a1 < b1) || (b0 < a0 && a0 < b1 && b1 < a1)
        }
        fn reaches_self(heads: &[usize], m: usize) -> bool {
            let mut node = heads[m - 1];
            let mut steps = 0;
            while node != ROOT && node != usize::MAX {
                if node == m {
                    return true;
                }
                node = heads[node - 1];
                steps += 1;
                if steps > heads.len() {
                    return true;
                }
            }
            false
        }
        fn go(scores: &[Vec<f64>], heads: &mut Vec<usize>, m: usize, roots: usize, acc: f64, best: &mut f64) {
            let n = heads.len();
            if m > n {
                if roots == 1 && acc > *best {
                    *best = acc;
                }
                return;
            }
            for h in 0..=n {
                if h == m || (h == ROOT && roots == 1) {
                    continue;
                }
                let arc = (h, m);
                let crossing = (1..m).any(|o| crosses(arc, (heads[o - 1], o)));
                if crossing {
                    continue;
                }
                heads[m - 1] = h;
                if !reaches_self(heads, m) {
                    let r = roots + usize::from(h == ROOT);
                    go(scores, heads, m + 1, r, acc + scores[h][m], best);
                }
                heads[m - 1] = usize::MAX;
            }
        }
        let n = scores.len() - 1;
        let mut heads = vec![usize::MAX; n];
        let mut best = f64::NEG_INFINITY;
        go(scores, &mut heads, 1, 0, 0.0, &mut best);
        best
    }

    fn random_log_probs(len: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        // normalize each modifier's column into log-probabilities
        let mut s = vec![vec![f64::NEG_INFINITY; len + 1]; len + 1];
        for m in 1..=len {
            let raw: Vec<f64> = (0..=len).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let cands: Vec<usize> = (0..=len).filter(|&h| h != m).collect();
            let lse = graph::log_sum_exp(&cands.iter().map(|&h| raw[h]).collect::<Vec<_>>());
            for h in cands {
                s[h][m] = raw[h] - lse;
            }
        }
        s
    }

    #[test]
    fn eisner_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let len = rng.gen_range(2..=8);
            let s = random_log_probs(len, &mut rng);
            let heads = eisner_decode(&s).unwrap();
            assert_eq!(check_well_formed(&heads), TreeCheck::Ok);
            let got = tree_score(&s, &heads);
            let want = brute_force(&s);
            assert!((got - want).abs() < 1e-12, "{got} vs {want} for {heads:?}");
        }
    }

    #[test]
    fn eisner_small_cases() {
        let s = vec![vec![f64::NEG_INFINITY, -0.5], vec![f64::NEG_INFINITY; 2]];
        assert_eq!(eisner_decode(&s).unwrap(), [ROOT]);
        let ni = f64::NEG_INFINITY;
        let s = vec![
            vec![ni, -0.1, -3.0],
            vec![ni, ni, -0.2],
            vec![ni, -2.0, ni],
        ];
        assert_eq!(eisner_decode(&s).unwrap(), [ROOT, 1]);
        assert!(eisner_decode(&[vec![0.0]]).is_err());
    }

    #[test]
    fn well_formedness_classes() {
        assert_eq!(check_well_formed(&[ROOT, 1, 1]), TreeCheck::Ok);
        assert_eq!(check_well_formed(&[2, 1]), TreeCheck::NoRoot);
        assert_eq!(check_well_formed(&[ROOT, 3, 2]), TreeCheck::Cyclic);
        assert_eq!(check_well_formed(&[ROOT, ROOT]), TreeCheck::MultipleRoots);
        assert_eq!(check_well_formed(&[ROOT, ROOT, 4, 3]), TreeCheck::MultipleRoots);
    }

    #[test]
    fn candidate_ordering() {
        assert_eq!(DepParams::candidates(2, 3), [1, 3, ROOT]);
        for t in 1..=4 {
            for (i, h) in DepParams::candidates(t, 4).into_iter().enumerate() {
                assert_eq!(DepParams::candidate_index(t, h, 4), Some(i));
            }
        }
        assert_eq!(DepParams::candidate_index(2, 2, 4), None);
    }

    fn setup(width: usize, labels: usize, seed: u64) -> (ParamStore, DepParams, ChaCha8Rng) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = DepParams::register(&mut store, "dep", 3, width, 5, labels, &mut rng);
        (store, p, rng)
    }

    fn randomize(store: &mut ParamStore, rng: &mut ChaCha8Rng) {
        let ids: Vec<ParamId> = store.ids().collect();
        for id in ids {
            for v in store.get_mut(id).data_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
    }

    #[test]
    fn head_distribution_examples() {
        let (store, p, _) = setup(2, 3, 0);
        let one = p.head_probabilities(&store, &[vec![0.3, 0.4]]);
        assert_eq!(one, vec![vec![1.0, 0.0]]);
        let three = p.head_probabilities(&store, &[vec![1.0, 0.0], vec![0.5, 0.5], vec![0.0, 2.0]]);
        for (t, row) in three.iter().enumerate() {
            assert_eq!(row[t + 1], 0.0);
            for (j, v) in row.iter().enumerate() {
                if j != t + 1 {
                    assert!((v - 1.0 / 3.0).abs() < 1e-15);
                }
            }
        }
        // m = [1, 0] over a token and ROOT
        let (mut store, p, _) = setup(1, 3, 0);
        store.get_mut(p.w_d).data_mut()[0] = 1.0;
        let probs = p.head_probabilities(&store, &[vec![1.0], vec![1.0]]);
        let e = std::f64::consts::E;
        assert!((probs[0][2] - e / (1.0 + e)).abs() < 1e-12);
        assert!((probs[0][0] - 0.268941).abs() < 1e-6);
    }

    #[test]
    fn graph_and_direct_scores_agree() {
        let (mut store, p, mut rng) = setup(3, 4, 5);
        randomize(&mut store, &mut rng);
        let states: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let direct = p.head_probabilities(&store, &states);
        let mut g = Graph::new();
        let nodes: Vec<NodeId> = states.iter().map(|s| g.constant_vector(s)).collect();
        let mut outs = Vec::new();
        for t in 1..=4 {
            let l = p.head_logits(&mut g, &store, &nodes, t).unwrap();
            outs.push(g.softmax(l).unwrap());
        }
        let lab = p.label_logits(&mut g, &store, &nodes, 2, ROOT, None).unwrap();
        let lab = g.softmax(lab).unwrap();
        g.forward(&store).unwrap();
        for t in 1..=4 {
            for (i, h) in DepParams::candidates(t, 4).into_iter().enumerate() {
                assert!((g.value(outs[t - 1])[i] - direct[t - 1][h]).abs() < 1e-12);
            }
            assert!((direct[t - 1].iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let want = p.label_probabilities(&store, &states, 2, ROOT);
        for (a, b) in g.value(lab).iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn label_distribution_edge_cases() {
        let (store, p, _) = setup(2, 4, 1);
        let states = vec![vec![0.2, 0.1], vec![-0.3, 0.8]];
        assert!(p.label_probabilities(&store, &states, 1, 2).iter().all(|v| (v - 0.25).abs() < 1e-15));
        let (mut store, p, mut rng) = setup(2, 1, 1);
        randomize(&mut store, &mut rng);
        assert_eq!(p.label_probabilities(&store, &states, 1, ROOT), [1.0]);
    }

    #[test]
    fn dep_objective_gradients() {
        let (mut store, p, mut rng) = setup(3, 3, 9);
        randomize(&mut store, &mut rng);
        let mut g = Graph::new();
        let nodes: Vec<NodeId> = (0..3)
            .map(|_| {
                let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                g.constant_vector(&v)
            })
            .collect();
        let gold = [2, ROOT, 2];
        let mut terms = Vec::new();
        for (i, &h) in gold.iter().enumerate() {
            let t = i + 1;
            let l = p.head_logits(&mut g, &store, &nodes, t).unwrap();
            let idx = DepParams::candidate_index(t, h, 3).unwrap();
            terms.push(g.cross_entropy(l, idx).unwrap());
            let ll = p.label_logits(&mut g, &store, &nodes, t, h, None).unwrap();
            terms.push(g.cross_entropy(ll, i % 3).unwrap());
        }
        let loss = g.add(&terms).unwrap();
        let err = check_gradients(&mut g, &mut store, loss, 1e-5).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn greedy_examples() {
        assert_eq!(greedy_heads(&[vec![1.0, 0.0]]), [ROOT]);
        // chain 1 <- 2 <- 3 with 1 -> ROOT
        let probs = vec![
            vec![0.8, 0.0, 0.1, 0.1],
            vec![0.1, 0.7, 0.0, 0.2],
            vec![0.1, 0.2, 0.7, 0.0],
        ];
        assert_eq!(greedy_heads(&probs), [ROOT, 1, 2]);
        // tie between token 2 and ROOT goes to the token
        assert_eq!(greedy_heads(&[vec![0.5, 0.0, 0.5], vec![1.0, 0.0, 0.0]]), [2, ROOT]);
    }

    #[test]
    fn parse_repairs_cycles() {
        let probs = vec![vec![0.5, 0.0, 0.5], vec![0.3, 0.7, 0.0]];
        // greedy: token 1 ties token 2 vs ROOT -> 2; token 2 -> 1: a cycle
        assert_eq!(check_well_formed(&greedy_heads(&probs)), TreeCheck::NoRoot);
        let r = parse_sentence(&probs, |_, _| vec![0.1, 0.9]).unwrap();
        assert!(r.repaired);
        assert_eq!(check_well_formed(&r.heads), TreeCheck::Ok);
        assert_eq!(r.heads[1], 1);
        assert_eq!(r.labels, [1, 1]);

        let ok = vec![vec![0.9, 0.0, 0.1], vec![0.2, 0.8, 0.0]];
        let r = parse_sentence(&ok, |t, h| if h == ROOT { vec![1.0, 0.0] } else { vec![0.0, t as f64] }).unwrap();
        assert!(!r.repaired);
        assert_eq!(r.heads, [ROOT, 1]);
        assert_eq!(r.labels, [0, 1]);
    }

    #[test]
    fn random_parses_are_trees_and_bounded_by_greedy_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let len = rng.gen_range(1..=9);
            let s = random_log_probs(len, &mut rng);
            let probs: Vec<Vec<f64>> = (1..=len)
                .map(|m| (0..=len).map(|h| if h == m { 0.0 } else { s[h][m].exp() }).collect())
                .collect();
            let greedy = greedy_heads(&probs);
            let r = parse_sentence(&probs, |_, _| vec![1.0]).unwrap();
            assert_eq!(check_well_formed(&r.heads), TreeCheck::Ok);
            if len > 1 {
                let e = eisner_decode(&s).unwrap();
                // greedy ignores the tree constraint, so it bounds every tree
                assert!(tree_score(&s, &greedy) >= tree_score(&s, &e) - 1e-12);
            }
        }
    }

    #[test]
    fn attachment_examples() {
        let pos = ["NN", "VB", ",", "DT", "NN", "IN", "NN", ".", "JJ", "NN"];
        let gold_heads = [2, 0, 2, 5, 2, 5, 6, 2, 10, 7];
        let labels = ["a"; 10];
        let mut pred = gold_heads;
        pred[2] = 1; // punctuation, ignored
        pred[4] = 3; // content token
        let (uas, las) = attachment_scores(&gold_heads, &labels, &pred, &labels, &pos).unwrap();
        assert_eq!(uas, 7.0 / 8.0);
        assert_eq!(las, 7.0 / 8.0);

        let wrong = ["b"; 10];
        let (uas, las) = attachment_scores(&gold_heads, &labels, &gold_heads, &wrong, &pos).unwrap();
        assert_eq!((uas, las), (1.0, 0.0));
        assert!(attachment_scores(&gold_heads[..3], &labels, &pred, &labels, &pos).is_err());
    }
}
