//! Maximum spanning arborescence decoding (Chu-Liu/Edmonds) and label
//! assignment.
//!
//! Ties between equally scoring trees are broken towards the
//! lexicographically smallest head array, i.e. lower head indices win for
//! earlier tokens. This is done exactly by carrying a secondary integer weight
//! `-h * (n+1)^(n-d)` on every arc (d, h): its sum over a tree encodes the head
//! array in base n+1, so it is unique per tree. Single-root decoding adds a
//! third, most significant component that penalizes every root attachment, so
//! the optimum uses exactly one. The brute-force oracle applies the same order.

use std::cmp::Ordering;
use std::ops::{Add, Sub};

use ndarray::Array2;

use crate::error::{invalid, Result};
use crate::treebank::validate_heads;

/// Scores for attaching dependent `d` (1-based) to head `h` (0 = root).
/// Backed by an `(n+1) x n` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ArcScoreMatrix {
    scores: Array2<f64>,
}

impl ArcScoreMatrix {
    pub fn new(scores: Array2<f64>) -> Result<Self> {
        let (rows, cols) = scores.dim();
        if rows != cols + 1 {
            return invalid(format!(
                "arc score matrix must be (n+1) x n, got {rows} x {cols}"
            ));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return invalid("arc score matrix has non-finite entries");
        }
        Ok(ArcScoreMatrix { scores })
    }

    /// Build from a closure `f(head, dependent)` with 1-based dependents.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(Array2::from_shape_fn((n + 1, n), |(h, d)| f(h, d + 1)))
    }

    /// Sentence length.
    pub fn len(&self) -> usize {
        self.scores.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn score(&self, head: usize, dep: usize) -> f64 {
        self.scores[[head, dep - 1]]
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.scores
    }

    /// Sum of arc scores of a head array (`heads[d-1]` heads token d).
    pub fn tree_score(&self, heads: &[usize]) -> f64 {
        heads
            .iter()
            .enumerate()
            .map(|(i, &h)| self.score(h, i + 1))
            .sum()
    }
}

/// Lexicographically ordered arc weight: root penalty, score, tie-break.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Weight {
    roots: i64,
    score: f64,
    tie: i128,
}

impl Add for Weight {
    type Output = Weight;
    fn add(self, o: Weight) -> Weight {
        Weight {
            roots: self.roots + o.roots,
            score: self.score + o.score,
            tie: self.tie + o.tie,
        }
    }
}

impl Sub for Weight {
    type Output = Weight;
    fn sub(self, o: Weight) -> Weight {
        Weight {
            roots: self.roots - o.roots,
            score: self.score - o.score,
            tie: self.tie - o.tie,
        }
    }
}

impl Weight {
    fn cmp(&self, o: &Weight) -> Ordering {
        self.roots
            .cmp(&o.roots)
            .then(self.score.total_cmp(&o.score))
            .then(self.tie.cmp(&o.tie))
    }
}

/// Largest n whose tie-break weights fit in an i128.
const MAX_EXACT_TIE_N: usize = 24;

fn arc_weights(scores: &ArcScoreMatrix, single_root: bool) -> Vec<Vec<Option<Weight>>> {
    let n = scores.len();
    let exact = n <= MAX_EXACT_TIE_N;
    let base = (n + 1) as i128;
    let mut w = vec![vec![None; n + 1]; n + 1];
    for (h, row) in w.iter_mut().enumerate() {
        for d in 1..=n {
            if h == d {
                continue;
            }
            let tie = if exact {
                -(h as i128) * base.pow((n - d) as u32)
            } else {
                0
            };
            row[d] = Some(Weight {
                roots: if single_root && h == 0 { -1 } else { 0 },
                score: scores.score(h, d),
                tie,
            });
        }
    }
    w
}

fn better(candidate: Weight, best: Option<Weight>) -> bool {
    match best {
        None => true,
        Some(b) => candidate.cmp(&b) == Ordering::Greater,
    }
}

/// Find a cycle among `parent` links (node 0 is the root and has none).
fn find_cycle(parent: &[usize]) -> Option<Vec<usize>> {
    let m = parent.len();
    // 0 = unvisited, 1 = on current path, 2 = done
    let mut state = vec![0u8; m];
    state[0] = 2;
    for start in 1..m {
        let mut path = Vec::new();
        let mut node = start;
        while state[node] == 0 {
            state[node] = 1;
            path.push(node);
            node = parent[node];
        }
        if state[node] == 1 {
            let pos = path.iter().position(|&v| v == node).unwrap();
            return Some(path[pos..].to_vec());
        }
        for v in path {
            state[v] = 2;
        }
    }
    None
}

/// Recursive contraction on a dense graph with nodes `0..w.len()`.
/// Returns `parent[v]` for every node (entry 0 unused).
fn cle(w: &[Vec<Option<Weight>>]) -> Vec<usize> {
    let m = w.len();
    let mut parent = vec![0usize; m];
    for v in 1..m {
        let mut best: Option<Weight> = None;
        for (u, row) in w.iter().enumerate() {
            if let Some(weight) = row[v] {
                if better(weight, best) {
                    best = Some(weight);
                    parent[v] = u;
                }
            }
        }
    }

    let Some(cycle) = find_cycle(&parent) else {
        return parent;
    };

    let mut in_cycle = vec![false; m];
    for &v in &cycle {
        in_cycle[v] = true;
    }
    // Non-cycle nodes keep their relative order; the cycle becomes the last node.
    let mut kept = Vec::new();
    for v in 0..m {
        if !in_cycle[v] {
            kept.push(v);
        }
    }
    let c = kept.len();
    let m2 = c + 1;

    let mut w2 = vec![vec![None; m2]; m2];
    let mut enter = vec![usize::MAX; m2]; // for new source u: cycle node entered
    let mut leave = vec![usize::MAX; m2]; // for new target v: cycle node left from

    for (nu, &u) in kept.iter().enumerate() {
        for (nv, &v) in kept.iter().enumerate() {
            w2[nu][nv] = w[u][v];
        }
        // u -> cycle: best of w[u][v] - w[parent[v]][v]
        let mut best: Option<Weight> = None;
        for &v in &cycle {
            if let (Some(into), Some(inner)) = (w[u][v], w[parent[v]][v]) {
                let adjusted = into - inner;
                if better(adjusted, best) {
                    best = Some(adjusted);
                    enter[nu] = v;
                }
            }
        }
        w2[nu][c] = best;
    }
    for (nv, &v) in kept.iter().enumerate().skip(1) {
        let mut best: Option<Weight> = None;
        for &u in &cycle {
            if let Some(weight) = w[u][v] {
                if better(weight, best) {
                    best = Some(weight);
                    leave[nv] = u;
                }
            }
        }
        w2[c][nv] = best;
    }

    let sub = cle(&w2);

    let mut result = parent.clone();
    for (nv, &v) in kept.iter().enumerate().skip(1) {
        let np = sub[nv];
        result[v] = if np == c { leave[nv] } else { kept[np] };
    }
    let source = sub[c];
    let entered = enter[source];
    result[entered] = kept[source];
    result
}

/// Maximum-score arborescence rooted at node 0.
///
/// With `single_root`, exactly one token attaches to the root. Returns
/// `heads` with `heads[d-1]` the head of token d.
pub fn chu_liu_edmonds(scores: &ArcScoreMatrix, single_root: bool) -> Result<Vec<usize>> {
    let n = scores.len();
    if n == 0 {
        return invalid("cannot decode an empty sentence");
    }
    let parent = cle(&arc_weights(scores, single_root));
    Ok(parent[1..].to_vec())
}

/// Largest sentence the exhaustive oracle accepts.
pub const BRUTE_FORCE_MAX_N: usize = 8;

/// Exhaustive search over all head arrays; same objective and tie-break as
/// [`chu_liu_edmonds`].
pub fn brute_force_mst(scores: &ArcScoreMatrix, single_root: bool) -> Result<Vec<usize>> {
    let n = scores.len();
    if n == 0 {
        return invalid("cannot decode an empty sentence");
    }
    if n > BRUTE_FORCE_MAX_N {
        return invalid(format!(
            "brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}"
        ));
    }
    let mut heads = vec![0usize; n];
    let mut best: Option<(Vec<usize>, f64)> = None;
    // Enumerate in lexicographic order so the first maximum is the
    // lexicographically smallest.
    loop {
        let report = validate_heads(&heads);
        if report.acyclic && report.heads_in_range && (!single_root || report.roots == 1) {
            let total = scores.tree_score(&heads);
            if best.as_ref().map_or(true, |(_, b)| total > *b) {
                best = Some((heads.clone(), total));
            }
        }
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(best.expect("a chain is always a valid tree").0);
            }
            pos -= 1;
            if heads[pos] < n {
                heads[pos] += 1;
                break;
            }
            heads[pos] = 0;
        }
    }
}

/// Per-dependent argmax over label scores (`n x labels`), ties to the lowest
/// label id.
pub fn assign_labels(label_scores: &Array2<f64>, heads: &[usize]) -> Result<Vec<usize>> {
    if label_scores.nrows() != heads.len() {
        return invalid(format!(
            "label scores have {} rows for {} tokens",
            label_scores.nrows(),
            heads.len()
        ));
    }
    Ok(label_scores
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &s) in row.iter().enumerate() {
                if s > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect())
}
