//! Exact maximum-weight bipartite matching (linear assignment).
//!
//! Both solvers follow the shortest-augmenting-path scheme with dual
//! potentials due to Jonker and Volgenant: rows are assigned one at a time
//! by finding a shortest alternating path to a free column under reduced
//! costs, then updating the duals. The dense solver scans all columns per
//! step (`O(n^3)` time, `O(n^2)` input memory); the sparse solver runs
//! Dijkstra over the kept edges with a binary heap, which is what makes
//! top-k-pruned decoding on large sets affordable.
//!
//! The classic formulation minimizes cost; scores are negated internally so
//! the public API maximizes, matching the decoding objective.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::matrix::{ScoreMatrix, SparseScoreMatrix};

/// Score assigned to edges removed by pruning when the pruned graph admits
/// no perfect matching and a sentinel-augmented solve is forced.
pub const MISSING_EDGE_SCORE: f64 = -1e9;

/// Absolute tolerance for dual-feasibility checks in debug builds.
pub const DUAL_EPS: f64 = 1e-10;

/// A one-to-one assignment of proofs (columns) to statements (rows):
/// `perm[i]` is the column assigned to row `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    perm: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NotAPermutation;

impl fmt::Display for NotAPermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "assignment is not a permutation")
    }
}

impl core::error::Error for NotAPermutation {}

impl Assignment {
    /// Validates that `perm` uses every column exactly once.
    pub fn from_perm(perm: Vec<usize>) -> Result<Self, NotAPermutation> {
        let n = perm.len();
        let mut used = vec![false; n];
        for &j in &perm {
            if j >= n || used[j] {
                return Err(NotAPermutation);
            }
            used[j] = true;
        }
        Ok(Self { perm })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            perm: (0..n).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Column assigned to row `i`.
    pub fn col_of(&self, i: usize) -> usize {
        self.perm[i]
    }

    /// Number of rows assigned their same-index column.
    pub fn fixed_points(&self) -> usize {
        self.perm.iter().enumerate().filter(|&(i, &j)| i == j).count()
    }

    fn from_solver(perm: Vec<usize>) -> Self {
        let a = Self { perm };
        debug_assert!(
            Assignment::from_perm(a.perm.clone()).is_ok(),
            "solver produced a non-permutation"
        );
        a
    }
}

/// Sum of the scores of the chosen edges.
pub fn assignment_score(assignment: &Assignment, m: &ScoreMatrix) -> f64 {
    assert_eq!(assignment.n(), m.n(), "dimension mismatch");
    assignment
        .perm()
        .iter()
        .enumerate()
        .map(|(i, &j)| m.get(i, j))
        .sum()
}

/// Maximum-weight assignment over a dense score matrix.
pub fn solve_dense(m: &ScoreMatrix) -> Assignment {
    debug_assert!(m.is_finite(), "score matrix must be finite");
    match dense_core(m.n(), |i, j| -m.get(i, j)) {
        Some(perm) => Assignment::from_solver(perm),
        // A finite dense matrix always admits a perfect matching.
        None => unreachable!("dense assignment cannot be infeasible"),
    }
}

/// Keeps the `min(k, n)` largest entries of each row. Ties are broken in
/// favor of the lower column index.
pub fn prune_topk(m: &ScoreMatrix, k: usize) -> SparseScoreMatrix {
    assert!(k >= 1, "k must be at least 1");
    let n = m.n();
    let keep = k.min(n);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            m.get(i, b)
                .partial_cmp(&m.get(i, a))
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut kept: Vec<(usize, f64)> = order[..keep].iter().map(|&j| (j, m.get(i, j))).collect();
        kept.sort_by_key(|&(j, _)| j);
        rows.push(kept);
    }
    SparseScoreMatrix::from_rows(n, rows)
}

/// Result of a sparse solve. `degraded` is set when the pruned graph had no
/// perfect matching and missing edges were filled in at
/// [`MISSING_EDGE_SCORE`] to force one.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution {
    pub assignment: Assignment,
    pub degraded: bool,
}

/// Maximum-weight assignment restricted to the kept edges of `s`. Missing
/// edges are treated as score `-inf`; if that leaves no perfect matching,
/// they are instead given [`MISSING_EDGE_SCORE`] and the solution is flagged
/// degraded.
pub fn solve_sparse(s: &SparseScoreMatrix) -> SparseSolution {
    if let Some(perm) = sparse_core(s) {
        return SparseSolution {
            assignment: Assignment::from_solver(perm),
            degraded: false,
        };
    }
    // Fallback: logically complete the matrix with a large negative score
    // so evaluation still produces a full one-to-one assignment.
    let perm = dense_core(s.n(), |i, j| -s.get(i, j).unwrap_or(MISSING_EDGE_SCORE))
        .expect("sentinel-augmented assignment is always feasible");
    SparseSolution {
        assignment: Assignment::from_solver(perm),
        degraded: true,
    }
}

/// Shortest-augmenting-path assignment over a dense cost function
/// (minimization). Returns `None` when no perfect matching of finite cost
/// exists.
fn dense_core(n: usize, cost: impl Fn(usize, usize) -> f64) -> Option<Vec<usize>> {
    if n == 0 {
        return Some(Vec::new());
    }
    let mut u = vec![0.0; n]; // row duals
    let mut v = vec![0.0; n]; // column duals
    let mut col_of_row = vec![usize::MAX; n];
    let mut row_of_col = vec![usize::MAX; n];
    let mut path = vec![usize::MAX; n]; // predecessor row per column
    let mut dist = vec![0.0f64; n];
    let mut visited_row = vec![false; n];
    let mut visited_col = vec![false; n];
    let mut remaining = vec![0usize; n];

    for cur_row in 0..n {
        for x in dist.iter_mut() {
            *x = f64::INFINITY;
        }
        for x in visited_row.iter_mut() {
            *x = false;
        }
        for x in visited_col.iter_mut() {
            *x = false;
        }
        for (it, r) in remaining.iter_mut().enumerate() {
            *r = it;
        }
        let mut num_remaining = n;
        let mut min_val = 0.0;
        let mut sink = usize::MAX;
        let mut i = cur_row;

        while sink == usize::MAX {
            visited_row[i] = true;
            let mut lowest = f64::INFINITY;
            let mut index = usize::MAX;
            for it in 0..num_remaining {
                let j = remaining[it];
                let r = min_val + cost(i, j) - u[i] - v[j];
                if r < dist[j] {
                    path[j] = i;
                    dist[j] = r;
                }
                // On ties, prefer a free column so the path terminates.
                if dist[j] < lowest || (dist[j] == lowest && row_of_col[j] == usize::MAX) {
                    lowest = dist[j];
                    index = it;
                }
            }
            min_val = lowest;
            if !min_val.is_finite() {
                return None;
            }
            let j = remaining[index];
            if row_of_col[j] == usize::MAX {
                sink = j;
            } else {
                i = row_of_col[j];
            }
            visited_col[j] = true;
            num_remaining -= 1;
            remaining[index] = remaining[num_remaining];
        }

        u[cur_row] += min_val;
        for i2 in 0..n {
            if visited_row[i2] && i2 != cur_row {
                u[i2] += min_val - dist[col_of_row[i2]];
            }
        }
        for j in 0..n {
            if visited_col[j] {
                v[j] -= min_val - dist[j];
            }
        }

        augment(&mut col_of_row, &mut row_of_col, &path, sink, cur_row);
    }
    Some(col_of_row)
}

/// Min-heap entry for the sparse Dijkstra.
#[derive(Debug, PartialEq)]
struct HeapEntry {
    dist: f64,
    col: usize,
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed so BinaryHeap pops the smallest distance first.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.col.cmp(&self.col))
    }
}

/// Sparse variant: Dijkstra over adjacency lists with lazy heap deletion.
fn sparse_core(s: &SparseScoreMatrix) -> Option<Vec<usize>> {
    let n = s.n();
    if n == 0 {
        return Some(Vec::new());
    }
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut col_of_row = vec![usize::MAX; n];
    let mut row_of_col = vec![usize::MAX; n];
    let mut path = vec![usize::MAX; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut done_col = vec![false; n];
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();

    for cur_row in 0..n {
        for x in dist.iter_mut() {
            *x = f64::INFINITY;
        }
        for x in done_col.iter_mut() {
            *x = false;
        }
        heap.clear();
        let mut visited_rows: Vec<usize> = Vec::new();
        let mut visited_cols: Vec<usize> = Vec::new();
        let mut min_val = 0.0;
        let mut sink = usize::MAX;
        let mut i = cur_row;

        while sink == usize::MAX {
            visited_rows.push(i);
            for &(j, score) in s.row(i) {
                if done_col[j] {
                    continue;
                }
                let r = min_val + (-score) - u[i] - v[j];
                if r < dist[j] {
                    dist[j] = r;
                    path[j] = i;
                    heap.push(HeapEntry { dist: r, col: j });
                }
            }
            // Pop until a live entry surfaces.
            let j = loop {
                let entry = heap.pop()?; // empty heap: no augmenting path
                if done_col[entry.col] || entry.dist > dist[entry.col] {
                    continue;
                }
                min_val = entry.dist;
                break entry.col;
            };
            done_col[j] = true;
            visited_cols.push(j);
            if row_of_col[j] == usize::MAX {
                sink = j;
            } else {
                i = row_of_col[j];
            }
        }

        u[cur_row] += min_val;
        for &i2 in &visited_rows {
            if i2 != cur_row {
                u[i2] += min_val - dist[col_of_row[i2]];
            }
        }
        for &j in &visited_cols {
            v[j] -= min_val - dist[j];
        }

        augment(&mut col_of_row, &mut row_of_col, &path, sink, cur_row);
    }
    Some(col_of_row)
}

/// Flips the alternating path ending at the free column `sink`.
fn augment(
    col_of_row: &mut [usize],
    row_of_col: &mut [usize],
    path: &[usize],
    sink: usize,
    cur_row: usize,
) {
    let mut j = sink;
    loop {
        let i = path[j];
        row_of_col[j] = i;
        core::mem::swap(&mut col_of_row[i], &mut j);
        if i == cur_row {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xoshiro256;
    use alloc::vec::Vec;

    /// Exhaustive maximum over all permutations (Heap's algorithm).
    fn brute_force_best(m: &ScoreMatrix) -> f64 {
        fn go(k: usize, perm: &mut Vec<usize>, m: &ScoreMatrix, best: &mut f64) {
            if k == 1 {
                let score: f64 = perm.iter().enumerate().map(|(i, &j)| m.get(i, j)).sum();
                if score > *best {
                    *best = score;
                }
                return;
            }
            for i in 0..k {
                go(k - 1, perm, m, best);
                if k % 2 == 0 {
                    perm.swap(i, k - 1);
                } else {
                    perm.swap(0, k - 1);
                }
            }
        }
        let mut perm: Vec<usize> = (0..m.n()).collect();
        let mut best = f64::NEG_INFINITY;
        go(m.n(), &mut perm, m, &mut best);
        best
    }

    /// Best score over permutations that only use kept edges.
    fn brute_force_best_restricted(s: &SparseScoreMatrix) -> Option<f64> {
        fn go(row: usize, used: &mut [bool], acc: f64, s: &SparseScoreMatrix, best: &mut Option<f64>) {
            if row == s.n() {
                *best = Some(best.map_or(acc, |b: f64| b.max(acc)));
                return;
            }
            for &(j, score) in s.row(row) {
                if !used[j] {
                    used[j] = true;
                    go(row + 1, used, acc + score, s, best);
                    used[j] = false;
                }
            }
        }
        let mut used = vec![false; s.n()];
        let mut best = None;
        go(0, &mut used, 0.0, s, &mut best);
        best
    }

    fn random_int_matrix(rng: &mut Xoshiro256, n: usize, lo: i64, hi: i64) -> ScoreMatrix {
        ScoreMatrix::from_fn(n, |_, _| (lo + rng.below((hi - lo + 1) as u64) as i64) as f64)
    }

    #[test]
    fn identity_matrix_gives_identity_permutation() {
        let m = ScoreMatrix::from_fn(5, |i, j| if i == j { 1.0 } else { 0.0 });
        let a = solve_dense(&m);
        assert_eq!(a.perm(), &[0, 1, 2, 3, 4]);
        assert_eq!(assignment_score(&a, &m), 5.0);
    }

    #[test]
    fn one_by_one() {
        let m = ScoreMatrix::from_values(1, vec![3.5]);
        let a = solve_dense(&m);
        assert_eq!(assignment_score(&a, &m), 3.5);
    }

    #[test]
    fn two_by_two_tie() {
        // [[1,2],[3,4]]: both permutations score 5.
        let m = ScoreMatrix::from_values(2, vec![1.0, 2.0, 3.0, 4.0]);
        let a = solve_dense(&m);
        assert_eq!(assignment_score(&a, &m), 5.0);
    }

    #[test]
    fn assignment_score_matches_summation_oracle() {
        let mut rng = Xoshiro256::from_seed(5);
        let m = ScoreMatrix::from_fn(6, |_, _| rng.uniform(-1.0, 1.0));
        let mut perm: Vec<usize> = (0..6).collect();
        rng.shuffle(&mut perm);
        let expected: f64 = perm.iter().enumerate().map(|(i, &j)| m.get(i, j)).sum();
        let a = Assignment::from_perm(perm).unwrap();
        assert_eq!(assignment_score(&a, &m), expected);
    }

    #[test]
    fn dense_matches_brute_force_small() {
        let mut rng = Xoshiro256::from_seed(100);
        for n in 2..=7 {
            for _ in 0..40 {
                let m = random_int_matrix(&mut rng, n, -20, 20);
                let a = solve_dense(&m);
                assert_eq!(assignment_score(&a, &m), brute_force_best(&m), "n={n}");
            }
        }
    }

    #[test]
    fn dense_handles_negative_real_scores() {
        let mut rng = Xoshiro256::from_seed(8);
        for _ in 0..50 {
            let m = ScoreMatrix::from_fn(6, |_, _| rng.uniform(-5.0, 5.0));
            let a = solve_dense(&m);
            assert!((assignment_score(&a, &m) - brute_force_best(&m)).abs() < 1e-9);
        }
    }

    #[test]
    fn shift_invariance() {
        let mut rng = Xoshiro256::from_seed(21);
        let m = random_int_matrix(&mut rng, 6, 0, 50);
        let c = 7.0;
        let shifted = ScoreMatrix::from_fn(6, |i, j| m.get(i, j) + c);
        let base = assignment_score(&solve_dense(&m), &m);
        let shift = assignment_score(&solve_dense(&shifted), &shifted);
        assert_eq!(shift, base + 6.0 * c);
    }

    #[test]
    fn prune_keeps_everything_when_k_ge_n() {
        let mut rng = Xoshiro256::from_seed(30);
        let m = random_int_matrix(&mut rng, 5, 0, 9);
        let s = prune_topk(&m, 9);
        for i in 0..5 {
            assert_eq!(s.row(i).len(), 5);
        }
    }

    #[test]
    fn prune_k1_keeps_row_argmax_with_low_column_ties() {
        let m = ScoreMatrix::from_values(3, vec![1.0, 5.0, 5.0, 2.0, 2.0, 1.0, 0.0, 0.0, 0.0]);
        let s = prune_topk(&m, 1);
        assert_eq!(s.row(0), &[(1, 5.0)]); // tie between cols 1,2 -> col 1
        assert_eq!(s.row(1), &[(0, 2.0)]);
        assert_eq!(s.row(2), &[(0, 0.0)]);
    }

    #[test]
    fn prune_matches_sort_and_take_oracle() {
        let mut rng = Xoshiro256::from_seed(31);
        let m = random_int_matrix(&mut rng, 10, 0, 99);
        let k = 3;
        let s = prune_topk(&m, k);
        for i in 0..10 {
            let mut cols: Vec<usize> = (0..10).collect();
            cols.sort_by(|&a, &b| {
                m.get(i, b)
                    .partial_cmp(&m.get(i, a))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut expected: Vec<(usize, f64)> =
                cols[..k].iter().map(|&j| (j, m.get(i, j))).collect();
            expected.sort_by_key(|&(j, _)| j);
            assert_eq!(s.row(i), expected.as_slice());
        }
    }

    #[test]
    fn sparse_unpruned_equals_dense() {
        let mut rng = Xoshiro256::from_seed(40);
        for _ in 0..20 {
            let m = random_int_matrix(&mut rng, 12, -50, 50);
            let dense = assignment_score(&solve_dense(&m), &m);
            let sol = solve_sparse(&prune_topk(&m, 12));
            assert!(!sol.degraded);
            assert_eq!(assignment_score(&sol.assignment, &m), dense);
        }
    }

    #[test]
    fn sparse_k1_returns_argmax_permutation_when_it_is_one() {
        // Row argmaxes form the permutation (1, 2, 0).
        let m = ScoreMatrix::from_values(3, vec![0.0, 9.0, 1.0, 2.0, 0.0, 9.0, 9.0, 1.0, 0.0]);
        let sol = solve_sparse(&prune_topk(&m, 1));
        assert!(!sol.degraded);
        assert_eq!(sol.assignment.perm(), &[1, 2, 0]);
    }

    #[test]
    fn sparse_matches_restricted_brute_force() {
        let mut rng = Xoshiro256::from_seed(41);
        let mut feasible_seen = 0;
        for _ in 0..200 {
            let m = random_int_matrix(&mut rng, 8, -20, 20);
            let s = prune_topk(&m, 4);
            if let Some(best) = brute_force_best_restricted(&s) {
                feasible_seen += 1;
                let sol = solve_sparse(&s);
                assert!(!sol.degraded);
                let score: f64 = sol
                    .assignment
                    .perm()
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| s.get(i, j).expect("solution uses a pruned edge"))
                    .sum();
                assert_eq!(score, best);
            }
        }
        assert!(feasible_seen > 100, "too few feasible instances to be meaningful");
    }

    #[test]
    fn infeasible_pruning_degrades_but_stays_a_permutation() {
        // Both rows keep only column 0.
        let m = ScoreMatrix::from_values(2, vec![5.0, 0.0, 6.0, 0.0]);
        let s = prune_topk(&m, 1);
        let sol = solve_sparse(&s);
        assert!(sol.degraded);
        assert!(Assignment::from_perm(sol.assignment.perm().to_vec()).is_ok());
        // One edge is real, the other sentinel; the real edge should be the
        // more valuable row.
        let score: f64 = sol
            .assignment
            .perm()
            .iter()
            .enumerate()
            .map(|(i, &j)| s.get(i, j).unwrap_or(MISSING_EDGE_SCORE))
            .sum();
        assert_eq!(score, 6.0 + MISSING_EDGE_SCORE);
    }

    #[test]
    fn pruning_monotone_in_k() {
        let mut rng = Xoshiro256::from_seed(77);
        for _ in 0..10 {
            let m = random_int_matrix(&mut rng, 20, -100, 100);
            let mut prev = f64::NEG_INFINITY;
            for k in [1usize, 2, 5, 10, 20] {
                let sol = solve_sparse(&prune_topk(&m, k));
                let score: f64 = sol
                    .assignment
                    .perm()
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| {
                        prune_topk(&m, k).get(i, j).unwrap_or(MISSING_EDGE_SCORE)
                    })
                    .sum();
                assert!(score >= prev, "k={k}: {score} < {prev}");
                prev = score;
            }
            assert_eq!(prev, assignment_score(&solve_dense(&m), &m));
        }
    }

    #[test]
    fn from_perm_rejects_non_permutations() {
        assert!(Assignment::from_perm(vec![0, 0]).is_err());
        assert!(Assignment::from_perm(vec![0, 2]).is_err());
        assert!(Assignment::from_perm(vec![1, 0, 2]).is_ok());
    }
}
