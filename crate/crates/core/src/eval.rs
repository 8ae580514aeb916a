//! Decoding and evaluation: per-row rankings, one-to-one assignments, MRR
//! and accuracy.
//!
//! Evaluation assumes the gold matching is the diagonal: statement `i` goes
//! with proof `i`. Corpus construction guarantees this because statements
//! and proofs are listed in the same pair order.

use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::assignment::{prune_topk, solve_dense, solve_sparse, Assignment};
use crate::matrix::ScoreMatrix;

/// Per-statement proof rankings plus the 1-based rank of each gold proof.
#[derive(Debug, Clone)]
pub struct RankingResult {
    rankings: Vec<Vec<usize>>,
    gold_ranks: Vec<usize>,
}

impl RankingResult {
    /// Ranked proof indices for statement `i`, best first.
    pub fn ranking(&self, i: usize) -> &[usize] {
        &self.rankings[i]
    }

    /// Top-ranked proof per statement. Distinct statements may share one.
    pub fn top_choices(&self) -> impl Iterator<Item = usize> + '_ {
        self.rankings.iter().map(|r| r[0])
    }

    /// 1-based rank of the gold (same-index) proof per statement.
    pub fn gold_ranks(&self) -> &[usize] {
        &self.gold_ranks
    }

    pub fn n(&self) -> usize {
        self.rankings.len()
    }

    /// Fraction of statements whose top-ranked proof is the gold one.
    pub fn accuracy(&self) -> f64 {
        if self.gold_ranks.is_empty() {
            return 0.0;
        }
        let hits = self.gold_ranks.iter().filter(|&&r| r == 1).count();
        hits as f64 / self.gold_ranks.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    EmptyInput,
    ZeroRank,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::EmptyInput => write!(f, "cannot evaluate an empty input"),
            EvalError::ZeroRank => write!(f, "ranks are 1-based; got 0"),
        }
    }
}

impl core::error::Error for EvalError {}

/// Mean reciprocal rank: the average of `1/rank` over all statements.
pub fn mrr(ranks: &[usize]) -> Result<f64, EvalError> {
    if ranks.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if ranks.iter().any(|&r| r == 0) {
        return Err(EvalError::ZeroRank);
    }
    let sum: f64 = ranks.iter().map(|&r| 1.0 / r as f64).sum();
    Ok(sum / ranks.len() as f64)
}

/// Sorts each row by decreasing score (ties: lower column first) and reads
/// off the gold rank. Ignores the one-to-one constraint.
pub fn decode_local(m: &ScoreMatrix) -> RankingResult {
    let n = m.n();
    let mut rankings = Vec::with_capacity(n);
    let mut gold_ranks = Vec::with_capacity(n);
    for i in 0..n {
        let row = m.row(i);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            row[b]
                .partial_cmp(&row[a])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        let gold = order.iter().position(|&j| j == i).expect("square matrix") + 1;
        rankings.push(order);
        gold_ranks.push(gold);
    }
    RankingResult {
        rankings,
        gold_ranks,
    }
}

/// Solves the assignment problem over `m`: exactly when `n <= k`, on the
/// top-k-pruned matrix otherwise. The flag reports whether pruning forced a
/// sentinel-augmented (degraded) solve.
pub fn decode_global(m: &ScoreMatrix, k: usize) -> (Assignment, bool) {
    if m.n() <= k {
        (solve_dense(m), false)
    } else {
        let sol = solve_sparse(&prune_topk(m, k));
        (sol.assignment, sol.degraded)
    }
}

/// Metrics for one evaluation set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    /// Mean reciprocal rank under local decoding.
    pub mrr: f64,
    /// Fraction of statements whose locally top-ranked proof is gold.
    pub accuracy_local: f64,
    /// Fraction of statements assigned their gold proof by global decoding.
    pub accuracy_global: f64,
    /// True when global decoding had to fall back to sentinel augmentation.
    pub degraded_global: bool,
}

/// Runs both decoders against the diagonal gold matching.
pub fn evaluate(m: &ScoreMatrix, k: usize) -> Result<EvalReport, EvalError> {
    if m.n() == 0 {
        return Err(EvalError::EmptyInput);
    }
    let local = decode_local(m);
    let mrr_local = mrr(local.gold_ranks())?;
    let (assignment, degraded) = decode_global(m, k);
    let hits = assignment
        .perm()
        .iter()
        .enumerate()
        .filter(|&(i, &j)| i == j)
        .count();
    Ok(EvalReport {
        n: m.n(),
        mrr: mrr_local,
        accuracy_local: local.accuracy(),
        accuracy_global: hits as f64 / m.n() as f64,
        degraded_global: degraded,
    })
}

/// How often each proof is picked as some statement's top choice under
/// local decoding: fractions picked by two or more statements, exactly one,
/// and none. The three fractions sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageHistogram {
    pub multi: f64,
    pub single: f64,
    pub unused: f64,
}

pub fn proof_usage_histogram(result: &RankingResult) -> UsageHistogram {
    let n = result.n();
    let mut counts = alloc::vec![0usize; n];
    for top in result.top_choices() {
        counts[top] += 1;
    }
    let multi = counts.iter().filter(|&&c| c >= 2).count();
    let single = counts.iter().filter(|&&c| c == 1).count();
    let unused = counts.iter().filter(|&&c| c == 0).count();
    UsageHistogram {
        multi: multi as f64 / n as f64,
        single: single as f64 / n as f64,
        unused: unused as f64 / n as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xoshiro256;
    use alloc::vec::Vec;

    #[test]
    fn mrr_of_perfect_system_is_one() {
        assert_eq!(mrr(&[1, 1, 1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn mrr_direct_formula() {
        let got = mrr(&[1, 2, 4]).unwrap();
        assert!((got - (1.0 + 0.5 + 0.25) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mrr_constant_rank_is_reciprocal() {
        for n in [1usize, 3, 17] {
            let ranks = alloc::vec![4usize; n];
            assert!((mrr(&ranks).unwrap() - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn mrr_rejects_empty_and_zero() {
        assert_eq!(mrr(&[]), Err(EvalError::EmptyInput));
        assert_eq!(mrr(&[1, 0]), Err(EvalError::ZeroRank));
    }

    #[test]
    fn local_decode_identity_matrix() {
        let m = ScoreMatrix::from_fn(4, |i, j| if i == j { 1.0 } else { 0.0 });
        let r = decode_local(&m);
        assert!(r.gold_ranks().iter().all(|&g| g == 1));
        assert_eq!(r.accuracy(), 1.0);
    }

    #[test]
    fn local_decode_constant_matrix_uses_tie_rule() {
        let m = ScoreMatrix::zeros(4);
        let r = decode_local(&m);
        // All rows rank proof 0 first, so the gold rank of statement i is i+1.
        for i in 0..4 {
            assert_eq!(r.ranking(i)[0], 0);
            assert_eq!(r.gold_ranks()[i], i + 1);
        }
    }

    #[test]
    fn local_decode_matches_per_row_sort_oracle() {
        let mut rng = Xoshiro256::from_seed(9);
        let m = ScoreMatrix::from_fn(6, |_, _| rng.uniform(-1.0, 1.0));
        let r = decode_local(&m);
        for i in 0..6 {
            let mut order: Vec<usize> = (0..6).collect();
            order.sort_by(|&a, &b| m.get(i, b).partial_cmp(&m.get(i, a)).unwrap());
            assert_eq!(r.ranking(i), order.as_slice());
        }
    }

    #[test]
    fn global_decode_small_equals_dense() {
        let mut rng = Xoshiro256::from_seed(10);
        let m = ScoreMatrix::from_fn(3, |_, _| rng.uniform(0.0, 1.0));
        let (a, degraded) = decode_global(&m, 500);
        assert!(!degraded);
        assert_eq!(a.perm(), solve_dense(&m).perm());
    }

    #[test]
    fn global_decode_identity_matrix_any_k() {
        let m = ScoreMatrix::from_fn(8, |i, j| if i == j { 1.0 } else { 0.0 });
        for k in [1usize, 3, 8, 100] {
            let (a, _) = decode_global(&m, k);
            assert_eq!(a.perm(), Assignment::identity(8).perm());
        }
    }

    #[test]
    fn global_decode_score_monotone_in_k() {
        let mut rng = Xoshiro256::from_seed(12);
        let m = ScoreMatrix::from_fn(50, |_, _| (rng.below(1000) as f64) - 500.0);
        let score = |k: usize| {
            let (a, _) = decode_global(&m, k);
            crate::assignment::assignment_score(&a, &m)
        };
        assert!(score(10) <= score(50));
    }

    #[test]
    fn evaluate_identity_matrix_is_perfect() {
        let m = ScoreMatrix::from_fn(5, |i, j| if i == j { 2.0 } else { -1.0 });
        let report = evaluate(&m, 500).unwrap();
        assert_eq!(report.mrr, 1.0);
        assert_eq!(report.accuracy_local, 1.0);
        assert_eq!(report.accuracy_global, 1.0);
        assert!(!report.degraded_global);
    }

    #[test]
    fn evaluate_antidiagonal_has_zero_local_accuracy() {
        let n = 6;
        let m = ScoreMatrix::from_fn(n, |i, j| if i + j == n - 1 { 5.0 } else { 0.0 });
        let report = evaluate(&m, 500).unwrap();
        assert_eq!(report.accuracy_local, 0.0);
    }

    #[test]
    fn accuracy_mrr_sandwich() {
        // accuracy <= mrr <= accuracy + (1 - accuracy)/2, since every
        // non-top gold contributes at most 1/2.
        let mut rng = Xoshiro256::from_seed(13);
        for _ in 0..50 {
            let m = ScoreMatrix::from_fn(7, |_, _| rng.uniform(-1.0, 1.0));
            let r = decode_local(&m);
            let acc = r.accuracy();
            let rank_mean = mrr(r.gold_ranks()).unwrap();
            assert!(acc <= rank_mean + 1e-12);
            assert!(rank_mean <= acc + (1.0 - acc) * 0.5 + 1e-12);
        }
    }

    #[test]
    fn histogram_identity_matrix() {
        let m = ScoreMatrix::from_fn(5, |i, j| if i == j { 1.0 } else { 0.0 });
        let h = proof_usage_histogram(&decode_local(&m));
        assert_eq!(h.multi, 0.0);
        assert_eq!(h.single, 1.0);
        assert_eq!(h.unused, 0.0);
    }

    #[test]
    fn histogram_constant_matrix() {
        let n = 5;
        let m = ScoreMatrix::zeros(n);
        let h = proof_usage_histogram(&decode_local(&m));
        // Everyone picks proof 0.
        assert_eq!(h.multi, 1.0 / n as f64);
        assert_eq!(h.single, 0.0);
        assert_eq!(h.unused, (n - 1) as f64 / n as f64);
    }

    #[test]
    fn histogram_matches_counting_oracle_and_sums_to_one() {
        let mut rng = Xoshiro256::from_seed(14);
        let m = ScoreMatrix::from_fn(9, |_, _| rng.uniform(0.0, 1.0));
        let r = decode_local(&m);
        let h = proof_usage_histogram(&r);
        let mut counts = [0usize; 9];
        for i in 0..9 {
            counts[r.ranking(i)[0]] += 1;
        }
        let multi = counts.iter().filter(|&&c| c >= 2).count() as f64 / 9.0;
        let single = counts.iter().filter(|&&c| c == 1).count() as f64 / 9.0;
        assert_eq!(h.multi, multi);
        assert_eq!(h.single, single);
        assert!((h.multi + h.single + h.unused - 1.0).abs() < 1e-15);
    }
}
