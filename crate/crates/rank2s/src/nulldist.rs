//! Null-distribution engines for the rank statistics.
//!
//! Under the null every assignment of m of the pooled ranks 1..=N to the X
//! group is equally likely, so the null law of any rank statistic is a
//! discrete distribution over C(N,m) outcomes. Every enumerable statistic
//! here takes values num/denom on a fixed integer grid; both the exact and
//! the Monte-Carlo engines aggregate integer numerators, which keeps
//! distributions bit-exact across runs and lets moments be computed in
//! integer arithmetic.

use crate::error::{Error, Result};
use crate::rank::RankedPool;
use crate::stats::StatisticKind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Default cap on the number of exact-enumeration evaluations.
pub const DEFAULT_ENUMERATION_CAP: u64 = 20_000_000;

/// Result of one hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic_value: f64,
    pub p_value: f64,
    pub method: StatisticKind,
    pub null_model: String,
    pub m: usize,
    pub n: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullKind {
    Exact,
    MonteCarlo,
}

/// Discrete null distribution of a rank statistic: sorted support values
/// (stored as integer numerators over a fixed denominator) with outcome
/// counts. `total` is C(N,m) for the exact kind and the replicate count for
/// the Monte-Carlo kind.
#[derive(Debug, Clone, PartialEq)]
pub struct NullDistribution {
    kind: NullKind,
    statistic: StatisticKind,
    m: usize,
    n: usize,
    numerators: Vec<i64>,
    counts: Vec<u64>,
    suffix: Vec<u64>, // suffix[i] = counts[i] + counts[i+1] + ...
    denom: u64,
    total: u64,
    seed: Option<u64>,
}

impl NullDistribution {
    pub(crate) fn from_support(
        kind: NullKind,
        statistic: StatisticKind,
        m: usize,
        n: usize,
        support: BTreeMap<i64, u64>,
        denom: u64,
        seed: Option<u64>,
    ) -> Self {
        let numerators: Vec<i64> = support.keys().copied().collect();
        let counts: Vec<u64> = support.values().copied().collect();
        let mut suffix = vec![0u64; counts.len() + 1];
        for i in (0..counts.len()).rev() {
            suffix[i] = suffix[i + 1] + counts[i];
        }
        let total = suffix[0];
        Self {
            kind,
            statistic,
            m,
            n,
            numerators,
            counts,
            suffix,
            denom,
            total,
            seed,
        }
    }

    pub fn kind(&self) -> NullKind {
        self.kind
    }

    pub fn statistic(&self) -> StatisticKind {
        self.statistic
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Total number of outcomes behind the distribution.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn support_len(&self) -> usize {
        self.numerators.len()
    }

    pub fn denominator(&self) -> u64 {
        self.denom
    }

    pub fn numerators(&self) -> &[i64] {
        &self.numerators
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Sorted support values.
    pub fn values(&self) -> Vec<f64> {
        self.numerators
            .iter()
            .map(|&v| v as f64 / self.denom as f64)
            .collect()
    }

    /// Probability weights aligned with `values`, summing to one.
    pub fn weights(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.total as f64)
            .collect()
    }

    pub fn value_at(&self, i: usize) -> f64 {
        self.numerators[i] as f64 / self.denom as f64
    }

    /// Exact mean of the distribution, accumulated in integer arithmetic.
    pub fn mean(&self) -> f64 {
        let s1: i128 = self
            .numerators
            .iter()
            .zip(&self.counts)
            .map(|(&v, &c)| v as i128 * c as i128)
            .sum();
        s1 as f64 / (self.denom as f64 * self.total as f64)
    }

    /// Exact variance of the distribution, accumulated in integer
    /// arithmetic: Var = (total*S2 - S1^2) / (denom^2 * total^2).
    pub fn variance(&self) -> f64 {
        let s1: i128 = self
            .numerators
            .iter()
            .zip(&self.counts)
            .map(|(&v, &c)| v as i128 * c as i128)
            .sum();
        let s2: i128 = self
            .numerators
            .iter()
            .zip(&self.counts)
            .map(|(&v, &c)| v as i128 * v as i128 * c as i128)
            .sum();
        let num = self.total as i128 * s2 - s1 * s1;
        let d = self.denom as f64 * self.total as f64;
        num as f64 / (d * d)
    }

    /// Number of outcomes with value >= x.
    pub fn count_ge(&self, x: f64) -> u64 {
        let idx = self
            .numerators
            .partition_point(|&v| (v as f64 / self.denom as f64) < x);
        self.suffix[idx]
    }

    /// Number of outcomes with value > x.
    pub fn count_gt(&self, x: f64) -> u64 {
        let idx = self
            .numerators
            .partition_point(|&v| (v as f64 / self.denom as f64) <= x);
        self.suffix[idx]
    }

    /// Kolmogorov distance between the cdfs of two distributions (used to
    /// compare a Monte-Carlo approximation against the exact law).
    pub fn kolmogorov_distance(&self, other: &NullDistribution) -> f64 {
        let mut i = 0;
        let mut j = 0;
        let mut acc_a = 0u64;
        let mut acc_b = 0u64;
        let mut sup = 0.0f64;
        while i < self.numerators.len() || j < other.numerators.len() {
            let va = self
                .numerators
                .get(i)
                .map(|&v| v as f64 / self.denom as f64);
            let vb = other
                .numerators
                .get(j)
                .map(|&v| v as f64 / other.denom as f64);
            match (va, vb) {
                (Some(a), Some(b)) if a < b => {
                    acc_a += self.counts[i];
                    i += 1;
                }
                (Some(a), Some(b)) if b < a => {
                    acc_b += other.counts[j];
                    j += 1;
                }
                (Some(_), Some(_)) => {
                    acc_a += self.counts[i];
                    acc_b += other.counts[j];
                    i += 1;
                    j += 1;
                }
                (Some(_), None) => {
                    acc_a += self.counts[i];
                    i += 1;
                }
                (None, Some(_)) => {
                    acc_b += other.counts[j];
                    j += 1;
                }
                (None, None) => break,
            }
            let diff = (acc_a as f64 / self.total as f64 - acc_b as f64 / other.total as f64).abs();
            sup = sup.max(diff);
        }
        sup
    }
}

/// Exact binomial coefficient, saturating at u128::MAX.
pub fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k.min(n));
    let mut res: u128 = 1;
    for i in 1..=k {
        match res.checked_mul((n - k + i) as u128) {
            Some(v) => res = v / i as u128,
            None => return u128::MAX,
        }
    }
    res
}

/// Integer evaluator of an enumerable rank statistic on a sorted set of
/// X-group natural ranks. Each statistic takes values numerator/denominator
/// on a grid fixed by (kind, m, n); the final combination runs in i128 so
/// the evaluator itself works for any pool size.
pub(crate) struct RankStatEvaluator {
    kind: StatisticKind,
    m: i64,
    n: i64,
    total: i64,
    /// f_table[k] = sum over b in 1..=N of |k - b|
    f_table: Vec<i64>,
    /// sum over all ordered pooled rank pairs of |a - b|
    total_abs: i64,
    denom: u128,
}

impl RankStatEvaluator {
    pub fn new(kind: StatisticKind, m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::EmptySample);
        }
        if kind == StatisticKind::Tprime && m != n {
            return Err(Error::UnbalancedSamples { m, n });
        }
        let (mi, ni) = (m as u128, n as u128);
        let total = mi + ni;
        let denom = match kind {
            StatisticKind::T => 2 * mi * ni * total * total,
            StatisticKind::Tprime => mi * ni * total,
            StatisticKind::Dhat => 2 * mi * mi * ni * ni * total,
            StatisticKind::CvM => mi * ni * total * total,
            StatisticKind::KS => mi * ni,
            StatisticKind::Wilcoxon => 1,
            StatisticKind::Mood => 4,
            StatisticKind::Energy | StatisticKind::TM => {
                return Err(Error::InvalidParameters(format!(
                    "{kind} is not a rank statistic and has no combinatorial null"
                )))
            }
        };
        let total = (m + n) as i64;
        let f_table = (0..=total)
            .map(|k| (k * (k - 1) + (total - k) * (total - k + 1)) / 2)
            .collect();
        Ok(Self {
            kind,
            m: m as i64,
            n: n as i64,
            total,
            f_table,
            total_abs: total * (total * total - 1) / 3,
            denom,
        })
    }

    pub fn denominator(&self) -> u128 {
        self.denom
    }

    /// Upper bound on |numerator| over all rank assignments.
    fn numerator_bound(&self) -> u128 {
        let (m, n, ta) = (self.m as u128, self.n as u128, self.total_abs as u128);
        match self.kind {
            // |2mn*cross - n^2*wx - m^2*wy| with cross, wx, wy <= TA
            StatisticKind::T | StatisticKind::Dhat => ta * (2 * m * n + m * m + n * n),
            StatisticKind::Tprime => ta,
            // sum over k of (N*cx - m*k)^2 <= N * (mn)^2, doubled
            StatisticKind::CvM => 2 * (m + n) * (m * n) * (m * n),
            StatisticKind::KS => m * n,
            StatisticKind::Wilcoxon => (m + n) * (m + n),
            StatisticKind::Mood => 4 * (m + n) * (m + n) * (m + n),
            StatisticKind::Energy | StatisticKind::TM => unreachable!(),
        }
    }

    /// True when every numerator and the denominator fit the i64/u64 grid
    /// used by `NullDistribution`.
    pub fn fits_table_grid(&self) -> bool {
        self.numerator_bound() <= i64::MAX as u128 && self.denom <= u64::MAX as u128
    }

    /// Numerator of the statistic for the given ascending X-group ranks.
    pub fn numerator(&self, sorted_ranks: &[u32]) -> i128 {
        debug_assert_eq!(sorted_ranks.len(), self.m as usize);
        match self.kind {
            StatisticKind::T | StatisticKind::Tprime | StatisticKind::Dhat => {
                let m = self.m;
                let mut within_x = 0i64;
                let mut f_sum = 0i64;
                for (j, &r) in sorted_ranks.iter().enumerate() {
                    let r = r as i64;
                    within_x += r * (2 * j as i64 - m + 1);
                    f_sum += self.f_table[r as usize];
                }
                within_x *= 2;
                let cross = f_sum - within_x;
                match self.kind {
                    StatisticKind::Tprime => cross as i128,
                    _ => {
                        let within_y = self.total_abs - within_x - 2 * cross;
                        let (m, n) = (self.m as i128, self.n as i128);
                        2 * m * n * cross as i128
                            - n * n * within_x as i128
                            - m * m * within_y as i128
                    }
                }
            }
            StatisticKind::CvM | StatisticKind::KS => {
                let (m, total) = (self.m, self.total);
                let mut cx = 0i64;
                let mut p = 0usize;
                let mut cvm_sum = 0i128;
                let mut ks_max = 0i64;
                for k in 1..=total {
                    if p < sorted_ranks.len() && sorted_ranks[p] as i64 == k {
                        cx += 1;
                        p += 1;
                    }
                    let term = total * cx - m * k;
                    if self.kind == StatisticKind::CvM {
                        cvm_sum += (term as i128) * (term as i128);
                    } else {
                        ks_max = ks_max.max(term.abs());
                    }
                }
                if self.kind == StatisticKind::CvM {
                    2 * cvm_sum
                } else {
                    ks_max as i128
                }
            }
            StatisticKind::Wilcoxon => sorted_ranks.iter().map(|&r| r as i128).sum(),
            StatisticKind::Mood => {
                let center = self.total + 1;
                sorted_ranks
                    .iter()
                    .map(|&r| {
                        let d = 2 * r as i64 - center;
                        (d as i128) * (d as i128)
                    })
                    .sum()
            }
            StatisticKind::Energy | StatisticKind::TM => unreachable!(),
        }
    }

    /// Numerator narrowed to the table grid; constructors of the null
    /// engines must have checked `fits_table_grid` first.
    pub fn numerator_i64(&self, sorted_ranks: &[u32]) -> i64 {
        self.numerator(sorted_ranks) as i64
    }
}

/// Value of an enumerable rank statistic on a pool, computed on the same
/// integer grid used by the null engines so that observed values and null
/// support atoms compare exactly. Midrank pools fall back to the floating
/// statistic definitions.
pub fn rank_statistic_value(kind: StatisticKind, pool: &RankedPool) -> Result<f64> {
    if let Some(mut ranks) = pool.integer_x_ranks() {
        if !matches!(kind, StatisticKind::Energy | StatisticKind::TM) {
            ranks.sort_unstable();
            let eval = RankStatEvaluator::new(kind, pool.m(), pool.n())?;
            return Ok(eval.numerator(&ranks) as f64 / eval.denominator() as f64);
        }
    }
    match kind {
        StatisticKind::T => Ok(crate::stats::statistic_t(pool)),
        StatisticKind::Tprime => crate::stats::statistic_t_prime(pool),
        StatisticKind::Dhat => Ok(crate::stats::statistic_dhat(pool)),
        StatisticKind::CvM => Ok(crate::stats::statistic_cvm(pool)),
        StatisticKind::KS => Ok(crate::stats::statistic_ks(pool)),
        StatisticKind::Wilcoxon => Ok(crate::stats::statistic_wilcoxon(pool)),
        StatisticKind::Mood => Ok(crate::stats::statistic_mood(pool)),
        StatisticKind::Energy | StatisticKind::TM => Err(Error::InvalidParameters(format!(
            "{kind} is not a rank statistic"
        ))),
    }
}

/// Exact null distribution by full enumeration of all C(N,m) assignments of
/// the pooled ranks to the X group, with the default evaluation cap.
pub fn exact_null(m: usize, n: usize, statistic: StatisticKind) -> Result<NullDistribution> {
    exact_null_with_cap(m, n, statistic, DEFAULT_ENUMERATION_CAP)
}

pub fn exact_null_with_cap(
    m: usize,
    n: usize,
    statistic: StatisticKind,
    cap: u64,
) -> Result<NullDistribution> {
    let combinations = binomial((m + n) as u64, m as u64);
    if combinations > cap as u128 {
        return Err(Error::EnumerationTooLarge { combinations, cap });
    }
    let eval = table_evaluator(statistic, m, n)?;
    let total = (m + n) as u32;

    let mut support: BTreeMap<i64, u64> = BTreeMap::new();
    let mut comb: Vec<u32> = (1..=m as u32).collect();
    loop {
        *support.entry(eval.numerator_i64(&comb)).or_insert(0) += 1;
        // next combination in lexicographic order
        let mut i = m;
        loop {
            if i == 0 {
                return Ok(NullDistribution::from_support(
                    NullKind::Exact,
                    statistic,
                    m,
                    n,
                    support,
                    eval.denominator() as u64,
                    None,
                ));
            }
            i -= 1;
            if comb[i] < total - (m - 1 - i) as u32 {
                comb[i] += 1;
                for j in (i + 1)..m {
                    comb[j] = comb[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Monte-Carlo null distribution: `reps` uniformly random m-subsets of the
/// pooled ranks, each drawn by a partial Fisher-Yates shuffle. Replicates
/// are processed in fixed-size chunks with one ChaCha stream per chunk, so
/// the result is bit-identical for a given seed regardless of thread count.
pub fn mc_null(
    m: usize,
    n: usize,
    statistic: StatisticKind,
    reps: u64,
    seed: u64,
) -> Result<NullDistribution> {
    if reps < 1000 {
        return Err(Error::InvalidParameters(format!(
            "Monte-Carlo null needs at least 1000 replicates, got {reps}"
        )));
    }
    let eval = table_evaluator(statistic, m, n)?;
    let total = m + n;

    const CHUNK: u64 = 1 << 14;
    let n_chunks = reps.div_ceil(CHUNK);
    let support = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = crate::rng::substream_rng(seed, chunk);
            let mut local: BTreeMap<i64, u64> = BTreeMap::new();
            let mut pool_ranks: Vec<u32> = (1..=total as u32).collect();
            let mut subset = vec![0u32; m];
            let count = CHUNK.min(reps - chunk * CHUNK);
            for _ in 0..count {
                for j in 0..m {
                    let swap_with = rand::Rng::random_range(&mut rng, j..total);
                    pool_ranks.swap(j, swap_with);
                }
                subset.copy_from_slice(&pool_ranks[..m]);
                subset.sort_unstable();
                *local.entry(eval.numerator_i64(&subset)).or_insert(0) += 1;
            }
            local
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        });

    Ok(NullDistribution::from_support(
        NullKind::MonteCarlo,
        statistic,
        m,
        n,
        support,
        eval.denominator() as u64,
        Some(seed),
    ))
}

/// Evaluator for the null engines, rejecting pool sizes whose integer grid
/// would not fit the table representation.
fn table_evaluator(statistic: StatisticKind, m: usize, n: usize) -> Result<RankStatEvaluator> {
    let eval = RankStatEvaluator::new(statistic, m, n)?;
    if !eval.fits_table_grid() {
        return Err(Error::InvalidParameters(format!(
            "pooled size {} is too large for the integer grid of {statistic}",
            m + n
        )));
    }
    Ok(eval)
}

/// Upper-tail p-value of an observed value under a null distribution.
///
/// Exact kind: P(T >= observed) under the discrete law; an observed value
/// above the whole support reports the smallest attainable tail 1/C(N,m).
/// Monte-Carlo kind: the add-one estimate (1 + #{values >= observed}) /
/// (reps + 1).
pub fn pvalue_from_null(observed: f64, null: &NullDistribution) -> f64 {
    let ge = null.count_ge(observed);
    match null.kind() {
        NullKind::Exact => {
            if ge == 0 {
                1.0 / null.total() as f64
            } else {
                ge as f64 / null.total() as f64
            }
        }
        NullKind::MonteCarlo => (1.0 + ge as f64) / (null.total() as f64 + 1.0),
    }
}

/// Critical value at level alpha: the smallest support value c whose strict
/// tail P(T > c) does not exceed alpha. The matching rejection rule is
/// `observed > c`, equivalent to `pvalue_from_null(observed) <= alpha` for
/// the exact kind; the attained size of that rule is P(T > c).
pub fn critical_value_from_null(alpha: f64, null: &NullDistribution) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let bound = alpha * null.total() as f64;
    // suffix[i+1] (the strict tail above atom i) decreases in i
    let idx = (0..null.support_len())
        .find(|&i| null.suffix[i + 1] as f64 <= bound)
        .expect("strict tail above the maximum is zero");
    Ok(null.value_at(idx))
}

/// Attained size of the rejection rule `observed > critical`, i.e. the
/// strict tail probability P(T > critical).
pub fn attained_size(critical: f64, null: &NullDistribution) -> f64 {
    null.count_gt(critical) as f64 / null.total() as f64
}

/// Generic pooled-relabeling permutation test.
///
/// Each of the B replicates reassigns the pooled observations into groups
/// of sizes m and n uniformly at random and re-evaluates `stat_fn`; the
/// p-value is (1 + #{replicates >= observed})/(B + 1). Replicates derive
/// independent ChaCha streams from (seed, replicate index), so the outcome
/// is deterministic regardless of parallel scheduling.
pub fn permutation_test<T, F>(
    method: StatisticKind,
    stat_fn: F,
    x: &[T],
    y: &[T],
    b: u32,
    seed: u64,
) -> Result<TestOutcome>
where
    T: Clone + Send + Sync,
    F: Fn(&[T], &[T]) -> f64 + Sync,
{
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptySample);
    }
    if b < 99 {
        return Err(Error::InvalidParameters(format!(
            "permutation replicates must be at least 99, got {b}"
        )));
    }
    let m = x.len();
    let n = y.len();
    let total = m + n;
    let observed = stat_fn(x, y);
    let pooled: Vec<T> = x.iter().chain(y.iter()).cloned().collect();

    let exceed: u64 = (0..b as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = crate::rng::substream_rng(seed, rep);
            let mut in_x = vec![false; total];
            for idx in crate::spatial::draw_subset(&mut rng, total, m) {
                in_x[idx] = true;
            }
            let mut bx = Vec::with_capacity(m);
            let mut by = Vec::with_capacity(n);
            for (i, flag) in in_x.iter().enumerate() {
                if *flag {
                    bx.push(pooled[i].clone());
                } else {
                    by.push(pooled[i].clone());
                }
            }
            u64::from(stat_fn(&bx, &by) >= observed)
        })
        .sum();

    Ok(TestOutcome {
        statistic_value: observed,
        p_value: (1.0 + exceed as f64) / (f64::from(b) + 1.0),
        method,
        null_model: format!("permutation:B={b}"),
        m,
        n,
        seed: Some(seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rank::{pool_and_rank, Sample, TiePolicy};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn pool_of(x: &[f64], y: &[f64]) -> RankedPool {
        pool_and_rank(
            &Sample::new(x.to_vec()).unwrap(),
            &Sample::new(y.to_vec()).unwrap(),
            TiePolicy::Reject,
        )
        .unwrap()
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(14, 7), 3432);
        assert_eq!(binomial(16, 7), 11440);
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(40, 20), 137_846_528_820);
    }

    #[test]
    fn exact_null_smallest_case() {
        let null = exact_null(2, 2, StatisticKind::T).unwrap();
        assert_eq!(null.total(), 6);
        // support {1/8 (x4), 3/8 (x2)}, mean (N+1)/(6N) = 5/24
        assert_eq!(null.values(), vec![0.125, 0.375]);
        assert_eq!(null.counts(), &[4, 2]);
        assert_abs_diff_eq!(null.mean(), 5.0 / 24.0, epsilon = 1e-15);
        let weight_sum: f64 = null.weights().iter().sum();
        assert_abs_diff_eq!(weight_sum, 1.0, epsilon = 1e-12);
        assert!(null.values().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn tprime_null_mean_is_expected_cross_distance() {
        // E T' = E|R(X)-R(Y)| = (N+1)/(3N)
        let null = exact_null(3, 3, StatisticKind::Tprime).unwrap();
        assert_abs_diff_eq!(null.mean(), 7.0 / 18.0, epsilon = 1e-14);
        assert!(matches!(
            exact_null(3, 4, StatisticKind::Tprime),
            Err(Error::UnbalancedSamples { .. })
        ));
    }

    #[test]
    fn ks_null_support_range() {
        let null = exact_null(3, 3, StatisticKind::KS).unwrap();
        let values = null.values();
        // smallest sup-distance configurations still separate by >= 1/3,
        // the fully separated assignment reaches 1
        assert_abs_diff_eq!(values[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(*values.last().unwrap(), 1.0);
    }

    #[test]
    fn exact_null_matches_closed_form_moments() {
        for &(m, n) in &[(2usize, 2usize), (3, 5), (7, 7), (4, 8)] {
            let null = exact_null(m, n, StatisticKind::T).unwrap();
            let total = (m + n) as f64;
            let mean = (total + 1.0) / (6.0 * total);
            let var = (total + 1.0) / (180.0 * total * total)
                * (4.0 * (total + 1.0) - 3.0 * total * total / (m as f64 * n as f64));
            assert_abs_diff_eq!(null.mean(), mean, epsilon = 1e-14);
            assert_abs_diff_eq!(null.variance(), var, epsilon = 1e-14);
        }
    }

    #[test]
    fn exact_critical_values_seven_seven() {
        let null = exact_null(7, 7, StatisticKind::T).unwrap();
        let c = critical_value_from_null(0.05, &null).unwrap();
        assert_abs_diff_eq!(c, 0.4643, epsilon = 5e-5);
        assert_abs_diff_eq!(attained_size(c, &null), 0.049, epsilon = 5e-4);
    }

    #[test]
    fn exact_critical_values_seven_nine() {
        let null = exact_null(7, 9, StatisticKind::T).unwrap();
        let c = critical_value_from_null(0.05, &null).unwrap();
        assert_abs_diff_eq!(c, 0.4678, epsilon = 5e-5);
        assert_abs_diff_eq!(attained_size(c, &null), 0.050, epsilon = 5e-4);
    }

    #[test]
    fn pvalue_conventions() {
        let null = exact_null(7, 7, StatisticKind::T).unwrap();
        // below the minimum support
        assert_eq!(pvalue_from_null(-1.0, &null), 1.0);
        // above the maximum support: smallest attainable tail
        assert_eq!(pvalue_from_null(10.0, &null), 1.0 / 3432.0);
        // at the published critical value
        assert_abs_diff_eq!(pvalue_from_null(0.4643, &null), 0.049, epsilon = 5e-4);
    }

    #[test]
    fn asymptotic_cutoff_attained_sizes() {
        let null77 = exact_null(7, 7, StatisticKind::T).unwrap();
        assert_abs_diff_eq!(attained_size(0.4611, &null77), 0.056, epsilon = 5e-4);
        let null79 = exact_null(7, 9, StatisticKind::T).unwrap();
        assert_abs_diff_eq!(attained_size(0.4609, &null79), 0.052, epsilon = 5e-4);
    }

    #[test]
    fn alpha_bounds_rejected() {
        let null = exact_null(3, 3, StatisticKind::T).unwrap();
        assert!(matches!(
            critical_value_from_null(1.0, &null),
            Err(Error::InvalidAlpha(_))
        ));
        assert!(matches!(
            critical_value_from_null(0.0, &null),
            Err(Error::InvalidAlpha(_))
        ));
    }

    #[test]
    fn enumeration_cap_enforced() {
        let err = exact_null(20, 20, StatisticKind::T);
        assert!(matches!(err, Err(Error::EnumerationTooLarge { .. })));
    }

    #[test]
    fn label_exchange_symmetry() {
        let a = exact_null(3, 5, StatisticKind::T).unwrap();
        let b = exact_null(5, 3, StatisticKind::T).unwrap();
        assert_eq!(a.numerators(), b.numerators());
        assert_eq!(a.counts(), b.counts());
    }

    #[test]
    fn cvm_null_mean_doubles_t_mean() {
        // the both-sided cvm evaluation makes every outcome exactly twice
        // the corresponding T outcome on tie-free ranks
        for &(m, n) in &[(2usize, 2usize), (3, 4), (5, 5)] {
            let t = exact_null(m, n, StatisticKind::T).unwrap();
            let cvm = exact_null(m, n, StatisticKind::CvM).unwrap();
            assert_abs_diff_eq!(cvm.mean(), 2.0 * t.mean(), epsilon = 1e-14);
        }
    }

    #[test]
    fn wilcoxon_mood_enumeration_moments() {
        // C(6,3) = 20 assignments, m=3, n=3, N=6
        let w = exact_null(3, 3, StatisticKind::Wilcoxon).unwrap();
        assert_abs_diff_eq!(w.mean(), 3.0 * 7.0 / 2.0, epsilon = 1e-13);
        assert_abs_diff_eq!(w.variance(), 9.0 * 7.0 / 12.0, epsilon = 1e-13);
        let m = exact_null(3, 3, StatisticKind::Mood).unwrap();
        assert_abs_diff_eq!(m.mean(), 3.0 * 35.0 / 12.0, epsilon = 1e-13);
    }

    #[test]
    fn evaluators_match_floating_statistics() {
        let mut rng = crate::rng::substream_rng(31, 0);
        let kinds = [
            StatisticKind::T,
            StatisticKind::Dhat,
            StatisticKind::CvM,
            StatisticKind::KS,
            StatisticKind::Wilcoxon,
            StatisticKind::Mood,
        ];
        for _ in 0..1000 {
            let m = rng.random_range(1..20usize);
            let n = rng.random_range(1..20usize);
            let x: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let pool = pool_of(&x, &y);
            for kind in kinds {
                let fast = rank_statistic_value(kind, &pool).unwrap();
                let slow = match kind {
                    StatisticKind::T => crate::stats::statistic_t(&pool),
                    StatisticKind::Dhat => crate::stats::statistic_dhat(&pool),
                    StatisticKind::CvM => crate::stats::statistic_cvm(&pool),
                    StatisticKind::KS => crate::stats::statistic_ks(&pool),
                    StatisticKind::Wilcoxon => crate::stats::statistic_wilcoxon(&pool),
                    StatisticKind::Mood => crate::stats::statistic_mood(&pool),
                    _ => unreachable!(),
                };
                assert!(
                    (fast - slow).abs() < 1e-12,
                    "{kind} fast {fast} slow {slow} m={m} n={n}"
                );
            }
        }
    }

    #[test]
    fn tprime_evaluator_matches() {
        let mut rng = crate::rng::substream_rng(32, 0);
        for _ in 0..200 {
            let n = rng.random_range(1..15usize);
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let pool = pool_of(&x, &y);
            let fast = rank_statistic_value(StatisticKind::Tprime, &pool).unwrap();
            let slow = crate::stats::statistic_t_prime(&pool).unwrap();
            assert!((fast - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn mc_null_deterministic_per_seed() {
        let a = mc_null(5, 6, StatisticKind::T, 20_000, 9).unwrap();
        let b = mc_null(5, 6, StatisticKind::T, 20_000, 9).unwrap();
        assert_eq!(a.numerators(), b.numerators());
        assert_eq!(a.counts(), b.counts());
        let c = mc_null(5, 6, StatisticKind::T, 20_000, 10).unwrap();
        assert_ne!(a.counts(), c.counts());
    }

    #[test]
    fn mc_null_requires_minimum_reps() {
        assert!(mc_null(3, 3, StatisticKind::T, 100, 1).is_err());
    }

    #[test]
    fn mc_null_independent_of_thread_count() {
        let global = mc_null(6, 5, StatisticKind::T, 40_000, 21).unwrap();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| mc_null(6, 5, StatisticKind::T, 40_000, 21).unwrap());
        assert_eq!(global, single);
    }

    #[test]
    fn mc_null_converges_to_exact() {
        let exact = exact_null(7, 7, StatisticKind::T).unwrap();
        let mc = mc_null(7, 7, StatisticKind::T, 1_000_000, 4).unwrap();
        assert!(exact.kolmogorov_distance(&mc) < 0.005);
        // 95% critical value of the MC law close to the exact one
        let c_mc = critical_value_from_null(0.05, &mc).unwrap();
        let c_ex = critical_value_from_null(0.05, &exact).unwrap();
        assert!((c_mc - c_ex).abs() <= 0.011, "c_mc {c_mc} c_ex {c_ex}");
    }

    #[test]
    fn mc_null_mean_near_theory() {
        let mc = mc_null(50, 50, StatisticKind::T, 1_000_000, 2).unwrap();
        let mean = 101.0 / 600.0;
        let sd = mc.variance().sqrt();
        let se = sd / (mc.total() as f64).sqrt();
        assert!((mc.mean() - mean).abs() < 3.0 * se);
    }

    #[test]
    fn permutation_tail_matches_exact_on_tiny_pool() {
        // all six relabelings of x=(0,2), y=(1,3) give T >= 0.125, so the
        // exact tail of the observed value is 1
        let pool = pool_of(&[0.0, 2.0], &[1.0, 3.0]);
        let observed = crate::stats::statistic_t(&pool);
        let null = exact_null(2, 2, StatisticKind::T).unwrap();
        assert_eq!(pvalue_from_null(observed, &null), 1.0);
    }

    #[test]
    fn permutation_engine_identical_samples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let stat = |a: &[f64], b: &[f64]| {
            let pa: f64 = a.iter().sum::<f64>() / a.len() as f64;
            let pb: f64 = b.iter().sum::<f64>() / b.len() as f64;
            (pa - pb).abs()
        };
        let outcome = permutation_test(StatisticKind::Energy, stat, &x, &x, 199, 5).unwrap();
        assert!(outcome.p_value >= 1.0 / 200.0);
    }

    #[test]
    fn permutation_engine_deterministic() {
        let mut rng = crate::rng::substream_rng(33, 0);
        let x: Vec<f64> = (0..15).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..12).map(|_| rng.random::<f64>() + 0.4).collect();
        let stat = |a: &[f64], b: &[f64]| {
            let pa: f64 = a.iter().sum::<f64>() / a.len() as f64;
            let pb: f64 = b.iter().sum::<f64>() / b.len() as f64;
            pa - pb
        };
        let a = permutation_test(StatisticKind::Energy, stat, &x, &y, 499, 11).unwrap();
        let b = permutation_test(StatisticKind::Energy, stat, &x, &y, 499, 11).unwrap();
        assert_eq!(a.p_value, b.p_value);
    }

    #[test]
    fn energy_permutation_size_under_null() {
        // rejection rate of the energy permutation test at nominal 0.05
        // over repeated null draws; tolerance (0.03, 0.07)
        use crate::spatial::PointSample;
        use rand_distr::Distribution;
        let trials = 1000;
        let mut rejections = 0;
        for t in 0..trials {
            let mut rng = crate::rng::substream_rng(8000 + t as u64, 0);
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
                (0..30)
                    .map(|_| rand_distr::StandardNormal.sample(rng))
                    .collect()
            };
            let x = draw(&mut rng);
            let y = draw(&mut rng);
            let stat = |a: &[f64], b: &[f64]| {
                let pa = PointSample::new(a.iter().map(|&v| vec![v]).collect()).unwrap();
                let pb = PointSample::new(b.iter().map(|&v| vec![v]).collect()).unwrap();
                crate::stats::statistic_energy(&pa, &pb).unwrap()
            };
            let outcome =
                permutation_test(StatisticKind::Energy, stat, &x, &y, 199, 600 + t as u64).unwrap();
            if outcome.p_value <= 0.05 {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / trials as f64;
        assert!((0.03..0.07).contains(&rate), "size {rate}");
    }
}
