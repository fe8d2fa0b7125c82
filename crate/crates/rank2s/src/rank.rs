//! Pooling and ranking of two univariate samples.
//!
//! All rank statistics in this crate are computed from the combined sample:
//! the observations of both groups are pooled, sorted, and each observation
//! receives its ascending-order position as natural rank. The standardized
//! rank is the natural rank divided by the pooled size N.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A univariate sample. Construction rejects empty input and non-finite
/// values; there is no notion of missing data.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteValue { index, value });
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Group tag of one pooled observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Group {
    X,
    Y,
}

/// Tie handling for the pooled ranking.
///
/// The distribution-free theory assumes continuous distributions, so ties
/// have probability zero and `Reject` is the default. `Midrank` assigns tied
/// observations the mean of the positions they occupy; results computed from
/// midranks are no longer exactly distribution free and are flagged as such
/// in test outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiePolicy {
    Reject,
    Midrank,
}

/// The pooled two-sample configuration: group labels together with natural
/// and standardized ranks. Index `i < m` is the i-th X observation, index
/// `i >= m` the (i-m)-th Y observation, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPool {
    labels: Vec<Group>,
    natural_ranks: Vec<f64>,
    standardized_ranks: Vec<f64>,
    m: usize,
    n: usize,
    tie_policy: TiePolicy,
    had_ties: bool,
}

impl RankedPool {
    /// Size of the X group.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Size of the Y group.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Pooled size N = m + n.
    pub fn n_total(&self) -> usize {
        self.m + self.n
    }

    pub fn labels(&self) -> &[Group] {
        &self.labels
    }

    /// Natural ranks in 1..=N, aligned with `labels`. Midranks may be
    /// half-integers; under `Reject` they are a permutation of 1..=N.
    pub fn natural_ranks(&self) -> &[f64] {
        &self.natural_ranks
    }

    /// Standardized ranks R_i / N, aligned with `labels`.
    pub fn standardized_ranks(&self) -> &[f64] {
        &self.standardized_ranks
    }

    pub fn tie_policy(&self) -> TiePolicy {
        self.tie_policy
    }

    /// True when midrank averaging was actually applied.
    pub fn had_ties(&self) -> bool {
        self.had_ties
    }

    pub fn x_natural_ranks(&self) -> &[f64] {
        &self.natural_ranks[..self.m]
    }

    pub fn y_natural_ranks(&self) -> &[f64] {
        &self.natural_ranks[self.m..]
    }

    pub fn x_standardized_ranks(&self) -> &[f64] {
        &self.standardized_ranks[..self.m]
    }

    pub fn y_standardized_ranks(&self) -> &[f64] {
        &self.standardized_ranks[self.m..]
    }

    /// The X-group natural ranks as integers, available only for tie-free
    /// pools. This is the entry point into the exact integer evaluators of
    /// the null-distribution engines.
    pub fn integer_x_ranks(&self) -> Option<Vec<u32>> {
        if self.had_ties {
            return None;
        }
        let mut out = Vec::with_capacity(self.m);
        for &r in self.x_natural_ranks() {
            if r.fract() != 0.0 {
                return None;
            }
            out.push(r as u32);
        }
        Some(out)
    }
}

/// Pools two samples and ranks the combined sample.
///
/// Ranks are ascending-order positions in the pooled sample. With
/// `TiePolicy::Reject` any duplicate pooled value is an error; with
/// `Midrank` tied values receive the arithmetic mean of the positions they
/// occupy.
pub fn pool_and_rank(x: &Sample, y: &Sample, tie_policy: TiePolicy) -> Result<RankedPool> {
    let m = x.len();
    let n = y.len();
    let total = m + n;

    let mut order: Vec<usize> = (0..total).collect();
    let value_at = |i: usize| {
        if i < m {
            x.values()[i]
        } else {
            y.values()[i - m]
        }
    };
    order.sort_by(|&a, &b| value_at(a).partial_cmp(&value_at(b)).unwrap());

    let mut natural = vec![0.0f64; total];
    let mut had_ties = false;
    let mut start = 0;
    while start < total {
        let mut end = start + 1;
        while end < total && value_at(order[end]) == value_at(order[start]) {
            end += 1;
        }
        if end - start > 1 {
            if tie_policy == TiePolicy::Reject {
                return Err(Error::TiesPresent {
                    value: value_at(order[start]),
                });
            }
            had_ties = true;
        }
        // positions start+1 ..= end, averaged over the run
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            natural[idx] = rank;
        }
        start = end;
    }

    let standardized: Vec<f64> = natural.iter().map(|r| r / total as f64).collect();
    let mut labels = vec![Group::X; m];
    labels.extend(std::iter::repeat_n(Group::Y, n));

    Ok(RankedPool {
        labels,
        natural_ranks: natural,
        standardized_ranks: standardized,
        m,
        n,
        tie_policy,
        had_ties,
    })
}
