//! Rank-based Cramér–von Mises-type two-sample testing.
//!
//! The central statistic `T` compares the average between-group distance of
//! standardized pooled ranks with the within-group averages. It is
//! distribution free under the null, so its null law can be tabulated once
//! per (m, n) by exact enumeration over all C(N, m) rank assignments, by
//! Monte-Carlo sampling of random combinations, or approximated through its
//! limiting weighted chi-square mixture. A spatial-rank extension covers
//! multivariate samples through permutation inference, and a power-study
//! harness estimates rejection rates over configurable scenario grids.
//!
//! Quick tour:
//!
//! ```
//! use rank2s::{
//!     critical_value_from_null, exact_null, pool_and_rank, pvalue_from_null, statistic_t,
//!     Sample, StatisticKind, TiePolicy,
//! };
//!
//! let x = Sample::new(vec![0.4, 1.3, 2.8, 0.9]).unwrap();
//! let y = Sample::new(vec![1.6, 3.1, 2.2, 4.0]).unwrap();
//! let pool = pool_and_rank(&x, &y, TiePolicy::Reject).unwrap();
//! let t = statistic_t(&pool);
//! let null = exact_null(4, 4, StatisticKind::T).unwrap();
//! let p = pvalue_from_null(t, &null);
//! assert!(p > 0.0 && p <= 1.0);
//! let c = critical_value_from_null(0.05, &null).unwrap();
//! assert!(c > 0.0);
//! ```

pub mod asymptotic;
pub mod cache;
pub mod error;
pub mod nulldist;
pub mod rank;
mod rng;
pub mod simgen;
pub mod spatial;
pub mod stats;

pub use asymptotic::{
    critical_value_asymptotic, kernel_h, mixture_variance_ratio, moments_t, quantile_zd, sample_zd,
    verify_kernel_eigensystem, KernelEigenReport, MixtureSpec, TMoments,
};
pub use error::{Error, Result};
pub use nulldist::{
    attained_size, binomial, critical_value_from_null, exact_null, exact_null_with_cap, mc_null,
    permutation_test, pvalue_from_null, rank_statistic_value, NullDistribution, NullKind,
    TestOutcome, DEFAULT_ENUMERATION_CAP,
};
pub use rank::{pool_and_rank, Group, RankedPool, Sample, TiePolicy};
pub use simgen::{
    draw_sample, reciprocal_covariance, run_power_study, DistributionSpec, DrawnSample,
    NullModelChoice, PowerStudyConfig, PowerStudyResult, Scenario, TestSpec,
};
pub use spatial::{permutation_pvalue_tm, spatial_rank, statistic_tm, PointSample};
pub use stats::{
    ks_pvalue, mood_pvalue, population_d, statistic_cvm, statistic_dhat, statistic_energy,
    statistic_ks, statistic_mood, statistic_t, statistic_t_prime, statistic_wilcoxon,
    wilcoxon_pvalue, StatisticKind,
};
