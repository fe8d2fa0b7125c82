//! Scenario generators and the power-study harness.
//!
//! A power study runs M replicate two-sample draws per scenario, applies
//! each configured test at level alpha, and reports rejection fractions
//! with Monte-Carlo standard errors sqrt(p(1-p)/M). Everything is an exact
//! function of the configured seed: replicates derive ChaCha substreams
//! from (seed, scenario, replicate) and rejection counts are merged by
//! order-independent summation.

use crate::error::{Error, Result};
use crate::nulldist::{exact_null, mc_null, pvalue_from_null, NullDistribution};
use crate::rank::{pool_and_rank, RankedPool, Sample, TiePolicy};
use crate::rng::{derive_seed, substream_rng};
use crate::spatial::PointSample;
use crate::stats::StatisticKind;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

/// A sampling distribution for one group of a scenario.
///
/// `pareto { shape, scale }` has cdf 1 - (scale/x)^shape on x >= scale;
/// shifting `scale` moves the support edge (a location-type alternative),
/// shifting `shape` changes the tail index (a scale-type alternative).
/// `mv_t1` is the multivariate t with one degree of freedom: a normal
/// vector with the given scatter divided by an independent |N(0,1)|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    Normal {
        mean: f64,
        sd: f64,
    },
    StudentT {
        df: f64,
        #[serde(default)]
        shift: f64,
    },
    Pareto {
        shape: f64,
        scale: f64,
    },
    Exponential {
        rate: f64,
    },
    LogNormal {
        mu: f64,
        sigma: f64,
    },
    MvNormal {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
    MvT1 {
        mean: Vec<f64>,
        scatter: Vec<Vec<f64>>,
    },
    MvPareto {
        shapes: Vec<f64>,
        scales: Vec<f64>,
    },
}

impl DistributionSpec {
    pub fn dim(&self) -> usize {
        match self {
            DistributionSpec::Normal { .. }
            | DistributionSpec::StudentT { .. }
            | DistributionSpec::Pareto { .. }
            | DistributionSpec::Exponential { .. }
            | DistributionSpec::LogNormal { .. } => 1,
            DistributionSpec::MvNormal { mean, .. } => mean.len(),
            DistributionSpec::MvT1 { mean, .. } => mean.len(),
            DistributionSpec::MvPareto { shapes, .. } => shapes.len(),
        }
    }

    pub fn is_univariate(&self) -> bool {
        matches!(
            self,
            DistributionSpec::Normal { .. }
                | DistributionSpec::StudentT { .. }
                | DistributionSpec::Pareto { .. }
                | DistributionSpec::Exponential { .. }
                | DistributionSpec::LogNormal { .. }
        )
    }
}

/// Validated sampler with any decompositions precomputed.
enum PreparedDist {
    Normal(rand_distr::Normal<f64>),
    StudentT {
        dist: rand_distr::StudentT<f64>,
        shift: f64,
    },
    Pareto(rand_distr::Pareto<f64>),
    Exponential(rand_distr::Exp<f64>),
    LogNormal(rand_distr::LogNormal<f64>),
    MvNormal {
        mean: DVector<f64>,
        chol: DMatrix<f64>,
    },
    MvT1 {
        mean: DVector<f64>,
        chol: DMatrix<f64>,
    },
    MvPareto(Vec<rand_distr::Pareto<f64>>),
}

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameters(msg.into()))
}

fn cholesky_of(mat: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let d = mat.len();
    if d == 0 || mat.iter().any(|row| row.len() != d) {
        return bad(format!("{what} must be a nonempty square matrix"));
    }
    let m = DMatrix::from_fn(d, d, |i, j| mat[i][j]);
    if (&m - m.transpose()).abs().max() > 1e-10 {
        return bad(format!("{what} must be symmetric"));
    }
    match m.clone().cholesky() {
        Some(c) => Ok(c.l()),
        None => bad(format!("{what} must be positive definite")),
    }
}

impl PreparedDist {
    fn prepare(spec: &DistributionSpec) -> Result<Self> {
        match spec {
            DistributionSpec::Normal { mean, sd } => {
                if !sd.is_finite() || *sd <= 0.0 {
                    return bad(format!("normal sd must be positive, got {sd}"));
                }
                Ok(Self::Normal(
                    rand_distr::Normal::new(*mean, *sd)
                        .map_err(|e| Error::InvalidParameters(e.to_string()))?,
                ))
            }
            DistributionSpec::StudentT { df, shift } => {
                if !df.is_finite() || *df <= 0.0 {
                    return bad(format!("student_t df must be positive, got {df}"));
                }
                Ok(Self::StudentT {
                    dist: rand_distr::StudentT::new(*df)
                        .map_err(|e| Error::InvalidParameters(e.to_string()))?,
                    shift: *shift,
                })
            }
            DistributionSpec::Pareto { shape, scale } => {
                if !(shape.is_finite() && scale.is_finite()) || *shape <= 0.0 || *scale <= 0.0 {
                    return bad(format!(
                        "pareto shape and scale must be positive, got ({shape}, {scale})"
                    ));
                }
                Ok(Self::Pareto(
                    rand_distr::Pareto::new(*scale, *shape)
                        .map_err(|e| Error::InvalidParameters(e.to_string()))?,
                ))
            }
            DistributionSpec::Exponential { rate } => {
                if !rate.is_finite() || *rate <= 0.0 {
                    return bad(format!("exponential rate must be positive, got {rate}"));
                }
                Ok(Self::Exponential(
                    rand_distr::Exp::new(*rate)
                        .map_err(|e| Error::InvalidParameters(e.to_string()))?,
                ))
            }
            DistributionSpec::LogNormal { mu, sigma } => {
                if !sigma.is_finite() || *sigma <= 0.0 {
                    return bad(format!("lognormal sigma must be positive, got {sigma}"));
                }
                Ok(Self::LogNormal(
                    rand_distr::LogNormal::new(*mu, *sigma)
                        .map_err(|e| Error::InvalidParameters(e.to_string()))?,
                ))
            }
            DistributionSpec::MvNormal { mean, cov } => {
                let chol = cholesky_of(cov, "mv_normal covariance")?;
                if mean.len() != chol.nrows() {
                    return Err(Error::DimensionMismatch {
                        expected: chol.nrows(),
                        found: mean.len(),
                    });
                }
                Ok(Self::MvNormal {
                    mean: DVector::from_column_slice(mean),
                    chol,
                })
            }
            DistributionSpec::MvT1 { mean, scatter } => {
                let chol = cholesky_of(scatter, "mv_t1 scatter")?;
                if mean.len() != chol.nrows() {
                    return Err(Error::DimensionMismatch {
                        expected: chol.nrows(),
                        found: mean.len(),
                    });
                }
                Ok(Self::MvT1 {
                    mean: DVector::from_column_slice(mean),
                    chol,
                })
            }
            DistributionSpec::MvPareto { shapes, scales } => {
                if shapes.is_empty() || shapes.len() != scales.len() {
                    return bad("mv_pareto shapes and scales must have equal nonzero length");
                }
                let mut dists = Vec::with_capacity(shapes.len());
                for (&a, &s) in shapes.iter().zip(scales) {
                    if !(a.is_finite() && s.is_finite()) || a <= 0.0 || s <= 0.0 {
                        return bad(format!(
                            "mv_pareto parameters must be positive, got ({a}, {s})"
                        ));
                    }
                    dists.push(
                        rand_distr::Pareto::new(s, a)
                            .map_err(|e| Error::InvalidParameters(e.to_string()))?,
                    );
                }
                Ok(Self::MvPareto(dists))
            }
        }
    }

    fn draw_univariate(&self, rng: &mut impl Rng, size: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(size);
        for _ in 0..size {
            out.push(match self {
                Self::Normal(d) => d.sample(rng),
                Self::StudentT { dist, shift } => dist.sample(rng) + shift,
                Self::Pareto(d) => d.sample(rng),
                Self::Exponential(d) => d.sample(rng),
                Self::LogNormal(d) => d.sample(rng),
                _ => unreachable!("multivariate spec drawn as univariate"),
            });
        }
        out
    }

    fn draw_points(&self, rng: &mut impl Rng, size: usize, dim: usize) -> Vec<f64> {
        let mut flat = Vec::with_capacity(size * dim);
        for _ in 0..size {
            match self {
                Self::MvNormal { mean, chol } => {
                    let z = DVector::from_fn(dim, |_, _| {
                        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
                    });
                    let p = mean + chol * z;
                    flat.extend(p.iter());
                }
                Self::MvT1 { mean, chol } => {
                    let z = DVector::from_fn(dim, |_, _| {
                        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
                    });
                    let w: f64 = StandardNormal.sample(rng);
                    // chi^2_1 denominator as a squared standard normal
                    let p = mean + chol * z / (w * w).sqrt();
                    flat.extend(p.iter());
                }
                Self::MvPareto(dists) => {
                    for d in dists {
                        flat.push(d.sample(rng));
                    }
                }
                _ => unreachable!("univariate spec drawn as points"),
            }
        }
        flat
    }
}

/// A drawn sample, univariate or multivariate depending on the spec.
#[derive(Debug, Clone, PartialEq)]
pub enum DrawnSample {
    Univariate(Sample),
    Multivariate(PointSample),
}

/// Draws `size` observations from the distribution, deterministic given the
/// seed.
pub fn draw_sample(spec: &DistributionSpec, size: usize, seed: u64) -> Result<DrawnSample> {
    if size == 0 {
        return Err(Error::EmptySample);
    }
    let prepared = PreparedDist::prepare(spec)?;
    let mut rng = substream_rng(seed, 0);
    if spec.is_univariate() {
        Ok(DrawnSample::Univariate(Sample::new(
            prepared.draw_univariate(&mut rng, size),
        )?))
    } else {
        let d = spec.dim();
        Ok(DrawnSample::Multivariate(PointSample::from_flat(
            prepared.draw_points(&mut rng, size, d),
            d,
        )?))
    }
}

/// Covariance with the same eigenvectors and reciprocal eigenvalues,
/// used to build scatter alternatives.
pub fn reciprocal_covariance(cov: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = cov.len();
    if d == 0 || cov.iter().any(|row| row.len() != d) {
        return bad("covariance must be a nonempty square matrix");
    }
    let m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
    let eig = m.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return bad("covariance must be positive definite");
    }
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    let rec = &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose();
    Ok((0..d)
        .map(|i| (0..d).map(|j| rec[(i, j)]).collect())
        .collect())
}

fn default_zd_samples() -> u64 {
    1_000_000
}

fn default_truncation() -> usize {
    4
}

/// Null-model choice for one configured test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NullModelChoice {
    Exact,
    Mc {
        reps: u64,
    },
    Asymptotic {
        #[serde(default = "default_truncation")]
        d: usize,
        #[serde(default = "default_zd_samples")]
        samples: u64,
    },
    Permutation {
        b: u32,
    },
}

impl NullModelChoice {
    pub fn describe(&self) -> String {
        match self {
            NullModelChoice::Exact => "exact".into(),
            NullModelChoice::Mc { reps } => format!("mc:{reps}"),
            NullModelChoice::Asymptotic { d, .. } => format!("asymptotic:d={d}"),
            NullModelChoice::Permutation { b } => format!("permutation:B={b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSpec {
    pub statistic: StatisticKind,
    pub null: NullModelChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub label: String,
    #[serde(default)]
    pub delta: f64,
    pub m: usize,
    pub n: usize,
    pub x: DistributionSpec,
    pub y: DistributionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerStudyConfig {
    pub alpha: f64,
    pub iterations: u32,
    pub seed: u64,
    pub tests: Vec<TestSpec>,
    pub scenarios: Vec<Scenario>,
}

impl PowerStudyConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: PowerStudyConfig = toml::from_str(text)
            .map_err(|e| Error::InvalidParameters(format!("config parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations < 100 {
            return bad(format!(
                "iterations must be at least 100, got {}",
                self.iterations
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        if self.tests.is_empty() || self.scenarios.is_empty() {
            return bad("config needs at least one test and one scenario");
        }
        for (i, sc) in self.scenarios.iter().enumerate() {
            if sc.m == 0 || sc.n == 0 {
                return bad(format!("scenarios[{i}]: sample sizes must be positive"));
            }
            if sc.x.dim() != sc.y.dim() {
                return Err(Error::DimensionMismatch {
                    expected: sc.x.dim(),
                    found: sc.y.dim(),
                });
            }
            PreparedDist::prepare(&sc.x)
                .map_err(|e| Error::InvalidParameters(format!("scenarios[{i}].x: {e}")))?;
            PreparedDist::prepare(&sc.y)
                .map_err(|e| Error::InvalidParameters(format!("scenarios[{i}].y: {e}")))?;
            for (j, test) in self.tests.iter().enumerate() {
                check_test_compat(test, sc).map_err(|e| {
                    Error::InvalidParameters(format!(
                        "tests[{j}] ({}) on scenarios[{i}] ({}): {e}",
                        test.statistic, sc.label
                    ))
                })?;
            }
        }
        Ok(())
    }
}

fn check_test_compat(test: &TestSpec, sc: &Scenario) -> Result<()> {
    use StatisticKind::*;
    let univariate = sc.x.is_univariate();
    match test.statistic {
        TM | Energy => {
            if !matches!(test.null, NullModelChoice::Permutation { .. }) {
                return bad(format!(
                    "{} supports only the permutation null model",
                    test.statistic
                ));
            }
            Ok(())
        }
        Tprime if sc.m != sc.n => Err(Error::UnbalancedSamples { m: sc.m, n: sc.n }),
        T | Tprime | Dhat | CvM | KS | Wilcoxon | Mood => {
            if !univariate {
                return bad("rank statistics require univariate scenarios");
            }
            match (&test.null, test.statistic) {
                (NullModelChoice::Asymptotic { .. }, T | KS | Wilcoxon | Mood) => Ok(()),
                (NullModelChoice::Asymptotic { .. }, _) => {
                    bad("the chi-square mixture asymptotic null is available for T; use T or an exact/mc null")
                }
                _ => Ok(()),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerCell {
    pub scenario: String,
    pub test: String,
    pub delta: f64,
    pub power: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerStudyResult {
    pub alpha: f64,
    pub iterations: u32,
    pub seed: u64,
    pub cells: Vec<PowerCell>,
}

impl PowerStudyResult {
    /// CSV rows mirroring the table layout: scenario, test, delta, power, se.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,test,delta,power,se\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6}\n",
                c.scenario, c.test, c.delta, c.power, c.se
            ));
        }
        out
    }

    pub fn power(&self, scenario: &str, test: &str) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.scenario == scenario && c.test == test)
            .map(|c| c.power)
    }
}

/// Resolved per-test inference machinery, shared across replicates.
enum NullCtx {
    Table(Arc<NullDistribution>),
    ZdTail {
        sorted: Arc<Vec<f64>>,
        mean: f64,
        sd: f64,
    },
    KsAsymptotic,
    NormalApprox,
    Permutation {
        b: u32,
    },
}

/// Runs the power study. For each scenario x test the result cell holds the
/// fraction of the M replicates with p-value <= alpha and its Monte-Carlo
/// standard error. Any replicate failure aborts the study.
pub fn run_power_study(config: &PowerStudyConfig) -> Result<PowerStudyResult> {
    config.validate()?;
    let mut table_cache: HashMap<(StatisticKind, usize, usize, String), Arc<NullDistribution>> =
        HashMap::new();
    let mut zd_cache: HashMap<(usize, u64), Arc<Vec<f64>>> = HashMap::new();
    let mut cells = Vec::new();

    for (s_idx, sc) in config.scenarios.iter().enumerate() {
        let prep_x = PreparedDist::prepare(&sc.x)?;
        let prep_y = PreparedDist::prepare(&sc.y)?;
        let univariate = sc.x.is_univariate();
        let dim = sc.x.dim();

        let mut contexts = Vec::with_capacity(config.tests.len());
        for test in &config.tests {
            let ctx = match &test.null {
                NullModelChoice::Exact => {
                    let key = (test.statistic, sc.m, sc.n, "exact".to_string());
                    let table = match table_cache.get(&key) {
                        Some(t) => t.clone(),
                        None => {
                            let t = Arc::new(exact_null(sc.m, sc.n, test.statistic)?);
                            table_cache.insert(key, t.clone());
                            t
                        }
                    };
                    NullCtx::Table(table)
                }
                NullModelChoice::Mc { reps } => {
                    let key = (test.statistic, sc.m, sc.n, format!("mc:{reps}"));
                    let table = match table_cache.get(&key) {
                        Some(t) => t.clone(),
                        None => {
                            let null_seed = derive_seed(
                                config.seed,
                                0x6e75_0000 ^ (sc.m as u64) << 16 ^ sc.n as u64,
                            );
                            let t =
                                Arc::new(mc_null(sc.m, sc.n, test.statistic, *reps, null_seed)?);
                            table_cache.insert(key, t.clone());
                            t
                        }
                    };
                    NullCtx::Table(table)
                }
                NullModelChoice::Asymptotic { d, samples } => match test.statistic {
                    StatisticKind::KS => NullCtx::KsAsymptotic,
                    StatisticKind::Wilcoxon | StatisticKind::Mood => NullCtx::NormalApprox,
                    _ => {
                        let key = (*d, *samples);
                        let sorted = match zd_cache.get(&key) {
                            Some(s) => s.clone(),
                            None => {
                                let zd_seed = derive_seed(config.seed, 0x7d00 ^ *d as u64);
                                let mut s =
                                    crate::asymptotic::sample_zd(*d, *samples as usize, zd_seed);
                                s.sort_by(f64::total_cmp);
                                let s = Arc::new(s);
                                zd_cache.insert(key, s.clone());
                                s
                            }
                        };
                        let moments = crate::asymptotic::moments_t(sc.m, sc.n);
                        NullCtx::ZdTail {
                            sorted,
                            mean: moments.mean,
                            sd: moments.variance.sqrt(),
                        }
                    }
                },
                NullModelChoice::Permutation { b } => NullCtx::Permutation { b: *b },
            };
            contexts.push(ctx);
        }

        let rejections = (0..config.iterations as u64)
            .into_par_iter()
            .map(|rep| -> Result<Vec<u64>> {
                let mut rng = substream_rng(config.seed, ((s_idx as u64) << 32) | rep);
                let mut flags = vec![0u64; config.tests.len()];
                if univariate {
                    let x = Sample::new(prep_x.draw_univariate(&mut rng, sc.m))?;
                    let y = Sample::new(prep_y.draw_univariate(&mut rng, sc.n))?;
                    let pool = pool_and_rank(&x, &y, TiePolicy::Reject)?;
                    for (t_idx, (test, ctx)) in config.tests.iter().zip(&contexts).enumerate() {
                        let p = univariate_pvalue(
                            test,
                            ctx,
                            &x,
                            &y,
                            &pool,
                            perm_seed(config.seed, s_idx, rep, t_idx),
                        )?;
                        flags[t_idx] = u64::from(p <= config.alpha);
                    }
                } else {
                    let x = PointSample::from_flat(prep_x.draw_points(&mut rng, sc.m, dim), dim)?;
                    let y = PointSample::from_flat(prep_y.draw_points(&mut rng, sc.n, dim), dim)?;
                    for (t_idx, (test, ctx)) in config.tests.iter().zip(&contexts).enumerate() {
                        let b = match ctx {
                            NullCtx::Permutation { b } => *b,
                            _ => unreachable!("validated: multivariate tests are permutation"),
                        };
                        let seed = perm_seed(config.seed, s_idx, rep, t_idx);
                        let p = match test.statistic {
                            StatisticKind::TM => {
                                crate::spatial::permutation_pvalue_tm(&x, &y, b, seed)?.p_value
                            }
                            StatisticKind::Energy => energy_permutation_pvalue(&x, &y, b, seed)?,
                            _ => unreachable!(),
                        };
                        flags[t_idx] = u64::from(p <= config.alpha);
                    }
                }
                Ok(flags)
            })
            .try_reduce(
                || vec![0u64; config.tests.len()],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    Ok(a)
                },
            )?;

        for (test, count) in config.tests.iter().zip(&rejections) {
            let p = *count as f64 / config.iterations as f64;
            cells.push(PowerCell {
                scenario: sc.label.clone(),
                test: test.statistic.name().to_string(),
                delta: sc.delta,
                power: p,
                se: (p * (1.0 - p) / config.iterations as f64).sqrt(),
            });
        }
    }

    Ok(PowerStudyResult {
        alpha: config.alpha,
        iterations: config.iterations,
        seed: config.seed,
        cells,
    })
}

fn perm_seed(seed: u64, s_idx: usize, rep: u64, t_idx: usize) -> u64 {
    derive_seed(seed, ((s_idx as u64) << 40) ^ (rep << 8) ^ t_idx as u64)
}

fn univariate_pvalue(
    test: &TestSpec,
    ctx: &NullCtx,
    x: &Sample,
    y: &Sample,
    pool: &RankedPool,
    seed: u64,
) -> Result<f64> {
    match ctx {
        NullCtx::Table(null) => {
            let observed = crate::nulldist::rank_statistic_value(test.statistic, pool)?;
            Ok(pvalue_from_null(observed, null))
        }
        NullCtx::ZdTail { sorted, mean, sd } => {
            let t = crate::nulldist::rank_statistic_value(StatisticKind::T, pool)?;
            let z = (t - mean) / sd;
            let ge = sorted.len() - sorted.partition_point(|&v| v < z);
            Ok((1.0 + ge as f64) / (sorted.len() as f64 + 1.0))
        }
        NullCtx::KsAsymptotic => Ok(crate::stats::ks_pvalue(pool)),
        NullCtx::NormalApprox => Ok(match test.statistic {
            StatisticKind::Wilcoxon => crate::stats::wilcoxon_pvalue(pool),
            StatisticKind::Mood => crate::stats::mood_pvalue(pool),
            _ => unreachable!(),
        }),
        NullCtx::Permutation { b } => {
            match test.statistic {
                StatisticKind::Energy => energy_permutation_pvalue(
                    &PointSample::from_univariate(x),
                    &PointSample::from_univariate(y),
                    *b,
                    seed,
                ),
                StatisticKind::TM => Ok(crate::spatial::permutation_pvalue_tm(
                    &PointSample::from_univariate(x),
                    &PointSample::from_univariate(y),
                    *b,
                    seed,
                )?
                .p_value),
                kind => {
                    let stat = move |a: &[f64], b_vals: &[f64]| {
                        let sa = Sample::new(a.to_vec()).unwrap();
                        let sb = Sample::new(b_vals.to_vec()).unwrap();
                        let p = pool_and_rank(&sa, &sb, TiePolicy::Reject).unwrap();
                        crate::nulldist::rank_statistic_value(kind, &p).unwrap()
                    };
                    Ok(crate::nulldist::permutation_test(
                        kind,
                        stat,
                        x.values(),
                        y.values(),
                        *b,
                        seed,
                    )?
                    .p_value)
                }
            }
        }
    }
}

fn energy_permutation_pvalue(x: &PointSample, y: &PointSample, b: u32, seed: u64) -> Result<f64> {
    let dim = x.dim();
    let xs: Vec<Vec<f64>> = x.points().map(|p| p.to_vec()).collect();
    let ys: Vec<Vec<f64>> = y.points().map(|p| p.to_vec()).collect();
    let stat = move |a: &[Vec<f64>], b_pts: &[Vec<f64>]| {
        let pa = PointSample::from_flat(a.concat(), dim).unwrap();
        let pb = PointSample::from_flat(b_pts.concat(), dim).unwrap();
        crate::stats::statistic_energy(&pa, &pb).unwrap()
    };
    Ok(crate::nulldist::permutation_test(StatisticKind::Energy, stat, &xs, &ys, b, seed)?.p_value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn uni(spec: &DistributionSpec, size: usize, seed: u64) -> Vec<f64> {
        match draw_sample(spec, size, seed).unwrap() {
            DrawnSample::Univariate(s) => s.values().to_vec(),
            _ => panic!("expected univariate"),
        }
    }

    #[test]
    fn normal_sample_mean() {
        let spec = DistributionSpec::Normal { mean: 0.0, sd: 1.0 };
        let vals = uni(&spec, 100_000, 1);
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!(mean.abs() < 4.0 / (100_000f64).sqrt());
    }

    #[test]
    fn pareto_tail_probability() {
        // P(X > 4) = (2/4)^2 = 0.25 for shape 2, scale 2
        let spec = DistributionSpec::Pareto {
            shape: 2.0,
            scale: 2.0,
        };
        let vals = uni(&spec, 100_000, 2);
        let frac = vals.iter().filter(|&&v| v > 4.0).count() as f64 / vals.len() as f64;
        assert_abs_diff_eq!(frac, 0.25, epsilon = 0.01);
        assert!(vals.iter().all(|&v| v >= 2.0));
    }

    #[test]
    fn lognormal_median() {
        let spec = DistributionSpec::LogNormal {
            mu: 0.0,
            sigma: 1.0,
        };
        let mut vals = uni(&spec, 100_000, 3);
        vals.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(vals[50_000], 1.0, epsilon = 0.02);
    }

    #[test]
    fn exponential_mean() {
        let spec = DistributionSpec::Exponential { rate: 2.0 };
        let vals = uni(&spec, 100_000, 4);
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert_abs_diff_eq!(mean, 0.5, epsilon = 0.02);
    }

    #[test]
    fn student_t_shift_moves_median() {
        let spec = DistributionSpec::StudentT {
            df: 3.0,
            shift: 1.5,
        };
        let mut vals = uni(&spec, 100_000, 5);
        vals.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(vals[50_000], 1.5, epsilon = 0.03);
    }

    #[test]
    fn draw_deterministic_per_seed() {
        let spec = DistributionSpec::Normal { mean: 0.0, sd: 1.0 };
        assert_eq!(
            draw_sample(&spec, 100, 9).unwrap(),
            draw_sample(&spec, 100, 9).unwrap()
        );
        assert_ne!(
            draw_sample(&spec, 100, 9).unwrap(),
            draw_sample(&spec, 100, 10).unwrap()
        );
    }

    #[test]
    fn mv_normal_sample_covariance() {
        let spec = DistributionSpec::MvNormal {
            mean: vec![1.0, -1.0],
            cov: vec![vec![2.0, 0.8], vec![0.8, 1.0]],
        };
        let pts = match draw_sample(&spec, 200_000, 6).unwrap() {
            DrawnSample::Multivariate(p) => p,
            _ => panic!(),
        };
        let n = pts.len() as f64;
        let mean0: f64 = pts.points().map(|p| p[0]).sum::<f64>() / n;
        let mean1: f64 = pts.points().map(|p| p[1]).sum::<f64>() / n;
        assert_abs_diff_eq!(mean0, 1.0, epsilon = 0.02);
        assert_abs_diff_eq!(mean1, -1.0, epsilon = 0.02);
        let cov01: f64 = pts
            .points()
            .map(|p| (p[0] - mean0) * (p[1] - mean1))
            .sum::<f64>()
            / n;
        assert_abs_diff_eq!(cov01, 0.8, epsilon = 0.03);
    }

    #[test]
    fn mv_t1_median_at_center_with_heavy_tails() {
        let spec = DistributionSpec::MvT1 {
            mean: vec![2.0, 2.0],
            scatter: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        let pts = match draw_sample(&spec, 100_000, 7).unwrap() {
            DrawnSample::Multivariate(p) => p,
            _ => panic!(),
        };
        let mut first: Vec<f64> = pts.points().map(|p| p[0]).collect();
        first.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(first[50_000], 2.0, epsilon = 0.03);
        // Cauchy marginals wander far beyond any normal range
        assert!(first.iter().any(|&v| v.abs() > 50.0));
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(draw_sample(
            &DistributionSpec::Normal {
                mean: 0.0,
                sd: -1.0
            },
            10,
            1
        )
        .is_err());
        assert!(draw_sample(
            &DistributionSpec::Pareto {
                shape: 0.0,
                scale: 2.0
            },
            10,
            1
        )
        .is_err());
        let bad_cov = DistributionSpec::MvNormal {
            mean: vec![0.0, 0.0],
            cov: vec![vec![1.0, 2.0], vec![2.0, 1.0]], // not positive definite
        };
        assert!(draw_sample(&bad_cov, 10, 1).is_err());
    }

    #[test]
    fn reciprocal_covariance_inverts() {
        let cov = vec![
            vec![1.0, 0.5, 0.5],
            vec![0.5, 1.0, 0.5],
            vec![0.5, 0.5, 1.0],
        ];
        let rec = reciprocal_covariance(&cov).unwrap();
        // same eigenvectors with reciprocal eigenvalues means A * B = I
        for (i, row) in cov.iter().enumerate() {
            for j in 0..3 {
                let prod: f64 = row.iter().zip(&rec).map(|(a, r)| a * r[j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(prod, expect, epsilon = 1e-10);
            }
        }
    }

    fn tiny_config() -> PowerStudyConfig {
        PowerStudyConfig {
            alpha: 0.05,
            iterations: 200,
            seed: 42,
            tests: vec![TestSpec {
                statistic: StatisticKind::T,
                null: NullModelChoice::Mc { reps: 5000 },
            }],
            scenarios: vec![Scenario {
                label: "h0".into(),
                delta: 0.0,
                m: 15,
                n: 15,
                x: DistributionSpec::Normal { mean: 0.0, sd: 1.0 },
                y: DistributionSpec::Normal { mean: 0.0, sd: 1.0 },
            }],
        }
    }

    #[test]
    fn power_study_reproducible() {
        let config = tiny_config();
        let a = run_power_study(&config).unwrap();
        let b = run_power_study(&config).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        let size = a.power("h0", "T").unwrap();
        assert!((0.0..0.15).contains(&size), "size {size}");
    }

    #[test]
    fn power_study_detects_separation() {
        let mut config = tiny_config();
        config.scenarios.push(Scenario {
            label: "shift".into(),
            delta: 3.0,
            m: 15,
            n: 15,
            x: DistributionSpec::Normal { mean: 0.0, sd: 1.0 },
            y: DistributionSpec::Normal { mean: 3.0, sd: 1.0 },
        });
        let result = run_power_study(&config).unwrap();
        assert!(result.power("shift", "T").unwrap() > 0.95);
    }

    #[test]
    fn config_validation() {
        let mut config = tiny_config();
        config.iterations = 50;
        assert!(config.validate().is_err());

        let mut config = tiny_config();
        config.alpha = 1.2;
        assert!(matches!(config.validate(), Err(Error::InvalidAlpha(_))));

        // TM with anything but a permutation null is rejected
        let mut config = tiny_config();
        config.tests = vec![TestSpec {
            statistic: StatisticKind::TM,
            null: NullModelChoice::Mc { reps: 5000 },
        }];
        assert!(config.validate().is_err());

        // Tprime needs balance
        let mut config = tiny_config();
        config.scenarios[0].n = 10;
        config.tests = vec![TestSpec {
            statistic: StatisticKind::Tprime,
            null: NullModelChoice::Exact,
        }];
        assert!(config.validate().is_err());
    }

    #[test]
    fn config_from_toml() {
        let text = r#"
alpha = 0.05
iterations = 200
seed = 7

[[tests]]
statistic = "T"
null = { kind = "mc", reps = 5000 }

[[tests]]
statistic = "Wilcoxon"
null = { kind = "asymptotic", d = 1 }

[[scenarios]]
label = "normal-0.5"
delta = 0.5
m = 20
n = 20
x = { family = "normal", mean = 0.0, sd = 1.0 }
y = { family = "normal", mean = 0.5, sd = 1.0 }
"#;
        let config = PowerStudyConfig::from_toml_str(text).unwrap();
        assert_eq!(config.tests.len(), 2);
        assert_eq!(config.scenarios[0].delta, 0.5);
        let result = run_power_study(&config).unwrap();
        assert_eq!(result.cells.len(), 2);
        let csv = result.to_csv();
        assert!(csv.starts_with("scenario,test,delta,power,se\n"));
        assert!(csv.contains("normal-0.5,T,0.5,"));
    }

    #[test]
    fn config_parse_error_carries_context() {
        let err = PowerStudyConfig::from_toml_str("alpha = \"oops\"").unwrap_err();
        assert!(err.to_string().contains("alpha"));
    }
}
