//! Closed-form moments of T, its limiting chi-square mixture, asymptotic
//! critical values, and a numerical check of the kernel eigensystem.
//!
//! The standardized statistic converges to
//! Z_inf = -(sqrt(45)/2) * sum_k lambda_k (chi2_1k - 1) with
//! lambda_k = -2/(pi^2 k^2). In practice the mixture is truncated at order
//! d; quantiles of Z_d are estimated by Monte Carlo and combined with the
//! exact finite-sample moments into critical values
//! c = E T + sd(T) * q_{Z_d}.

use crate::error::{Error, Result};
use crate::rng::substream_rng;
use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Exact null mean and variance of T for sample sizes (m, n).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TMoments {
    pub mean: f64,
    pub variance: f64,
    pub m: usize,
    pub n: usize,
}

/// Closed-form null moments: E T = (N+1)/(6N) and
/// Var(T) = (N+1)/(180 N^2) * [4(N+1) - 3N^2/(mn)].
pub fn moments_t(m: usize, n: usize) -> TMoments {
    assert!(m >= 1 && n >= 1, "sample sizes must be positive");
    let (mf, nf) = (m as f64, n as f64);
    let total = mf + nf;
    let mean = (total + 1.0) / (6.0 * total);
    let variance = (total + 1.0) / (180.0 * total * total)
        * (4.0 * (total + 1.0) - 3.0 * total * total / (mf * nf));
    TMoments {
        mean,
        variance,
        m,
        n,
    }
}

/// k-th eigenvalue of the rank kernel operator: -2/(pi^2 k^2).
pub fn eigenvalue(k: usize) -> f64 {
    -2.0 / (PI * PI * (k * k) as f64)
}

/// Var(Z_d)/Var(Z_inf) = (90/pi^4) * sum_{k<=d} k^-4.
pub fn mixture_variance_ratio(d: usize) -> f64 {
    assert!(d >= 1, "truncation order must be at least 1");
    let sum: f64 = (1..=d).map(|k| ((k * k) as f64).powi(-2)).sum();
    90.0 / PI.powi(4) * sum
}

const ZD_CHUNK: usize = 1 << 16;
const MIN_ZD_SAMPLES: u64 = 100_000;

/// Draws `count` replicates of Z_d = (sqrt(45)/pi^2) sum_{k<=d} k^-2 (chi2_1k - 1),
/// with the chi-square variates generated as squared standard normals.
///
/// Replicates are produced in fixed chunks, one ChaCha stream per
/// (harmonic index k, chunk), so a given (seed, count) yields bit-identical
/// output for every thread count, and truncations Z_d, Z_d' share their
/// common chi-square draws (common random numbers across d).
pub fn sample_zd(d: usize, count: usize, seed: u64) -> Vec<f64> {
    let mut acc = vec![0.0f64; count];
    for k in 1..=d {
        let inv_k2 = 1.0 / ((k * k) as f64);
        acc.par_chunks_mut(ZD_CHUNK)
            .enumerate()
            .for_each(|(chunk, slice)| {
                let mut rng = substream_rng(seed, ((k as u64) << 24) | chunk as u64);
                for v in slice.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *v += (z * z - 1.0) * inv_k2;
                }
            });
    }
    let scale = 45.0f64.sqrt() / (PI * PI);
    acc.par_iter_mut().for_each(|v| *v *= scale);
    acc
}

/// Monte-Carlo (1-alpha)-quantile of Z_d, deterministic per seed.
pub fn quantile_zd(d: usize, alpha: f64, sample_count: u64, seed: u64) -> Result<f64> {
    if d < 1 {
        return Err(Error::InvalidParameters("d must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if sample_count < MIN_ZD_SAMPLES {
        return Err(Error::InvalidParameters(format!(
            "quantile estimation needs at least {MIN_ZD_SAMPLES} samples, got {sample_count}"
        )));
    }
    let mut samples = sample_zd(d, sample_count as usize, seed);
    let rank = ((1.0 - alpha) * sample_count as f64).ceil() as usize;
    let idx = rank.clamp(1, sample_count as usize) - 1;
    let (_, q, _) = samples.select_nth_unstable_by(idx, f64::total_cmp);
    Ok(*q)
}

/// Truncated mixture Z_d with its eigenvalues and a quantile cache.
#[derive(Debug, Clone)]
pub struct MixtureSpec {
    d: usize,
    eigenvalues: Vec<f64>,
    scale: f64,
    sample_count: u64,
    seed: u64,
    quantile_cache: BTreeMap<u64, f64>,
}

impl MixtureSpec {
    pub fn new(d: usize, sample_count: u64, seed: u64) -> Result<Self> {
        if d < 1 {
            return Err(Error::InvalidParameters("d must be at least 1".into()));
        }
        if sample_count < MIN_ZD_SAMPLES {
            return Err(Error::InvalidParameters(format!(
                "quantile estimation needs at least {MIN_ZD_SAMPLES} samples, got {sample_count}"
            )));
        }
        Ok(Self {
            d,
            eigenvalues: (1..=d).map(eigenvalue).collect(),
            scale: 45.0f64.sqrt() / 2.0,
            sample_count,
            seed,
            quantile_cache: BTreeMap::new(),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// (1-alpha)-quantile of Z_d, computed once per alpha and cached.
    pub fn quantile(&mut self, alpha: f64) -> Result<f64> {
        if let Some(&q) = self.quantile_cache.get(&alpha.to_bits()) {
            return Ok(q);
        }
        let q = quantile_zd(self.d, alpha, self.sample_count, self.seed)?;
        self.quantile_cache.insert(alpha.to_bits(), q);
        Ok(q)
    }

    /// Cached (alpha, quantile) pairs, for persistence.
    pub fn cached_quantiles(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.quantile_cache
            .iter()
            .map(|(&bits, &q)| (f64::from_bits(bits), q))
    }

    /// Seeds the cache, used when restoring from a quantile table file.
    pub fn insert_cached_quantile(&mut self, alpha: f64, q: f64) {
        self.quantile_cache.insert(alpha.to_bits(), q);
    }
}

/// Asymptotic critical value c_alpha(m, n) = E T + sd(T) * q_{Z_d}(alpha).
pub fn critical_value_asymptotic(
    alpha: f64,
    m: usize,
    n: usize,
    spec: &mut MixtureSpec,
) -> Result<f64> {
    let q = spec.quantile(alpha)?;
    let moments = moments_t(m, n);
    Ok(moments.mean + moments.variance.sqrt() * q)
}

/// The degenerate kernel on the copula scale:
/// h(u, v) = |u - v| + u(1-u) + v(1-v) - 2/3.
pub fn kernel_h(u: f64, v: f64) -> f64 {
    (u - v).abs() + u * (1.0 - u) + v * (1.0 - v) - 2.0 / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub approx: f64,
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelEigenReport {
    /// Leading negative eigenvalues of the discretized operator, paired
    /// with the closed-form references -2/(pi^2 k^2), k = 1..=k_max.
    pub pairs: Vec<EigenPair>,
    /// Sum of squared eigenvalues of the discretized operator; converges
    /// to Var h = 2/45.
    pub eigenvalue_square_sum: f64,
}

/// Discretizes the integral operator with kernel h on a uniform midpoint
/// grid over (0,1) (weights 1/grid_size), solves the dense symmetric
/// eigenproblem, and pairs the k_max most negative eigenvalues with their
/// closed-form references.
pub fn verify_kernel_eigensystem(grid_size: usize, k_max: usize) -> Result<KernelEigenReport> {
    if grid_size < 500 {
        return Err(Error::InvalidParameters(format!(
            "grid_size must be at least 500, got {grid_size}"
        )));
    }
    if k_max == 0 || k_max > 10 {
        return Err(Error::InvalidParameters(format!(
            "k_max must lie in 1..=10, got {k_max}"
        )));
    }
    let g = grid_size as f64;
    let matrix = DMatrix::from_fn(grid_size, grid_size, |i, j| {
        let u = (i as f64 + 0.5) / g;
        let v = (j as f64 + 0.5) / g;
        kernel_h(u, v) / g
    });
    let eigen = matrix.symmetric_eigen();
    let mut eigenvalues: Vec<f64> = eigen.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let pairs = (1..=k_max)
        .map(|k| EigenPair {
            approx: eigenvalues[k - 1],
            reference: eigenvalue(k),
        })
        .collect();
    let eigenvalue_square_sum = eigenvalues.iter().map(|v| v * v).sum();
    Ok(KernelEigenReport {
        pairs,
        eigenvalue_square_sum,
    })
}
