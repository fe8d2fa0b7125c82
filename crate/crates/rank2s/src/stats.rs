//! Univariate two-sample statistics.
//!
//! The central statistic `T` is the difference between the average
//! between-group standardized-rank distance and the averages of the
//! within-group distances, scaled by mn/N. Within-group averages divide by
//! m^2 and n^2 with the zero diagonal terms included. Classical companions
//! (Cramér–von Mises, Kolmogorov–Smirnov, Wilcoxon, Mood, the energy
//! statistic) and the population discrepancy D are provided for the power
//! harness and for cross-checks.

use crate::error::{Error, Result};
use crate::rank::RankedPool;
use crate::spatial::PointSample;
use serde::{Deserialize, Serialize};

/// Identifies a two-sample statistic in outcomes, null-distribution caches
/// and power-study configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StatisticKind {
    T,
    Tprime,
    Dhat,
    CvM,
    Energy,
    KS,
    Wilcoxon,
    Mood,
    TM,
}

impl StatisticKind {
    pub fn name(&self) -> &'static str {
        match self {
            StatisticKind::T => "T",
            StatisticKind::Tprime => "Tprime",
            StatisticKind::Dhat => "Dhat",
            StatisticKind::CvM => "CvM",
            StatisticKind::Energy => "Energy",
            StatisticKind::KS => "KS",
            StatisticKind::Wilcoxon => "Wilcoxon",
            StatisticKind::Mood => "Mood",
            StatisticKind::TM => "TM",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "T" => Ok(StatisticKind::T),
            "Tprime" => Ok(StatisticKind::Tprime),
            "Dhat" => Ok(StatisticKind::Dhat),
            "CvM" => Ok(StatisticKind::CvM),
            "Energy" => Ok(StatisticKind::Energy),
            "KS" => Ok(StatisticKind::KS),
            "Wilcoxon" => Ok(StatisticKind::Wilcoxon),
            "Mood" => Ok(StatisticKind::Mood),
            "TM" => Ok(StatisticKind::TM),
            other => Err(Error::InvalidParameters(format!(
                "unknown statistic `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The rank statistic T: average between-group standardized-rank distance
/// minus the within-group averages, scaled by mn/N.
pub fn statistic_t(pool: &RankedPool) -> f64 {
    let xs = pool.x_standardized_ranks();
    let ys = pool.y_standardized_ranks();
    let m = xs.len() as f64;
    let n = ys.len() as f64;
    let total = m + n;

    let mut cross = 0.0;
    for &a in xs {
        for &b in ys {
            cross += (a - b).abs();
        }
    }
    let mut within_x = 0.0;
    for i in 0..xs.len() {
        for j in (i + 1)..xs.len() {
            within_x += (xs[i] - xs[j]).abs();
        }
    }
    let mut within_y = 0.0;
    for i in 0..ys.len() {
        for j in (i + 1)..ys.len() {
            within_y += (ys[i] - ys[j]).abs();
        }
    }

    // within sums run over all ordered pairs including the zero diagonal,
    // hence the doubling and the m^2, n^2 divisors
    m * n / total * (cross / (m * n) - within_x / (m * m) - within_y / (n * n))
}

/// The balanced-sample statistic T': the plain average of between-group
/// standardized-rank distances. Requires m = n, where
/// T = n*T' - (4n^2-1)/(12n).
pub fn statistic_t_prime(pool: &RankedPool) -> Result<f64> {
    if pool.m() != pool.n() {
        return Err(Error::UnbalancedSamples {
            m: pool.m(),
            n: pool.n(),
        });
    }
    let xs = pool.x_standardized_ranks();
    let ys = pool.y_standardized_ranks();
    let mut cross = 0.0;
    for &a in xs {
        for &b in ys {
            cross += (a - b).abs();
        }
    }
    Ok(cross / (xs.len() as f64 * ys.len() as f64))
}

/// The consistent estimate of the population discrepancy D:
/// `Dhat = N/(mn) * T`.
pub fn statistic_dhat(pool: &RankedPool) -> f64 {
    let m = pool.m() as f64;
    let n = pool.n() as f64;
    (m + n) / (m * n) * statistic_t(pool)
}

/// Pooled-order walk shared by the ecdf statistics: calls `visit` once per
/// distinct pooled value with (multiplicity, F_m - G_n just below, just at).
fn walk_ecdf_steps(pool: &RankedPool, mut visit: impl FnMut(usize, f64, f64)) {
    let total = pool.n_total();
    let m = pool.m() as f64;
    let n = pool.n() as f64;
    let ranks = pool.natural_ranks();
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| ranks[a].partial_cmp(&ranks[b]).unwrap());

    let mut count_x = 0usize;
    let mut count_seen = 0usize;
    let mut below = 0.0;
    let mut i = 0;
    while i < total {
        let mut j = i + 1;
        while j < total && ranks[order[j]] == ranks[order[i]] {
            j += 1;
        }
        for &idx in &order[i..j] {
            if idx < pool.m() {
                count_x += 1;
            }
        }
        count_seen += j - i;
        let at = count_x as f64 / m - (count_seen - count_x) as f64 / n;
        visit(j - i, below, at);
        below = at;
        i = j;
    }
}

/// Cramér–von Mises-type statistic: the squared discrepancy between the two
/// empirical cdfs, accumulated on both sides of every pooled observation
/// (each one-sided limit carries weight 1/N), scaled by mn/N.
pub fn statistic_cvm(pool: &RankedPool) -> f64 {
    let m = pool.m() as f64;
    let n = pool.n() as f64;
    let total = m + n;
    let mut sum = 0.0;
    walk_ecdf_steps(pool, |mult, below, at| {
        sum += mult as f64 * (below * below + at * at);
    });
    m * n / total * sum / total
}

/// Kolmogorov–Smirnov statistic: sup |F_m - G_n| over the pooled sample.
pub fn statistic_ks(pool: &RankedPool) -> f64 {
    let mut sup = 0.0f64;
    walk_ecdf_steps(pool, |_, _, at| {
        sup = sup.max(at.abs());
    });
    sup
}

/// Wilcoxon rank sum of the X group (natural ranks).
pub fn statistic_wilcoxon(pool: &RankedPool) -> f64 {
    pool.x_natural_ranks().iter().sum()
}

/// Standardized Wilcoxon rank sum, using the exact null moments
/// mean m(N+1)/2 and variance mn(N+1)/12.
pub fn wilcoxon_z(pool: &RankedPool) -> f64 {
    let m = pool.m() as f64;
    let n = pool.n() as f64;
    let total = m + n;
    let w = statistic_wilcoxon(pool);
    (w - m * (total + 1.0) / 2.0) / (m * n * (total + 1.0) / 12.0).sqrt()
}

/// Two-sided p-value for the Wilcoxon rank sum by normal approximation,
/// without continuity correction.
pub fn wilcoxon_pvalue(pool: &RankedPool) -> f64 {
    two_sided_normal_pvalue(wilcoxon_z(pool))
}

/// Mood scale statistic: sum over the X group of (R_i - (N+1)/2)^2.
pub fn statistic_mood(pool: &RankedPool) -> f64 {
    let center = (pool.n_total() as f64 + 1.0) / 2.0;
    pool.x_natural_ranks()
        .iter()
        .map(|&r| (r - center) * (r - center))
        .sum()
}

/// Standardized Mood statistic, using the exact null moments
/// mean m(N^2-1)/12 and variance mn(N+1)(N^2-4)/180.
pub fn mood_z(pool: &RankedPool) -> f64 {
    let m = pool.m() as f64;
    let n = pool.n() as f64;
    let total = m + n;
    let mean = m * (total * total - 1.0) / 12.0;
    let var = m * n * (total + 1.0) * (total * total - 4.0) / 180.0;
    (statistic_mood(pool) - mean) / var.sqrt()
}

/// Two-sided p-value for the Mood statistic by normal approximation.
pub fn mood_pvalue(pool: &RankedPool) -> f64 {
    two_sided_normal_pvalue(mood_z(pool))
}

/// Asymptotic Kolmogorov–Smirnov p-value from the Kolmogorov distribution,
/// evaluated at lambda = sqrt(mn/N) * D.
pub fn ks_pvalue(pool: &RankedPool) -> f64 {
    let m = pool.m() as f64;
    let n = pool.n() as f64;
    let lambda = (m * n / (m + n)).sqrt() * statistic_ks(pool);
    kolmogorov_sf(lambda)
}

/// Survival function of the Kolmogorov distribution,
/// Q(lambda) = 2 * sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2).
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.18 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-14 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Standard normal cdf.
pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn two_sided_normal_pvalue(z: f64) -> f64 {
    libm::erfc(z.abs() / std::f64::consts::SQRT_2).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Energy statistic on raw observations: mean cross Euclidean distance
/// minus the within-group means (divisors m^2, n^2), scaled by mn/N.
pub fn statistic_energy(x: &PointSample, y: &PointSample) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    let m = x.len() as f64;
    let n = y.len() as f64;
    let total = m + n;

    let mut cross = 0.0;
    for i in 0..x.len() {
        for j in 0..y.len() {
            cross += euclidean(x.point(i), y.point(j));
        }
    }
    let mut within_x = 0.0;
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            within_x += euclidean(x.point(i), x.point(j));
        }
    }
    let mut within_y = 0.0;
    for i in 0..y.len() {
        for j in (i + 1)..y.len() {
            within_y += euclidean(y.point(i), y.point(j));
        }
    }

    Ok(m * n / total * (cross / (m * n) - within_x / (m * m) - within_y / (n * n)))
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// Numerically integrates the population discrepancy
/// D = integral of (F - G)^2 with respect to the mixture tau*F + (1-tau)*G,
/// by the midpoint rule on the mixture-quantile grid. The working interval
/// is expanded until both cdfs are below 1e-8 on the left and above 1-1e-8
/// on the right, which handles unbounded supports.
pub fn population_d<F, G>(f_cdf: F, g_cdf: G, tau: f64, grid_size: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidParameters(format!(
            "tau must lie in [0,1], got {tau}"
        )));
    }
    if grid_size < 100 {
        return Err(Error::InvalidParameters(format!(
            "grid_size must be at least 100, got {grid_size}"
        )));
    }

    const EPS: f64 = 1e-8;
    let mut lo = -1.0f64;
    let mut hi = 1.0f64;
    for _ in 0..600 {
        if f_cdf(lo) <= EPS && g_cdf(lo) <= EPS {
            break;
        }
        lo *= 2.0;
    }
    for _ in 0..600 {
        if f_cdf(hi) >= 1.0 - EPS && g_cdf(hi) >= 1.0 - EPS {
            break;
        }
        hi *= 2.0;
    }
    if !(f_cdf(lo) <= EPS && g_cdf(lo) <= EPS && f_cdf(hi) >= 1.0 - EPS && g_cdf(hi) >= 1.0 - EPS) {
        return Err(Error::NonMonotoneCdf);
    }

    // spot-check monotonicity and range on a coarse grid
    let checks = 129;
    let mut prev_f = -1e-12;
    let mut prev_g = -1e-12;
    for i in 0..=checks {
        let x = lo + (hi - lo) * i as f64 / checks as f64;
        let (fv, gv) = (f_cdf(x), g_cdf(x));
        if fv < prev_f - 1e-9
            || gv < prev_g - 1e-9
            || !(-1e-9..=1.0 + 1e-9).contains(&fv)
            || !(-1e-9..=1.0 + 1e-9).contains(&gv)
        {
            return Err(Error::NonMonotoneCdf);
        }
        prev_f = fv;
        prev_g = gv;
    }

    let h = |x: f64| tau * f_cdf(x) + (1.0 - tau) * g_cdf(x);
    let mut sum = 0.0;
    for j in 0..grid_size {
        let t = (j as f64 + 0.5) / grid_size as f64;
        // invert the mixture cdf by bisection
        let (mut a, mut b) = (lo, hi);
        for _ in 0..80 {
            let mid = 0.5 * (a + b);
            if h(mid) < t {
                a = mid;
            } else {
                b = mid;
            }
        }
        let x = 0.5 * (a + b);
        let diff = f_cdf(x) - g_cdf(x);
        sum += diff * diff;
    }
    Ok(sum / grid_size as f64)
}
