//! Spatial ranks and the multivariate two-sample statistic.
//!
//! The spatial rank of a query point with respect to a pooled point set is
//! the average of the unit vectors pointing from each pooled point toward
//! the query. The multivariate statistic applies the between-minus-within
//! energy combination to Euclidean distances between the spatial ranks of
//! the pooled points. It is not distribution free, so inference runs
//! through pooled-relabeling permutation.

use crate::error::{Error, Result};
use crate::nulldist::TestOutcome;
use crate::rank::Sample;
use crate::stats::StatisticKind;
use rayon::prelude::*;

/// A sample of d-dimensional points, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSample {
    data: Vec<f64>,
    len: usize,
    dim: usize,
}

impl PointSample {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySample);
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidParameters(
                "points must have at least one coordinate".into(),
            ));
        }
        let mut data = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            for &v in p {
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue { index: i, value: v });
                }
            }
            data.extend_from_slice(p);
        }
        Ok(Self {
            data,
            len: points.len(),
            dim,
        })
    }

    pub fn from_flat(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidParameters(format!(
                "flat buffer of length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        let len = data.len() / dim;
        if len == 0 {
            return Err(Error::EmptySample);
        }
        for (i, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    index: i / dim,
                    value: v,
                });
            }
        }
        Ok(Self { data, len, dim })
    }

    /// Views a univariate sample as points in dimension 1.
    pub fn from_univariate(sample: &Sample) -> Self {
        Self {
            data: sample.values().to_vec(),
            len: sample.len(),
            dim: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

/// Spatial rank of `query` with respect to `pool_points`:
/// the average over pooled points z of (query - z)/||query - z||.
/// A pooled point equal to the query contributes the zero vector.
pub fn spatial_rank(query: &[f64], pool_points: &PointSample) -> Result<Vec<f64>> {
    if query.len() != pool_points.dim() {
        return Err(Error::DimensionMismatch {
            expected: pool_points.dim(),
            found: query.len(),
        });
    }
    let d = pool_points.dim();
    let mut acc = vec![0.0; d];
    for z in pool_points.points() {
        let mut norm_sq = 0.0;
        for k in 0..d {
            let diff = query[k] - z[k];
            norm_sq += diff * diff;
        }
        if norm_sq == 0.0 {
            continue;
        }
        let norm = norm_sq.sqrt();
        for k in 0..d {
            acc[k] += (query[k] - z[k]) / norm;
        }
    }
    let count = pool_points.len() as f64;
    for a in &mut acc {
        *a /= count;
    }
    Ok(acc)
}

/// Spatial ranks of every pooled point with respect to the pooled set
/// itself, exploiting the antisymmetry of the unit vectors.
fn pooled_spatial_ranks(pooled: &PointSample) -> Vec<f64> {
    let total = pooled.len();
    let d = pooled.dim();
    let mut acc = vec![0.0; total * d];
    for i in 0..total {
        for j in (i + 1)..total {
            let (pi, pj) = (pooled.point(i), pooled.point(j));
            let mut norm_sq = 0.0;
            for k in 0..d {
                let diff = pi[k] - pj[k];
                norm_sq += diff * diff;
            }
            if norm_sq == 0.0 {
                continue;
            }
            let norm = norm_sq.sqrt();
            for k in 0..d {
                let u = (pi[k] - pj[k]) / norm;
                acc[i * d + k] += u;
                acc[j * d + k] -= u;
            }
        }
    }
    let count = total as f64;
    for a in &mut acc {
        *a /= count;
    }
    acc
}

fn pool_points(x: &PointSample, y: &PointSample) -> Result<PointSample> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    let mut data = Vec::with_capacity((x.len() + y.len()) * x.dim());
    data.extend_from_slice(&x.data);
    data.extend_from_slice(&y.data);
    Ok(PointSample {
        data,
        len: x.len() + y.len(),
        dim: x.dim(),
    })
}

/// Distance matrix between pooled spatial ranks, with row sums and the
/// grand total, which lets each relabeling be scored in O(m^2).
struct RankDistances {
    dist: Vec<f64>,
    rowsum: Vec<f64>,
    total: f64,
    n_pooled: usize,
}

impl RankDistances {
    fn build(pooled: &PointSample) -> Self {
        let total_pts = pooled.len();
        let d = pooled.dim();
        let ranks = pooled_spatial_ranks(pooled);
        let mut dist = vec![0.0; total_pts * total_pts];
        for i in 0..total_pts {
            for j in (i + 1)..total_pts {
                let mut s = 0.0;
                for k in 0..d {
                    let diff = ranks[i * d + k] - ranks[j * d + k];
                    s += diff * diff;
                }
                let v = s.sqrt();
                dist[i * total_pts + j] = v;
                dist[j * total_pts + i] = v;
            }
        }
        let rowsum: Vec<f64> = (0..total_pts)
            .map(|i| dist[i * total_pts..(i + 1) * total_pts].iter().sum())
            .collect();
        let total = rowsum.iter().sum();
        Self {
            dist,
            rowsum,
            total,
            n_pooled: total_pts,
        }
    }

    /// Statistic value for the relabeling that assigns `x_idx` to group X.
    fn statistic(&self, x_idx: &[usize], n_y: usize) -> f64 {
        let m = x_idx.len() as f64;
        let n = n_y as f64;
        let total_n = m + n;
        let mut within_x = 0.0;
        let mut rows = 0.0;
        for (a, &i) in x_idx.iter().enumerate() {
            rows += self.rowsum[i];
            for &j in &x_idx[(a + 1)..] {
                within_x += self.dist[i * self.n_pooled + j];
            }
        }
        within_x *= 2.0; // ordered pairs
        let cross = rows - within_x;
        let within_y = self.total - within_x - 2.0 * cross;
        m * n / total_n * (cross / (m * n) - within_x / (2.0 * m * m) - within_y / (2.0 * n * n))
    }
}

/// The multivariate spatial-rank statistic: the energy combination of
/// Euclidean distances between the pooled spatial ranks, with between-group
/// mean minus half of each within-group mean (divisors m^2, n^2), scaled by
/// mn/N. Ranks are computed once with respect to the pooled configuration.
pub fn statistic_tm(x: &PointSample, y: &PointSample) -> Result<f64> {
    let pooled = pool_points(x, y)?;
    let distances = RankDistances::build(&pooled);
    let x_idx: Vec<usize> = (0..x.len()).collect();
    Ok(distances.statistic(&x_idx, y.len()))
}

/// Pooled-relabeling permutation test for the multivariate statistic.
///
/// Spatial ranks depend only on the pooled point set, so they and the
/// rank-distance matrix are computed once; each of the B replicates only
/// redraws the group labels. The p-value uses the add-one estimator
/// (1 + #{replicates >= observed})/(B + 1) and is an exact function of
/// (inputs, B, seed) regardless of thread count.
pub fn permutation_pvalue_tm(
    x: &PointSample,
    y: &PointSample,
    b: u32,
    seed: u64,
) -> Result<TestOutcome> {
    if b < 99 {
        return Err(Error::InvalidParameters(format!(
            "permutation replicates must be at least 99, got {b}"
        )));
    }
    let pooled = pool_points(x, y)?;
    let m = x.len();
    let n = y.len();
    let total = m + n;
    let distances = RankDistances::build(&pooled);
    let x_idx: Vec<usize> = (0..m).collect();
    let observed = distances.statistic(&x_idx, n);

    let exceed: u64 = (0..b as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = crate::rng::substream_rng(seed, rep);
            let subset = draw_subset(&mut rng, total, m);
            u64::from(distances.statistic(&subset, n) >= observed)
        })
        .sum();

    Ok(TestOutcome {
        statistic_value: observed,
        p_value: (1.0 + exceed as f64) / (f64::from(b) + 1.0),
        method: StatisticKind::TM,
        null_model: format!("permutation:B={b}"),
        m,
        n,
        seed: Some(seed),
    })
}

/// Uniformly random m-subset of 0..total by partial Fisher-Yates.
pub(crate) fn draw_subset(rng: &mut impl rand::Rng, total: usize, m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..total).collect();
    for j in 0..m {
        let swap_with = rng.random_range(j..total);
        idx.swap(j, swap_with);
    }
    idx.truncate(m);
    idx
}
