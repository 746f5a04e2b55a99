//! Path-space norms, empirical Wasserstein distances, moment estimators,
//! and exponential-rate fitting.
//!
//! Distances between equal-size clouds are computed exactly by solving the
//! linear assignment problem on the pairwise cost matrix; a specific pairing
//! evaluated by [`coupled_pair_cost`] always upper-bounds that infimum.

pub mod assignment;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ParticleCloud, Segment};
use crate::stats;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("clouds must have equal particle counts, got {0} and {1}")]
    UnequalClouds(usize, usize),
    #[error("clouds must share dimension and grid shape")]
    ShapeMismatch,
    #[error("input arrays must have equal lengths, got {0} and {1}")]
    UnequalLengths(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("rate fitting needs at least 3 points after burn-in, got {0}")]
    TooFewPoints(usize),
    #[error("rate fitting requires strictly positive values; got {value} at t = {t}")]
    NonPositiveValue { t: f64, value: f64 },
}

/// Norm on segment space. `Sup` is the uniform norm over the window;
/// `GammaR0` is the mixed norm `½|ξ(0)| + ½·(time average of |ξ| over the
/// window)`, the integral against the probability measure that puts half its
/// mass at "now" and spreads half uniformly over the delay window. With no
/// delay both reduce to `|ξ(0)|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathNorm {
    Sup,
    GammaR0,
}

/// Wasserstein order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    #[serde(rename = "1")]
    P1,
    #[serde(rename = "2")]
    P2,
}

impl Order {
    #[inline]
    fn pow(&self, x: f64) -> f64 {
        match self {
            Order::P1 => x,
            Order::P2 => x * x,
        }
    }

    #[inline]
    fn root(&self, x: f64) -> f64 {
        match self {
            Order::P1 => x,
            Order::P2 => x.sqrt(),
        }
    }
}

#[inline]
fn euclid(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[inline]
fn point_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Norm of a single segment.
pub fn path_norm(seg: &Segment, norm: PathNorm) -> f64 {
    let points = seg.points();
    match norm {
        PathNorm::Sup => (0..points).map(|j| euclid(seg.point(j))).fold(0.0, f64::max),
        PathNorm::GammaR0 => {
            let m = points - 1;
            let now = euclid(seg.point(m));
            if m == 0 {
                return now;
            }
            // trapezoidal time average of |ξ| over the window
            let mut acc = 0.5 * euclid(seg.point(0));
            for j in 1..m {
                acc += euclid(seg.point(j));
            }
            acc += 0.5 * now;
            0.5 * now + 0.5 * acc / m as f64
        }
    }
}

/// Norm of the difference of two segments, without materializing it.
pub fn segment_diff_norm(a: &Segment, b: &Segment, norm: PathNorm) -> f64 {
    debug_assert_eq!(a.points(), b.points());
    debug_assert_eq!(a.dim(), b.dim());
    let points = a.points();
    match norm {
        PathNorm::Sup => {
            (0..points).map(|j| point_dist(a.point(j), b.point(j))).fold(0.0, f64::max)
        }
        PathNorm::GammaR0 => {
            let m = points - 1;
            let now = point_dist(a.point(m), b.point(m));
            if m == 0 {
                return now;
            }
            let mut acc = 0.5 * point_dist(a.point(0), b.point(0));
            for j in 1..m {
                acc += point_dist(a.point(j), b.point(j));
            }
            acc += 0.5 * now;
            0.5 * now + 0.5 * acc / m as f64
        }
    }
}

/// Result of an empirical distance computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistanceReport {
    pub value: f64,
    pub method: DistanceMethod,
    pub order: Order,
    pub norm: PathNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMethod {
    AssignmentExact,
    CoupledPairBound,
    Sorted1d,
}

fn check_compatible(a: &ParticleCloud, b: &ParticleCloud) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::UnequalClouds(a.len(), b.len()));
    }
    if a.dim != b.dim || a.grid.segment_points() != b.grid.segment_points() {
        return Err(MetricsError::ShapeMismatch);
    }
    Ok(())
}

/// Exact Wasserstein distance between two equal-size uniform empirical
/// measures on segment space: solves the assignment problem on the cost
/// matrix `C_ij = ‖ξ_i − η_j‖^p` and returns `(mean matched cost)^{1/p}`.
///
/// Cost rows are filled in parallel but the result is identical to the
/// sequential order. Exact assignment is O(N³); beyond a few thousand
/// particles use [`coupled_pair_cost`] and label results as upper bounds.
pub fn empirical_wasserstein(
    cloud_a: &ParticleCloud,
    cloud_b: &ParticleCloud,
    order: Order,
    norm: PathNorm,
) -> Result<EmpiricalDistanceReport, MetricsError> {
    check_compatible(cloud_a, cloud_b)?;
    let n = cloud_a.len();
    let mut costs = assignment::CostMatrix::zeros(n);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| order.pow(segment_diff_norm(cloud_a.segment(i), cloud_b.segment(j), norm)))
                .collect()
        })
        .collect();
    for (i, row) in rows.iter().enumerate() {
        costs.row_mut(i).copy_from_slice(row);
    }
    let matched = assignment::solve_min(&costs);
    let total: f64 = matched.iter().enumerate().map(|(i, &j)| costs.at(i, j)).sum();
    Ok(EmpiricalDistanceReport {
        value: order.root(total / n as f64),
        method: DistanceMethod::AssignmentExact,
        order,
        norm,
    })
}

/// Cost of a specific pairing: `((1/N) Σ ‖ξ_i − η_i‖^p)^{1/p}`. Upper-bounds
/// [`empirical_wasserstein`] on the two marginal clouds for any pairing.
pub fn coupled_pair_cost<'a, I>(pairs: I, order: Order, norm: PathNorm) -> Result<f64, MetricsError>
where
    I: IntoIterator<Item = (&'a Segment, &'a Segment)>,
{
    let mut total = 0.0;
    let mut n = 0usize;
    for (a, b) in pairs {
        total += order.pow(segment_diff_norm(a, b, norm));
        n += 1;
    }
    if n == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(order.root(total / n as f64))
}

/// Identity-paired cost between two clouds.
pub fn coupled_cloud_cost(
    a: &ParticleCloud,
    b: &ParticleCloud,
    order: Order,
    norm: PathNorm,
) -> Result<f64, MetricsError> {
    check_compatible(a, b)?;
    coupled_pair_cost(a.segments().iter().zip(b.segments()), order, norm)
}

/// Exact one-dimensional Wasserstein distance between two samples of equal
/// size: in 1D the optimal coupling is monotone, so sorting both sides and
/// matching in order solves the transport problem. Serves as an independent
/// oracle for the assignment route on `d = 1`, no-delay clouds.
pub fn sorted_1d_wasserstein(xs: &[f64], ys: &[f64], order: Order) -> Result<f64, MetricsError> {
    if xs.len() != ys.len() {
        return Err(MetricsError::UnequalLengths(xs.len(), ys.len()));
    }
    if xs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let total: f64 = a.iter().zip(&b).map(|(x, y)| order.pow((x - y).abs())).sum();
    Ok(order.root(total / xs.len() as f64))
}

/// `(1/N) Σ ‖ξ_i‖²_Γ` — the empirical second moment in the Γ-norm.
pub fn second_gamma_moment(cloud: &ParticleCloud) -> f64 {
    let vals: Vec<f64> = cloud
        .segments()
        .iter()
        .map(|s| {
            let v = path_norm(s, PathNorm::GammaR0);
            v * v
        })
        .collect();
    stats::mean(&vals)
}

/// Result of fitting `value ≈ exp(log_intercept − rate · t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Negated slope of `log(value)` against `t`; positive for decay.
    pub rate: f64,
    pub log_intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Least-squares fit of `log(value)` against `t`, skipping the first
/// `burn_in` points. Values must be strictly positive; callers are expected
/// to floor noisy distances and drop floored points before fitting.
pub fn fit_exponential_rate(
    series: &[(f64, f64)],
    burn_in: usize,
) -> Result<RateFit, MetricsError> {
    let tail = &series[burn_in.min(series.len())..];
    if tail.len() < 3 {
        return Err(MetricsError::TooFewPoints(tail.len()));
    }
    let mut pts = Vec::with_capacity(tail.len());
    for &(t, v) in tail {
        if !(v > 0.0) {
            return Err(MetricsError::NonPositiveValue { t, value: v });
        }
        pts.push((t, v.ln()));
    }
    let (slope, intercept, r2) = stats::ols(&pts);
    Ok(RateFit { rate: -slope, log_intercept: intercept, r_squared: r2, n_points: pts.len() })
}
