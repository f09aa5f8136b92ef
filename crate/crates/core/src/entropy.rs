//! Covering numbers, entropy integrals, the three-branch rate function, and
//! theoretical rate predictions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{self, FitError};
use crate::space::{distance, DistanceKind, MetricSpaceDescriptor, SpaceError, SpacePoint};

#[derive(Debug, Error)]
pub enum EntropyError {
    #[error("empty region")]
    EmptyRegion,
    #[error("radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("all covering numbers are 1: nothing to fit")]
    NothingToFit,
    #[error("entropy/growth exponents require alpha/beta < gamma")]
    EntropyTooLarge,
    #[error("theorem-4 schedule requires kappa > gamma - 1 and gamma > 1")]
    BadSchedule,
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// A region represented by a dense finite sample with a metric attached.
#[derive(Clone, Debug)]
pub struct Region {
    space: MetricSpaceDescriptor,
    metric: DistanceKind,
    points: Vec<SpacePoint>,
    diameter: f64,
    resolution: f64,
}

impl Region {
    /// Builds a region from explicit points; the diameter is computed exactly
    /// for up to 4000 points and by a double farthest sweep above that.
    pub fn from_points(
        space: MetricSpaceDescriptor,
        metric: DistanceKind,
        points: Vec<SpacePoint>,
        resolution: f64,
    ) -> Result<Self, EntropyError> {
        if points.is_empty() {
            return Err(EntropyError::EmptyRegion);
        }
        let d = |a: &SpacePoint, b: &SpacePoint| {
            distance(&space, &metric, a, b).expect("region points are valid")
        };
        let diameter = if points.len() <= 4000 {
            let mut worst = 0.0f64;
            for i in 0..points.len() {
                for j in (i + 1)..points.len() {
                    worst = worst.max(d(&points[i], &points[j]));
                }
            }
            worst
        } else {
            let far_from = |p: &SpacePoint| -> usize {
                let mut best = (0usize, -1.0f64);
                for (i, q) in points.iter().enumerate() {
                    let v = d(p, q);
                    if v > best.1 {
                        best = (i, v);
                    }
                }
                best.0
            };
            let a = far_from(&points[0]);
            let b = far_from(&points[a]);
            d(&points[a], &points[b])
        };
        Ok(Region {
            space,
            metric,
            points,
            diameter,
            resolution,
        })
    }

    /// Dense sample of the interval `[lo, hi]` on the line.
    pub fn interval(lo: f64, hi: f64, resolution: f64) -> Result<Self, EntropyError> {
        if !(hi > lo) || !(resolution > 0.0) {
            return Err(EntropyError::EmptyRegion);
        }
        let n = ((hi - lo) / resolution).ceil() as usize;
        let points = (0..=n)
            .map(|i| SpacePoint::vector(&[(lo + i as f64 * resolution).min(hi)]))
            .collect();
        Region::from_points(
            MetricSpaceDescriptor::euclidean(1),
            DistanceKind::Base,
            points,
            resolution,
        )
    }

    /// Dense grid sample of the Euclidean ball of the given radius.
    pub fn ball(dim: usize, center: &[f64], radius: f64, resolution: f64) -> Result<Self, EntropyError> {
        if dim == 0 || !(radius > 0.0) || !(resolution > 0.0) {
            return Err(EntropyError::EmptyRegion);
        }
        let steps = (2.0 * radius / resolution).ceil() as usize;
        let mut points = Vec::new();
        let mut idx = vec![0usize; dim];
        loop {
            let coords: Vec<f64> = idx
                .iter()
                .zip(center)
                .map(|(k, c)| c - radius + *k as f64 * resolution)
                .collect();
            let r2: f64 = coords
                .iter()
                .zip(center)
                .map(|(x, c)| (x - c) * (x - c))
                .sum();
            if r2 <= radius * radius {
                points.push(SpacePoint::Vector { coords });
            }
            let mut carry = 0;
            loop {
                idx[carry] += 1;
                if idx[carry] <= steps {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
                if carry == dim {
                    let mut region = Region::from_points(
                        MetricSpaceDescriptor::euclidean(dim),
                        DistanceKind::Base,
                        points,
                        resolution,
                    )?;
                    region.diameter = 2.0 * radius;
                    return Ok(region);
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn points(&self) -> &[SpacePoint] {
        &self.points
    }

    fn dist(&self, a: usize, b: usize) -> f64 {
        distance(&self.space, &self.metric, &self.points[a], &self.points[b])
            .expect("region points are valid")
    }

    /// Subregion of points within `delta` of `center`.
    pub fn ball_around(&self, center: &SpacePoint, delta: f64) -> Result<Region, EntropyError> {
        let kept: Vec<SpacePoint> = self
            .points
            .iter()
            .filter(|p| {
                distance(&self.space, &self.metric, center, p).expect("valid points") <= delta
            })
            .cloned()
            .collect();
        Region::from_points(self.space.clone(), self.metric.clone(), kept, self.resolution)
    }
}

/// Uniform cell hash over vector coordinates for radius queries.
struct CellGrid {
    cell: f64,
    dim: usize,
    map: std::collections::HashMap<Vec<i64>, Vec<usize>>,
}

impl CellGrid {
    fn build(coords: &[&[f64]], cell: f64) -> Self {
        let dim = coords[0].len();
        let mut map: std::collections::HashMap<Vec<i64>, Vec<usize>> =
            std::collections::HashMap::new();
        for (i, c) in coords.iter().enumerate() {
            let key: Vec<i64> = c.iter().map(|v| (v / cell).floor() as i64).collect();
            map.entry(key).or_default().push(i);
        }
        CellGrid { cell, dim, map }
    }

    /// Indices of points within `radius` of `p` (superset pruned by cells).
    fn within(&self, coords: &[&[f64]], p: &[f64], radius: f64, out: &mut Vec<usize>) {
        out.clear();
        let reach = (radius / self.cell).ceil() as i64;
        let base: Vec<i64> = p.iter().map(|v| (v / self.cell).floor() as i64).collect();
        let mut offsets = vec![-reach; self.dim];
        'outer: loop {
            let key: Vec<i64> = base.iter().zip(&offsets).map(|(b, o)| b + o).collect();
            if let Some(bucket) = self.map.get(&key) {
                for &i in bucket {
                    if crate::space::euclidean(coords[i], p) <= radius {
                        out.push(i);
                    }
                }
            }
            for d in 0..self.dim {
                offsets[d] += 1;
                if offsets[d] <= reach {
                    continue 'outer;
                }
                offsets[d] = -reach;
            }
            break;
        }
    }
}

/// Greedy cover of the region sample at radius `r`.
///
/// The next center serves the farthest still-uncovered point (the first
/// uncovered point initially); among sample points within `r` of that
/// witness, the one covering the most uncovered points is chosen, ties to the
/// lowest index. The count is an upper bound on `N(region, metric, r)` and a
/// certified cover of the finite sample. Euclidean base metrics use a cell
/// grid; other metrics fall back to pairwise scans.
pub fn covering_number(region: &Region, r: f64) -> Result<usize, EntropyError> {
    if region.is_empty() {
        return Err(EntropyError::EmptyRegion);
    }
    if !(r > 0.0) {
        return Err(EntropyError::BadRadius(r));
    }
    let euclidean_fast = matches!(region.metric, DistanceKind::Base)
        && region.space.vector_dim().is_some()
        && !matches!(region.space, MetricSpaceDescriptor::MetricTree { .. });
    if euclidean_fast {
        let coords: Vec<&[f64]> = region
            .points
            .iter()
            .map(|p| p.coords().expect("vector region"))
            .collect();
        Ok(greedy_cover_euclidean(&coords, r))
    } else {
        Ok(greedy_cover_generic(region, r))
    }
}

fn greedy_cover_euclidean(coords: &[&[f64]], r: f64) -> usize {
    let n = coords.len();
    let grid = CellGrid::build(coords, r);
    let mut covered = vec![false; n];
    let mut min_dist = vec![f64::INFINITY; n];
    let mut remaining = n;
    let mut centers = 0usize;
    let mut candidates = Vec::new();
    let mut reach = Vec::new();
    while remaining > 0 {
        let witness = if centers == 0 {
            0
        } else {
            let mut best = (usize::MAX, -1.0f64);
            for i in 0..n {
                if !covered[i] && min_dist[i] > best.1 {
                    best = (i, min_dist[i]);
                }
            }
            best.0
        };
        grid.within(coords, coords[witness], r, &mut candidates);
        candidates.sort_unstable();
        let mut best_candidate = witness;
        let mut best_cover = 0usize;
        for &c in &candidates {
            grid.within(coords, coords[c], r, &mut reach);
            let cover = reach.iter().filter(|&&i| !covered[i]).count();
            if cover > best_cover {
                best_cover = cover;
                best_candidate = c;
            }
        }
        centers += 1;
        grid.within(coords, coords[best_candidate], r, &mut reach);
        for &i in &reach {
            if !covered[i] {
                covered[i] = true;
                remaining -= 1;
            }
        }
        for i in 0..n {
            let d = crate::space::euclidean(coords[i], coords[best_candidate]);
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
    }
    centers
}

fn greedy_cover_generic(region: &Region, r: f64) -> usize {
    let n = region.len();
    let mut covered = vec![false; n];
    let mut min_dist = vec![f64::INFINITY; n];
    let mut remaining = n;
    let mut centers = 0usize;
    while remaining > 0 {
        let witness = if centers == 0 {
            covered.iter().position(|c| !c).expect("remaining > 0")
        } else {
            let mut best = (usize::MAX, -1.0f64);
            for i in 0..n {
                if !covered[i] && min_dist[i] > best.1 {
                    best = (i, min_dist[i]);
                }
            }
            best.0
        };
        let mut best_candidate = witness;
        let mut best_cover = 0usize;
        for c in 0..n {
            if region.dist(c, witness) > r {
                continue;
            }
            let mut cover = 0usize;
            for i in 0..n {
                if !covered[i] && region.dist(c, i) <= r {
                    cover += 1;
                }
            }
            if cover > best_cover {
                best_cover = cover;
                best_candidate = c;
            }
        }
        centers += 1;
        for i in 0..n {
            let d = region.dist(best_candidate, i);
            if d <= r && !covered[i] {
                covered[i] = true;
                remaining -= 1;
            }
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
    }
    centers
}

/// Truncated entropy functional
/// `inf_eps [ eps * sqrt(n) + ∫_eps^D sqrt(log N(r)) dr ]` evaluated on a
/// log-spaced radius grid; the integral truncates at the region diameter.
pub fn entrn_estimate(region: &Region, n: usize, grid_size: usize) -> Result<f64, EntropyError> {
    if region.is_empty() {
        return Err(EntropyError::EmptyRegion);
    }
    let d = region.diameter();
    if d == 0.0 {
        return Ok(0.0);
    }
    let grid_size = grid_size.max(4);
    let r_min = (region.resolution() * 4.0).min(d / 2.0);
    let ratio = (d / r_min).powf(1.0 / (grid_size as f64 - 1.0));
    let radii: Vec<f64> = (0..grid_size).map(|i| r_min * ratio.powi(i as i32)).collect();
    let sqrt_log_n: Vec<f64> = radii
        .iter()
        .map(|&r| covering_number(region, r).map(|n| (n as f64).ln().max(0.0).sqrt()))
        .collect::<Result<_, _>>()?;
    // Trapezoid tail integrals from each grid point outward.
    let mut tail = vec![0.0; grid_size];
    for i in (0..grid_size - 1).rev() {
        let dr = radii[i + 1] - radii[i];
        tail[i] = tail[i + 1] + 0.5 * (sqrt_log_n[i] + sqrt_log_n[i + 1]) * dr;
    }
    let sqrt_n = (n as f64).sqrt();
    let mut best = f64::INFINITY;
    for i in 0..grid_size {
        best = best.min(radii[i] * sqrt_n + tail[i]);
    }
    // The eps -> 0 relaxation pays the full integral from the smallest radius.
    best = best.min(tail[0]);
    Ok(best)
}

/// Three-branch rate function: `n^{-1/2}` for `beta < 1`,
/// `n^{-1/2} log(n+1)` at `beta = 1`, `n^{-1/(2 beta)}` for `beta > 1`.
pub fn eta(beta: f64, n: usize) -> f64 {
    let nf = n as f64;
    if beta < 1.0 {
        nf.powf(-0.5)
    } else if beta == 1.0 {
        nf.powf(-0.5) * (nf + 1.0).ln()
    } else {
        nf.powf(-1.0 / (2.0 * beta))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyModel {
    /// `sqrt(log N) = c_e (delta/r)^beta`.
    Power,
    /// `sqrt(log N) = c_e log(delta/r)^beta`.
    LogPower,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EntropyFit {
    pub model: EntropyModel,
    pub c_e_hat: f64,
    pub beta_hat: f64,
    pub max_residual: f64,
}

/// Least-squares fit of `(delta/r, sqrt(log N))` pairs to an entropy model.
pub fn fit_entropy_points(
    pairs: &[(f64, f64)],
    model: EntropyModel,
) -> Result<EntropyFit, EntropyError> {
    let usable: Vec<(f64, f64)> = pairs
        .iter()
        .copied()
        .filter(|(ratio, y)| {
            *y > 0.0
                && match model {
                    EntropyModel::Power => *ratio > 0.0,
                    EntropyModel::LogPower => ratio.ln() > 0.0,
                }
        })
        .collect();
    if usable.len() < 2 {
        return Err(EntropyError::NothingToFit);
    }
    let xs: Vec<f64> = usable
        .iter()
        .map(|(ratio, _)| match model {
            EntropyModel::Power => ratio.ln(),
            EntropyModel::LogPower => ratio.ln().ln(),
        })
        .collect();
    let ys: Vec<f64> = usable.iter().map(|(_, y)| y.ln()).collect();
    let fitted = fit::ols(&xs, &ys)?;
    let c_e_hat = fitted.intercept.exp();
    let beta_hat = fitted.slope;
    let predict = |ratio: f64| match model {
        EntropyModel::Power => c_e_hat * ratio.powf(beta_hat),
        EntropyModel::LogPower => c_e_hat * ratio.ln().powf(beta_hat),
    };
    let max_residual = usable
        .iter()
        .map(|(ratio, y)| (y - predict(*ratio)).abs())
        .fold(0.0f64, f64::max);
    Ok(EntropyFit {
        model,
        c_e_hat,
        beta_hat,
        max_residual,
    })
}

/// Fits an entropy model to greedy covering numbers of balls around `center`.
pub fn entropy_fit(
    region: &Region,
    center: &SpacePoint,
    delta_grid: &[f64],
    r_grid: &[f64],
    model: EntropyModel,
) -> Result<EntropyFit, EntropyError> {
    let mut pairs = Vec::new();
    let mut any_nontrivial = false;
    for &delta in delta_grid {
        let sub = region.ball_around(center, delta)?;
        for &r in r_grid {
            if r >= delta {
                continue;
            }
            let n = covering_number(&sub, r)?;
            if n > 1 {
                any_nontrivial = true;
                pairs.push((delta / r, (n as f64).ln().sqrt()));
            }
        }
    }
    if !any_nontrivial {
        return Err(EntropyError::NothingToFit);
    }
    fit_entropy_points(&pairs, model)
}

/// Theorem-4 style schedule.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Schedule {
    pub r_n: f64,
    pub xi_n: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RatePrediction {
    pub eta_value: f64,
    /// `1 / (gamma - alpha/beta)`.
    pub loss_exponent: f64,
    pub predicted_rate: f64,
    pub schedule: Option<Schedule>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateMode {
    /// Rate in probability: `eta_{beta,n}^{1/(gamma - alpha/beta)}`.
    Theorem1,
    /// Ball-restricted rate in expectation:
    /// `(n^{-1/2} log(n)^beta)^{kappa/(gamma-1)}` with
    /// schedule `R_n = n`, `xi_n = 1 - 1/log n`.
    Theorem4 { kappa: f64 },
}

pub fn rate_prediction(
    gamma: f64,
    alpha_ent: f64,
    beta_ent: f64,
    n: usize,
    mode: RateMode,
) -> Result<RatePrediction, EntropyError> {
    if !(alpha_ent / beta_ent < gamma) {
        return Err(EntropyError::EntropyTooLarge);
    }
    let eta_value = eta(beta_ent, n);
    let loss_exponent = 1.0 / (gamma - alpha_ent / beta_ent);
    match mode {
        RateMode::Theorem1 => Ok(RatePrediction {
            eta_value,
            loss_exponent,
            predicted_rate: eta_value.powf(loss_exponent),
            schedule: None,
        }),
        RateMode::Theorem4 { kappa } => {
            if !(kappa > gamma - 1.0) || !(gamma > 1.0) {
                return Err(EntropyError::BadSchedule);
            }
            let nf = n as f64;
            let log_n = nf.ln();
            let predicted_rate =
                (nf.powf(-0.5) * log_n.powf(beta_ent)).powf(kappa / (gamma - 1.0));
            Ok(RatePrediction {
                eta_value,
                loss_exponent,
                predicted_rate,
                schedule: Some(Schedule {
                    r_n: nf,
                    xi_n: 1.0 - 1.0 / log_n,
                }),
            })
        }
    }
}

/// Volumetric covering bound for Euclidean balls: `(3 delta / r)^dim`.
pub fn pollard_bound(dim: usize, delta: f64, r: f64) -> f64 {
    (3.0 * delta / r).powi(dim as i32)
}
