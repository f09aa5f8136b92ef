//! Empirical Fréchet mean computation: closed forms, Weiszfeld iteration,
//! gradient descent for intermediate powers, per-edge scans on trees,
//! constrained plane means, a brute-force grid oracle, and empirical fitting
//! of the growth (margin) condition.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{empirical_objective, CostDescriptor, CostError};
use crate::fit::{self, FitError};
use crate::space::{
    project_to_space, MetricSpaceDescriptor, SampleWindow, SpaceError, SpacePoint,
};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("empty sample")]
    EmptySample,
    #[error("estimator does not support this space/cost pair: {0}")]
    Unsupported(&'static str),
    #[error("grid search needs a bounding window on vector spaces")]
    MissingWindow,
    #[error("probe point has objective below the center: m is not a minimizer")]
    InvalidCenter,
    #[error("probe set degenerate: {0}")]
    BadProbes(&'static str),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMethod {
    /// Pick per cost: closed form, Weiszfeld, or subgradient.
    Auto,
    ClosedForm,
    Weiszfeld,
    Subgradient,
    EdgeScan,
    Grid,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub method: EstimatorMethod,
    pub tol: f64,
    pub max_iter: usize,
    pub grid_step: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            method: EstimatorMethod::Auto,
            tol: 1e-9,
            max_iter: 200,
            grid_step: 1e-2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanStatus {
    Converged,
    MaxIter,
    Degenerate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeanResult {
    pub point: SpacePoint,
    pub objective: f64,
    pub iterations: usize,
    pub status: MeanStatus,
}

fn coords_matrix(samples: &[SpacePoint]) -> Result<Vec<&[f64]>, EstimatorError> {
    samples
        .iter()
        .map(|p| {
            p.coords()
                .ok_or(EstimatorError::Unsupported("tree point in a vector estimator"))
        })
        .collect()
}

fn arithmetic_mean(samples: &[SpacePoint]) -> Result<Vec<f64>, EstimatorError> {
    // Centered accumulation: exact on constant samples and less cancellation
    // on clustered ones.
    let rows = coords_matrix(samples)?;
    let dim = rows[0].len();
    let origin = rows[0];
    let mut mean = vec![0.0; dim];
    for row in &rows {
        for ((m, v), o) in mean.iter_mut().zip(*row).zip(origin) {
            *m += v - o;
        }
    }
    for (m, o) in mean.iter_mut().zip(origin) {
        *m = *m / rows.len() as f64 + o;
    }
    Ok(mean)
}

/// Weiszfeld iteration for the geometric median. Landing on a sample point is
/// handled by a deterministic perturbation of size `tol`.
fn weiszfeld(
    samples: &[SpacePoint],
    cfg: &EstimatorConfig,
    space: &MetricSpaceDescriptor,
    cost: &CostDescriptor,
) -> Result<MeanResult, EstimatorError> {
    let rows = coords_matrix(samples)?;
    let dim = rows[0].len();
    let mut x = arithmetic_mean(samples)?;
    let mut iterations = 0;
    let mut status = MeanStatus::MaxIter;
    while iterations < cfg.max_iter {
        iterations += 1;
        // Perturb off exact sample points.
        if rows
            .iter()
            .any(|r| crate::space::euclidean(r, &x) < f64::EPSILON)
        {
            x[0] += cfg.tol;
        }
        let mut num = vec![0.0; dim];
        let mut den = 0.0;
        for r in &rows {
            let d = crate::space::euclidean(r, &x);
            let w = 1.0 / d;
            den += w;
            for (n, v) in num.iter_mut().zip(*r) {
                *n += w * v;
            }
        }
        let next: Vec<f64> = num.iter().map(|n| n / den).collect();
        let step = crate::space::euclidean(&next, &x);
        x = next;
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if step <= cfg.tol * (1.0 + norm) {
            status = MeanStatus::Converged;
            break;
        }
    }
    let point = SpacePoint::Vector { coords: x };
    let objective = empirical_objective(cost, space, samples, &point)?;
    Ok(MeanResult {
        point,
        objective,
        iterations,
        status,
    })
}

/// Gradient descent with Armijo backtracking for `d^{two_alpha}` costs with
/// `two_alpha` in `(1, 2)`; the objective is convex and differentiable.
fn power_descent(
    samples: &[SpacePoint],
    two_alpha: f64,
    cfg: &EstimatorConfig,
    space: &MetricSpaceDescriptor,
    cost: &CostDescriptor,
) -> Result<MeanResult, EstimatorError> {
    let rows = coords_matrix(samples)?;
    let dim = rows[0].len();
    let n = rows.len() as f64;
    let objective_at = |x: &[f64]| -> f64 {
        rows.iter()
            .map(|r| crate::space::euclidean(r, x).powf(two_alpha))
            .sum::<f64>()
            / n
    };
    let gradient_at = |x: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; dim];
        for r in &rows {
            let d = crate::space::euclidean(r, x);
            if d == 0.0 {
                continue;
            }
            let w = two_alpha * d.powf(two_alpha - 2.0) / n;
            for (gi, (xi, ri)) in g.iter_mut().zip(x.iter().zip(*r)) {
                *gi += w * (xi - ri);
            }
        }
        g
    };
    let mut x = arithmetic_mean(samples)?;
    let mut fx = objective_at(&x);
    let mut iterations = 0;
    let mut status = MeanStatus::MaxIter;
    let mut step: f64 = 1.0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let g = gradient_at(&x);
        let gnorm2: f64 = g.iter().map(|v| v * v).sum();
        if gnorm2.sqrt() <= cfg.tol * (1.0 + fx.abs()) {
            status = MeanStatus::Converged;
            break;
        }
        step = (step * 2.0).min(1e6);
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
            let fc = objective_at(&cand);
            if fc <= fx - 0.25 * step * gnorm2 {
                x = cand;
                fx = fc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            status = MeanStatus::Converged;
            break;
        }
    }
    let point = SpacePoint::Vector { coords: x };
    let objective = empirical_objective(cost, space, samples, &point)?;
    Ok(MeanResult {
        point,
        objective,
        iterations,
        status,
    })
}

/// Fréchet mean on Euclidean or weighted-sequence spaces.
pub fn frechet_mean_vector(
    cost: &CostDescriptor,
    space: &MetricSpaceDescriptor,
    samples: &[SpacePoint],
    cfg: &EstimatorConfig,
) -> Result<MeanResult, EstimatorError> {
    if samples.is_empty() {
        return Err(EstimatorError::EmptySample);
    }
    if space.vector_dim().is_none() {
        return Err(EstimatorError::Unsupported("tree space in frechet_mean_vector"));
    }
    // The anchor term does not depend on q, so anchored costs minimize at the
    // same point; the reported objective keeps the anchored form.
    let effective = match cost {
        CostDescriptor::AnchoredPowerCost { two_alpha, .. } => {
            CostDescriptor::PowerCost { two_alpha: *two_alpha }
        }
        other => other.clone(),
    };
    match (&effective, cfg.method) {
        (_, EstimatorMethod::Grid) => Err(EstimatorError::Unsupported(
            "use brute_force_mean for grid search",
        )),
        (CostDescriptor::SquaredDistance, _) | (CostDescriptor::Bregman { .. }, _) => {
            // Means of Bregman divergences coincide with the arithmetic mean.
            let mean = arithmetic_mean(samples)?;
            let point = SpacePoint::Vector { coords: mean };
            let objective = empirical_objective(cost, space, samples, &point)?;
            Ok(MeanResult {
                point,
                objective,
                iterations: 0,
                status: MeanStatus::Converged,
            })
        }
        (CostDescriptor::PowerCost { two_alpha }, method) => {
            if (*two_alpha - 2.0).abs() < 1e-12 {
                let mean = arithmetic_mean(samples)?;
                let point = SpacePoint::Vector { coords: mean };
                let objective = empirical_objective(cost, space, samples, &point)?;
                return Ok(MeanResult {
                    point,
                    objective,
                    iterations: 0,
                    status: MeanStatus::Converged,
                });
            }
            let near_median = (*two_alpha - 1.0).abs() < 1e-12;
            match (method, near_median) {
                (EstimatorMethod::Weiszfeld, _) | (EstimatorMethod::Auto, true) => {
                    weiszfeld(samples, cfg, space, cost)
                }
                (EstimatorMethod::Subgradient, _) | (EstimatorMethod::Auto, false) => {
                    power_descent(samples, *two_alpha, cfg, space, cost)
                }
                (EstimatorMethod::ClosedForm, _) => Err(EstimatorError::Unsupported(
                    "no closed form for power costs",
                )),
                (EstimatorMethod::EdgeScan, _) => Err(EstimatorError::Unsupported(
                    "edge scan applies to trees",
                )),
                (EstimatorMethod::Grid, _) => unreachable!("handled above"),
            }
        }
        (CostDescriptor::AnchoredPowerCost { .. }, _) => unreachable!("anchored cost rewritten"),
    }
}

/// Golden-section scan of a convex function on `[0, len]`.
fn golden_section(mut f: impl FnMut(f64) -> f64, len: f64, tol: f64, max_iter: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (0.0f64, len);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut iter = 0;
    while hi - lo > tol && iter < max_iter {
        iter += 1;
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    (mid, f(mid))
}

/// Fréchet mean on a metric tree: golden-section per edge plus all vertices.
///
/// Costs `d^{2α}` are convex along geodesics, so each per-edge restriction is
/// unimodal; endpoints enter through the vertex candidates.
pub fn frechet_mean_tree(
    cost: &CostDescriptor,
    space: &MetricSpaceDescriptor,
    samples: &[SpacePoint],
    cfg: &EstimatorConfig,
) -> Result<MeanResult, EstimatorError> {
    if samples.is_empty() {
        return Err(EstimatorError::EmptySample);
    }
    let tree = space
        .as_tree()
        .ok_or(EstimatorError::Unsupported("frechet_mean_tree needs a tree"))?;
    let objective = |q: &SpacePoint| {
        empirical_objective(cost, space, samples, q).expect("samples validated")
    };
    let mut best: Option<(f64, SpacePoint)> = None;
    let mut consider = |val: f64, point: SpacePoint| {
        if best.as_ref().map_or(true, |(b, _)| val < *b) {
            best = Some((val, point));
        }
    };
    for v in 0..tree.vertex_count() {
        let p = tree.vertex_point(v);
        consider(objective(&p), p);
    }
    let mut evals = 0usize;
    for (i, e) in tree.edges().iter().enumerate() {
        let f = |t: f64| {
            let q = SpacePoint::tree(i, t.clamp(0.0, e.length));
            objective(&q)
        };
        let (t_star, f_star) = golden_section(f, e.length, cfg.tol.max(1e-12), cfg.max_iter);
        evals += 1;
        consider(f_star, SpacePoint::tree(i, t_star.clamp(0.0, e.length)));
    }
    let (objective, point) = best.expect("tree has at least one vertex");
    Ok(MeanResult {
        point,
        objective,
        iterations: evals,
        status: MeanStatus::Converged,
    })
}

/// Constrained mean on the plane with an excluded region: project the
/// arithmetic mean. `Degenerate` status flags a medial-axis mean.
pub fn frechet_mean_constrained_plane(
    samples: &[SpacePoint],
    space: &MetricSpaceDescriptor,
    cfg: &EstimatorConfig,
) -> Result<MeanResult, EstimatorError> {
    let _ = cfg;
    if samples.is_empty() {
        return Err(EstimatorError::EmptySample);
    }
    if !matches!(space, MetricSpaceDescriptor::PlaneWithHole { .. }) {
        return Err(EstimatorError::Unsupported(
            "frechet_mean_constrained_plane needs a plane with a hole",
        ));
    }
    let mean = arithmetic_mean(samples)?;
    let raw = SpacePoint::Vector { coords: mean };
    match project_to_space(space, &raw) {
        Ok(point) => {
            let objective =
                empirical_objective(&CostDescriptor::SquaredDistance, space, samples, &point)?;
            Ok(MeanResult {
                point,
                objective,
                iterations: 0,
                status: MeanStatus::Converged,
            })
        }
        Err(SpaceError::NonUniqueProjection) => {
            // Return a deterministic admissible point but flag the tie.
            let fallback = match space {
                MetricSpaceDescriptor::PlaneWithHole { hole } => match hole {
                    crate::space::Hole::Disc { center, radius } => {
                        SpacePoint::vector(&[center[0] + radius, center[1]])
                    }
                    crate::space::Hole::Polygon { vertices } => {
                        SpacePoint::vector(&[vertices[0][0], vertices[0][1]])
                    }
                },
                _ => unreachable!(),
            };
            let objective =
                empirical_objective(&CostDescriptor::SquaredDistance, space, samples, &fallback)?;
            Ok(MeanResult {
                point: fallback,
                objective,
                iterations: 0,
                status: MeanStatus::Degenerate,
            })
        }
        Err(e) => Err(e.into()),
    }
}

/// Exhaustive grid argmin; the test oracle. Ties break to the lowest grid
/// index. Vector spaces need a window; trees use per-edge grids.
pub fn brute_force_mean(
    cost: &CostDescriptor,
    space: &MetricSpaceDescriptor,
    samples: &[SpacePoint],
    grid_step: f64,
    window: Option<&SampleWindow>,
) -> Result<MeanResult, EstimatorError> {
    if samples.is_empty() {
        return Err(EstimatorError::EmptySample);
    }
    let mut best: Option<(f64, SpacePoint)> = None;
    let mut consider = |point: SpacePoint| -> Result<(), EstimatorError> {
        if space.check_point(&point).is_err() {
            return Ok(());
        }
        let val = empirical_objective(cost, space, samples, &point)?;
        if best.as_ref().map_or(true, |(b, _)| val < *b) {
            best = Some((val, point));
        }
        Ok(())
    };
    match space {
        MetricSpaceDescriptor::MetricTree { tree } => {
            for (i, e) in tree.edges().iter().enumerate() {
                let mut t = 0.0;
                while t <= e.length {
                    consider(SpacePoint::tree(i, t.min(e.length)))?;
                    t += grid_step;
                }
                consider(SpacePoint::tree(i, e.length))?;
            }
        }
        _ => {
            let dim = space.vector_dim().expect("vector family");
            let w = window.ok_or(EstimatorError::MissingWindow)?;
            let counts: Vec<usize> = (0..dim)
                .map(|i| ((w.hi[i] - w.lo[i]) / grid_step).floor() as usize + 1)
                .collect();
            let total: usize = counts.iter().product();
            for flat in 0..total {
                let mut idx = flat;
                let coords: Vec<f64> = (0..dim)
                    .map(|i| {
                        let k = idx % counts[i];
                        idx /= counts[i];
                        w.lo[i] + k as f64 * grid_step
                    })
                    .collect();
                consider(SpacePoint::Vector { coords })?;
            }
        }
    }
    let (objective, point) = best.ok_or(EstimatorError::BadProbes("empty grid"))?;
    Ok(MeanResult {
        point,
        objective,
        iterations: 0,
        status: MeanStatus::Converged,
    })
}

/// Empirical fit of the growth condition `F(q) - F(m) >= c_g l(m, q)^gamma`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GrowthFit {
    pub gamma_hat: f64,
    pub cg_hat: f64,
    pub r_squared: f64,
}

/// Fits `log(F(q) - F(m))` against `log l(m, q)` over probe points.
///
/// `objective_gap` evaluates `F(q) - F(m)` for the population; `loss`
/// evaluates `l(m, q)`. The growth constant is the minimal observed ratio
/// `(F(q) - F(m)) / l^gamma_hat`.
pub fn growth_fit(
    objective_gap: impl Fn(&SpacePoint) -> f64,
    loss: impl Fn(&SpacePoint) -> f64,
    probes: &[SpacePoint],
) -> Result<GrowthFit, EstimatorError> {
    if probes.len() < 2 {
        return Err(EstimatorError::BadProbes("need at least two probes"));
    }
    let mut xs = Vec::with_capacity(probes.len());
    let mut ys = Vec::with_capacity(probes.len());
    for q in probes {
        let gap = objective_gap(q);
        let l = loss(q);
        if gap < 0.0 {
            return Err(EstimatorError::InvalidCenter);
        }
        if gap == 0.0 || l == 0.0 {
            return Err(EstimatorError::BadProbes("probe coincides with the center"));
        }
        xs.push(l.ln());
        ys.push(gap.ln());
    }
    let fitted = fit::ols(&xs, &ys)?;
    let gamma_hat = fitted.slope;
    let cg_hat = probes
        .iter()
        .map(|q| objective_gap(q) / loss(q).powf(gamma_hat))
        .fold(f64::INFINITY, f64::min);
    Ok(GrowthFit {
        gamma_hat,
        cg_hat,
        r_squared: fitted.r_squared,
    })
}
