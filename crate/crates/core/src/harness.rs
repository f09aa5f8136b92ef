//! Seeded Monte Carlo experiments: draw samples, estimate means, record
//! losses, fit log-log rate exponents, check tail decay, estimate moments,
//! and measure the centered empirical-process supremum.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{
    cost_eval, empirical_objective, CostDescriptor, CostError, QuadrupleSystem, StructureInstance,
};
use crate::estimator::{
    brute_force_mean, frechet_mean_constrained_plane, frechet_mean_tree, frechet_mean_vector,
    EstimatorConfig, EstimatorError, MeanStatus,
};
use crate::exec::{self, ExecMode};
use crate::fit::{self, FitError, OlsFit};
use crate::space::{distance, DistanceKind, MetricSpaceDescriptor, SpaceError, SpacePoint};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("probabilities must be positive and sum to 1")]
    BadProbabilities,
    #[error("variances must be strictly positive")]
    BadVariances,
    #[error("n grid must be strictly increasing and nonempty")]
    BadNGrid,
    #[error("true mean not supplied and not computable in closed form")]
    UnknownCenter,
    #[error("population objective not available in closed form for this setup")]
    NoPopulationObjective,
    #[error("all losses are zero: nothing to fit")]
    AllZeroLoss,
    #[error("need at least {needed} replications at n = {n}, got {got}")]
    TooFewReplications { needed: usize, n: usize, got: usize },
    #[error("need at least 3 distinct n values")]
    TooFewSizes,
    #[error("empty evaluation grid")]
    EmptyGrid,
    #[error("malformed loss table row: {0}")]
    MalformedRow(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Sampling distribution of the observations.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    GaussianVector {
        mean: Vec<f64>,
        variances: Vec<f64>,
    },
    CauchyLine {
        location: f64,
        scale: f64,
    },
    TreeDiscrete {
        atoms: Vec<TreeAtom>,
    },
    PlaneCloud {
        components: Vec<PlaneComponent>,
    },
    PointMass {
        point: SpacePoint,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TreeAtom {
    pub point: SpacePoint,
    pub prob: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PlaneComponent {
    pub mean: [f64; 2],
    pub variances: [f64; 2],
    pub weight: f64,
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        match self {
            DistributionSpec::GaussianVector { variances, .. } => {
                if variances.is_empty() || variances.iter().any(|v| !(*v > 0.0)) {
                    return Err(HarnessError::BadVariances);
                }
            }
            DistributionSpec::CauchyLine { scale, .. } => {
                if !(*scale > 0.0) {
                    return Err(HarnessError::BadVariances);
                }
            }
            DistributionSpec::TreeDiscrete { atoms } => {
                let total: f64 = atoms.iter().map(|a| a.prob).sum();
                if atoms.is_empty()
                    || atoms.iter().any(|a| !(a.prob > 0.0))
                    || (total - 1.0).abs() > 1e-12
                {
                    return Err(HarnessError::BadProbabilities);
                }
            }
            DistributionSpec::PlaneCloud { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                if components.is_empty()
                    || components
                        .iter()
                        .any(|c| !(c.weight > 0.0) || c.variances.iter().any(|v| !(*v > 0.0)))
                    || (total - 1.0).abs() > 1e-12
                {
                    return Err(HarnessError::BadProbabilities);
                }
            }
            DistributionSpec::PointMass { .. } => {}
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> SpacePoint {
        match self {
            DistributionSpec::GaussianVector { mean, variances } => {
                let coords: Vec<f64> = mean
                    .iter()
                    .zip(variances)
                    .map(|(m, v)| {
                        let normal = rand_distr::Normal::new(*m, v.sqrt()).expect("valid sigma");
                        normal.sample(rng)
                    })
                    .collect();
                SpacePoint::Vector { coords }
            }
            DistributionSpec::CauchyLine { location, scale } => {
                let cauchy = rand_distr::Cauchy::new(*location, *scale).expect("valid scale");
                SpacePoint::vector(&[cauchy.sample(rng)])
            }
            DistributionSpec::TreeDiscrete { atoms } => {
                let u: f64 = rng.random_range(0.0..1.0);
                let mut acc = 0.0;
                for atom in atoms {
                    acc += atom.prob;
                    if u < acc {
                        return atom.point.clone();
                    }
                }
                atoms.last().expect("validated nonempty").point.clone()
            }
            DistributionSpec::PlaneCloud { components } => {
                let u: f64 = rng.random_range(0.0..1.0);
                let mut acc = 0.0;
                let mut chosen = components.last().expect("validated nonempty");
                for c in components {
                    acc += c.weight;
                    if u < acc {
                        chosen = c;
                        break;
                    }
                }
                let coords: Vec<f64> = chosen
                    .mean
                    .iter()
                    .zip(&chosen.variances)
                    .map(|(m, v)| {
                        rand_distr::Normal::new(*m, v.sqrt())
                            .expect("valid sigma")
                            .sample(rng)
                    })
                    .collect();
                SpacePoint::Vector { coords }
            }
            DistributionSpec::PointMass { point } => point.clone(),
        }
    }

    /// Population Fréchet mean where it has a closed form.
    pub fn closed_form_mean(
        &self,
        space: &MetricSpaceDescriptor,
        cost: &CostDescriptor,
    ) -> Option<SpacePoint> {
        match (self, cost) {
            (DistributionSpec::PointMass { point }, _) => Some(point.clone()),
            (DistributionSpec::GaussianVector { mean, .. }, CostDescriptor::SquaredDistance) => {
                Some(SpacePoint::Vector {
                    coords: mean.clone(),
                })
            }
            (
                DistributionSpec::CauchyLine { location, .. },
                CostDescriptor::PowerCost { two_alpha } | CostDescriptor::AnchoredPowerCost { two_alpha, .. },
            ) if (*two_alpha - 1.0).abs() < 1e-12 => Some(SpacePoint::vector(&[*location])),
            (DistributionSpec::TreeDiscrete { atoms }, _) => {
                // Discrete brute force: weighted per-edge objective scan.
                let tree = space.as_tree()?;
                let weighted_objective = |q: &SpacePoint| -> f64 {
                    atoms
                        .iter()
                        .map(|a| a.prob * cost_eval(cost, space, &a.point, q).expect("valid atom"))
                        .sum()
                };
                let mut best: Option<(f64, SpacePoint)> = None;
                for v in 0..tree.vertex_count() {
                    let p = tree.vertex_point(v);
                    let val = weighted_objective(&p);
                    if best.as_ref().map_or(true, |(b, _)| val < *b) {
                        best = Some((val, p));
                    }
                }
                for (i, e) in tree.edges().iter().enumerate() {
                    let mut t = 0.0;
                    let step = (e.length / 512.0).max(1e-6);
                    while t <= e.length {
                        let p = SpacePoint::tree(i, t.min(e.length));
                        let val = weighted_objective(&p);
                        if best.as_ref().map_or(true, |(b, _)| val < *b) {
                            best = Some((val, p));
                        }
                        t += step;
                    }
                }
                // Refine around the best grid point by golden-section later;
                // grid resolution is enough for population centers used here.
                best.map(|(_, p)| p)
            }
            (DistributionSpec::PlaneCloud { components }, CostDescriptor::SquaredDistance) => {
                let mu = [
                    components.iter().map(|c| c.weight * c.mean[0]).sum::<f64>(),
                    components.iter().map(|c| c.weight * c.mean[1]).sum::<f64>(),
                ];
                crate::space::project_to_space(space, &SpacePoint::vector(&mu)).ok()
            }
            _ => None,
        }
    }

    /// Closed-form population gap `F(q) - F(m)` when available.
    ///
    /// Covers: Gaussian/plane-cloud squared distance (`|q - mu|^2` relative to
    /// the unconstrained mean), discrete tree laws (finite sums), point
    /// masses, and the Cauchy absolute-deviation gap
    /// `(2/pi) s (u atan u - ln(1+u^2)/2)` with `u = (q - loc)/s`.
    pub fn population_gap(
        &self,
        space: &MetricSpaceDescriptor,
        cost: &CostDescriptor,
        m: &SpacePoint,
    ) -> Option<Box<dyn Fn(&SpacePoint) -> f64 + Sync + Send>> {
        match (self, cost) {
            (DistributionSpec::PointMass { point }, _) => {
                let space = space.clone();
                let cost = cost.clone();
                let y = point.clone();
                let m = m.clone();
                Some(Box::new(move |q| {
                    cost_eval(&cost, &space, &y, q).expect("valid points")
                        - cost_eval(&cost, &space, &y, &m).expect("valid points")
                }))
            }
            (DistributionSpec::GaussianVector { mean, .. }, CostDescriptor::SquaredDistance) => {
                let mu = mean.clone();
                let m = m.clone();
                Some(Box::new(move |q| {
                    let qc = q.coords().expect("vector point");
                    let mc = m.coords().expect("vector point");
                    let dq = crate::space::euclidean(qc, &mu);
                    let dm = crate::space::euclidean(mc, &mu);
                    dq * dq - dm * dm
                }))
            }
            (
                DistributionSpec::CauchyLine { location, scale },
                CostDescriptor::PowerCost { two_alpha } | CostDescriptor::AnchoredPowerCost { two_alpha, .. },
            ) if (*two_alpha - 1.0).abs() < 1e-12 => {
                let loc = *location;
                let s = *scale;
                let m = m.coords().expect("line point")[0];
                let anti = move |q: f64| {
                    let u = (q - loc) / s;
                    std::f64::consts::FRAC_2_PI * s * (u * u.atan() - 0.5 * (1.0 + u * u).ln())
                };
                Some(Box::new(move |q| {
                    let qc = q.coords().expect("line point")[0];
                    anti(qc) - anti(m)
                }))
            }
            (DistributionSpec::TreeDiscrete { atoms }, _) => {
                let space = space.clone();
                let cost = cost.clone();
                let atoms = atoms.clone();
                let m = m.clone();
                Some(Box::new(move |q| {
                    atoms
                        .iter()
                        .map(|a| {
                            a.prob
                                * (cost_eval(&cost, &space, &a.point, q).expect("valid points")
                                    - cost_eval(&cost, &space, &a.point, &m).expect("valid points"))
                        })
                        .sum()
                }))
            }
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub space: MetricSpaceDescriptor,
    pub cost: CostDescriptor,
    pub loss: DistanceKind,
    pub distribution: DistributionSpec,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub estimator: EstimatorConfig,
    pub known_m: Option<SpacePoint>,
    pub kappa: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.distribution.validate()?;
        if self.n_grid.is_empty()
            || self.n_grid.windows(2).any(|w| w[1] <= w[0])
            || self.replications == 0
        {
            return Err(HarnessError::BadNGrid);
        }
        Ok(())
    }

    /// The reference point losses are measured against.
    pub fn center(&self) -> Result<SpacePoint, HarnessError> {
        if let Some(m) = &self.known_m {
            return Ok(m.clone());
        }
        self.distribution
            .closed_form_mean(&self.space, &self.cost)
            .ok_or(HarnessError::UnknownCenter)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LossRow {
    pub n: usize,
    pub rep: usize,
    pub loss: f64,
    pub status: String,
    pub runtime_s: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct LossTable {
    pub rows: Vec<LossRow>,
}

impl LossTable {
    pub fn losses_at(&self, n: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.n == n)
            .map(|r| r.loss)
            .collect()
    }

    pub fn n_values(&self) -> Vec<usize> {
        let mut ns: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        ns
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,rep,loss,status,runtime_s\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.n, r.rep, r.loss, r.status, r.runtime_s
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<LossTable, HarnessError> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 5 {
                return Err(HarnessError::MalformedRow(line.to_string()));
            }
            rows.push(LossRow {
                n: parts[0]
                    .parse()
                    .map_err(|_| HarnessError::MalformedRow(line.to_string()))?,
                rep: parts[1]
                    .parse()
                    .map_err(|_| HarnessError::MalformedRow(line.to_string()))?,
                loss: parts[2]
                    .parse()
                    .map_err(|_| HarnessError::MalformedRow(line.to_string()))?,
                status: parts[3].to_string(),
                runtime_s: parts[4]
                    .parse()
                    .map_err(|_| HarnessError::MalformedRow(line.to_string()))?,
            });
        }
        Ok(LossTable { rows })
    }
}

const REP_STREAM: u64 = 0x4e5e;
const SUP_STREAM: u64 = 0xd5b;
const MOMENT_STREAM: u64 = 0x30e;

fn status_label(status: MeanStatus) -> &'static str {
    match status {
        MeanStatus::Converged => "converged",
        MeanStatus::MaxIter => "max_iter",
        MeanStatus::Degenerate => "degenerate",
    }
}

/// Runs the full `(n, replication)` grid. Each cell draws its sample from the
/// substream `(seed, n, rep)` and is independent of scheduling; rows come
/// back sorted by `(n, rep)`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<LossTable, HarnessError> {
    run_experiment_with_mode(config, ExecMode::Auto)
}

pub fn run_experiment_with_mode(
    config: &ExperimentConfig,
    mode: ExecMode,
) -> Result<LossTable, HarnessError> {
    config.validate()?;
    let m = config.center()?;
    let cells: Vec<(usize, usize)> = config
        .n_grid
        .iter()
        .flat_map(|&n| (0..config.replications).map(move |rep| (n, rep)))
        .collect();
    let run_cell = |&(n, rep): &(usize, usize)| -> LossRow {
        let start = std::time::Instant::now();
        let mut rng = exec::substream(config.seed, &[REP_STREAM, n as u64, rep as u64]);
        let samples: Vec<SpacePoint> = (0..n)
            .map(|_| config.distribution.sample(&mut rng))
            .collect();
        let estimate = match &config.space {
            MetricSpaceDescriptor::MetricTree { .. } => {
                frechet_mean_tree(&config.cost, &config.space, &samples, &config.estimator)
            }
            MetricSpaceDescriptor::PlaneWithHole { .. } => {
                frechet_mean_constrained_plane(&samples, &config.space, &config.estimator)
            }
            _ => frechet_mean_vector(&config.cost, &config.space, &samples, &config.estimator),
        };
        let (loss, status) = match estimate {
            Ok(result) => {
                let loss = distance(&config.space, &config.loss, &m, &result.point)
                    .unwrap_or(f64::NAN);
                (loss, status_label(result.status).to_string())
            }
            Err(e) => (f64::NAN, format!("error:{e}")),
        };
        LossRow {
            n,
            rep,
            loss,
            status,
            runtime_s: start.elapsed().as_secs_f64(),
        }
    };
    let rows: Vec<LossRow> = {
        #[cfg(feature = "parallel")]
        {
            if matches!(mode, ExecMode::Auto | ExecMode::Parallel) {
                use rayon::prelude::*;
                cells.par_iter().map(run_cell).collect()
            } else {
                cells.iter().map(run_cell).collect()
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = mode;
            cells.iter().map(run_cell).collect()
        }
    };
    Ok(LossTable { rows })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    Mean,
    Median,
    Quantile { p: f64 },
}

impl Statistic {
    fn apply(&self, data: &[f64]) -> Option<f64> {
        match self {
            Statistic::Mean => fit::mean(data),
            Statistic::Median => fit::median(data),
            Statistic::Quantile { p } => fit::quantile(data, *p),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr_slope: f64,
    pub r_squared: f64,
}

impl From<OlsFit> for RateFit {
    fn from(f: OlsFit) -> Self {
        RateFit {
            slope: f.slope,
            intercept: f.intercept,
            stderr_slope: f.stderr_slope,
            r_squared: f.r_squared,
        }
    }
}

/// Log-log OLS of the per-`n` aggregated loss statistic.
pub fn fit_rate(table: &LossTable, statistic: Statistic) -> Result<RateFit, HarnessError> {
    let ns = table.n_values();
    if ns.len() < 3 {
        return Err(HarnessError::TooFewSizes);
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for n in ns {
        let losses: Vec<f64> = table
            .losses_at(n)
            .into_iter()
            .filter(|l| l.is_finite())
            .collect();
        let stat = statistic.apply(&losses).ok_or(HarnessError::AllZeroLoss)?;
        if stat <= 0.0 {
            return Err(HarnessError::AllZeroLoss);
        }
        xs.push((n as f64).ln());
        ys.push(stat.ln());
    }
    Ok(fit::ols(&xs, &ys)?.into())
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TailCheck {
    pub fitted_slope: f64,
    /// `-zeta * (gamma - alpha/beta)` from the polynomial tail bound.
    pub theoretical_slope: f64,
    pub points_used: usize,
}

/// Fits the log-log slope of the empirical survival function of
/// `loss / eta^{loss_exponent}` over its upper decade at one sample size.
///
/// The decade is taken on the survival axis — order statistics with survival
/// between 1% and 10% — not on the loss axis: a value-axis decade of a
/// light-tailed loss covers the body of the distribution instead of its
/// tail, and the most extreme order statistics would dominate the fit
/// through leverage.
pub fn tail_check(
    table: &LossTable,
    n: usize,
    eta_value: f64,
    loss_exponent: f64,
    zeta: f64,
    gamma_minus: f64,
) -> Result<TailCheck, HarnessError> {
    let mut normalized: Vec<f64> = table
        .losses_at(n)
        .into_iter()
        .filter(|l| l.is_finite())
        .map(|l| l / eta_value.powf(loss_exponent))
        .collect();
    if normalized.len() < 500 {
        return Err(HarnessError::TooFewReplications {
            needed: 500,
            n,
            got: normalized.len(),
        });
    }
    normalized.retain(|l| *l > 0.0);
    if normalized.is_empty() {
        return Err(HarnessError::AllZeroLoss);
    }
    normalized.sort_by(|a, b| b.partial_cmp(a).expect("finite losses"));
    let count = normalized.len();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, x) in normalized.iter().enumerate() {
        let survival = (i + 1) as f64 / count as f64;
        if survival > 0.10 {
            break;
        }
        if survival < 0.01 {
            continue;
        }
        xs.push(x.ln());
        ys.push(survival.ln());
    }
    if xs.len() < 3 {
        return Err(HarnessError::AllZeroLoss);
    }
    let fitted = fit::ols(&xs, &ys)?;
    Ok(TailCheck {
        fitted_slope: fitted.slope,
        theoretical_slope: -zeta * gamma_minus,
        points_used: xs.len(),
    })
}

/// Monte Carlo moment of the data distance between independent copies:
/// `E[a(Y', Y)^zeta]` for `zeta >= 2`, `(E[a(Y', Y)^2])^{zeta/2}` below.
pub fn moment_estimate(
    distribution: &DistributionSpec,
    structure: &StructureInstance,
    zeta: f64,
    draws: usize,
    seed: u64,
) -> Result<f64, HarnessError> {
    distribution.validate()?;
    let mut rng = exec::substream(seed, &[MOMENT_STREAM]);
    let mut acc = 0.0;
    for _ in 0..draws.max(1) {
        let y = distribution.sample(&mut rng);
        let y_prime = distribution.sample(&mut rng);
        let a = structure.data_dist(&y_prime, &y);
        acc += if zeta >= 2.0 { a.powf(zeta) } else { a * a };
    }
    let mean = acc / draws.max(1) as f64;
    Ok(if zeta >= 2.0 {
        mean
    } else {
        mean.powf(zeta / 2.0)
    })
}

/// One draw of the centered empirical-process supremum
/// `max over the grid within the delta-ball of F(q) - F(m) - F_n(q) + F_n(m)`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_process_sup(
    config: &ExperimentConfig,
    n: usize,
    rep: usize,
    delta: f64,
    q_grid: &[SpacePoint],
) -> Result<f64, HarnessError> {
    config.validate()?;
    let m = config.center()?;
    let gap = config
        .distribution
        .population_gap(&config.space, &config.cost, &m)
        .ok_or(HarnessError::NoPopulationObjective)?;
    let grid: Vec<&SpacePoint> = q_grid
        .iter()
        .filter(|q| {
            distance(&config.space, &config.loss, &m, q)
                .map(|l| l <= delta)
                .unwrap_or(false)
        })
        .collect();
    if grid.is_empty() {
        return Err(HarnessError::EmptyGrid);
    }
    let mut rng = exec::substream(config.seed, &[SUP_STREAM, n as u64, rep as u64]);
    let samples: Vec<SpacePoint> = (0..n)
        .map(|_| config.distribution.sample(&mut rng))
        .collect();
    let f_n_m = empirical_objective(&config.cost, &config.space, &samples, &m)?;
    let mut sup = f64::NEG_INFINITY;
    for q in grid {
        let f_n_q = empirical_objective(&config.cost, &config.space, &samples, q)?;
        let value = gap(q) - (f_n_q - f_n_m);
        sup = sup.max(value);
    }
    Ok(sup)
}

/// Convenience: brute-force population mean of a discrete tree law.
pub fn discrete_tree_mean(
    space: &MetricSpaceDescriptor,
    cost: &CostDescriptor,
    atoms: &[TreeAtom],
) -> Result<SpacePoint, HarnessError> {
    let spec = DistributionSpec::TreeDiscrete {
        atoms: atoms.to_vec(),
    };
    spec.validate()?;
    spec.closed_form_mean(space, cost)
        .ok_or(HarnessError::UnknownCenter)
}

/// Mean-squared loss at one n (losses squared then averaged).
pub fn mean_squared_loss(table: &LossTable, n: usize) -> Option<f64> {
    let losses = table.losses_at(n);
    if losses.is_empty() {
        return None;
    }
    Some(losses.iter().map(|l| l * l).sum::<f64>() / losses.len() as f64)
}

/// Brute-force verification helper: population mean via grid for tests.
pub fn brute_force_population_mean(
    space: &MetricSpaceDescriptor,
    cost: &CostDescriptor,
    big_sample: &[SpacePoint],
    grid_step: f64,
    window: Option<&crate::space::SampleWindow>,
) -> Result<SpacePoint, HarnessError> {
    Ok(brute_force_mean(cost, space, big_sample, grid_step, window)?.point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::QuadrupleStructure;

    fn gaussian_line_config() -> ExperimentConfig {
        ExperimentConfig {
            space: MetricSpaceDescriptor::euclidean(1),
            cost: CostDescriptor::SquaredDistance,
            loss: DistanceKind::Base,
            distribution: DistributionSpec::GaussianVector {
                mean: vec![0.0],
                variances: vec![1.0],
            },
            n_grid: vec![16, 64, 256],
            replications: 50,
            seed: 1234,
            estimator: EstimatorConfig::default(),
            known_m: None,
            kappa: 2.0,
        }
    }

    #[test]
    fn point_mass_losses_vanish() {
        let mut config = gaussian_line_config();
        config.distribution = DistributionSpec::PointMass {
            point: SpacePoint::vector(&[0.7]),
        };
        config.known_m = Some(SpacePoint::vector(&[0.7]));
        let table = run_experiment(&config).unwrap();
        assert!(table.rows.iter().all(|r| r.loss == 0.0));
        assert!(matches!(
            fit_rate(&table, Statistic::Median),
            Err(HarnessError::AllZeroLoss)
        ));
    }

    #[test]
    fn experiment_is_reproducible_and_schedule_free() {
        let config = gaussian_line_config();
        let a = run_experiment_with_mode(&config, ExecMode::Serial).unwrap();
        let b = run_experiment_with_mode(&config, ExecMode::Auto).unwrap();
        assert_eq!(a.rows.len(), b.rows.len());
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.n, rb.n);
            assert_eq!(ra.rep, rb.rep);
            assert_eq!(ra.loss.to_bits(), rb.loss.to_bits(), "bitwise equal losses");
        }
    }

    #[test]
    fn substreams_are_exchangeable_across_reps() {
        // Permuting replication indices permutes rows only: the loss at
        // (n, rep) depends on (seed, n, rep) alone.
        let mut config = gaussian_line_config();
        config.replications = 10;
        let table = run_experiment(&config).unwrap();
        let single = |rep: usize| {
            let mut c = gaussian_line_config();
            c.replications = rep + 1;
            let t = run_experiment(&c).unwrap();
            t.rows
                .iter()
                .find(|r| r.n == 64 && r.rep == rep)
                .unwrap()
                .loss
        };
        let from_full = table
            .rows
            .iter()
            .find(|r| r.n == 64 && r.rep == 7)
            .unwrap()
            .loss;
        assert_eq!(from_full.to_bits(), single(7).to_bits());
    }

    #[test]
    fn fit_rate_exact_power_law() {
        let rows: Vec<LossRow> = [16usize, 64, 256, 1024]
            .iter()
            .flat_map(|&n| {
                (0..3).map(move |rep| LossRow {
                    n,
                    rep,
                    loss: (n as f64).powf(-0.5),
                    status: "converged".into(),
                    runtime_s: 0.0,
                })
            })
            .collect();
        let fit = fit_rate(&LossTable { rows }, Statistic::Median).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_rate_needs_three_sizes() {
        let rows: Vec<LossRow> = vec![
            LossRow { n: 4, rep: 0, loss: 1.0, status: "converged".into(), runtime_s: 0.0 },
            LossRow { n: 8, rep: 0, loss: 0.5, status: "converged".into(), runtime_s: 0.0 },
        ];
        assert!(matches!(
            fit_rate(&LossTable { rows }, Statistic::Mean),
            Err(HarnessError::TooFewSizes)
        ));
    }

    #[test]
    fn tail_check_recovers_pareto_slope() {
        // Survival t^{-2}: inverse-CDF draws u^{-1/2}.
        let mut rng = exec::substream(77, &[1]);
        let rows: Vec<LossRow> = (0..4000)
            .map(|rep| {
                let u: f64 = rng.random_range(0.0f64..1.0).max(1e-12);
                LossRow {
                    n: 100,
                    rep,
                    loss: u.powf(-0.5),
                    status: "converged".into(),
                    runtime_s: 0.0,
                }
            })
            .collect();
        let check = tail_check(&LossTable { rows }, 100, 1.0, 1.0, 2.0, 1.0).unwrap();
        assert!(
            (check.fitted_slope + 2.0).abs() < 0.3,
            "slope {}",
            check.fitted_slope
        );
        assert!((check.theoretical_slope + 2.0).abs() < 1e-12);
    }

    #[test]
    fn tail_check_rejects_all_zero_losses() {
        let rows: Vec<LossRow> = (0..600)
            .map(|rep| LossRow {
                n: 100,
                rep,
                loss: 0.0,
                status: "converged".into(),
                runtime_s: 0.0,
            })
            .collect();
        assert!(matches!(
            tail_check(&LossTable { rows }, 100, 1.0, 1.0, 2.0, 1.0),
            Err(HarnessError::AllZeroLoss)
        ));
    }

    #[test]
    fn tail_check_requires_replications() {
        let rows: Vec<LossRow> = (0..10)
            .map(|rep| LossRow {
                n: 100,
                rep,
                loss: 1.0,
                status: "converged".into(),
                runtime_s: 0.0,
            })
            .collect();
        assert!(matches!(
            tail_check(&LossTable { rows }, 100, 1.0, 1.0, 2.0, 1.0),
            Err(HarnessError::TooFewReplications { .. })
        ));
    }

    #[test]
    fn moment_branches_agree_at_two_and_match_gaussian() {
        let dist = DistributionSpec::GaussianVector {
            mean: vec![0.0],
            variances: vec![2.25],
        };
        let inst = StructureInstance::new(
            MetricSpaceDescriptor::euclidean(1),
            QuadrupleStructure::Nice,
        )
        .unwrap();
        let m2 = moment_estimate(&dist, &inst, 2.0, 200_000, 5).unwrap();
        // E(2|Y - Y'|)^2 = 8 sigma^2.
        assert!((m2 - 8.0 * 2.25).abs() < 0.3, "m2 = {m2}");
        let m1 = moment_estimate(&dist, &inst, 1.0, 200_000, 5).unwrap();
        assert!((m1 - m2.sqrt()).abs() < 1e-12, "lower branch is sqrt at zeta = 1");
        let zero = moment_estimate(
            &DistributionSpec::PointMass {
                point: SpacePoint::vector(&[3.0]),
            },
            &inst,
            2.0,
            100,
            5,
        )
        .unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn empirical_process_sup_properties() {
        let config = gaussian_line_config();
        let grid: Vec<SpacePoint> = (-20..=20)
            .map(|i| SpacePoint::vector(&[i as f64 * 0.1]))
            .collect();
        // Monotone in delta for a fixed draw.
        let small = empirical_process_sup(&config, 64, 0, 0.5, &grid).unwrap();
        let large = empirical_process_sup(&config, 64, 0, 1.0, &grid).unwrap();
        assert!(large >= small);
        // q = m belongs to the grid, so the sup is nonnegative.
        assert!(small >= 0.0);
        // Point mass: identically zero.
        let mut pm = config.clone();
        pm.distribution = DistributionSpec::PointMass {
            point: SpacePoint::vector(&[0.0]),
        };
        pm.known_m = Some(SpacePoint::vector(&[0.0]));
        let zero = empirical_process_sup(&pm, 64, 0, 1.0, &grid).unwrap();
        assert!(zero.abs() < 1e-12);
    }

    #[test]
    fn plane_cloud_constrained_experiment() {
        // Mixture mean (1.4, 0) lies outside the excluded disc; losses are
        // finite and the estimator mostly projects cleanly.
        let space = MetricSpaceDescriptor::plane_with_hole(crate::space::Hole::Disc {
            center: [0.0, 0.0],
            radius: 1.0,
        })
        .unwrap();
        let distribution = DistributionSpec::PlaneCloud {
            components: vec![
                PlaneComponent {
                    mean: [3.0, 0.0],
                    variances: [1.0, 1.0],
                    weight: 0.6,
                },
                PlaneComponent {
                    mean: [-1.0, 0.0],
                    variances: [1.0, 1.0],
                    weight: 0.4,
                },
            ],
        };
        let m = distribution
            .closed_form_mean(&space, &CostDescriptor::SquaredDistance)
            .unwrap();
        assert_eq!(m, SpacePoint::vector(&[1.4, 0.0]));
        let config = ExperimentConfig {
            space,
            cost: CostDescriptor::SquaredDistance,
            loss: DistanceKind::Base,
            distribution,
            n_grid: vec![32, 128],
            replications: 40,
            seed: 99,
            estimator: EstimatorConfig::default(),
            known_m: None,
            kappa: 2.0,
        };
        let table = run_experiment(&config).unwrap();
        for r in &table.rows {
            assert!(
                r.loss.is_finite() && r.loss >= 0.0,
                "n={} rep={} loss={} status={}",
                r.n,
                r.rep,
                r.loss,
                r.status
            );
            assert!(
                r.status == "converged" || r.status == "degenerate",
                "status {}",
                r.status
            );
        }
    }

    #[test]
    fn zero_replications_rejected() {
        let mut config = gaussian_line_config();
        config.replications = 0;
        assert!(matches!(
            run_experiment(&config),
            Err(HarnessError::BadNGrid)
        ));
    }

    #[test]
    fn loss_table_csv_round_trip() {
        let table = LossTable {
            rows: vec![LossRow {
                n: 16,
                rep: 2,
                loss: 0.125,
                status: "converged".into(),
                runtime_s: 0.001,
            }],
        };
        let text = table.to_csv();
        let back = LossTable::from_csv(&text).unwrap();
        assert_eq!(table, back);
    }

    #[test]
    fn cauchy_gap_matches_quadrature() {
        // Adaptive Simpson on the angle substitution as the independent
        // oracle for the closed-form Cauchy gap.
        let dist = DistributionSpec::CauchyLine {
            location: 0.0,
            scale: 1.0,
        };
        let space = MetricSpaceDescriptor::euclidean(1);
        let cost = CostDescriptor::PowerCost { two_alpha: 1.0 };
        let m = SpacePoint::vector(&[0.0]);
        let gap = dist.population_gap(&space, &cost, &m).unwrap();
        for q in [0.25, 0.5, 1.0, 2.0] {
            let numeric = cauchy_gap_quadrature(q);
            let closed = gap(&SpacePoint::vector(&[q]));
            assert!(
                (numeric - closed).abs() < 1e-8,
                "q = {q}: {numeric} vs {closed}"
            );
        }
    }

    fn cauchy_gap_quadrature(q: f64) -> f64 {
        // E[|Y - q| - |Y|] = (1/pi) \int (|tan t - q| - |tan t|) dt on
        // (-pi/2, pi/2); the integrand is bounded by |q|.
        let f = |t: f64| {
            let y = t.tan();
            (y - q).abs() - y.abs()
        };
        let mut acc = 0.0;
        let steps = 400_000;
        let lo = -std::f64::consts::FRAC_PI_2 + 1e-9;
        let hi = std::f64::consts::FRAC_PI_2 - 1e-9;
        let h = (hi - lo) / steps as f64;
        for i in 0..steps {
            let a = lo + i as f64 * h;
            acc += (f(a) + 4.0 * f(a + 0.5 * h) + f(a + h)) / 6.0 * h;
        }
        acc / std::f64::consts::PI
    }
}
