//! Cost functions, empirical objectives, and quadruple structures.
//!
//! A quadruple structure binds a cost `c`, a data distance `a`, and a
//! descriptor pseudo-metric `b` such that (where the structure is claimed
//! sound) `c(y,q) - c(y,p) - c(z,q) + c(z,p) <= a(y,z) * b(q,p)` for all
//! points. The catalog covers the squared metric with `a = 2d, b = d`
//! (Hadamard spaces), the bounded-diameter Lipschitz fallback, snowflake
//! powers `d^{2α}` with the constant `8α·2^{-2α}`, inner-product and weighted
//! inner-product forms, and Bregman divergences. Product and min-over-sets
//! combinators lift structures to composite data.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{
    distance, DistanceKind, MetricSpaceDescriptor, SpaceError, SpacePoint,
};

#[derive(Debug, Error)]
pub enum CostError {
    #[error("empty sample")]
    EmptySample,
    #[error("empty factor list")]
    EmptyFactors,
    #[error("set size {0} outside 1..=8")]
    BadSetSize(usize),
    #[error("cost parameter two_alpha = {0} outside [1, 2]")]
    BadPowerParameter(f64),
    #[error("structure parameter alpha = {0} outside [0.5, 1]")]
    BadAlphaParameter(f64),
    #[error("{structure} is not defined on this space")]
    IncompatibleSpace { structure: &'static str },
    #[error("loss distance vanishes at a strong-quadruple argument")]
    PointAtBase,
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Bregman generator functions with closed-form gradients.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum BregmanGenerator {
    /// `psi(x) = sum x_k^2`; the divergence equals the squared distance.
    SquaredNorm,
    /// `psi(x) = sum exp(x_k)`.
    CoordinateExponential,
}

impl BregmanGenerator {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            BregmanGenerator::SquaredNorm => x.iter().map(|v| v * v).sum(),
            BregmanGenerator::CoordinateExponential => x.iter().map(|v| v.exp()).sum(),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            BregmanGenerator::SquaredNorm => x.iter().map(|v| 2.0 * v).collect(),
            BregmanGenerator::CoordinateExponential => x.iter().map(|v| v.exp()).collect(),
        }
    }

    pub fn divergence(&self, y: &[f64], q: &[f64]) -> f64 {
        let grad = self.gradient(q);
        self.value(y)
            - self.value(q)
            - grad
                .iter()
                .zip(y.iter().zip(q))
                .map(|(g, (yy, qq))| g * (yy - qq))
                .sum::<f64>()
    }
}

/// Cost function descriptor.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostDescriptor {
    SquaredDistance,
    /// `d^{two_alpha}` with `two_alpha` in `[1, 2]`.
    PowerCost { two_alpha: f64 },
    /// `d^{two_alpha}(y, q) - d^{two_alpha}(y, anchor)`; same minimizers as
    /// `PowerCost` but integrable under first-moment-style conditions.
    AnchoredPowerCost { two_alpha: f64, anchor: SpacePoint },
    /// Bregman divergence on Euclidean-type spaces.
    Bregman { psi: BregmanGenerator },
}

impl CostDescriptor {
    pub fn power(two_alpha: f64) -> Self {
        CostDescriptor::PowerCost { two_alpha }
    }

    fn validate(&self, space: &MetricSpaceDescriptor) -> Result<(), CostError> {
        match self {
            CostDescriptor::PowerCost { two_alpha }
            | CostDescriptor::AnchoredPowerCost { two_alpha, .. } => {
                if !(1.0..=2.0).contains(two_alpha) {
                    return Err(CostError::BadPowerParameter(*two_alpha));
                }
            }
            CostDescriptor::Bregman { .. } => {
                if space.vector_dim().is_none() {
                    return Err(CostError::IncompatibleSpace { structure: "bregman cost" });
                }
            }
            CostDescriptor::SquaredDistance => {}
        }
        Ok(())
    }
}

/// Evaluates `c(y, q)` with `y` a data-space point and `q` a descriptor
/// point (those differ on the plane-with-hole family, where data live in
/// the whole plane).
pub fn cost_eval(
    cost: &CostDescriptor,
    space: &MetricSpaceDescriptor,
    y: &SpacePoint,
    q: &SpacePoint,
) -> Result<f64, CostError> {
    cost.validate(space)?;
    match cost {
        CostDescriptor::SquaredDistance => {
            let d = space.data_distance(y, q)?;
            Ok(d * d)
        }
        CostDescriptor::PowerCost { two_alpha } => {
            Ok(space.data_distance(y, q)?.powf(*two_alpha))
        }
        CostDescriptor::AnchoredPowerCost { two_alpha, anchor } => {
            let dq = space.data_distance(y, q)?;
            let da = space.data_distance(y, anchor)?;
            Ok(dq.powf(*two_alpha) - da.powf(*two_alpha))
        }
        CostDescriptor::Bregman { psi } => {
            space.check_data_point(y)?;
            space.check_point(q)?;
            let ys = y.coords().expect("vector point");
            let qs = q.coords().expect("vector point");
            Ok(psi.divergence(ys, qs))
        }
    }
}

/// Empirical objective `F_n(q) = (1/n) sum_i c(Y_i, q)`.
pub fn empirical_objective(
    cost: &CostDescriptor,
    space: &MetricSpaceDescriptor,
    samples: &[SpacePoint],
    q: &SpacePoint,
) -> Result<f64, CostError> {
    if samples.is_empty() {
        return Err(CostError::EmptySample);
    }
    let mut acc = 0.0;
    for y in samples {
        acc += cost_eval(cost, space, y, q)?;
    }
    Ok(acc / samples.len() as f64)
}

/// Quadruple-structure descriptor: a named (cost, data distance, descriptor
/// metric) triple.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuadrupleStructure {
    /// `c = d^2`, `a = 2d`, `b = d` (Reshetnyak form).
    Nice,
    /// `c = d^2`, `a = 4 * diam` constant, `b = d`.
    BoundedLipschitz { diam: f64 },
    /// `c = d^{2α}`, `a = 8α·2^{-2α} d^{2α-1}`, `b = d`, `α` in `[1/2, 1]`.
    Power { alpha: f64 },
    /// `c = |y-q|^2`, `a = 2|y-z|`, `b = |q-p|` on vector spaces.
    InnerProduct,
    /// Weighted Cauchy-Schwarz: `a = 2|y-z|_{1/s}`, `b = |q-p|_s`.
    WeightedInnerProduct { weights: Vec<f64> },
    /// `c = D_psi`, `a = |y-z|`, `b = |grad psi(q) - grad psi(p)|`.
    Bregman { psi: BregmanGenerator },
    /// Strong form on vector spaces at `base_point` with rate parameter 1:
    /// `a = 2|y-z|`, `b_m` the unit-sphere projection metric.
    StrongInnerProduct { base_point: SpacePoint },
}

/// Constant of the snowflake structure, `8α·2^{-2α}`.
pub fn power_structure_constant(alpha: f64) -> f64 {
    8.0 * alpha * 2f64.powf(-2.0 * alpha)
}

impl QuadrupleStructure {
    pub fn name(&self) -> &'static str {
        match self {
            QuadrupleStructure::Nice => "nice",
            QuadrupleStructure::BoundedLipschitz { .. } => "bounded_lipschitz",
            QuadrupleStructure::Power { .. } => "power",
            QuadrupleStructure::InnerProduct => "inner_product",
            QuadrupleStructure::WeightedInnerProduct { .. } => "weighted_inner_product",
            QuadrupleStructure::Bregman { .. } => "bregman",
            QuadrupleStructure::StrongInnerProduct { .. } => "strong_inner_product",
        }
    }

    /// Cost descriptor matching this structure.
    pub fn cost(&self) -> CostDescriptor {
        match self {
            QuadrupleStructure::Nice
            | QuadrupleStructure::BoundedLipschitz { .. }
            | QuadrupleStructure::InnerProduct
            | QuadrupleStructure::WeightedInnerProduct { .. }
            | QuadrupleStructure::StrongInnerProduct { .. } => CostDescriptor::SquaredDistance,
            QuadrupleStructure::Power { alpha } => CostDescriptor::PowerCost {
                two_alpha: 2.0 * alpha,
            },
            QuadrupleStructure::Bregman { psi } => CostDescriptor::Bregman { psi: psi.clone() },
        }
    }
}

/// Abstract (cost, data distance, descriptor metric) system; the generic
/// surface behind sweeps and the stability combinators.
pub trait QuadrupleSystem: Sync {
    type Data: Clone + Send + Sync;
    type Descr: Clone + Send + Sync;

    fn cost(&self, y: &Self::Data, q: &Self::Descr) -> f64;
    fn data_dist(&self, y: &Self::Data, z: &Self::Data) -> f64;
    fn descr_dist(&self, q: &Self::Descr, p: &Self::Descr) -> f64;

    fn describe_data(&self, y: &Self::Data) -> String;
    fn describe_descr(&self, q: &Self::Descr) -> String;

    /// `[c(y,q) - c(y,p) - c(z,q) + c(z,p)] - a(y,z) b(q,p)`; the inequality
    /// claims this is nonpositive.
    fn weak_residual(&self, y: &Self::Data, z: &Self::Data, q: &Self::Descr, p: &Self::Descr) -> f64 {
        let lhs = self.cost(y, q) - self.cost(y, p) - self.cost(z, q) + self.cost(z, p);
        lhs - self.data_dist(y, z) * self.descr_dist(q, p)
    }

    /// Left side and right side separately, for tolerance scaling.
    fn weak_sides(
        &self,
        y: &Self::Data,
        z: &Self::Data,
        q: &Self::Descr,
        p: &Self::Descr,
    ) -> (f64, f64) {
        let lhs = self.cost(y, q) - self.cost(y, p) - self.cost(z, q) + self.cost(z, p);
        let rhs = self.data_dist(y, z) * self.descr_dist(q, p);
        (lhs, rhs)
    }
}

/// A structure bound to a concrete space; points are `SpacePoint`s.
#[derive(Clone, Debug)]
pub struct StructureInstance {
    space: MetricSpaceDescriptor,
    structure: QuadrupleStructure,
}

impl StructureInstance {
    pub fn new(
        space: MetricSpaceDescriptor,
        structure: QuadrupleStructure,
    ) -> Result<Self, CostError> {
        match &structure {
            QuadrupleStructure::Power { alpha } => {
                if !(0.5..=1.0).contains(alpha) {
                    return Err(CostError::BadAlphaParameter(*alpha));
                }
            }
            QuadrupleStructure::BoundedLipschitz { diam } => {
                if !(*diam > 0.0) {
                    return Err(CostError::IncompatibleSpace {
                        structure: "bounded_lipschitz",
                    });
                }
            }
            QuadrupleStructure::InnerProduct | QuadrupleStructure::StrongInnerProduct { .. } => {
                if space.vector_dim().is_none() {
                    return Err(CostError::IncompatibleSpace {
                        structure: "inner_product",
                    });
                }
            }
            QuadrupleStructure::WeightedInnerProduct { weights } => {
                let dim = space.vector_dim().ok_or(CostError::IncompatibleSpace {
                    structure: "weighted_inner_product",
                })?;
                if weights.len() != dim || weights.iter().any(|w| !(*w > 0.0)) {
                    return Err(CostError::Space(SpaceError::BadWeights));
                }
            }
            QuadrupleStructure::Bregman { .. } => {
                if space.vector_dim().is_none() {
                    return Err(CostError::IncompatibleSpace { structure: "bregman" });
                }
            }
            QuadrupleStructure::Nice => {}
        }
        Ok(StructureInstance { space, structure })
    }

    pub fn space(&self) -> &MetricSpaceDescriptor {
        &self.space
    }

    pub fn structure(&self) -> &QuadrupleStructure {
        &self.structure
    }

    fn base(&self, x: &SpacePoint, y: &SpacePoint) -> f64 {
        self.space
            .base_distance(x, y)
            .expect("points validated against the space")
    }

    // Data-to-descriptor and data-to-data distances; they differ from the
    // base metric only on the plane-with-hole family, where data live in the
    // ambient plane.
    fn data_descr(&self, y: &SpacePoint, q: &SpacePoint) -> f64 {
        self.space
            .data_distance(y, q)
            .expect("points validated against their spaces")
    }

    fn data_data(&self, y: &SpacePoint, z: &SpacePoint) -> f64 {
        match &self.space {
            MetricSpaceDescriptor::PlaneWithHole { .. } => {
                self.space.check_data_point(y).expect("valid data point");
                self.space.check_data_point(z).expect("valid data point");
                crate::space::euclidean(
                    y.coords().expect("vector point"),
                    z.coords().expect("vector point"),
                )
            }
            _ => self.base(y, z),
        }
    }
}

impl QuadrupleSystem for StructureInstance {
    type Data = SpacePoint;
    type Descr = SpacePoint;

    fn cost(&self, y: &SpacePoint, q: &SpacePoint) -> f64 {
        match &self.structure {
            QuadrupleStructure::Power { alpha } => self.data_descr(y, q).powf(2.0 * alpha),
            QuadrupleStructure::Bregman { psi } => psi.divergence(
                y.coords().expect("vector point"),
                q.coords().expect("vector point"),
            ),
            _ => {
                let d = self.data_descr(y, q);
                d * d
            }
        }
    }

    fn data_dist(&self, y: &SpacePoint, z: &SpacePoint) -> f64 {
        match &self.structure {
            QuadrupleStructure::Nice | QuadrupleStructure::InnerProduct => {
                2.0 * self.data_data(y, z)
            }
            QuadrupleStructure::StrongInnerProduct { .. } => 2.0 * self.data_data(y, z),
            QuadrupleStructure::BoundedLipschitz { diam } => 4.0 * diam,
            QuadrupleStructure::Power { alpha } => {
                power_structure_constant(*alpha) * self.data_data(y, z).powf(2.0 * alpha - 1.0)
            }
            QuadrupleStructure::WeightedInnerProduct { weights } => {
                2.0 * distance(
                    &self.space,
                    &DistanceKind::WeightedNorm {
                        weights: weights.clone(),
                        inverse: true,
                    },
                    y,
                    z,
                )
                .expect("weighted norm on a vector space")
            }
            QuadrupleStructure::Bregman { .. } => self.data_data(y, z),
        }
    }

    fn descr_dist(&self, q: &SpacePoint, p: &SpacePoint) -> f64 {
        match &self.structure {
            QuadrupleStructure::WeightedInnerProduct { weights } => distance(
                &self.space,
                &DistanceKind::WeightedNorm {
                    weights: weights.clone(),
                    inverse: false,
                },
                q,
                p,
            )
            .expect("weighted norm on a vector space"),
            QuadrupleStructure::Bregman { psi } => {
                let gq = psi.gradient(q.coords().expect("vector point"));
                let gp = psi.gradient(p.coords().expect("vector point"));
                crate::space::euclidean(&gq, &gp)
            }
            QuadrupleStructure::StrongInnerProduct { base_point } => distance(
                &self.space,
                &DistanceKind::SphereProjection {
                    base_point: base_point.clone(),
                },
                q,
                p,
            )
            .expect("arguments stay off the base point"),
            _ => self.base(q, p),
        }
    }

    fn describe_data(&self, y: &SpacePoint) -> String {
        y.compact()
    }

    fn describe_descr(&self, q: &SpacePoint) -> String {
        q.compact()
    }
}

/// Weak quadruple residual on a space-bound structure.
pub fn weak_quadruple_residual(
    structure: &QuadrupleStructure,
    space: &MetricSpaceDescriptor,
    y: &SpacePoint,
    z: &SpacePoint,
    q: &SpacePoint,
    p: &SpacePoint,
) -> Result<f64, CostError> {
    space.check_data_point(y)?;
    space.check_data_point(z)?;
    space.check_point(q)?;
    space.check_point(p)?;
    let inst = StructureInstance::new(space.clone(), structure.clone())?;
    Ok(inst.weak_residual(y, z, q, p))
}

/// Strong quadruple residual: the difference of loss-normalized quadruple
/// quotients at `q` and `p`, minus `a(y,z) * b_m(q,p)`.
///
/// The strong metric `b_m` is the unit-sphere projection for
/// `StrongInnerProduct` and the projection metric `d_m^proj` otherwise.
#[allow(clippy::too_many_arguments)]
pub fn strong_quadruple_residual(
    structure: &QuadrupleStructure,
    space: &MetricSpaceDescriptor,
    m: &SpacePoint,
    xi: f64,
    loss: &DistanceKind,
    y: &SpacePoint,
    z: &SpacePoint,
    q: &SpacePoint,
    p: &SpacePoint,
) -> Result<f64, CostError> {
    let inst = StructureInstance::new(space.clone(), structure.clone())?;
    let lq = distance(space, loss, m, q)?;
    let lp = distance(space, loss, m, p)?;
    if lq == 0.0 || lp == 0.0 {
        return Err(CostError::PointAtBase);
    }
    let quot = |x: &SpacePoint, l: f64| {
        (inst.cost(y, x) - inst.cost(y, m) - inst.cost(z, x) + inst.cost(z, m)) / l.powf(xi)
    };
    // The strong metric always sits at the reference point `m`.
    let bm_kind = match structure {
        QuadrupleStructure::StrongInnerProduct { .. } => DistanceKind::SphereProjection {
            base_point: m.clone(),
        },
        _ => DistanceKind::Projection {
            base_point: m.clone(),
        },
    };
    let bm = if space.points_equal(q, p)? {
        0.0
    } else {
        distance(space, &bm_kind, q, p)?
    };
    Ok(quot(q, lq) - quot(p, lp) - inst.data_dist(y, z) * bm)
}

/// Product combinator: cost adds, distances combine in `ℓ²`.
pub struct ProductStructure {
    factors: Vec<StructureInstance>,
}

/// Builds the product structure over per-factor instances.
pub fn product_structure(factors: Vec<StructureInstance>) -> Result<ProductStructure, CostError> {
    if factors.is_empty() {
        return Err(CostError::EmptyFactors);
    }
    Ok(ProductStructure { factors })
}

impl ProductStructure {
    pub fn factors(&self) -> &[StructureInstance] {
        &self.factors
    }
}

impl QuadrupleSystem for ProductStructure {
    type Data = Vec<SpacePoint>;
    type Descr = Vec<SpacePoint>;

    fn cost(&self, y: &Vec<SpacePoint>, q: &Vec<SpacePoint>) -> f64 {
        self.factors
            .iter()
            .zip(y.iter().zip(q))
            .map(|(f, (yi, qi))| f.cost(yi, qi))
            .sum()
    }

    fn data_dist(&self, y: &Vec<SpacePoint>, z: &Vec<SpacePoint>) -> f64 {
        self.factors
            .iter()
            .zip(y.iter().zip(z))
            .map(|(f, (yi, zi))| f.data_dist(yi, zi).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn descr_dist(&self, q: &Vec<SpacePoint>, p: &Vec<SpacePoint>) -> f64 {
        self.factors
            .iter()
            .zip(q.iter().zip(p))
            .map(|(f, (qi, pi))| f.descr_dist(qi, pi).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn describe_data(&self, y: &Vec<SpacePoint>) -> String {
        y.iter().map(|p| p.compact()).collect::<Vec<_>>().join("|")
    }

    fn describe_descr(&self, q: &Vec<SpacePoint>) -> String {
        self.describe_data(q)
    }
}

/// Min-over-sets combinator: data points become `k`-element sets, the cost is
/// the set minimum, the data distance the pairwise maximum; the descriptor
/// metric is unchanged.
pub struct MinOverSets<S> {
    base: S,
    k: usize,
}

pub fn min_structure<S: QuadrupleSystem>(base: S, k: usize) -> Result<MinOverSets<S>, CostError> {
    if k == 0 || k > 8 {
        return Err(CostError::BadSetSize(k));
    }
    Ok(MinOverSets { base, k })
}

impl<S: QuadrupleSystem> MinOverSets<S> {
    pub fn set_size(&self) -> usize {
        self.k
    }

    pub fn base(&self) -> &S {
        &self.base
    }
}

impl<S: QuadrupleSystem> QuadrupleSystem for MinOverSets<S> {
    type Data = Vec<S::Data>;
    type Descr = S::Descr;

    fn cost(&self, ys: &Vec<S::Data>, q: &S::Descr) -> f64 {
        ys.iter()
            .map(|y| self.base.cost(y, q))
            .fold(f64::INFINITY, f64::min)
    }

    fn data_dist(&self, ys: &Vec<S::Data>, zs: &Vec<S::Data>) -> f64 {
        let mut worst = 0.0f64;
        for y in ys {
            for z in zs {
                worst = worst.max(self.base.data_dist(y, z));
            }
        }
        worst
    }

    fn descr_dist(&self, q: &S::Descr, p: &S::Descr) -> f64 {
        self.base.descr_dist(q, p)
    }

    fn describe_data(&self, ys: &Vec<S::Data>) -> String {
        ys.iter()
            .map(|y| self.base.describe_data(y))
            .collect::<Vec<_>>()
            .join("|")
    }

    fn describe_descr(&self, q: &S::Descr) -> String {
        self.base.describe_descr(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> MetricSpaceDescriptor {
        MetricSpaceDescriptor::euclidean(1)
    }

    #[test]
    fn squared_distance_cost() {
        let space = MetricSpaceDescriptor::euclidean(2);
        let c = cost_eval(
            &CostDescriptor::SquaredDistance,
            &space,
            &SpacePoint::vector(&[0.0, 0.0]),
            &SpacePoint::vector(&[1.0, 1.0]),
        )
        .unwrap();
        assert!((c - 2.0).abs() < 1e-15);
    }

    #[test]
    fn bregman_squared_norm_equals_squared_distance() {
        let space = MetricSpaceDescriptor::euclidean(2);
        let c = cost_eval(
            &CostDescriptor::Bregman {
                psi: BregmanGenerator::SquaredNorm,
            },
            &space,
            &SpacePoint::vector(&[1.0, 0.0]),
            &SpacePoint::vector(&[0.0, 0.0]),
        )
        .unwrap();
        assert!((c - 1.0).abs() < 1e-15);
    }

    #[test]
    fn anchored_power_cost_on_line() {
        let c = cost_eval(
            &CostDescriptor::AnchoredPowerCost {
                two_alpha: 1.0,
                anchor: SpacePoint::vector(&[0.0]),
            },
            &line(),
            &SpacePoint::vector(&[0.0]),
            &SpacePoint::vector(&[4.0]),
        )
        .unwrap();
        assert!((c - 4.0).abs() < 1e-15);
    }

    #[test]
    fn empirical_objective_basics() {
        let samples = [SpacePoint::vector(&[0.0]), SpacePoint::vector(&[2.0])];
        let v = empirical_objective(
            &CostDescriptor::SquaredDistance,
            &line(),
            &samples,
            &SpacePoint::vector(&[1.0]),
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert!(matches!(
            empirical_objective(
                &CostDescriptor::SquaredDistance,
                &line(),
                &[],
                &SpacePoint::vector(&[1.0])
            ),
            Err(CostError::EmptySample)
        ));
    }

    #[test]
    fn duplicating_samples_keeps_objective() {
        let samples = vec![
            SpacePoint::vector(&[0.3]),
            SpacePoint::vector(&[-1.4]),
            SpacePoint::vector(&[2.0]),
        ];
        let mut doubled = samples.clone();
        doubled.extend(samples.clone());
        let q = SpacePoint::vector(&[0.25]);
        let a = empirical_objective(&CostDescriptor::SquaredDistance, &line(), &samples, &q).unwrap();
        let b = empirical_objective(&CostDescriptor::SquaredDistance, &line(), &doubled, &q).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn nice_residual_vanishes_when_data_coincide() {
        let space = MetricSpaceDescriptor::euclidean(2);
        let y = SpacePoint::vector(&[0.7, -0.2]);
        let r = weak_quadruple_residual(
            &QuadrupleStructure::Nice,
            &space,
            &y,
            &y,
            &SpacePoint::vector(&[1.0, 1.0]),
            &SpacePoint::vector(&[-1.0, 0.5]),
        )
        .unwrap();
        assert!(r.abs() < 1e-12);
    }

    #[test]
    fn inner_product_residual_example() {
        let space = MetricSpaceDescriptor::euclidean(2);
        let r = weak_quadruple_residual(
            &QuadrupleStructure::InnerProduct,
            &space,
            &SpacePoint::vector(&[1.0, 0.0]),
            &SpacePoint::vector(&[0.0, 0.0]),
            &SpacePoint::vector(&[0.0, 1.0]),
            &SpacePoint::vector(&[0.0, 0.0]),
        )
        .unwrap();
        assert!((r - (-2.0)).abs() < 1e-12);
    }

    #[test]
    fn bregman_exponential_residual_example() {
        // y = 1, z = 0, q = 0, p = 1 with psi = exp. Direct evaluation:
        // D(1,0) = e - 2, D(1,1) = 0, D(0,0) = 0, D(0,1) = 1, so the left
        // side is (e - 2) - 0 - 0 + 1 = e - 1, which matches the identity
        // <grad psi(p) - grad psi(q), y - z> = (e - 1) * 1. The right side
        // |y-z| |e^0 - e^1| equals e - 1 as well: a 1-d equality case.
        let space = line();
        let structure = QuadrupleStructure::Bregman {
            psi: BregmanGenerator::CoordinateExponential,
        };
        let y = SpacePoint::vector(&[1.0]);
        let z = SpacePoint::vector(&[0.0]);
        let q = SpacePoint::vector(&[0.0]);
        let p = SpacePoint::vector(&[1.0]);
        let e = std::f64::consts::E;
        let inst = StructureInstance::new(space.clone(), structure.clone()).unwrap();
        let lhs = inst.cost(&y, &q) - inst.cost(&y, &p) - inst.cost(&z, &q) + inst.cost(&z, &p);
        assert!((lhs - (e - 1.0)).abs() < 1e-12);
        let r = weak_quadruple_residual(&structure, &space, &y, &z, &q, &p).unwrap();
        assert!(r.abs() < 1e-12, "aligned 1-d pair is an equality case");
        // Swapping q and p flips the left side sign; the residual goes to
        // -2(e - 1).
        let r = weak_quadruple_residual(&structure, &space, &y, &z, &p, &q).unwrap();
        assert!((r + 2.0 * (e - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn power_structure_at_alpha_one_is_nice() {
        assert!((power_structure_constant(1.0) - 2.0).abs() < 1e-15);
        let space = MetricSpaceDescriptor::euclidean(3);
        let inst_pow = StructureInstance::new(
            space.clone(),
            QuadrupleStructure::Power { alpha: 1.0 },
        )
        .unwrap();
        let inst_nice = StructureInstance::new(space, QuadrupleStructure::Nice).unwrap();
        let mut rng = crate::exec::substream(5, &[9]);
        for _ in 0..200 {
            let pts: Vec<SpacePoint> = (0..4)
                .map(|_| crate::space::sample_point(inst_pow.space(), None, &mut rng))
                .collect();
            let a = inst_pow.weak_residual(&pts[0], &pts[1], &pts[2], &pts[3]);
            let b = inst_nice.weak_residual(&pts[0], &pts[1], &pts[2], &pts[3]);
            assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn strong_residual_examples() {
        let space = MetricSpaceDescriptor::euclidean(2);
        let structure = QuadrupleStructure::StrongInnerProduct {
            base_point: SpacePoint::vector(&[0.0, 0.0]),
        };
        let m = SpacePoint::vector(&[0.0, 0.0]);
        // q and p project to the same sphere point.
        let r = strong_quadruple_residual(
            &structure,
            &space,
            &m,
            1.0,
            &DistanceKind::Base,
            &SpacePoint::vector(&[1.0, 0.0]),
            &SpacePoint::vector(&[0.0, 0.0]),
            &SpacePoint::vector(&[0.0, 1.0]),
            &SpacePoint::vector(&[0.0, 2.0]),
        )
        .unwrap();
        assert!(r.abs() < 1e-12);
        // q = p gives zero.
        let q = SpacePoint::vector(&[0.4, 0.3]);
        let r = strong_quadruple_residual(
            &structure,
            &space,
            &m,
            1.0,
            &DistanceKind::Base,
            &SpacePoint::vector(&[1.0, 2.0]),
            &SpacePoint::vector(&[-1.0, 0.5]),
            &q,
            &q,
        )
        .unwrap();
        assert!(r.abs() < 1e-12);
        // loss(m, q) = 0 is rejected.
        let err = strong_quadruple_residual(
            &structure,
            &space,
            &m,
            1.0,
            &DistanceKind::Base,
            &SpacePoint::vector(&[1.0, 2.0]),
            &SpacePoint::vector(&[-1.0, 0.5]),
            &m,
            &q,
        );
        assert!(matches!(err, Err(CostError::PointAtBase)));
    }

    #[test]
    fn strong_residual_positive_on_tripod_projection_metric() {
        // The four-point tripod configuration (y and p on pod 0 at 0.1, z at
        // the hub, q on pod 1 at 1, m on pod 2 at 1) with the nice data
        // distance 2d and the projection metric as b_m: left side 2 eps
        // exceeds the bound, so the residual is positive.
        let space = MetricSpaceDescriptor::tripod();
        let eps = 0.1;
        let r = strong_quadruple_residual(
            &QuadrupleStructure::Nice,
            &space,
            &SpacePoint::tree(2, 1.0),
            1.0,
            &DistanceKind::Base,
            &SpacePoint::tree(0, eps),
            &SpacePoint::tree(0, 0.0),
            &SpacePoint::tree(1, 1.0),
            &SpacePoint::tree(0, eps),
        )
        .unwrap();
        let expected = 2.0 * eps - 2.0 * eps * (2.0 * eps / (1.0 + eps)).sqrt();
        assert!(r > 0.0, "residual {r}");
        assert!((r - expected).abs() < 1e-12);
    }

    #[test]
    fn descriptors_serialize_round_trip() {
        let spaces = vec![
            MetricSpaceDescriptor::euclidean(3),
            MetricSpaceDescriptor::weighted_sequence(vec![0.5, 1.0]).unwrap(),
            MetricSpaceDescriptor::tripod(),
            MetricSpaceDescriptor::plane_with_hole(crate::space::Hole::Disc {
                center: [0.0, 0.0],
                radius: 1.0,
            })
            .unwrap(),
        ];
        for space in spaces {
            let json = serde_json::to_string(&space).unwrap();
            let back: MetricSpaceDescriptor = serde_json::from_str(&json).unwrap();
            assert_eq!(space, back);
        }
        let structure = QuadrupleStructure::Power { alpha: 0.75 };
        let json = serde_json::to_string(&structure).unwrap();
        assert_eq!(json, r#"{"kind":"power","alpha":0.75}"#);
        let cost = CostDescriptor::AnchoredPowerCost {
            two_alpha: 1.0,
            anchor: SpacePoint::tree(0, 0.0),
        };
        let back: CostDescriptor =
            serde_json::from_str(&serde_json::to_string(&cost).unwrap()).unwrap();
        assert_eq!(cost, back);
    }

    #[test]
    fn min_structure_descriptor_metric_unchanged() {
        let inst = StructureInstance::new(line(), QuadrupleStructure::Nice).unwrap();
        let base_descr = inst.descr_dist(&SpacePoint::vector(&[0.0]), &SpacePoint::vector(&[2.0]));
        let min2 = min_structure(inst, 2).unwrap();
        let d = min2.descr_dist(&SpacePoint::vector(&[0.0]), &SpacePoint::vector(&[2.0]));
        assert_eq!(d, base_descr);
        assert!(matches!(
            min_structure(
                StructureInstance::new(line(), QuadrupleStructure::Nice).unwrap(),
                0
            ),
            Err(CostError::BadSetSize(0))
        ));
    }
}
