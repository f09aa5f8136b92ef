//! Randomized verification of the quadruple and power inequalities, the
//! supporting arithmetic lemmas, and the two counter-example constructions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{
    power_structure_constant, CostError, QuadrupleStructure, QuadrupleSystem, StructureInstance,
};
use crate::exec::ExecMode;
use crate::space::{
    sample_point, MetricSpaceDescriptor, MetricTree, SampleWindow, SpaceError, SpacePoint,
};
use crate::sweep::{run_sweep, TrialOutcome, ViolationReport};

#[derive(Debug, Error)]
pub enum LabError {
    #[error("alpha = {alpha} invalid for optimality case {case:?}")]
    BadOptimalityAlpha { case: OptimalityCase, alpha: f64 },
    #[error("epsilon = {0} outside the open interval (0, 1)")]
    BadEpsilon(f64),
    #[error("tripod construction requires r > epsilon > 0, got r = {r}, epsilon = {eps}")]
    BadTripodParameters { r: f64, eps: f64 },
    #[error("xi = {0} outside [0, 1]")]
    BadXi(f64),
    #[error("degenerate pair: zero denominator in the quadrilateral cosine")]
    DegeneratePair,
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// The four points entering a quadruple inequality.
#[derive(Clone, Debug)]
pub struct QuadrupleSample<D, Q> {
    pub y: D,
    pub z: D,
    pub q: Q,
    pub p: Q,
}

/// Scalar inputs of the arithmetic form of the power inequality.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ArithmeticQuadruple {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub r: f64,
    pub s: f64,
    pub alpha: f64,
}

/// Residual of the arithmetic form:
/// `a^{2α} - c^{2α} - (a² - 2rab + b²)^α + (c² - 2scb + b²)^α
///  - 8α·2^{-2α} · b · max(ra - sc, |a - c|)^{2α-1}`.
pub fn arithmetic_form_check(aq: &ArithmeticQuadruple) -> f64 {
    let ArithmeticQuadruple { a, b, c, r, s, alpha } = *aq;
    let lhs = a.powf(2.0 * alpha) - c.powf(2.0 * alpha)
        - (a * a - 2.0 * r * a * b + b * b).max(0.0).powf(alpha)
        + (c * c - 2.0 * s * c * b + b * b).max(0.0).powf(alpha);
    let m = (r * a - s * c).max((a - c).abs());
    let rhs = power_structure_constant(alpha) * b * m.powf(2.0 * alpha - 1.0);
    lhs - rhs
}

fn sample_scale(rng: &mut ChaCha8Rng) -> f64 {
    // Half uniform on [0, 10], half log-uniform on [1e-3, 10]: the
    // inequalities are scale-sensitive near zero.
    if rng.random_bool(0.5) {
        rng.random_range(0.0..10.0)
    } else {
        let log: f64 = rng.random_range(-3.0..1.0);
        10f64.powf(log)
    }
}

pub fn sample_arithmetic_quadruple(rng: &mut ChaCha8Rng) -> ArithmeticQuadruple {
    ArithmeticQuadruple {
        a: sample_scale(rng),
        b: sample_scale(rng),
        c: sample_scale(rng),
        r: rng.random_range(-1.0..=1.0),
        s: rng.random_range(-1.0..=1.0),
        alpha: rng.random_range(0.5..=1.0),
    }
}

/// Sweeps the arithmetic form over random inputs.
pub fn arithmetic_form_sweep(trials: u64, seed: u64, tol: f64) -> ViolationReport {
    run_sweep(trials, seed, tol, ExecMode::Auto, |rng, _| {
        let aq = sample_arithmetic_quadruple(rng);
        let residual = arithmetic_form_check(&aq);
        let scale = aq.a.powf(2.0 * aq.alpha)
            + aq.c.powf(2.0 * aq.alpha)
            + power_structure_constant(aq.alpha) * aq.b;
        vec![TrialOutcome {
            residual,
            scale,
            check: "arithmetic_form",
            points: vec![format!("{aq:?}")],
        }]
    })
}

/// Generic weak-quadruple sweep over any system with samplers.
pub fn sweep_system<S, FD, FQ>(
    sys: &S,
    sample_data: FD,
    sample_descr: FQ,
    trials: u64,
    seed: u64,
    tol: f64,
    mode: ExecMode,
) -> ViolationReport
where
    S: QuadrupleSystem,
    FD: Fn(&mut ChaCha8Rng) -> S::Data + Sync,
    FQ: Fn(&mut ChaCha8Rng) -> S::Descr + Sync,
{
    run_sweep(trials, seed, tol, mode, |rng, _| {
        let sample = QuadrupleSample {
            y: sample_data(rng),
            z: sample_data(rng),
            q: sample_descr(rng),
            p: sample_descr(rng),
        };
        let (lhs, rhs) = sys.weak_sides(&sample.y, &sample.z, &sample.q, &sample.p);
        vec![TrialOutcome {
            residual: lhs - rhs,
            scale: lhs.abs(),
            check: "weak_quadruple",
            points: vec![
                sys.describe_data(&sample.y),
                sys.describe_data(&sample.z),
                sys.describe_descr(&sample.q),
                sys.describe_descr(&sample.p),
            ],
        }]
    })
}

/// Weak-quadruple sweep of a structure on a space with uniform sampling.
pub fn sweep_structure(
    space: &MetricSpaceDescriptor,
    structure: &QuadrupleStructure,
    window: Option<&SampleWindow>,
    trials: u64,
    seed: u64,
    tol: f64,
) -> Result<ViolationReport, LabError> {
    let inst = StructureInstance::new(space.clone(), structure.clone())?;
    let sampler = |rng: &mut ChaCha8Rng| sample_point(space, window, rng);
    Ok(sweep_system(
        &inst,
        sampler,
        sampler,
        trials,
        seed,
        tol,
        ExecMode::Auto,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimalityCase {
    /// `α` in `[1/2, 1]`: the ratio approaches the sharp constant `8α·2^{-2α}`.
    A,
    /// `α > 1`: the ratio diverges, no power inequality of this form.
    B,
    /// `α` in `(0, 1/2)`: the ratio diverges as well.
    C,
}

/// Ratio `(yq^{2α} - yp^{2α} - zq^{2α} + zp^{2α}) / (yz^{2α-1} qp)` for the
/// four-point configurations that witness optimality of the power constant.
pub fn optimality_case(case: OptimalityCase, alpha: f64, epsilon: f64) -> Result<f64, LabError> {
    if !(0.0 < epsilon && epsilon < 1.0) {
        return Err(LabError::BadEpsilon(epsilon));
    }
    let valid = match case {
        OptimalityCase::A => (0.5..=1.0).contains(&alpha),
        OptimalityCase::B => alpha > 1.0,
        OptimalityCase::C => alpha > 0.0 && alpha < 0.5,
    };
    if !valid {
        return Err(LabError::BadOptimalityAlpha { case, alpha });
    }
    let e = epsilon;
    // (yq, yp, zq, zp, yz, qp)
    let (yq, yp, zq, zp, yz, qp) = match case {
        OptimalityCase::A => (1.0 - e, 1.0 - 3.0 * e, 1.0 - 2.0 * e, 1.0, 2.0 - 3.0 * e, 2.0 * e),
        OptimalityCase::B => (1.0, e, 1.0 - e, 2.0 * e, 2.0 * e, 1.0),
        OptimalityCase::C => (2.0 * e, e, 1.0, 1.0, 1.0, e),
    };
    let t = 2.0 * alpha;
    let num = yq.powf(t) - yp.powf(t) - zq.powf(t) + zp.powf(t);
    Ok(num / (yz.powf(t - 1.0) * qp))
}

/// Outcome of the tripod construction against the projection metric.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TripodCounterexample {
    /// Constant that `a = K d` would need: `sqrt(2 (r + eps) / eps)`.
    pub required_k: f64,
    /// Left side of the strong quadruple inequality, evaluated from tree
    /// distances; equals `2 eps`.
    pub left_side: f64,
    /// The projection-metric value `d_m^proj(q, p)`.
    pub bm_value: f64,
}

/// Builds the tripod configuration that rules out `d_m^proj` as a strong
/// quadruple metric: `y, p` on pod 1 at `eps`, `z` at the hub, `q` on pod 2
/// at `r`, `m` on pod 3 at `r`.
pub fn tripod_strong_counterexample(r: f64, eps: f64) -> Result<TripodCounterexample, LabError> {
    if !(r > eps && eps > 0.0) {
        return Err(LabError::BadTripodParameters { r, eps });
    }
    let tree = MetricTree::star(3, r);
    let space = MetricSpaceDescriptor::tree(tree);
    let y = SpacePoint::tree(0, eps);
    let z = SpacePoint::tree(0, 0.0);
    let q = SpacePoint::tree(1, r);
    let p = SpacePoint::tree(0, eps);
    let m = SpacePoint::tree(2, r);

    let d = |a: &SpacePoint, b: &SpacePoint| space.base_distance(a, b).expect("points on the tripod");
    let c = |a: &SpacePoint, b: &SpacePoint| {
        let v = d(a, b);
        v * v
    };
    let quot = |x: &SpacePoint| (c(&y, x) - c(&y, &m) - c(&z, x) + c(&z, &m)) / d(x, &m);
    let left_side = quot(&q) - quot(&p);

    let bm = crate::space::distance(
        &space,
        &crate::space::DistanceKind::Projection { base_point: m },
        &q,
        &p,
    )?;
    let required_k = (2.0 * (r + eps) / eps).sqrt();
    Ok(TripodCounterexample {
        required_k,
        left_side,
        bm_value: bm,
    })
}

/// Checks the bound implied by a weak quadruple inequality:
/// normalized quotients with exponent `xi` stay below
/// `2^xi a(y,z) b(q,p)^{1-xi}` whenever `b(q,m), b(p,m) > 0`.
#[allow(clippy::too_many_arguments)]
pub fn weak_implies_strong_check(
    space: &MetricSpaceDescriptor,
    structure: &QuadrupleStructure,
    xi: f64,
    m: &SpacePoint,
    window: Option<&SampleWindow>,
    trials: u64,
    seed: u64,
    tol: f64,
) -> Result<ViolationReport, LabError> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(LabError::BadXi(xi));
    }
    let inst = StructureInstance::new(space.clone(), structure.clone())?;
    let m = m.clone();
    Ok(run_sweep(trials, seed, tol, ExecMode::Auto, move |rng, _| {
        let y = sample_point(space, window, rng);
        let z = sample_point(space, window, rng);
        // Points with b(., m) = 0 lie outside the punctured descriptor set;
        // reject and redraw (capped).
        let mut draw = || {
            for _ in 0..100 {
                let q = sample_point(space, window, rng);
                if inst.descr_dist(&q, &m) > 1e-9 {
                    return Some(q);
                }
            }
            None
        };
        let (q, p) = match (draw(), draw()) {
            (Some(q), Some(p)) => (q, p),
            _ => return vec![],
        };
        let quot = |x: &SpacePoint| {
            (inst.cost(&y, x) - inst.cost(&y, &m) - inst.cost(&z, x) + inst.cost(&z, &m))
                / inst.descr_dist(x, &m).powf(xi)
        };
        let lhs = quot(&q) - quot(&p);
        let rhs = 2f64.powf(xi) * inst.data_dist(&y, &z) * inst.descr_dist(&q, &p).powf(1.0 - xi);
        vec![TrialOutcome {
            residual: lhs - rhs,
            scale: lhs.abs() + rhs.abs(),
            check: "weak_implies_strong",
            points: vec![y.compact(), z.compact(), q.compact(), p.compact()],
        }]
    }))
}

/// Identifiers of the arithmetic proof lemmas under randomized test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaId {
    /// Three bounds around `(x+y)^a - (x-y)^a` and `x^a - y^a`, `a` in `[1,2]`.
    TightPowerBound,
    /// Merging of four absolute-value powers into two.
    SimpleMerging,
    /// Merging under `2ra >= b` / `b >= 2sc` side conditions.
    RaScMerging,
    /// Merging under `b/2 <= sc <= a - b`.
    AScMerging,
    /// `|A/s - B/t|` bound from bounds on `A`, `B`, `A - B`.
    FractionBound,
    /// `(c a^β + (b^β - a^β) a) / (a^β b^β) <= 2^β c^{1-β}`.
    BetaBound,
    /// `(x+y)^{2α} - (x^α - y^α)^2 <= (4xy)^α`.
    AlphaBinom,
    /// `(1-s)/s <= log(s)/log(1-s)` on `(0, 1/2]`.
    Slogs,
    /// `(a^x - b^x)/(a+b)^x` is concave in `x` on `[1, 2]` with equal endpoints.
    AbxFrac,
}

impl LemmaId {
    pub const ALL: [LemmaId; 9] = [
        LemmaId::TightPowerBound,
        LemmaId::SimpleMerging,
        LemmaId::RaScMerging,
        LemmaId::AScMerging,
        LemmaId::FractionBound,
        LemmaId::BetaBound,
        LemmaId::AlphaBinom,
        LemmaId::Slogs,
        LemmaId::AbxFrac,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            LemmaId::TightPowerBound => "tight_power_bound",
            LemmaId::SimpleMerging => "simple_merging",
            LemmaId::RaScMerging => "ra_sc_merging",
            LemmaId::AScMerging => "a_sc_merging",
            LemmaId::FractionBound => "fraction_bound",
            LemmaId::BetaBound => "beta_bound",
            LemmaId::AlphaBinom => "alpha_binom",
            LemmaId::Slogs => "slogs",
            LemmaId::AbxFrac => "abx_frac",
        }
    }

    pub fn parse(name: &str) -> Option<LemmaId> {
        LemmaId::ALL.iter().copied().find(|l| l.name() == name)
    }
}

const REJECTION_CAP: usize = 100;

fn lemma_trial(lemma: LemmaId, rng: &mut ChaCha8Rng) -> Vec<TrialOutcome> {
    let points = |vals: &[f64]| vec![vals.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(";")];
    match lemma {
        LemmaId::TightPowerBound => {
            let mut x = sample_scale(rng);
            let mut y = sample_scale(rng);
            if y > x {
                std::mem::swap(&mut x, &mut y);
            }
            let a: f64 = rng.random_range(1.0..=2.0);
            let mid = (x + y).powf(a) - (x - y).powf(a);
            let scale = (x + y).powf(a) + 1.0;
            let lower = 2f64.powf(a) * x.powf(a - 1.0) * y;
            let upper = 2.0 * a * x.powf(a - 1.0) * y;
            let two_sided = (x + y).powf(a) - (x - y).abs().powf(a)
                - 2.0 * a * (x * y.powf(a - 1.0)).min(x.powf(a - 1.0) * y);
            let diff_lower = (x + y).powf(a - 1.0) * (x - y) - (x.powf(a) - y.powf(a));
            let diff_upper = (x.powf(a) - y.powf(a)) - a * (x - y) * (0.5 * (x + y)).powf(a - 1.0);
            let pts = points(&[x, y, a]);
            vec![
                TrialOutcome { residual: lower - mid, scale, check: "tpb_lower", points: pts.clone() },
                TrialOutcome { residual: mid - upper, scale, check: "tpb_upper", points: pts.clone() },
                TrialOutcome { residual: two_sided, scale, check: "tpb_min_form", points: pts.clone() },
                TrialOutcome { residual: diff_lower, scale, check: "tpb_diff_lower", points: pts.clone() },
                TrialOutcome { residual: diff_upper, scale, check: "tpb_diff_upper", points: pts },
            ]
        }
        LemmaId::SimpleMerging => {
            let a: f64 = rng.random_range(-10.0..10.0);
            let c: f64 = rng.random_range(-10.0..10.0);
            let b = sample_scale(rng);
            let alpha: f64 = rng.random_range(0.5..=1.0);
            let t = 2.0 * alpha;
            let lhs = a.abs().powf(t) - c.abs().powf(t) - (a - b).abs().powf(t)
                + (c - b).abs().powf(t);
            let rhs = if a - c > 0.0 {
                2f64.powf(1.0 - t) * ((a - c + b).powf(t) - (a - c - b).abs().powf(t))
            } else {
                0.0
            };
            vec![TrialOutcome {
                residual: lhs - rhs,
                scale: lhs.abs() + rhs.abs(),
                check: "simple_merging",
                points: points(&[a, b, c, alpha]),
            }]
        }
        LemmaId::RaScMerging => {
            for _ in 0..REJECTION_CAP {
                let a = sample_scale(rng);
                let b = sample_scale(rng);
                let c = sample_scale(rng);
                let alpha: f64 = rng.random_range(0.5..=1.0);
                let variant = rng.random_range(0..3u32);
                let (r, s, ok) = match variant {
                    0 => {
                        let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                        let r: f64 = rng.random_range(-1.0..=1.0);
                        (r, s, 2.0 * r * a >= b)
                    }
                    1 => {
                        let r = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                        let s: f64 = rng.random_range(-1.0..=1.0);
                        (r, s, b >= 2.0 * s * c)
                    }
                    _ => {
                        let r: f64 = rng.random_range(-1.0..=1.0);
                        let s: f64 = rng.random_range(-1.0..=1.0);
                        (r, s, 2.0 * r * a >= b && b >= 2.0 * s * c)
                    }
                };
                if !ok {
                    continue;
                }
                let t = 2.0 * alpha;
                let lhs = a.powf(t) - c.powf(t)
                    - (a * a - 2.0 * r * a * b + b * b).max(0.0).powf(alpha)
                    + (c * c - 2.0 * s * c * b + b * b).max(0.0).powf(alpha);
                let m = r * a - s * c;
                let rhs = if m > 0.0 {
                    2f64.powf(1.0 - t) * ((m + b).powf(t) - (m - b).abs().powf(t))
                } else {
                    0.0
                };
                return vec![TrialOutcome {
                    residual: lhs - rhs,
                    scale: lhs.abs() + rhs.abs(),
                    check: "ra_sc_merging",
                    points: points(&[a, b, c, r, s, alpha]),
                }];
            }
            vec![]
        }
        LemmaId::AScMerging => {
            for _ in 0..REJECTION_CAP {
                let a = sample_scale(rng);
                let b = sample_scale(rng);
                let c = sample_scale(rng);
                // sc >= b/2 >= 0 forces s >= 0.
                let s: f64 = rng.random_range(0.0..=1.0);
                let alpha: f64 = rng.random_range(0.5..=1.0);
                let sc = s * c;
                // The merged bound needs sc + b >= c on top of the stated
                // b/2 <= sc <= a - b (the endpoint step of the proof uses it).
                if !(0.5 * b <= sc && sc <= a - b && sc + b >= c) {
                    continue;
                }
                let t = 2.0 * alpha;
                let lhs = a.powf(t) - c.powf(t) - (a - b).powf(t)
                    + (c * c - 2.0 * s * c * b + b * b).max(0.0).powf(alpha);
                let rhs = 2f64.powf(1.0 - t) * ((a - sc + b).powf(t) - (a - sc - b).powf(t));
                return vec![TrialOutcome {
                    residual: lhs - rhs,
                    scale: lhs.abs() + rhs.abs(),
                    check: "a_sc_merging",
                    points: points(&[a, b, c, s, alpha]),
                }];
            }
            vec![]
        }
        LemmaId::FractionBound => {
            for _ in 0..REJECTION_CAP {
                let a = sample_scale(rng);
                let b = sample_scale(rng);
                let c = sample_scale(rng);
                let r = sample_scale(rng);
                let mut s: f64 = rng.random_range(0.01..10.0);
                let mut t: f64 = rng.random_range(0.01..10.0);
                if (b >= a) != (t >= s) {
                    std::mem::swap(&mut s, &mut t);
                }
                let big_a: f64 = rng.random_range(-1.0..1.0) * r * a;
                let big_b: f64 = rng.random_range(-1.0..1.0) * r * b;
                if (big_a - big_b).abs() > r * c {
                    continue;
                }
                let lhs = (big_a / s - big_b / t).abs();
                let rhs = r * (s.min(t) * c + (s - t).abs() * a.min(b)) / (s * t);
                return vec![TrialOutcome {
                    residual: lhs - rhs,
                    scale: lhs.abs() + rhs.abs(),
                    check: "fraction_bound",
                    points: points(&[big_a, big_b, a, b, c, r, s, t]),
                }];
            }
            vec![]
        }
        LemmaId::BetaBound => {
            for _ in 0..REJECTION_CAP {
                let a = sample_scale(rng).max(1e-6);
                let b = sample_scale(rng).max(1e-6);
                let c = sample_scale(rng).max(1e-6);
                let beta: f64 = rng.random_range(0.0..=1.0);
                if !(a <= b && b <= a + c && c <= a + b) {
                    continue;
                }
                let lhs = (c * a.powf(beta) + (b.powf(beta) - a.powf(beta)) * a)
                    / (a.powf(beta) * b.powf(beta));
                let rhs = 2f64.powf(beta) * c.powf(1.0 - beta);
                return vec![TrialOutcome {
                    residual: lhs - rhs,
                    scale: lhs.abs() + rhs.abs(),
                    check: "beta_bound",
                    points: points(&[a, b, c, beta]),
                }];
            }
            vec![]
        }
        LemmaId::AlphaBinom => {
            let x = sample_scale(rng);
            let y = sample_scale(rng);
            let alpha: f64 = rng.random_range(0.5..=1.0);
            let lhs = (x + y).powf(2.0 * alpha) - (x.powf(alpha) - y.powf(alpha)).powi(2);
            let rhs = (4.0 * x * y).powf(alpha);
            vec![TrialOutcome {
                residual: lhs - rhs,
                scale: lhs.abs() + rhs.abs(),
                check: "alpha_binom",
                points: points(&[x, y, alpha]),
            }]
        }
        LemmaId::Slogs => {
            let s: f64 = rng.random_range(1e-6..=0.5);
            let lhs = (1.0 - s) / s;
            let rhs = s.ln() / (1.0 - s).ln();
            vec![TrialOutcome {
                residual: lhs - rhs,
                scale: lhs.abs() + rhs.abs(),
                check: "slogs",
                points: points(&[s]),
            }]
        }
        LemmaId::AbxFrac => {
            let mut a = sample_scale(rng).max(1e-9);
            let mut b = sample_scale(rng).max(1e-9);
            if b > a {
                std::mem::swap(&mut a, &mut b);
            }
            let f = |x: f64| (a.powf(x) - b.powf(x)) / (a + b).powf(x);
            let x1: f64 = rng.random_range(1.0..=2.0);
            let x2: f64 = rng.random_range(1.0..=2.0);
            let endpoint = (a - b) / (a + b);
            let pts = points(&[a, b, x1, x2]);
            vec![
                // Infimum over [1, 2] sits at the (equal) endpoints.
                TrialOutcome {
                    residual: endpoint - f(x1),
                    scale: 1.0,
                    check: "abx_endpoint_inf",
                    points: pts.clone(),
                },
                TrialOutcome {
                    residual: (f(1.0) - f(2.0)).abs(),
                    scale: 1.0,
                    check: "abx_equal_endpoints",
                    points: pts.clone(),
                },
                // Midpoint concavity.
                TrialOutcome {
                    residual: 0.5 * (f(x1) + f(x2)) - f(0.5 * (x1 + x2)),
                    scale: 1.0,
                    check: "abx_concavity",
                    points: pts,
                },
            ]
        }
    }
}

/// Randomized sweep of one proof lemma.
pub fn lemma_battery(lemma: LemmaId, trials: u64, seed: u64, tol: f64) -> ViolationReport {
    run_sweep(trials, seed, tol, ExecMode::Auto, move |rng, _| {
        lemma_trial(lemma, rng)
    })
}

/// Quadrilateral cosine
/// `cosq = (yq² - yp² - zq² + zp²) / (-2 yz qp)`; at most 1 in CAT(0) spaces.
pub fn quadrilateral_cosine(
    space: &MetricSpaceDescriptor,
    y: &SpacePoint,
    z: &SpacePoint,
    q: &SpacePoint,
    p: &SpacePoint,
) -> Result<f64, LabError> {
    let d = |a: &SpacePoint, b: &SpacePoint| space.base_distance(a, b);
    let yz = d(y, z)?;
    let qp = d(q, p)?;
    if yz == 0.0 || qp == 0.0 {
        return Err(LabError::DegeneratePair);
    }
    let num = d(y, q)?.powi(2) - d(y, p)?.powi(2) - d(z, q)?.powi(2) + d(z, p)?.powi(2);
    Ok(num / (-2.0 * yz * qp))
}

/// Sweep of `cosq <= 1` on a space.
pub fn quadrilateral_cosine_sweep(
    space: &MetricSpaceDescriptor,
    window: Option<&SampleWindow>,
    trials: u64,
    seed: u64,
    tol: f64,
) -> ViolationReport {
    run_sweep(trials, seed, tol, ExecMode::Auto, |rng, _| {
        let pts: Vec<SpacePoint> = (0..4).map(|_| sample_point(space, window, rng)).collect();
        match quadrilateral_cosine(space, &pts[0], &pts[1], &pts[2], &pts[3]) {
            Ok(cosq) => vec![TrialOutcome {
                residual: cosq - 1.0,
                scale: 1.0,
                check: "quadrilateral_cosine",
                points: pts.iter().map(|p| p.compact()).collect(),
            }],
            Err(_) => vec![],
        }
    })
}
