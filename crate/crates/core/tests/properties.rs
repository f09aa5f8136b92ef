//! Cross-module invariants, mostly property-based.

use proptest::prelude::*;

use frechet_core::cost::{
    min_structure, product_structure, weak_quadruple_residual, BregmanGenerator, CostDescriptor,
    QuadrupleStructure, QuadrupleSystem, StructureInstance,
};
use frechet_core::estimator::{frechet_mean_vector, EstimatorConfig};
use frechet_core::exec::{substream, ExecMode};
use frechet_core::lab::sweep_system;
use frechet_core::space::{
    distance, npc_inequality_check, sample_point, tree_geodesic_point, DistanceKind,
    MetricSpaceDescriptor, MetricTree, SpacePoint,
};

fn coord() -> impl Strategy<Value = f64> {
    -10.0f64..10.0
}

fn vec2() -> impl Strategy<Value = SpacePoint> {
    (coord(), coord()).prop_map(|(a, b)| SpacePoint::vector(&[a, b]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn power_distance_is_base_to_the_a(
        x in vec2(), y in vec2(), a in 0.05f64..=1.0
    ) {
        let space = MetricSpaceDescriptor::euclidean(2);
        let base = distance(&space, &DistanceKind::Base, &x, &y).unwrap();
        let power = distance(&space, &DistanceKind::Power { exponent: a }, &x, &y).unwrap();
        prop_assert!((power - base.powf(a)).abs() <= 1e-12 * (1.0 + power));
    }

    #[test]
    fn projection_and_sphere_projection_agree_in_euclidean(
        x in vec2(), y in vec2(), m in vec2()
    ) {
        let space = MetricSpaceDescriptor::euclidean(2);
        let dm = |p: &SpacePoint| distance(&space, &DistanceKind::Base, p, &m).unwrap();
        prop_assume!(dm(&x) > 1e-6 && dm(&y) > 1e-6);
        let proj = distance(&space, &DistanceKind::Projection { base_point: m.clone() }, &x, &y).unwrap();
        let sphere = distance(&space, &DistanceKind::SphereProjection { base_point: m.clone() }, &x, &y).unwrap();
        prop_assert!((proj - sphere).abs() <= 1e-10 * (1.0 + proj));
    }

    #[test]
    fn nice_residual_matches_inner_product_identity(
        y in vec2(), z in vec2(), q in vec2(), p in vec2()
    ) {
        let space = MetricSpaceDescriptor::euclidean(2);
        let r = weak_quadruple_residual(&QuadrupleStructure::Nice, &space, &y, &z, &q, &p).unwrap();
        let ip: f64 = y.coords().unwrap().iter().zip(z.coords().unwrap())
            .zip(q.coords().unwrap().iter().zip(p.coords().unwrap()))
            .map(|((yy, zz), (qq, pp))| (yy - zz) * (qq - pp))
            .sum();
        let ny = frechet_core::space::euclidean(y.coords().unwrap(), z.coords().unwrap());
        let nq = frechet_core::space::euclidean(q.coords().unwrap(), p.coords().unwrap());
        let identity = -2.0 * ip - 2.0 * ny * nq;
        prop_assert!((r - identity).abs() <= 1e-10 * (1.0 + r.abs()));
    }

    #[test]
    fn bregman_squared_norm_is_squared_distance(y in vec2(), q in vec2()) {
        let space = MetricSpaceDescriptor::euclidean(2);
        let d = distance(&space, &DistanceKind::Base, &y, &q).unwrap();
        let breg = frechet_core::cost::cost_eval(
            &CostDescriptor::Bregman { psi: BregmanGenerator::SquaredNorm },
            &space, &y, &q,
        ).unwrap();
        prop_assert!((breg - d * d).abs() <= 1e-12 * (1.0 + breg.abs()));
    }

    #[test]
    fn squared_cost_mean_equals_arithmetic_mean(
        pts in prop::collection::vec((coord(), coord()), 1..24)
    ) {
        let space = MetricSpaceDescriptor::euclidean(2);
        let samples: Vec<SpacePoint> = pts.iter().map(|(a, b)| SpacePoint::vector(&[*a, *b])).collect();
        let out = frechet_mean_vector(
            &CostDescriptor::SquaredDistance, &space, &samples, &EstimatorConfig::default(),
        ).unwrap();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|(a, _)| a).sum::<f64>() / n;
        let my = pts.iter().map(|(_, b)| b).sum::<f64>() / n;
        let got = out.point.coords().unwrap();
        prop_assert!((got[0] - mx).abs() <= 1e-9 && (got[1] - my).abs() <= 1e-9);
    }

    #[test]
    fn empirical_objective_immune_to_duplication(
        pts in prop::collection::vec(coord(), 1..12), q in coord()
    ) {
        let space = MetricSpaceDescriptor::euclidean(1);
        let samples: Vec<SpacePoint> = pts.iter().map(|a| SpacePoint::vector(&[*a])).collect();
        let mut doubled = samples.clone();
        doubled.extend(samples.clone());
        let q = SpacePoint::vector(&[q]);
        let one = frechet_core::cost::empirical_objective(
            &CostDescriptor::SquaredDistance, &space, &samples, &q).unwrap();
        let two = frechet_core::cost::empirical_objective(
            &CostDescriptor::SquaredDistance, &space, &doubled, &q).unwrap();
        prop_assert!((one - two).abs() <= 1e-10 * (1.0 + one.abs()));
    }
}

#[test]
fn tree_geodesic_identities_on_random_trees() {
    for seed in [3u64, 17, 92] {
        let tree = MetricTree::random(8, seed);
        let space = MetricSpaceDescriptor::tree(tree);
        let mut rng = substream(seed, &[44]);
        for _ in 0..200 {
            let x = sample_point(&space, None, &mut rng);
            let y = sample_point(&space, None, &mut rng);
            let t: f64 = rand::Rng::random_range(&mut rng, 0.0..1.0);
            let z = tree_geodesic_point(&space, &x, &y, t).unwrap();
            let dxy = space.base_distance(&x, &y).unwrap();
            let dxz = space.base_distance(&x, &z).unwrap();
            let dzy = space.base_distance(&z, &y).unwrap();
            assert!((dxz - t * dxy).abs() < 1e-12);
            assert!((dzy - (1.0 - t) * dxy).abs() < 1e-12);
        }
    }
}

#[test]
fn npc_residual_nonpositive_on_trees_and_plane() {
    for (label, space) in [
        ("euclidean-3", MetricSpaceDescriptor::euclidean(3)),
        ("tripod", MetricSpaceDescriptor::tripod()),
        ("tree8", MetricSpaceDescriptor::tree(MetricTree::random(8, 5))),
    ] {
        let mut rng = substream(71, &[1]);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..20_000 {
            let y1 = sample_point(&space, None, &mut rng);
            let y2 = sample_point(&space, None, &mut rng);
            let q = sample_point(&space, None, &mut rng);
            let r = npc_inequality_check(&space, &y1, &y2, &q).unwrap();
            worst = worst.max(r);
        }
        assert!(worst <= 1e-9, "{label}: worst NPC residual {worst}");
    }
}

#[test]
fn product_of_lines_behaves_like_plane_nice() {
    let line = MetricSpaceDescriptor::euclidean(1);
    let plane = MetricSpaceDescriptor::euclidean(2);
    let product = product_structure(vec![
        StructureInstance::new(line.clone(), QuadrupleStructure::Nice).unwrap(),
        StructureInstance::new(line.clone(), QuadrupleStructure::Nice).unwrap(),
    ])
    .unwrap();
    let direct = StructureInstance::new(plane, QuadrupleStructure::Nice).unwrap();

    // Both residuals stay nonpositive over random quadruples.
    let sample_pair = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<SpacePoint> {
        vec![
            sample_point(&line, None, rng),
            sample_point(&line, None, rng),
        ]
    };
    let report = sweep_system(
        &product,
        sample_pair,
        sample_pair,
        10_000,
        31,
        1e-9,
        ExecMode::Auto,
    );
    assert_eq!(report.violations, 0, "product worst {}", report.worst_residual);

    // The product cost/data/descriptor values all match the direct plane
    // structure, so the residuals agree pointwise.
    let mut rng = substream(32, &[0]);
    for _ in 0..500 {
        let to_plane = |p: &[SpacePoint]| {
            SpacePoint::vector(&[p[0].coords().unwrap()[0], p[1].coords().unwrap()[0]])
        };
        let y = sample_pair(&mut rng);
        let z = sample_pair(&mut rng);
        let q = sample_pair(&mut rng);
        let p = sample_pair(&mut rng);
        let a = product.weak_residual(&y, &z, &q, &p);
        let b = direct.weak_residual(&to_plane(&y), &to_plane(&z), &to_plane(&q), &to_plane(&p));
        assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
    }
}

#[test]
fn single_factor_product_is_identity() {
    let line = MetricSpaceDescriptor::euclidean(1);
    let inst = StructureInstance::new(line.clone(), QuadrupleStructure::Nice).unwrap();
    let product = product_structure(vec![
        StructureInstance::new(line.clone(), QuadrupleStructure::Nice).unwrap(),
    ])
    .unwrap();
    let mut rng = substream(33, &[0]);
    for _ in 0..500 {
        let pts: Vec<SpacePoint> = (0..4).map(|_| sample_point(&line, None, &mut rng)).collect();
        let wrapped: Vec<Vec<SpacePoint>> = pts.iter().map(|p| vec![p.clone()]).collect();
        let a = product.weak_residual(&wrapped[0], &wrapped[1], &wrapped[2], &wrapped[3]);
        let b = inst.weak_residual(&pts[0], &pts[1], &pts[2], &pts[3]);
        assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
    }
}

#[test]
fn product_residual_nonpositive_when_factors_are() {
    // Mixed factors: a nice line and a snowflake tripod. Whenever every
    // factor residual is nonpositive the combined one must be too.
    let line = MetricSpaceDescriptor::euclidean(1);
    let tripod = MetricSpaceDescriptor::tripod();
    let f1 = StructureInstance::new(line.clone(), QuadrupleStructure::Nice).unwrap();
    let f2 = StructureInstance::new(tripod.clone(), QuadrupleStructure::Power { alpha: 0.75 }).unwrap();
    let product = product_structure(vec![
        StructureInstance::new(line.clone(), QuadrupleStructure::Nice).unwrap(),
        StructureInstance::new(tripod.clone(), QuadrupleStructure::Power { alpha: 0.75 }).unwrap(),
    ])
    .unwrap();
    let mut rng = substream(34, &[0]);
    let mut checked = 0;
    for _ in 0..20_000 {
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            vec![
                sample_point(&line, None, rng),
                sample_point(&tripod, None, rng),
            ]
        };
        let (y, z, q, p) = (draw(&mut rng), draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let r1 = f1.weak_residual(&y[0], &z[0], &q[0], &p[0]);
        let r2 = f2.weak_residual(&y[1], &z[1], &q[1], &p[1]);
        if r1 <= 0.0 && r2 <= 0.0 {
            checked += 1;
            let r = product.weak_residual(&y, &z, &q, &p);
            assert!(r <= 1e-9 * (1.0 + r.abs()), "product residual {r}");
        }
    }
    assert!(checked > 10_000, "enough factor-clean draws: {checked}");
}

#[test]
fn min_over_sets_behaviour() {
    let line = MetricSpaceDescriptor::euclidean(1);
    // k = 1 reproduces the base residuals exactly.
    let base = StructureInstance::new(line.clone(), QuadrupleStructure::Nice).unwrap();
    let min1 = min_structure(
        StructureInstance::new(line.clone(), QuadrupleStructure::Nice).unwrap(),
        1,
    )
    .unwrap();
    let mut rng = substream(35, &[0]);
    for _ in 0..300 {
        let pts: Vec<SpacePoint> = (0..4).map(|_| sample_point(&line, None, &mut rng)).collect();
        let a = min1.weak_residual(
            &vec![pts[0].clone()],
            &vec![pts[1].clone()],
            &pts[2],
            &pts[3],
        );
        let b = base.weak_residual(&pts[0], &pts[1], &pts[2], &pts[3]);
        assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
    }
    // k = 2 stays nonpositive on random draws.
    let min2 = min_structure(
        StructureInstance::new(line.clone(), QuadrupleStructure::Nice).unwrap(),
        2,
    )
    .unwrap();
    let sample_set = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<SpacePoint> {
        vec![sample_point(&line, None, rng), sample_point(&line, None, rng)]
    };
    let report = sweep_system(
        &min2,
        sample_set,
        |rng| sample_point(&line, None, rng),
        10_000,
        36,
        1e-9,
        ExecMode::Auto,
    );
    assert_eq!(report.violations, 0, "min-over-sets worst {}", report.worst_residual);
}

#[test]
fn strong_residual_at_xi_zero_has_weak_numerator() {
    // With the rate parameter at zero the two quotients collapse to the weak
    // quadruple left side.
    let space = MetricSpaceDescriptor::euclidean(2);
    let inst = StructureInstance::new(space.clone(), QuadrupleStructure::Nice).unwrap();
    let mut rng = substream(37, &[0]);
    for _ in 0..300 {
        let pts: Vec<SpacePoint> = (0..5).map(|_| sample_point(&space, None, &mut rng)).collect();
        let (y, z, q, p, m) = (&pts[0], &pts[1], &pts[2], &pts[3], &pts[4]);
        let quot = |x: &SpacePoint| {
            inst.cost(y, x) - inst.cost(y, m) - inst.cost(z, x) + inst.cost(z, m)
        };
        let strong_numerator = quot(q) - quot(p);
        let weak_lhs = inst.cost(y, q) - inst.cost(y, p) - inst.cost(z, q) + inst.cost(z, p);
        assert!((strong_numerator - weak_lhs).abs() < 1e-9 * (1.0 + weak_lhs.abs()));
    }
}

// One-off deep probe at 10x the acceptance trial counts across seeds; run
// explicitly with `cargo test -- --ignored`.
#[test]
#[ignore]
fn deep_lemma_and_strong_bound_probe() {
    use frechet_core::lab::{arithmetic_form_sweep, lemma_battery, weak_implies_strong_check, LemmaId};
    for seed in [1u64, 777, 31415] {
        let r = arithmetic_form_sweep(2_000_000, seed, 1e-9);
        println!(
            "arith seed {seed}: {}/{} worst {:.3e}",
            r.violations, r.trials, r.worst_residual
        );
        assert_eq!(r.violations, 0);
        for lemma in LemmaId::ALL {
            let r = lemma_battery(lemma, 1_000_000, seed, 1e-9);
            println!(
                "  {:<18} {}/{} worst {:.3e}",
                lemma.name(),
                r.violations,
                r.trials,
                r.worst_residual
            );
            assert_eq!(r.violations, 0, "{}", lemma.name());
        }
        for xi in [0.0, 0.3, 0.5, 0.9, 1.0] {
            let r = weak_implies_strong_check(
                &MetricSpaceDescriptor::euclidean(2),
                &QuadrupleStructure::Nice,
                xi,
                &SpacePoint::vector(&[0.0, 0.0]),
                None,
                200_000,
                seed,
                1e-9,
            )
            .unwrap();
            println!(
                "  wis xi={xi}: {}/{} worst {:.3e}",
                r.violations, r.trials, r.worst_residual
            );
            assert_eq!(r.violations, 0);
        }
        let r = weak_implies_strong_check(
            &MetricSpaceDescriptor::tripod(),
            &QuadrupleStructure::Nice,
            0.7,
            &SpacePoint::tree(0, 0.5),
            None,
            200_000,
            seed,
            1e-9,
        )
        .unwrap();
        println!(
            "  wis tripod xi=0.7: {}/{} worst {:.3e}",
            r.violations, r.trials, r.worst_residual
        );
        assert_eq!(r.violations, 0);
    }
}

#[test]
fn weighted_ip_sweep_on_weighted_space() {
    let space = MetricSpaceDescriptor::weighted_sequence(vec![0.5, 1.0, 2.0]).unwrap();
    let report = frechet_core::lab::sweep_structure(
        &space,
        &QuadrupleStructure::WeightedInnerProduct {
            weights: vec![0.5, 1.0, 2.0],
        },
        None,
        20_000,
        38,
        1e-9,
    )
    .unwrap();
    assert_eq!(report.violations, 0, "worst {}", report.worst_residual);
}
