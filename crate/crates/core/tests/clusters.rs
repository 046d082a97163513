use std::f64::consts::PI;

use clustersim::clusters::{
    AngleLaw, ClusterKernel, ComponentLaw, ParentClusterLaw, ParentComponent, PlacementMap, RadiusLaw, SizeLaw,
};
use clustersim::rng::seeded;
use clustersim::stats::EstimateWithError;
use clustersim::{Geometry, Point, Se2};
use proptest::prelude::*;
use rand::Rng;

fn kernel(g: Geometry, size: SizeLaw, c: ComponentLaw, p: PlacementMap) -> ClusterKernel {
    ClusterKernel::new(g, ParentClusterLaw::new(size, c).unwrap(), p).unwrap()
}

fn all_variants() -> Vec<(ClusterKernel, Point)> {
    let e2 = Geometry::Euclidean(2);
    vec![
        (ClusterKernel::gaussian(2, 0.3, SizeLaw::poisson(3.0)).unwrap(), Point::euclidean(&[0.5, 0.5])),
        (
            kernel(
                Geometry::Se2OnR2,
                SizeLaw::poisson(3.0),
                ComponentLaw::Se2 { angle: AngleLaw::Uniform, xi_mean: [0.0, 1.0], xi_sd: 0.4 },
                PlacementMap::GroupAction,
            ),
            Point::euclidean(&[0.5, 0.5]),
        ),
        (
            kernel(
                Geometry::Hyperbolic2,
                SizeLaw::Fixed(4),
                ComponentLaw::Gaussian { dim: 2, sigma: 0.5 },
                PlacementMap::GeodesicTransport { base: Point::hyperbolic_origin() },
            ),
            Point::hyperboloid_from_chart(0.7, -0.2),
        ),
        (
            kernel(e2, SizeLaw::poisson(2.0), ComponentLaw::Radius(RadiusLaw::Uniform { lo: 0.1, hi: 0.5 }), PlacementMap::RadialAngular),
            Point::euclidean(&[0.0, 0.0]),
        ),
    ]
}

#[test]
fn size_examples() {
    let mut rng = seeded(1);
    let one = ParentClusterLaw::new(SizeLaw::Fixed(1), ComponentLaw::Gaussian { dim: 2, sigma: 1.0 }).unwrap();
    assert!((0..1000).all(|_| one.sample(&mut rng).len() == 1));
    let zero = ParentClusterLaw::new(SizeLaw::Fixed(0), ComponentLaw::Gaussian { dim: 2, sigma: 1.0 }).unwrap();
    assert!(zero.sample(&mut rng).is_empty());
    let p = SizeLaw::Poisson { mean: 3.0, n_max: 20 };
    assert!(p.truncation_mass() < 1e-9);
    let sizes: Vec<f64> = (0..10_000).map(|_| p.sample(&mut rng) as f64).collect();
    let m = EstimateWithError::from_samples(&sizes);
    assert!(m.z_to(3.0).abs() <= 3.0, "{m:?}");
}

#[test]
fn placement_examples() {
    let mut rng = seeded(2);
    let t = ClusterKernel::gaussian(2, 1.0, SizeLaw::Fixed(2)).unwrap();
    let w = [ParentComponent::Offset(vec![0.5, 0.0]), ParentComponent::Offset(vec![-1.0, 2.0])];
    let y = t.place_cluster(&Point::euclidean(&[1.0, 1.0]), &w, &mut rng).unwrap();
    assert_eq!(y, vec![Point::euclidean(&[1.5, 1.0]), Point::euclidean(&[0.0, 3.0])]);
    for (k, x) in all_variants() {
        assert!(k.place_cluster(&x, &[], &mut rng).unwrap().is_empty());
    }
    let (g, _) = &all_variants()[1];
    let half = ParentComponent::Motion(Se2::rotation_about(PI, [1.0, 0.0]));
    let y = g.place(&Point::euclidean(&[2.0, 0.0]), &half, &mut rng).unwrap();
    assert!(y.coords()[0].abs() < 1e-12 && y.coords()[1].abs() < 1e-12, "{y:?}");
}

#[test]
fn gaussian_offsets_are_centred() {
    let (sigma, n) = (0.1, 100_000);
    let k = ClusterKernel::gaussian(2, sigma, SizeLaw::Fixed(1)).unwrap();
    let x = Point::euclidean(&[3.0, -1.0]);
    let mut rng = seeded(3);
    let mut m = [0.0; 2];
    for _ in 0..n {
        let y = &k.sample_cluster(&x, &mut rng).unwrap()[0];
        m[0] += (y.coords()[0] - 3.0) / n as f64;
        m[1] += (y.coords()[1] + 1.0) / n as f64;
    }
    let bound = 3.0 * sigma / (n as f64).sqrt();
    assert!(m[0].abs() < bound && m[1].abs() < bound, "{m:?}");
}

#[test]
fn radial_points_sit_on_the_sphere() {
    let mut rng = seeded(4);
    for g in [Geometry::Euclidean(2), Geometry::Euclidean(3), Geometry::Hyperbolic2] {
        let k = kernel(g, SizeLaw::Fixed(5), ComponentLaw::Radius(RadiusLaw::Fixed(1.0)), PlacementMap::RadialAngular);
        let x = match g {
            Geometry::Hyperbolic2 => Point::hyperboloid_from_chart(0.3, 0.4),
            Geometry::Euclidean(d) => Point::euclidean(&vec![0.25; d]),
            _ => unreachable!(),
        };
        for _ in 0..200 {
            for y in k.sample_cluster(&x, &mut rng).unwrap() {
                assert!((g.distance(&x, &y).unwrap() - 1.0).abs() < 1e-9);
            }
        }
    }
}

fn mean_of(k: &ClusterKernel, x: &Point, seed: u64, n: usize) -> [EstimateWithError; 2] {
    let mut rng = seeded(seed);
    let (mut a, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let y = &k.sample_cluster(x, &mut rng).unwrap()[0];
        a.push(y.coords()[0]);
        b.push(y.coords()[1]);
    }
    [EstimateWithError::from_samples(&a), EstimateWithError::from_samples(&b)]
}

#[test]
fn half_turn_group_action_mean() {
    let m = [0.7, -0.4];
    let k = kernel(
        Geometry::Se2OnR2,
        SizeLaw::Fixed(1),
        ComponentLaw::Se2 { angle: AngleLaw::Fixed(PI), xi_mean: m, xi_sd: 1.0 },
        PlacementMap::GroupAction,
    );
    let x = [1.5, 2.0];
    let e = mean_of(&k, &Point::euclidean(&x), 5, 20_000);
    for i in 0..2 {
        assert!(e[i].z_to(2.0 * m[i] - x[i]).abs() <= 3.0, "{:?}", e[i]);
    }
}

#[test]
fn fixed_angle_action_is_a_translate_of_the_origin_kernel() {
    // y = A x + (I - A) ξ: the law at x is the law at 0 shifted by A x, which is
    // also the law at 0 with ξ shifted by (I - A)⁻¹ A x
    let (alpha, m, sd) = (1.1f64, [0.3, 0.2], 0.5);
    let law = |mean: [f64; 2]| {
        kernel(
            Geometry::Se2OnR2,
            SizeLaw::Fixed(1),
            ComponentLaw::Se2 { angle: AngleLaw::Fixed(alpha), xi_mean: mean, xi_sd: sd },
            PlacementMap::GroupAction,
        )
    };
    let x = [2.0, -1.0];
    let a = Se2::new(alpha, [0.0, 0.0]);
    let ax = a.rotate(x);
    let at_x = mean_of(&law(m), &Point::euclidean(&x), 6, 20_000);
    let at_0 = mean_of(&law(m), &Point::euclidean(&[0.0, 0.0]), 7, 20_000);
    // (I - A)⁻¹ A x, solved in closed form for a 2x2 rotation
    let (c, s) = (alpha.cos(), alpha.sin());
    let det = (1.0 - c) * (1.0 - c) + s * s;
    let shift = [((1.0 - c) * ax[0] - s * ax[1]) / det, (s * ax[0] + (1.0 - c) * ax[1]) / det];
    let shifted = mean_of(&law([m[0] + shift[0], m[1] + shift[1]]), &Point::euclidean(&[0.0, 0.0]), 8, 20_000);
    for i in 0..2 {
        let shifted_origin = EstimateWithError { value: at_0[i].value + ax[i], ..at_0[i] };
        assert!(at_x[i].z_against(&shifted_origin).abs() <= 3.0, "{i}: {:?} vs {:?}", at_x[i], shifted_origin);
        assert!(at_x[i].z_against(&shifted[i]).abs() <= 3.0, "{i}: {:?} vs {:?}", at_x[i], shifted[i]);
    }
}

#[test]
fn log_density_examples() {
    let k = ClusterKernel::gaussian(1, 1.0, SizeLaw::Fixed(1)).unwrap();
    let x = Point::euclidean(&[0.0]);
    let y = [Point::euclidean(&[0.0])];
    assert!((k.log_density(&x, &y).unwrap() + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
    assert_eq!(k.log_density_gradient(&x, &y).unwrap(), vec![vec![0.0]]);
    let y = [Point::euclidean(&[1.0])];
    assert_eq!(k.log_density_gradient(&x, &y).unwrap(), vec![vec![-1.0]]);
    let k = ClusterKernel::gaussian(1, 0.3, SizeLaw::Fixed(1)).unwrap();
    let x = Point::euclidean(&[0.2]);
    let y = [Point::euclidean(&[0.29])];
    assert!((k.log_density_gradient(&x, &y).unwrap()[0][0] + 1.0).abs() < 1e-12);
}

#[test]
fn gaussian_density_integrates_to_one() {
    let sigma = 0.4;
    let k = ClusterKernel::gaussian(1, sigma, SizeLaw::Fixed(1)).unwrap();
    let x = Point::euclidean(&[0.3]);
    let n = 6000;
    let h = 12.0 * sigma / n as f64;
    let total: f64 = (0..n)
        .map(|i| {
            let y = 0.3 - 6.0 * sigma + (i as f64 + 0.5) * h;
            k.log_density(&x, &[Point::euclidean(&[y])]).unwrap().exp() * h
        })
        .sum();
    assert!((total - 1.0).abs() < 1e-4, "{total}");
}

#[test]
fn log_density_gradient_matches_finite_differences() {
    let mut rng = seeded(9);
    let h = 1e-5;
    for _ in 0..1000 {
        let d = rng.random_range(1..=3);
        let sigma = rng.random_range(0.2..2.0);
        let n = rng.random_range(1..5);
        let k = ClusterKernel::gaussian(d, sigma, SizeLaw::Fixed(n)).unwrap();
        let x = Point::euclidean(&(0..d).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
        let y = k.sample_cluster(&x, &mut rng).unwrap();
        let g = k.log_density_gradient(&x, &y).unwrap();
        for i in 0..n {
            let mut fd = vec![0.0; d];
            for (j, f) in fd.iter_mut().enumerate() {
                let shifted = |s: f64| {
                    let mut z = y.clone();
                    let mut c = z[i].coords().to_vec();
                    c[j] += s;
                    z[i] = Point::euclidean(&c);
                    k.log_density(&x, &z).unwrap()
                };
                *f = (shifted(h) - shifted(-h)) / (2.0 * h);
            }
            let err: f64 = g[i].iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale: f64 = g[i].iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(err <= 1e-6 * scale, "relative error {} at {:?}", err / scale, g[i]);
        }
    }
}

#[test]
fn sample_cluster_is_parent_then_place() {
    for (k, x) in all_variants() {
        let (mut a, mut b) = (seeded(10), seeded(10));
        for _ in 0..100 {
            let direct = k.sample_cluster(&x, &mut a).unwrap();
            let w = k.sample_parent(&mut b);
            let staged = k.place_cluster(&x, &w, &mut b).unwrap();
            assert_eq!(direct, staged);
        }
    }
}

#[test]
fn isometric_placements_preserve_structure() {
    let mut rng = seeded(11);
    let e3 = Geometry::Euclidean(3);
    let flat = kernel(e3, SizeLaw::Fixed(4), ComponentLaw::Gaussian { dim: 3, sigma: 1.0 }, PlacementMap::Translation);
    let geo = kernel(
        e3,
        SizeLaw::Fixed(4),
        ComponentLaw::Gaussian { dim: 3, sigma: 1.0 },
        PlacementMap::GeodesicTransport { base: Point::euclidean(&[0.0, 0.0, 0.0]) },
    );
    let h = kernel(
        Geometry::Hyperbolic2,
        SizeLaw::Fixed(4),
        ComponentLaw::Gaussian { dim: 2, sigma: 0.8 },
        PlacementMap::GeodesicTransport { base: Point::hyperboloid_from_chart(0.2, 0.1) },
    );
    for _ in 0..200 {
        let x = Point::euclidean(&[rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), 1.0]);
        for k in [&flat, &geo] {
            let w = k.sample_parent(&mut rng);
            let y = k.place_cluster(&x, &w, &mut rng).unwrap();
            for i in 0..w.len() {
                for j in 0..w.len() {
                    let (ParentComponent::Offset(a), ParentComponent::Offset(b)) = (&w[i], &w[j]) else { unreachable!() };
                    let dw = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
                    assert!((e3.distance(&y[i], &y[j]).unwrap() - dw).abs() < 1e-9);
                }
            }
        }
        let xh = Point::hyperboloid_from_chart(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let w = h.sample_parent(&mut rng);
        let y = h.place_cluster(&xh, &w, &mut rng).unwrap();
        for (wi, yi) in w.iter().zip(&y) {
            let ParentComponent::Offset(v) = wi else { unreachable!() };
            let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            assert!((Geometry::Hyperbolic2.distance(&xh, yi).unwrap() - r).abs() < 1e-9);
        }
    }
}

#[test]
fn group_kernels_need_an_explicit_range() {
    let (k, _) = &all_variants()[1];
    assert_eq!(k.default_range(), None);
    let g = ClusterKernel::gaussian(2, 0.05, SizeLaw::Fixed(1)).unwrap();
    assert_eq!(g.default_range(), Some(6.0 * 0.05));
}

proptest! {
    #[test]
    fn size_probabilities_are_normalised(mean in 0.0..30.0f64, n_max in 1usize..80) {
        let p = SizeLaw::Poisson { mean, n_max }.probabilities();
        prop_assert_eq!(p.len(), n_max + 1);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|v| *v >= 0.0));
    }
}
