use clustersim::centres::{CentreProcess, ReferenceMeasure};
use clustersim::clusters::{ClusterKernel, ComponentLaw, ParentClusterLaw, PlacementMap, SizeLaw};
use clustersim::process::{sample_cluster_process, ClusterProcessModel, Configuration};
use clustersim::rng::{replicate, seeded};
use clustersim::stats::{
    bump, cluster_laplace_theoretical, correlation_identity_check, empirical_laplace, kolmogorov_q, ks_two_sample, lyapunov_holds,
    moment_estimate, pair_functional, theta_integral, CorrelationMeasure, SymmetricTensor, TestFunction, BUMP_DERIVATIVE_SUP,
};
use clustersim::{Error, Geometry, Point, Region, Window};
use proptest::prelude::*;
use rand::Rng;

const E2: Geometry = Geometry::Euclidean(2);

fn pts(c: &[[f64; 2]]) -> Vec<Point> {
    c.iter().map(|p| Point::euclidean(p)).collect()
}

fn boxed(lo: [f64; 2], hi: [f64; 2]) -> Region {
    Region::Box(Window::new(lo.to_vec(), hi.to_vec()).unwrap())
}

fn dirac_poisson(lambda: f64) -> ClusterProcessModel {
    let k = ClusterKernel::new(E2, ParentClusterLaw::new(SizeLaw::Fixed(1), ComponentLaw::Dirac { dim: 2 }).unwrap(), PlacementMap::Translation)
        .unwrap();
    let r = ReferenceMeasure::constant(E2, Window::unit(2), lambda).unwrap();
    ClusterProcessModel::new(Window::unit(2), CentreProcess::Poisson(r), k, Some(0.0)).unwrap()
}

fn samples(model: &ClusterProcessModel, key: u64, n: usize) -> Vec<Configuration> {
    replicate(key, n, |_, r| sample_cluster_process(model, r).unwrap())
}

/// Composite Simpson rule on the unit square.
fn simpson2(f: impl Fn(f64, f64) -> f64, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let w = |i: usize| if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
    let mut s = 0.0;
    for i in 0..=n {
        for j in 0..=n {
            s += w(i) * w(j) * f(i as f64 * h, j as f64 * h);
        }
    }
    s * h * h / 9.0
}

#[test]
fn bump_profile() {
    assert_eq!(bump(0.0), 1.0);
    assert_eq!(bump(1.0), 0.0);
    assert_eq!(bump(1.5), 0.0);
    assert!((bump(0.5) - 0.421875).abs() < 1e-15);
    // sup |b'| by a dense grid: b'(t) = -6t(1 - t²)²
    let sup = (0..=1_000_000).map(|i| i as f64 / 1e6).map(|t| (6.0 * t * (1.0 - t * t).powi(2)).abs()).fold(0.0, f64::max);
    assert!((sup - BUMP_DERIVATIVE_SUP).abs() < 1e-9);
}

#[test]
fn pair_functional_counts_multiplicity() {
    let f = TestFunction::IndicatorScaled { scale: 2.0, region: boxed([0.0, 0.0], [0.5, 0.5]) };
    assert_eq!(pair_functional(&f, &pts(&[[0.1, 0.1], [0.1, 0.1], [0.9, 0.9]])), 4.0);
    assert_eq!(pair_functional(&f, &[]), 0.0);
    let b = TestFunction::SmoothBump { center: vec![0.0, 0.0], radius: 2.0, height: 3.0 };
    assert!((pair_functional(&b, &pts(&[[1.0, 0.0]])) - 3.0 * 0.421875).abs() < 1e-15);
}

#[test]
fn empirical_laplace_edge_cases() {
    let empty = vec![Configuration { points: vec![], window: Window::unit(2) }; 10];
    let f = TestFunction::indicator(Region::Box(Window::unit(2)));
    let e = empirical_laplace(&empty, &f).unwrap();
    assert_eq!((e.value, e.std_error), (1.0, 0.0));
    let s = samples(&dirac_poisson(20.0), 1, 50);
    assert_eq!(empirical_laplace(&s, &TestFunction::zero(2)).unwrap().value, 1.0);
    assert!(matches!(empirical_laplace(&s[..1], &f), Err(Error::NotEnoughSamples { .. })));
}

#[test]
fn poisson_laplace_closed_form() {
    let lambda = 30.0;
    let f = TestFunction::indicator(boxed([0.0, 0.0], [0.5, 0.5]));
    let target = (-lambda * 0.25 * (1.0 - (-1.0f64).exp())).exp();
    let e = empirical_laplace(&samples(&dirac_poisson(lambda), 2, 20_000), &f).unwrap();
    assert!(e.z_to(target).abs() <= 3.0, "{e:?} vs {target}");
}

#[test]
fn theoretical_laplace_under_dirac_clusters() {
    let lambda = 30.0;
    let model = dirac_poisson(lambda);
    let f = TestFunction::SmoothBump { center: vec![0.4, 0.6], radius: 0.3, height: 1.5 };
    let g = |x: f64, y: f64| 1.0 - (-f.eval(&Point::euclidean(&[x, y]))).exp();
    let target = (-lambda * simpson2(g, 2000)).exp();
    let e = cluster_laplace_theoretical(&model, &f, &mut seeded(3), 1 << 12, 2).unwrap();
    assert!(e.z_to(target).abs() <= 3.0, "{e:?} vs {target}");
    let one = cluster_laplace_theoretical(&model, &TestFunction::zero(2), &mut seeded(4), 256, 2).unwrap();
    assert_eq!((one.value, one.std_error), (1.0, 0.0));
}

#[test]
fn theoretical_laplace_for_lattice_centres() {
    let k = ClusterKernel::gaussian(2, 0.1, SizeLaw::Fixed(2)).unwrap();
    let lattice = pts(&[[0.3, 0.3], [0.7, 0.6]]);
    let model = ClusterProcessModel::new(Window::unit(2), CentreProcess::Lattice(lattice), k, None).unwrap();
    let f = TestFunction::SmoothBump { center: vec![0.5, 0.5], radius: 0.4, height: 1.0 };
    let th = cluster_laplace_theoretical(&model, &f, &mut seeded(5), 1, 20_000).unwrap();
    let emp = empirical_laplace(&samples(&model, 6, 20_000), &f).unwrap();
    assert!(th.z_against(&emp).abs() <= 3.0, "{th:?} vs {emp:?}");
}

#[test]
fn moments_under_poisson_centres() {
    let lambda = 25.0;
    let f = TestFunction::IndicatorScaled { scale: 0.5, region: boxed([0.2, 0.0], [1.0, 0.5]) };
    let s = samples(&dirac_poisson(lambda), 7, 20_000);
    // ⟨f, γ⟩ = 0.5 N with N ~ Poisson(λ · 0.4)
    let m = lambda * 0.4;
    let m1 = moment_estimate(&s, &f, 1).unwrap();
    let m2 = moment_estimate(&s, &f, 2).unwrap();
    assert!(m1.z_to(0.5 * m).abs() <= 3.0, "{m1:?}");
    assert!(m2.z_to(0.25 * (m + m * m)).abs() <= 3.0, "{m2:?}");
    assert!(moment_estimate(&s, &f, 5).is_err());
    let empty = vec![Configuration { points: vec![], window: Window::unit(2) }; 3];
    assert_eq!(moment_estimate(&empty, &f, 2).unwrap().value, 0.0);
    for r in [1.0, 1.5, 2.0] {
        assert!(lyapunov_holds(&s, &f, r, 1.0));
    }
}

#[test]
fn laplace_is_monotone_in_f() {
    let k = ClusterKernel::gaussian(2, 0.05, SizeLaw::poisson(2.0)).unwrap();
    let r = ReferenceMeasure::constant(E2, Window::unit(2).dilated(0.3), 20.0).unwrap();
    let model = ClusterProcessModel::new(Window::unit(2), CentreProcess::Poisson(r), k, None).unwrap();
    let s = samples(&model, 8, 500);
    let small = TestFunction::SmoothBump { center: vec![0.5, 0.5], radius: 0.3, height: 0.5 };
    let big = TestFunction::SmoothBump { center: vec![0.5, 0.5], radius: 0.3, height: 1.0 };
    assert!(empirical_laplace(&s, &small).unwrap().value >= empirical_laplace(&s, &big).unwrap().value);
}

#[test]
fn theta_integral_matches_quadrature() {
    let theta = ReferenceMeasure::constant(E2, Window::unit(2), 4.0).unwrap();
    let f = TestFunction::IndicatorScaled { scale: 2.0, region: boxed([0.5, 0.5], [1.5, 1.5]) };
    assert_eq!(theta_integral(&theta, &f), 2.0);
    let b = TestFunction::SmoothBump { center: vec![0.5, 0.5], radius: 0.3, height: 1.0 };
    let q = 4.0 * simpson2(|x, y| b.eval(&Point::euclidean(&[x, y])), 2000);
    assert!((theta_integral(&theta, &b) - q).abs() < 1e-5 * q);
}

#[test]
fn correlation_identities() {
    let lambda = 20.0;
    let model = dirac_poisson(lambda);
    let s = samples(&model, 9, 20_000);
    let theta = model.centres().reference().unwrap();
    let f = TestFunction::indicator(boxed([0.0, 0.0], [0.5, 1.0]));
    let g = TestFunction::SmoothBump { center: vec![0.6, 0.5], radius: 0.4, height: 1.0 };
    for phi in [SymmetricTensor(vec![f.clone()]), SymmetricTensor(vec![f.clone(), g.clone()])] {
        let rec = correlation_identity_check(&s, &phi, CorrelationMeasure::Poisson(theta)).unwrap();
        assert!(rec.passes(3.0), "{rec:?}");
    }
    // a fixed configuration: both sides agree exactly
    let lattice = pts(&[[0.1, 0.2], [0.3, 0.9], [0.3, 0.9], [0.8, 0.4]]);
    let fixed = vec![Configuration { points: lattice.clone(), window: Window::unit(2) }; 5];
    let rec = correlation_identity_check(&fixed, &SymmetricTensor(vec![f.clone(), g]), CorrelationMeasure::Atomic(&lattice)).unwrap();
    assert_eq!(rec.lhs, rec.rhs);
    assert!(correlation_identity_check(&fixed, &SymmetricTensor(vec![f.clone(), f.clone(), f]), CorrelationMeasure::Atomic(&lattice)).is_err());
}

#[test]
fn kolmogorov_tail_values() {
    // standard critical values of the Kolmogorov distribution
    for (lambda, alpha) in [(1.3581, 0.05), (1.6276, 0.01), (1.9495, 0.001)] {
        assert!((kolmogorov_q(lambda) - alpha).abs() < 0.01 * alpha, "{lambda}: {}", kolmogorov_q(lambda));
    }
    assert_eq!(kolmogorov_q(0.0), 1.0);
}

#[test]
fn ks_detects_shift_and_accepts_same_law() {
    let mut rng = seeded(10);
    let a: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
    let b: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
    let c: Vec<f64> = (0..5000).map(|_| rng.random::<f64>() + 0.1).collect();
    assert!(ks_two_sample(&a, &b).unwrap().p_value > 0.001);
    assert!(ks_two_sample(&a, &c).unwrap().p_value < 1e-10);
    assert!(ks_two_sample(&a, &[]).is_err());
}

fn brute_ks(a: &[f64], b: &[f64]) -> f64 {
    let cdf = |s: &[f64], t: f64| s.iter().filter(|v| **v <= t).count() as f64 / s.len() as f64;
    a.iter().chain(b).map(|&t| (cdf(a, t) - cdf(b, t)).abs()).fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn ks_statistic_matches_brute_force(
        a in prop::collection::vec(0..20i32, 1..40),
        b in prop::collection::vec(0..20i32, 1..40),
    ) {
        // small integer values force ties
        let (a, b): (Vec<f64>, Vec<f64>) = (a.iter().map(|v| *v as f64).collect(), b.iter().map(|v| *v as f64).collect());
        let r = ks_two_sample(&a, &b).unwrap();
        prop_assert!((r.statistic - brute_ks(&a, &b)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn bump_is_bounded_and_supported(t in -3.0..3.0f64) {
        let v = bump(t.abs());
        prop_assert!((0.0..=1.0).contains(&v));
        if t.abs() >= 1.0 { prop_assert_eq!(v, 0.0); }
    }
}
