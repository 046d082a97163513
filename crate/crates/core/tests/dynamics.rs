use clustersim::centres::{CentreProcess, ReferenceMeasure};
use clustersim::clusters::{ClusterKernel, SizeLaw};
use clustersim::dynamics::{
    em_stationary_variance, langevin_step, ou_exact_transition, stationarity_test, wrap_into_box, DynamicsConfig, STABILITY_RATIO,
};
use clustersim::process::{ClusterProcessModel, MarkedConfiguration};
use clustersim::rng::{replicate, seeded};
use clustersim::stats::{EstimateWithError, TestFunction};
use clustersim::{Error, Geometry, Point, Window};
use proptest::prelude::*;

fn p(c: &[f64]) -> Point {
    Point::euclidean(c)
}

fn cfg(dt: f64, n_steps: usize, b: Window) -> DynamicsConfig {
    DynamicsConfig { dt, n_steps, stride: 1, periodic_box: b }
}

fn single(x: &[f64], y: &[f64], b: &Window) -> MarkedConfiguration {
    MarkedConfiguration { pairs: vec![(p(x), vec![p(y)])], window: b.clone() }
}

#[test]
fn zero_step_and_empty_state_are_fixed_points() {
    let k = ClusterKernel::gaussian(2, 0.1, SizeLaw::Fixed(1)).unwrap();
    let b = Window::unit(2);
    let s = single(&[0.5, 0.5], &[0.52, 0.47], &b);
    assert_eq!(langevin_step(&s, &k, &cfg(0.0, 1, b.clone()), &mut seeded(1)).unwrap(), s);
    let empty = MarkedConfiguration { pairs: vec![], window: b.clone() };
    assert_eq!(langevin_step(&empty, &k, &cfg(1e-4, 1, b.clone()), &mut seeded(2)).unwrap(), empty);
    let no_points = MarkedConfiguration { pairs: vec![(p(&[0.5, 0.5]), vec![])], window: b.clone() };
    assert_eq!(langevin_step(&no_points, &k, &cfg(1e-4, 1, b), &mut seeded(3)).unwrap(), no_points);
}

#[test]
fn one_step_moments() {
    let (sigma, dt) = (0.5, 2e-3);
    let k = ClusterKernel::gaussian(1, sigma, SizeLaw::Fixed(1)).unwrap();
    let b = Window::cube(-50.0, 50.0, 1);
    let c = cfg(dt, 1, b.clone());
    let (x, y0) = (0.0, 0.7);
    let next: Vec<f64> = replicate(4, 20_000, |_, r| {
        langevin_step(&single(&[x], &[y0], &b), &k, &c, r).unwrap().pairs[0].1[0].coords()[0]
    });
    let mean = EstimateWithError::from_samples(&next);
    let expect = y0 - (y0 - x) / (sigma * sigma) * dt;
    assert!(mean.z_to(expect).abs() <= 3.0, "{mean:?} vs {expect}");
    let sq: Vec<f64> = next.iter().map(|v| (v - expect).powi(2)).collect();
    let var = EstimateWithError::from_samples(&sq);
    assert!(var.z_to(2.0 * dt).abs() <= 3.0, "{var:?}");
}

#[test]
fn relaxation_from_a_far_start_follows_the_linear_mean() {
    // E[y_n - x] = (y_0 - x)(1 - Δt/σ²)^n exactly for the Euler chain
    let (sigma, dt, n) = (0.2, 4e-4, 400);
    let k = ClusterKernel::gaussian(1, sigma, SizeLaw::Fixed(1)).unwrap();
    let b = Window::cube(-20.0, 20.0, 1);
    let c = cfg(dt, n, b.clone());
    let y0 = 1.5;
    let paths: Vec<Vec<f64>> = replicate(5, 4000, |_, r| {
        let mut s = single(&[0.0], &[y0], &b);
        let mut out = Vec::with_capacity(n / 50);
        for step in 1..=n {
            s = langevin_step(&s, &k, &c, r).unwrap();
            if step % 50 == 0 {
                out.push(s.pairs[0].1[0].coords()[0]);
            }
        }
        out
    });
    let a = 1.0 - dt / (sigma * sigma);
    let mut prev = f64::INFINITY;
    for (j, checkpoint) in (50..=n).step_by(50).enumerate() {
        let col: Vec<f64> = paths.iter().map(|v| v[j]).collect();
        let e = EstimateWithError::from_samples(&col);
        assert!(e.z_to(y0 * a.powi(checkpoint as i32)).abs() <= 3.5, "step {checkpoint}: {e:?}");
        assert!(e.value < prev);
        prev = e.value;
    }
}

#[test]
fn stability_bound_is_enforced() {
    let k = ClusterKernel::gaussian(2, 0.1, SizeLaw::Fixed(1)).unwrap();
    let b = Window::unit(2);
    let s = single(&[0.5, 0.5], &[0.5, 0.5], &b);
    let too_big = 1.01 * STABILITY_RATIO * 0.01;
    let e = langevin_step(&s, &k, &cfg(too_big, 1, b.clone()), &mut seeded(6)).unwrap_err();
    assert!(matches!(e, Error::StabilityBound { .. }), "{e}");
    assert!(langevin_step(&s, &k, &cfg(STABILITY_RATIO * 0.01, 1, b.clone()), &mut seeded(6)).is_ok());
    let bad_stride = DynamicsConfig { stride: 0, ..cfg(1e-5, 1, b) };
    assert!(bad_stride.validate(&k).is_err());
}

#[test]
fn zero_test_function_gives_a_zero_series() {
    let k = ClusterKernel::gaussian(2, 0.1, SizeLaw::poisson(3.0)).unwrap();
    let r = ReferenceMeasure::constant(Geometry::Euclidean(2), Window::unit(2), 10.0).unwrap();
    let m = ClusterProcessModel::new(Window::unit(2), CentreProcess::Poisson(r), k, None).unwrap();
    let c = DynamicsConfig { dt: 1e-4, n_steps: 50, stride: 10, periodic_box: Window::unit(2) };
    let rep = stationarity_test(&m, &c, &TestFunction::zero(2), &mut seeded(7), 20).unwrap();
    assert_eq!(rep.times.len(), 6);
    assert!(rep.mean.iter().chain(&rep.se).all(|v| *v == 0.0));
    assert_eq!(rep.drift_slope, 0.0);
}

#[test]
fn em_variance_is_the_fixed_point_of_the_variance_recursion() {
    for (sigma, dt) in [(1.0, 0.01), (0.3, 5e-4), (2.0, 0.04)] {
        let a = 1.0 - dt / (sigma * sigma);
        let mut v: f64 = 0.0;
        for _ in 0..1_000_000 {
            v = a * a * v + 2.0 * dt;
        }
        assert!((v - em_stationary_variance(sigma, dt)).abs() < 1e-12 * v, "{v}");
        // the exact transition preserves σ²
        let (k, var) = ou_exact_transition(sigma, dt);
        assert!((k * k * sigma * sigma + var - sigma * sigma).abs() < 1e-14);
    }
}

proptest! {
    #[test]
    fn wrapping_lands_in_the_box(y0 in -10.0..10.0f64, y1 in -10.0..10.0f64, lo in -2.0..0.0f64, side in 0.5..3.0f64) {
        let b = Window::cube(lo, lo + side, 2);
        let s = single(&[0.0, 0.0], &[y0, y1], &b);
        let w = wrap_into_box(&s, &b);
        let q = w.pairs[0].1[0].coords();
        prop_assert!(b.contains(q), "{:?}", q);
        // wrapping shifts by whole periods
        for (a, c) in q.iter().zip([y0, y1]) {
            let k = (c - a) / side;
            prop_assert!((k - k.round()).abs() < 1e-9);
        }
    }
}
