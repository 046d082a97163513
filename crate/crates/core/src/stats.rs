//! Test functions, Monte Carlo estimators, closed-form Laplace functionals,
//! moments, correlation identities and a two-sample KS test.

use rand::Rng;
use serde::Serialize;

use crate::centres::{sample_centres, CentreProcess, Intensity, ReferenceMeasure};
use crate::error::{invalid, Error, Result};
use crate::process::{sample_marked, ClusterProcessModel, Configuration};
use crate::rng::{replicate, split_key};
use crate::{Point, Region, Window};

/// `b(t) = (1 - t²)³` on `[0, 1)`, zero beyond.
pub fn bump(t: f64) -> f64 {
    if t < 1.0 {
        let u = 1.0 - t * t;
        u * u * u
    } else {
        0.0
    }
}

/// `b'(t) / t = -6 (1 - t²)²`, finite at the origin.
pub(crate) fn bump_slope_over_t(t: f64) -> f64 {
    if t < 1.0 {
        let u = 1.0 - t * t;
        -6.0 * u * u
    } else {
        0.0
    }
}

/// `sup |b'| = 6/√5 · (4/5)²`, attained at `t = 1/√5`.
pub const BUMP_DERIVATIVE_SUP: f64 = 1.717_300_206_719_838_9;

/// Nonnegative, compactly supported test functions on `X`.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `scale · 1_region`.
    IndicatorScaled { scale: f64, region: Region },
    /// `height · b(|x - center| / radius)` in chart coordinates.
    SmoothBump { center: Vec<f64>, radius: f64, height: f64 },
}

impl TestFunction {
    pub fn indicator(region: Region) -> Self {
        TestFunction::IndicatorScaled { scale: 1.0, region }
    }

    pub fn zero(dim: usize) -> Self {
        TestFunction::IndicatorScaled {
            scale: 0.0,
            region: Region::Box(Window::unit(dim)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TestFunction::IndicatorScaled { scale, .. } if !(*scale >= 0.0) => {
                Err(invalid(format!("indicator scale must be nonnegative, got {scale}")))
            }
            TestFunction::SmoothBump { radius, height, .. } if !(*radius > 0.0 && *height >= 0.0) => {
                Err(invalid("bump needs radius > 0 and height >= 0"))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, p: &Point) -> f64 {
        match self {
            TestFunction::IndicatorScaled { scale, region } => {
                if *scale != 0.0 && region.contains(p) {
                    *scale
                } else {
                    0.0
                }
            }
            TestFunction::SmoothBump { center, radius, height } => {
                let d2: f64 = p.chart().iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                height * bump(d2.sqrt() / radius)
            }
        }
    }

    /// Chart gradient; indicators are not differentiable.
    pub fn gradient(&self, p: &Point) -> Result<Vec<f64>> {
        match self {
            TestFunction::SmoothBump { center, radius, height } => {
                let x = p.chart();
                let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                let k = height * bump_slope_over_t(d2.sqrt() / radius) / (radius * radius);
                Ok(x.iter().zip(center).map(|(a, b)| k * (a - b)).collect())
            }
            TestFunction::IndicatorScaled { .. } => Err(Error::Unsupported("indicator test functions have no gradient".into())),
        }
    }

    /// A chart box containing the support.
    pub fn support_box(&self, geometry: crate::Geometry) -> Window {
        match self {
            TestFunction::IndicatorScaled { region, .. } => region.bounding_box(geometry),
            TestFunction::SmoothBump { center, radius, .. } => {
                let lo = center.iter().map(|c| c - radius).collect();
                let hi = center.iter().map(|c| c + radius).collect();
                Window::new(lo, hi).expect("radius is positive")
            }
        }
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
}

impl EstimateWithError {
    pub fn exact(value: f64) -> Self {
        EstimateWithError { value, std_error: 0.0, n: 0 }
    }

    /// Sample mean and `sd / √n` (sd with the `n - 1` divisor).
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return EstimateWithError { value: f64::NAN, std_error: f64::NAN, n };
        }
        // constant samples: keep the value exact instead of the rounded mean
        if xs.iter().all(|x| x.to_bits() == xs[0].to_bits()) {
            return EstimateWithError { value: xs[0], std_error: 0.0, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return EstimateWithError { value: mean, std_error: 0.0, n };
        }
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        EstimateWithError {
            value: mean,
            std_error: (var / n as f64).sqrt(),
            n,
        }
    }

    /// z-score of the difference of two independent estimates.
    pub fn z_against(&self, other: &EstimateWithError) -> f64 {
        z_score(self.value - other.value, self.std_error.hypot(other.std_error))
    }

    pub fn z_to(&self, target: f64) -> f64 {
        z_score(self.value - target, self.std_error)
    }
}

/// `diff / se`, with `0/0 = 0`.
pub fn z_score(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if se == 0.0 {
        diff.signum() * f64::INFINITY
    } else {
        diff / se
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = if n == 0 { f64::NAN } else { xs.iter().sum::<f64>() / n as f64 };
        Summary {
            n,
            mean,
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// A two-sided identity check `lhs = rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub test: String,
    pub lhs: f64,
    pub rhs: f64,
    pub se_lhs: f64,
    pub se_rhs: f64,
    pub z: f64,
    pub n: usize,
}

impl CheckRecord {
    /// From two independent estimates.
    pub fn independent(test: &str, lhs: EstimateWithError, rhs: EstimateWithError) -> Self {
        CheckRecord {
            test: test.into(),
            lhs: lhs.value,
            rhs: rhs.value,
            se_lhs: lhs.std_error,
            se_rhs: rhs.std_error,
            z: lhs.z_against(&rhs),
            n: lhs.n.max(rhs.n),
        }
    }

    /// From per-replica pairs evaluated on the same samples; the z-score uses
    /// the paired differences.
    pub fn paired(test: &str, pairs: &[(f64, f64)]) -> Self {
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let d: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
        let (ea, eb, ed) = (
            EstimateWithError::from_samples(&a),
            EstimateWithError::from_samples(&b),
            EstimateWithError::from_samples(&d),
        );
        CheckRecord {
            test: test.into(),
            lhs: ea.value,
            rhs: eb.value,
            se_lhs: ea.std_error,
            se_rhs: eb.std_error,
            z: ed.z_to(0.0),
            n: pairs.len(),
        }
    }

    pub fn passes(&self, max_abs_z: f64) -> bool {
        self.z.abs() <= max_abs_z
    }
}

/// `⟨f, γ⟩ = Σ_{x ∈ γ} f(x)`, with multiplicity.
pub fn pair_functional(f: &TestFunction, points: &[Point]) -> f64 {
    points.iter().map(|p| f.eval(p)).sum()
}

/// Mean and SE of `exp(-⟨f, γ⟩)`.
pub fn empirical_laplace(samples: &[Configuration], f: &TestFunction) -> Result<EstimateWithError> {
    if samples.len() < 2 {
        return Err(Error::NotEnoughSamples { needed: 2, got: samples.len() });
    }
    let v: Vec<f64> = samples.iter().map(|c| (-pair_functional(f, &c.points)).exp()).collect();
    Ok(EstimateWithError::from_samples(&v))
}

/// `G_x(f) = ∫ exp(-Σ f(y_i) 1_W(y_i)) η_x(dȳ)` by `n_inner` cluster draws;
/// returns the mean and the variance of the mean.
fn cluster_generating<R: Rng + ?Sized>(
    model: &ClusterProcessModel,
    f: &TestFunction,
    x: &Point,
    n_inner: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let w = model.window();
    let mut vals = Vec::with_capacity(n_inner);
    for _ in 0..n_inner {
        let y = model.kernel().sample_cluster(x, rng)?;
        let s: f64 = y.iter().filter(|p| w.contains(p.chart())).map(|p| f.eval(p)).sum();
        vals.push((-s).exp());
    }
    let e = EstimateWithError::from_samples(&vals);
    Ok((e.value, e.std_error * e.std_error))
}

pub const DEFAULT_LAPLACE_NODES: usize = 1 << 14;

/// The cluster Laplace functional from the centre law and `G_x`.
///
/// Poisson centres: `exp(-∫ (1 - G_x(f)) θ(dx))` over the centre window,
/// with one uniform node in each of about `n_outer` equal chart cells. The
/// standard error pools adjacent cells pairwise (a conservative collapsed-
/// strata estimate) and is carried through `exp` to first order.
/// Lattice centres: `Π_{x ∈ γ₀} G_x(f)`. Gibbs centres have no closed form.
pub fn cluster_laplace_theoretical<R: Rng + ?Sized>(
    model: &ClusterProcessModel,
    f: &TestFunction,
    rng: &mut R,
    n_outer: usize,
    n_inner: usize,
) -> Result<EstimateWithError> {
    if n_inner < 2 {
        return Err(Error::NotEnoughSamples { needed: 2, got: n_inner });
    }
    let key = split_key(rng);
    match model.centres() {
        CentreProcess::Gibbs(_) => Err(Error::NoClosedForm(
            "gibbs centres: compare empirical_laplace estimates on both sides".into(),
        )),
        CentreProcess::Lattice(points) => {
            let parts = replicate(key, points.len(), |i, r| cluster_generating(model, f, &points[i], n_inner, r));
            let mut log_l = 0.0;
            let mut rel_var = 0.0;
            for p in parts {
                let (g, v) = p?;
                if g == 0.0 {
                    return Ok(EstimateWithError { value: 0.0, std_error: 0.0, n: points.len() });
                }
                log_l += g.ln();
                rel_var += v / (g * g);
            }
            let l = log_l.exp();
            Ok(EstimateWithError { value: l, std_error: l * rel_var.sqrt(), n: points.len() })
        }
        CentreProcess::Poisson(theta) => {
            let cw = theta.window();
            let d = cw.dim();
            let per_axis = ((n_outer.max(1) as f64).powf(1.0 / d as f64).round() as usize).max(1);
            let total = per_axis.pow(d as u32);
            let steps: Vec<f64> = cw.lo().iter().zip(cw.hi()).map(|(a, b)| (b - a) / per_axis as f64).collect();
            let cell: f64 = steps.iter().product();
            let h = replicate(key, total, |j, r| -> Result<f64> {
                let mut idx = j;
                let mut x = vec![0.0; d];
                for i in 0..d {
                    x[i] = cw.lo()[i] + ((idx % per_axis) as f64 + r.random::<f64>()) * steps[i];
                    idx /= per_axis;
                }
                let dens = theta.chart_density(&x);
                if dens == 0.0 {
                    return Ok(0.0);
                }
                let p = model.geometry().point_from_chart(&x)?;
                let (g, _) = cluster_generating(model, f, &p, n_inner, r)?;
                Ok(dens * cell * (1.0 - g))
            });
            let h: Vec<f64> = h.into_iter().collect::<Result<_>>()?;
            let integral: f64 = h.iter().sum();
            let var: f64 = h.chunks_exact(2).map(|c| (c[0] - c[1]) * (c[0] - c[1])).sum();
            let l = (-integral).exp();
            Ok(EstimateWithError { value: l, std_error: l * var.sqrt(), n: total })
        }
    }
}

/// Mean and SE of `|⟨f, γ⟩|^order` for `order ∈ 1..=4`.
pub fn moment_estimate(samples: &[Configuration], f: &TestFunction, order: u32) -> Result<EstimateWithError> {
    if !(1..=4).contains(&order) {
        return Err(invalid(format!("moment order must be in 1..=4, got {order}")));
    }
    let v: Vec<f64> = samples.iter().map(|c| pair_functional(f, &c.points).abs().powi(order as i32)).collect();
    Ok(EstimateWithError::from_samples(&v))
}

/// Lyapunov's inequality `m_r ≤ m_{r+δ}^{r/(r+δ)}` for the empirical
/// absolute moments of `⟨f, γ⟩`, up to floating-point rounding.
pub fn lyapunov_holds(samples: &[Configuration], f: &TestFunction, r: f64, delta: f64) -> bool {
    let vals: Vec<f64> = samples.iter().map(|c| pair_functional(f, &c.points).abs()).collect();
    let n = vals.len() as f64;
    let m = |p: f64| vals.iter().map(|v| v.powf(p)).sum::<f64>() / n;
    let (lo, hi) = (m(r), m(r + delta).powf(r / (r + delta)));
    lo <= hi * (1.0 + 1e-12) + f64::MIN_POSITIVE
}

/// `∫ f dθ` over the reference window: exact for box indicators under a
/// flat constant intensity, a midpoint grid otherwise.
pub fn theta_integral(theta: &ReferenceMeasure, f: &TestFunction) -> f64 {
    if let (TestFunction::IndicatorScaled { scale, region: Region::Box(b) }, Intensity::Constant(lambda)) =
        (f, theta.intensity())
    {
        if theta.geometry().is_euclidean() {
            return scale * lambda * theta.window().intersection_volume(b);
        }
    }
    let g = theta.geometry();
    theta.integrate(|x| match g.point_from_chart(x) {
        Ok(p) => f.eval(&p),
        Err(_) => 0.0,
    })
}

/// Symmetric functions on `Xⁿ` of tensor form: for `fs = [f₁, …, fₙ]`,
/// `φ(x₁..xₙ) = Σ_σ Π_i f_σ(i)(x_i)` over permutations.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTensor(pub Vec<TestFunction>);

/// The measure the correlation function is taken against.
#[derive(Debug, Clone, Copy)]
pub enum CorrelationMeasure<'a> {
    /// `θ` with correlation function `κ ≡ 1` (Poisson).
    Poisson(&'a ReferenceMeasure),
    /// The correlation measure of the Dirac law on a fixed configuration.
    Atomic(&'a [Point]),
}

/// `E Σ_{{x₁..xₙ} ⊂ γ} φ = (1/n!) ∫ φ κ dθⁿ` for `n ∈ {1, 2}`.
pub fn correlation_identity_check(
    samples: &[Configuration],
    phi: &SymmetricTensor,
    measure: CorrelationMeasure<'_>,
) -> Result<CheckRecord> {
    let n = phi.0.len();
    if n == 0 || n > 2 {
        return Err(Error::Unsupported(format!("correlation identities are implemented for n = 1, 2 (got {n})")));
    }
    let subset_sum = |pts: &[Point]| -> f64 {
        if n == 1 {
            pair_functional(&phi.0[0], pts)
        } else {
            let (f, g) = (&phi.0[0], &phi.0[1]);
            let fs: Vec<f64> = pts.iter().map(|p| f.eval(p)).collect();
            let gs: Vec<f64> = pts.iter().map(|p| g.eval(p)).collect();
            let diag: f64 = fs.iter().zip(&gs).map(|(a, b)| a * b).sum();
            fs.iter().sum::<f64>() * gs.iter().sum::<f64>() - diag
        }
    };
    let lhs_vals: Vec<f64> = samples.iter().map(|c| subset_sum(&c.points)).collect();
    let lhs = EstimateWithError::from_samples(&lhs_vals);
    let rhs = match measure {
        CorrelationMeasure::Poisson(theta) => phi.0.iter().map(|f| theta_integral(theta, f)).product(),
        CorrelationMeasure::Atomic(points) => subset_sum(points),
    };
    let mut rec = CheckRecord::independent("correlation", lhs, EstimateWithError::exact(rhs));
    rec.n = samples.len();
    Ok(rec)
}

/// The marked-level Laplace identity with `f(x, ȳ) = Σ_i g(y_i)`: the
/// empirical Laplace functional of marked samples against that of centre
/// samples with `f̄(x) = -log ∫ e^{-Σ g(y_i)} η_x(dȳ)`. Since the inner
/// estimates of `e^{-f̄(x)}` are unbiased and independent across centres,
/// `Π_x Ĝ_x` is an unbiased estimate on the right-hand side.
pub fn marked_laplace_identity<R: Rng + ?Sized>(
    model: &ClusterProcessModel,
    g: &TestFunction,
    rng: &mut R,
    n_samples: usize,
    n_inner: usize,
) -> Result<CheckRecord> {
    let (kl, kr) = (split_key(rng), split_key(rng));
    let lhs: Vec<f64> = replicate(kl, n_samples, |_, r| -> Result<f64> {
        let m = sample_marked(model, r)?;
        Ok((-m.pairs.iter().flat_map(|(_, y)| y).map(|p| g.eval(p)).sum::<f64>()).exp())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let rhs: Vec<f64> = replicate(kr, n_samples, |_, r| -> Result<f64> {
        let centres = sample_centres(model.centres(), r)?;
        let mut prod = 1.0;
        for x in &centres {
            let mut acc = 0.0;
            for _ in 0..n_inner {
                let y = model.kernel().sample_cluster(x, r)?;
                acc += (-y.iter().map(|p| g.eval(p)).sum::<f64>()).exp();
            }
            prod *= acc / n_inner as f64;
        }
        Ok(prod)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok(CheckRecord::independent(
        "marked-laplace",
        EstimateWithError::from_samples(&lhs),
        EstimateWithError::from_samples(&rhs),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

/// Asymptotic Kolmogorov tail `Q(λ) = 2 Σ (-1)^{k-1} e^{-2k²λ²}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value
/// (effective size `n₁n₂/(n₁+n₂)`, small-sample correction
/// `λ = (√nₑ + 0.12 + 0.11/√nₑ) D`). Ties are handled by advancing both
/// empirical distribution functions past equal values together.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::NotEnoughSamples { needed: 1, got: 0 });
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n1, n2) = (x.len(), y.len());
    let (mut i, mut j, mut d) = (0, 0, 0f64);
    while i < n1 && j < n2 {
        let v = x[i].min(y[j]);
        while i < n1 && x[i] <= v {
            i += 1;
        }
        while j < n2 && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    let sq = ne.sqrt();
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_q((sq + 0.12 + 0.11 / sq) * d),
        n1,
        n2,
    })
}
