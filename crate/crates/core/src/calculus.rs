//! Differential calculus on configurations of the flat translation-Gaussian
//! family: cylinder functions and their Γ-gradients, compactly supported
//! bump diffeomorphisms with the induced Radon–Nikodym densities, and the
//! logarithmic derivatives behind the integration-by-parts checks.

use rand::Rng;

use crate::clusters::ClusterKernel;
use crate::error::{invalid, Error, Result};
use crate::geometry::dot;
use crate::process::{project_uncropped, sample_marked, ClusterProcessModel, MarkedConfiguration};
use crate::rng::{replicate, split_key};
use crate::stats::{bump, bump_slope_over_t, pair_functional, CheckRecord, TestFunction, BUMP_DERIVATIVE_SUP};
use crate::{Point, Window};

/// Smooth outer functions `g: ℝ^k → ℝ` with bounded derivatives on the
/// relevant range.
#[derive(Debug, Clone, PartialEq)]
pub enum Outer {
    Constant(f64),
    /// `Σ a_j t_j`.
    Linear(Vec<f64>),
    /// `exp(-Σ t_j)`.
    ExpNegSum,
    /// `sin(Σ a_j t_j)`.
    Trig(Vec<f64>),
    /// `exp(-½ Σ t_j²)`.
    Gaussian,
}

impl Outer {
    pub fn value(&self, t: &[f64]) -> f64 {
        match self {
            Outer::Constant(c) => *c,
            Outer::Linear(a) => dot(a, t),
            Outer::ExpNegSum => (-t.iter().sum::<f64>()).exp(),
            Outer::Trig(a) => dot(a, t).sin(),
            Outer::Gaussian => (-0.5 * dot(t, t)).exp(),
        }
    }

    pub fn gradient(&self, t: &[f64]) -> Vec<f64> {
        match self {
            Outer::Constant(_) => vec![0.0; t.len()],
            Outer::Linear(a) => a.clone(),
            Outer::ExpNegSum => {
                let v = (-t.iter().sum::<f64>()).exp();
                vec![-v; t.len()]
            }
            Outer::Trig(a) => {
                let c = dot(a, t).cos();
                a.iter().map(|ai| ai * c).collect()
            }
            Outer::Gaussian => {
                let v = (-0.5 * dot(t, t)).exp();
                t.iter().map(|ti| -ti * v).collect()
            }
        }
    }
}

/// `F(γ) = g(⟨φ₁,γ⟩, …, ⟨φ_k,γ⟩)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderFunction {
    pub outer: Outer,
    pub inner: Vec<TestFunction>,
}

impl CylinderFunction {
    pub fn new(outer: Outer, inner: Vec<TestFunction>) -> Result<Self> {
        let k = inner.len();
        match &outer {
            Outer::Linear(a) | Outer::Trig(a) if a.len() != k => {
                return Err(Error::DimensionMismatch { expected: k, got: a.len() });
            }
            _ => {}
        }
        for f in &inner {
            f.validate()?;
        }
        Ok(CylinderFunction { outer, inner })
    }

    pub fn constant(c: f64) -> Self {
        CylinderFunction { outer: Outer::Constant(c), inner: Vec::new() }
    }

    fn arguments(&self, points: &[Point]) -> Vec<f64> {
        self.inner.iter().map(|f| pair_functional(f, points)).collect()
    }

    pub fn eval(&self, points: &[Point]) -> f64 {
        self.outer.value(&self.arguments(points))
    }

    /// `∇_x F(γ)` at one point `x ∈ γ`.
    pub fn point_gradient(&self, points: &[Point], x: &Point) -> Result<Vec<f64>> {
        let dg = self.outer.gradient(&self.arguments(points));
        self.point_gradient_with(&dg, x)
    }

    fn point_gradient_with(&self, dg: &[f64], x: &Point) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.chart().len()];
        for (f, &a) in self.inner.iter().zip(dg) {
            if a == 0.0 {
                continue;
            }
            for (o, g) in out.iter_mut().zip(f.gradient(x)?) {
                *o += a * g;
            }
        }
        Ok(out)
    }
}

/// Compactly supported vector fields on `ℝ^d`.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorField {
    /// `b(|x - c|/r) u`.
    Bump { center: Vec<f64>, radius: f64, direction: Vec<f64> },
    /// `s b(|x - c|/r) (x - c)`.
    Radial { center: Vec<f64>, radius: f64, scale: f64 },
}

impl VectorField {
    fn geometry(&self) -> (&[f64], f64) {
        match self {
            VectorField::Bump { center, radius, .. } | VectorField::Radial { center, radius, .. } => (center, *radius),
        }
    }

    pub fn support(&self) -> Window {
        let (c, r) = self.geometry();
        Window::new(c.iter().map(|v| v - r).collect(), c.iter().map(|v| v + r).collect()).expect("radius > 0")
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let (c, r) = self.geometry();
        let dx: Vec<f64> = x.iter().zip(c).map(|(a, b)| a - b).collect();
        let b = bump(dot(&dx, &dx).sqrt() / r);
        match self {
            VectorField::Bump { direction, .. } => direction.iter().map(|u| b * u).collect(),
            VectorField::Radial { scale, .. } => dx.iter().map(|d| scale * b * d).collect(),
        }
    }

    pub fn divergence(&self, x: &[f64]) -> f64 {
        let (c, r) = self.geometry();
        let dx: Vec<f64> = x.iter().zip(c).map(|(a, b)| a - b).collect();
        let d2 = dot(&dx, &dx);
        let t = d2.sqrt() / r;
        // ∇b(|x-c|/r) = b'(t)/t · (x-c)/r²
        let k = bump_slope_over_t(t) / (r * r);
        match self {
            VectorField::Bump { direction, .. } => k * dot(&dx, direction),
            VectorField::Radial { scale, .. } => scale * (k * d2 + x.len() as f64 * bump(t)),
        }
    }
}

/// `∇^Γ_v F(γ) = Σ_{x ∈ γ} ∇_x F(γ) · v(x)`.
pub fn gamma_gradient(f: &CylinderFunction, points: &[Point], v: &VectorField) -> Result<f64> {
    let dg = f.outer.gradient(&f.arguments(points));
    let supp = v.support();
    let mut s = 0.0;
    for x in points {
        if !supp.contains(x.chart()) {
            continue;
        }
        let g = f.point_gradient_with(&dg, x)?;
        s += dot(&g, &v.eval(x.chart()));
    }
    Ok(s)
}

/// Compactly supported diffeomorphisms of `ℝ^d`.
#[derive(Debug, Clone, PartialEq)]
pub enum Diffeomorphism {
    Identity,
    /// `x ↦ x + s b(|x - c|/r) u` with `|u| = 1` and `|s| sup|b'| / r < 1`.
    BumpFlow { center: Vec<f64>, radius: f64, shift: f64, direction: Vec<f64> },
    /// `outer ∘ inner`.
    Composition(Box<Diffeomorphism>, Box<Diffeomorphism>),
}

const NEWTON_TOL: f64 = 1e-12;

impl Diffeomorphism {
    pub fn bump_flow(center: Vec<f64>, radius: f64, shift: f64, direction: Vec<f64>) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(invalid(format!("bump radius must be positive, got {radius}")));
        }
        if center.len() != direction.len() {
            return Err(Error::DimensionMismatch { expected: center.len(), got: direction.len() });
        }
        let n = dot(&direction, &direction).sqrt();
        if !(n > 0.0) {
            return Err(invalid("bump direction must be nonzero"));
        }
        if shift.abs() * BUMP_DERIVATIVE_SUP / radius >= 1.0 {
            return Err(invalid(format!(
                "shift {shift} too large for radius {radius}: need |s| < {:.6}",
                radius / BUMP_DERIVATIVE_SUP
            )));
        }
        Ok(Diffeomorphism::BumpFlow {
            center,
            radius,
            shift,
            direction: direction.iter().map(|u| u / n).collect(),
        })
    }

    pub fn compose(outer: Diffeomorphism, inner: Diffeomorphism) -> Self {
        Diffeomorphism::Composition(Box::new(outer), Box::new(inner))
    }

    /// Whether `x` lies in the support (the closure of `{φ ≠ id}` is inside).
    pub fn in_support(&self, x: &[f64]) -> bool {
        match self {
            Diffeomorphism::Identity => false,
            Diffeomorphism::BumpFlow { center, radius, .. } => {
                let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                d2 < radius * radius
            }
            Diffeomorphism::Composition(a, b) => a.in_support(x) || b.in_support(x),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Diffeomorphism::Identity => x.to_vec(),
            Diffeomorphism::BumpFlow { center, radius, shift, direction } => {
                let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                let b = bump(d2.sqrt() / radius);
                if b == 0.0 {
                    return x.to_vec();
                }
                x.iter().zip(direction).map(|(a, u)| a + shift * b * u).collect()
            }
            Diffeomorphism::Composition(a, b) => a.forward(&b.forward(x)),
        }
    }

    /// Inverse map. For a bump flow, `x = y - τu` where `τ` solves
    /// `τ = s b(|y - τu - c|/r)`; the left side minus the right is strictly
    /// increasing in `τ`, so a bracketed Newton iteration converges.
    pub fn inverse(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Diffeomorphism::Identity => y.to_vec(),
            Diffeomorphism::BumpFlow { center, radius, shift, direction } => {
                let at = |tau: f64| -> Vec<f64> { y.iter().zip(direction).map(|(a, u)| a - tau * u).collect() };
                let d2: f64 = y.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                if bump(d2.sqrt() / radius) == 0.0 {
                    return y.to_vec();
                }
                let g = |tau: f64| -> (f64, f64) {
                    let x = at(tau);
                    let dx: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                    let t = dot(&dx, &dx).sqrt() / radius;
                    let grad_dot_u = bump_slope_over_t(t) / (radius * radius) * dot(&dx, direction);
                    // d/dτ b(|y - τu - c|/r) = -∇b · u
                    (tau - shift * bump(t), 1.0 + shift * grad_dot_u)
                };
                let (mut lo, mut hi) = (shift.min(0.0), shift.max(0.0));
                let mut tau = 0.5 * (lo + hi);
                for _ in 0..200 {
                    let (val, der) = g(tau);
                    if val.abs() <= NEWTON_TOL * (1.0 + shift.abs()) * 1e-3 {
                        break;
                    }
                    if val > 0.0 {
                        hi = tau;
                    } else {
                        lo = tau;
                    }
                    let next = tau - val / der;
                    tau = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
                    if hi - lo < 1e-17 {
                        break;
                    }
                }
                at(tau)
            }
            Diffeomorphism::Composition(a, b) => b.inverse(&a.inverse(y)),
        }
    }

    /// `det Dφ(x)`; for the bump flow the rank-one update `1 + s ∇b · u`.
    pub fn jacobian_det(&self, x: &[f64]) -> f64 {
        match self {
            Diffeomorphism::Identity => 1.0,
            Diffeomorphism::BumpFlow { center, radius, shift, direction } => {
                let dx: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                let t = dot(&dx, &dx).sqrt() / radius;
                1.0 + shift * bump_slope_over_t(t) / (radius * radius) * dot(&dx, direction)
            }
            Diffeomorphism::Composition(a, b) => a.jacobian_det(&b.forward(x)) * b.jacobian_det(x),
        }
    }

    pub fn apply(&self, p: &Point) -> Point {
        Point::euclidean(&self.forward(p.coords()))
    }

    /// The diagonal action on a marked configuration (cluster points only).
    pub fn apply_marked(&self, m: &MarkedConfiguration) -> MarkedConfiguration {
        MarkedConfiguration {
            pairs: m.pairs.iter().map(|(x, y)| (x.clone(), y.iter().map(|p| self.apply(p)).collect())).collect(),
            window: m.window.clone(),
        }
    }

    pub fn inverse_marked(&self, m: &MarkedConfiguration) -> MarkedConfiguration {
        MarkedConfiguration {
            pairs: m
                .pairs
                .iter()
                .map(|(x, y)| (x.clone(), y.iter().map(|p| Point::euclidean(&self.inverse(p.coords()))).collect()))
                .collect(),
            window: m.window.clone(),
        }
    }
}

fn flat_sigma(kernel: &ClusterKernel) -> Result<f64> {
    kernel
        .gaussian_sigma()
        .ok_or_else(|| Error::DensityUnavailable("only the translation-Gaussian kernel has a closed-form density".into()))
}

fn log_rho(kernel: &ClusterKernel, phi: &Diffeomorphism, x: &Point, y: &[Point]) -> Result<f64> {
    let sigma = flat_sigma(kernel)?;
    let s2 = sigma * sigma;
    let xc = x.coords();
    let mut s = 0.0;
    for yi in y {
        let yc = yi.coords();
        if !phi.in_support(yc) {
            continue;
        }
        let pre = phi.inverse(yc);
        let sq = |v: &[f64]| -> f64 { v.iter().zip(xc).map(|(a, b)| (a - b) * (a - b)).sum() };
        s += (sq(yc) - sq(&pre)) / (2.0 * s2) - phi.jacobian_det(&pre).ln();
    }
    Ok(s)
}

/// `ρ(x, ȳ) = d(φ̄_* η_x)/dη_x (ȳ) = h_x(φ̄⁻¹ȳ) / h_x(ȳ) · Π_i J_φ(φ⁻¹ y_i)⁻¹`.
///
/// The Jacobian is evaluated at the preimage: the push-forward density at
/// `y` is `h(φ⁻¹y) |det Dφ⁻¹(y)| = h(φ⁻¹y) / J_φ(φ⁻¹y)`. Components outside
/// the support contribute exactly 1.
pub fn rho_eta(kernel: &ClusterKernel, phi: &Diffeomorphism, x: &Point, y: &[Point]) -> Result<f64> {
    Ok(log_rho(kernel, phi, x, y)?.exp())
}

/// `R(γ̂) = Π_{(x, ȳ) ∈ γ̂} ρ(x, ȳ)`.
pub fn rn_density(kernel: &ClusterKernel, phi: &Diffeomorphism, marked: &MarkedConfiguration) -> Result<f64> {
    let mut s = 0.0;
    for (x, y) in &marked.pairs {
        s += log_rho(kernel, phi, x, y)?;
    }
    Ok(s.exp())
}

fn cropped(points: Vec<Point>, w: &Window) -> Vec<Point> {
    points.into_iter().filter(|p| w.contains(p.chart())).collect()
}

/// `E F(φ γ) = E F(γ) R(γ̂)` on `n` marked samples, with `φ` applied to all
/// cluster points before cropping. The z-score uses paired differences.
pub fn qi_test<R: Rng + ?Sized>(
    model: &ClusterProcessModel,
    phi: &Diffeomorphism,
    f: &CylinderFunction,
    rng: &mut R,
    n: usize,
) -> Result<CheckRecord> {
    flat_sigma(model.kernel())?;
    let key = split_key(rng);
    let w = model.window();
    let pairs: Vec<(f64, f64)> = replicate(key, n, |_, r| -> Result<(f64, f64)> {
        let m = sample_marked(model, r)?;
        let base = project_uncropped(&m);
        let moved: Vec<Point> = base.iter().map(|p| phi.apply(p)).collect();
        let lhs = f.eval(&cropped(moved, w));
        let rhs = f.eval(&cropped(base, w)) * rn_density(model.kernel(), phi, &m)?;
        Ok((lhs, rhs))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok(CheckRecord::paired("quasi-invariance", &pairs))
}

/// `β^v(x, ȳ) = Σ_i β_i · v(y_i) + Σ_i div v(y_i)` with the Gaussian
/// logarithmic derivative `β_i = -(y_i - x)/σ²`.
pub fn beta_eta_v(kernel: &ClusterKernel, x: &Point, y: &[Point], v: &VectorField) -> Result<f64> {
    let grads = kernel.log_density_gradient(x, y)?;
    let supp = v.support();
    let mut s = 0.0;
    for (yi, b) in y.iter().zip(&grads) {
        let yc = yi.coords();
        if !supp.contains(yc) {
            continue;
        }
        s += dot(b, &v.eval(yc)) + v.divergence(yc);
    }
    Ok(s)
}

/// The same quantity through the parent law: `w_i = φ_x⁻¹(y_i)`, the
/// parent score `∇ log q(w_i)` carried forward by the differential of the
/// placement, which is the identity for flat isometric placements.
pub fn beta_eta_v_pushforward(kernel: &ClusterKernel, x: &Point, y: &[Point], v: &VectorField) -> Result<f64> {
    let comp = &kernel.parent().component;
    let supp = v.support();
    let mut s = 0.0;
    for yi in y {
        let yc = yi.coords();
        if !supp.contains(yc) {
            continue;
        }
        let w = kernel.pull_back(x, yi)?;
        let score = comp.log_density_gradient(&w)?;
        s += dot(&score, &v.eval(yc)) + v.divergence(yc);
    }
    Ok(s)
}

/// `B^v(γ̂) = Σ_{(x,ȳ) ∈ γ̂} β^v(x, ȳ)`.
pub fn marked_beta(kernel: &ClusterKernel, m: &MarkedConfiguration, v: &VectorField) -> Result<f64> {
    let mut s = 0.0;
    for (x, y) in &m.pairs {
        s += beta_eta_v(kernel, x, y, v)?;
    }
    Ok(s)
}

/// `E ∇^Γ_v F(γ) = -E F(γ) B^v(γ̂)` on `n` marked samples (`F` read on the
/// cropped projection; `v` should be supported inside the window).
pub fn ibp_test<R: Rng + ?Sized>(
    model: &ClusterProcessModel,
    f: &CylinderFunction,
    v: &VectorField,
    rng: &mut R,
    n: usize,
) -> Result<CheckRecord> {
    flat_sigma(model.kernel())?;
    let key = split_key(rng);
    let w = model.window();
    let pairs: Vec<(f64, f64)> = replicate(key, n, |_, r| -> Result<(f64, f64)> {
        let m = sample_marked(model, r)?;
        let pts = cropped(project_uncropped(&m), w);
        let lhs = gamma_gradient(f, &pts, v)?;
        let rhs = -f.eval(&pts) * marked_beta(model.kernel(), &m, v)?;
        Ok((lhs, rhs))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok(CheckRecord::paired("ibp", &pairs))
}

/// `V(γ, x) = Σ_j G_j(γ) v_j(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderVectorField {
    pub terms: Vec<(CylinderFunction, VectorField)>,
}

/// The product-rule identity
/// `E[F₂ ∇^Γ_V F₁] = -E[F₁ ∇^Γ_V F₂] - E[F₁ F₂ Σ_j (G_j B^{v_j} + ∇^Γ_{v_j} G_j)]`.
pub fn ibp_test_general<R: Rng + ?Sized>(
    model: &ClusterProcessModel,
    f1: &CylinderFunction,
    f2: &CylinderFunction,
    field: &CylinderVectorField,
    rng: &mut R,
    n: usize,
) -> Result<CheckRecord> {
    flat_sigma(model.kernel())?;
    let key = split_key(rng);
    let w = model.window();
    let pairs: Vec<(f64, f64)> = replicate(key, n, |_, r| -> Result<(f64, f64)> {
        let m = sample_marked(model, r)?;
        let pts = cropped(project_uncropped(&m), w);
        let (a, b) = (f1.eval(&pts), f2.eval(&pts));
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for (g, v) in &field.terms {
            let gv = g.eval(&pts);
            lhs += gv * gamma_gradient(f1, &pts, v)? * b;
            rhs -= a * gv * gamma_gradient(f2, &pts, v)?;
            rhs -= a * b * (gv * marked_beta(model.kernel(), &m, v)? + gamma_gradient(g, &pts, v)?);
        }
        Ok((lhs, rhs))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok(CheckRecord::paired("ibp-general", &pairs))
}
