//! Centre processes: Poisson by thinning, pairwise-interaction Gibbs by
//! birth–death–move Metropolis–Hastings, and fixed (lattice) configurations.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{invalid, Error, Result};
use crate::{Geometry, Point, Window};

/// Intensity families, evaluated on chart coordinates. The intensity is a
/// density with respect to the Riemannian volume.
#[derive(Debug, Clone, PartialEq)]
pub enum Intensity {
    Constant(f64),
    /// `intercept + gradient · x`.
    Linear { intercept: f64, gradient: Vec<f64> },
    /// `below` where `x[axis] < at`, `above` elsewhere.
    Step { axis: usize, at: f64, below: f64, above: f64 },
}

impl Intensity {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Intensity::Constant(v) => *v,
            Intensity::Linear { intercept, gradient } => {
                intercept + gradient.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            }
            Intensity::Step { axis, at, below, above } => {
                if x[*axis] < *at {
                    *below
                } else {
                    *above
                }
            }
        }
    }

    /// Supremum over a box (all families attain it at a vertex or are flat).
    pub fn sup_over(&self, w: &Window) -> f64 {
        match self {
            Intensity::Constant(v) => *v,
            Intensity::Linear { intercept, gradient } => {
                intercept
                    + gradient
                        .iter()
                        .enumerate()
                        .map(|(i, g)| (g * w.lo()[i]).max(g * w.hi()[i]))
                        .sum::<f64>()
            }
            Intensity::Step { axis, at, below, above } => {
                let mut s = f64::NEG_INFINITY;
                if w.lo()[*axis] < *at {
                    s = s.max(*below);
                }
                if w.hi()[*axis] >= *at {
                    s = s.max(*above);
                }
                s
            }
        }
    }
}

/// The reference measure `θ(dx) = λ(x) vol(dx)` on a chart window.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceMeasure {
    geometry: Geometry,
    window: Window,
    intensity: Intensity,
    bound: f64,
    mass: f64,
}

const GRID_PER_AXIS_2D: usize = 512;

impl ReferenceMeasure {
    pub fn new(geometry: Geometry, window: Window, intensity: Intensity, bound: f64) -> Result<Self> {
        if window.dim() != geometry.chart_dim() {
            return Err(Error::DimensionMismatch {
                expected: geometry.chart_dim(),
                got: window.dim(),
            });
        }
        if window.is_empty() {
            return Err(invalid("reference window is empty"));
        }
        if !(bound > 0.0) || !bound.is_finite() {
            return Err(invalid(format!("intensity bound must be positive, got {bound}")));
        }
        if let Intensity::Linear { gradient, .. } = &intensity {
            if gradient.len() != window.dim() {
                return Err(Error::DimensionMismatch {
                    expected: window.dim(),
                    got: gradient.len(),
                });
            }
        }
        if let Intensity::Step { axis, .. } = &intensity {
            if *axis >= window.dim() {
                return Err(invalid(format!("step axis {axis} out of range")));
            }
        }
        let mut r = ReferenceMeasure {
            geometry,
            window,
            intensity,
            bound,
            mass: 0.0,
        };
        r.mass = r.mass_of(&r.window);
        Ok(r)
    }

    /// Homogeneous measure with the bound set to the intensity itself.
    pub fn constant(geometry: Geometry, window: Window, lambda: f64) -> Result<Self> {
        Self::new(geometry, window, Intensity::Constant(lambda), lambda.max(f64::MIN_POSITIVE))
    }

    /// Lebesgue (or Riemannian volume) measure.
    pub fn lebesgue(geometry: Geometry, window: Window) -> Result<Self> {
        Self::constant(geometry, window, 1.0)
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn intensity(&self) -> &Intensity {
        &self.intensity
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// The same intensity on another window.
    pub fn with_window(&self, window: Window) -> Result<Self> {
        Self::new(self.geometry, window, self.intensity.clone(), self.bound)
    }

    pub fn intensity_at(&self, chart: &[f64]) -> f64 {
        self.intensity.eval(chart)
    }

    /// Density of `θ` with respect to Lebesgue measure on the chart.
    pub fn chart_density(&self, chart: &[f64]) -> f64 {
        self.intensity.eval(chart) * self.geometry.volume_density(chart)
    }

    /// `θ(window)`.
    pub fn total_mass(&self) -> f64 {
        self.mass
    }

    /// `θ(b)` for a chart box: closed form on flat space, midpoint rule on
    /// the hyperboloid chart.
    pub fn mass_of(&self, b: &Window) -> f64 {
        if self.geometry.is_euclidean() {
            let vol = b.volume();
            match &self.intensity {
                Intensity::Constant(v) => v * vol,
                Intensity::Linear { .. } => {
                    let mid: Vec<f64> = b.lo().iter().zip(b.hi()).map(|(a, c)| 0.5 * (a + c)).collect();
                    self.intensity.eval(&mid) * vol
                }
                Intensity::Step { axis, at, below, above } => {
                    let (a, c) = (b.lo()[*axis], b.hi()[*axis]);
                    let side = c - a;
                    if side <= 0.0 {
                        return 0.0;
                    }
                    let frac_below = ((at.min(c) - a) / side).clamp(0.0, 1.0);
                    vol * (below * frac_below + above * (1.0 - frac_below))
                }
            }
        } else {
            self.grid_integral(b, |x| self.chart_density(x))
        }
    }

    /// `∫ g dθ` over the reference window by a midpoint grid.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, g: F) -> f64 {
        self.grid_integral(&self.window, |x| g(x) * self.chart_density(x))
    }

    fn grid_integral<F: Fn(&[f64]) -> f64>(&self, b: &Window, h: F) -> f64 {
        let d = b.dim();
        let per_axis = match d {
            1 => 1 << 16,
            2 => GRID_PER_AXIS_2D,
            _ => 64,
        };
        let steps: Vec<f64> = b.lo().iter().zip(b.hi()).map(|(a, c)| (c - a) / per_axis as f64).collect();
        let cell: f64 = steps.iter().product();
        let total = per_axis.pow(d as u32);
        let mut x = vec![0.0; d];
        let mut sum = 0.0;
        for k in 0..total {
            let mut r = k;
            for i in 0..d {
                x[i] = b.lo()[i] + (r % per_axis) as f64 * steps[i] + 0.5 * steps[i];
                r /= per_axis;
            }
            sum += h(&x);
        }
        sum * cell
    }

    fn checked_chart_density(&self, x: &[f64]) -> Result<f64> {
        let lambda = self.intensity.eval(x);
        if lambda > self.bound * (1.0 + 1e-12) {
            return Err(Error::IntensityBoundExceeded {
                value: lambda,
                bound: self.bound,
                location: x.to_vec(),
            });
        }
        if lambda < 0.0 {
            return Err(invalid(format!("negative intensity {lambda} at {x:?}")));
        }
        Ok(lambda * self.geometry.volume_density(x))
    }

    /// Poisson process with intensity `θ` on `window` by thinning a
    /// homogeneous chart process of rate `bound`.
    pub fn sample_poisson_on<R: Rng + ?Sized>(&self, window: &Window, rng: &mut R) -> Result<Vec<Point>> {
        let mean = self.bound * window.volume();
        let n = if mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| invalid(e.to_string()))?
                .sample(rng) as usize
        } else {
            0
        };
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let x = window.sample_uniform(rng);
            let dens = self.checked_chart_density(&x)?;
            let u: f64 = rng.random();
            if u * self.bound < dens {
                out.push(self.geometry.point_from_chart(&x)?);
            }
        }
        Ok(out)
    }

    /// One draw from `θ / θ(window)` by rejection.
    pub fn sample_normalised<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Point> {
        for _ in 0..1_000_000 {
            let x = self.window.sample_uniform(rng);
            let dens = self.checked_chart_density(&x)?;
            if rng.random::<f64>() * self.bound < dens {
                return self.geometry.point_from_chart(&x);
            }
        }
        Err(invalid("reference measure has (numerically) zero mass"))
    }
}

/// Symmetric pair potentials for the Gibbs variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairPotential {
    Zero,
    /// `+∞` below `radius`.
    HardCore { radius: f64 },
    /// `strength` below `radius`.
    Strauss { radius: f64, strength: f64 },
}

impl PairPotential {
    pub fn eval(&self, d: f64) -> f64 {
        match *self {
            PairPotential::Zero => 0.0,
            PairPotential::HardCore { radius } => {
                if d < radius {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            PairPotential::Strauss { radius, strength } => {
                if d < radius {
                    strength
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsSpec {
    pub reference: ReferenceMeasure,
    pub potential: PairPotential,
    pub beta: f64,
    pub sweeps: usize,
}

pub const DEFAULT_SWEEPS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub enum CentreProcess {
    Poisson(ReferenceMeasure),
    Gibbs(GibbsSpec),
    /// A fixed configuration; duplicates are kept.
    Lattice(Vec<Point>),
}

impl CentreProcess {
    pub fn gibbs(reference: ReferenceMeasure, potential: PairPotential, beta: f64, sweeps: usize) -> Result<Self> {
        if sweeps == 0 {
            return Err(invalid("gibbs sweeps must be at least 1"));
        }
        if !(beta >= 0.0) {
            return Err(invalid(format!("inverse temperature must be nonnegative, got {beta}")));
        }
        Ok(CentreProcess::Gibbs(GibbsSpec {
            reference,
            potential,
            beta,
            sweeps,
        }))
    }

    pub fn reference(&self) -> Option<&ReferenceMeasure> {
        match self {
            CentreProcess::Poisson(r) => Some(r),
            CentreProcess::Gibbs(g) => Some(&g.reference),
            CentreProcess::Lattice(_) => None,
        }
    }

    /// The same process with its reference measure moved to `window`.
    pub fn on_window(&self, window: &Window) -> Result<Self> {
        Ok(match self {
            CentreProcess::Poisson(r) => CentreProcess::Poisson(r.with_window(window.clone())?),
            CentreProcess::Gibbs(g) => CentreProcess::Gibbs(GibbsSpec {
                reference: g.reference.with_window(window.clone())?,
                ..g.clone()
            }),
            CentreProcess::Lattice(p) => CentreProcess::Lattice(p.clone()),
        })
    }
}

/// A draw of the centre configuration on the reference window.
pub fn sample_centres<R: Rng + ?Sized>(process: &CentreProcess, rng: &mut R) -> Result<Vec<Point>> {
    match process {
        CentreProcess::Poisson(r) => r.sample_poisson_on(r.window(), rng),
        CentreProcess::Gibbs(g) => {
            let mut state = Vec::new();
            for _ in 0..g.sweeps {
                state = gibbs_step(state, g, rng)?;
            }
            Ok(state)
        }
        CentreProcess::Lattice(points) => Ok(points.clone()),
    }
}

fn interaction(g: &GibbsSpec, p: &Point, others: &[Point], skip: Option<usize>) -> Result<f64> {
    if g.potential == PairPotential::Zero {
        return Ok(0.0);
    }
    let geom = g.reference.geometry();
    let mut e = 0.0;
    for (j, q) in others.iter().enumerate() {
        if Some(j) == skip {
            continue;
        }
        e += g.potential.eval(geom.distance(p, q)?);
    }
    Ok(e)
}

/// One Metropolis–Hastings sweep of `max(1, round θ(W))` birth, death or move
/// proposals, each chosen with probability 1/3. The target is the density
/// `exp(-β Σ_{i<j} V(x_i, x_j))` relative to Poisson(θ).
pub fn gibbs_step<R: Rng + ?Sized>(mut state: Vec<Point>, g: &GibbsSpec, rng: &mut R) -> Result<Vec<Point>> {
    let mass = g.reference.total_mass();
    let proposals = (mass.round() as usize).max(1);
    for _ in 0..proposals {
        let n = state.len();
        match rng.random_range(0..3u8) {
            0 => {
                let x = g.reference.sample_normalised(rng)?;
                let de = interaction(g, &x, &state, None)?;
                let ratio = mass / (n as f64 + 1.0) * (-g.beta * de).exp();
                if rng.random::<f64>() < ratio {
                    state.push(x);
                }
            }
            1 => {
                if n == 0 {
                    continue;
                }
                let i = rng.random_range(0..n);
                let de = interaction(g, &state[i], &state, Some(i))?;
                let ratio = n as f64 / mass * (g.beta * de).exp();
                if rng.random::<f64>() < ratio {
                    state.swap_remove(i);
                }
            }
            _ => {
                if n == 0 {
                    continue;
                }
                let i = rng.random_range(0..n);
                let y = g.reference.sample_normalised(rng)?;
                let new_e = interaction(g, &y, &state, Some(i))?;
                let old_e = interaction(g, &state[i], &state, Some(i))?;
                let u: f64 = rng.random();
                let accept = if new_e.is_infinite() {
                    false
                } else if old_e.is_infinite() {
                    true
                } else {
                    u < (-g.beta * (new_e - old_e)).exp()
                };
                if accept {
                    state[i] = y;
                }
            }
        }
    }
    Ok(state)
}
