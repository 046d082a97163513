//! Cluster kernels `η_x`: a parent pattern law `Q` on an auxiliary space
//! `W`, pushed to `X` by a placement map `φ_x` applied to each component.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::geometry::random_unit_vector;
use crate::{Geometry, Point, Se2};

/// Law of the number of components.
#[derive(Debug, Clone, PartialEq)]
pub enum SizeLaw {
    Fixed(usize),
    /// Poisson(`mean`) conditioned on `n <= n_max`.
    Poisson { mean: f64, n_max: usize },
    /// `probs[n]` is the probability of `n` components.
    Explicit(Vec<f64>),
}

pub const DEFAULT_N_MAX: usize = 64;

fn poisson_pmf(mean: f64, n_max: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(n_max + 1);
    let mut term = (-mean).exp();
    for n in 0..=n_max {
        p.push(term);
        term *= mean / (n as f64 + 1.0);
    }
    p
}

impl SizeLaw {
    pub fn poisson(mean: f64) -> Self {
        SizeLaw::Poisson { mean, n_max: DEFAULT_N_MAX }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SizeLaw::Fixed(_) => Ok(()),
            SizeLaw::Poisson { mean, .. } => {
                if !(*mean >= 0.0) || !mean.is_finite() {
                    return Err(invalid(format!("poisson size mean must be nonnegative, got {mean}")));
                }
                Ok(())
            }
            SizeLaw::Explicit(p) => {
                if p.is_empty() || p.iter().any(|v| !(*v >= 0.0)) {
                    return Err(invalid("size probabilities must be nonnegative and nonempty"));
                }
                let s: f64 = p.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return Err(invalid(format!("size probabilities sum to {s}, not 1")));
                }
                Ok(())
            }
        }
    }

    /// Normalised probabilities of `0..=n_max`.
    pub fn probabilities(&self) -> Vec<f64> {
        match self {
            SizeLaw::Fixed(n) => {
                let mut p = vec![0.0; n + 1];
                p[*n] = 1.0;
                p
            }
            SizeLaw::Poisson { mean, n_max } => {
                let p = poisson_pmf(*mean, *n_max);
                let s: f64 = p.iter().sum();
                p.into_iter().map(|v| v / s).collect()
            }
            SizeLaw::Explicit(p) => p.clone(),
        }
    }

    pub fn pmf(&self, n: usize) -> f64 {
        match self {
            SizeLaw::Fixed(m) => f64::from(u8::from(n == *m)),
            _ => self.probabilities().get(n).copied().unwrap_or(0.0),
        }
    }

    /// Probability mass removed by the truncation.
    pub fn truncation_mass(&self) -> f64 {
        match self {
            SizeLaw::Poisson { mean, n_max } => (1.0 - poisson_pmf(*mean, *n_max).iter().sum::<f64>()).max(0.0),
            _ => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.probabilities().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if let SizeLaw::Fixed(n) = self {
            return *n;
        }
        let probs = self.probabilities();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (n, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return n;
            }
        }
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AngleLaw {
    Fixed(f64),
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusLaw {
    Fixed(f64),
    Uniform { lo: f64, hi: f64 },
}

/// Law of one parent component `w ∈ W`.
#[derive(Debug, Clone, PartialEq)]
pub enum ComponentLaw {
    /// `N(0, σ² I)` on `ℝ^dim` (or tangent frame coordinates).
    Gaussian { dim: usize, sigma: f64 },
    /// The origin of `ℝ^dim`.
    Dirac { dim: usize },
    UniformBall { dim: usize, radius: f64 },
    /// Rotation of angle `A` about `ξ ~ N(xi_mean, xi_sd² I)`.
    Se2 { angle: AngleLaw, xi_mean: [f64; 2], xi_sd: f64 },
    Radius(RadiusLaw),
}

/// One parent component.
#[derive(Debug, Clone, PartialEq)]
pub enum ParentComponent {
    Offset(Vec<f64>),
    Motion(Se2),
    Radius(f64),
}

impl ComponentLaw {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(invalid(m));
        match *self {
            ComponentLaw::Gaussian { sigma, .. } if !(sigma > 0.0) => bad(format!("gaussian sigma must be positive, got {sigma}")),
            ComponentLaw::UniformBall { radius, .. } if !(radius > 0.0) => bad(format!("ball radius must be positive, got {radius}")),
            ComponentLaw::Se2 { xi_sd, .. } if !(xi_sd >= 0.0) => bad(format!("xi_sd must be nonnegative, got {xi_sd}")),
            ComponentLaw::Radius(RadiusLaw::Fixed(r)) if !(r >= 0.0) => bad(format!("radius must be nonnegative, got {r}")),
            ComponentLaw::Radius(RadiusLaw::Uniform { lo, hi }) if !(lo >= 0.0 && hi > lo) => {
                bad(format!("radius range must satisfy 0 <= lo < hi, got [{lo}, {hi}]"))
            }
            _ => Ok(()),
        }
    }

    /// Largest displacement a component can produce under an isometric
    /// placement, when finite.
    pub fn support_radius(&self) -> f64 {
        match *self {
            ComponentLaw::Gaussian { .. } | ComponentLaw::Se2 { .. } => f64::INFINITY,
            ComponentLaw::Dirac { .. } => 0.0,
            ComponentLaw::UniformBall { radius, .. } => radius,
            ComponentLaw::Radius(RadiusLaw::Fixed(r)) => r,
            ComponentLaw::Radius(RadiusLaw::Uniform { hi, .. }) => hi,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParentComponent {
        match *self {
            ComponentLaw::Gaussian { dim, sigma } => {
                ParentComponent::Offset((0..dim).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect())
            }
            ComponentLaw::Dirac { dim } => ParentComponent::Offset(vec![0.0; dim]),
            ComponentLaw::UniformBall { dim, radius } => {
                let dir: Vec<f64> = random_unit_vector(dim, rng);
                let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
                ParentComponent::Offset(dir.into_iter().map(|u| u * r).collect())
            }
            ComponentLaw::Se2 { angle, xi_mean, xi_sd } => {
                let a = match angle {
                    AngleLaw::Fixed(a) => a,
                    AngleLaw::Uniform => PI * (2.0 * rng.random::<f64>() - 1.0),
                };
                let xi = if xi_sd > 0.0 {
                    let n = Normal::new(0.0, xi_sd).expect("validated sd");
                    [xi_mean[0] + n.sample(rng), xi_mean[1] + n.sample(rng)]
                } else {
                    xi_mean
                };
                ParentComponent::Motion(Se2::rotation_about(a, xi))
            }
            ComponentLaw::Radius(RadiusLaw::Fixed(r)) => ParentComponent::Radius(r),
            ComponentLaw::Radius(RadiusLaw::Uniform { lo, hi }) => ParentComponent::Radius(lo + (hi - lo) * rng.random::<f64>()),
        }
    }

    /// `log q(w)` for the Gaussian law.
    pub fn log_density(&self, w: &[f64]) -> Result<f64> {
        match *self {
            ComponentLaw::Gaussian { sigma, .. } => Ok(gaussian_log_density(w, sigma)),
            _ => Err(Error::DensityUnavailable(format!("{self:?} has no Lebesgue density"))),
        }
    }

    /// `∇ log q(w)` for the Gaussian law.
    pub fn log_density_gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        match *self {
            ComponentLaw::Gaussian { sigma, .. } => Ok(w.iter().map(|v| -v / (sigma * sigma)).collect()),
            _ => Err(Error::DensityUnavailable(format!("{self:?} has no smooth density"))),
        }
    }
}

pub(crate) fn gaussian_log_density(w: &[f64], sigma: f64) -> f64 {
    let d = w.len() as f64;
    let sq: f64 = w.iter().map(|v| v * v).sum();
    -0.5 * sq / (sigma * sigma) - d * (sigma.ln() + 0.5 * (2.0 * PI).ln())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParentClusterLaw {
    pub size: SizeLaw,
    pub component: ComponentLaw,
}

impl ParentClusterLaw {
    pub fn new(size: SizeLaw, component: ComponentLaw) -> Result<Self> {
        size.validate()?;
        component.validate()?;
        Ok(ParentClusterLaw { size, component })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<ParentComponent> {
        let n = self.size.sample(rng);
        (0..n).map(|_| self.component.sample(rng)).collect()
    }
}

/// How a parent component is carried to `X` around the centre `x`.
#[derive(Debug, Clone, PartialEq)]
pub enum PlacementMap {
    /// `y = x + w` on `ℝ^d`.
    Translation,
    /// `y = g·x` for `g ∈ SE(2)`.
    GroupAction,
    /// `y = exp_x(τ_{x₀→x} w)` with `w` in frame coordinates at `base`.
    GeodesicTransport { base: Point },
    /// `y` uniform on the geodesic sphere of radius `w` about `x`.
    RadialAngular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterKernel {
    geometry: Geometry,
    parent: ParentClusterLaw,
    placement: PlacementMap,
}

impl ClusterKernel {
    pub fn new(geometry: Geometry, parent: ParentClusterLaw, placement: PlacementMap) -> Result<Self> {
        let dim = geometry.chart_dim();
        let comp_dim = match parent.component {
            ComponentLaw::Gaussian { dim, .. } | ComponentLaw::Dirac { dim } | ComponentLaw::UniformBall { dim, .. } => Some(dim),
            _ => None,
        };
        let ok = match &placement {
            PlacementMap::Translation => geometry.is_euclidean() && comp_dim == Some(dim),
            PlacementMap::GroupAction => {
                geometry == Geometry::Se2OnR2 && matches!(parent.component, ComponentLaw::Se2 { .. })
            }
            PlacementMap::GeodesicTransport { base } => {
                geometry != Geometry::Se2OnR2 && comp_dim == Some(dim) && geometry.check_point(base).is_ok()
            }
            PlacementMap::RadialAngular => matches!(parent.component, ComponentLaw::Radius(_)),
        };
        if !ok {
            return Err(invalid(format!(
                "placement {placement:?} is incompatible with component law {:?} on {geometry}",
                parent.component
            )));
        }
        Ok(ClusterKernel { geometry, parent, placement })
    }

    /// Translation kernel with i.i.d. `N(0, σ² I)` offsets.
    pub fn gaussian(dim: usize, sigma: f64, size: SizeLaw) -> Result<Self> {
        Self::new(
            Geometry::Euclidean(dim),
            ParentClusterLaw::new(size, ComponentLaw::Gaussian { dim, sigma })?,
            PlacementMap::Translation,
        )
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn parent(&self) -> &ParentClusterLaw {
        &self.parent
    }

    pub fn placement(&self) -> &PlacementMap {
        &self.placement
    }

    /// `σ` when this is the translation-Gaussian family.
    pub fn gaussian_sigma(&self) -> Option<f64> {
        match (&self.placement, &self.parent.component) {
            (PlacementMap::Translation, ComponentLaw::Gaussian { sigma, .. }) => Some(*sigma),
            _ => None,
        }
    }

    /// Finite support radius of `η_x` around `x`, or infinity.
    pub fn support_radius(&self) -> f64 {
        match self.placement {
            PlacementMap::GroupAction => f64::INFINITY,
            _ => self.parent.component.support_radius(),
        }
    }

    /// Default cluster range for plus-sampling: the support radius, or `6σ`
    /// for Gaussian offsets (tail mass beyond it is about `1.5e-8` in 2-d).
    pub fn default_range(&self) -> Option<f64> {
        match (&self.placement, &self.parent.component) {
            (PlacementMap::GroupAction, _) => None,
            (_, ComponentLaw::Gaussian { sigma, .. }) => Some(6.0 * sigma),
            _ => Some(self.support_radius()),
        }
    }

    pub fn sample_parent<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<ParentComponent> {
        self.parent.sample(rng)
    }

    /// Places one component; consumes randomness only for radial placement.
    pub fn place<R: Rng + ?Sized>(&self, x: &Point, w: &ParentComponent, rng: &mut R) -> Result<Point> {
        self.geometry.check_point(x)?;
        match (&self.placement, w) {
            (PlacementMap::Translation, ParentComponent::Offset(v)) => {
                if v.len() != x.coords().len() {
                    return Err(Error::DimensionMismatch { expected: x.coords().len(), got: v.len() });
                }
                let y: Vec<f64> = x.coords().iter().zip(v).map(|(a, b)| a + b).collect();
                Ok(Point::euclidean(&y))
            }
            (PlacementMap::GroupAction, ParentComponent::Motion(g)) => self.geometry.group_act(g, x),
            (PlacementMap::GeodesicTransport { base }, ParentComponent::Offset(v)) => {
                let v0 = self.geometry.tangent_from_frame(base, v)?;
                let vx = self.geometry.parallel_transport(base, x, &v0)?;
                self.geometry.exp_map(x, &vx)
            }
            (PlacementMap::RadialAngular, ParentComponent::Radius(r)) => {
                if *r == 0.0 {
                    Ok(x.clone())
                } else {
                    self.geometry.sample_sphere(x, *r, rng)
                }
            }
            (p, w) => Err(invalid(format!("component {w:?} does not fit placement {p:?}"))),
        }
    }

    /// `φ̄_x(w̄)`, componentwise.
    pub fn place_cluster<R: Rng + ?Sized>(&self, x: &Point, w: &[ParentComponent], rng: &mut R) -> Result<Vec<Point>> {
        w.iter().map(|wi| self.place(x, wi, rng)).collect()
    }

    /// A draw from `η_x`: `sample_parent` followed by `place_cluster`.
    pub fn sample_cluster<R: Rng + ?Sized>(&self, x: &Point, rng: &mut R) -> Result<Vec<Point>> {
        let w = self.sample_parent(rng);
        self.place_cluster(x, &w, rng)
    }

    fn require_sigma(&self) -> Result<f64> {
        self.gaussian_sigma()
            .ok_or_else(|| Error::DensityUnavailable(format!("{:?} placement of {:?}", self.placement, self.parent.component)))
    }

    /// `log h_x(ȳ) = log p_n + Σ log φ_σ(y_i − x)` on the stratum of size `n`.
    pub fn log_density(&self, x: &Point, y: &[Point]) -> Result<f64> {
        let sigma = self.require_sigma()?;
        let pn = self.parent.size.pmf(y.len());
        let mut s = pn.ln();
        for yi in y {
            let w: Vec<f64> = yi.coords().iter().zip(x.coords()).map(|(a, b)| a - b).collect();
            s += gaussian_log_density(&w, sigma);
        }
        Ok(s)
    }

    /// `∇_ȳ log h_x(ȳ)`: component `i` is `−(y_i − x)/σ²`.
    pub fn log_density_gradient(&self, x: &Point, y: &[Point]) -> Result<Vec<Vec<f64>>> {
        let sigma = self.require_sigma()?;
        let s2 = sigma * sigma;
        Ok(y.iter()
            .map(|yi| yi.coords().iter().zip(x.coords()).map(|(a, b)| -(a - b) / s2).collect())
            .collect())
    }

    /// `φ_x^{-1}(y)` for the isometric placements whose differential is
    /// the identity in chart coordinates.
    pub(crate) fn pull_back(&self, x: &Point, y: &Point) -> Result<Vec<f64>> {
        match &self.placement {
            PlacementMap::Translation => Ok(y.coords().iter().zip(x.coords()).map(|(a, b)| a - b).collect()),
            PlacementMap::GeodesicTransport { .. } if self.geometry.is_euclidean() => {
                Ok(y.coords().iter().zip(x.coords()).map(|(a, b)| a - b).collect())
            }
            p => Err(Error::Unsupported(format!("no flat pull-back for placement {p:?} on {}", self.geometry))),
        }
    }
}
