//! The TOML experiment file and its translation into library objects.
//!
//! Every enum is selected by a `kind` key; unknown keys and variants are
//! rejected with the location reported by the TOML parser.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::calculus::{CylinderFunction, CylinderVectorField, Diffeomorphism, Outer, VectorField};
use crate::centres::{CentreProcess, Intensity, PairPotential, ReferenceMeasure, DEFAULT_SWEEPS};
use crate::clusters::{
    AngleLaw, ClusterKernel, ComponentLaw, ParentClusterLaw, PlacementMap, RadiusLaw, SizeLaw, DEFAULT_N_MAX,
};
use crate::error::{Error, Result};
use crate::io::{pattern_points, read_point_pattern};
use crate::process::ClusterProcessModel;
use crate::stats::TestFunction;
use crate::{Geometry, Region, Window};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub replicas: Option<usize>,
    pub output: Option<PathBuf>,
    pub geometry: GeometryConfig,
    pub window: BoxConfig,
    pub reference: Option<ReferenceConfig>,
    pub centres: CentresConfig,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub test: TestConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeometryConfig {
    Euclidean { dim: usize },
    Hyperbolic,
    Se2,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub intensity: IntensityConfig,
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum IntensityConfig {
    Constant { value: f64 },
    Linear { intercept: f64, gradient: Vec<f64> },
    Step { axis: usize, at: f64, below: f64, above: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CentresConfig {
    Poisson,
    Gibbs {
        potential: PotentialConfig,
        #[serde(default = "one")]
        beta: f64,
        #[serde(default = "default_sweeps")]
        sweeps: usize,
    },
    Lattice {
        points: Option<Vec<Vec<f64>>>,
        csv: Option<PathBuf>,
    },
}

fn one() -> f64 {
    1.0
}

fn default_sweeps() -> usize {
    DEFAULT_SWEEPS
}

fn default_n_max() -> usize {
    DEFAULT_N_MAX
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero,
    HardCore { radius: f64 },
    Strauss { radius: f64, strength: f64 },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlacementConfig {
    Translation,
    GroupAction,
    GeodesicTransport,
    RadialAngular,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub placement: PlacementConfig,
    pub size: SizeConfig,
    pub component: ComponentConfig,
    pub cluster_range: Option<f64>,
    /// Base point (chart coordinates) for geodesic transport; the origin by default.
    pub base: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SizeConfig {
    Fixed {
        n: usize,
    },
    Poisson {
        mean: f64,
        #[serde(default = "default_n_max")]
        n_max: usize,
    },
    Explicit {
        probs: Vec<f64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ComponentConfig {
    Gaussian {
        sigma: f64,
    },
    Dirac,
    UniformBall {
        radius: f64,
    },
    /// Rotation about a random centre; a missing angle means uniform.
    Se2 {
        angle: Option<f64>,
        xi_mean: [f64; 2],
        #[serde(default)]
        xi_sd: f64,
    },
    Radius {
        r: Option<f64>,
        lo: Option<f64>,
        hi: Option<f64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegionConfig {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TestFunctionConfig {
    Indicator {
        #[serde(default = "one")]
        scale: f64,
        region: RegionConfig,
    },
    Bump {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "one")]
        height: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OuterConfig {
    Constant { value: f64 },
    Linear { coeffs: Vec<f64> },
    ExpNegSum,
    Trig { coeffs: Vec<f64> },
    Gaussian,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderConfig {
    pub outer: OuterConfig,
    #[serde(default)]
    pub inner: Vec<TestFunctionConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldConfig {
    Bump { center: Vec<f64>, radius: f64, direction: Vec<f64> },
    Radial { center: Vec<f64>, radius: f64, scale: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DiffeoConfig {
    Identity,
    Bump { center: Vec<f64>, radius: f64, shift: f64, direction: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldTermConfig {
    pub coefficient: CylinderConfig,
    pub field: FieldConfig,
}

/// Parameters of the dispatched operation; each subcommand reads the keys
/// it needs and falls back to the defaults listed in the README.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    pub f: Option<TestFunctionConfig>,
    pub g: Option<TestFunctionConfig>,
    pub region: Option<RegionConfig>,
    pub n_inner: Option<usize>,
    pub n_nodes: Option<usize>,
    pub n_outer: Option<usize>,
    pub diffeo: Option<DiffeoConfig>,
    pub field: Option<FieldConfig>,
    pub cylinder: Option<CylinderConfig>,
    pub cylinder2: Option<CylinderConfig>,
    pub field_terms: Option<Vec<FieldTermConfig>>,
    pub dt: Option<f64>,
    pub n_steps: Option<usize>,
    pub stride: Option<usize>,
    pub lag: Option<usize>,
    pub max_z: Option<f64>,
    pub significance: Option<f64>,
}

fn ctx(section: &str, e: Error) -> Error {
    Error::InvalidParameter(format!("[{section}] {e}"))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn geometry(&self) -> Geometry {
        match self.geometry {
            GeometryConfig::Euclidean { dim } => Geometry::Euclidean(dim),
            GeometryConfig::Hyperbolic => Geometry::Hyperbolic2,
            GeometryConfig::Se2 => Geometry::Se2OnR2,
        }
    }

    pub fn window(&self) -> Result<Window> {
        Window::new(self.window.lo.clone(), self.window.hi.clone()).map_err(|e| ctx("window", e))
    }

    /// Builds the model; relative paths in the file resolve against `base_dir`.
    pub fn model(&self, base_dir: &Path) -> Result<ClusterProcessModel> {
        let geometry = self.geometry();
        let window = self.window()?;
        let kernel = self.kernel_for(geometry).map_err(|e| ctx("kernel", e))?;
        let centres = self.centres_for(geometry, &window, base_dir).map_err(|e| ctx("centres", e))?;
        ClusterProcessModel::new(window, centres, kernel, self.kernel.cluster_range).map_err(|e| ctx("kernel", e))
    }

    fn reference_for(&self, geometry: Geometry, window: &Window) -> Result<ReferenceMeasure> {
        let r = self
            .reference
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("[reference] section is required for poisson and gibbs centres".into()))?;
        let intensity = match &r.intensity {
            IntensityConfig::Constant { value } => Intensity::Constant(*value),
            IntensityConfig::Linear { intercept, gradient } => Intensity::Linear { intercept: *intercept, gradient: gradient.clone() },
            IntensityConfig::Step { axis, at, below, above } => Intensity::Step { axis: *axis, at: *at, below: *below, above: *above },
        };
        // Without an explicit bound, use the supremum over the plus-sampling window.
        let dilated = geometry.dilate_window(window, self.kernel.cluster_range.unwrap_or(0.0).max(1.0) * 4.0);
        let bound = r.bound.unwrap_or_else(|| intensity.sup_over(&dilated).max(f64::MIN_POSITIVE));
        ReferenceMeasure::new(geometry, window.clone(), intensity, bound).map_err(|e| ctx("reference", e))
    }

    fn centres_for(&self, geometry: Geometry, window: &Window, base_dir: &Path) -> Result<CentreProcess> {
        Ok(match &self.centres {
            CentresConfig::Poisson => CentreProcess::Poisson(self.reference_for(geometry, window)?),
            CentresConfig::Gibbs { potential, beta, sweeps } => {
                let potential = match *potential {
                    PotentialConfig::Zero => PairPotential::Zero,
                    PotentialConfig::HardCore { radius } => PairPotential::HardCore { radius },
                    PotentialConfig::Strauss { radius, strength } => PairPotential::Strauss { radius, strength },
                };
                CentreProcess::gibbs(self.reference_for(geometry, window)?, potential, *beta, *sweeps)?
            }
            CentresConfig::Lattice { points, csv } => {
                let mut out = Vec::new();
                for c in points.iter().flatten() {
                    out.push(geometry.point_from_chart(c)?);
                }
                if let Some(path) = csv {
                    let path = base_dir.join(path);
                    let text = std::fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                    out.extend(pattern_points(&read_point_pattern(&text)?, geometry)?);
                }
                CentreProcess::Lattice(out)
            }
        })
    }

    fn kernel_for(&self, geometry: Geometry) -> Result<ClusterKernel> {
        let k = &self.kernel;
        let dim = geometry.chart_dim();
        let size = match &k.size {
            SizeConfig::Fixed { n } => SizeLaw::Fixed(*n),
            SizeConfig::Poisson { mean, n_max } => SizeLaw::Poisson { mean: *mean, n_max: *n_max },
            SizeConfig::Explicit { probs } => SizeLaw::Explicit(probs.clone()),
        };
        let component = match &k.component {
            ComponentConfig::Gaussian { sigma } => ComponentLaw::Gaussian { dim, sigma: *sigma },
            ComponentConfig::Dirac => ComponentLaw::Dirac { dim },
            ComponentConfig::UniformBall { radius } => ComponentLaw::UniformBall { dim, radius: *radius },
            ComponentConfig::Se2 { angle, xi_mean, xi_sd } => ComponentLaw::Se2 {
                angle: angle.map_or(AngleLaw::Uniform, AngleLaw::Fixed),
                xi_mean: *xi_mean,
                xi_sd: *xi_sd,
            },
            ComponentConfig::Radius { r, lo, hi } => match (r, lo, hi) {
                (Some(r), None, None) => ComponentLaw::Radius(RadiusLaw::Fixed(*r)),
                (None, Some(lo), Some(hi)) => ComponentLaw::Radius(RadiusLaw::Uniform { lo: *lo, hi: *hi }),
                _ => return Err(Error::InvalidParameter("component.radius needs either `r` or both `lo` and `hi`".into())),
            },
        };
        let placement = match k.placement {
            PlacementConfig::Translation => PlacementMap::Translation,
            PlacementConfig::GroupAction => PlacementMap::GroupAction,
            PlacementConfig::RadialAngular => PlacementMap::RadialAngular,
            PlacementConfig::GeodesicTransport => {
                let base = k.base.clone().unwrap_or_else(|| vec![0.0; dim]);
                PlacementMap::GeodesicTransport { base: geometry.point_from_chart(&base)? }
            }
        };
        ClusterKernel::new(geometry, ParentClusterLaw::new(size, component)?, placement)
    }
}

pub fn region(c: &RegionConfig) -> Result<Region> {
    match c {
        RegionConfig::Box { lo, hi } => Ok(Region::Box(Window::new(lo.clone(), hi.clone())?)),
        RegionConfig::Ball { center, radius } => Region::ball(center.clone(), *radius),
    }
}

pub fn test_function(c: &TestFunctionConfig) -> Result<TestFunction> {
    let f = match c {
        TestFunctionConfig::Indicator { scale, region: r } => TestFunction::IndicatorScaled { scale: *scale, region: region(r)? },
        TestFunctionConfig::Bump { center, radius, height } => {
            TestFunction::SmoothBump { center: center.clone(), radius: *radius, height: *height }
        }
    };
    f.validate()?;
    Ok(f)
}

pub fn cylinder(c: &CylinderConfig) -> Result<CylinderFunction> {
    let outer = match &c.outer {
        OuterConfig::Constant { value } => Outer::Constant(*value),
        OuterConfig::Linear { coeffs } => Outer::Linear(coeffs.clone()),
        OuterConfig::ExpNegSum => Outer::ExpNegSum,
        OuterConfig::Trig { coeffs } => Outer::Trig(coeffs.clone()),
        OuterConfig::Gaussian => Outer::Gaussian,
    };
    CylinderFunction::new(outer, c.inner.iter().map(test_function).collect::<Result<_>>()?)
}

pub fn field(c: &FieldConfig) -> Result<VectorField> {
    let check = |center: &Vec<f64>, radius: f64| {
        if radius > 0.0 && !center.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter("vector field needs a center and radius > 0".into()))
        }
    };
    Ok(match c {
        FieldConfig::Bump { center, radius, direction } => {
            check(center, *radius)?;
            if direction.len() != center.len() {
                return Err(Error::DimensionMismatch { expected: center.len(), got: direction.len() });
            }
            VectorField::Bump { center: center.clone(), radius: *radius, direction: direction.clone() }
        }
        FieldConfig::Radial { center, radius, scale } => {
            check(center, *radius)?;
            VectorField::Radial { center: center.clone(), radius: *radius, scale: *scale }
        }
    })
}

pub fn diffeo(c: &DiffeoConfig) -> Result<Diffeomorphism> {
    match c {
        DiffeoConfig::Identity => Ok(Diffeomorphism::Identity),
        DiffeoConfig::Bump { center, radius, shift, direction } => {
            Diffeomorphism::bump_flow(center.clone(), *radius, *shift, direction.clone())
        }
    }
}

pub fn field_terms(terms: &[FieldTermConfig]) -> Result<CylinderVectorField> {
    Ok(CylinderVectorField {
        terms: terms.iter().map(|t| Ok((cylinder(&t.coefficient)?, field(&t.field)?))).collect::<Result<_>>()?,
    })
}
