//! Cluster processes on a window: marked samples, the projection forgetting
//! centres, the alternative cluster-vector pipeline, and properness checks.

use rand::Rng;
use serde::Serialize;

use crate::centres::{sample_centres, CentreProcess};
use crate::clusters::ClusterKernel;
use crate::error::{invalid, Result};
use crate::rng::{replicate, split_key};
use crate::stats::{EstimateWithError, Summary};
use crate::{Geometry, Point, Region, Window};

/// Centres with their clusters: `γ̂ = {(x, ȳ_x)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedConfiguration {
    pub pairs: Vec<(Point, Vec<Point>)>,
    pub window: Window,
}

/// A finite configuration on a window; duplicates are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub points: Vec<Point>,
    pub window: Window,
}

impl Configuration {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl MarkedConfiguration {
    /// Total number of cluster points before cropping.
    pub fn total_points(&self) -> usize {
        self.pairs.iter().map(|(_, y)| y.len()).sum()
    }
}

#[derive(Debug, Clone)]
pub struct ClusterProcessModel {
    window: Window,
    centres: CentreProcess,
    kernel: ClusterKernel,
    cluster_range: f64,
    centre_window: Window,
}

impl ClusterProcessModel {
    /// `window` is the observation window; Poisson and Gibbs centres are
    /// simulated on its dilation by the cluster range (plus-sampling).
    /// `cluster_range` defaults to the kernel's own range hint.
    pub fn new(window: Window, centres: CentreProcess, kernel: ClusterKernel, cluster_range: Option<f64>) -> Result<Self> {
        let geometry = kernel.geometry();
        if window.dim() != geometry.chart_dim() {
            return Err(invalid(format!("window dimension {} does not match {geometry}", window.dim())));
        }
        if window.is_empty() {
            return Err(invalid("observation window is empty"));
        }
        let range = match (cluster_range, kernel.default_range()) {
            (Some(r), _) => r,
            (None, Some(r)) => r,
            (None, None) => return Err(invalid("this kernel has no natural range; set cluster_range explicitly")),
        };
        if !(range >= 0.0) || !range.is_finite() {
            return Err(invalid(format!("cluster range must be finite and nonnegative, got {range}")));
        }
        let support = kernel.support_radius();
        if support.is_finite() && range < support {
            return Err(invalid(format!("cluster range {range} is below the kernel support radius {support}")));
        }
        if let Some(r) = centres.reference() {
            if r.geometry().id() != geometry.id() {
                return Err(invalid("centre and kernel geometries differ"));
            }
        }
        if let CentreProcess::Lattice(points) = &centres {
            for p in points {
                geometry.check_point(p)?;
            }
        }
        let centre_window = geometry.dilate_window(&window, range);
        let centres = centres.on_window(&centre_window)?;
        Ok(ClusterProcessModel {
            window,
            centres,
            kernel,
            cluster_range: range,
            centre_window,
        })
    }

    pub fn geometry(&self) -> Geometry {
        self.kernel.geometry()
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    /// The dilated window on which centres live.
    pub fn centre_window(&self) -> &Window {
        &self.centre_window
    }

    pub fn centres(&self) -> &CentreProcess {
        &self.centres
    }

    pub fn kernel(&self) -> &ClusterKernel {
        &self.kernel
    }

    pub fn cluster_range(&self) -> f64 {
        self.cluster_range
    }

    pub fn with_kernel(&self, kernel: ClusterKernel) -> Result<Self> {
        Self::new(self.window.clone(), self.centres.clone(), kernel, Some(self.cluster_range))
    }
}

/// Centres from `μ`, then one independent cluster per centre.
pub fn sample_marked<R: Rng + ?Sized>(model: &ClusterProcessModel, rng: &mut R) -> Result<MarkedConfiguration> {
    let centres = sample_centres(model.centres(), rng)?;
    let mut pairs = Vec::with_capacity(centres.len());
    for x in centres {
        let y = model.kernel().sample_cluster(&x, rng)?;
        pairs.push((x, y));
    }
    Ok(MarkedConfiguration {
        pairs,
        window: model.window().clone(),
    })
}

fn crop(points: impl IntoIterator<Item = Point>, window: &Window) -> Configuration {
    Configuration {
        points: points.into_iter().filter(|p| window.contains(p.chart())).collect(),
        window: window.clone(),
    }
}

/// All cluster points, centres forgotten, in pair order (no cropping).
pub fn project_uncropped(marked: &MarkedConfiguration) -> Vec<Point> {
    marked.pairs.iter().flat_map(|(_, y)| y.iter().cloned()).collect()
}

/// The projection onto the window: concatenation then cropping.
pub fn project(marked: &MarkedConfiguration) -> Configuration {
    crop(project_uncropped(marked), &marked.window)
}

pub fn sample_cluster_process<R: Rng + ?Sized>(model: &ClusterProcessModel, rng: &mut R) -> Result<Configuration> {
    Ok(project(&sample_marked(model, rng)?))
}

/// The same law through the configuration of cluster vectors: centres are
/// drawn, each is replaced by its cluster vector (the centre itself is
/// never stored), and the vectors are unpacked.
pub fn sample_via_varpi<R: Rng + ?Sized>(model: &ClusterProcessModel, rng: &mut R) -> Result<Configuration> {
    let centres = sample_centres(model.centres(), rng)?;
    let vectors: Vec<Vec<Point>> = centres
        .iter()
        .map(|x| model.kernel().sample_cluster(x, rng))
        .collect::<Result<_>>()?;
    Ok(crop(vectors.into_iter().flatten(), model.window()))
}

/// Number of points that equal an earlier point exactly.
pub fn duplicate_count(points: &[Point]) -> usize {
    let mut keys: Vec<&[f64]> = points.iter().map(|p| p.coords()).collect();
    keys.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    keys.windows(2).filter(|w| w[0] == w[1]).count()
}

fn min_pairwise_distance(geometry: Geometry, points: &[Point]) -> Option<f64> {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in 0..i {
            let d = geometry.distance(&points[i], &points[j]).ok()?;
            best = best.min(d);
        }
    }
    (points.len() >= 2).then_some(best)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProperReport {
    /// Clusters with at least one point in `B`, per replica.
    pub clusters_hitting: EstimateWithError,
    /// Exact duplicates in the projected configurations, over all replicas.
    pub multiplicity_count: usize,
    /// Minimum inter-point distance in the window, over replicas with ≥ 2 points.
    pub min_distance: Summary,
    /// Counts of the per-replica minimum distance in decades `[10^k, 10^{k+1})`,
    /// from `k = -12` up; zero distances go to the first bin.
    pub min_distance_histogram: Vec<(f64, usize)>,
}

pub fn properness_report<R: Rng + ?Sized>(
    model: &ClusterProcessModel,
    rng: &mut R,
    n_replicas: usize,
    b: &Region,
) -> Result<ProperReport> {
    if n_replicas == 0 {
        return Err(invalid("properness report needs at least one replica"));
    }
    let key = split_key(rng);
    let geometry = model.geometry();
    let results = replicate(key, n_replicas, |_, r| -> Result<(f64, usize, Option<f64>)> {
        let marked = sample_marked(model, r)?;
        let hits = marked.pairs.iter().filter(|(_, y)| y.iter().any(|p| b.contains(p))).count();
        let dups = duplicate_count(&project_uncropped(&marked));
        let md = min_pairwise_distance(geometry, &project(&marked).points);
        Ok((hits as f64, dups, md))
    });
    let mut hits = Vec::with_capacity(n_replicas);
    let mut dups = 0;
    let mut mins = Vec::new();
    for r in results {
        let (h, d, m) = r?;
        hits.push(h);
        dups += d;
        mins.extend(m);
    }
    let mut hist: Vec<(f64, usize)> = (-12..=2).map(|k| (10f64.powi(k), 0)).collect();
    for &m in &mins {
        let k = if m > 0.0 { m.log10().floor() as i32 } else { -12 };
        let idx = (k.clamp(-12, 2) + 12) as usize;
        hist[idx].1 += 1;
    }
    Ok(ProperReport {
        clusters_hitting: EstimateWithError::from_samples(&hits),
        multiplicity_count: dups,
        min_distance: Summary::of(&mins),
        min_distance_histogram: hist,
    })
}
