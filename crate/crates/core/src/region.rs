//! Boxes and balls in chart coordinates.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::{Geometry, GeometryId, Point};

/// An axis-aligned box `[lo, hi]` in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Window {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(invalid("window bounds must be nonempty and of equal length"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
            return Err(invalid(format!("window bounds out of order: {lo:?} / {hi:?}")));
        }
        Ok(Window { lo, hi })
    }

    pub fn unit(dim: usize) -> Self {
        Window {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    pub fn cube(lo: f64, hi: f64, dim: usize) -> Self {
        Window {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn is_empty(&self) -> bool {
        self.volume() <= 0.0
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.lo.len()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| a <= v && v <= b)
    }

    /// Whether `other` lies inside `self`.
    pub fn covers(&self, other: &Window) -> bool {
        self.contains(&other.lo) && self.contains(&other.hi)
    }

    pub fn dilated(&self, margin: f64) -> Window {
        Window {
            lo: self.lo.iter().map(|a| a - margin).collect(),
            hi: self.hi.iter().map(|b| b + margin).collect(),
        }
    }

    pub fn intersection_volume(&self, other: &Window) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(other.lo.iter().zip(&other.hi))
            .map(|((a0, a1), (b0, b1))| (a1.min(*b1) - a0.max(*b0)).max(0.0))
            .product()
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| a + (b - a) * rng.random::<f64>())
            .collect()
    }

    /// Distance of `x` to the complement of the box, relative to the
    /// smallest side; negative outside.
    pub(crate) fn relative_depth(&self, x: &[f64]) -> f64 {
        let side = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| b - a)
            .fold(f64::INFINITY, f64::min);
        let depth = x
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (a, b))| (v - a).min(b - v))
            .fold(f64::INFINITY, f64::min);
        depth / side
    }
}

/// A bounded shape: a chart box, or a geodesic ball about a chart point.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Box(Window),
    Ball { center: Vec<f64>, radius: f64 },
}

impl Region {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Region::Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Box(w) => w.dim(),
            Region::Ball { center, .. } => center.len(),
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match self {
            Region::Box(w) => w.contains(p.chart()),
            Region::Ball { center, radius } => {
                let g = match p.geometry() {
                    GeometryId::Euclidean(d) => Geometry::Euclidean(d),
                    GeometryId::Hyperbolic2 => Geometry::Hyperbolic2,
                };
                match g.point_from_chart(center) {
                    Ok(c) => g.distance(&c, p).is_ok_and(|d| d <= *radius),
                    Err(_) => false,
                }
            }
        }
    }

    /// A chart box containing the region.
    pub fn bounding_box(&self, geometry: Geometry) -> Window {
        match self {
            Region::Box(w) => w.clone(),
            Region::Ball { center, radius } => {
                let corner = Window {
                    lo: center.clone(),
                    hi: center.clone(),
                };
                geometry.dilate_window(&corner, *radius)
            }
        }
    }
}
