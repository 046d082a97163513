//! Manifold backends: Euclidean space, the hyperbolic plane in the
//! hyperboloid model, and SE(2) acting on the plane.
//!
//! All routines are generic over the scalar type. Points carry the identity
//! of the geometry they live on and every binary operation rejects mixed
//! inputs instead of reinterpreting coordinates.

mod hyperbolic;
mod se2;

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::region::Window;
use crate::Real;

pub use hyperbolic::{minkowski_inner, to_poincare_disk};
pub use se2::Se2;

/// Tolerance for geometric identities (distances, constraint surfaces).
pub const GEOMETRIC_TOL: f64 = 1e-9;
/// Tolerance for algebraic identities (group axioms, exact isometries).
pub const ALGEBRAIC_TOL: f64 = 1e-12;

pub type Coords<T> = SmallVec<[T; 3]>;

/// Tolerance used for constraint checks at precision `T`.
pub fn geometric_tol<T: Real>() -> T {
    let tol = T::from_f64(GEOMETRIC_TOL).unwrap();
    tol.max(T::epsilon() * T::from_f64(1e3).unwrap())
}

pub(crate) fn c<T: Real>(x: f64) -> T {
    T::from_f64(x).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeometryId {
    Euclidean(usize),
    Hyperbolic2,
}

impl fmt::Display for GeometryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryId::Euclidean(d) => write!(f, "euclidean({d})"),
            GeometryId::Hyperbolic2 => write!(f, "hyperbolic2"),
        }
    }
}

impl GeometryId {
    /// Number of stored coordinates.
    pub fn ambient_dim(self) -> usize {
        match self {
            GeometryId::Euclidean(d) => d,
            GeometryId::Hyperbolic2 => 3,
        }
    }

    pub fn chart_dim(self) -> usize {
        match self {
            GeometryId::Euclidean(d) => d,
            GeometryId::Hyperbolic2 => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point<T> {
    coords: Coords<T>,
    geometry: GeometryId,
}

impl<T: Real> Point<T> {
    pub fn euclidean(coords: &[T]) -> Self {
        Point {
            coords: coords.iter().copied().collect(),
            geometry: GeometryId::Euclidean(coords.len()),
        }
    }

    /// A hyperboloid point from ambient coordinates `(p0, p1, p2)`.
    pub fn hyperboloid(coords: [T; 3]) -> Result<Self> {
        let p = Point {
            coords: coords.iter().copied().collect(),
            geometry: GeometryId::Hyperbolic2,
        };
        let q = minkowski_inner(&p.coords, &p.coords);
        let scale = T::one().max(coords[0] * coords[0]);
        if coords[0] <= T::zero() || (q + T::one()).abs() > geometric_tol::<T>() * scale {
            return Err(Error::InvalidPoint(format!(
                "not on the upper hyperboloid sheet: <p,p> = {:?}",
                q.to_f64()
            )));
        }
        Ok(p)
    }

    /// Hyperboloid point over the chart coordinates `(p1, p2)`.
    pub fn hyperboloid_from_chart(x: T, y: T) -> Self {
        let p0 = (T::one() + x * x + y * y).sqrt();
        Point {
            coords: [p0, x, y].into_iter().collect(),
            geometry: GeometryId::Hyperbolic2,
        }
    }

    pub fn hyperbolic_origin() -> Self {
        Self::hyperboloid_from_chart(T::zero(), T::zero())
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn geometry(&self) -> GeometryId {
        self.geometry
    }

    /// Global chart coordinates: the point itself on Euclidean space and the
    /// spatial part `(p1, p2)` on the hyperboloid.
    pub fn chart(&self) -> &[T] {
        match self.geometry {
            GeometryId::Euclidean(_) => &self.coords,
            GeometryId::Hyperbolic2 => &self.coords[1..],
        }
    }

    pub fn to_f64(&self) -> Point<f64> {
        Point {
            coords: self.coords.iter().map(|v| v.to_f64().unwrap()).collect(),
            geometry: self.geometry,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector<T> {
    base: Point<T>,
    components: Coords<T>,
}

impl<T: Real> TangentVector<T> {
    /// Builds a tangent vector, validating `<p, v> = 0` on the hyperboloid.
    pub fn new(base: Point<T>, components: &[T]) -> Result<Self> {
        let dim = base.geometry.ambient_dim();
        if components.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: components.len(),
            });
        }
        if base.geometry == GeometryId::Hyperbolic2 {
            let ip = minkowski_inner(base.coords(), components);
            let norm = components.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
            let scale = T::one().max(base.coords[0] * norm);
            if ip.abs() > geometric_tol::<T>() * scale {
                return Err(Error::InvalidPoint(format!(
                    "vector not tangent to the hyperboloid: <p,v> = {:?}",
                    ip.to_f64()
                )));
            }
        }
        Ok(TangentVector {
            base,
            components: components.iter().copied().collect(),
        })
    }

    pub fn zero(base: Point<T>) -> Self {
        let dim = base.geometry.ambient_dim();
        TangentVector {
            base,
            components: std::iter::repeat_n(T::zero(), dim).collect(),
        }
    }

    pub fn base(&self) -> &Point<T> {
        &self.base
    }

    pub fn components(&self) -> &[T] {
        &self.components
    }

    pub fn scaled(&self, s: T) -> Self {
        TangentVector {
            base: self.base.clone(),
            components: self.components.iter().map(|&v| v * s).collect(),
        }
    }

    pub(crate) fn from_parts(base: Point<T>, components: Coords<T>) -> Self {
        TangentVector { base, components }
    }
}

/// A manifold backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Geometry {
    Euclidean(usize),
    Hyperbolic2,
    /// The plane under the rigid-motion group; points are Euclidean(2).
    Se2OnR2,
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Geometry::Euclidean(d) => write!(f, "euclidean({d})"),
            Geometry::Hyperbolic2 => write!(f, "hyperbolic2"),
            Geometry::Se2OnR2 => write!(f, "se2-on-r2"),
        }
    }
}

impl Geometry {
    pub fn id(self) -> GeometryId {
        match self {
            Geometry::Euclidean(d) => GeometryId::Euclidean(d),
            Geometry::Hyperbolic2 => GeometryId::Hyperbolic2,
            Geometry::Se2OnR2 => GeometryId::Euclidean(2),
        }
    }

    pub fn chart_dim(self) -> usize {
        self.id().chart_dim()
    }

    pub fn is_euclidean(self) -> bool {
        matches!(self.id(), GeometryId::Euclidean(_))
    }

    /// Riemannian volume density relative to Lebesgue measure in the chart.
    pub fn volume_density<T: Real>(self, chart: &[T]) -> T {
        match self {
            Geometry::Hyperbolic2 => {
                let r2 = chart.iter().fold(T::zero(), |a, &v| a + v * v);
                T::one() / (T::one() + r2).sqrt()
            }
            _ => T::one(),
        }
    }

    pub fn point_from_chart<T: Real>(self, chart: &[T]) -> Result<Point<T>> {
        let dim = self.chart_dim();
        if chart.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: chart.len(),
            });
        }
        Ok(match self {
            Geometry::Hyperbolic2 => Point::hyperboloid_from_chart(chart[0], chart[1]),
            _ => Point::euclidean(chart),
        })
    }

    pub fn check_point<T: Real>(self, p: &Point<T>) -> Result<()> {
        if p.geometry != self.id() {
            return Err(Error::GeometryMismatch {
                left: self.id(),
                right: p.geometry,
            });
        }
        Ok(())
    }

    fn check_pair<T: Real>(self, p: &Point<T>, q: &Point<T>) -> Result<()> {
        self.check_point(p)?;
        if q.geometry != p.geometry {
            return Err(Error::GeometryMismatch {
                left: p.geometry,
                right: q.geometry,
            });
        }
        Ok(())
    }

    fn check_tangent<T: Real>(self, p: &Point<T>, v: &TangentVector<T>) -> Result<()> {
        self.check_point(p)?;
        if v.base.geometry != p.geometry {
            return Err(Error::GeometryMismatch {
                left: p.geometry,
                right: v.base.geometry,
            });
        }
        if v.base.coords != p.coords {
            return Err(Error::ForeignTangent);
        }
        Ok(())
    }

    pub fn distance<T: Real>(self, p: &Point<T>, q: &Point<T>) -> Result<T> {
        self.check_pair(p, q)?;
        Ok(match self.id() {
            GeometryId::Euclidean(_) => euclidean_norm(
                p.coords.iter().zip(&q.coords).map(|(&a, &b)| a - b),
            ),
            GeometryId::Hyperbolic2 => hyperbolic::distance(&p.coords, &q.coords),
        })
    }

    /// Riemannian inner product of two vectors tangent at the same point.
    pub fn inner<T: Real>(self, u: &TangentVector<T>, v: &TangentVector<T>) -> Result<T> {
        self.check_tangent(&u.base, v)?;
        Ok(match self.id() {
            GeometryId::Euclidean(_) => dot(&u.components, &v.components),
            GeometryId::Hyperbolic2 => minkowski_inner(&u.components, &v.components),
        })
    }

    pub fn norm<T: Real>(self, v: &TangentVector<T>) -> Result<T> {
        Ok(self.inner(v, v)?.max(T::zero()).sqrt())
    }

    pub fn exp_map<T: Real>(self, p: &Point<T>, v: &TangentVector<T>) -> Result<Point<T>> {
        self.check_tangent(p, v)?;
        Ok(match self.id() {
            GeometryId::Euclidean(_) => Point {
                coords: p.coords.iter().zip(&v.components).map(|(&a, &b)| a + b).collect(),
                geometry: p.geometry,
            },
            GeometryId::Hyperbolic2 => Point {
                coords: hyperbolic::exp(&p.coords, &v.components),
                geometry: p.geometry,
            },
        })
    }

    /// Inverse of `exp_map`: the tangent vector at `p` pointing to `q`.
    pub fn log_map<T: Real>(self, p: &Point<T>, q: &Point<T>) -> Result<TangentVector<T>> {
        self.check_pair(p, q)?;
        let components = match self.id() {
            GeometryId::Euclidean(_) => {
                q.coords.iter().zip(&p.coords).map(|(&a, &b)| a - b).collect()
            }
            GeometryId::Hyperbolic2 => hyperbolic::log(&p.coords, &q.coords),
        };
        Ok(TangentVector::from_parts(p.clone(), components))
    }

    /// Parallel transport of `v` from `p` to `q` along the unique geodesic.
    pub fn parallel_transport<T: Real>(
        self,
        p: &Point<T>,
        q: &Point<T>,
        v: &TangentVector<T>,
    ) -> Result<TangentVector<T>> {
        self.check_tangent(p, v)?;
        self.check_pair(p, q)?;
        let components = match self.id() {
            GeometryId::Euclidean(_) => v.components.clone(),
            GeometryId::Hyperbolic2 => {
                if p.coords == q.coords {
                    v.components.clone()
                } else {
                    hyperbolic::transport(&p.coords, &q.coords, &v.components)
                }
            }
        };
        Ok(TangentVector::from_parts(q.clone(), components))
    }

    /// Orthonormal frame of `T_pX`. On the hyperboloid it is the transport of
    /// the standard frame at the origin, so frames agree along geodesics
    /// issued from the origin.
    pub fn tangent_basis<T: Real>(self, p: &Point<T>) -> Result<Vec<TangentVector<T>>> {
        self.check_point(p)?;
        Ok(match self.id() {
            GeometryId::Euclidean(d) => (0..d)
                .map(|i| {
                    let mut comps: Coords<T> = std::iter::repeat_n(T::zero(), d).collect();
                    comps[i] = T::one();
                    TangentVector::from_parts(p.clone(), comps)
                })
                .collect(),
            GeometryId::Hyperbolic2 => {
                let origin = Point::<T>::hyperbolic_origin();
                [[T::zero(), T::one(), T::zero()], [T::zero(), T::zero(), T::one()]]
                    .into_iter()
                    .map(|e| {
                        let comps = if p.coords == origin.coords {
                            e.into_iter().collect()
                        } else {
                            hyperbolic::transport(&origin.coords, &p.coords, &e)
                        };
                        TangentVector::from_parts(p.clone(), comps)
                    })
                    .collect()
            }
        })
    }

    /// Tangent vector at `p` with the given coordinates in `tangent_basis(p)`.
    pub fn tangent_from_frame<T: Real>(self, p: &Point<T>, coeffs: &[T]) -> Result<TangentVector<T>> {
        let basis = self.tangent_basis(p)?;
        if coeffs.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: coeffs.len(),
            });
        }
        let mut comps: Coords<T> = std::iter::repeat_n(T::zero(), p.geometry.ambient_dim()).collect();
        for (e, &a) in basis.iter().zip(coeffs) {
            for (c, &b) in comps.iter_mut().zip(&e.components) {
                *c = *c + a * b;
            }
        }
        Ok(TangentVector::from_parts(p.clone(), comps))
    }

    /// A uniform draw from the geodesic sphere of radius `r` about `p`.
    pub fn sample_sphere<T: Real, R: Rng + ?Sized>(self, p: &Point<T>, r: T, rng: &mut R) -> Result<Point<T>> {
        self.check_point(p)?;
        if r <= T::zero() {
            return Err(Error::NonPositiveRadius(r.to_f64().unwrap_or(f64::NAN)));
        }
        let dim = self.chart_dim();
        let dir = random_unit_vector::<T, R>(dim, rng);
        let coeffs: Vec<T> = dir.iter().map(|&u| u * r).collect();
        let v = self.tangent_from_frame(p, &coeffs)?;
        self.exp_map(p, &v)
    }

    /// The chart box containing every point within distance `r` of `window`.
    pub fn dilate_window(self, window: &Window, r: f64) -> Window {
        match self {
            Geometry::Hyperbolic2 => {
                // Spatial coordinates move by at most (cosh r - 1)|p_s| + sinh r p0.
                let max_abs: f64 = window
                    .lo()
                    .iter()
                    .zip(window.hi())
                    .map(|(a, b)| a.abs().max(b.abs()))
                    .fold(0.0, f64::max);
                let corner: f64 = window
                    .lo()
                    .iter()
                    .zip(window.hi())
                    .map(|(a, b)| a.abs().max(b.abs()).powi(2))
                    .sum();
                let p0 = (1.0 + corner).sqrt();
                let margin = (r.cosh() - 1.0) * max_abs + r.sinh() * p0;
                window.dilated(margin)
            }
            _ => window.dilated(r),
        }
    }
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub(crate) fn euclidean_norm<T: Real>(it: impl Iterator<Item = T>) -> T {
    it.fold(T::zero(), |acc, v| acc + v * v).sqrt()
}

pub(crate) fn random_unit_vector<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<T> {
    if dim == 1 {
        let s = if rng.random::<bool>() { T::one() } else { -T::one() };
        return vec![s];
    }
    loop {
        let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-300 {
            return g.into_iter().map(|v| c::<T>(v / n)).collect();
        }
    }
}
