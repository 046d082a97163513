//! Simulation and Monte Carlo verification of cluster point processes.
//!
//! A cluster process is built from a centre process `μ` on a manifold `X`
//! and a family of cluster laws `η_x`: every centre `x` scatters a random
//! finite cluster `ȳ ~ η_x`, and the observed configuration is the union of
//! all clusters with the centres forgotten. The crate samples such processes
//! on Euclidean space, the hyperbolic plane and the plane under rigid
//! motions, and provides estimators that check their distributional
//! identities (Laplace functionals, droplet measures, quasi-invariance,
//! integration by parts, Langevin stationarity) to a stated number of
//! standard errors.
//!
//! The geometric layer is generic over the scalar type; the Monte Carlo
//! layers work in `f64` through the aliases below.

pub mod calculus;
pub mod centres;
pub mod cli;
pub mod clusters;
pub mod droplet;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod io;
pub mod process;
pub mod region;
pub mod rng;
pub mod stats;

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive};

pub use error::{Error, Result};
pub use geometry::{Geometry, GeometryId, ALGEBRAIC_TOL, GEOMETRIC_TOL};
pub use region::{Region, Window};

/// Scalar types the geometry layer can run on (`f32`, `f64`).
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Default + Send + Sync + 'static {}

impl<T> Real for T where T: Float + FloatConst + FromPrimitive + Debug + Default + Send + Sync + 'static {}

pub type Point = geometry::Point<f64>;
pub type TangentVector = geometry::TangentVector<f64>;
pub type Se2 = geometry::Se2<f64>;
