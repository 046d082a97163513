//! Rigid motions of the plane.

use std::f64::consts::PI;

use super::{c, Geometry, GeometryId, Point};
use crate::error::{Error, Result};
use crate::Real;

/// `x ↦ R(angle) x + translation`, with the angle kept in `(-π, π]`.
///
/// The rotation-about-a-centre form `x ↦ A(x - ξ) + ξ` is available through
/// [`Se2::rotation_about`]; storing `(angle, translation)` keeps pure
/// translations (A = I) representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Se2<T> {
    angle: T,
    translation: [T; 2],
}

fn wrap_angle<T: Real>(a: T) -> T {
    let pi = c::<T>(PI);
    let two_pi = pi + pi;
    let mut a = a;
    if a.abs() > c::<T>(8.0 * PI) {
        a = a.sin().atan2(a.cos());
    }
    while a > pi {
        a = a - two_pi;
    }
    while a <= -pi {
        a = a + two_pi;
    }
    a
}

impl<T: Real> Se2<T> {
    pub fn new(angle: T, translation: [T; 2]) -> Self {
        Se2 {
            angle: wrap_angle(angle),
            translation,
        }
    }

    pub fn identity() -> Self {
        Se2 {
            angle: T::zero(),
            translation: [T::zero(); 2],
        }
    }

    /// Rotation by `angle` about the fixed point `xi`: `x ↦ A(x - ξ) + ξ`.
    pub fn rotation_about(angle: T, xi: [T; 2]) -> Self {
        let g = Se2::new(angle, [T::zero(); 2]);
        let axi = g.rotate(xi);
        Se2 {
            angle: g.angle,
            translation: [xi[0] - axi[0], xi[1] - axi[1]],
        }
    }

    pub fn angle(&self) -> T {
        self.angle
    }

    pub fn translation(&self) -> [T; 2] {
        self.translation
    }

    pub fn rotate(&self, x: [T; 2]) -> [T; 2] {
        let (s, co) = self.angle.sin_cos();
        [co * x[0] - s * x[1], s * x[0] + co * x[1]]
    }

    pub fn apply(&self, x: [T; 2]) -> [T; 2] {
        let r = self.rotate(x);
        [r[0] + self.translation[0], r[1] + self.translation[1]]
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Se2<T>) -> Se2<T> {
        let t = self.apply(other.translation);
        Se2::new(self.angle + other.angle, t)
    }

    pub fn inverse(&self) -> Se2<T> {
        let inv_rot = Se2::new(-self.angle, [T::zero(); 2]);
        let t = inv_rot.rotate(self.translation);
        Se2::new(-self.angle, [-t[0], -t[1]])
    }

    /// Acts on a point of the plane; any other geometry is rejected.
    pub fn act(&self, p: &Point<T>) -> Result<Point<T>> {
        if p.geometry() != GeometryId::Euclidean(2) {
            return Err(Error::WrongBackend { required: "se2-on-r2" });
        }
        let x = p.coords();
        Ok(Point::euclidean(&self.apply([x[0], x[1]])))
    }
}

impl Geometry {
    pub fn group_act<T: Real>(self, g: &Se2<T>, p: &Point<T>) -> Result<Point<T>> {
        if self != Geometry::Se2OnR2 {
            return Err(Error::WrongBackend { required: "se2-on-r2" });
        }
        g.act(p)
    }
}
