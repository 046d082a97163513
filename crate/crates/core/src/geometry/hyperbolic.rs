//! Hyperboloid-model formulas on raw ambient coordinates.
//!
//! Results are re-projected onto the sheet (or the tangent plane) after every
//! closed-form step, which keeps long chains of exp/transport calls from
//! drifting off the constraint surface.

use super::Coords;
use crate::Real;

/// Minkowski product `-a0 b0 + a1 b1 + a2 b2`.
pub fn minkowski_inner<T: Real>(a: &[T], b: &[T]) -> T {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// The Poincaré-disk image of a hyperboloid point (output only).
pub fn to_poincare_disk<T: Real>(p: &[T]) -> [T; 2] {
    let d = T::one() + p[0];
    [p[1] / d, p[2] / d]
}

fn project_to_sheet<T: Real>(mut p: Coords<T>) -> Coords<T> {
    p[0] = (T::one() + p[1] * p[1] + p[2] * p[2]).sqrt();
    p
}

fn project_to_tangent<T: Real>(p: &[T], mut v: Coords<T>) -> Coords<T> {
    // <p,p> = -1, so v + <p,v> p is the orthogonal projection.
    let ip = minkowski_inner(p, &v);
    for (vi, &pi) in v.iter_mut().zip(p) {
        *vi = *vi + ip * pi;
    }
    v
}

/// `arccosh(-<p,q>)`, evaluated as `2 asinh(|p - q|_M / 2)` which stays
/// accurate for nearby points where arccosh loses half the digits.
pub fn distance<T: Real>(p: &[T], q: &[T]) -> T {
    let diff: Coords<T> = p.iter().zip(q).map(|(&a, &b)| a - b).collect();
    let sq = minkowski_inner(&diff, &diff).max(T::zero());
    let two = T::one() + T::one();
    two * (sq.sqrt() / two).asinh()
}

pub fn exp<T: Real>(p: &[T], v: &[T]) -> Coords<T> {
    let n = minkowski_inner(v, v).max(T::zero()).sqrt();
    let out: Coords<T> = if n == T::zero() {
        p.iter().copied().collect()
    } else {
        let (s, c) = (n.sinh() / n, n.cosh());
        p.iter().zip(v).map(|(&a, &b)| c * a + s * b).collect()
    };
    project_to_sheet(out)
}

pub fn log<T: Real>(p: &[T], q: &[T]) -> Coords<T> {
    let a = -minkowski_inner(p, q);
    let u: Coords<T> = q.iter().zip(p).map(|(&qi, &pi)| qi - a * pi).collect();
    let u = project_to_tangent(p, u);
    let d = distance(p, q);
    if d == T::zero() {
        return u.iter().map(|_| T::zero()).collect();
    }
    let un = minkowski_inner(&u, &u).max(T::zero()).sqrt();
    if un == T::zero() {
        return u;
    }
    let scale = d / un;
    u.iter().map(|&ui| ui * scale).collect()
}

/// Transport along the geodesic from `p` to `q`:
/// `v + <q,v> / (1 - <p,q>) (p + q)`.
pub fn transport<T: Real>(p: &[T], q: &[T], v: &[T]) -> Coords<T> {
    let k = minkowski_inner(q, v) / (T::one() - minkowski_inner(p, q));
    let out: Coords<T> = v
        .iter()
        .zip(p.iter().zip(q))
        .map(|(&vi, (&pi, &qi))| vi + k * (pi + qi))
        .collect();
    project_to_tangent(q, out)
}
