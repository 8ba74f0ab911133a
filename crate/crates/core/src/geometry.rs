//! Conformal transport between the upper half-space and the unit ball.
//!
//! The inversion `I(x) = -e_n + 2 (x + e_n) / |x + e_n|^2` is the inversion in
//! the sphere of radius `sqrt 2` about the south pole `(0, -1)`. It is an
//! involution, maps the half-space `{x_n >= 0}` onto the closed ball and its
//! boundary hyperplane onto the unit sphere.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance to the south pole below which the inverse inversion is refused.
pub const SOUTH_POLE_TOL: f64 = 1e-8;

/// A point `(x_bar, x_n)` of the closed upper half-space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfSpacePoint {
    pub bar_x: Vec<f64>,
    pub x_n: f64,
}

impl HalfSpacePoint {
    pub fn new(bar_x: Vec<f64>, x_n: f64) -> Result<Self> {
        if !(x_n >= 0.0) {
            return Err(Error::invalid(format!("half-space point needs x_n >= 0, got {x_n}")));
        }
        Ok(Self { bar_x, x_n })
    }

    /// Splits an ambient coordinate vector into `(x_bar, x_n)`.
    pub fn from_coords(x: &[f64]) -> Result<Self> {
        let (&x_n, bar) = x
            .split_last()
            .ok_or_else(|| Error::invalid("empty coordinate vector"))?;
        Self::new(bar.to_vec(), x_n)
    }

    pub fn dim(&self) -> usize {
        self.bar_x.len() + 1
    }

    pub fn coords(&self) -> Vec<f64> {
        let mut v = self.bar_x.clone();
        v.push(self.x_n);
        v
    }
}

/// A point of the closed unit ball.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallPoint {
    pub xi: Vec<f64>,
}

impl BallPoint {
    pub fn new(xi: Vec<f64>) -> Result<Self> {
        let r = norm(&xi);
        if r > 1.0 + 1e-12 {
            return Err(Error::invalid(format!("ball point has norm {r} > 1")));
        }
        Ok(Self { xi })
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }
}

/// A point of the unit sphere, renormalized on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SpherePoint {
    xi: Vec<f64>,
}

impl SpherePoint {
    /// Accepts a vector whose norm is within `1e-6` of one and renormalizes it.
    pub fn new(xi: Vec<f64>) -> Result<Self> {
        let r = norm(&xi);
        if (r - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("sphere point has norm {r}")));
        }
        Ok(Self::normalize(xi))
    }

    /// Radial projection of any nonzero vector onto the sphere.
    ///
    /// Panics on the zero vector.
    pub fn normalize(mut xi: Vec<f64>) -> Self {
        let r = norm(&xi);
        assert!(r > 0.0, "cannot project the zero vector onto the sphere");
        xi.iter_mut().for_each(|c| *c /= r);
        Self { xi }
    }

    pub fn north_pole(n: usize) -> Self {
        let mut xi = vec![0.0; n];
        xi[n - 1] = 1.0;
        Self { xi }
    }

    pub fn south_pole(n: usize) -> Self {
        let mut xi = vec![0.0; n];
        xi[n - 1] = -1.0;
        Self { xi }
    }

    /// The `k`-th standard basis vector (zero based).
    pub fn basis(n: usize, k: usize) -> Self {
        let mut xi = vec![0.0; n];
        xi[k] = 1.0;
        Self { xi }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.xi
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.xi
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    /// Euclidean (chordal) distance to another sphere point.
    pub fn distance(&self, other: &SpherePoint) -> f64 {
        self.xi
            .iter()
            .zip(&other.xi)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn distance_to_south_pole(&self) -> f64 {
        distance_to_south_pole(&self.xi)
    }
}

impl TryFrom<Vec<f64>> for SpherePoint {
    type Error = Error;

    fn try_from(xi: Vec<f64>) -> Result<Self> {
        Self::new(xi)
    }
}

impl From<SpherePoint> for Vec<f64> {
    fn from(p: SpherePoint) -> Self {
        p.xi
    }
}

impl AsRef<[f64]> for SpherePoint {
    fn as_ref(&self) -> &[f64] {
        &self.xi
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn distance_to_south_pole(xi: &[f64]) -> f64 {
    let n = xi.len();
    let mut s = (xi[n - 1] + 1.0).powi(2);
    for c in &xi[..n - 1] {
        s += c * c;
    }
    s.sqrt()
}

/// Writes `I(x)` into `out` for any `x` other than the south pole.
///
/// Both slices have length `n`; the last coordinate is `x_n`.
pub fn inversion_into(x: &[f64], out: &mut [f64]) {
    let n = x.len();
    debug_assert_eq!(out.len(), n);
    let bar_sq: f64 = x[..n - 1].iter().map(|c| c * c).sum();
    let x_n = x[n - 1];
    let denom = bar_sq + (x_n + 1.0) * (x_n + 1.0);
    for (o, c) in out[..n - 1].iter_mut().zip(&x[..n - 1]) {
        *o = 2.0 * c / denom;
    }
    out[n - 1] = (1.0 - bar_sq - x_n * x_n) / denom;
}

pub fn inversion_coords(x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    inversion_into(x, &mut out);
    out
}

/// The inversion of a half-space point; the image lies in the closed ball.
pub fn inversion(x: &HalfSpacePoint) -> BallPoint {
    BallPoint {
        xi: inversion_coords(&x.coords()),
    }
}

/// Analytic Jacobian of the inversion at `x`.
///
/// With `w = x + e_n` this is `(2 / |w|^2) (I - 2 w w^T / |w|^2)`.
pub fn inversion_jacobian(x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let mut w = x.to_vec();
    w[n - 1] += 1.0;
    let w_sq = dot(&w, &w);
    let s = 2.0 / w_sq;
    DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        s * (delta - 2.0 * w[i] * w[j] / w_sq)
    })
}

/// The conformal factor of the pulled-back ball metric.
pub fn conformal_factor(x: &HalfSpacePoint) -> f64 {
    let bar_sq: f64 = x.bar_x.iter().map(|c| c * c).sum();
    let s = 2.0 / (bar_sq + (x.x_n + 1.0).powi(2));
    s * s
}

/// The boundary point `I(z_bar, 0)` on the unit sphere.
pub fn boundary_point_from_params(z_bar: &[f64]) -> SpherePoint {
    let n = z_bar.len() + 1;
    let mut x = z_bar.to_vec();
    x.push(0.0);
    let mut xi = vec![0.0; n];
    inversion_into(&x, &mut xi);
    SpherePoint::normalize(xi)
}

/// Inverts the inversion at the interior point `(1 - lam_scale) xi`.
///
/// Returns `(lambda, z_bar)`; with `lam_scale = 0` the point is on the sphere
/// and `lambda` is exactly zero.
pub fn params_from_boundary_point(xi: &SpherePoint, lam_scale: f64) -> Result<(f64, Vec<f64>)> {
    if !(0.0..1.0).contains(&lam_scale) {
        return Err(Error::invalid(format!("lam_scale must lie in [0, 1), got {lam_scale}")));
    }
    if xi.distance_to_south_pole() < SOUTH_POLE_TOL {
        return Err(Error::SouthPoleSingularity { tol: SOUTH_POLE_TOL });
    }
    let point: Vec<f64> = xi.as_slice().iter().map(|c| c * (1.0 - lam_scale)).collect();
    let mut pre = inversion_coords(&point);
    let mut lambda = pre.pop().expect("n >= 1");
    if lam_scale == 0.0 {
        lambda = 0.0;
    }
    Ok((lambda.max(0.0), pre))
}

/// `(lambda, z_bar) = I^{-1}(xi)` for a point of the closed ball.
pub fn params_from_ball_point(xi: &BallPoint) -> Result<(f64, Vec<f64>)> {
    if distance_to_south_pole(&xi.xi) < SOUTH_POLE_TOL {
        return Err(Error::SouthPoleSingularity { tol: SOUTH_POLE_TOL });
    }
    let mut pre = inversion_coords(&xi.xi);
    let lambda = pre.pop().expect("n >= 1").max(0.0);
    Ok((lambda, pre))
}

/// Inverse stereographic projection onto the unit sphere of `R^{n+1}`
/// centred at `(0, .., 0, -d, 0)`; the half-space lands in the cap
/// `xi_n > d (1 - xi_{n+1})`.
pub fn cap_lift(z: &HalfSpacePoint, d: f64) -> Vec<f64> {
    let bar_sq: f64 = z.bar_x.iter().map(|c| c * c).sum();
    let shifted = z.x_n + d;
    let rest = bar_sq + shifted * shifted;
    let denom = 1.0 + rest;
    let mut out: Vec<f64> = z.bar_x.iter().map(|c| 2.0 * c / denom).collect();
    out.push(2.0 * shifted / denom);
    out.push((rest - 1.0) / denom);
    out
}
