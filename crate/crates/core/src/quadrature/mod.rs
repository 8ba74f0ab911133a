//! Deterministic cubature over the half-space `R^n_+` and its boundary `R^{n-1}`.
//!
//! Every rule is polar about the origin: `y = ρ Ω` with `ρ = s·tan θ`,
//! `θ ∈ [0, π/2)`, so algebraically decaying integrands become smooth on a
//! bounded box. Polar and intermediate angles carry composite Gauss–Legendre
//! panels and the last azimuth a periodic midpoint rule. Each refinement level
//! doubles every axis; the error estimate is the change between consecutive
//! levels.
//!
//! Sums over the outermost (radial) axis run in parallel but are combined by a
//! fixed pairwise reduction, so results do not depend on the thread count.

mod constants;
pub mod gauss;

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use constants::{
    closed_form_a, closed_form_b, closed_form_c, constant_a, constant_b, constant_c, radial_moment,
    sphere_area,
};
use gauss::{composite, pairwise_sum, periodic, uniform, PANEL_ORDER};

/// Largest dimension accepted by the full-dimensional rules.
pub const MAX_TENSOR_DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Cap on radial nodes (excluding the graded core), in multiples of the panel order.
    pub radial_nodes: usize,
    /// Cap on nodes along each polar angle; the azimuth is capped at twice this.
    pub angular_nodes: usize,
    pub max_refinements: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            radial_nodes: 128,
            angular_nodes: 64,
            max_refinements: 12,
        }
    }
}

impl QuadratureSpec {
    pub fn with_rel_tol(self, rel_tol: f64) -> Self {
        Self { rel_tol, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::invalid(format!("rel_tol must lie in (0, 1), got {}", self.rel_tol)));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::invalid(format!("abs_tol must be positive, got {}", self.abs_tol)));
        }
        if self.radial_nodes < PANEL_ORDER || self.angular_nodes < PANEL_ORDER {
            return Err(Error::invalid(format!(
                "radial_nodes and angular_nodes must be at least {PANEL_ORDER}"
            )));
        }
        if self.max_refinements == 0 {
            return Err(Error::invalid("max_refinements must be positive"));
        }
        Ok(())
    }

    fn tolerance(&self, value: f64) -> f64 {
        (self.rel_tol * value.abs()).max(self.abs_tol)
    }

    /// Panel counts `(radial, angular)` and azimuth node count at `level`,
    /// or `None` once every axis is at its cap.
    fn level_counts(&self, level: usize) -> Option<LevelCounts> {
        let grow = |base: usize, cap: usize, l: usize| (base << l.min(30)).min(cap.max(base));
        let at = |l: usize| LevelCounts {
            radial_panels: grow(1, self.radial_nodes / PANEL_ORDER, l),
            angular_panels: grow(1, self.angular_nodes / PANEL_ORDER, l),
            azimuth: grow(8, 2 * self.angular_nodes, l),
        };
        let counts = at(level);
        (level == 0 || counts != at(level - 1)).then_some(counts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LevelCounts {
    radial_panels: usize,
    angular_panels: usize,
    azimuth: usize,
}

/// Outcome of one adaptive integration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralResult {
    pub value: f64,
    pub error_estimate: f64,
    pub converged: bool,
    pub evaluations: u64,
    /// Error estimate after each refinement, oldest first.
    pub history: Vec<f64>,
}

impl IntegralResult {
    /// A result known in closed form.
    pub fn exact(value: f64) -> Self {
        Self { value, error_estimate: 0.0, converged: true, evaluations: 0, history: Vec::new() }
    }

    pub fn into_checked(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                value: self.value,
                error_estimate: self.error_estimate,
                evaluations: self.evaluations,
            })
        }
    }

    /// `a·self + b·other` with summed error estimates.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        Self {
            value: a * self.value + b * other.value,
            error_estimate: a.abs() * self.error_estimate + b.abs() * other.error_estimate,
            converged: self.converged && other.converged,
            evaluations: self.evaluations + other.evaluations,
            history: Vec::new(),
        }
    }
}

/// Placement of the radial nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialLayout {
    /// `ρ = scale · tan θ`; should match the decay length of the integrand.
    pub scale: f64,
    /// When set, adds geometrically graded panels (ratio 2) near the origin
    /// down to this radius, for integrands with structure on that scale.
    pub core_radius: Option<f64>,
    /// When set, grades the last panel towards infinity so that structure at
    /// this (large) radius is resolved.
    pub outer_radius: Option<f64>,
}

impl Default for RadialLayout {
    fn default() -> Self {
        Self::with_scale(1.0)
    }
}

/// Offsets `first/2, first/4, …` stopping once below `floor/2`, smallest first.
fn graded_offsets(first: f64, floor: f64) -> Vec<f64> {
    let mut graded = Vec::new();
    let mut t = 0.5 * first;
    while t > 0.5 * floor {
        graded.push(t);
        t *= 0.5;
    }
    graded.reverse();
    graded
}

impl RadialLayout {
    pub fn with_scale(scale: f64) -> Self {
        Self { scale, core_radius: None, outer_radius: None }
    }

    /// Radial nodes `ρ_i` and weights including `dρ/dθ`.
    fn rule(&self, panels: usize) -> (Vec<f64>, Vec<f64>) {
        let first = FRAC_PI_2 / panels as f64;
        let mut breaks = vec![0.0];
        if let Some(core) = self.core_radius {
            breaks.extend(graded_offsets(first, (core / self.scale).atan()));
        }
        breaks.extend((1..panels).map(|j| first * j as f64));
        if let Some(outer) = self.outer_radius {
            let offsets = graded_offsets(first, (self.scale / outer).atan());
            breaks.extend(offsets.iter().rev().map(|t| FRAC_PI_2 - t));
        }
        breaks.push(FRAC_PI_2);
        let (theta, w) = composite(&breaks);
        let s = self.scale;
        theta
            .iter()
            .zip(&w)
            .map(|(&t, &w)| {
                let c = t.cos();
                (s * t.tan(), w * s / (c * c))
            })
            .unzip()
    }
}

fn drive(spec: &QuadratureSpec, mut level_value: impl FnMut(LevelCounts) -> (f64, u64)) -> IntegralResult {
    let mut evaluations = 0;
    let mut history = Vec::new();
    let mut previous: Option<f64> = None;
    let mut value = 0.0;
    let mut error_estimate = f64::INFINITY;
    for level in 0..=spec.max_refinements {
        let Some(counts) = spec.level_counts(level) else { break };
        let (v, evals) = level_value(counts);
        evaluations += evals;
        value = v;
        if let Some(p) = previous {
            let step = (v - p).abs();
            error_estimate = match history.last() {
                Some(&prev) => geometric_tail(step, prev),
                None => step,
            };
            history.push(step);
            if error_estimate <= spec.tolerance(v) {
                return IntegralResult { value, error_estimate, converged: true, evaluations, history };
            }
        }
        previous = Some(v);
    }
    if previous.is_some() && history.is_empty() {
        error_estimate = value.abs();
    }
    IntegralResult {
        value,
        error_estimate,
        converged: error_estimate <= spec.tolerance(value),
        evaluations,
        history,
    }
}

/// Error of the latest level given its last two level differences.
///
/// Once refinement contracts the difference by at least half per level, the
/// remaining error is the tail of a geometric series; otherwise the last
/// difference itself is the estimate.
fn geometric_tail(step: f64, previous_step: f64) -> f64 {
    let ratio = step / previous_step;
    if ratio.is_finite() && ratio <= 0.5 {
        step * ratio / (1.0 - ratio)
    } else {
        step
    }
}

/// Directions on the unit sphere `S^m ⊂ R^{m+1}` with their quadrature weights.
///
/// The first coordinate is `cos` of the first angle (or of the azimuth when
/// `m = 1`), and the node set is symmetric under flipping it.
fn sphere_directions(m: usize, counts: LevelCounts) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let (az, azw) = periodic(counts.azimuth);
    let mut dirs: Vec<f64> = az.iter().flat_map(|a| [a.cos(), a.sin()]).collect();
    let mut weights = azw;
    let (polar, polar_w) = uniform(0.0, PI, counts.angular_panels);
    // `dim` is the length of the direction vectors built so far.
    for dim in 2..=m {
        let sin_power = dim - 1;
        let mut next = Vec::with_capacity(dirs.len() / dim * polar.len() * (dim + 1));
        let mut next_w = Vec::with_capacity(weights.len() * polar.len());
        for (t, tw) in polar.iter().zip(&polar_w) {
            let (s, c) = t.sin_cos();
            let jac = tw * s.powi(sin_power as i32);
            for (d, w) in dirs.chunks_exact(dim).zip(&weights) {
                next.push(c);
                next.extend(d.iter().map(|x| s * x));
                next_w.push(jac * w);
            }
        }
        dirs = next;
        weights = next_w;
    }
    (dirs, weights)
}

/// Directions on the upper hemisphere of `S^{n-1}`: `(sin φ · ω, cos φ)`.
fn hemisphere_directions(n: usize, counts: LevelCounts) -> (Vec<f64>, Vec<f64>) {
    let (omega, omega_w) = sphere_directions(n - 2, counts);
    let (phi, phi_w) = uniform(0.0, FRAC_PI_2, counts.angular_panels);
    let m = n - 1;
    let mut dirs = Vec::with_capacity(phi.len() * omega_w.len() * n);
    let mut weights = Vec::with_capacity(phi.len() * omega_w.len());
    for (p, pw) in phi.iter().zip(&phi_w) {
        let (s, c) = p.sin_cos();
        let jac = pw * s.powi((n - 2) as i32);
        for (o, w) in omega.chunks_exact(m).zip(&omega_w) {
            dirs.extend(o.iter().map(|x| s * x));
            dirs.push(c);
            weights.push(jac * w);
        }
    }
    (dirs, weights)
}

fn polar_sum<F>(dim: usize, radial: &[(f64, f64)], dirs: &[f64], weights: &[f64], f: &F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let per_radius: Vec<f64> = radial
        .par_iter()
        .map(|&(rho, rw)| {
            let mut y = [0.0; 16];
            let y = &mut y[..dim];
            let mut acc = 0.0;
            for (d, w) in dirs.chunks_exact(dim).zip(weights) {
                for (yi, di) in y.iter_mut().zip(d) {
                    *yi = rho * di;
                }
                acc += w * f(y);
            }
            acc * rw * rho.powi(dim as i32 - 1)
        })
        .collect();
    pairwise_sum(&per_radius)
}

fn check_tensor_dim(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::UnsupportedDimension { n, reason: "dimension too small for this rule" });
    }
    if n > MAX_TENSOR_DIM {
        return Err(Error::UnsupportedDimension {
            n,
            reason: "full-dimensional cubature is limited to n <= 6",
        });
    }
    Ok(())
}

/// `∫_{R^n_+} f(y) dy`; `f` receives `(ȳ, y_n)` as one slice of length `n`.
pub fn integrate_halfspace<F>(n: usize, f: F, spec: &QuadratureSpec) -> Result<IntegralResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    integrate_halfspace_with(n, f, spec, &RadialLayout::default())
}

pub fn integrate_halfspace_with<F>(
    n: usize,
    f: F,
    spec: &QuadratureSpec,
    layout: &RadialLayout,
) -> Result<IntegralResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_tensor_dim(n, 2)?;
    spec.validate()?;
    let n = n.max(2);
    drive(spec, |counts| {
        let (dirs, weights) = if n == 2 {
            let (phi, w) = uniform(-FRAC_PI_2, FRAC_PI_2, counts.angular_panels);
            (phi.iter().flat_map(|p| [p.sin(), p.cos()]).collect(), w)
        } else {
            hemisphere_directions(n, counts)
        };
        let (rho, rw) = layout.rule(counts.radial_panels);
        let radial: Vec<(f64, f64)> = rho.into_iter().zip(rw).collect();
        let value = polar_sum(n, &radial, &dirs, &weights, &f);
        (value, (radial.len() * weights.len()) as u64)
    })
    .into_checked()
}

/// `∫_{R^{n-1}} f(ȳ) dȳ`; `f` receives a slice of length `n - 1`.
pub fn integrate_boundary<F>(n: usize, f: F, spec: &QuadratureSpec) -> Result<IntegralResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    integrate_boundary_with(n, f, spec, &RadialLayout::default())
}

pub fn integrate_boundary_with<F>(
    n: usize,
    f: F,
    spec: &QuadratureSpec,
    layout: &RadialLayout,
) -> Result<IntegralResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_tensor_dim(n, 3)?;
    spec.validate()?;
    drive(spec, |counts| {
        let (dirs, weights) = sphere_directions(n - 2, counts);
        let (rho, rw) = layout.rule(counts.radial_panels);
        let radial: Vec<(f64, f64)> = rho.into_iter().zip(rw).collect();
        let value = polar_sum(n - 1, &radial, &dirs, &weights, &f);
        (value, (radial.len() * weights.len()) as u64)
    })
    .into_checked()
}

/// `∫_{R^n_+} g(|ȳ|, y_n) dy` for integrands depending on `ȳ` only through its length.
pub fn integrate_profile_halfspace<G>(
    n: usize,
    g: G,
    spec: &QuadratureSpec,
    layout: &RadialLayout,
) -> Result<IntegralResult>
where
    G: Fn(f64, f64) -> f64 + Sync,
{
    if n < 3 {
        return Err(Error::UnsupportedDimension { n, reason: "profile rules need n >= 3" });
    }
    spec.validate()?;
    let area = sphere_area(n - 2);
    drive(spec, |counts| {
        let (phi, phi_w) = uniform(0.0, FRAC_PI_2, counts.angular_panels);
        let trig: Vec<(f64, f64)> = phi.iter().map(|p| p.sin_cos()).collect();
        let (rho, rw) = layout.rule(counts.radial_panels);
        let per_radius: Vec<f64> = rho
            .par_iter()
            .zip(rw.par_iter())
            .map(|(&rho, &rw)| {
                let mut acc = 0.0;
                for (&(s, c), w) in trig.iter().zip(&phi_w) {
                    let r = rho * s;
                    acc += w * r.powi(n as i32 - 2) * g(r, rho * c);
                }
                acc * rw * rho
            })
            .collect();
        (area * pairwise_sum(&per_radius), (rho.len() * phi.len()) as u64)
    })
    .into_checked()
}

/// `∫_{R^{n-1}} g(|ȳ|) dȳ`.
pub fn integrate_profile_boundary<G>(
    n: usize,
    g: G,
    spec: &QuadratureSpec,
    layout: &RadialLayout,
) -> Result<IntegralResult>
where
    G: Fn(f64) -> f64 + Sync,
{
    if n < 3 {
        return Err(Error::UnsupportedDimension { n, reason: "profile rules need n >= 3" });
    }
    spec.validate()?;
    let area = sphere_area(n - 2);
    drive(spec, |counts| {
        let (rho, rw) = layout.rule(counts.radial_panels);
        let terms: Vec<f64> = rho
            .iter()
            .zip(&rw)
            .map(|(&r, &w)| w * r.powi(n as i32 - 2) * g(r))
            .collect();
        (area * pairwise_sum(&terms), rho.len() as u64)
    })
    .into_checked()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn zero_integrand() {
        let r = integrate_halfspace(3, |_| 0.0, &spec()).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.converged);
        let r = integrate_boundary(4, |_| 0.0, &spec()).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn algebraic_halfspace_oracle() {
        for n in 3..=5 {
            let exact = 0.5 * sphere_area(n - 1) * radial_moment(n as u32 - 1, n as f64).unwrap();
            let r = integrate_halfspace(n, |y| (1.0 + y.iter().map(|v| v * v).sum::<f64>()).powi(-(n as i32)), &spec()).unwrap();
            assert_relative_eq!(r.value, exact, max_relative = 1e-9);
        }
    }

    #[test]
    fn boundary_moment_oracle() {
        let n = 4;
        let exact = sphere_area(n - 2) * radial_moment(2, 3.0).unwrap();
        let r = integrate_boundary(n, |y| (1.0 + y.iter().map(|v| v * v).sum::<f64>()).powi(-3), &spec()).unwrap();
        assert_relative_eq!(r.value, exact, max_relative = 1e-9);
        let p = integrate_profile_boundary(n, |r| (1.0 + r * r).powi(-3), &spec(), &RadialLayout::default()).unwrap();
        assert_relative_eq!(p.value, exact, max_relative = 1e-10);
    }

    #[test]
    fn odd_integrand_cancels() {
        for n in 3..=5 {
            let f = |y: &[f64]| y[0] * (1.0 + y.iter().map(|v| v * v).sum::<f64>()).powi(-(n as i32));
            let r = integrate_boundary(n, f, &spec()).unwrap();
            assert!(r.value.abs() <= 1e-12, "n={n}: {}", r.value);
            let r = integrate_halfspace(n, f, &spec()).unwrap();
            assert!(r.value.abs() <= 1e-12, "n={n}: {}", r.value);
        }
    }

    #[test]
    fn linearity() {
        let n = 3;
        let f = |y: &[f64]| (1.0 + y.iter().map(|v| v * v).sum::<f64>()).powi(-3);
        let g = |y: &[f64]| y[2] * (1.0 + y.iter().map(|v| v * v).sum::<f64>()).powi(-3);
        let s = spec();
        let i_f = integrate_halfspace(n, f, &s).unwrap();
        let i_g = integrate_halfspace(n, g, &s).unwrap();
        let i_fg = integrate_halfspace(n, |y| 2.0 * f(y) - 3.0 * g(y), &s).unwrap();
        let tol = 2.0 * i_f.error_estimate + 3.0 * i_g.error_estimate + i_fg.error_estimate + 1e-12;
        assert!((i_fg.value - (2.0 * i_f.value - 3.0 * i_g.value)).abs() <= tol.max(1e-9 * i_fg.value.abs()));
    }

    #[test]
    fn translation_invariance_on_boundary() {
        let n = 3;
        let f = |y: &[f64]| (1.0 + y.iter().map(|v| v * v).sum::<f64>()).powi(-3);
        // Off-centre mass needs finer caps than the defaults.
        let fine = QuadratureSpec { radial_nodes: 1024, angular_nodes: 512, ..spec() };
        let base = integrate_boundary(n, f, &fine).unwrap().value;
        for v in [[1.0, 0.0], [3.0, -4.0], [0.0, 2.5]] {
            let shifted = integrate_boundary(n, |y| f(&[y[0] - v[0], y[1] - v[1]]), &fine).unwrap().value;
            assert_relative_eq!(shifted, base, max_relative = 1e-8);
        }
    }

    #[test]
    fn determinism() {
        let f = |y: &[f64]| (1.0 + 0.3 * y[1] + y[3] * y[3]) * (1.0 + y.iter().map(|v| v * v).sum::<f64>()).powi(-5);
        let a = integrate_halfspace(4, f, &spec()).unwrap();
        let b = integrate_halfspace(4, f, &spec()).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn graded_core_resolves_small_scale_structure() {
        let eps = 1e-3;
        let n = 3;
        // ∫ (|ȳ|² + ε²)^{-3/2} (1 + |ȳ|²)^{-1} over R²; the reference value is from mpmath.
        let g = |r: f64| (r * r + eps * eps).powf(-1.5) / (1.0 + r * r);
        let plain = integrate_profile_boundary(n, g, &spec(), &RadialLayout::default());
        let layout = RadialLayout { core_radius: Some(eps), ..RadialLayout::default() };
        let graded = integrate_profile_boundary(n, g, &spec(), &layout).unwrap();
        let exact = 6_273.328_254_361_442;
        assert_relative_eq!(graded.value, exact, max_relative = 1e-9);
        assert!(plain.map(|p| (p.value - exact).abs() > 1e-9 * exact).unwrap_or(true));
    }

    #[test]
    fn unconverged_is_reported() {
        let tight = QuadratureSpec { rel_tol: 1e-15, abs_tol: 1e-300, radial_nodes: 16, angular_nodes: 8, max_refinements: 3 };
        let err = integrate_halfspace(3, |y| (1.0 + y[0].abs()).powi(-8) * (-y[2]).exp(), &tight).unwrap_err();
        assert!(matches!(err, Error::NotConverged { .. }));
    }

    #[test]
    fn rejects_large_dimension() {
        assert!(matches!(
            integrate_halfspace(7, |_| 0.0, &spec()),
            Err(Error::UnsupportedDimension { n: 7, .. })
        ));
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let bad = QuadratureSpec { rel_tol: 1.5, ..QuadratureSpec::default() };
        assert!(bad.validate().is_err());
    }
}
