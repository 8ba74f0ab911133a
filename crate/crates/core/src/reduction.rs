//! The reduced energy `Γ(λ, z̄)`, its boundary trace `Ψ`, the energy of the
//! bubbles, and numerical checks of the limit and small-scale behaviour of `Γ`.
//!
//! `Γ` is evaluated in the rescaled coordinates `y = (x - (z̄, 0)) / λ`, where
//! the bubble weight is fixed and only the field argument moves:
//!
//! ```text
//! Γ = Λ^{n/2} ∫_{R^n_+} K(λȳ + z̄, λy_n) w(y) dy
//!   + Λ^{(n-1)/2} β_n D ∫_{R^{n-1}} H(λȳ + z̄) (|ȳ|² + D² + 1)^{-(n-1)} dȳ,
//! w(y) = (|ȳ|² + (y_n + D)² + 1)^{-n}.
//! ```

use serde::{Deserialize, Serialize};

use crate::bubble::{Bubble, BubbleParams, ModelConstants};
use crate::error::{Error, Result};
use crate::fields::{normal_derivative_k, FieldPair, LinearCombination};
use crate::geometry::{self, BallPoint, SpherePoint, SOUTH_POLE_TOL};
use crate::quadrature::{self, IntegralResult, QuadratureSpec, RadialLayout};

/// The constants `a_n`, `b_n`, `c_n` computed once for a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedModel {
    pub consts: ModelConstants,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ReducedModel {
    pub fn new(consts: &ModelConstants, spec: &QuadratureSpec) -> Result<Self> {
        Ok(Self {
            consts: *consts,
            a: quadrature::constant_a(consts, spec)?.value,
            b: quadrature::constant_b(consts, spec)?.value,
            c: quadrature::constant_c(consts, spec)?.value,
        })
    }

    /// The same model with the constants taken from their closed forms.
    pub fn closed_form(consts: &ModelConstants) -> Self {
        Self {
            consts: *consts,
            a: quadrature::closed_form_a(consts),
            b: quadrature::closed_form_b(consts),
            c: quadrature::closed_form_c(consts),
        }
    }

    /// `Ψ(ξ) = a_n 𝒦(ξ) + b_n ℋ(ξ)`.
    pub fn psi(&self, f: &FieldPair, xi: &SpherePoint) -> f64 {
        self.a * f.k_field.value(xi.as_slice()) + self.b * f.h_field.value(xi.as_slice())
    }

    pub fn psi_field(&self, f: &FieldPair) -> LinearCombination {
        LinearCombination::new(
            f.dim(),
            vec![(self.a, f.k_field.clone()), (self.b, f.h_field.clone())],
        )
        .expect("field pair has a single dimension")
    }

    /// `-c_n (1 + ξ_n) ∂_ν𝒦(ξ)`, the first-order coefficient of `Γ` in `λ`.
    pub fn predicted_slope(&self, f: &FieldPair, xi: &SpherePoint) -> f64 {
        let n = xi.dim();
        -self.c * (1.0 + xi.as_slice()[n - 1]) * normal_derivative_k(f, xi)
    }
}

pub fn psi(c: &ModelConstants, f: &FieldPair, xi: &SpherePoint, spec: &QuadratureSpec) -> Result<f64> {
    Ok(ReducedModel::new(c, spec)?.psi(f, xi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaReport {
    pub value: f64,
    pub interior_part: f64,
    pub boundary_part: f64,
    pub interior_quadrature: IntegralResult,
    pub boundary_quadrature: IntegralResult,
}

fn check_dims(c: &ModelConstants, f: &FieldPair, p: &BubbleParams) -> Result<()> {
    if f.dim() != c.n {
        return Err(Error::DimensionMismatch { expected: c.n, got: f.dim() });
    }
    if p.z_bar.len() + 1 != c.n {
        return Err(Error::DimensionMismatch { expected: c.n - 1, got: p.z_bar.len() });
    }
    Ok(())
}

/// Radial layout for the rescaled `Γ` integrands. Fields vary on the scale
/// `(1 + |z̄|)/λ` around `ȳ = -z̄/λ`; when that sits near the origin and is
/// small, the core is graded down to it.
fn gamma_layout(c: &ModelConstants, p: &BubbleParams) -> RadialLayout {
    let scale = (1.0 + c.d * c.d).sqrt();
    let core = (1.0 + geometry::norm(&p.z_bar)) / p.lambda;
    RadialLayout {
        scale,
        core_radius: (core < 0.25 * scale).then_some(core),
        outer_radius: (core > 4.0 * scale).then_some(core),
    }
}

pub fn gamma(c: &ModelConstants, f: &FieldPair, p: &BubbleParams, spec: &QuadratureSpec) -> Result<GammaReport> {
    gamma_parts(c, f, p, spec, false, 0.0)
}

/// [`gamma`] resolved only to an absolute error of about `budget` on `Γ`
/// itself, on top of the relative accuracy in `spec`.
pub fn gamma_within(
    c: &ModelConstants,
    f: &FieldPair,
    p: &BubbleParams,
    spec: &QuadratureSpec,
    budget: f64,
) -> Result<GammaReport> {
    gamma_parts(c, f, p, spec, false, budget)
}

/// `(Γ(λ, z̄) - Ψ(ξ)) / λ` with `ξ = I(z̄, 0)`, integrated as a difference
/// quotient so the result keeps its relative accuracy as `λ → 0`.
pub fn gamma_slope(c: &ModelConstants, f: &FieldPair, p: &BubbleParams, spec: &QuadratureSpec) -> Result<GammaReport> {
    gamma_parts(c, f, p, spec, true, 0.0)
}

fn gamma_parts(
    c: &ModelConstants,
    f: &FieldPair,
    p: &BubbleParams,
    spec: &QuadratureSpec,
    quotient: bool,
    budget: f64,
) -> Result<GammaReport> {
    check_dims(c, f, p)?;
    let n = c.n;
    let nf = n as f64;
    let (lam, zb, d) = (p.lambda, p.z_bar.as_slice(), c.d);
    let interior_scale = c.lambda_n.powf(nf / 2.0);
    let boundary_scale = c.lambda_n.powf((nf - 1.0) / 2.0) * c.beta_n * d;
    // Half the budget to each part, in the units of its raw integral.
    let part_spec = |scale: f64| QuadratureSpec { abs_tol: spec.abs_tol.max(0.5 * budget / scale.abs()), ..*spec };
    let layout = gamma_layout(c, p);
    let base = geometry::boundary_point_from_params(zb);
    let (k_shift, h_shift, inv) = if quotient {
        (f.k_field.value(base.as_slice()), f.h_field.value(base.as_slice()), 1.0 / lam)
    } else {
        (0.0, 0.0, 1.0)
    };

    let interior = quadrature::integrate_halfspace_with(
        n,
        |y| {
            let mut x = [0.0; 16];
            let mut img = [0.0; 16];
            let mut bar2 = 0.0;
            for k in 0..n - 1 {
                x[k] = lam * y[k] + zb[k];
                bar2 += y[k] * y[k];
            }
            x[n - 1] = lam * y[n - 1];
            let t = y[n - 1] + d;
            let w = (bar2 + t * t + 1.0).powi(-(n as i32));
            geometry::inversion_into(&x[..n], &mut img[..n]);
            (f.k_field.value(&img[..n]) - k_shift) * inv * w
        },
        &part_spec(interior_scale),
        &layout,
    )?;

    let boundary = if d == 0.0 {
        IntegralResult::exact(0.0)
    } else {
        quadrature::integrate_boundary_with(
            n,
            |ybar| {
                let mut x = [0.0; 16];
                let mut img = [0.0; 16];
                let mut bar2 = 0.0;
                for k in 0..n - 1 {
                    x[k] = lam * ybar[k] + zb[k];
                    bar2 += ybar[k] * ybar[k];
                }
                geometry::inversion_into(&x[..n], &mut img[..n]);
                (f.h_field.value(&img[..n]) - h_shift) * inv * (bar2 + d * d + 1.0).powi(-(n as i32 - 1))
            },
            &part_spec(boundary_scale),
            &layout,
        )?
    };

    let interior_part = interior_scale * interior.value;
    let boundary_part = boundary_scale * boundary.value;
    Ok(GammaReport {
        value: interior_part + boundary_part,
        interior_part,
        boundary_part,
        interior_quadrature: interior,
        boundary_quadrature: boundary,
    })
}

/// The three terms of the energy at a bubble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub value: f64,
    /// `½ ∫ |∇U|²`.
    pub gradient_term: f64,
    /// `α_n ∫ (1 + εK) U^{2*}`.
    pub bulk_term: f64,
    /// `α_n β_n D ∫ (1 + εH) U^{2♯}`.
    pub trace_term: f64,
}

impl EnergyReport {
    fn assemble(gradient_term: f64, bulk_term: f64, trace_term: f64) -> Self {
        Self { value: gradient_term - bulk_term - trace_term, gradient_term, bulk_term, trace_term }
    }
}

/// The energy of the limit problem at `U_{λ,z̄}`, integrated in original
/// (translated, not rescaled) coordinates.
pub fn j0_at_bubble(c: &ModelConstants, p: &BubbleParams, spec: &QuadratureSpec) -> Result<EnergyReport> {
    let n = c.n;
    let b = Bubble::new(c, p);
    let layout = b.layout();
    let u = b.centred();
    let two_star = c.sobolev_exponent();
    let two_sharp = c.trace_exponent();
    let point = |r: f64, t: f64| {
        let mut y = vec![0.0; n];
        y[0] = r;
        y[n - 1] = t;
        y
    };
    let grad = quadrature::integrate_profile_halfspace(n, |r, t| u.gradient_norm_sq(&point(r, t)), spec, &layout)?;
    let bulk = quadrature::integrate_profile_halfspace(n, |r, t| u.value(&point(r, t)).powf(two_star), spec, &layout)?;
    let trace = if c.d == 0.0 {
        0.0
    } else {
        quadrature::integrate_profile_boundary(n, |r| u.value(&point(r, 0.0)).powf(two_sharp), spec, &layout)?.value
    };
    Ok(EnergyReport::assemble(
        0.5 * grad.value,
        c.alpha_n * bulk.value,
        c.alpha_n * c.beta_n * c.d * trace,
    ))
}

/// The perturbed energy at `U_{λ,z̄}`, with the weights `1 + εK`, `1 + εH`
/// inside the integrals.
pub fn j_eps_at_bubble(
    c: &ModelConstants,
    f: &FieldPair,
    p: &BubbleParams,
    eps: f64,
    spec: &QuadratureSpec,
) -> Result<EnergyReport> {
    if eps == 0.0 {
        return j0_at_bubble(c, p, spec);
    }
    check_dims(c, f, p)?;
    let n = c.n;
    let b = Bubble::new(c, p);
    let layout = b.field_layout();
    let u = b.centred();
    let two_star = c.sobolev_exponent();
    let two_sharp = c.trace_exponent();

    let gradient = quadrature::integrate_halfspace_with(n, |y| u.gradient_norm_sq(y), spec, &layout)?;
    let bulk = quadrature::integrate_halfspace_with(
        n,
        |y| {
            let mut x = [0.0; 16];
            let mut img = [0.0; 16];
            b.untranslate_into(y, &mut x[..n]);
            geometry::inversion_into(&x[..n], &mut img[..n]);
            (1.0 + eps * f.k_field.value(&img[..n])) * u.value(y).powf(two_star)
        },
        spec,
        &layout,
    )?;
    let trace = if c.d == 0.0 {
        0.0
    } else {
        quadrature::integrate_boundary_with(
            n,
            |ybar| {
                let mut y = [0.0; 16];
                y[..n - 1].copy_from_slice(ybar);
                let mut x = [0.0; 16];
                let mut img = [0.0; 16];
                b.untranslate_into(&y[..n], &mut x[..n]);
                geometry::inversion_into(&x[..n], &mut img[..n]);
                (1.0 + eps * f.h_field.value(&img[..n])) * u.value(&y[..n]).powf(two_sharp)
            },
            spec,
            &layout,
        )?
        .value
    };
    Ok(EnergyReport::assemble(
        0.5 * gradient.value,
        c.alpha_n * bulk.value,
        c.alpha_n * c.beta_n * c.d * trace,
    ))
}

/// A direction in `(λ, z̄)` space. Along it, `λ(t) = t·lambda` when
/// `lambda > 0` and `λ(t) = 1` otherwise; `z̄(t) = t·z_bar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub lambda: f64,
    pub z_bar: Vec<f64>,
}

impl Ray {
    pub fn pure_lambda(n: usize) -> Self {
        Self { lambda: 1.0, z_bar: vec![0.0; n - 1] }
    }

    pub fn pure_z_bar(n: usize, axis: usize) -> Self {
        let mut z_bar = vec![0.0; n - 1];
        z_bar[axis] = 1.0;
        Self { lambda: 0.0, z_bar }
    }

    pub fn at(&self, t: f64) -> BubbleParams {
        let lambda = if self.lambda > 0.0 { t * self.lambda } else { 1.0 };
        BubbleParams { lambda, z_bar: self.z_bar.iter().map(|v| t * v).collect() }
    }
}

pub const LIMIT_RAY_TIMES: [f64; 5] = [10.0, 30.0, 100.0, 300.0, 1000.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub ray: Ray,
    /// `Ψ` at the south pole.
    pub limit_value: f64,
    /// `(t, |Γ - Ψ(0, -1)|)`.
    pub samples: Vec<(f64, f64)>,
    pub monotone: bool,
    pub threshold: f64,
    pub passed: bool,
}

pub fn limit_at_infinity_check(
    model: &ReducedModel,
    f: &FieldPair,
    ray: &Ray,
    spec: &QuadratureSpec,
) -> Result<LimitReport> {
    let n = model.consts.n;
    if ray.z_bar.len() + 1 != n {
        return Err(Error::DimensionMismatch { expected: n - 1, got: ray.z_bar.len() });
    }
    if !(ray.lambda > 0.0) && geometry::norm(&ray.z_bar) == 0.0 {
        return Err(Error::invalid("ray needs a positive lambda component or a nonzero z_bar component"));
    }
    let limit_value = model.psi(f, &SpherePoint::south_pole(n));
    let threshold = 1e-3 * (1.0 + limit_value.abs());
    // Deviations only need resolving well below the pass threshold.
    let budget = 1e-3 * threshold;
    let samples = LIMIT_RAY_TIMES
        .iter()
        .map(|&t| Ok((t, (gamma_within(&model.consts, f, &ray.at(t), spec, budget)?.value - limit_value).abs())))
        .collect::<Result<Vec<_>>>()?;
    let floor = 1e-12 * (1.0 + limit_value.abs());
    let monotone = samples.windows(2).all(|w| w[1].1 <= w[0].1 + floor);
    let passed = monotone && samples.last().is_some_and(|s| s.1 <= threshold);
    Ok(LimitReport { ray: ray.clone(), limit_value, samples, monotone, threshold, passed })
}

/// `λ_k = 10^{-1 - 0.2k}`, `k = 0..=15`.
pub fn expansion_ladder() -> Vec<f64> {
    (0..16).map(|k| 10f64.powf(-1.0 - 0.2 * k as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFitReport {
    pub xi: SpherePoint,
    pub psi_value: f64,
    pub fitted_slope: f64,
    pub predicted_slope: f64,
    pub lambdas: Vec<f64>,
    /// RMS residual of the least-squares fit of `s(λ)` to `S + A λ log(1/λ) + B λ`.
    pub residual_of_fit: f64,
    pub least_squares_slope: f64,
    /// `s(λ) = (Γ - Ψ)/λ` on the ladder.
    pub slopes: Vec<f64>,
    /// Extrapolated limits from successive triples of the ladder.
    pub extrapolations: Vec<f64>,
    /// `|Γ - Ψ - predicted·λ| / (λ² log(1/λ) + λ^{n-1})`.
    pub remainder_ratios: Vec<f64>,
    pub slope_matches: bool,
    pub remainder_bounded: bool,
}

impl ExpansionFitReport {
    pub fn passed(&self) -> bool {
        self.slope_matches && self.remainder_bounded
    }
}

/// Solves `s = S + A g + B λ` through three points and returns `S`.
fn extrapolate_triple(l: [f64; 3], s: [f64; 3]) -> f64 {
    let g = l.map(|x| x * (1.0 / x).ln());
    let m = nalgebra::Matrix3::new(1.0, g[0], l[0], 1.0, g[1], l[1], 1.0, g[2], l[2]);
    let rhs = nalgebra::Vector3::new(s[0], s[1], s[2]);
    m.lu().solve(&rhs).map_or(f64::NAN, |v| v[0])
}

fn least_squares(lambdas: &[f64], s: &[f64]) -> (f64, f64) {
    let a = nalgebra::DMatrix::from_fn(lambdas.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => lambdas[i] * (1.0 / lambdas[i]).ln(),
        _ => lambdas[i],
    });
    let b = nalgebra::DVector::from_column_slice(s);
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&b, 1e-14).expect("SVD with both factors");
    let r = &a * &x - b;
    (x[0], (r.norm_squared() / lambdas.len() as f64).sqrt())
}

pub fn small_lambda_expansion_check(
    model: &ReducedModel,
    f: &FieldPair,
    z_bar: &[f64],
    spec: &QuadratureSpec,
) -> Result<ExpansionFitReport> {
    let n = model.consts.n;
    if z_bar.len() + 1 != n {
        return Err(Error::DimensionMismatch { expected: n - 1, got: z_bar.len() });
    }
    let xi = geometry::boundary_point_from_params(z_bar);
    let psi_value = model.psi(f, &xi);
    let predicted_slope = model.predicted_slope(f, &xi);
    let lambdas = expansion_ladder();
    let slopes = lambdas
        .iter()
        .map(|&l| Ok(gamma_slope(&model.consts, f, &BubbleParams::new(l, z_bar.to_vec())?, spec)?.value))
        .collect::<Result<Vec<f64>>>()?;
    let extrapolations: Vec<f64> = (0..lambdas.len() - 2)
        .map(|k| {
            extrapolate_triple(
                [lambdas[k], lambdas[k + 1], lambdas[k + 2]],
                [slopes[k], slopes[k + 1], slopes[k + 2]],
            )
        })
        .collect();
    let (least_squares_slope, residual_of_fit) = least_squares(&lambdas, &slopes);

    let zero_floor = 1e-6 * model.a.abs();
    let last = extrapolations[extrapolations.len() - 1];
    let previous = extrapolations[extrapolations.len() - 2];
    if !((last - previous).abs() <= (0.01 * last.abs()).max(zero_floor)) {
        return Err(Error::FitUnstable { previous, last });
    }
    let fitted_slope = last;
    let slope_matches = if predicted_slope == 0.0 {
        fitted_slope.abs() <= zero_floor
    } else {
        (fitted_slope - predicted_slope).abs() <= 0.01 * predicted_slope.abs()
    };

    let remainder_ratios: Vec<f64> = slopes
        .iter()
        .zip(&lambdas)
        .map(|(s, &l)| {
            let rate = l * (1.0 / l).ln() + l.powi(n as i32 - 2);
            (s - predicted_slope).abs() / rate
        })
        .collect();
    let remainder_bounded = ratio_variation(&remainder_ratios, zero_floor) <= 10.0;

    Ok(ExpansionFitReport {
        xi,
        psi_value,
        fitted_slope,
        predicted_slope,
        lambdas,
        residual_of_fit,
        least_squares_slope,
        slopes,
        extrapolations,
        remainder_ratios,
        slope_matches,
        remainder_bounded,
    })
}

/// `max/min` of the ratios, treating an all-negligible sequence as constant.
pub fn ratio_variation(ratios: &[f64], negligible: f64) -> f64 {
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    if max <= negligible {
        1.0
    } else if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `Γ` as a function on the closed ball through `(λ, z̄) = I^{-1}(ξ)`,
/// extended by `Ψ` on the boundary sphere and at the south pole.
pub fn gamma_on_ball(model: &ReducedModel, f: &FieldPair, xi: &BallPoint, spec: &QuadratureSpec) -> Result<f64> {
    let n = model.consts.n;
    if xi.xi.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: xi.xi.len() });
    }
    let mut south = xi.xi.clone();
    south[n - 1] += 1.0;
    if geometry::norm(&south) < SOUTH_POLE_TOL {
        return Ok(model.psi(f, &SpherePoint::south_pole(n)));
    }
    if geometry::norm(&xi.xi) >= 1.0 - 1e-14 {
        return Ok(model.psi(f, &SpherePoint::normalize(xi.xi.clone())));
    }
    let (lambda, z_bar) = geometry::params_from_ball_point(xi)?;
    Ok(gamma(&model.consts, f, &BubbleParams::new(lambda, z_bar)?, spec)?.value)
}
