//! The bubble family on the half-space, its parameter derivatives, and the
//! pointwise residuals of the limit problem and its linearization.
//!
//! With `d = (x̄ - z̄, x_n + λD)` and `Q = λ² + |d|²`,
//!
//! ```text
//! U_{λ,z̄}(x) = Λ^{(n-2)/4} λ^{(n-2)/2} Q^{-(n-2)/2},     P_{λ,z̄} = Λ (λ/Q)²,
//! ```
//!
//! so `U = P^{(n-2)/4}`. Every derivative used here is a combination of terms
//! `Q^{-p}` and `d_k Q^{-p}`, whose gradients and Laplacians are closed forms.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::FieldPair;
use crate::geometry::{self, HalfSpacePoint};
use crate::quadrature::{self, IntegralResult, QuadratureSpec, RadialLayout};

/// Dimension-dependent constants of the model problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub n: usize,
    pub k0: f64,
    pub h0: f64,
    /// `√(n(n-1)) H0 / √K0`.
    pub d: f64,
    /// `4n(n-1)`.
    pub lambda_n: f64,
    /// `(n-2)² / (8n(n-1))`.
    pub alpha_n: f64,
    /// `2√(n/(n-1))`.
    pub beta_n: f64,
}

impl ModelConstants {
    pub fn new(n: usize, k0: f64, h0: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::UnsupportedDimension { n, reason: "the model needs n >= 3" });
        }
        if !(k0 > 0.0 && k0.is_finite()) {
            return Err(Error::invalid(format!("K0 must be positive, got {k0}")));
        }
        if !h0.is_finite() {
            return Err(Error::invalid(format!("H0 must be finite, got {h0}")));
        }
        let nf = n as f64;
        let nn1 = nf * (nf - 1.0);
        Ok(Self {
            n,
            k0,
            h0,
            d: nn1.sqrt() * h0 / k0.sqrt(),
            lambda_n: 4.0 * nn1,
            alpha_n: (nf - 2.0).powi(2) / (8.0 * nn1),
            beta_n: 2.0 * (nf / (nf - 1.0)).sqrt(),
        })
    }

    /// Constants with `K0 = 1` and `H0` chosen so that `D = d`.
    pub fn from_d(n: usize, d: f64) -> Result<Self> {
        let nf = n as f64;
        let mut c = Self::new(n, 1.0, d / (nf * (nf - 1.0)).sqrt())?;
        c.d = d;
        Ok(c)
    }

    /// `H0 / √K0`, the boundary coefficient of the limit problem.
    pub fn boundary_coefficient(&self) -> f64 {
        self.d / self.nn1().sqrt()
    }

    fn nn1(&self) -> f64 {
        let nf = self.n as f64;
        nf * (nf - 1.0)
    }

    /// `2* = 2n/(n-2)`.
    pub fn sobolev_exponent(&self) -> f64 {
        let nf = self.n as f64;
        2.0 * nf / (nf - 2.0)
    }

    /// `2♯ = 2(n-1)/(n-2)`.
    pub fn trace_exponent(&self) -> f64 {
        let nf = self.n as f64;
        2.0 * (nf - 1.0) / (nf - 2.0)
    }

    /// Coefficient of `(u⁺)^{(n+2)/(n-2)}` in `ℱ`.
    pub fn interior_source_coefficient(&self) -> f64 {
        let nf = self.n as f64;
        (nf - 2.0) / (4.0 * (nf - 1.0))
    }

    /// Coefficient of `(u⁺)^{n/(n-2)}` in `𝒢`.
    pub fn boundary_source_coefficient(&self) -> f64 {
        let nf = self.n as f64;
        (nf - 2.0) * self.d / (2.0 * self.nn1().sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleParams {
    pub lambda: f64,
    pub z_bar: Vec<f64>,
}

impl BubbleParams {
    pub fn new(lambda: f64, z_bar: Vec<f64>) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
        }
        if z_bar.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("z_bar must be finite"));
        }
        Ok(Self { lambda, z_bar })
    }

    /// `λ = 1`, `z̄ = 0`.
    pub fn standard(n: usize) -> Self {
        Self { lambda: 1.0, z_bar: vec![0.0; n - 1] }
    }

    fn check(&self, c: &ModelConstants) {
        assert_eq!(self.z_bar.len(), c.n - 1, "z_bar must have n - 1 entries");
    }
}

/// `{1/κ ≤ λ ≤ κ, |z̄| ≤ κ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationBox {
    pub kappa: f64,
}

impl ConcentrationBox {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa >= 1.0 && kappa.is_finite()) {
            return Err(Error::invalid(format!("kappa must be at least 1, got {kappa}")));
        }
        Ok(Self { kappa })
    }

    pub fn contains(&self, p: &BubbleParams) -> bool {
        let k = self.kappa * (1.0 + 1e-12);
        p.lambda * k >= 1.0 && p.lambda <= k && geometry::norm(&p.z_bar) <= k
    }

    /// `res × res` parameters: `λ` log-spaced over `[1/κ, κ]` and `z̄` evenly
    /// spaced over the diameter `[-κ, κ]·(1, …, 1)/√(n-1)`.
    pub fn grid(&self, n: usize, res: usize) -> Vec<BubbleParams> {
        let at = |j: usize| if res == 1 { 0.5 } else { j as f64 / (res - 1) as f64 };
        let unit = 1.0 / ((n - 1) as f64).sqrt();
        let mut out = Vec::with_capacity(res * res);
        for i in 0..res {
            let lambda = self.kappa.powf(2.0 * at(i) - 1.0);
            for j in 0..res {
                let s = self.kappa * (2.0 * at(j) - 1.0) * unit;
                out.push(BubbleParams { lambda, z_bar: vec![s; n - 1] });
            }
        }
        out
    }
}

/// Value, gradient and Laplacian of a function at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub laplacian: f64,
}

impl Jet {
    fn zero(n: usize) -> Self {
        Self { value: 0.0, gradient: vec![0.0; n], laplacian: 0.0 }
    }

    fn scaled(mut self, s: f64) -> Jet {
        self.value *= s;
        self.gradient.iter_mut().for_each(|g| *g *= s);
        self.laplacian *= s;
        self
    }

    fn axpy(&mut self, s: f64, other: &Jet) {
        self.value += s * other.value;
        for (g, o) in self.gradient.iter_mut().zip(&other.gradient) {
            *g += s * o;
        }
        self.laplacian += s * other.laplacian;
    }

    /// `Σ c_k J_k`.
    pub fn combination(parts: &[(f64, &Jet)]) -> Jet {
        let n = parts.first().map_or(0, |(_, j)| j.gradient.len());
        let mut acc = Jet::zero(n);
        for (c, j) in parts {
            acc.axpy(*c, j);
        }
        acc
    }
}

/// Offset `d` and `Q` at one point.
struct Frame {
    d: Vec<f64>,
    d2: f64,
    q: f64,
    lambda2: f64,
}

impl Frame {
    /// `Q^{-p}`.
    fn t0(&self, p: f64) -> Jet {
        let n = self.d.len() as f64;
        let qp = self.q.powf(-p);
        let q1 = qp / self.q;
        Jet {
            value: qp,
            gradient: self.d.iter().map(|dj| -2.0 * p * dj * q1).collect(),
            laplacian: -2.0 * p * q1 / self.q * (n * self.lambda2 + (n - 2.0 * p - 2.0) * self.d2),
        }
    }

    /// `d_k Q^{-p}`.
    fn t1(&self, p: f64, k: usize) -> Jet {
        let n = self.d.len() as f64;
        let qp = self.q.powf(-p);
        let q1 = qp / self.q;
        let dk = self.d[k];
        let mut gradient: Vec<f64> = self.d.iter().map(|dj| -2.0 * p * dk * dj * q1).collect();
        gradient[k] += qp;
        Jet {
            value: dk * qp,
            gradient,
            laplacian: -2.0 * p * dk * q1 / self.q * ((n + 2.0) * self.lambda2 + (n - 2.0 * p) * self.d2),
        }
    }
}

/// A single bubble `U_{λ,z̄}` with its constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Bubble {
    consts: ModelConstants,
    lambda: f64,
    z_bar: Vec<f64>,
    /// `Λ^{(n-2)/4} λ^{(n-2)/2}`.
    amplitude: f64,
    m: f64,
}

impl Bubble {
    pub fn new(c: &ModelConstants, p: &BubbleParams) -> Self {
        p.check(c);
        let m = (c.n as f64 - 2.0) / 2.0;
        Self {
            consts: *c,
            lambda: p.lambda,
            z_bar: p.z_bar.clone(),
            amplitude: c.lambda_n.powf(m / 2.0) * p.lambda.powf(m),
            m,
        }
    }

    pub fn n(&self) -> usize {
        self.consts.n
    }

    fn frame(&self, x: &[f64]) -> Frame {
        let n = self.n();
        debug_assert_eq!(x.len(), n);
        let mut d: Vec<f64> = x[..n - 1].iter().zip(&self.z_bar).map(|(a, b)| a - b).collect();
        d.push(x[n - 1] + self.lambda * self.consts.d);
        let d2 = d.iter().map(|v| v * v).sum::<f64>();
        let lambda2 = self.lambda * self.lambda;
        Frame { d, d2, q: lambda2 + d2, lambda2 }
    }

    fn q(&self, x: &[f64]) -> f64 {
        let n = self.n();
        let mut q = self.lambda * self.lambda;
        for (a, b) in x[..n - 1].iter().zip(&self.z_bar) {
            q += (a - b) * (a - b);
        }
        let t = x[n - 1] + self.lambda * self.consts.d;
        q + t * t
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.amplitude * self.q(x).powf(-self.m)
    }

    pub fn p_value(&self, x: &[f64]) -> f64 {
        let r = self.lambda / self.q(x);
        self.consts.lambda_n * r * r
    }

    pub fn jet(&self, x: &[f64]) -> Jet {
        self.frame(x).t0(self.m).scaled(self.amplitude)
    }

    /// `|∇U|²`, without building the full jet.
    pub fn gradient_norm_sq(&self, x: &[f64]) -> f64 {
        let q = self.q(x);
        let d2 = q - self.lambda * self.lambda;
        let u = self.amplitude * q.powf(-self.m);
        let s = 2.0 * self.m * u / q;
        s * s * d2
    }

    /// Jet of `𝒵ⁱ` for `i` in `1..=n`: `∂U/∂z̄_i` for `i < n`, `∂U/∂λ` for `i = n`.
    ///
    /// Panics when `i` is out of range.
    pub fn kernel_jet(&self, i: usize, x: &[f64]) -> Jet {
        let n = self.n();
        assert!((1..=n).contains(&i), "kernel index must lie in 1..={n}, got {i}");
        let f = self.frame(x);
        let m = self.m;
        let c = self.consts.lambda_n.powf(m / 2.0);
        let lam = self.lambda;
        if i < n {
            f.t1(m + 1.0, i - 1).scaled(2.0 * m * self.amplitude)
        } else {
            let mut j = Jet::zero(n);
            j.axpy(m * c * lam.powf(m - 1.0), &f.t0(m));
            j.axpy(-2.0 * m * c * lam.powf(m + 1.0), &f.t0(m + 1.0));
            if self.consts.d != 0.0 {
                j.axpy(-2.0 * m * c * lam.powf(m) * self.consts.d, &f.t1(m + 1.0, n - 1));
            }
            j
        }
    }

    pub fn kernel(&self, i: usize, x: &[f64]) -> f64 {
        self.kernel_jet(i, x).value
    }

    /// Residuals of the limit problem at `x`.
    pub fn residual(&self, x: &[f64]) -> Residual {
        let c = &self.consts;
        let nf = c.n as f64;
        let j = self.jet(x);
        let u = j.value.max(0.0);
        let lhs = -(4.0 * (nf - 1.0) / (nf - 2.0)) * j.laplacian;
        let source = u.powf((nf + 2.0) / (nf - 2.0));
        let interior = lhs - source;
        let interior_scale = lhs.abs().max(source);
        let boundary = (x[c.n - 1] == 0.0).then(|| {
            let lhs = -(2.0 / (nf - 2.0)) * j.gradient[c.n - 1];
            let source = c.boundary_coefficient() * u.powf(nf / (nf - 2.0));
            let scale = lhs.abs().max(source.abs()).max(u.powf(nf / (nf - 2.0)));
            (lhs - source, scale)
        });
        Residual { interior, interior_scale, boundary }
    }

    /// Residuals of the linearized problem at `x` for a function with jet `psi`.
    pub fn linearized_residual(&self, psi: &Jet, x: &[f64]) -> Residual {
        let c = &self.consts;
        let nf = c.n as f64;
        let u = self.value(x).max(0.0);
        let lhs = -(4.0 * (nf - 1.0) / (nf - 2.0)) * psi.laplacian;
        let rhs = (nf + 2.0) / (nf - 2.0) * u.powf(4.0 / (nf - 2.0)) * psi.value;
        let floor = u.powf((nf + 2.0) / (nf - 2.0)) / self.lambda;
        let interior_scale = lhs.abs().max(rhs.abs()).max(floor);
        let boundary = (x[c.n - 1] == 0.0).then(|| {
            let lhs = -(2.0 / (nf - 2.0)) * psi.gradient[c.n - 1];
            let rhs = c.boundary_coefficient() * nf / (nf - 2.0) * u.powf(2.0 / (nf - 2.0)) * psi.value;
            let floor = u.powf(nf / (nf - 2.0)) / self.lambda;
            (lhs - rhs, lhs.abs().max(rhs.abs()).max(floor))
        });
        Residual { interior: lhs - rhs, interior_scale, boundary }
    }

    /// Quadrature layout matched to this bubble's decay length, rounded to a
    /// power of two in `λ` so that different `λ` see genuinely different nodes.
    pub fn layout(&self) -> RadialLayout {
        let octave = self.lambda.log2().round();
        RadialLayout::with_scale(2f64.powf(octave) * (1.0 + self.consts.d * self.consts.d).sqrt())
    }

    /// [`Bubble::layout`] graded also toward the scale `1 + |z̄|` on which
    /// pulled-back fields vary in translated coordinates.
    pub fn field_layout(&self) -> RadialLayout {
        let mut layout = self.layout();
        let field_scale = 1.0 + geometry::norm(&self.z_bar);
        layout.core_radius = (field_scale < 0.25 * layout.scale).then_some(field_scale);
        layout.outer_radius = (field_scale > 4.0 * layout.scale).then_some(field_scale);
        layout
    }

    /// Maps translated coordinates `x - (z̄, 0)` back to `x`.
    pub(crate) fn untranslate_into(&self, y: &[f64], out: &mut [f64]) {
        let n = self.n();
        for k in 0..n - 1 {
            out[k] = y[k] + self.z_bar[k];
        }
        out[n - 1] = y[n - 1];
    }

    /// Same bubble centred at `z̄ = 0`.
    pub(crate) fn centred(&self) -> Bubble {
        Bubble { z_bar: vec![0.0; self.z_bar.len()], ..self.clone() }
    }
}

/// A pointwise residual with the magnitude it should be compared against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub interior: f64,
    pub interior_scale: f64,
    /// `(residual, scale)`; present only on the boundary `x_n = 0`.
    pub boundary: Option<(f64, f64)>,
}

impl Residual {
    pub fn relative_interior(&self) -> f64 {
        rel(self.interior, self.interior_scale)
    }

    pub fn relative_boundary(&self) -> Option<f64> {
        self.boundary.map(|(r, s)| rel(r, s))
    }

    pub fn max_relative(&self) -> f64 {
        self.relative_interior().max(self.relative_boundary().unwrap_or(0.0))
    }
}

fn rel(r: f64, s: f64) -> f64 {
    if s == 0.0 {
        r.abs()
    } else {
        r.abs() / s
    }
}

pub fn bubble_value(c: &ModelConstants, p: &BubbleParams, x: &HalfSpacePoint) -> f64 {
    Bubble::new(c, p).value(&x.coords())
}

pub fn bubble_p(c: &ModelConstants, p: &BubbleParams, x: &HalfSpacePoint) -> f64 {
    Bubble::new(c, p).p_value(&x.coords())
}

/// `𝒵ⁱ_{λ,z̄}(x)` for `i` in `1..=n`.
pub fn kernel_z(c: &ModelConstants, p: &BubbleParams, i: usize, x: &HalfSpacePoint) -> f64 {
    Bubble::new(c, p).kernel(i, &x.coords())
}

pub fn residual_unperturbed(c: &ModelConstants, p: &BubbleParams, x: &HalfSpacePoint) -> Residual {
    Bubble::new(c, p).residual(&x.coords())
}

pub fn residual_linearized(c: &ModelConstants, p: &BubbleParams, i: usize, x: &HalfSpacePoint) -> Residual {
    let b = Bubble::new(c, p);
    let xs = x.coords();
    b.linearized_residual(&b.kernel_jet(i, &xs), &xs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTermNorms {
    pub norm_in: f64,
    pub norm_bd: f64,
    pub interior_quadrature: IntegralResult,
    pub boundary_quadrature: IntegralResult,
}

/// `‖ε K ℱ(U)‖` in `L^{2n/(n+2)}(R^n_+)` and `‖ε H 𝒢(U)‖` in `L^{2(n-1)/n}(R^{n-1})`.
pub fn error_term_norms(
    c: &ModelConstants,
    p: &BubbleParams,
    f: &FieldPair,
    eps: f64,
    spec: &QuadratureSpec,
) -> Result<ErrorTermNorms> {
    if !(eps >= 0.0) {
        return Err(Error::invalid(format!("eps must be non-negative, got {eps}")));
    }
    if f.dim() != c.n {
        return Err(Error::DimensionMismatch { expected: c.n, got: f.dim() });
    }
    let n = c.n;
    let nf = n as f64;
    let b = Bubble::new(c, p);
    let centred = b.centred();
    let layout = b.field_layout();
    let q_in = 2.0 * nf / (nf + 2.0);
    let q_bd = 2.0 * (nf - 1.0) / nf;
    let two_star = c.sobolev_exponent();
    let two_sharp = c.trace_exponent();

    let interior = match f.k_field.constant_value() {
        Some(k) => quadrature::integrate_profile_halfspace(
            n,
            |r, t| {
                let mut y = vec![0.0; n];
                y[0] = r;
                y[n - 1] = t;
                k.abs().powf(q_in) * centred.value(&y).powf(two_star)
            },
            spec,
            &layout,
        )?,
        None => quadrature::integrate_halfspace_with(
            n,
            |y| {
                let mut x = [0.0; 16];
                let mut img = [0.0; 16];
                b.untranslate_into(y, &mut x[..n]);
                geometry::inversion_into(&x[..n], &mut img[..n]);
                f.k_field.value(&img[..n]).abs().powf(q_in) * centred.value(y).powf(two_star)
            },
            spec,
            &layout,
        )?,
    };

    let boundary_coef = c.boundary_source_coefficient();
    let boundary = if boundary_coef == 0.0 {
        IntegralResult::exact(0.0)
    } else {
        match f.h_field.constant_value() {
            Some(h) => quadrature::integrate_profile_boundary(
                n,
                |r| {
                    let mut y = vec![0.0; n];
                    y[0] = r;
                    h.abs().powf(q_bd) * centred.value(&y).powf(two_sharp)
                },
                spec,
                &layout,
            )?,
            None => quadrature::integrate_boundary_with(
                n,
                |ybar| {
                    let mut y = [0.0; 16];
                    y[..n - 1].copy_from_slice(ybar);
                    let mut x = [0.0; 16];
                    b.untranslate_into(&y[..n], &mut x[..n]);
                    let xi = geometry::boundary_point_from_params(&x[..n - 1]);
                    f.h_field.value(xi.as_slice()).abs().powf(q_bd) * centred.value(&y[..n]).powf(two_sharp)
                },
                spec,
                &layout,
            )?,
        }
    };

    Ok(ErrorTermNorms {
        norm_in: eps * c.interior_source_coefficient() * interior.value.powf(1.0 / q_in),
        norm_bd: eps * boundary_coef.abs() * boundary.value.powf(1.0 / q_bd),
        interior_quadrature: interior,
        boundary_quadrature: boundary,
    })
}

/// `G_ij = ∫_{R^n_+} ∇𝒵ⁱ · ∇𝒵ʲ`.
pub fn gram_matrix(c: &ModelConstants, p: &BubbleParams, spec: &QuadratureSpec) -> Result<DMatrix<f64>> {
    let n = c.n;
    let b = Bubble::new(c, p).centred();
    let layout = Bubble::new(c, p).layout();
    let mut g = DMatrix::zeros(n, n);
    for i in 1..=n {
        for j in i..=n {
            let r = quadrature::integrate_halfspace_with(
                n,
                |y| {
                    let zi = b.kernel_jet(i, y);
                    if i == j {
                        zi.gradient.iter().map(|v| v * v).sum()
                    } else {
                        let zj = b.kernel_jet(j, y);
                        geometry::dot(&zi.gradient, &zj.gradient)
                    }
                },
                spec,
                &layout,
            )?;
            g[(i - 1, j - 1)] = r.value;
            g[(j - 1, i - 1)] = r.value;
        }
    }
    Ok(g)
}

/// `∫_{R^n_+} w 𝒵ʲ`, with `w` given in coordinates translated by `(z̄, 0)`.
pub fn orthogonality_functional<W>(
    c: &ModelConstants,
    p: &BubbleParams,
    weight: W,
    j: usize,
    spec: &QuadratureSpec,
) -> Result<IntegralResult>
where
    W: Fn(&[f64]) -> f64 + Sync,
{
    let b = Bubble::new(c, p);
    let layout = b.layout();
    let b = b.centred();
    quadrature::integrate_halfspace_with(c.n, |y| weight(y) * b.kernel(j, y), spec, &layout)
}
