//! The perturbations of the curvatures.
//!
//! `K` lives on the closed ball and `H` on the boundary sphere; both are
//! stored as functions on all of `R^n` ("ambient" fields). The default class is
//! [`AmbientPolynomial`], which has exact gradients and Hessians. Arbitrary
//! closures can be plugged in through [`FnField`], whose derivatives are
//! central finite differences.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, HalfSpacePoint, SpherePoint};

/// A smooth real function on `R^n`.
pub trait AmbientField: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        fd_gradient(|y| self.value(y), x)
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        fd_hessian(|y| self.gradient(y), x)
    }

    /// `Some(c)` when the field is known to be the constant `c`.
    fn constant_value(&self) -> Option<f64> {
        None
    }
}

impl<T: AmbientField + ?Sized> AmbientField for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (**self).gradient(x)
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        (**self).hessian(x)
    }

    fn constant_value(&self) -> Option<f64> {
        (**self).constant_value()
    }
}

fn fd_step(x: f64) -> f64 {
    1e-6 * x.abs().max(1.0)
}

pub(crate) fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = fd_step(x[i]);
            y[i] = x[i] + h;
            let fp = f(&y);
            y[i] = x[i] - h;
            let fm = f(&y);
            y[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

fn fd_hessian(grad: impl Fn(&[f64]) -> Vec<f64>, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let mut y = x.to_vec();
    let mut hess = DMatrix::zeros(n, n);
    for j in 0..n {
        let h = fd_step(x[j]);
        y[j] = x[j] + h;
        let gp = grad(&y);
        y[j] = x[j] - h;
        let gm = grad(&y);
        y[j] = x[j];
        for i in 0..n {
            hess[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    (&hess + hess.transpose()) * 0.5
}

/// One monomial record `coef * x1^a1 ... xn^an`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

impl Monomial {
    fn eval(&self, x: &[f64]) -> f64 {
        let mut v = self.coef;
        for (&p, &c) in self.powers.iter().zip(x) {
            if p > 0 {
                v *= c.powi(p as i32);
            }
        }
        v
    }

    /// `prod_j x_j^{p_j - [j = skip]}`, treating a negative power as absent.
    fn eval_lowered(&self, x: &[f64], lower: &[usize]) -> f64 {
        let mut v = self.coef;
        for (j, (&p, &c)) in self.powers.iter().zip(x).enumerate() {
            let drop = lower.iter().filter(|&&k| k == j).count() as u32;
            if drop > p {
                return 0.0;
            }
            let e = p - drop;
            if e > 0 {
                v *= c.powi(e as i32);
            }
        }
        v
    }

    pub fn degree(&self) -> u32 {
        self.powers.iter().sum()
    }
}

/// A multivariate polynomial in the ambient coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Monomial>", into = "Vec<Monomial>")]
pub struct AmbientPolynomial {
    n: usize,
    terms: Vec<Monomial>,
}

impl AmbientPolynomial {
    /// Builds a polynomial in `n` variables, merging repeated multi-indices and
    /// dropping zero coefficients.
    pub fn new(n: usize, terms: Vec<Monomial>) -> Result<Self> {
        let mut merged: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for t in terms {
            if t.powers.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: t.powers.len(),
                });
            }
            if !t.coef.is_finite() {
                return Err(Error::invalid(format!("non-finite coefficient {}", t.coef)));
            }
            *merged.entry(t.powers).or_insert(0.0) += t.coef;
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|(powers, coef)| Monomial { coef, powers })
            .collect();
        Ok(Self { n, terms })
    }

    /// Infers `n` from the records; an empty list needs [`AmbientPolynomial::zero`].
    pub fn from_monomials(terms: Vec<Monomial>) -> Result<Self> {
        let n = terms
            .first()
            .map(|t| t.powers.len())
            .ok_or_else(|| Error::invalid("cannot infer the dimension of an empty polynomial"))?;
        Self::new(n, terms)
    }

    pub fn zero(n: usize) -> Self {
        Self { n, terms: Vec::new() }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::new(n, vec![Monomial { coef: c, powers: vec![0; n] }]).expect("valid constant")
    }

    /// The coordinate function `x_k` (zero based).
    pub fn coordinate(n: usize, k: usize) -> Self {
        let mut powers = vec![0; n];
        powers[k] = 1;
        Self::new(n, vec![Monomial { coef: 1.0, powers }]).expect("valid coordinate")
    }

    /// Parses the JSON array-of-records form.
    pub fn from_json(n: usize, text: &str) -> Result<Self> {
        let terms: Vec<Monomial> =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::new(n, terms)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.terms).expect("monomials serialize")
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Monomial { coef: t.coef * s, powers: t.powers.clone() })
            .collect();
        Self::new(self.n, terms).expect("same shape")
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::new(self.n, terms)
    }
}

impl TryFrom<Vec<Monomial>> for AmbientPolynomial {
    type Error = Error;

    fn try_from(terms: Vec<Monomial>) -> Result<Self> {
        Self::from_monomials(terms)
    }
}

impl From<AmbientPolynomial> for Vec<Monomial> {
    fn from(p: AmbientPolynomial) -> Self {
        p.terms
    }
}

impl AmbientField for AmbientPolynomial {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        for t in &self.terms {
            for (i, gi) in g.iter_mut().enumerate() {
                let p = t.powers[i];
                if p > 0 {
                    *gi += p as f64 * t.eval_lowered(x, &[i]);
                }
            }
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        let mut h = DMatrix::zeros(n, n);
        for t in &self.terms {
            for i in 0..n {
                let pi = t.powers[i];
                if pi == 0 {
                    continue;
                }
                for j in i..n {
                    let pj = t.powers[j];
                    let factor = if i == j {
                        (pi * (pi - 1)) as f64
                    } else {
                        (pi * pj) as f64
                    };
                    if factor == 0.0 {
                        continue;
                    }
                    let v = factor * t.eval_lowered(x, &[i, j]);
                    h[(i, j)] += v;
                    if i != j {
                        h[(j, i)] += v;
                    }
                }
            }
        }
        h
    }

    fn constant_value(&self) -> Option<f64> {
        match self.terms.as_slice() {
            [] => Some(0.0),
            [t] if t.degree() == 0 => Some(t.coef),
            _ => None,
        }
    }
}

/// A user-supplied field; derivatives are central finite differences.
pub struct FnField<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnField<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<F> fmt::Debug for FnField<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnField").field("n", &self.n).finish_non_exhaustive()
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> AmbientField for FnField<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// `x -> inner(R^T x)` for an orthogonal matrix `R`.
#[derive(Debug, Clone)]
pub struct Rotated<F> {
    inner: F,
    rotation: DMatrix<f64>,
}

impl<F: AmbientField> Rotated<F> {
    pub fn new(inner: F, rotation: DMatrix<f64>) -> Result<Self> {
        let n = inner.dim();
        if rotation.nrows() != n || rotation.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: rotation.nrows() });
        }
        Ok(Self { inner, rotation })
    }

    fn pull(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|j| (0..n).map(|i| self.rotation[(i, j)] * x[i]).sum())
            .collect()
    }
}

impl<F: AmbientField> AmbientField for Rotated<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(&self.pull(x))
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let g = self.inner.gradient(&self.pull(x));
        let n = g.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.rotation[(i, j)] * g[j]).sum())
            .collect()
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let h = self.inner.hessian(&self.pull(x));
        &self.rotation * h * self.rotation.transpose()
    }

    fn constant_value(&self) -> Option<f64> {
        self.inner.constant_value()
    }
}

/// `sum_k c_k f_k`.
#[derive(Debug, Clone)]
pub struct LinearCombination {
    n: usize,
    parts: Vec<(f64, Arc<dyn AmbientField>)>,
}

impl LinearCombination {
    pub fn new(n: usize, parts: Vec<(f64, Arc<dyn AmbientField>)>) -> Result<Self> {
        if let Some((_, p)) = parts.iter().find(|(_, p)| p.dim() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: p.dim() });
        }
        Ok(Self { n, parts })
    }
}

impl AmbientField for LinearCombination {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.parts.iter().map(|(c, f)| c * f.value(x)).sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        for (c, f) in &self.parts {
            for (gi, v) in g.iter_mut().zip(f.gradient(x)) {
                *gi += c * v;
            }
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.n, self.n);
        for (c, f) in &self.parts {
            h += f.hessian(x) * *c;
        }
        h
    }

    fn constant_value(&self) -> Option<f64> {
        self.parts
            .iter()
            .map(|(c, f)| f.constant_value().map(|v| c * v))
            .sum()
    }
}

/// The pair `(K, H)`: `K` on the closed ball, `H` on the boundary sphere.
#[derive(Debug, Clone)]
pub struct FieldPair {
    pub k_field: Arc<dyn AmbientField>,
    pub h_field: Arc<dyn AmbientField>,
}

impl FieldPair {
    pub fn new(k_field: Arc<dyn AmbientField>, h_field: Arc<dyn AmbientField>) -> Result<Self> {
        if k_field.dim() != h_field.dim() {
            return Err(Error::DimensionMismatch {
                expected: k_field.dim(),
                got: h_field.dim(),
            });
        }
        Ok(Self { k_field, h_field })
    }

    pub fn polynomials(k: AmbientPolynomial, h: AmbientPolynomial) -> Result<Self> {
        Self::new(Arc::new(k), Arc::new(h))
    }

    pub fn constants(n: usize, k: f64, h: f64) -> Self {
        Self::polynomials(AmbientPolynomial::constant(n, k), AmbientPolynomial::constant(n, h))
            .expect("same dimension")
    }

    pub fn dim(&self) -> usize {
        self.k_field.dim()
    }

    /// Both fields composed with `x -> R^T x`.
    pub fn rotated(&self, rotation: &DMatrix<f64>) -> Result<Self> {
        Self::new(
            Arc::new(Rotated::new(self.k_field.clone(), rotation.clone())?),
            Arc::new(Rotated::new(self.h_field.clone(), rotation.clone())?),
        )
    }
}

/// `K(x) = 𝒦(I(x))` on the half-space.
pub fn eval_k_halfspace(f: &FieldPair, x: &HalfSpacePoint) -> f64 {
    let image = geometry::inversion_coords(&x.coords());
    f.k_field.value(&image)
}

/// `H(x_bar) = ℋ(I(x_bar, 0))` on the boundary hyperplane.
pub fn eval_h_boundary(f: &FieldPair, bar_x: &[f64]) -> f64 {
    let xi = geometry::boundary_point_from_params(bar_x);
    f.h_field.value(xi.as_slice())
}

/// Outer normal derivative `xi . grad 𝒦(xi)` on the unit sphere.
pub fn normal_derivative_k(f: &FieldPair, xi: &SpherePoint) -> f64 {
    geometry::dot(xi.as_slice(), &f.k_field.gradient(xi.as_slice()))
}

/// Projection of the ambient gradient onto the tangent space at `xi`.
pub fn tangential_gradient(p: &dyn AmbientField, xi: &SpherePoint) -> Vec<f64> {
    let x = xi.as_slice();
    let mut g = p.gradient(x);
    let radial = geometry::dot(x, &g);
    for (gi, c) in g.iter_mut().zip(x) {
        *gi -= radial * c;
    }
    g
}
