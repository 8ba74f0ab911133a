//! Critical points of smooth functions restricted to the unit sphere, their
//! Morse indices, and the sign conditions that turn a reduced energy into a
//! guaranteed stable critical point.
//!
//! Functions are given as ambient fields on `R^n` and restricted to
//! `S^{n-1}`. At a sphere point `ξ` with tangent basis `B` the restriction has
//! gradient `Bᵀ∇F` and Hessian `Bᵀ∇²F B - (ξ·∇F) I`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::fields::{normal_derivative_k, AmbientField, FieldPair, FnField};
use crate::geometry::{self, SpherePoint};
use crate::reduction::ReducedModel;

/// Critical points closer than this to `(0, -1)` carry a warning: the weight
/// `1 + ξ_n` vanishes there.
pub const SOUTH_POLE_WARNING_RADIUS: f64 = 1e-6;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpec {
    /// Number of Newton starts, taken from the front of the seed sequence.
    pub starts: usize,
    /// Stop when the tangential gradient is below this times the sampled gradient scale.
    pub newton_tol: f64,
    pub merge_radius: f64,
    pub max_iterations: usize,
    /// Relative eigenvalue threshold below which a critical point is degenerate.
    pub degeneracy_tol: f64,
    /// Size of the rejection grid guarding the global extrema.
    pub grid_points: usize,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self {
            starts: 64,
            newton_tol: 1e-10,
            merge_radius: 1e-6,
            max_iterations: 100,
            degeneracy_tol: 1e-8,
            grid_points: 4096,
        }
    }
}

impl SearchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.starts == 0 || self.grid_points == 0 || self.max_iterations == 0 {
            return Err(Error::invalid("search needs at least one start, grid point and iteration"));
        }
        for (name, v) in [
            ("newton_tol", self.newton_tol),
            ("merge_radius", self.merge_radius),
            ("degeneracy_tol", self.degeneracy_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Deterministic low-discrepancy points on `S^{n-1}`: a Halton point in the
/// unit cube pushed through the normal quantile and normalised.
pub fn sphere_seeds(n: usize, count: usize) -> Result<Vec<SpherePoint>> {
    if n < 2 || n > PRIMES.len() {
        return Err(Error::UnsupportedDimension { n, reason: "seed sequence supports 2 <= n <= 16" });
    }
    let normal = Normal::standard();
    Ok((1..=count as u64)
        .map(|i| {
            let v = PRIMES[..n].iter().map(|&b| normal.inverse_cdf(radical_inverse(b, i))).collect();
            SpherePoint::normalize(v)
        })
        .collect())
}

fn radical_inverse(base: u64, mut i: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let (mut value, mut scale) = (0.0, inv);
    while i > 0 {
        value += (i % base) as f64 * scale;
        i /= base;
        scale *= inv;
    }
    value
}

/// Orthonormal basis of `ξ^⊥` from the Householder reflection sending `ξ` to
/// a multiple of its largest coordinate axis.
pub fn tangent_basis(xi: &[f64]) -> DMatrix<f64> {
    let n = xi.len();
    let k = (0..n).max_by(|&i, &j| xi[i].abs().total_cmp(&xi[j].abs())).unwrap_or(0);
    let mut v = DVector::from_column_slice(xi);
    v[k] += if xi[k] >= 0.0 { 1.0 } else { -1.0 };
    let vv = v.norm_squared();
    let h = DMatrix::identity(n, n) - (&v * v.transpose()) * (2.0 / vv);
    let cols: Vec<usize> = (0..n).filter(|&j| j != k).collect();
    h.select_columns(cols.iter())
}

struct TangentModel {
    basis: DMatrix<f64>,
    gradient: DVector<f64>,
    hessian: DMatrix<f64>,
}

fn tangent_model(f: &dyn AmbientField, xi: &[f64]) -> TangentModel {
    let n = xi.len();
    let basis = tangent_basis(xi);
    let g = DVector::from_vec(f.gradient(xi));
    let radial = g.dot(&DVector::from_column_slice(xi));
    let mut hessian = basis.transpose() * f.hessian(xi) * &basis;
    for i in 0..n - 1 {
        hessian[(i, i)] -= radial;
    }
    let hessian = (&hessian + hessian.transpose()) * 0.5;
    TangentModel { gradient: basis.transpose() * g, hessian, basis }
}

fn tangential_norm(f: &dyn AmbientField, xi: &[f64]) -> f64 {
    let g = f.gradient(xi);
    let radial = geometry::dot(xi, &g);
    g.iter().zip(xi).map(|(gi, x)| (gi - radial * x).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticalKind {
    Max,
    Min,
    Saddle,
}

/// One critical point of a function on the sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub xi: SpherePoint,
    pub value: f64,
    pub grad_norm: f64,
    /// Number of negative tangential Hessian eigenvalues.
    pub morse_index: usize,
    pub nondegenerate: bool,
    pub hessian_eigenvalues: Vec<f64>,
    pub kind: CriticalKind,
    pub south_pole_warning: bool,
}

/// The discovered critical set with the data used to trust it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalSet {
    pub points: Vec<CriticalPoint>,
    pub failed_starts: usize,
    /// `Σ (-1)^index`, present when every point is nondegenerate.
    pub euler_sum: Option<i64>,
    pub euler_characteristic: i64,
    pub grid_max: f64,
    pub grid_min: f64,
}

impl CriticalSet {
    pub fn is_morse(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| p.nondegenerate)
    }

    fn value_tolerance(&self) -> f64 {
        let top = self.points.iter().map(|p| p.value.abs()).fold(0.0, f64::max);
        1e-9 * (self.grid_max - self.grid_min).max(top).max(f64::MIN_POSITIVE)
    }

    /// Indices of the points attaining the largest value.
    pub fn global_maxima(&self) -> Vec<usize> {
        let best = self.points.iter().map(|p| p.value).fold(f64::NEG_INFINITY, f64::max);
        let tol = self.value_tolerance();
        (0..self.points.len()).filter(|&i| self.points[i].value >= best - tol).collect()
    }

    pub fn global_minima(&self) -> Vec<usize> {
        let best = self.points.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
        let tol = self.value_tolerance();
        (0..self.points.len()).filter(|&i| self.points[i].value <= best + tol).collect()
    }
}

/// Projected Newton from each seed; a start fails when it exhausts its
/// iterations.
fn newton(f: &dyn AmbientField, seed: &SpherePoint, spec: &SearchSpec, tol: f64) -> Option<Vec<f64>> {
    let mut x = seed.as_slice().to_vec();
    for _ in 0..spec.max_iterations {
        let model = tangent_model(f, &x);
        if model.gradient.norm() <= tol {
            return Some(x);
        }
        let mut step = model
            .hessian
            .clone()
            .lu()
            .solve(&(-&model.gradient))
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .unwrap_or_else(|| -&model.gradient);
        let len = step.norm();
        if len > 0.5 {
            step *= 0.5 / len;
        }
        let moved = DVector::from_column_slice(&x) + &model.basis * step;
        x = SpherePoint::normalize(moved.as_slice().to_vec()).into_vec();
    }
    None
}

/// Locate the critical set of `f` restricted to `S^{n-1}` and classify it.
///
/// Fails with `IncompleteCriticalSet` when the rejection grid beats the best
/// critical value (a missed global extremum) or when a nondegenerate set
/// violates `Σ (-1)^index = χ(S^{n-1})`.
pub fn locate_critical_points(f: &dyn AmbientField, spec: &SearchSpec) -> Result<CriticalSet> {
    spec.validate()?;
    let n = f.dim();
    let grid = sphere_seeds(n, spec.grid_points.max(spec.starts))?;
    let grid_values: Vec<f64> = grid.par_iter().map(|p| f.value(p.as_slice())).collect();
    let grid_max = grid_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let grid_min = grid_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let grad_scale = grid.par_iter().map(|p| tangential_norm(f, p.as_slice())).reduce(|| 0.0, f64::max);
    let euler_characteristic = if n % 2 == 1 { 2 } else { 0 };

    let seeds = &grid[..spec.starts];
    let tol = spec.newton_tol * grad_scale;
    let runs: Vec<Option<Vec<f64>>> = if grad_scale == 0.0 {
        seeds.iter().map(|s| Some(s.as_slice().to_vec())).collect()
    } else {
        seeds.par_iter().map(|s| newton(f, s, spec, tol)).collect()
    };
    let failed_starts = runs.iter().filter(|r| r.is_none()).count();

    let mut merged: Vec<(Vec<f64>, f64)> = Vec::new();
    for x in runs.into_iter().flatten() {
        let g = tangential_norm(f, &x);
        match merged.iter_mut().find(|(y, _)| geometry::norm(&sub(y, &x)) <= spec.merge_radius) {
            Some(slot) if g < slot.1 => *slot = (x, g),
            Some(_) => {}
            None => merged.push((x, g)),
        }
    }

    let mut points: Vec<CriticalPoint> = merged
        .into_iter()
        .map(|(x, grad_norm)| classify(f, x, grad_norm, grad_scale, spec))
        .collect();
    points.sort_by(|a, b| {
        b.value.total_cmp(&a.value).then_with(|| {
            a.xi.as_slice().iter().zip(b.xi.as_slice()).fold(std::cmp::Ordering::Equal, |o, (p, q)| {
                o.then(p.total_cmp(q))
            })
        })
    });

    let all_nondegenerate = !points.is_empty() && points.iter().all(|p| p.nondegenerate);
    let euler_sum = all_nondegenerate
        .then(|| points.iter().map(|p| if p.morse_index % 2 == 0 { 1 } else { -1 }).sum::<i64>());
    let set = CriticalSet { points, failed_starts, euler_sum, euler_characteristic, grid_max, grid_min };

    if set.points.is_empty() {
        return Err(Error::IncompleteCriticalSet(format!("all {} Newton starts failed", spec.starts)));
    }
    let tol = set.value_tolerance();
    let best_max = set.points.iter().map(|p| p.value).fold(f64::NEG_INFINITY, f64::max);
    let best_min = set.points.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
    if grid_max > best_max + tol || grid_min < best_min - tol {
        return Err(Error::IncompleteCriticalSet(format!(
            "grid range [{grid_min}, {grid_max}] exceeds critical range [{best_min}, {best_max}]"
        )));
    }
    if let Some(sum) = set.euler_sum {
        if sum != euler_characteristic {
            return Err(Error::IncompleteCriticalSet(format!(
                "sum of (-1)^index over {} points is {sum}, expected {euler_characteristic}",
                set.points.len()
            )));
        }
    }
    Ok(set)
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn classify(f: &dyn AmbientField, x: Vec<f64>, grad_norm: f64, grad_scale: f64, spec: &SearchSpec) -> CriticalPoint {
    let n = x.len();
    let model = tangent_model(f, &x);
    let mut eig: Vec<f64> = SymmetricEigen::new(model.hessian).eigenvalues.iter().cloned().collect();
    eig.sort_by(f64::total_cmp);
    let radius = eig.iter().map(|e| e.abs()).fold(0.0, f64::max);
    // Relative to the larger of the local spectral radius and the sampled
    // gradient scale, so an all-noise spectrum is not mistaken for Morse.
    let threshold = spec.degeneracy_tol * radius.max(grad_scale);
    let nondegenerate = threshold > 0.0 && eig.iter().all(|e| e.abs() > threshold);
    let morse_index = eig.iter().filter(|&&e| e < -threshold).count();
    let kind = match morse_index {
        0 => CriticalKind::Min,
        i if i == n - 1 => CriticalKind::Max,
        _ => CriticalKind::Saddle,
    };
    let xi = SpherePoint::normalize(x);
    CriticalPoint {
        value: f.value(xi.as_slice()),
        south_pole_warning: xi.distance_to_south_pole() < SOUTH_POLE_WARNING_RADIUS,
        xi,
        grad_norm,
        morse_index,
        nondegenerate,
        hessian_eigenvalues: eig,
        kind,
    }
}

/// Three-way sign with a dead zone; `None` means "treated as zero".
fn sign(v: f64, zero: f64) -> Option<bool> {
    if v > zero {
        Some(true)
    } else if v < -zero {
        Some(false)
    } else {
        None
    }
}

/// Outcome of the stable-critical-point test for `f = f0 + g(t) f1 + o(g)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    /// `f1 > 0` at every global maximum of `f0`.
    pub condition1: bool,
    /// `f1 < 0` at every global minimum of `f0`.
    pub condition2: bool,
    /// `f0` Morse, `f1 ≠ 0` on the critical set, and `Σ_{f1>0} (-1)^index ≠ 1`.
    pub condition3: bool,
    /// The sum in condition 3, present only when its hypotheses hold.
    pub degree_sum: Option<i64>,
    /// Indices into `critical_set.points` of the points certifying each true condition.
    pub witnesses: Vec<usize>,
    pub conclusion: bool,
    pub critical_set: CriticalSet,
    /// `f1` at each critical point.
    pub weights: Vec<f64>,
}

fn assemble(critical_set: CriticalSet, weights: Vec<f64>, signs: Vec<Option<bool>>) -> StabilityVerdict {
    let maxima = critical_set.global_maxima();
    let minima = critical_set.global_minima();
    let condition1 = !maxima.is_empty() && maxima.iter().all(|&i| signs[i] == Some(true));
    let condition2 = !minima.is_empty() && minima.iter().all(|&i| signs[i] == Some(false));
    let hypotheses = critical_set.is_morse() && signs.iter().all(|s| s.is_some());
    let positive: Vec<usize> = (0..signs.len()).filter(|&i| signs[i] == Some(true)).collect();
    let degree_sum = hypotheses.then(|| {
        positive
            .iter()
            .map(|&i| if critical_set.points[i].morse_index.is_multiple_of(2) { 1 } else { -1 })
            .sum::<i64>()
    });
    let condition3 = degree_sum.is_some_and(|s| s != 1);

    let mut witnesses = Vec::new();
    if condition1 {
        witnesses.extend(&maxima);
    }
    if condition2 {
        witnesses.extend(&minima);
    }
    if condition3 {
        witnesses.extend(&positive);
    }
    witnesses.sort_unstable();
    witnesses.dedup();
    StabilityVerdict {
        condition1,
        condition2,
        condition3,
        degree_sum,
        witnesses,
        conclusion: condition1 || condition2 || condition3,
        critical_set,
        weights,
    }
}

/// Dead zone for the sign of `w` sampled on the critical set and the grid.
fn zero_band(field: &dyn AmbientField, set: &[f64], n: usize, spec: &SearchSpec) -> Result<f64> {
    let grid = sphere_seeds(n, spec.grid_points)?;
    let scale = grid
        .par_iter()
        .map(|p| field.value(p.as_slice()).abs())
        .reduce(|| 0.0, f64::max)
        .max(set.iter().map(|v| v.abs()).fold(0.0, f64::max));
    Ok(1e-10 * scale)
}

/// The generic test: does `f0 + g f1` have a stable critical point near the sphere?
pub fn stable_point_check(f0: &dyn AmbientField, f1: &dyn AmbientField, spec: &SearchSpec) -> Result<StabilityVerdict> {
    if f0.dim() != f1.dim() {
        return Err(Error::DimensionMismatch { expected: f0.dim(), got: f1.dim() });
    }
    let set = locate_critical_points(f0, spec)?;
    let weights: Vec<f64> = set.points.iter().map(|p| f1.value(p.xi.as_slice())).collect();
    let zero = zero_band(f1, &weights, f0.dim(), spec)?;
    let signs = weights.iter().map(|&w| sign(w, zero)).collect();
    Ok(assemble(set, weights, signs))
}

/// `ξ ↦ -c_n (1 + ξ_n) ∂_ν𝒦(ξ)`, the first-order correction of `Γ` near the sphere.
pub fn reduced_weight(model: &ReducedModel, f: &FieldPair) -> impl AmbientField {
    let (c, k) = (model.c, f.k_field.clone());
    FnField::new(f.dim(), move |x: &[f64]| {
        let radial = geometry::dot(x, &k.gradient(x));
        -c * (1.0 + x[x.len() - 1]) * radial
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointReport {
    #[serde(flatten)]
    pub point: CriticalPoint,
    pub normal_deriv_k: f64,
}

/// Critical points of `Ψ = a_n 𝒦 + b_n ℋ` on the sphere with `∂_ν𝒦` attached.
pub fn find_critical_points(
    model: &ReducedModel,
    f: &FieldPair,
    spec: &SearchSpec,
) -> Result<(CriticalSet, Vec<CriticalPointReport>)> {
    if f.dim() != model.consts.n {
        return Err(Error::DimensionMismatch { expected: model.consts.n, got: f.dim() });
    }
    let set = locate_critical_points(&model.psi_field(f), spec)?;
    let reports = set
        .points
        .iter()
        .map(|p| CriticalPointReport { point: p.clone(), normal_deriv_k: normal_derivative_k(f, &p.xi) })
        .collect();
    Ok((set, reports))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremVerdict {
    /// `∂_ν𝒦 < 0` at every global maximum of `Ψ`.
    pub condition1: bool,
    /// `∂_ν𝒦 > 0` at every global minimum of `Ψ`.
    pub condition2: bool,
    /// `Ψ` Morse, `∂_ν𝒦 ≠ 0` on the critical set, and `Σ_{∂_ν𝒦<0} (-1)^index ≠ 1`.
    pub condition3: bool,
    pub degree_sum: Option<i64>,
    pub witnesses: Vec<CriticalPointReport>,
    pub conclusion: bool,
    pub critical_points: Vec<CriticalPointReport>,
    pub failed_starts: usize,
    pub euler_sum: Option<i64>,
    /// `sign(c_n) > 0` lets the signs of `∂_ν𝒦` stand in for those of the
    /// weight; otherwise the weight is evaluated directly.
    pub via_normal_derivative: bool,
}

/// The existence conditions for the reduced energy `Γ`, derived from
/// [`stable_point_check`] with `f0 = Ψ` and `f1 = -c_n (1 + ξ_n) ∂_ν𝒦`.
pub fn theorem_check(model: &ReducedModel, f: &FieldPair, spec: &SearchSpec) -> Result<TheoremVerdict> {
    let (set, reports) = find_critical_points(model, f, spec)?;
    let n = model.consts.n;
    let via_normal_derivative = model.c > 0.0;
    let verdict = if via_normal_derivative {
        let normals: Vec<f64> = reports.iter().map(|r| r.normal_deriv_k).collect();
        let radial = FnField::new(n, |x: &[f64]| geometry::dot(x, &f.k_field.gradient(x)));
        let zero = zero_band(&radial, &normals, n, spec)?;
        let signs = normals.iter().map(|&d| sign(d, zero).map(|s| !s)).collect();
        let weights = set.points.iter().map(|p| reduced_weight(model, f).value(p.xi.as_slice())).collect();
        assemble(set, weights, signs)
    } else {
        let w = reduced_weight(model, f);
        let weights: Vec<f64> = set.points.iter().map(|p| w.value(p.xi.as_slice())).collect();
        let zero = zero_band(&w, &weights, n, spec)?;
        let signs = weights.iter().map(|&v| sign(v, zero)).collect();
        assemble(set, weights, signs)
    };
    Ok(TheoremVerdict {
        condition1: verdict.condition1,
        condition2: verdict.condition2,
        condition3: verdict.condition3,
        degree_sum: verdict.degree_sum,
        witnesses: verdict.witnesses.iter().map(|&i| reports[i].clone()).collect(),
        conclusion: verdict.conclusion,
        failed_starts: verdict.critical_set.failed_starts,
        euler_sum: verdict.critical_set.euler_sum,
        critical_points: reports,
        via_normal_derivative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::ModelConstants;
    use crate::fields::{AmbientPolynomial, Monomial};
    use crate::geometry::BallPoint;
    use crate::quadrature::QuadratureSpec;
    use crate::reduction::gamma_on_ball;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn poly(n: usize, terms: &[(f64, &[u32])]) -> AmbientPolynomial {
        AmbientPolynomial::new(n, terms.iter().map(|(c, p)| Monomial { coef: *c, powers: p.to_vec() }).collect())
            .unwrap()
    }

    fn pair(k: AmbientPolynomial) -> FieldPair {
        let n = k.dim();
        FieldPair::polynomials(k, AmbientPolynomial::zero(n)).unwrap()
    }

    fn model(n: usize, d: f64) -> ReducedModel {
        ReducedModel::closed_form(&ModelConstants::from_d(n, d).unwrap())
    }

    /// `x_1 - |x|²`: equal to `ξ_1 - 1` on the sphere with `∂_ν = ξ_1 - 2 < 0`.
    fn inward_rising(n: usize) -> AmbientPolynomial {
        let mut terms: Vec<(f64, Vec<u32>)> = vec![(1.0, unit(n, 0, 1))];
        terms.extend((0..n).map(|k| (-1.0, unit(n, k, 2))));
        AmbientPolynomial::new(n, terms.into_iter().map(|(coef, powers)| Monomial { coef, powers }).collect())
            .unwrap()
    }

    fn unit(n: usize, k: usize, p: u32) -> Vec<u32> {
        let mut v = vec![0; n];
        v[k] = p;
        v
    }

    #[test]
    fn seeds_are_deterministic_unit_and_spread() {
        let a = sphere_seeds(3, 512).unwrap();
        assert_eq!(a, sphere_seeds(3, 512).unwrap());
        for p in &a {
            assert!((geometry::norm(p.as_slice()) - 1.0).abs() < 1e-14);
        }
        let mean: Vec<f64> = (0..3).map(|k| a.iter().map(|p| p.as_slice()[k]).sum::<f64>() / 512.0).collect();
        assert!(geometry::norm(&mean) < 0.05, "{mean:?}");
        // Every octant is visited.
        for mask in 0..8 {
            assert!(a.iter().any(|p| (0..3).all(|k| (p.as_slice()[k] > 0.0) == (mask >> k & 1 == 1))));
        }
        assert!(sphere_seeds(17, 1).is_err());
    }

    proptest! {
        #[test]
        fn tangent_basis_is_orthonormal_complement(v in prop::collection::vec(-1.0f64..1.0, 2..7)) {
            prop_assume!(geometry::norm(&v) > 1e-3);
            let xi = SpherePoint::normalize(v);
            let b = tangent_basis(xi.as_slice());
            let n = xi.dim();
            let gram = b.transpose() * &b;
            prop_assert!((gram - DMatrix::<f64>::identity(n - 1, n - 1)).amax() < 1e-13);
            let normal = DVector::from_column_slice(xi.as_slice());
            prop_assert!((b.transpose() * normal).amax() < 1e-13);
        }
    }

    #[test]
    fn height_function_has_two_points() {
        for n in 3..=6 {
            let set = locate_critical_points(&AmbientPolynomial::coordinate(n, 0), &SearchSpec::default()).unwrap();
            assert_eq!(set.points.len(), 2, "n = {n}");
            let (top, bottom) = (&set.points[0], &set.points[1]);
            assert!(top.xi.distance(&SpherePoint::basis(n, 0)) < 1e-10);
            assert!(bottom.xi.distance(&SpherePoint::normalize(unit(n, 0, 1).iter().map(|&p| -(p as f64)).collect())) < 1e-10);
            assert_eq!((top.morse_index, top.kind), (n - 1, CriticalKind::Max));
            assert_eq!((bottom.morse_index, bottom.kind), (0, CriticalKind::Min));
            assert_eq!(set.euler_sum, Some(set.euler_characteristic));
            assert_eq!(set.failed_starts, 0);
        }
    }

    #[test]
    fn saddle_function_on_the_two_sphere() {
        let f = poly(3, &[(1.0, &[2, 0, 0]), (-1.0, &[0, 2, 0])]);
        let set = locate_critical_points(&f, &SearchSpec::default()).unwrap();
        assert_eq!(set.points.len(), 6);
        assert_eq!(set.euler_sum, Some(2));
        let kinds: Vec<_> = set.points.iter().map(|p| (p.kind, p.value.round() as i64)).collect();
        assert_eq!(kinds.iter().filter(|k| **k == (CriticalKind::Max, 1)).count(), 2);
        assert_eq!(kinds.iter().filter(|k| **k == (CriticalKind::Saddle, 0)).count(), 2);
        assert_eq!(kinds.iter().filter(|k| **k == (CriticalKind::Min, -1)).count(), 2);
        for p in set.points.iter().filter(|p| p.kind == CriticalKind::Saddle) {
            assert!(p.xi.as_slice()[2].abs() > 1.0 - 1e-12);
        }
        // Dense-grid oracle for the extreme values.
        let grid = sphere_seeds(3, 20000).unwrap();
        let best = grid.iter().map(|p| f.value(p.as_slice())).fold(f64::NEG_INFINITY, f64::max);
        assert!(best <= set.points[0].value + 1e-12 && best > 0.99);
    }

    #[test]
    fn constant_function_is_degenerate_everywhere() {
        let spec = SearchSpec { starts: 16, ..SearchSpec::default() };
        let set = locate_critical_points(&AmbientPolynomial::constant(3, 2.0), &spec).unwrap();
        assert_eq!(set.points.len(), 16);
        assert!(set.points.iter().all(|p| !p.nondegenerate));
        assert_eq!(set.euler_sum, None);
        let v = stable_point_check(&AmbientPolynomial::constant(3, 2.0), &AmbientPolynomial::constant(3, 1.0), &spec)
            .unwrap();
        assert!(!v.condition3 && v.degree_sum.is_none());
    }

    #[test]
    fn scaling_changes_only_values() {
        let f = poly(3, &[(1.0, &[2, 0, 0]), (-0.5, &[0, 2, 0]), (0.3, &[0, 0, 1])]);
        let a = locate_critical_points(&f, &SearchSpec::default()).unwrap();
        let b = locate_critical_points(&f.scaled(7.5), &SearchSpec::default()).unwrap();
        assert_eq!(a.points.len(), b.points.len());
        for p in &a.points {
            let q = b.points.iter().find(|q| p.xi.distance(&q.xi) < 1e-9).expect("same point");
            assert_eq!((p.morse_index, p.kind, p.nondegenerate), (q.morse_index, q.kind, q.nondegenerate));
            assert!((7.5 * p.value - q.value).abs() < 1e-12 * q.value.abs().max(1.0));
        }
    }

    #[test]
    fn rotation_maps_the_critical_set() {
        let n = 3;
        let f = pair(poly(n, &[(1.0, &[2, 0, 0]), (-1.0, &[0, 2, 0]), (0.4, &[1, 0, 0])]));
        let (s, c) = (0.7f64.sin(), 0.7f64.cos());
        let r = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0])
            * DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c]);
        let m = model(n, 0.5);
        let spec = SearchSpec::default();
        let (a, _) = find_critical_points(&m, &f, &spec).unwrap();
        let (b, _) = find_critical_points(&m, &f.rotated(&r).unwrap(), &spec).unwrap();
        assert_eq!(a.points.len(), b.points.len());
        for p in &a.points {
            let image = SpherePoint::normalize((&r * DVector::from_column_slice(p.xi.as_slice())).as_slice().to_vec());
            let q = b.points.iter().find(|q| q.xi.distance(&image) < spec.merge_radius).expect("rotated point");
            assert_eq!((p.morse_index, p.nondegenerate), (q.morse_index, q.nondegenerate));
        }
        assert_eq!(theorem_check(&m, &f, &spec).unwrap().conclusion, theorem_check(&m, &f.rotated(&r).unwrap(), &spec).unwrap().conclusion);
    }

    #[test]
    fn stable_point_examples() {
        let spec = SearchSpec::default();
        let f0 = AmbientPolynomial::coordinate(3, 0);
        let one = AmbientPolynomial::constant(3, 1.0);
        let v = stable_point_check(&f0, &one, &spec).unwrap();
        assert!(v.condition1 && !v.condition2 && v.conclusion);
        let v = stable_point_check(&f0, &one.scaled(-1.0), &spec).unwrap();
        assert!(!v.condition1 && v.condition2);
        let v = stable_point_check(&f0, &f0, &spec).unwrap();
        assert!(v.condition1);
        assert_eq!(v.degree_sum, Some(1));
        assert!(!v.condition3);
    }

    #[test]
    fn linear_curvature_has_no_inward_maximum() {
        // With 𝒦 = x_1 the normal derivative equals 𝒦 on the sphere, so at the
        // maximum of Ψ it is positive and Γ decreases into the ball.
        let n = 3;
        let m = model(n, 0.5);
        let f = pair(AmbientPolynomial::coordinate(n, 0));
        let v = theorem_check(&m, &f, &SearchSpec::default()).unwrap();
        assert!(!v.condition1 && !v.condition2 && !v.condition3 && !v.conclusion);
        let top = m.psi(&f, &SpherePoint::basis(n, 0));
        let inside = gamma_on_ball(&m, &f, &BallPoint::new(vec![0.99, 0.0, 0.0]).unwrap(), &QuadratureSpec::default())
            .unwrap();
        assert!(inside < top, "{inside} vs {top}");
    }

    #[test]
    fn inward_rising_curvature_satisfies_condition_one() {
        let n = 3;
        let m = model(n, 0.5);
        let k = inward_rising(n);
        let v = theorem_check(&m, &pair(k.clone()), &SearchSpec::default()).unwrap();
        assert!(v.condition1 && !v.condition2 && v.conclusion);
        // ∂_ν𝒦 < 0 on the whole sphere, so both critical points enter the sum.
        assert_eq!(v.degree_sum, Some(2));
        assert!(v.condition3);
        assert!(v.witnesses.iter().all(|w| w.normal_deriv_k < 0.0));
        let v = theorem_check(&m, &pair(k.scaled(-1.0)), &SearchSpec::default()).unwrap();
        assert!(!v.condition1 && v.condition2);
    }

    #[test]
    fn boundary_field_alone_gives_no_verdict() {
        let n = 3;
        let f = FieldPair::polynomials(AmbientPolynomial::zero(n), AmbientPolynomial::coordinate(n, 0)).unwrap();
        let v = theorem_check(&model(n, 0.5), &f, &SearchSpec::default()).unwrap();
        assert!(!v.condition1 && !v.condition2 && !v.condition3 && !v.conclusion);
        assert!(v.critical_points.iter().all(|p| p.normal_deriv_k == 0.0));
    }

    #[test]
    fn search_is_deterministic() {
        let m = model(4, 0.0);
        let f = pair(poly(4, &[(1.0, &[1, 1, 0, 0]), (0.5, &[0, 0, 2, 0]), (-0.2, &[0, 0, 0, 1])]));
        let a = theorem_check(&m, &f, &SearchSpec::default()).unwrap();
        let b = theorem_check(&m, &f, &SearchSpec::default()).unwrap();
        assert_eq!(a, b);
    }
}
