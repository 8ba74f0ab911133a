//! Closed forms and cubature for the model constants `a_n`, `b_n`, `c_n`.
//!
//! With `w(y) = (|ȳ|² + (y_n + D)² + 1)^{-n}`:
//!
//! * `a_n = Λ^{n/2} ∫_{R^n_+} w`
//! * `c_n = Λ^{n/2} ∫_{R^n_+} y_n w`
//! * `b_n = Λ^{(n-1)/2} β_n D (D² + 1)^{-(n-1)/2} ∫_{R^{n-1}} (|ȳ|² + 1)^{-(n-1)}`
//!
//! The closed forms integrate `|ȳ|` out with a Beta function and reduce the
//! remaining `y_n` integral to `∫_φ^{π/2} cos^m θ dθ`, `φ = atan D`.

use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use super::{integrate_profile_boundary, integrate_profile_halfspace, IntegralResult, QuadratureSpec, RadialLayout};
use crate::bubble::ModelConstants;
use crate::error::{Error, Result};

/// Surface area of the unit sphere `S^m ⊂ R^{m+1}`.
pub fn sphere_area(m: usize) -> f64 {
    let h = (m as f64 + 1.0) / 2.0;
    2.0 * (h * std::f64::consts::PI.ln() - ln_gamma(h)).exp()
}

/// `∫_0^∞ r^m (1 + r²)^{-p} dr = B((m+1)/2, p - (m+1)/2) / 2`.
pub fn radial_moment(m: u32, p: f64) -> Result<f64> {
    let a = (m as f64 + 1.0) / 2.0;
    if !(p > a) {
        return Err(Error::DivergentMoment { m, p });
    }
    Ok(0.5 * ln_beta(a, p - a).exp())
}

/// `∫_φ^{π/2} cos^m θ dθ` by the reduction formula.
fn cos_power_tail(m: usize, phi: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    let (mut acc, mut k) = if m.is_multiple_of(2) {
        (std::f64::consts::FRAC_PI_2 - phi, 0)
    } else {
        (1.0 - s, 1)
    };
    while k + 2 <= m {
        k += 2;
        let kf = k as f64;
        acc = -c.powi(k as i32 - 1) * s / kf + (kf - 1.0) / kf * acc;
    }
    acc
}

fn interior_common(n: usize) -> f64 {
    let nf = n as f64;
    sphere_area(n - 2) * 0.5 * ln_beta((nf - 1.0) / 2.0, (nf + 1.0) / 2.0).exp()
}

pub fn closed_form_a(c: &ModelConstants) -> f64 {
    let n = c.n;
    c.lambda_n.powf(n as f64 / 2.0) * interior_common(n) * cos_power_tail(n - 1, c.d.atan())
}

pub fn closed_form_c(c: &ModelConstants) -> f64 {
    let n = c.n;
    let nf = n as f64;
    let d = c.d;
    let tail = (1.0 + d * d).powf(-(nf - 1.0) / 2.0) / (nf - 1.0) - d * cos_power_tail(n - 1, d.atan());
    c.lambda_n.powf(nf / 2.0) * interior_common(n) * tail
}

pub fn closed_form_b(c: &ModelConstants) -> f64 {
    if c.d == 0.0 {
        return 0.0;
    }
    let nf = c.n as f64;
    let h = (nf - 1.0) / 2.0;
    c.lambda_n.powf(h) * c.beta_n * c.d * (c.d * c.d + 1.0).powf(-h) * sphere_area(c.n - 2) * 0.5 * ln_beta(h, h).exp()
}

fn layout(c: &ModelConstants) -> RadialLayout {
    RadialLayout::with_scale((1.0 + c.d * c.d).sqrt())
}

fn interior_weight(c: &ModelConstants) -> impl Fn(f64, f64) -> f64 + Sync {
    let (n, d) = (c.n as i32, c.d);
    move |r, t| (r * r + (t + d) * (t + d) + 1.0).powi(-n)
}

pub fn constant_a(c: &ModelConstants, spec: &QuadratureSpec) -> Result<IntegralResult> {
    let w = interior_weight(c);
    let scale = c.lambda_n.powf(c.n as f64 / 2.0);
    let r = integrate_profile_halfspace(c.n, w, spec, &layout(c))?;
    Ok(r.combine(scale, &IntegralResult::exact(0.0), 0.0))
}

pub fn constant_c(c: &ModelConstants, spec: &QuadratureSpec) -> Result<IntegralResult> {
    let w = interior_weight(c);
    let scale = c.lambda_n.powf(c.n as f64 / 2.0);
    let r = integrate_profile_halfspace(c.n, |r, t| t * w(r, t), spec, &layout(c))?;
    Ok(r.combine(scale, &IntegralResult::exact(0.0), 0.0))
}

/// `b_n`; exactly zero when `D = 0`.
pub fn constant_b(c: &ModelConstants, spec: &QuadratureSpec) -> Result<IntegralResult> {
    if c.d == 0.0 {
        return Ok(IntegralResult::exact(0.0));
    }
    let nf = c.n as f64;
    let h = (nf - 1.0) / 2.0;
    let prefactor = c.lambda_n.powf(h) * c.beta_n * c.d * (c.d * c.d + 1.0).powf(-h);
    let m = c.n as i32 - 1;
    let r = integrate_profile_boundary(c.n, |r| (r * r + 1.0).powi(-m), spec, &RadialLayout::default())?;
    Ok(r.combine(prefactor, &IntegralResult::exact(0.0), 0.0))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    /// `(n, D, a_n, b_n, c_n)` evaluated with mpmath at 30 digits by direct
    /// two-dimensional quadrature of the defining integrals.
    #[allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping)]
    pub(crate) const GOLDEN: [(usize, f64, f64, f64, f64); 12] = [
        (3, 0.0, 145.052_968_474_776_57, 0.0, 92.343_587_771_654_21),
        (3, 0.5, 65.300_649_689_231_33, 73.874_870_217_323_37, 41.224_545_372_707_7),
        (3, 2.0, 5.877_448_568_221_868, 73.874_870_217_323_37, 6.713_820_417_887_106),
        (4, 0.0, 1894.964_045_009_156_9, 0.0, 947.482_022_504_578_4),
        (4, 0.5, 708.528_887_532_792, 677.962_947_129_351_3, 323.698_503_362_955_3),
        (4, 2.0, 30.565_940_403_440_694, 338.981_473_564_675_66, 23.613_487_584_287_528),
        (5, 0.0, 27732.856_954_526_765, 0.0, 11770.190_054_329_016),
        (5, 0.5, 8718.451_390_281_995, 7532.921_634_770_57, 3173.695_939_629_572_7),
        (5, 2.0, 182.101_477_318_343_9, 1883.230_408_692_642_6, 106.604_647_536_472_88),
        (6, 0.0, 446_490.384_196_317_4, 0.0, 167_433.894_073_619_03),
        (6, 0.5, 119_020.809_277_265_37, 95844.753_634_844_5, 36334.348_996_211_814),
        (6, 2.0, 1211.632_934_435_673_2, 11980.594_204_355_562, 571.882_682_217_544_2),
    ];

    #[test]
    fn radial_moment_examples() {
        assert_relative_eq!(radial_moment(0, 1.0).unwrap(), PI / 2.0, max_relative = 1e-14);
        assert_relative_eq!(radial_moment(1, 2.0).unwrap(), 0.5, max_relative = 1e-14);
        assert_relative_eq!(radial_moment(2, 3.0).unwrap(), PI / 16.0, max_relative = 1e-14);
        assert!(matches!(radial_moment(2, 1.5), Err(Error::DivergentMoment { m: 2, .. })));
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(1), 2.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(2), 4.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(3), 2.0 * PI * PI, max_relative = 1e-14);
    }

    #[test]
    fn cos_tail_matches_quadrature() {
        let (x, w) = super::super::gauss::uniform(0.3, PI / 2.0, 8);
        for m in 0..8 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.cos().powi(m as i32)).sum();
            assert_relative_eq!(cos_power_tail(m, 0.3), q, max_relative = 1e-13);
        }
    }

    #[test]
    fn closed_forms_match_golden_values() {
        for (n, d, a, b, c) in GOLDEN {
            let mc = ModelConstants::from_d(n, d).unwrap();
            assert_relative_eq!(closed_form_a(&mc), a, max_relative = 1e-13);
            assert_relative_eq!(closed_form_c(&mc), c, max_relative = 1e-13);
            if d == 0.0 {
                assert_eq!(closed_form_b(&mc), 0.0);
            } else {
                assert_relative_eq!(closed_form_b(&mc), b, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn cubature_matches_closed_forms() {
        let spec = QuadratureSpec::default();
        for (n, d, ..) in GOLDEN {
            let mc = ModelConstants::from_d(n, d).unwrap();
            let a = constant_a(&mc, &spec).unwrap().value;
            let b = constant_b(&mc, &spec).unwrap().value;
            let c = constant_c(&mc, &spec).unwrap().value;
            assert_relative_eq!(a, closed_form_a(&mc), max_relative = 1e-8);
            assert_relative_eq!(c, closed_form_c(&mc), max_relative = 1e-8);
            assert_relative_eq!(b, closed_form_b(&mc), max_relative = 1e-8);
            assert!(a > 0.0 && c > 0.0);
        }
    }

    #[test]
    fn c_is_positive_for_negative_offset() {
        for d in [-3.0, -0.5, -0.01] {
            let mc = ModelConstants::from_d(4, d).unwrap();
            assert!(closed_form_c(&mc) > 0.0);
            assert!(closed_form_b(&mc) < 0.0);
        }
    }
}
