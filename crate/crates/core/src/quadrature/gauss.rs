//! Gauss–Legendre rules and composite panels built from them.

use std::sync::OnceLock;

/// Points per panel in every composite rule.
pub const PANEL_ORDER: usize = 8;

/// Nodes and weights of the `k`-point Gauss–Legendre rule on `[-1, 1]`, in
/// increasing node order.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(k >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    for i in 0..k.div_ceil(2) {
        // Chebyshev-like initial guess for the i-th largest root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(k, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(k, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k - 1 - i] = x;
        nodes[i] = -x;
        weights[k - 1 - i] = w;
        weights[i] = w;
    }
    if k % 2 == 1 {
        nodes[k / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(k: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=k {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    if k == 0 {
        return (1.0, 0.0);
    }
    let d = k as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_ORDER))
}

/// Composite rule on the listed consecutive intervals, one panel each.
pub fn composite(breaks: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = panel_rule();
    let mut nodes = Vec::with_capacity(PANEL_ORDER * breaks.len());
    let mut weights = Vec::with_capacity(PANEL_ORDER * breaks.len());
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in gx.iter().zip(gw) {
            nodes.push(mid + half * x);
            weights.push(half * w);
        }
    }
    (nodes, weights)
}

/// `panels` equal Gauss–Legendre panels on `[a, b]`.
pub fn uniform(a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let breaks: Vec<f64> = (0..=panels)
        .map(|j| a + (b - a) * j as f64 / panels as f64)
        .collect();
    composite(&breaks)
}

/// Periodic trapezoid rule on `[0, 2π)` at the midpoints `2π(k + 1/2)/count`.
///
/// For even `count` the node set is invariant under `φ -> π - φ` and
/// `φ -> -φ`, so integrands odd in `cos φ` or `sin φ` cancel.
pub fn periodic(count: usize) -> (Vec<f64>, Vec<f64>) {
    let h = std::f64::consts::TAU / count as f64;
    let nodes = (0..count).map(|k| h * (k as f64 + 0.5)).collect();
    (nodes, vec![h; count])
}

/// Fixed-order pairwise summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        for k in [1, 2, 5, 8, 13] {
            let (x, w) = gauss_legendre(k);
            for deg in 0..(2 * k) {
                let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
                let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((approx - exact).abs() < 1e-14, "k={k} deg={deg}");
            }
        }
    }

    #[test]
    fn nodes_are_symmetric_and_sorted() {
        let (x, w) = gauss_legendre(8);
        for i in 0..8 {
            assert_eq!(x[i], -x[7 - i]);
            assert_eq!(w[i], w[7 - i]);
        }
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn eight_point_reference_values() {
        let (x, w) = gauss_legendre(8);
        assert_relative_eq!(x[7], 0.960_289_856_497_536_2, epsilon = 1e-15);
        assert_relative_eq!(w[7], 0.101_228_536_290_376_26, epsilon = 1e-15);
    }

    #[test]
    fn composite_and_periodic_rules() {
        let (x, w) = uniform(0.0, std::f64::consts::PI, 4);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.sin()).sum();
        assert_relative_eq!(s, 2.0, epsilon = 1e-13);
        let (x, w) = periodic(16);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.cos().powi(2)).sum();
        assert_relative_eq!(s, std::f64::consts::PI, epsilon = 1e-14);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        assert_relative_eq!(pairwise_sum(&v), v.iter().sum::<f64>(), epsilon = 1e-12);
    }
}
