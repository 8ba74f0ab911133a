//! The JSON problem description read by `curvred`, and the report envelope it
//! writes.
//!
//! ```json
//! {
//!   "n": 3, "K0": 6.0, "H0": 0.5,
//!   "K_poly": [{ "coef": 1.0, "powers": [1, 0, 0] }],
//!   "H_poly": [],
//!   "quadrature": { "rel_tol": 1e-9 },
//!   "search": { "starts": 64 },
//!   "kappa": 3.0
//! }
//! ```
//!
//! Every field except `n` and `K0` has a default; reports echo the resolved
//! document so a run can be repeated from its report alone.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bubble::{BubbleParams, ModelConstants};
use crate::error::{Error, Result};
use crate::fields::{AmbientPolynomial, FieldPair, Monomial};
use crate::morse::SearchSpec;
use crate::quadrature::QuadratureSpec;

/// Highest total degree accepted for `K_poly` and `H_poly`.
pub const MAX_POLY_DEGREE: u32 = 8;

/// Largest number of cells in a `gamma-scan`.
pub const MAX_SCAN_CELLS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub n: usize,
    #[serde(rename = "K0")]
    pub k0: f64,
    #[serde(rename = "H0", default)]
    pub h0: f64,
    #[serde(rename = "K_poly", default)]
    pub k_poly: Vec<Monomial>,
    #[serde(rename = "H_poly", default)]
    pub h_poly: Vec<Monomial>,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub search: SearchSpec,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Grid for `gamma-scan`; defaults to a tensor grid inside the box of size `kappa`.
    #[serde(default)]
    pub scan: Option<ScanSpec>,
}

fn default_kappa() -> f64 {
    3.0
}

/// A tensor grid over `λ` (log-spaced) and each coordinate of `z̄` (uniform).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub lambda_range: [f64; 2],
    pub zbar_range: [f64; 2],
    /// Points per axis; the grid has `resolution^n` cells.
    pub resolution: usize,
}

impl ScanSpec {
    /// The largest grid inside `1/κ ≤ λ ≤ κ`, `|z̄| ≤ κ`.
    pub fn in_box(n: usize, kappa: f64, resolution: usize) -> Self {
        let half = kappa / ((n - 1) as f64).sqrt();
        Self { lambda_range: [1.0 / kappa, kappa], zbar_range: [-half, half], resolution }
    }

    pub fn cells(&self, n: usize) -> usize {
        self.resolution.checked_pow(n as u32).unwrap_or(usize::MAX)
    }

    /// Cells in lexicographic order of `(λ, z̄_1, …, z̄_{n-1})`.
    pub fn grid(&self, n: usize) -> Vec<BubbleParams> {
        let r = self.resolution;
        let at = |j: usize| if r == 1 { 0.5 } else { j as f64 / (r - 1) as f64 };
        let [l0, l1] = self.lambda_range;
        let [z0, z1] = self.zbar_range;
        let lambdas: Vec<f64> = (0..r).map(|j| l0 * (l1 / l0).powf(at(j))).collect();
        let zs: Vec<f64> = (0..r).map(|j| z0 + (z1 - z0) * at(j)).collect();
        (0..self.cells(n))
            .map(|cell| {
                // Base-r digits of the cell index, most significant first.
                let mut digits = vec![0usize; n];
                let mut rest = cell;
                for d in digits.iter_mut().rev() {
                    *d = rest % r;
                    rest /= r;
                }
                BubbleParams { lambda: lambdas[digits[0]], z_bar: digits[1..].iter().map(|&i| zs[i]).collect() }
            })
            .collect()
    }

    fn validate(&self, n: usize, kappa: f64) -> Result<()> {
        let [l0, l1] = self.lambda_range;
        let [z0, z1] = self.zbar_range;
        if self.resolution == 0 || self.cells(n) > MAX_SCAN_CELLS {
            return Err(Error::Config(format!(
                "scan resolution {} gives more than {MAX_SCAN_CELLS} cells in dimension {n}",
                self.resolution
            )));
        }
        if !(0.0 < l0 && l0 <= l1) || !(z0 <= z1) {
            return Err(Error::Config("scan ranges must be increasing with lambda > 0".into()));
        }
        let slack = 1.0 + 1e-12;
        let corner = z0.abs().max(z1.abs()) * ((n - 1) as f64).sqrt();
        if l0 * kappa * slack < 1.0 || l1 > kappa * slack || corner > kappa * slack {
            return Err(Error::Config(format!("scan grid leaves the box of size kappa = {kappa}")));
        }
        Ok(())
    }
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut config = Self::parse(text)?;
        config.resolve()?;
        Ok(config)
    }

    /// Parses without resolving, so callers can override fields first.
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Fills defaults that depend on other fields and checks every invariant.
    pub fn resolve(&mut self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::Config(format!("n must be at least 3, got {}", self.n)));
        }
        if !(self.kappa >= 1.0 && self.kappa.is_finite()) {
            return Err(Error::Config(format!("kappa must be at least 1, got {}", self.kappa)));
        }
        if self.scan.is_none() {
            self.scan = Some(ScanSpec::in_box(self.n, self.kappa, 5));
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let config = |e: Error| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        };
        self.constants().map_err(config)?;
        for (name, poly) in [("K_poly", self.k_polynomial()), ("H_poly", self.h_polynomial())] {
            let degree = poly.map_err(config)?.degree();
            if degree > MAX_POLY_DEGREE {
                return Err(Error::Config(format!("{name} has degree {degree} > {MAX_POLY_DEGREE}")));
            }
        }
        self.quadrature.validate().map_err(config)?;
        self.search.validate().map_err(config)?;
        if let Some(scan) = &self.scan {
            scan.validate(self.n, self.kappa)?;
        }
        Ok(())
    }

    pub fn constants(&self) -> Result<ModelConstants> {
        ModelConstants::new(self.n, self.k0, self.h0)
    }

    pub fn k_polynomial(&self) -> Result<AmbientPolynomial> {
        AmbientPolynomial::new(self.n, self.k_poly.clone())
    }

    pub fn h_polynomial(&self) -> Result<AmbientPolynomial> {
        AmbientPolynomial::new(self.n, self.h_poly.clone())
    }

    pub fn fields(&self) -> Result<FieldPair> {
        FieldPair::polynomials(self.k_polynomial()?, self.h_polynomial()?)
    }
}

/// Envelope for every command's JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: ProblemConfig,
    pub results: Value,
    pub elapsed_seconds: f64,
}

impl RunReport {
    pub fn new(command: &str, config: &ProblemConfig, results: Value, elapsed_seconds: f64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: config.clone(),
            results,
            elapsed_seconds,
        }
    }
}
