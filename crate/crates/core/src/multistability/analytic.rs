use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_jacobi, tanh_sinh_symmetric_jacobi, GaussRule};

/// Single driven qubit: coupling, cavity decay, relaxation and drive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BistableParams {
    pub coupling: f64,
    pub kappa: f64,
    pub relaxation: f64,
    pub drive: f64,
}

impl BistableParams {
    /// Exponent `p = γ^s / 2κ` of the weight `(1 - z²)^{p-1}`.
    pub fn weight_exponent(&self) -> f64 {
        self.relaxation / (2.0 * self.kappa)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QuadratureScheme {
    /// Gauss-Jacobi rule of the given order for the weight `(1-z²)^{p-1}`.
    GaussJacobi { order: usize },
    /// Tanh-sinh with the given relative tolerance.
    TanhSinh { tolerance: f64 },
}

/// Closed-form steady-state Q-function of the driven single qubit,
///
/// ```text
/// Q(x+iy) = 2 e^{-(x - 2E/κ)²} / (2^{γ/κ} π B(p,p)) ∫_{-1}^{1} e^{-(gz/κ - y)²} (1-z²)^{p-1} dz
/// ```
///
/// with `p = γ^s/2κ`. The rule is built once and reused across evaluations.
#[derive(Clone, Debug)]
pub struct BistableQ {
    params: BistableParams,
    scheme: QuadratureScheme,
    rule: Option<GaussRule>,
    log_prefactor: f64,
}

impl BistableQ {
    /// Requires `0 < γ^s < 2κ`, the regime with two separated field components.
    pub fn new(params: BistableParams) -> Result<Self> {
        if !(params.relaxation < 2.0 * params.kappa) {
            return Err(Error::InvalidParameter(format!(
                "γ^s = {} is not below 2κ = {}; the distribution is not bistable",
                params.relaxation,
                2.0 * params.kappa
            )));
        }
        Self::with_scheme(params, QuadratureScheme::GaussJacobi { order: Self::default_order(&params) })
    }

    /// Evaluates the formula without the bistability restriction; only
    /// `γ^s > 0` is required for the weight to be integrable.
    pub fn with_scheme(params: BistableParams, scheme: QuadratureScheme) -> Result<Self> {
        if !(params.kappa > 0.0) {
            return Err(Error::InvalidParameter("κ must be positive".into()));
        }
        if !(params.relaxation > 0.0) {
            return Err(Error::InvalidParameter(format!("γ^s must be positive, got {}", params.relaxation)));
        }
        if !params.coupling.is_finite() || !params.drive.is_finite() {
            return Err(Error::InvalidParameter("coupling and drive must be finite".into()));
        }
        let p = params.weight_exponent();
        let rule = match scheme {
            QuadratureScheme::GaussJacobi { order } => Some(gauss_jacobi(order, p - 1.0, p - 1.0)?),
            QuadratureScheme::TanhSinh { .. } => None,
        };
        let log_prefactor = 2f64.ln() - 2.0 * p * 2f64.ln() - PI.ln() - ln_beta(p, p);
        Ok(Self { params, scheme, rule, log_prefactor })
    }

    /// Enough nodes to resolve a Gaussian of width `κ/g` across `[-1, 1]`.
    pub fn default_order(params: &BistableParams) -> usize {
        let ratio = (params.coupling / params.kappa).abs();
        (8.0 * ratio).ceil() as usize + 64
    }

    pub fn params(&self) -> &BistableParams {
        &self.params
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        let BistableParams { coupling, kappa, drive, .. } = self.params;
        let c = coupling / kappa;
        let dx = x - 2.0 * drive / kappa;
        let integral = match (&self.rule, self.scheme) {
            (Some(rule), _) => rule.integrate(|z| (-(c * z - y).powi(2)).exp()),
            (None, QuadratureScheme::TanhSinh { tolerance }) => {
                tanh_sinh_symmetric_jacobi(|z| (-(c * z - y).powi(2)).exp(), self.params.weight_exponent(), tolerance, 14)?.value
            }
            (None, QuadratureScheme::GaussJacobi { .. }) => unreachable!("rule built in constructor"),
        };
        Ok((self.log_prefactor - dx * dx).exp() * integral)
    }
}

/// One-off evaluation; prefer [`BistableQ`] for many points.
pub fn analytic_q_bistable(x: f64, y: f64, params: BistableParams) -> Result<f64> {
    BistableQ::new(params)?.eval(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_kronrod;
    use approx::assert_relative_eq;

    fn bistable_params() -> BistableParams {
        // ratios of (g, κ, γ^s) = (85, 4, 0.19) with E chosen so that 2E/κ = 10
        BistableParams { coupling: 85.0, kappa: 4.0, relaxation: 0.19, drive: 20.0 }
    }

    #[test]
    fn mirror_symmetry_in_y() {
        let q = BistableQ::new(bistable_params()).unwrap();
        for &(x, y) in &[(10.0, 3.0), (9.2, 20.0), (10.5, 0.4)] {
            assert_relative_eq!(q.eval(x, y).unwrap(), q.eval(x, -y).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn flat_weight_against_adaptive_oracle() {
        let params = BistableParams { coupling: 3.0, kappa: 1.0, relaxation: 2.0, drive: 1.5 };
        assert!(BistableQ::new(params).is_err());
        let q = BistableQ::with_scheme(params, QuadratureScheme::GaussJacobi { order: 80 }).unwrap();
        for &(x, y) in &[(3.0, 0.0), (2.5, 1.7), (3.8, -2.9)] {
            let inner = adaptive_kronrod(|z| (-(3.0 * z - y).powi(2)).exp(), -1.0, 1.0, 1e-15, 1e-13, 500).unwrap().value;
            let expected = (-(x - 3.0f64).powi(2)).exp() * inner / (2.0 * PI);
            assert_relative_eq!(q.eval(x, y).unwrap(), expected, max_relative = 1e-11);
        }
    }

    #[test]
    fn peaks_sit_near_plus_minus_g_over_kappa() {
        let q = BistableQ::new(bistable_params()).unwrap();
        let x = 10.0;
        let ys: Vec<f64> = (0..=3000).map(|k| k as f64 * 0.01).collect();
        let vals: Vec<f64> = ys.iter().map(|&y| q.eval(x, y).unwrap()).collect();
        let (k, _) = vals.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert!((ys[k] - 21.25).abs() < 0.5, "peak at y = {}", ys[k]);
        assert!(vals[k] > 10.0 * vals[0]);
    }

    #[test]
    fn order_doubling_and_tanh_sinh_agree() {
        let params = bistable_params();
        let base = BistableQ::default_order(&params);
        let q1 = BistableQ::with_scheme(params, QuadratureScheme::GaussJacobi { order: base }).unwrap();
        let q2 = BistableQ::with_scheme(params, QuadratureScheme::GaussJacobi { order: 2 * base }).unwrap();
        let q3 = BistableQ::with_scheme(params, QuadratureScheme::TanhSinh { tolerance: 1e-12 }).unwrap();
        for &(x, y) in &[(10.0, 0.0), (10.0, 21.0), (9.5, -12.3), (10.2, 22.5)] {
            let (a, b, c) = (q1.eval(x, y).unwrap(), q2.eval(x, y).unwrap(), q3.eval(x, y).unwrap());
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            assert!((a - c).abs() < 1e-8 * a.max(1.0), "{a} vs {c}");
        }
    }

    #[test]
    fn rejects_nonpositive_relaxation() {
        let mut p = bistable_params();
        p.relaxation = 0.0;
        assert!(BistableQ::new(p).is_err());
        assert!(BistableQ::with_scheme(p, QuadratureScheme::TanhSinh { tolerance: 1e-10 }).is_err());
    }
}
