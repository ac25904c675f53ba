//! One-dimensional quadrature rules.
//!
//! Gauss-Jacobi handles integrands carrying an algebraic endpoint weight
//! `(1-z)^a (1+z)^b`, where ordinary rules converge very slowly once the
//! exponents approach -1. Adaptive Gauss-Kronrod and tanh-sinh are provided as
//! independent general-purpose integrators.

use std::f64::consts::FRAC_PI_2;

use faer::{Mat, Side};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Nodes and weights of an `n`-point rule on `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_i f(x_i)`
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Gauss-Jacobi rule for the weight `(1-z)^alpha (1+z)^beta` on `[-1, 1]`,
/// built by Golub-Welsch from the monic three-term recurrence.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> Result<GaussRule> {
    if n == 0 {
        return Err(Error::InvalidParameter("quadrature order must be positive".into()));
    }
    if !(alpha > -1.0 && beta > -1.0) {
        return Err(Error::InvalidParameter(format!("Jacobi exponents must exceed -1, got ({alpha}, {beta})")));
    }
    let ab = alpha + beta;
    let diag: Vec<f64> = (0..n)
        .map(|k| {
            if alpha == beta {
                return 0.0;
            }
            let s = 2.0 * k as f64 + ab;
            (beta * beta - alpha * alpha) / (s * (s + 2.0))
        })
        .collect();
    let off: Vec<f64> = (1..n)
        .map(|k| {
            let kf = k as f64;
            let s = 2.0 * kf + ab;
            let b = if k == 1 {
                // the generic form is 0/0 when alpha + beta = -1
                4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab) / (s * s * (s + 1.0) * (s - 1.0))
            };
            b.sqrt()
        })
        .collect();
    let jacobi = Mat::from_fn(n, n, |i, j| {
        if i == j {
            diag[i]
        } else if i == j + 1 {
            off[j]
        } else if j == i + 1 {
            off[i]
        } else {
            0.0
        }
    });
    let evd = jacobi
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Solver { residual: f64::NAN, reason: format!("Jacobi matrix eigensolver: {e:?}") })?;
    let mu0 = ((ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0) - ln_gamma(ab + 2.0)).exp();
    let u = evd.U();
    let s = evd.S();
    let mut pairs: Vec<(f64, f64)> = (0..n).map(|k| (s[k], mu0 * u[(0, k)] * u[(0, k)])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(GaussRule { nodes: pairs.iter().map(|p| p.0).collect(), weights: pairs.iter().map(|p| p.1).collect() })
}

/// Gauss-Legendre rule (`alpha = beta = 0`).
pub fn gauss_legendre(n: usize) -> Result<GaussRule> {
    gauss_jacobi(n, 0.0, 0.0)
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Globally adaptive Gauss-Kronrod (7/15) on a finite interval.
pub fn adaptive_kronrod<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64, max_intervals: usize) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter("integration limits must be finite".into()));
    }
    let (v, e) = kronrod15(&f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    let mut evaluations = 15;
    loop {
        let value: f64 = intervals.iter().map(|s| s.2).sum();
        let error: f64 = intervals.iter().map(|s| s.3).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(QuadResult { value, error, evaluations });
        }
        if intervals.len() >= max_intervals {
            return Err(Error::Solver {
                residual: error,
                reason: format!("adaptive quadrature did not converge in {max_intervals} intervals"),
            });
        }
        let (worst, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("at least one interval");
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = kronrod15(&f, lo, mid);
        let (v2, e2) = kronrod15(&f, mid, hi);
        evaluations += 30;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// Tanh-sinh quadrature on `[-1, 1]`.
///
/// The integrand receives `(z, 1 - |z|)` with the complement computed without
/// cancellation, so weights such as `(1 - z²)^(p-1)` can be evaluated at nodes
/// that round to `±1`.
pub fn tanh_sinh<F: Fn(f64, f64) -> f64>(f: F, tol: f64, max_level: usize) -> Result<QuadResult> {
    let term = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        // 1/cosh²u = 4q/(1+q)² with q = e^{-2|u|}, which stays finite for huge u
        let q = (-2.0 * u.abs()).exp();
        let w = FRAC_PI_2 * t.cosh() * 4.0 * q / ((1.0 + q) * (1.0 + q));
        if w == 0.0 {
            return 0.0;
        }
        // 1 - tanh|u| = 2q / (1 + q)
        w * f(u.tanh(), 2.0 * q / (1.0 + q))
    };
    double_exponential_sum(term, 6.5, tol, max_level)
}

/// `∫_{-1}^{1} g(z) (1 - z²)^{p-1} dz` by tanh-sinh with the weight and the
/// node density combined in log space.
///
/// For small `p` the transformed integrand only decays like `e^{-2p|u|}`, far
/// beyond the point where `1 - |z|` underflows, so the weight cannot be
/// evaluated from `z` directly.
pub fn tanh_sinh_symmetric_jacobi<G: Fn(f64) -> f64>(g: G, p: f64, tol: f64, max_level: usize) -> Result<QuadResult> {
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("weight exponent must be positive, got {p}")));
    }
    let ln2 = std::f64::consts::LN_2;
    let term = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let au = u.abs();
        let q = (-2.0 * au).exp();
        let ln1q = q.ln_1p();
        let z = u.tanh();
        // ln(1 - z²) = ln(1 + |z|) + ln 2 - 2|u| - ln(1 + q)
        let ln_weight = (p - 1.0) * ((z.abs()).ln_1p() + ln2 - 2.0 * au - ln1q);
        let ln_jacobian = (FRAC_PI_2 * t.cosh()).ln() + 2.0 * ln2 - 2.0 * au - 2.0 * ln1q;
        (ln_weight + ln_jacobian).exp() * g(z)
    };
    // e^{-2p|u|} below ~1e-18 at the truncation point
    let t_max = (2.0 * (20.0 / p) / std::f64::consts::PI).asinh().max(4.0);
    double_exponential_sum(term, t_max, tol, max_level)
}

fn double_exponential_sum<T: Fn(f64) -> f64>(term: T, t_max: f64, tol: f64, max_level: usize) -> Result<QuadResult> {
    let mut h = 0.5;
    let mut sum = term(0.0);
    let mut k = 1;
    while k as f64 * h <= t_max {
        let t = k as f64 * h;
        sum += term(t) + term(-t);
        k += 1;
    }
    let mut estimate = sum * h;
    let mut evaluations = 2 * k - 1;
    for _ in 0..max_level {
        h *= 0.5;
        let mut t = h;
        while t <= t_max {
            sum += term(t) + term(-t);
            evaluations += 2;
            t += 2.0 * h;
        }
        let next = sum * h;
        let err = (next - estimate).abs();
        estimate = next;
        if err <= tol * estimate.abs().max(1e-300) {
            return Ok(QuadResult { value: estimate, error: err, evaluations });
        }
    }
    Err(Error::Solver { residual: f64::NAN, reason: format!("tanh-sinh did not reach tolerance {tol:e}") })
}
