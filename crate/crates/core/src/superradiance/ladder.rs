use serde::Serialize;

use crate::error::{Error, Result};
use crate::lindblad::{dormand_prince, IntegratorOptions};

/// Largest `N` accepted by [`dicke_ladder_closed_form`].
pub const MAX_CLOSED_FORM_QUBITS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LadderMethod {
    Ode,
    ClosedForm,
}

/// Populations `P(n, τ)` of the Dicke ladder, `n` photons emitted.
#[derive(Clone, Debug, Serialize)]
pub struct DickeLadderSolution {
    pub n_qubits: usize,
    pub tau: Vec<f64>,
    /// `populations[k][n] = P(n, tau[k])`
    pub populations: Vec<Vec<f64>>,
    /// Flux form `Σ (N-n)(n+1) P(n)`.
    pub intensity: Vec<f64>,
    /// Finite-difference derivative of `Σ n P(n)`.
    pub intensity_numeric: Vec<f64>,
    pub method: LadderMethod,
}

/// Rate `(N - n)(n + 1)` out of rung `n`.
pub fn ladder_rate(n_qubits: usize, n: usize) -> f64 {
    (n_qubits.saturating_sub(n) * (n + 1)) as f64
}

/// Decay constants `c_0..c_n` whose product of `1/(s + c_i)` gives the
/// transform of `P(n, τ)`, with repeats kept.
pub fn pole_multiset(n_qubits: usize, n: usize) -> Vec<f64> {
    (0..=n).map(|i| ladder_rate(n_qubits, i)).collect()
}

fn check_grid(tau: &[f64]) -> Result<()> {
    if tau.is_empty() || tau[0] != 0.0 {
        return Err(Error::InvalidParameter("τ grid must start at 0".into()));
    }
    if tau.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("τ grid must be strictly increasing".into()));
    }
    Ok(())
}

pub fn dicke_ladder_evolve(n_qubits: usize, tau: &[f64], opts: &IntegratorOptions) -> Result<DickeLadderSolution> {
    if n_qubits == 0 {
        return Err(Error::InvalidParameter("need at least one qubit".into()));
    }
    check_grid(tau)?;
    let rates: Vec<f64> = (0..=n_qubits).map(|n| ladder_rate(n_qubits, n)).collect();
    let mut p0 = vec![0.0; n_qubits + 1];
    p0[0] = 1.0;
    let mut populations = Vec::with_capacity(tau.len());
    dormand_prince(
        |_, p: &[f64], dp: &mut [f64]| {
            for n in 0..p.len() {
                let gain = if n > 0 { rates[n - 1] * p[n - 1] } else { 0.0 };
                dp[n] = gain - rates[n] * p[n];
            }
        },
        &p0,
        tau,
        opts,
        |_, _, p| {
            populations.push(p.to_vec());
            Ok(())
        },
    )?;
    finish(n_qubits, tau, populations, LadderMethod::Ode)
}

/// Residue inversion of `P(n, s) = K_n / Π_i (s + c_i)` with
/// `K_n = Π_{i<n} c_i`.
///
/// A constant `c` appears twice exactly when `i + j = N - 1` for two distinct
/// rungs, which yields `τ e^{-cτ}` terms.
pub fn dicke_ladder_closed_form(n_qubits: usize, tau: &[f64]) -> Result<DickeLadderSolution> {
    if n_qubits == 0 {
        return Err(Error::InvalidParameter("need at least one qubit".into()));
    }
    if n_qubits > MAX_CLOSED_FORM_QUBITS {
        return Err(Error::Unsupported(format!(
            "closed form implemented for N <= {MAX_CLOSED_FORM_QUBITS}; use dicke_ladder_evolve for N = {n_qubits}"
        )));
    }
    check_grid(tau)?;
    let terms: Vec<Vec<PoleTerm>> = (0..=n_qubits).map(|n| residues(n_qubits, n)).collect();
    let populations = tau
        .iter()
        .map(|&t| terms.iter().map(|ts| ts.iter().map(|pt| pt.eval(t)).sum()).collect())
        .collect();
    finish(n_qubits, tau, populations, LadderMethod::ClosedForm)
}

/// `e^{-cτ}(a + bτ)`
#[derive(Clone, Copy, Debug)]
struct PoleTerm {
    c: f64,
    a: f64,
    b: f64,
}

impl PoleTerm {
    fn eval(&self, t: f64) -> f64 {
        (-self.c * t).exp() * (self.a + self.b * t)
    }
}

fn residues(n_qubits: usize, n: usize) -> Vec<PoleTerm> {
    let k: f64 = (0..n).map(|i| ladder_rate(n_qubits, i)).product();
    let mut poles: Vec<(f64, u32)> = vec![];
    for c in pole_multiset(n_qubits, n) {
        match poles.iter_mut().find(|p| p.0 == c) {
            Some(p) => p.1 += 1,
            None => poles.push((c, 1)),
        }
    }
    poles
        .iter()
        .map(|&(c, mult)| {
            let others = poles.iter().filter(|p| p.0 != c);
            // R(-c) with R(s) = Π_{j≠} (s + c_j)^{-m_j}
            let r: f64 = others.clone().map(|&(cj, mj)| (cj - c).powi(-(mj as i32))).product();
            match mult {
                1 => PoleTerm { c, a: k * r, b: 0.0 },
                2 => {
                    let shift: f64 = others.map(|&(cj, mj)| mj as f64 / (cj - c)).sum();
                    PoleTerm { c, a: -k * r * shift, b: k * r }
                }
                _ => unreachable!("ladder constants repeat at most twice"),
            }
        })
        .collect()
}

fn finish(n_qubits: usize, tau: &[f64], populations: Vec<Vec<f64>>, method: LadderMethod) -> Result<DickeLadderSolution> {
    let Intensity { flux, numeric } = intensity_from_populations(n_qubits, tau, &populations)?;
    Ok(DickeLadderSolution {
        n_qubits,
        tau: tau.to_vec(),
        populations,
        intensity: flux,
        intensity_numeric: numeric,
        method,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Intensity {
    pub flux: Vec<f64>,
    pub numeric: Vec<f64>,
}

/// Emission rate `d/dτ Σ n P(n)` evaluated two ways.
///
/// The flux form substitutes the rate equations into the derivative; the
/// numeric form differentiates the photon count with a five-point stencil.
pub fn intensity_from_populations(n_qubits: usize, tau: &[f64], populations: &[Vec<f64>]) -> Result<Intensity> {
    if populations.len() != tau.len() {
        return Err(Error::Dimension(format!("{} population rows for {} times", populations.len(), tau.len())));
    }
    if let Some(row) = populations.iter().find(|p| p.len() != n_qubits + 1) {
        return Err(Error::Dimension(format!("population row of length {} for N = {n_qubits}", row.len())));
    }
    let flux = populations
        .iter()
        .map(|p| p.iter().enumerate().map(|(n, pn)| ladder_rate(n_qubits, n) * pn).sum())
        .collect();
    let emitted: Vec<f64> = populations.iter().map(|p| p.iter().enumerate().map(|(n, pn)| n as f64 * pn).sum()).collect();
    Ok(Intensity { flux, numeric: derivative(tau, &emitted) })
}

fn derivative(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![f64::NAN; n];
    }
    let width = n.min(5);
    (0..n)
        .map(|k| {
            let start = k.saturating_sub(width / 2).min(n - width);
            let xs = &x[start..start + width];
            let w = fornberg_first_derivative(x[k], xs);
            w.iter().zip(&y[start..start + width]).map(|(a, b)| a * b).sum()
        })
        .collect()
}

/// Finite-difference weights for `f'(x0)` on arbitrary nodes.
fn fornberg_first_derivative(x0: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    // c[j][m]: weight of node j for derivative order m (m = 0, 1)
    let mut c = vec![[0.0f64; 2]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    for i in 1..n {
        let mut c2 = 1.0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                c[i][1] = c1 * (c[i - 1][0] - (xs[i - 1] - x0) * c[i - 1][1]) / c2;
                c[i][0] = -c1 * (xs[i - 1] - x0) * c[i - 1][0] / c2;
            }
            c[j][1] = ((xs[i] - x0) * c[j][1] - c[j][0]) / c3;
            c[j][0] = (xs[i] - x0) * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

/// Printed closed forms for `N = 3, 4, 5`.
pub fn analytic_intensity(n_qubits: usize, tau: f64) -> Result<f64> {
    let e = |c: f64| (-c * tau).exp();
    match n_qubits {
        3 => Ok(3.0 * e(3.0) * (12.0 * tau - 7.0) + 24.0 * e(4.0)),
        4 => Ok((72.0 * tau + 96.0) * e(6.0) + 4.0 * e(4.0) * (36.0 * tau - 23.0)),
        5 => Ok(5.0 / 3.0 * (162.0 * e(9.0) + 16.0 * e(8.0) * (24.0 * tau - 1.0) + e(5.0) * (240.0 * tau - 143.0))),
        _ => Err(Error::Unsupported(format!("closed-form intensity exists for N = 3, 4, 5, not {n_qubits}"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SuperradianceCheck {
    pub is_superradiant: bool,
    pub i_max: f64,
    pub tau_max: f64,
}

/// Locates the intensity maximum (three-point parabolic refinement) and
/// compares it with the `N` independent-emitter value.
pub fn superradiance_check(tau: &[f64], intensity: &[f64], n_qubits: usize) -> Result<SuperradianceCheck> {
    if tau.len() != intensity.len() || tau.is_empty() {
        return Err(Error::Dimension("intensity and τ grid must be non-empty and equally long".into()));
    }
    let (k, _) = intensity
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let (mut tau_max, mut i_max) = (tau[k], intensity[k]);
    if k > 0 && k + 1 < tau.len() {
        let (x0, x1, x2) = (tau[k - 1], tau[k], tau[k + 1]);
        let (y0, y1, y2) = (intensity[k - 1], intensity[k], intensity[k + 1]);
        let d01 = (y1 - y0) / (x1 - x0);
        let d12 = (y2 - y1) / (x2 - x1);
        let a = (d12 - d01) / (x2 - x0);
        if a < 0.0 {
            let b = d01 - a * (x0 + x1);
            let xv = (-b / (2.0 * a)).clamp(x0, x2);
            tau_max = xv;
            i_max = y1 + (xv - x1) * (d01 + a * (xv - x0));
        }
    }
    Ok(SuperradianceCheck { is_superradiant: i_max > n_qubits as f64, i_max, tau_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(step: f64, end: f64) -> Vec<f64> {
        (0..=(end / step).round() as usize).map(|k| k as f64 * step).collect()
    }

    fn tight() -> IntegratorOptions {
        IntegratorOptions { rtol: 1e-12, atol: 1e-14, ..Default::default() }
    }

    #[test]
    fn first_rate_is_n() {
        for n in 1..=6 {
            assert_eq!(ladder_rate(n, 0), n as f64);
        }
    }

    #[test]
    fn three_qubit_poles_repeat() {
        assert_eq!(pole_multiset(3, 2), vec![3.0, 4.0, 3.0]);
    }

    #[test]
    fn single_qubit_decay() {
        let tau = grid(0.05, 4.0);
        for sol in [dicke_ladder_evolve(1, &tau, &tight()).unwrap(), dicke_ladder_closed_form(1, &tau).unwrap()] {
            for (t, p) in tau.iter().zip(&sol.populations) {
                assert_abs_diff_eq!(p[1], 1.0 - (-t).exp(), epsilon = 1e-10);
            }
            let check = superradiance_check(&sol.tau, &sol.intensity, 1).unwrap();
            assert!(!check.is_superradiant);
            assert_abs_diff_eq!(check.i_max, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn closed_form_matches_ode() {
        let tau = grid(0.01, 3.0);
        for n in 1..=5 {
            let a = dicke_ladder_closed_form(n, &tau).unwrap();
            let b = dicke_ladder_evolve(n, &tau, &tight()).unwrap();
            for (pa, pb) in a.populations.iter().zip(&b.populations) {
                for (x, y) in pa.iter().zip(pb) {
                    assert_abs_diff_eq!(x, y, epsilon = 1e-8);
                }
                assert_abs_diff_eq!(pa.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
                assert!(pa.iter().all(|&p| p >= -1e-12));
            }
            assert_abs_diff_eq!(a.populations[0][0], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ground_rung_is_single_exponential() {
        let tau = grid(0.1, 2.0);
        let sol = dicke_ladder_closed_form(4, &tau).unwrap();
        for (t, p) in tau.iter().zip(&sol.populations) {
            assert_abs_diff_eq!(p[0], (-4.0 * t).exp(), epsilon = 1e-14);
        }
    }

    #[test]
    fn printed_forms_match_inversion() {
        let tau = grid(0.005, 3.0);
        for n in 3..=5 {
            let sol = dicke_ladder_closed_form(n, &tau).unwrap();
            for (t, i) in tau.iter().zip(&sol.intensity) {
                assert_abs_diff_eq!(analytic_intensity(n, *t).unwrap(), *i, epsilon = 1e-10);
            }
            assert_abs_diff_eq!(analytic_intensity(n, 0.0).unwrap(), n as f64, epsilon = 1e-12);
        }
        assert!(analytic_intensity(2, 0.1).is_err());
    }

    #[test]
    fn intensity_forms_agree() {
        let tau = grid(0.001, 3.0);
        let sol = dicke_ladder_closed_form(4, &tau).unwrap();
        for (a, b) in sol.intensity.iter().zip(&sol.intensity_numeric) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
        assert_eq!(sol.intensity[0], 4.0);
        let late = dicke_ladder_closed_form(4, &[0.0, 30.0]).unwrap();
        assert!(late.intensity[1] < 1e-10);
        assert!((late.populations[1][4] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fornberg_recovers_polynomial_slopes() {
        let xs = [0.0, 0.1, 0.25, 0.3, 0.7];
        let w = fornberg_first_derivative(0.25, &xs);
        let slope: f64 = w.iter().zip(&xs).map(|(wi, x)| wi * x.powi(4)).sum();
        assert_abs_diff_eq!(slope, 4.0 * 0.25f64.powi(3), epsilon = 1e-12);
    }

    #[test]
    fn peak_enhancement_grows_with_n() {
        let tau = grid(0.002, 3.0);
        let peaks: Vec<f64> = (1..=5)
            .map(|n| {
                let s = dicke_ladder_closed_form(n, &tau).unwrap();
                superradiance_check(&tau, &s.intensity, n).unwrap().i_max
            })
            .collect();
        assert!(peaks.windows(2).all(|w| w[1] > w[0]));
        let per_emitter: Vec<f64> = peaks.iter().enumerate().map(|(k, p)| p / (k + 1) as f64).collect();
        assert!(per_emitter.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn closed_form_limited_to_five() {
        assert!(matches!(dicke_ladder_closed_form(6, &[0.0, 1.0]), Err(Error::Unsupported(_))));
        assert!(dicke_ladder_evolve(6, &[0.0, 1.0], &tight()).is_ok());
    }
}
