//! Phase-space structure of the resonantly driven cavity + qubits steady state.
//!
//! A strong drive `E` splits the field into coherent components, one per
//! collective spin projection `m`, at
//!
//! ```text
//! α^(l,m) = 2 f_m (E f_m + i m ḡ) / κ,   f_m = √(1 - (m ḡ / E)²).
//! ```
//!
//! This module evaluates those amplitudes, the closed-form single-qubit
//! Q-function, Q-functions of numerical steady states, and peak detection.

mod analytic;
mod grid;
mod sweep;

pub use analytic::{analytic_q_bistable, BistableParams, BistableQ, QuadratureScheme};
pub use grid::{find_q_peaks, match_peaks, q_function, GridSpec, PeakMatch, PhaseSpaceGrid, QOptions, QPeak};
pub use sweep::{driven_steady_field, peak_sweep, SteadyField, SweepOptions, SweepRow};

use crate::error::{Error, Result};
use crate::operator::C64;

/// Predicted coherent amplitude for one `(l, m)` ladder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyAmplitude {
    pub l: f64,
    pub m: f64,
    /// `f_m`; `None` when `E < |m|ḡ` and the formula has no real solution.
    pub f: Option<f64>,
    pub alpha: Option<C64>,
}

impl SteadyAmplitude {
    pub fn is_defined(&self) -> bool {
        self.alpha.is_some()
    }
}

/// Amplitudes for `m = -l..=l` in unit steps; `l` defaults to `N/2`.
pub fn steady_amplitudes(n_qubits: usize, mean_coupling: f64, kappa: f64, drive: f64, l: Option<f64>) -> Result<Vec<SteadyAmplitude>> {
    if n_qubits == 0 {
        return Err(Error::InvalidParameter("need at least one qubit".into()));
    }
    if !(kappa > 0.0) || !(drive > 0.0) {
        return Err(Error::InvalidParameter(format!("need κ > 0 and E > 0, got κ = {kappa}, E = {drive}")));
    }
    let l_max = n_qubits as f64 / 2.0;
    let l = l.unwrap_or(l_max);
    let steps = l_max - l;
    if !(l >= 0.0 && l <= l_max && (steps - steps.round()).abs() < 1e-12) {
        return Err(Error::InvalidParameter(format!("l = {l} is not a collective spin of {n_qubits} qubits")));
    }
    let count = (2.0 * l).round() as usize + 1;
    Ok((0..count)
        .map(|k| {
            let m = k as f64 - l;
            let ratio = m * mean_coupling / drive;
            let f = (ratio.abs() <= 1.0).then(|| (1.0 - ratio * ratio).max(0.0).sqrt());
            let alpha = f.map(|f| C64::new(drive * f, m * mean_coupling) * (2.0 * f / kappa));
            SteadyAmplitude { l, m, f, alpha }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn symmetric_sector_has_two_l_plus_one_entries() {
        let amps = steady_amplitudes(3, 1.0, 1.0, 2.0, None).unwrap();
        let ms: Vec<f64> = amps.iter().map(|a| a.m).collect();
        assert_eq!(ms, vec![-1.5, -0.5, 0.5, 1.5]);
        let partial = steady_amplitudes(3, 1.0, 1.0, 2.0, Some(0.5)).unwrap();
        assert_eq!(partial.len(), 2);
        assert!(steady_amplitudes(3, 1.0, 1.0, 2.0, Some(1.0)).is_err());
    }

    #[test]
    fn m_zero_is_empty_cavity_amplitude() {
        let amps = steady_amplitudes(2, 0.7, 1.3, 2.2, None).unwrap();
        let a0 = amps[1].alpha.unwrap();
        assert_abs_diff_eq!(a0.re, 2.0 * 2.2 / 1.3, epsilon = 1e-14);
        assert_abs_diff_eq!(a0.im, 0.0);
    }

    #[test]
    fn single_qubit_form() {
        let (g, kappa, e) = (2.0, 1.0, 4.0);
        let amps = steady_amplitudes(1, g, kappa, e, None).unwrap();
        let f = (1.0 - (g / (2.0 * e)).powi(2)).sqrt();
        for (amp, sign) in amps.iter().zip([-1.0, 1.0]) {
            let expected = C64::new(2.0 * e * f, sign * g) * (f / kappa);
            assert_abs_diff_eq!((amp.alpha.unwrap() - expected).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn conjugate_pairs_and_threshold() {
        let amps = steady_amplitudes(4, 1.0, 1.0, 1.0, None).unwrap();
        for k in 0..amps.len() {
            let (a, b) = (amps[k], amps[amps.len() - 1 - k]);
            assert_eq!(a.alpha.map(|z| z.conj()), b.alpha);
        }
        // m = ±2 is above threshold, m = ±1 sits exactly on it
        assert!(!amps[0].is_defined());
        assert_eq!(amps[1].alpha, Some(C64::new(0.0, 0.0)));
        assert_eq!(amps[1].f, Some(0.0));
    }
}
