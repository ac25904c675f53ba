//! Collective emission of N excited qubits into a lossy cavity.
//!
//! In the bad-cavity limit the field is eliminated and the symmetric Dicke
//! ladder decays through `n = 0..N` emitted photons with rates
//! `c_n = (N - n)(n + 1)` in units of the effective rate `γ = κḡ²/|Γ|²`,
//! `Γ = κ/2 + iΔ_r`. The ladder is solved by ODE integration or, for
//! `N <= 5`, by inverting its Laplace transform; the full master equation is
//! evolved for comparison.

mod full;
mod ladder;

pub use full::{full_me_intensity, FullMeCurve, FullMeOptions};
pub use ladder::{
    analytic_intensity, dicke_ladder_closed_form, dicke_ladder_evolve, intensity_from_populations, ladder_rate,
    pole_multiset, superradiance_check, DickeLadderSolution, Intensity, LadderMethod, SuperradianceCheck,
    MAX_CLOSED_FORM_QUBITS,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::SystemSpec;
use crate::operator::C64;

/// Rates of the field-eliminated dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EffectiveRates {
    /// `ḡ_N`, the arithmetic mean of the couplings.
    pub mean_coupling: f64,
    /// `Γ = κ/2 + iΔ_r`
    pub cavity_pole: C64,
    /// `γ = κḡ²/|Γ|²`
    pub gamma: f64,
    /// `γ` at `Δ_r = 0`, i.e. `4ḡ²/κ`.
    pub r1: f64,
}

impl EffectiveRates {
    pub fn new(mean_coupling: f64, kappa: f64, cavity_detuning: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::InvalidParameter(format!("effective rate needs κ > 0, got {kappa}")));
        }
        let cavity_pole = C64::new(kappa / 2.0, cavity_detuning);
        let g2 = mean_coupling * mean_coupling;
        Ok(Self {
            mean_coupling,
            cavity_pole,
            gamma: kappa * g2 / cavity_pole.norm_sqr(),
            r1: 4.0 * g2 / kappa,
        })
    }
}

pub fn effective_rate(spec: &SystemSpec) -> Result<EffectiveRates> {
    EffectiveRates::new(spec.mean_coupling(), spec.kappa, spec.cavity_detuning)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn resonant_rate_equals_r1() {
        let r = EffectiveRates::new(1.7, 30.0, 0.0).unwrap();
        assert_relative_eq!(r.gamma, r.r1, max_relative = 1e-15);
        assert_relative_eq!(r.r1, 4.0 * 1.7 * 1.7 / 30.0, max_relative = 1e-15);
    }

    #[test]
    fn half_linewidth_detuning_halves_rate() {
        let r = EffectiveRates::new(1.0, 8.0, 4.0).unwrap();
        assert_relative_eq!(r.gamma, r.r1 / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn three_qubit_caption_values() {
        let spec = SystemSpec::from_mhz(&SystemSpec::resonant(vec![83.7, 85.7, 85.1], 2000.0, 0.19, 8));
        let r = effective_rate(&spec).unwrap();
        let tau = std::f64::consts::TAU;
        // independent arithmetic: mean = 254.5 / 3, R1 = 4 mean² / 2000
        let mean = 254.5 / 3.0;
        assert_relative_eq!(r.mean_coupling / tau, mean, max_relative = 1e-13);
        assert_relative_eq!(r.r1 / tau, 4.0 * mean * mean / 2000.0, max_relative = 1e-13);
        assert!((r.mean_coupling / tau - 84.833).abs() < 1e-3);
        assert!((r.r1 / tau - 14.394).abs() < 1e-3);
    }

    #[test]
    fn zero_kappa_rejected() {
        assert!(EffectiveRates::new(1.0, 0.0, 0.0).is_err());
    }
}
