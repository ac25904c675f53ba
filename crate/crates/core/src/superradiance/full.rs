use serde::Serialize;

use super::{effective_rate, EffectiveRates};
use crate::error::{Error, Result};
use crate::lindblad::{evolve_with, expectation, DensityState, EvolveOptions, EvolveStats, Liouvillian, DEFAULT_MAX_SUPEROPERATOR_DIM};
use crate::model::build_model;
use crate::model::SystemSpec;

#[derive(Clone, Debug)]
pub struct FullMeOptions {
    pub evolve: EvolveOptions,
    /// Largest tolerated population of the highest retained Fock level.
    pub top_fock_tolerance: f64,
    pub max_superoperator_dim: usize,
}

impl Default for FullMeOptions {
    fn default() -> Self {
        Self {
            evolve: EvolveOptions::default(),
            top_fock_tolerance: 1e-6,
            max_superoperator_dim: DEFAULT_MAX_SUPEROPERATOR_DIM,
        }
    }
}

/// Cavity output of the full model, in units where independent emitters
/// start at intensity `N`.
#[derive(Clone, Debug, Serialize)]
pub struct FullMeCurve {
    pub tau: Vec<f64>,
    /// `κ⟨a†a⟩(t)/γ` at `t = τ/γ`.
    pub intensity: Vec<f64>,
    /// Total third-level population `Σ_j P_j(f)` for qutrit models.
    pub upper_population: Option<Vec<f64>>,
    pub top_fock_max: f64,
    /// `κ/ḡ`; the field elimination assumes this is large.
    pub bad_cavity_ratio: f64,
    pub rates: EffectiveRates,
    pub stats: EvolveStats,
}

/// Evolves `|0⟩ ⊗ |e…e⟩` under the full master equation for `spec`.
pub fn full_me_intensity(spec: &SystemSpec, tau: &[f64], opts: &FullMeOptions) -> Result<FullMeCurve> {
    if spec.drive != 0.0 {
        return Err(Error::InvalidParameter("emission runs are undriven".into()));
    }
    let rates = effective_rate(spec)?;
    if !(rates.gamma > 0.0) {
        return Err(Error::InvalidParameter("effective rate vanishes; no coupling to the cavity".into()));
    }
    let bad_cavity_ratio = spec.kappa / rates.mean_coupling;
    if bad_cavity_ratio < 10.0 {
        log::warn!("κ/ḡ = {bad_cavity_ratio:.2} is outside the bad-cavity regime; field elimination is not expected to hold");
    }
    let model = build_model(spec)?;
    let l = Liouvillian::from_model_with_cap(&model, opts.max_superoperator_dim)?;
    let rho0 = DensityState::pure(&model.fully_excited_state()?)?;
    let number = model.photon_number()?;
    let upper = if model.emitter_levels == 3 {
        let mut total = model.level_population(0, 2)?;
        for j in 1..model.n_emitters() {
            total = total.add(&model.level_population(j, 2)?)?;
        }
        Some(total)
    } else {
        None
    };

    let times: Vec<f64> = tau.iter().map(|t| t / rates.gamma).collect();
    let nf = model.dims()[0];
    let rest = model.hilbert_dim() / nf;
    let mut intensity = Vec::with_capacity(tau.len());
    let mut upper_population = upper.as_ref().map(|_| Vec::with_capacity(tau.len()));
    let mut top_fock_max = 0.0f64;
    let stats = evolve_with(&l, &rho0, &times, &opts.evolve, |_, t, rho| {
        let m = rho.matrix();
        let top: f64 = (0..rest).map(|k| m[((nf - 1) * rest + k, (nf - 1) * rest + k)].re).sum();
        top_fock_max = top_fock_max.max(top);
        if top > opts.top_fock_tolerance {
            return Err(Error::Truncation(format!(
                "top Fock level population {top:.2e} at t = {t:.4e} exceeds {:.1e}; raise fock_dim",
                opts.top_fock_tolerance
            )));
        }
        intensity.push(spec.kappa * expectation(rho, &number)?.re / rates.gamma);
        if let (Some(op), Some(out)) = (&upper, upper_population.as_mut()) {
            out.push(expectation(rho, op)?.re);
        }
        Ok(())
    })?;
    Ok(FullMeCurve { tau: tau.to_vec(), intensity, upper_population, top_fock_max, bad_cavity_ratio, rates, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superradiance::{dicke_ladder_closed_form, superradiance_check};

    #[test]
    fn uncoupled_emitters_give_no_light() {
        let spec = SystemSpec::resonant(vec![0.0, 0.0], 50.0, 50.0, 3);
        assert!(full_me_intensity(&spec, &[0.0, 1.0], &FullMeOptions::default()).is_err());
        // tiny but finite coupling: essentially all energy leaves through the qubits
        let spec = SystemSpec::resonant(vec![1e-6, 1e-6], 50.0, 50.0, 3);
        let tau = [0.0, 1e-12, 2e-12];
        let curve = full_me_intensity(&spec, &tau, &FullMeOptions::default()).unwrap();
        assert!(curve.intensity.iter().all(|&i| i.abs() < 1e-9));
    }

    #[test]
    fn bad_cavity_single_qubit_follows_exponential() {
        let spec = SystemSpec::resonant(vec![1.0], 60.0, 0.0, 3);
        let tau: Vec<f64> = (0..=20).map(|k| k as f64 * 0.1).collect();
        let curve = full_me_intensity(&spec, &tau, &FullMeOptions::default()).unwrap();
        let ladder = dicke_ladder_closed_form(1, &tau).unwrap();
        // O(ḡ²/κ²) agreement away from the initial transient
        for k in 5..tau.len() {
            assert!((curve.intensity[k] - ladder.intensity[k]).abs() < 0.02);
        }
        let check = superradiance_check(&tau, &curve.intensity, 1).unwrap();
        assert!(!check.is_superradiant);
    }

    #[test]
    fn truncation_guard_trips() {
        // good cavity, photons pile up in the mode
        let spec = SystemSpec::resonant(vec![5.0, 5.0], 0.5, 0.0, 2);
        let tau: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let err = full_me_intensity(&spec, &tau, &FullMeOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Truncation(_)));
    }
}
