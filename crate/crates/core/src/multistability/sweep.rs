use rayon::prelude::*;
use serde::Serialize;

use super::grid::{match_peaks, q_function, GridSpec, PhaseSpaceGrid, QOptions, QPeak};
use super::steady_amplitudes;
use crate::error::{Error, Result};
use crate::lindblad::{steady_state_with, DensityState, Diagnostics, Liouvillian, SteadyStateOptions, SteadyStateReport};
use crate::model::{build_driven, SystemSpec};
use crate::operator::{fock_truncation_for, partial_trace_field, C64};

/// Steady state of a driven model and its cavity marginal.
#[derive(Clone, Debug)]
pub struct SteadyField {
    pub report: SteadyStateReport,
    pub field: DensityState,
}

/// Identical emitters are exchanged automatically unless `opts` already names
/// the sites.
pub fn driven_steady_field(spec: &SystemSpec, opts: &SteadyStateOptions) -> Result<SteadyField> {
    let model = build_driven(spec)?;
    let l = Liouvillian::from_model(&model)?;
    let report = if opts.exchange_sites.is_none() && spec.n_qubits >= 2 && spec.emitters_interchangeable() {
        let opts = SteadyStateOptions { exchange_sites: Some((1..=spec.n_qubits).collect()), ..opts.clone() };
        steady_state_with(&l, &opts)?
    } else {
        steady_state_with(&l, opts)?
    };
    let field = partial_trace_field(&report.state)?;
    Ok(SteadyField { report, field })
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub steady: SteadyStateOptions,
    pub q: QOptions,
    pub grid_spacing: f64,
    pub grid_margin: f64,
    /// Upper bound on the rule-derived Fock truncation.
    pub truncation_cap: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            steady: SteadyStateOptions::default(),
            q: QOptions::default(),
            grid_spacing: 0.1,
            grid_margin: 3.0,
            truncation_cap: 200,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub drive: f64,
    pub fock_dim: usize,
    /// Predicted `(re, im)` amplitudes, `m = -1/2` first.
    pub predicted: Vec<(f64, f64)>,
    /// Detected peaks matched to `predicted`, in the same order.
    pub matched: Vec<Option<QPeak>>,
    /// Largest prediction-to-peak distance.
    pub distance: f64,
    pub peak_count: usize,
    pub relative_residual: f64,
    pub diagnostics: Diagnostics,
}

/// Steady-state Q-function peaks against the single-qubit amplitudes for each
/// drive in `drives`, solved in parallel. `base` must describe one qubit.
pub fn peak_sweep(base: &SystemSpec, drives: &[f64], opts: &SweepOptions) -> Result<Vec<SweepRow>> {
    if base.n_qubits != 1 {
        return Err(Error::InvalidParameter("the bistability sweep is defined for a single qubit".into()));
    }
    drives.par_iter().map(|&drive| sweep_point(base, drive, opts)).collect()
}

fn sweep_point(base: &SystemSpec, drive: f64, opts: &SweepOptions) -> Result<SweepRow> {
    let amps = steady_amplitudes(1, base.mean_coupling(), base.kappa, drive, None)?;
    let predicted: Vec<C64> = amps.iter().filter_map(|a| a.alpha).collect();
    if predicted.len() != 2 {
        return Err(Error::InvalidParameter(format!(
            "E = {drive} is below the threshold g/2 = {}; no bistable amplitudes",
            base.mean_coupling() / 2.0
        )));
    }
    let empty_cavity = C64::new(2.0 * drive / base.kappa, 0.0);
    let alpha_max = predicted.iter().chain([&empty_cavity]).map(|z| z.norm()).fold(0.0, f64::max);
    let fock_dim = fock_truncation_for(alpha_max, opts.truncation_cap);
    let spec = SystemSpec { drive, fock_dim, ..base.clone() };
    let steady = driven_steady_field(&spec, &opts.steady)?;
    let grid: PhaseSpaceGrid = q_function(
        &steady.field,
        &GridSpec::around(&[predicted[0], predicted[1], empty_cavity], opts.grid_margin, opts.grid_spacing),
        &opts.q,
    )?;
    let matches = match_peaks(&predicted, &grid.peaks);
    Ok(SweepRow {
        drive,
        fock_dim,
        predicted: predicted.iter().map(|z| (z.re, z.im)).collect(),
        matched: matches.iter().map(|m| m.peak.map(|j| grid.peaks[j])).collect(),
        distance: matches.iter().map(|m| m.distance).fold(0.0, f64::max),
        peak_count: grid.peaks.len(),
        relative_residual: steady.report.relative_residual(),
        diagnostics: steady.report.state.diagnostics(),
    })
}
