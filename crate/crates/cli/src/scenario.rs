//! Scenario execution: engine calls, built-in checks and file output.

use std::f64::consts::TAU;

use dicke_core::lindblad::{Diagnostics, EvolveOptions, IntegratorOptions, PhysicalityTolerance, SteadyStateOptions};
use dicke_core::model::SystemSpec;
use dicke_core::multistability::{
    driven_steady_field, find_q_peaks, match_peaks, peak_sweep, q_function, steady_amplitudes, BistableParams, BistableQ,
    GridSpec, PhaseSpaceGrid, QOptions, QuadratureScheme, SweepOptions,
};
use dicke_core::operator::{fock_truncation_for, C64};
use dicke_core::superradiance::{
    analytic_intensity, dicke_ladder_closed_form, dicke_ladder_evolve, full_me_intensity, superradiance_check, FullMeOptions,
    MAX_CLOSED_FORM_QUBITS,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Analysis, Numerics, ScenarioConfig};
use crate::error::CliError;
use crate::output::Output;

/// Bordered steady-state systems above this many rows need
/// `numerics.allow_large`; the sparse LU needs several GB beyond it.
pub const LARGE_SYSTEM_ROWS: usize = 150_000;

/// Peak positions must match predictions within this many grid spacings.
pub const PEAK_TOLERANCE_SPACINGS: f64 = 1.5;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub analysis: Analysis,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub metrics: Value,
    pub files: Vec<String>,
}

/// One entry of the peak table.
#[derive(Clone, Debug, Serialize)]
pub struct PeakRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drive_mhz: Option<f64>,
    pub l: f64,
    pub m: f64,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub q_value: Option<f64>,
    pub alpha_predicted_re: f64,
    pub alpha_predicted_im: f64,
    pub distance: Option<f64>,
}

struct Outcome {
    checks: Vec<Check>,
    metrics: Value,
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    let mut out = Output::new(cfg)?;
    log::info!("running {} ({:?}) into {}", cfg.scenario, cfg.analysis, out.dir().display());
    let outcome = match cfg.analysis {
        Analysis::Superradiance => superradiance(cfg, &mut out)?,
        Analysis::KappaSweep => kappa_sweep(cfg, &mut out)?,
        Analysis::ThreeLevelCompare => three_level(cfg, &mut out)?,
        Analysis::BistabilityQ => bistability_q(cfg, &mut out)?,
        Analysis::PeakSweep => bistability_sweep(cfg, &mut out)?,
        Analysis::Multistability => multistability(cfg, &mut out)?,
    };
    let mut files = out.files().to_vec();
    files.push(format!("{}_summary.json", cfg.scenario));
    let summary = RunSummary {
        scenario: cfg.scenario.clone(),
        analysis: cfg.analysis,
        passed: outcome.checks.iter().all(|c| c.passed),
        checks: outcome.checks,
        metrics: outcome.metrics,
        files,
    };
    out.json_always("summary", "summary", &summary)?;
    Ok(summary)
}

fn tau_grid(n: &Numerics) -> Vec<f64> {
    let k = (n.tau_max / n.tau_step).round() as usize;
    (0..=k).map(|i| i as f64 * n.tau_step).collect()
}

fn integrator(n: &Numerics) -> IntegratorOptions {
    IntegratorOptions { rtol: n.rtol, atol: n.atol, ..IntegratorOptions::default() }
}

fn full_options(n: &Numerics) -> FullMeOptions {
    FullMeOptions {
        evolve: EvolveOptions { integrator: integrator(n), ..EvolveOptions::default() },
        top_fock_tolerance: n.top_fock_tolerance,
        ..FullMeOptions::default()
    }
}

fn physicality_check(worst: &Diagnostics, residual: Option<f64>) -> Check {
    let tol = PhysicalityTolerance::default();
    let state_ok = tol.check(worst).is_ok();
    let residual_ok = residual.is_none_or(|r| r <= 1e-9);
    let detail = match residual {
        Some(r) => format!(
            "trace {:.2e}, hermiticity {:.2e}, min eigenvalue {:.2e}, relative residual {r:.2e}",
            worst.trace_defect, worst.hermiticity_defect, worst.min_eigenvalue
        ),
        None => format!(
            "trace {:.2e}, hermiticity {:.2e}, min eigenvalue {:.2e}",
            worst.trace_defect, worst.hermiticity_defect, worst.min_eigenvalue
        ),
    };
    Check::new("physicality", state_ok && residual_ok, detail)
}

fn superradiance(cfg: &ScenarioConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let n = &cfg.numerics;
    let spec = cfg.spec(n.truncation.expect("validated"))?;
    let nq = spec.n_qubits;
    let tau = tau_grid(n);
    let full = full_me_intensity(&spec, &tau, &full_options(n)).map_err(CliError::engine("full master equation"))?;
    let srme = dicke_ladder_evolve(nq, &tau, &integrator(n)).map_err(CliError::engine("ladder ODE"))?;
    let analytic: Option<Vec<f64>> = if (3..=5).contains(&nq) {
        Some(tau.iter().map(|&t| analytic_intensity(nq, t)).collect::<Result<_, _>>().map_err(CliError::engine("closed form"))?)
    } else if nq <= MAX_CLOSED_FORM_QUBITS {
        Some(dicke_ladder_closed_form(nq, &tau).map_err(CliError::engine("closed form"))?.intensity)
    } else {
        None
    };
    out.csv(
        "",
        &["tau", "I_full_me", "I_srme_ode", "I_analytic"],
        (0..tau.len()).map(|k| vec![tau[k], full.intensity[k], srme.intensity[k], analytic.as_ref().map_or(f64::NAN, |a| a[k])]),
    )?;
    let pk_full = superradiance_check(&tau, &full.intensity, nq).map_err(CliError::engine("peak search"))?;
    let pk_srme = superradiance_check(&tau, &srme.intensity, nq).map_err(CliError::engine("peak search"))?;
    let discrepancy = (pk_full.i_max - pk_srme.i_max).abs() / pk_srme.i_max;
    let mut checks = vec![
        Check::new(
            "superradiant",
            pk_full.is_superradiant,
            format!("I_max = {:.4} at tau = {:.4} against {nq} for independent emitters", pk_full.i_max, pk_full.tau_max),
        ),
        Check::new("peak_matches_ladder", discrepancy < 0.1, format!("relative peak discrepancy {discrepancy:.4} (limit 0.1)")),
    ];
    let mut analytic_sup = None;
    if let Some(a) = &analytic {
        let sup = a.iter().zip(&srme.intensity).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        analytic_sup = Some(sup);
        checks.push(Check::new("closed_form_matches_ode", sup < 1e-6, format!("sup |I_analytic - I_ode| = {sup:.2e}")));
    }
    checks.push(physicality_check(&full.stats.worst, None));
    let metrics = json!({
        "full_me": pk_full,
        "srme": pk_srme,
        "relative_peak_discrepancy": discrepancy,
        "analytic_vs_ode_sup": analytic_sup,
        "bad_cavity_ratio": full.bad_cavity_ratio,
        "rates": full.rates,
        "top_fock_max": full.top_fock_max,
        "diagnostics": full.stats.worst,
        "steps": full.stats.steps,
    });
    Ok(Outcome { checks, metrics })
}

#[derive(Serialize)]
struct KappaRow {
    kappa_over_gbar: f64,
    kappa_mhz: f64,
    i_max_full_me: f64,
    tau_max_full_me: f64,
    relative_discrepancy: f64,
    diagnostics: Diagnostics,
}

fn kappa_sweep(cfg: &ScenarioConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let n = &cfg.numerics;
    let nq = cfg.n_emitters();
    let tau = tau_grid(n);
    let srme = dicke_ladder_evolve(nq, &tau, &integrator(n)).map_err(CliError::engine("ladder ODE"))?;
    let pk_srme = superradiance_check(&tau, &srme.intensity, nq).map_err(CliError::engine("peak search"))?;
    let gbar_mhz = cfg.system.couplings.iter().sum::<f64>() / nq as f64;
    let mut ratios = cfg.sweep.bad_cavity_ratios.clone();
    ratios.sort_by(f64::total_cmp);
    let rows: Vec<KappaRow> = ratios
        .par_iter()
        .map(|&r| {
            let mut c = cfg.clone();
            c.system.kappa = r * gbar_mhz;
            let spec = c.spec(n.truncation.expect("validated"))?;
            let curve = full_me_intensity(&spec, &tau, &full_options(n)).map_err(CliError::engine(format!("full master equation at κ/ḡ = {r}")))?;
            let pk = superradiance_check(&tau, &curve.intensity, nq).map_err(CliError::engine("peak search"))?;
            Ok(KappaRow {
                kappa_over_gbar: r,
                kappa_mhz: c.system.kappa,
                i_max_full_me: pk.i_max,
                tau_max_full_me: pk.tau_max,
                relative_discrepancy: (pk.i_max - pk_srme.i_max).abs() / pk_srme.i_max,
                diagnostics: curve.stats.worst,
            })
        })
        .collect::<Result<_, CliError>>()?;
    out.csv(
        "",
        &["kappa_over_gbar", "kappa_mhz", "I_max_full_me", "tau_max_full_me", "I_max_srme", "relative_discrepancy"],
        rows.iter().map(|r| vec![r.kappa_over_gbar, r.kappa_mhz, r.i_max_full_me, r.tau_max_full_me, pk_srme.i_max, r.relative_discrepancy]),
    )?;
    let decreasing = rows.windows(2).all(|w| w[1].relative_discrepancy < w[0].relative_discrepancy);
    let listing: Vec<String> = rows.iter().map(|r| format!("{}: {:.5}", r.kappa_over_gbar, r.relative_discrepancy)).collect();
    let worst = rows.iter().fold(Diagnostics::ideal(), |w, r| w.worst(r.diagnostics));
    let checks = vec![
        Check::new("discrepancy_decreasing", decreasing, format!("relative peak discrepancy by κ/ḡ: {}", listing.join(", "))),
        Check::new(
            "superradiant",
            rows.iter().all(|r| r.i_max_full_me > nq as f64),
            format!("I_max per point: {:?}", rows.iter().map(|r| r.i_max_full_me).collect::<Vec<_>>()),
        ),
        physicality_check(&worst, None),
    ];
    Ok(Outcome { checks, metrics: json!({ "srme": pk_srme, "points": rows, "diagnostics": worst }) })
}

/// Largest deviation of `values` from its running mean over `window`
/// samples, from sample `skip` on and ignoring the far edge.
pub fn high_frequency_residual(values: &[f64], window: usize, skip: usize) -> f64 {
    let h = window / 2;
    if values.len() < 2 * h + 1 || h == 0 {
        return 0.0;
    }
    (h.max(skip)..values.len() - h)
        .map(|k| {
            let mean = values[k - h..=k + h].iter().sum::<f64>() / (2 * h + 1) as f64;
            (values[k] - mean).abs()
        })
        .fold(0.0, f64::max)
}

fn three_level(cfg: &ScenarioConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let n = &cfg.numerics;
    let fock = n.truncation.expect("validated");
    let nq = cfg.n_emitters();
    let tau = tau_grid(n);
    let three_spec = cfg.spec(fock)?;
    let two_spec = SystemSpec { three_level: None, ..three_spec.clone() };
    let (two, three) = rayon::join(
        || full_me_intensity(&two_spec, &tau, &full_options(n)).map_err(CliError::engine("two-level master equation")),
        || full_me_intensity(&three_spec, &tau, &full_options(n)).map_err(CliError::engine("three-level master equation")),
    );
    let (two, three) = (two?, three?);
    let upper = three.upper_population.clone().expect("qutrit run records the f population");
    out.csv(
        "",
        &["tau", "I_two_level", "I_three_level", "P_third_level"],
        (0..tau.len()).map(|k| vec![tau[k], two.intensity[k], three.intensity[k], upper[k]]),
    )?;
    let pk2 = superradiance_check(&tau, &two.intensity, nq).map_err(CliError::engine("peak search"))?;
    let pk3 = superradiance_check(&tau, &three.intensity, nq).map_err(CliError::engine("peak search"))?;
    let max_upper = upper.iter().copied().fold(0.0, f64::max);
    let peak_difference = (pk3.i_max - pk2.i_max).abs() / pk2.i_max;
    // one period of the e-f detuning in τ units
    let alpha_r = three_spec.three_level.as_ref().expect("validated").anharmonicity.abs();
    let period = TAU * three.rates.gamma / alpha_r;
    let window = ((period / n.tau_step).round() as usize) | 1;
    // the first two windows hold the photon build-up, which no filter of
    // this width follows
    let hf_three = high_frequency_residual(&three.intensity, window, 2 * window);
    let hf_two = high_frequency_residual(&two.intensity, window, 2 * window);
    let checks = vec![
        Check::new("third_level_negligible", max_upper < 1e-2, format!("max third-level population {max_upper:.3e} (limit 1e-2)")),
        Check::new("peaks_agree", peak_difference < 0.1, format!("relative peak difference {peak_difference:.4} (limit 0.1)")),
        Check::new(
            "oscillations_present",
            hf_three > 2.0 * hf_two && hf_three > 1e-3,
            format!("high-frequency residual {hf_three:.3e} against {hf_two:.3e} for two levels (window {window} samples)"),
        ),
        physicality_check(&two.stats.worst.worst(three.stats.worst), None),
    ];
    let metrics = json!({
        "two_level": pk2,
        "three_level": pk3,
        "max_third_level_population": max_upper,
        "relative_peak_difference": peak_difference,
        "high_frequency_residual": { "three_level": hf_three, "two_level": hf_two, "window": window },
        "diagnostics": two.stats.worst.worst(three.stats.worst),
    });
    Ok(Outcome { checks, metrics })
}

fn single_emitter(cfg: &ScenarioConfig) -> Result<(), CliError> {
    if cfg.n_emitters() != 1 {
        return Err(CliError::Config(format!("{:?} is defined for one emitter, got {}", cfg.analysis, cfg.n_emitters())));
    }
    Ok(())
}

fn bistability_q(cfg: &ScenarioConfig, out: &mut Output) -> Result<Outcome, CliError> {
    single_emitter(cfg)?;
    let n = &cfg.numerics;
    let spec = cfg.spec(2)?;
    let params = BistableParams { coupling: spec.couplings[0], kappa: spec.kappa, relaxation: spec.relaxation[0], drive: spec.drive };
    let mut q = BistableQ::new(params).map_err(CliError::engine("closed-form Q"))?;
    if let Some(order) = n.quadrature_order {
        q = BistableQ::with_scheme(params, QuadratureScheme::GaussJacobi { order }).map_err(CliError::engine("closed-form Q"))?;
    }
    let x0 = 2.0 * params.drive / params.kappa;
    let c = params.coupling.abs() / params.kappa;
    let reach = n.grid_margin + 2.0;
    let spec_grid = GridSpec { x_min: x0 - reach, x_max: x0 + reach, y_min: -(c + reach), y_max: c + reach, spacing: n.grid_spacing };
    let mut grid = PhaseSpaceGrid::sample(&spec_grid, |x, y| q.eval(x, y)).map_err(CliError::engine("Q grid"))?;
    grid.peaks = find_q_peaks(&grid, n.min_prominence);
    out.csv("grid", &["x", "y", "Q"], grid_rows(&grid))?;
    let slice: Vec<Vec<f64>> = grid.ys.iter().map(|&y| q.eval(x0, y).map(|v| vec![y, v])).collect::<Result<_, _>>().map_err(CliError::engine("Q slice"))?;
    out.csv("slice", &["y", "Q"], slice)?;
    let sum = grid.riemann_sum();
    let near = |p: &&dicke_core::QPeak| (p.x - x0).abs() <= n.grid_spacing * PEAK_TOLERANCE_SPACINGS && (p.y.abs() - c).abs() < 0.5;
    let placed = grid.peaks.len() == 2 && grid.peaks.iter().filter(near).count() == 2 && grid.peaks[0].y * grid.peaks[1].y < 0.0;
    let checks = vec![
        Check::new("normalised", (sum - 1.0).abs() < 1e-3, format!("grid sum {sum:.6}")),
        Check::new(
            "two_peaks_at_plus_minus_g_over_kappa",
            placed,
            format!("peaks {:?} against (2E/κ, ±g/κ) = ({x0:.3}, ±{c:.3})", grid.peaks.iter().map(|p| (p.x, p.y)).collect::<Vec<_>>()),
        ),
    ];
    let metrics = json!({
        "weight_exponent": params.weight_exponent(),
        "riemann_sum": sum,
        "peaks": grid.peaks,
        "x_slice": x0,
        "g_over_kappa": c,
    });
    Ok(Outcome { checks, metrics })
}

fn grid_rows(grid: &PhaseSpaceGrid) -> impl Iterator<Item = Vec<f64>> + '_ {
    (0..grid.ys.len()).flat_map(move |iy| (0..grid.xs.len()).map(move |ix| vec![grid.xs[ix], grid.ys[iy], grid.value(ix, iy)]))
}

fn require_size(cfg: &ScenarioConfig, rows: usize) -> Result<(), CliError> {
    if rows > LARGE_SYSTEM_ROWS && !cfg.numerics.allow_large {
        return Err(CliError::Config(format!(
            "the steady-state system has {rows} rows (limit {LARGE_SYSTEM_ROWS}); set numerics.allow_large = true to attempt it"
        )));
    }
    Ok(())
}

fn bistability_sweep(cfg: &ScenarioConfig, out: &mut Output) -> Result<Outcome, CliError> {
    single_emitter(cfg)?;
    let n = &cfg.numerics;
    let base = cfg.spec(2)?;
    let mut drives_mhz = cfg.sweep.drives.clone();
    drives_mhz.sort_by(f64::total_cmp);
    for &e in &drives_mhz {
        // mirrors the cutoff rule inside the sweep
        let amps = steady_amplitudes(1, base.mean_coupling(), base.kappa, e * TAU, None).map_err(CliError::engine("amplitudes"))?;
        let alpha_max = amps.iter().filter_map(|a| a.alpha).map(|z| z.norm()).fold(2.0 * e * TAU / base.kappa, f64::max);
        let fock = fock_truncation_for(alpha_max, n.truncation_cap);
        require_size(cfg, 4 * fock * fock + 1)?;
    }
    let opts = SweepOptions {
        steady: SteadyStateOptions::default(),
        q: QOptions { top_fock_tolerance: n.top_fock_tolerance, min_prominence: n.min_prominence },
        grid_spacing: n.grid_spacing,
        grid_margin: n.grid_margin,
        truncation_cap: n.truncation_cap,
    };
    let drives: Vec<f64> = drives_mhz.iter().map(|e| e * TAU).collect();
    let rows = peak_sweep(&base, &drives, &opts).map_err(CliError::engine("peak sweep"))?;
    let nan = f64::NAN;
    out.csv(
        "",
        &[
            "E_mhz", "fock_dim", "alpha_minus_re", "alpha_minus_im", "peak_minus_x", "peak_minus_y", "alpha_plus_re", "alpha_plus_im",
            "peak_plus_x", "peak_plus_y", "distance", "peak_count",
        ],
        rows.iter().zip(&drives_mhz).map(|(r, &e)| {
            let (pm, pp) = (r.matched[0], r.matched[1]);
            vec![
                e,
                r.fock_dim as f64,
                r.predicted[0].0,
                r.predicted[0].1,
                pm.map_or(nan, |p| p.x),
                pm.map_or(nan, |p| p.y),
                r.predicted[1].0,
                r.predicted[1].1,
                pp.map_or(nan, |p| p.x),
                pp.map_or(nan, |p| p.y),
                r.distance,
                r.peak_count as f64,
            ]
        }),
    )?;
    let records: Vec<PeakRecord> = rows
        .iter()
        .zip(&drives_mhz)
        .flat_map(|(r, &e)| {
            (0..2).map(move |k| {
                let p = r.matched[k];
                let pred = C64::new(r.predicted[k].0, r.predicted[k].1);
                PeakRecord {
                    drive_mhz: Some(e),
                    l: 0.5,
                    m: if k == 0 { -0.5 } else { 0.5 },
                    x: p.map(|p| p.x),
                    y: p.map(|p| p.y),
                    q_value: p.map(|p| p.value),
                    alpha_predicted_re: pred.re,
                    alpha_predicted_im: pred.im,
                    distance: p.map(|p| (p.position() - pred).norm()),
                }
            })
        })
        .collect();
    out.json("peaks", "peaks", &records)?;
    let distances: Vec<f64> = rows.iter().map(|r| r.distance).collect();
    let decreasing = distances.windows(2).all(|w| w[1] < w[0]);
    let last = *distances.last().expect("validated non-empty");
    let worst = rows.iter().fold(Diagnostics::ideal(), |w, r| w.worst(r.diagnostics));
    let residual = rows.iter().map(|r| r.relative_residual).fold(0.0, f64::max);
    let checks = vec![
        Check::new("distance_decreasing_with_drive", decreasing, format!("distances {distances:?}")),
        Check::new("large_drive_coincides", last < n.grid_spacing, format!("distance {last:.4} at the largest drive (grid spacing {})", n.grid_spacing)),
        physicality_check(&worst, Some(residual)),
    ];
    Ok(Outcome { checks, metrics: json!({ "rows": rows, "diagnostics": worst, "max_relative_residual": residual }) })
}

/// Number of `(i, j)` index orbits of `k` interchangeable sites with local
/// dimension `d`: multisets of size `k` over `d²` digit pairs.
fn exchange_orbits(k: usize, d: usize) -> usize {
    let n = d * d;
    // C(n + k - 1, k)
    (1..=k).fold(1usize, |acc, i| acc * (n + i - 1) / i)
}

fn multistability(cfg: &ScenarioConfig, out: &mut Output) -> Result<Outcome, CliError> {
    let n = &cfg.numerics;
    let nq = cfg.n_emitters();
    let probe = cfg.spec(2)?;
    let amps = steady_amplitudes(nq, probe.mean_coupling(), probe.kappa, probe.drive, None).map_err(CliError::engine("amplitudes"))?;
    if let Some(a) = amps.iter().find(|a| !a.is_defined()) {
        return Err(CliError::Config(format!(
            "E = {} MHz is below |m|ḡ for m = {}; no steady amplitude",
            cfg.system.drive, a.m
        )));
    }
    let predicted: Vec<C64> = amps.iter().filter_map(|a| a.alpha).collect();
    let empty = C64::new(2.0 * probe.drive / probe.kappa, 0.0);
    let alpha_max = predicted.iter().chain([&empty]).map(|z| z.norm()).fold(0.0, f64::max);
    let fock = n.truncation.unwrap_or_else(|| fock_truncation_for(alpha_max, n.truncation_cap));
    let spec = cfg.spec(fock)?;
    let local = if spec.three_level.is_some() { 3 } else { 2 };
    let rows = if nq >= 2 && spec.emitters_interchangeable() {
        fock * fock * exchange_orbits(nq, local) + 1
    } else {
        (fock * local.pow(nq as u32)).pow(2) + 1
    };
    require_size(cfg, rows)?;
    let steady = driven_steady_field(&spec, &SteadyStateOptions::default()).map_err(CliError::engine("steady state"))?;
    let mut points = predicted.clone();
    points.push(empty);
    let grid = q_function(
        &steady.field,
        &GridSpec::around(&points, n.grid_margin, n.grid_spacing),
        &QOptions { top_fock_tolerance: n.top_fock_tolerance, min_prominence: n.min_prominence },
    )
    .map_err(CliError::engine("Q-function"))?;
    out.csv("grid", &["x", "y", "Q"], grid_rows(&grid))?;
    let matches = match_peaks(&predicted, &grid.peaks);
    let records: Vec<PeakRecord> = amps
        .iter()
        .zip(&predicted)
        .zip(&matches)
        .map(|((a, z), m)| {
            let p = m.peak.map(|j| grid.peaks[j]);
            PeakRecord {
                drive_mhz: None,
                l: a.l,
                m: a.m,
                x: p.map(|p| p.x),
                y: p.map(|p| p.y),
                q_value: p.map(|p| p.value),
                alpha_predicted_re: z.re,
                alpha_predicted_im: z.im,
                distance: p.map(|_| m.distance),
            }
        })
        .collect();
    out.json("peaks", "peaks", &records)?;

    let tol = PEAK_TOLERANCE_SPACINGS * n.grid_spacing;
    let max_distance = matches.iter().map(|m| m.distance).fold(0.0, f64::max);
    let unmatched = matches.iter().filter(|m| m.peak.is_none()).count();
    let mut checks = vec![
        Check::new(
            "peak_count",
            grid.peaks.len() == predicted.len(),
            format!("{} peaks detected, {} predicted", grid.peaks.len(), predicted.len()),
        ),
        Check::new(
            "peaks_match_prediction",
            matches.iter().all(|m| m.peak.is_some() && m.distance <= tol),
            if unmatched > 0 {
                format!("{unmatched} predicted amplitudes without a peak")
            } else {
                format!("largest distance {max_distance:.4} (limit {tol:.3})")
            },
        ),
    ];
    if nq >= 2 {
        let m_min = amps.iter().map(|a| a.m.abs()).fold(f64::INFINITY, f64::min);
        let value = |r: &PeakRecord| r.q_value.unwrap_or(0.0);
        let centre = records.iter().filter(|r| r.m.abs() == m_min).map(value).fold(f64::INFINITY, f64::min);
        let outer = records.iter().filter(|r| r.m.abs() != m_min).map(value).fold(0.0, f64::max);
        let all_found = records.iter().all(|r| r.q_value.is_some());
        checks.push(Check::new(
            "centre_peaks_taller",
            all_found && centre > outer,
            format!("smallest centre peak {centre:.5}, largest outer peak {outer:.5}"),
        ));
    }
    let sum = grid.riemann_sum();
    checks.push(Check::new("grid_captures_state", (0.98..=1.001).contains(&sum), format!("grid sum {sum:.5}")));
    let top = steady.field.population(fock - 1);
    checks.push(physicality_check(&steady.report.state.diagnostics(), Some(steady.report.relative_residual())));
    let metrics = json!({
        "fock_dim": fock,
        "steady_state_rows": rows,
        "method": steady.report.method,
        "uniqueness": steady.report.uniqueness,
        "relative_residual": steady.report.relative_residual(),
        "top_fock_population": top,
        "riemann_sum": sum,
        "peaks": grid.peaks,
        "max_distance": max_distance,
    });
    Ok(Outcome { checks, metrics })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orbit_count_formula() {
        assert_eq!(exchange_orbits(3, 2), 20);
        assert_eq!(exchange_orbits(2, 2), 10);
        assert_eq!(exchange_orbits(1, 3), 9);
    }

    #[test]
    fn running_mean_removes_slow_trends() {
        let slow: Vec<f64> = (0..200).map(|k| k as f64 * 0.01).collect();
        assert!(high_frequency_residual(&slow, 11, 0) < 1e-12);
        let fast: Vec<f64> = (0..200).map(|k| (k as f64 * TAU / 11.0).sin()).collect();
        assert!(high_frequency_residual(&fast, 11, 0) > 0.9);
    }
}
