//! Acceptance suite: one verdict line per criterion. Set `ACCEPTANCE_STRICT`
//! to turn any FAIL into a nonzero exit. Criteria run one after another so
//! the large steady-state solves never share memory.

use std::f64::consts::TAU;
use std::io::Write;
use std::time::{Duration, Instant};

use dicke_core::lindblad::{evolve, expectation, Diagnostics, EvolveOptions, IntegratorOptions, Liouvillian, PhysicalityTolerance};
use dicke_core::model::{build_tavis_cummings, SystemSpec, ThreeLevel};
use dicke_core::multistability::{
    driven_steady_field, match_peaks, q_function, steady_amplitudes, BistableParams, BistableQ, GridSpec, PhaseSpaceGrid,
    QOptions, SteadyField,
};
use dicke_core::operator::{fock_truncation_for, StateVector, C64};
use dicke_core::quadrature::adaptive_kronrod;
use dicke_core::superradiance::{
    analytic_intensity, dicke_ladder_closed_form, dicke_ladder_evolve, full_me_intensity, superradiance_check, FullMeOptions,
};
use dicke_core::DensityState;
use dicke_sim::presets::{self, DEVICE_N3};
use dicke_sim::scenario::high_frequency_residual;

const SPACING: f64 = 0.1;
const PEAK_TOL: f64 = 1.5 * SPACING;

struct Verdict {
    passed: bool,
    lines: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self { passed: true, lines: vec![] }
    }

    /// Records a sub-check; the verdict fails if any sub-check does.
    fn check(&mut self, ok: bool, line: String) {
        self.passed &= ok;
        self.lines.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, line: String) {
        self.lines.push(format!("info {line}"));
    }
}

/// Worst physicality figures of one evolution or steady state.
struct Physical {
    label: String,
    worst: Diagnostics,
    relative_residual: Option<f64>,
}

fn steady_record(label: &str, sf: &SteadyField) -> Physical {
    Physical { label: label.into(), worst: sf.report.state.diagnostics(), relative_residual: Some(sf.report.relative_residual()) }
}

fn mhz(spec: SystemSpec) -> SystemSpec {
    SystemSpec::from_mhz(&spec)
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn tight() -> IntegratorOptions {
    IntegratorOptions { rtol: 1e-11, atol: 1e-13, ..IntegratorOptions::default() }
}

// Printed closed forms, typed independently of the library.
fn printed_intensity(n: usize, t: f64) -> f64 {
    match n {
        3 => 3.0 * (-3.0 * t).exp() * (12.0 * t - 7.0) + 24.0 * (-4.0 * t).exp(),
        4 => (72.0 * t + 96.0) * (-6.0 * t).exp() + 4.0 * (-4.0 * t).exp() * (36.0 * t - 23.0),
        5 => 5.0 / 3.0 * (162.0 * (-9.0 * t).exp() + 16.0 * (-8.0 * t).exp() * (24.0 * t - 1.0) + (-5.0 * t).exp() * (240.0 * t - 143.0)),
        _ => unreachable!(),
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
    while b - a > 1e-12 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

fn criterion_1(v: &mut Verdict) {
    let tau: Vec<f64> = (0..=300).map(|k| k as f64 * 0.01).collect();
    for n in 3..=5 {
        let closed = dicke_ladder_closed_form(n, &tau).unwrap().intensity;
        let ode = dicke_ladder_evolve(n, &tau, &tight()).unwrap().intensity;
        let printed: Vec<f64> = tau.iter().map(|&t| printed_intensity(n, t)).collect();
        let library: Vec<f64> = tau.iter().map(|&t| analytic_intensity(n, t).unwrap()).collect();
        let (a, b, c, d) = (sup(&closed, &ode), sup(&closed, &printed), sup(&ode, &printed), sup(&library, &printed));
        v.check(
            a < 1e-6 && b < 1e-6 && c < 1e-6 && d < 1e-12,
            format!("N={n}: sup|closed-ode| {a:.1e}, sup|closed-printed| {b:.1e}, sup|ode-printed| {c:.1e}, library vs printed {d:.1e}"),
        );
    }
}

fn criterion_2(v: &mut Verdict) {
    for (n, quoted) in [(3, 3.2), (4, 4.9), (5, 6.9)] {
        let (t, i_max) = golden_max(|t| printed_intensity(n, t), 0.0, 1.5);
        v.check((i_max - quoted).abs() <= 0.05, format!("N={n}: I_max = {i_max:.4} at tau = {t:.4}, quoted {quoted}"));
    }
}

fn criterion_3(v: &mut Verdict, phys: &mut Vec<Physical>) {
    let tau: Vec<f64> = (0..=300).map(|k| k as f64 * 0.01).collect();
    let base = mhz(SystemSpec::resonant(DEVICE_N3.to_vec(), 2000.0, 0.19, 8));
    let srme = dicke_ladder_evolve(3, &tau, &IntegratorOptions::default()).unwrap();
    let pk_srme = superradiance_check(&tau, &srme.intensity, 3).unwrap();
    let run = |spec: &SystemSpec| {
        let curve = full_me_intensity(spec, &tau, &FullMeOptions::default()).unwrap();
        let pk = superradiance_check(&tau, &curve.intensity, 3).unwrap();
        (pk, (pk.i_max - pk_srme.i_max).abs() / pk_srme.i_max, curve.stats.worst)
    };
    let (pk, rel, worst) = run(&base);
    phys.push(Physical { label: "N=3 emission at kappa = 2 GHz".into(), worst, relative_residual: None });
    v.check(pk.i_max > 3.0, format!("full master equation I_max = {:.4} at tau = {:.4} (> 3)", pk.i_max, pk.tau_max));
    v.check(rel < 0.1, format!("peak vs ladder: {:.4} against {:.4}, relative error {rel:.4} (< 0.1)", pk.i_max, pk_srme.i_max));
    let gbar = base.mean_coupling();
    let mut errors = vec![];
    for ratio in [10.0, 20.0, 40.0] {
        let spec = SystemSpec { kappa: ratio * gbar, ..base.clone() };
        let (_, rel, worst) = run(&spec);
        phys.push(Physical { label: format!("N=3 evolution at kappa/g = {ratio}"), worst, relative_residual: None });
        errors.push(rel);
    }
    v.check(
        errors[1] < errors[0] && errors[2] < errors[1],
        format!("relative peak error at kappa/g = 10, 20, 40: {:.5}, {:.5}, {:.5}", errors[0], errors[1], errors[2]),
    );
}

fn criterion_4(v: &mut Verdict, phys: &mut Vec<Physical>) {
    let tau: Vec<f64> = (0..=300).map(|k| k as f64 * 0.01).collect();
    let two = mhz(SystemSpec::resonant(DEVICE_N3.to_vec(), 2000.0, 0.19, 8));
    let three = two.clone().with_three_level(ThreeLevel::new(660.0 * TAU));
    let c2 = full_me_intensity(&two, &tau, &FullMeOptions::default()).unwrap();
    let c3 = full_me_intensity(&three, &tau, &FullMeOptions::default()).unwrap();
    phys.push(Physical { label: "N=3 two-level emission".into(), worst: c2.stats.worst, relative_residual: None });
    phys.push(Physical { label: "N=3 three-level emission".into(), worst: c3.stats.worst, relative_residual: None });
    let upper = c3.upper_population.as_ref().unwrap().iter().copied().fold(0.0, f64::max);
    v.check(upper < 1e-2, format!("max third-level population {upper:.3e} (< 1e-2)"));
    let p2 = superradiance_check(&tau, &c2.intensity, 3).unwrap();
    let p3 = superradiance_check(&tau, &c3.intensity, 3).unwrap();
    let rel = (p3.i_max - p2.i_max).abs() / p2.i_max;
    v.check(rel < 0.1, format!("peaks {:.4} (three-level) vs {:.4} (two-level), relative {rel:.4} (< 0.1)", p3.i_max, p2.i_max));
    let period = TAU * c3.rates.gamma / (660.0 * TAU);
    let window = ((period / 0.01).round() as usize) | 1;
    let (h3, h2) = (high_frequency_residual(&c3.intensity, window, 2 * window), high_frequency_residual(&c2.intensity, window, 2 * window));
    v.check(h3 > 2.0 * h2 && h3 > 1e-3, format!("high-frequency residual {h3:.3e} vs {h2:.3e} without the third level"));
}

fn criterion_5(v: &mut Verdict) {
    for ratio in [0.05, 0.5, 1.9] {
        let params = BistableParams { coupling: 85.0, kappa: 4.0, relaxation: ratio * 4.0, drive: 20.0 };
        let q = BistableQ::new(params).unwrap();
        let (x0, c) = (2.0 * params.drive / params.kappa, params.coupling / params.kappa);
        let inner = |x: f64| adaptive_kronrod(|y| q.eval(x, y).unwrap(), -c - 8.0, c + 8.0, 1e-13, 1e-11, 4000).unwrap().value;
        let total = adaptive_kronrod(inner, x0 - 8.0, x0 + 8.0, 1e-12, 1e-10, 400).unwrap().value;
        v.check((total - 1.0).abs() < 1e-3, format!("gamma/kappa = {ratio}: double integral {total:.8}"));
    }
    for ratio in [2.0, 2.5] {
        let params = BistableParams { coupling: 85.0, kappa: 4.0, relaxation: ratio * 4.0, drive: 20.0 };
        let rejected = BistableQ::new(params).is_err() && dicke_core::multistability::analytic_q_bistable(10.0, 0.0, params).is_err();
        v.check(rejected, format!("gamma/kappa = {ratio} rejected as outside the bistable regime"));
    }
}

/// Q-peaks of `sf` with the truncation guard switched off, matched to `predicted`.
fn unguarded_peaks(sf: &SteadyField, predicted: &[C64]) -> (PhaseSpaceGrid, Vec<dicke_core::multistability::PeakMatch>) {
    let grid = q_function(&sf.field, &GridSpec::around(predicted, 3.0, SPACING), &QOptions { top_fock_tolerance: 1.0, ..QOptions::default() })
        .unwrap();
    let matches = match_peaks(predicted, &grid.peaks);
    (grid, matches)
}

fn heights(q: &[f64]) -> String {
    q.iter().map(|q| format!("{q:.4}")).collect::<Vec<_>>().join("/")
}

fn fmt_points(z: &[C64]) -> String {
    z.iter().map(|z| format!("({:.4}, {:.4})", z.re, z.im)).collect::<Vec<_>>().join(", ")
}

fn describe(grid: &PhaseSpaceGrid) -> String {
    let list: Vec<String> = grid.peaks.iter().map(|p| format!("({:.3}, {:.3}) Q={:.4}", p.x, p.y, p.value)).collect();
    list.join(", ")
}

fn criterion_6(v: &mut Verdict, phys: &mut Vec<Physical>) {
    let (g, e) = (2.0, 4.0);
    let amps = steady_amplitudes(1, g, 1.0, e, None).unwrap();
    let predicted: Vec<C64> = amps.iter().filter_map(|a| a.alpha).collect();
    // independent check of α± = f(2Ef ± ig)/κ with f = sqrt(1 - (g/2E)²)
    let f = (1.0 - (g / (2.0 * e)).powi(2)).sqrt();
    let oracle = [C64::new(2.0 * e * f * f, -g * f), C64::new(2.0 * e * f * f, g * f)];
    let amp_err = predicted.iter().zip(&oracle).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    v.check(amp_err < 1e-12, format!("predicted amplitudes {} match f(2Ef ± ig)/κ ({amp_err:.1e})", fmt_points(&predicted)));

    let spec = SystemSpec::resonant(vec![g], 1.0, 0.05, 40).with_drive(e);
    let sf = driven_steady_field(&spec, &Default::default()).unwrap();
    phys.push(steady_record("N=1 steady state, truncation 40", &sf));
    let top = sf.field.population(39);
    let guarded = q_function(&sf.field, &GridSpec::around(&predicted, 3.0, SPACING), &QOptions::default());
    v.check(guarded.is_ok(), format!("truncation 40: top Fock population {top:.2e} against the 1e-6 guard"));
    let (grid, matches) = unguarded_peaks(&sf, &predicted);
    let dist = matches.iter().map(|m| m.distance).fold(0.0, f64::max);
    v.check(
        grid.peaks.len() == 2 && dist <= PEAK_TOL,
        format!("truncation 40, guard off: {} peaks [{}], largest distance {dist:.3} (limit {PEAK_TOL:.2})", grid.peaks.len(), describe(&grid)),
    );

    let alpha_max = predicted.iter().map(|z| z.norm()).fold(2.0 * e, f64::max);
    let fock = fock_truncation_for(alpha_max, 200);
    let sf = driven_steady_field(&SystemSpec { fock_dim: fock, ..spec }, &Default::default()).unwrap();
    phys.push(steady_record("N=1 steady state, rule truncation", &sf));
    let grid = q_function(&sf.field, &GridSpec::around(&predicted, 3.0, SPACING), &QOptions::default()).unwrap();
    let matches = match_peaks(&predicted, &grid.peaks);
    let dist = matches.iter().map(|m| m.distance).fold(0.0, f64::max);
    v.note(format!(
        "truncation {fock} from the (|alpha|+5)^2 rule: {} peaks [{}], largest distance {dist:.3}, top population {:.1e}",
        grid.peaks.len(),
        describe(&grid),
        sf.field.population(fock - 1)
    ));

    let dir = tempfile::tempdir().unwrap();
    let mut cfg = presets::preset("bistability-peak-sweep").unwrap();
    cfg.output.directory = dir.path().to_str().unwrap().into();
    let summary = dicke_sim::run_scenario(&cfg).unwrap();
    for c in &summary.checks {
        v.check(c.passed, format!("peak sweep {}: {}", c.name, c.detail));
    }
    let w = &summary.metrics["diagnostics"];
    let d = Diagnostics {
        trace_defect: w["trace_defect"].as_f64().unwrap(),
        hermiticity_defect: w["hermiticity_defect"].as_f64().unwrap(),
        min_eigenvalue: w["min_eigenvalue"].as_f64().unwrap(),
    };
    phys.push(Physical {
        label: "peak sweep steady states (worst)".into(),
        worst: d,
        relative_residual: summary.metrics["max_relative_residual"].as_f64(),
    });
}

fn multistable_run(v: &mut Verdict, phys: &mut Vec<Physical>, gbar: f64, drive: f64, fock: usize) {
    let spec = mhz(SystemSpec::resonant(vec![gbar; 3], 42.4, 0.19, fock).with_drive(drive));
    let amps = steady_amplitudes(3, spec.mean_coupling(), spec.kappa, spec.drive, None).unwrap();
    let predicted: Vec<C64> = amps.iter().filter_map(|a| a.alpha).collect();
    let sf = driven_steady_field(&spec, &Default::default()).unwrap();
    phys.push(steady_record(&format!("N=3 steady state, g/kappa = {:.2}", gbar / 42.4), &sf));
    let mut points = predicted.clone();
    points.push(C64::new(2.0 * spec.drive / spec.kappa, 0.0));
    let grid = q_function(&sf.field, &GridSpec::around(&points, 3.0, SPACING), &QOptions::default()).unwrap();
    let matches = match_peaks(&predicted, &grid.peaks);
    let dist: Vec<String> = amps
        .iter()
        .zip(&matches)
        .map(|(a, m)| if m.peak.is_some() { format!("m={:+}: {:.3}", a.m, m.distance) } else { format!("m={:+}: none", a.m) })
        .collect();
    let value_at = |z: C64| {
        let ix = ((z.re - grid.xs[0]) / SPACING).round() as usize;
        let iy = ((z.im - grid.ys[0]) / SPACING).round() as usize;
        grid.value(ix, iy)
    };
    let q_pred: Vec<String> = amps.iter().zip(&predicted).map(|(a, z)| format!("m={:+}: {:.4}", a.m, value_at(*z))).collect();
    let header = format!("g/kappa = {:.2}, E/kappa = {:.2}, truncation {fock}", gbar / 42.4, drive / 42.4);
    v.check(grid.peaks.len() == 4, format!("{header}: {} peaks detected [{}]", grid.peaks.len(), describe(&grid)));
    v.check(
        matches.iter().all(|m| m.peak.is_some() && m.distance <= PEAK_TOL),
        format!("distances to predicted amplitudes {} (limit {PEAK_TOL:.2})", dist.join(", ")),
    );
    let q = |m: f64| {
        amps.iter()
            .zip(&matches)
            .filter(|(a, _)| a.m.abs() == m)
            .map(|(_, mt)| mt.peak.map_or(0.0, |j| grid.peaks[j].value))
            .collect::<Vec<_>>()
    };
    let (centre, outer) = (q(0.5), q(1.5));
    let taller = outer.iter().all(|&o| o > 0.0) && centre.iter().cloned().fold(f64::INFINITY, f64::min) > outer.iter().cloned().fold(0.0, f64::max);
    v.check(taller, format!("peak heights: centre {}, outer {}", heights(&centre), heights(&outer)));
    v.note(format!("Q at the predicted amplitudes: {}", q_pred.join(", ")));
}

fn criterion_7(v: &mut Verdict, phys: &mut Vec<Physical>) {
    multistable_run(v, phys, 42.4, 84.8, 40);
}

fn criterion_8(v: &mut Verdict, phys: &[Physical]) {
    let tol = PhysicalityTolerance::default();
    for p in phys {
        let residual_ok = p.relative_residual.is_none_or(|r| r <= 1e-9);
        let residual = p.relative_residual.map_or(String::new(), |r| format!(", residual {r:.1e}"));
        v.check(
            tol.check(&p.worst).is_ok() && residual_ok,
            format!(
                "{}: trace {:.1e}, hermiticity {:.1e}, min eigenvalue {:.1e}{residual}",
                p.label, p.worst.trace_defect, p.worst.hermiticity_defect, p.worst.min_eigenvalue
            ),
        );
    }
    v.check(!phys.is_empty(), format!("{} evolutions and steady states inspected", phys.len()));
}

fn criterion_9(v: &mut Verdict, phys: &mut Vec<Physical>) {
    // driven empty cavity against a coherent state built here
    let (kappa, e, dim) = (1.0, 1.1, 30);
    let spec = SystemSpec::resonant(vec![0.0], kappa, 0.3, dim).with_drive(e);
    let sf = driven_steady_field(&spec, &Default::default()).unwrap();
    phys.push(steady_record("driven empty cavity", &sf));
    let alpha = 2.0 * e / kappa;
    let mut amp = vec![C64::new((-alpha * alpha / 2.0f64).exp(), 0.0)];
    for n in 1..dim {
        let prev = amp[n - 1];
        amp.push(prev * alpha / (n as f64).sqrt());
    }
    let m = sf.field.matrix();
    let fidelity: f64 = (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).map(|(i, j)| (amp[i].conj() * m[(i, j)] * amp[j]).re).sum();
    v.check(fidelity >= 1.0 - 1e-6, format!("empty cavity fidelity with |2E/kappa> = {fidelity:.10}"));

    let opts = EvolveOptions { integrator: tight(), ..EvolveOptions::default() };
    let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.25).collect();

    let spec = SystemSpec::resonant(vec![0.0], kappa, 0.0, 6);
    let model = build_tavis_cummings(&spec).unwrap();
    let l = Liouvillian::from_model(&model).unwrap();
    let rho0 = DensityState::pure(&StateVector::product_basis(model.dims(), &[3, 0]).unwrap()).unwrap();
    let states = evolve(&l, &rho0, &times, &opts).unwrap();
    let number = model.photon_number().unwrap();
    let err = states.iter().zip(&times).map(|(s, t)| (expectation(s, &number).unwrap().re - 3.0 * (-kappa * t).exp()).abs()).fold(0.0, f64::max);
    let worst = states.iter().fold(Diagnostics::ideal(), |w, s| w.worst(s.diagnostics()));
    phys.push(Physical { label: "cavity decay".into(), worst, relative_residual: None });
    v.check(err < 1e-6, format!("cavity decay from n0 = 3: max |<n> - n0 exp(-kappa t)| = {err:.1e}"));

    let g = 1.0;
    let spec = SystemSpec::resonant(vec![g], 0.0, 0.0, 3);
    let model = build_tavis_cummings(&spec).unwrap();
    let l = Liouvillian::from_model(&model).unwrap();
    let rho0 = DensityState::pure(&model.fully_excited_state().unwrap()).unwrap();
    let states = evolve(&l, &rho0, &times, &opts).unwrap();
    let pe = model.level_population(0, 1).unwrap();
    let err = states.iter().zip(&times).map(|(s, t)| (expectation(s, &pe).unwrap().re - (g * t).cos().powi(2)).abs()).fold(0.0, f64::max);
    let worst = states.iter().fold(Diagnostics::ideal(), |w, s| w.worst(s.diagnostics()));
    phys.push(Physical { label: "lossless Rabi oscillation".into(), worst, relative_residual: None });
    v.check(err < 1e-6, format!("vacuum Rabi: max |P_e - cos^2(gt)| = {err:.1e}"));
}

fn main() {
    let mut phys: Vec<Physical> = vec![];
    let mut results: Vec<(u8, &str, bool)> = vec![];
    let mut stdout = std::io::stdout();

    // e.g. ACCEPTANCE_CRITERIA=1,2,5 runs a subset
    let only: Option<Vec<u8>> =
        std::env::var("ACCEPTANCE_CRITERIA").ok().map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |n: u8| only.as_ref().is_none_or(|o| o.contains(&n));

    macro_rules! run {
        ($n:expr, $title:expr, $budget:expr, $body:expr) => {{
            if wanted($n) {
                let start = Instant::now();
                let mut v = Verdict::new();
                $body(&mut v);
                let elapsed = start.elapsed();
                let budget = Duration::from_secs($budget);
                v.check(elapsed < budget, format!("runtime {:.1} s (budget {} s)", elapsed.as_secs_f64(), $budget));
                writeln!(stdout, "criterion {} {:<28} {}", $n, $title, if v.passed { "PASS" } else { "FAIL" }).unwrap();
                for line in &v.lines {
                    writeln!(stdout, "    {line}").unwrap();
                }
                stdout.flush().unwrap();
                results.push(($n, $title, v.passed));
            }
        }};
    }

    run!(1, "oracle equivalence", 5, |v: &mut Verdict| criterion_1(v));
    run!(2, "quoted peak values", 1, |v: &mut Verdict| criterion_2(v));
    run!(3, "bad-cavity convergence", 120, |v: &mut Verdict| criterion_3(v, &mut phys));
    run!(4, "three-level robustness", 300, |v: &mut Verdict| criterion_4(v, &mut phys));
    run!(5, "analytic Q normalisation", 60, |v: &mut Verdict| criterion_5(v));
    run!(6, "bistability peaks", 600, |v: &mut Verdict| criterion_6(v, &mut phys));
    run!(7, "multistability desk scale", 900, |v: &mut Verdict| criterion_7(v, &mut phys));
    run!(9, "closed-form controls", 60, |v: &mut Verdict| criterion_9(v, &mut phys));
    run!(8, "physicality invariants", 10, |v: &mut Verdict| criterion_8(v, &phys));

    let passed = results.iter().filter(|r| r.2).count();
    writeln!(stdout, "acceptance: {passed}/{} criteria passed", results.len()).unwrap();
    if passed != results.len() {
        let failed: Vec<String> = results.iter().filter(|r| !r.2).map(|r| format!("{} ({})", r.0, r.1)).collect();
        writeln!(stdout, "failed: {}", failed.join(", ")).unwrap();
        // verdicts above are authoritative; the exit code only gates in strict mode
        if std::env::var_os("ACCEPTANCE_STRICT").is_some() {
            std::process::exit(1);
        }
    }
}
