//! Time integration of linear master equations.
//!
//! Two propagators are available: an adaptive Dormand-Prince 5(4) pair, and a
//! Krylov-subspace exponential for stiff generators where explicit stability
//! limits the step size.

use std::ops::{Add, Mul, Sub};

use faer::prelude::Solve;
use faer::Mat;

use super::{DensityState, Diagnostics, Liouvillian, PhysicalityTolerance};
use crate::error::{Error, Result};
use crate::operator::{CsrMatrix, C64};

/// Field element the Runge-Kutta stepper can work over.
pub trait OdeScalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl OdeScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl OdeScalar for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10, initial_step: None, max_steps: 10_000_000 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
}

// Dormand-Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` and calls `observer(k, times[k], y)` at every
/// requested time, starting with `times[0]`.
///
/// Steps are clipped so that each output time is hit exactly. The error norm is
/// the RMS of `err_i / (atol + rtol·max(|y_i|, |y_new_i|))`.
pub fn dormand_prince<T, F, O>(
    mut rhs: F,
    y0: &[T],
    times: &[f64],
    opts: &IntegratorOptions,
    mut observer: O,
) -> Result<StepStats>
where
    T: OdeScalar,
    F: FnMut(f64, &[T], &mut [T]),
    O: FnMut(usize, f64, &[T]) -> Result<()>,
{
    check_times(times)?;
    let n = y0.len();
    let mut stats = StepStats::default();
    let mut y = y0.to_vec();
    let mut t = times[0];
    observer(0, t, &y)?;
    if times.len() == 1 {
        return Ok(stats);
    }

    let mut k: Vec<Vec<T>> = vec![vec![T::zero(); n]; 7];
    let mut stage = vec![T::zero(); n];
    let mut y_new = vec![T::zero(); n];
    rhs(t, &y, &mut k[0]);
    stats.rhs_evaluations += 1;

    let span = times[times.len() - 1] - times[0];
    let mut h = opts.initial_step.unwrap_or_else(|| initial_step(&y, &k[0], opts, span));
    let mut next = 1;
    let mut err_prev: f64 = 1e-4;

    while next < times.len() {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Integration { last_good_time: t, reason: format!("exceeded {} steps", opts.max_steps) });
        }
        let target = times[next];
        let mut hit = false;
        if t + h >= target || (target - t - h) < 1e-12 * target.abs().max(1.0) {
            h = target - t;
            hit = true;
        }
        if !(h > 1e-14 * t.abs().max(span)) {
            return Err(Error::Integration { last_good_time: t, reason: format!("step size underflow (h = {h:.3e})") });
        }

        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        acc = acc + kj[i] * (h * a);
                    }
                }
                stage[i] = acc;
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            rhs(t + C[s] * h, &stage, &mut tail[0]);
            stats.rhs_evaluations += 1;
        }
        // stage 6 is evaluated at the fifth-order solution (FSAL)
        y_new.copy_from_slice(&stage);

        let mut err_sq = 0.0;
        for i in 0..n {
            let mut e = T::zero();
            for (j, kj) in k.iter().enumerate() {
                if E[j] != 0.0 {
                    e = e + kj[i] * (h * E[j]);
                }
            }
            let scale = opts.atol + opts.rtol * y[i].magnitude().max(y_new[i].magnitude());
            let r = e.magnitude() / scale;
            err_sq += r * r;
        }
        let err = (err_sq / n.max(1) as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::Integration { last_good_time: t, reason: "non-finite error estimate".into() });
        }

        if err <= 1.0 {
            stats.accepted += 1;
            t = if hit { target } else { t + h };
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
            // PI step-size controller
            let factor = if err == 0.0 { 5.0 } else { 0.9 * err.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0) };
            err_prev = err.max(1e-4);
            let h_new = h * factor.clamp(0.2, 5.0);
            if hit {
                observer(next, t, &y)?;
                next += 1;
            }
            h = h_new;
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    Ok(stats)
}

fn initial_step<T: OdeScalar>(y: &[T], f: &[T], opts: &IntegratorOptions, span: f64) -> f64 {
    let scale = |v: T, yi: T| v.magnitude() / (opts.atol + opts.rtol * yi.magnitude());
    let n = y.len().max(1) as f64;
    let d0 = (y.iter().map(|v| scale(*v, *v).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f.iter().zip(y).map(|(v, yi)| scale(*v, *yi).powi(2)).sum::<f64>() / n).sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span.max(1e-300) } else { 0.01 * d0 / d1 };
    h.min(span)
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Propagates `y' = L y` with Krylov approximations of `exp(hL) y`.
///
/// Each substep builds an Arnoldi basis of dimension `krylov_dim` at the
/// current state and shrinks `h` until the standard a-posteriori estimate
/// `‖y‖·h_{m+1,m}·|[exp(hH_m)]_{m,0}|` is below `rtol·‖y‖ + atol`.
pub fn krylov_propagate<O>(
    l: &CsrMatrix,
    y0: &[C64],
    times: &[f64],
    krylov_dim: usize,
    opts: &IntegratorOptions,
    mut observer: O,
) -> Result<StepStats>
where
    O: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    check_times(times)?;
    let n = y0.len();
    let m = krylov_dim.clamp(2, n.max(2));
    let mut stats = StepStats::default();
    let mut y = y0.to_vec();
    let mut t = times[0];
    observer(0, t, &y)?;
    let mut h = opts.initial_step.unwrap_or(f64::INFINITY);

    for (idx, &target) in times.iter().enumerate().skip(1) {
        while t < target {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(Error::Integration { last_good_time: t, reason: "exceeded step budget".into() });
            }
            let beta = vec_norm(&y);
            if beta == 0.0 {
                t = target;
                break;
            }
            let (basis, hess, breakdown) = arnoldi(l, &y, beta, m, &mut stats)?;
            let k = basis.len();
            let mut step = h.min(target - t);
            loop {
                let exp = small_expm(&hess, step, k)?;
                let err = if breakdown { 0.0 } else { beta * hess[(k, k - 1)].norm() * exp[(k - 1, 0)].norm() };
                if err <= opts.rtol * beta + opts.atol || step < 1e-14 * target.abs().max(1.0) {
                    if step < 1e-14 * target.abs().max(1.0) && err > opts.rtol * beta + opts.atol {
                        return Err(Error::Integration { last_good_time: t, reason: "Krylov step underflow".into() });
                    }
                    let coeffs: Vec<C64> = (0..k).map(|j| exp[(j, 0)] * beta).collect();
                    let mut y_new = vec![C64::new(0.0, 0.0); n];
                    for (j, v) in basis.iter().enumerate() {
                        let cj = coeffs[j];
                        y_new.iter_mut().zip(v).for_each(|(yi, vi)| *yi += cj * vi);
                    }
                    y = y_new;
                    stats.accepted += 1;
                    let full = step >= target - t;
                    t = if full { target } else { t + step };
                    // grow cautiously after an easy step
                    let ratio = if err > 0.0 { ((opts.rtol * beta + opts.atol) / err).powf(1.0 / m as f64) } else { 2.0 };
                    h = step * (0.9 * ratio).clamp(0.5, 2.0);
                    break;
                }
                stats.rejected += 1;
                let ratio = ((opts.rtol * beta + opts.atol) / err).powf(1.0 / m as f64);
                step *= (0.9 * ratio).clamp(0.1, 0.9);
            }
        }
        observer(idx, target, &y)?;
    }
    Ok(stats)
}

fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

type ArnoldiResult = (Vec<Vec<C64>>, Mat<C64>, bool);

fn arnoldi(l: &CsrMatrix, y: &[C64], beta: f64, m: usize, stats: &mut StepStats) -> Result<ArnoldiResult> {
    let n = y.len();
    let mut basis: Vec<Vec<C64>> = vec![y.iter().map(|v| v / beta).collect()];
    let mut hess = Mat::<C64>::zeros(m + 1, m);
    let mut w = vec![C64::new(0.0, 0.0); n];
    for j in 0..m {
        l.mul_vec_into(&basis[j], &mut w);
        stats.rhs_evaluations += 1;
        for (i, v) in basis.iter().enumerate() {
            let hij: C64 = v.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
            hess[(i, j)] = hij;
            w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= hij * vi);
        }
        let hn = vec_norm(&w);
        hess[(j + 1, j)] = C64::new(hn, 0.0);
        if hn <= 1e-13 * beta.max(1.0) {
            let k = j + 1;
            let trimmed = Mat::from_fn(k + 1, k, |r, c| hess[(r, c)]);
            return Ok((basis, trimmed, true));
        }
        if j + 1 < m {
            basis.push(w.iter().map(|v| v / hn).collect());
        }
    }
    Ok((basis, hess, false))
}

/// `exp(step · H_k)` for the leading `k×k` block of the Hessenberg matrix.
fn small_expm(hess: &Mat<C64>, step: f64, k: usize) -> Result<Mat<C64>> {
    let a = Mat::from_fn(k, k, |i, j| hess[(i, j)] * step);
    expm(&a)
}

/// Scaling-and-squaring with a diagonal [6/6] Padé approximant.
pub(crate) fn expm(a: &Mat<C64>) -> Result<Mat<C64>> {
    let n = a.nrows();
    let norm1 = (0..n).map(|j| (0..n).map(|i| a[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max);
    let s = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(s);
    let x = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);
    const Q: usize = 6;
    let mut c = 1.0;
    let mut num = Mat::<C64>::identity(n, n);
    let mut den = Mat::<C64>::identity(n, n);
    let mut power = Mat::<C64>::identity(n, n);
    for k in 1..=Q {
        c *= (Q - k + 1) as f64 / (k * (2 * Q - k + 1)) as f64;
        power = &power * &x;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        num = Mat::from_fn(n, n, |i, j| num[(i, j)] + power[(i, j)] * c);
        den = Mat::from_fn(n, n, |i, j| den[(i, j)] + power[(i, j)] * (c * sign));
    }
    let mut r = den.partial_piv_lu().solve(&num);
    if !(0..n).all(|i| r[(i, i)].re.is_finite()) {
        return Err(Error::Integration { last_good_time: f64::NAN, reason: "matrix exponential overflow".into() });
    }
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Propagator {
    RungeKutta,
    Krylov { dim: usize },
}

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub integrator: IntegratorOptions,
    pub propagator: Propagator,
    /// Reject any output state failing these thresholds.
    pub physicality: Option<PhysicalityTolerance>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            integrator: IntegratorOptions::default(),
            propagator: Propagator::RungeKutta,
            physicality: Some(PhysicalityTolerance::default()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct EvolveStats {
    pub steps: StepStats,
    /// Worst diagnostics seen over all output states.
    pub worst: Diagnostics,
}

/// Evolves `rho0` under `L` and hands each output state to `observer`.
pub fn evolve_with<O>(
    l: &Liouvillian,
    rho0: &DensityState,
    times: &[f64],
    opts: &EvolveOptions,
    mut observer: O,
) -> Result<EvolveStats>
where
    O: FnMut(usize, f64, &DensityState) -> Result<()>,
{
    if rho0.dims() != l.dims() {
        return Err(Error::Dimension(format!("state dims {:?} vs generator dims {:?}", rho0.dims(), l.dims())));
    }
    if let Some(tol) = &opts.physicality {
        rho0.check(tol)?;
    }
    if times.first().copied() != Some(0.0) {
        return Err(Error::InvalidParameter("time grid must start at 0".into()));
    }
    let mut worst = Diagnostics::ideal();
    let dims = l.dims().to_vec();
    let mut on_output = |k: usize, t: f64, y: &[C64]| -> Result<()> {
        let state = DensityState::from_column_stacked(y, dims.clone())?;
        let d = state.diagnostics();
        worst = worst.worst(d);
        if let Some(tol) = &opts.physicality {
            tol.check(&d).map_err(|e| Error::Integration { last_good_time: t, reason: e.to_string() })?;
        }
        observer(k, t, &state)
    };
    let y0 = rho0.to_column_stacked();
    let steps = match opts.propagator {
        Propagator::RungeKutta => {
            let m = l.matrix();
            dormand_prince(|_, y: &[C64], dy: &mut [C64]| m.mul_vec_into(y, dy), &y0, times, &opts.integrator, &mut on_output)?
        }
        Propagator::Krylov { dim } => krylov_propagate(l.matrix(), &y0, times, dim, &opts.integrator, &mut on_output)?,
    };
    Ok(EvolveStats { steps, worst })
}

/// Collects the evolved states on `times`.
pub fn evolve(l: &Liouvillian, rho0: &DensityState, times: &[f64], opts: &EvolveOptions) -> Result<Vec<DensityState>> {
    let mut out = Vec::with_capacity(times.len());
    evolve_with(l, rho0, times, opts, |_, _, s| {
        out.push(s.clone());
        Ok(())
    })?;
    Ok(out)
}
