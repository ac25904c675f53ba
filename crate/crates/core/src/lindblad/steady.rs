//! Steady states of a Liouvillian.
//!
//! The null vector of `L` is found from the bordered system
//!
//! ```text
//! [ L   t ] [ x ]   [ 0 ]
//! [ tᵀ  0 ] [ λ ] = [ 1 ]
//! ```
//!
//! where `t` is the trace functional (`tᵀ vec(ρ) = tr ρ`). Because `tᵀ L = 0`,
//! `t` is outside the range of `L` whenever the null space is one-dimensional,
//! and the bordered matrix is then nonsingular with `λ = 0` at the solution.

use faer::prelude::Solve;
use faer::Mat;

use super::{DensityState, ExchangeReduction, Liouvillian, PhysicalityTolerance};
use crate::error::{Error, Result};
use crate::operator::{CsrMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SteadyMethod {
    /// Direct factorisation up to `direct_max_rows`, Krylov above.
    Auto,
    Direct,
    Iterative,
}

#[derive(Clone, Debug)]
pub struct SteadyStateOptions {
    pub method: SteadyMethod,
    /// Largest bordered system handed to the sparse LU under [`SteadyMethod::Auto`].
    pub direct_max_rows: usize,
    pub gmres_restart: usize,
    pub gmres_max_iterations: usize,
    pub gmres_tolerance: f64,
    /// Acceptance bound on `‖L vec(ρ)‖₂ / ‖L‖_F`.
    pub residual_tolerance: f64,
    /// Check null-space uniqueness by dense SVD up to this superoperator side.
    pub uniqueness_check_max_side: usize,
    pub physicality: PhysicalityTolerance,
    /// Interchangeable emitter subsystems. When set, the solve is carried out
    /// on the exchange-symmetric subspace, which requires `L` to commute with
    /// their permutations; see [`ExchangeReduction`].
    pub exchange_sites: Option<Vec<usize>>,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            method: SteadyMethod::Auto,
            direct_max_rows: 150_000,
            gmres_restart: 120,
            gmres_max_iterations: 20_000,
            gmres_tolerance: 1e-13,
            residual_tolerance: 1e-9,
            uniqueness_check_max_side: 900,
            physicality: PhysicalityTolerance::default(),
            exchange_sites: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub enum Uniqueness {
    /// Ratio of the second-smallest to the largest singular value of `L`.
    Verified { relative_gap: f64 },
    /// Too large for a dense SVD; uniqueness was not checked.
    Assumed,
}

#[derive(Clone, Debug)]
pub struct SteadyStateReport {
    pub state: DensityState,
    /// `‖L vec(ρ_ss)‖₂`
    pub residual: f64,
    /// `‖L‖_F`
    pub liouvillian_norm: f64,
    pub method: SteadyMethod,
    pub iterations: usize,
    pub uniqueness: Uniqueness,
}

impl SteadyStateReport {
    pub fn relative_residual(&self) -> f64 {
        self.residual / self.liouvillian_norm
    }
}

fn bordered(matrix: &CsrMatrix, trace: &[(usize, C64)]) -> Result<CsrMatrix> {
    let n = matrix.nrows();
    let mut triplets: Vec<(usize, usize, C64)> = matrix.iter().collect();
    for &(k, v) in trace {
        triplets.push((k, n, v));
        triplets.push((n, k, v));
    }
    CsrMatrix::from_triplets(n + 1, n + 1, triplets)
}

pub fn steady_state(l: &Liouvillian) -> Result<SteadyStateReport> {
    steady_state_with(l, &SteadyStateOptions::default())
}

pub fn steady_state_with(l: &Liouvillian, opts: &SteadyStateOptions) -> Result<SteadyStateReport> {
    let n = l.side();
    let reduction = match &opts.exchange_sites {
        Some(sites) => Some(ExchangeReduction::new(l.dims(), sites)?),
        None => None,
    };
    let reduced;
    let (matrix, trace) = match &reduction {
        Some(red) => {
            reduced = red.reduce(l.matrix(), 1e-12)?;
            (&reduced, red.reduced_trace())
        }
        None => (l.matrix(), l.trace_indices().map(|k| (k, C64::new(1.0, 0.0))).collect()),
    };
    let m = matrix.nrows();
    let system = bordered(matrix, &trace)?;
    let mut rhs = vec![C64::new(0.0, 0.0); m + 1];
    rhs[m] = C64::new(1.0, 0.0);

    let method = match opts.method {
        SteadyMethod::Auto if m < opts.direct_max_rows => SteadyMethod::Direct,
        SteadyMethod::Auto => SteadyMethod::Iterative,
        other => other,
    };
    let (y, iterations) = match method {
        SteadyMethod::Direct => (solve_direct(&system, &rhs)?, 0),
        _ => gmres(&system, &rhs, opts)?,
    };
    let x = match &reduction {
        Some(red) => red.expand(&y[..m]),
        None => y,
    };

    let raw = DensityState::from_column_stacked(&x[..n], l.dims().to_vec())?;
    let state = raw.hermitized_normalized()?;
    let residual = l.matrix().mul_vec(&state.to_column_stacked()).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let liouvillian_norm = l.frobenius_norm();
    if !(residual <= opts.residual_tolerance * liouvillian_norm) {
        return Err(Error::Solver {
            residual,
            reason: format!(
                "steady-state residual exceeds {:.1e}·‖L‖ (‖L‖ = {liouvillian_norm:.3e})",
                opts.residual_tolerance
            ),
        });
    }
    let uniqueness = if n <= opts.uniqueness_check_max_side { check_uniqueness(l)? } else { Uniqueness::Assumed };
    if let Uniqueness::Verified { relative_gap } = uniqueness {
        if relative_gap < 1e-12 {
            return Err(Error::Solver {
                residual,
                reason: format!("steady state is not unique (relative singular gap {relative_gap:.2e})"),
            });
        }
    }
    state.check(&opts.physicality)?;
    Ok(SteadyStateReport { state, residual, liouvillian_norm, method, iterations, uniqueness })
}

fn solve_direct(system: &CsrMatrix, rhs: &[C64]) -> Result<Vec<C64>> {
    let csc = system.to_faer_csc()?;
    let lu = csc.sp_lu().map_err(|e| Error::Solver {
        residual: f64::NAN,
        reason: format!("sparse LU failed: {e:?}"),
    })?;
    let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    let x = lu.solve(&b);
    Ok((0..rhs.len()).map(|i| x[(i, 0)]).collect())
}

fn check_uniqueness(l: &Liouvillian) -> Result<Uniqueness> {
    let dense = l.matrix().to_dense();
    let sv = dense
        .singular_values()
        .map_err(|e| Error::Solver { residual: f64::NAN, reason: format!("SVD failed: {e:?}") })?;
    // singular values come sorted in nonincreasing order
    let largest = sv[0];
    let second_smallest = sv[sv.len() - 2];
    Ok(Uniqueness::Verified { relative_gap: second_smallest / largest })
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Restarted GMRES with right Jacobi preconditioning.
fn gmres(a: &CsrMatrix, b: &[C64], opts: &SteadyStateOptions) -> Result<(Vec<C64>, usize)> {
    let n = b.len();
    let inv_diag: Vec<C64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d.norm() > 0.0 { d.inv() } else { C64::new(1.0, 0.0) })
        .collect();
    let m = opts.gmres_restart.max(2);
    let b_norm = norm(b);
    let mut x = vec![C64::new(0.0, 0.0); n];
    let mut iterations = 0;
    let mut w = vec![C64::new(0.0, 0.0); n];
    let mut z = vec![C64::new(0.0, 0.0); n];

    loop {
        let ax = a.mul_vec(&x);
        let r: Vec<C64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        if beta <= opts.gmres_tolerance * b_norm {
            return Ok((x, iterations));
        }
        if iterations >= opts.gmres_max_iterations {
            return Err(Error::Solver {
                residual: beta / b_norm,
                reason: format!("GMRES did not converge in {iterations} iterations"),
            });
        }

        let mut basis: Vec<Vec<C64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess = vec![vec![C64::new(0.0, 0.0); m]; m + 1];
        let mut cs = vec![C64::new(0.0, 0.0); m];
        let mut sn = vec![C64::new(0.0, 0.0); m];
        let mut g = vec![C64::new(0.0, 0.0); m + 1];
        g[0] = C64::new(beta, 0.0);
        let mut k_used = 0;

        for k in 0..m {
            for i in 0..n {
                z[i] = inv_diag[i] * basis[k][i];
            }
            a.mul_vec_into(&z, &mut w);
            // modified Gram-Schmidt
            for (j, v) in basis.iter().enumerate() {
                let h = dot(v, &w);
                hess[j][k] = h;
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= h * vi);
            }
            let h_next = norm(&w);
            hess[k + 1][k] = C64::new(h_next, 0.0);
            for j in 0..k {
                let t = cs[j].conj() * hess[j][k] + sn[j].conj() * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let (hk, hk1) = (hess[k][k], hess[k + 1][k]);
            let denom = (hk.norm_sqr() + hk1.norm_sqr()).sqrt();
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = hk / denom;
            sn[k] = hk1 / denom;
            hess[k][k] = C64::new(denom, 0.0);
            hess[k + 1][k] = C64::new(0.0, 0.0);
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k].conj() * g[k];
            iterations += 1;
            k_used = k + 1;
            if g[k + 1].norm() <= opts.gmres_tolerance * b_norm || h_next == 0.0 || iterations >= opts.gmres_max_iterations {
                break;
            }
            basis.push(w.iter().map(|v| v / h_next).collect());
        }

        // back substitution for the least-squares coefficients
        let mut y = vec![C64::new(0.0, 0.0); k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hess[i][j] * y[j];
            }
            y[i] = s / hess[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                x[i] += inv_diag[i] * basis[j][i] * yj;
            }
        }
    }
}
