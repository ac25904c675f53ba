use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::operator::{ComplexOperator, StateVector, Storage, C64};

/// Validity figures for a density matrix.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Diagnostics {
    /// `|tr ρ - 1|`
    pub trace_defect: f64,
    /// `max |ρ - ρ†|`
    pub hermiticity_defect: f64,
    /// Smallest eigenvalue of the Hermitian part.
    pub min_eigenvalue: f64,
}

impl Diagnostics {
    /// Component-wise worst case of two diagnostics records.
    pub fn worst(self, other: Diagnostics) -> Diagnostics {
        Diagnostics {
            trace_defect: self.trace_defect.max(other.trace_defect),
            hermiticity_defect: self.hermiticity_defect.max(other.hermiticity_defect),
            min_eigenvalue: self.min_eigenvalue.min(other.min_eigenvalue),
        }
    }

    pub fn ideal() -> Diagnostics {
        Diagnostics { trace_defect: 0.0, hermiticity_defect: 0.0, min_eigenvalue: f64::INFINITY }
    }
}

/// Acceptance thresholds applied to states produced by the engine.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalityTolerance {
    pub trace: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: f64,
}

impl Default for PhysicalityTolerance {
    fn default() -> Self {
        Self { trace: 1e-8, hermiticity: 1e-8, min_eigenvalue: -1e-7 }
    }
}

impl PhysicalityTolerance {
    pub fn check(&self, d: &Diagnostics) -> Result<()> {
        if !(d.trace_defect < self.trace) {
            return Err(Error::Unphysical(format!("trace defect {:.3e}", d.trace_defect)));
        }
        if !(d.hermiticity_defect < self.hermiticity) {
            return Err(Error::Unphysical(format!("hermiticity defect {:.3e}", d.hermiticity_defect)));
        }
        if !(d.min_eigenvalue > self.min_eigenvalue) {
            return Err(Error::Unphysical(format!("minimum eigenvalue {:.3e}", d.min_eigenvalue)));
        }
        Ok(())
    }
}

/// Density matrix with its subsystem dimensions and validity diagnostics.
#[derive(Clone, Debug)]
pub struct DensityState {
    matrix: Mat<C64>,
    dims: Vec<usize>,
    diagnostics: Diagnostics,
}

impl DensityState {
    /// Wraps a matrix without enforcing physicality; see [`DensityState::check`].
    pub fn from_matrix(matrix: Mat<C64>, dims: Vec<usize>) -> Result<Self> {
        let side: usize = dims.iter().product();
        if matrix.nrows() != matrix.ncols() || matrix.nrows() != side || dims.is_empty() {
            return Err(Error::Dimension(format!(
                "{}x{} matrix does not match dims {dims:?}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let diagnostics = diagnose(&matrix);
        Ok(Self { matrix, dims, diagnostics })
    }

    pub fn pure(psi: &StateVector) -> Result<Self> {
        Self::from_matrix(psi.projector(), psi.dims().to_vec())
    }

    /// Rebuilds a state from its column-stacked vectorisation.
    pub fn from_column_stacked(v: &[C64], dims: Vec<usize>) -> Result<Self> {
        let d: usize = dims.iter().product();
        if v.len() != d * d {
            return Err(Error::Dimension(format!("vector length {} vs dims {dims:?}", v.len())));
        }
        Self::from_matrix(Mat::from_fn(d, d, |i, j| v[i + j * d]), dims)
    }

    pub fn to_column_stacked(&self) -> Vec<C64> {
        let d = self.matrix.nrows();
        let mut v = Vec::with_capacity(d * d);
        for j in 0..d {
            for i in 0..d {
                v.push(self.matrix[(i, j)]);
            }
        }
        v
    }

    pub fn matrix(&self) -> &Mat<C64> {
        &self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    pub fn check(&self, tol: &PhysicalityTolerance) -> Result<()> {
        tol.check(&self.diagnostics)
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)]).sum()
    }

    /// `(ρ + ρ†) / (2 tr ρ)`.
    pub fn hermitized_normalized(&self) -> Result<Self> {
        let tr = self.trace().re;
        if !(tr.abs() > 0.0) {
            return Err(Error::Unphysical("state has zero trace".into()));
        }
        let m = &self.matrix;
        let out = Mat::from_fn(self.dim(), self.dim(), |i, j| (m[(i, j)] + m[(j, i)].conj()) / (2.0 * tr));
        Self::from_matrix(out, self.dims.clone())
    }

    /// Population of basis state `i`.
    pub fn population(&self, i: usize) -> f64 {
        self.matrix[(i, i)].re
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_with_pure(&self, psi: &StateVector) -> Result<f64> {
        if psi.dims() != self.dims() {
            return Err(Error::Dimension(format!("{:?} vs {:?}", psi.dims(), self.dims())));
        }
        let a = psi.amplitudes();
        let mut s = C64::new(0.0, 0.0);
        for j in 0..self.dim() {
            let col: C64 = a.iter().enumerate().map(|(i, ai)| ai.conj() * self.matrix[(i, j)]).sum();
            s += col * a[j];
        }
        Ok(s.re)
    }

    /// Uhlmann fidelity `(tr √(√ρ σ √ρ))²`.
    pub fn fidelity(&self, other: &DensityState) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::Dimension(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        let n = self.dim();
        let herm = |m: &Mat<C64>| Mat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
        let evd = herm(&self.matrix)
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Solver { residual: f64::NAN, reason: format!("{e:?}") })?;
        let u = evd.U();
        let s = evd.S();
        // eigenvalues at rounding level are zeroed; their square roots would
        // otherwise add O(√ε) noise to the result
        let floor = |ev: &[f64]| 1e-14 * ev.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let ev_rho: Vec<f64> = (0..n).map(|k| s[k].re).collect();
        let cut = floor(&ev_rho);
        let root = |x: f64| if x > cut { x.sqrt() } else { 0.0 };
        let sqrt_rho = Mat::from_fn(n, n, |i, j| (0..n).map(|k| u[(i, k)] * root(ev_rho[k]) * u[(j, k)].conj()).sum::<C64>());
        let inner = &sqrt_rho * herm(&other.matrix) * &sqrt_rho;
        let ev = herm(&inner)
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Solver { residual: f64::NAN, reason: format!("{e:?}") })?;
        let cut = floor(&ev);
        let total: f64 = ev.iter().filter(|&&x| x > cut).map(|x| x.sqrt()).sum();
        Ok(total * total)
    }
}

fn diagnose(m: &Mat<C64>) -> Diagnostics {
    let n = m.nrows();
    let mut trace = C64::new(0.0, 0.0);
    let mut herm = 0.0f64;
    for j in 0..n {
        trace += m[(j, j)];
        for i in 0..=j {
            herm = herm.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    let hermitian_part = Mat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    let min_eigenvalue = hermitian_part
        .self_adjoint_eigenvalues(Side::Lower)
        .ok()
        .and_then(|ev| ev.first().copied())
        .unwrap_or(f64::NAN);
    Diagnostics {
        trace_defect: (trace - C64::new(1.0, 0.0)).norm(),
        hermiticity_defect: herm,
        min_eigenvalue,
    }
}

/// `tr(O ρ)`.
pub fn expectation(rho: &DensityState, op: &ComplexOperator) -> Result<C64> {
    if rho.dims() != op.dims() {
        return Err(Error::Dimension(format!(
            "state dims {:?} vs operator dims {:?}",
            rho.dims(),
            op.dims()
        )));
    }
    let m = rho.matrix();
    Ok(match op.storage() {
        Storage::Sparse(o) => o.iter().map(|(i, j, v)| v * m[(j, i)]).sum(),
        Storage::Dense(o) => {
            let n = m.nrows();
            let mut s = C64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    s += o[(i, j)] * m[(j, i)];
                }
            }
            s
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{annihilation, coherent_state};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn vacuum_photon_number() {
        let a = annihilation(5).unwrap();
        let n = a.adjoint().matmul(&a).unwrap();
        let vac = DensityState::pure(&StateVector::fock(5, 0).unwrap()).unwrap();
        assert_eq!(expectation(&vac, &n).unwrap(), C64::new(0.0, 0.0));
        assert!(expectation(&vac, &annihilation(4).unwrap()).is_err());
    }

    #[test]
    fn coherent_field_expectation() {
        let alpha = C64::new(0.8, -0.4);
        let rho = DensityState::pure(&coherent_state(alpha, 30).unwrap()).unwrap();
        let value = expectation(&rho, &annihilation(30).unwrap()).unwrap();
        assert_abs_diff_eq!((value - alpha).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn pure_state_diagnostics_and_fidelity() {
        let psi = coherent_state(C64::new(0.5, 0.5), 12).unwrap();
        let rho = DensityState::pure(&psi).unwrap();
        let d = rho.diagnostics();
        assert!(d.trace_defect < 1e-14 && d.hermiticity_defect == 0.0);
        assert!(d.min_eigenvalue > -1e-14);
        assert!(rho.check(&PhysicalityTolerance::default()).is_ok());
        assert_abs_diff_eq!(rho.fidelity_with_pure(&psi).unwrap(), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(rho.fidelity(&rho).unwrap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn unphysical_state_is_flagged() {
        let m = Mat::from_fn(2, 2, |i, j| if i == j { C64::new([1.2, -0.2][i], 0.0) } else { C64::new(0.0, 0.0) });
        let rho = DensityState::from_matrix(m, vec![2]).unwrap();
        assert!(matches!(rho.check(&PhysicalityTolerance::default()), Err(Error::Unphysical(_))));
    }

    fn random_hermitian(n: usize, seed: &[f64]) -> Mat<C64> {
        let raw = Mat::from_fn(n, n, |i, j| C64::new(seed[(i * n + j) % seed.len()], seed[(j * n + i + 3) % seed.len()]));
        Mat::from_fn(n, n, |i, j| (raw[(i, j)] + raw[(j, i)].conj()) * 0.5)
    }

    proptest! {
        #[test]
        fn hermitian_pairs_have_real_expectations(seed in prop::collection::vec(-1.0f64..1.0, 16..40)) {
            let n = 4;
            let rho = DensityState::from_matrix(random_hermitian(n, &seed), vec![n]).unwrap();
            let rev: Vec<f64> = seed.iter().rev().copied().collect();
            let op = ComplexOperator::from_dense(random_hermitian(n, &rev), vec![n]).unwrap();
            let value = expectation(&rho, &op).unwrap();
            prop_assert!(value.im.abs() <= 1e-10);
        }
    }
}
