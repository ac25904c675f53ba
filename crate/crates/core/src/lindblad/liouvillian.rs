//! Vectorised Lindblad generator.
//!
//! Density matrices are vectorised by stacking columns:
//! `vec(ρ)[i + j·D] = ρ_ij`, so that `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`. In this
//! convention
//!
//! ```text
//! L = -i (I ⊗ H_eff) + i (conj(H_eff) ⊗ I) + Σ_k 2 r_k conj(A_k) ⊗ A_k,
//! H_eff = H - i Σ_k r_k A_k†A_k.
//! ```

use faer::Mat;

use super::DensityState;
use crate::error::{Error, Result};
use crate::model::LindbladModel;
use crate::operator::{CsrMatrix, C64};

/// Default cap on the superoperator side length `D²`.
pub const DEFAULT_MAX_SUPEROPERATOR_DIM: usize = 1 << 20;

#[derive(Clone, Debug)]
pub struct Liouvillian {
    matrix: CsrMatrix,
    dims: Vec<usize>,
}

impl Liouvillian {
    pub fn from_model(model: &LindbladModel) -> Result<Self> {
        Self::from_model_with_cap(model, DEFAULT_MAX_SUPEROPERATOR_DIM)
    }

    pub fn from_model_with_cap(model: &LindbladModel, max_superoperator_dim: usize) -> Result<Self> {
        let d = model.hilbert_dim();
        let side = d.checked_mul(d).ok_or_else(|| Error::Resource("superoperator size overflows".into()))?;
        if side > max_superoperator_dim {
            return Err(Error::Resource(format!(
                "superoperator side {side} exceeds the configured cap {max_superoperator_dim}"
            )));
        }
        let mut h_eff = model.hamiltonian.to_csr();
        let mut jumps = CsrMatrix::zeros(side, side);
        for ch in &model.channels {
            let a = ch.operator.to_csr();
            let ada = a.adjoint().matmul(&a)?;
            h_eff = h_eff.add_scaled(C64::new(1.0, 0.0), &ada, C64::new(0.0, -ch.rate))?;
            jumps = jumps.add_scaled(C64::new(1.0, 0.0), &a.conj().kron(&a), C64::new(2.0 * ch.rate, 0.0))?;
        }
        let id = CsrMatrix::identity(d);
        let left = id.kron(&h_eff);
        let right = h_eff.conj().kron(&id);
        let coherent = left.add_scaled(C64::new(0.0, -1.0), &right, C64::new(0.0, 1.0))?;
        let matrix = coherent.add_scaled(C64::new(1.0, 0.0), &jumps, C64::new(1.0, 0.0))?;
        Ok(Self { matrix, dims: model.dims().to_vec() })
    }

    /// Wraps an already vectorised generator.
    pub fn from_matrix(matrix: CsrMatrix, dims: Vec<usize>) -> Result<Self> {
        let d: usize = dims.iter().product();
        if matrix.nrows() != d * d || matrix.ncols() != d * d {
            return Err(Error::Dimension(format!(
                "superoperator {}x{} does not match dims {dims:?}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { matrix, dims })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn hilbert_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn side(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.frobenius_norm()
    }

    /// `L[ρ]` as a matrix.
    pub fn apply(&self, rho: &DensityState) -> Result<Mat<C64>> {
        if rho.dims() != self.dims() {
            return Err(Error::Dimension(format!("{:?} vs {:?}", rho.dims(), self.dims())));
        }
        let d = self.hilbert_dim();
        let v = self.matrix.mul_vec(&rho.to_column_stacked());
        Ok(Mat::from_fn(d, d, |i, j| v[i + j * d]))
    }

    /// Indices of the diagonal entries `ρ_ii` inside `vec(ρ)`.
    pub fn trace_indices(&self) -> impl Iterator<Item = usize> {
        let d = self.hilbert_dim();
        (0..d).map(move |i| i * (d + 1))
    }
}
