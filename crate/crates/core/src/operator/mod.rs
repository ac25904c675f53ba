//! Operators and state vectors on the cavity ⊗ emitters Hilbert space.
//!
//! Subsystem order is fixed: the cavity comes first, followed by the emitters
//! in index order. Emitter levels are numbered by excitation, so `|g⟩ = 0`,
//! `|e⟩ = 1` and, for qutrits, `|f⟩ = 2`. With that numbering `σ^z = diag(-1, +1)`
//! and the collective `J_z` has eigenvalue `2m` on `|l, m⟩`.

mod sparse;

use faer::Mat;

pub use num_complex::Complex64 as C64;
pub use sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::lindblad::DensityState;

/// Side length above which freshly built operators are stored sparse.
pub const DEFAULT_SPARSE_THRESHOLD: usize = 256;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Debug)]
pub enum Storage {
    Dense(Mat<C64>),
    Sparse(CsrMatrix),
}

/// Square complex matrix together with the subsystem dimensions it acts on.
#[derive(Clone, Debug)]
pub struct ComplexOperator {
    storage: Storage,
    dims: Vec<usize>,
}

fn check_dims(side: usize, dims: &[usize]) -> Result<()> {
    let product: usize = dims.iter().product();
    if dims.is_empty() || product != side {
        return Err(Error::Dimension(format!(
            "subsystem dims {dims:?} do not multiply to the side length {side}"
        )));
    }
    Ok(())
}

impl ComplexOperator {
    pub fn from_dense(matrix: Mat<C64>, dims: Vec<usize>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Dimension(format!(
                "operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        check_dims(matrix.nrows(), &dims)?;
        Ok(Self { storage: Storage::Dense(matrix), dims })
    }

    pub fn from_csr(matrix: CsrMatrix, dims: Vec<usize>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Dimension(format!(
                "operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        check_dims(matrix.nrows(), &dims)?;
        Ok(Self { storage: Storage::Sparse(matrix), dims })
    }

    /// Stores `matrix` dense or sparse depending on `threshold`.
    pub fn from_csr_auto(matrix: CsrMatrix, dims: Vec<usize>, threshold: usize) -> Result<Self> {
        Self::from_csr(matrix, dims).map(|op| op.with_threshold(threshold))
    }

    pub fn identity(dims: &[usize]) -> Result<Self> {
        let side = dims.iter().product();
        Self::from_csr(CsrMatrix::identity(side), dims.to_vec())
            .map(|op| op.with_threshold(DEFAULT_SPARSE_THRESHOLD))
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let side = dims.iter().product();
        Self::from_csr(CsrMatrix::zeros(side, side), dims.to_vec())
            .map(|op| op.with_threshold(DEFAULT_SPARSE_THRESHOLD))
    }

    /// Re-lays the operator out: dense when `side <= threshold`, sparse otherwise.
    pub fn with_threshold(self, threshold: usize) -> Self {
        let side = self.side();
        let storage = match self.storage {
            Storage::Dense(m) if side > threshold => Storage::Sparse(CsrMatrix::from_dense(&m)),
            Storage::Sparse(m) if side <= threshold => Storage::Dense(m.to_dense()),
            s => s,
        };
        Self { storage, dims: self.dims }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn side(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    pub fn to_dense(&self) -> Mat<C64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(m) => m.to_dense(),
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        match &self.storage {
            Storage::Dense(m) => CsrMatrix::from_dense(m),
            Storage::Sparse(m) => m.clone(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        match &self.storage {
            Storage::Dense(m) => m[(i, j)],
            Storage::Sparse(m) => m.get(i, j),
        }
    }

    fn rebuild(&self, storage: Storage) -> Self {
        Self { storage, dims: self.dims.clone() }
    }

    pub fn adjoint(&self) -> Self {
        self.rebuild(match &self.storage {
            Storage::Dense(m) => Storage::Dense(m.adjoint().to_owned()),
            Storage::Sparse(m) => Storage::Sparse(m.adjoint()),
        })
    }

    pub fn transpose(&self) -> Self {
        self.rebuild(match &self.storage {
            Storage::Dense(m) => Storage::Dense(m.transpose().to_owned()),
            Storage::Sparse(m) => Storage::Sparse(m.transpose()),
        })
    }

    pub fn conj(&self) -> Self {
        self.rebuild(match &self.storage {
            Storage::Dense(m) => Storage::Dense(m.conjugate().to_owned()),
            Storage::Sparse(m) => Storage::Sparse(m.conj()),
        })
    }

    pub fn scale(&self, s: C64) -> Self {
        self.rebuild(match &self.storage {
            Storage::Dense(m) => Storage::Dense(Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)),
            Storage::Sparse(m) => Storage::Sparse(m.scale(s)),
        })
    }

    fn same_dims(&self, other: &Self, what: &str) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Dimension(format!(
                "{what}: dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    /// `alpha * self + beta * other`.
    pub fn add_scaled(&self, alpha: C64, other: &Self, beta: C64) -> Result<Self> {
        self.same_dims(other, "add")?;
        let storage = match (&self.storage, &other.storage) {
            (Storage::Dense(a), Storage::Dense(b)) => {
                Storage::Dense(Mat::from_fn(a.nrows(), a.ncols(), |i, j| alpha * a[(i, j)] + beta * b[(i, j)]))
            }
            _ => Storage::Sparse(self.to_csr().add_scaled(alpha, &other.to_csr(), beta)?),
        };
        Ok(self.rebuild(storage))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.add_scaled(ONE, other, ONE)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(ONE, other, -ONE)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.same_dims(other, "matmul")?;
        let storage = match (&self.storage, &other.storage) {
            (Storage::Dense(a), Storage::Dense(b)) => Storage::Dense(a * b),
            _ => Storage::Sparse(self.to_csr().matmul(&other.to_csr())?),
        };
        Ok(self.rebuild(storage))
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if self.dims != psi.dims {
            return Err(Error::Dimension(format!(
                "operator dims {:?} vs state dims {:?}",
                self.dims, psi.dims
            )));
        }
        let amplitudes = match &self.storage {
            Storage::Dense(m) => (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * psi.amplitudes[j]).sum())
                .collect(),
            Storage::Sparse(m) => m.mul_vec(&psi.amplitudes),
        };
        Ok(StateVector { amplitudes, dims: self.dims.clone() })
    }

    pub fn max_abs(&self) -> f64 {
        match &self.storage {
            Storage::Dense(m) => {
                let mut best = 0.0f64;
                for j in 0..m.ncols() {
                    for i in 0..m.nrows() {
                        best = best.max(m[(i, j)].norm());
                    }
                }
                best
            }
            Storage::Sparse(m) => m.max_abs(),
        }
    }

    /// `max|A - A†| / max|A|`, or `0` for the zero operator.
    pub fn hermiticity_defect(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let diff = self.sub(&self.adjoint()).expect("same dims").max_abs();
        diff / scale
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() <= 1e-12
    }
}

/// Kronecker product; the result carries `a.dims ++ b.dims`.
pub fn kron(a: &ComplexOperator, b: &ComplexOperator) -> ComplexOperator {
    let dims: Vec<usize> = a.dims.iter().chain(&b.dims).copied().collect();
    let side = a.side() * b.side();
    let storage = match (&a.storage, &b.storage) {
        (Storage::Dense(x), Storage::Dense(y)) if side <= DEFAULT_SPARSE_THRESHOLD => {
            let (n, m) = (y.nrows(), y.ncols());
            Storage::Dense(Mat::from_fn(side, side, |i, j| x[(i / n, j / m)] * y[(i % n, j % m)]))
        }
        _ => {
            let k = a.to_csr().kron(&b.to_csr());
            if side <= DEFAULT_SPARSE_THRESHOLD {
                Storage::Dense(k.to_dense())
            } else {
                Storage::Sparse(k)
            }
        }
    };
    ComplexOperator { storage, dims }
}

/// Kronecker product of a non-empty list of operators.
pub fn kron_all(ops: &[ComplexOperator]) -> Result<ComplexOperator> {
    let (first, rest) = ops
        .split_first()
        .ok_or_else(|| Error::Dimension("kron of an empty operator list".into()))?;
    Ok(rest.iter().fold(first.clone(), |acc, op| kron(&acc, op)))
}

/// Places `local` on subsystem `site` of a composite space, identity elsewhere.
pub fn embed(local: &ComplexOperator, site: usize, dims: &[usize]) -> Result<ComplexOperator> {
    if site >= dims.len() || local.dims() != [dims[site]] {
        return Err(Error::Dimension(format!(
            "cannot embed a {:?} operator on site {site} of {dims:?}",
            local.dims()
        )));
    }
    let side: usize = dims.iter().product();
    let before: usize = dims[..site].iter().product();
    let after: usize = dims[site + 1..].iter().product();
    let k = CsrMatrix::identity(before)
        .kron(&local.to_csr())
        .kron(&CsrMatrix::identity(after));
    ComplexOperator::from_csr_auto(k, dims.to_vec(), DEFAULT_SPARSE_THRESHOLD)
        .inspect(|op| {
            debug_assert_eq!(op.side(), side);
        })
}

fn single(dim: usize, entries: &[(usize, usize, f64)]) -> ComplexOperator {
    let triplets = entries.iter().map(|&(i, j, v)| (i, j, C64::new(v, 0.0))).collect();
    let m = CsrMatrix::from_triplets(dim, dim, triplets).expect("indices in range");
    ComplexOperator::from_csr_auto(m, vec![dim], DEFAULT_SPARSE_THRESHOLD).expect("square")
}

/// Truncated bosonic lowering operator, `a|n⟩ = √n |n-1⟩`.
pub fn annihilation(dim: usize) -> Result<ComplexOperator> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!(
            "Fock truncation must be at least 2, got {dim}"
        )));
    }
    let entries: Vec<_> = (1..dim).map(|n| (n - 1, n, (n as f64).sqrt())).collect();
    Ok(single(dim, &entries))
}

/// `σ⁻ = |g⟩⟨e|`.
pub fn sigma_minus() -> ComplexOperator {
    single(2, &[(0, 1, 1.0)])
}

/// `σ⁺ = |e⟩⟨g|`.
pub fn sigma_plus() -> ComplexOperator {
    single(2, &[(1, 0, 1.0)])
}

/// `σ^z = |e⟩⟨e| - |g⟩⟨g|`.
pub fn sigma_z() -> ComplexOperator {
    single(2, &[(0, 0, -1.0), (1, 1, 1.0)])
}

/// Qutrit transition operator `|lower⟩⟨upper|`.
pub fn transition(dim: usize, lower: usize, upper: usize) -> ComplexOperator {
    single(dim, &[(lower, upper, 1.0)])
}

/// Diagonal single-subsystem operator.
pub fn diagonal(values: &[f64]) -> ComplexOperator {
    let entries: Vec<_> = values.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
    single(values.len(), &entries)
}

#[derive(Clone, Debug)]
pub struct CollectiveOps {
    pub plus: ComplexOperator,
    pub minus: ComplexOperator,
    pub z: ComplexOperator,
}

/// `J_i = Σ_j σ^i_j` on the `2^N` qubit space.
pub fn collective_ops(n_qubits: usize) -> Result<CollectiveOps> {
    if n_qubits == 0 {
        return Err(Error::InvalidParameter("collective operators need N >= 1".into()));
    }
    let dims = vec![2; n_qubits];
    let mut plus = ComplexOperator::zeros(&dims)?;
    let mut minus = ComplexOperator::zeros(&dims)?;
    let mut z = ComplexOperator::zeros(&dims)?;
    for j in 0..n_qubits {
        plus = plus.add(&embed(&sigma_plus(), j, &dims)?)?;
        minus = minus.add(&embed(&sigma_minus(), j, &dims)?)?;
        z = z.add(&embed(&sigma_z(), j, &dims)?)?;
    }
    Ok(CollectiveOps { plus, minus, z })
}

/// Pure state with its subsystem dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
    dims: Vec<usize>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>, dims: Vec<usize>) -> Result<Self> {
        check_dims(amplitudes.len(), &dims)?;
        Ok(Self { amplitudes, dims })
    }

    /// Computational basis state `|index⟩` of the composite space.
    pub fn basis(dims: &[usize], index: usize) -> Result<Self> {
        let side: usize = dims.iter().product();
        if index >= side {
            return Err(Error::Dimension(format!("basis index {index} out of range {side}")));
        }
        let mut amplitudes = vec![ZERO; side];
        amplitudes[index] = ONE;
        Self::new(amplitudes, dims.to_vec())
    }

    /// Product state from per-subsystem level indices.
    pub fn product_basis(dims: &[usize], levels: &[usize]) -> Result<Self> {
        if levels.len() != dims.len() || levels.iter().zip(dims).any(|(l, d)| l >= d) {
            return Err(Error::Dimension(format!("levels {levels:?} invalid for dims {dims:?}")));
        }
        let index = levels.iter().zip(dims).fold(0, |acc, (l, d)| acc * d + l);
        Self::basis(dims, index)
    }

    pub fn fock(dim: usize, n: usize) -> Result<Self> {
        Self::basis(&[dim], n)
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::InvalidParameter("cannot normalise the zero vector".into()));
        }
        self.amplitudes.iter_mut().for_each(|a| *a /= n);
        Ok(self)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.dims != other.dims {
            return Err(Error::Dimension(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        let dims = self.dims.iter().chain(&other.dims).copied().collect();
        Self { amplitudes, dims }
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> Mat<C64> {
        let n = self.amplitudes.len();
        Mat::from_fn(n, n, |i, j| self.amplitudes[i] * self.amplitudes[j].conj())
    }
}

/// Coherent-state amplitudes `e^{-|α|²/2} αⁿ/√n!` for `n < dim`, without
/// renormalisation.
pub fn coherent_amplitudes(alpha: C64, dim: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(dim);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            c *= alpha / (n as f64).sqrt();
        }
        out.push(c);
    }
    out
}

/// Normalised truncated coherent state `|α⟩`.
///
/// Requires `|α|² <= dim / 4`, which keeps the discarded Poisson tail
/// negligible for the sizes used here.
pub fn coherent_state(alpha: C64, dim: usize) -> Result<StateVector> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!("Fock truncation must be at least 2, got {dim}")));
    }
    if alpha.norm_sqr() > dim as f64 / 4.0 {
        return Err(Error::Truncation(format!(
            "|alpha|^2 = {:.3} exceeds dim/4 = {:.3} for truncation {dim}",
            alpha.norm_sqr(),
            dim as f64 / 4.0
        )));
    }
    StateVector::new(coherent_amplitudes(alpha, dim), vec![dim])?.normalized()
}

/// Fock cutoff covering a coherent amplitude `alpha_max` with five standard
/// deviations of margin, `ceil((|α| + 5)²)`, clamped to `[2, cap]`.
pub fn fock_truncation_for(alpha_max: f64, cap: usize) -> usize {
    let n = ((alpha_max.abs() + 5.0).powi(2)).ceil() as usize;
    n.clamp(2, cap.max(2))
}

/// Traces out every subsystem except the leading cavity mode.
pub fn partial_trace_field(rho: &DensityState) -> Result<DensityState> {
    let dims = rho.dims();
    if dims.len() < 2 {
        return Err(Error::Dimension(format!(
            "expected cavity plus at least one other subsystem, got dims {dims:?}"
        )));
    }
    let nf = dims[0];
    let rest: usize = dims[1..].iter().product();
    let m = rho.matrix();
    if m.nrows() != nf * rest {
        return Err(Error::Dimension(format!("matrix side {} vs dims {dims:?}", m.nrows())));
    }
    let reduced = Mat::from_fn(nf, nf, |i, j| (0..rest).map(|k| m[(i * rest + k, j * rest + k)]).sum());
    DensityState::from_matrix(reduced, vec![nf])
}
