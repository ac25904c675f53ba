//! Exchange-symmetry reduction of a Liouvillian.
//!
//! When identical emitters are coupled identically, `L` commutes with every
//! permutation of those subsystems. Matrix units `|i⟩⟨j|` then fall into
//! orbits under simultaneous permutation of the row and column digits, and
//! the normalised orbit sums span an invariant subspace containing the unique
//! steady state. In column-stacked coordinates the isometry `V` onto that
//! subspace has a single nonzero per row, so `Vᵀ L V` is assembled directly
//! from the nonzeros of `L`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::operator::{CsrMatrix, C64};

#[derive(Clone, Debug)]
pub struct ExchangeReduction {
    dim: usize,
    orbit_of: Vec<u32>,
    orbit_size: Vec<u32>,
}

impl ExchangeReduction {
    /// Orbits of `vec(ρ)` indices under permutations of the subsystems listed
    /// in `sites`, which must share one local dimension.
    pub fn new(dims: &[usize], sites: &[usize]) -> Result<Self> {
        if sites.len() < 2 {
            return Err(Error::InvalidParameter("exchange symmetry needs at least two sites".into()));
        }
        if sites.iter().any(|&s| s >= dims.len()) {
            return Err(Error::Dimension(format!("sites {sites:?} out of range for dims {dims:?}")));
        }
        let local = dims[sites[0]];
        if sites.iter().any(|&s| dims[s] != local) {
            return Err(Error::Dimension(format!("sites {sites:?} have unequal dimensions in {dims:?}")));
        }
        let mut sorted = sites.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != sites.len() {
            return Err(Error::InvalidParameter(format!("repeated site in {sites:?}")));
        }
        let dim: usize = dims.iter().product();
        let n = dim.checked_mul(dim).ok_or_else(|| Error::Resource("vectorised size overflows".into()))?;
        if n > u32::MAX as usize {
            return Err(Error::Resource(format!("{n} vectorised entries exceed the index range")));
        }
        // row-major strides of the composite index
        let mut strides = vec![1usize; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        let mut ids: HashMap<(usize, usize), u32> = HashMap::new();
        let mut orbit_of = vec![0u32; n];
        let mut orbit_size: Vec<u32> = vec![];
        let mut pairs = vec![(0usize, 0usize); sorted.len()];
        for j in 0..dim {
            for i in 0..dim {
                let (mut ci, mut cj) = (i, j);
                for (slot, &s) in pairs.iter_mut().zip(&sorted) {
                    let (di, dj) = ((i / strides[s]) % local, (j / strides[s]) % local);
                    *slot = (di, dj);
                    ci -= di * strides[s];
                    cj -= dj * strides[s];
                }
                pairs.sort_unstable();
                for (&(di, dj), &s) in pairs.iter().zip(&sorted) {
                    ci += di * strides[s];
                    cj += dj * strides[s];
                }
                let next = orbit_size.len() as u32;
                let id = *ids.entry((ci, cj)).or_insert(next);
                if id == next {
                    orbit_size.push(0);
                }
                orbit_size[id as usize] += 1;
                orbit_of[i + j * dim] = id;
            }
        }
        Ok(Self { dim, orbit_of, orbit_size })
    }

    pub fn n_orbits(&self) -> usize {
        self.orbit_size.len()
    }

    /// `Vᵀ L V`, after checking `L V = V Vᵀ L V` entrywise to `tol · max|L|`.
    pub fn reduce(&self, l: &CsrMatrix, tol: f64) -> Result<CsrMatrix> {
        if l.nrows() != self.orbit_of.len() || l.ncols() != self.orbit_of.len() {
            return Err(Error::Dimension(format!("{}x{} generator vs {} entries", l.nrows(), l.ncols(), self.orbit_of.len())));
        }
        let r = self.n_orbits();
        // per-row sums over column orbits, A[p, c] = Σ_{q∈c} L[p, q]
        let mut row_sums: Vec<Vec<(u32, C64)>> = Vec::with_capacity(l.nrows());
        let mut reduced: HashMap<(u32, u32), C64> = HashMap::new();
        for p in 0..l.nrows() {
            let mut acc: Vec<(u32, C64)> = l.row(p).map(|(q, v)| (self.orbit_of[q], v)).collect();
            acc.sort_unstable_by_key(|e| e.0);
            acc.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            for &(c, v) in &acc {
                *reduced.entry((self.orbit_of[p], c)).or_insert(C64::new(0.0, 0.0)) += v;
            }
            row_sums.push(acc);
        }
        let scale = tol * l.max_abs();
        for (p, acc) in row_sums.iter().enumerate() {
            let o = self.orbit_of[p];
            let size = self.orbit_size[o as usize] as f64;
            for &(c, v) in acc {
                let mean = reduced[&(o, c)] / size;
                if (v - mean).norm() > scale {
                    return Err(Error::InvalidParameter(format!(
                        "generator is not exchange symmetric (row {p}, deviation {:.2e})",
                        (v - mean).norm()
                    )));
                }
            }
        }
        let triplets = reduced.into_iter().map(|((a, c), v)| {
            let norm = (self.orbit_size[a as usize] as f64 * self.orbit_size[c as usize] as f64).sqrt();
            (a as usize, c as usize, v / norm)
        });
        CsrMatrix::from_triplets(r, r, triplets.collect())
    }

    /// `Vᵀ t` for the trace functional `t`.
    pub fn reduced_trace(&self) -> Vec<(usize, C64)> {
        let mut out: HashMap<u32, f64> = HashMap::new();
        for i in 0..self.dim {
            *out.entry(self.orbit_of[i * (self.dim + 1)]).or_insert(0.0) += 1.0;
        }
        let mut v: Vec<(usize, C64)> = out
            .into_iter()
            .map(|(o, count)| (o as usize, C64::new(count / (self.orbit_size[o as usize] as f64).sqrt(), 0.0)))
            .collect();
        v.sort_unstable_by_key(|e| e.0);
        v
    }

    /// `V y`
    pub fn expand(&self, y: &[C64]) -> Vec<C64> {
        self.orbit_of
            .iter()
            .map(|&o| y[o as usize] / (self.orbit_size[o as usize] as f64).sqrt())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::Liouvillian;
    use crate::model::{build_driven, build_tavis_cummings, SystemSpec};

    #[test]
    fn orbit_counts() {
        // three qubits: multisets of size 3 over 4 digit pairs
        let red = ExchangeReduction::new(&[1, 2, 2, 2], &[1, 2, 3]).unwrap();
        assert_eq!(red.n_orbits(), 20);
        let red = ExchangeReduction::new(&[5, 2, 2], &[1, 2]).unwrap();
        assert_eq!(red.n_orbits(), 25 * 10);
        assert!(ExchangeReduction::new(&[5, 2, 3], &[1, 2]).is_err());
    }

    #[test]
    fn reduction_rejects_asymmetric_couplings() {
        let spec = SystemSpec::resonant(vec![1.0, 1.1], 2.0, 0.1, 3);
        let l = Liouvillian::from_model(&build_tavis_cummings(&spec).unwrap()).unwrap();
        let red = ExchangeReduction::new(l.dims(), &[1, 2]).unwrap();
        assert!(red.reduce(l.matrix(), 1e-12).is_err());
    }

    #[test]
    fn reduced_generator_acts_like_full_one_on_symmetric_vectors() {
        let spec = SystemSpec::resonant(vec![0.8, 0.8, 0.8], 1.0, 0.05, 4).with_drive(0.7);
        let l = Liouvillian::from_model(&build_driven(&spec).unwrap()).unwrap();
        let red = ExchangeReduction::new(l.dims(), &[1, 2, 3]).unwrap();
        let lr = red.reduce(l.matrix(), 1e-12).unwrap();
        let y: Vec<C64> = (0..red.n_orbits()).map(|k| C64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos())).collect();
        let lhs = l.matrix().mul_vec(&red.expand(&y));
        let rhs = red.expand(&lr.mul_vec(&y));
        let err = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
        // V is an isometry: the expansion preserves the 2-norm
        let n_y: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        let n_x: f64 = red.expand(&y).iter().map(|v| v.norm_sqr()).sum();
        assert!((n_y - n_x).abs() < 1e-12 * n_y);
    }
}
