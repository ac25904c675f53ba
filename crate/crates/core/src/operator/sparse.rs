//! Compressed sparse row storage for complex matrices.

use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use super::C64;
use crate::error::{Error, Result};

/// Row-major compressed sparse matrix over `C64`.
///
/// Column indices within a row are sorted and unique. Explicit zeros produced
/// by cancellation are dropped on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![C64::new(1.0, 0.0); n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, C64)>,
    ) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= nrows || *c >= ncols) {
            return Err(Error::Dimension(format!(
                "triplet ({r}, {c}) outside a {nrows}x{ncols} matrix"
            )));
        }
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        let mut m = Self { nrows, ncols, indptr, indices, data };
        m.prune();
        Ok(m)
    }

    pub fn from_dense(a: &Mat<C64>) -> Self {
        let mut indptr = Vec::with_capacity(a.nrows() + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let v = a[(i, j)];
                if v != C64::new(0.0, 0.0) {
                    indices.push(j);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self { nrows: a.nrows(), ncols: a.ncols(), indptr, indices, data }
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let mut m = Mat::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()].iter().copied().zip(self.data[span].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(k) => self.data[span.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    fn prune(&mut self) {
        if self.data.iter().all(|v| *v != C64::new(0.0, 0.0)) {
            return;
        }
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut data = Vec::with_capacity(self.data.len());
        indptr.push(0);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                if v != C64::new(0.0, 0.0) {
                    indices.push(j);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        self.indptr = indptr;
        self.indices = indices;
        self.data = data;
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = f(*v));
        out.prune();
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|v| v * s)
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut indices = vec![0usize; self.nnz()];
        let mut data = vec![C64::new(0.0, 0.0); self.nnz()];
        // rows visited in increasing order keep the output columns sorted
        for (i, j, v) in self.iter() {
            let k = next[j];
            indices[k] = i;
            data[k] = v;
            next[j] += 1;
        }
        Self { nrows: self.ncols, ncols: self.nrows, indptr: counts, indices, data }
    }

    pub fn adjoint(&self) -> Self {
        self.transpose().conj()
    }

    /// `alpha * self + beta * other`.
    pub fn add_scaled(&self, alpha: C64, other: &Self, beta: C64) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::Dimension(format!(
                "cannot add {}x{} and {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut data = Vec::with_capacity(self.nnz() + other.nnz());
        indptr.push(0);
        for i in 0..self.nrows {
            let mut a = self.row(i).peekable();
            let mut b = other.row(i).peekable();
            loop {
                let (j, v) = match (a.peek(), b.peek()) {
                    (Some(&(ja, va)), Some(&(jb, vb))) => {
                        if ja == jb {
                            a.next();
                            b.next();
                            (ja, alpha * va + beta * vb)
                        } else if ja < jb {
                            a.next();
                            (ja, alpha * va)
                        } else {
                            b.next();
                            (jb, beta * vb)
                        }
                    }
                    (Some(&(ja, va)), None) => {
                        a.next();
                        (ja, alpha * va)
                    }
                    (None, Some(&(jb, vb))) => {
                        b.next();
                        (jb, beta * vb)
                    }
                    (None, None) => break,
                };
                if v != C64::new(0.0, 0.0) {
                    indices.push(j);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self { nrows: self.nrows, ncols: self.ncols, indptr, indices, data })
    }

    /// Sparse matrix product using a dense row accumulator.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let zero = C64::new(0.0, 0.0);
        let mut acc = vec![zero; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for i in 0..self.nrows {
            touched.clear();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = zero;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                if acc[j] != zero {
                    indices.push(j);
                    data.push(acc[j]);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self { nrows: self.nrows, ncols: other.ncols, indptr, indices, data })
    }

    pub fn kron(&self, other: &Self) -> Self {
        let nrows = self.nrows * other.nrows;
        let ncols = self.ncols * other.ncols;
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(self.nnz() * other.nnz());
        let mut data = Vec::with_capacity(self.nnz() * other.nnz());
        indptr.push(0);
        for i in 0..self.nrows {
            for k in 0..other.nrows {
                for (j, a) in self.row(i) {
                    for (l, b) in other.row(k) {
                        indices.push(j * other.ncols + l);
                        data.push(a * b);
                    }
                }
                indptr.push(indices.len());
            }
        }
        Self { nrows, ncols, indptr, indices, data }
    }

    /// `y = self * x`.
    pub fn mul_vec_into(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let span = self.indptr[i]..self.indptr[i + 1];
            let mut s = C64::new(0.0, 0.0);
            for (&j, &v) in self.indices[span.clone()].iter().zip(&self.data[span]) {
                s += v * x[j];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Column-compressed copy for the sparse direct solvers.
    pub fn to_faer_csc(&self) -> Result<SparseColMat<usize, C64>> {
        let triplets: Vec<Triplet<usize, usize, C64>> =
            self.iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &triplets)
            .map_err(|e| Error::Resource(format!("sparse matrix assembly failed: {e:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn duplicates_are_summed_and_cancellations_dropped() {
        let m = CsrMatrix::from_triplets(
            2,
            2,
            vec![(0, 1, c(1.0)), (0, 1, c(2.0)), (1, 0, c(1.0)), (1, 0, c(-1.0))],
        )
        .unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), c(3.0));
        assert_eq!(m.get(1, 0), c(0.0));
    }

    #[test]
    fn out_of_range_triplet_is_rejected() {
        assert!(CsrMatrix::from_triplets(2, 2, vec![(2, 0, c(1.0))]).is_err());
    }

    #[test]
    fn transpose_and_matmul_agree_with_dense() {
        let a = CsrMatrix::from_triplets(
            2,
            3,
            vec![(0, 0, c(1.0)), (0, 2, C64::new(0.0, 2.0)), (1, 1, c(3.0))],
        )
        .unwrap();
        let at = a.transpose();
        assert_eq!(at.to_dense(), a.to_dense().transpose().to_owned());
        let p = a.matmul(&at).unwrap().to_dense();
        let q = a.to_dense() * a.to_dense().transpose();
        assert_eq!(p, q);
    }
}
