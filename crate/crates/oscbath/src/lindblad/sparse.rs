//! Minimal CSR complex sparse matrices tuned for Hamiltonian/jump-operator
//! assembly and the dense-state products the integrators need.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<Complex64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), data: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![Complex64::new(1.0, 0.0); n],
        }
    }

    /// Builds from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, Complex64)>,
    ) -> Self {
        let mut per_row: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); nrows];
        for (r, c, v) in triplets {
            debug_assert!(r < nrows && c < ncols);
            per_row[r].push((c, v));
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for row in per_row.iter_mut() {
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let col = row[k].0;
                let mut acc = Complex64::default();
                while k < row.len() && row[k].0 == col {
                    acc += row[k].1;
                    k += 1;
                }
                if acc.norm_sqr() > 0.0 {
                    indices.push(col);
                    data.push(acc);
                }
            }
            indptr.push(indices.len());
        }
        Self { nrows, ncols, indptr, indices, data }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= s;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch("sparse add".into()));
        }
        let trip = self
            .triplets()
            .chain(other.triplets())
            .collect::<Vec<_>>();
        Ok(Self::from_triplets(self.nrows, self.ncols, trip))
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.data[k]))
        })
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().map(|(r, c, v)| (c, r, v.conj())),
        )
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(r, c, v)| (c, r, v)))
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v = v.conj();
        }
        out
    }

    /// Sparse-sparse product.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch("sparse matmul".into()));
        }
        let rows: Vec<Vec<(usize, Complex64)>> = (0..self.nrows)
            .into_par_iter()
            .map(|r| {
                let mut acc: std::collections::BTreeMap<usize, Complex64> =
                    std::collections::BTreeMap::new();
                for k in self.indptr[r]..self.indptr[r + 1] {
                    let a = self.data[k];
                    let mid = self.indices[k];
                    for j in other.indptr[mid]..other.indptr[mid + 1] {
                        *acc.entry(other.indices[j]).or_default() += a * other.data[j];
                    }
                }
                acc.into_iter().collect()
            })
            .collect();
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for row in rows {
            for (c, v) in row {
                if v.norm_sqr() > 0.0 {
                    indices.push(c);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self { nrows: self.nrows, ncols: other.ncols, indptr, indices, data })
    }

    /// Kronecker product self ⊗ other.
    pub fn kron(&self, other: &Self) -> Self {
        let nr = self.nrows * other.nrows;
        let nc = self.ncols * other.ncols;
        let mut trip = Vec::with_capacity(self.nnz() * other.nnz());
        for (r1, c1, v1) in self.triplets() {
            for (r2, c2, v2) in other.triplets() {
                trip.push((r1 * other.nrows + r2, c1 * other.ncols + c2, v1 * v2));
            }
        }
        Self::from_triplets(nr, nc, trip)
    }

    /// y = A x (parallel over rows).
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        y.par_iter_mut().enumerate().for_each(|(r, out)| {
            let mut acc = Complex64::default();
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            *out = acc;
        });
    }

    /// y = A x on the calling thread (for work already inside a parallel
    /// region, e.g. per-trajectory stepping).
    pub fn matvec_serial(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = Complex64::default();
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            *out = acc;
        }
    }

    /// out = A · X for row-major dense X (ncols_x columns), parallel over rows.
    pub fn left_mul_dense(&self, x: &[Complex64], ncols_x: usize, out: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.ncols * ncols_x);
        debug_assert_eq!(out.len(), self.nrows * ncols_x);
        out.par_chunks_mut(ncols_x).enumerate().for_each(|(r, row)| {
            row.fill(Complex64::default());
            for k in self.indptr[r]..self.indptr[r + 1] {
                let a = self.data[k];
                let src = &x[self.indices[k] * ncols_x..(self.indices[k] + 1) * ncols_x];
                for (o, s) in row.iter_mut().zip(src) {
                    *o += a * s;
                }
            }
        });
    }

    /// out = X · A for row-major dense X (nrows_x rows), parallel over rows of X.
    pub fn right_mul_dense(&self, x: &[Complex64], nrows_x: usize, out: &mut [Complex64]) {
        debug_assert_eq!(x.len(), nrows_x * self.nrows);
        debug_assert_eq!(out.len(), nrows_x * self.ncols);
        let nc = self.ncols;
        out.par_chunks_mut(nc).enumerate().for_each(|(i, orow)| {
            orow.fill(Complex64::default());
            let xrow = &x[i * self.nrows..(i + 1) * self.nrows];
            for (k, xv) in xrow.iter().enumerate() {
                if xv.norm_sqr() == 0.0 {
                    continue;
                }
                for idx in self.indptr[k]..self.indptr[k + 1] {
                    orow[self.indices[idx]] += xv * self.data[idx];
                }
            }
        });
    }

    /// Tr[A X] for dense row-major X.
    pub fn trace_product(&self, x: &[Complex64], dim: usize) -> Complex64 {
        debug_assert_eq!(self.ncols, dim);
        let mut acc = Complex64::default();
        for (r, c, v) in self.triplets() {
            acc += v * x[c * dim + r];
        }
        acc
    }

    /// ⟨ψ|A|ψ⟩ (no normalization).
    pub fn expectation(&self, psi: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::default();
        for (r, c, v) in self.triplets() {
            acc += psi[r].conj() * v * psi[c];
        }
        acc
    }

    /// ‖A − A†‖_F.
    pub fn hermiticity_defect(&self) -> f64 {
        let adj = self.adjoint();
        let mut diff = 0.0;
        let a: std::collections::HashMap<(usize, usize), Complex64> =
            self.triplets().map(|(r, c, v)| ((r, c), v)).collect();
        let mut seen = std::collections::HashSet::new();
        for (r, c, v) in adj.triplets() {
            let w = a.get(&(r, c)).copied().unwrap_or_default();
            diff += (v - w).norm_sqr();
            seen.insert((r, c));
        }
        for ((r, c), v) in &a {
            if !seen.contains(&(*r, *c)) {
                diff += v.norm_sqr();
            }
        }
        diff.sqrt()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn kron_identity_structure() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 1, c(1.0, 0.0)), (1, 0, c(0.0, -1.0))]);
        let i2 = SparseMatrix::identity(2);
        let k = a.kron(&i2);
        assert_eq!(k.nrows, 4);
        assert_eq!(k.nnz(), 4);
        // (a ⊗ I)[0..2, 2..4] = a[0,1]·I
        let dense: Vec<(usize, usize, Complex64)> = k.triplets().collect();
        assert!(dense.contains(&(0, 2, c(1.0, 0.0))));
        assert!(dense.contains(&(1, 3, c(1.0, 0.0))));
    }

    #[test]
    fn matvec_and_dense_products_agree() {
        let a = SparseMatrix::from_triplets(
            3,
            3,
            vec![
                (0, 0, c(1.0, 0.5)),
                (0, 2, c(0.0, 1.0)),
                (1, 1, c(-2.0, 0.0)),
                (2, 0, c(0.5, -0.5)),
            ],
        );
        let x: Vec<Complex64> = (0..9).map(|k| c(k as f64, -(k as f64) * 0.5)).collect();
        let mut left = vec![Complex64::default(); 9];
        a.left_mul_dense(&x, 3, &mut left);
        // compare one column against matvec
        let col0: Vec<Complex64> = (0..3).map(|r| x[r * 3]).collect();
        let mut y = vec![Complex64::default(); 3];
        a.matvec(&col0, &mut y);
        for r in 0..3 {
            assert!((left[r * 3] - y[r]).norm() < 1e-14);
        }
        // right multiply: (X·A)ᵀ = Aᵀ·Xᵀ
        let mut right = vec![Complex64::default(); 9];
        a.right_mul_dense(&x, 3, &mut right);
        let at = a.transpose();
        let xt: Vec<Complex64> = (0..9).map(|k| x[(k % 3) * 3 + k / 3]).collect();
        let mut check = vec![Complex64::default(); 9];
        at.left_mul_dense(&xt, 3, &mut check);
        for i in 0..3 {
            for j in 0..3 {
                assert!((right[i * 3 + j] - check[j * 3 + i]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn adjoint_of_hermitian_has_no_defect() {
        let h = SparseMatrix::from_triplets(
            2,
            2,
            vec![(0, 0, c(1.0, 0.0)), (0, 1, c(0.2, 0.3)), (1, 0, c(0.2, -0.3)), (1, 1, c(-1.0, 0.0))],
        );
        assert!(h.hermiticity_defect() < 1e-15);
        let nh = SparseMatrix::from_triplets(2, 2, vec![(0, 1, c(1.0, 0.0))]);
        assert!(nh.hermiticity_defect() > 1.0);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = SparseMatrix::from_triplets(2, 3, vec![(0, 0, c(1.0, 0.0)), (1, 2, c(0.0, 2.0))]);
        let b = SparseMatrix::from_triplets(3, 2, vec![(0, 1, c(3.0, 0.0)), (2, 0, c(1.0, 1.0))]);
        let p = a.matmul(&b).unwrap();
        let t: Vec<(usize, usize, Complex64)> = p.triplets().collect();
        assert_eq!(t.len(), 2);
        assert!(t.contains(&(0, 1, c(3.0, 0.0))));
        assert!(t.contains(&(1, 0, c(-2.0, 2.0))));
    }
}
