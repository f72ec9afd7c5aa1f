//! Row-compressed matrix form of a [`PauliSum`] for repeated expectation values.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::pauli::{i_power, PauliSum};

/// Rows per work unit. Fixed so that reductions are independent of thread count.
const CHUNK: usize = 256;

/// `H[r][c]` stored by rows over the full `2^n` computational basis.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    n_qubits: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    re: Vec<f64>,
    /// Present only when some entry has a nonzero imaginary part.
    im: Option<Vec<f64>>,
}

impl SparseOperator {
    pub fn from_pauli_sum(h: &PauliSum) -> Self {
        let n = h.n_qubits();
        assert!(n <= 30, "sparse operator limited to 30 qubits");
        let dim = 1usize << n;

        // Group terms by flip mask; each group contributes one entry per row.
        let mut groups: BTreeMap<u64, Vec<(u64, Complex64)>> = BTreeMap::new();
        for (p, c) in h.terms() {
            groups
                .entry(p.x_mask())
                .or_default()
                .push((p.z_mask(), i_power(p.n_y()) * *c));
        }
        let groups: Vec<(u64, Vec<(u64, Complex64)>)> = groups.into_iter().collect();

        let rows: Vec<Vec<(u32, Complex64)>> = (0..dim)
            .into_par_iter()
            .map(|r| {
                let mut row = Vec::new();
                for (x, zs) in &groups {
                    let c = (r as u64) ^ x;
                    let mut v = Complex64::new(0.0, 0.0);
                    for (z, coeff) in zs {
                        if (c & z).count_ones() % 2 == 1 {
                            v -= coeff;
                        } else {
                            v += coeff;
                        }
                    }
                    if v.norm() > 1e-14 {
                        row.push((c as u32, v));
                    }
                }
                row.sort_by_key(|e| e.0);
                row
            })
            .collect();

        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut re = Vec::with_capacity(nnz);
        let mut im = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                re.push(v.re);
                im.push(v.im);
            }
            row_ptr.push(cols.len());
        }
        let complex = im.iter().any(|v| *v != 0.0);
        Self {
            n_qubits: n,
            row_ptr,
            cols,
            re,
            im: complex.then_some(im),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_none()
    }

    /// Entries of row `r` as `(column, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (a..b).map(move |k| {
            let im = self.im.as_ref().map_or(0.0, |v| v[k]);
            (self.cols[k] as usize, Complex64::new(self.re[k], im))
        })
    }

    #[inline]
    fn row_dot(&self, r: usize, x: &[Complex64]) -> Complex64 {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        let mut acc = Complex64::new(0.0, 0.0);
        match &self.im {
            None => {
                for k in a..b {
                    acc += x[self.cols[k] as usize] * self.re[k];
                }
            }
            Some(im) => {
                for k in a..b {
                    acc += x[self.cols[k] as usize] * Complex64::new(self.re[k], im[k]);
                }
            }
        }
        acc
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        y.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, chunk)| {
            let base = ci * CHUNK;
            for (k, out) in chunk.iter_mut().enumerate() {
                *out = self.row_dot(base + k, x);
            }
        });
    }

    /// `Re ⟨x|H|x⟩` with a thread-count independent summation order.
    pub fn expectation(&self, x: &[Complex64]) -> f64 {
        assert_eq!(x.len(), self.dim());
        let partial: Vec<f64> = (0..self.dim().div_ceil(CHUNK))
            .into_par_iter()
            .map(|ci| {
                let lo = ci * CHUNK;
                let hi = (lo + CHUNK).min(self.dim());
                (lo..hi).map(|r| (x[r].conj() * self.row_dot(r, x)).re).sum::<f64>()
            })
            .collect();
        partial.iter().sum()
    }
}

/// `⟨a|b⟩` with a thread-count independent summation order.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    assert_eq!(a.len(), b.len());
    let partial: Vec<Complex64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(ca, cb)| ca.iter().zip(cb).map(|(x, y)| x.conj() * y).sum::<Complex64>())
        .collect();
    partial.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::PauliString;

    #[test]
    fn matches_dense_matrix() {
        let terms = [("XYZ", 0.3), ("YYI", -0.7), ("ZIZ", 1.1), ("IXI", 0.2), ("III", 0.5)];
        let h = PauliSum::from_terms(3, terms.iter().map(|(s, c)| (s.parse::<PauliString>().unwrap(), *c))).unwrap();
        let op = SparseOperator::from_pauli_sum(&h);
        let dense = h.dense_matrix();
        assert!(!op.is_real());
        for r in 0..8 {
            let mut row = [Complex64::new(0.0, 0.0); 8];
            for (c, v) in op.row(r) {
                row[c] = v;
            }
            for c in 0..8 {
                assert!((row[c] - dense[(r, c)]).norm() < 1e-14);
            }
        }
    }
}
