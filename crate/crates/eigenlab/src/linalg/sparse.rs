//! Symmetric sparse matrices in compressed-sparse-row layout.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};

/// Symmetric sparse matrix stored in CSR with both triangles present.
///
/// Column indices are strictly ascending within each row, which fixes the
/// summation order of every kernel that walks the rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// y = A x. Accumulation walks each row in ascending column order.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.n || y.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "spmv: matrix order {} vs vector lengths {}, {}",
                self.n,
                x.len(),
                y.len()
            )));
        }
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
            }
            y[i] = acc;
        }
        Ok(())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y)?;
        Ok(y)
    }

    /// Largest pointwise asymmetry |a_ij - a_ji|; zero for matrices built
    /// through [`SparseSymBuilder`].
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Coordinate-format dump: one `row col value` line per stored entry,
    /// ascending (row, col).
    pub fn write_coo<W: Write>(&self, out: &mut W) -> Result<()> {
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                writeln!(out, "{} {} {}", i, j, v)?;
            }
        }
        Ok(())
    }
}

/// Incremental builder used by the assembly routines. Contributions are
/// accumulated in call order, so assembling cells in ascending index order
/// reproduces the sequential result bit for bit.
#[derive(Debug, Clone)]
pub struct SparseSymBuilder {
    n: usize,
    rows: Vec<BTreeMap<usize, f64>>,
}

impl SparseSymBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            rows: vec![BTreeMap::new(); n],
        }
    }

    /// Adds `v` at (i, j) and, for off-diagonal entries, the same value at
    /// (j, i). Writing both triangles from one computed value keeps the
    /// matrix exactly symmetric.
    pub fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        *self.rows[i].entry(j).or_insert(0.0) += v;
        if i != j {
            *self.rows[j].entry(i).or_insert(0.0) += v;
        }
    }

    pub fn build(self) -> SparseSymMatrix {
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in &self.rows {
            for (&j, &v) in row {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        SparseSymMatrix {
            n: self.n,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// Builds the identity pattern (useful in tests and trivial pencils).
pub fn sparse_identity(n: usize) -> SparseSymMatrix {
    let mut b = SparseSymBuilder::new(n);
    for i in 0..n {
        b.add_sym(i, i, 1.0);
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_spmv_is_identity() {
        let a = sparse_identity(5);
        let x = vec![1.0, -2.0, 3.5, 0.0, 7.0];
        assert_eq!(a.mul_vec(&x).unwrap(), x);
    }

    #[test]
    fn one_by_one() {
        let mut b = SparseSymBuilder::new(1);
        b.add_sym(0, 0, 4.0);
        let a = b.build();
        assert_eq!(a.mul_vec(&[2.0]).unwrap(), vec![8.0]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = sparse_identity(3);
        assert!(a.mul_vec(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn spmv_matches_dense_reference() {
        // Random-ish 100x100 symmetric sparse matrix vs a dense multiply.
        let n = 100;
        let mut b = SparseSymBuilder::new(n);
        let mut state = 0x243f6a8885a308d3u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut dense = vec![0.0f64; n * n];
        for i in 0..n {
            for j in i..n {
                if (i + j) % 7 == 0 || i == j {
                    let v = next();
                    b.add_sym(i, j, v);
                    dense[i * n + j] += v;
                    if i != j {
                        dense[j * n + i] += v;
                    }
                }
            }
        }
        let a = b.build();
        let x: Vec<f64> = (0..n).map(|_| next()).collect();
        let y = a.mul_vec(&x).unwrap();
        let norm_a = a.frobenius_norm();
        let norm_x = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += dense[i * n + j] * x[j];
            }
            assert!((acc - y[i]).abs() <= 1e-13 * norm_a * norm_x);
        }
        assert_eq!(a.symmetry_defect(), 0.0);
    }

    proptest! {
        #[test]
        fn builder_matrices_are_exactly_symmetric(
            entries in proptest::collection::vec((0usize..12, 0usize..12, -10.0f64..10.0), 1..60)
        ) {
            let mut b = SparseSymBuilder::new(12);
            for (i, j, v) in entries {
                b.add_sym(i.min(j), i.max(j), v);
            }
            let a = b.build();
            prop_assert_eq!(a.symmetry_defect(), 0.0);
        }
    }
}
