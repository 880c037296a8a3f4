//! Compressed sparse-row matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Element types that can live in a [`CsrMatrix`]. `Default::default()` is zero.
pub trait SparseValue: Copy + PartialEq + Default + std::fmt::Debug {}

impl SparseValue for u32 {}
impl SparseValue for f64 {}

/// Row-major compressed sparse matrix. Column indices are strictly increasing
/// within each row and no stored value equals zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<T>,
}

pub type SparseCountMatrix = CsrMatrix<u32>;
pub type SparseRealMatrix = CsrMatrix<f64>;

/// Borrowed view of one sparse row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseRow<'a, T> {
    pub n_cols: usize,
    pub indices: &'a [usize],
    pub values: &'a [T],
}

impl<'a, T: SparseValue> SparseRow<'a, T> {
    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + 'a {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Value at `col`, zero when not stored.
    pub fn get(&self, col: usize) -> T {
        match self.indices.binary_search(&col) {
            Ok(pos) => self.values[pos],
            Err(_) => T::default(),
        }
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut dense = vec![T::default(); self.n_cols];
        for (c, v) in self.iter() {
            dense[c] = v;
        }
        dense
    }
}

impl<T: SparseValue> CsrMatrix<T> {
    /// Empty matrix with `n_cols` columns and no rows.
    pub fn empty(n_cols: usize) -> Self {
        CsrMatrix {
            n_rows: 0,
            n_cols,
            row_offsets: vec![0],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from per-row `(column, value)` lists. Entries are sorted,
    /// zeros dropped; duplicate or out-of-range columns are an error.
    pub fn from_rows<R>(n_cols: usize, rows: R) -> Result<Self>
    where
        R: IntoIterator<Item = Vec<(usize, T)>>,
    {
        let mut m = CsrMatrix::empty(n_cols);
        for row in rows {
            m.push_row(row)?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, mut entries: Vec<(usize, T)>) -> Result<()> {
        entries.sort_by_key(|&(c, _)| c);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidArgument(format!("duplicate column {} in row {}", w[0].0, self.n_rows)));
            }
        }
        for (c, v) in entries {
            if c >= self.n_cols {
                return Err(Error::DimensionMismatch {
                    context: format!("column index in row {}", self.n_rows),
                    expected: self.n_cols,
                    found: c,
                });
            }
            if v != T::default() {
                self.col_indices.push(c);
                self.values.push(v);
            }
        }
        self.row_offsets.push(self.col_indices.len());
        self.n_rows += 1;
        Ok(())
    }

    pub fn from_dense(dense: &[Vec<T>], n_cols: usize) -> Result<Self> {
        Self::from_rows(
            n_cols,
            dense.iter().map(|r| r.iter().copied().enumerate().collect::<Vec<_>>()),
        )
    }

    /// Assembles a matrix from raw CSR parts, checking every structural invariant.
    pub fn from_parts(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        let m = CsrMatrix {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("malformed sparse matrix: {msg}")));
        if self.row_offsets.len() != self.n_rows + 1 {
            return bad(format!("{} row offsets for {} rows", self.row_offsets.len(), self.n_rows));
        }
        if self.row_offsets[0] != 0 || *self.row_offsets.last().unwrap() != self.col_indices.len() {
            return bad("row offsets do not span the stored entries".into());
        }
        if self.col_indices.len() != self.values.len() {
            return bad("index and value arrays differ in length".into());
        }
        if self.row_offsets.windows(2).any(|w| w[0] > w[1]) {
            return bad("row offsets decrease".into());
        }
        for r in 0..self.n_rows {
            let row = self.row(r);
            if row.indices.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("row {r} column indices not strictly increasing"));
            }
            if row.indices.iter().any(|&c| c >= self.n_cols) {
                return bad(format!("row {r} has a column index >= {}", self.n_cols));
            }
            if row.values.iter().any(|v| *v == T::default()) {
                return bad(format!("row {r} stores an explicit zero"));
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Panics if `r >= n_rows`; see [`CsrMatrix::checked_row`].
    pub fn row(&self, r: usize) -> SparseRow<'_, T> {
        let (a, b) = (self.row_offsets[r], self.row_offsets[r + 1]);
        SparseRow {
            n_cols: self.n_cols,
            indices: &self.col_indices[a..b],
            values: &self.values[a..b],
        }
    }

    pub fn checked_row(&self, r: usize) -> Result<SparseRow<'_, T>> {
        if r >= self.n_rows {
            return Err(Error::InvalidArgument(format!("row {r} out of range for {} rows", self.n_rows)));
        }
        Ok(self.row(r))
    }

    pub fn rows(&self) -> impl Iterator<Item = SparseRow<'_, T>> {
        (0..self.n_rows).map(move |r| self.row(r))
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        self.rows().map(|r| r.to_dense()).collect()
    }

    /// Rows at the given positions, in the given order.
    pub fn select_rows(&self, positions: &[usize]) -> Self {
        let mut m = CsrMatrix::empty(self.n_cols);
        for &p in positions {
            let row = self.row(p);
            m.col_indices.extend_from_slice(row.indices);
            m.values.extend_from_slice(row.values);
            m.row_offsets.push(m.col_indices.len());
            m.n_rows += 1;
        }
        m
    }

    /// Applies `f` to every stored value, dropping results that become zero.
    pub fn map_rows<U, F>(&self, mut f: F) -> CsrMatrix<U>
    where
        U: SparseValue,
        F: FnMut(usize, SparseRow<'_, T>) -> Vec<(usize, U)>,
    {
        let mut out = CsrMatrix::empty(self.n_cols);
        for r in 0..self.n_rows {
            let entries = f(r, self.row(r));
            for (c, v) in entries {
                if v != U::default() {
                    out.col_indices.push(c);
                    out.values.push(v);
                }
            }
            out.row_offsets.push(out.col_indices.len());
            out.n_rows += 1;
        }
        out
    }

    /// Keeps only the listed columns (strictly increasing), renumbered `0..cols.len()`.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let mut remap = vec![usize::MAX; self.n_cols];
        for (new, &old) in cols.iter().enumerate() {
            if old >= self.n_cols {
                return Err(Error::DimensionMismatch {
                    context: "selected column".into(),
                    expected: self.n_cols,
                    found: old,
                });
            }
            remap[old] = new;
        }
        let mut out = self.map_rows(|_, row| {
            row.iter()
                .filter(|&(c, _)| remap[c] != usize::MAX)
                .map(|(c, v)| (remap[c], v))
                .collect()
        });
        out.n_cols = cols.len();
        Ok(out)
    }
}

impl CsrMatrix<u32> {
    pub fn row_sum(&self, r: usize) -> Result<u64> {
        Ok(self.checked_row(r)?.values.iter().map(|&v| u64::from(v)).sum())
    }

    pub fn to_real(&self) -> SparseRealMatrix {
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets: self.row_offsets.clone(),
            col_indices: self.col_indices.clone(),
            values: self.values.iter().map(|&v| f64::from(v)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_rows_sorts_and_drops_zeros() {
        let m = CsrMatrix::<u32>::from_rows(4, vec![vec![(2, 1), (0, 3), (1, 0)], vec![]]).unwrap();
        assert_eq!(m.row_offsets(), &[0, 2, 2]);
        assert_eq!(m.col_indices(), &[0, 2]);
        assert_eq!(m.values(), &[3, 1]);
        m.validate().unwrap();
    }

    #[test]
    fn rejects_bad_columns() {
        assert!(CsrMatrix::<u32>::from_rows(2, vec![vec![(2, 1)]]).is_err());
        assert!(CsrMatrix::<u32>::from_rows(2, vec![vec![(1, 1), (1, 2)]]).is_err());
    }

    #[test]
    fn from_parts_checks_invariants() {
        assert!(CsrMatrix::from_parts(1, 3, vec![0, 2], vec![0, 2], vec![1.0, 2.0]).is_ok());
        assert!(CsrMatrix::from_parts(1, 3, vec![0, 2], vec![2, 0], vec![1.0, 2.0]).is_err());
        assert!(CsrMatrix::from_parts(1, 3, vec![0, 2], vec![0, 1], vec![1.0, 0.0]).is_err());
        assert!(CsrMatrix::from_parts(2, 3, vec![0, 2], vec![0, 1], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::<f64>::from_parts(1, 3, vec![0, 1], vec![3], vec![1.0]).is_err());
    }

    #[test]
    fn row_sums() {
        let m = CsrMatrix::<u32>::from_rows(3, vec![vec![(0, 2), (2, 1)], vec![]]).unwrap();
        assert_eq!(m.row_sum(0).unwrap(), 3);
        assert_eq!(m.row_sum(1).unwrap(), 0);
        assert!(m.row_sum(2).is_err());
    }

    #[test]
    fn column_selection_reindexes() {
        let dense = vec![vec![1.0, 0.0, 2.0, 3.0], vec![0.0, 5.0, 0.0, 0.0], vec![0.0; 4]];
        let m = CsrMatrix::from_dense(&dense, 4).unwrap();
        let s = m.select_columns(&[0, 3]).unwrap();
        assert_eq!(s.n_cols(), 2);
        assert_eq!(s.to_dense(), vec![vec![1.0, 3.0], vec![0.0, 0.0], vec![0.0, 0.0]]);
        s.validate().unwrap();
        assert_eq!(m.select_columns(&[0, 1, 2, 3]).unwrap(), m);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn dense_counts() -> impl Strategy<Value = Vec<Vec<u32>>> {
            (1usize..8).prop_flat_map(|cols| {
                proptest::collection::vec(
                    proptest::collection::vec(prop_oneof![3 => Just(0u32), 1 => 1u32..5], cols),
                    0..8,
                )
            })
        }

        proptest! {
            #[test]
            fn dense_round_trip_and_row_sums(dense in dense_counts()) {
                let cols = dense.first().map_or(1, Vec::len);
                let m = CsrMatrix::from_dense(&dense, cols).unwrap();
                m.validate().unwrap();
                prop_assert_eq!(m.to_dense(), dense.clone());
                for (r, row) in dense.iter().enumerate() {
                    prop_assert_eq!(m.row_sum(r).unwrap(), row.iter().map(|&v| v as u64).sum::<u64>());
                }
            }
        }
    }
}
