//! Design-matrix storage, weighted column statistics and the inner-loop
//! kernels shared by every solver.
//!
//! A [`FeatureMatrix`] is either dense column-major or compressed sparse
//! column (CSC). Sparse columns are never densified: centering is carried
//! as a separate per-column constant and folded into the kernels
//! algebraically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(Vec<f64>),
    Sparse {
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    },
}

/// An `n × p` design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    storage: Storage,
}

/// Borrowed view of one column.
#[derive(Debug, Clone, Copy)]
pub enum Column<'a> {
    Dense(&'a [f64]),
    Sparse { rows: &'a [usize], values: &'a [f64] },
}

impl<'a> Column<'a> {
    /// Calls `f(row, value)` for every stored entry. Dense columns visit
    /// every row, including zeros.
    #[inline]
    pub fn for_each(&self, mut f: impl FnMut(usize, f64)) {
        match *self {
            Column::Dense(v) => v.iter().enumerate().for_each(|(i, &x)| f(i, x)),
            Column::Sparse { rows, values } => rows
                .iter()
                .zip(values)
                .for_each(|(&i, &x)| f(i, x)),
        }
    }

    /// `Σ_i a_i b_i x_i` over stored entries.
    #[inline]
    pub fn dot2(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        self.for_each(|i, x| s += a[i] * b[i] * x);
        s
    }

    /// `Σ_i a_i x_i` over stored entries.
    #[inline]
    pub fn dot(&self, a: &[f64]) -> f64 {
        let mut s = 0.0;
        self.for_each(|i, x| s += a[i] * x);
        s
    }

    pub fn nnz(&self) -> usize {
        match *self {
            Column::Dense(v) => v.len(),
            Column::Sparse { rows, .. } => rows.len(),
        }
    }
}

impl FeatureMatrix {
    /// Builds a dense matrix from column-major values.
    pub fn dense(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::Empty("feature matrix"));
        }
        if values.len() != n_rows * n_cols {
            return Err(Error::Dimension {
                what: "dense values",
                expected: n_rows * n_cols,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        Ok(Self {
            n_rows,
            n_cols,
            storage: Storage::Dense(values),
        })
    }

    /// Builds a dense matrix from a slice of rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Empty("feature matrix"));
        }
        let p = rows[0].as_ref().len();
        let mut values = vec![0.0; n * p];
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != p {
                return Err(Error::Dimension {
                    what: "row length",
                    expected: p,
                    got: row.len(),
                });
            }
            for (j, &x) in row.iter().enumerate() {
                values[j * n + i] = x;
            }
        }
        Self::dense(n, p, values)
    }

    /// Builds a CSC matrix. Row indices must be strictly increasing within
    /// each column.
    pub fn csc(
        n_rows: usize,
        n_cols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::Empty("feature matrix"));
        }
        if col_ptr.len() != n_cols + 1 {
            return Err(Error::Dimension {
                what: "column pointers",
                expected: n_cols + 1,
                got: col_ptr.len(),
            });
        }
        if row_idx.len() != values.len() {
            return Err(Error::InvalidSparse(format!(
                "{} row indices but {} values",
                row_idx.len(),
                values.len()
            )));
        }
        if col_ptr[0] != 0 || *col_ptr.last().unwrap() != values.len() {
            return Err(Error::InvalidSparse(
                "column pointers must start at 0 and end at the nonzero count".into(),
            ));
        }
        for j in 0..n_cols {
            let (a, b) = (col_ptr[j], col_ptr[j + 1]);
            if b < a {
                return Err(Error::InvalidSparse(format!(
                    "column pointers decrease at column {j}"
                )));
            }
            let rows = &row_idx[a..b];
            if rows.iter().any(|&r| r >= n_rows) {
                return Err(Error::InvalidSparse(format!(
                    "row index out of range in column {j}"
                )));
            }
            if rows.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidSparse(format!(
                    "row indices not strictly increasing in column {j}"
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        Ok(Self {
            n_rows,
            n_cols,
            storage: Storage::Sparse {
                col_ptr,
                row_idx,
                values,
            },
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse { .. })
    }

    /// Number of stored entries (`n·p` for dense storage).
    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(v) => v.len(),
            Storage::Sparse { values, .. } => values.len(),
        }
    }

    #[inline]
    pub fn column(&self, j: usize) -> Column<'_> {
        match &self.storage {
            Storage::Dense(v) => Column::Dense(&v[j * self.n_rows..(j + 1) * self.n_rows]),
            Storage::Sparse {
                col_ptr,
                row_idx,
                values,
            } => {
                let (a, b) = (col_ptr[j], col_ptr[j + 1]);
                Column::Sparse {
                    rows: &row_idx[a..b],
                    values: &values[a..b],
                }
            }
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(v) => v[j * self.n_rows + i],
            Storage::Sparse {
                col_ptr,
                row_idx,
                values,
            } => {
                let (a, b) = (col_ptr[j], col_ptr[j + 1]);
                match row_idx[a..b].binary_search(&i) {
                    Ok(k) => values[a + k],
                    Err(_) => 0.0,
                }
            }
        }
    }

    /// Dense copy of the same matrix.
    pub fn to_dense(&self) -> Self {
        let mut out = vec![0.0; self.n_rows * self.n_cols];
        for j in 0..self.n_cols {
            self.column(j)
                .for_each(|i, x| out[j * self.n_rows + i] = x);
        }
        Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            storage: Storage::Dense(out),
        }
    }

    /// CSC copy; exact zeros become structural zeros.
    pub fn to_sparse(&self) -> Self {
        let mut col_ptr = Vec::with_capacity(self.n_cols + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for j in 0..self.n_cols {
            self.column(j).for_each(|i, x| {
                if x != 0.0 {
                    row_idx.push(i);
                    values.push(x);
                }
            });
            col_ptr.push(values.len());
        }
        Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            storage: Storage::Sparse {
                col_ptr,
                row_idx,
                values,
            },
        }
    }

    /// New matrix made of the given rows, in order, keeping the storage kind.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("row selection"));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n_rows) {
            return Err(Error::OutOfRange {
                what: "row selection",
                index: bad,
                len: self.n_rows,
            });
        }
        let m = rows.len();
        match &self.storage {
            Storage::Dense(v) => {
                let mut out = Vec::with_capacity(m * self.n_cols);
                for j in 0..self.n_cols {
                    let col = &v[j * self.n_rows..(j + 1) * self.n_rows];
                    out.extend(rows.iter().map(|&r| col[r]));
                }
                Self::dense(m, self.n_cols, out)
            }
            Storage::Sparse { .. } => {
                // old row -> list of new positions (rows may repeat)
                let mut positions: Vec<Vec<usize>> = vec![Vec::new(); self.n_rows];
                for (new, &old) in rows.iter().enumerate() {
                    positions[old].push(new);
                }
                let mut col_ptr = Vec::with_capacity(self.n_cols + 1);
                let mut row_idx = Vec::new();
                let mut values = Vec::new();
                col_ptr.push(0);
                let mut buf: Vec<(usize, f64)> = Vec::new();
                for j in 0..self.n_cols {
                    buf.clear();
                    self.column(j).for_each(|i, x| {
                        for &new in &positions[i] {
                            buf.push((new, x));
                        }
                    });
                    buf.sort_by_key(|&(r, _)| r);
                    for &(r, x) in &buf {
                        row_idx.push(r);
                        values.push(x);
                    }
                    col_ptr.push(values.len());
                }
                Self::csc(m, self.n_cols, col_ptr, row_idx, values)
            }
        }
    }
}

/// Validated per-observation weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Empty("weights"));
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidWeights(
                "weights must be finite and nonnegative".into(),
            ));
        }
        if !w.iter().any(|&v| v > 0.0) {
            return Err(Error::InvalidWeights(
                "at least one weight must be positive".into(),
            ));
        }
        Ok(Self(w))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Weights rescaled to sum to the number of observations.
    pub fn normalized_to_count(&self) -> Vec<f64> {
        let total: f64 = self.0.iter().sum();
        let n = self.0.len() as f64;
        self.0.iter().map(|w| w * n / total).collect()
    }

    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        Self::new(rows.iter().map(|&r| self.0[r]).collect())
    }
}

impl AsRef<[f64]> for Weights {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Weighted per-column mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl ColumnStats {
    /// Columns with zero spread over the positively weighted rows.
    pub fn is_constant(&self, j: usize) -> bool {
        self.scales[j] == 0.0
    }
}

/// Weighted means and 1/n-convention standard deviations, with weights
/// normalized to sum to one.
pub fn column_stats(x: &FeatureMatrix, w: &Weights) -> Result<ColumnStats> {
    let n = x.n_rows();
    if w.len() != n {
        return Err(Error::Dimension {
            what: "weights",
            expected: n,
            got: w.len(),
        });
    }
    let total: f64 = w.as_slice().iter().sum();
    let wbar: Vec<f64> = w.as_slice().iter().map(|v| v / total).collect();
    let positive_rows = wbar.iter().filter(|&&v| v > 0.0).count();
    let mut means = Vec::with_capacity(x.n_cols());
    let mut scales = Vec::with_capacity(x.n_cols());
    for j in 0..x.n_cols() {
        let col = x.column(j);
        if let Some(c) = constant_value(col, &wbar, positive_rows) {
            means.push(c);
            scales.push(0.0);
            continue;
        }
        let mut mean = 0.0;
        let mut stored_mass = 0.0;
        col.for_each(|i, v| {
            mean += wbar[i] * v;
            stored_mass += wbar[i];
        });
        let mut ss = 0.0;
        col.for_each(|i, v| ss += wbar[i] * (v - mean) * (v - mean));
        // rows not stored hold zeros
        let unstored = (1.0 - stored_mass).max(0.0);
        if col.nnz() < n {
            ss += unstored * mean * mean;
        }
        means.push(mean);
        scales.push(ss.max(0.0).sqrt());
    }
    Ok(ColumnStats { means, scales })
}

fn constant_value(col: Column<'_>, wbar: &[f64], positive_rows: usize) -> Option<f64> {
    let mut first: Option<f64> = None;
    let mut constant = true;
    let mut stored_positive = 0usize;
    col.for_each(|i, v| {
        if wbar[i] > 0.0 {
            stored_positive += 1;
            match first {
                None => first = Some(v),
                Some(f) if f != v => constant = false,
                _ => {}
            }
        }
    });
    if !constant {
        return None;
    }
    if stored_positive < positive_rows {
        // some positively weighted rows are structural zeros
        match first {
            None => Some(0.0),
            Some(f) if f == 0.0 => Some(0.0),
            _ => None,
        }
    } else {
        Some(first.unwrap_or(0.0))
    }
}

/// `Σ_i w_i (x_ij − c_j) v_i`, with `c_j` the column mean when `centered`.
pub fn weighted_dot(
    x: &FeatureMatrix,
    stats: &ColumnStats,
    j: usize,
    v: &[f64],
    w: &[f64],
    centered: bool,
) -> Result<f64> {
    if j >= x.n_cols() {
        return Err(Error::OutOfRange {
            what: "column",
            index: j,
            len: x.n_cols(),
        });
    }
    if v.len() != x.n_rows() || w.len() != x.n_rows() {
        return Err(Error::Dimension {
            what: "vector length",
            expected: x.n_rows(),
            got: v.len().min(w.len()),
        });
    }
    let raw = x.column(j).dot2(w, v);
    if centered {
        let wv: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
        Ok(raw - stats.means[j] * wv)
    } else {
        Ok(raw)
    }
}

/// `η = intercept + Xβ`.
pub fn predict_linear(x: &FeatureMatrix, beta: &[f64], intercept: f64) -> Result<Vec<f64>> {
    if beta.len() != x.n_cols() {
        return Err(Error::Dimension {
            what: "coefficient vector",
            expected: x.n_cols(),
            got: beta.len(),
        });
    }
    let mut eta = vec![intercept; x.n_rows()];
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            x.column(j).for_each(|i, v| eta[i] += v * b);
        }
    }
    Ok(eta)
}

/// `η = intercept + Xβ` for a sparse coefficient vector.
pub(crate) fn predict_sparse(
    x: &FeatureMatrix,
    indices: &[usize],
    values: &[f64],
    intercept: f64,
) -> Vec<f64> {
    let mut eta = vec![intercept; x.n_rows()];
    for (&j, &b) in indices.iter().zip(values) {
        x.column(j).for_each(|i, v| eta[i] += v * b);
    }
    eta
}
