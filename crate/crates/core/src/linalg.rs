//! Dense and compressed-sparse-column kernels shared by every solver.
//!
//! Vectors are `nalgebra::DVector<f64>`. Column subsets are always passed as
//! [`IndexSet`]s and sign patterns as [`SignVector`]s; the diagonal sign
//! matrix is never materialized.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Relative rank threshold: pivots below `DEFAULT_RANK_TOL * ||A_S||_F` count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Strictly increasing list of distinct column indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn empty() -> Self {
        IndexSet(Vec::new())
    }

    /// Validates that `indices` is strictly increasing.
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("index set must be strictly increasing"));
        }
        Ok(IndexSet(indices))
    }

    /// Sorts and deduplicates arbitrary indices.
    pub fn from_unsorted(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        IndexSet(indices)
    }

    pub(crate) fn from_sorted_unchecked(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        IndexSet(indices)
    }

    pub fn full(n: usize) -> Self {
        IndexSet((0..n).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    pub fn intersection(&self, other: &IndexSet) -> IndexSet {
        IndexSet(self.iter().filter(|&j| other.contains(j)).collect())
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        IndexSet::from_unsorted(v)
    }

    pub fn difference(&self, other: &IndexSet) -> IndexSet {
        IndexSet(self.iter().filter(|&j| !other.contains(j)).collect())
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.iter().all(|j| other.contains(j))
    }

    /// Complement within `0..n`.
    pub fn complement(&self, n: usize) -> IndexSet {
        IndexSet((0..n).filter(|&j| !self.contains(j)).collect())
    }

    pub fn max_index(&self) -> Option<usize> {
        self.0.last().copied()
    }
}

impl TryFrom<Vec<usize>> for IndexSet {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        IndexSet::new(v)
    }
}

impl From<IndexSet> for Vec<usize> {
    fn from(s: IndexSet) -> Vec<usize> {
        s.0
    }
}

/// Per-column signs in {-1, +1}; zero maps to +1.
#[derive(Debug, Clone, PartialEq)]
pub struct SignVector(Vec<f64>);

impl SignVector {
    pub fn new(signs: Vec<f64>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::invalid("sign vector entries must be exactly -1 or +1"));
        }
        Ok(SignVector(signs))
    }

    pub fn ones(n: usize) -> Self {
        SignVector(vec![1.0; n])
    }

    /// Signs of `values` with `sgn(0) = +1`.
    pub fn of(values: &[f64]) -> Self {
        SignVector(values.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect())
    }

    #[inline]
    pub fn get(&self, j: usize) -> f64 {
        self.0[j]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `diag(signs) * v`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(v.len(), v.iter().zip(&self.0).map(|(x, s)| x * s))
    }
}

/// Compressed sparse column storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    pub fn new(nrows: usize, ncols: usize, col_ptr: Vec<usize>, row_idx: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if col_ptr.len() != ncols + 1 || col_ptr[0] != 0 {
            return Err(Error::invalid("column pointer array must have n+1 entries starting at 0"));
        }
        if col_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("column pointers must be nondecreasing"));
        }
        let nnz = *col_ptr.last().unwrap();
        if row_idx.len() != nnz || values.len() != nnz {
            return Err(Error::invalid("row index and value arrays must have nnz entries"));
        }
        for j in 0..ncols {
            let rows = &row_idx[col_ptr[j]..col_ptr[j + 1]];
            if rows.iter().any(|&r| r >= nrows) {
                return Err(Error::invalid(format!("row index out of range in column {j}")));
            }
            if rows.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!("row indices not strictly sorted in column {j}")));
            }
        }
        Ok(CscMatrix { nrows, ncols, col_ptr, row_idx, values })
    }

    /// Builds from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        if sorted.iter().any(|&(r, c, _)| r >= nrows || c >= ncols) {
            return Err(Error::invalid("triplet index out of range"));
        }
        sorted.sort_by_key(|&(r, c, _)| (c, r));
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            row_idx.push(r);
            values.push(v);
            col_ptr[c + 1] += 1;
            last = Some((r, c));
        }
        for j in 0..ncols {
            col_ptr[j + 1] += col_ptr[j];
        }
        CscMatrix::new(nrows, ncols, col_ptr, row_idx, values)
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[s..e], &self.values[s..e])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    Dense(DMatrix<f64>),
    Sparse(CscMatrix),
}

/// The design matrix `A` (m rows, n columns).
///
/// Problem matrices built through the public constructors satisfy
/// `1 <= m <= n`. Column submatrices produced by [`DesignMatrix::submatrix_columns`]
/// keep the row count but may have any number of columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    storage: Storage,
}

impl DesignMatrix {
    pub fn dense(a: DMatrix<f64>) -> Result<Self> {
        check_shape(a.nrows(), a.ncols())?;
        Ok(DesignMatrix { storage: Storage::Dense(a) })
    }

    /// Dense matrix from row-major data.
    pub fn from_row_major(m: usize, n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != m * n {
            return Err(Error::invalid(format!("expected {} entries, got {}", m * n, data.len())));
        }
        DesignMatrix::dense(DMatrix::from_row_slice(m, n, data))
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("ragged rows"));
        }
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        DesignMatrix::from_row_major(m, n, &data)
    }

    pub fn sparse(csc: CscMatrix) -> Result<Self> {
        check_shape(csc.nrows, csc.ncols)?;
        Ok(DesignMatrix { storage: Storage::Sparse(csc) })
    }

    pub fn identity(n: usize) -> Self {
        DesignMatrix { storage: Storage::Dense(DMatrix::identity(n, n)) }
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    pub fn nrows(&self) -> usize {
        match &self.storage {
            Storage::Dense(a) => a.nrows(),
            Storage::Sparse(s) => s.nrows,
        }
    }

    pub fn ncols(&self) -> usize {
        match &self.storage {
            Storage::Dense(a) => a.ncols(),
            Storage::Sparse(s) => s.ncols,
        }
    }

    /// `<A e_j, v>`.
    #[inline]
    pub fn column_dot(&self, j: usize, v: &[f64]) -> f64 {
        match &self.storage {
            Storage::Dense(a) => {
                let col = a.column(j);
                col.iter().zip(v).map(|(x, y)| x * y).sum()
            }
            Storage::Sparse(s) => {
                let (rows, vals) = s.column(j);
                rows.iter().zip(vals).map(|(&r, x)| x * v[r]).sum()
            }
        }
    }

    /// Writes column `j` (scaled by `scale`) into `out`, which must have length m.
    pub fn column_into(&self, j: usize, scale: f64, out: &mut [f64]) {
        match &self.storage {
            Storage::Dense(a) => {
                for (o, x) in out.iter_mut().zip(a.column(j).iter()) {
                    *o = scale * x;
                }
            }
            Storage::Sparse(s) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                let (rows, vals) = s.column(j);
                for (&r, x) in rows.iter().zip(vals) {
                    out[r] = scale * x;
                }
            }
        }
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        let mut out = DVector::zeros(self.nrows());
        self.column_into(j, 1.0, out.as_mut_slice());
        out
    }

    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.ncols())
            .map(|j| match &self.storage {
                Storage::Dense(a) => a.column(j).norm(),
                Storage::Sparse(s) => s.column(j).1.iter().map(|x| x * x).sum::<f64>().sqrt(),
            })
            .collect()
    }

    /// `A^T v`.
    pub fn tr_mul(&self, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(v.len(), self.nrows(), "tr_mul dimension mismatch");
        let work = match &self.storage {
            Storage::Dense(a) => a.len(),
            Storage::Sparse(s) => s.nnz(),
        };
        let exec = par::for_work(work);
        let vs = v.as_slice();
        DVector::from_vec(par::map_range(self.ncols(), exec, |j| self.column_dot(j, vs)))
    }

    /// `A x`.
    pub fn mul(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols(), "mul dimension mismatch");
        match &self.storage {
            Storage::Dense(a) => a * x,
            Storage::Sparse(_) => {
                let support: Vec<(usize, f64)> =
                    x.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, &v)| (j, v)).collect();
                self.mul_support(&support)
            }
        }
    }

    /// `sum_k vals_k * A e_{j_k}` over the given (column, value) pairs.
    pub fn mul_support(&self, support: &[(usize, f64)]) -> DVector<f64> {
        let m = self.nrows();
        let mut out = DVector::zeros(m);
        for &(j, val) in support {
            if val == 0.0 {
                continue;
            }
            match &self.storage {
                Storage::Dense(a) => out.axpy(val, &a.column(j), 1.0),
                Storage::Sparse(s) => {
                    let (rows, vals) = s.column(j);
                    for (&r, x) in rows.iter().zip(vals) {
                        out[r] += val * x;
                    }
                }
            }
        }
        out
    }

    /// Dense `m x |idx|` copy of the selected columns, each multiplied by its sign when given.
    pub fn gather_columns(&self, idx: &[usize], signs: Option<&SignVector>) -> DMatrix<f64> {
        let m = self.nrows();
        let mut out = DMatrix::zeros(m, idx.len());
        for (k, &j) in idx.iter().enumerate() {
            let s = signs.map_or(1.0, |sv| sv.get(j));
            self.column_into(j, s, out.column_mut(k).as_mut_slice());
        }
        out
    }

    /// Columns of `A` indexed by `s`, in order, with the same storage kind.
    pub fn submatrix_columns(&self, s: &IndexSet) -> Result<DesignMatrix> {
        if let Some(j) = s.max_index() {
            if j >= self.ncols() {
                return Err(Error::invalid(format!("column index {j} out of range for {} columns", self.ncols())));
            }
        }
        let storage = match &self.storage {
            Storage::Dense(_) => Storage::Dense(self.gather_columns(s.as_slice(), None)),
            Storage::Sparse(csc) => {
                let mut col_ptr = Vec::with_capacity(s.len() + 1);
                col_ptr.push(0);
                let mut row_idx = Vec::new();
                let mut values = Vec::new();
                for j in s.iter() {
                    let (rows, vals) = csc.column(j);
                    row_idx.extend_from_slice(rows);
                    values.extend_from_slice(vals);
                    col_ptr.push(row_idx.len());
                }
                Storage::Sparse(CscMatrix { nrows: csc.nrows, ncols: s.len(), col_ptr, row_idx, values })
            }
        };
        Ok(DesignMatrix { storage })
    }

    pub fn frobenius_norm(&self) -> f64 {
        match &self.storage {
            Storage::Dense(a) => a.norm(),
            Storage::Sparse(s) => s.values.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.storage {
            Storage::Dense(a) => a.clone(),
            Storage::Sparse(_) => self.gather_columns(&(0..self.ncols()).collect::<Vec<_>>(), None),
        }
    }
}

fn check_shape(m: usize, n: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::invalid("design matrix needs at least one row"));
    }
    if n < m {
        return Err(Error::invalid(format!("design matrix must satisfy m <= n, got {m} x {n}")));
    }
    Ok(())
}

/// `||v||_inf`.
pub fn norm_inf(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

pub fn norm_one(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Outcome of a triangular least-squares factorization attempt.
pub(crate) enum LstsqOutcome {
    Solved(DVector<f64>),
    /// Column (position within the input matrix) that is numerically dependent on its predecessors.
    Dependent {
        column: usize,
    },
}

/// Least squares `min ||b z - target||` by Householder QR with one step of
/// iterative refinement. Reports the first column whose pivot falls below
/// `threshold` instead of solving.
pub(crate) fn lstsq_dense(b: &DMatrix<f64>, target: &DVector<f64>, threshold: f64) -> LstsqOutcome {
    let (m, k) = b.shape();
    if k == 0 {
        return LstsqOutcome::Solved(DVector::zeros(0));
    }
    let qr = b.clone().qr();
    let r = qr.r();
    let diag = k.min(m);
    for i in 0..diag {
        let piv = r[(i, i)].abs();
        if piv <= threshold || !piv.is_finite() {
            return LstsqOutcome::Dependent { column: i };
        }
    }
    if k > m {
        return LstsqOutcome::Dependent { column: m };
    }
    let solve = |rhs: &DVector<f64>| -> DVector<f64> {
        let mut qtr = rhs.clone();
        qr.q_tr_mul(&mut qtr);
        let top = qtr.rows(0, k).into_owned();
        r.solve_upper_triangular(&top).expect("nonsingular triangle")
    };
    let mut z = solve(target);
    let resid = target - b * &z;
    z += solve(&resid);
    LstsqOutcome::Solved(z)
}

/// Solves `(A_S^T A_S) v = rhs` through a QR factorization of `A_S` (the Gram
/// matrix is never formed).
pub fn gram_solve(a_s: &DesignMatrix, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let k = a_s.ncols();
    if rhs.len() != k {
        return Err(Error::invalid(format!("rhs has length {}, expected {k}", rhs.len())));
    }
    let dense = a_s.to_dense();
    gram_solve_dense(&dense, rhs, DEFAULT_RANK_TOL * dense.norm())
}

pub(crate) fn gram_solve_dense(a: &DMatrix<f64>, rhs: &DVector<f64>, threshold: f64) -> Result<DVector<f64>> {
    let (m, k) = a.shape();
    if k == 0 {
        return Ok(DVector::zeros(0));
    }
    if k > m {
        return Err(Error::RankDeficient { columns: k, pivot: 0.0, threshold });
    }
    let qr = a.clone().qr();
    let r = qr.r();
    for i in 0..k {
        let piv = r[(i, i)].abs();
        if piv <= threshold {
            return Err(Error::RankDeficient { columns: k, pivot: piv, threshold });
        }
    }
    // R^T R v = rhs
    let y = r.tr_solve_upper_triangular(rhs).expect("nonsingular triangle");
    let mut v = r.solve_upper_triangular(&y).expect("nonsingular triangle");
    // One refinement step against the Gram system.
    let gram_v = a.tr_mul(&(a * &v));
    let res = rhs - gram_v;
    let y = r.tr_solve_upper_triangular(&res).expect("nonsingular triangle");
    v += r.solve_upper_triangular(&y).expect("nonsingular triangle");
    Ok(v)
}

/// Largest subset `M` of `s ∩ within` whose columns are linearly independent.
///
/// Columns are scanned in increasing index order and kept when their
/// component orthogonal to the already kept columns exceeds the threshold,
/// so among equally large subsets the one with the smallest indices wins.
/// `tol_rank` defaults to `1e-10 * ||A_{s ∩ within}||_F`.
pub fn max_independent_subset(a: &DesignMatrix, s: &IndexSet, within: &IndexSet, tol_rank: Option<f64>) -> IndexSet {
    extend_independent_subset(a, &IndexSet::empty(), &s.intersection(within), tol_rank)
}

/// Grows `base` (assumed independent) with columns from `candidates`, in
/// increasing index order, into a maximal independent subset of `base ∪ candidates`.
pub fn extend_independent_subset(
    a: &DesignMatrix,
    base: &IndexSet,
    candidates: &IndexSet,
    tol_rank: Option<f64>,
) -> IndexSet {
    let pool = base.union(candidates);
    if pool.is_empty() {
        return IndexSet::empty();
    }
    let threshold = tol_rank.unwrap_or_else(|| {
        let sub = a.gather_columns(pool.as_slice(), None);
        DEFAULT_RANK_TOL * sub.norm()
    });
    let m = a.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    let order = base.iter().chain(candidates.difference(base).iter().collect::<Vec<_>>());
    let mut col = vec![0.0; m];
    for j in order {
        if basis.len() == m {
            break;
        }
        a.column_into(j, 1.0, &mut col);
        let mut r = DVector::from_column_slice(&col);
        // Two passes of Gram-Schmidt keep the projection accurate.
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&r);
                r.axpy(-c, q, 1.0);
            }
        }
        let nr = r.norm();
        if nr > threshold {
            basis.push(r / nr);
            kept.push(j);
        }
    }
    IndexSet::from_unsorted(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    fn vecd(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn submatrix_selects_columns() {
        let a = DesignMatrix::from_rows(&[&[1.0, 0.0, 2.0], &[0.0, 1.0, 3.0]]).unwrap();
        let s = IndexSet::new(vec![0, 2]).unwrap();
        let sub = a.submatrix_columns(&s).unwrap();
        assert_eq!(sub.to_dense(), DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 3.0]));

        let empty = a.submatrix_columns(&IndexSet::empty()).unwrap();
        assert_eq!((empty.nrows(), empty.ncols()), (2, 0));

        let id = DesignMatrix::identity(3);
        assert_eq!(id.submatrix_columns(&IndexSet::full(3)).unwrap(), id);
    }

    #[test]
    fn submatrix_out_of_range_is_rejected() {
        let a = DesignMatrix::identity(2);
        let err = a.submatrix_columns(&IndexSet::new(vec![1, 2]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn submatrix_preserves_sparse_storage() {
        let csc = CscMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (1, 2, 4.0), (0, 2, 2.0)]).unwrap();
        let a = DesignMatrix::sparse(csc).unwrap();
        let sub = a.submatrix_columns(&IndexSet::new(vec![2]).unwrap()).unwrap();
        assert!(sub.is_sparse());
        assert_eq!(sub.to_dense(), DMatrix::from_row_slice(2, 1, &[2.0, 4.0]));
    }

    #[test]
    fn shape_invariants_enforced() {
        assert!(DesignMatrix::from_row_major(3, 2, &[0.0; 6]).is_err());
        assert!(DesignMatrix::from_row_major(0, 2, &[]).is_err());
        assert!(CscMatrix::new(2, 1, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(CscMatrix::new(2, 2, vec![0, 2, 1], vec![0, 1], vec![1.0, 1.0]).is_err());
        assert!(CscMatrix::new(2, 1, vec![0, 1], vec![2], vec![1.0]).is_err());
        assert!(IndexSet::new(vec![1, 1]).is_err());
        assert!(SignVector::new(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn gram_solve_examples() {
        let id = DesignMatrix::identity(2);
        let v = gram_solve(&id, &vecd(&[5.0, 7.0])).unwrap();
        assert_close!(v[0], 5.0, 1e-14);
        assert_close!(v[1], 7.0, 1e-14);

        let d = DesignMatrix::from_rows(&[&[2.0, 0.0], &[0.0, 1.0]]).unwrap();
        let v = gram_solve(&d, &vecd(&[4.0, 1.0])).unwrap();
        assert_close!(v[0], 1.0, 1e-14);
        assert_close!(v[1], 1.0, 1e-14);

        let u = DesignMatrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
        let v = gram_solve(&u, &vecd(&[1.0, 2.0])).unwrap();
        assert_close!(v[0], 0.0, 1e-14);
        assert_close!(v[1], 1.0, 1e-14);
    }

    #[test]
    fn gram_solve_detects_rank_deficiency() {
        let a = DesignMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        let err = gram_solve(&a, &vecd(&[1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
    }

    #[test]
    fn independent_subset_examples() {
        let a = DesignMatrix::from_rows(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]]).unwrap();
        let all = IndexSet::full(3);
        assert_eq!(max_independent_subset(&a, &all, &all, None).as_slice(), &[0, 1]);

        let id = DesignMatrix::identity(2);
        let s = IndexSet::new(vec![1]).unwrap();
        assert_eq!(max_independent_subset(&id, &s, &IndexSet::full(2), None).as_slice(), &[1]);

        let dup = DesignMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        let two = IndexSet::full(2);
        assert_eq!(max_independent_subset(&dup, &two, &two, None).as_slice(), &[0]);

        assert!(max_independent_subset(&a, &IndexSet::empty(), &all, None).is_empty());
        let within = IndexSet::new(vec![1, 2]).unwrap();
        assert_eq!(max_independent_subset(&a, &all, &within, None).as_slice(), &[1, 2]);
    }

    #[test]
    fn extension_keeps_base_first() {
        let a = DesignMatrix::from_rows(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]]).unwrap();
        let base = IndexSet::new(vec![2]).unwrap();
        let out = extend_independent_subset(&a, &base, &IndexSet::full(3), None);
        assert_eq!(out.as_slice(), &[0, 2]);
    }

    #[test]
    fn sparse_and_dense_kernels_agree() {
        let trip = [(0, 0, 1.5), (2, 0, -1.0), (1, 1, 2.0), (0, 3, 0.5), (2, 3, 4.0), (1, 2, -3.0)];
        let csc = CscMatrix::from_triplets(3, 4, &trip).unwrap();
        let sp = DesignMatrix::sparse(csc).unwrap();
        let de = DesignMatrix::dense(sp.to_dense()).unwrap();
        let x = vecd(&[1.0, -2.0, 0.5, 3.0]);
        let p = vecd(&[0.3, -0.7, 1.1]);
        assert!((sp.mul(&x) - de.mul(&x)).norm() < 1e-15);
        assert!((sp.tr_mul(&p) - de.tr_mul(&p)).norm() < 1e-15);
        assert_close!(sp.frobenius_norm(), de.frobenius_norm(), 1e-15);
    }

    #[test]
    fn duplicate_triplets_are_summed() {
        let csc = CscMatrix::from_triplets(1, 1, &[(0, 0, 0.5), (0, 0, 0.5)]).unwrap();
        assert_eq!(csc.nnz(), 1);
        assert_eq!(csc.values(), &[1.0]);
    }
}
