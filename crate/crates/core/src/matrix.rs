//! Dense matrix types and the numerical primitives the solver is built on.
//!
//! Storage is backed by `nalgebra::DMatrix<f64>` (column-major internally);
//! the row-major views exist for I/O and for callers building matrices by hand.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, shape, Error, Result};

/// Smallest eigenvalue a matrix must exceed to be certified positive definite.
pub const PD_TOLERANCE: f64 = 1e-12;

/// General real matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    /// Builds a `rows × cols` matrix from entries listed row by row.
    pub fn new(rows: usize, cols: usize, row_major: Vec<f64>) -> Result<Self> {
        if row_major.len() != rows * cols {
            return Err(shape(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                row_major.len()
            )));
        }
        Self::from_nalgebra(DMatrix::from_row_slice(rows, cols, &row_major))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
            return Err(shape(format!("row {bad} has {} entries, expected {ncols}", rows[bad].len())));
        }
        Self::new(rows.len(), ncols, rows.concat())
    }

    pub fn from_nalgebra(m: DMatrix<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(invalid("matrix has non-finite entries"));
        }
        Ok(Self(m))
    }

    /// Wraps without the finiteness scan; callers that can produce NaN must check.
    pub(crate) fn wrap(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    /// A single column built from a vector.
    pub fn column_vector(v: &[f64]) -> Result<Self> {
        Self::new(v.len(), 1, v.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.transpose().as_slice().to_vec()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.0.column(j).iter().copied().collect()
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<Self> {
        if self.cols() != rhs.rows() {
            return Err(shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                rhs.rows(),
                rhs.cols()
            )));
        }
        Ok(Self(&self.0 * &rhs.0))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(&self.0 * c)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Sum of absolute entries, `|M|₁`.
    pub fn abs_sum(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn count_nonzero(&self) -> usize {
        self.0.iter().filter(|v| **v != 0.0).count()
    }
}

/// Square matrix with exactly symmetric storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    /// Builds from row-major entries; the result is `(M + Mᵀ)/2`.
    pub fn new(dim: usize, row_major: Vec<f64>) -> Result<Self> {
        Self::from_dense(&DenseMatrix::new(dim, dim, row_major)?)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_dense(&DenseMatrix::from_rows(rows)?)
    }

    pub fn from_dense(m: &DenseMatrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(shape(format!("symmetric matrix must be square, got {}x{}", m.rows(), m.cols())));
        }
        Ok(Self::symmetrize(m.as_matrix()))
    }

    pub fn from_nalgebra(m: DMatrix<f64>) -> Result<Self> {
        Self::from_dense(&DenseMatrix::from_nalgebra(m)?)
    }

    /// `(M + Mᵀ)/2`. Each mirrored pair is computed from the same two operands,
    /// so the result is bitwise symmetric.
    pub(crate) fn symmetrize(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            out[(j, j)] = m[(j, j)];
            for i in (j + 1)..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Self(out)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        let n = d.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        Self::from_nalgebra(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.0.diagonal().iter().copied().collect()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix(self.0.clone())
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.as_slice().to_vec()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn count_nonzero(&self) -> usize {
        self.0.iter().filter(|v| **v != 0.0).count()
    }
}

/// Orthogonal eigenvectors (as columns) with eigenvalues sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub vectors: DenseMatrix,
    pub values: Vec<f64>,
}

impl EigenPair {
    /// `U diag(f(ψ)) Uᵀ`, symmetrized.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymmetricMatrix {
        let u = self.vectors.as_matrix();
        let mut scaled = u.clone();
        for (j, v) in self.values.iter().enumerate() {
            let s = f(*v);
            scaled.column_mut(j).scale_mut(s);
        }
        SymmetricMatrix::symmetrize(&(scaled * u.transpose()))
    }

    pub fn reconstruct(&self) -> SymmetricMatrix {
        self.reconstruct_with(|v| v)
    }
}

/// Symmetric eigendecomposition `M = U diag(ψ) Uᵀ`.
///
/// Eigenvalues are sorted descending. Each eigenvector is oriented so that its
/// first component with magnitude above `1e-12` is positive.
pub fn sym_eigen(m: &SymmetricMatrix) -> Result<EigenPair> {
    if m.0.iter().any(|v| !v.is_finite()) {
        return Err(invalid("eigendecomposition input has non-finite entries"));
    }
    Ok(sym_eigen_raw(&m.0))
}

pub(crate) fn sym_eigen_raw(m: &DMatrix<f64>) -> EigenPair {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut vectors = DMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let col = eig.eigenvectors.column(src);
        let flip = col.iter().find(|v| v.abs() > 1e-12).is_some_and(|v| *v < 0.0);
        let sign = if flip { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, dst)] = sign * col[i];
        }
    }
    EigenPair { vectors: DenseMatrix(vectors), values }
}

/// Symmetric matrix certified positive definite, carrying its eigendecomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    matrix: SymmetricMatrix,
    eigen: EigenPair,
}

impl SpdMatrix {
    pub fn new(m: SymmetricMatrix) -> Result<Self> {
        let eigen = sym_eigen(&m)?;
        let min = eigen.values.last().copied().unwrap_or(f64::INFINITY);
        if !(min > PD_TOLERANCE) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
        }
        Ok(Self { matrix: m, eigen })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(SymmetricMatrix::identity(n)).expect("identity is positive definite")
    }

    /// Builds `U diag(w) Uᵀ` from a decomposition whose values are already
    /// known to be strictly positive.
    pub(crate) fn from_eigen(eigen: EigenPair) -> Result<Self> {
        let min = eigen.values.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
        }
        let matrix = eigen.reconstruct();
        Ok(Self { matrix, eigen })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn as_symmetric(&self) -> &SymmetricMatrix {
        &self.matrix
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        self.matrix.as_matrix()
    }

    pub fn eigen(&self) -> &EigenPair {
        &self.eigen
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen.values.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        self.matrix.to_dense()
    }

    pub fn into_symmetric(self) -> SymmetricMatrix {
        self.matrix
    }

    /// `log det`, as the sum of log eigenvalues.
    pub fn logdet(&self) -> f64 {
        self.eigen.values.iter().map(|v| v.ln()).sum()
    }

    pub(crate) fn inverse_raw(&self) -> DMatrix<f64> {
        self.eigen.reconstruct_with(|v| 1.0 / v).0
    }
}

/// Elementwise `max(|m| − t, 0)·sign(m)`.
pub fn soft_threshold(m: &DenseMatrix, t: f64) -> Result<DenseMatrix> {
    if !(t >= 0.0) {
        return Err(invalid(format!("soft-threshold level must be nonnegative, got {t}")));
    }
    Ok(DenseMatrix(m.0.map(|x| soft(x, t))))
}

#[inline]
pub(crate) fn soft(x: f64, t: f64) -> f64 {
    let mag = x.abs() - t;
    if mag > 0.0 {
        mag.copysign(x)
    } else {
        0.0
    }
}

/// Sample covariance `n⁻¹ Σ xᵢxᵢᵀ` of the rows of `x`, optionally after
/// subtracting column means. The divisor is always `n`.
pub fn sample_covariance(x: &DenseMatrix, center: bool) -> Result<SymmetricMatrix> {
    let n = x.rows();
    if n == 0 {
        return Err(invalid("sample covariance needs at least one observation"));
    }
    if center {
        return sample_covariance(&center_columns(x), false);
    }
    let xm = x.as_matrix();
    let gram = xm.transpose() * xm;
    Ok(SymmetricMatrix::symmetrize(&(gram / n as f64)))
}

/// Subtracts each column's mean.
pub fn center_columns(x: &DenseMatrix) -> DenseMatrix {
    let mut m = x.0.clone();
    let n = m.nrows() as f64;
    for mut col in m.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    DenseMatrix(m)
}

/// Returns `(M⁻¹, log det M)` computed from the eigendecomposition.
pub fn spd_inverse_and_logdet(m: &SpdMatrix) -> Result<(SpdMatrix, f64)> {
    let min = m.min_eigenvalue();
    if !(min > PD_TOLERANCE) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    let inv = SpdMatrix::new(SymmetricMatrix(m.inverse_raw()))?;
    Ok((inv, m.logdet()))
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration on a fixed pseudo-random start vector. Falls back to a full
/// eigendecomposition if the iteration stalls.
pub fn largest_eigenvalue(m: &DMatrix<f64>, tol: f64, max_iters: usize) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    // Weyl sequence start; never orthogonal to a dominant eigenvector in practice.
    let mut v = nalgebra::DVector::from_fn(n, |i, _| 0.5 + ((i as f64 + 1.0) * 0.618_033_988_749_895).fract());
    v.normalize_mut();
    let mut estimate = 0.0;
    for _ in 0..max_iters {
        let w = m * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - estimate).abs() <= tol * next.abs().max(1.0) {
            // the Rayleigh quotient of the updated vector is at least as tight
            return v.dot(&(m * &v)).max(next);
        }
        estimate = next;
    }
    sym_eigen_raw(m).values.first().copied().unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn rel_recon_error(m: &SymmetricMatrix) -> f64 {
        let e = sym_eigen(m).unwrap();
        (e.reconstruct().as_matrix() - m.as_matrix()).norm() / m.frobenius_norm()
    }

    #[test]
    fn soft_threshold_examples() {
        let m = DenseMatrix::from_rows(&[vec![2.0]]).unwrap();
        assert_eq!(soft_threshold(&m, 0.5).unwrap().get(0, 0), 1.5);
        let m = DenseMatrix::from_rows(&[vec![-0.3, 0.0]]).unwrap();
        let s = soft_threshold(&m, 0.5).unwrap();
        assert_eq!(s.to_row_major(), vec![0.0, 0.0]);
        let m = DenseMatrix::from_rows(&[vec![-1.25, 3.0], vec![0.0, 7.5]]).unwrap();
        assert_eq!(soft_threshold(&m, 0.0).unwrap(), m);
        assert!(matches!(soft_threshold(&m, -0.1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn eigen_identity_and_diagonal() {
        let e = sym_eigen(&SymmetricMatrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        let e = sym_eigen(&SymmetricMatrix::from_diagonal(&[1.0, 3.0]).unwrap()).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        // axis-aligned, sign-normalized
        assert_abs_diff_eq!(e.vectors.get(1, 0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.vectors.get(0, 1), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn eigen_two_by_two() {
        // characteristic polynomial (2 − x)² − 1 = 0 → x ∈ {3, 1}
        let m = SymmetricMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = sym_eigen(&m).unwrap();
        assert_abs_diff_eq!(e.values[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(e.vectors.get(0, 0), h, epsilon = 1e-14);
        assert_abs_diff_eq!(e.vectors.get(1, 0), h, epsilon = 1e-14);
        assert_abs_diff_eq!(e.vectors.get(0, 1), h, epsilon = 1e-14);
        assert_abs_diff_eq!(e.vectors.get(1, 1), -h, epsilon = 1e-14);
    }

    #[test]
    fn eigen_rejects_non_finite() {
        let mut raw = DMatrix::identity(2, 2);
        raw[(0, 1)] = f64::NAN;
        assert!(SymmetricMatrix::from_nalgebra(raw).is_err());
    }

    #[test]
    fn covariance_examples() {
        let x = DenseMatrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        assert_eq!(sample_covariance(&x, false).unwrap().get(0, 0), 1.0);
        let x = DenseMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(sample_covariance(&x, true).unwrap().get(0, 0), 0.0);
        let x = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]])
            .unwrap();
        let s = sample_covariance(&x, false).unwrap();
        assert_eq!(s.to_row_major(), vec![0.5, 0.0, 0.0, 0.5]);
        let empty = DenseMatrix::zeros(0, 3);
        assert!(sample_covariance(&empty, false).is_err());
    }

    #[test]
    fn inverse_and_logdet_examples() {
        let (inv, ld) = spd_inverse_and_logdet(&SpdMatrix::identity(4)).unwrap();
        assert_abs_diff_eq!((inv.as_matrix() - DMatrix::identity(4, 4)).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ld, 0.0, epsilon = 1e-15);

        let d = SpdMatrix::new(SymmetricMatrix::from_diagonal(&[2.0, 2.0]).unwrap()).unwrap();
        let (inv, ld) = spd_inverse_and_logdet(&d).unwrap();
        assert_abs_diff_eq!(inv.get(0, 0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(inv.get(1, 1), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ld, 2.0 * 2f64.ln(), epsilon = 1e-12);

        let m = SymmetricMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let (inv, ld) = spd_inverse_and_logdet(&SpdMatrix::new(m.clone()).unwrap()).unwrap();
        assert_abs_diff_eq!(ld, 3f64.ln(), epsilon = 1e-12);
        let prod = m.as_matrix() * inv.as_matrix();
        assert!((prod - DMatrix::identity(2, 2)).norm() < 1e-8);
    }

    #[test]
    fn spd_rejects_singular() {
        let m = SymmetricMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(SpdMatrix::new(m), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn power_iteration_matches_closed_form() {
        // eigenvalues of [[1,1],[1,2]] are (3 ± √5)/2
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0]);
        let top = largest_eigenvalue(&m, 1e-10, 1000);
        assert_abs_diff_eq!(top, (3.0 + 5f64.sqrt()) / 2.0, epsilon = 1e-8);
    }

    #[test]
    fn row_major_round_trip() {
        let m = DenseMatrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m.get(0, 2), 3.0);
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.to_row_major(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(DenseMatrix::new(2, 2, vec![1.0]).is_err());
    }

    fn symmetric_strategy(max_dim: usize) -> impl Strategy<Value = SymmetricMatrix> {
        (1..=max_dim).prop_flat_map(|n| {
            proptest::collection::vec(-10.0f64..10.0, n * n)
                .prop_map(move |v| SymmetricMatrix::new(n, v).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn soft_threshold_is_contraction(x in -5.0f64..5.0, y in -5.0f64..5.0, t in 0.0f64..3.0) {
            prop_assert!((soft(x, t) - soft(y, t)).abs() <= (x - y).abs() + 1e-15);
        }

        #[test]
        fn eigen_round_trip(m in symmetric_strategy(100)) {
            prop_assume!(m.frobenius_norm() > 0.0);
            prop_assert!(rel_recon_error(&m) <= 1e-10);
            let e = sym_eigen(&m).unwrap();
            let u = e.vectors.as_matrix();
            let n = m.dim();
            prop_assert!((u.transpose() * u - DMatrix::identity(n, n)).norm() <= 1e-10);
            prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn centering_matches_explicit(rows in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 3), 1..12)) {
            let x = DenseMatrix::from_rows(&rows).unwrap();
            let a = sample_covariance(&x, true).unwrap();
            let b = sample_covariance(&center_columns(&x), false).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn logdet_is_sum_of_log_eigenvalues(rows in proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 4), 8..16)) {
            let x = DenseMatrix::from_rows(&rows).unwrap();
            let s = sample_covariance(&x, false).unwrap();
            let shifted = SymmetricMatrix::from_nalgebra(s.as_matrix() + DMatrix::identity(4, 4) * 0.1).unwrap();
            let spd = SpdMatrix::new(shifted.clone()).unwrap();
            let (_, ld) = spd_inverse_and_logdet(&spd).unwrap();
            let direct: f64 = sym_eigen(&shifted).unwrap().values.iter().map(|v| v.ln()).sum();
            prop_assert!((ld - direct).abs() <= 1e-10);
            // and agrees with the LU determinant
            prop_assert!((ld - shifted.as_matrix().determinant().ln()).abs() <= 1e-9);
        }
    }
}
