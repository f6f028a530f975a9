//! Problem constructors for each application of the estimator, the
//! Ledoit–Wolf-type ridge baseline, and downstream quantities computed from
//! a fitted precision matrix.
//!
//! Constructors take plug-in estimates (class means, μ̂, Ŝ_XY) as given; they
//! never estimate anything themselves.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};
use crate::matrix::{DenseMatrix, SpdMatrix, SymmetricMatrix};
use crate::solver::ProblemSpec;

/// Which application produced a [`ProblemSpec`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum CharacteristicKind {
    #[default]
    Generic,
    Glasso { penalize_diagonal: bool },
    /// Columns of B are `x̄_j − x̄_k` for `j < k`, in lexicographic order.
    Lda { classes: usize },
    Portfolio,
    Regression { responses: usize },
}

pub fn generic_problem(
    s: SymmetricMatrix,
    a: DenseMatrix,
    b: DenseMatrix,
    c: DenseMatrix,
    lambda: f64,
) -> Result<ProblemSpec> {
    ProblemSpec::new(s, a, b, c, lambda)
}

/// `A = B = I`, `C = 0`. With `penalize_diagonal = false` the diagonal of Θ
/// gets zero penalty weight, giving the off-diagonal graphical lasso.
pub fn glasso_problem(s: SymmetricMatrix, lambda: f64, penalize_diagonal: bool) -> Result<ProblemSpec> {
    let p = s.dim();
    let prob = ProblemSpec::new(s, DenseMatrix::identity(p), DenseMatrix::identity(p), DenseMatrix::zeros(p, p), lambda)?
        .with_kind(CharacteristicKind::Glasso { penalize_diagonal });
    if penalize_diagonal {
        Ok(prob)
    } else {
        let mut w = DMatrix::from_element(p, p, 1.0);
        w.fill_diagonal(0.0);
        prob.with_weights(DenseMatrix::wrap(w))
    }
}

/// Index of the column for class pair `(j, k)`, `0 ≤ j < k < classes`, in the
/// lexicographic ordering `(0,1), (0,2), …, (1,2), …`.
pub fn pair_column(j: usize, k: usize, classes: usize) -> usize {
    debug_assert!(j < k && k < classes);
    j * (2 * classes - j - 1) / 2 + (k - j) - 1
}

/// All class pairs `(j, k)`, `j < k`, in column order.
pub fn class_pairs(classes: usize) -> Vec<(usize, usize)> {
    (0..classes).flat_map(|j| ((j + 1)..classes).map(move |k| (j, k))).collect()
}

/// Matrix whose columns are the pairwise mean differences `x̄_j − x̄_k`.
pub fn mean_difference_matrix(class_means: &[Vec<f64>]) -> Result<DenseMatrix> {
    let classes = class_means.len();
    if classes < 2 {
        return Err(invalid(format!("need at least two classes, got {classes}")));
    }
    let p = class_means[0].len();
    if let Some(bad) = class_means.iter().position(|m| m.len() != p) {
        return Err(shape(format!("mean of class {} has length {}, expected {p}", bad + 1, class_means[bad].len())));
    }
    let pairs = class_pairs(classes);
    let b = DMatrix::from_fn(p, pairs.len(), |i, col| {
        let (j, k) = pairs[col];
        class_means[j][i] - class_means[k][i]
    });
    DenseMatrix::from_nalgebra(b)
}

pub fn lda_characteristic_problem(s_pooled: SymmetricMatrix, class_means: &[Vec<f64>], lambda: f64) -> Result<ProblemSpec> {
    let b = mean_difference_matrix(class_means)?;
    let p = s_pooled.dim();
    if b.rows() != p {
        return Err(shape(format!("class means have length {} but S is {p}x{p}", b.rows())));
    }
    let cols = b.cols();
    Ok(ProblemSpec::new(s_pooled, DenseMatrix::identity(p), b, DenseMatrix::zeros(p, cols), lambda)?
        .with_kind(CharacteristicKind::Lda { classes: class_means.len() }))
}

/// `A = I`, `C = 0`, `B = μ̂` as a single column.
pub fn portfolio_problem(s: SymmetricMatrix, mu_hat: &[f64], lambda: f64) -> Result<ProblemSpec> {
    let p = s.dim();
    if mu_hat.len() != p {
        return Err(shape(format!("μ̂ has length {} but S is {p}x{p}", mu_hat.len())));
    }
    Ok(ProblemSpec::new(s, DenseMatrix::identity(p), DenseMatrix::column_vector(mu_hat)?, DenseMatrix::zeros(p, 1), lambda)?
        .with_kind(CharacteristicKind::Portfolio))
}

/// `A = I`, `C = 0`, `B = Ŝ_XY`.
pub fn regression_problem(s_xx: SymmetricMatrix, s_xy: DenseMatrix, lambda: f64) -> Result<ProblemSpec> {
    let p = s_xx.dim();
    if s_xy.rows() != p {
        return Err(shape(format!("S_XY has {} rows but S_XX is {p}x{p}", s_xy.rows())));
    }
    let q = s_xy.cols();
    Ok(ProblemSpec::new(s_xx, DenseMatrix::identity(p), s_xy, DenseMatrix::zeros(p, q), lambda)?
        .with_kind(CharacteristicKind::Regression { responses: q }))
}

/// Inverse of `αS + γ(1 − α)I`.
pub fn ledoit_wolf_precision(s: &SymmetricMatrix, alpha: f64, gamma: f64) -> Result<SpdMatrix> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(invalid(format!("gamma must be positive, got {gamma}")));
    }
    let p = s.dim();
    let cov = s.as_matrix() * alpha + DMatrix::identity(p, p) * (gamma * (1.0 - alpha));
    let cov = SpdMatrix::new(SymmetricMatrix::from_nalgebra(cov)?)?;
    SpdMatrix::new(SymmetricMatrix::symmetrize(&cov.inverse_raw()))
}

/// `w = Ω̂μ̂ / Σᵢ(Ω̂μ̂)ᵢ` (fully invested). Entries of Ω̂μ̂ that are exactly zero
/// stay exactly zero.
pub fn portfolio_weights(omega_hat: &SymmetricMatrix, mu_hat: &[f64]) -> Result<Vec<f64>> {
    let p = omega_hat.dim();
    if mu_hat.len() != p {
        return Err(shape(format!("μ̂ has length {} but Ω̂ is {p}x{p}", mu_hat.len())));
    }
    let raw: Vec<f64> = (0..p).map(|i| (0..p).map(|j| omega_hat.get(i, j) * mu_hat[j]).sum()).collect();
    let total: f64 = raw.iter().sum();
    if total == 0.0 || !total.is_finite() {
        return Err(Error::DegeneratePortfolio);
    }
    Ok(raw.into_iter().map(|v| v / total).collect())
}

/// `Ω̂ Ŝ_XY`.
pub fn regression_coefficients(omega_hat: &SymmetricMatrix, s_xy: &DenseMatrix) -> Result<DenseMatrix> {
    omega_hat.to_dense().matmul(s_xy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve, SolverConfig};
    use approx::assert_abs_diff_eq;

    fn sym(rows: &[Vec<f64>]) -> SymmetricMatrix {
        SymmetricMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn generic_shape_checks() {
        let i2 = DenseMatrix::identity(2);
        assert!(generic_problem(SymmetricMatrix::identity(2), i2.clone(), i2.clone(), DenseMatrix::zeros(2, 2), 1.0).is_ok());
        let a = DenseMatrix::zeros(3, 2);
        let err = generic_problem(SymmetricMatrix::identity(3), a, DenseMatrix::identity(3), DenseMatrix::zeros(3, 3), 1.0)
            .unwrap_err();
        assert!(err.to_string().contains("A has 2 columns"), "{err}");
        let a = DenseMatrix::zeros(3, 2);
        let b = DenseMatrix::zeros(2, 2);
        let err = generic_problem(SymmetricMatrix::identity(2), a, b, DenseMatrix::zeros(2, 2), 1.0).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
        assert!(generic_problem(SymmetricMatrix::identity(2), i2.clone(), i2, DenseMatrix::zeros(2, 2), -1.0).is_err());
    }

    #[test]
    fn glasso_constructor() {
        let prob = glasso_problem(SymmetricMatrix::identity(3), 0.1, true).unwrap();
        assert_eq!(prob.a(), &DenseMatrix::identity(3));
        assert_eq!(prob.b(), &DenseMatrix::identity(3));
        assert!(prob.weights().is_none());
        let prob = glasso_problem(SymmetricMatrix::identity(3), 0.1, false).unwrap();
        let w = prob.weights().unwrap();
        assert_eq!(w.get(1, 1), 0.0);
        assert_eq!(w.get(0, 1), 1.0);
    }

    #[test]
    fn glasso_large_lambda_zeroes_off_diagonal() {
        let s = sym(&[vec![1.0, 0.9], vec![0.9, 1.0]]);
        for penalize_diagonal in [true, false] {
            let prob = glasso_problem(s.clone(), 5.0, penalize_diagonal).unwrap();
            let sol = solve(&prob, &SolverConfig::default(), None).unwrap();
            assert!(sol.converged);
            assert_eq!(sol.theta_hat.get(0, 1), 0.0);
            assert_eq!(sol.theta_hat.get(1, 0), 0.0);
        }
    }

    #[test]
    fn pair_columns_are_lexicographic() {
        assert_eq!(class_pairs(3), vec![(0, 1), (0, 2), (1, 2)]);
        for classes in 2..8 {
            for (col, (j, k)) in class_pairs(classes).into_iter().enumerate() {
                assert_eq!(pair_column(j, k, classes), col);
            }
        }
    }

    #[test]
    fn lda_constructor() {
        let means = vec![vec![1.0, 2.0], vec![0.0, 1.0], vec![3.0, -1.0]];
        let prob = lda_characteristic_problem(SymmetricMatrix::identity(2), &means[..2], 0.5).unwrap();
        assert_eq!(prob.b().column(0), vec![1.0, 1.0]);
        let prob = lda_characteristic_problem(SymmetricMatrix::identity(2), &means, 0.5).unwrap();
        assert_eq!(prob.b().cols(), 3);
        assert_eq!(prob.b().column(0), vec![1.0, 1.0]);
        assert_eq!(prob.b().column(1), vec![-2.0, 3.0]);
        assert_eq!(prob.b().column(2), vec![-3.0, 2.0]);
        assert_eq!(prob.kind(), &CharacteristicKind::Lda { classes: 3 });
        assert!(lda_characteristic_problem(SymmetricMatrix::identity(2), &means[..1], 0.5).is_err());
    }

    #[test]
    fn identical_means_give_unpenalized_mle() {
        let s = sym(&[vec![2.0, 0.3], vec![0.3, 1.0]]);
        let means = vec![vec![0.5, 0.5]; 3];
        let prob = lda_characteristic_problem(s.clone(), &means, 10.0).unwrap();
        assert_eq!(prob.b().max_abs(), 0.0);
        let sol = solve(&prob, &SolverConfig::default(), None).unwrap();
        let inv = s.as_matrix().clone().try_inverse().unwrap();
        assert!((sol.omega_hat.as_matrix() - inv).norm() < 1e-6);
    }

    #[test]
    fn portfolio_constructor() {
        let prob = portfolio_problem(SymmetricMatrix::identity(2), &[1.0, 0.0], 1.0).unwrap();
        assert_eq!(prob.b().column(0), vec![1.0, 0.0]);
        // penalty is λ(|Ω₁₁| + |Ω₂₁|)
        let omega = SpdMatrix::new(sym(&[vec![2.0, -0.5], vec![-0.5, 3.0]])).unwrap();
        let obj = crate::solver::objective(&prob, &omega).unwrap();
        let expected = 5.0 - omega.logdet() + 2.5;
        assert_abs_diff_eq!(obj, expected, epsilon = 1e-12);
        assert!(portfolio_problem(SymmetricMatrix::identity(2), &[1.0], 1.0).is_err());

        let zero = portfolio_problem(SymmetricMatrix::identity(2), &[0.0, 0.0], 3.0).unwrap();
        assert_eq!(zero.b().max_abs(), 0.0);
    }

    #[test]
    fn portfolio_large_lambda_shrinks_characteristic() {
        // Ω̂μ̂ can never vanish for positive definite Ω̂ and μ̂ ≠ 0; it shrinks
        // toward zero and loses entries as λ grows.
        let s = sym(&[vec![1.0, 0.2], vec![0.2, 0.5]]);
        let mu = [0.3, 0.1];
        let mut last = f64::INFINITY;
        for lambda in [0.0, 1.0, 10.0, 50.0] {
            let prob = portfolio_problem(s.clone(), &mu, lambda).unwrap();
            let sol = solve(&prob, &SolverConfig { adaptive_rho: true, ..Default::default() }, None).unwrap();
            assert!(sol.converged);
            let size = sol.theta_hat.abs_sum();
            assert!(size < last);
            last = size;
            if lambda >= 10.0 {
                assert_eq!(sol.theta_hat.count_nonzero(), 1);
            }
        }
        assert!(last < 0.05);
    }

    #[test]
    fn regression_constructor() {
        let sxy = DenseMatrix::new(2, 1, vec![0.5, -0.2]).unwrap();
        let prob = regression_problem(SymmetricMatrix::identity(2), sxy.clone(), 0.1).unwrap();
        assert_eq!(prob.b(), &sxy);
        assert_eq!(prob.kind(), &CharacteristicKind::Regression { responses: 1 });
        assert!(regression_problem(SymmetricMatrix::identity(3), sxy, 0.1).is_err());
    }

    #[test]
    fn ledoit_wolf_examples() {
        let lw = ledoit_wolf_precision(&SymmetricMatrix::identity(3), 0.3, 2.0).unwrap();
        let c = 0.3 + 2.0 * 0.7;
        assert_abs_diff_eq!(lw.get(0, 0), 1.0 / c, epsilon = 1e-14);
        assert_abs_diff_eq!(lw.get(0, 1), 0.0, epsilon = 1e-14);

        let s = SymmetricMatrix::from_diagonal(&[4.0, 1.0]).unwrap();
        let lw = ledoit_wolf_precision(&s, 0.5, 2.0).unwrap();
        assert_abs_diff_eq!(lw.get(0, 0), 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(lw.get(1, 1), 2.0 / 3.0, epsilon = 1e-14);

        let s = sym(&[vec![2.0, 0.5], vec![0.5, 1.0]]);
        let lw = ledoit_wolf_precision(&s, 0.999, 1.0).unwrap();
        let inv = s.as_matrix().clone().try_inverse().unwrap();
        assert!((lw.as_matrix() - &inv).norm() < 5e-3);

        assert!(ledoit_wolf_precision(&s, 1.0, 1.0).is_err());
        assert!(ledoit_wolf_precision(&s, 0.5, 0.0).is_err());
    }

    #[test]
    fn ledoit_wolf_inverts_its_ridge_matrix() {
        let s = sym(&[vec![2.0, 0.5, 0.1], vec![0.5, 1.0, -0.3], vec![0.1, -0.3, 0.7]]);
        let (alpha, gamma) = (0.4, 1.7);
        let lw = ledoit_wolf_precision(&s, alpha, gamma).unwrap();
        let ridge = s.as_matrix() * alpha + DMatrix::identity(3, 3) * (gamma * (1.0 - alpha));
        assert!((lw.as_matrix() * ridge - DMatrix::identity(3, 3)).norm() < 1e-8);
    }

    #[test]
    fn portfolio_weight_examples() {
        let i2 = SymmetricMatrix::identity(2);
        assert_eq!(portfolio_weights(&i2, &[1.0, 1.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(portfolio_weights(&i2, &[2.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        let w = portfolio_weights(&SymmetricMatrix::from_diagonal(&[1.0, 2.0]).unwrap(), &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(w[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 2.0 / 3.0, epsilon = 1e-15);
        assert!(matches!(portfolio_weights(&i2, &[1.0, -1.0]), Err(Error::DegeneratePortfolio)));
    }

    #[test]
    fn regression_coefficient_examples() {
        let sxy = DenseMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(regression_coefficients(&SymmetricMatrix::identity(2), &sxy).unwrap(), sxy);
        let zero = DenseMatrix::zeros(2, 1);
        assert_eq!(regression_coefficients(&SymmetricMatrix::identity(2), &zero).unwrap(), zero);
        // [[2,1],[1,3]]·[[1,2],[3,4]] = [[5,8],[10,14]]
        let omega = sym(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let beta = regression_coefficients(&omega, &sxy).unwrap();
        assert_eq!(beta.to_row_major(), vec![5.0, 8.0, 10.0, 14.0]);
    }
}
