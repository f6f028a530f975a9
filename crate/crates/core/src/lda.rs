//! Linear discriminant analysis with a precision matrix fitted by shrinking
//! the pairwise characteristics `Ω(x̄_j − x̄_k)`.
//!
//! Class labels are `1..=J` throughout; variable indices are 0-based.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, shape, Error, Result};
use crate::estimators::{class_pairs, lda_characteristic_problem, pair_column};
use crate::io::fmt_f64;
use crate::matrix::{DenseMatrix, SpdMatrix, SymmetricMatrix};
use crate::solver::{solve, Solution, SolverConfig, SolverState};

/// Entries of `Ω̄(x̄_j − x̄_k)` at or below this magnitude count as zero for
/// estimators that are never exactly sparse.
pub const DENSE_SUPPORT_THRESHOLD: f64 = 1e-8;

/// Feature rows with class labels in `1..=classes`, every class present.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    x: DenseMatrix,
    y: Vec<usize>,
    classes: usize,
}

impl LabeledData {
    pub fn new(x: DenseMatrix, y: Vec<usize>, classes: usize) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(shape(format!("{} feature rows but {} labels", x.rows(), y.len())));
        }
        if let Some(bad) = y.iter().find(|&&l| l == 0 || l > classes) {
            return Err(invalid(format!("label {bad} outside 1..={classes}")));
        }
        let counts = count_labels(&y, classes);
        if let Some(missing) = counts.iter().position(|&c| c == 0) {
            return Err(invalid(format!("class {} has no observations", missing + 1)));
        }
        Ok(Self { x, y, classes })
    }

    /// Uses the largest label as the class count.
    pub fn from_labels(x: DenseMatrix, y: Vec<usize>) -> Result<Self> {
        let classes = y.iter().copied().max().unwrap_or(0);
        Self::new(x, y, classes)
    }

    pub fn x(&self) -> &DenseMatrix {
        &self.x
    }
    pub fn y(&self) -> &[usize] {
        &self.y
    }
    pub fn classes(&self) -> usize {
        self.classes
    }
    pub fn n(&self) -> usize {
        self.y.len()
    }
    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        count_labels(&self.y, self.classes)
    }

    /// Rows at `indices`, keeping the class count.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let (x, y) = self.rows(indices);
        Self::new(x, y, self.classes)
    }

    /// Rows at `indices` without the every-class-present requirement.
    pub fn rows(&self, indices: &[usize]) -> (DenseMatrix, Vec<usize>) {
        let xm = self.x.as_matrix();
        let x = DMatrix::from_fn(indices.len(), self.p(), |r, c| xm[(indices[r], c)]);
        (DenseMatrix::wrap(x), indices.iter().map(|&i| self.y[i]).collect())
    }

    /// Only the columns in `cols`, in that order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(bad) = cols.iter().find(|&&c| c >= self.p()) {
            return Err(invalid(format!("column {bad} out of range for p = {}", self.p())));
        }
        let xm = self.x.as_matrix();
        let x = DMatrix::from_fn(self.n(), cols.len(), |r, c| xm[(r, cols[c])]);
        Ok(Self { x: DenseMatrix::wrap(x), y: self.y.clone(), classes: self.classes })
    }

    /// Per-class sample means.
    pub fn class_means(&self) -> Vec<Vec<f64>> {
        let p = self.p();
        let counts = self.class_counts();
        let mut sums = vec![vec![0.0; p]; self.classes];
        let xm = self.x.as_matrix();
        for (i, &label) in self.y.iter().enumerate() {
            for (c, s) in sums[label - 1].iter_mut().enumerate() {
                *s += xm[(i, c)];
            }
        }
        sums.into_iter()
            .zip(counts)
            .map(|(s, n)| s.into_iter().map(|v| v / n as f64).collect())
            .collect()
    }

    /// `n⁻¹ Σ_j Σ_{i∈j} (xᵢ − x̄_j)(xᵢ − x̄_j)ᵀ`.
    pub fn pooled_covariance(&self) -> Result<SymmetricMatrix> {
        let means = self.class_means();
        let xm = self.x.as_matrix();
        let centered = DMatrix::from_fn(self.n(), self.p(), |i, c| xm[(i, c)] - means[self.y[i] - 1][c]);
        crate::matrix::sample_covariance(&DenseMatrix::wrap(centered), false)
    }

    /// Reads CSV with features in the leading columns and an integer label in
    /// the last column.
    pub fn read_csv<R: Read>(reader: R, has_header: bool) -> Result<Self> {
        let raw = crate::io::read_matrix(reader, has_header)?;
        if raw.cols() < 2 {
            return Err(Error::Parse("labeled data needs at least one feature column and a label column".into()));
        }
        let p = raw.cols() - 1;
        let mut y = Vec::with_capacity(raw.rows());
        for i in 0..raw.rows() {
            let v = raw.get(i, p);
            if v.fract() != 0.0 || v < 1.0 {
                return Err(Error::Parse(format!("row {}: label {v} is not a positive integer", i + 1)));
            }
            y.push(v as usize);
        }
        let x = DMatrix::from_fn(raw.rows(), p, |i, c| raw.get(i, c));
        Self::from_labels(DenseMatrix::wrap(x), y)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for i in 0..self.n() {
            let mut fields: Vec<String> = (0..self.p()).map(|c| fmt_f64(self.x.get(i, c))).collect();
            fields.push(self.y[i].to_string());
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

fn count_labels(y: &[usize], classes: usize) -> Vec<usize> {
    let mut counts = vec![0; classes];
    for &l in y {
        if (1..=classes).contains(&l) {
            counts[l - 1] += 1;
        }
    }
    counts
}

/// Fitted discriminant model.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub means: Vec<Vec<f64>>,
    pub priors: Vec<f64>,
    pub omega_hat: SpdMatrix,
    /// Variable indices informative for each class pair, in
    /// [`class_pairs`] order.
    pub pair_supports: Vec<Vec<usize>>,
    /// Present when Ω̂ came from the characteristic-shrinking solver.
    pub solution: Option<Solution>,
}

impl LdaModel {
    /// Model around an arbitrary precision estimate. Supports are read off
    /// `Ω̄(x̄_j − x̄_k)` with [`DENSE_SUPPORT_THRESHOLD`].
    pub fn from_parts(means: Vec<Vec<f64>>, priors: Vec<f64>, omega_hat: SpdMatrix) -> Result<Self> {
        let classes = means.len();
        if priors.len() != classes {
            return Err(shape(format!("{} priors for {classes} classes", priors.len())));
        }
        if priors.iter().any(|&p| !(p > 0.0 && p <= 1.0)) || (priors.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(invalid("priors must lie in (0, 1] and sum to one"));
        }
        let p = omega_hat.dim();
        if let Some(bad) = means.iter().position(|m| m.len() != p) {
            return Err(shape(format!("mean {} has length {}, Ω̂ is {p}x{p}", bad + 1, means[bad].len())));
        }
        let pair_supports = class_pairs(classes)
            .into_iter()
            .map(|(j, k)| {
                let d = DVector::from_fn(p, |i, _| means[j][i] - means[k][i]);
                let v = omega_hat.as_matrix() * d;
                (0..p).filter(|&i| v[i].abs() > DENSE_SUPPORT_THRESHOLD).collect()
            })
            .collect();
        Ok(Self { means, priors, omega_hat, pair_supports, solution: None })
    }

    pub fn classes(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.omega_hat.dim()
    }

    /// Discriminant scores `δ_j(x) = xᵀΩ̂x̄_j − ½x̄_jᵀΩ̂x̄_j + log π̂_j`.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let scorer = Scorer::new(self);
        scorer.scores(x)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim() {
            return Err(shape(format!("observation has length {}, model has p = {}", x.len(), self.dim())));
        }
        Ok(argmax_label(&self.scores(x)))
    }

    /// Predicted labels for every row of `x`.
    pub fn predict_batch(&self, x: &DenseMatrix) -> Result<Vec<usize>> {
        if x.cols() != self.dim() {
            return Err(shape(format!("data has {} columns, model has p = {}", x.cols(), self.dim())));
        }
        let scorer = Scorer::new(self);
        let xm = x.as_matrix();
        // rows × classes score matrix in one product
        let lin = xm * &scorer.directions;
        Ok((0..x.rows())
            .map(|i| {
                let s: Vec<f64> = (0..self.classes()).map(|j| lin[(i, j)] + scorer.offsets[j]).collect();
                argmax_label(&s)
            })
            .collect())
    }
}

struct Scorer {
    /// Columns are Ω̂x̄_j.
    directions: DMatrix<f64>,
    /// `−½x̄_jᵀΩ̂x̄_j + log π̂_j`.
    offsets: Vec<f64>,
}

impl Scorer {
    fn new(model: &LdaModel) -> Self {
        let p = model.dim();
        let classes = model.classes();
        let means = DMatrix::from_fn(p, classes, |i, j| model.means[j][i]);
        let directions = model.omega_hat.as_matrix() * &means;
        let offsets = (0..classes)
            .map(|j| -0.5 * means.column(j).dot(&directions.column(j)) + model.priors[j].ln())
            .collect();
        Self { directions, offsets }
    }

    fn scores(&self, x: &[f64]) -> Vec<f64> {
        let xv = DVector::from_column_slice(x);
        (0..self.offsets.len()).map(|j| xv.dot(&self.directions.column(j)) + self.offsets[j]).collect()
    }
}

/// 1-based label of the largest score; the smallest label wins ties.
fn argmax_label(scores: &[f64]) -> usize {
    let mut best = 0;
    for (j, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = j;
        }
    }
    best + 1
}

/// Fits means, class-frequency priors, and Ω̂ from the characteristic-shrinking
/// estimator with `B` the matrix of pairwise mean differences.
pub fn fit(data: &LabeledData, lambda: f64, cfg: &SolverConfig) -> Result<LdaModel> {
    fit_warm(data, lambda, cfg, None)
}

pub fn fit_warm(data: &LabeledData, lambda: f64, cfg: &SolverConfig, init: Option<SolverState>) -> Result<LdaModel> {
    if data.classes() < 2 {
        return Err(invalid("discriminant analysis needs at least two classes"));
    }
    let means = data.class_means();
    let n = data.n() as f64;
    let priors = data.class_counts().iter().map(|&c| c as f64 / n).collect();
    let s = data.pooled_covariance()?;
    let prob = lda_characteristic_problem(s, &means, lambda)?;
    let sol = solve(&prob, cfg, init)?;
    let theta = sol.theta_hat.as_matrix();
    let pair_supports = (0..theta.ncols())
        .map(|col| (0..theta.nrows()).filter(|&i| theta[(i, col)] != 0.0).collect())
        .collect();
    Ok(LdaModel { means, priors, omega_hat: sol.omega_hat.clone(), pair_supports, solution: Some(sol) })
}

/// Variables with a nonzero entry in the characteristic for labels `(j, k)`,
/// `1 ≤ j < k ≤ J`.
pub fn selected_variables(model: &LdaModel, j: usize, k: usize) -> Result<Vec<usize>> {
    let classes = model.classes();
    if !(1 <= j && j < k && k <= classes) {
        return Err(invalid(format!("class pair ({j}, {k}) is not valid for J = {classes}")));
    }
    Ok(model.pair_supports[pair_column(j - 1, k - 1, classes)].clone())
}

/// One-way ANOVA F statistic per column. A column with no within-class
/// variation gets `+∞` if its class means differ and `0` otherwise.
pub fn f_statistics(data: &LabeledData) -> Vec<f64> {
    let n = data.n();
    let classes = data.classes();
    let counts = data.class_counts();
    let means = data.class_means();
    let xm = data.x().as_matrix();
    (0..data.p())
        .map(|c| {
            let grand = xm.column(c).sum() / n as f64;
            let between: f64 = (0..classes).map(|j| counts[j] as f64 * (means[j][c] - grand).powi(2)).sum();
            let within: f64 = (0..n).map(|i| (xm[(i, c)] - means[data.y()[i] - 1][c]).powi(2)).sum();
            let between_df = (classes - 1) as f64;
            let within_df = n.saturating_sub(classes) as f64;
            if within == 0.0 || within_df == 0.0 {
                if between > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            } else {
                (between / between_df) / (within / within_df)
            }
        })
        .collect()
}

/// Indices of the `k` columns with the largest F statistics, largest first,
/// ties to the smaller index.
pub fn f_statistic_screen(data: &LabeledData, k: usize) -> Result<Vec<usize>> {
    if k > data.p() {
        return Err(invalid(format!("cannot keep {k} of {} variables", data.p())));
    }
    if data.classes() < 2 {
        return Err(invalid("screening needs at least two classes"));
    }
    let f = f_statistics(data);
    let mut order: Vec<usize> = (0..f.len()).collect();
    order.sort_by(|&a, &b| f[b].total_cmp(&f[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn blobs(seed: u64, n_per: usize, centers: &[Vec<f64>], spread: f64) -> LabeledData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = centers[0].len();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (j, c) in centers.iter().enumerate() {
            for _ in 0..n_per {
                rows.push((0..p).map(|i| c[i] + spread * rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>());
                y.push(j + 1);
            }
        }
        LabeledData::new(DenseMatrix::from_rows(&rows).unwrap(), y, centers.len()).unwrap()
    }

    fn accuracy(model: &LdaModel, data: &LabeledData) -> f64 {
        let pred = model.predict_batch(data.x()).unwrap();
        pred.iter().zip(data.y()).filter(|(a, b)| a == b).count() as f64 / data.n() as f64
    }

    #[test]
    fn labeled_data_validation() {
        let x = DenseMatrix::zeros(3, 2);
        assert!(LabeledData::new(x.clone(), vec![1, 2, 2], 2).is_ok());
        assert!(LabeledData::new(x.clone(), vec![1, 1, 1], 2).is_err());
        assert!(LabeledData::new(x.clone(), vec![0, 1, 2], 2).is_err());
        assert!(LabeledData::new(x, vec![1, 2], 2).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let data = blobs(1, 3, &[vec![0.0, 1.0], vec![2.0, -1.0]], 0.5);
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let back = LabeledData::read_csv(buf.as_slice(), false).unwrap();
        assert_eq!(back, data);
        assert!(LabeledData::read_csv("1.0,2.5\n".as_bytes(), false).is_err());
    }

    #[test]
    fn pooled_covariance_by_hand() {
        // class 1: {0, 2}, class 2: {10, 14}; within deviations ±1, ±2
        let x = DenseMatrix::new(4, 1, vec![0.0, 2.0, 10.0, 14.0]).unwrap();
        let data = LabeledData::new(x, vec![1, 1, 2, 2], 2).unwrap();
        assert_eq!(data.class_means(), vec![vec![1.0], vec![12.0]]);
        assert_eq!(data.pooled_covariance().unwrap().get(0, 0), (1.0 + 1.0 + 4.0 + 4.0) / 4.0);
    }

    #[test]
    fn separated_blobs_are_classified() {
        let data = blobs(7, 40, &[vec![-2.0, 0.0], vec![2.0, 0.5]], 0.7);
        let model = fit(&data, 1e-3, &SolverConfig::default()).unwrap();
        assert!(accuracy(&model, &data) >= 0.95);
        let sum: f64 = model.priors.iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unpenalized_fit_inverts_pooled_covariance() {
        let data = blobs(3, 200, &[vec![0.0, 0.0, 0.0], vec![1.0, 0.0, -1.0], vec![0.0, 2.0, 0.0]], 1.0);
        let cfg = SolverConfig { eps_abs: 1e-11, eps_rel: 1e-11, ..Default::default() };
        let model = fit(&data, 0.0, &cfg).unwrap();
        let inv = data.pooled_covariance().unwrap().as_matrix().clone().try_inverse().unwrap();
        assert!((model.omega_hat.as_matrix() - inv).norm() < 1e-4);
        for support in &model.pair_supports {
            assert_eq!(support.len(), 3);
        }
    }

    #[test]
    fn identical_means_give_empty_supports() {
        // mirror each class so every class mean is exactly zero
        let x = DenseMatrix::new(6, 2, vec![1.0, 2.0, -1.0, -2.0, 0.5, -3.0, -0.5, 3.0, 2.0, 1.0, -2.0, -1.0]).unwrap();
        let data = LabeledData::new(x, vec![1, 1, 2, 2, 3, 3], 3).unwrap();
        let model = fit(&data, 0.5, &SolverConfig::default()).unwrap();
        assert!(model.pair_supports.iter().all(Vec::is_empty));
    }

    #[test]
    fn huge_lambda_shrinks_but_cannot_empty_supports() {
        let data = blobs(9, 30, &[vec![0.0, 0.0, 0.0, 0.0], vec![1.0, 0.5, 0.0, 0.0], vec![0.0, 0.0, 1.0, -1.0]], 1.0);
        let cfg = SolverConfig { adaptive_rho: true, max_iters: 100_000, ..Default::default() };
        let small = fit(&data, 0.0, &cfg).unwrap();
        let big = fit(&data, 100.0, &cfg).unwrap();
        assert!(big.solution.as_ref().unwrap().converged);
        let total = |m: &LdaModel| m.pair_supports.iter().map(Vec::len).sum::<usize>();
        assert_eq!(total(&small), 12);
        assert!(total(&big) < total(&small));
        // Ω̂ is nonsingular, so Ω̂(x̄_j − x̄_k) keeps at least one nonzero entry
        for pair in [(1, 2), (1, 3), (2, 3)] {
            assert!(!selected_variables(&big, pair.0, pair.1).unwrap().is_empty());
        }
        assert!(selected_variables(&big, 2, 2).is_err());
        assert!(selected_variables(&big, 0, 1).is_err());
    }

    #[test]
    fn supports_match_theta_zero_pattern() {
        let data = blobs(4, 25, &[vec![0.0; 5], vec![1.0, 0.0, 0.0, 0.5, 0.0], vec![0.0, -1.0, 0.0, 0.0, 0.0]], 1.0);
        let model = fit(&data, 0.05, &SolverConfig { adaptive_rho: true, ..Default::default() }).unwrap();
        let theta = &model.solution.as_ref().unwrap().theta_hat;
        for (col, support) in model.pair_supports.iter().enumerate() {
            let expected: Vec<usize> = (0..5).filter(|&i| theta.get(i, col) != 0.0).collect();
            assert_eq!(support, &expected);
        }
    }

    #[test]
    fn two_class_fit_matches_manual_problem() {
        let data = blobs(5, 20, &[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.5]], 0.8);
        let cfg = SolverConfig::default();
        let model = fit(&data, 0.1, &cfg).unwrap();
        let means = data.class_means();
        let b = DenseMatrix::new(3, 1, (0..3).map(|i| means[0][i] - means[1][i]).collect()).unwrap();
        let prob = crate::solver::ProblemSpec::new(
            data.pooled_covariance().unwrap(),
            DenseMatrix::identity(3),
            b,
            DenseMatrix::zeros(3, 1),
            0.1,
        )
        .unwrap();
        let manual = solve(&prob, &cfg, None).unwrap();
        assert_eq!(model.omega_hat, manual.omega_hat);
    }

    #[test]
    fn predict_examples() {
        let omega = SpdMatrix::identity(2);
        let model = LdaModel::from_parts(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![0.5, 0.5], omega.clone()).unwrap();
        assert_eq!(model.predict(&[1.0, 0.0]).unwrap(), 1);
        assert_eq!(model.predict(&[0.1, 0.0]).unwrap(), 1);
        assert_eq!(model.predict(&[-0.1, 0.0]).unwrap(), 2);
        // on the boundary the smaller label wins
        assert_eq!(model.predict(&[0.0, 3.0]).unwrap(), 1);

        // δ₁ − δ₂ = 2x + log(0.01/0.99) → boundary at x ≈ 2.2976
        let skewed = LdaModel::from_parts(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![0.01, 0.99], omega).unwrap();
        let boundary = 0.5 * (0.99f64 / 0.01).ln();
        assert_eq!(skewed.predict(&[0.1, 0.0]).unwrap(), 2);
        assert_eq!(skewed.predict(&[boundary - 1e-6, 0.0]).unwrap(), 2);
        assert_eq!(skewed.predict(&[boundary + 1e-6, 0.0]).unwrap(), 1);
        assert!(skewed.predict(&[0.0]).is_err());
    }

    #[test]
    fn uniform_prior_shift_does_not_change_predictions() {
        let data = blobs(12, 15, &[vec![0.0, 0.0], vec![1.0, 1.0], vec![-1.0, 2.0]], 1.0);
        let model = fit(&data, 0.01, &SolverConfig::default()).unwrap();
        let base = model.predict_batch(data.x()).unwrap();
        let mut shifted = model.clone();
        // multiplying every prior by the same factor adds a constant to every score
        shifted.priors.iter_mut().for_each(|p| *p *= 0.25);
        assert_eq!(shifted.predict_batch(data.x()).unwrap(), base);
        let single: Vec<usize> = (0..data.n())
            .map(|i| model.predict(&data.x().as_matrix().row(i).iter().copied().collect::<Vec<_>>()).unwrap())
            .collect();
        assert_eq!(single, base);
    }

    #[test]
    fn f_statistic_examples() {
        // column 0: constant; column 1: equals the label; column 2: noise; column 3: separator with noise
        let rows = vec![
            vec![5.0, 1.0, 0.3, 0.1],
            vec![5.0, 1.0, -0.2, -0.1],
            vec![5.0, 2.0, 0.1, 1.05],
            vec![5.0, 2.0, -0.4, 0.95],
        ];
        let data = LabeledData::new(DenseMatrix::from_rows(&rows).unwrap(), vec![1, 1, 2, 2], 2).unwrap();
        let f = f_statistics(&data);
        assert_eq!(f[0], 0.0);
        assert_eq!(f[1], f64::INFINITY);
        // separator: between SS = 4·0.5² = 1 on 1 df; within SS = 4·0.05²... = 0.03 on 2 df
        let within = 0.1f64.powi(2) * 2.0 + 0.05f64.powi(2) * 2.0;
        let expected = 1.0 / (within / 2.0);
        assert!((f[3] - expected).abs() < 1e-9 * expected);
        assert_eq!(f_statistic_screen(&data, 4).unwrap(), vec![1, 3, 2, 0]);
        assert_eq!(f_statistic_screen(&data, 2).unwrap(), vec![1, 3]);
        assert!(f_statistic_screen(&data, 5).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn screening_is_permutation_equivariant(seed in 0u64..1000, perm_seed in 0u64..1000) {
            let data = blobs(seed, 6, &[vec![0.0; 6], vec![1.0, 0.0, 0.5, 0.0, 2.0, 0.0]], 1.0);
            let mut perm: Vec<usize> = (0..6).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
            for i in (1..6).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let permuted = data.select_columns(&perm).unwrap();
            let base = f_statistic_screen(&data, 6).unwrap();
            let after = f_statistic_screen(&permuted, 6).unwrap();
            let mapped: Vec<usize> = after.iter().map(|&c| perm[c]).collect();
            prop_assert_eq!(mapped, base);
        }
    }
}
