//! Penalty selection on a validation set or by K-fold cross-validation.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{invalid, Error, Result};
use crate::io::fmt_f64;
use crate::lda::{LabeledData, LdaModel};
use crate::matrix::DenseMatrix;
use crate::solver::{ProblemSpec, SolverState};

/// Strictly decreasing, nonnegative penalty levels.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaGrid(Vec<f64>);

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("empty penalty grid"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid("penalty levels must be finite and nonnegative"));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("penalty grid must be strictly decreasing"));
        }
        Ok(Self(values))
    }

    /// `len` log-spaced levels from `λ_max` down to `λ_max · ratio`.
    pub fn log_spaced(lambda_max: f64, ratio: f64, len: usize) -> Result<Self> {
        if !(lambda_max > 0.0 && lambda_max.is_finite()) || !(ratio > 0.0 && ratio < 1.0) {
            return Err(invalid("log-spaced grid needs λ_max > 0 and 0 < ratio < 1"));
        }
        if len == 0 {
            return Err(invalid("empty penalty grid"));
        }
        if len == 1 {
            return Self::new(vec![lambda_max]);
        }
        let step = ratio.ln() / (len - 1) as f64;
        Self::new((0..len).map(|i| lambda_max * (step * i as f64).exp()).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Ratio between the smallest and largest level of [`default_grid`].
pub const DEFAULT_GRID_RATIO: f64 = 1e-4;

/// Log-spaced grid from `λ_max = max|AΩ₀B − C|`, with `Ω₀` the solver's
/// diagonal starting point, down to `λ_max · 10⁻⁴`.
pub fn default_grid(prob: &ProblemSpec, len: usize) -> Result<LambdaGrid> {
    let start = SolverState::initial(prob)?;
    let d = prob.sandwich(start.omega.as_matrix()) - prob.c().as_matrix();
    let lambda_max = d.amax();
    LambdaGrid::log_spaced(if lambda_max > 0.0 { lambda_max } else { 1.0 }, DEFAULT_GRID_RATIO, len)
}

/// Iteration count and convergence flag of a fitted model.
pub trait FitDiagnostics {
    fn iterations(&self) -> usize;
    fn converged(&self) -> bool;
}

impl FitDiagnostics for LdaModel {
    fn iterations(&self) -> usize {
        self.solution.as_ref().map_or(0, |s| s.iters_used)
    }
    fn converged(&self) -> bool {
        self.solution.as_ref().is_none_or(|s| s.converged)
    }
}

impl FitDiagnostics for crate::solver::Solution {
    fn iterations(&self) -> usize {
        self.iters_used
    }
    fn converged(&self) -> bool {
        self.converged
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    pub lambda: f64,
    /// `NaN` when the fit failed.
    pub metric: f64,
    pub iters: usize,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Selection<M> {
    pub lambda: f64,
    pub model: M,
    pub table: Vec<SelectionRow>,
}

/// Index of the smallest finite metric, earliest on ties.
fn first_min(metrics: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, m) in metrics.enumerate() {
        if m.is_finite() && best.is_none_or(|(_, b)| m < b) {
            best = Some((i, m));
        }
    }
    best.map(|(i, _)| i)
}

/// Fits along the grid from the largest penalty down, handing each fit the
/// previous successful model for warm starting, and keeps the level with the
/// smallest validation metric. Ties go to the larger penalty. Failed fits
/// are recorded in the table and skipped.
pub fn validation_select<M, F, G>(grid: &LambdaGrid, mut fit: F, metric: G) -> Result<Selection<M>>
where
    M: FitDiagnostics + Clone,
    F: FnMut(f64, Option<&M>) -> Result<M>,
    G: Fn(&M) -> Result<f64>,
{
    let mut table = Vec::with_capacity(grid.len());
    let mut models: Vec<Option<M>> = Vec::with_capacity(grid.len());
    let mut last: Option<M> = None;
    let mut failures = Vec::new();
    for &lambda in grid.values() {
        match fit(lambda, last.as_ref()).and_then(|m| metric(&m).map(|v| (m, v))) {
            Ok((m, v)) => {
                table.push(SelectionRow { lambda, metric: v, iters: m.iterations(), converged: m.converged(), error: None });
                last = Some(m.clone());
                models.push(Some(m));
            }
            Err(e) => {
                failures.push(format!("λ = {lambda}: {e}"));
                table.push(SelectionRow { lambda, metric: f64::NAN, iters: 0, converged: false, error: Some(e.to_string()) });
                models.push(None);
            }
        }
    }
    let best = first_min(table.iter().map(|r| r.metric)).ok_or(Error::AllFitsFailed(failures))?;
    let model = models[best].take().expect("finite metric implies a fitted model");
    Ok(Selection { lambda: table[best].lambda, model, table })
}

/// Generic grid search over arbitrary parameters; the earliest candidate
/// wins ties.
pub fn grid_select<P: Clone, M, F>(candidates: &[P], mut evaluate: F) -> Result<(P, M, f64)>
where
    F: FnMut(&P) -> Result<(M, f64)>,
{
    let mut best: Option<(usize, M, f64)> = None;
    let mut failures = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        match evaluate(c) {
            Ok((m, v)) if v.is_finite() => {
                if best.as_ref().is_none_or(|(_, _, b)| v < *b) {
                    best = Some((i, m, v));
                }
            }
            Ok(_) => failures.push(format!("candidate {i}: non-finite metric")),
            Err(e) => failures.push(format!("candidate {i}: {e}")),
        }
    }
    let (i, m, v) = best.ok_or(Error::AllFitsFailed(failures))?;
    Ok((candidates[i].clone(), m, v))
}

/// The shrinkage grid for the Ledoit-Wolf style baseline: 10 log-spaced
/// weights in [0.01, 0.99] crossed with six target scales.
pub fn ledoit_wolf_grid() -> Vec<(f64, f64)> {
    let (lo, hi) = (0.01f64.ln(), 0.99f64.ln());
    let alphas = (0..10).map(|i| (lo + (hi - lo) * i as f64 / 9.0).exp());
    let gammas = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0];
    alphas.flat_map(|a| gammas.iter().map(move |&g| (a, g))).collect()
}

/// Misclassification rate of `model` on raw features and labels.
pub fn lda_error_rate(model: &LdaModel, x: &DenseMatrix, y: &[usize]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::UndefinedRate("misclassification rate of an empty set"));
    }
    let pred = model.predict_batch(x)?;
    Ok(pred.iter().zip(y).filter(|(a, b)| a != b).count() as f64 / y.len() as f64)
}

/// Fold index for every observation.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldAssignment {
    pub folds: Vec<usize>,
    pub k: usize,
    /// False when some class has fewer than `k` members and the assignment
    /// fell back to a plain shuffled split.
    pub stratified: bool,
}

/// Stratified assignment: each class is shuffled and dealt round-robin, the
/// deal continuing across classes so fold sizes differ by at most one.
pub fn fold_assignment(data: &LabeledData, k: usize, seed: u64) -> Result<FoldAssignment> {
    let n = data.n();
    if k < 2 || k > n {
        return Err(invalid(format!("need 2 ≤ folds ≤ n = {n}, got {k}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut folds = vec![0; n];
    let stratified = data.class_counts().iter().all(|&c| c >= k);
    if stratified {
        let mut next = 0;
        for class in 1..=data.classes() {
            let mut members: Vec<usize> = (0..n).filter(|&i| data.y()[i] == class).collect();
            members.shuffle(&mut rng);
            for i in members {
                folds[i] = next % k;
                next += 1;
            }
        }
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for (pos, i) in order.into_iter().enumerate() {
            folds[i] = pos % k;
        }
    }
    Ok(FoldAssignment { folds, k, stratified })
}

#[derive(Debug, Clone)]
pub struct CrossValidation {
    pub lambda: f64,
    /// One row per level; `metric` is the mean over folds, `iters` the
    /// total, `converged` whether every fold converged.
    pub table: Vec<SelectionRow>,
    pub assignment: FoldAssignment,
}

/// K-fold cross-validation. `fit(train, λ, warm)` is run along the grid on
/// each fold's complement; `metric(model, x, y)` scores the held-out fold.
/// A level where any fold fails is excluded. Ties go to the larger penalty.
pub fn kfold_select<M, F, G>(data: &LabeledData, k: usize, seed: u64, grid: &LambdaGrid, mut fit: F, metric: G) -> Result<CrossValidation>
where
    M: FitDiagnostics,
    F: FnMut(&LabeledData, f64, Option<&M>) -> Result<M>,
    G: Fn(&M, &DenseMatrix, &[usize]) -> Result<f64>,
{
    let assignment = fold_assignment(data, k, seed)?;
    let levels = grid.len();
    let mut sums = vec![0.0; levels];
    let mut iters = vec![0; levels];
    let mut converged = vec![true; levels];
    let mut errors: Vec<Option<String>> = vec![None; levels];
    for fold in 0..k {
        let train_idx: Vec<usize> = (0..data.n()).filter(|&i| assignment.folds[i] != fold).collect();
        let test_idx: Vec<usize> = (0..data.n()).filter(|&i| assignment.folds[i] == fold).collect();
        let (tx, ty) = data.rows(&test_idx);
        let train = match data.subset(&train_idx) {
            Ok(t) => t,
            Err(e) => {
                for slot in errors.iter_mut() {
                    slot.get_or_insert_with(|| format!("fold {fold}: {e}"));
                }
                continue;
            }
        };
        let mut last: Option<M> = None;
        for (l, &lambda) in grid.values().iter().enumerate() {
            match fit(&train, lambda, last.as_ref()).and_then(|m| metric(&m, &tx, &ty).map(|v| (m, v))) {
                Ok((m, v)) => {
                    sums[l] += v;
                    iters[l] += m.iterations();
                    converged[l] &= m.converged();
                    last = Some(m);
                }
                Err(e) => {
                    errors[l].get_or_insert_with(|| format!("fold {fold}: {e}"));
                }
            }
        }
    }
    let table: Vec<SelectionRow> = grid
        .values()
        .iter()
        .enumerate()
        .map(|(l, &lambda)| SelectionRow {
            lambda,
            metric: if errors[l].is_some() { f64::NAN } else { sums[l] / k as f64 },
            iters: iters[l],
            converged: converged[l] && errors[l].is_none(),
            error: errors[l].clone(),
        })
        .collect();
    let best = first_min(table.iter().map(|r| r.metric))
        .ok_or_else(|| Error::AllFitsFailed(table.iter().filter_map(|r| r.error.clone()).collect()))?;
    Ok(CrossValidation { lambda: table[best].lambda, table, assignment })
}

/// Writes `lambda,metric,iters,converged`.
pub fn write_selection_table<W: Write>(mut w: W, rows: &[SelectionRow]) -> Result<()> {
    writeln!(w, "lambda,metric,iters,converged")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", fmt_f64(r.lambda), fmt_f64(r.metric), r.iters, r.converged)?;
    }
    Ok(())
}
