//! Synthetic discriminant-analysis models, replicated comparison studies and
//! their performance metrics.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};
use crate::estimators::{glasso_problem, ledoit_wolf_precision};
use crate::io::fmt_f64;
use crate::lda::{fit_warm, LabeledData, LdaModel};
use crate::matrix::{DenseMatrix, SpdMatrix, SymmetricMatrix};
use crate::solver::{solve, SolverConfig};
use crate::tuning::{default_grid, grid_select, lda_error_rate, ledoit_wolf_grid, validation_select, FitDiagnostics};

/// Population parameters of a Gaussian mixture with a shared covariance.
#[derive(Debug, Clone)]
pub struct TrueParams {
    /// Σ*.
    pub omega_star_inv: SpdMatrix,
    pub omega_star: SpdMatrix,
    /// β*_j = Ω*μ*_j.
    pub betas: Vec<Vec<f64>>,
    pub mus: Vec<Vec<f64>>,
    pub priors: Vec<f64>,
}

impl TrueParams {
    pub fn dim(&self) -> usize {
        self.omega_star.dim()
    }

    pub fn classes(&self) -> usize {
        self.betas.len()
    }

    /// Δ*_m = β*_1 − β*_m for m = 2..J.
    pub fn true_deltas(&self) -> Vec<Vec<f64>> {
        (1..self.classes())
            .map(|m| self.betas[0].iter().zip(&self.betas[m]).map(|(a, b)| a - b).collect())
            .collect()
    }

    /// The Bayes rule as a discriminant model.
    pub fn bayes_model(&self) -> Result<LdaModel> {
        LdaModel::from_parts(self.mus.clone(), self.priors.clone(), self.omega_star.clone())
    }

    fn assemble(sigma: DMatrix<f64>, omega: DMatrix<f64>, betas: Vec<Vec<f64>>) -> Result<Self> {
        let sigma = SpdMatrix::new(SymmetricMatrix::from_nalgebra(sigma)?)?;
        let omega = SpdMatrix::new(SymmetricMatrix::from_nalgebra(omega)?)?;
        let mus = betas
            .iter()
            .map(|b| (sigma.as_matrix() * nalgebra::DVector::from_column_slice(b)).iter().copied().collect())
            .collect();
        let classes = betas.len();
        Ok(Self { omega_star_inv: sigma, omega_star: omega, betas, mus, priors: vec![1.0 / classes as f64; classes] })
    }
}

fn window_betas(p: usize, classes: usize, width: usize, value: f64) -> Vec<Vec<f64>> {
    (0..classes)
        .map(|j| (0..p).map(|k| if k / width == j { value } else { 0.0 }).collect())
        .collect()
}

/// `r^|a−b|` on an `m × m` block.
fn ar1(m: usize, r: f64) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |a, b| r.powi(a.abs_diff(b) as i32))
}

/// Closed-form tridiagonal inverse of [`ar1`].
fn ar1_inverse(m: usize, r: f64) -> DMatrix<f64> {
    let c = 1.0 / (1.0 - r * r);
    DMatrix::from_fn(m, m, |a, b| {
        if a == b {
            if m == 1 {
                1.0
            } else if a == 0 || a == m - 1 {
                c
            } else {
                c * (1.0 + r * r)
            }
        } else if a.abs_diff(b) == 1 {
            -r * c
        } else {
            0.0
        }
    })
}

/// Unit diagonal, constant off-diagonal `c`, and its closed-form inverse.
fn compound_symmetry(m: usize, c: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let sigma = DMatrix::from_fn(m, m, |a, b| if a == b { 1.0 } else { c });
    let k = c / (1.0 + (m as f64 - 1.0) * c);
    let omega = DMatrix::from_fn(m, m, |a, b| ((a == b) as u8 as f64 - k) / (1.0 - c));
    (sigma, omega)
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(m + n, m + n);
    out.view_mut((0, 0), (m, m)).copy_from(a);
    out.view_mut((m, m), (n, n)).copy_from(b);
    out
}

/// AR(1) covariance with correlation 0.9; class `j` shifts variables
/// `4(j−1)..4j` by 1.5 in the β scale.
pub fn model1_params(p: usize, classes: usize) -> Result<TrueParams> {
    if classes < 2 {
        return Err(invalid("need at least two classes"));
    }
    if p < 4 * classes {
        return Err(invalid(format!("model 1 needs p ≥ 4J = {}, got {p}", 4 * classes)));
    }
    TrueParams::assemble(ar1(p, 0.9), ar1_inverse(p, 0.9), window_betas(p, classes, 4, 1.5))
}

/// Block-diagonal covariance: compound symmetry with correlation 0.5 on the
/// first 5J variables and AR(1) with correlation 0.5 on the rest; class `j`
/// shifts variables `5(j−1)..5j` by 2 in the β scale.
pub fn model2_params(p: usize, classes: usize) -> Result<TrueParams> {
    if classes < 2 {
        return Err(invalid("need at least two classes"));
    }
    let lead = 5 * classes;
    if p < lead {
        return Err(invalid(format!("model 2 needs p ≥ 5J = {lead}, got {p}")));
    }
    let (cs, cs_inv) = compound_symmetry(lead, 0.5);
    let (sigma, omega) = if p > lead {
        (block_diag(&cs, &ar1(p - lead, 0.5)), block_diag(&cs_inv, &ar1_inverse(p - lead, 0.5)))
    } else {
        (cs, cs_inv)
    };
    TrueParams::assemble(sigma, omega, window_betas(p, classes, 5, 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    One,
    Two,
}

impl ModelKind {
    pub fn params(self, p: usize, classes: usize) -> Result<TrueParams> {
        match self {
            ModelKind::One => model1_params(p, classes),
            ModelKind::Two => model2_params(p, classes),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            ModelKind::One => 1,
            ModelKind::Two => 2,
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(ModelKind::One),
            "2" => Ok(ModelKind::Two),
            _ => Err(invalid(format!("unknown model {s:?}; expected 1 or 2"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn new(train: usize, validation: usize, test: usize) -> Result<Self> {
        if train == 0 || validation == 0 || test == 0 {
            return Err(invalid("split sizes must be positive"));
        }
        Ok(Self { train, validation, test })
    }

    /// 25J training, 200 validation and 1000 test observations.
    pub fn standard(classes: usize) -> Self {
        Self { train: 25 * classes, validation: 200, test: 1000 }
    }

    pub fn total(&self) -> usize {
        self.train + self.validation + self.test
    }
}

/// Draws `sizes.total()` labeled observations and splits them in order into
/// training, validation and test sets.
pub fn generate_dataset(params: &TrueParams, sizes: SplitSizes, seed: u64) -> Result<(LabeledData, LabeledData, LabeledData)> {
    let (x, y) = sample_mixture(params, sizes.total(), seed)?;
    let p = params.dim();
    let classes = params.classes();
    let take = |from: usize, len: usize| -> Result<LabeledData> {
        let xs = DMatrix::from_fn(len, p, |i, c| x[(from + i, c)]);
        LabeledData::new(DenseMatrix::from_nalgebra(xs)?, y[from..from + len].to_vec(), classes)
    };
    Ok((take(0, sizes.train)?, take(sizes.train, sizes.validation)?, take(sizes.train + sizes.validation, sizes.test)?))
}

/// `n` draws of `(X, Y)` with `Y` uniform and `X | Y = j ~ N(μ*_j, Σ*)`.
pub fn sample_mixture(params: &TrueParams, n: usize, seed: u64) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let p = params.dim();
    let classes = params.classes();
    let chol = Cholesky::new(params.omega_star_inv.as_matrix().clone())
        .ok_or_else(|| Error::NotPositiveDefinite { min_eigenvalue: params.omega_star_inv.min_eigenvalue() })?;
    let l = chol.l();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, p);
    let mut y = Vec::with_capacity(n);
    let mut z = nalgebra::DVector::zeros(p);
    for i in 0..n {
        let label = rng.random_range(1..=classes);
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let draw = &l * &z;
        for c in 0..p {
            x[(i, c)] = params.mus[label - 1][c] + draw[c];
        }
        y.push(label);
    }
    Ok((x, y))
}

/// Sample covariance of `n` draws from `N(0, Σ*)`, divisor `n`.
pub fn sample_zero_mean_covariance(sigma: &SpdMatrix, n: usize, seed: u64) -> Result<SymmetricMatrix> {
    let p = sigma.dim();
    let chol = Cholesky::new(sigma.as_matrix().clone())
        .ok_or_else(|| Error::NotPositiveDefinite { min_eigenvalue: sigma.min_eigenvalue() })?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let z = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = z * chol.l().transpose();
    crate::matrix::sample_covariance(&DenseMatrix::from_nalgebra(x)?, false)
}

/// Seed for one replication: SplitMix64 applied to the base seed mixed with
/// each key in turn. Independent of thread count and scheduling.
pub fn derive_seed(seed: u64, keys: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    keys.iter().fold(mix(seed), |acc, &k| mix(acc ^ mix(k)))
}

pub fn misclassification_rate(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(shape(format!("{} predictions for {} labels", predicted.len(), truth.len())));
    }
    if truth.is_empty() {
        return Err(Error::UndefinedRate("misclassification rate of an empty set"));
    }
    Ok(predicted.iter().zip(truth).filter(|(a, b)| a != b).count() as f64 / truth.len() as f64)
}

pub fn frobenius_error(omega_bar: &SymmetricMatrix, omega_star: &SymmetricMatrix) -> Result<f64> {
    if omega_bar.dim() != omega_star.dim() {
        return Err(shape(format!("dimensions {} and {} differ", omega_bar.dim(), omega_star.dim())));
    }
    Ok((omega_bar.as_matrix() - omega_star.as_matrix()).norm())
}

/// True positive and true negative rates of estimated nonzero indicators
/// against the truth, pooled over all `(m, k)` cells.
pub fn tpr_tnr(estimated: &[Vec<bool>], true_deltas: &[Vec<f64>]) -> Result<(f64, f64)> {
    if estimated.len() != true_deltas.len() || estimated.iter().zip(true_deltas).any(|(e, t)| e.len() != t.len()) {
        return Err(shape("estimated and true supports differ in shape"));
    }
    let (mut tp, mut pos, mut tn, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (e, t) in estimated.iter().zip(true_deltas) {
        for (&hit, &truth) in e.iter().zip(t) {
            if truth != 0.0 {
                pos += 1;
                tp += hit as usize;
            } else {
                neg += 1;
                tn += !hit as usize;
            }
        }
    }
    if pos == 0 {
        return Err(Error::UndefinedRate("true positive rate with no true nonzeros"));
    }
    if neg == 0 {
        return Err(Error::UndefinedRate("true negative rate with no true zeros"));
    }
    Ok((tp as f64 / pos as f64, tn as f64 / neg as f64))
}

/// Estimated nonzero indicators of `Ω̄(x̄_1 − x̄_m)`, m = 2..J, read from the
/// model's pair supports (pairs `(1, m)` come first in pair order).
pub fn estimated_indicators(model: &LdaModel) -> Vec<Vec<bool>> {
    let p = model.dim();
    (0..model.classes() - 1)
        .map(|m| {
            let mut row = vec![false; p];
            for &i in &model.pair_supports[m] {
                row[i] = true;
            }
            row
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Characteristic-shrinking LDA.
    Proposed,
    /// L1-penalized likelihood on every entry of Ω, diagonal included.
    Glasso,
    /// Inverse of a convex combination of `S` and a scaled identity.
    LedoitWolf,
    /// True parameters.
    Bayes,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Proposed, Method::Glasso, Method::LedoitWolf, Method::Bayes];

    pub fn label(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Glasso => "glasso",
            Method::LedoitWolf => "lw",
            Method::Bayes => "bayes",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| invalid(format!("unknown method {s:?}; expected one of proposed, glasso, lw, bayes")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    pub model: ModelKind,
    pub p: usize,
    pub classes: Vec<usize>,
    pub replications: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    /// `None` uses [`SplitSizes::standard`] for each class count.
    pub sizes: Option<SplitSizes>,
    pub grid_len: usize,
    pub solver: SolverConfig,
    /// Worker threads; 0 lets the thread pool decide.
    pub threads: usize,
}

impl StudyConfig {
    pub fn new(model: ModelKind, p: usize, classes: Vec<usize>, replications: usize, seed: u64) -> Self {
        Self {
            model,
            p,
            classes,
            replications,
            methods: Method::ALL.to_vec(),
            seed,
            sizes: None,
            grid_len: 10,
            solver: study_solver_config(),
            threads: 0,
        }
    }
}

/// Solver settings used inside studies: adaptive penalty parameter and a
/// tolerance loose enough for classification but well below the grid
/// spacing.
pub fn study_solver_config() -> SolverConfig {
    SolverConfig { eps_abs: 1e-6, eps_rel: 1e-6, adaptive_rho: true, ..SolverConfig::default() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub model: u8,
    pub classes: usize,
    pub method: Method,
    pub replication: usize,
    pub misclass: f64,
    pub frob_err: f64,
    pub tpr: f64,
    pub tnr: f64,
    /// Selected tuning parameters, empty for methods without any.
    pub tuning: Vec<f64>,
    pub converged: bool,
    /// Set when the replication failed; metrics are then `NaN`.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: u8,
    pub classes: usize,
    pub method: Method,
    /// Replications that produced metrics.
    pub n: usize,
    pub failed: usize,
    pub mean_misclass: f64,
    pub se_misclass: f64,
    pub mean_frob_err: f64,
    pub se_frob_err: f64,
    pub mean_tpr: f64,
    pub se_tpr: f64,
    pub mean_tnr: f64,
    pub se_tnr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub records: Vec<ReplicationRecord>,
    pub summary: Vec<SummaryRow>,
}

impl StudyReport {
    pub fn summary_for(&self, classes: usize, method: Method) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.classes == classes && r.method == method)
    }

    /// Writes `model,J,method,replication,misclass,frob_err,tpr,tnr`.
    pub fn write_records<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "model,J,method,replication,misclass,frob_err,tpr,tnr")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.model,
                r.classes,
                r.method,
                r.replication,
                fmt_f64(r.misclass),
                fmt_f64(r.frob_err),
                fmt_f64(r.tpr),
                fmt_f64(r.tnr)
            )?;
        }
        Ok(())
    }

    pub fn write_summary<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "model,J,method,n,failed,mean_misclass,se_misclass,mean_frob_err,se_frob_err,mean_tpr,se_tpr,mean_tnr,se_tnr"
        )?;
        for s in &self.summary {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                s.model,
                s.classes,
                s.method,
                s.n,
                s.failed,
                fmt_f64(s.mean_misclass),
                fmt_f64(s.se_misclass),
                fmt_f64(s.mean_frob_err),
                fmt_f64(s.se_frob_err),
                fmt_f64(s.mean_tpr),
                fmt_f64(s.se_tpr),
                fmt_f64(s.mean_tnr),
                fmt_f64(s.se_tnr)
            )?;
        }
        Ok(())
    }
}

/// Mean and standard error (sample standard deviation over `√n`), summed in
/// input order. `NaN` entries are skipped.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    let n = finite.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = finite.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

struct Fitted {
    model: LdaModel,
    tuning: Vec<f64>,
    converged: bool,
}

fn fit_method(method: Method, params: &TrueParams, train: &LabeledData, valid: &LabeledData, cfg: &StudyConfig) -> Result<Fitted> {
    let metric = |m: &LdaModel| lda_error_rate(m, valid.x(), valid.y());
    match method {
        Method::Bayes => Ok(Fitted { model: params.bayes_model()?, tuning: vec![], converged: true }),
        Method::Proposed => {
            let s = train.pooled_covariance()?;
            let prob = crate::estimators::lda_characteristic_problem(s, &train.class_means(), 1.0)?;
            let grid = default_grid(&prob, cfg.grid_len)?;
            let sel = validation_select(
                &grid,
                |lambda, prev: Option<&LdaModel>| {
                    fit_warm(train, lambda, &cfg.solver, prev.and_then(|m| m.solution.as_ref()).map(|s| s.warm_state()))
                },
                metric,
            )?;
            let converged = sel.model.converged();
            Ok(Fitted { model: sel.model, tuning: vec![sel.lambda], converged })
        }
        Method::Glasso => {
            let s = train.pooled_covariance()?;
            let means = train.class_means();
            let priors = priors_of(train);
            let grid = default_grid(&glasso_problem(s.clone(), 1.0, true)?, cfg.grid_len)?;
            let sel = validation_select(
                &grid,
                |lambda, prev: Option<&GlassoFit>| {
                    let prob = glasso_problem(s.clone(), lambda, true)?;
                    let sol = solve(&prob, &cfg.solver, prev.map(|g| g.solution.warm_state()))?;
                    let model = LdaModel::from_parts(means.clone(), priors.clone(), sol.omega_hat.clone())?;
                    Ok(GlassoFit { solution: sol, model })
                },
                |g: &GlassoFit| metric(&g.model),
            )?;
            let converged = sel.model.solution.converged;
            Ok(Fitted { model: sel.model.model, tuning: vec![sel.lambda], converged })
        }
        Method::LedoitWolf => {
            let s = train.pooled_covariance()?;
            let means = train.class_means();
            let priors = priors_of(train);
            let ((alpha, gamma), model, _) = grid_select(&ledoit_wolf_grid(), |&(a, g)| {
                let model = LdaModel::from_parts(means.clone(), priors.clone(), ledoit_wolf_precision(&s, a, g)?)?;
                let v = metric(&model)?;
                Ok((model, v))
            })?;
            Ok(Fitted { model, tuning: vec![alpha, gamma], converged: true })
        }
    }
}

#[derive(Clone)]
struct GlassoFit {
    solution: crate::solver::Solution,
    model: LdaModel,
}

impl FitDiagnostics for GlassoFit {
    fn iterations(&self) -> usize {
        self.solution.iters_used
    }
    fn converged(&self) -> bool {
        self.solution.converged
    }
}

fn priors_of(data: &LabeledData) -> Vec<f64> {
    data.class_counts().iter().map(|&c| c as f64 / data.n() as f64).collect()
}

fn evaluate(fitted: &Fitted, params: &TrueParams, test: &LabeledData) -> Result<(f64, f64, f64, f64)> {
    let pred = fitted.model.predict_batch(test.x())?;
    let misclass = misclassification_rate(&pred, test.y())?;
    let frob = frobenius_error(fitted.model.omega_hat.as_symmetric(), params.omega_star.as_symmetric())?;
    let (tpr, tnr) = tpr_tnr(&estimated_indicators(&fitted.model), &params.true_deltas())?;
    Ok((misclass, frob, tpr, tnr))
}

fn run_replication(cfg: &StudyConfig, params: &TrueParams, classes: usize, rep: usize) -> Vec<ReplicationRecord> {
    let sizes = cfg.sizes.unwrap_or_else(|| SplitSizes::standard(classes));
    let seed = derive_seed(cfg.seed, &[cfg.model.number() as u64, classes as u64, rep as u64]);
    let data = generate_dataset(params, sizes, seed);
    cfg.methods
        .iter()
        .map(|&method| {
            let outcome = match &data {
                Ok((train, valid, test)) => fit_method(method, params, train, valid, cfg)
                    .and_then(|fitted| evaluate(&fitted, params, test).map(|m| (fitted, m)))
                    .map_err(|e| e.to_string()),
                Err(e) => Err(e.to_string()),
            };
            let base = ReplicationRecord {
                model: cfg.model.number(),
                classes,
                method,
                replication: rep,
                misclass: f64::NAN,
                frob_err: f64::NAN,
                tpr: f64::NAN,
                tnr: f64::NAN,
                tuning: vec![],
                converged: false,
                error: None,
            };
            match outcome {
                Ok((fitted, (misclass, frob_err, tpr, tnr))) => ReplicationRecord {
                    misclass,
                    frob_err,
                    tpr,
                    tnr,
                    tuning: fitted.tuning,
                    converged: fitted.converged,
                    ..base
                },
                Err(e) => ReplicationRecord { error: Some(e), ..base },
            }
        })
        .collect()
}

/// Runs every `(J, replication)` cell, in parallel when `threads != 1`.
/// Records come back ordered by J, replication, then method, and every cell
/// draws from its own seed, so the report does not depend on the thread
/// count.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    if cfg.classes.is_empty() || cfg.replications == 0 || cfg.methods.is_empty() {
        return Err(invalid("a study needs at least one class count, replication and method"));
    }
    if cfg.grid_len == 0 {
        return Err(invalid("grid length must be positive"));
    }
    let params: Vec<(usize, TrueParams)> =
        cfg.classes.iter().map(|&j| cfg.model.params(cfg.p, j).map(|t| (j, t))).collect::<Result<_>>()?;
    let cells: Vec<(usize, usize)> =
        (0..params.len()).flat_map(|i| (0..cfg.replications).map(move |r| (i, r))).collect();
    let work = || -> Vec<Vec<ReplicationRecord>> {
        cells.par_iter().map(|&(i, r)| run_replication(cfg, &params[i].1, params[i].0, r)).collect()
    };
    let nested = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| invalid(format!("cannot start thread pool: {e}")))?
        .install(work);
    let records: Vec<ReplicationRecord> = nested.into_iter().flatten().collect();
    let summary = summarize(cfg.model.number(), &cfg.classes, &cfg.methods, &records);
    Ok(StudyReport { records, summary })
}

fn summarize(model: u8, classes: &[usize], methods: &[Method], records: &[ReplicationRecord]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &j in classes {
        for &method in methods {
            let group: Vec<&ReplicationRecord> = records.iter().filter(|r| r.classes == j && r.method == method).collect();
            let ok: Vec<&&ReplicationRecord> = group.iter().filter(|r| r.error.is_none()).collect();
            let stat = |f: fn(&ReplicationRecord) -> f64| mean_and_stderr(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (mean_misclass, se_misclass) = stat(|r| r.misclass);
            let (mean_frob_err, se_frob_err) = stat(|r| r.frob_err);
            let (mean_tpr, se_tpr) = stat(|r| r.tpr);
            let (mean_tnr, se_tnr) = stat(|r| r.tnr);
            rows.push(SummaryRow {
                model,
                classes: j,
                method,
                n: ok.len(),
                failed: group.len() - ok.len(),
                mean_misclass,
                se_misclass,
                mean_frob_err,
                se_frob_err,
                mean_tpr,
                se_tpr,
                mean_tnr,
                se_tnr,
            });
        }
    }
    rows
}
