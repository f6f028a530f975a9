//! Prox-linear ADMM for
//!
//! ```text
//! minimize  tr(SΩ) − log det Ω + λ |AΩB − C|₁   over symmetric positive definite Ω
//! ```
//!
//! The problem is split as `AΩB − Θ = C` with dual variable `Γ`. The Ω
//! subproblem is majorized by adding `(ρ/2) vec(Ω − Ω_k)ᵀ Q vec(Ω − Ω_k)`
//! with `Q = τI − AᵀA ⊗ BBᵀ`, which turns it into a ridge-type problem with a
//! closed-form solution through one symmetric eigendecomposition. The Θ step
//! is an elementwise soft-threshold.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};
use crate::estimators::CharacteristicKind;
use crate::io::fmt_f64;
use crate::matrix::{largest_eigenvalue, soft, sym_eigen_raw, DenseMatrix, EigenPair, SpdMatrix, SymmetricMatrix};

/// Margin added to `φ₁(AᵀA)·φ₁(BBᵀ)` so that `Q` is strictly positive definite.
pub const TAU_MARGIN: f64 = 1e-8;

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 1000;
const INIT_DIAGONAL_SHIFT: f64 = 1e-8;

/// A dense factor together with a flag recording whether it is exactly the
/// identity, so products with it can be skipped.
#[derive(Debug, Clone, PartialEq)]
struct Factor {
    m: DenseMatrix,
    identity: bool,
}

impl Factor {
    fn new(m: DenseMatrix) -> Self {
        let identity = m.rows() == m.cols() && {
            let raw = m.as_matrix();
            raw.iter().enumerate().all(|(idx, v)| {
                let (i, j) = (idx % raw.nrows(), idx / raw.nrows());
                *v == if i == j { 1.0 } else { 0.0 }
            })
        };
        Self { m, identity }
    }
}

/// One instance of the estimator: data `S`, the characteristic `AΩB − C`,
/// and the penalty level `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    s: SymmetricMatrix,
    a: Factor,
    b: Factor,
    c: DenseMatrix,
    lambda: f64,
    weights: Option<DenseMatrix>,
    kind: CharacteristicKind,
}

impl ProblemSpec {
    pub fn new(s: SymmetricMatrix, a: DenseMatrix, b: DenseMatrix, c: DenseMatrix, lambda: f64) -> Result<Self> {
        let p = s.dim();
        if a.cols() != p {
            return Err(shape(format!("A has {} columns but S is {p}x{p}", a.cols())));
        }
        if b.rows() != p {
            return Err(shape(format!("B has {} rows but S is {p}x{p}", b.rows())));
        }
        if c.shape() != (a.rows(), b.cols()) {
            return Err(shape(format!(
                "C is {}x{} but AΩB is {}x{}",
                c.rows(),
                c.cols(),
                a.rows(),
                b.cols()
            )));
        }
        check_lambda(lambda)?;
        Ok(Self {
            s,
            a: Factor::new(a),
            b: Factor::new(b),
            c,
            lambda,
            weights: None,
            kind: CharacteristicKind::Generic,
        })
    }

    /// Per-entry penalty weights: the penalty becomes `λ Σ w_ij |[AΩB − C]_ij|`.
    pub fn with_weights(mut self, w: DenseMatrix) -> Result<Self> {
        if w.shape() != self.c.shape() {
            return Err(shape(format!(
                "penalty weights are {}x{} but the characteristic is {}x{}",
                w.rows(),
                w.cols(),
                self.c.rows(),
                self.c.cols()
            )));
        }
        if w.as_matrix().iter().any(|v| *v < 0.0) {
            return Err(invalid("penalty weights must be nonnegative"));
        }
        self.weights = Some(w);
        Ok(self)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { lambda, ..self.clone() })
    }

    pub(crate) fn with_kind(mut self, kind: CharacteristicKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn s(&self) -> &SymmetricMatrix {
        &self.s
    }
    pub fn a(&self) -> &DenseMatrix {
        &self.a.m
    }
    pub fn b(&self) -> &DenseMatrix {
        &self.b.m
    }
    pub fn c(&self) -> &DenseMatrix {
        &self.c
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn weights(&self) -> Option<&DenseMatrix> {
        self.weights.as_ref()
    }
    pub fn kind(&self) -> &CharacteristicKind {
        &self.kind
    }
    pub fn dim(&self) -> usize {
        self.s.dim()
    }
    /// Shape `(a, b)` of the characteristic.
    pub fn characteristic_shape(&self) -> (usize, usize) {
        self.c.shape()
    }

    fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w.get(i, j))
    }

    /// `A X B` for a `p × p` matrix `X`.
    pub(crate) fn sandwich(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let left = if self.a.identity { x.clone() } else { self.a.m.as_matrix() * x };
        if self.b.identity {
            left
        } else {
            left * self.b.m.as_matrix()
        }
    }

    /// `Aᵀ Y Bᵀ` for an `a × b` matrix `Y`.
    pub(crate) fn adjoint(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let left = if self.a.identity { y.clone() } else { self.a.m.as_matrix().tr_mul(y) };
        if self.b.identity {
            left
        } else {
            left * self.b.m.as_matrix().transpose()
        }
    }

    /// `λ Σ w_ij |D_ij|`.
    pub(crate) fn penalty(&self, d: &DMatrix<f64>) -> f64 {
        if self.lambda == 0.0 {
            return 0.0;
        }
        let total: f64 = match &self.weights {
            None => d.iter().map(|v| v.abs()).sum(),
            Some(w) => d.iter().zip(w.as_matrix().iter()).map(|(v, w)| w * v.abs()).sum(),
        };
        self.lambda * total
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid(format!("lambda must be a finite nonnegative number, got {lambda}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauRule {
    /// `φ₁(AᵀA)·φ₁(BBᵀ) + 1e-8`, computed once per solve.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rho: f64,
    pub tau: TauRule,
    pub max_iters: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Residual balancing: double ρ when the primal residual exceeds ten times
    /// the dual residual, halve it in the opposite case.
    pub adaptive_rho: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { rho: 1.0, tau: TauRule::Auto, max_iters: 5000, eps_abs: 1e-8, eps_rel: 1e-8, adaptive_rho: false }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(invalid(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.eps_abs > 0.0) || !(self.eps_rel > 0.0) {
            return Err(invalid("eps_abs and eps_rel must be positive"));
        }
        Ok(())
    }

    /// Resolves τ for `prob`, rejecting explicit values that leave `Q` indefinite.
    pub fn resolve_tau(&self, prob: &ProblemSpec) -> Result<f64> {
        let floor = default_tau(prob.a(), prob.b()) - TAU_MARGIN;
        match self.tau {
            TauRule::Auto => Ok(floor + TAU_MARGIN),
            TauRule::Fixed(t) if t > floor => Ok(t),
            TauRule::Fixed(t) => Err(invalid(format!("tau = {t} must exceed φ₁(AᵀA)φ₁(BBᵀ) = {floor}"))),
        }
    }
}

/// ADMM iterates `(Ω_k, Θ_k, Γ_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub omega: SpdMatrix,
    pub theta: DenseMatrix,
    pub gamma: DenseMatrix,
    pub iter: usize,
}

impl SolverState {
    /// `Ω₀ = diag(1/(S_ii + 1e-8))`, `Θ₀ = AΩ₀B − C`, `Γ₀ = 0`.
    pub fn initial(prob: &ProblemSpec) -> Result<Self> {
        let diag: Vec<f64> = prob.s().diagonal().iter().map(|v| 1.0 / (v.max(0.0) + INIT_DIAGONAL_SHIFT)).collect();
        let omega = SpdMatrix::new(SymmetricMatrix::from_diagonal(&diag)?)?;
        let theta = DenseMatrix::wrap(prob.sandwich(omega.as_matrix()) - prob.c().as_matrix());
        let (a, b) = prob.characteristic_shape();
        Ok(Self { omega, theta, gamma: DenseMatrix::zeros(a, b), iter: 0 })
    }

    fn check_shapes(&self, prob: &ProblemSpec) -> Result<()> {
        let p = prob.dim();
        if self.omega.dim() != p {
            return Err(shape(format!("initial Ω is {0}x{0}, problem has p = {p}", self.omega.dim())));
        }
        let ab = prob.characteristic_shape();
        if self.theta.shape() != ab || self.gamma.shape() != ab {
            return Err(shape(format!("initial Θ/Γ must be {}x{}", ab.0, ab.1)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub omega_hat: SpdMatrix,
    /// Sparse estimate of `AΩ̂B − C`; exact zeros mark thresholded entries.
    pub theta_hat: DenseMatrix,
    pub gamma_hat: DenseMatrix,
    pub iters_used: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub converged: bool,
    /// Final ρ (differs from the configured value only under adaptive ρ).
    pub rho: f64,
    pub tau: f64,
}

impl Solution {
    /// Iterates to warm-start a related solve from.
    pub fn warm_state(&self) -> SolverState {
        SolverState {
            omega: self.omega_hat.clone(),
            theta: self.theta_hat.clone(),
            gamma: self.gamma_hat.clone(),
            iter: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

pub fn write_trace<W: Write>(mut w: W, rows: &[TraceRow]) -> Result<()> {
    writeln!(w, "iter,objective,primal_residual,dual_residual")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            r.iter,
            fmt_f64(r.objective),
            fmt_f64(r.primal_residual),
            fmt_f64(r.dual_residual)
        )?;
    }
    Ok(())
}

/// `φ₁(AᵀA)·φ₁(BBᵀ) + 1e-8`, with both top eigenvalues from power iteration.
pub fn default_tau(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let am = a.as_matrix();
    let bm = b.as_matrix();
    let ata = am.tr_mul(am);
    let bbt = bm * bm.transpose();
    largest_eigenvalue(&ata, POWER_TOL, POWER_MAX_ITERS) * largest_eigenvalue(&bbt, POWER_TOL, POWER_MAX_ITERS)
        + TAU_MARGIN
}

/// Maps each eigenvalue ψ of the Ω-step matrix to `(−ψ + √(ψ² + 4ρτ)) / (2ρτ)`,
/// the positive root of `ρτ w² + ψ w − 1 = 0`.
#[inline]
fn omega_eigenvalue(psi: f64, rho_tau: f64) -> f64 {
    let root = (psi * psi + 4.0 * rho_tau).sqrt();
    if psi >= 0.0 {
        // same root, written to avoid cancellation
        2.0 / (psi + root)
    } else {
        (root - psi) / (2.0 * rho_tau)
    }
}

/// Steps 1–3: forms `G_k`, decomposes `S + (G_k + G_kᵀ)/2 − ρτΩ_k`, and maps
/// its spectrum through the closed-form root.
pub fn omega_update(state: &SolverState, prob: &ProblemSpec, rho: f64, tau: f64) -> Result<SpdMatrix> {
    let char_k = prob.sandwich(state.omega.as_matrix());
    omega_step(&char_k, state, prob, rho, tau)
}

fn omega_step(
    char_k: &DMatrix<f64>,
    state: &SolverState,
    prob: &ProblemSpec,
    rho: f64,
    tau: f64,
) -> Result<SpdMatrix> {
    let inner = char_k - state.gamma.as_matrix() / rho - state.theta.as_matrix() - prob.c().as_matrix();
    let g = prob.adjoint(&inner) * rho;
    let mut m = prob.s().as_matrix() + (&g + g.transpose()) * 0.5 - state.omega.as_matrix() * (rho * tau);
    // exact symmetry before the eigensolver
    m = SymmetricMatrix::symmetrize(&m).as_matrix().clone();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged { iteration: state.iter });
    }
    let eig = sym_eigen_raw(&m);
    let rho_tau = rho * tau;
    // w(ψ) is decreasing, so reversing keeps the values sorted descending
    let n = eig.values.len();
    let values: Vec<f64> = eig.values.iter().rev().map(|psi| omega_eigenvalue(*psi, rho_tau)).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for j in 0..n {
        vectors.set_column(j, &eig.vectors.as_matrix().column(n - 1 - j));
    }
    SpdMatrix::from_eigen(EigenPair { vectors: DenseMatrix::wrap(vectors), values })
}

/// Step 4: `Θ_{k+1} = soft(AΩ_{k+1}B − ρ⁻¹Γ_k − C, ρ⁻¹λ)`, weighted per entry
/// when the problem carries penalty weights.
pub fn theta_update(omega_next: &SpdMatrix, state: &SolverState, prob: &ProblemSpec, rho: f64) -> DenseMatrix {
    let char_next = prob.sandwich(omega_next.as_matrix());
    theta_step(&char_next, state, prob, rho)
}

fn theta_step(char_next: &DMatrix<f64>, state: &SolverState, prob: &ProblemSpec, rho: f64) -> DenseMatrix {
    let level = prob.lambda() / rho;
    let mut v = char_next - state.gamma.as_matrix() / rho - prob.c().as_matrix();
    if prob.weights().is_none() {
        v.apply(|x| *x = soft(*x, level));
    } else {
        let (rows, cols) = v.shape();
        for j in 0..cols {
            for i in 0..rows {
                v[(i, j)] = soft(v[(i, j)], level * prob.weight(i, j));
            }
        }
    }
    DenseMatrix::wrap(v)
}

/// Step 5: `Γ_{k+1} = Γ_k − ρ(AΩ_{k+1}B − Θ_{k+1} − C)`.
pub fn dual_update(
    gamma: &DenseMatrix,
    omega_next: &SpdMatrix,
    theta_next: &DenseMatrix,
    prob: &ProblemSpec,
    rho: f64,
) -> DenseMatrix {
    let char_next = prob.sandwich(omega_next.as_matrix());
    let violation = char_next - theta_next.as_matrix() - prob.c().as_matrix();
    DenseMatrix::wrap(gamma.as_matrix() - violation * rho)
}

/// `tr(SΩ) − log det Ω + λ Σ w_ij |[AΩB − C]_ij|`.
pub fn objective(prob: &ProblemSpec, omega: &SpdMatrix) -> Result<f64> {
    if omega.dim() != prob.dim() {
        return Err(shape(format!("Ω is {0}x{0}, problem has p = {1}", omega.dim(), prob.dim())));
    }
    let min = omega.min_eigenvalue();
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    let d = prob.sandwich(omega.as_matrix()) - prob.c().as_matrix();
    Ok(objective_parts(prob, omega, &d))
}

fn objective_parts(prob: &ProblemSpec, omega: &SpdMatrix, char_minus_c: &DMatrix<f64>) -> f64 {
    let trace = prob.s().as_matrix().component_mul(omega.as_matrix()).sum();
    trace - omega.logdet() + prob.penalty(char_minus_c)
}

/// `‖S − Ω⁻¹ − sym(AᵀΓBᵀ)‖_F`: the Ω-stationarity residual of the Lagrangian.
///
/// Along the iterates this equals `‖ρQ(Ω_{k−1} − Ω_k) − ρ sym(Aᵀ(Θ_k − Θ_{k−1})Bᵀ)‖_F`,
/// i.e. the usual Θ-difference dual residual plus the prox-linear term.
fn stationarity_residual(prob: &ProblemSpec, omega: &SpdMatrix, dual_map: &DMatrix<f64>) -> f64 {
    let r = prob.s().as_matrix() - omega.inverse_raw() - (dual_map + dual_map.transpose()) * 0.5;
    r.norm()
}

/// Runs Steps 1–6 until the primal residual `‖AΩ_kB − Θ_k − C‖_F` and the
/// dual residual `‖S − Ω_k⁻¹ − sym(AᵀΓ_kBᵀ)‖_F` both fall below
///
/// ```text
/// ε_pri  = √(ab)·eps_abs + eps_rel·max(‖AΩB‖_F, ‖Θ‖_F, ‖C‖_F)
/// ε_dual = p·eps_abs    + eps_rel·‖AᵀΓBᵀ‖_F
/// ```
///
/// or `max_iters` is reached (then `converged` is false).
pub fn solve(prob: &ProblemSpec, cfg: &SolverConfig, init: Option<SolverState>) -> Result<Solution> {
    run(prob, cfg, init, None)
}

/// As [`solve`], also recording one [`TraceRow`] per iteration.
pub fn solve_traced(
    prob: &ProblemSpec,
    cfg: &SolverConfig,
    init: Option<SolverState>,
) -> Result<(Solution, Vec<TraceRow>)> {
    let mut rows = Vec::new();
    let sol = run(prob, cfg, init, Some(&mut rows))?;
    Ok((sol, rows))
}

fn run(
    prob: &ProblemSpec,
    cfg: &SolverConfig,
    init: Option<SolverState>,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<Solution> {
    cfg.validate()?;
    let tau = cfg.resolve_tau(prob)?;
    let mut rho = cfg.rho;
    let mut state = match init {
        Some(s) => {
            s.check_shapes(prob)?;
            s
        }
        None => SolverState::initial(prob)?,
    };
    state.iter = 0;

    let (a, b) = prob.characteristic_shape();
    let p = prob.dim() as f64;
    let sqrt_ab = ((a * b) as f64).sqrt();
    let c_norm = prob.c().frobenius_norm();

    let mut char_k = prob.sandwich(state.omega.as_matrix());
    let mut primal = (&char_k - state.theta.as_matrix() - prob.c().as_matrix()).norm();
    let mut dual = 0.0;
    let mut converged = false;

    for k in 0..cfg.max_iters {
        let omega_next = omega_step(&char_k, &state, prob, rho, tau).map_err(|e| match e {
            Error::NotPositiveDefinite { .. } => Error::Diverged { iteration: k },
            other => other,
        })?;
        let char_next = prob.sandwich(omega_next.as_matrix());
        let theta_next = theta_step(&char_next, &state, prob, rho);

        let violation = &char_next - theta_next.as_matrix() - prob.c().as_matrix();
        let gamma_next = state.gamma.as_matrix() - &violation * rho;
        let dual_map = prob.adjoint(&gamma_next);

        primal = violation.norm();
        dual = stationarity_residual(prob, &omega_next, &dual_map);
        if !primal.is_finite() || !dual.is_finite() || gamma_next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { iteration: k + 1 });
        }

        let eps_pri = sqrt_ab * cfg.eps_abs
            + cfg.eps_rel * char_next.norm().max(theta_next.frobenius_norm()).max(c_norm);
        let eps_dual = p * cfg.eps_abs + cfg.eps_rel * dual_map.norm();

        state = SolverState { omega: omega_next, theta: theta_next, gamma: DenseMatrix::wrap(gamma_next), iter: k + 1 };

        if let Some(rows) = trace.as_deref_mut() {
            let d = &char_next - prob.c().as_matrix();
            rows.push(TraceRow {
                iter: k + 1,
                objective: objective_parts(prob, &state.omega, &d),
                primal_residual: primal,
                dual_residual: dual,
            });
        }
        char_k = char_next;

        if primal <= eps_pri && dual <= eps_dual {
            converged = true;
            break;
        }
        if cfg.adaptive_rho && (k + 1) % 10 == 0 {
            if primal > 10.0 * dual {
                rho *= 2.0;
            } else if dual > 10.0 * primal {
                rho /= 2.0;
            }
        }
    }

    let d = &char_k - prob.c().as_matrix();
    let objective = objective_parts(prob, &state.omega, &d);
    Ok(Solution {
        omega_hat: state.omega,
        theta_hat: state.theta,
        gamma_hat: state.gamma,
        iters_used: state.iter,
        primal_residual: primal,
        dual_residual: dual,
        objective,
        converged,
        rho,
        tau,
    })
}
