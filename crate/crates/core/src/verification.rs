//! Numerical optimality certificates and empirical checks of the estimator's
//! error rate.

use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Result};
use crate::io::fmt_f64;
use crate::matrix::{DenseMatrix, SpdMatrix, SymmetricMatrix};
use crate::simulation::{derive_seed, mean_and_stderr, sample_zero_mean_covariance, TrueParams};
use crate::solver::{default_tau, solve, ProblemSpec, Solution, SolverConfig};

const SUBGRADIENT_MAX_ITERS: usize = 5000;
const SUBGRADIENT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `‖S − Ω⁻¹ + λ·sym(Aᵀ(W∘Z)Bᵀ)‖_F` at the best admissible `Z`.
    pub residual: f64,
    /// Largest amount by which the unconstrained least-squares multiplier
    /// on thresholded entries leaves `[−1, 1]`.
    pub max_subgradient_violation: f64,
    /// Whether the signs of `Θ̂` agree with `AΩ̂B − C` on its support.
    pub support_consistent: bool,
}

/// Stationarity certificate for a solver output. `Z` is fixed to
/// `sign(Θ̂)` on the support of `Θ̂` and chosen in `[−1, 1]` elsewhere to
/// minimize the residual, starting from the multiplier implied by `Γ̂`.
pub fn kkt_residual(prob: &ProblemSpec, sol: &Solution) -> Result<KktReport> {
    check_dim(prob, &sol.omega_hat)?;
    let theta = sol.theta_hat.as_matrix();
    if theta.shape() != prob.characteristic_shape() {
        return Err(shape("Θ̂ does not match the characteristic shape"));
    }
    let free = theta.map(|v| v == 0.0);
    let fixed = theta.map(f64::signum).component_mul(&free.map(|f| if f { 0.0 } else { 1.0 }));
    let weights = weight_matrix(prob);
    let lambda = prob.lambda();
    let start = DMatrix::from_fn(theta.nrows(), theta.ncols(), |i, j| {
        let w = weights[(i, j)];
        if free[(i, j)] && lambda > 0.0 && w > 0.0 {
            (-sol.gamma_hat.get(i, j) / (lambda * w)).clamp(-1.0, 1.0)
        } else {
            0.0
        }
    });
    let mut report = certify(prob, &sol.omega_hat, &fixed, &free, start);
    let d = prob.sandwich(sol.omega_hat.as_matrix()) - prob.c().as_matrix();
    report.support_consistent = theta.iter().zip(d.iter()).all(|(&t, &v)| t == 0.0 || t.signum() == v.signum());
    Ok(report)
}

/// Stationarity certificate for an arbitrary Ω. Entries of `AΩB − C` with
/// magnitude at most `zero_tol` are treated as thresholded.
pub fn kkt_residual_at(prob: &ProblemSpec, omega: &SpdMatrix, zero_tol: f64) -> Result<KktReport> {
    check_dim(prob, omega)?;
    if !(zero_tol >= 0.0) {
        return Err(invalid("zero tolerance must be nonnegative"));
    }
    let d = prob.sandwich(omega.as_matrix()) - prob.c().as_matrix();
    let free = d.map(|v| v.abs() <= zero_tol);
    let fixed = DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| if free[(i, j)] { 0.0 } else { d[(i, j)].signum() });
    let start = DMatrix::zeros(d.nrows(), d.ncols());
    Ok(certify(prob, omega, &fixed, &free, start))
}

fn check_dim(prob: &ProblemSpec, omega: &SpdMatrix) -> Result<()> {
    if omega.dim() != prob.dim() {
        return Err(shape(format!("Ω is {0}x{0}, problem has p = {1}", omega.dim(), prob.dim())));
    }
    Ok(())
}

fn weight_matrix(prob: &ProblemSpec) -> DMatrix<f64> {
    let (a, b) = prob.characteristic_shape();
    prob.weights().map_or_else(|| DMatrix::from_element(a, b, 1.0), |w| w.as_matrix().clone())
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Minimizes `½‖R₀ + λ·sym(Aᵀ(W∘Z)Bᵀ)‖²` over `Z` in `[−1, 1]` on the free
/// entries by accelerated projected gradient, then measures how far the
/// unconstrained minimizer reached from there leaves the box.
fn certify(prob: &ProblemSpec, omega: &SpdMatrix, fixed: &DMatrix<f64>, free: &DMatrix<bool>, start: DMatrix<f64>) -> KktReport {
    let lambda = prob.lambda();
    let weights = weight_matrix(prob);
    let base = prob.s().as_matrix() - omega.inverse_raw();
    let mask = DMatrix::from_fn(free.nrows(), free.ncols(), |i, j| if free[(i, j)] && weights[(i, j)] > 0.0 { 1.0 } else { 0.0 });
    let residual_of = |z: &DMatrix<f64>| -> DMatrix<f64> {
        let total = fixed + z.component_mul(&mask);
        &base + sym(&prob.adjoint(&total.component_mul(&weights))) * lambda
    };
    if lambda == 0.0 || mask.iter().all(|&m| m == 0.0) {
        return KktReport { residual: residual_of(&start).norm(), max_subgradient_violation: 0.0, support_consistent: true };
    }
    let wmax = weights.amax();
    let lipschitz = (lambda * wmax).powi(2) * default_tau(prob.a(), prob.b());
    let step = 1.0 / lipschitz;
    let grad = |z: &DMatrix<f64>| -> DMatrix<f64> {
        (prob.sandwich(&residual_of(z)) * lambda).component_mul(&weights).component_mul(&mask)
    };
    let run = |z0: DMatrix<f64>, project: bool| -> DMatrix<f64> {
        let clip = |m: DMatrix<f64>| if project { m.map(|v| v.clamp(-1.0, 1.0)) } else { m };
        let mut z = z0.component_mul(&mask);
        let mut y = z.clone();
        let mut t = 1.0f64;
        for _ in 0..SUBGRADIENT_MAX_ITERS {
            let z_next = clip(&y - grad(&y) * step);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &z_next + (&z_next - &z) * ((t - 1.0) / t_next);
            let moved = (&z_next - &z).norm();
            z = z_next;
            t = t_next;
            if moved <= SUBGRADIENT_TOL * (1.0 + z.norm()) {
                break;
            }
        }
        z
    };
    let z = run(start, true);
    let residual = residual_of(&z).norm();
    let unconstrained = run(z, false);
    let violation = unconstrained.iter().zip(mask.iter()).filter(|(_, &m)| m > 0.0).map(|(v, _)| (v.abs() - 1.0).max(0.0)).fold(0.0, f64::max);
    KktReport { residual, max_subgradient_violation: violation, support_consistent: true }
}

/// `√(number of nonzero entries)` of Ω*, the compatibility constant when
/// `A = B = I`.
pub fn compatibility_constant_identity(omega_star: &SymmetricMatrix) -> f64 {
    (omega_star.count_nonzero() as f64).sqrt()
}

/// Best value of `Σ_{(i,j)∈G} |[AMB]_ij|` over unit-Frobenius symmetric `M`
/// found by normalized subgradient ascent from `restarts` random starts; a
/// lower bound on the compatibility constant. Restart `r` draws from its own
/// stream, so adding restarts never lowers the result.
pub fn compatibility_constant_estimate(a: &DenseMatrix, b: &DenseMatrix, support: &[(usize, usize)], restarts: usize, seed: u64) -> Result<f64> {
    if a.cols() != b.rows() {
        return Err(shape(format!("A has {} columns but B has {} rows", a.cols(), b.rows())));
    }
    if support.is_empty() || restarts == 0 {
        return Err(invalid("need a nonempty support and at least one restart"));
    }
    let (rows, cols) = (a.rows(), b.cols());
    if let Some(&(i, j)) = support.iter().find(|&&(i, j)| i >= rows || j >= cols) {
        return Err(invalid(format!("support cell ({i}, {j}) outside {rows}x{cols}")));
    }
    let p = a.cols();
    let am = a.as_matrix();
    let bm = b.as_matrix();
    let mut indicator = DMatrix::zeros(rows, cols);
    for &(i, j) in support {
        indicator[(i, j)] = 1.0;
    }
    let value = |m: &DMatrix<f64>| -> (f64, DMatrix<f64>) {
        let amb = am * m * bm;
        let signs = amb.map(f64::signum).component_mul(&indicator);
        (amb.component_mul(&indicator).abs().sum(), signs)
    };
    let mut best = 0.0f64;
    for r in 0..restarts {
        let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, &[r as u64]));
        let raw = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut m = sym(&raw);
        m /= m.norm();
        let (mut f, mut signs) = value(&m);
        for _ in 0..1000 {
            let g = sym(&(am.transpose() * &signs * bm.transpose()));
            let norm = g.norm();
            if norm == 0.0 {
                break;
            }
            let candidate = g / norm;
            let (f_next, signs_next) = value(&candidate);
            if f_next <= f * (1.0 + 1e-14) {
                if f_next > f {
                    f = f_next;
                }
                break;
            }
            m = candidate;
            f = f_next;
            signs = signs_next;
        }
        best = best.max(f);
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateConfig {
    pub n_list: Vec<usize>,
    pub replications: usize,
    /// `λ_n = K·√(log p / n)`.
    pub k_const: f64,
    pub seed: u64,
    pub solver: SolverConfig,
    /// Worker threads; 0 lets the thread pool decide.
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub lambda: f64,
    pub mean_frob: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `log mean_frob` on `log n`; 0 when every `n`
    /// is the same.
    pub slope: f64,
}

impl RateTable {
    /// Writes `n,mean_frob,stderr` and a final `slope,<value>,` row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,mean_frob,stderr")?;
        for r in &self.rows {
            writeln!(w, "{},{},{}", r.n, fmt_f64(r.mean_frob), fmt_f64(r.stderr))?;
        }
        writeln!(w, "slope,{},", fmt_f64(self.slope))?;
        Ok(())
    }
}

pub fn log_log_slope(ns: &[usize], errors: &[f64]) -> f64 {
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let k = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / k, y.iter().sum::<f64>() / k);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return 0.0;
    }
    x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx
}

/// Mean Frobenius error of the estimator against `Ω*` over replications of
/// zero-mean Gaussian samples of each size, with `build(S, λ_n)` giving the
/// problem to solve.
pub fn rate_experiment<F>(truth: &TrueParams, cfg: &RateConfig, build: F) -> Result<RateTable>
where
    F: Fn(SymmetricMatrix, f64) -> Result<ProblemSpec> + Sync,
{
    if cfg.n_list.is_empty() || cfg.replications == 0 {
        return Err(invalid("need at least one sample size and one replication"));
    }
    if cfg.n_list.contains(&0) || !(cfg.k_const >= 0.0) {
        return Err(invalid("sample sizes must be positive and K nonnegative"));
    }
    let p = truth.dim();
    let cells: Vec<(usize, usize)> =
        (0..cfg.n_list.len()).flat_map(|i| (0..cfg.replications).map(move |r| (i, r))).collect();
    let lambda_of = |n: usize| cfg.k_const * ((p as f64).ln() / n as f64).sqrt();
    let work = || -> Result<Vec<f64>> {
        cells
            .par_iter()
            .map(|&(i, r)| -> Result<f64> {
                let n = cfg.n_list[i];
                let s = sample_zero_mean_covariance(&truth.omega_star_inv, n, derive_seed(cfg.seed, &[i as u64, r as u64]))?;
                let sol = solve(&build(s, lambda_of(n))?, &cfg.solver, None)?;
                Ok((sol.omega_hat.as_matrix() - truth.omega_star.as_matrix()).norm())
            })
            .collect()
    };
    let errors = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| invalid(format!("cannot start thread pool: {e}")))?
        .install(work)?;
    let rows: Vec<RateRow> = cfg
        .n_list
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let (mean_frob, stderr) = mean_and_stderr(&errors[i * cfg.replications..(i + 1) * cfg.replications]);
            RateRow { n, lambda: lambda_of(n), mean_frob, stderr }
        })
        .collect();
    let slope = log_log_slope(&cfg.n_list, &rows.iter().map(|r| r.mean_frob).collect::<Vec<_>>());
    Ok(RateTable { rows, slope })
}
