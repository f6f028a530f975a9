use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use charshrink::estimators::{class_pairs, glasso_problem, lda_characteristic_problem};
use charshrink::io::{fmt_f64, read_matrix, write_matrix};
use charshrink::lda::{f_statistic_screen, f_statistics, fit, fit_warm, LabeledData, LdaModel};
use charshrink::simulation::{run_study, Method, ModelKind, SplitSizes, StudyConfig};
use charshrink::solver::{solve, solve_traced, write_trace};
use charshrink::tuning::{default_grid, kfold_select, lda_error_rate, write_selection_table};
use charshrink::verification::{compatibility_constant_estimate, kkt_residual_at, RateConfig};
use charshrink::{DenseMatrix, ProblemSpec, Solution, SpdMatrix, SymmetricMatrix};

use crate::manifest::{ensure_dir, Recorder};
use crate::{EstimateArgs, KktArgs, LdaFitArgs, LdaPredictArgs, LdaScreenArgs, RateArgs, SimulateArgs, XiArgs};

fn read_dense(rec: &mut Recorder, path: &Path, flag: &str) -> Result<DenseMatrix> {
    let bytes = rec.input(path)?;
    read_matrix(bytes.as_slice(), false).with_context(|| format!("{flag} {}", path.display()))
}

fn read_problem(rec: &mut Recorder, cov: &Path, a: &Path, b: &Path, c: Option<&Path>, lambda: f64) -> Result<ProblemSpec> {
    let s = SymmetricMatrix::from_dense(&read_dense(rec, cov, "--cov")?).context("--cov")?;
    let a = read_dense(rec, a, "--A")?;
    let b = read_dense(rec, b, "--B")?;
    let c = match c {
        Some(path) => read_dense(rec, path, "--C")?,
        None => DenseMatrix::zeros(a.rows(), b.cols()),
    };
    Ok(ProblemSpec::new(s, a, b, c, lambda)?)
}

fn read_labeled(rec: &mut Recorder, path: &Path, header: bool) -> Result<LabeledData> {
    let bytes = rec.input(path)?;
    LabeledData::read_csv(bytes.as_slice(), header).with_context(|| format!("--data {}", path.display()))
}

fn write_json<T: Serialize>(rec: &mut Recorder, dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = rec.output(dir.join(name))?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

#[derive(Serialize)]
struct Diagnostics {
    lambda: f64,
    objective: f64,
    primal_residual: f64,
    dual_residual: f64,
    iters: usize,
    converged: bool,
    rho: f64,
    tau: f64,
}

impl Diagnostics {
    fn new(lambda: f64, sol: &Solution) -> Self {
        Self {
            lambda,
            objective: sol.objective,
            primal_residual: sol.primal_residual,
            dual_residual: sol.dual_residual,
            iters: sol.iters_used,
            converged: sol.converged,
            rho: sol.rho,
            tau: sol.tau,
        }
    }
}

fn warn_unconverged(sol: &Solution) {
    if !sol.converged {
        eprintln!(
            "warning: no convergence after {} iterations (primal {:e}, dual {:e})",
            sol.iters_used, sol.primal_residual, sol.dual_residual
        );
    }
}

pub fn estimate(args: EstimateArgs) -> Result<()> {
    ensure_dir(&args.out)?;
    let mut rec = Recorder::start("estimate");
    let prob = read_problem(&mut rec, &args.cov, &args.a, &args.b, args.c.as_deref(), args.lambda)?;
    let cfg = args.solver.config();
    let sol = match &args.trace {
        Some(path) => {
            let (sol, rows) = solve_traced(&prob, &cfg, None)?;
            write_trace(rec.output(path.clone())?, &rows)?;
            sol
        }
        None => solve(&prob, &cfg, None)?,
    };
    warn_unconverged(&sol);
    write_matrix(rec.output(args.out.join("omega_hat.csv"))?, &sol.omega_hat.to_dense(), None)?;
    write_matrix(rec.output(args.out.join("theta_hat.csv"))?, &sol.theta_hat, None)?;
    write_json(&mut rec, &args.out, "diagnostics.json", &Diagnostics::new(args.lambda, &sol))?;
    rec.finish(&args.out, &args, None)
}

#[derive(Debug, Serialize, Deserialize)]
struct PairSupport {
    j: usize,
    k: usize,
    /// 1-based variable indices.
    variables: Vec<usize>,
}

/// On-disk form of a fitted discriminant model.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    classes: usize,
    p: usize,
    lambda: f64,
    means: Vec<Vec<f64>>,
    priors: Vec<f64>,
    omega_hat: Vec<Vec<f64>>,
    pair_supports: Vec<PairSupport>,
    iters: usize,
    converged: bool,
}

impl ModelFile {
    fn new(model: &LdaModel, lambda: f64) -> Self {
        let p = model.dim();
        let sol = model.solution.as_ref();
        Self {
            classes: model.classes(),
            p,
            lambda,
            means: model.means.clone(),
            priors: model.priors.clone(),
            omega_hat: (0..p).map(|i| (0..p).map(|j| model.omega_hat.get(i, j)).collect()).collect(),
            pair_supports: class_pairs(model.classes())
                .into_iter()
                .zip(&model.pair_supports)
                .map(|((j, k), vars)| PairSupport { j: j + 1, k: k + 1, variables: vars.iter().map(|v| v + 1).collect() })
                .collect(),
            iters: sol.map_or(0, |s| s.iters_used),
            converged: sol.is_none_or(|s| s.converged),
        }
    }

    fn into_model(self) -> Result<LdaModel> {
        let omega = SpdMatrix::new(SymmetricMatrix::from_rows(&self.omega_hat)?).map_err(|e| anyhow!("omega_hat: {e}"))?;
        let mut model = LdaModel::from_parts(self.means, self.priors, omega)?;
        model.pair_supports = self.pair_supports.into_iter().map(|s| s.variables.into_iter().map(|v| v - 1).collect()).collect();
        Ok(model)
    }
}

pub fn lda_fit(args: LdaFitArgs) -> Result<()> {
    ensure_dir(&args.out)?;
    let mut rec = Recorder::start("lda fit");
    let data = read_labeled(&mut rec, &args.data.data, args.data.header)?;
    let cfg = args.solver.config();
    let lambda = match (args.lambda, args.cv) {
        (Some(lambda), None) => lambda,
        (None, Some(folds)) => {
            let prob = lda_characteristic_problem(data.pooled_covariance()?, &data.class_means(), 1.0)?;
            let grid = default_grid(&prob, args.grid_len)?;
            let cv = kfold_select(
                &data,
                folds,
                args.seed,
                &grid,
                |train, lambda, prev: Option<&LdaModel>| {
                    fit_warm(train, lambda, &cfg, prev.and_then(|m| m.solution.as_ref()).map(Solution::warm_state))
                },
                lda_error_rate,
            )?;
            if !cv.assignment.stratified {
                eprintln!("warning: a class has fewer than {folds} observations; folds are not stratified");
            }
            write_selection_table(rec.output(args.out.join("selection.csv"))?, &cv.table)?;
            cv.lambda
        }
        _ => bail!("give exactly one of --lambda and --cv"),
    };
    let model = fit(&data, lambda, &cfg)?;
    if let Some(sol) = &model.solution {
        warn_unconverged(sol);
    }
    write_json(&mut rec, &args.out, "model.json", &ModelFile::new(&model, lambda))?;
    let mut w = rec.output(args.out.join("supports.csv"))?;
    writeln!(w, "j,k,variable")?;
    for ((j, k), vars) in class_pairs(model.classes()).into_iter().zip(&model.pair_supports) {
        for v in vars {
            writeln!(w, "{},{},{}", j + 1, k + 1, v + 1)?;
        }
    }
    w.flush()?;
    println!("lambda {}", fmt_f64(lambda));
    rec.finish(&args.out, &args, Some(args.seed))
}

pub fn lda_predict(args: LdaPredictArgs) -> Result<()> {
    ensure_dir(&args.out)?;
    let mut rec = Recorder::start("lda predict");
    let model_bytes = rec.input(&args.model)?;
    let file: ModelFile = serde_json::from_slice(&model_bytes).with_context(|| format!("--model {}", args.model.display()))?;
    let model = file.into_model()?;
    let (x, truth) = if args.labeled {
        let bytes = rec.input(&args.data)?;
        let data = LabeledData::read_csv(bytes.as_slice(), args.header).with_context(|| format!("--data {}", args.data.display()))?;
        (data.x().clone(), Some(data.y().to_vec()))
    } else {
        let bytes = rec.input(&args.data)?;
        (read_matrix(bytes.as_slice(), args.header).with_context(|| format!("--data {}", args.data.display()))?, None)
    };
    if x.cols() != model.dim() {
        bail!("--data has {} feature columns but the model has p = {}", x.cols(), model.dim());
    }
    let labels = model.predict_batch(&x)?;
    let mut w = rec.output(args.out.join("labels.csv"))?;
    writeln!(w, "label")?;
    for l in &labels {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    if let Some(truth) = truth {
        let rate = lda_error_rate(&model, &x, &truth)?;
        println!("misclassification_rate {}", fmt_f64(rate));
    }
    rec.finish(&args.out, &args, None)
}

pub fn lda_screen(args: LdaScreenArgs) -> Result<()> {
    ensure_dir(&args.out)?;
    let mut rec = Recorder::start("lda screen");
    let data = read_labeled(&mut rec, &args.data.data, args.data.header)?;
    let keep = f_statistic_screen(&data, args.top)?;
    let f = f_statistics(&data);
    let mut w = rec.output(args.out.join("indices.csv"))?;
    writeln!(w, "rank,variable,f_statistic")?;
    for (rank, &v) in keep.iter().enumerate() {
        writeln!(w, "{},{},{}", rank + 1, v + 1, fmt_f64(f[v]))?;
    }
    w.flush()?;
    rec.finish(&args.out, &args, None)
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let model: ModelKind = args.model.parse()?;
    let methods = args.methods.iter().map(|m| m.parse::<Method>()).collect::<charshrink::Result<Vec<_>>>()?;
    let sizes = match &args.sizes {
        None => None,
        Some(v) if v.len() == 3 => Some(SplitSizes::new(v[0], v[1], v[2])?),
        Some(v) => bail!("--sizes needs three values (train,validation,test), got {}", v.len()),
    };
    ensure_dir(&args.out)?;
    let mut rec = Recorder::start("simulate");
    let mut cfg = StudyConfig::new(model, args.p, args.classes.clone(), args.reps, args.seed);
    cfg.methods = methods;
    cfg.sizes = sizes;
    cfg.grid_len = args.grid_len;
    cfg.threads = args.threads;
    let report = run_study(&cfg)?;
    let failed = report.records.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("warning: {failed} method fits failed; their metrics are NaN");
        for r in report.records.iter().filter(|r| r.error.is_some()) {
            eprintln!("  J={} {} replication {}: {}", r.classes, r.method, r.replication, r.error.as_deref().unwrap_or(""));
        }
    }
    let mut w = rec.output(args.out.join("study.csv"))?;
    report.write_records(&mut w)?;
    w.flush()?;
    let mut w = rec.output(args.out.join("study_summary.csv"))?;
    report.write_summary(&mut w)?;
    w.flush()?;
    println!("{:>3} {:>9} {:>10} {:>10} {:>7} {:>7}", "J", "method", "misclass", "frob_err", "tpr", "tnr");
    for s in &report.summary {
        println!(
            "{:>3} {:>9} {:>10.4} {:>10.4} {:>7.3} {:>7.3}",
            s.classes, s.method, s.mean_misclass, s.mean_frob_err, s.mean_tpr, s.mean_tnr
        );
    }
    #[derive(Serialize)]
    struct Config<'a> {
        args: &'a SimulateArgs,
        study: &'a StudyConfig,
    }
    rec.finish(&args.out, Config { args: &args, study: &cfg }, Some(args.seed))
}

pub fn verify_kkt(args: KktArgs) -> Result<()> {
    ensure_dir(&args.out)?;
    let mut rec = Recorder::start("verify kkt");
    let prob = read_problem(&mut rec, &args.cov, &args.a, &args.b, args.c.as_deref(), args.lambda)?;
    let omega = SymmetricMatrix::from_dense(&read_dense(&mut rec, &args.omega, "--omega")?).context("--omega")?;
    let omega = SpdMatrix::new(omega).map_err(|e| anyhow!("--omega: {e}"))?;
    let report = kkt_residual_at(&prob, &omega, args.zero_tol)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    write_json(&mut rec, &args.out, "kkt.json", &report)?;
    rec.finish(&args.out, &args, None)
}

pub fn verify_rate(args: RateArgs) -> Result<()> {
    let model: ModelKind = args.model.parse()?;
    ensure_dir(&args.out)?;
    let mut rec = Recorder::start("verify rate");
    let truth = model.params(args.p, 2)?;
    let cfg = RateConfig {
        n_list: args.n_list.clone(),
        replications: args.reps,
        k_const: args.k_const,
        seed: args.seed,
        solver: args.solver.config(),
        threads: args.threads,
    };
    let table = charshrink::verification::rate_experiment(&truth, &cfg, |s, l| glasso_problem(s, l, true))?;
    let mut w = rec.output(args.out.join("rate.csv"))?;
    table.write_csv(&mut w)?;
    w.flush()?;
    table.write_csv(std::io::stdout().lock())?;
    rec.finish(&args.out, &args, Some(args.seed))
}

#[derive(Serialize)]
struct XiReport {
    xi_lower_bound: f64,
    restarts: usize,
    seed: u64,
}

pub fn verify_xi(args: XiArgs) -> Result<()> {
    ensure_dir(&args.out)?;
    let mut rec = Recorder::start("verify xi");
    let a = read_dense(&mut rec, &args.a, "--A")?;
    let b = read_dense(&mut rec, &args.b, "--B")?;
    let cells = read_dense(&mut rec, &args.support, "--support")?;
    if cells.cols() != 2 {
        bail!("--support must have two columns (row,column), got {}", cells.cols());
    }
    let support = (0..cells.rows())
        .map(|r| {
            let (i, j) = (cells.get(r, 0), cells.get(r, 1));
            if i < 1.0 || j < 1.0 || i.fract() != 0.0 || j.fract() != 0.0 {
                bail!("--support row {}: cells are 1-based integers", r + 1);
            }
            Ok((i as usize - 1, j as usize - 1))
        })
        .collect::<Result<Vec<_>>>()?;
    let xi = compatibility_constant_estimate(&a, &b, &support, args.restarts, args.seed)?;
    let report = XiReport { xi_lower_bound: xi, restarts: args.restarts, seed: args.seed };
    println!("{}", serde_json::to_string_pretty(&report)?);
    write_json(&mut rec, &args.out, "xi.json", &report)?;
    rec.finish(&args.out, &args, Some(args.seed))
}
