//! One function per CLI subcommand. Each returns the text to emit, notes for
//! standard error, and the process exit code.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::calibration::{Calibrator, TheoryReport};
use crate::error::Error;
use crate::lab::{self, empirical_stats, fit_svm, generate_dataset, replicate_seed};
use crate::models::{v_quadrature, ModelKind, ModelSpec};
use crate::state::{solve_null, Status};

use super::{status_name, Config, ExperimentReport, ReplicateRecord, TheoryDocument};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NON_CONVERGENCE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(Error::InvalidParameter(format!("unknown format {s:?}; expected json or csv"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub body: String,
    pub notes: Vec<String>,
    pub code: i32,
}

impl Output {
    fn ok(body: String) -> Self {
        Output {
            body,
            notes: Vec::new(),
            code: EXIT_OK,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CommandError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CommandError {}

impl From<Error> for CommandError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoSolution(_) => EXIT_NON_CONVERGENCE,
            _ => EXIT_USAGE,
        };
        CommandError {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<Output, CommandError>;

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports contain only finite numbers");
    s.push('\n');
    s
}

fn model_spec(model: &str, delta: f64, lambda: f64) -> Result<ModelSpec, CommandError> {
    let kind: ModelKind = model.parse()?;
    Ok(ModelSpec::new(kind, delta, lambda)?)
}

/// Limiting predictions for `model`. The null model is solved directly so
/// that divergence in the separable regime is reported as such.
pub fn theory_for(model: &ModelSpec) -> Result<TheoryReport, CommandError> {
    let cal = Calibrator::default();
    if !model.kind.is_null() {
        return Ok(cal.report(model)?);
    }
    let sol = solve_null(model.delta, model.lambda, cal.solver)?;
    match sol.status {
        Status::Converged => {
            let quad = v_quadrature(model, cal.n_nodes)?;
            Ok(TheoryReport::from_solution(model.clone(), quad, sol)?)
        }
        Status::Diverged => Err(CommandError {
            code: EXIT_DIVERGED,
            message: format!(
                "gamma diverged (last iterate {:.3e}) at delta={}, lambda={}: with delta above 1/2 and a vanishing \
                 penalty the random labels are separated perfectly by a hyperplane, so the margin problem has no finite limit",
                sol.gamma, model.delta, model.lambda
            ),
        }),
        s => Err(CommandError {
            code: EXIT_NON_CONVERGENCE,
            message: format!(
                "solver stopped with status {} after {} iterations (residual {:.3e})",
                status_name(s),
                sol.iterations,
                sol.residual_norm
            ),
        }),
    }
}

/// Parses `lo:step:hi` (inclusive) or a comma separated list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CommandError> {
    let bad = |what: &str| CommandError {
        code: EXIT_USAGE,
        message: format!("bad grid {spec:?}: {what}"),
    };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let grid: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [lo, step, hi] = parts[..] else {
            return Err(bad("expected lo:step:hi"));
        };
        let (lo, step, hi) = (num(lo)?, num(step)?, num(hi)?);
        if !(step > 0.0 && lo.is_finite() && hi.is_finite() && hi >= lo) {
            return Err(bad("need step > 0 and lo <= hi"));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize;
        if count > 10_000_000 {
            return Err(bad("too many points"));
        }
        (0..=count).map(|k| lo + k as f64 * step).collect()
    } else {
        spec.split(',').map(num).collect::<Result<_, _>>()?
    };
    if grid.is_empty() || grid.iter().any(|x| !x.is_finite()) {
        return Err(bad("empty or non-finite"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("must be strictly increasing"));
    }
    Ok(grid)
}

pub fn solve(model: &str, delta: f64, lambda: f64, format: Format) -> CmdResult {
    let spec = model_spec(model, delta, lambda)?;
    let doc = TheoryDocument::from_report(&theory_for(&spec)?);
    Ok(Output::ok(match format {
        Format::Json => to_json(&doc),
        Format::Csv => format!("{}\n{}\n", TheoryDocument::CSV_HEADER, doc.csv_row()),
    }))
}

#[derive(Debug, Serialize)]
struct LandscapeRow {
    alpha: f64,
    gamma: Option<f64>,
    sigma: Option<f64>,
    objective: Option<f64>,
    status: Status,
}

pub const LANDSCAPE_HEADER: &str = "alpha,gamma,sigma,objective,status";

pub fn landscape(model: &str, delta: f64, lambda: f64, alphas: &[f64], format: Format) -> CmdResult {
    let spec = model_spec(model, delta, lambda)?;
    let cal = Calibrator::default();
    let quad = cal.quadrature(&spec)?;
    let rows: Vec<LandscapeRow> = cal
        .landscape(&spec, &quad, alphas)?
        .into_iter()
        .map(|p| {
            let ok = p.solution.converged();
            LandscapeRow {
                alpha: p.alpha,
                gamma: ok.then_some(p.solution.gamma),
                sigma: ok.then_some(p.solution.sigma),
                objective: p.objective,
                status: p.solution.status,
            }
        })
        .collect();
    if rows.iter().all(|r| r.objective.is_none()) {
        return Err(CommandError {
            code: EXIT_NON_CONVERGENCE,
            message: format!("no alpha in the grid admits a solution for {model} (delta={delta}, lambda={lambda})"),
        });
    }
    let body = match format {
        Format::Json => to_json(&rows),
        Format::Csv => {
            let cell = |x: Option<f64>| x.map(|x| x.to_string()).unwrap_or_default();
            let mut s = format!("{LANDSCAPE_HEADER}\n");
            for r in &rows {
                writeln!(
                    s,
                    "{},{},{},{},{}",
                    r.alpha,
                    cell(r.gamma),
                    cell(r.sigma),
                    cell(r.objective),
                    status_name(r.status)
                )
                .unwrap();
            }
            s
        }
    };
    Ok(Output::ok(body))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateArgs {
    pub model: String,
    pub n: usize,
    pub p: usize,
    pub lambda: f64,
    pub seed: u64,
    pub replicates: usize,
    pub n_test: usize,
    pub tol: f64,
    pub max_epochs: usize,
}

fn run_replicate(spec: &ModelSpec, args: &SimulateArgs, theory: &TheoryReport, seed: u64) -> Result<ReplicateRecord, Error> {
    let data = generate_dataset(&spec.kind, args.n, args.p, seed)?;
    let fit = fit_svm(&data, args.lambda, args.tol, args.max_epochs)?;
    if !fit.converged() {
        return Ok(ReplicateRecord::unconverged(seed, &fit));
    }
    let stats = empirical_stats(&fit, &data, spec, args.n_test, theory)?;
    Ok(ReplicateRecord::from_fit(seed, &fit, &stats))
}

fn experiment_output(report: ExperimentReport, format: Format) -> Output {
    let mut notes = Vec::new();
    for r in &report.replicates {
        if let Some(w) = &r.warning {
            notes.push(format!("replicate seed {}: {w}", r.seed));
        }
        if r.measurements.is_none() {
            notes.push(format!("replicate seed {}: solver stopped after {} epochs without converging", r.seed, r.epochs));
        }
    }
    let code = if report.all_converged() {
        EXIT_OK
    } else if report.converged_replicates > 0 {
        EXIT_PARTIAL
    } else {
        EXIT_NON_CONVERGENCE
    };
    let body = match format {
        Format::Json => to_json(&report),
        Format::Csv => format!("{}\n{}\n", ExperimentReport::csv_header(), report.csv_row()),
    };
    Output { body, notes, code }
}

/// Fit `replicates` independent datasets, replicate `r` using seed
/// `seed + r`, and compare their statistics with the theory.
pub fn simulate_report(args: &SimulateArgs) -> Result<ExperimentReport, CommandError> {
    if args.n == 0 || args.p == 0 || args.replicates == 0 || args.n_test == 0 {
        return Err(Error::InvalidParameter("n, p, replicates and n_test must be >= 1".into()).into());
    }
    let delta = args.p as f64 / args.n as f64;
    let spec = model_spec(&args.model, delta, args.lambda)?;
    let theory = theory_for(&spec)?;
    let records = (0..args.replicates as u64)
        .into_par_iter()
        .map(|r| run_replicate(&spec, args, &theory, replicate_seed(args.seed, r)))
        .collect::<Result<Vec<_>, _>>()?;
    let config = Config {
        model: spec.kind.to_string(),
        delta,
        lambda: args.lambda,
        n: args.n,
        p: args.p,
        seed: args.seed,
        replicates: args.replicates,
        n_test: args.n_test,
        tol: args.tol,
    };
    Ok(ExperimentReport::assemble(config, &theory, records))
}

pub fn simulate(args: &SimulateArgs, format: Format) -> CmdResult {
    Ok(experiment_output(simulate_report(args)?, format))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curves {
    pub theory: TheoryDocument,
    pub x: Vec<f64>,
    pub coef_cdf: Vec<f64>,
    pub margin_cdf: Vec<f64>,
    /// Density of `alpha* V + sigma* Z`.
    pub density: Vec<f64>,
    pub margin_atom: Atom,
    /// Trapezoid integral of the density over its effective support.
    pub density_integral: f64,
}

pub const CURVES_HEADER: &str = "table,x,value";

/// Trapezoid rule for `f` on `[a, b]` with `n` panels.
pub fn trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|k| f(a + k as f64 * h)).sum();
    h * (0.5 * (f(a) + f(b)) + inner)
}

pub fn curves_data(theory: &TheoryReport, grid: &[f64]) -> Curves {
    let (a, s) = (theory.alpha(), theory.sigma());
    // E V^2 = 1 for every label model, so this bounds the spread of W.
    let mean = theory.quadrature().expect(|v| a * v);
    let sd = (a * a + s * s).sqrt();
    let density_integral = trapezoid(|x| theory.w_density(x), mean - 14.0 * sd, mean + 14.0 * sd, 20_000);
    Curves {
        theory: TheoryDocument::from_report(theory),
        x: grid.to_vec(),
        coef_cdf: grid.iter().map(|&x| theory.coef_cdf(x)).collect(),
        margin_cdf: grid.iter().map(|&x| theory.margin_cdf(x)).collect(),
        density: grid.iter().map(|&x| theory.w_density(x)).collect(),
        margin_atom: Atom {
            location: 1.0,
            mass: theory.margin_atom(),
        },
        density_integral,
    }
}

pub fn curves(model: &str, delta: f64, lambda: f64, grid: &[f64], format: Format) -> CmdResult {
    let spec = model_spec(model, delta, lambda)?;
    let c = curves_data(&theory_for(&spec)?, grid);
    let mut notes = Vec::new();
    if (c.density_integral - 1.0).abs() > 1e-6 {
        notes.push(format!("density integrates to {} (expected 1)", c.density_integral));
    }
    let body = match format {
        Format::Json => to_json(&c),
        Format::Csv => {
            let mut s = format!("{CURVES_HEADER}\n");
            for (name, col) in [("coef_cdf", &c.coef_cdf), ("margin_cdf", &c.margin_cdf)] {
                for (x, v) in c.x.iter().zip(col) {
                    writeln!(s, "{name},{x},{v}").unwrap();
                }
            }
            writeln!(s, "margin_atom,{},{}", c.margin_atom.location, c.margin_atom.mass).unwrap();
            for (x, v) in c.x.iter().zip(&c.density) {
                writeln!(s, "density,{x},{v}").unwrap();
            }
            s
        }
    };
    Ok(Output {
        body,
        notes,
        code: EXIT_OK,
    })
}

#[derive(Debug, Serialize)]
struct TuneDocument<'a> {
    lambda_star: f64,
    flat: bool,
    failed: &'a [f64],
    theory: TheoryDocument,
    scan: &'a [crate::calibration::LambdaScanPoint],
}

pub const TUNE_HEADER: &str = "kind,lambda,misclassification,alpha,sigma";

pub fn tune_lambda(model: &str, delta: f64, lo: f64, hi: f64, format: Format) -> CmdResult {
    let kind: ModelKind = model.parse().map_err(CommandError::from)?;
    let opt = Calibrator::default().optimize_lambda(&kind, delta, (lo, hi))?;
    let mut notes = Vec::new();
    if opt.flat {
        notes.push("notice: the misclassification error does not depend on lambda (flat objective)".to_string());
    }
    if !opt.failed.is_empty() {
        notes.push(format!("no solution at lambda = {:?}", opt.failed));
    }
    let theory = TheoryDocument::from_report(&opt.report);
    let body = match format {
        Format::Json => to_json(&TuneDocument {
            lambda_star: opt.lambda_star,
            flat: opt.flat,
            failed: &opt.failed,
            theory,
            scan: &opt.scan,
        }),
        Format::Csv => {
            let cell = |x: Option<f64>| x.map(|x| x.to_string()).unwrap_or_default();
            let mut s = format!("{TUNE_HEADER}\n");
            for p in &opt.scan {
                writeln!(s, "scan,{},{},{},{}", p.lambda, cell(p.misclassification), cell(p.alpha), cell(p.sigma)).unwrap();
            }
            writeln!(
                s,
                "optimum,{},{},{},{}",
                opt.lambda_star, theory.misclassification, theory.alpha_star, theory.sigma_star
            )
            .unwrap();
            s
        }
    };
    Ok(Output {
        body,
        notes,
        code: EXIT_OK,
    })
}

/// Write a dataset file.
pub fn generate(model: &str, n: usize, p: usize, seed: u64, path: &Path) -> CmdResult {
    let kind: ModelKind = model.parse().map_err(CommandError::from)?;
    let data = generate_dataset(&kind, n, p, seed)?;
    lab::io::save(&data, path)?;
    Ok(Output::ok(String::new()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareArgs {
    pub model: String,
    pub lambda: f64,
    pub n_test: usize,
    pub tol: f64,
    pub max_epochs: usize,
}

/// Fit a stored dataset and compare it with the theory.
pub fn compare(path: &Path, args: &CompareArgs, format: Format) -> CmdResult {
    let data = lab::io::load(path)?;
    let spec = model_spec(&args.model, data.delta(), args.lambda)?;
    if spec.kind.is_null() != data.a0.is_none() {
        return Err(Error::InvalidModel(format!(
            "model {} does not match the dataset ({} ground-truth direction)",
            spec.kind,
            if data.a0.is_some() { "has a" } else { "has no" }
        ))
        .into());
    }
    let theory = theory_for(&spec)?;
    let fit = fit_svm(&data, args.lambda, args.tol, args.max_epochs)?;
    let record = if fit.converged() {
        let stats = empirical_stats(&fit, &data, &spec, args.n_test, &theory)?;
        ReplicateRecord::from_fit(data.seed, &fit, &stats)
    } else {
        ReplicateRecord::unconverged(data.seed, &fit)
    };
    let config = Config {
        model: spec.kind.to_string(),
        delta: spec.delta,
        lambda: args.lambda,
        n: data.n,
        p: data.p,
        seed: data.seed,
        replicates: 1,
        n_test: args.n_test,
        tol: args.tol,
    };
    Ok(experiment_output(ExperimentReport::assemble(config, &theory, vec![record]), format))
}
