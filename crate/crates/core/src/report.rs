//! Serializable reports and the command layer behind the `svm-asym` binary.

use serde::{Deserialize, Serialize};

use crate::calibration::TheoryReport;
use crate::lab::{EmpiricalStats, FitStatus, SvmFit};
use crate::lab::stats::mean_sd;
use crate::state::Status;

pub mod commands;

/// Flat summary of a [`TheoryReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryDocument {
    pub model: String,
    pub delta: f64,
    pub lambda: f64,
    pub alpha_star: f64,
    pub gamma_star: f64,
    pub sigma_star: f64,
    pub support_fraction: f64,
    pub objective: f64,
    pub misclassification: f64,
    pub status: Status,
    pub residual_norm: f64,
    pub iterations: usize,
}

impl TheoryDocument {
    pub const CSV_HEADER: &'static str = "model,delta,lambda,alpha_star,gamma_star,sigma_star,support_fraction,objective,misclassification,status";

    pub fn from_report(r: &TheoryReport) -> Self {
        TheoryDocument {
            model: r.model.kind.to_string(),
            delta: r.model.delta,
            lambda: r.model.lambda,
            alpha_star: r.alpha(),
            gamma_star: r.gamma(),
            sigma_star: r.sigma(),
            support_fraction: r.support_fraction,
            objective: r.limiting_objective,
            misclassification: r.misclassification,
            status: r.status(),
            residual_norm: r.solution.residual_norm,
            iterations: r.solution.iterations,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.model,
            self.delta,
            self.lambda,
            self.alpha_star,
            self.gamma_star,
            self.sigma_star,
            self.support_fraction,
            self.objective,
            self.misclassification,
            status_name(self.status)
        )
    }
}

pub fn status_name(s: Status) -> &'static str {
    match s {
        Status::Converged => "converged",
        Status::Diverged => "diverged",
        Status::MaxIter => "max_iter",
        Status::NoSolution => "no_solution",
    }
}

/// Input configuration of a simulation, echoed verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub model: String,
    pub delta: f64,
    pub lambda: f64,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub replicates: usize,
    pub n_test: usize,
    pub tol: f64,
}

/// Empirical quantities with a limiting prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurements {
    /// KS distance of the centered coefficients from `N(0, sigma*^2)`.
    pub coef_ks: f64,
    /// KS distance of the margins from the limiting margin law, off the atom.
    pub margin_ks: f64,
    pub boundary_fraction: f64,
    pub test_error: f64,
    /// Primal objective divided by `n`.
    pub objective: f64,
    /// Sample standard deviation of the centered coefficients.
    pub coef_sd: f64,
}

impl Measurements {
    pub const FIELDS: [&'static str; 6] = [
        "coef_ks",
        "margin_ks",
        "boundary_fraction",
        "test_error",
        "objective",
        "coef_sd",
    ];

    pub fn values(&self) -> [f64; 6] {
        [
            self.coef_ks,
            self.margin_ks,
            self.boundary_fraction,
            self.test_error,
            self.objective,
            self.coef_sd,
        ]
    }

    fn from_values(v: [f64; 6]) -> Self {
        Measurements {
            coef_ks: v[0],
            margin_ks: v[1],
            boundary_fraction: v[2],
            test_error: v[3],
            objective: v[4],
            coef_sd: v[5],
        }
    }

    /// What the theory predicts for each field. The KS distances are
    /// predicted to vanish.
    pub fn predicted(theory: &TheoryDocument) -> Self {
        Measurements {
            coef_ks: 0.0,
            margin_ks: 0.0,
            boundary_fraction: theory.support_fraction,
            test_error: theory.misclassification,
            objective: theory.objective,
            coef_sd: theory.sigma_star,
        }
    }
}

/// Outcome of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub seed: u64,
    pub status: FitStatus,
    pub epochs: usize,
    pub gap: f64,
    /// Absent when the fit did not converge.
    pub measurements: Option<Measurements>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl ReplicateRecord {
    pub fn from_fit(seed: u64, fit: &SvmFit, stats: &EmpiricalStats) -> Self {
        ReplicateRecord {
            seed,
            status: fit.status,
            epochs: fit.epochs,
            gap: fit.gap,
            measurements: Some(stats.measurements),
            warning: stats.boundary_warning.clone(),
        }
    }

    pub fn unconverged(seed: u64, fit: &SvmFit) -> Self {
        ReplicateRecord {
            seed,
            status: fit.status,
            epochs: fit.epochs,
            gap: fit.gap,
            measurements: None,
            warning: None,
        }
    }
}

/// Theory, empirical means over converged replicates, their spread, and
/// `|mean - prediction|` per field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: Config,
    pub theory: TheoryDocument,
    pub empirical: Option<Measurements>,
    pub spread: Option<Measurements>,
    pub deltas: Option<Measurements>,
    pub converged_replicates: usize,
    pub replicates: Vec<ReplicateRecord>,
}

impl ExperimentReport {
    pub fn assemble(config: Config, theory: &TheoryReport, records: Vec<ReplicateRecord>) -> Self {
        Self::aggregate(config, TheoryDocument::from_report(theory), records)
    }

    fn aggregate(mut config: Config, theory: TheoryDocument, records: Vec<ReplicateRecord>) -> Self {
        config.replicates = records.len();
        let ok: Vec<Measurements> = records.iter().filter_map(|r| r.measurements).collect();
        let (empirical, spread) = if ok.is_empty() {
            (None, None)
        } else {
            let mut mean = [0.0; 6];
            let mut sd = [0.0; 6];
            for k in 0..6 {
                let column: Vec<f64> = ok.iter().map(|m| m.values()[k]).collect();
                (mean[k], sd[k]) = mean_sd(&column);
            }
            (Some(Measurements::from_values(mean)), Some(Measurements::from_values(sd)))
        };
        let deltas = empirical.map(|m| {
            let e = m.values();
            let t = Measurements::predicted(&theory).values();
            Measurements::from_values(std::array::from_fn(|k| (e[k] - t[k]).abs()))
        });
        ExperimentReport {
            config,
            theory,
            empirical,
            spread,
            deltas,
            converged_replicates: ok.len(),
            replicates: records,
        }
    }

    /// Combine runs of the same configuration; replicates are concatenated
    /// in argument order and the first run's seed is kept.
    pub fn merge(parts: &[ExperimentReport]) -> Option<Self> {
        let first = parts.first()?;
        let records = parts.iter().flat_map(|p| p.replicates.iter().cloned()).collect();
        Some(Self::aggregate(first.config.clone(), first.theory.clone(), records))
    }

    pub fn all_converged(&self) -> bool {
        self.converged_replicates == self.replicates.len()
    }

    pub fn csv_header() -> String {
        let mut cols = vec![
            "model", "delta", "lambda", "n", "p", "seed", "replicates", "converged", "n_test",
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
        for f in Measurements::FIELDS {
            for suffix in ["mean", "sd", "theory", "delta"] {
                cols.push(format!("{f}_{suffix}"));
            }
        }
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let c = &self.config;
        let mut cells = vec![
            c.model.clone(),
            c.delta.to_string(),
            c.lambda.to_string(),
            c.n.to_string(),
            c.p.to_string(),
            c.seed.to_string(),
            c.replicates.to_string(),
            self.converged_replicates.to_string(),
            c.n_test.to_string(),
        ];
        let theory = Measurements::predicted(&self.theory).values();
        let cell = |m: &Option<Measurements>, k: usize| m.map(|m| m.values()[k].to_string()).unwrap_or_default();
        for (k, t) in theory.iter().enumerate() {
            cells.push(cell(&self.empirical, k));
            cells.push(cell(&self.spread, k));
            cells.push(t.to_string());
            cells.push(cell(&self.deltas, k));
        }
        cells.join(",")
    }
}
