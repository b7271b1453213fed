//! Finite-sample statistics of a fitted SVM and their comparison with the
//! limiting predictions.

use crate::calibration::TheoryReport;
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::report::{Config, ExperimentReport, Measurements};

use super::dataset::{generate_test_set, Dataset};
use super::solver::{count_boundary, SvmFit, DEFAULT_EPS_DUAL};
use super::stats::{ks_statistic, ks_statistic_excluding, mean_sd};

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalStats {
    pub measurements: Measurements,
    /// Set when the dual-interior and primal-band boundary counts disagree.
    pub boundary_warning: Option<String>,
}

/// Fraction of `test` misclassified by `sign(x'a)`. Ties count as errors.
pub fn test_error(fit: &SvmFit, test: &Dataset) -> Result<f64> {
    if fit.coefficients.len() != test.p {
        return Err(Error::DimensionMismatch(format!(
            "fit has p={}, test set has p={}",
            fit.coefficients.len(),
            test.p
        )));
    }
    let wrong = (0..test.n)
        .filter(|&i| {
            let s: f64 = test.row(i).iter().zip(&fit.coefficients).map(|(x, a)| x * a).sum();
            f64::from(test.labels[i]) * s <= 0.0
        })
        .count();
    Ok(wrong as f64 / test.n as f64)
}

fn check_consistent(fit: &SvmFit, data: &Dataset, model: &ModelSpec, theory: &TheoryReport) -> Result<()> {
    if fit.coefficients.len() != data.p || fit.margins.len() != data.n {
        return Err(Error::DimensionMismatch(format!(
            "fit is for (n={}, p={}), data has (n={}, p={})",
            fit.margins.len(),
            fit.coefficients.len(),
            data.n,
            data.p
        )));
    }
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs());
    if !close(data.delta(), theory.model.delta) || !close(model.delta, theory.model.delta) {
        return Err(Error::DimensionMismatch(format!(
            "data has delta={}, model {}, theory {}",
            data.delta(),
            model.delta,
            theory.model.delta
        )));
    }
    if !close(fit.lambda, theory.model.lambda) || !close(model.lambda, theory.model.lambda) {
        return Err(Error::InvalidParameter(format!(
            "fit used lambda={}, theory lambda={}",
            fit.lambda, theory.model.lambda
        )));
    }
    if model.kind.to_string() != theory.model.kind.to_string() {
        return Err(Error::InvalidModel(format!(
            "model {} does not match theory model {}",
            model.kind, theory.model.kind
        )));
    }
    if model.kind.is_null() != data.a0.is_none() {
        return Err(Error::InvalidModel("ground-truth direction does not match the model".into()));
    }
    Ok(())
}

/// Compares one converged fit against the theory.
pub fn empirical_stats(
    fit: &SvmFit,
    data: &Dataset,
    model: &ModelSpec,
    n_test: usize,
    theory: &TheoryReport,
) -> Result<EmpiricalStats> {
    check_consistent(fit, data, model, theory)?;
    let boundary = count_boundary(fit, DEFAULT_EPS_DUAL)?;

    let alpha = theory.alpha();
    let centered: Vec<f64> = match &data.a0 {
        Some(a0) => fit.coefficients.iter().zip(a0).map(|(a, b)| a - alpha * b).collect(),
        None => fit.coefficients.clone(),
    };
    let coef_ks = ks_statistic(&centered, |x| theory.coef_cdf(x));
    let (_, coef_sd) = mean_sd(&centered);

    let band = 1e3 * fit.tol;
    let margin_ks = ks_statistic_excluding(
        &fit.margins,
        |x| theory.margin_cdf(x),
        |x| theory.margin_cdf_left(x),
        |x| (x - 1.0).abs() <= band,
    );

    let test = generate_test_set(&model.kind, data, n_test)?;
    let test_error = test_error(fit, &test)?;

    Ok(EmpiricalStats {
        measurements: Measurements {
            coef_ks,
            margin_ks,
            boundary_fraction: boundary.count as f64 / data.n as f64,
            test_error,
            objective: fit.primal_objective / data.n as f64,
            coef_sd,
        },
        boundary_warning: boundary.warning,
    })
}

/// [`empirical_stats`] packaged with the configuration and the theory.
pub fn empirical_report(
    fit: &SvmFit,
    data: &Dataset,
    model: &ModelSpec,
    n_test: usize,
    theory: &TheoryReport,
) -> Result<ExperimentReport> {
    let stats = empirical_stats(fit, data, model, n_test, theory)?;
    let config = Config {
        model: model.kind.to_string(),
        delta: model.delta,
        lambda: model.lambda,
        n: data.n,
        p: data.p,
        seed: data.seed,
        replicates: 1,
        n_test,
        tol: fit.tol,
    };
    let record = crate::report::ReplicateRecord::from_fit(data.seed, fit, &stats);
    Ok(ExperimentReport::assemble(config, theory, vec![record]))
}
