//! Outer problems on top of the state equations: the alignment `alpha*`,
//! the best penalty `lambda*`, and the derived limiting quantities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::gauss::{cdf, phi};
use crate::models::{v_quadrature, ModelKind, ModelSpec, VQuadrature, DEFAULT_NODES};
use crate::state::{
    band_probability, prox, solve_signaled_from, FixedPointSolution, SolverOptions, Status,
};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaSearch {
    pub step: f64,
    pub alpha_max: f64,
    pub tol: f64,
    /// Scan `[-alpha_max, alpha_max]` instead of `[0, alpha_max]`.
    pub full_line: bool,
}

impl Default for AlphaSearch {
    fn default() -> Self {
        AlphaSearch {
            step: 0.02,
            alpha_max: 10.0,
            tol: 1e-5,
            full_line: false,
        }
    }
}

/// Numerical settings shared by every theory computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibrator {
    pub n_nodes: usize,
    pub solver: SolverOptions,
    pub alpha: AlphaSearch,
}

impl Default for Calibrator {
    fn default() -> Self {
        Calibrator {
            n_nodes: DEFAULT_NODES,
            solver: SolverOptions::default(),
            alpha: AlphaSearch::default(),
        }
    }
}

/// `E(1 - f_gamma(alpha V + sigma Z))_+ + lambda delta (sigma^2 + alpha^2)`.
pub fn theory_objective(
    alpha: f64,
    gamma: f64,
    sigma: f64,
    model: &ModelSpec,
    quad: &VQuadrature,
) -> Result<f64> {
    ensure_positive("gamma", gamma)?;
    ensure_positive("sigma", sigma)?;
    if !alpha.is_finite() {
        return Err(Error::NonFinite("alpha"));
    }
    Ok(objective_unchecked(alpha, gamma, sigma, model, quad))
}

fn objective_unchecked(alpha: f64, gamma: f64, sigma: f64, model: &ModelSpec, quad: &VQuadrature) -> f64 {
    let hinge = quad.expect(|v| {
        let c = 1.0 - alpha * v - gamma;
        let a = c / sigma;
        (c * cdf(a) + sigma * phi(a)).max(0.0)
    });
    hinge + model.lambda * model.delta * (sigma * sigma + alpha * alpha)
}

/// `P(alpha V + sigma Z < 0) = E_V[Phi(-alpha V / sigma)]`.
pub fn misclassification_theory(alpha: f64, sigma: f64, quad: &VQuadrature) -> Result<f64> {
    ensure_positive("sigma", sigma)?;
    if !alpha.is_finite() {
        return Err(Error::NonFinite("alpha"));
    }
    // Normalizing by the weight sum makes alpha = 0 give exactly 1/2.
    let total = quad.expect(|_| 1.0);
    Ok((quad.expect(|v| cdf(-alpha * v / sigma)) / total).clamp(0.0, 1.0))
}

/// Limiting share of training points on the margin, `(1 - 2 lambda gamma) delta`.
pub fn support_fraction_theory(solution: &FixedPointSolution, model: &ModelSpec) -> Result<f64> {
    if !solution.converged() {
        return Err(Error::NoSolution(format!(
            "support fraction needs a converged solution, got {:?}",
            solution.status
        )));
    }
    Ok(((1.0 - 2.0 * model.lambda * solution.gamma) * model.delta).max(0.0))
}

/// One point of the `alpha` landscape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapePoint {
    pub alpha: f64,
    pub solution: FixedPointSolution,
    /// `None` when the system has no root at this `alpha`.
    pub objective: Option<f64>,
}

/// Result of the `alpha` minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaOptimum {
    pub solution: FixedPointSolution,
    pub objective: f64,
    pub grid: Vec<LandscapePoint>,
    /// Grid locations of every strict local minimum. More than one entry
    /// means the landscape is not unimodal; the global one is returned.
    pub local_minima: Vec<f64>,
}

impl Calibrator {
    pub fn quadrature(&self, model: &ModelSpec) -> Result<VQuadrature> {
        v_quadrature(model, self.n_nodes)
    }

    fn point(&self, alpha: f64, model: &ModelSpec, quad: &VQuadrature, start: Option<(f64, f64)>) -> Result<LandscapePoint> {
        let solution = solve_signaled_from(alpha, model, quad, self.solver, start)?;
        let objective = solution
            .converged()
            .then(|| objective_unchecked(alpha, solution.gamma, solution.sigma, model, quad));
        Ok(LandscapePoint {
            alpha,
            solution,
            objective,
        })
    }

    /// Solve the system along an increasing `alpha` grid, warm-starting each
    /// point from the last converged one.
    pub fn landscape(&self, model: &ModelSpec, quad: &VQuadrature, alphas: &[f64]) -> Result<Vec<LandscapePoint>> {
        if alphas.is_empty() {
            return Err(Error::InvalidParameter("alpha grid is empty".into()));
        }
        if alphas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("alpha grid must be strictly increasing".into()));
        }
        let mut out = Vec::with_capacity(alphas.len());
        let mut warm = None;
        for &alpha in alphas {
            let pt = self.point(alpha, model, quad, warm)?;
            if pt.solution.converged() {
                warm = Some((pt.solution.gamma, pt.solution.sigma));
            }
            out.push(pt);
        }
        Ok(out)
    }

    /// Minimize the limiting objective over `alpha`: grid scan, then golden
    /// section around the best grid point.
    pub fn optimize_alpha(&self, model: &ModelSpec, quad: &VQuadrature) -> Result<AlphaOptimum> {
        let opts = self.alpha;
        ensure_positive("alpha step", opts.step)?;
        ensure_positive("alpha_max", opts.alpha_max)?;
        let mut alpha_max = opts.alpha_max;
        let mut grid: Vec<LandscapePoint> = Vec::new();
        loop {
            let lo = if opts.full_line { -alpha_max } else { 0.0 };
            let count = ((alpha_max - lo) / opts.step).round() as usize;
            let alphas: Vec<f64> = (0..=count)
                .map(|k| lo + k as f64 * opts.step)
                .filter(|a| grid.last().is_none_or(|p| *a > p.alpha + 0.5 * opts.step))
                .collect();
            if grid.is_empty() || !opts.full_line {
                grid.extend(self.landscape(model, quad, &alphas)?);
            } else {
                grid = self.landscape(model, quad, &alphas)?;
            }
            let best = argmin(&grid).ok_or_else(|| {
                Error::NoSolution(format!(
                    "no alpha in [{lo}, {alpha_max}] admits a solution for {} (delta={}, lambda={})",
                    model.kind, model.delta, model.lambda
                ))
            })?;
            let at_edge = best + 1 == grid.len() || (opts.full_line && best == 0);
            if !at_edge || alpha_max > 1e3 {
                break;
            }
            alpha_max *= 2.0;
        }
        let best = argmin(&grid).expect("checked above");
        let local_minima = local_minima(&grid);

        let left = if best > 0 { grid[best - 1].alpha } else { grid[best].alpha };
        let right = if best + 1 < grid.len() { grid[best + 1].alpha } else { grid[best].alpha };
        let seed = grid[best];
        let warm = Some((seed.solution.gamma, seed.solution.sigma));
        let eval = |alpha: f64| -> Result<(f64, LandscapePoint)> {
            let pt = self.point(alpha, model, quad, warm)?;
            Ok((pt.objective.unwrap_or(f64::INFINITY), pt))
        };

        // The grid minimum stays a candidate, so a minimum on the boundary
        // alpha = 0 is returned exactly.
        let mut candidates = vec![(seed.objective.unwrap_or(f64::INFINITY), seed)];
        let (mut a, mut b) = (left, right);
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let (mut fc, pc) = eval(c)?;
        let (mut fd, pd) = eval(d)?;
        candidates.push((fc, pc));
        candidates.push((fd, pd));
        while b - a > opts.tol {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                let (f, p) = eval(c)?;
                fc = f;
                candidates.push((f, p));
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                let (f, p) = eval(d)?;
                fd = f;
                candidates.push((f, p));
            }
        }
        let (objective, pt) = candidates
            .into_iter()
            .filter(|(f, _)| f.is_finite())
            .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.alpha.abs().total_cmp(&y.1.alpha.abs())))
            .expect("the grid minimum is finite");
        Ok(AlphaOptimum {
            solution: pt.solution,
            objective,
            grid,
            local_minima,
        })
    }

    /// Full set of limiting predictions for one model.
    pub fn report(&self, model: &ModelSpec) -> Result<TheoryReport> {
        let quad = self.quadrature(model)?;
        let opt = self.optimize_alpha(model, &quad)?;
        TheoryReport::from_solution(model.clone(), quad, opt.solution)
    }

    /// Minimize the limiting misclassification error over `lambda` in
    /// `range`: log-grid scan (parallel), then golden section in `log lambda`.
    pub fn optimize_lambda(&self, kind: &ModelKind, delta: f64, range: (f64, f64)) -> Result<LambdaOptimum> {
        let (lo, hi) = range;
        ensure_positive("lambda lower bound", lo)?;
        ensure_positive("lambda upper bound", hi)?;
        if !(lo < hi) {
            return Err(Error::InvalidParameter(format!("need lo < hi, got [{lo}, {hi}]")));
        }
        ModelSpec::new(kind.clone(), delta, lo)?;
        let quad = self.quadrature(&ModelSpec::new(kind.clone(), delta, lo)?)?;
        let error_at = |lambda: f64| -> Result<(f64, FixedPointSolution)> {
            let model = ModelSpec::new(kind.clone(), delta, lambda)?;
            let opt = self.optimize_alpha(&model, &quad)?;
            let s = opt.solution;
            Ok((misclassification_theory(s.alpha_or_zero(), s.sigma, &quad)?, s))
        };

        let (llo, lhi) = (lo.ln(), hi.ln());
        let n = LAMBDA_GRID;
        let lambdas: Vec<f64> = (0..n)
            .map(|k| (llo + (lhi - llo) * k as f64 / (n - 1) as f64).exp())
            .collect();
        let scan: Vec<LambdaScanPoint> = lambdas
            .par_iter()
            .map(|&lambda| match error_at(lambda) {
                Ok((err, s)) => LambdaScanPoint {
                    lambda,
                    misclassification: Some(err),
                    alpha: s.alpha,
                    sigma: Some(s.sigma),
                },
                Err(_) => LambdaScanPoint {
                    lambda,
                    misclassification: None,
                    alpha: None,
                    sigma: None,
                },
            })
            .collect();
        let failed: Vec<f64> = scan.iter().filter(|p| p.misclassification.is_none()).map(|p| p.lambda).collect();
        let ok: Vec<(usize, f64)> = scan
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.misclassification.map(|e| (i, e)))
            .collect();
        if ok.is_empty() {
            return Err(Error::NoSolution(format!("no alpha admits a solution at lambda = {failed:?}")));
        }
        let (emin, emax) = ok
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(_, e)| (a.min(e), b.max(e)));
        let flat = emax - emin <= 1e-12;
        let best = ok
            .iter()
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .map(|&(i, _)| i)
            .expect("nonempty");

        let lambda_star = if flat {
            scan[best].lambda
        } else {
            let mut a = scan[best.saturating_sub(1)].lambda.ln();
            let mut b = scan[(best + 1).min(n - 1)].lambda.ln();
            let f = |x: f64| error_at(x.exp()).map(|r| r.0).unwrap_or(f64::INFINITY);
            let mut c = b - INV_PHI * (b - a);
            let mut d = a + INV_PHI * (b - a);
            let (mut fc, mut fd) = (f(c), f(d));
            let mut best_seen = (scan[best].misclassification.unwrap(), scan[best].lambda.ln());
            // 1e-3 relative on lambda is 1e-3 absolute on log lambda
            while b - a > 1e-3 {
                if fc <= fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - INV_PHI * (b - a);
                    fc = f(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + INV_PHI * (b - a);
                    fd = f(d);
                }
                for (x, fx) in [(c, fc), (d, fd)] {
                    if fx < best_seen.0 {
                        best_seen = (fx, x);
                    }
                }
            }
            best_seen.1.exp()
        };
        let model = ModelSpec::new(kind.clone(), delta, lambda_star)?;
        let report = self.report(&model)?;
        Ok(LambdaOptimum {
            lambda_star,
            report,
            scan,
            flat,
            failed,
        })
    }
}

fn argmin(grid: &[LandscapePoint]) -> Option<usize> {
    grid.iter()
        .enumerate()
        .filter_map(|(i, p)| p.objective.map(|f| (i, f)))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map(|(i, _)| i)
}

fn local_minima(grid: &[LandscapePoint]) -> Vec<f64> {
    let pts: Vec<(f64, f64)> = grid.iter().filter_map(|p| p.objective.map(|f| (p.alpha, f))).collect();
    (0..pts.len())
        .filter(|&i| {
            let left = i == 0 || pts[i - 1].1 > pts[i].1;
            let right = i + 1 == pts.len() || pts[i + 1].1 > pts[i].1;
            left && right
        })
        .map(|i| pts[i].0)
        .collect()
}

pub const LAMBDA_GRID: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaScanPoint {
    pub lambda: f64,
    pub misclassification: Option<f64>,
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LambdaOptimum {
    pub lambda_star: f64,
    pub report: TheoryReport,
    pub scan: Vec<LambdaScanPoint>,
    /// The error does not depend on `lambda` (e.g. the global null).
    pub flat: bool,
    /// Grid penalties where no `alpha` admitted a solution.
    pub failed: Vec<f64>,
}

/// Limiting predictions at a solved `(alpha*, gamma*, sigma*)`.
#[derive(Debug, Clone)]
pub struct TheoryReport {
    pub model: ModelSpec,
    pub solution: FixedPointSolution,
    pub support_fraction: f64,
    pub limiting_objective: f64,
    pub misclassification: f64,
    quad: VQuadrature,
}

impl TheoryReport {
    pub fn from_solution(model: ModelSpec, quad: VQuadrature, solution: FixedPointSolution) -> Result<Self> {
        let support_fraction = support_fraction_theory(&solution, &model)?;
        let alpha = solution.alpha_or_zero();
        let limiting_objective = theory_objective(alpha, solution.gamma, solution.sigma, &model, &quad)?;
        let misclassification = misclassification_theory(alpha, solution.sigma, &quad)?;
        Ok(TheoryReport {
            model,
            solution,
            support_fraction,
            limiting_objective,
            misclassification,
            quad,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.solution.alpha_or_zero()
    }

    pub fn gamma(&self) -> f64 {
        self.solution.gamma
    }

    pub fn sigma(&self) -> f64 {
        self.solution.sigma
    }

    pub fn quadrature(&self) -> &VQuadrature {
        &self.quad
    }

    /// CDF of a centered coefficient, `N(0, sigma*^2)`.
    pub fn coef_cdf(&self, x: f64) -> f64 {
        cdf(x / self.sigma())
    }

    /// `P(alpha* V + sigma* Z <= x)`.
    pub fn w_cdf(&self, x: f64) -> f64 {
        let (a, s) = (self.alpha(), self.sigma());
        self.quad.expect(|v| cdf((x - a * v) / s))
    }

    /// Density of `alpha* V + sigma* Z`.
    pub fn w_density(&self, x: f64) -> f64 {
        let (a, s) = (self.alpha(), self.sigma());
        self.quad.expect(|v| phi((x - a * v) / s)) / s
    }

    /// CDF of the limiting margin `f_gamma*(alpha* V + sigma* Z)`, right
    /// continuous, with a jump of size `support_fraction` at 1.
    pub fn margin_cdf(&self, x: f64) -> f64 {
        if x < 1.0 {
            self.w_cdf(x - self.gamma())
        } else {
            self.w_cdf(x)
        }
    }

    /// Left limit of [`Self::margin_cdf`].
    pub fn margin_cdf_left(&self, x: f64) -> f64 {
        if x <= 1.0 {
            self.w_cdf(x - self.gamma())
        } else {
            self.w_cdf(x)
        }
    }

    /// Mass of the atom at 1 computed from the law of `W`.
    pub fn margin_atom(&self) -> f64 {
        band_probability(self.gamma(), self.sigma(), self.alpha(), &self.quad)
    }

    /// `E psi(f_gamma*(W))` by quadrature in `V` and a Gauss-Hermite rule in `Z`.
    pub fn margin_expectation<F: Fn(f64) -> f64>(&self, psi: F) -> f64 {
        let z = v_quadrature(&ModelSpec::null(1.0, 1.0).expect("valid"), 64).expect("valid");
        let (a, g, s) = (self.alpha(), self.gamma(), self.sigma());
        self.quad.expect(|v| z.expect(|z| psi(prox(a * v + s * z, g))))
    }

    pub fn status(&self) -> Status {
        self.solution.status
    }
}

/// Default-settings front ends.
pub fn optimize_alpha(model: &ModelSpec) -> Result<FixedPointSolution> {
    let cal = Calibrator::default();
    let quad = cal.quadrature(model)?;
    Ok(cal.optimize_alpha(model, &quad)?.solution)
}

pub fn theory_report(model: &ModelSpec) -> Result<TheoryReport> {
    Calibrator::default().report(model)
}

pub fn optimize_lambda(delta: f64, kind: &ModelKind, range: (f64, f64)) -> Result<LambdaOptimum> {
    Calibrator::default().optimize_lambda(kind, delta, range)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::solve_null;
    use approx::assert_abs_diff_eq;

    #[test]
    fn objective_degenerates_to_hinge_at_zero_sigma() {
        let model = ModelSpec::null(1.0, 1.0).unwrap();
        let quad = v_quadrature(&model, 32).unwrap();
        for &g in &[0.2, 0.6, 0.9] {
            let f = theory_objective(0.0, g, 1e-9, &model, &quad).unwrap();
            assert_abs_diff_eq!(f, 1.0 - g, epsilon = 1e-9);
        }
        assert!(theory_objective(0.0, 0.0, 0.1, &model, &quad).is_err());
    }

    #[test]
    fn null_misclassification_is_half() {
        for kind in [ModelKind::GlobalNull, ModelKind::Logistic(3.0), ModelKind::Indicator] {
            let quad = v_quadrature(&ModelSpec::new(kind, 1.0, 1.0).unwrap(), 64).unwrap();
            assert_abs_diff_eq!(misclassification_theory(0.0, 0.4, &quad).unwrap(), 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn support_fraction_examples() {
        let model = ModelSpec::null(1.0, 1.0).unwrap();
        let mut sol = solve_null(1.0, 1.0, SolverOptions::default()).unwrap();
        let f = support_fraction_theory(&sol, &model).unwrap();
        assert!((f - 0.10).abs() <= 0.01, "{f}");
        sol.gamma = 0.5;
        assert_eq!(support_fraction_theory(&sol, &model).unwrap(), 0.0);
        sol.status = Status::MaxIter;
        assert!(support_fraction_theory(&sol, &model).is_err());

        let model = ModelSpec::null(1.0, 50.0).unwrap();
        let sol = solve_null(1.0, 50.0, SolverOptions::default()).unwrap();
        assert!(support_fraction_theory(&sol, &model).unwrap() <= 1e-10);
    }

    #[test]
    fn null_pipeline_finds_zero_alignment() {
        let model = ModelSpec::null(1.0, 1.0).unwrap();
        let sol = optimize_alpha(&model).unwrap();
        let null = solve_null(1.0, 1.0, SolverOptions::default()).unwrap();
        assert!(sol.alpha.unwrap().abs() <= 1e-5, "{sol:?}");
        assert_abs_diff_eq!(sol.gamma, null.gamma, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.sigma, null.sigma, epsilon = 1e-6);
    }

    #[test]
    fn report_invariants_null() {
        let report = theory_report(&ModelSpec::null(1.0, 1.0).unwrap()).unwrap();
        let jump = report.margin_cdf(1.0) - report.margin_cdf_left(1.0);
        assert_abs_diff_eq!(jump, report.support_fraction, epsilon = 1e-8);
        assert!((jump - 0.10).abs() <= 0.01);
        assert_abs_diff_eq!(report.margin_cdf(60.0), 1.0, epsilon = 1e-15);
        let mut last = 0.0;
        for k in -300..300 {
            let f = report.margin_cdf(k as f64 * 0.01);
            assert!(f >= last);
            last = f;
        }
        // coefficient law is N(0, 0.44^2) up to the rounding of sigma*
        for k in -20..=20 {
            let x = k as f64 * 0.1;
            assert!((report.coef_cdf(x) - cdf(x / 0.44)).abs() < 0.005);
        }
        assert_abs_diff_eq!(report.misclassification, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn landscape_rejects_bad_grids() {
        let cal = Calibrator::default();
        let model = ModelSpec::null(1.0, 1.0).unwrap();
        let quad = cal.quadrature(&model).unwrap();
        assert!(cal.landscape(&model, &quad, &[]).is_err());
        assert!(cal.landscape(&model, &quad, &[0.1, 0.1]).is_err());
        let one = cal.landscape(&model, &quad, &[0.3]).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one[0].objective.is_some());
    }
}
