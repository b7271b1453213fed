//! Fixed-point equations for `(gamma, sigma)` and their solver.
//!
//! With `W = alpha V + sigma Z` the system reads
//!
//! ```text
//! (2 lambda gamma - 1) delta + 1 = P(W <= 1 - gamma) + P(W >= 1)
//! sigma^2 delta / gamma^2        = P(W <= 1 - gamma)
//!                                  + E[((1 - W) / gamma)^2 1{1 - gamma <= W <= 1}]
//! ```
//!
//! The global-null system is the `alpha = 0` case. Conditional on `V = v`
//! both right-hand sides are closed forms in `Phi`, `phi` and the truncated
//! moments of `Z`, so the residuals are cheap and smooth.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::gauss::{cdf, finite_moments, sf};
use crate::models::{ModelSpec, VQuadrature};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;
/// Iterates with `gamma` above this are treated as escaping to infinity.
pub const DIVERGENCE_GAMMA: f64 = 1e5;
pub const SIGMA_MAX: f64 = 1e3;
/// Continuation starts no lower than this penalty.
const CONTINUATION_START: f64 = 5.0;
const FD_STEP: f64 = 1e-6;

/// Proximal map of `gamma (1 - t)_+`: `min(max(1, m), m + gamma)`.
pub fn prox_margin(m: f64, gamma: f64) -> Result<f64> {
    ensure_positive("gamma", gamma)?;
    if m.is_nan() {
        return Err(Error::NonFinite("prox_margin argument"));
    }
    Ok(prox(m, gamma))
}

#[inline]
pub(crate) fn prox(m: f64, gamma: f64) -> f64 {
    m.max(1.0).min(m + gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    /// `gamma` escaped past [`DIVERGENCE_GAMMA`].
    Diverged,
    MaxIter,
    /// The signaled system has no root for this `alpha`.
    NoSolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSolution {
    pub gamma: f64,
    pub sigma: f64,
    pub alpha: Option<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub status: Status,
}

impl FixedPointSolution {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn alpha_or_zero(&self) -> f64 {
        self.alpha.unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Right-hand sides `(e1, e2)` of the system, given `W | V = v`.
#[inline]
fn conditional_terms(t: f64, gamma: f64, sigma: f64) -> (f64, f64) {
    let a = (t - gamma) / sigma;
    let b = t / sigma;
    let below = cdf(a);
    let e1 = below + sf(b);
    let m = finite_moments(a, b);
    let band = t * t * m.p0 - 2.0 * t * sigma * m.m1 + sigma * sigma * m.m2;
    (e1, below + band.max(0.0) / (gamma * gamma))
}

fn null_terms(gamma: f64, sigma: f64) -> (f64, f64) {
    conditional_terms(1.0, gamma, sigma)
}

fn signaled_terms(gamma: f64, sigma: f64, alpha: f64, quad: &VQuadrature) -> (f64, f64) {
    let (mut e1, mut e2) = (0.0, 0.0);
    for (v, w) in quad.iter() {
        let (c1, c2) = conditional_terms(1.0 - alpha * v, gamma, sigma);
        e1 += w * c1;
        e2 += w * c2;
    }
    (e1, e2)
}

#[inline]
fn residuals_from_terms(terms: (f64, f64), gamma: f64, sigma: f64, delta: f64, lambda: f64) -> [f64; 2] {
    let lhs1 = (2.0 * lambda * gamma - 1.0) * delta + 1.0;
    let lhs2 = sigma * sigma * delta / (gamma * gamma);
    [lhs1 - terms.0, lhs2 - terms.1]
}

fn check_point(gamma: f64, sigma: f64) -> Result<()> {
    ensure_positive("gamma", gamma)?;
    ensure_positive("sigma", sigma)
}

/// Residuals of the global-null system.
pub fn null_residuals(gamma: f64, sigma: f64, delta: f64, lambda: f64) -> Result<[f64; 2]> {
    check_point(gamma, sigma)?;
    ensure_positive("delta", delta)?;
    ensure_positive("lambda", lambda)?;
    Ok(residuals_from_terms(null_terms(gamma, sigma), gamma, sigma, delta, lambda))
}

/// Residuals of the signaled system at a given `alpha`.
pub fn signaled_residuals(
    gamma: f64,
    sigma: f64,
    alpha: f64,
    model: &ModelSpec,
    quad: &VQuadrature,
) -> Result<[f64; 2]> {
    check_point(gamma, sigma)?;
    if !alpha.is_finite() {
        return Err(Error::NonFinite("alpha"));
    }
    let terms = signaled_terms(gamma, sigma, alpha, quad);
    Ok(residuals_from_terms(terms, gamma, sigma, model.delta, model.lambda))
}

/// `P(1 - gamma <= alpha V + sigma Z <= 1)`.
pub fn band_probability(gamma: f64, sigma: f64, alpha: f64, quad: &VQuadrature) -> f64 {
    quad.expect(|v| {
        let t = 1.0 - alpha * v;
        crate::gauss::interval_prob((t - gamma) / sigma, t / sigma)
    })
}

/// Leading-order solution for large penalties: `gamma ~ 1/(2 lambda)`,
/// `sigma ~ 1/(2 lambda sqrt(delta))`, with `gamma` pulled inside the bracket.
pub fn large_penalty_start(delta: f64, lambda: f64) -> (f64, f64) {
    let cap = 1.0 / (2.0 * lambda);
    ((0.9 * cap).min(cap), cap / delta.sqrt())
}

/// Solve the global-null system.
pub fn solve_null(delta: f64, lambda: f64, opts: SolverOptions) -> Result<FixedPointSolution> {
    ensure_positive("delta", delta)?;
    ensure_positive("lambda", lambda)?;
    let system = System {
        delta,
        terms: &null_terms,
    };
    Ok(system.solve(lambda, None, opts))
}

/// Solve the signaled system at a fixed `alpha`. A root that runs off to
/// infinity is reported as [`Status::NoSolution`].
pub fn solve_signaled(
    alpha: f64,
    model: &ModelSpec,
    quad: &VQuadrature,
    opts: SolverOptions,
) -> Result<FixedPointSolution> {
    solve_signaled_from(alpha, model, quad, opts, None)
}

/// Like [`solve_signaled`] with an optional warm start `(gamma, sigma)`.
pub fn solve_signaled_from(
    alpha: f64,
    model: &ModelSpec,
    quad: &VQuadrature,
    opts: SolverOptions,
    start: Option<(f64, f64)>,
) -> Result<FixedPointSolution> {
    if !alpha.is_finite() {
        return Err(Error::NonFinite("alpha"));
    }
    let terms = |g: f64, s: f64| signaled_terms(g, s, alpha, quad);
    let system = System {
        delta: model.delta,
        terms: &terms,
    };
    let mut sol = system.solve(model.lambda, start, opts);
    sol.alpha = Some(alpha);
    if sol.status == Status::Diverged {
        sol.status = Status::NoSolution;
    }
    Ok(sol)
}

struct System<'a> {
    delta: f64,
    terms: &'a dyn Fn(f64, f64) -> (f64, f64),
}

/// Outcome of one Newton run at a fixed penalty.
struct NewtonRun {
    u: [f64; 2],
    residual: f64,
    iterations: usize,
    outcome: Status,
}

impl System<'_> {
    fn residual(&self, u: [f64; 2], lambda: f64) -> [f64; 2] {
        let (g, s) = (u[0].exp(), u[1].exp());
        residuals_from_terms((self.terms)(g, s), g, s, self.delta, lambda)
    }

    fn solve(&self, lambda: f64, start: Option<(f64, f64)>, opts: SolverOptions) -> FixedPointSolution {
        let (g0, s0) = start.unwrap_or_else(|| large_penalty_start(self.delta, lambda));
        let direct = self.newton([g0.ln(), s0.ln()], lambda, opts, 0);
        if matches!(direct.outcome, Status::Converged | Status::Diverged) {
            return self.finish(direct);
        }
        self.continuation(lambda, opts, direct)
    }

    /// Walk the penalty down geometrically from a regime where the
    /// large-penalty start is accurate, predicting each start by a secant
    /// step in `log lambda`.
    fn continuation(&self, lambda: f64, opts: SolverOptions, failed: NewtonRun) -> FixedPointSolution {
        let budget = 50 * opts.max_iter;
        let mut lam = lambda.max(CONTINUATION_START);
        let (g, s) = large_penalty_start(self.delta, lam);
        let first = self.newton([g.ln(), s.ln()], lam, opts, failed.iterations);
        if first.outcome != Status::Converged || lam <= lambda {
            return self.finish(first);
        }
        let mut used = first.iterations;
        let mut u = first.u;
        let mut slope = [0.0, 0.0];
        let mut ratio: f64 = 0.5;
        loop {
            let next = (lam * ratio).max(lambda);
            let dl = next.ln() - lam.ln();
            let guess = [
                (u[0] + slope[0] * dl).min((1.0 / (2.0 * next)).ln()),
                (u[1] + slope[1] * dl).min(SIGMA_MAX.ln()),
            ];
            let run = self.newton(guess, next, opts, used);
            used = run.iterations;
            match run.outcome {
                Status::Converged => {
                    slope = [(run.u[0] - u[0]) / dl, (run.u[1] - u[1]) / dl];
                    u = run.u;
                    lam = next;
                    if lam <= lambda {
                        return self.finish(run);
                    }
                    ratio = (ratio * ratio).max(0.1);
                }
                Status::Diverged => return self.finish(run),
                _ => {
                    if ratio > 0.99 || used >= budget {
                        return self.finish(NewtonRun {
                            outcome: Status::MaxIter,
                            ..run
                        });
                    }
                    ratio = ratio.sqrt();
                }
            }
        }
    }

    fn finish(&self, run: NewtonRun) -> FixedPointSolution {
        FixedPointSolution {
            gamma: run.u[0].exp(),
            sigma: run.u[1].exp(),
            alpha: None,
            residual_norm: run.residual,
            iterations: run.iterations,
            status: run.outcome,
        }
    }

    /// Damped Newton on `(log gamma, log sigma)` with a central-difference
    /// Jacobian and backtracking on the residual max-norm.
    fn newton(&self, mut u: [f64; 2], lambda: f64, opts: SolverOptions, used: usize) -> NewtonRun {
        let gamma_cap = (1.0 / (2.0 * lambda)).ln();
        let sigma_cap = SIGMA_MAX.ln();
        u[0] = u[0].min(gamma_cap);
        u[1] = u[1].min(sigma_cap);
        let mut r = self.residual(u, lambda);
        let mut norm = max_abs(r);
        let mut iterations = used;
        let run = |u, norm, iterations, outcome| NewtonRun {
            u,
            residual: norm,
            iterations,
            outcome,
        };
        for _ in 0..opts.max_iter {
            if norm <= opts.tol {
                return run(u, norm, iterations, Status::Converged);
            }
            if !norm.is_finite() {
                return run(u, norm, iterations, Status::MaxIter);
            }
            iterations += 1;
            let jac = self.jacobian(u, lambda);
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if det == 0.0 || !det.is_finite() {
                return run(u, norm, iterations, Status::MaxIter);
            }
            let du = [
                -(jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
                -(-jac[1][0] * r[0] + jac[0][0] * r[1]) / det,
            ];
            let mut step = 1.0;
            let mut accepted = false;
            while step > 1e-10 {
                let trial = [
                    (u[0] + step * du[0]).min(gamma_cap),
                    (u[1] + step * du[1]).min(sigma_cap),
                ];
                let rt = self.residual(trial, lambda);
                let nt = max_abs(rt);
                if nt.is_finite() && nt < (1.0 - 1e-4 * step) * norm {
                    u = trial;
                    r = rt;
                    norm = nt;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if u[0].exp() > DIVERGENCE_GAMMA {
                return run(u, norm, iterations, Status::Diverged);
            }
            if !accepted {
                let outcome = if norm <= opts.tol { Status::Converged } else { Status::MaxIter };
                return run(u, norm, iterations, outcome);
            }
        }
        let outcome = if norm <= opts.tol { Status::Converged } else { Status::MaxIter };
        run(u, norm, iterations, outcome)
    }

    fn jacobian(&self, u: [f64; 2], lambda: f64) -> [[f64; 2]; 2] {
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let h = FD_STEP * u[k].abs().max(1.0);
            let mut up = u;
            let mut dn = u;
            up[k] += h;
            dn[k] -= h;
            let (rp, rm) = (self.residual(up, lambda), self.residual(dn, lambda));
            for i in 0..2 {
                jac[i][k] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        jac
    }
}

fn max_abs(r: [f64; 2]) -> f64 {
    r[0].abs().max(r[1].abs())
}
