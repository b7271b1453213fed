//! Hinge + ridge SVM by dual coordinate ascent.
//!
//! Primal: `min_a sum_i (1 - y_i x_i'a / sqrt(p))_+ + lambda |a|^2`.
//! Dual:   `max_{beta in [0,1]^n} sum_i beta_i - |sum_i beta_i z_i|^2 / (4 lambda)`
//! with `z_i = y_i x_i / sqrt(p)` and `a = sum_i beta_i z_i / (2 lambda)`.
//! The partial derivative of the dual in `beta_i` is `G_i = 1 - z_i'a` and
//! the curvature is `|z_i|^2 / (2 lambda)`, so each coordinate is maximized
//! exactly by a clipped Newton step.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

use super::dataset::Dataset;
use super::rng::{SeedStream, Stream};

pub const DEFAULT_EPS_DUAL: f64 = 1e-6;
/// Exact recomputation of `a` every this many epochs.
const REFRESH_EVERY: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmFit {
    pub coefficients: Vec<f64>,
    /// `L_i = y_i x_i'a / sqrt(p)`
    pub margins: Vec<f64>,
    pub duals: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub epochs: usize,
    /// Largest KKT violation at the returned iterate.
    pub kkt_violation: f64,
    pub tol: f64,
    pub lambda: f64,
    pub status: FitStatus,
}

impl SvmFit {
    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }
}

/// Violation of the optimality conditions for one coordinate.
#[inline]
fn violation(beta: f64, g: f64) -> f64 {
    if beta <= 0.0 {
        g.max(0.0)
    } else if beta >= 1.0 {
        (-g).max(0.0)
    } else {
        g.abs()
    }
}

/// Solver state, exposed so callers can step epoch by epoch.
pub struct DualCoordinateAscent<'a> {
    data: &'a Dataset,
    lambda: f64,
    beta: Vec<f64>,
    a: Vec<f64>,
    diag: Vec<f64>,
    order: Vec<usize>,
    rng: SeedStream,
    scale: f64,
    epochs: usize,
}

impl<'a> DualCoordinateAscent<'a> {
    pub fn new(data: &'a Dataset, lambda: f64) -> Result<Self> {
        ensure_positive("lambda", lambda)?;
        data.validate()?;
        let p = data.p as f64;
        let diag = (0..data.n)
            .map(|i| data.row(i).iter().map(|x| x * x).sum::<f64>() / p)
            .collect();
        Ok(DualCoordinateAscent {
            data,
            lambda,
            beta: vec![0.0; data.n],
            a: vec![0.0; data.p],
            diag,
            order: (0..data.n).collect(),
            rng: SeedStream::new(data.seed, Stream::Solver),
            scale: 1.0 / p.sqrt(),
            epochs: 0,
        })
    }

    #[inline]
    fn gradient(&self, i: usize) -> f64 {
        let dot: f64 = self.data.row(i).iter().zip(&self.a).map(|(x, a)| x * a).sum();
        1.0 - f64::from(self.data.labels[i]) * dot * self.scale
    }

    /// One pass over a fresh random permutation. Returns the largest KKT
    /// violation seen before each coordinate update.
    pub fn epoch(&mut self) -> f64 {
        self.rng.shuffle(&mut self.order);
        let mut worst = 0.0f64;
        for k in 0..self.order.len() {
            let i = self.order[k];
            let g = self.gradient(i);
            let b = self.beta[i];
            worst = worst.max(violation(b, g));
            if self.diag[i] == 0.0 {
                continue;
            }
            let nb = (b + 2.0 * self.lambda * g / self.diag[i]).clamp(0.0, 1.0);
            let step = nb - b;
            if step != 0.0 {
                self.beta[i] = nb;
                let c = step * f64::from(self.data.labels[i]) * self.scale / (2.0 * self.lambda);
                for (a, x) in self.a.iter_mut().zip(self.data.row(i)) {
                    *a += c * x;
                }
            }
        }
        self.epochs += 1;
        if self.epochs.is_multiple_of(REFRESH_EVERY) {
            self.refresh();
        }
        worst
    }

    /// Recompute `a` from `beta` to shed accumulated rounding.
    pub fn refresh(&mut self) {
        self.a.iter_mut().for_each(|a| *a = 0.0);
        for i in 0..self.data.n {
            let b = self.beta[i];
            if b != 0.0 {
                let c = b * f64::from(self.data.labels[i]) * self.scale / (2.0 * self.lambda);
                for (a, x) in self.a.iter_mut().zip(self.data.row(i)) {
                    *a += c * x;
                }
            }
        }
    }

    pub fn max_violation(&self) -> f64 {
        (0..self.data.n)
            .map(|i| violation(self.beta[i], self.gradient(i)))
            .fold(0.0, f64::max)
    }

    pub fn dual_objective(&self) -> f64 {
        let norm2: f64 = self.a.iter().map(|a| a * a).sum();
        self.beta.iter().sum::<f64>() - self.lambda * norm2
    }

    pub fn primal_objective(&self) -> f64 {
        let norm2: f64 = self.a.iter().map(|a| a * a).sum();
        let hinge: f64 = (0..self.data.n).map(|i| self.gradient(i).max(0.0)).sum();
        hinge + self.lambda * norm2
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    pub fn finish(mut self, tol: f64, status: FitStatus) -> SvmFit {
        self.refresh();
        let grads: Vec<f64> = (0..self.data.n).map(|i| self.gradient(i)).collect();
        let kkt = grads
            .iter()
            .zip(&self.beta)
            .map(|(&g, &b)| violation(b, g))
            .fold(0.0, f64::max);
        let primal_objective = self.primal_objective();
        let dual_objective = self.dual_objective();
        SvmFit {
            margins: grads.iter().map(|g| 1.0 - g).collect(),
            coefficients: self.a,
            duals: self.beta,
            primal_objective,
            dual_objective,
            gap: primal_objective - dual_objective,
            epochs: self.epochs,
            kkt_violation: kkt,
            tol,
            lambda: self.lambda,
            status,
        }
    }
}

/// Solve the SVM to KKT accuracy `tol`. Running out of epochs is not an
/// error; the fit comes back with [`FitStatus::MaxEpochs`].
pub fn fit_svm(data: &Dataset, lambda: f64, tol: f64, max_epochs: usize) -> Result<SvmFit> {
    ensure_positive("tol", tol)?;
    let mut solver = DualCoordinateAscent::new(data, lambda)?;
    while solver.epochs() < max_epochs {
        if solver.epoch() <= tol {
            solver.refresh();
            if solver.max_violation() <= tol {
                return Ok(solver.finish(tol, FitStatus::Converged));
            }
        }
    }
    solver.refresh();
    let status = if solver.max_violation() <= tol {
        FitStatus::Converged
    } else {
        FitStatus::MaxEpochs
    };
    Ok(solver.finish(tol, status))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCount {
    /// Samples with a dual variable strictly inside `(eps, 1 - eps)`.
    pub count: usize,
    /// Samples with `|L_i - 1| <= 1e3 tol`.
    pub primal_band: usize,
    /// Set when the two criteria disagree by more than 1% of `n`.
    pub warning: Option<String>,
}

/// Number of samples on the margin boundary `L_i = 1`.
pub fn count_boundary(fit: &SvmFit, eps_dual: f64) -> Result<BoundaryCount> {
    if !fit.converged() {
        return Err(Error::NoSolution("boundary count needs a converged fit".into()));
    }
    if !(0.0..0.5).contains(&eps_dual) {
        return Err(Error::InvalidParameter(format!("eps_dual must be in [0, 0.5), got {eps_dual}")));
    }
    let count = fit.duals.iter().filter(|&&b| b > eps_dual && b < 1.0 - eps_dual).count();
    let band = 1e3 * fit.tol;
    let primal_band = fit.margins.iter().filter(|&&l| (l - 1.0).abs() <= band).count();
    let n = fit.duals.len();
    let warning = (count.abs_diff(primal_band) as f64 > 0.01 * n as f64).then(|| {
        format!("dual-interior count {count} and primal band count {primal_band} disagree by more than 1% of n={n}")
    });
    Ok(BoundaryCount {
        count,
        primal_band,
        warning,
    })
}
