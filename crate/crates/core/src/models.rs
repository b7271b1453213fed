//! Label models and the law of the signal variable `V = y a0'x / sqrt(p)`.
//!
//! With `P(y = 1 | x) = l(a0'x / sqrt(p))` and `U = a0'x / sqrt(p) ~ N(0, 1)`,
//! `V` has density `phi(v) w(v)` where `w(v) = l(v) + 1 - l(-v)`. Every
//! expectation the state equations need is an expectation over this law, so
//! models are described by their weight `w` and integrated with a Gauss rule
//! built for the measure `phi(v) w(v) dv`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{ensure_positive, Error, Result};
use crate::gauss::phi;

pub const DEFAULT_NODES: usize = 200;

/// Half-width of the discretization window. `phi(38) ~ 1e-314`.
const WINDOW: f64 = 38.0;
const PANEL_WIDTH: f64 = 0.2;
const PANEL_POINTS: usize = 20;

pub type WeightFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum ModelKind {
    /// Labels independent of features, `l = 1/2`.
    GlobalNull,
    /// `l(u) = 1 / (1 + exp(-c u))`.
    Logistic(f64),
    /// `y = sign(a0'x)`.
    Indicator,
    /// Weight `w(v)` given directly. The label probability used for sampling
    /// is `w(v) / 2`, which reproduces `w` whenever `w(v) + w(-v) = 2`.
    CustomWeight(WeightFn),
}

impl fmt::Debug for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::GlobalNull => write!(f, "GlobalNull"),
            ModelKind::Logistic(c) => write!(f, "Logistic({c})"),
            ModelKind::Indicator => write!(f, "Indicator"),
            ModelKind::CustomWeight(_) => write!(f, "CustomWeight(..)"),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::GlobalNull => write!(f, "null"),
            ModelKind::Logistic(c) => write!(f, "logistic:{c}"),
            ModelKind::Indicator => write!(f, "indicator"),
            ModelKind::CustomWeight(_) => write!(f, "custom"),
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "null" => return Ok(ModelKind::GlobalNull),
            "indicator" => return Ok(ModelKind::Indicator),
            _ => {}
        }
        if let Some(c) = s.strip_prefix("logistic:") {
            let c: f64 = c
                .parse()
                .map_err(|_| Error::InvalidModel(format!("bad logistic scale in {s:?}")))?;
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::InvalidModel(format!("logistic scale must be > 0, got {c}")));
            }
            return Ok(ModelKind::Logistic(c));
        }
        Err(Error::InvalidModel(format!(
            "unknown model {s:?}; expected null, logistic:<c> or indicator"
        )))
    }
}

impl ModelKind {
    /// `w(v) = l(v) + 1 - l(-v)`, always in `[0, 2]`.
    pub fn weight(&self, v: f64) -> f64 {
        match self {
            ModelKind::GlobalNull => 1.0,
            ModelKind::Logistic(c) => 2.0 * logistic(c * v),
            ModelKind::Indicator => {
                if v >= 0.0 {
                    2.0
                } else {
                    0.0
                }
            }
            ModelKind::CustomWeight(w) => w(v),
        }
    }

    /// `P(y = 1 | a0'x / sqrt(p) = u)`.
    pub fn label_prob(&self, u: f64) -> f64 {
        match self {
            ModelKind::GlobalNull => 0.5,
            ModelKind::Logistic(c) => logistic(c * u),
            ModelKind::Indicator => {
                if u >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ModelKind::CustomWeight(w) => (0.5 * w(u)).clamp(0.0, 1.0),
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, ModelKind::GlobalNull)
    }

    /// Whether `V >= 0` almost surely.
    pub fn is_nonnegative(&self) -> bool {
        matches!(self, ModelKind::Indicator)
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A label model together with the aspect ratio `delta = p / n` and the
/// ridge penalty `lambda`.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub delta: f64,
    pub lambda: f64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, delta: f64, lambda: f64) -> Result<Self> {
        ensure_positive("delta", delta)?;
        ensure_positive("lambda", lambda)?;
        if let ModelKind::Logistic(c) = kind {
            ensure_positive("logistic scale", c)?;
        }
        Ok(ModelSpec { kind, delta, lambda })
    }

    pub fn null(delta: f64, lambda: f64) -> Result<Self> {
        Self::new(ModelKind::GlobalNull, delta, lambda)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.kind.clone(), self.delta, lambda)
    }
}

/// Density of `V` at `v`.
pub fn v_density(model: &ModelSpec, v: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::NonFinite("v_density argument"));
    }
    Ok(phi(v) * model.kind.weight(v))
}

/// Nodes and probability weights representing the law of `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct VQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl VQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `E[g(V)]`.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        self.iter().map(|(v, w)| w * g(v)).sum()
    }

    /// The single-node rule `V = 0`, used when only `alpha V = 0` matters.
    pub fn point_mass_at_zero() -> Self {
        VQuadrature {
            nodes: vec![0.0],
            weights: vec![1.0],
        }
    }
}

/// Gauss rule with `n_nodes` nodes for the law of `V` under `model`.
///
/// The null model uses the Hermite recurrence directly. Any other model gets
/// its recurrence from a discretized Stieltjes procedure on a fine composite
/// Gauss-Legendre grid, split at zero so the indicator weight's jump sits on
/// a panel edge.
pub fn v_quadrature(model: &ModelSpec, n_nodes: usize) -> Result<VQuadrature> {
    rule_for_kind(&model.kind, n_nodes)
}

pub(crate) fn rule_for_kind(kind: &ModelKind, n_nodes: usize) -> Result<VQuadrature> {
    if n_nodes < 8 {
        return Err(Error::InvalidParameter(format!(
            "need at least 8 quadrature nodes, got {n_nodes}"
        )));
    }
    let (diag, offdiag) = match kind {
        ModelKind::GlobalNull => {
            let off = (1..n_nodes).map(|k| (k as f64).sqrt()).collect();
            (vec![0.0; n_nodes], off)
        }
        _ => {
            let lo = if kind.is_nonnegative() { 0.0 } else { -WINDOW };
            let (xs, mut ws) = discretize(lo, WINDOW)?;
            for (w, &x) in ws.iter_mut().zip(&xs) {
                let weight = kind.weight(x);
                if !(0.0..=2.0).contains(&weight) || weight.is_nan() {
                    return Err(Error::InvalidModel(format!(
                        "weight must lie in [0, 2], got w({x}) = {weight}"
                    )));
                }
                *w *= phi(x) * weight;
            }
            let mass: f64 = ws.iter().sum();
            if (mass - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidModel(format!(
                    "phi(v) w(v) integrates to {mass}, not 1"
                )));
            }
            stieltjes(&xs, &ws, n_nodes)
        }
    };
    let (mut nodes, mut weights) = golub_welsch(&diag, &offdiag);
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    if kind.is_nonnegative() {
        // Nodes of a Gauss rule lie inside the support; clip rounding noise.
        nodes.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    Ok(VQuadrature { nodes, weights })
}

/// Composite Gauss-Legendre discretization of `[lo, hi]` with zero as a
/// panel edge whenever it lies inside.
fn discretize(lo: f64, hi: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (gx, gw) = gauss_legendre(PANEL_POINTS);
    let mut edges = Vec::new();
    let panels = ((hi - lo) / PANEL_WIDTH).round() as usize;
    for k in 0..=panels {
        edges.push(lo + (hi - lo) * k as f64 / panels as f64);
    }
    if lo < 0.0 && hi > 0.0 && !edges.contains(&0.0) {
        edges.push(0.0);
        edges.sort_by(f64::total_cmp);
    }
    let mut xs = Vec::with_capacity(edges.len() * PANEL_POINTS);
    let mut ws = Vec::with_capacity(edges.len() * PANEL_POINTS);
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (x, w) in gx.iter().zip(&gw) {
            xs.push(mid + half * x);
            ws.push(half * w);
        }
    }
    Ok((xs, ws))
}

/// Gauss-Legendre rule on `[-1, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let off: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    let (x, w) = golub_welsch(&vec![0.0; n], &off);
    let total: f64 = w.iter().sum();
    (x, w.into_iter().map(|w| 2.0 * w / total).collect())
}

/// Recurrence coefficients of the orthonormal polynomials of a discrete
/// measure. Returns the Jacobi matrix diagonal and off-diagonal.
fn stieltjes(xs: &[f64], ws: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    let mass: f64 = ws.iter().sum();
    let scale = mass.sqrt();
    // Orthonormal values of the previous and current polynomial on the grid.
    let mut prev = vec![0.0; xs.len()];
    let mut cur = vec![1.0 / scale; xs.len()];
    let mut b_prev = 0.0;
    for k in 0..n {
        let a: f64 = xs
            .iter()
            .zip(&cur)
            .zip(ws)
            .map(|((x, p), w)| w * x * p * p)
            .sum();
        diag.push(a);
        if k + 1 == n {
            break;
        }
        let mut next: Vec<f64> = xs
            .iter()
            .zip(&cur)
            .zip(&prev)
            .map(|((x, p), q)| (x - a) * p - b_prev * q)
            .collect();
        let norm: f64 = next
            .iter()
            .zip(ws)
            .map(|(p, w)| w * p * p)
            .sum::<f64>()
            .sqrt();
        next.iter_mut().for_each(|p| *p /= norm);
        off.push(norm);
        b_prev = norm;
        prev = cur;
        cur = next;
    }
    (diag, off)
}

/// Nodes (ascending) and unnormalized weights `v0^2` from a Jacobi matrix.
fn golub_welsch(diag: &[f64], off: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jacobi[(i, i)] = diag[i];
        if i + 1 < n {
            jacobi[(i, i + 1)] = off[i];
            jacobi[(i + 1, i)] = off[i];
        }
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| (eig.eigenvalues[j], eig.eigenvectors[(0, j)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}
