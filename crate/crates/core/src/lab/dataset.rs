use crate::error::{Error, Result};
use crate::models::ModelKind;

use super::rng::{SeedStream, Stream};

/// `n` labelled samples in dimension `p`, features stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n: usize,
    pub p: usize,
    pub features: Vec<f64>,
    pub labels: Vec<i8>,
    /// Ground-truth direction with `|a0|^2 = p`; absent under the null.
    pub a0: Option<Vec<f64>>,
    pub seed: u64,
}

impl Dataset {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    pub fn delta(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    /// Checks shapes, label values and the norm of `a0`.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::DimensionMismatch("empty dataset".into()));
        }
        if self.features.len() != self.n * self.p || self.labels.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "{} features and {} labels for n={}, p={}",
                self.features.len(),
                self.labels.len(),
                self.n,
                self.p
            )));
        }
        if let Some(&bad) = self.labels.iter().find(|&&y| y != 1 && y != -1) {
            return Err(Error::Format(format!("label {bad} is not +1 or -1")));
        }
        if let Some(a0) = &self.a0 {
            if a0.len() != self.p {
                return Err(Error::DimensionMismatch(format!("a0 has length {}, p = {}", a0.len(), self.p)));
            }
            let norm2: f64 = a0.iter().map(|x| x * x).sum();
            if (norm2 - self.p as f64).abs() > 1e-8 * self.p as f64 {
                return Err(Error::Format(format!("|a0|^2 = {norm2}, expected {}", self.p)));
            }
        }
        Ok(())
    }
}

/// Uniform direction on the sphere of radius `sqrt(p)`.
fn direction(p: usize, seed: u64) -> Vec<f64> {
    let mut rng = SeedStream::new(seed, Stream::Direction);
    loop {
        let mut a: Vec<f64> = (0..p).map(|_| rng.normal()).collect();
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            let scale = (p as f64).sqrt() / norm;
            a.iter_mut().for_each(|x| *x *= scale);
            return a;
        }
    }
}

fn draw(kind: &ModelKind, a0: Option<&[f64]>, n: usize, p: usize, features: &mut SeedStream, labels: &mut SeedStream) -> (Vec<f64>, Vec<i8>) {
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    let root_p = (p as f64).sqrt();
    for _ in 0..n {
        let start = x.len();
        x.extend((0..p).map(|_| features.normal()));
        let prob = match a0 {
            Some(a0) => {
                let u = x[start..].iter().zip(a0).map(|(xi, ai)| xi * ai).sum::<f64>() / root_p;
                kind.label_prob(u)
            }
            None => 0.5,
        };
        y.push(if labels.uniform() < prob { 1 } else { -1 });
    }
    (x, y)
}

/// Draw `n` samples in dimension `p` from `kind`.
pub fn generate_dataset(kind: &ModelKind, n: usize, p: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidParameter(format!("need n, p >= 1, got n={n}, p={p}")));
    }
    let a0 = (!kind.is_null()).then(|| direction(p, seed));
    let mut fx = SeedStream::new(seed, Stream::Features);
    let mut fy = SeedStream::new(seed, Stream::Labels);
    let (features, labels) = draw(kind, a0.as_deref(), n, p, &mut fx, &mut fy);
    Ok(Dataset {
        n,
        p,
        features,
        labels,
        a0,
        seed,
    })
}

/// Fresh samples from the same model and direction as `train`, drawn from
/// the dedicated test stream of the training seed.
pub fn generate_test_set(kind: &ModelKind, train: &Dataset, n_test: usize) -> Result<Dataset> {
    if n_test == 0 {
        return Err(Error::InvalidParameter("n_test must be >= 1".into()));
    }
    let mut rng = SeedStream::new(train.seed, Stream::Test);
    let mut labels_rng = SeedStream::new(train.seed, Stream::TestLabels);
    let (features, labels) = draw(kind, train.a0.as_deref(), n_test, train.p, &mut rng, &mut labels_rng);
    Ok(Dataset {
        n: n_test,
        p: train.p,
        features,
        labels,
        a0: train.a0.clone(),
        seed: train.seed,
    })
}
