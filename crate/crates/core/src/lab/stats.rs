//! Kolmogorov-Smirnov distances against continuous and atom-carrying CDFs.

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `sup_x |F_n(x) - F(x)|` for a continuous `F`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let xs = sorted(sample);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |acc, (i, &x)| {
        let f = cdf(x);
        acc.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// KS distance against a CDF with an atom, evaluated only at sample points
/// outside `skip`. `cdf` is right-continuous and `cdf_left` its left limit.
pub fn ks_statistic_excluding<F, G, S>(sample: &[f64], cdf: F, cdf_left: G, skip: S) -> f64
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
    S: Fn(f64) -> bool,
{
    let xs = sorted(sample);
    let n = xs.len() as f64;
    let mut worst = 0.0f64;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        if !skip(x) {
            worst = worst
                .max((j as f64 / n - cdf(x)).abs())
                .max((i as f64 / n - cdf_left(x)).abs());
        }
        i = j;
    }
    worst
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}
