//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use svm_asym::lab::Dataset;

const XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Kronrod estimate and its difference from the embedded Gauss rule.
fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let s = f(c - h * XK[j]) + f(c + h * XK[j]);
        k += WK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, (k - g).abs() * h)
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (k, err) = kronrod(f, a, b);
    if err <= tol || depth == 0 || (b - a).abs() < 1e-14 {
        return k;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth - 1) + adapt(f, m, b, 0.5 * tol, depth - 1)
}

/// Adaptive Gauss-Kronrod integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    adapt(&f, a, b, tol, 50)
}

/// `phi` written out independently of the library.
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Truncated moments of N(0, 1) on `[a, b]` by adaptive quadrature.
/// Infinite endpoints are clipped at +-40.
pub fn moments_by_quadrature(a: f64, b: f64) -> [f64; 3] {
    let (a, b) = (a.max(-40.0), b.min(40.0));
    if a >= b {
        return [0.0; 3];
    }
    std::array::from_fn(|k| integrate(|z| z.powi(k as i32) * pdf(z), a, b, 1e-15))
}

/// Primal objective `sum_i (1 - y_i x_i'a / sqrt(p))_+ + lambda |a|^2`.
pub fn primal_objective(data: &Dataset, lambda: f64, a: &[f64]) -> f64 {
    let rp = (data.p as f64).sqrt();
    let hinge: f64 = (0..data.n)
        .map(|i| {
            let s: f64 = data.row(i).iter().zip(a).map(|(x, c)| x * c).sum();
            (1.0 - f64::from(data.labels[i]) * s / rp).max(0.0)
        })
        .sum();
    hinge + lambda * a.iter().map(|c| c * c).sum::<f64>()
}

/// Accelerated projected gradient (FISTA with adaptive restart) on the box
/// dual. Returns the primal minimizer and the final duality gap.
pub fn fista_oracle(data: &Dataset, lambda: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let (n, p) = (data.n, data.p);
    let rp = (p as f64).sqrt();
    // z_i = y_i x_i / sqrt(p); a(beta) = Z'beta / (2 lambda)
    let z: Vec<Vec<f64>> = (0..n)
        .map(|i| data.row(i).iter().map(|x| f64::from(data.labels[i]) * x / rp).collect())
        .collect();
    let coef = |beta: &[f64]| -> Vec<f64> {
        let mut a = vec![0.0; p];
        for (b, zi) in beta.iter().zip(&z) {
            for (aj, zij) in a.iter_mut().zip(zi) {
                *aj += b * zij / (2.0 * lambda);
            }
        }
        a
    };
    let dual = |beta: &[f64]| -> f64 {
        let a = coef(beta);
        beta.iter().sum::<f64>() - lambda * a.iter().map(|c| c * c).sum::<f64>()
    };
    // Lipschitz constant of the dual gradient: |Z|_2^2 / (2 lambda) <= trace / (2 lambda)
    let lip = z.iter().map(|zi| zi.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / (2.0 * lambda);
    let mut beta = vec![0.0; n];
    let mut y = beta.clone();
    let mut t = 1.0f64;
    let mut last = dual(&beta);
    let mut gap = f64::INFINITY;
    for it in 0..max_iter {
        let a = coef(&y);
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let g = 1.0 - z[i].iter().zip(&a).map(|(u, v)| u * v).sum::<f64>();
                (y[i] + g / lip).clamp(0.0, 1.0)
            })
            .collect();
        let d = dual(&next);
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if d < last && t > 1.0 {
            // restart momentum; a plain step from beta is accepted as is
            y = beta.clone();
            t = 1.0;
            continue;
        }
        y = next.iter().zip(&beta).map(|(b, o)| b + (t - 1.0) / tn * (b - o)).collect();
        beta = next;
        t = tn;
        last = d;
        if it % 50 == 0 {
            gap = primal_objective(data, lambda, &coef(&beta)) - d;
            if gap <= 1e-11 {
                break;
            }
        }
    }
    let a = coef(&beta);
    gap = gap.min(primal_objective(data, lambda, &a) - dual(&beta));
    (a, gap)
}
