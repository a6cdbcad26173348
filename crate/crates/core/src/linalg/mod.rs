//! Numerical building blocks: quadrature nodes, weighted operator norms,
//! sparse storage and the symmetric eigensolvers used by the mesh pathway.

pub mod eigen;
pub mod sparse;

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes in descending order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = if (x * x - 1.0).abs() < 1e-300 {
        // P_n'(±1) = (±1)^{n+1} n(n+1)/2
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, d)
}

/// Least-squares slope of `ys` against `xs`.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    regression_slope(&lx, &ly)
}

#[derive(Clone, Debug)]
pub struct PowerIterationOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerIterationOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_iter: 20_000,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

fn weighted_norm(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(wi, xi)| wi * xi * xi).sum::<f64>().sqrt()
}

/// Largest singular value of a real operator with respect to the inner
/// product `<x, y> = sum_i w_i x_i y_i`.
///
/// `adjoint` must be the adjoint in that inner product, i.e. `W^{-1} A^T W`
/// for a matrix `A`.
pub fn weighted_operator_norm<F, G>(
    weights: &[f64],
    apply: F,
    adjoint: G,
    opts: &PowerIterationOptions,
) -> Result<NormEstimate>
where
    F: Fn(&[f64]) -> Vec<f64>,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let n = weights.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nx = weighted_norm(weights, &x);
    x.iter_mut().for_each(|v| *v /= nx);

    let mut history = Vec::new();
    let mut prev_change = f64::INFINITY;
    let mut prev = 0.0;
    for it in 0..opts.max_iter {
        let y = apply(&x);
        let sigma = weighted_norm(weights, &y);
        history.push(sigma);
        if sigma == 0.0 {
            return Ok(NormEstimate { value: 0.0, iterations: it + 1, history });
        }
        let z = adjoint(&y);
        let nz = weighted_norm(weights, &z);
        if nz == 0.0 {
            return Ok(NormEstimate { value: sigma, iterations: it + 1, history });
        }
        x = z.into_iter().map(|v| v / nz).collect();

        let change = (sigma - prev).abs();
        if it > 2 && change <= opts.rel_tol * sigma {
            // remaining error of a geometric sequence with ratio rho
            let rho = (change / prev_change).min(0.999_999);
            if change * rho / (1.0 - rho) <= opts.rel_tol * sigma {
                // sqrt(|A*A x|) is the sharper estimate once converged
                return Ok(NormEstimate { value: nz.sqrt().max(sigma), iterations: it + 1, history });
            }
        }
        if change > 0.0 {
            prev_change = change;
        }
        prev = sigma;
    }
    let residual = history
        .windows(2)
        .last()
        .map(|w| (w[1] - w[0]).abs() / w[1].max(f64::MIN_POSITIVE))
        .unwrap_or(f64::NAN);
    Err(Error::NonConvergence {
        solver: "power iteration",
        iterations: opts.max_iter,
        residual,
        history,
    })
}

/// Weighted operator norm of a dense row-major `n x n` matrix.
pub fn dense_weighted_norm(
    matrix: &nalgebra::DMatrix<f64>,
    weights: &[f64],
    opts: &PowerIterationOptions,
) -> Result<NormEstimate> {
    let n = weights.len();
    let apply = |x: &[f64]| -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(x);
        (matrix * v).as_slice().to_vec()
    };
    let adjoint = |y: &[f64]| -> Vec<f64> {
        let wy = nalgebra::DVector::from_iterator(n, y.iter().zip(weights).map(|(a, w)| a * w));
        let t = matrix.tr_mul(&wy);
        t.iter().zip(weights).map(|(a, w)| a / w).collect()
    };
    weighted_operator_norm(weights, apply, adjoint, opts)
}
