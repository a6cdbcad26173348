//! Generalized symmetric eigenproblems `L x = λ M x` with diagonal `M`.

use super::sparse::{CsrMatrix, EnvelopeCholesky};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Eigenpairs sorted ascending; `vectors[k]` is M-orthonormal.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Lowest `k` eigenpairs by a dense decomposition of `M^{-1/2} L M^{-1/2}`.
pub fn dense_generalized(l: &CsrMatrix, mass: &[f64], k: usize) -> Result<EigenPairs> {
    let n = l.n;
    check_inputs(n, mass, k)?;
    let s: Vec<f64> = mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for (j, v) in l.row(i) {
            a[(i, j)] += v * s[i] * s[j];
        }
    }
    // enforce exact symmetry before the decomposition
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        values.push(eig.eigenvalues[idx]);
        let col = eig.eigenvectors.column(idx);
        vectors.push((0..n).map(|i| col[i] * s[i]).collect());
    }
    Ok(EigenPairs { values, vectors })
}

#[derive(Clone, Debug)]
pub struct SubspaceOptions {
    pub shift: Option<f64>,
    pub extra: usize,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SubspaceOptions {
    fn default() -> Self {
        Self { shift: None, extra: 24, rel_tol: 1e-10, max_iter: 500, seed: 7 }
    }
}

/// Lowest `k` eigenpairs by shift-invert subspace iteration with
/// Rayleigh–Ritz projection. The shifted operator `L + σM` is factored once
/// with an envelope Cholesky.
pub fn shift_invert_subspace(
    l: &CsrMatrix,
    mass: &[f64],
    k: usize,
    opts: &SubspaceOptions,
) -> Result<EigenPairs> {
    let n = l.n;
    check_inputs(n, mass, k)?;
    let p = (k + opts.extra.max(k / 2)).min(n);
    let sigma = opts.shift.unwrap_or_else(|| {
        let tl: f64 = (0..n).map(|i| l.get(i, i)).sum();
        let tm: f64 = mass.iter().sum();
        1e-3 * tl / tm
    });
    let chol = EnvelopeCholesky::factor(&l.add_diagonal(sigma, mass))?;
    let d: Vec<f64> = mass.iter().map(|m| m.sqrt()).collect();
    // symmetric operator D (L + σM)^{-1} D, D = M^{1/2}
    let apply = |x: &[f64]| -> Vec<f64> {
        let b: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a * b).collect();
        let y = chol.solve(&b);
        y.iter().zip(&d).map(|(a, b)| a * b).collect()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = DMatrix::<f64>::from_fn(n, p, |_, _| rng.random::<f64>() - 0.5);
    x = orthonormalize(x);
    let mut history = Vec::new();
    for iter in 0..opts.max_iter {
        let mut y = DMatrix::<f64>::zeros(n, p);
        for c in 0..p {
            let col: Vec<f64> = x.column(c).iter().copied().collect();
            y.set_column(c, &DVector::from_vec(apply(&col)));
        }
        let q = orthonormalize(y);
        let mut oq = DMatrix::<f64>::zeros(n, p);
        for c in 0..p {
            let col: Vec<f64> = q.column(c).iter().copied().collect();
            oq.set_column(c, &DVector::from_vec(apply(&col)));
        }
        let h = q.transpose() * &oq;
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let vecs = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);
        let mu: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        x = &q * &vecs;
        let ox = &oq * &vecs;
        let mut worst = 0.0f64;
        for c in 0..k {
            let r = ox.column(c) - x.column(c) * mu[c];
            worst = worst.max(r.norm() / mu[c].abs());
        }
        history.push(worst);
        if worst <= opts.rel_tol {
            let mut values = Vec::with_capacity(k);
            let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
            for c in 0..k {
                let v: Vec<f64> = (0..n).map(|i| x[(i, c)] / d[i]).collect();
                let lv = l.matvec(&v);
                let num: f64 = v.iter().zip(&lv).map(|(a, b)| a * b).sum();
                let den: f64 = v.iter().zip(mass).map(|(a, m)| a * a * m).sum();
                let scale = 1.0 / den.sqrt();
                values.push(num / den);
                vectors.push(v.iter().map(|a| a * scale).collect());
            }
            let mut idx: Vec<usize> = (0..k).collect();
            idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            return Ok(EigenPairs {
                values: idx.iter().map(|&i| values[i]).collect(),
                vectors: idx.iter().map(|&i| vectors[i].clone()).collect(),
            });
        }
        if iter + 1 == opts.max_iter {
            break;
        }
    }
    Err(Error::NonConvergence {
        solver: "shift-invert subspace iteration",
        iterations: opts.max_iter,
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

fn check_inputs(n: usize, mass: &[f64], k: usize) -> Result<()> {
    if mass.len() != n {
        return Err(Error::LengthMismatch { expected: n, found: mass.len() });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!("requested {k} eigenpairs of a size-{n} problem")));
    }
    if mass.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::InvalidConfig("mass matrix must be positive".into()));
    }
    Ok(())
}

fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    let cols = m.ncols();
    let q = m.qr().q();
    q.columns(0, cols).into_owned()
}
