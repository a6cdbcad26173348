//! Compressed sparse row storage and an envelope (skyline) Cholesky
//! factorisation under reverse Cuthill–McKee ordering.

use crate::error::{Error, Result};
use std::collections::VecDeque;

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Assemble from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            rows[i].push((j, v));
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows.iter_mut() {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for &(j, v) in row.iter() {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            indptr.push(indices.len());
        }
        Self { n, indptr, indices, values }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|e| e.0 == j).map(|e| e.1).unwrap_or(0.0)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `self + shift * diag(d)`.
    pub fn add_diagonal(&self, shift: f64, d: &[f64]) -> Self {
        let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(self.values.len() + self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                trip.push((i, j, v));
            }
            trip.push((i, i, shift * d[i]));
        }
        Self::from_triplets(self.n, &trip)
    }
}

/// Reverse Cuthill–McKee ordering; `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n;
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).filter(|e| e.0 != i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        // start each component from a pseudo-peripheral node
        let seed = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| degree[i]).unwrap();
        let start = pseudo_peripheral(a, seed, &visited);
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = a.row(v).map(|e| e.0).filter(|&j| !visited[j]).collect();
            nb.sort_by_key(|&j| (degree[j], j));
            for j in nb {
                if !visited[j] {
                    visited[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(a: &CsrMatrix, start: usize, blocked: &[bool]) -> Vec<Option<usize>> {
    let mut level = vec![None; a.n];
    let mut queue = VecDeque::new();
    level[start] = Some(0);
    queue.push_back(start);
    while let Some(v) = queue.pop_front() {
        let lv = level[v].unwrap();
        for (j, _) in a.row(v) {
            if !blocked[j] && level[j].is_none() {
                level[j] = Some(lv + 1);
                queue.push_back(j);
            }
        }
    }
    level
}

fn pseudo_peripheral(a: &CsrMatrix, seed: usize, blocked: &[bool]) -> usize {
    let mut current = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let level = bfs_levels(a, current, blocked);
        let (far, depth) = level
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.map(|l| (i, l)))
            .max_by_key(|&(i, l)| (l, std::cmp::Reverse(i)))
            .unwrap();
        if depth <= ecc {
            break;
        }
        ecc = depth;
        current = far;
    }
    current
}

/// Cholesky factor `L` of `P A P^T` stored row-wise over each row's envelope.
#[derive(Clone, Debug)]
pub struct EnvelopeCholesky {
    n: usize,
    perm: Vec<usize>,
    first: Vec<usize>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            first[new] = a.row(old).map(|(j, _)| inv[j]).min().unwrap_or(new).min(new);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            offsets.push(offsets[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; offsets[n]];
        for (new, &old) in perm.iter().enumerate() {
            for (j, v) in a.row(old) {
                let jn = inv[j];
                if jn <= new {
                    data[offsets[new] + jn - first[new]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut s = data[offsets[i] + j - fi];
                let ri = offsets[i] - fi;
                let rj = offsets[j] - fj;
                for k in lo..j {
                    s -= data[ri + k] * data[rj + k];
                }
                if j == i {
                    if s <= 0.0 {
                        return Err(Error::InvalidConfig(
                            "matrix is not positive definite".into(),
                        ));
                    }
                    data[ri + i] = s.sqrt();
                } else {
                    data[ri + j] = s / data[rj + j];
                }
            }
        }
        Ok(Self { n, perm, first, offsets, data })
    }

    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = (0..n).map(|i| b[self.perm[i]]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let ri = self.offsets[i] - fi;
            let mut s = y[i];
            for k in fi..i {
                s -= self.data[ri + k] * y[k];
            }
            y[i] = s / self.data[ri + i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let ri = self.offsets[i] - fi;
            y[i] /= self.data[ri + i];
            let yi = y[i];
            for k in fi..i {
                y[k] -= self.data[ri + k] * yi;
            }
        }
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[self.perm[i]] = y[i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_laplacian(side: usize) -> CsrMatrix {
        let n = side * side;
        let mut t = Vec::new();
        for r in 0..side {
            for c in 0..side {
                let i = r * side + c;
                t.push((i, i, 4.1));
                if c + 1 < side {
                    t.push((i, i + 1, -1.0));
                    t.push((i + 1, i, -1.0));
                }
                if r + 1 < side {
                    t.push((i, i + side, -1.0));
                    t.push((i + side, i, -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(n, &t)
    }

    #[test]
    fn envelope_cholesky_solves_spd_system() {
        let a = grid_laplacian(9);
        let x_true: Vec<f64> = (0..a.n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.matvec(&x_true);
        let chol = EnvelopeCholesky::factor(&a).unwrap();
        let x = chol.solve(&b);
        let err = x.iter().zip(&x_true).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn rcm_is_a_permutation_and_shrinks_envelope() {
        let a = grid_laplacian(12);
        let p = reverse_cuthill_mckee(&a);
        let mut seen = p.clone();
        seen.sort();
        assert_eq!(seen, (0..a.n).collect::<Vec<_>>());
        let chol = EnvelopeCholesky::factor(&a).unwrap();
        assert!(chol.envelope_size() < a.n * a.n / 4);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(EnvelopeCholesky::factor(&a).is_err());
    }
}
