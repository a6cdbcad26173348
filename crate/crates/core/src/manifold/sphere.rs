use super::{Geometry, Point, SpectralManifold, ANALYTIC_CLUSTER_TOL};
use crate::error::{Error, Result};
use crate::linalg::gauss_legendre;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Gauss–Legendre nodes in `cos θ` times a uniform longitude grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SphereGrid {
    pub n_lat: usize,
    pub n_lon: usize,
}

impl SphereGrid {
    /// Smallest grid integrating products of degree-`l_max` harmonics exactly.
    pub fn gauss(l_max: usize) -> Self {
        Self { n_lat: l_max + 1, n_lon: 2 * l_max + 1 }
    }

    /// `factor` times denser than [`SphereGrid::gauss`] in each direction.
    pub fn oversampled(l_max: usize, factor: usize) -> Self {
        let g = Self::gauss(l_max);
        Self { n_lat: g.n_lat * factor, n_lon: g.n_lon * factor }
    }
}

/// Unit sphere with real spherical harmonics up to degree `l_max`.
pub fn build_sphere(l_max: usize, grid: SphereGrid) -> Result<SpectralManifold> {
    let need = SphereGrid::gauss(l_max);
    if grid.n_lat < need.n_lat || grid.n_lon < need.n_lon {
        return Err(Error::InvalidConfig(format!(
            "sphere grid {}x{} cannot integrate degree {} products exactly (need at least {}x{})",
            grid.n_lat,
            grid.n_lon,
            2 * l_max,
            need.n_lat,
            need.n_lon
        )));
    }
    let (nodes, gw) = gauss_legendre(grid.n_lat);
    let n = grid.n_lat * grid.n_lon;
    let mut points = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let dphi = 2.0 * PI / grid.n_lon as f64;
    for (x, w) in nodes.iter().zip(&gw) {
        let s = (1.0 - x * x).max(0.0).sqrt();
        for b in 0..grid.n_lon {
            let phi = dphi * b as f64;
            points.push([s * phi.cos(), s * phi.sin(), *x]);
            weights.push(w * dphi);
        }
    }
    let mut degrees = Vec::new();
    let mut eigenvalues = Vec::new();
    for l in 0..=l_max {
        for m in -(l as i64)..=(l as i64) {
            degrees.push((l, m));
            eigenvalues.push((l * (l + 1)) as f64);
        }
    }
    let k = degrees.len();
    let mut table = vec![0.0; k * n];
    for (i, p) in points.iter().enumerate() {
        for (j, v) in eval(l_max, &degrees, p).into_iter().enumerate() {
            table[j * n + i] = v;
        }
    }
    Ok(SpectralManifold::assemble(
        2,
        Geometry::Sphere { l_max, n_lat: grid.n_lat, n_lon: grid.n_lon, degrees },
        points,
        weights,
        eigenvalues,
        table,
        ANALYTIC_CLUSTER_TOL,
    ))
}

/// Fully normalised associated Legendre values `p̄_lm(cos θ)`, indexed
/// `[l][m]`, normalised so that `p̄_lm e^{imφ}` has unit L² norm.
fn legendre_table(l_max: usize, x: f64, s: f64) -> Vec<Vec<f64>> {
    let mut p = vec![vec![0.0; l_max + 1]; l_max + 1];
    p[0][0] = (0.25 / PI).sqrt();
    for m in 1..=l_max {
        let mf = m as f64;
        p[m][m] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * p[m - 1][m - 1];
    }
    for m in 0..l_max {
        p[m + 1][m] = (2.0 * m as f64 + 3.0).sqrt() * x * p[m][m];
    }
    for m in 0..=l_max {
        for l in (m + 2)..=l_max {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[l][m] = a * (x * p[l - 1][m] - b * p[l - 2][m]);
        }
    }
    p
}

pub(super) fn eval(l_max: usize, degrees: &[(usize, i64)], p: &Point) -> Vec<f64> {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let x = (p[2] / r).clamp(-1.0, 1.0);
    let s = (p[0] * p[0] + p[1] * p[1]).sqrt() / r;
    let phi = p[1].atan2(p[0]);
    let table = legendre_table(l_max, x, s);
    degrees
        .iter()
        .map(|&(l, m)| {
            let am = m.unsigned_abs() as usize;
            let base = table[l][am];
            match m.signum() {
                0 => base,
                1 => std::f64::consts::SQRT_2 * base * (am as f64 * phi).cos(),
                _ => std::f64::consts::SQRT_2 * base * (am as f64 * phi).sin(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplicities_are_odd_integers() {
        let m = build_sphere(2, SphereGrid::gauss(2)).unwrap();
        assert_eq!(m.spectrum().uniques(), &[0.0, 2.0, 6.0]);
        assert_eq!(m.spectrum().multiplicities(), &[1, 3, 5]);
    }

    #[test]
    fn harmonics_are_orthonormal_under_gauss_grid() {
        for l_max in [4, 8, 12] {
            let m = build_sphere(l_max, SphereGrid::gauss(l_max)).unwrap();
            assert!(m.orthonormality_residual() <= 1e-10, "l_max={l_max}");
        }
    }

    #[test]
    fn area_is_four_pi() {
        let m = build_sphere(5, SphereGrid::gauss(5)).unwrap();
        assert!((m.volume() - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        assert!(build_sphere(4, SphereGrid { n_lat: 4, n_lon: 9 }).is_err());
        assert!(build_sphere(4, SphereGrid { n_lat: 5, n_lon: 8 }).is_err());
    }

    #[test]
    fn antipodes_are_pi_apart() {
        let a = [0.3, -0.4, (1.0f64 - 0.25).sqrt()];
        let b = [-a[0], -a[1], -a[2]];
        assert!((super::super::great_circle(&a, &b) - PI).abs() < 1e-15);
    }

    #[test]
    fn low_degree_closed_forms() {
        // Y_1^0 = sqrt(3/4π) cos θ and the l = 2, m = 0 harmonic
        let p = [0.36, 0.48, 0.8];
        let v = eval(2, &[(1, 0), (2, 0)], &p);
        assert!((v[0] - (0.75 / PI).sqrt() * 0.8).abs() < 1e-14);
        let y20 = (5.0 / (16.0 * PI)).sqrt() * (3.0 * 0.64 - 1.0);
        assert!((v[1] - y20).abs() < 1e-14);
    }
}
