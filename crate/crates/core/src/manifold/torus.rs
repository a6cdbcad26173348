use super::{Geometry, Point, SpectralManifold, ANALYTIC_CLUSTER_TOL};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trig {
    Const,
    Cos,
    Sin,
}

/// One real product eigenfunction `u_{k1}(x1) v_{k2}(x2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TorusMode {
    pub k1: u32,
    pub k2: u32,
    pub t1: Trig,
    pub t2: Trig,
}

impl TorusMode {
    pub fn eigenvalue(&self, r1: f64, r2: f64) -> f64 {
        let a = self.k1 as f64 / r1;
        let b = self.k2 as f64 / r2;
        a * a + b * b
    }
}

fn trig_options(k: u32) -> &'static [Trig] {
    if k == 0 {
        &[Trig::Const]
    } else {
        &[Trig::Cos, Trig::Sin]
    }
}

/// Flat torus `[0, 2πR1) x [0, 2πR2)` on an `n1 x n2` grid. Every mode with
/// eigenvalue at most `(k_max / max(R1, R2))²` is retained, so eigenspaces
/// are never cut.
pub fn build_flat_torus(n1: usize, n2: usize, radii: (f64, f64), k_max: usize) -> Result<SpectralManifold> {
    let (r1, r2) = radii;
    if !(r1 > 0.0 && r2 > 0.0) {
        return Err(Error::InvalidConfig("torus radii must be positive".into()));
    }
    let cutoff = (k_max as f64 / r1.max(r2)).powi(2);
    let slack = 1e-12 * cutoff.max(1.0);
    let max1 = (cutoff.sqrt() * r1 + 1e-9).floor() as u32;
    let max2 = (cutoff.sqrt() * r2 + 1e-9).floor() as u32;
    for (n, m, axis) in [(n1, max1, 1), (n2, max2, 2)] {
        if n < 2 * m as usize + 2 {
            return Err(Error::InvalidConfig(format!(
                "torus axis {axis} with {n} points aliases frequency {m} (need at least {})",
                2 * m + 2
            )));
        }
    }
    let mut modes = Vec::new();
    for k1 in 0..=max1 {
        for k2 in 0..=max2 {
            let probe = TorusMode { k1, k2, t1: Trig::Const, t2: Trig::Const };
            if probe.eigenvalue(r1, r2) > cutoff + slack {
                continue;
            }
            for &t1 in trig_options(k1) {
                for &t2 in trig_options(k2) {
                    modes.push(TorusMode { k1, k2, t1, t2 });
                }
            }
        }
    }
    modes.sort_by(|a, b| a.eigenvalue(r1, r2).total_cmp(&b.eigenvalue(r1, r2)).then(a.cmp(b)));

    let (l1, l2) = (2.0 * PI * r1, 2.0 * PI * r2);
    let mut points = Vec::with_capacity(n1 * n2);
    for a in 0..n1 {
        for b in 0..n2 {
            points.push([l1 * a as f64 / n1 as f64, l2 * b as f64 / n2 as f64, 0.0]);
        }
    }
    let n = points.len();
    let weights = vec![l1 * l2 / n as f64; n];
    let eigenvalues: Vec<f64> = modes.iter().map(|m| m.eigenvalue(r1, r2)).collect();
    let mut table = vec![0.0; modes.len() * n];
    for (i, p) in points.iter().enumerate() {
        for (k, v) in eval(&modes, r1, r2, p).into_iter().enumerate() {
            table[k * n + i] = v;
        }
    }
    Ok(SpectralManifold::assemble(
        2,
        Geometry::Torus { n1, n2, r1, r2, k_max, modes },
        points,
        weights,
        eigenvalues,
        table,
        ANALYTIC_CLUSTER_TOL,
    ))
}

fn factor(t: Trig, k: u32, r: f64, x: f64) -> f64 {
    match t {
        Trig::Const => 1.0 / (2.0 * PI * r).sqrt(),
        Trig::Cos => (k as f64 * x / r).cos() / (PI * r).sqrt(),
        Trig::Sin => (k as f64 * x / r).sin() / (PI * r).sqrt(),
    }
}

pub(super) fn eval(modes: &[TorusMode], r1: f64, r2: f64, p: &Point) -> Vec<f64> {
    modes.iter().map(|m| factor(m.t1, m.k1, r1, p[0]) * factor(m.t2, m.k2, r2, p[1])).collect()
}

fn periodic(d: f64, len: f64) -> f64 {
    let d = d.rem_euclid(len);
    d.min(len - d)
}

pub(super) fn distance(r1: f64, r2: f64, a: &Point, b: &Point) -> f64 {
    let d1 = periodic(a[0] - b[0], 2.0 * PI * r1);
    let d2 = periodic(a[1] - b[1], 2.0 * PI * r2);
    d1.hypot(d2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_torus_first_eigenspace_has_four_modes() {
        let m = build_flat_torus(8, 8, (1.0, 1.0), 2).unwrap();
        assert_eq!(m.spectrum().uniques()[..3], [0.0, 1.0, 2.0]);
        assert_eq!(m.spectrum().multiplicities()[..3], [1, 4, 4]);
    }

    #[test]
    fn anisotropic_torus_separates_axes() {
        let m = build_flat_torus(16, 32, (1.0, 2.0), 4).unwrap();
        let u = m.spectrum().uniques();
        assert!((u[1] - 0.25).abs() < 1e-15);
        let one = m.spectrum().find(1.0, 1e-9).unwrap();
        // (1,0) and (0,2) both land on λ = 1
        assert_eq!(m.spectrum().multiplicities()[one], 4);
    }

    #[test]
    fn orthonormal_and_volume() {
        let m = build_flat_torus(16, 32, (1.0, 2.0), 7).unwrap();
        assert!(m.orthonormality_residual() < 1e-12);
        assert!((m.volume() - 8.0 * PI * PI).abs() < 1e-10);
    }

    #[test]
    fn aliasing_is_rejected() {
        assert!(build_flat_torus(8, 32, (1.0, 2.0), 8).is_err());
    }
}
