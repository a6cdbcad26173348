use super::{Geometry, SpectralManifold, ANALYTIC_CLUSTER_TOL};
use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Unit circle sampled at `θ_i = 2πi/N` with the Fourier basis up to
/// frequency `max_freq`, ordered `1, cos θ, sin θ, cos 2θ, ...`.
pub fn build_circle(n_points: usize, max_freq: usize) -> Result<SpectralManifold> {
    if n_points < 2 * max_freq + 2 {
        return Err(Error::InvalidConfig(format!(
            "circle with {n_points} points aliases frequency {max_freq} (need at least {})",
            2 * max_freq + 2
        )));
    }
    let points: Vec<_> = (0..n_points).map(|i| [2.0 * PI * i as f64 / n_points as f64, 0.0, 0.0]).collect();
    let weights = vec![2.0 * PI / n_points as f64; n_points];
    let k_total = 2 * max_freq + 1;
    let mut eigenvalues = Vec::with_capacity(k_total);
    eigenvalues.push(0.0);
    for k in 1..=max_freq {
        let l = (k * k) as f64;
        eigenvalues.push(l);
        eigenvalues.push(l);
    }
    let mut table = vec![0.0; k_total * n_points];
    for (i, p) in points.iter().enumerate() {
        for (k, v) in eval(max_freq, p[0]).into_iter().enumerate() {
            table[k * n_points + i] = v;
        }
    }
    Ok(SpectralManifold::assemble(
        1,
        Geometry::Circle { n_points, max_freq },
        points,
        weights,
        eigenvalues,
        table,
        ANALYTIC_CLUSTER_TOL,
    ))
}

pub(super) fn eval(max_freq: usize, theta: f64) -> Vec<f64> {
    let c0 = 1.0 / (2.0 * PI).sqrt();
    let c = 1.0 / PI.sqrt();
    let mut out = Vec::with_capacity(2 * max_freq + 1);
    out.push(c0);
    for k in 1..=max_freq {
        let (s, co) = (k as f64 * theta).sin_cos();
        out.push(c * co);
        out.push(c * s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Complex64;

    #[test]
    fn spectrum_is_squares() {
        let m = build_circle(8, 2).unwrap();
        assert_eq!(m.eigenvalues(), &[0.0, 1.0, 1.0, 4.0, 4.0]);
        assert_eq!(m.spectrum().multiplicities(), &[1, 2, 2]);
    }

    #[test]
    fn orthonormal_to_machine_precision() {
        for (n, k) in [(8, 2), (64, 31), (100, 20)] {
            let m = build_circle(n, k).unwrap();
            assert!(m.orthonormality_residual() <= 1e-12, "{n} {k}");
        }
    }

    #[test]
    fn weights_sum_to_circumference() {
        let m = build_circle(64, 16).unwrap();
        assert!((m.volume() - 2.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn aliasing_is_rejected() {
        assert!(build_circle(9, 4).is_err());
        assert!(build_circle(10, 4).is_ok());
    }

    #[test]
    fn cosine_has_energy_pi() {
        let m = build_circle(32, 4).unwrap();
        let f = m.sample(|p| p[0].cos());
        let ip = m.inner_product(&f, &f).unwrap();
        assert!((ip - Complex64::new(PI, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn metric_wraps() {
        let m = build_circle(16, 3).unwrap();
        assert!((m.distance(0, 15) - 2.0 * PI / 16.0).abs() < 1e-14);
        assert!((m.distance(0, 8) - PI).abs() < 1e-14);
        assert_eq!(m.distance(3, 3), 0.0);
    }
}
