//! Test and experiment signals.

use crate::error::{Error, Result};
use crate::manifold::{Geometry, Signal, SpectralManifold};
use crate::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Real bandlimited signal with i.i.d. standard normal coefficients on the
/// first `n_modes` eigenfunctions (all retained ones when `None`).
pub fn random_bandlimited(m: &SpectralManifold, seed: u64, n_modes: Option<usize>) -> Signal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_bandlimited_rng(m, &mut rng, n_modes)
}

pub fn random_bandlimited_rng<R: Rng>(m: &SpectralManifold, rng: &mut R, n_modes: Option<usize>) -> Signal {
    let k = n_modes.unwrap_or(m.n_eigen()).min(m.n_eigen());
    let coeffs: Vec<Complex64> = (0..k).map(|_| Complex64::new(rng.sample(StandardNormal), 0.0)).collect();
    m.inverse_fourier(&coeffs).expect("coefficient count within band")
}

/// Complex bandlimited signal.
pub fn random_complex_bandlimited(m: &SpectralManifold, seed: u64) -> Signal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<Complex64> = (0..m.n_eigen())
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    m.inverse_fourier(&coeffs).expect("coefficient count within band")
}

/// Discrete Dirac at sample `i`, scaled so that its integral is one.
pub fn delta(m: &SpectralManifold, i: usize) -> Result<Signal> {
    if i >= m.n_points() {
        return Err(Error::InvalidConfig(format!("sample {i} out of range for {} points", m.n_points())));
    }
    let mut v = vec![Complex64::new(0.0, 0.0); m.n_points()];
    v[i] = Complex64::new(1.0 / m.weights()[i], 0.0);
    m.signal(v)
}

/// Named signal generators for configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SignalSpec {
    Zero,
    Constant { value: f64 },
    /// Retained eigenfunction `φ_index`.
    Eigenfunction { index: usize },
    /// `cos(freq · θ)` along the first angular coordinate (circle, torus).
    Cosine { freq: f64 },
    Random { seed: u64, n_modes: Option<usize> },
    Delta { index: usize },
    /// Whitespace or comma separated real values, one per sample.
    File { path: PathBuf },
}

impl SignalSpec {
    pub fn generate(&self, m: &SpectralManifold) -> Result<Signal> {
        match self {
            SignalSpec::Zero => Ok(m.zero_signal()),
            SignalSpec::Constant { value } => Ok(m.sample(|_| *value)),
            SignalSpec::Eigenfunction { index } => {
                if *index >= m.n_eigen() {
                    return Err(Error::InvalidConfig(format!("eigenfunction {index} not retained")));
                }
                Ok(m.eigen_signal(*index))
            }
            SignalSpec::Cosine { freq } => match m.geometry() {
                Geometry::Circle { .. } => Ok(m.sample(|p| (freq * p[0]).cos())),
                Geometry::Torus { r1, .. } => Ok(m.sample(|p| (freq * p[0] / r1).cos())),
                _ => Err(Error::InvalidConfig("cosine signals need an angular coordinate (circle or torus)".into())),
            },
            SignalSpec::Random { seed, n_modes } => Ok(random_bandlimited(m, *seed, *n_modes)),
            SignalSpec::Delta { index } => delta(m, *index),
            SignalSpec::File { path } => {
                let text = std::fs::read_to_string(path)?;
                let vals: Vec<f64> = text
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|t| !t.is_empty())
                    .map(|t| t.parse::<f64>().map_err(|_| Error::InvalidConfig(format!("bad signal value {t:?}"))))
                    .collect::<Result<_>>()?;
                m.real_signal(&vals)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::build_circle;

    #[test]
    fn delta_integrates_to_one() {
        let m = build_circle(32, 5).unwrap();
        let d = delta(&m, 7).unwrap();
        let one = m.sample(|_| 1.0);
        assert!((m.inner_product(&d, &one).unwrap().re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_signal_is_reproducible() {
        let m = build_circle(32, 5).unwrap();
        assert_eq!(random_bandlimited(&m, 3, None), random_bandlimited(&m, 3, None));
        assert_ne!(random_bandlimited(&m, 3, None), random_bandlimited(&m, 4, None));
    }

    #[test]
    fn file_signal() {
        let m = build_circle(4, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.txt");
        std::fs::write(&p, "1, 2\n3 4\n").unwrap();
        let s = SignalSpec::File { path: p }.generate(&m).unwrap();
        assert_eq!(s.re(), vec![1.0, 2.0, 3.0, 4.0]);
    }
}
