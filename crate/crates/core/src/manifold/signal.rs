use super::ManifoldId;
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Complex samples of a function on a manifold's points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    values: Vec<Complex64>,
    manifold_id: ManifoldId,
}

impl Signal {
    pub(crate) fn from_parts(values: Vec<Complex64>, manifold_id: ManifoldId) -> Self {
        Self { values, manifold_id }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn manifold_id(&self) -> ManifoldId {
        self.manifold_id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Same manifold, new values.
    pub(crate) fn with_values(&self, values: Vec<Complex64>) -> Self {
        Self { values, manifold_id: self.manifold_id }
    }

    /// Pointwise modulus `|f(x)|`.
    pub fn modulus(&self) -> Self {
        self.with_values(self.values.iter().map(|v| Complex64::new(v.norm(), 0.0)).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.with_values(self.values.iter().map(|v| v * s).collect())
    }

    pub fn sub(&self, other: &Signal) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Signal) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    fn zip(&self, other: &Signal, op: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.manifold_id != other.manifold_id {
            return Err(Error::ManifoldMismatch { expected: self.manifold_id, found: other.manifold_id });
        }
        if self.len() != other.len() {
            return Err(Error::LengthMismatch { expected: self.len(), found: other.len() });
        }
        Ok(self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| op(*a, *b)).collect()))
    }

    /// Largest pointwise magnitude.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}
