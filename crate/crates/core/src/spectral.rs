//! Spectral functions `η(λ)`, the integral operators `T_η` they define and
//! kernel-level quantities.

use crate::error::{Error, Result};
use crate::linalg::{weighted_operator_norm, NormEstimate, PowerIterationOptions};
use crate::manifold::{ManifoldId, Signal, SpectralManifold};
use crate::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Closed-form spectral functions. These can be evaluated anywhere on
/// `[0, ∞)` and therefore dilated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum SpectralForm {
    /// `e^{-tλ}`
    Heat { t: f64 },
    /// `exp(-(λ/scale)²)`
    Gaussian { scale: f64 },
    /// `1` on `[lo, hi]`, `0` elsewhere.
    Indicator { lo: f64, hi: f64 },
    Constant { value: f64 },
    /// `[g(λ/2)² − g(λ)²]^{1/2}` for a low-pass `g`.
    WaveletHighPass { low_pass: Box<SpectralForm> },
    /// `base(2^j λ)`
    Dilated { base: Box<SpectralForm>, j: i32 },
}

impl SpectralForm {
    pub fn eval(&self, lambda: f64) -> f64 {
        match self {
            SpectralForm::Heat { t } => (-t * lambda).exp(),
            SpectralForm::Gaussian { scale } => (-(lambda / scale).powi(2)).exp(),
            SpectralForm::Indicator { lo, hi } => {
                if lambda >= *lo && lambda <= *hi {
                    1.0
                } else {
                    0.0
                }
            }
            SpectralForm::Constant { value } => *value,
            SpectralForm::WaveletHighPass { low_pass } => {
                let a = low_pass.eval(lambda / 2.0);
                let b = low_pass.eval(lambda);
                (a * a - b * b).max(0.0).sqrt()
            }
            SpectralForm::Dilated { base, j } => base.eval(2f64.powi(*j) * lambda),
        }
    }

    /// Squared-discriminant `g(λ/2)² − g(λ)²` of the wavelet construction,
    /// unclamped.
    pub fn wavelet_discriminant(&self, lambda: f64) -> f64 {
        let a = self.eval(lambda / 2.0);
        let b = self.eval(lambda);
        a * a - b * b
    }

    /// `λ ↦ η(2^j λ)`.
    pub fn dilate(&self, j: i32) -> SpectralForm {
        match self {
            SpectralForm::Dilated { base, j: k } => SpectralForm::Dilated { base: base.clone(), j: j + k },
            other if j == 0 => other.clone(),
            other => SpectralForm::Dilated { base: Box::new(other.clone()), j },
        }
    }

    pub fn label(&self) -> String {
        match self {
            SpectralForm::Heat { t } => format!("heat(t={t})"),
            SpectralForm::Gaussian { scale } => format!("gaussian(scale={scale})"),
            SpectralForm::Indicator { lo, hi } => format!("indicator[{lo},{hi}]"),
            SpectralForm::Constant { value } => format!("constant({value})"),
            SpectralForm::WaveletHighPass { low_pass } => format!("wavelet({})", low_pass.label()),
            SpectralForm::Dilated { base, j } => format!("{}@2^{j}", base.label()),
        }
    }
}

/// A spectral function bound to a manifold's eigenspaces: one value per
/// unique eigenvalue, optionally generated by a closed form and optionally
/// divided by `√m(λ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralFunction {
    values: Vec<f64>,
    form: Option<SpectralForm>,
    normalized: bool,
    manifold_id: ManifoldId,
}

impl SpectralFunction {
    /// Evaluate a closed form at each eigenspace representative.
    pub fn from_form(m: &SpectralManifold, form: SpectralForm) -> Self {
        let values = m.spectrum().uniques().iter().map(|&l| form.eval(l)).collect();
        Self { values, form: Some(form), normalized: false, manifold_id: m.id() }
    }

    /// One value per eigenspace; cannot be dilated.
    pub fn from_table(m: &SpectralManifold, values: Vec<f64>) -> Result<Self> {
        if values.len() != m.spectrum().len() {
            return Err(Error::LengthMismatch { expected: m.spectrum().len(), found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("spectral function values must be finite".into()));
        }
        Ok(Self { values, form: None, normalized: false, manifold_id: m.id() })
    }

    /// One value per retained eigenpair; must be constant on each eigenspace.
    pub fn from_eigen_table(m: &SpectralManifold, per_k: &[f64]) -> Result<Self> {
        if per_k.len() != m.n_eigen() {
            return Err(Error::LengthMismatch { expected: m.n_eigen(), found: per_k.len() });
        }
        let mut values = Vec::with_capacity(m.spectrum().len());
        for r in m.spectrum().ranges() {
            let v = per_k[r.start];
            if per_k[r.clone()].iter().any(|w| (w - v).abs() > 1e-12 * v.abs().max(1.0)) {
                return Err(Error::InvalidConfig(format!(
                    "values differ within the eigenspace at indices {:?}",
                    r
                )));
            }
            values.push(v);
        }
        Self::from_table(m, values)
    }

    pub fn constant(m: &SpectralManifold, value: f64) -> Self {
        Self::from_form(m, SpectralForm::Constant { value })
    }

    pub fn heat(m: &SpectralManifold, t: f64) -> Self {
        Self::from_form(m, SpectralForm::Heat { t })
    }

    /// Indicator of a single eigenspace.
    pub fn indicator(m: &SpectralManifold, lambda: f64) -> Result<Self> {
        let g = m.eigenspace_of(lambda)?;
        let u = m.spectrum().uniques()[g];
        let r = &m.spectrum().ranges()[g];
        let ev = m.eigenvalues();
        let pad = m.cluster_tol() * u.abs().max(1.0) * 0.5;
        let form = SpectralForm::Indicator { lo: ev[r.start] - pad, hi: ev[r.end - 1] + pad };
        let mut values = vec![0.0; m.spectrum().len()];
        values[g] = 1.0;
        Ok(Self { values, form: Some(form), normalized: false, manifold_id: m.id() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn form(&self) -> Option<&SpectralForm> {
        self.form.as_ref()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn manifold_id(&self) -> ManifoldId {
        self.manifold_id
    }

    pub fn check(&self, m: &SpectralManifold) -> Result<()> {
        if m.id() != self.manifold_id {
            return Err(Error::ManifoldMismatch { expected: m.id(), found: self.manifold_id });
        }
        Ok(())
    }

    /// `η̃(λ) = η(λ)/√m(λ)`.
    pub fn normalized(&self, m: &SpectralManifold) -> Result<Self> {
        self.check(m)?;
        if self.normalized {
            return Ok(self.clone());
        }
        let values = self
            .values
            .iter()
            .zip(m.spectrum().multiplicities())
            .map(|(v, &mult)| v / (mult as f64).sqrt())
            .collect();
        Ok(Self { values, form: self.form.clone(), normalized: true, manifold_id: self.manifold_id })
    }

    /// `η_j(λ) = η(2^j λ)`; requires a closed form.
    pub fn dilate(&self, m: &SpectralManifold, j: i32) -> Result<Self> {
        self.check(m)?;
        let form = self.form.as_ref().ok_or_else(|| {
            Error::InvalidConfig("a tabulated spectral function has no values off the spectrum and cannot be dilated".into())
        })?;
        let d = Self::from_form(m, form.dilate(j));
        if self.normalized {
            d.normalized(m)
        } else {
            Ok(d)
        }
    }

    /// Value for retained eigenpair `k`.
    pub fn at_index(&self, m: &SpectralManifold, k: usize) -> f64 {
        self.values[m.group_index()[k]]
    }

    /// `η(λ_k)` for every retained eigenpair.
    pub fn per_eigenpair(&self, m: &SpectralManifold) -> Vec<f64> {
        m.group_index().iter().map(|&g| self.values[g]).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn label(&self) -> String {
        let base = self.form.as_ref().map(|f| f.label()).unwrap_or_else(|| "table".into());
        if self.normalized {
            format!("{base}/sqrt(m)")
        } else {
            base
        }
    }
}

/// `T_η f = Σ_k η(λ_k) f̂(k) φ_k`.
pub fn apply_operator(m: &SpectralManifold, eta: &SpectralFunction, f: &Signal) -> Result<Signal> {
    eta.check(m)?;
    m.check(f)?;
    Ok(f.with_values(apply_raw(m, eta, f.values())))
}

pub(crate) fn apply_raw(m: &SpectralManifold, eta: &SpectralFunction, f: &[Complex64]) -> Vec<Complex64> {
    let mut c = m.fourier_raw(f);
    apply_coefficients(m, eta, &mut c);
    m.synthesize_raw(&c)
}

pub(crate) fn apply_coefficients(m: &SpectralManifold, eta: &SpectralFunction, c: &mut [Complex64]) {
    for (k, ck) in c.iter_mut().enumerate() {
        *ck *= eta.at_index(m, k);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSource {
    Function { label: String, form: Option<SpectralForm>, normalized: bool },
    Eigenspace { lambda: f64 },
}

/// Dense `N x N` kernel `K(x_i, x_j) = Σ_k η(λ_k) φ_k(x_i) φ_k(x_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    n: usize,
    entries: Vec<f64>,
    source: KernelSource,
    manifold_id: ManifoldId,
}

pub fn kernel_matrix(m: &SpectralManifold, eta: &SpectralFunction) -> Result<KernelMatrix> {
    eta.check(m)?;
    let coef = eta.per_eigenpair(m);
    let source = KernelSource::Function { label: eta.label(), form: eta.form.clone(), normalized: eta.normalized };
    Ok(assemble_kernel(m, &coef, source))
}

/// Kernel of the projection onto one eigenspace.
pub fn eigenspace_kernel(m: &SpectralManifold, lambda: f64) -> Result<KernelMatrix> {
    let g = m.eigenspace_of(lambda)?;
    let coef: Vec<f64> = m.group_index().iter().map(|&gi| if gi == g { 1.0 } else { 0.0 }).collect();
    Ok(assemble_kernel(m, &coef, KernelSource::Eigenspace { lambda: m.spectrum().uniques()[g] }))
}

fn assemble_kernel(m: &SpectralManifold, coef: &[f64], source: KernelSource) -> KernelMatrix {
    let n = m.n_points();
    let mut entries = vec![0.0; n * n];
    for (k, &c) in coef.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let phi = m.eigenfunction(k);
        for i in 0..n {
            let a = c * phi[i];
            let row = &mut entries[i * n..(i + 1) * n];
            for (e, p) in row.iter_mut().zip(phi) {
                *e += a * p;
            }
        }
    }
    KernelMatrix { n, entries, source, manifold_id: m.id() }
}

impl KernelMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn source(&self) -> &KernelSource {
        &self.source
    }

    pub fn manifold_id(&self) -> ManifoldId {
        self.manifold_id
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// `(K f)(x_i) = Σ_j K(x_i, x_j) f(x_j) w_j`.
    pub fn apply(&self, m: &SpectralManifold, f: &Signal) -> Result<Signal> {
        m.check(f)?;
        if m.id() != self.manifold_id {
            return Err(Error::ManifoldMismatch { expected: m.id(), found: self.manifold_id });
        }
        let wf: Vec<Complex64> = f.values().iter().zip(m.weights()).map(|(a, w)| a * w).collect();
        let out = (0..self.n)
            .map(|i| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, v) in self.row(i).iter().zip(&wf) {
                    acc += v * k;
                }
                acc
            })
            .collect();
        Ok(f.with_values(out))
    }

    /// `(Σ_ij w_i w_j K_ij²)^{1/2}`.
    pub fn l2_norm_quadrature(&self, weights: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i).iter().enumerate() {
                s += weights[i] * weights[j] * v * v;
            }
        }
        s.sqrt()
    }

    /// Largest `|K_ij − K_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for i in 0..self.n {
            w.write_record(self.row(i).iter().map(|v| format!("{v:e}")))
                .map_err(|e| Error::Structure(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Structure(e.to_string()))?;
        crate::report::write_atomic(path, &bytes)
    }

    /// Raw little-endian `f64` rows plus a `<path>.json` sidecar.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.entries.len() * 8);
        for v in &self.entries {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        crate::report::write_atomic(path, &bytes)?;
        let sidecar = KernelSidecar {
            rows: self.n,
            cols: self.n,
            dtype: "f64-le".into(),
            order: "row-major".into(),
            manifold_id: self.manifold_id.to_string(),
            source: self.source.clone(),
        };
        let mut side = path.as_os_str().to_owned();
        side.push(".json");
        crate::report::write_atomic(Path::new(&side), &serde_json::to_vec_pretty(&sidecar)?)
    }

    pub fn read_binary(path: &Path) -> Result<(KernelSidecar, Vec<f64>)> {
        let mut side = path.as_os_str().to_owned();
        side.push(".json");
        let sidecar: KernelSidecar = serde_json::from_slice(&std::fs::read(Path::new(&side))?)?;
        let bytes = std::fs::read(path)?;
        if bytes.len() != sidecar.rows * sidecar.cols * 8 {
            return Err(Error::Structure("kernel file size does not match its sidecar".into()));
        }
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok((sidecar, data))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSidecar {
    pub rows: usize,
    pub cols: usize,
    pub dtype: String,
    pub order: String,
    pub manifold_id: String,
    pub source: KernelSource,
}

/// `‖K_η‖_{L²(M×M)} = (Σ_k η(λ_k)²)^{1/2}`.
pub fn kernel_l2_norm(m: &SpectralManifold, eta: &SpectralFunction) -> Result<f64> {
    eta.check(m)?;
    Ok(eta.per_eigenpair(m).iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Discrete estimate of `‖∇K‖_∞`: the largest difference quotient
/// `|K(x,y) − K(x',y)| / r(x,x')` over neighbouring samples `x, x'` and all
/// `y`. A lower bound that tightens with sampling density.
pub fn kernel_gradient_sup(m: &SpectralManifold, k: &KernelMatrix) -> Result<f64> {
    if m.id() != k.manifold_id {
        return Err(Error::ManifoldMismatch { expected: m.id(), found: k.manifold_id });
    }
    let mut worst = 0.0f64;
    for i in 0..m.n_points() {
        for j in m.neighbors(i) {
            if j < i {
                continue;
            }
            let r = m.distance(i, j);
            if r <= 0.0 {
                continue;
            }
            let (a, b) = (k.row(i), k.row(j));
            let d = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            worst = worst.max(d / r);
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialBin {
    pub r: f64,
    pub mean: f64,
    pub spread: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialCheck {
    pub is_radial: bool,
    /// Sampled profile `κ(r)`.
    pub profile: Vec<RadialBin>,
    /// Largest within-bin spread.
    pub deviation: f64,
    /// Pair of sample pairs realising the deviation.
    pub witness: Option<((usize, usize), (usize, usize))>,
}

/// Pairs with distances within `bin_tol` of each other share a bin.
pub const RADIAL_BIN_TOL: f64 = 1e-9;

/// Bin `K(x_i, x_j)` by `r(x_i, x_j)` and report the largest spread.
pub fn check_radial(m: &SpectralManifold, k: &KernelMatrix, tol: f64) -> Result<RadialCheck> {
    if m.id() != k.manifold_id {
        return Err(Error::ManifoldMismatch { expected: m.id(), found: k.manifold_id });
    }
    let n = m.n_points();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        let d = m.distances_from(i);
        for (j, &r) in d.iter().enumerate().skip(i) {
            pairs.push((r, i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut profile = Vec::new();
    let mut deviation = 0.0f64;
    let mut witness = None;
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && pairs[end].0 - pairs[end - 1].0 <= RADIAL_BIN_TOL {
            end += 1;
        }
        let bin = &pairs[start..end];
        let vals: Vec<f64> = bin.iter().map(|&(_, i, j)| k.get(i, j)).collect();
        let (mut lo, mut hi) = (0, 0);
        for (idx, v) in vals.iter().enumerate() {
            if *v < vals[lo] {
                lo = idx;
            }
            if *v > vals[hi] {
                hi = idx;
            }
        }
        let spread = vals[hi] - vals[lo];
        if spread > deviation {
            deviation = spread;
            witness = Some(((bin[lo].1, bin[lo].2), (bin[hi].1, bin[hi].2)));
        }
        profile.push(RadialBin {
            r: bin.iter().map(|p| p.0).sum::<f64>() / bin.len() as f64,
            mean: vals.iter().sum::<f64>() / vals.len() as f64,
            spread,
            count: bin.len(),
        });
        start = end;
    }
    Ok(RadialCheck { is_radial: deviation <= tol * k.max_abs(), profile, deviation, witness })
}

/// `‖T_η‖ = max_k |η(λ_k)|`.
pub fn operator_norm(eta: &SpectralFunction) -> f64 {
    eta.sup_norm()
}

/// Largest singular value of a kernel operator in the weighted inner product.
pub fn kernel_operator_norm(m: &SpectralManifold, k: &KernelMatrix, opts: &PowerIterationOptions) -> Result<NormEstimate> {
    if m.id() != k.manifold_id {
        return Err(Error::ManifoldMismatch { expected: m.id(), found: k.manifold_id });
    }
    let n = k.n;
    let w = m.weights().to_vec();
    let apply = |x: &[f64]| -> Vec<f64> {
        (0..n).map(|i| k.row(i).iter().zip(x).zip(&w).map(|((a, b), c)| a * b * c).sum()).collect()
    };
    // A = K W, adjoint W^{-1} A^T W = K^T W
    let adjoint = |x: &[f64]| -> Vec<f64> {
        let wx: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a * b).collect();
        let mut out = vec![0.0; n];
        for i in 0..n {
            for (o, v) in out.iter_mut().zip(k.row(i)) {
                *o += v * wx[i];
            }
        }
        out
    };
    weighted_operator_norm(&w, apply, adjoint, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{build_circle, build_flat_torus, build_sphere, SphereGrid};
    use crate::signals::random_bandlimited;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn rel_err(a: &Signal, b: &Signal) -> f64 {
        let d: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        let s: f64 = b.values().iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        d / s.max(1e-300)
    }

    #[test]
    fn identity_multiplier() {
        let m = build_circle(64, 10).unwrap();
        let f = random_bandlimited(&m, 1, None);
        let g = apply_operator(&m, &SpectralFunction::constant(&m, 1.0), &f).unwrap();
        assert!(rel_err(&g, &f) < 1e-13);
    }

    #[test]
    fn heat_on_an_eigenfunction() {
        let m = build_circle(64, 10).unwrap();
        let f = m.sample(|p| (3.0 * p[0]).cos());
        let g = apply_operator(&m, &SpectralFunction::heat(&m, 1.0), &f).unwrap();
        let want = m.sample(|p| (-9.0f64).exp() * (3.0 * p[0]).cos());
        // e^{-9} attenuation amplifies roundoff leaking from other modes
        assert!(rel_err(&g, &want) < 1e-10);
    }

    #[test]
    fn mean_projection() {
        let m = build_circle(64, 10).unwrap();
        let f = m.sample(|p| 2.0 + p[0].sin());
        let g = apply_operator(&m, &SpectralFunction::indicator(&m, 0.0).unwrap(), &f).unwrap();
        assert!(g.values().iter().all(|v| (v.re - 2.0).abs() < 1e-13 && v.im.abs() < 1e-15));
    }

    #[test]
    fn circle_heat_kernel_matches_direct_sum() {
        let m = build_circle(48, 12).unwrap();
        let k = kernel_matrix(&m, &SpectralFunction::heat(&m, 1.0)).unwrap();
        let mut worst = 0.0f64;
        for i in 0..48 {
            for j in 0..48 {
                let d = 2.0 * PI * (i as f64 - j as f64) / 48.0;
                let mut v = 1.0 / (2.0 * PI);
                for q in 1..=12 {
                    v += (-(q * q) as f64).exp() * (q as f64 * d).cos() / PI;
                }
                worst = worst.max((k.get(i, j) - v).abs());
            }
        }
        assert!(worst <= 1e-12, "{worst}");
        assert!(k.asymmetry() <= 1e-15);
    }

    #[test]
    fn kernel_and_spectral_application_agree() {
        let m = build_sphere(5, SphereGrid::gauss(5)).unwrap();
        let eta = SpectralFunction::from_form(&m, SpectralForm::Gaussian { scale: 7.0 });
        let k = kernel_matrix(&m, &eta).unwrap();
        for seed in 0..5 {
            let f = random_bandlimited(&m, seed, None);
            let a = apply_operator(&m, &eta, &f).unwrap();
            let b = k.apply(&m, &f).unwrap();
            assert!(rel_err(&b, &a) < 1e-10);
        }
    }

    #[test]
    fn reproducing_kernel_of_the_band() {
        let m = build_circle(40, 9).unwrap();
        let k = kernel_matrix(&m, &SpectralFunction::constant(&m, 1.0)).unwrap();
        let f = random_bandlimited(&m, 5, None);
        assert!(rel_err(&k.apply(&m, &f).unwrap(), &f) < 1e-12);
    }

    #[test]
    fn eigenspace_kernel_is_idempotent() {
        let m = build_circle(40, 9).unwrap();
        let k = eigenspace_kernel(&m, 4.0).unwrap();
        let n = m.n_points();
        let w = m.weights();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let kk: f64 = (0..n).map(|l| k.get(i, l) * w[l] * k.get(l, j)).sum();
                worst = worst.max((kk - k.get(i, j)).abs());
            }
        }
        assert!(worst < 1e-12);
    }

    #[test]
    fn l2_norms() {
        let m = build_circle(40, 9).unwrap();
        let one = kernel_l2_norm(&m, &SpectralFunction::constant(&m, 1.0)).unwrap();
        assert!((one - (m.n_eigen() as f64).sqrt()).abs() < 1e-14);
        assert_eq!(kernel_l2_norm(&m, &SpectralFunction::constant(&m, 0.0)).unwrap(), 0.0);

        let m = build_circle(64, 8).unwrap();
        let eta = SpectralFunction::heat(&m, 1.0);
        let spectral = kernel_l2_norm(&m, &eta).unwrap();
        let quad = kernel_matrix(&m, &eta).unwrap().l2_norm_quadrature(m.weights());
        assert!((spectral - quad).abs() <= 1e-8 * spectral);
    }

    #[test]
    fn gradient_of_constant_kernel_vanishes() {
        let m = build_circle(64, 8).unwrap();
        let k = eigenspace_kernel(&m, 0.0).unwrap();
        assert!(kernel_gradient_sup(&m, &k).unwrap() < 1e-12);
    }

    #[test]
    fn gradient_estimate_converges_to_derivative_bound() {
        // K^(9) = cos(3Δθ)/π has sup-gradient 3/π
        let mut prev = 0.0;
        for n in [64, 256, 1024] {
            let m = build_circle(n, 3).unwrap();
            let g = kernel_gradient_sup(&m, &eigenspace_kernel(&m, 9.0).unwrap()).unwrap();
            assert!(g <= 3.0 / PI + 1e-12);
            assert!(g >= prev);
            prev = g;
        }
        assert!((prev - 3.0 / PI).abs() / (3.0 / PI) < 1e-3);
    }

    #[test]
    fn radial_on_homogeneous_spaces_only() {
        let c = build_circle(64, 12).unwrap();
        let eta = SpectralFunction::from_table(&c, (0..c.spectrum().len()).map(|i| ((i * 7) % 5) as f64 - 2.0).collect()).unwrap();
        let rc = check_radial(&c, &kernel_matrix(&c, &eta).unwrap(), 1e-8).unwrap();
        assert!(rc.is_radial && rc.deviation <= 1e-8, "{}", rc.deviation);

        let s = build_sphere(6, SphereGrid::gauss(6)).unwrap();
        let rs = check_radial(&s, &kernel_matrix(&s, &SpectralFunction::heat(&s, 0.1)).unwrap(), 1e-6).unwrap();
        assert!(rs.is_radial, "{}", rs.deviation);

        let t = build_flat_torus(16, 32, (1.0, 2.0), 7).unwrap();
        let rt = check_radial(&t, &kernel_matrix(&t, &SpectralFunction::heat(&t, 0.1)).unwrap(), 1e-6).unwrap();
        assert!(!rt.is_radial);
        let ((a, b), (c2, d)) = rt.witness.unwrap();
        assert!((t.distance(a, b) - t.distance(c2, d)).abs() < 1e-9);
    }

    #[test]
    fn spectral_operator_norms() {
        let m = build_circle(32, 6).unwrap();
        assert_eq!(operator_norm(&SpectralFunction::heat(&m, 1.0)), 1.0);
        assert_eq!(operator_norm(&SpectralFunction::indicator(&m, 4.0).unwrap()), 1.0);
    }

    #[test]
    fn matrix_operator_norm_matches_dense_svd() {
        let m = build_sphere(4, SphereGrid::gauss(4)).unwrap();
        let vals = vec![0.3, -1.7, 0.9, 1.2, -0.4];
        let eta = SpectralFunction::from_table(&m, vals).unwrap();
        let k = kernel_matrix(&m, &eta).unwrap();
        let est = kernel_operator_norm(&m, &k, &PowerIterationOptions::default()).unwrap();
        let n = m.n_points();
        let w = m.weights();
        let a = DMatrix::from_fn(n, n, |i, j| w[i].sqrt() * k.get(i, j) * w[j].sqrt());
        let sv = a.singular_values().max();
        assert!((est.value - sv).abs() <= 1e-6 * sv, "{} vs {sv}", est.value);
        assert!((sv - 1.7).abs() < 1e-10);
    }

    #[test]
    fn tables_cannot_be_dilated() {
        let m = build_circle(16, 3).unwrap();
        let t = SpectralFunction::from_table(&m, vec![1.0, 0.5, 0.2, 0.1]).unwrap();
        assert!(t.dilate(&m, 1).is_err());
        let h = SpectralFunction::heat(&m, 1.0).dilate(&m, 2).unwrap();
        assert!((h.values()[1] - (-4.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn eigen_table_must_respect_eigenspaces() {
        let m = build_circle(16, 2).unwrap();
        assert!(SpectralFunction::from_eigen_table(&m, &[1.0, 0.5, 0.5, 0.2, 0.2]).is_ok());
        assert!(SpectralFunction::from_eigen_table(&m, &[1.0, 0.5, 0.4, 0.2, 0.2]).is_err());
    }

    #[test]
    fn eigenspace_kernel_ignores_basis_rotation() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let m = build_sphere(4, SphereGrid::gauss(4)).unwrap();
        let k = eigenspace_kernel(&m, 12.0).unwrap();
        let g = m.eigenspace_of(12.0).unwrap();
        let r = m.spectrum().ranges()[g].clone();
        let d = r.len();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let q = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng)).qr().q();
        let n = m.n_points();
        let rotated: Vec<Vec<f64>> = (0..d)
            .map(|a| (0..n).map(|i| (0..d).map(|b| q[(a, b)] * m.eigenfunction(r.start + b)[i]).sum()).collect())
            .collect();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let v: f64 = rotated.iter().map(|p| p[i] * p[j]).sum();
                worst = worst.max((v - k.get(i, j)).abs());
            }
        }
        assert!(worst < 1e-10);
    }

    #[test]
    fn binary_export_round_trip() {
        let m = build_circle(12, 3).unwrap();
        let k = kernel_matrix(&m, &SpectralFunction::heat(&m, 0.5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.bin");
        k.write_binary(&p).unwrap();
        let (side, data) = KernelMatrix::read_binary(&p).unwrap();
        assert_eq!(side.rows, 12);
        assert_eq!(data, k.entries());
        k.write_csv(&dir.path().join("k.csv")).unwrap();
        let text = std::fs::read_to_string(dir.path().join("k.csv")).unwrap();
        assert_eq!(text.lines().count(), 12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn multiplier_identity(seed in 0u64..1000, t in 0.0f64..3.0) {
            let m = build_circle(32, 7).unwrap();
            let f = random_bandlimited(&m, seed, None);
            let eta = SpectralFunction::heat(&m, t);
            let out = m.fourier(&apply_operator(&m, &eta, &f).unwrap()).unwrap();
            let inp = m.fourier(&f).unwrap();
            for k in 0..m.n_eigen() {
                prop_assert!((out[k] - inp[k] * eta.at_index(&m, k)).norm() <= 1e-12 * (1.0 + inp[k].norm()));
            }
        }

        #[test]
        fn contraction_when_sup_norm_at_most_one(seed in 0u64..1000, vals in prop::collection::vec(-1.0f64..1.0, 8)) {
            let m = build_circle(32, 7).unwrap();
            let eta = SpectralFunction::from_table(&m, vals).unwrap();
            let f = random_bandlimited(&m, seed, None);
            let g = apply_operator(&m, &eta, &f).unwrap();
            prop_assert!(m.norm(&g).unwrap() <= m.norm(&f).unwrap() * (1.0 + 1e-12));
        }
    }
}
