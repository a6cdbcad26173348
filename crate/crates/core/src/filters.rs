//! Low/high-pass filter validation, Littlewood–Paley frame bounds and the
//! dilated wavelet bank built from a nonincreasing low-pass.

use crate::error::{Error, Result};
use crate::manifold::{ManifoldId, Signal, SpectralManifold};
use crate::spectral::{apply_raw, SpectralForm, SpectralFunction};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterViolation {
    pub lambda: f64,
    pub value: f64,
    pub rule: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterDiagnostics {
    pub passed: bool,
    pub value_at_zero: f64,
    pub sup_abs: f64,
    pub tail_value: f64,
    pub violations: Vec<FilterViolation>,
}

/// `0` followed by `n` geometrically spaced points up to `lambda_max`.
pub fn probe_grid(lambda_max: f64, n: usize) -> Vec<f64> {
    let mut v = vec![0.0];
    let lo = (lambda_max * 1e-6).max(1e-9);
    for i in 0..n {
        let s = i as f64 / (n.max(2) - 1) as f64;
        v.push(lo * (lambda_max / lo).powf(s));
    }
    v
}

/// Checks `|g(λ)| ≤ g(0) = 1` on the grid and `|g(λ_last)| ≤ decay_tol`.
pub fn validate_low_pass(g: impl Fn(f64) -> f64, probe: &[f64], decay_tol: f64) -> FilterDiagnostics {
    let g0 = g(0.0);
    let mut violations = Vec::new();
    if (g0 - 1.0).abs() > 1e-12 {
        violations.push(FilterViolation { lambda: 0.0, value: g0, rule: "g(0) = 1".into() });
    }
    let mut sup = 0.0f64;
    for &l in probe {
        let v = g(l);
        sup = sup.max(v.abs());
        if !v.is_finite() || v.abs() > 1.0 + 1e-12 {
            violations.push(FilterViolation { lambda: l, value: v, rule: "|g| <= 1".into() });
        }
    }
    let last = probe.last().copied().unwrap_or(0.0);
    let tail = g(last);
    if tail.abs() > decay_tol {
        violations.push(FilterViolation { lambda: last, value: tail, rule: "decay to zero".into() });
    }
    FilterDiagnostics { passed: violations.is_empty(), value_at_zero: g0, sup_abs: sup, tail_value: tail, violations }
}

/// Checks `h(0) = 0` and `|h| ≤ 1` on the grid.
pub fn validate_high_pass(h: impl Fn(f64) -> f64, probe: &[f64]) -> FilterDiagnostics {
    let h0 = h(0.0);
    let mut violations = Vec::new();
    if h0.abs() > 1e-12 {
        violations.push(FilterViolation { lambda: 0.0, value: h0, rule: "h(0) = 0".into() });
    }
    let mut sup = 0.0f64;
    for &l in probe {
        let v = h(l);
        sup = sup.max(v.abs());
        if !v.is_finite() || v.abs() > 1.0 + 1e-12 {
            violations.push(FilterViolation { lambda: l, value: v, rule: "|h| <= 1".into() });
        }
    }
    let tail = probe.last().map(|&l| h(l)).unwrap_or(0.0);
    FilterDiagnostics { passed: violations.is_empty(), value_at_zero: h0, sup_abs: sup, tail_value: tail, violations }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameBounds {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide every filter by `√m(λ)`.
    Multiplicity,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankParams {
    pub generator: Option<SpectralForm>,
    pub j_top: i32,
    pub j_min: i32,
    pub normalization: Normalization,
}

/// One low-pass and an ordered list of high-pass filters on a spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank {
    low_pass: SpectralFunction,
    high_passes: Vec<SpectralFunction>,
    frame_bounds: FrameBounds,
    params: BankParams,
    manifold_id: ManifoldId,
}

impl FilterBank {
    /// Arbitrary finite bank; frame bounds from [`littlewood_paley`].
    pub fn new(m: &SpectralManifold, low_pass: SpectralFunction, high_passes: Vec<SpectralFunction>) -> Result<Self> {
        low_pass.check(m)?;
        for h in &high_passes {
            h.check(m)?;
        }
        let params = BankParams { generator: None, j_top: 0, j_min: 0, normalization: Normalization::None };
        let mut bank = Self {
            low_pass,
            high_passes,
            frame_bounds: FrameBounds { lower: 0.0, upper: 0.0 },
            params,
            manifold_id: m.id(),
        };
        bank.frame_bounds = littlewood_paley(&bank, m)?;
        Ok(bank)
    }

    pub fn low_pass(&self) -> &SpectralFunction {
        &self.low_pass
    }

    pub fn high_passes(&self) -> &[SpectralFunction] {
        &self.high_passes
    }

    pub fn n_high(&self) -> usize {
        self.high_passes.len()
    }

    pub fn frame_bounds(&self) -> FrameBounds {
        self.frame_bounds
    }

    pub fn params(&self) -> &BankParams {
        &self.params
    }

    pub fn manifold_id(&self) -> ManifoldId {
        self.manifold_id
    }

    /// Content hash of the parameters and filter tables.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.params).unwrap_or_default());
        h.update(self.manifold_id.0.to_le_bytes());
        for f in std::iter::once(&self.low_pass).chain(&self.high_passes) {
            h.update((f.values().len() as u64).to_le_bytes());
            for v in f.values() {
                h.update(v.to_le_bytes());
            }
        }
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().unwrap())
    }

    /// Scale `j` of high-pass `index` for wavelet banks.
    pub fn scale_of(&self, index: usize) -> i32 {
        self.params.j_min + index as i32
    }

    pub fn check(&self, m: &SpectralManifold) -> Result<()> {
        if m.id() != self.manifold_id {
            return Err(Error::ManifoldMismatch { expected: m.id(), found: self.manifold_id });
        }
        Ok(())
    }

    /// Rejects banks whose upper frame bound exceeds one.
    pub fn require_contractive(&self) -> Result<()> {
        if self.frame_bounds.upper > 1.0 + 1e-12 {
            return Err(Error::FilterRejected(format!(
                "upper frame bound {} exceeds 1",
                self.frame_bounds.upper
            )));
        }
        Ok(())
    }

    pub fn descriptor(&self, m: &SpectralManifold) -> Result<BankDescriptor> {
        self.check(m)?;
        Ok(BankDescriptor {
            params: self.params.clone(),
            manifold_id: self.manifold_id.to_string(),
            uniques: m.spectrum().uniques().to_vec(),
            multiplicities: m.spectrum().multiplicities().to_vec(),
            low_pass: self.low_pass.values().to_vec(),
            high_passes: self.high_passes.iter().map(|h| h.values().to_vec()).collect(),
            frame_bounds: self.frame_bounds,
        })
    }
}

/// Reproducible description of a bank: parameters and per-eigenvalue tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankDescriptor {
    pub params: BankParams,
    pub manifold_id: String,
    pub uniques: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub low_pass: Vec<f64>,
    pub high_passes: Vec<Vec<f64>>,
    pub frame_bounds: FrameBounds,
}

/// `A = min_λ`, `B = max_λ` of `m(λ) [|g(λ)|² + Σ_γ |h_γ(λ)|²]`.
pub fn littlewood_paley(bank: &FilterBank, m: &SpectralManifold) -> Result<FrameBounds> {
    bank.check(m)?;
    Ok(bounds_of(bank, m, true))
}

/// Extremes of `|g(λ)|² + Σ_γ |h_γ(λ)|²`, the factor by which `Φ` scales
/// the energy of each eigenspace. These are the sharp frame bounds of
/// [`frame_apply`] on the retained band.
pub fn energy_frame_bounds(bank: &FilterBank, m: &SpectralManifold) -> Result<FrameBounds> {
    bank.check(m)?;
    Ok(bounds_of(bank, m, false))
}

fn bounds_of(bank: &FilterBank, m: &SpectralManifold, weighted: bool) -> FrameBounds {
    let sums = lp_sums(bank);
    let mut lower = f64::INFINITY;
    let mut upper = f64::NEG_INFINITY;
    for (s, &mult) in sums.iter().zip(m.spectrum().multiplicities()) {
        let v = if weighted { mult as f64 * s } else { *s };
        lower = lower.min(v);
        upper = upper.max(v);
    }
    FrameBounds { lower, upper }
}

/// `|g(λ)|² + Σ_γ |h_γ(λ)|²` per eigenspace.
pub fn lp_sums(bank: &FilterBank) -> Vec<f64> {
    let mut sums: Vec<f64> = bank.low_pass.values().iter().map(|v| v * v).collect();
    for h in &bank.high_passes {
        for (s, v) in sums.iter_mut().zip(h.values()) {
            *s += v * v;
        }
    }
    sums
}

/// `1 − |g(2^{j_min−1} λ)|²`.
pub fn telescope_residual(g: &SpectralForm, j_min: i32, lambda: f64) -> f64 {
    let v = g.eval(2f64.powi(j_min - 1) * lambda);
    1.0 - v * v
}

/// Largest `j_min ≤ j_top` whose telescoping residual at `lambda` is at
/// most `tol`.
pub fn choose_j_min(g: &SpectralForm, j_top: i32, lambda: f64, tol: f64) -> Result<i32> {
    let mut j = j_top;
    while j > j_top - 1100 {
        if telescope_residual(g, j, lambda) <= tol {
            return Ok(j);
        }
        j -= 1;
    }
    Err(Error::FilterRejected(format!("no truncation scale reaches residual {tol} at λ = {lambda}")))
}

/// Default truncation: residual at most `1e-6` at the largest retained
/// eigenvalue, hence everywhere on the band.
pub fn default_j_min(m: &SpectralManifold, g: &SpectralForm, j_top: i32) -> Result<i32> {
    let lmax = m.spectrum().uniques().last().copied().unwrap_or(0.0).max(1.0);
    choose_j_min(g, j_top, lmax, 1e-6)
}

/// Wavelet bank `{g̃_J, h̃_j : j_min ≤ j ≤ J}` with
/// `h(λ) = [g(λ/2)² − g(λ)²]^{1/2}`, dilations `η_j(λ) = η(2^j λ)` and,
/// for [`Normalization::Multiplicity`], division by `√m(λ)`.
/// High-pass index `i` has scale `j_min + i`.
pub fn make_wavelet_bank(
    m: &SpectralManifold,
    g: &SpectralForm,
    j_top: i32,
    j_min: i32,
    normalization: Normalization,
) -> Result<FilterBank> {
    if j_min > j_top {
        return Err(Error::InvalidConfig(format!("j_min = {j_min} exceeds J = {j_top}")));
    }
    let h = SpectralForm::WaveletHighPass { low_pass: Box::new(g.clone()) };
    for &lambda in m.spectrum().uniques() {
        for j in j_min..=j_top {
            let disc = g.wavelet_discriminant(2f64.powi(j) * lambda);
            if disc < -1e-14 {
                return Err(Error::FilterRejected(format!(
                    "low-pass increases near λ = {} (scale 2^{j}): negative discriminant {disc:e}",
                    lambda
                )));
            }
        }
    }
    let norm = |f: SpectralFunction| -> Result<SpectralFunction> {
        match normalization {
            Normalization::Multiplicity => f.normalized(m),
            Normalization::None => Ok(f),
        }
    };
    let low_pass = norm(SpectralFunction::from_form(m, g.dilate(j_top)))?;
    let high_passes = (j_min..=j_top)
        .map(|j| norm(SpectralFunction::from_form(m, h.dilate(j))))
        .collect::<Result<Vec<_>>>()?;
    let mut bank = FilterBank {
        low_pass,
        high_passes,
        frame_bounds: FrameBounds { lower: 0.0, upper: 0.0 },
        params: BankParams { generator: Some(g.clone()), j_top, j_min, normalization },
        manifold_id: m.id(),
    };
    bank.frame_bounds = littlewood_paley(&bank, m)?;
    Ok(bank)
}

/// Output of the frame analysis operator `Φf = {T_g f, T_{h_γ} f}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameCoefficients {
    pub low: Signal,
    pub high: Vec<Signal>,
    pub norm_sq: f64,
}

pub fn frame_apply(bank: &FilterBank, m: &SpectralManifold, f: &Signal) -> Result<FrameCoefficients> {
    bank.check(m)?;
    m.check(f)?;
    let low = f.with_values(apply_raw(m, &bank.low_pass, f.values()));
    let high: Vec<Signal> = bank.high_passes.iter().map(|h| f.with_values(apply_raw(m, h, f.values()))).collect();
    let mut norm_sq = m.norm_raw(low.values()).powi(2);
    for h in &high {
        norm_sq += m.norm_raw(h.values()).powi(2);
    }
    Ok(FrameCoefficients { low, high, norm_sq })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{build_circle, build_sphere, SphereGrid};
    use crate::signals::random_bandlimited;
    use proptest::prelude::*;

    fn heat() -> SpectralForm {
        SpectralForm::Heat { t: 1.0 }
    }

    #[test]
    fn low_pass_validation() {
        let probe = probe_grid(200.0, 400);
        assert!(validate_low_pass(|l| (-l).exp(), &probe, 1e-6).passed);
        assert!(!validate_low_pass(|l| 1.0 + l, &probe, 1e-6).passed);
        let gauss = SpectralForm::Gaussian { scale: 10.0 };
        assert!(validate_low_pass(|l| gauss.eval(l), &probe, 1e-6).passed);
    }

    #[test]
    fn high_pass_validation() {
        let probe = probe_grid(200.0, 400);
        let h = SpectralForm::WaveletHighPass { low_pass: Box::new(heat()) };
        assert!(validate_high_pass(|l| h.eval(l), &probe).passed);
        assert!(!validate_high_pass(|l| l, &probe).passed);
        assert!(validate_high_pass(|_| 0.0, &probe).passed);
    }

    #[test]
    fn normalized_low_pass_alone_is_tight() {
        let m = build_sphere(3, SphereGrid::gauss(3)).unwrap();
        let vals = m.spectrum().multiplicities().iter().map(|&k| 1.0 / (k as f64).sqrt()).collect();
        let bank = FilterBank::new(&m, SpectralFunction::from_table(&m, vals).unwrap(), vec![]).unwrap();
        let b = bank.frame_bounds();
        assert!((b.lower - 1.0).abs() < 1e-15 && (b.upper - 1.0).abs() < 1e-15);
    }

    #[test]
    fn deep_wavelet_bank_bounds() {
        let m = build_circle(8, 1).unwrap();
        let bank = make_wavelet_bank(&m, &heat(), 0, -20, Normalization::Multiplicity).unwrap();
        let b = bank.frame_bounds();
        assert!((b.upper - 1.0).abs() <= 1e-12);
        assert!(1.0 - b.lower <= 1.0 - (-(2f64.powi(-20)) * 2.0).exp());
        assert!((1.0 - b.lower - telescope_residual(&heat(), -20, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn low_pass_only_bounds_follow_direct_scan() {
        let m = build_circle(32, 6).unwrap();
        let g = SpectralFunction::heat(&m, 0.3).normalized(&m).unwrap();
        let bank = FilterBank::new(&m, g, vec![]).unwrap();
        let direct: Vec<f64> = m.spectrum().uniques().iter().map(|l| (-0.6 * l).exp()).collect();
        let lo = direct.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = direct.iter().copied().fold(0.0, f64::max);
        assert!((bank.frame_bounds().lower - lo).abs() < 1e-15);
        assert!((bank.frame_bounds().upper - hi).abs() < 1e-15);
    }

    #[test]
    fn wavelet_values() {
        let m = build_sphere(3, SphereGrid::gauss(3)).unwrap();
        let bank = make_wavelet_bank(&m, &heat(), 1, -4, Normalization::Multiplicity).unwrap();
        for h in bank.high_passes() {
            assert_eq!(h.values()[0], 0.0);
        }
        assert_eq!(bank.low_pass().values()[0], 1.0);
        // λ = 2 has multiplicity 3; last high-pass is j = 1
        let h1 = bank.high_passes().last().unwrap().values()[1];
        let raw = ((-2.0f64).exp().powi(2) - (-4.0f64).exp().powi(2)).sqrt();
        assert!((h1 - raw / 3f64.sqrt()).abs() < 1e-15);

        let c = build_circle(8, 2).unwrap();
        let b = make_wavelet_bank(&c, &heat(), 1, -3, Normalization::None).unwrap();
        let h1_at_1 = b.high_passes().last().unwrap().values()[1];
        assert!((h1_at_1 * h1_at_1 - 0.117019644).abs() < 1e-8);
    }

    #[test]
    fn telescoping_identity_holds_per_scale() {
        let m = build_circle(64, 20).unwrap();
        let g = SpectralForm::Gaussian { scale: 3.0 };
        let bank = make_wavelet_bank(&m, &g, 2, -8, Normalization::None).unwrap();
        for (i, h) in bank.high_passes().iter().enumerate() {
            let j = bank.scale_of(i);
            for (v, &l) in h.values().iter().zip(m.spectrum().uniques()) {
                let a = g.eval(2f64.powi(j - 1) * l);
                let b = g.eval(2f64.powi(j) * l);
                assert!((v * v - (a * a - b * b)).abs() <= 1e-12);
                let hh = SpectralForm::WaveletHighPass { low_pass: Box::new(g.clone()) };
                assert_eq!(*v, hh.eval(2f64.powi(j) * l));
            }
        }
    }

    #[test]
    fn increasing_generator_is_rejected() {
        let m = build_circle(16, 3).unwrap();
        let bad = SpectralForm::Heat { t: -1.0 };
        assert!(matches!(
            make_wavelet_bank(&m, &bad, 0, -2, Normalization::Multiplicity),
            Err(Error::FilterRejected(_))
        ));
        assert!(make_wavelet_bank(&m, &heat(), 0, 1, Normalization::None).is_err());
    }

    #[test]
    fn residual_examples() {
        assert_eq!(telescope_residual(&heat(), -20, 0.0), 0.0);
        let r = telescope_residual(&heat(), -20, 1.0);
        assert!((r - 9.5367e-7).abs() < 1e-10);
        let probe = probe_grid(1e4, 200);
        for w in probe.windows(2) {
            assert!(telescope_residual(&heat(), -6, w[1]) >= telescope_residual(&heat(), -6, w[0]));
        }
    }

    #[test]
    fn j_min_selection() {
        let j = choose_j_min(&heat(), 2, 1.0, 1e-6).unwrap();
        assert_eq!(j, -20);
        let m = build_circle(256, 64).unwrap();
        let j = default_j_min(&m, &heat(), 2).unwrap();
        assert!(telescope_residual(&heat(), j, 4096.0) <= 1e-6);
        assert!(telescope_residual(&heat(), j + 1, 4096.0) > 1e-6);
    }

    #[test]
    fn constant_signal_passes_through_low_pass() {
        let m = build_circle(32, 6).unwrap();
        let bank = make_wavelet_bank(&m, &heat(), 1, -10, Normalization::Multiplicity).unwrap();
        let f = m.eigen_signal(0);
        let c = frame_apply(&bank, &m, &f).unwrap();
        assert!(c.high.iter().all(|h| h.max_abs() < 1e-14));
        assert!((c.norm_sq - 1.0).abs() < 1e-13);
        let z = frame_apply(&bank, &m, &m.zero_signal()).unwrap();
        assert_eq!(z.norm_sq, 0.0);
    }

    #[test]
    fn unnormalized_sphere_bank_overshoots() {
        let m = build_sphere(8, SphereGrid::gauss(8)).unwrap();
        let g = heat();
        let j = default_j_min(&m, &g, 2).unwrap();
        let bad = make_wavelet_bank(&m, &g, 2, j, Normalization::None).unwrap();
        assert!(bad.frame_bounds().upper >= 3.0);
        assert!(bad.require_contractive().is_err());
        let good = make_wavelet_bank(&m, &g, 2, j, Normalization::Multiplicity).unwrap();
        assert!((good.frame_bounds().upper - 1.0).abs() < 1e-12);
        good.require_contractive().unwrap();
    }

    #[test]
    fn descriptor_serializes() {
        let m = build_circle(16, 3).unwrap();
        let bank = make_wavelet_bank(&m, &heat(), 0, -3, Normalization::Multiplicity).unwrap();
        let d = bank.descriptor(&m).unwrap();
        let back: BankDescriptor = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.high_passes.len(), 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        // Φ scales each eigenspace's energy by |g|² + Σ|h|²
        #[test]
        fn frame_energy_identity(seed in 0u64..10_000, norm in prop::bool::ANY) {
            let m = build_sphere(4, SphereGrid::gauss(4)).unwrap();
            let nz = if norm { Normalization::Multiplicity } else { Normalization::None };
            let bank = make_wavelet_bank(&m, &heat(), 1, -12, nz).unwrap();
            let f = random_bandlimited(&m, seed, None);
            let c = frame_apply(&bank, &m, &f).unwrap();
            let sums = lp_sums(&bank);
            let mut want = 0.0;
            for (g, &l) in m.spectrum().uniques().iter().enumerate() {
                want += sums[g] * m.norm(&m.project_eigenspace(&f, l).unwrap()).unwrap().powi(2);
            }
            prop_assert!((c.norm_sq - want).abs() <= 1e-10 * want);
            let eb = energy_frame_bounds(&bank, &m).unwrap();
            let fsq = m.norm(&f).unwrap().powi(2);
            prop_assert!(c.norm_sq >= eb.lower * fsq * (1.0 - 1e-10));
            prop_assert!(c.norm_sq <= eb.upper * fsq * (1.0 + 1e-10));
        }

        #[test]
        fn unnormalized_bank_is_isometric_up_to_truncation(seed in 0u64..10_000) {
            let m = build_circle(64, 16).unwrap();
            let g = heat();
            let bank = make_wavelet_bank(&m, &g, 2, -12, Normalization::None).unwrap();
            let f = random_bandlimited(&m, seed, None);
            let c = frame_apply(&bank, &m, &f).unwrap();
            let nf = m.norm(&f).unwrap();
            let bound = telescope_residual(&g, -12, 256.0).sqrt() * nf;
            prop_assert!((c.norm_sq.sqrt() - nf).abs() <= bound);
        }
    }
}
