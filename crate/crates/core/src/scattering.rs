//! Scattering propagator `U_γ = |T_{h_γ} ·|` and the scattering transform
//! `S_γ f = T_g U_γ f` over all paths up to a maximal order.
//!
//! Each spectral operator acts on the retained band, so the modulus output is
//! implicitly projected back onto the band before the next filter. The energy
//! removed by that projection is recorded per order.

use crate::error::{Error, Result};
use crate::filters::FilterBank;
use crate::manifold::{ManifoldId, Signal, SpectralManifold};
use crate::spectral::apply_coefficients;
use crate::Complex64;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

pub const DEFAULT_PATH_CAP: usize = 100_000;
pub const DEFAULT_MAX_ORDER: usize = 3;

/// Sequence of high-pass indices, applied first to last.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ScatteringPath(pub Vec<usize>);

impl ScatteringPath {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn child(&self, index: usize) -> Self {
        let mut v = self.0.clone();
        v.push(index);
        Self(v)
    }

    pub fn parent(&self) -> Option<Self> {
        if self.0.is_empty() {
            None
        } else {
            Some(Self(self.0[..self.0.len() - 1].to_vec()))
        }
    }
}

impl Ord for ScatteringPath {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for ScatteringPath {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ScatteringPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

impl FromStr for ScatteringPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| Error::InvalidConfig(format!("bad path {s:?}")))?;
        if inner.trim().is_empty() {
            return Ok(Self::empty());
        }
        inner
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| Error::InvalidConfig(format!("bad path {s:?}"))))
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

/// `Σ_{m=0}^{max_order} n^m`, saturating.
pub fn path_count(n_filters: usize, max_order: usize) -> u128 {
    let mut total: u128 = 0;
    let mut term: u128 = 1;
    for _ in 0..=max_order {
        total = total.saturating_add(term);
        term = term.saturating_mul(n_filters as u128);
    }
    total
}

pub fn enumerate_paths(n_filters: usize, max_order: usize) -> Result<Vec<ScatteringPath>> {
    enumerate_paths_capped(n_filters, max_order, DEFAULT_PATH_CAP)
}

/// All paths of order `0..=max_order`, shorter first, lexicographic within
/// an order.
pub fn enumerate_paths_capped(n_filters: usize, max_order: usize, cap: usize) -> Result<Vec<ScatteringPath>> {
    if n_filters == 0 {
        return Err(Error::InvalidConfig("at least one high-pass filter is required".into()));
    }
    let count = path_count(n_filters, max_order);
    if count > cap as u128 {
        return Err(Error::PathCap { count, cap });
    }
    let mut out = vec![ScatteringPath::empty()];
    let mut level = vec![ScatteringPath::empty()];
    for _ in 0..max_order {
        let mut next = Vec::with_capacity(level.len() * n_filters);
        for p in &level {
            for i in 0..n_filters {
                next.push(p.child(i));
            }
        }
        out.extend(next.iter().cloned());
        level = next;
    }
    Ok(out)
}

fn check_path(bank: &FilterBank, path: &ScatteringPath) -> Result<()> {
    for &i in path.indices() {
        if i >= bank.n_high() {
            return Err(Error::PathIndex { index: i, len: bank.n_high() });
        }
    }
    Ok(())
}

/// `U_γ f = U_{γ_m} ⋯ U_{γ_1} f`; the empty path returns `f` unchanged.
pub fn propagate_path(bank: &FilterBank, m: &SpectralManifold, path: &ScatteringPath, f: &Signal) -> Result<Signal> {
    bank.check(m)?;
    m.check(f)?;
    check_path(bank, path)?;
    let mut u = f.values().to_vec();
    for &i in path.indices() {
        let mut c = m.fourier_raw(&u);
        apply_coefficients(m, &bank.high_passes()[i], &mut c);
        u = m.synthesize_raw(&c).into_iter().map(|v| Complex64::new(v.norm(), 0.0)).collect();
    }
    Ok(f.with_values(u))
}

#[derive(Clone, Debug)]
pub struct ScatterOptions {
    pub keep_propagated: bool,
    pub path_cap: usize,
}

impl Default for ScatterOptions {
    fn default() -> Self {
        Self { keep_propagated: false, path_cap: DEFAULT_PATH_CAP }
    }
}

/// Energy bookkeeping for one order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderDiagnostics {
    pub order: usize,
    pub paths: usize,
    /// `Σ ‖S_γ f‖²`
    pub output_energy: f64,
    /// `Σ ‖U_γ f‖²`
    pub propagated_energy: f64,
    /// `Σ (‖U_γ f‖² − ‖P U_γ f‖²)` with `P` the band projection.
    pub discarded_energy: f64,
}

impl OrderDiagnostics {
    pub fn discarded_fraction(&self) -> f64 {
        if self.propagated_energy > 0.0 {
            self.discarded_energy / self.propagated_energy
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScatteringCoefficients {
    pub entries: BTreeMap<ScatteringPath, Signal>,
    pub propagated: Option<BTreeMap<ScatteringPath, Signal>>,
    pub max_order: usize,
    pub bank_id: u64,
    pub manifold_id: ManifoldId,
    pub diagnostics: Vec<OrderDiagnostics>,
    /// `‖U f‖²_{2,2}` over the enumerated paths.
    pub propagated_norm_sq: f64,
}

pub fn scatter(bank: &FilterBank, m: &SpectralManifold, f: &Signal, max_order: usize) -> Result<ScatteringCoefficients> {
    scatter_with(bank, m, f, max_order, &ScatterOptions::default())
}

/// `S_γ f = T_g U_γ f` for every path up to `max_order`, evaluated as a
/// prefix-tree traversal so each `U_γ f` is analysed once.
pub fn scatter_with(
    bank: &FilterBank,
    m: &SpectralManifold,
    f: &Signal,
    max_order: usize,
    opts: &ScatterOptions,
) -> Result<ScatteringCoefficients> {
    bank.check(m)?;
    m.check(f)?;
    let n_high = bank.n_high();
    let count = path_count(n_high.max(1), max_order);
    if n_high == 0 && max_order > 0 {
        return Err(Error::InvalidConfig("scattering beyond order 0 needs high-pass filters".into()));
    }
    if count > opts.path_cap as u128 {
        return Err(Error::PathCap { count, cap: opts.path_cap });
    }
    let mut entries = BTreeMap::new();
    let mut propagated = opts.keep_propagated.then(BTreeMap::new);
    let mut diagnostics = Vec::with_capacity(max_order + 1);
    let mut level: Vec<(ScatteringPath, Vec<Complex64>)> = vec![(ScatteringPath::empty(), f.values().to_vec())];
    let mut total_u = 0.0;
    for order in 0..=max_order {
        let mut diag = OrderDiagnostics {
            order,
            paths: level.len(),
            output_energy: 0.0,
            propagated_energy: 0.0,
            discarded_energy: 0.0,
        };
        let mut next = Vec::with_capacity(if order < max_order { level.len() * n_high } else { 0 });
        for (path, u) in level {
            let coeffs = m.fourier_raw(&u);
            let u_sq = m.norm_raw(&u).powi(2);
            let band_sq: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
            diag.propagated_energy += u_sq;
            if order > 0 {
                diag.discarded_energy += (u_sq - band_sq).max(0.0);
            }
            let mut low = coeffs.clone();
            apply_coefficients(m, bank.low_pass(), &mut low);
            let s = m.synthesize_raw(&low);
            diag.output_energy += m.norm_raw(&s).powi(2);
            entries.insert(path.clone(), f.with_values(s));
            if order < max_order {
                for (i, h) in bank.high_passes().iter().enumerate() {
                    let mut c = coeffs.clone();
                    apply_coefficients(m, h, &mut c);
                    let child: Vec<Complex64> =
                        m.synthesize_raw(&c).into_iter().map(|v| Complex64::new(v.norm(), 0.0)).collect();
                    next.push((path.child(i), child));
                }
            }
            if let Some(p) = propagated.as_mut() {
                p.insert(path, f.with_values(u));
            }
        }
        total_u += diag.propagated_energy;
        diagnostics.push(diag);
        level = next;
    }
    Ok(ScatteringCoefficients {
        entries,
        propagated,
        max_order,
        bank_id: bank.fingerprint(),
        manifold_id: m.id(),
        diagnostics,
        propagated_norm_sq: total_u,
    })
}

impl ScatteringCoefficients {
    pub fn get(&self, path: &ScatteringPath) -> Option<&Signal> {
        self.entries.get(path)
    }

    /// `‖S f‖_{2,2}`.
    pub fn norm(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.output_energy).sum::<f64>().sqrt()
    }

    /// `‖U f‖_{2,2}` truncated at `max_order`.
    pub fn propagated_norm(&self) -> f64 {
        self.propagated_norm_sq.sqrt()
    }

    /// Per-path norms in path order.
    pub fn path_norms(&self, m: &SpectralManifold) -> Vec<(ScatteringPath, f64)> {
        self.entries.iter().map(|(p, s)| (p.clone(), m.norm_raw(s.values()))).collect()
    }

    /// CSV with one row per path: `path,order,norm,v0,v1,...` (real parts).
    pub fn write_csv(&self, m: &SpectralManifold, path: &Path, per_point: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["path".to_string(), "order".to_string(), "norm".to_string()];
        if per_point {
            header.extend((0..m.n_points()).map(|i| format!("x{i}")));
        }
        w.write_record(&header).map_err(|e| Error::Structure(e.to_string()))?;
        for (p, s) in &self.entries {
            let mut row = vec![p.to_string(), p.order().to_string(), format!("{:e}", m.norm_raw(s.values()))];
            if per_point {
                row.extend(s.values().iter().map(|v| format!("{:e}", v.re)));
            }
            w.write_record(&row).map_err(|e| Error::Structure(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Structure(e.to_string()))?;
        crate::report::write_atomic(path, &bytes)
    }

    pub fn summary(&self) -> ScatteringSummary {
        ScatteringSummary {
            bank_id: format!("{:016x}", self.bank_id),
            manifold_id: self.manifold_id.to_string(),
            max_order: self.max_order,
            paths: self.entries.len(),
            norm: self.norm(),
            propagated_norm: self.propagated_norm(),
            orders: self.diagnostics.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringSummary {
    pub bank_id: String,
    pub manifold_id: String,
    pub max_order: usize,
    pub paths: usize,
    pub norm: f64,
    pub propagated_norm: f64,
    pub orders: Vec<OrderDiagnostics>,
}

/// `(Σ_γ ‖S₁[γ] − S₂[γ]‖²)^{1/2}`.
pub fn scattering_distance(m: &SpectralManifold, a: &ScatteringCoefficients, b: &ScatteringCoefficients) -> Result<f64> {
    if a.bank_id != b.bank_id {
        return Err(Error::Structure("coefficients come from different filter banks".into()));
    }
    if a.manifold_id != b.manifold_id || a.manifold_id != m.id() {
        return Err(Error::ManifoldMismatch { expected: m.id(), found: b.manifold_id });
    }
    if a.max_order != b.max_order || a.entries.len() != b.entries.len() {
        return Err(Error::Structure("coefficients have different path sets".into()));
    }
    let mut total = 0.0;
    for ((pa, sa), (pb, sb)) in a.entries.iter().zip(&b.entries) {
        if pa != pb {
            return Err(Error::Structure(format!("path {pa} has no counterpart")));
        }
        let d: Vec<Complex64> = sa.values().iter().zip(sb.values()).map(|(x, y)| x - y).collect();
        total += m.norm_raw(&d).powi(2);
    }
    Ok(total.sqrt())
}
