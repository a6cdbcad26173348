use super::maps::{Deformation, DeformationMap};
use super::measures::{compute_a1, compute_a2, compute_a3, sup_displacement, A3Options};
use super::{commutator_norm, heat_trace_moment, Pullback};
use crate::error::{Error, Result};
use crate::filters::{
    default_j_min, energy_frame_bounds, frame_apply, make_wavelet_bank, telescope_residual, FilterBank, Normalization,
};
use crate::linalg::log_log_slope;
use crate::manifold::{ManifoldKind, Signal, SpectralManifold};
use crate::report::ExperimentReport;
use crate::scattering::{scatter, scattering_distance};
use crate::signals::random_bandlimited;
use crate::spectral::{apply_operator, SpectralForm, SpectralFunction};
use serde::{Deserialize, Serialize};

/// Integer `J` with `2^J = t`.
pub fn dyadic_exponent(t: f64) -> Result<i32> {
    let j = t.log2().round();
    if !(t > 0.0) || (2f64.powi(j as i32) - t).abs() > 1e-12 * t {
        return Err(Error::InvalidConfig(format!("scale {t} is not a power of two")));
    }
    Ok(j as i32)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoInvarianceConfig {
    /// Heat times `t = 2^J`; the low-pass at scale `t` is `e^{−tλ}`.
    pub scales: Vec<f64>,
    pub order: usize,
    /// Finest wavelet scale; per-scale default when absent.
    pub j_min: Option<i32>,
    pub normalization: Normalization,
}

impl Default for IsoInvarianceConfig {
    fn default() -> Self {
        Self { scales: vec![1.0, 2.0, 4.0], order: 2, j_min: None, normalization: Normalization::Multiplicity }
    }
}

/// Heat wavelet bank at time `t = 2^J`.
pub fn heat_bank(m: &SpectralManifold, t: f64, j_min: Option<i32>, normalization: Normalization) -> Result<FilterBank> {
    let g = SpectralForm::Heat { t: 1.0 };
    let j = dyadic_exponent(t)?;
    let j_min = match j_min {
        Some(v) => v.min(j),
        None => default_j_min(m, &g, j)?,
    };
    make_wavelet_bank(m, &g, j, j_min, normalization)
}

/// `‖Sf − S V_ζ f‖` across heat scales, normalised by `‖ζ‖_∞ ‖Uf‖`.
pub fn isometry_invariance(
    m: &SpectralManifold,
    f: &Signal,
    zeta: &Deformation,
    cfg: &IsoInvarianceConfig,
) -> Result<ExperimentReport> {
    let map = zeta.bind(m)?;
    let v = Pullback::new(&map)?;
    let vf = v.apply(m, f)?;
    let disp = sup_displacement(&map)?;
    let d = m.dim() as i32;
    let mut scales = cfg.scales.clone();
    scales.sort_by(f64::total_cmp);
    let mut rep = ExperimentReport::new(
        "iso_invariance",
        &["t", "J", "distance", "sup_disp", "u_norm", "ratio", "ratio_t_d", "equivariance", "discarded_fraction"],
    );
    rep.params = serde_json::json!({
        "deformation": zeta,
        "config": cfg,
    });
    rep.series.push(("t".into(), "distance".into()));
    rep.series.push(("t".into(), "ratio".into()));
    for &t in &scales {
        let bank = heat_bank(m, t, cfg.j_min, cfg.normalization)?;
        let s1 = scatter(&bank, m, f, cfg.order)?;
        let s2 = scatter(&bank, m, &vf, cfg.order)?;
        let dist = scattering_distance(m, &s1, &s2)?;
        let u = s1.propagated_norm();
        let ratio = if disp * u > 0.0 { dist / (disp * u) } else { 0.0 };
        let discarded = s1.diagnostics.iter().map(|o| o.discarded_fraction()).fold(0.0, f64::max);
        // max_γ ‖S_γ V f − V S_γ f‖
        let mut equi: f64 = 0.0;
        for (p, a) in &s1.entries {
            let va = v.apply(m, a)?;
            equi = equi.max(m.norm(&va.sub(&s2.entries[p])?)?);
        }
        rep.push_row(vec![t, dyadic_exponent(t)? as f64, dist, disp, u, ratio, ratio * t.powi(d), equi, discarded]);
    }
    let dist = rep.column("distance").unwrap();
    let ratio = rep.column("ratio").unwrap();
    let mut mono = true;
    let mut detail = Vec::new();
    for i in 1..dist.len() {
        if dist[i] > dist[i - 1] * (1.0 + 1e-9) + 1e-12 {
            mono = false;
            detail.push(format!("t={} {:e} > t={} {:e}", scales[i], dist[i], scales[i - 1], dist[i - 1]));
        }
    }
    rep.check(
        "distance nonincreasing in t",
        mono,
        if mono { format!("{dist:?}") } else { detail.join("; ") },
    );
    // interior transitions only: drop the first and last scale
    if scales.len() >= 3 {
        let mut ok = true;
        let mut factors = Vec::new();
        for i in 1..scales.len() - 2 {
            if (scales[i + 1] / scales[i] - 2.0).abs() > 1e-12 {
                continue;
            }
            let exact = dist[i + 1] <= 1e-9;
            let factor = if ratio[i] > 0.0 { ratio[i + 1] / ratio[i] } else { 0.0 };
            factors.push(format!("{}->{}: {factor:.4}", scales[i], scales[i + 1]));
            if !(exact || factor <= 0.5) {
                ok = false;
            }
        }
        rep.check("ratio halves per doubling on the middle range", ok, factors.join(", "));
    }
    rep.fitted.insert("sup_disp".into(), disp);
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffeoStabilityConfig {
    pub taus: Vec<f64>,
    /// Parameter at which bound constants are fitted.
    pub anchor: f64,
    /// Largest parameter of the linear regime.
    pub linear_max: f64,
    pub linear_tol: f64,
    pub a3: A3Options,
}

impl Default for DiffeoStabilityConfig {
    fn default() -> Self {
        Self {
            taus: vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.08, 0.11, 0.14, 0.17, 0.2],
            anchor: 0.05,
            linear_max: 0.05,
            linear_tol: 0.10,
            a3: A3Options::default(),
        }
    }
}

/// Spectral sums entering the commutator bound shapes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSums {
    /// `(Σ η(λ_k)²)^{1/2}`
    pub l2: f64,
    /// `Σ η(λ_k) λ_k^{d/2}`
    pub half_d: f64,
    /// `Σ η(λ_k) λ_k^{(d+1)/4}`
    pub quarter_d1: f64,
}

pub fn filter_sums(m: &SpectralManifold, eta: &SpectralFunction) -> FilterSums {
    let d = m.dim() as f64;
    let per = eta.per_eigenpair(m);
    let mut s = FilterSums { l2: 0.0, half_d: 0.0, quarter_d1: 0.0 };
    for (e, &l) in per.iter().zip(m.eigenvalues()) {
        let l = l.max(0.0);
        s.l2 += e * e;
        s.half_d += e.abs() * l.powf(d / 2.0);
        s.quarter_d1 += e.abs() * l.powf((d + 1.0) / 4.0);
    }
    s.l2 = s.l2.sqrt();
    s
}

/// Commutator norms `‖[T_η, V_ζτ]‖` along a family, with the A3-based and
/// (on two-point homogeneous spaces) A1-based bound shapes fitted at one
/// anchor parameter.
pub fn diffeo_stability(
    m: &SpectralManifold,
    eta: &SpectralFunction,
    family: impl Fn(f64) -> Deformation,
    cfg: &DiffeoStabilityConfig,
) -> Result<ExperimentReport> {
    let sums = filter_sums(m, eta);
    let homogeneous = m.is_two_point_homogeneous();
    let mesh = m.kind() == ManifoldKind::Mesh;
    let mut taus = cfg.taus.clone();
    taus.sort_by(f64::total_cmp);
    let anchor_idx = taus
        .iter()
        .position(|t| (t - cfg.anchor).abs() <= 1e-12)
        .ok_or_else(|| Error::InvalidConfig(format!("anchor {} is not in the sweep", cfg.anchor)))?;
    let mut rep = ExperimentReport::new(
        "diffeo_stability",
        &["tau", "sup_disp", "a1", "a2", "a3", "commutator", "shape_a3", "shape_a1", "bound_a3", "bound_a1"],
    );
    rep.params = serde_json::json!({
        "family": family(cfg.anchor).label(),
        "filter": eta.label(),
        "config": cfg,
        "a3_surrogate": mesh,
    });
    rep.series.push(("tau".into(), "commutator".into()));
    let mut raw = Vec::new();
    for &tau in &taus {
        let d = family(tau);
        let map: DeformationMap<'_> = d.bind(m)?;
        let disp = sup_displacement(&map)?;
        let a1 = compute_a1(&map, None)?.value;
        let a2 = compute_a2(&map)?;
        let a3 = if mesh { disp } else { compute_a3(&map, &cfg.a3)?.value };
        let c = commutator_norm(&map, eta)?.value;
        let shape3 = sums.l2 * a2 + sums.half_d * a3;
        let shape1 = if homogeneous { a1 * sums.quarter_d1 + a2 * sums.l2 } else { f64::NAN };
        raw.push([tau, disp, a1, a2, a3, c, shape3, shape1]);
    }
    let fit = |k: usize| -> f64 {
        let s = raw[anchor_idx][k];
        if s > 0.0 {
            raw[anchor_idx][5] / s
        } else {
            f64::NAN
        }
    };
    let (c3, c1) = (fit(6), fit(7));
    for r in &raw {
        let mut row = r.to_vec();
        row.push(c3 * r[6]);
        row.push(c1 * r[7]);
        rep.push_row(row);
    }
    rep.fitted.insert("C_a3".into(), c3);
    if homogeneous {
        rep.fitted.insert("C_a1".into(), c1);
    }
    rep.fitted.insert("anchor_tau".into(), cfg.anchor);

    let col = |k: usize| raw.iter().map(|r| r[k]).collect::<Vec<f64>>();
    let comm = col(5);
    if let Some(i0) = taus.iter().position(|&t| t == 0.0) {
        rep.check("commutator vanishes at tau=0", comm[i0] <= 1e-12, format!("{:e}", comm[i0]));
    }
    let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
    rep.check("commutator strictly increasing", increasing(&comm), format!("{comm:?}"));
    for (name, k) in [("a1", 2), ("a2", 3), ("a3", 4)] {
        let v = col(k);
        rep.check(&format!("{name} strictly increasing"), increasing(&v), format!("{v:?}"));
    }
    let lin: Vec<(f64, f64)> =
        taus.iter().zip(&comm).filter(|(t, _)| **t > 0.0 && **t <= cfg.linear_max + 1e-12).map(|(t, c)| (*t, *c)).collect();
    if lin.len() >= 2 {
        let slope = lin.iter().map(|(t, c)| t * c).sum::<f64>() / lin.iter().map(|(t, _)| t * t).sum::<f64>();
        let dev = lin.iter().map(|(t, c)| (c - slope * t).abs() / (slope * t)).fold(0.0, f64::max);
        rep.check(
            &format!("commutator linear for tau <= {}", cfg.linear_max),
            dev <= cfg.linear_tol,
            format!("max relative deviation {dev:.4} from slope {slope:.6}"),
        );
        rep.fitted.insert("linear_slope".into(), slope);
    }
    let dominates = |k: usize, c: f64| -> (bool, String) {
        let mut worst: f64 = 0.0;
        let mut ok = true;
        for r in &raw {
            let b = c * r[k];
            if r[5] > b * (1.0 + 1e-9) + 1e-14 {
                ok = false;
            }
            if b > 0.0 {
                worst = worst.max(r[5] / b);
            }
        }
        (ok, format!("max measured/bound {worst:.4} with C fitted at tau={}", cfg.anchor))
    };
    let (ok3, d3) = dominates(6, c3);
    rep.check(if mesh { "sup-displacement shape dominates" } else { "A3 shape dominates" }, ok3, d3);
    if homogeneous {
        let (ok1, d1) = dominates(7, c1);
        rep.check("A1 shape dominates", ok1, d1);
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameCheckConfig {
    pub signals: usize,
    pub seed: u64,
    pub upper_tol: f64,
    pub lower_tol: f64,
    pub isometry_tol: f64,
}

impl Default for FrameCheckConfig {
    fn default() -> Self {
        Self { signals: 100, seed: 1, upper_tol: 1e-12, lower_tol: 2e-6, isometry_tol: 1e-3 }
    }
}

/// Frame bounds of a bank and the energy of its analysis on random signals.
pub fn frame_check(m: &SpectralManifold, bank: &FilterBank, cfg: &FrameCheckConfig) -> Result<ExperimentReport> {
    let lp = bank.frame_bounds();
    let energy = energy_frame_bounds(bank, m)?;
    let mut rep = ExperimentReport::new("frame_check", &["signal", "norm_sq", "frame_energy", "relative_error"]);
    rep.params = serde_json::json!({ "bank": bank.params(), "config": cfg });
    rep.series.push(("signal".into(), "relative_error".into()));
    let mut sandwich = true;
    let mut worst: f64 = 0.0;
    for i in 0..cfg.signals {
        let f = random_bandlimited(m, cfg.seed.wrapping_add(i as u64), None);
        let n2 = m.norm(&f)?.powi(2);
        let e = frame_apply(bank, m, &f)?.norm_sq;
        if e < lp.lower * n2 * (1.0 - 1e-12) || e > lp.upper * n2 * (1.0 + 1e-12) {
            sandwich = false;
        }
        let rel = (e.sqrt() - n2.sqrt()).abs() / n2.sqrt();
        worst = worst.max(rel);
        rep.push_row(vec![i as f64, n2, e, rel]);
    }
    rep.fitted.insert("A".into(), lp.lower);
    rep.fitted.insert("B".into(), lp.upper);
    rep.fitted.insert("energy_A".into(), energy.lower);
    rep.fitted.insert("energy_B".into(), energy.upper);
    if let Some(g) = &bank.params().generator {
        let lmax = m.spectrum().uniques().last().copied().unwrap_or(0.0);
        rep.fitted.insert("telescope_residual_max".into(), telescope_residual(g, bank.params().j_min, lmax));
        rep.fitted.insert("telescope_residual_1".into(), telescope_residual(g, bank.params().j_min, 1.0));
        rep.fitted.insert("j_min".into(), bank.params().j_min as f64);
    }
    rep.check("upper frame bound is 1", (lp.upper - 1.0).abs() <= cfg.upper_tol, format!("B = {}", lp.upper));
    rep.check("lower frame bound near 1", lp.lower >= 1.0 - cfg.lower_tol, format!("A = {}", lp.lower));
    rep.check(
        "frame sandwich on random signals",
        sandwich,
        format!("A = {}, B = {}, energy bounds [{}, {}]", lp.lower, lp.upper, energy.lower, energy.upper),
    );
    rep.check(
        "wavelet transform is an isometry",
        worst <= cfg.isometry_tol,
        format!("max relative error {worst:e} over {} signals", cfg.signals),
    );
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatTraceConfig {
    pub alpha: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    /// Relative tolerance on the slope `−(d + 2α)/2`.
    pub slope_tol: f64,
}

impl Default for HeatTraceConfig {
    fn default() -> Self {
        Self { alpha: 0.0, t_min: 0.05, t_max: 0.8, points: 16, slope_tol: 0.15 }
    }
}

/// Log-log slope of `Σ λ_k^α e^{−tλ_k}` over log-spaced `t`.
pub fn heat_trace(m: &SpectralManifold, cfg: &HeatTraceConfig) -> Result<ExperimentReport> {
    if cfg.points < 2 || !(cfg.t_min > 0.0 && cfg.t_max > cfg.t_min) {
        return Err(Error::InvalidConfig("heat trace needs 0 < t_min < t_max and at least two points".into()));
    }
    let mut rep = ExperimentReport::new("heat_trace", &["t", "moment", "tail_ratio"]);
    rep.params = serde_json::json!({ "config": cfg });
    rep.series.push(("t".into(), "moment".into()));
    let ratio = (cfg.t_max / cfg.t_min).powf(1.0 / (cfg.points - 1) as f64);
    let mut flagged = Vec::new();
    for i in 0..cfg.points {
        let t = cfg.t_min * ratio.powi(i as i32);
        let h = heat_trace_moment(m, cfg.alpha, t)?;
        if h.tail_flagged {
            flagged.push(t);
        }
        rep.push_row(vec![t, h.value, h.tail_ratio]);
    }
    let ts = rep.column("t").unwrap();
    let ys = rep.column("moment").unwrap();
    let slope = log_log_slope(&ts, &ys);
    let want = -(m.dim() as f64 + 2.0 * cfg.alpha) / 2.0;
    rep.fitted.insert("slope".into(), slope);
    rep.fitted.insert("expected_slope".into(), want);
    rep.check(
        "log-log slope",
        (slope - want).abs() <= cfg.slope_tol * want.abs(),
        format!("slope {slope:.4} vs {want} (tolerance {}%)", cfg.slope_tol * 100.0),
    );
    rep.check("retained band resolves the trace", flagged.is_empty(), format!("tail flagged at t = {flagged:?}"));
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpulseConfig {
    /// Source vertices; three extreme vertices when empty.
    pub vertices: Vec<usize>,
    /// Dilation factors `2^J`.
    pub scales: Vec<f64>,
    pub energy_fraction: f64,
}

impl Default for ImpulseConfig {
    fn default() -> Self {
        Self { vertices: Vec::new(), scales: vec![1.0, 2.0, 4.0], energy_fraction: 0.95 }
    }
}

/// Per-vertex responses `T_g δ_x`, one field per source and scale.
#[derive(Clone, Debug, PartialEq)]
pub struct ImpulseField {
    pub vertex: usize,
    pub scale: f64,
    pub values: Vec<f64>,
}

/// Vertices of largest `y`, smallest `y` and smallest `z`.
pub fn extreme_vertices(m: &SpectralManifold) -> Vec<usize> {
    let p = m.points();
    let arg = |key: &dyn Fn(usize) -> f64| (0..p.len()).max_by(|&a, &b| key(a).total_cmp(&key(b))).unwrap_or(0);
    let mut v = vec![arg(&|i| p[i][1]), arg(&|i| -p[i][1]), arg(&|i| -p[i][2])];
    v.dedup();
    v
}

/// Smallest radius whose geodesic ball around `source` holds `fraction` of
/// the energy of `values`.
pub fn support_radius(m: &SpectralManifold, source: usize, values: &[f64], fraction: f64) -> f64 {
    let d = m.distances_from(source);
    let w = m.weights();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    let total: f64 = values.iter().zip(w).map(|(v, w)| w * v * v).sum();
    let mut acc = 0.0;
    for &i in &order {
        acc += w[i] * values[i] * values[i];
        if acc >= fraction * total {
            return d[i];
        }
    }
    d[*order.last().unwrap_or(&source)]
}

/// Impulse responses of the dilated Gaussian `g(λ) = exp(−(2^J λ / λ_max)²)`
/// with their effective support radii.
pub fn impulse_responses(m: &SpectralManifold, cfg: &ImpulseConfig) -> Result<(ExperimentReport, Vec<ImpulseField>)> {
    let vertices = if cfg.vertices.is_empty() { extreme_vertices(m) } else { cfg.vertices.clone() };
    if let Some(&v) = vertices.iter().find(|&&v| v >= m.n_points()) {
        return Err(Error::InvalidConfig(format!("vertex {v} out of range")));
    }
    let lmax = m.spectrum().uniques().last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let base = SpectralForm::Gaussian { scale: lmax };
    let mut rep = ExperimentReport::new("impulse", &["vertex", "scale", "support_radius", "mass", "peak"]);
    rep.params = serde_json::json!({ "vertices": vertices, "config": cfg, "lambda_ref": lmax });
    let mut fields = Vec::new();
    let mut mass_err: f64 = 0.0;
    let mut increasing = true;
    let mut detail = Vec::new();
    for &v in &vertices {
        let delta = crate::signals::delta(m, v)?;
        let mut radii = Vec::new();
        for &s in &cfg.scales {
            let j = dyadic_exponent(s)?;
            let g = SpectralFunction::from_form(m, base.dilate(j));
            let u = apply_operator(m, &g, &delta)?.re();
            let r = support_radius(m, v, &u, cfg.energy_fraction);
            let mass: f64 = u.iter().zip(m.weights()).map(|(a, w)| a * w).sum();
            mass_err = mass_err.max((mass - g.values()[0]).abs());
            let peak = u.iter().cloned().fold(f64::MIN, f64::max);
            rep.push_row(vec![v as f64, s, r, mass, peak]);
            radii.push(r);
            fields.push(ImpulseField { vertex: v, scale: s, values: u });
        }
        if !radii.windows(2).all(|w| w[1] > w[0]) {
            increasing = false;
        }
        detail.push(format!("vertex {v}: {radii:?}"));
    }
    rep.check("support radius strictly increasing across scales", increasing, detail.join("; "));
    rep.check("impulse mass equals g(0)", mass_err <= 1e-8, format!("max deviation {mass_err:e}"));
    Ok((rep, fields))
}

/// Per-vertex field table: position then one column per response.
pub fn impulse_field_table(m: &SpectralManifold, fields: &[ImpulseField]) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut cols: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    cols.extend(fields.iter().map(|f| format!("v{}_s{}", f.vertex, f.scale)));
    let rows = m
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut r = p.to_vec();
            r.extend(fields.iter().map(|f| f.values[i]));
            r
        })
        .collect();
    (cols, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{build_circle, build_flat_torus, build_sphere, mesh_spectral, SphereGrid, MESH_CLUSTER_TOL};
    use std::f64::consts::PI;

    #[test]
    fn dyadic_scales() {
        assert_eq!(dyadic_exponent(0.25).unwrap(), -2);
        assert_eq!(dyadic_exponent(4.0).unwrap(), 2);
        assert!(dyadic_exponent(3.0).is_err());
    }

    #[test]
    fn grid_aligned_rotation_is_exactly_equivariant() {
        let m = build_circle(64, 12).unwrap();
        let f = random_bandlimited(&m, 2, None);
        let z = Deformation::circle_rotation(2.0 * PI * 3.0 / 64.0);
        let cfg = IsoInvarianceConfig { j_min: Some(-4), ..Default::default() };
        let rep = isometry_invariance(&m, &f, &z, &cfg).unwrap();
        assert!(rep.column("equivariance").unwrap().iter().all(|d| *d <= 1e-10));
        let dist = rep.column("distance").unwrap();
        assert!(dist.iter().all(|d| *d > 0.0));
        assert!(rep.check_named("distance nonincreasing in t").unwrap().passed, "{dist:?}");
    }

    #[test]
    fn off_grid_distances_are_reported() {
        let m = build_circle(64, 12).unwrap();
        let f = random_bandlimited(&m, 2, None);
        let cfg = IsoInvarianceConfig { j_min: Some(-4), scales: vec![0.5, 1.0, 2.0, 4.0], ..Default::default() };
        let rep = isometry_invariance(&m, &f, &Deformation::circle_rotation(0.37), &cfg).unwrap();
        assert_eq!(rep.rows.len(), 4);
        assert!(rep.column("distance").unwrap().iter().all(|d| *d > 0.0));
        assert!(rep.check_named("distance nonincreasing in t").is_some());
    }

    #[test]
    fn diffeo_sweep_on_torus_uses_a3_only() {
        let m = build_flat_torus(16, 32, (1.0, 2.0), 3).unwrap();
        let eta = SpectralFunction::heat(&m, 1.0);
        let cfg = DiffeoStabilityConfig {
            taus: vec![0.0, 0.05, 0.1],
            anchor: 0.05,
            linear_max: 0.05,
            a3: A3Options { grid: 240, refine_tol: 1e-8 },
            ..Default::default()
        };
        let rep = diffeo_stability(&m, &eta, |t| Deformation::TorusWarp { tau: t }, &cfg).unwrap();
        assert!(rep.check_named("A1 shape dominates").is_none());
        assert!(rep.check_named("A3 shape dominates").is_some());
        assert!(rep.check_named("commutator vanishes at tau=0").unwrap().passed);
        assert!(rep.check_named("commutator strictly increasing").unwrap().passed);
        let row0 = &rep.rows[0];
        assert!(row0[1..6].iter().all(|v| v.abs() <= 1e-12), "{row0:?}");
    }

    #[test]
    fn heat_trace_slope_on_the_circle() {
        let m = build_circle(256, 64).unwrap();
        let rep = heat_trace(&m, &HeatTraceConfig::default()).unwrap();
        assert!(rep.passed(), "{:?}", rep.summary_lines());
        let coarse = build_circle(16, 4).unwrap();
        let rep = heat_trace(&coarse, &HeatTraceConfig::default()).unwrap();
        assert!(!rep.check_named("retained band resolves the trace").unwrap().passed);
    }

    #[test]
    fn unnormalized_bank_is_isometric_but_not_lp_tight() {
        let m = build_sphere(8, SphereGrid::gauss(8)).unwrap();
        let g = SpectralForm::Heat { t: 1.0 };
        let bank = make_wavelet_bank(&m, &g, 2, default_j_min(&m, &g, 2).unwrap(), Normalization::None).unwrap();
        let rep = frame_check(&m, &bank, &FrameCheckConfig { signals: 10, ..Default::default() }).unwrap();
        assert!(rep.check_named("wavelet transform is an isometry").unwrap().passed);
        assert!(rep.fitted["B"] >= 3.0);
        assert!((rep.fitted["energy_B"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn impulse_on_icosphere() {
        let m = mesh_spectral(&crate::mesh::Mesh::icosphere(2), 36, MESH_CLUSTER_TOL).unwrap();
        let (rep, fields) = impulse_responses(&m, &ImpulseConfig::default()).unwrap();
        assert_eq!(fields.len(), 9);
        assert!(rep.check_named("impulse mass equals g(0)").unwrap().passed);
        let (cols, rows) = impulse_field_table(&m, &fields);
        assert_eq!(cols.len(), 12);
        assert_eq!(rows.len(), m.n_points());
    }

    #[test]
    fn support_radius_of_a_delta_is_zero() {
        let m = build_circle(32, 4).unwrap();
        let mut v = vec![0.0; 32];
        v[5] = 1.0;
        assert_eq!(support_radius(&m, 5, &v, 0.95), 0.0);
    }
}
