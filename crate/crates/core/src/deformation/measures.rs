use super::maps::{Deformation, DeformationMap};
use crate::error::{Error, Result};
use crate::manifold::{Geometry, ManifoldKind, Point};
use crate::mesh;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `max_i r(x_i, ζ(x_i))`.
pub fn sup_displacement(map: &DeformationMap<'_>) -> Result<f64> {
    let mut s: f64 = 0.0;
    for p in map.manifold().points() {
        s = s.max(map.distance(p, &map.forward(p)?));
    }
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct A1Estimate {
    pub value: f64,
    /// Pairs closer than this are excluded.
    pub r_floor: f64,
    pub pairs: usize,
}

/// Source budget for mesh `A1`, which needs one shortest-path solve per
/// source and per image.
pub const MESH_A1_SOURCES: usize = 48;

/// `max |r(ζx, ζy) − r(x, y)| / r(x, y)` over sample pairs with
/// `r(x, y) ≥ r_floor` (one grid spacing by default).
pub fn compute_a1(map: &DeformationMap<'_>, r_floor: Option<f64>) -> Result<A1Estimate> {
    let m = map.manifold();
    let r_floor = r_floor.unwrap_or_else(|| m.grid_spacing());
    let floor = r_floor * (1.0 - 1e-12);
    let img = map.forward_samples()?;
    let n = m.n_points();
    let mut value: f64 = 0.0;
    let mut pairs = 0;
    if m.kind() == ManifoldKind::Mesh {
        let graph = m.edge_graph();
        let faces = &m.mesh().expect("mesh").faces;
        // image points as barycentric stencils over mesh vertices
        let stencils: Vec<([usize; 3], [f64; 3])> = img
            .iter()
            .map(|q| {
                let sp = map.project(q).expect("mesh locator");
                (faces[sp.face], sp.bary)
            })
            .collect();
        let stride = n.div_ceil(MESH_A1_SOURCES).max(1);
        for i in (0..n).step_by(stride) {
            let d0 = graph.shortest_paths(i);
            let (fi, bi) = stencils[i];
            let dv: Vec<Vec<f64>> = fi.iter().map(|&v| graph.shortest_paths(v)).collect();
            for j in 0..n {
                if j == i || d0[j] < floor {
                    continue;
                }
                let (fj, bj) = stencils[j];
                let mut rz = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        rz += bi[a] * bj[b] * dv[a][fj[b]];
                    }
                }
                value = value.max((rz - d0[j]).abs() / d0[j]);
                pairs += 1;
            }
        }
        return Ok(A1Estimate { value, r_floor, pairs });
    }
    let pts = m.points();
    for i in 0..n {
        for j in i + 1..n {
            let r = map.distance(&pts[i], &pts[j]);
            if r < floor {
                continue;
            }
            let rz = map.distance(&img[i], &img[j]);
            value = value.max((rz - r).abs() / r);
            pairs += 1;
        }
    }
    Ok(A1Estimate { value, r_floor, pairs })
}

/// `(sup |det Dζ| − 1) · sup |det Dζ^{-1}|` over the samples. Meshes use
/// the area ratio of each face's mapped triangle.
pub fn compute_a2(map: &DeformationMap<'_>) -> Result<f64> {
    let m = map.manifold();
    if let Some(mesh) = m.mesh() {
        let img = map.forward_samples()?;
        let mut dev: f64 = 0.0;
        let mut inv: f64 = 0.0;
        for (fi, f) in mesh.faces.iter().enumerate() {
            let a0 = mesh.face_area(fi);
            let e1 = mesh::sub(img[f[1]], img[f[0]]);
            let e2 = mesh::sub(img[f[2]], img[f[0]]);
            let ratio = 0.5 * mesh::norm(mesh::cross(e1, e2)) / a0;
            if !(ratio > 0.0) {
                return Err(Error::DegenerateMesh(format!("face {fi} collapses under the deformation")));
            }
            dev = dev.max((ratio - 1.0).abs());
            inv = inv.max(1.0 / ratio);
        }
        return Ok(dev * inv);
    }
    let mut dev: f64 = 0.0;
    let mut inv: f64 = 0.0;
    for p in m.points() {
        let d = map.jacobian_det(p).expect("analytic jacobian");
        dev = dev.max((d - 1.0).abs());
        inv = inv.max(map.inverse_jacobian_det(p).expect("analytic jacobian"));
    }
    Ok(dev * inv)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct A3Options {
    /// Coarse grid points per group parameter.
    pub grid: usize,
    /// Stop refining once the step falls below this.
    pub refine_tol: f64,
}

impl Default for A3Options {
    fn default() -> Self {
        Self { grid: 720, refine_tol: 1e-10 }
    }
}

impl A3Options {
    fn grid_for(&self, dims: usize) -> usize {
        match dims {
            1 => self.grid,
            2 => (self.grid / 8).max(8),
            _ => (self.grid / 30).max(6),
        }
    }
}

/// Grid-search upper bound on `inf_{ζ1 ∈ Isom} sup_x r(ζ(x), ζ1(x))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct A3Estimate {
    pub value: f64,
    pub witness: Deformation,
    /// Coarse grid spacing of the search, in parameter units.
    pub resolution: f64,
    pub evaluations: usize,
}

pub fn compute_a3(map: &DeformationMap<'_>, opts: &A3Options) -> Result<A3Estimate> {
    let m = map.manifold();
    let img = map.forward_samples()?;
    let pts = m.points();
    let mut evals = 0usize;
    let mut cost = |d: &Deformation| -> f64 {
        evals += 1;
        let iso = d.bind(m).expect("isometry candidate");
        pts.iter()
            .zip(&img)
            .map(|(p, q)| map.distance(q, &iso.forward(p).expect("isometry")))
            .fold(0.0, f64::max)
    };
    let (value, witness, resolution) = match m.geometry() {
        Geometry::Circle { .. } => {
            let g = opts.grid_for(1);
            let make = |x: &[f64], refl: bool| Deformation::CircleIsometry { angle: x[0], reflect: refl };
            let mut best = (f64::INFINITY, vec![0.0], false);
            for refl in [false, true] {
                for i in 0..g {
                    let x = vec![2.0 * PI * i as f64 / g as f64];
                    let c = cost(&make(&x, refl));
                    if c < best.0 {
                        best = (c, x, refl);
                    }
                }
            }
            let h = 2.0 * PI / g as f64;
            let (v, x) = refine(&best.1, best.0, h, opts.refine_tol, |x| cost(&make(x, best.2)));
            (v, make(&x, best.2), h)
        }
        Geometry::Torus { r1, r2, .. } => {
            let (l1, l2) = (2.0 * PI * r1, 2.0 * PI * r2);
            let g = opts.grid_for(2);
            let square = r1 == r2;
            let make = |x: &[f64], s: [bool; 3]| Deformation::TorusIsometry {
                dx: x[0].rem_euclid(l1),
                dy: x[1].rem_euclid(l2),
                flip1: s[0],
                flip2: s[1],
                swap: s[2],
            };
            let mut best = (f64::INFINITY, vec![0.0, 0.0], [false; 3]);
            for bits in 0..if square { 8 } else { 4 } {
                let s = [bits & 1 != 0, bits & 2 != 0, bits & 4 != 0];
                for a in 0..g {
                    for b in 0..g {
                        let x = vec![l1 * a as f64 / g as f64, l2 * b as f64 / g as f64];
                        let c = cost(&make(&x, s));
                        if c < best.0 {
                            best = (c, x, s);
                        }
                    }
                }
            }
            let h = l1.max(l2) / g as f64;
            let (v, x) = refine(&best.1, best.0, h, opts.refine_tol, |x| cost(&make(x, best.2)));
            (v, make(&x, best.2), h)
        }
        Geometry::Sphere { .. } => {
            let g = opts.grid_for(3);
            let make = |x: &[f64], refl: bool| Deformation::sphere_euler(x[0], x[1], x[2], refl);
            let mut best = (f64::INFINITY, vec![0.0; 3], false);
            for refl in [false, true] {
                for a in 0..g {
                    for b in 0..=g / 2 {
                        for c in 0..g {
                            let x = vec![
                                2.0 * PI * a as f64 / g as f64,
                                PI * b as f64 / (g / 2) as f64,
                                2.0 * PI * c as f64 / g as f64,
                            ];
                            let v = cost(&make(&x, refl));
                            if v < best.0 {
                                best = (v, x, refl);
                            }
                        }
                    }
                }
            }
            let h = 2.0 * PI / g as f64;
            let (v, x) = refine(&best.1, best.0, h, opts.refine_tol, |x| cost(&make(x, best.2)));
            (v, make(&x, best.2), h)
        }
        Geometry::Mesh { .. } => {
            return Err(Error::NotComputable(
                "the isometry group of a triangle mesh has no closed-form parameterisation; use sup_displacement as a surrogate".into(),
            ))
        }
    };
    let identity = cost(&Deformation::Identity);
    let (value, witness) = if identity < value { (identity, Deformation::Identity) } else { (value, witness) };
    Ok(A3Estimate { value, witness, resolution, evaluations: evals })
}

/// Compass search from `x0`, halving the step until it drops below `tol`.
fn refine(x0: &[f64], f0: f64, step: f64, tol: f64, mut f: impl FnMut(&[f64]) -> f64) -> (f64, Vec<f64>) {
    let mut x = x0.to_vec();
    let mut fx = f0;
    let mut h = step;
    while h > tol {
        let mut improved = false;
        for d in 0..x.len() {
            for s in [1.0, -1.0] {
                let mut y = x.clone();
                y[d] += s * h;
                let fy = f(&y);
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (fx, x)
}

/// All size measures of one deformation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeformationSize {
    pub sup_disp: f64,
    pub a1: f64,
    pub a2: f64,
    /// `None` where the isometry group cannot be searched.
    pub a3: Option<f64>,
    pub a3_witness: Option<Deformation>,
    pub r_floor: f64,
}

pub fn deformation_size(map: &DeformationMap<'_>, a3_opts: &A3Options) -> Result<DeformationSize> {
    let sup_disp = sup_displacement(map)?;
    let a1 = compute_a1(map, None)?;
    let a2 = compute_a2(map)?;
    let (a3, a3_witness) = match compute_a3(map, a3_opts) {
        Ok(e) => (Some(e.value), Some(e.witness)),
        Err(Error::NotComputable(_)) => (None, None),
        Err(e) => return Err(e),
    };
    if let Some(a) = a3 {
        if a > sup_disp * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::Structure(format!("A3 = {a} exceeds sup displacement {sup_disp}")));
        }
    }
    Ok(DeformationSize { sup_disp, a1: a1.value, a2, a3, a3_witness, r_floor: a1.r_floor })
}

/// Distance from each sample to its image, for plotting.
pub fn displacement_field(map: &DeformationMap<'_>) -> Result<Vec<(Point, f64)>> {
    map.manifold().points().iter().map(|p| Ok((*p, map.distance(p, &map.forward(p)?)))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{build_circle, build_flat_torus, build_sphere, circle_distance, SphereGrid};

    fn warp(m: &crate::manifold::SpectralManifold, tau: f64) -> DeformationMap<'_> {
        Deformation::CircleWarp { tau }.bind(m).unwrap()
    }

    #[test]
    fn identity_and_isometries_are_size_zero() {
        let m = build_circle(64, 4).unwrap();
        for d in [Deformation::Identity, Deformation::circle_rotation(0.7), Deformation::circle_reflection(0.3)] {
            let map = d.bind(&m).unwrap();
            let s = deformation_size(&map, &A3Options::default()).unwrap();
            assert!(s.a1 <= 1e-12 && s.a2 <= 1e-12, "{s:?}");
            assert!(s.a3.unwrap() <= 1e-9, "{s:?}");
        }
        assert_eq!(sup_displacement(&Deformation::Identity.bind(&m).unwrap()).unwrap(), 0.0);
        assert!((sup_displacement(&Deformation::circle_rotation(0.7).bind(&m).unwrap()).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn warp_measures_match_closed_forms() {
        let m = build_circle(256, 4).unwrap();
        for tau in [0.01, 0.05, 0.1, 0.2] {
            let map = warp(&m, tau);
            assert!((sup_displacement(&map).unwrap() - tau).abs() < 1e-12);
            assert!((compute_a2(&map).unwrap() - tau / (1.0 - tau)).abs() < 1e-6);
            let a3 = compute_a3(&map, &A3Options::default()).unwrap();
            assert!((a3.value - tau).abs() < 1e-3, "{a3:?}");
        }
    }

    #[test]
    fn a1_brute_force_oracle() {
        let m = build_circle(64, 4).unwrap();
        let tau = 0.1;
        let th: Vec<f64> = (0..64).map(|i| 2.0 * PI * i as f64 / 64.0).collect();
        let z: Vec<f64> = th.iter().map(|t| t + tau * t.sin()).collect();
        let mut want: f64 = 0.0;
        for i in 0..64 {
            for j in 0..64 {
                let r = circle_distance(th[i], th[j]);
                if i != j && r >= 2.0 * PI / 64.0 * (1.0 - 1e-12) {
                    want = want.max((circle_distance(z[i], z[j]) - r).abs() / r);
                }
            }
        }
        let got = compute_a1(&warp(&m, tau), None).unwrap();
        assert_eq!(got.value, want);
    }

    #[test]
    fn composite_a3_recovers_the_rotation() {
        let m = build_circle(256, 4).unwrap();
        let d = Deformation::CircleWarp { tau: 0.05 }.then(Deformation::circle_rotation(1.0));
        let a3 = compute_a3(&d.bind(&m).unwrap(), &A3Options::default()).unwrap();
        assert!((a3.value - 0.05).abs() < 1e-4);
        match a3.witness {
            Deformation::CircleIsometry { angle, reflect: false } => assert!((angle - 1.0).abs() < 1e-3),
            w => panic!("{w:?}"),
        }
    }

    #[test]
    fn measures_increase_along_the_warp_family() {
        let m = build_circle(128, 4).unwrap();
        let mut prev = (0.0, 0.0, 0.0);
        for i in 1..=10 {
            let map = warp(&m, 0.02 * i as f64);
            let a1 = compute_a1(&map, None).unwrap().value;
            let a2 = compute_a2(&map).unwrap();
            let a3 = compute_a3(&map, &A3Options::default()).unwrap().value;
            assert!(a1 > prev.0 && a2 > prev.1 && a3 > prev.2);
            prev = (a1, a2, a3);
        }
    }

    #[test]
    fn torus_and_sphere_isometries_found() {
        let t = build_flat_torus(16, 32, (1.0, 2.0), 2).unwrap();
        let d = Deformation::TorusIsometry { dx: 1.3, dy: 4.0, flip1: true, flip2: false, swap: false };
        let map = d.bind(&t).unwrap();
        let s = deformation_size(&map, &A3Options::default()).unwrap();
        assert!(s.a3.unwrap() < 1e-8 && s.a1 < 1e-12 && s.a2 == 0.0, "{s:?}");
        let w = Deformation::TorusWarp { tau: 0.1 }.bind(&t).unwrap();
        let s = deformation_size(&w, &A3Options::default()).unwrap();
        assert!(s.a3.unwrap() <= s.sup_disp * (1.0 + 1e-12) && s.a3.unwrap() > 0.0, "{s:?}");

        let sp = build_sphere(4, SphereGrid::gauss(4)).unwrap();
        let rot = Deformation::sphere_rotation([1.0, -1.0, 0.3], 0.9).bind(&sp).unwrap();
        let a3 = compute_a3(&rot, &A3Options::default()).unwrap();
        assert!(a3.value < 1e-6, "{a3:?}");
        let sw = Deformation::SphereWarp { tau: 0.1 }.bind(&sp).unwrap();
        let s = deformation_size(&sw, &A3Options::default()).unwrap();
        assert!(s.a1 > 0.0 && s.a2 > 0.0 && s.a3.unwrap() <= s.sup_disp * (1.0 + 1e-12));
    }

    #[test]
    fn a1_converges_under_refinement() {
        let a = compute_a1(&warp(&build_circle(128, 4).unwrap(), 0.1), None).unwrap().value;
        let b = compute_a1(&warp(&build_circle(256, 4).unwrap(), 0.1), None).unwrap().value;
        assert!((a - b).abs() / b < 0.02, "{a} {b}");
    }

    #[test]
    fn mesh_a3_is_not_computable() {
        let mesh = crate::mesh::Mesh::icosphere(1);
        let m = crate::manifold::mesh_spectral(&mesh, 4, crate::manifold::MESH_CLUSTER_TOL).unwrap();
        let d = Deformation::MeshAmbient { map: super::super::AmbientMap::Shear { tau: 0.05, axis: 2, scale: 1.0 } };
        let map = d.bind(&m).unwrap();
        assert!(matches!(compute_a3(&map, &A3Options::default()), Err(Error::NotComputable(_))));
        let s = deformation_size(&map, &A3Options::default()).unwrap();
        assert!(s.a3.is_none() && s.a2 > 0.0 && s.a1 > 0.0, "{s:?}");
    }
}
