use crate::error::{Error, Result};
use crate::manifold::{Geometry, ManifoldKind, Point, SpectralManifold};
use crate::mesh::{self, Locator, SurfacePoint};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;
const NEWTON_TOL: f64 = 1e-14;
const NEWTON_MAX: usize = 100;

pub type Matrix3 = [[f64; 3]; 3];

/// Ambient map of `R³` applied to mesh vertices before projecting back onto
/// the surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "snake_case")]
pub enum AmbientMap {
    /// `p ↦ Q (p − c) + c + t` about the centre `c`.
    Rigid { matrix: Matrix3, center: Point, translation: Point },
    /// `p ↦ p + τ s sin(p_a / s) e_{a+1}`, a shear along the next axis.
    Shear { tau: f64, axis: usize, scale: f64 },
}

/// Closed-form point maps on each manifold kind. Composites apply their
/// members first to last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Deformation {
    Identity,
    /// `θ ↦ ±θ + angle`.
    CircleIsometry { angle: f64, reflect: bool },
    /// `θ ↦ θ + τ sin θ`, `|τ| < 1`.
    CircleWarp { tau: f64 },
    /// `(x1, x2) ↦ (±x1 + dx, ±x2 + dy)`, optionally swapping the axes
    /// (square tori only; the swap is applied last).
    TorusIsometry { dx: f64, dy: f64, flip1: bool, flip2: bool, swap: bool },
    /// `x1 ↦ x1 + τ R1 sin(x1 / R1)`.
    TorusWarp { tau: f64 },
    /// `p ↦ Q p` with `Q` orthogonal.
    SphereIsometry { matrix: Matrix3 },
    /// Colatitude warp `θ ↦ θ + τ sin θ`, fixing both poles.
    SphereWarp { tau: f64 },
    MeshAmbient { map: AmbientMap },
    Composite { maps: Vec<Deformation> },
}

impl Deformation {
    pub fn circle_rotation(angle: f64) -> Self {
        Self::CircleIsometry { angle, reflect: false }
    }

    pub fn circle_reflection(angle: f64) -> Self {
        Self::CircleIsometry { angle, reflect: true }
    }

    pub fn torus_translation(dx: f64, dy: f64) -> Self {
        Self::TorusIsometry { dx, dy, flip1: false, flip2: false, swap: false }
    }

    /// Rotation by `angle` about `axis` (Rodrigues).
    pub fn sphere_rotation(axis: Point, angle: f64) -> Self {
        Self::SphereIsometry { matrix: axis_angle(axis, angle) }
    }

    /// ZYZ Euler rotation `R_z(α) R_y(β) R_z(γ)`, optionally followed by the
    /// reflection `z ↦ −z`.
    pub fn sphere_euler(alpha: f64, beta: f64, gamma: f64, reflect: bool) -> Self {
        let mut q = mat_mul(&mat_mul(&rot_z(alpha), &rot_y(beta)), &rot_z(gamma));
        if reflect {
            for v in q[2].iter_mut() {
                *v = -*v;
            }
        }
        Self::SphereIsometry { matrix: q }
    }

    pub fn sphere_reflection(normal: Point) -> Self {
        let n = mesh::normalize(normal);
        let mut q = [[0.0; 3]; 3];
        for (i, row) in q.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if i == j { 1.0 } else { 0.0 } - 2.0 * n[i] * n[j];
            }
        }
        Self::SphereIsometry { matrix: q }
    }

    pub fn then(self, next: Deformation) -> Self {
        let mut maps = match self {
            Self::Composite { maps } => maps,
            d => vec![d],
        };
        match next {
            Self::Composite { maps: more } => maps.extend(more),
            d => maps.push(d),
        }
        Self::Composite { maps }
    }

    /// Exact isometry of the manifold it is defined on.
    pub fn is_isometry(&self) -> bool {
        match self {
            Self::Identity | Self::CircleIsometry { .. } | Self::TorusIsometry { .. } | Self::SphereIsometry { .. } => true,
            Self::CircleWarp { tau } | Self::TorusWarp { tau } | Self::SphereWarp { tau } => *tau == 0.0,
            Self::MeshAmbient { .. } => false,
            Self::Composite { maps } => maps.iter().all(|d| d.is_isometry()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Identity => "identity".into(),
            Self::CircleIsometry { angle, reflect: false } => format!("rotation({angle})"),
            Self::CircleIsometry { angle, reflect: true } => format!("reflection({angle})"),
            Self::CircleWarp { tau } => format!("warp(tau={tau})"),
            Self::TorusIsometry { dx, dy, .. } => format!("torus-isometry({dx},{dy})"),
            Self::TorusWarp { tau } => format!("torus-warp(tau={tau})"),
            Self::SphereIsometry { .. } => "sphere-isometry".into(),
            Self::SphereWarp { tau } => format!("colatitude-warp(tau={tau})"),
            Self::MeshAmbient { map: AmbientMap::Rigid { .. } } => "mesh-rigid".into(),
            Self::MeshAmbient { map: AmbientMap::Shear { tau, .. } } => format!("mesh-shear(tau={tau})"),
            Self::Composite { maps } => maps.iter().map(|d| d.label()).collect::<Vec<_>>().join("*"),
        }
    }

    fn supports(&self, kind: ManifoldKind) -> bool {
        match self {
            Self::Identity => true,
            Self::CircleIsometry { .. } | Self::CircleWarp { .. } => kind == ManifoldKind::Circle,
            Self::TorusIsometry { .. } | Self::TorusWarp { .. } => kind == ManifoldKind::Torus,
            Self::SphereIsometry { .. } | Self::SphereWarp { .. } => kind == ManifoldKind::Sphere,
            Self::MeshAmbient { .. } => kind == ManifoldKind::Mesh,
            Self::Composite { maps } => maps.iter().all(|d| d.supports(kind)),
        }
    }

    fn validate(&self, m: &SpectralManifold) -> Result<()> {
        if !self.supports(m.kind()) {
            return Err(Error::InvalidConfig(format!("deformation {} does not act on a {}", self.label(), m.kind())));
        }
        match (self, m.geometry()) {
            (Self::CircleWarp { tau } | Self::TorusWarp { tau } | Self::SphereWarp { tau }, _) if tau.abs() >= 1.0 => {
                Err(Error::InvalidConfig(format!("warp amplitude {tau} is not invertible (need |tau| < 1)")))
            }
            (Self::TorusIsometry { swap: true, .. }, Geometry::Torus { r1, r2, .. }) if r1 != r2 => {
                Err(Error::InvalidConfig("axis swap is an isometry only of square tori".into()))
            }
            (Self::SphereIsometry { matrix }, _) => {
                let qtq = mat_mul(&transpose(matrix), matrix);
                let err = (0..3)
                    .flat_map(|i| (0..3).map(move |j| (i, j)))
                    .map(|(i, j)| (qtq[i][j] - if i == j { 1.0 } else { 0.0 }).abs())
                    .fold(0.0, f64::max);
                if err > 1e-10 {
                    return Err(Error::InvalidConfig(format!("sphere map is not orthogonal (error {err:e})")));
                }
                Ok(())
            }
            (Self::Composite { maps }, _) => maps.iter().try_for_each(|d| d.validate(m)),
            _ => Ok(()),
        }
    }

    /// Bind to a manifold, checking kind and invertibility.
    pub fn bind<'a>(&self, m: &'a SpectralManifold) -> Result<DeformationMap<'a>> {
        self.validate(m)?;
        let locator = m.mesh().map(|mesh| mesh.locator());
        Ok(DeformationMap { deformation: self.clone(), manifold: m, locator })
    }
}

/// A deformation bound to a manifold.
pub struct DeformationMap<'a> {
    deformation: Deformation,
    manifold: &'a SpectralManifold,
    locator: Option<Locator<'a>>,
}

impl<'a> DeformationMap<'a> {
    pub fn deformation(&self) -> &Deformation {
        &self.deformation
    }

    pub fn manifold(&self) -> &'a SpectralManifold {
        self.manifold
    }

    fn geometry(&self) -> &Geometry {
        self.manifold.geometry()
    }

    pub fn forward(&self, p: &Point) -> Result<Point> {
        self.map_point(&self.deformation, p, false)
    }

    pub fn inverse(&self, p: &Point) -> Result<Point> {
        self.map_point(&self.deformation, p, true)
    }

    /// Closest surface point to an ambient point (meshes only).
    pub fn project(&self, p: &Point) -> Option<SurfacePoint> {
        self.locator.as_ref().map(|l| l.closest(p))
    }

    fn map_point(&self, d: &Deformation, p: &Point, inverse: bool) -> Result<Point> {
        let r1 = match self.geometry() {
            Geometry::Torus { r1, .. } => *r1,
            _ => 1.0,
        };
        Ok(match d {
            Deformation::Identity => *p,
            Deformation::CircleIsometry { angle, reflect } => {
                let s = if *reflect { -1.0 } else { 1.0 };
                // the map is an involution when reflecting
                let th = if inverse && !*reflect { p[0] - angle } else { s * p[0] + angle };
                [th.rem_euclid(TWO_PI), 0.0, 0.0]
            }
            Deformation::CircleWarp { tau } => {
                let th = if inverse { solve_warp(*tau, p[0])? } else { p[0] + tau * p[0].sin() };
                [th.rem_euclid(TWO_PI), 0.0, 0.0]
            }
            Deformation::TorusIsometry { dx, dy, flip1, flip2, swap } => {
                let (l1, l2) = self.torus_lengths();
                let s1 = if *flip1 { -1.0 } else { 1.0 };
                let s2 = if *flip2 { -1.0 } else { 1.0 };
                if inverse {
                    let (a, b) = if *swap { (p[1], p[0]) } else { (p[0], p[1]) };
                    [(s1 * (a - dx)).rem_euclid(l1), (s2 * (b - dy)).rem_euclid(l2), 0.0]
                } else {
                    let a = (s1 * p[0] + dx).rem_euclid(l1);
                    let b = (s2 * p[1] + dy).rem_euclid(l2);
                    if *swap {
                        [b, a, 0.0]
                    } else {
                        [a, b, 0.0]
                    }
                }
            }
            Deformation::TorusWarp { tau } => {
                let (l1, _) = self.torus_lengths();
                let u = p[0] / r1;
                let v = if inverse { solve_warp(*tau, u)? } else { u + tau * u.sin() };
                [(v * r1).rem_euclid(l1), p[1], 0.0]
            }
            Deformation::SphereIsometry { matrix } => {
                if inverse {
                    mat_vec(&transpose(matrix), p)
                } else {
                    mat_vec(matrix, p)
                }
            }
            Deformation::SphereWarp { tau } => {
                let (th, phi) = spherical(p);
                let t = if inverse { solve_warp(*tau, th)? } else { th + tau * th.sin() };
                let s = t.sin();
                [s * phi.cos(), s * phi.sin(), t.cos()]
            }
            Deformation::MeshAmbient { map } => {
                let q = ambient(map, p, inverse);
                match &self.locator {
                    Some(l) => l.closest(&q).point,
                    None => q,
                }
            }
            Deformation::Composite { maps } => {
                let mut q = *p;
                if inverse {
                    for m in maps.iter().rev() {
                        q = self.map_point(m, &q, true)?;
                    }
                } else {
                    for m in maps {
                        q = self.map_point(m, &q, false)?;
                    }
                }
                q
            }
        })
    }

    fn torus_lengths(&self) -> (f64, f64) {
        match self.geometry() {
            Geometry::Torus { r1, r2, .. } => (TWO_PI * r1, TWO_PI * r2),
            _ => (TWO_PI, TWO_PI),
        }
    }

    /// `|det Dζ(p)|` in closed form; `None` on meshes, where the area ratio
    /// of mapped faces is used instead.
    pub fn jacobian_det(&self, p: &Point) -> Option<f64> {
        self.jac(&self.deformation, p)
    }

    /// `|det Dζ^{-1}(p)| = 1 / |det Dζ(ζ^{-1}(p))|`.
    pub fn inverse_jacobian_det(&self, p: &Point) -> Option<f64> {
        let q = self.inverse(p).ok()?;
        self.jacobian_det(&q).map(|d| 1.0 / d)
    }

    fn jac(&self, d: &Deformation, p: &Point) -> Option<f64> {
        let r1 = match self.geometry() {
            Geometry::Torus { r1, .. } => *r1,
            _ => 1.0,
        };
        match d {
            Deformation::Identity
            | Deformation::CircleIsometry { .. }
            | Deformation::TorusIsometry { .. }
            | Deformation::SphereIsometry { .. } => Some(1.0),
            Deformation::CircleWarp { tau } => Some((1.0 + tau * p[0].cos()).abs()),
            Deformation::TorusWarp { tau } => Some((1.0 + tau * (p[0] / r1).cos()).abs()),
            Deformation::SphereWarp { tau } => {
                let (th, _) = spherical(p);
                let d = 1.0 + tau * th.cos();
                let s = th.sin();
                if s < 1e-8 {
                    Some(d * d)
                } else {
                    Some((d * (th + tau * s).sin() / s).abs())
                }
            }
            Deformation::MeshAmbient { .. } => None,
            Deformation::Composite { maps } => {
                let mut q = *p;
                let mut det = 1.0;
                for m in maps {
                    det *= self.jac(m, &q)?;
                    q = self.map_point(m, &q, false).ok()?;
                }
                Some(det)
            }
        }
    }

    /// Images of every sample point.
    pub fn forward_samples(&self) -> Result<Vec<Point>> {
        self.manifold.points().iter().map(|p| self.forward(p)).collect()
    }

    /// Preimages of every sample point.
    pub fn inverse_samples(&self) -> Result<Vec<Point>> {
        self.manifold.points().iter().map(|p| self.inverse(p)).collect()
    }

    /// Geodesic distance between two points of the domain. Meshes use the
    /// Euclidean chord, a lower bound that is sharp for nearby points.
    pub fn distance(&self, a: &Point, b: &Point) -> f64 {
        self.manifold.point_distance(a, b).unwrap_or_else(|| mesh::norm(mesh::sub(*a, *b)))
    }

    /// Largest `r(ζ^{-1}(ζ(x)), x)` over the samples.
    pub fn roundtrip_error(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for p in self.manifold.points() {
            let q = self.inverse(&self.forward(p)?)?;
            worst = worst.max(self.distance(p, &q));
        }
        Ok(worst)
    }
}

/// Solves `y + τ sin y = x` by Newton's method.
fn solve_warp(tau: f64, x: f64) -> Result<f64> {
    let mut y = x;
    for _ in 0..NEWTON_MAX {
        let step = (y + tau * y.sin() - x) / (1.0 + tau * y.cos());
        y -= step;
        if step.abs() <= NEWTON_TOL * (1.0 + y.abs()) {
            return Ok(y);
        }
    }
    let r = (y + tau * y.sin() - x).abs();
    if r <= 1e-12 {
        return Ok(y);
    }
    Err(Error::NonConvergence { solver: "warp inverse", iterations: NEWTON_MAX, residual: r, history: Vec::new() })
}

fn ambient(map: &AmbientMap, p: &Point, inverse: bool) -> Point {
    match map {
        AmbientMap::Rigid { matrix, center, translation } => {
            if inverse {
                let q = mesh::sub(mesh::sub(*p, *translation), *center);
                mesh::add(mat_vec(&transpose(matrix), &q), *center)
            } else {
                let q = mat_vec(matrix, &mesh::sub(*p, *center));
                mesh::add(mesh::add(q, *center), *translation)
            }
        }
        AmbientMap::Shear { tau, axis, scale } => {
            let a = axis % 3;
            let b = (a + 1) % 3;
            let s = if inverse { -1.0 } else { 1.0 };
            let mut q = *p;
            q[b] += s * tau * scale * (p[a] / scale).sin();
            q
        }
    }
}

/// Colatitude and azimuth of a unit vector.
pub fn spherical(p: &Point) -> (f64, f64) {
    (p[0].hypot(p[1]).atan2(p[2]), p[1].atan2(p[0]))
}

fn rot_z(a: f64) -> Matrix3 {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn rot_y(a: f64) -> Matrix3 {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

pub fn axis_angle(axis: Point, angle: f64) -> Matrix3 {
    let [x, y, z] = mesh::normalize(axis);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
        [y * x * t + z * s, c + y * y * t, y * z * t - x * s],
        [z * x * t - y * s, z * y * t + x * s, c + z * z * t],
    ]
}

fn mat_mul(a: &Matrix3, b: &Matrix3) -> Matrix3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn transpose(a: &Matrix3) -> Matrix3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

fn mat_vec(a: &Matrix3, p: &Point) -> Point {
    [
        a[0][0] * p[0] + a[0][1] * p[1] + a[0][2] * p[2],
        a[1][0] * p[0] + a[1][1] * p[1] + a[1][2] * p[2],
        a[2][0] * p[0] + a[2][1] * p[1] + a[2][2] * p[2],
    ]
}
