//! Discretised compact manifolds with a truncated Laplace–Beltrami eigenbasis.
//!
//! Every [`SpectralManifold`] stores sample points, positive quadrature
//! weights, the retained eigenpairs (eigenfunctions as a `K x N` row-major
//! table) and the grouping of eigenvalues into eigenspaces. Signals are
//! complex-valued and tied to their manifold by [`ManifoldId`].

mod circle;
mod io;
mod mesh_spectral;
mod signal;
mod sphere;
mod spectrum;
mod torus;

pub use circle::build_circle;
pub use mesh_spectral::{mesh_spectral, MeshEigenSolver, MeshSpectralOptions};
pub use signal::Signal;
pub use sphere::{build_sphere, SphereGrid};
pub use spectrum::{group_spectrum, UniqueSpectrum};
pub use torus::{build_flat_torus, TorusMode, Trig};

use crate::error::{Error, Result};
use crate::mesh::{EdgeGraph, Mesh};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

pub type Point = [f64; 3];

pub const ANALYTIC_CLUSTER_TOL: f64 = 1e-9;
pub const MESH_CLUSTER_TOL: f64 = 1e-2;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ManifoldId(pub u64);

impl fmt::Display for ManifoldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl fmt::Debug for ManifoldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ManifoldId({self})")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldKind {
    Circle,
    Torus,
    Sphere,
    Mesh,
}

impl ManifoldKind {
    pub fn is_analytic(self) -> bool {
        self != ManifoldKind::Mesh
    }
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ManifoldKind::Circle => "circle",
            ManifoldKind::Torus => "torus",
            ManifoldKind::Sphere => "sphere",
            ManifoldKind::Mesh => "mesh",
        };
        f.write_str(s)
    }
}

/// Build parameters plus whatever is needed to evaluate the basis off-grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Geometry {
    Circle {
        n_points: usize,
        max_freq: usize,
    },
    Torus {
        n1: usize,
        n2: usize,
        r1: f64,
        r2: f64,
        k_max: usize,
        modes: Vec<TorusMode>,
    },
    Sphere {
        l_max: usize,
        n_lat: usize,
        n_lon: usize,
        /// `(l, m)` per eigenfunction.
        degrees: Vec<(usize, i64)>,
    },
    Mesh {
        mesh: Mesh,
    },
}

impl Geometry {
    pub fn kind(&self) -> ManifoldKind {
        match self {
            Geometry::Circle { .. } => ManifoldKind::Circle,
            Geometry::Torus { .. } => ManifoldKind::Torus,
            Geometry::Sphere { .. } => ManifoldKind::Sphere,
            Geometry::Mesh { .. } => ManifoldKind::Mesh,
        }
    }
}

#[derive(Debug)]
pub struct SpectralManifold {
    id: ManifoldId,
    dim: usize,
    geometry: Geometry,
    points: Vec<Point>,
    weights: Vec<f64>,
    eigenvalues: Vec<f64>,
    eigenfunctions: Vec<f64>,
    spectrum: UniqueSpectrum,
    group_index: Vec<usize>,
    cluster_tol: f64,
    graph: OnceLock<EdgeGraph>,
}

impl Clone for SpectralManifold {
    fn clone(&self) -> Self {
        Self {
            id: self.id,
            dim: self.dim,
            geometry: self.geometry.clone(),
            points: self.points.clone(),
            weights: self.weights.clone(),
            eigenvalues: self.eigenvalues.clone(),
            eigenfunctions: self.eigenfunctions.clone(),
            spectrum: self.spectrum.clone(),
            group_index: self.group_index.clone(),
            cluster_tol: self.cluster_tol,
            graph: OnceLock::new(),
        }
    }
}

impl SpectralManifold {
    pub(crate) fn assemble(
        dim: usize,
        geometry: Geometry,
        points: Vec<Point>,
        weights: Vec<f64>,
        eigenvalues: Vec<f64>,
        eigenfunctions: Vec<f64>,
        cluster_tol: f64,
    ) -> Self {
        let spectrum = group_spectrum(&eigenvalues, cluster_tol);
        let group_index = spectrum.group_of_each();
        let id = content_id(&geometry, &points, &weights, &eigenvalues, &eigenfunctions, cluster_tol);
        Self {
            id,
            dim,
            geometry,
            points,
            weights,
            eigenvalues,
            eigenfunctions,
            spectrum,
            group_index,
            cluster_tol,
            graph: OnceLock::new(),
        }
    }

    pub fn id(&self) -> ManifoldId {
        self.id
    }

    pub fn kind(&self) -> ManifoldKind {
        self.geometry.kind()
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn n_eigen(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenfunction(&self, k: usize) -> &[f64] {
        let n = self.n_points();
        &self.eigenfunctions[k * n..(k + 1) * n]
    }

    pub fn spectrum(&self) -> &UniqueSpectrum {
        &self.spectrum
    }

    /// Eigenspace index of each retained eigenpair.
    pub fn group_index(&self) -> &[usize] {
        &self.group_index
    }

    pub fn cluster_tol(&self) -> f64 {
        self.cluster_tol
    }

    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Closed-form volume for analytic kinds.
    pub fn analytic_volume(&self) -> Option<f64> {
        match &self.geometry {
            Geometry::Circle { .. } => Some(2.0 * PI),
            Geometry::Torus { r1, r2, .. } => Some(4.0 * PI * PI * r1 * r2),
            Geometry::Sphere { .. } => Some(4.0 * PI),
            Geometry::Mesh { .. } => None,
        }
    }

    /// Whether any two equidistant point pairs are related by an isometry.
    pub fn is_two_point_homogeneous(&self) -> bool {
        matches!(self.kind(), ManifoldKind::Circle | ManifoldKind::Sphere)
    }

    pub fn mesh(&self) -> Option<&Mesh> {
        match &self.geometry {
            Geometry::Mesh { mesh } => Some(mesh),
            _ => None,
        }
    }

    pub fn signal(&self, values: Vec<Complex64>) -> Result<Signal> {
        if values.len() != self.n_points() {
            return Err(Error::LengthMismatch { expected: self.n_points(), found: values.len() });
        }
        Ok(Signal::from_parts(values, self.id))
    }

    pub fn real_signal(&self, values: &[f64]) -> Result<Signal> {
        self.signal(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn zero_signal(&self) -> Signal {
        Signal::from_parts(vec![Complex64::new(0.0, 0.0); self.n_points()], self.id)
    }

    /// Signal equal to `φ_k` on the sample points.
    pub fn eigen_signal(&self, k: usize) -> Signal {
        Signal::from_parts(
            self.eigenfunction(k).iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            self.id,
        )
    }

    /// Evaluate `f` at each sample point.
    pub fn sample(&self, f: impl Fn(&Point) -> f64) -> Signal {
        Signal::from_parts(self.points.iter().map(|p| Complex64::new(f(p), 0.0)).collect(), self.id)
    }

    pub fn check(&self, f: &Signal) -> Result<()> {
        if f.manifold_id() != self.id {
            return Err(Error::ManifoldMismatch { expected: self.id, found: f.manifold_id() });
        }
        if f.len() != self.n_points() {
            return Err(Error::LengthMismatch { expected: self.n_points(), found: f.len() });
        }
        Ok(())
    }

    /// `Σ w_i f_i conj(g_i)`.
    pub fn inner_product(&self, f: &Signal, g: &Signal) -> Result<Complex64> {
        self.check(f)?;
        self.check(g)?;
        Ok(self.inner_raw(f.values(), g.values()))
    }

    pub(crate) fn inner_raw(&self, f: &[Complex64], g: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for ((a, b), w) in f.iter().zip(g).zip(&self.weights) {
            acc += a * b.conj() * w;
        }
        acc
    }

    pub fn norm(&self, f: &Signal) -> Result<f64> {
        self.check(f)?;
        Ok(self.norm_raw(f.values()))
    }

    pub(crate) fn norm_raw(&self, f: &[Complex64]) -> f64 {
        f.iter().zip(&self.weights).map(|(a, w)| a.norm_sqr() * w).sum::<f64>().sqrt()
    }

    pub fn fourier(&self, f: &Signal) -> Result<Vec<Complex64>> {
        self.check(f)?;
        Ok(self.fourier_raw(f.values()))
    }

    pub(crate) fn fourier_raw(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = self.n_points();
        let wf: Vec<Complex64> = f.iter().zip(&self.weights).map(|(a, w)| a * w).collect();
        (0..self.n_eigen())
            .map(|k| {
                let row = &self.eigenfunctions[k * n..(k + 1) * n];
                let mut acc = Complex64::new(0.0, 0.0);
                for (a, p) in wf.iter().zip(row) {
                    acc += a * p;
                }
                acc
            })
            .collect()
    }

    /// `Σ_k c_k φ_k`; `coeffs` may be shorter than `K`.
    pub fn inverse_fourier(&self, coeffs: &[Complex64]) -> Result<Signal> {
        if coeffs.len() > self.n_eigen() {
            return Err(Error::LengthMismatch { expected: self.n_eigen(), found: coeffs.len() });
        }
        Ok(Signal::from_parts(self.synthesize_raw(coeffs), self.id))
    }

    pub(crate) fn synthesize_raw(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let n = self.n_points();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (k, c) in coeffs.iter().enumerate() {
            if *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let row = &self.eigenfunctions[k * n..(k + 1) * n];
            for (o, p) in out.iter_mut().zip(row) {
                *o += c * p;
            }
        }
        out
    }

    /// Orthogonal projection onto the retained band.
    pub fn project_band(&self, f: &Signal) -> Result<Signal> {
        let c = self.fourier(f)?;
        self.inverse_fourier(&c)
    }

    /// Index of the eigenspace matching `lambda`.
    pub fn eigenspace_of(&self, lambda: f64) -> Result<usize> {
        self.spectrum
            .find(lambda, self.cluster_tol.max(1e-9))
            .ok_or(Error::UnknownEigenvalue(lambda))
    }

    /// `π_λ f = Σ_{λ_k = λ} ⟨f, φ_k⟩ φ_k`.
    pub fn project_eigenspace(&self, f: &Signal, lambda: f64) -> Result<Signal> {
        let g = self.eigenspace_of(lambda)?;
        let mut c = self.fourier(f)?;
        for (k, ck) in c.iter_mut().enumerate() {
            if self.group_index[k] != g {
                *ck = Complex64::new(0.0, 0.0);
            }
        }
        self.inverse_fourier(&c)
    }

    /// `max_{j,k} |⟨φ_j, φ_k⟩ − δ_jk|`.
    pub fn orthonormality_residual(&self) -> f64 {
        let k = self.n_eigen();
        let n = self.n_points();
        let mut worst = 0.0f64;
        for a in 0..k {
            let ra = self.eigenfunction(a);
            let wa: Vec<f64> = ra.iter().zip(&self.weights).map(|(x, w)| x * w).collect();
            for b in a..k {
                let rb = self.eigenfunction(b);
                let mut s = 0.0;
                for i in 0..n {
                    s += wa[i] * rb[i];
                }
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    /// Evaluate all retained eigenfunctions at an arbitrary point of the
    /// parameter domain. `None` for meshes.
    pub fn eval_basis(&self, p: &Point) -> Option<Vec<f64>> {
        match &self.geometry {
            Geometry::Circle { max_freq, .. } => Some(circle::eval(*max_freq, p[0])),
            Geometry::Torus { r1, r2, modes, .. } => Some(torus::eval(modes, *r1, *r2, p)),
            Geometry::Sphere { l_max, degrees, .. } => Some(sphere::eval(*l_max, degrees, p)),
            Geometry::Mesh { .. } => None,
        }
    }

    /// Geodesic distance between two points of the parameter domain.
    /// Meshes only support sample points, see [`Self::distance`].
    pub fn point_distance(&self, a: &Point, b: &Point) -> Option<f64> {
        match &self.geometry {
            Geometry::Circle { .. } => Some(circle_distance(a[0], b[0])),
            Geometry::Torus { r1, r2, .. } => Some(torus::distance(*r1, *r2, a, b)),
            Geometry::Sphere { .. } => Some(great_circle(a, b)),
            Geometry::Mesh { .. } => None,
        }
    }

    /// Geodesic distance between sample points; edge-graph shortest path on
    /// meshes (an upper-biased approximation).
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        match self.point_distance(&self.points[i], &self.points[j]) {
            Some(d) => d,
            None => self.edge_graph().shortest_paths(i)[j],
        }
    }

    /// Distances from sample `i` to every sample.
    pub fn distances_from(&self, i: usize) -> Vec<f64> {
        if self.kind() == ManifoldKind::Mesh {
            return self.edge_graph().shortest_paths(i);
        }
        let p = self.points[i];
        self.points.iter().map(|q| self.point_distance(&p, q).unwrap()).collect()
    }

    pub fn edge_graph(&self) -> &EdgeGraph {
        self.graph.get_or_init(|| match &self.geometry {
            Geometry::Mesh { mesh } => EdgeGraph::from_mesh(mesh),
            _ => {
                let mut adj = Vec::with_capacity(self.n_points());
                for i in 0..self.n_points() {
                    let nb = self.grid_neighbors(i);
                    adj.push(nb.into_iter().map(|j| (j, self.distance(i, j))).collect());
                }
                EdgeGraph::from_adjacency(adj)
            }
        })
    }

    fn grid_neighbors(&self, i: usize) -> Vec<usize> {
        match &self.geometry {
            Geometry::Circle { n_points, .. } => {
                let n = *n_points;
                vec![(i + n - 1) % n, (i + 1) % n]
            }
            Geometry::Torus { n1, n2, .. } => {
                let (a, b) = (i / n2, i % n2);
                vec![
                    ((a + n1 - 1) % n1) * n2 + b,
                    ((a + 1) % n1) * n2 + b,
                    a * n2 + (b + n2 - 1) % n2,
                    a * n2 + (b + 1) % n2,
                ]
            }
            Geometry::Sphere { n_lat, n_lon, .. } => {
                let (a, b) = (i / n_lon, i % n_lon);
                let mut v = vec![a * n_lon + (b + n_lon - 1) % n_lon, a * n_lon + (b + 1) % n_lon];
                if a > 0 {
                    v.push((a - 1) * n_lon + b);
                }
                if a + 1 < *n_lat {
                    v.push((a + 1) * n_lon + b);
                }
                v
            }
            Geometry::Mesh { .. } => self.edge_graph().neighbors(i).map(|e| e.0).collect(),
        }
    }

    /// Neighbouring samples: grid neighbours or mesh edges.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut v = self.grid_neighbors(i);
        v.sort_unstable();
        v.dedup();
        v.retain(|&j| j != i);
        v
    }

    /// Smallest distance scale the sampling resolves.
    pub fn grid_spacing(&self) -> f64 {
        match &self.geometry {
            Geometry::Circle { n_points, .. } => 2.0 * PI / *n_points as f64,
            Geometry::Torus { n1, n2, r1, r2, .. } => {
                (2.0 * PI * r1 / *n1 as f64).min(2.0 * PI * r2 / *n2 as f64)
            }
            Geometry::Sphere { n_lat, .. } => PI / *n_lat as f64,
            Geometry::Mesh { mesh } => mesh.mean_edge_length(),
        }
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        io::save(self, path)
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self> {
        io::load(path)
    }

    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        io::to_bytes(self)
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        io::from_bytes(bytes)
    }
}

pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// `atan2(|a × b|, a · b)` for unit vectors.
pub fn great_circle(a: &Point, b: &Point) -> f64 {
    let c = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let s = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    let d = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    s.atan2(d)
}

fn content_id(
    geometry: &Geometry,
    points: &[Point],
    weights: &[f64],
    eigenvalues: &[f64],
    eigenfunctions: &[f64],
    cluster_tol: f64,
) -> ManifoldId {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(geometry).unwrap_or_default());
    for p in points {
        for c in p {
            h.update(c.to_le_bytes());
        }
    }
    for slice in [weights, eigenvalues, eigenfunctions] {
        h.update((slice.len() as u64).to_le_bytes());
        for v in slice {
            h.update(v.to_le_bytes());
        }
    }
    h.update(cluster_tol.to_le_bytes());
    let d = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&d[..8]);
    ManifoldId(u64::from_le_bytes(b))
}
