//! Triangle meshes: ASCII OFF input/output, manifoldness diagnostics, the
//! cotangent stiffness matrix with lumped mass, edge-graph geodesics and
//! closest-point location.

use crate::error::{Error, Result};
use crate::linalg::sparse::CsrMatrix;
use crate::manifold::Point;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub faces: Vec<[usize; 3]>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshDiagnostics {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub boundary_edges: usize,
    pub nonmanifold_edges: usize,
    pub components: usize,
    pub euler_characteristic: i64,
}

impl MeshDiagnostics {
    pub fn is_edge_manifold(&self) -> bool {
        self.nonmanifold_edges == 0
    }

    pub fn is_closed(&self) -> bool {
        self.boundary_edges == 0
    }

    /// Genus of a closed connected surface.
    pub fn genus(&self) -> Option<i64> {
        if self.is_closed() && self.is_edge_manifold() && self.components == 1 {
            Some((2 - self.euler_characteristic) / 2)
        } else {
            None
        }
    }
}

impl Mesh {
    pub fn load_off(path: &Path) -> Result<Self> {
        Self::parse_off(&std::fs::read_to_string(path)?)
    }

    pub fn parse_off(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let err = |line: usize, msg: &str| Error::MeshParse { line, msg: msg.to_string() };

        let (hline, header) = lines.next().ok_or_else(|| err(1, "empty file"))?;
        let mut head = header.split_whitespace();
        if head.next() != Some("OFF") {
            return Err(err(hline, "missing OFF header"));
        }
        let rest: Vec<&str> = head.collect();
        let (cline, counts) = if rest.is_empty() {
            let (l, c) = lines.next().ok_or_else(|| err(hline, "missing counts line"))?;
            (l, c.split_whitespace().collect::<Vec<_>>())
        } else {
            (hline, rest)
        };
        if counts.len() < 2 {
            return Err(err(cline, "counts line needs vertex and face counts"));
        }
        let parse_count = |s: &str| s.parse::<usize>().map_err(|_| err(cline, "invalid count"));
        let nv = parse_count(counts[0])?;
        let nf = parse_count(counts[1])?;
        if nv == 0 || nf == 0 {
            return Err(err(cline, "empty mesh"));
        }
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (l, s) = lines.next().ok_or_else(|| err(cline, "unexpected end of vertex list"))?;
            let v: Vec<f64> = s
                .split_whitespace()
                .take(3)
                .map(|t| t.parse::<f64>().map_err(|_| err(l, "invalid vertex coordinate")))
                .collect::<Result<_>>()?;
            if v.len() != 3 || v.iter().any(|x| !x.is_finite()) {
                return Err(err(l, "vertex needs three finite coordinates"));
            }
            vertices.push([v[0], v[1], v[2]]);
        }
        let mut faces = Vec::with_capacity(nf);
        for _ in 0..nf {
            let (l, s) = lines.next().ok_or_else(|| err(cline, "unexpected end of face list"))?;
            let t: Vec<usize> = s
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|_| err(l, "invalid face index")))
                .collect::<Result<_>>()?;
            if t.first() != Some(&3) {
                return Err(err(l, "only triangle faces are supported"));
            }
            if t.len() < 4 {
                return Err(err(l, "triangle needs three vertex indices"));
            }
            let f = [t[1], t[2], t[3]];
            if f.iter().any(|&i| i >= nv) {
                return Err(err(l, "face index out of range"));
            }
            faces.push(f);
        }
        Ok(Mesh { vertices, faces })
    }

    pub fn to_off(&self) -> String {
        let mut s = format!("OFF\n{} {} 0\n", self.vertices.len(), self.faces.len());
        for v in &self.vertices {
            s.push_str(&format!("{} {} {}\n", v[0], v[1], v[2]));
        }
        for f in &self.faces {
            s.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
        }
        s
    }

    pub fn write_off(&self, path: &Path) -> Result<()> {
        crate::report::write_atomic(path, self.to_off().as_bytes())
    }

    /// Undirected edges with the number of incident faces.
    pub fn edge_face_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut m = HashMap::new();
        for f in &self.faces {
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                *m.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        m
    }

    pub fn diagnostics(&self) -> MeshDiagnostics {
        let counts = self.edge_face_counts();
        let boundary = counts.values().filter(|&&c| c == 1).count();
        let nonmanifold = counts.values().filter(|&&c| c > 2).count();
        let graph = EdgeGraph::from_mesh(self);
        MeshDiagnostics {
            vertices: self.vertices.len(),
            edges: counts.len(),
            faces: self.faces.len(),
            boundary_edges: boundary,
            nonmanifold_edges: nonmanifold,
            components: graph.components(),
            euler_characteristic: self.vertices.len() as i64 - counts.len() as i64 + self.faces.len() as i64,
        }
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f].map(|i| self.vertices[i]);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn mean_edge_length(&self) -> f64 {
        let counts = self.edge_face_counts();
        let total: f64 = counts.keys().map(|&(a, b)| norm(sub(self.vertices[a], self.vertices[b]))).sum();
        total / counts.len().max(1) as f64
    }

    pub fn centroid(&self) -> Point {
        let n = self.vertices.len() as f64;
        let mut c = [0.0; 3];
        for v in &self.vertices {
            for d in 0..3 {
                c[d] += v[d] / n;
            }
        }
        c
    }

    /// Cotangent stiffness matrix and lumped (one third of incident area)
    /// mass diagonal. Rejects zero-area triangles and disconnected meshes.
    pub fn cotangent_laplacian(&self) -> Result<(CsrMatrix, Vec<f64>)> {
        let n = self.vertices.len();
        let diag = self.diagnostics();
        if !diag.is_edge_manifold() {
            return Err(Error::DegenerateMesh(format!("{} edges shared by more than two faces", diag.nonmanifold_edges)));
        }
        if diag.components != 1 {
            return Err(Error::DegenerateMesh(format!("mesh has {} connected components", diag.components)));
        }
        let h = self.mean_edge_length();
        let mut mass = vec![0.0; n];
        let mut trip = Vec::with_capacity(self.faces.len() * 12);
        for (fi, f) in self.faces.iter().enumerate() {
            let area = self.face_area(fi);
            if !(area > 1e-12 * h * h) {
                return Err(Error::DegenerateMesh(format!("face {fi} has zero area")));
            }
            for c in 0..3 {
                let (i, j, k) = (f[c], f[(c + 1) % 3], f[(c + 2) % 3]);
                // angle at k opposite edge (i, j)
                let u = sub(self.vertices[i], self.vertices[k]);
                let v = sub(self.vertices[j], self.vertices[k]);
                let w = 0.5 * dot(u, v) / norm(cross(u, v));
                trip.push((i, j, -w));
                trip.push((j, i, -w));
                trip.push((i, i, w));
                trip.push((j, j, w));
                mass[f[c]] += area / 3.0;
            }
        }
        Ok((CsrMatrix::from_triplets(n, &trip), mass))
    }

    /// Closest point on the surface with its face and barycentric coordinates.
    pub fn locator(&self) -> Locator<'_> {
        Locator::new(self)
    }

    /// Unit icosphere with `level` rounds of 4:1 subdivision
    /// (`10·4^level + 2` vertices).
    pub fn icosphere(level: usize) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut vertices: Vec<Point> = [
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ]
        .iter()
        .map(|&p| normalize(p))
        .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..level {
            let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
            let mut next = Vec::with_capacity(faces.len() * 4);
            let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Point>| -> usize {
                *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    let p = normalize(scale(add(verts[a], verts[b]), 0.5));
                    verts.push(p);
                    verts.len() - 1
                })
            };
            for f in &faces {
                let ab = midpoint(f[0], f[1], &mut vertices);
                let bc = midpoint(f[1], f[2], &mut vertices);
                let ca = midpoint(f[2], f[0], &mut vertices);
                next.push([f[0], ab, ca]);
                next.push([f[1], bc, ab]);
                next.push([f[2], ca, bc]);
                next.push([ab, bc, ca]);
            }
            faces = next;
        }
        Mesh { vertices, faces }
    }
}

/// Weighted adjacency used for shortest-path geodesics.
#[derive(Clone, Debug)]
pub struct EdgeGraph {
    adj: Vec<Vec<(usize, f64)>>,
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl EdgeGraph {
    pub fn from_mesh(mesh: &Mesh) -> Self {
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); mesh.vertices.len()];
        let mut keys: Vec<(usize, usize)> = mesh.edge_face_counts().into_keys().collect();
        keys.sort_unstable();
        for (a, b) in keys {
            let d = norm(sub(mesh.vertices[a], mesh.vertices[b]));
            adj[a].push((b, d));
            adj[b].push((a, d));
        }
        Self { adj }
    }

    pub fn from_adjacency(adj: Vec<Vec<(usize, f64)>>) -> Self {
        Self { adj }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.adj[i].iter().copied()
    }

    /// Dijkstra distances from `src`.
    pub fn shortest_paths(&self, src: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.adj.len()];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(HeapItem(0.0, src));
        while let Some(HeapItem(d, v)) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &(w, len) in &self.adj[v] {
                let nd = d + len;
                if nd < dist[w] {
                    dist[w] = nd;
                    heap.push(HeapItem(nd, w));
                }
            }
        }
        dist
    }

    pub fn components(&self) -> usize {
        let mut seen = vec![false; self.adj.len()];
        let mut count = 0;
        for s in 0..self.adj.len() {
            if seen[s] {
                continue;
            }
            count += 1;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(v) = stack.pop() {
                for &(w, _) in &self.adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }
}

/// Result of projecting a point onto the surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    pub face: usize,
    pub bary: [f64; 3],
    pub point: Point,
    pub distance: f64,
}

/// Uniform-grid accelerated closest-point queries.
pub struct Locator<'a> {
    mesh: &'a Mesh,
    origin: Point,
    cell: f64,
    dims: [usize; 3],
    cells: HashMap<[usize; 3], Vec<usize>>,
}

impl<'a> Locator<'a> {
    fn new(mesh: &'a Mesh) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &mesh.vertices {
            for d in 0..3 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        let cell = (2.0 * mesh.mean_edge_length()).max(1e-12);
        let dims = [0, 1, 2].map(|d| (((hi[d] - lo[d]) / cell).floor() as usize) + 1);
        let mut cells: HashMap<[usize; 3], Vec<usize>> = HashMap::new();
        for (fi, f) in mesh.faces.iter().enumerate() {
            let mut flo = [f64::INFINITY; 3];
            let mut fhi = [f64::NEG_INFINITY; 3];
            for &i in f {
                for d in 0..3 {
                    flo[d] = flo[d].min(mesh.vertices[i][d]);
                    fhi[d] = fhi[d].max(mesh.vertices[i][d]);
                }
            }
            let a = [0, 1, 2].map(|d| (((flo[d] - lo[d]) / cell).floor() as usize).min(dims[d] - 1));
            let b = [0, 1, 2].map(|d| (((fhi[d] - lo[d]) / cell).floor() as usize).min(dims[d] - 1));
            for x in a[0]..=b[0] {
                for y in a[1]..=b[1] {
                    for z in a[2]..=b[2] {
                        cells.entry([x, y, z]).or_default().push(fi);
                    }
                }
            }
        }
        Self { mesh, origin: lo, cell, dims, cells }
    }

    pub fn closest(&self, p: &Point) -> SurfacePoint {
        let c = [0, 1, 2].map(|d| ((p[d] - self.origin[d]) / self.cell).floor() as i64);
        let mut best: Option<SurfacePoint> = None;
        let max_ring = *self.dims.iter().max().unwrap() as i64 + c.iter().map(|v| v.abs()).max().unwrap() + 2;
        for ring in 0..=max_ring {
            for x in (c[0] - ring)..=(c[0] + ring) {
                for y in (c[1] - ring)..=(c[1] + ring) {
                    for z in (c[2] - ring)..=(c[2] + ring) {
                        let on_shell = (x - c[0]).abs() == ring || (y - c[1]).abs() == ring || (z - c[2]).abs() == ring;
                        if !on_shell || x < 0 || y < 0 || z < 0 {
                            continue;
                        }
                        let Some(list) = self.cells.get(&[x as usize, y as usize, z as usize]) else {
                            continue;
                        };
                        for &fi in list {
                            let [a, b, cc] = self.mesh.faces[fi].map(|i| self.mesh.vertices[i]);
                            let (q, bary) = closest_on_triangle(*p, a, b, cc);
                            let d = norm(sub(*p, q));
                            if best.is_none_or(|s| d < s.distance) {
                                best = Some(SurfacePoint { face: fi, bary, point: q, distance: d });
                            }
                        }
                    }
                }
            }
            // everything outside the searched block is at least `ring * cell` away
            if let Some(s) = best {
                if s.distance <= ring as f64 * self.cell {
                    return s;
                }
            }
        }
        best.expect("mesh has at least one face")
    }
}

/// Closest point on triangle `abc` and its barycentric coordinates.
pub fn closest_on_triangle(p: Point, a: Point, b: Point, c: Point) -> (Point, [f64; 3]) {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a, [1.0, 0.0, 0.0]);
    }
    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (b, [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (add(a, scale(ab, v)), [1.0 - v, v, 0.0]);
    }
    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (c, [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (add(a, scale(ac, w)), [1.0 - w, 0.0, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (add(b, scale(sub(c, b), w)), [0.0, 1.0 - w, w]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (add(a, add(scale(ab, v), scale(ac, w))), [1.0 - v - w, v, w])
}

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Point, b: Point) -> Point {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn normalize(a: Point) -> Point {
    scale(a, 1.0 / norm(a))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TETRA: &str = "OFF\n4 4 6\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n";

    #[test]
    fn tetrahedron_counts() {
        let m = Mesh::parse_off(TETRA).unwrap();
        let d = m.diagnostics();
        assert_eq!(d.edges, 6);
        assert!(m.edge_face_counts().values().all(|&c| c == 2));
        assert_eq!(d.euler_characteristic, 2);
        assert_eq!(d.genus(), Some(0));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(Mesh::parse_off("4 4 0\n"), Err(Error::MeshParse { .. })));
        assert!(matches!(Mesh::parse_off("OFF\n0 0 0\n"), Err(Error::MeshParse { .. })));
        let quad = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        assert!(matches!(Mesh::parse_off(quad), Err(Error::MeshParse { line: 7, .. })));
        let oob = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 5\n";
        assert!(Mesh::parse_off(oob).is_err());
        assert!(Mesh::parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n").is_err());
    }

    #[test]
    fn icosphere_is_genus_zero() {
        let m = Mesh::icosphere(3);
        assert_eq!(m.vertices.len(), 642);
        let d = m.diagnostics();
        assert_eq!(d.euler_characteristic, 2);
        assert_eq!(d.genus(), Some(0));
    }

    #[test]
    fn off_round_trip() {
        let m = Mesh::icosphere(1);
        let back = Mesh::parse_off(&m.to_off()).unwrap();
        assert_eq!(back.faces, m.faces);
        for (a, b) in back.vertices.iter().zip(&m.vertices) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let text = "OFF\n4 4 0\n0 0 0\n1 0 0\n2 0 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n";
        let m = Mesh::parse_off(text).unwrap();
        assert!(matches!(m.cotangent_laplacian(), Err(Error::DegenerateMesh(_))));
    }

    #[test]
    fn laplacian_kills_constants() {
        let m = Mesh::icosphere(2);
        let (l, mass) = m.cotangent_laplacian().unwrap();
        let ones = vec![1.0; l.n];
        assert!(l.matvec(&ones).iter().all(|v| v.abs() < 1e-12));
        let area: f64 = mass.iter().sum();
        assert!((area - m.total_area()).abs() < 1e-12);
    }

    #[test]
    fn locator_matches_brute_force() {
        let m = Mesh::icosphere(2);
        let loc = m.locator();
        for i in 0..40 {
            let t = i as f64 * 0.61;
            let p = [1.1 * t.cos() * (0.3 * t).sin(), 0.9 * t.sin(), 1.05 * (0.3 * t).cos()];
            let fast = loc.closest(&p);
            let brute = (0..m.faces.len())
                .map(|f| {
                    let [a, b, c] = m.faces[f].map(|k| m.vertices[k]);
                    norm(sub(p, closest_on_triangle(p, a, b, c).0))
                })
                .fold(f64::INFINITY, f64::min);
            assert!((fast.distance - brute).abs() < 1e-14);
            let [a, b, c] = m.faces[fast.face].map(|k| m.vertices[k]);
            let rebuilt = add(add(scale(a, fast.bary[0]), scale(b, fast.bary[1])), scale(c, fast.bary[2]));
            assert!(norm(sub(rebuilt, fast.point)) < 1e-12);
        }
    }

    #[test]
    fn dijkstra_on_a_square() {
        let g = EdgeGraph::from_adjacency(vec![
            vec![(1, 1.0), (3, 1.0)],
            vec![(0, 1.0), (2, 1.0)],
            vec![(1, 1.0), (3, 1.0)],
            vec![(2, 1.0), (0, 1.0)],
        ]);
        assert_eq!(g.shortest_paths(0), vec![0.0, 1.0, 2.0, 1.0]);
        assert_eq!(g.components(), 1);
    }
}
