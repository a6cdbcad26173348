use super::{Geometry, Point, SpectralManifold, UniqueSpectrum};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

const FORMAT: &str = "geoscatter-manifold";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ManifoldFile {
    format: String,
    version: u32,
    id: String,
    dim: usize,
    cluster_tol: f64,
    geometry: Geometry,
    spectrum: UniqueSpectrum,
    points: Vec<Point>,
    weights: Vec<f64>,
    eigenvalues: Vec<f64>,
    eigenfunctions: Vec<f64>,
}

pub(super) fn to_bytes(m: &SpectralManifold) -> Result<Vec<u8>> {
    let file = ManifoldFile {
        format: FORMAT.into(),
        version: VERSION,
        id: m.id.to_string(),
        dim: m.dim,
        cluster_tol: m.cluster_tol,
        geometry: m.geometry.clone(),
        spectrum: m.spectrum.clone(),
        points: m.points.clone(),
        weights: m.weights.clone(),
        eigenvalues: m.eigenvalues.clone(),
        eigenfunctions: m.eigenfunctions.clone(),
    };
    Ok(serde_json::to_vec(&file)?)
}

pub(super) fn from_bytes(bytes: &[u8]) -> Result<SpectralManifold> {
    let f: ManifoldFile = serde_json::from_slice(bytes)?;
    if f.format != FORMAT || f.version != VERSION {
        return Err(Error::Structure(format!("unsupported manifold container {} v{}", f.format, f.version)));
    }
    let n = f.points.len();
    if f.weights.len() != n || f.eigenfunctions.len() != n * f.eigenvalues.len() {
        return Err(Error::Structure("inconsistent table sizes in manifold container".into()));
    }
    let m = SpectralManifold::assemble(
        f.dim,
        f.geometry,
        f.points,
        f.weights,
        f.eigenvalues,
        f.eigenfunctions,
        f.cluster_tol,
    );
    if m.id.to_string() != f.id {
        return Err(Error::Structure(format!("content hash {} does not match stored id {}", m.id, f.id)));
    }
    if m.spectrum != f.spectrum {
        return Err(Error::Structure("stored eigenvalue grouping does not match recomputed grouping".into()));
    }
    Ok(m)
}

pub(super) fn save(m: &SpectralManifold, path: &Path) -> Result<()> {
    crate::report::write_atomic(path, &to_bytes(m)?)
}

pub(super) fn load(path: &Path) -> Result<SpectralManifold> {
    from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use crate::manifold::{build_circle, build_flat_torus, build_sphere, SphereGrid};
    use crate::SpectralManifold;

    #[test]
    fn round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        for (i, m) in [
            build_circle(32, 7).unwrap(),
            build_sphere(3, SphereGrid::gauss(3)).unwrap(),
            build_flat_torus(8, 16, (1.0, 2.0), 3).unwrap(),
        ]
        .into_iter()
        .enumerate()
        {
            let path = dir.path().join(format!("m{i}.json"));
            m.save_json(&path).unwrap();
            let back = SpectralManifold::load_json(&path).unwrap();
            assert_eq!(back.id(), m.id());
            assert_eq!(back.eigenfunctions, m.eigenfunctions);
            assert_eq!(back.to_json_bytes().unwrap(), std::fs::read(&path).unwrap());
        }
    }

    #[test]
    fn tampered_file_is_rejected() {
        let m = build_circle(16, 3).unwrap();
        let text = String::from_utf8(m.to_json_bytes().unwrap()).unwrap();
        let bad = text.replacen("\"weights\":[", "\"weights\":[0.5,", 1);
        assert!(SpectralManifold::from_json_bytes(bad.as_bytes()).is_err());
    }
}
