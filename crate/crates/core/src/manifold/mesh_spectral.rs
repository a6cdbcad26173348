use super::{Geometry, SpectralManifold};
use crate::error::{Error, Result};
use crate::linalg::eigen::{dense_generalized, shift_invert_subspace, SubspaceOptions};
use crate::mesh::Mesh;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshEigenSolver {
    /// Dense below `dense_limit` vertices, iterative above.
    Auto,
    Dense,
    Iterative,
}

#[derive(Clone, Debug)]
pub struct MeshSpectralOptions {
    pub solver: MeshEigenSolver,
    pub dense_limit: usize,
    pub subspace: SubspaceOptions,
}

impl Default for MeshSpectralOptions {
    fn default() -> Self {
        Self { solver: MeshEigenSolver::Auto, dense_limit: 1500, subspace: SubspaceOptions::default() }
    }
}

/// Lowest `k` eigenpairs of the cotangent Laplacian with lumped mass.
/// Weights are the lumped mass; the metric is the edge-graph shortest path.
pub fn mesh_spectral(mesh: &Mesh, k: usize, cluster_tol: f64) -> Result<SpectralManifold> {
    mesh_spectral_with(mesh, k, cluster_tol, &MeshSpectralOptions::default())
}

pub fn mesh_spectral_with(
    mesh: &Mesh,
    k: usize,
    cluster_tol: f64,
    opts: &MeshSpectralOptions,
) -> Result<SpectralManifold> {
    let n = mesh.vertices.len();
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!("cannot compute {k} eigenpairs on {n} vertices")));
    }
    let (l, mass) = mesh.cotangent_laplacian()?;
    let dense = match opts.solver {
        MeshEigenSolver::Dense => true,
        MeshEigenSolver::Iterative => false,
        MeshEigenSolver::Auto => n <= opts.dense_limit,
    };
    let pairs = if dense {
        dense_generalized(&l, &mass, k)?
    } else {
        shift_invert_subspace(&l, &mass, k, &opts.subspace)?
    };

    let volume: f64 = mass.iter().sum();
    let mut eigenvalues = pairs.values;
    let mut table = Vec::with_capacity(k * n);
    eigenvalues[0] = 0.0;
    table.extend(std::iter::repeat_n(1.0 / volume.sqrt(), n));
    for v in pairs.vectors.into_iter().skip(1) {
        let pivot = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
        let s = if pivot < 0.0 { -1.0 } else { 1.0 };
        table.extend(v.into_iter().map(|x| x * s));
    }
    for lam in eigenvalues.iter_mut().skip(1) {
        *lam = lam.max(0.0);
    }
    Ok(SpectralManifold::assemble(
        2,
        Geometry::Mesh { mesh: mesh.clone() },
        mesh.vertices.clone(),
        mass,
        eigenvalues,
        table,
        cluster_tol,
    ))
}
