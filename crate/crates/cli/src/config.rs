use geoscatter::deformation::{
    Deformation, DiffeoStabilityConfig, FrameCheckConfig, HeatTraceConfig, ImpulseConfig, IsoInvarianceConfig,
};
use geoscatter::filters::{default_j_min, make_wavelet_bank, FilterBank, Normalization};
use geoscatter::manifold::{
    build_circle, build_flat_torus, build_sphere, mesh_spectral, SphereGrid, MESH_CLUSTER_TOL,
};
use geoscatter::mesh::Mesh;
use geoscatter::signals::SignalSpec;
use geoscatter::spectral::SpectralForm;
use geoscatter::{Error, ManifoldKind, Result, SpectralManifold};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ManifoldSpec {
    Circle {
        n: usize,
        kmax: usize,
    },
    Torus {
        n1: usize,
        n2: usize,
        r1: f64,
        r2: f64,
        kmax: usize,
    },
    Sphere {
        lmax: usize,
        #[serde(default = "one")]
        oversample: usize,
    },
    Mesh {
        file: Option<PathBuf>,
        /// Icosphere level used when no file is given.
        #[serde(default = "three")]
        icosphere: usize,
        k: usize,
    },
    /// Previously built manifold file.
    Cached {
        path: PathBuf,
    },
}

fn one() -> usize {
    1
}

fn three() -> usize {
    3
}

impl Default for ManifoldSpec {
    fn default() -> Self {
        Self::Circle { n: 256, kmax: 32 }
    }
}

impl ManifoldSpec {
    pub fn build(&self) -> Result<SpectralManifold> {
        match self {
            Self::Circle { n, kmax } => build_circle(*n, *kmax),
            Self::Torus { n1, n2, r1, r2, kmax } => build_flat_torus(*n1, *n2, (*r1, *r2), *kmax),
            Self::Sphere { lmax, oversample } => build_sphere(*lmax, SphereGrid::oversampled(*lmax, (*oversample).max(1))),
            Self::Mesh { file, icosphere, k } => {
                let mesh = match file {
                    Some(p) => Mesh::load_off(p)?,
                    None => Mesh::icosphere(*icosphere),
                };
                mesh_spectral(&mesh, *k, MESH_CLUSTER_TOL)
            }
            Self::Cached { path } => SpectralManifold::load_json(path),
        }
    }

    /// Bytes of external inputs that the build depends on.
    pub fn input_bytes(&self) -> Result<Option<Vec<u8>>> {
        match self {
            Self::Mesh { file: Some(p), .. } | Self::Cached { path: p } => Ok(Some(std::fs::read(p)?)),
            _ => Ok(None),
        }
    }

}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BankSpec {
    pub g: SpectralForm,
    #[serde(rename = "J")]
    pub j_top: i32,
    pub j_min: Option<i32>,
    pub normalization: Normalization,
}

impl Default for BankSpec {
    fn default() -> Self {
        Self { g: SpectralForm::Heat { t: 1.0 }, j_top: 2, j_min: None, normalization: Normalization::Multiplicity }
    }
}

impl BankSpec {
    pub fn build(&self, m: &SpectralManifold) -> Result<FilterBank> {
        let j_min = match self.j_min {
            Some(j) => j,
            None => default_j_min(m, &self.g, self.j_top)?,
        };
        make_wavelet_bank(m, &self.g, self.j_top, j_min, self.normalization)
    }
}

/// Single declarative description of a run; every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub manifold: ManifoldSpec,
    pub bank: BankSpec,
    pub signal: SignalSpec,
    pub order: usize,
    /// Isometry for the invariance experiment; a kind-specific rotation
    /// by 0.37 when absent.
    pub deformation: Option<Deformation>,
    pub iso: IsoInvarianceConfig,
    pub diffeo: DiffeoStabilityConfig,
    /// Heat time of the operator whose commutators are measured.
    pub diffeo_heat_time: f64,
    pub frame: FrameCheckConfig,
    pub heat_trace: HeatTraceConfig,
    pub impulse: ImpulseConfig,
    pub output: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            manifold: ManifoldSpec::default(),
            bank: BankSpec::default(),
            signal: SignalSpec::Random { seed: 1, n_modes: None },
            order: 2,
            deformation: None,
            iso: IsoInvarianceConfig { scales: vec![0.25, 0.5, 1.0, 2.0, 4.0], ..Default::default() },
            diffeo: DiffeoStabilityConfig::default(),
            diffeo_heat_time: 1.0,
            frame: FrameCheckConfig::default(),
            heat_trace: HeatTraceConfig::default(),
            impulse: ImpulseConfig::default(),
            output: PathBuf::from("out"),
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = match path {
            Some(p) => serde_json::from_slice(&std::fs::read(p)?)?,
            None => serde_json::to_value(Config::default())?,
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: Config = serde_json::from_value(value).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let f = &self.frame;
        if !(f.upper_tol > 0.0 && f.lower_tol > 0.0 && f.isometry_tol > 0.0) {
            return Err(Error::InvalidConfig("frame tolerances must be positive".into()));
        }
        let d = &self.diffeo;
        if !(d.linear_tol > 0.0 && d.a3.refine_tol > 0.0) {
            return Err(Error::InvalidConfig("diffeo tolerances must be positive".into()));
        }
        if !(self.heat_trace.slope_tol > 0.0) {
            return Err(Error::InvalidConfig("heat trace tolerance must be positive".into()));
        }
        if !(self.diffeo_heat_time > 0.0) {
            return Err(Error::InvalidConfig("diffeo_heat_time must be positive".into()));
        }
        Ok(())
    }

    pub fn isometry(&self, kind: ManifoldKind) -> Result<Deformation> {
        if let Some(d) = &self.deformation {
            return Ok(d.clone());
        }
        match kind {
            ManifoldKind::Circle => Ok(Deformation::circle_rotation(0.37)),
            ManifoldKind::Sphere => Ok(Deformation::sphere_rotation([0.0, 0.0, 1.0], 0.37)),
            ManifoldKind::Torus => Ok(Deformation::torus_translation(0.37, 0.0)),
            ManifoldKind::Mesh => Err(Error::InvalidConfig("meshes need an explicit deformation".into())),
        }
    }
}

/// Warp family used by the stability sweep on each manifold kind.
pub fn warp_family(kind: ManifoldKind) -> fn(f64) -> Deformation {
    match kind {
        ManifoldKind::Circle => |tau| Deformation::CircleWarp { tau },
        ManifoldKind::Torus => |tau| Deformation::TorusWarp { tau },
        ManifoldKind::Sphere => |tau| Deformation::SphereWarp { tau },
        ManifoldKind::Mesh => |tau| Deformation::MeshAmbient {
            map: geoscatter::deformation::AmbientMap::Shear { tau, axis: 2, scale: 1.0 },
        },
    }
}

/// `a.b.c=value`; the value is parsed as JSON, falling back to a string.
pub fn apply_override(root: &mut serde_json::Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("override {assignment:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::InvalidConfig(format!("empty key segment in {key:?}")));
        }
        if !node.is_object() {
            *node = serde_json::Value::Object(Default::default());
        }
        let map = node.as_object_mut().expect("object");
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert(serde_json::Value::Null);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = Config::load(None, &["manifold.n=64".into(), "manifold.kmax=8".into(), "order=1".into()]).unwrap();
        assert_eq!(cfg.manifold, ManifoldSpec::Circle { n: 64, kmax: 8 });
        assert_eq!(cfg.order, 1);
        let cfg = Config::load(None, &[r#"manifold={"kind":"sphere","lmax":3}"#.into()]).unwrap();
        assert_eq!(cfg.manifold, ManifoldSpec::Sphere { lmax: 3, oversample: 1 });
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(Config::load(None, &["nonsense".into()]).is_err());
        assert!(Config::load(None, &["unknown_field=1".into()]).is_err());
        assert!(Config::load(None, &["frame.isometry_tol=-1".into()]).is_err());
    }

    #[test]
    fn default_config_round_trips() {
        let v = serde_json::to_value(Config::default()).unwrap();
        let back: Config = serde_json::from_value(v).unwrap();
        assert_eq!(back, Config::default());
    }
}
