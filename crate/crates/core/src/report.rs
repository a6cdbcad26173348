//! Tables, manifests and verification of experiment outputs.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Write through a temporary sibling file and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One named assertion with the values that decided it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

/// Numeric table plus the assertions evaluated on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub checks: Vec<Check>,
    pub fitted: BTreeMap<String, f64>,
    pub params: serde_json::Value,
    /// `(x, y)` column pairs emitted as separate plot-ready files.
    pub series: Vec<(String, String)>,
}

impl ExperimentReport {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            checks: Vec::new(),
            fitted: BTreeMap::new(),
            params: serde_json::Value::Null,
            series: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check::new(name, passed, detail));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn check_named(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        table_csv(&self.columns, &self.rows)
    }

    /// Writes `<name>.csv`, one file per series and returns their names.
    pub fn write_tables(&self, dir: &Path) -> Result<Vec<String>> {
        let mut files = Vec::new();
        let main = format!("{}.csv", self.name);
        write_atomic(&dir.join(&main), &self.to_csv()?)?;
        files.push(main);
        for (x, y) in &self.series {
            let (Some(xs), Some(ys)) = (self.column(x), self.column(y)) else {
                return Err(Error::Structure(format!("series {x}/{y} names a missing column")));
            };
            let rows: Vec<Vec<f64>> = xs.into_iter().zip(ys).map(|(a, b)| vec![a, b]).collect();
            let name = format!("{}_{y}_vs_{x}.csv", self.name);
            write_atomic(&dir.join(&name), &table_csv(&[x.clone(), y.clone()], &rows)?)?;
            files.push(name);
        }
        Ok(files)
    }

    pub fn summary_lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
            .collect()
    }
}

/// CSV with shortest round-trip float formatting.
pub fn table_csv(columns: &[String], rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns).map_err(csv_err)?;
    for r in rows {
        w.write_record(r.iter().map(|v| format_value(*v))).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Structure(e.to_string()))
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Structure(e.to_string())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub input_sha256: String,
    /// Output file name → sha256.
    pub outputs: BTreeMap<String, String>,
    pub checks: Vec<Check>,
    pub fitted: BTreeMap<String, f64>,
    pub passed: bool,
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value) -> Result<Self> {
        let input_sha256 = sha256_hex(&serde_json::to_vec(&config)?);
        Ok(Self {
            tool: "geoscatter".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            input_sha256,
            outputs: BTreeMap::new(),
            checks: Vec::new(),
            fitted: BTreeMap::new(),
            passed: true,
        })
    }

    /// Hash an extra input (manifold cache, signal file) into the input hash.
    pub fn add_input(&mut self, bytes: &[u8]) {
        let mut h = Sha256::new();
        h.update(self.input_sha256.as_bytes());
        h.update(bytes);
        self.input_sha256 = hex::encode(h.finalize());
    }

    pub fn record_output(&mut self, dir: &Path, name: &str) -> Result<()> {
        let bytes = std::fs::read(dir.join(name))?;
        self.outputs.insert(name.into(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn absorb(&mut self, report: &ExperimentReport) {
        self.checks.extend(report.checks.iter().cloned());
        for (k, v) in &report.fitted {
            self.fitted.insert(k.clone(), *v);
        }
        self.passed = self.checks.iter().all(|c| c.passed);
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_NAME);
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_atomic(&path, &bytes)?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(dir.join(MANIFEST_NAME))?)?)
    }
}

/// Result of re-hashing a manifest's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub checked: usize,
    pub mismatched: Vec<String>,
    pub missing: Vec<String>,
    pub input_hash_ok: bool,
}

impl Verification {
    pub fn ok(&self) -> bool {
        self.mismatched.is_empty() && self.missing.is_empty() && self.input_hash_ok
    }
}

/// Recompute every recorded output hash and the configuration hash.
/// Extra inputs folded in with [`Manifest::add_input`] cannot be replayed,
/// so the configuration hash is only compared when none were added.
pub fn verify(dir: &Path) -> Result<Verification> {
    let m = Manifest::read(dir)?;
    let mut mismatched = Vec::new();
    let mut missing = Vec::new();
    for (name, hash) in &m.outputs {
        match std::fs::read(dir.join(name)) {
            Ok(bytes) if &sha256_hex(&bytes) == hash => {}
            Ok(_) => mismatched.push(name.clone()),
            Err(_) => missing.push(name.clone()),
        }
    }
    let cfg_hash = sha256_hex(&serde_json::to_vec(&m.config)?);
    let extra = m.config.get("extra_inputs").and_then(|v| v.as_array()).is_some_and(|a| !a.is_empty());
    let input_hash_ok = extra || cfg_hash == m.input_sha256;
    Ok(Verification { checked: m.outputs.len(), mismatched, missing, input_hash_ok })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentReport {
        let mut r = ExperimentReport::new("demo", &["t", "y"]);
        r.push_row(vec![0.5, 0.1]);
        r.push_row(vec![1.0, f64::NAN]);
        r.series.push(("t".into(), "y".into()));
        r.check("positive", true, "ok".into());
        r
    }

    #[test]
    fn csv_is_deterministic_and_round_trips_floats() {
        let r = sample();
        let a = r.to_csv().unwrap();
        assert_eq!(a, r.to_csv().unwrap());
        let text = String::from_utf8(a).unwrap();
        assert_eq!(text, "t,y\n0.5,0.1\n1,nan\n");
        let x = 0.1 + 0.2;
        assert_eq!(format_value(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn manifest_verification_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let r = sample();
        let mut m = Manifest::new("experiment demo", serde_json::json!({"a": 1})).unwrap();
        for f in r.write_tables(dir.path()).unwrap() {
            m.record_output(dir.path(), &f).unwrap();
        }
        m.absorb(&r);
        m.write(dir.path()).unwrap();
        let v = verify(dir.path()).unwrap();
        assert!(v.ok() && v.checked == 2, "{v:?}");
        std::fs::write(dir.path().join("demo.csv"), "t,y\n").unwrap();
        let v = verify(dir.path()).unwrap();
        assert_eq!(v.mismatched, vec!["demo.csv".to_string()]);
        std::fs::remove_file(dir.path().join("demo_y_vs_t.csv")).unwrap();
        assert_eq!(verify(dir.path()).unwrap().missing.len(), 1);
    }

    #[test]
    fn failing_check_marks_manifest() {
        let mut r = sample();
        r.check("bad", false, "1 > 0".into());
        let mut m = Manifest::new("x", serde_json::Value::Null).unwrap();
        m.absorb(&r);
        assert!(!m.passed);
        assert_eq!(r.failures().len(), 1);
    }
}
