//! Command-line front end: manifold construction, scattering transforms,
//! the deformation experiments and output verification.

mod config;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::{warp_family, Config, ManifoldSpec};
use geoscatter::deformation::{
    diffeo_stability, frame_check, heat_trace, impulse_field_table, impulse_responses, isometry_invariance,
};
use geoscatter::report::{table_csv, verify, write_atomic, ExperimentReport, Manifest};
use geoscatter::scattering::scatter;
use geoscatter::spectral::SpectralFunction;
use geoscatter::{Error, Result, SpectralManifold};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "geoscatter", version, about = "Geometric wavelet scattering on manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build, inspect or export a discretised manifold.
    #[command(subcommand)]
    Manifold(ManifoldCommand),
    /// Scattering coefficients of the configured signal.
    Scatter {
        #[command(flatten)]
        run: RunArgs,
        /// Include per-point values in the coefficient table.
        #[arg(long)]
        per_point: bool,
    },
    /// Run one of the numerical experiments.
    Experiment {
        #[arg(value_enum)]
        name: ExperimentName,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Dilated Gaussian impulse responses on a triangle mesh.
    DemoBunny {
        /// OFF mesh; a level-3 icosphere is used when absent.
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        scales: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        vertices: Vec<usize>,
        #[arg(long, default_value = "out/demo_bunny")]
        out: PathBuf,
    },
    /// Re-hash the outputs recorded in a run directory's manifest.
    Verify { dir: PathBuf },
}

#[derive(Subcommand)]
enum ManifoldCommand {
    /// Build and save a manifold as JSON.
    Build {
        #[command(flatten)]
        spec: ManifoldArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print spectrum and quadrature diagnostics.
    Info {
        #[command(flatten)]
        spec: ManifoldArgs,
    },
    /// Write eigenvalues, sample points and eigenfunctions as CSV.
    Export {
        #[command(flatten)]
        spec: ManifoldArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Circle,
    Torus,
    Sphere,
    Mesh,
}

#[derive(Args)]
struct ManifoldArgs {
    /// Previously built manifold file.
    #[arg(long, conflicts_with = "kind")]
    manifold: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    /// Sample count (circle) or first grid size (torus).
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long, default_value_t = 32)]
    kmax: usize,
    #[arg(long, default_value_t = 1.0)]
    r1: f64,
    #[arg(long, default_value_t = 1.0)]
    r2: f64,
    #[arg(long, default_value_t = 10)]
    lmax: usize,
    #[arg(long, default_value_t = 1)]
    oversample: usize,
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    icosphere: usize,
    /// Eigenpairs kept on a mesh.
    #[arg(long, default_value_t = 64)]
    k: usize,
}

impl ManifoldArgs {
    fn spec(&self) -> Result<ManifoldSpec> {
        if let Some(p) = &self.manifold {
            return Ok(ManifoldSpec::Cached { path: p.clone() });
        }
        let kind = self.kind.ok_or_else(|| Error::InvalidConfig("either --kind or --manifold is required".into()))?;
        Ok(match kind {
            Kind::Circle => ManifoldSpec::Circle { n: self.n, kmax: self.kmax },
            Kind::Torus => ManifoldSpec::Torus {
                n1: self.n,
                n2: self.n2.unwrap_or(self.n),
                r1: self.r1,
                r2: self.r2,
                kmax: self.kmax,
            },
            Kind::Sphere => ManifoldSpec::Sphere { lmax: self.lmax, oversample: self.oversample },
            Kind::Mesh => ManifoldSpec::Mesh { file: self.file.clone(), icosphere: self.icosphere, k: self.k },
        })
    }
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted override, e.g. `--set manifold.n=128`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; overrides `output` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<Config> {
        let mut cfg = Config::load(self.config.as_deref(), &self.overrides)?;
        if let Some(o) = &self.out {
            cfg.output = o.clone();
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentName {
    IsoInvariance,
    DiffeoStability,
    FrameCheck,
    HeatTrace,
}

enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Manifold(ManifoldCommand::Build { spec, out }) => {
            let m = spec.spec()?.build()?;
            write_atomic(&out, &m.to_json_bytes()?)?;
            println!("wrote {} ({} points, {} eigenpairs, id {})", out.display(), m.n_points(), m.n_eigen(), m.id());
            Ok(Outcome::Pass)
        }
        Command::Manifold(ManifoldCommand::Info { spec }) => {
            print_info(&spec.spec()?.build()?);
            Ok(Outcome::Pass)
        }
        Command::Manifold(ManifoldCommand::Export { spec, out }) => {
            export(&spec.spec()?.build()?, &out)?;
            Ok(Outcome::Pass)
        }
        Command::Scatter { run, per_point } => run_scatter(&run.load()?, per_point),
        Command::Experiment { name, run } => run_experiment(name, &run.load()?),
        Command::DemoBunny { mesh, k, scales, vertices, out } => demo_bunny(mesh, k, scales, vertices, &out),
        Command::Verify { dir } => {
            let v = verify(&dir)?;
            println!("checked {} outputs", v.checked);
            for name in &v.mismatched {
                println!("MISMATCH {name}");
            }
            for name in &v.missing {
                println!("MISSING {name}");
            }
            if !v.input_hash_ok {
                println!("MISMATCH configuration hash");
            }
            println!("{}", if v.ok() { "OK" } else { "FAILED" });
            Ok(if v.ok() { Outcome::Pass } else { Outcome::Fail })
        }
    }
}

fn print_info(m: &SpectralManifold) {
    let s = m.spectrum();
    println!("kind: {:?}", m.kind());
    println!("id: {}", m.id());
    println!("points: {}", m.n_points());
    println!("eigenpairs: {}", m.n_eigen());
    println!("dimension: {}", m.dim());
    println!("volume: {}", m.volume());
    println!("distinct eigenvalues: {}", s.len());
    let mults: Vec<String> = s.multiplicities().iter().map(|k| k.to_string()).collect();
    println!("multiplicities: {}", mults.join(","));
    for (lambda, mult) in s.uniques().iter().zip(s.multiplicities()) {
        println!("  lambda {lambda:.10} m {mult}");
    }
    println!("orthonormality residual: {:e}", m.orthonormality_residual());
}

fn export(m: &SpectralManifold, dir: &Path) -> Result<()> {
    let s = m.spectrum();
    let cols = |c: &[&str]| c.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let rows: Vec<Vec<f64>> =
        s.uniques().iter().zip(s.multiplicities()).map(|(l, k)| vec![*l, *k as f64]).collect();
    write_atomic(&dir.join("eigenvalues.csv"), &table_csv(&cols(&["lambda", "multiplicity"]), &rows)?)?;
    let mut pc = cols(&["x0", "x1", "x2"]);
    pc.truncate(m.points().first().map_or(0, |p| p.len()));
    pc.push("weight".into());
    let rows: Vec<Vec<f64>> = m
        .points()
        .iter()
        .zip(m.weights())
        .map(|(p, w)| {
            let mut r = p.to_vec();
            r.push(*w);
            r
        })
        .collect();
    write_atomic(&dir.join("points.csv"), &table_csv(&pc, &rows)?)?;
    let ec: Vec<String> = (0..m.n_eigen()).map(|k| format!("phi{k}")).collect();
    let rows: Vec<Vec<f64>> =
        (0..m.n_points()).map(|i| (0..m.n_eigen()).map(|k| m.eigenfunction(k)[i]).collect()).collect();
    write_atomic(&dir.join("eigenfunctions.csv"), &table_csv(&ec, &rows)?)?;
    println!("wrote eigenvalues.csv, points.csv, eigenfunctions.csv to {}", dir.display());
    Ok(())
}

fn manifest_for(command: &str, cfg: &Config) -> Result<Manifest> {
    let mut value = serde_json::to_value(cfg)?;
    let extra = cfg.manifold.input_bytes()?;
    if extra.is_some() {
        value["extra_inputs"] = serde_json::json!(["manifold"]);
    }
    let mut man = Manifest::new(command, value)?;
    if let Some(bytes) = extra {
        man.add_input(&bytes);
    }
    if let geoscatter::signals::SignalSpec::File { path } = &cfg.signal {
        man.add_input(&std::fs::read(path)?);
    }
    Ok(man)
}

fn run_scatter(cfg: &Config, per_point: bool) -> Result<Outcome> {
    let m = cfg.manifold.build()?;
    let bank = cfg.bank.build(&m)?;
    let f = cfg.signal.generate(&m)?;
    let s = scatter(&bank, &m, &f, cfg.order)?;
    let dir = &cfg.output;
    let mut man = manifest_for("scatter", cfg)?;
    s.write_csv(&m, &dir.join("scatter.csv"), per_point)?;
    let mut summary = serde_json::to_vec_pretty(&s.summary())?;
    summary.push(b'\n');
    write_atomic(&dir.join("summary.json"), &summary)?;
    man.record_output(dir, "scatter.csv")?;
    man.record_output(dir, "summary.json")?;
    man.write(dir)?;
    println!(
        "{} paths up to order {}, |Sf| = {:e}, |f| = {:e}",
        s.entries.len(),
        s.max_order,
        s.norm(),
        m.norm(&f)?
    );
    println!("wrote {}", dir.display());
    Ok(Outcome::Pass)
}

fn finish(command: &str, cfg: &Config, rep: &ExperimentReport, dir: &Path) -> Result<Outcome> {
    let mut man = manifest_for(command, cfg)?;
    for name in rep.write_tables(dir)? {
        man.record_output(dir, &name)?;
    }
    man.absorb(rep);
    man.write(dir)?;
    for line in rep.summary_lines() {
        println!("{line}");
    }
    println!("wrote {}", dir.display());
    Ok(if man.passed { Outcome::Pass } else { Outcome::Fail })
}

fn run_experiment(name: ExperimentName, cfg: &Config) -> Result<Outcome> {
    let m = cfg.manifold.build()?;
    let (command, rep) = match name {
        ExperimentName::IsoInvariance => {
            let f = cfg.signal.generate(&m)?;
            let zeta = cfg.isometry(m.kind())?;
            ("experiment iso-invariance", isometry_invariance(&m, &f, &zeta, &cfg.iso)?)
        }
        ExperimentName::DiffeoStability => {
            let eta = SpectralFunction::heat(&m, cfg.diffeo_heat_time);
            ("experiment diffeo-stability", diffeo_stability(&m, &eta, warp_family(m.kind()), &cfg.diffeo)?)
        }
        ExperimentName::FrameCheck => {
            let bank = cfg.bank.build(&m)?;
            ("experiment frame-check", frame_check(&m, &bank, &cfg.frame)?)
        }
        ExperimentName::HeatTrace => ("experiment heat-trace", heat_trace(&m, &cfg.heat_trace)?),
    };
    finish(command, cfg, &rep, &cfg.output)
}

fn demo_bunny(mesh: Option<PathBuf>, k: usize, scales: Vec<f64>, vertices: Vec<usize>, out: &Path) -> Result<Outcome> {
    let mut cfg = Config {
        manifold: ManifoldSpec::Mesh { file: mesh, icosphere: 3, k },
        output: out.to_path_buf(),
        ..Config::default()
    };
    cfg.impulse.scales = scales;
    cfg.impulse.vertices = vertices;
    let m = cfg.manifold.build()?;
    let (rep, fields) = impulse_responses(&m, &cfg.impulse)?;
    let (cols, rows) = impulse_field_table(&m, &fields);
    write_atomic(&out.join("fields.csv"), &table_csv(&cols, &rows)?)?;
    let mut man = manifest_for("demo-bunny", &cfg)?;
    man.record_output(out, "fields.csv")?;
    for name in rep.write_tables(out)? {
        man.record_output(out, &name)?;
    }
    man.absorb(&rep);
    man.write(out)?;
    for line in rep.summary_lines() {
        println!("{line}");
    }
    println!("wrote {}", out.display());
    Ok(if man.passed { Outcome::Pass } else { Outcome::Fail })
}
