//! Command-line front end of the `dconf` binary.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::beltrami::{read_boundary_csv, read_mu_csv, solve_beltrami};
use crate::bounds::{
    bound_report, delaunay_degradation_scan, estimate_lipschitz, quality_report, sample_soundness, write_quality_csv,
    BoundsConfig,
};
use crate::error::{Error, Result};
use crate::experiments::{emit_report, fit_exponent, run_dir_name, run_sweep};
use crate::harmonic::{build_source, build_source_near, invert_exterior, solve_weak_lb};
use crate::laplacian::{assemble_laplacian, conformal_energy, Parameterization, RhoMode};
use crate::mesh::{
    gen_disk, gen_hemisphere, load_mesh, save_mesh, stereographic_gradient, HemisphereMesh, HemisphereSpec,
    ParamSurface, ParamTriangle, PlanarIdentity, TriMesh, Vec2, Vec3, VertexMap,
};
use crate::minimizer::{minimize, normalize_map, prepare_initial_map, relative_error, BoundaryMode, MinimizerOptions};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "DCONF_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "dconf",
    version,
    about = "Discrete conformal maps of disk-like triangle meshes"
)]
#[command(args_override_self = true)]
pub struct Cli {
    /// File of `key = value` lines overriding command-line flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a hemisphere or planar disk mesh as OFF.
    Gen(GenArgs),
    /// Harmonic initialisation followed by conformal energy minimisation.
    Solve(SolveArgs),
    /// Per-face quality ratios and the degradation scan.
    Quality(QualityArgs),
    /// Per-face a-priori bounds and sampled soundness checks.
    Bounds(BoundsArgs),
    /// Hemisphere convergence sweep.
    Converge(ConvergeArgs),
    /// Discrete Beltrami solve on a planar mesh.
    Beltrami(BeltramiArgs),
}

#[derive(Debug, Clone, Args)]
pub struct MeshArgs {
    /// OFF mesh file.
    #[arg(long, conflicts_with_all = ["n", "disk_rings"])]
    pub mesh: Option<PathBuf>,
    /// Hemisphere latitude count.
    #[arg(long)]
    pub n: Option<usize>,
    /// Hemisphere longitude count.
    #[arg(long, requires = "n", conflicts_with = "r")]
    pub m: Option<usize>,
    /// Exponent with `m = floor(n^r)`.
    #[arg(long, requires = "n")]
    pub r: Option<f64>,
    /// Planar unit disk with this many rings.
    #[arg(long, conflicts_with = "n")]
    pub disk_rings: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct MinimizerArgs {
    #[arg(long, default_value_t = MinimizerOptions::default().max_iterations)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = MinimizerOptions::default().gradient_tolerance)]
    pub gradient_tolerance: f64,
    #[arg(long, default_value_t = MinimizerOptions::default().relative_tolerance)]
    pub relative_tolerance: f64,
    #[arg(long, default_value_t = MinimizerOptions::default().initial_step)]
    pub initial_step: f64,
    #[arg(long, default_value_t = MinimizerOptions::default().memory)]
    pub memory: usize,
    /// `angle` (boundary slides on the circle) or `fixed`.
    #[arg(long, default_value = "angle", value_parser = parse_boundary)]
    pub boundary: BoundaryMode,
}

impl MinimizerArgs {
    pub fn options(&self) -> MinimizerOptions {
        MinimizerOptions {
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            relative_tolerance: self.relative_tolerance,
            initial_step: self.initial_step,
            memory: self.memory,
            boundary: self.boundary,
            ..MinimizerOptions::default()
        }
    }
}

fn parse_boundary(s: &str) -> std::result::Result<BoundaryMode, String> {
    match s {
        "angle" => Ok(BoundaryMode::Angle),
        "fixed" => Ok(BoundaryMode::Fixed),
        _ => Err(format!("unknown boundary mode {s:?} (expected angle or fixed)")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub mesh: MeshArgs,
    /// Output OFF path; defaults to a name under the output root.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub mesh: MeshArgs,
    #[command(flatten)]
    pub minimizer: MinimizerArgs,
    /// Area-ratio mode: unit, analytic or quadrature[:degree]. Only unit applies to OFF input.
    #[arg(long)]
    pub rho: Option<RhoMode>,
    /// `harmonic` or `positions` (planar meshes only); default depends on the mesh.
    #[arg(long)]
    pub init: Option<String>,
    /// Face carrying the point source; defaults to the face nearest the lowest vertex.
    #[arg(long)]
    pub source_face: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct QualityArgs {
    #[command(flatten)]
    pub mesh: MeshArgs,
    #[arg(long, default_value_t = 0.1)]
    pub eps1: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eps2: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub mesh: MeshArgs,
    /// Overrides the surface's Lipschitz constant.
    #[arg(long)]
    pub c_m: Option<f64>,
    /// Lipschitz constant of the map's gradient; estimated from the exact map when omitted.
    #[arg(long)]
    pub c_l: Option<f64>,
    /// Global lower singular-value bound; per-face values when omitted.
    #[arg(long)]
    pub sigma_min: Option<f64>,
    #[arg(long, default_value = "analytic")]
    pub rho: RhoMode,
    /// Barycentric lattice subdivisions for the soundness samples.
    #[arg(long, default_value_t = 16)]
    pub samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergeArgs {
    #[arg(long)]
    pub r: f64,
    /// Comma-separated increasing n values.
    #[arg(long, value_delimiter = ',', default_values_t = crate::experiments::DEFAULT_NS)]
    pub ns: Vec<usize>,
    #[arg(long, default_value = "quadrature:3")]
    pub rho: RhoMode,
    #[command(flatten)]
    pub minimizer: MinimizerArgs,
    /// Run directory; defaults to a parameter-named directory under the output root.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BeltramiArgs {
    /// Planar OFF mesh.
    #[arg(long)]
    pub mesh: PathBuf,
    /// CSV of `face,mu1,mu2`; missing faces use zero.
    #[arg(long)]
    pub mu: Option<PathBuf>,
    /// CSV of `vertex,x,y` covering every boundary vertex.
    #[arg(long)]
    pub boundary: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Output root: `DCONF_OUT` or the current directory.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from)
}

/// Reads `key = value` lines into `--key value` arguments. `#` starts a comment.
pub fn config_args(path: &Path) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: &str| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message: message.to_string(),
        };
        let (key, value) = line.split_once('=').ok_or_else(|| parse_err("expected key = value"))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(parse_err("malformed key"));
        }
        if key == "config" {
            return Err(parse_err("config files cannot include other config files"));
        }
        out.push(format!("--{key}").into());
        out.push(value.trim().into());
    }
    Ok(out)
}

/// Parses arguments, appending config-file overrides after the subcommand's own flags.
pub fn parse_args(args: Vec<OsString>) -> std::result::Result<Cli, CliError> {
    let first = Cli::try_parse_from(&args).map_err(CliError::Clap)?;
    let Some(path) = first.config.clone() else {
        return Ok(first);
    };
    let mut extended = args;
    extended.extend(config_args(&path).map_err(CliError::Run)?);
    Cli::try_parse_from(&extended).map_err(CliError::Clap)
}

#[derive(Debug)]
pub enum CliError {
    Clap(clap::Error),
    Run(Error),
}

/// Exit code for a failed run.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_)
        | Error::Csv(_)
        | Error::Parse { .. }
        | Error::InvalidParameter(_)
        | Error::InvalidTopology(_)
        | Error::DimensionMismatch { .. }
        | Error::DegenerateCoefficient(_) => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match parse_args(args) {
        Ok(cli) => cli,
        Err(CliError::Clap(e)) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Quality(a) => cmd_quality(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Converge(a) => cmd_converge(a),
        Command::Beltrami(a) => cmd_beltrami(a),
    })
}

enum LoadedMesh {
    Hemisphere(HemisphereMesh),
    Plain(TriMesh),
}

impl LoadedMesh {
    fn mesh(&self) -> &TriMesh {
        match self {
            Self::Hemisphere(h) => &h.mesh,
            Self::Plain(m) => m,
        }
    }
}

fn hemisphere_spec(a: &MeshArgs) -> Result<Option<HemisphereSpec>> {
    let Some(n) = a.n else { return Ok(None) };
    match (a.m, a.r) {
        (Some(m), None) => HemisphereSpec::new(n, m).map(Some),
        (None, Some(r)) => HemisphereSpec::from_exponent(n, r).map(Some),
        _ => Err(Error::InvalidParameter(
            "a hemisphere needs --n with exactly one of --m or --r".into(),
        )),
    }
}

fn load(a: &MeshArgs) -> Result<LoadedMesh> {
    if let Some(path) = &a.mesh {
        return load_mesh(path).map(LoadedMesh::Plain);
    }
    if let Some(spec) = hemisphere_spec(a)? {
        return gen_hemisphere(&spec).map(LoadedMesh::Hemisphere);
    }
    if let Some(k) = a.disk_rings {
        return gen_disk(k).map(|d| LoadedMesh::Plain(d.mesh));
    }
    Err(Error::InvalidParameter(
        "no mesh given: use --mesh, --n with --m or --r, or --disk-rings".into(),
    ))
}

fn mesh_label(a: &MeshArgs, loaded: &LoadedMesh) -> String {
    match loaded {
        LoadedMesh::Hemisphere(h) => format!("hemisphere_n{}_m{}", h.spec.n, h.spec.m),
        LoadedMesh::Plain(_) => match (&a.mesh, a.disk_rings) {
            (Some(p), _) => p
                .file_stem()
                .map_or("mesh".into(), |s| s.to_string_lossy().into_owned()),
            (None, Some(k)) => format!("disk_k{k}"),
            _ => "mesh".into(),
        },
    }
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

fn write_map_csv(path: &Path, f: &[Vec2]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["vertex", "x", "y"])?;
    for (i, p) in f.iter().enumerate() {
        w.write_record([i.to_string(), format!("{:.17e}", p.x), format!("{:.17e}", p.y)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_gen(a: &GenArgs) -> Result<i32> {
    let loaded = load(&a.mesh)?;
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| output_root().join(format!("{}.off", mesh_label(&a.mesh, &loaded))));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    save_mesh(loaded.mesh(), &out)?;
    println!(
        "wrote {} ({} vertices, {} faces)",
        out.display(),
        loaded.mesh().vertex_count(),
        loaded.mesh().face_count()
    );
    Ok(EXIT_OK)
}

fn lowest_point(mesh: &TriMesh) -> Vec3 {
    mesh.vertices()
        .iter()
        .copied()
        .min_by(|a, b| a.z.total_cmp(&b.z))
        .unwrap_or_else(Vec3::zeros)
}

pub fn cmd_solve(a: &SolveArgs) -> Result<i32> {
    let loaded = load(&a.mesh)?;
    let mesh = loaded.mesh();
    let rho = a.rho.unwrap_or(match loaded {
        LoadedMesh::Hemisphere(_) => RhoMode::Quadrature(3),
        LoadedMesh::Plain(_) => RhoMode::Unit,
    });
    let surface;
    let param = match &loaded {
        LoadedMesh::Hemisphere(h) => {
            surface = h.surface();
            Some(Parameterization {
                surface: &surface,
                patches: &h.patches,
            })
        }
        LoadedMesh::Plain(_) => None,
    };
    let lap = assemble_laplacian(mesh, rho, param)?;
    let init_mode = a.init.clone().unwrap_or_else(|| {
        if mesh.ambient_dim() == 2 {
            "positions"
        } else {
            "harmonic"
        }
        .into()
    });
    let init = match init_mode.as_str() {
        "positions" if mesh.ambient_dim() == 2 => prepare_initial_map(mesh, &mesh.planar_positions())?,
        "positions" => return Err(Error::InvalidParameter("positions init needs a planar mesh".into())),
        "harmonic" => {
            let source = match a.source_face {
                Some(f) => build_source(mesh, f)?,
                None => build_source_near(mesh, &lowest_point(mesh))?,
            };
            let sol = solve_weak_lb(mesh, &lap, &source, 0)?;
            prepare_initial_map(mesh, &invert_exterior(mesh, &sol.values, source.face)?)?
        }
        other => return Err(Error::InvalidParameter(format!("unknown init {other:?}"))),
    };
    let report = minimize(mesh, &lap, &init, &a.minimizer.options())?;

    let dir = a
        .out_dir
        .clone()
        .unwrap_or_else(|| output_root().join(format!("solve_{}", mesh_label(&a.mesh, &loaded))));
    std::fs::create_dir_all(&dir)?;
    write_map_csv(&dir.join("map.csv"), &report.map)?;
    report.write_trace_csv(create(&dir.join("trace.csv"))?)?;

    let e = report.final_energy();
    let mut summary: Vec<(&str, String)> = vec![
        ("vertices", mesh.vertex_count().to_string()),
        ("faces", mesh.face_count().to_string()),
        ("rho", rho.to_string()),
        ("iterations", report.iterations.to_string()),
        ("termination", format!("{:?}", report.termination)),
        ("converged", report.converged.to_string()),
        ("folds", report.folds.to_string()),
        ("dirichlet", format!("{:.17e}", e.dirichlet)),
        ("area", format!("{:.17e}", e.area)),
        ("conformal", format!("{:.17e}", e.conformal)),
    ];
    if let LoadedMesh::Hemisphere(h) = &loaded {
        let exact = h.exact_map();
        let normalized = normalize_map(&report.map, &exact)?;
        summary.push((
            "conformal_exact",
            format!("{:.17e}", conformal_energy(mesh, &lap, &exact)?.conformal),
        ));
        summary.push((
            "relative_error",
            format!("{:.17e}", relative_error(&normalized, &exact)?),
        ));
    }
    let mut w = csv::Writer::from_writer(create(&dir.join("report.csv"))?);
    w.write_record(["key", "value"])?;
    for (k, v) in &summary {
        w.write_record([k, v.as_str()])?;
    }
    w.flush()?;
    println!(
        "{} after {} iterations: E_C = {:.6e}, folds = {}; outputs in {}",
        if report.converged { "converged" } else { "not converged" },
        report.iterations,
        e.conformal,
        report.folds,
        dir.display()
    );
    Ok(if report.converged { EXIT_OK } else { EXIT_NUMERICAL })
}

pub fn cmd_quality(a: &QualityArgs) -> Result<i32> {
    if !(a.eps1 > 0.0 && a.eps2 > 0.0) {
        return Err(Error::InvalidParameter("thresholds must be positive".into()));
    }
    let loaded = load(&a.mesh)?;
    let patches = match &loaded {
        LoadedMesh::Hemisphere(h) => Some(h.patches.as_slice()),
        LoadedMesh::Plain(_) => None,
    };
    let report = quality_report(loaded.mesh(), patches)?;
    let flags = delaunay_degradation_scan(loaded.mesh(), a.eps1, a.eps2);
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| output_root().join(format!("quality_{}.csv", mesh_label(&a.mesh, &loaded))));
    write_quality_csv(&report, &flags, create(&out)?)?;
    println!(
        "max d/sin = {:.6e}, max d/r = {:.6e}, h = {:.6e}, flagged = {}; wrote {}",
        report.max_ratio_dsin,
        report.max_ratio_dr,
        report.h_v,
        flags.len(),
        out.display()
    );
    Ok(EXIT_OK)
}

pub fn cmd_bounds(a: &BoundsArgs) -> Result<i32> {
    let loaded = load(&a.mesh)?;
    let mesh = loaded.mesh();
    let identity_patches: Vec<ParamTriangle>;
    let (surface, patches, exact): (&dyn ParamSurface, &[ParamTriangle], VertexMap) = match &loaded {
        LoadedMesh::Hemisphere(h) => (&crate::mesh::Hemisphere, &h.patches, h.exact_map()),
        LoadedMesh::Plain(m) if m.ambient_dim() == 2 => {
            let p = m.planar_positions();
            identity_patches = m.faces().iter().map(|f| f.map(|v| p[v])).collect();
            (&PlanarIdentity, &identity_patches, p)
        }
        LoadedMesh::Plain(_) => {
            return Err(Error::InvalidParameter(
                "bounds need a known parameterisation: a planar mesh or a generated hemisphere".into(),
            ))
        }
    };
    let param = Parameterization { surface, patches };
    let c_m = a.c_m.unwrap_or_else(|| surface.lipschitz());
    let c_l = match (a.c_l, &loaded) {
        (Some(c), _) => c,
        (None, LoadedMesh::Hemisphere(h)) => estimate_lipschitz(&h.mesh, stereographic_gradient),
        (None, LoadedMesh::Plain(_)) => 0.0,
    };
    let cfg = BoundsConfig {
        c_m,
        c_l,
        sigma_min: a.sigma_min,
        sigma_max: surface.sigma_max(),
        total_area: patches
            .iter()
            .map(|t| surface.patch_area(t).unwrap_or(0.0))
            .sum::<f64>()
            .max(f64::MIN_POSITIVE),
    };
    let cfg = match &loaded {
        LoadedMesh::Hemisphere(h) => BoundsConfig {
            total_area: h.surface_area(),
            ..cfg
        },
        LoadedMesh::Plain(_) => cfg,
    };
    let lap = assemble_laplacian(mesh, a.rho, Some(param))?;
    let e_dh = lap.dirichlet_energy(&exact);
    let report = bound_report(mesh, param, &cfg, e_dh)?;
    let samples = sample_soundness(mesh, param, c_m, a.samples)?;
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| output_root().join(format!("bounds_{}.csv", mesh_label(&a.mesh, &loaded))));
    report.write_csv(create(&out)?, Some(&samples))?;
    let sound = samples.iter().all(|s| s.tau_ok && s.nq_ok);
    println!(
        "E_D^h = {:.6e}, eps_D^h = {:.6e}, psi' max = {:.6e}, psi'' max = {:.6e}, samples sound = {}; wrote {}",
        e_dh,
        report.eps_dh,
        report.psi_prime_max,
        report.psi_double_prime_max,
        sound,
        out.display()
    );
    Ok(if sound { EXIT_OK } else { EXIT_NUMERICAL })
}

pub fn cmd_converge(a: &ConvergeArgs) -> Result<i32> {
    let opts = a.minimizer.options();
    let rows = run_sweep(a.r, &a.ns, &opts, a.rho)?;
    let fit = fit_exponent(&rows, None).ok();
    let dir = a
        .out_dir
        .clone()
        .unwrap_or_else(|| output_root().join(run_dir_name(a.r, &a.ns, a.rho)));
    let files = emit_report(&rows, fit.as_ref(), &dir)?;
    let mut stdout = std::io::stdout().lock();
    for r in &rows {
        writeln!(
            stdout,
            "n = {:3}  m = {:3}  h = {:.4e}  eps = {:.4e}  E_C(f^h) = {:.6e}  E_C(f*) = {:.6e}  {}",
            r.n,
            r.m,
            r.h_v,
            r.rel_error,
            r.ec_h,
            r.ec_star,
            if r.converged { "converged" } else { "not converged" }
        )?;
    }
    match &fit {
        Some(f) => writeln!(
            stdout,
            "fitted exponent c = {:.4} over {} rows",
            f.exponent, f.rows_used
        )?,
        None => writeln!(stdout, "too few usable rows for an exponent fit")?,
    }
    writeln!(stdout, "wrote {}", files.convergence.display())?;
    Ok(if rows.iter().all(|r| r.converged) {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    })
}

pub fn cmd_beltrami(a: &BeltramiArgs) -> Result<i32> {
    let mesh = load_mesh(&a.mesh)?;
    if mesh.ambient_dim() != 2 {
        return Err(Error::InvalidParameter(
            "the Beltrami solver needs a planar mesh".into(),
        ));
    }
    let mu = match &a.mu {
        Some(p) => read_mu_csv(p, mesh.face_count())?,
        None => vec![Default::default(); mesh.face_count()],
    };
    let boundary = read_boundary_csv(&a.boundary, &mesh)?;
    let sol = solve_beltrami(&mesh, &mu, &boundary)?;
    let out = a.out.clone().unwrap_or_else(|| {
        let stem = a
            .mesh
            .file_stem()
            .map_or("mesh".into(), |s| s.to_string_lossy().into_owned());
        output_root().join(format!("beltrami_{stem}.csv"))
    });
    write_map_csv(&out, &sol.values)?;
    println!("residual {:.3e}; wrote {}", sol.residual_norm, out.display());
    Ok(if sol.residual_norm <= 1e-10 {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<OsString> {
        s.split_whitespace().map(OsString::from).collect()
    }

    #[test]
    fn config_overrides_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "# sweep\nmax_iterations = 7\nrho = unit\n").unwrap();
        let line = format!("dconf converge --r 0.5 --max-iterations 99 --config {}", cfg.display());
        let cli = parse_args(args(&line)).unwrap();
        let Command::Converge(c) = cli.command else { panic!() };
        assert_eq!(c.minimizer.max_iterations, 7);
        assert_eq!(c.rho, RhoMode::Unit);
        assert_eq!(c.ns, crate::experiments::DEFAULT_NS.to_vec());
    }

    #[test]
    fn unknown_and_malformed_keys() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("bad.cfg");
        std::fs::write(&cfg, "frobnicate = 3\n").unwrap();
        let line = format!("dconf converge --r 0.5 --config {}", cfg.display());
        assert!(matches!(parse_args(args(&line)), Err(CliError::Clap(_))));
        std::fs::write(&cfg, "no equals sign\n").unwrap();
        assert!(matches!(
            parse_args(args(&line)),
            Err(CliError::Run(Error::Parse { line: 1, .. }))
        ));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(args("dconf gen --n 8")), EXIT_USAGE);
        assert_eq!(run(args("dconf solve --mesh /nonexistent/mesh.off")), EXIT_USAGE);
        assert_eq!(run(args("dconf frobnicate")), EXIT_USAGE);
        assert_eq!(exit_code(&Error::SingularBeyondGauge), EXIT_NUMERICAL);
    }
}
