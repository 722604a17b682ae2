//! Convergence sweeps on the hemisphere against the exact stereographic map.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::bounds::quality_report;
use crate::error::{Error, Result};
use crate::harmonic::{build_source_near, invert_exterior, solve_weak_lb};
use crate::laplacian::{assemble_laplacian, conformal_energy, Parameterization, RhoMode};
use crate::mesh::{gen_hemisphere, HemisphereMesh, HemisphereSpec, Vec3, VertexMap};
use crate::minimizer::{minimize, normalize_map, prepare_initial_map, relative_error, MinimizerOptions, SolveReport};

pub const DEFAULT_NS: [usize; 7] = [8, 12, 16, 24, 32, 48, 64];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub m: usize,
    pub h_v: f64,
    pub max_d_over_sin: f64,
    pub ec_h: f64,
    pub ec_star: f64,
    pub rel_error: f64,
    pub iterations: usize,
    pub folds: usize,
    pub converged: bool,
    pub wall_time: f64,
}

impl ConvergenceRow {
    /// Whether the row enters the exponent fit.
    pub fn usable(&self) -> bool {
        self.converged && self.folds == 0 && self.rel_error > 0.0 && self.rel_error.is_finite()
    }
}

/// Output of one hemisphere solve.
#[derive(Debug, Clone)]
pub struct CaseResult {
    pub hemisphere: HemisphereMesh,
    pub report: SolveReport,
    pub normalized: VertexMap,
    pub row: ConvergenceRow,
}

/// Harmonic initial map on a hemisphere mesh, ready for the minimiser.
pub fn harmonic_initial_map(h: &HemisphereMesh, rho: RhoMode) -> Result<VertexMap> {
    let param = Parameterization {
        surface: &h.surface(),
        patches: &h.patches,
    };
    let lap = assemble_laplacian(&h.mesh, rho, Some(param))?;
    let source = build_source_near(&h.mesh, &Vec3::new(0.0, 0.0, -1.0))?;
    let sol = solve_weak_lb(&h.mesh, &lap, &source, HemisphereMesh::POLE)?;
    let inside = invert_exterior(&h.mesh, &sol.values, source.face)?;
    prepare_initial_map(&h.mesh, &inside)
}

/// Generates, initialises, minimises and compares one hemisphere case.
pub fn run_case(spec: &HemisphereSpec, rho: RhoMode, opts: &MinimizerOptions) -> Result<CaseResult> {
    let start = Instant::now();
    let h = gen_hemisphere(spec)?;
    let surface = h.surface();
    let param = Parameterization {
        surface: &surface,
        patches: &h.patches,
    };
    let lap = assemble_laplacian(&h.mesh, rho, Some(param))?;
    let init = harmonic_initial_map(&h, rho)?;
    let report = minimize(&h.mesh, &lap, &init, opts)?;
    let exact = h.exact_map();
    let normalized = normalize_map(&report.map, &exact)?;
    let quality = quality_report(&h.mesh, None)?;
    let row = ConvergenceRow {
        n: spec.n,
        m: spec.m,
        h_v: h.mesh.max_edge_length(),
        max_d_over_sin: quality.max_ratio_dsin,
        ec_h: report.final_energy().conformal,
        ec_star: conformal_energy(&h.mesh, &lap, &exact)?.conformal,
        rel_error: relative_error(&normalized, &exact)?,
        iterations: report.iterations,
        folds: report.folds,
        converged: report.converged,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok(CaseResult {
        hemisphere: h,
        report,
        normalized,
        row,
    })
}

fn failed_row(spec: &HemisphereSpec) -> ConvergenceRow {
    let (h_v, max_d_over_sin) = gen_hemisphere(spec)
        .ok()
        .and_then(|h| {
            let q = quality_report(&h.mesh, None).ok()?;
            Some((h.mesh.max_edge_length(), q.max_ratio_dsin))
        })
        .unwrap_or((f64::NAN, f64::NAN));
    ConvergenceRow {
        n: spec.n,
        m: spec.m,
        h_v,
        max_d_over_sin,
        ec_h: f64::NAN,
        ec_star: f64::NAN,
        rel_error: f64::NAN,
        iterations: 0,
        folds: 0,
        converged: false,
        wall_time: 0.0,
    }
}

/// Runs the hemisphere family `m = floor(n^r)` over `ns` in parallel on the current rayon pool.
///
/// A case whose solve fails is recorded with `converged = false` and non-finite energies.
pub fn run_sweep(r: f64, ns: &[usize], opts: &MinimizerOptions, rho: RhoMode) -> Result<Vec<ConvergenceRow>> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "exponent r must lie in (0, 1], got {r}"
        )));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("n values must be strictly increasing".into()));
    }
    if let Some(&n) = ns.iter().find(|&&n| n < 4) {
        return Err(Error::InvalidParameter(format!("n must be at least 4, got {n}")));
    }
    opts.validate()?;
    let specs = ns
        .iter()
        .map(|&n| HemisphereSpec::from_exponent(n, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(specs
        .par_iter()
        .map(|spec| run_case(spec, rho, opts).map_or_else(|_| failed_row(spec), |c| c.row))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub exponent: f64,
    pub coefficient: f64,
    /// Root-mean-square residual in `log(eps)`.
    pub residual: f64,
    pub rows_used: usize,
}

/// Least-squares fit of `eps = coefficient * h^exponent` on logarithms.
pub fn fit_power_law(h: &[f64], eps: &[f64]) -> Result<FitResult> {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(eps)
        .filter(|(h, e)| **h > 0.0 && **e > 0.0 && h.is_finite() && e.is_finite())
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} usable points, at least 3 needed",
            pts.len()
        )));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("all mesh sizes coincide".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(FitResult {
        exponent: slope,
        coefficient: intercept.exp(),
        residual: (ss / k).sqrt(),
        rows_used: pts.len(),
    })
}

/// Fits the error exponent on usable rows with `h_v` inside the optional window.
pub fn fit_exponent(rows: &[ConvergenceRow], window: Option<(f64, f64)>) -> Result<FitResult> {
    let (lo, hi) = window.unwrap_or((0.0, f64::INFINITY));
    let used: Vec<&ConvergenceRow> = rows
        .iter()
        .filter(|r| r.usable() && r.h_v >= lo && r.h_v <= hi)
        .collect();
    let h: Vec<f64> = used.iter().map(|r| r.h_v).collect();
    let e: Vec<f64> = used.iter().map(|r| r.rel_error).collect();
    fit_power_law(&h, &e)
}

pub const CONVERGENCE_HEADER: [&str; 10] = [
    "n",
    "m",
    "h_v",
    "max_d_over_sin",
    "ec_h",
    "ec_star",
    "rel_error",
    "iterations",
    "folds",
    "converged",
];

fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

/// Writes the sweep table; wall times are excluded so the output is reproducible.
pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CONVERGENCE_HEADER)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.m.to_string(),
            fmt(r.h_v),
            fmt(r.max_d_over_sin),
            fmt(r.ec_h),
            fmt(r.ec_star),
            fmt(r.rel_error),
            r.iterations.to_string(),
            r.folds.to_string(),
            r.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Whitespace-separated blocks, one per series, each holding `h value` pairs.
pub fn write_plot_data<W: Write>(rows: &[ConvergenceRow], fit: Option<&FitResult>, mut out: W) -> Result<()> {
    type Getter = fn(&ConvergenceRow) -> f64;
    let series: [(&str, Getter); 4] = [
        ("rel_error", |r| r.rel_error),
        ("ec_h", |r| r.ec_h),
        ("ec_star", |r| r.ec_star),
        ("max_d_over_sin", |r| r.max_d_over_sin),
    ];
    for (i, (name, get)) in series.iter().enumerate() {
        if i > 0 {
            writeln!(out, "\n")?;
        }
        writeln!(out, "# {name}: h_v {name}")?;
        for r in rows {
            writeln!(out, "{} {}", fmt(r.h_v), fmt(get(r)))?;
        }
    }
    if let Some(f) = fit {
        writeln!(out, "\n")?;
        writeln!(out, "# fit: h_v coefficient*h_v^exponent")?;
        for r in rows.iter().filter(|r| r.h_v.is_finite()) {
            writeln!(out, "{} {}", fmt(r.h_v), fmt(f.coefficient * r.h_v.powf(f.exponent)))?;
        }
    }
    Ok(())
}

pub fn write_fit_csv<W: Write>(fit: Option<&FitResult>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["exponent", "coefficient", "residual", "rows_used"])?;
    if let Some(f) = fit {
        w.write_record([
            fmt(f.exponent),
            fmt(f.coefficient),
            fmt(f.residual),
            f.rows_used.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timing_csv<W: Write>(rows: &[ConvergenceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "m", "wall_time_s"])?;
    for r in rows {
        w.write_record([r.n.to_string(), r.m.to_string(), format!("{:.6}", r.wall_time)])?;
    }
    w.flush()?;
    Ok(())
}

/// Paths written by [`emit_report`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub convergence: PathBuf,
    pub plot_data: PathBuf,
    pub fit: PathBuf,
    pub timing: PathBuf,
}

/// Writes `convergence.csv`, `plot_data.dat`, `fit.csv` and `timing.csv` under `dir`.
pub fn emit_report(rows: &[ConvergenceRow], fit: Option<&FitResult>, dir: &Path) -> Result<ReportFiles> {
    std::fs::create_dir_all(dir)?;
    let files = ReportFiles {
        convergence: dir.join("convergence.csv"),
        plot_data: dir.join("plot_data.dat"),
        fit: dir.join("fit.csv"),
        timing: dir.join("timing.csv"),
    };
    let create = |p: &Path| std::fs::File::create(p).map(std::io::BufWriter::new);
    write_convergence_csv(rows, create(&files.convergence)?)?;
    let mut plot = create(&files.plot_data)?;
    write_plot_data(rows, fit, &mut plot)?;
    plot.flush()?;
    write_fit_csv(fit, create(&files.fit)?)?;
    write_timing_csv(rows, create(&files.timing)?)?;
    Ok(files)
}

/// Directory name encoding the sweep parameters.
pub fn run_dir_name(r: f64, ns: &[usize], rho: RhoMode) -> String {
    let ns: Vec<String> = ns.iter().map(usize::to_string).collect();
    let rho = rho.to_string().replace(':', "");
    format!("sweep_r{r:.6}_{rho}_n{}", ns.join("-"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn row(n: usize, h: f64, e: f64) -> ConvergenceRow {
        ConvergenceRow {
            n,
            m: 3,
            h_v: h,
            max_d_over_sin: 1.0,
            ec_h: -0.1,
            ec_star: -0.1,
            rel_error: e,
            iterations: 1,
            folds: 0,
            converged: true,
            wall_time: 0.5,
        }
    }

    #[test]
    fn exact_power_law() {
        let rows: Vec<_> = [0.4, 0.2, 0.1, 0.05]
            .iter()
            .enumerate()
            .map(|(i, &h)| row(i, h, 2.0 * h.powf(1.5)))
            .collect();
        let f = fit_exponent(&rows, None).unwrap();
        assert!((f.exponent - 1.5).abs() < 1e-10);
        assert!((f.coefficient - 2.0).abs() < 1e-9);
        assert_eq!(f.rows_used, 4);
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h: Vec<f64> = (0..12).map(|k| 0.5 * 0.8f64.powi(k)).collect();
        let e: Vec<f64> = h
            .iter()
            .map(|h| 0.7 * h.powf(1.2) * (1.0 + rng.random_range(-0.01..0.01)))
            .collect();
        let f = fit_power_law(&h, &e).unwrap();
        assert!((f.exponent - 1.2).abs() < 0.05, "{f:?}");
    }

    #[test]
    fn fit_needs_three_usable_rows() {
        let mut rows = vec![row(8, 0.4, 0.1), row(16, 0.2, 0.05), row(32, 0.1, 0.02)];
        rows[1].folds = 2;
        assert!(matches!(fit_exponent(&rows, None), Err(Error::InsufficientData(_))));
        rows[1].folds = 0;
        assert!(fit_exponent(&rows, Some((0.15, 1.0))).is_err());
        assert!(fit_exponent(&rows, None).is_ok());
    }

    #[test]
    fn report_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&[], None, dir.path()).unwrap();
        let text = std::fs::read_to_string(&files.convergence).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(text.trim(), CONVERGENCE_HEADER.join(","));

        let rows: Vec<_> = (0..4)
            .map(|i| row(8 << i, 0.4 / (1 << i) as f64, 0.1 / (1 << i) as f64))
            .collect();
        let fit = fit_exponent(&rows, None).unwrap();
        let files = emit_report(&rows, Some(&fit), dir.path()).unwrap();
        assert_eq!(std::fs::read_to_string(&files.convergence).unwrap().lines().count(), 5);
        assert!(!std::fs::read_to_string(&files.convergence).unwrap().contains("0.5"));
        assert!(std::fs::read_to_string(&files.timing).unwrap().contains("0.500000"));
        let first = std::fs::read(&files.plot_data).unwrap();
        emit_report(&rows, Some(&fit), dir.path()).unwrap();
        assert_eq!(first, std::fs::read(&files.plot_data).unwrap());
    }

    #[test]
    fn sweep_validates_input() {
        let o = MinimizerOptions::default();
        assert!(run_sweep(11.0 / 12.0, &[16, 8], &o, RhoMode::Unit).is_err());
        assert!(run_sweep(11.0 / 12.0, &[2, 8], &o, RhoMode::Unit).is_err());
        assert!(run_sweep(1.5, &[8], &o, RhoMode::Unit).is_err());
    }

    #[test]
    fn small_sweep_dominates_reference() {
        let rows = run_sweep(
            11.0 / 12.0,
            &[8, 12],
            &MinimizerOptions::default(),
            RhoMode::Quadrature(3),
        )
        .unwrap();
        assert_eq!(rows[0].m, 6);
        for r in &rows {
            assert!(r.converged && r.folds == 0, "{r:?}");
            assert!(r.ec_h <= r.ec_star + 1e-10, "{r:?}");
        }
        assert!(rows[1].rel_error < rows[0].rel_error);
    }

    #[test]
    fn dir_name() {
        assert_eq!(
            run_dir_name(0.25, &[8, 16], RhoMode::Quadrature(3)),
            "sweep_r0.250000_quadrature3_n8-16"
        );
    }
}
