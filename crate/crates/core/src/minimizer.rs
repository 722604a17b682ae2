//! Minimisation of the conformal energy over maps whose boundary lies on the unit circle.

use std::collections::VecDeque;
use std::io::Write;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::laplacian::{
    area_bilinear, conformal_energy, count_folds, energy_gradient, CotanLaplacian, EnergyBreakdown,
};
use crate::mesh::{TriMesh, Vec2, VertexMap};

/// How boundary vertices are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryMode {
    /// Boundary vertices slide on the unit circle, parameterised by angle.
    #[default]
    Angle,
    /// Boundary vertices keep their initial positions.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizerOptions {
    pub max_iterations: usize,
    /// Stop once the Euclidean norm of the reduced gradient falls below this.
    pub gradient_tolerance: f64,
    /// Stop once an accepted step lowers `E_C` by less than this fraction of `E_D`.
    pub relative_tolerance: f64,
    /// Step shrink factor in the backtracking line search.
    pub backtrack: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Length of the first trial step along the normalised steepest-descent direction.
    pub initial_step: f64,
    /// Number of curvature pairs kept; 0 gives plain gradient descent.
    pub memory: usize,
    pub max_backtracks: usize,
    pub boundary: BoundaryMode,
}

impl Default for MinimizerOptions {
    fn default() -> Self {
        Self {
            max_iterations: 20_000,
            gradient_tolerance: 1e-9,
            relative_tolerance: 1e-15,
            backtrack: 0.5,
            armijo: 1e-4,
            initial_step: 0.1,
            memory: 10,
            max_backtracks: 50,
            boundary: BoundaryMode::Angle,
        }
    }
}

impl MinimizerOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.gradient_tolerance > 0.0) {
            return bad("gradient tolerance must be positive");
        }
        if !(self.relative_tolerance >= 0.0) {
            return bad("relative tolerance must be non-negative");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtracking factor must lie in (0, 1)");
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return bad("Armijo constant must lie in (0, 1)");
        }
        if !(self.initial_step > 0.0) {
            return bad("initial step must be positive");
        }
        if self.max_backtracks == 0 {
            return bad("at least one backtracking step is required");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    RelativeReduction,
    MaxIterations,
    /// The line search could not find a non-increasing step.
    LineSearchStall,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(self, Self::GradientTolerance | Self::RelativeReduction)
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy: EnergyBreakdown,
    pub grad_norm: f64,
    pub folds: usize,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub map: VertexMap,
    pub trace: Vec<IterationRecord>,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub folds: usize,
}

impl SolveReport {
    pub fn final_energy(&self) -> EnergyBreakdown {
        self.trace.last().expect("trace holds the initial iterate").energy
    }

    /// Trace as CSV: `iteration,dirichlet,area,conformal,grad_norm,folds`.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "dirichlet", "area", "conformal", "grad_norm", "folds"])?;
        for r in &self.trace {
            w.write_record([
                r.iteration.to_string(),
                format!("{:.17e}", r.energy.dirichlet),
                format!("{:.17e}", r.energy.area),
                format!("{:.17e}", r.energy.conformal),
                format!("{:.17e}", r.grad_norm),
                r.folds.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Free(usize),
    Angle(usize),
    Fixed,
}

struct Layout {
    slots: Vec<Slot>,
    len: usize,
}

impl Layout {
    fn new(mesh: &TriMesh, mode: BoundaryMode) -> Self {
        let mut len = 0;
        let slots = (0..mesh.vertex_count())
            .map(|i| {
                let s = match (mesh.is_boundary_vertex(i), mode) {
                    (false, _) => Slot::Free(len),
                    (true, BoundaryMode::Angle) => Slot::Angle(len),
                    (true, BoundaryMode::Fixed) => return Slot::Fixed,
                };
                len += if matches!(s, Slot::Free(_)) { 2 } else { 1 };
                s
            })
            .collect();
        Self { slots, len }
    }

    fn pack(&self, f: &[Vec2]) -> Vec<f64> {
        let mut x = vec![0.0; self.len];
        for (i, s) in self.slots.iter().enumerate() {
            match *s {
                Slot::Free(o) => {
                    x[o] = f[i].x;
                    x[o + 1] = f[i].y;
                }
                Slot::Angle(o) => x[o] = f[i].y.atan2(f[i].x),
                Slot::Fixed => {}
            }
        }
        x
    }

    fn unpack(&self, x: &[f64], base: &[Vec2]) -> VertexMap {
        self.slots
            .iter()
            .enumerate()
            .map(|(i, s)| match *s {
                Slot::Free(o) => Vec2::new(x[o], x[o + 1]),
                Slot::Angle(o) => {
                    let (s, c) = x[o].sin_cos();
                    Vec2::new(c, s)
                }
                Slot::Fixed => base[i],
            })
            .collect()
    }

    fn reduce(&self, g: &[Vec2], x: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.len];
        for (i, s) in self.slots.iter().enumerate() {
            match *s {
                Slot::Free(o) => {
                    r[o] = g[i].x;
                    r[o + 1] = g[i].y;
                }
                Slot::Angle(o) => {
                    let (s, c) = x[o].sin_cos();
                    r[o] = g[i].dot(&Vec2::new(-s, c));
                }
                Slot::Fixed => {}
            }
        }
        r
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Centres, orients and scales a map so its boundary sits near the unit circle, then projects the
/// boundary radially onto the circle.
pub fn prepare_initial_map(mesh: &TriMesh, f: &[Vec2]) -> Result<VertexMap> {
    let boundary = mesh.boundary_vertices();
    if boundary.is_empty() {
        return Err(Error::InvalidTopology("mesh has no boundary".into()));
    }
    let centre = boundary.iter().map(|&b| f[b]).sum::<Vec2>() / boundary.len() as f64;
    let mut g: VertexMap = f.iter().map(|p| p - centre).collect();
    if mesh.signed_image_area(&g) < 0.0 {
        g.iter_mut().for_each(|p| p.y = -p.y);
    }
    let radius = boundary.iter().map(|&b| g[b].norm()).sum::<f64>() / boundary.len() as f64;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter("initial boundary collapses to a point".into()));
    }
    g.iter_mut().for_each(|p| *p /= radius);
    for &b in &boundary {
        let r = g[b].norm();
        if r > 0.0 {
            g[b] /= r;
        } else {
            g[b] = Vec2::x();
        }
    }
    Ok(g)
}

/// Minimises `E_C` from `init` by limited-memory quasi-Newton steps with backtracking.
///
/// Boundary vertices of `init` must be within 0.1 of the unit circle; they are projected onto it.
pub fn minimize(mesh: &TriMesh, lap: &CotanLaplacian, init: &[Vec2], opts: &MinimizerOptions) -> Result<SolveReport> {
    opts.validate()?;
    if init.len() != mesh.vertex_count() || lap.size() != mesh.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: mesh.vertex_count(),
            found: init.len(),
        });
    }
    let mut start = init.to_vec();
    if opts.boundary == BoundaryMode::Angle {
        for b in mesh.boundary_vertices() {
            let r = start[b].norm();
            if (r - 1.0).abs() > 0.1 {
                return Err(Error::InvalidParameter(format!(
                    "boundary vertex {b} is at radius {r}, not within 0.1 of the unit circle"
                )));
            }
            start[b] /= r;
        }
    }

    let layout = Layout::new(mesh, opts.boundary);
    let mut x = layout.pack(&start);
    let mut f = layout.unpack(&x, &start);
    let mut energy = conformal_energy(mesh, lap, &f)?;
    let mut g = layout.reduce(&energy_gradient(mesh, lap, &f)?, &x);
    let mut gnorm = dot(&g, &g).sqrt();
    let mut trace = vec![IterationRecord {
        iteration: 0,
        energy,
        grad_norm: gnorm,
        folds: count_folds(mesh, &f),
    }];

    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut plain_step = opts.initial_step / gnorm.max(f64::MIN_POSITIVE);
    let mut iteration = 0;
    let termination = loop {
        if gnorm <= opts.gradient_tolerance {
            break Termination::GradientTolerance;
        }
        if iteration >= opts.max_iterations {
            break Termination::MaxIterations;
        }
        if layout.len == 0 {
            break Termination::GradientTolerance;
        }

        let mut attempt = 0;
        let accepted = loop {
            let curvature = !pairs.is_empty();
            let mut d = if curvature {
                two_loop(&g, &pairs)
            } else {
                g.iter().map(|v| -v).collect()
            };
            let mut slope = dot(&g, &d);
            if !(slope < 0.0) {
                pairs.clear();
                d = g.iter().map(|v| -v).collect();
                slope = -gnorm * gnorm;
            }
            let mut alpha = if curvature { 1.0 } else { plain_step };
            let mut found = None;
            for _ in 0..opts.max_backtracks {
                let xt: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
                let ft = layout.unpack(&xt, &start);
                let delta = energy_change(mesh, lap, &f, &ft);
                let et = conformal_energy(mesh, lap, &ft)?;
                if delta <= opts.armijo * alpha * slope && et.conformal <= energy.conformal {
                    found = Some((xt, ft, et, delta, alpha));
                    break;
                }
                alpha *= opts.backtrack;
            }
            match found {
                Some(step) => break Some(step),
                None if curvature && attempt == 0 => {
                    pairs.clear();
                    attempt += 1;
                }
                None => break None,
            }
        };

        let Some((xt, ft, et, delta, alpha)) = accepted else {
            break Termination::LineSearchStall;
        };
        let gt = layout.reduce(&energy_gradient(mesh, lap, &ft)?, &xt);
        if opts.memory > 0 {
            let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
                if pairs.len() == opts.memory {
                    pairs.pop_front();
                }
                pairs.push_back((s, y, 1.0 / sy));
            }
        } else {
            plain_step = alpha / opts.backtrack;
        }

        iteration += 1;
        x = xt;
        f = ft;
        energy = et;
        g = gt;
        gnorm = dot(&g, &g).sqrt();
        trace.push(IterationRecord {
            iteration,
            energy,
            grad_norm: gnorm,
            folds: count_folds(mesh, &f),
        });
        if -delta <= opts.relative_tolerance * energy.dirichlet.abs().max(f64::MIN_POSITIVE) {
            break if gnorm <= opts.gradient_tolerance {
                Termination::GradientTolerance
            } else {
                Termination::RelativeReduction
            };
        }
    };

    let folds = count_folds(mesh, &f);
    Ok(SolveReport {
        map: f,
        trace,
        iterations: iteration,
        converged: termination.converged(),
        termination,
        folds,
    })
}

/// `E_C(ft) - E_C(f)` evaluated as a bilinear form in `ft + f` and `ft - f`, which avoids the
/// cancellation of subtracting two nearly equal energies.
fn energy_change(mesh: &TriMesh, lap: &CotanLaplacian, f: &[Vec2], ft: &[Vec2]) -> f64 {
    let sum: Vec<Vec2> = ft.iter().zip(f).map(|(a, b)| a + b).collect();
    let diff: Vec<Vec2> = ft.iter().zip(f).map(|(a, b)| a - b).collect();
    lap.dirichlet_bilinear(&sum, &diff) - area_bilinear(mesh, &sum, &diff)
}

fn two_loop(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    let (s, y, _) = pairs.back().expect("non-empty");
    let gamma = dot(s, y) / dot(y, y);
    q.iter_mut().for_each(|v| *v *= gamma);
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Applies the orthogonal transform (rotation or reflection about the origin) that best aligns
/// `f` with `reference` in the least-squares sense.
pub fn normalize_map(f: &[Vec2], reference: &[Vec2]) -> Result<VertexMap> {
    if f.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            found: f.len(),
        });
    }
    let h: Matrix2<f64> = f.iter().zip(reference).map(|(a, b)| a * b.transpose()).sum();
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let q = vt.transpose() * u.transpose();
    Ok(f.iter().map(|p| q * p).collect())
}

/// `|f - f*|_F / |f*|_F` over the vertices.
pub fn relative_error(f: &[Vec2], f_star: &[Vec2]) -> Result<f64> {
    if f.len() != f_star.len() {
        return Err(Error::DimensionMismatch {
            expected: f_star.len(),
            found: f.len(),
        });
    }
    let den: f64 = f_star.iter().map(|p| p.norm_squared()).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    let num: f64 = f
        .iter()
        .zip(f_star)
        .map(|(a, b)| (a - b).norm_squared())
        .sum::<f64>()
        .sqrt();
    Ok(num / den)
}
