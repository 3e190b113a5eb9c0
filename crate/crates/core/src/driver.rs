//! Run orchestration and artifact export.

use std::fmt::Write as _;
use std::path::{Component, Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adjoint::{compute_reduced_gradients, directional_derivative, fd_gradient_oracle};
use crate::config::{MeshSource, RunConfig};
use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::extension::ControlState;
use crate::mesh::{generate_reference_mesh, read_mesh, write_mesh, DomainSpec, GmshMarkerTable, GridHierarchy, MeshFormat, MeshLevel, Point};
use crate::objective::{MultiplierState, Problem};
use crate::optimizer::{outer_loop_observed, Iterate, OptimizationResult};
use crate::vtk::{export_vtk, PointField};

pub fn base_mesh(cfg: &RunConfig) -> Result<MeshLevel> {
    match &cfg.mesh {
        MeshSource::Fixture { elements } => generate_reference_mesh(&DomainSpec::square_obstacle(), *elements),
        MeshSource::File(p) => read_mesh(p, MeshFormat::from_path(p), &GmshMarkerTable::default()),
    }
}

pub fn build_discretization(cfg: &RunConfig, refinements: usize) -> Result<Discretization> {
    Ok(Discretization::new(GridHierarchy::with_refinements(base_mesh(cfg)?, refinements)))
}

pub fn problem<'d>(cfg: &RunConfig, disc: &'d Discretization) -> Problem<'d> {
    Problem::new(disc, cfg.objective_params(), cfg.inflow, cfg.solvers.clone())
}

pub fn initial_control(cfg: &RunConfig, disc: &Discretization) -> Result<ControlState> {
    ControlState::new(disc, cfg.eta_init, cfg.eta_lb, cfg.eta_ub, cfg.alpha, cfg.theta)
}

fn initial_multipliers(cfg: &RunConfig) -> MultiplierState {
    cfg.multipliers
}

/// `name` joined to `dir`, refusing anything that escapes it.
fn artifact(dir: &Path, name: &str) -> Result<PathBuf> {
    let rel = Path::new(name);
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return Err(Error::Config(format!("output file {name:?} must be a plain relative path")));
    }
    Ok(dir.join(rel))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Vertex fields w, v, p, η, λ_w of an iterate on the finest mesh.
pub fn iterate_fields(disc: &Discretization, it: &Iterate) -> Vec<PointField> {
    let l = disc.finest_index();
    let nv = disc.fine_mesh().num_vertices();
    let flow = &it.eval.forward.flow;
    let v = flow.velocity(disc, l);
    vec![
        PointField::vector("w", it.eval.forward.extension.w.values.clone()),
        PointField::vector("v", v[..2 * nv].to_vec()),
        PointField::scalar("p", flow.pressure(disc, l)),
        PointField::scalar("eta", it.control.eta.clone()),
        PointField::vector("lambda_w", it.eval.adjoint_displacement.lambda_w.values.clone()),
    ]
}

pub fn deformed_mesh(mesh: &MeshLevel, w: &[f64]) -> Result<MeshLevel> {
    let vertices = mesh.vertices.iter().enumerate().map(|(i, p)| [p[0] + w[2 * i], p[1] + w[2 * i + 1]]).collect();
    let boundary = mesh.boundary_edges.iter().map(|e| (e.vertices, e.marker)).collect();
    MeshLevel::new(vertices, mesh.triangles.clone(), boundary, mesh.level_index)
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub refinements: usize,
    pub elements: usize,
    pub j_aug: f64,
    pub j: f64,
    pub g_def: [f64; 3],
    pub min_det: f64,
    pub inverted: usize,
    pub steps: usize,
    pub outer_iterations: usize,
    pub converged: bool,
    pub newton_extension: usize,
    pub newton_flow: usize,
    pub failure: Option<String>,
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "refinements = {}", self.refinements).unwrap();
        writeln!(s, "elements = {}", self.elements).unwrap();
        writeln!(s, "J_aug = {:.17e}", self.j_aug).unwrap();
        writeln!(s, "j = {:.17e}", self.j).unwrap();
        writeln!(s, "g_def = {:.17e} {:.17e} {:.17e}", self.g_def[0], self.g_def[1], self.g_def[2]).unwrap();
        writeln!(s, "g_def_norm = {:.17e}", norm(&self.g_def)).unwrap();
        writeln!(s, "min_detDF = {:.17e}", self.min_det).unwrap();
        writeln!(s, "inverted_elements = {}", self.inverted).unwrap();
        writeln!(s, "steps = {}", self.steps).unwrap();
        writeln!(s, "outer_iterations = {}", self.outer_iterations).unwrap();
        writeln!(s, "converged = {}", self.converged).unwrap();
        writeln!(s, "newton_iterations_extension = {}", self.newton_extension).unwrap();
        writeln!(s, "newton_iterations_flow = {}", self.newton_flow).unwrap();
        writeln!(s, "failure = {}", self.failure.as_deref().unwrap_or("none")).unwrap();
        s
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub result: OptimizationResult,
    pub summary: RunSummary,
}

/// Runs the optimizer on `disc` and writes all artifacts under
/// `cfg.output_dir`.
pub fn run_on(cfg: &RunConfig, disc: &Discretization, refinements: usize) -> Result<RunOutput> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    let csv_path = artifact(&dir, &cfg.csv_name)?;
    create_dir(&dir)?;
    let problem = problem(cfg, disc);
    let control = initial_control(cfg, disc)?;
    let mut newton = (0usize, 0usize);
    let mut io_error: Option<Error> = None;
    let mut observer = |step: usize, it: &Iterate| {
        newton.0 += it.eval.forward.extension.newton_iterations;
        newton.1 += it.eval.forward.flow.newton_iterations;
        if cfg.vtk_every > 0 && step % cfg.vtk_every == 0 && io_error.is_none() {
            let path = dir.join(format!("step_{step:04}.vtk"));
            if let Err(e) = export_vtk(disc.fine_mesh(), &iterate_fields(disc, it), &path, false) {
                io_error = Some(e);
            }
        }
    };
    let result = outer_loop_observed(&problem, control, initial_multipliers(cfg), &cfg.optimizer, &mut observer)?;
    if let Some(e) = io_error {
        return Err(e);
    }
    write_file(&csv_path, &result.record.to_csv())?;
    let it = &result.iterate;
    let fields = iterate_fields(disc, it);
    let mesh = disc.fine_mesh();
    export_vtk(mesh, &fields, &dir.join("reference.vtk"), false)?;
    export_vtk(mesh, &fields, &dir.join("deformed.vtk"), true)?;
    let tr = it.eval.forward.transform();
    if tr.inverted_count() == 0 {
        write_mesh(&deformed_mesh(mesh, &tr.w.values)?, &dir.join("deformed.mesh"))?;
    }
    let summary = RunSummary {
        output_dir: dir.clone(),
        refinements,
        elements: mesh.num_triangles(),
        j_aug: it.eval.objective.total(),
        j: it.eval.objective.dissipation,
        g_def: it.eval.forward.g_def,
        min_det: tr.min_det(),
        inverted: tr.inverted_count(),
        steps: result.steps,
        outer_iterations: result.outer_iterations,
        converged: result.converged,
        newton_extension: newton.0,
        newton_flow: newton.1,
        failure: result.failure.clone(),
    };
    write_file(&dir.join("summary.txt"), &summary.to_text())?;
    Ok(RunOutput { result, summary })
}

pub fn run_optimization(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let disc = build_discretization(cfg, cfg.refinements)?;
    run_on(cfg, &disc, cfg.refinements)
}

/// Deformed obstacle boundary as a closed polyline.
pub fn obstacle_polyline(mesh: &MeshLevel, w: &[f64]) -> Vec<Point> {
    mesh.obstacle_loop().iter().map(|&v| [mesh.vertices[v][0] + w[2 * v], mesh.vertices[v][1] + w[2 * v + 1]]).collect()
}

fn point_segment(p: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let t = if l2 > 0.0 { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
    let q = [a[0] + t * d[0] - p[0], a[1] + t * d[1] - p[1]];
    (q[0] * q[0] + q[1] * q[1]).sqrt()
}

fn directed_hausdorff(a: &[Point], b: &[Point]) -> f64 {
    let n = b.len();
    a.iter()
        .map(|&p| (0..n).map(|i| point_segment(p, b[i], b[(i + 1) % n])).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance between closed polylines, vertex to segment.
pub fn hausdorff_distance(a: &[Point], b: &[Point]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { f64::INFINITY };
    }
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

#[derive(Debug, Clone)]
pub struct GridLevelResult {
    pub refinements: usize,
    pub summary: RunSummary,
    pub polyline: Vec<Point>,
    /// Obstacle edge length of this level's reference mesh.
    pub h: f64,
    /// Upstream (min x) and downstream (max x) tip abscissae.
    pub tips: (f64, f64),
    pub record: crate::optimizer::ConvergenceRecord,
    pub updates: Vec<crate::optimizer::OuterUpdate>,
}

#[derive(Debug, Clone)]
pub struct GridStudyReport {
    pub levels: Vec<GridLevelResult>,
    /// (i, j, distance) for every pair i < j.
    pub hausdorff: Vec<(usize, usize, f64)>,
    /// Obstacle edge length on the coarsest compared level.
    pub h_coarse: f64,
}

impl GridStudyReport {
    pub fn max_hausdorff(&self) -> f64 {
        self.hausdorff.iter().map(|h| h.2).fold(0.0, f64::max)
    }

    /// Largest spread of the front and back tip positions across levels.
    pub fn tip_spread(&self) -> (f64, f64) {
        let spread = |f: fn(&(f64, f64)) -> f64| {
            let v: Vec<f64> = self.levels.iter().map(|l| f(&l.tips)).collect();
            v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min)
        };
        (spread(|t| t.0), spread(|t| t.1))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "h_coarse = {:.17e}", self.h_coarse).unwrap();
        for (i, l) in self.levels.iter().enumerate() {
            writeln!(
                s,
                "run {i}: refinements {} elements {} steps {} J_aug {:.10e} g_def_norm {:.3e} min_detDF {:.6e} front_tip {:.10e} back_tip {:.10e}",
                l.refinements,
                l.summary.elements,
                l.summary.steps,
                l.summary.j_aug,
                norm(&l.summary.g_def),
                l.summary.min_det,
                l.tips.0,
                l.tips.1
            )
            .unwrap();
        }
        for &(i, j, d) in &self.hausdorff {
            writeln!(s, "hausdorff {i} {j} = {d:.17e}").unwrap();
        }
        let (f, b) = self.tip_spread();
        writeln!(s, "front_tip_spread = {f:.17e}").unwrap();
        writeln!(s, "back_tip_spread = {b:.17e}").unwrap();
        s
    }
}

/// Identical optimizations on each hierarchy depth in `levels`, compared by
/// their deformed obstacle boundaries.
pub fn run_grid_study(cfg: &RunConfig, levels: &[usize]) -> Result<GridStudyReport> {
    if levels.len() < 2 {
        return Err(Error::InvalidArgument(format!("grid study needs at least 2 levels, got {}", levels.len())));
    }
    cfg.validate()?;
    create_dir(&cfg.output_dir)?;
    let base = base_mesh(cfg)?;
    let mut out = Vec::new();
    for (i, &r) in levels.iter().enumerate() {
        let disc = Discretization::new(GridHierarchy::with_refinements(base.clone(), r));
        let mut sub = cfg.clone();
        sub.output_dir = cfg.output_dir.join(format!("run{i}_level{r}"));
        let run = run_on(&sub, &disc, r)?;
        let mesh = disc.fine_mesh();
        let w = &run.result.iterate.eval.forward.extension.w.values;
        let polyline = obstacle_polyline(mesh, w);
        let mut csv = String::from("x,y\n");
        for p in &polyline {
            writeln!(csv, "{:.17e},{:.17e}", p[0], p[1]).unwrap();
        }
        write_file(&cfg.output_dir.join(format!("obstacle_run{i}_level{r}.csv")), &csv)?;
        let xs = polyline.iter().map(|p| p[0]);
        let tips = (xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max));
        out.push(GridLevelResult {
            refinements: r,
            summary: run.summary,
            h: mesh.max_obstacle_edge_length(),
            polyline,
            tips,
            record: run.result.record,
            updates: run.result.updates,
        });
    }
    let mut hausdorff = Vec::new();
    for i in 0..out.len() {
        for j in i + 1..out.len() {
            hausdorff.push((i, j, hausdorff_distance(&out[i].polyline, &out[j].polyline)));
        }
    }
    let coarsest = levels.iter().enumerate().min_by_key(|x| x.1).map(|x| x.0).unwrap_or(0);
    let report = GridStudyReport {
        h_coarse: out[coarsest].h,
        levels: out,
        hausdorff,
    };
    write_file(&cfg.output_dir.join("grid_study.txt"), &report.to_text())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheckRow {
    /// "u" or "eta".
    pub block: &'static str,
    pub dof: usize,
    pub adjoint: f64,
    pub fd: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradientCheckReport {
    pub rows: Vec<GradientCheckRow>,
}

impl GradientCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_error).fold(0.0, f64::max)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("block,dof,adjoint,fd,rel_error\n");
        for r in &self.rows {
            writeln!(s, "{},{},{:.17e},{:.17e},{:.3e}", r.block, r.dof, r.adjoint, r.fd, r.rel_error).unwrap();
        }
        s
    }
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// Adjoint gradient against central differences on `n_dofs` random dofs,
/// alternating between u and η, at a seeded random control.
///
/// Dofs are drawn among entries at least 1e-3 of the block's largest
/// derivative; steps are 1e-5 in u and 1e-2 in η.
pub fn gradient_check(cfg: &RunConfig, disc: &Discretization, n_dofs: usize) -> Result<GradientCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let problem = problem(cfg, disc);
    let mut c = initial_control(cfg, disc)?;
    let (lb, ub) = (c.eta_lb, c.eta_ub);
    let margin = 0.2 * (ub - lb);
    c.u.iter_mut().for_each(|u| *u = rng.gen_range(-0.05..0.05));
    if ub - lb > 0.0 {
        c.eta.iter_mut().for_each(|e| *e = rng.gen_range(lb + margin..ub - margin));
    }
    let mult = cfg.multipliers;
    let ev = compute_reduced_gradients(&problem, &c, &mult, None)?;
    let pick = |dual: &[f64], rng: &mut ChaCha8Rng| {
        let big = dual.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let cand: Vec<usize> = (0..dual.len()).filter(|&i| dual[i].abs() >= 1e-3 * big && big > 0.0).collect();
        (!cand.is_empty()).then(|| cand[rng.gen_range(0..cand.len())])
    };
    let mut rows = Vec::new();
    for k in 0..n_dofs {
        let mut du = vec![0.0; c.u.len()];
        let mut de = vec![0.0; c.eta.len()];
        let (block, dof, h) = if k % 2 == 0 {
            let Some(i) = pick(&ev.gradient.dual_u, &mut rng) else { continue };
            du[i] = 1.0;
            ("u", i, 1e-5)
        } else {
            let Some(i) = pick(&ev.gradient.dual_eta, &mut rng) else { continue };
            de[i] = 1.0;
            ("eta", i, 1e-2)
        };
        let adjoint = directional_derivative(&ev.gradient, (&du, &de));
        let fd = fd_gradient_oracle(&problem, &c, &mult, (&du, &de), h, Some(&ev.forward))?;
        rows.push(GradientCheckRow {
            block,
            dof,
            adjoint,
            fd,
            rel_error: relative_error(adjoint, fd),
        });
    }
    Ok(GradientCheckReport { rows })
}

#[derive(Debug, Clone)]
pub struct MeshInfo {
    pub levels: Vec<(usize, usize, usize, f64)>,
    pub area: f64,
}

/// Per level: vertices, triangles, obstacle edges and max obstacle edge length.
pub fn mesh_info(cfg: &RunConfig, refinements: usize) -> Result<MeshInfo> {
    let h = GridHierarchy::with_refinements(base_mesh(cfg)?, refinements);
    let levels = h
        .levels
        .iter()
        .map(|m| (m.num_vertices(), m.num_triangles(), m.obstacle_loop().len(), m.max_obstacle_edge_length()))
        .collect();
    Ok(MeshInfo {
        levels,
        area: h.finest().fluid_area(),
    })
}
