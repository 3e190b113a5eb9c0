//! Stationary pulled-back Navier–Stokes state solve.

use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::fem::{constrain_homogeneous, ns_jacobian, ns_residual, FieldVector, NsParams, TransformState};
use crate::linalg::{norm2, DirectSolver, MultigridConfig, SmootherKind, SparseMatrix};
use crate::mesh::{Marker, MeshLevel, Point};
use crate::newton::{newton_loop, NewtonConfig, NewtonProblem};
use crate::solve::{solve_leveled, LinearSolverConfig};

/// v∞(x) = (s · max(0, cos(π |y − c| / δ)), 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InflowSpec {
    /// Tunnel diameter δ.
    pub delta: f64,
    pub scale: f64,
    /// Tunnel center line.
    pub center: f64,
}

impl Default for InflowSpec {
    fn default() -> Self {
        InflowSpec {
            delta: 6.0,
            scale: 1.0,
            center: 0.0,
        }
    }
}

impl InflowSpec {
    pub fn velocity(&self, p: Point) -> [f64; 2] {
        let c = (std::f64::consts::PI * (p[1] - self.center).abs() / self.delta).cos();
        [self.scale * c.max(0.0), 0.0]
    }

    /// ∫_{|y−c|<δ/2} v∞,x dy = 2 s δ / π.
    pub fn analytic_flux(&self) -> f64 {
        2.0 * self.scale * self.delta / std::f64::consts::PI
    }

    /// ∫_Γin v∞·n ds with n the outward normal, by composite quadrature.
    pub fn boundary_flux(&self, mesh: &MeshLevel, sub: usize) -> f64 {
        let mut s = 0.0;
        for e in mesh.boundary_edges_with(Marker::Inflow) {
            let n = mesh.outward_normal(e);
            let (a, b) = (mesh.vertices[e.vertices[0]], mesh.vertices[e.vertices[1]]);
            for k in 0..sub {
                let (t0, t1) = (k as f64 / sub as f64, (k + 1) as f64 / sub as f64);
                let pa = [a[0] + t0 * (b[0] - a[0]), a[1] + t0 * (b[1] - a[1])];
                let pb = [a[0] + t1 * (b[0] - a[0]), a[1] + t1 * (b[1] - a[1])];
                let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
                s += crate::fem::EDGE_G3
                    .iter()
                    .map(|&(t, w)| {
                        let v = self.velocity([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
                        w * (v[0] * n[0] + v[1] * n[1])
                    })
                    .sum::<f64>()
                    * len;
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSolverConfig {
    pub newton: NewtonConfig,
    /// Line search on when ν ≤ this value.
    pub line_search_below_nu: f64,
    /// A direct factorization is reused for the next Newton step while
    /// ‖r‖ contracts at least by this factor (0 disables).
    pub chord_contraction: f64,
    pub linear: LinearSolverConfig,
}

impl Default for FlowSolverConfig {
    fn default() -> Self {
        FlowSolverConfig {
            newton: NewtonConfig::default(),
            line_search_below_nu: 0.03,
            chord_contraction: 0.1,
            linear: LinearSolverConfig {
                direct_threshold: 250_000,
                multigrid: MultigridConfig {
                    smoother: SmootherKind::Ilu0,
                    ..MultigridConfig::default()
                },
                ..LinearSolverConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    /// Mixed velocity/pressure coefficients.
    pub state: FieldVector,
    pub converged: bool,
    pub newton_iterations: usize,
    pub linear_iterations_total: usize,
    pub residual_history: Vec<f64>,
}

impl FlowSolution {
    pub fn velocity(&self, disc: &Discretization, level: usize) -> Vec<f64> {
        self.state.values[..disc.levels[level].mixed.pressure_offset()].to_vec()
    }

    pub fn pressure(&self, disc: &Discretization, level: usize) -> Vec<f64> {
        self.state.values[disc.levels[level].mixed.pressure_offset()..].to_vec()
    }
}

/// Dirichlet values of the flow on `level`, zero off the inflow.
pub fn flow_dirichlet_values(disc: &Discretization, level: usize, inflow: &InflowSpec) -> Vec<f64> {
    let l = &disc.levels[level];
    let mut g = vec![0.0; l.mixed.n_dofs];
    for &(n, p) in &l.inflow_nodes {
        let v = inflow.velocity(p);
        g[2 * n] = v[0];
        g[2 * n + 1] = v[1];
    }
    g
}

/// Flow Jacobian at `x` on `level` with constrained rows and columns.
pub fn flow_jacobian(
    disc: &Discretization,
    level: usize,
    tr: &TransformState,
    x: &[f64],
    par: &NsParams,
) -> (SparseMatrix, Vec<f64>) {
    let l = &disc.levels[level];
    let (mut a, r) = ns_jacobian(disc.mesh(level), &l.geom, &l.mixed, tr, x, par, disc.flow_pattern(level));
    constrain_homogeneous(&mut a, &l.flow_fixed);
    (a, r)
}

/// Level hierarchy of constrained flow Jacobians built from injected
/// coefficients, coarse to fine. Coarse transforms are recomputed from the
/// injected displacement.
pub fn flow_jacobian_levels(
    disc: &Discretization,
    fine: (SparseMatrix, Vec<bool>),
    tr: &TransformState,
    x: &[f64],
    par: &NsParams,
) -> Result<Vec<(SparseMatrix, Vec<bool>)>> {
    let top = disc.finest_index();
    let mut out = vec![fine];
    let mut xl = x.to_vec();
    for l in (0..top).rev() {
        xl = disc.inject_mixed(&xl, l + 1);
        let mesh = disc.mesh(l);
        let w = disc.inject_p1(&tr.w.values, l, 2).to_vec();
        let trl = crate::fem::compute_transform(mesh, &disc.levels[l].geom, &FieldVector::new(&disc.levels[l].p1v, w)?)?;
        let (a, _) = flow_jacobian(disc, l, &trl, &xl, par);
        out.push((a, disc.levels[l].flow_fixed.clone()));
    }
    out.reverse();
    Ok(out)
}

struct FlowProblem<'a> {
    disc: &'a Discretization,
    tr: &'a TransformState,
    par: NsParams,
    linear: LinearSolverConfig,
    chord_contraction: f64,
    factor: Option<DirectSolver>,
    last_rn: f64,
}

impl NewtonProblem for FlowProblem<'_> {
    fn residual(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let top = self.disc.finest_index();
        let l = &self.disc.levels[top];
        let mut r = ns_residual(self.disc.mesh(top), &l.geom, &l.mixed, self.tr, x, &self.par);
        for (ri, &f) in r.iter_mut().zip(&l.flow_fixed) {
            if f {
                *ri = 0.0;
            }
        }
        Ok(r)
    }

    fn solve_linearized(&mut self, x: &[f64], r: &[f64]) -> Result<(Vec<f64>, usize)> {
        let top = self.disc.finest_index();
        let direct = self.linear.use_direct(r.len()) || top == 0;
        let rn = norm2(r);
        let contracted = rn <= self.chord_contraction * self.last_rn;
        self.last_rn = rn;
        if direct && contracted {
            if let Some(f) = &self.factor {
                return Ok((f.solve(r)?, 0));
            }
        }
        let (a, _) = flow_jacobian(self.disc, top, self.tr, x, &self.par);
        if direct {
            let f = DirectSolver::factor(&a)?;
            let d = f.solve(r)?;
            self.factor = Some(f);
            return Ok((d, 0));
        }
        let fixed = self.disc.levels[top].flow_fixed.clone();
        let levels = flow_jacobian_levels(self.disc, (a, fixed), self.tr, x, &self.par)?;
        solve_leveled(levels, self.disc.flow_transfers(), &self.linear, r)
    }
}

fn check_transform(tr: &TransformState) -> Result<()> {
    let m = tr.min_det();
    if !(m > 0.0) {
        return Err(Error::InvertedGeometry(m));
    }
    Ok(())
}

/// Newton solve on the finest level of `disc`, warm-started from
/// `initial_guess` when given.
pub fn solve_state(
    disc: &Discretization,
    tr: &TransformState,
    nu: f64,
    inflow: &InflowSpec,
    initial_guess: Option<&FlowSolution>,
    cfg: &FlowSolverConfig,
) -> Result<FlowSolution> {
    solve_state_with(disc, tr, NsParams::navier_stokes(nu), inflow, initial_guess, cfg)
}

/// [`solve_state`] with explicit form parameters (e.g. the Stokes hook).
pub fn solve_state_with(
    disc: &Discretization,
    tr: &TransformState,
    par: NsParams,
    inflow: &InflowSpec,
    initial_guess: Option<&FlowSolution>,
    cfg: &FlowSolverConfig,
) -> Result<FlowSolution> {
    if !(par.nu > 0.0) {
        return Err(Error::InvalidArgument(format!("viscosity must be positive, got {}", par.nu)));
    }
    check_transform(tr)?;
    let top = disc.finest_index();
    let l = &disc.levels[top];
    let g = flow_dirichlet_values(disc, top, inflow);
    let mut x0 = match initial_guess {
        Some(s) => {
            s.state.check(&l.mixed)?;
            s.state.values.clone()
        }
        None => vec![0.0; l.mixed.n_dofs],
    };
    for i in 0..x0.len() {
        if l.flow_fixed[i] {
            x0[i] = g[i];
        }
    }
    let mut newton = cfg.newton;
    newton.line_search = par.nu <= cfg.line_search_below_nu;
    let mut prob = FlowProblem {
        disc,
        tr,
        par,
        linear: cfg.linear,
        chord_contraction: cfg.chord_contraction,
        factor: None,
        last_rn: f64::INFINITY,
    };
    let out = newton_loop(&mut prob, x0, &newton)?;
    Ok(FlowSolution {
        state: FieldVector::new(&l.mixed, out.x)?,
        converged: true,
        newton_iterations: out.iterations,
        linear_iterations_total: out.linear_iterations,
        residual_history: out.residual_history,
    })
}

/// ∫_Γ v·n ds over edges with `marker` for a quadratic velocity field.
pub fn boundary_flux(disc: &Discretization, level: usize, x: &[f64], marker: Marker) -> f64 {
    let mesh = disc.mesh(level);
    let nv = mesh.num_vertices();
    let mut s = 0.0;
    for e in mesh.boundary_edges_with(marker) {
        let n = mesh.outward_normal(e);
        let (a, b, m) = (e.vertices[0], e.vertices[1], nv + e.edge);
        let val = |node: usize| x[2 * node] * n[0] + x[2 * node + 1] * n[1];
        let (fa, fb, fm) = (val(a), val(b), val(m));
        // Simpson is exact for the quadratic trace
        s += mesh.edge_length(e) * (fa + 4.0 * fm + fb) / 6.0;
    }
    s
}
