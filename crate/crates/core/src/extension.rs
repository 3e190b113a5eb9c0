//! Nonlinear extension of the boundary control to a domain displacement.

use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::fem::{compute_transform, constrain_homogeneous, extension_jacobian, extension_residual, FieldVector, TransformState};
use crate::linalg::SparseMatrix;
use crate::newton::{newton_loop, NewtonConfig, NewtonProblem};
use crate::solve::{solve_leveled, LinearSolverConfig};

/// Optimization variables (u, η) with the bounds and regularization weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlState {
    /// Obstacle trace control, one value per trace vertex.
    pub u: Vec<f64>,
    /// Nonlinearity coefficient, one value per finest-level vertex.
    pub eta: Vec<f64>,
    pub eta_lb: f64,
    pub eta_ub: f64,
    pub alpha: f64,
    pub theta: f64,
}

impl ControlState {
    pub fn new(disc: &Discretization, eta_init: f64, eta_lb: f64, eta_ub: f64, alpha: f64, theta: f64) -> Result<ControlState> {
        if !(eta_lb <= eta_ub) {
            return Err(Error::Config(format!("eta bounds [{eta_lb}, {eta_ub}] are empty")));
        }
        let mut c = ControlState {
            u: vec![0.0; disc.trace.len()],
            eta: vec![eta_init; disc.fine().p1.nv],
            eta_lb,
            eta_ub,
            alpha,
            theta,
        };
        project_eta(&mut c);
        Ok(c)
    }

    pub fn eta_mid(&self) -> f64 {
        0.5 * (self.eta_lb + self.eta_ub)
    }
}

/// Clamps η to its bounds.
pub fn project_eta(c: &mut ControlState) {
    let (lo, hi) = (c.eta_lb, c.eta_ub);
    c.eta.iter_mut().for_each(|e| *e = e.clamp(lo, hi));
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtensionConfig {
    pub newton: NewtonConfig,
    pub linear: LinearSolverConfig,
}

impl Default for ExtensionConfig {
    fn default() -> Self {
        ExtensionConfig {
            newton: NewtonConfig::default(),
            linear: LinearSolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionSolution {
    pub w: FieldVector,
    pub transform: TransformState,
    pub newton_iterations: usize,
    pub linear_iterations_total: usize,
}

/// Constrained extension Jacobian at `w` on `level`.
pub fn extension_matrix(disc: &Discretization, level: usize, w: &[f64], eta: &[f64]) -> (SparseMatrix, Vec<f64>) {
    let l = &disc.levels[level];
    let (mut a, r) = extension_jacobian(disc.mesh(level), &l.geom, w, eta, disc.ext_pattern(level));
    constrain_homogeneous(&mut a, &l.ext_fixed);
    (a, r)
}

/// Constrained extension Jacobians on every level, coarse to fine, from
/// injected finest-level fields.
pub fn extension_levels(disc: &Discretization, w: &[f64], eta: &[f64]) -> Vec<(SparseMatrix, Vec<bool>)> {
    (0..disc.levels.len())
        .map(|l| {
            let (a, _) = extension_matrix(disc, l, disc.inject_p1(w, l, 2), disc.inject_p1(eta, l, 1));
            (a, disc.levels[l].ext_fixed.clone())
        })
        .collect()
}

/// Solves A x = b (or Aᵀ x = b) with the extension structure at (w, η).
pub fn solve_extension_linear(
    disc: &Discretization,
    w: &[f64],
    eta: &[f64],
    b: &[f64],
    transpose: bool,
    cfg: &LinearSolverConfig,
) -> Result<(Vec<f64>, usize)> {
    let mut levels = if cfg.use_direct(b.len()) || disc.levels.len() == 1 {
        let top = disc.finest_index();
        let (a, _) = extension_matrix(disc, top, w, eta);
        vec![(a, disc.levels[top].ext_fixed.clone())]
    } else {
        extension_levels(disc, w, eta)
    };
    if transpose {
        levels.iter_mut().for_each(|(a, _)| *a = a.transpose());
    }
    solve_leveled(levels, disc.ext_transfers(), cfg, b)
}

struct ExtensionProblem<'a> {
    disc: &'a Discretization,
    eta: &'a [f64],
    load: Vec<f64>,
    linear: LinearSolverConfig,
}

impl NewtonProblem for ExtensionProblem<'_> {
    fn residual(&mut self, w: &[f64]) -> Result<Vec<f64>> {
        let top = self.disc.finest_index();
        let l = &self.disc.levels[top];
        let mut r = extension_residual(self.disc.mesh(top), &l.geom, w, self.eta);
        for (i, ri) in r.iter_mut().enumerate() {
            *ri = if l.ext_fixed[i] { 0.0 } else { *ri - self.load[i] };
        }
        Ok(r)
    }

    fn solve_linearized(&mut self, w: &[f64], r: &[f64]) -> Result<(Vec<f64>, usize)> {
        solve_extension_linear(self.disc, w, self.eta, r, false, &self.linear)
    }
}

/// Displacement w(u, η) on the finest level. `warm` is an initial guess.
pub fn solve_extension(
    disc: &Discretization,
    control: &ControlState,
    warm: Option<&FieldVector>,
    cfg: &ExtensionConfig,
) -> Result<ExtensionSolution> {
    let fine = disc.fine();
    if control.u.len() != disc.trace.len() || control.eta.len() != fine.p1.nv {
        return Err(Error::SpaceMismatch(format!(
            "control sizes (u {}, eta {}) do not match trace {} / vertices {}",
            control.u.len(),
            control.eta.len(),
            disc.trace.len(),
            fine.p1.nv
        )));
    }
    if control.u.iter().chain(&control.eta).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite control".into()));
    }
    let load = disc.b_gamma.mul_vec(&control.u);
    let mut w0 = match warm {
        Some(w) => {
            w.check(&fine.p1v)?;
            w.values.clone()
        }
        None => vec![0.0; fine.p1v.n_dofs],
    };
    for (wi, &f) in w0.iter_mut().zip(&fine.ext_fixed) {
        if f {
            *wi = 0.0;
        }
    }
    let mut prob = ExtensionProblem {
        disc,
        eta: &control.eta,
        load,
        linear: cfg.linear,
    };
    let out = newton_loop(&mut prob, w0, &cfg.newton)?;
    let w = FieldVector::new(&fine.p1v, out.x)?;
    let transform = compute_transform(disc.fine_mesh(), &fine.geom, &w)?;
    Ok(ExtensionSolution {
        w,
        transform,
        newton_iterations: out.iterations,
        linear_iterations_total: out.linear_iterations,
    })
}
