//! Choice between sparse LU and multigrid-preconditioned BiCGStab.

use crate::error::{Error, Result};
use crate::linalg::{bicgstab, DirectSolver, KrylovOptions, Multigrid, MultigridConfig, SparseMatrix, TransferOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearMethod {
    /// Direct below `direct_threshold` dofs, multigrid above.
    Auto,
    Direct,
    Multigrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolverConfig {
    pub method: LinearMethod,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
    pub direct_threshold: usize,
    pub multigrid: MultigridConfig,
}

impl LinearSolverConfig {
    pub fn use_direct(&self, n: usize) -> bool {
        match self.method {
            LinearMethod::Direct => true,
            LinearMethod::Multigrid => false,
            LinearMethod::Auto => n <= self.direct_threshold,
        }
    }

    pub fn krylov(&self) -> KrylovOptions {
        KrylovOptions {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_iter: self.max_iter,
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Config(format!("{name}: tolerances and max_iter must be positive")));
        }
        self.multigrid.validate()
    }
}

/// Solves with the finest matrix of `levels` (coarse to fine, constrained
/// rows flagged). Returns the solution and the Krylov iteration count
/// (0 for direct solves).
pub fn solve_leveled(
    levels: Vec<(SparseMatrix, Vec<bool>)>,
    transfers: &[TransferOperator],
    cfg: &LinearSolverConfig,
    b: &[f64],
) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    if levels.len() == 1 || cfg.use_direct(n) {
        let a = &levels.last().expect("nonempty").0;
        return Ok((DirectSolver::factor(a)?.solve(b)?, 0));
    }
    let nl = levels.len();
    let mg = Multigrid::new(levels, &transfers[..nl - 1], cfg.multigrid)?;
    let out = bicgstab(mg.finest_matrix(), b, &mg, &cfg.krylov())?;
    if !out.converged {
        log::warn!(
            "BiCGStab stopped after {} iterations at residual {:e}",
            out.iterations,
            out.residual_history.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok((out.x, out.iterations))
}

impl Default for LinearSolverConfig {
    fn default() -> Self {
        LinearSolverConfig {
            method: LinearMethod::Auto,
            rel_tol: 1e-3,
            abs_tol: 1e-12,
            max_iter: 500,
            direct_threshold: 50_000,
            multigrid: MultigridConfig::default(),
        }
    }
}
