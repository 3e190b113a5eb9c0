//! Damped Newton iteration on a residual with a user-supplied linear solve.

use crate::error::{Error, Result};
use crate::linalg::{norm2, norm_inf};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Armijo backtracking on ‖r‖ with factor 1/2.
    pub line_search: bool,
    pub max_halvings: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            abs_tol: 1e-14,
            rel_tol: 1e-8,
            max_iter: 50,
            line_search: false,
            max_halvings: 10,
        }
    }
}

pub trait NewtonProblem {
    fn residual(&mut self, x: &[f64]) -> Result<Vec<f64>>;
    /// δ with J(x) δ = r, plus the linear iteration count.
    fn solve_linearized(&mut self, x: &[f64], r: &[f64]) -> Result<(Vec<f64>, usize)>;
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub linear_iterations: usize,
}

/// Iterates x ← x − t δ until ‖r‖ ≤ max(abs_tol, rel_tol ‖r₀‖). A step whose
/// update is at roundoff level relative to x also counts as converged.
pub fn newton_loop(problem: &mut dyn NewtonProblem, x0: Vec<f64>, cfg: &NewtonConfig) -> Result<NewtonOutcome> {
    let mut x = x0;
    let mut r = problem.residual(&x)?;
    let mut rn = norm2(&r);
    let mut history = vec![rn];
    let tol = cfg.abs_tol.max(cfg.rel_tol * rn);
    let mut linear_iterations = 0;
    let mut it = 0;
    while rn > tol {
        if it >= cfg.max_iter || !rn.is_finite() {
            return Err(Error::NewtonStagnation {
                iterations: it,
                residual: rn,
                last_iterate: x,
            });
        }
        let (delta, lin) = problem.solve_linearized(&x, &r)?;
        linear_iterations += lin;
        it += 1;
        let mut t = 1.0;
        let mut halvings = 0;
        let (x_new, r_new, rn_new) = loop {
            let xt: Vec<f64> = x.iter().zip(&delta).map(|(xi, di)| xi - t * di).collect();
            let rt = problem.residual(&xt)?;
            let rtn = norm2(&rt);
            if !cfg.line_search || rtn <= (1.0 - 1e-4 * t) * rn {
                break (xt, rt, rtn);
            }
            halvings += 1;
            if halvings > cfg.max_halvings {
                return Err(Error::NewtonStagnation {
                    iterations: it,
                    residual: rn,
                    last_iterate: x,
                });
            }
            t *= 0.5;
        };
        let step = t * norm_inf(&delta);
        let roundoff = step <= 1e-13 * norm_inf(&x_new).max(1.0);
        x = x_new;
        r = r_new;
        rn = rn_new;
        history.push(rn);
        log::trace!("newton {it}: |r| = {rn:e} (t = {t})");
        if roundoff && rn.is_finite() {
            break;
        }
    }
    Ok(NewtonOutcome {
        x,
        iterations: it,
        residual_history: history,
        linear_iterations,
    })
}
