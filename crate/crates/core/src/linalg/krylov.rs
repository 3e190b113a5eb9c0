use super::sparse::{dot, norm2, SparseMatrix};
use crate::error::{Error, Result};

/// Approximate inverse applied inside Krylov iterations.
pub trait Preconditioner {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        Ok(r.to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            rel_tol: 1e-3,
            abs_tol: 1e-12,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KrylovOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// ‖b − Ax‖ after every iteration, starting with the initial residual.
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

/// Right-preconditioned BiCGStab from a zero initial guess.
///
/// Stops once ‖b − Ax‖ ≤ max(rel_tol‖b‖, abs_tol). A breakdown restarts the
/// iteration once from the current iterate; a second breakdown is an error.
/// Hitting `max_iter` is reported through `converged = false`.
pub fn bicgstab(
    a: &SparseMatrix,
    b: &[f64],
    precond: &dyn Preconditioner,
    opts: &KrylovOptions,
) -> Result<KrylovOutcome> {
    let n = b.len();
    assert_eq!(a.nrows, n);
    let mut x = vec![0.0; n];
    let bn = norm2(b);
    let tol = (opts.rel_tol * bn).max(opts.abs_tol);
    let mut r = b.to_vec();
    let mut history = vec![bn];
    if bn <= tol {
        return Ok(KrylovOutcome {
            x,
            iterations: 0,
            residual_history: history,
            converged: true,
        });
    }
    let r0n = bn;
    let mut restarted = false;
    let mut r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut it = 0;
    while it < opts.max_iter {
        let rho_new = dot(&r_hat, &r);
        let breakdown = rho_new.abs() <= 1e-300_f64.max(1e-30 * norm2(&r_hat) * norm2(&r)) || omega == 0.0;
        if breakdown {
            if restarted {
                return Err(Error::Breakdown { iterations: it });
            }
            restarted = true;
            r = b.to_vec();
            let ax = a.mul_vec(&x);
            r.iter_mut().zip(&ax).for_each(|(ri, ai)| *ri -= ai);
            r_hat = r.clone();
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
            continue;
        }
        it += 1;
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat = precond.apply(&p)?;
        a.mul_vec_into(&p_hat, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 || !rv.is_finite() {
            if restarted {
                return Err(Error::Breakdown { iterations: it });
            }
            restarted = true;
            r_hat = r.clone();
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
            continue;
        }
        alpha = rho / rv;
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        let sn = norm2(&s);
        if sn <= tol {
            x.iter_mut().zip(&p_hat).for_each(|(xi, pi)| *xi += alpha * pi);
            history.push(sn);
            return Ok(KrylovOutcome {
                x,
                iterations: it,
                residual_history: history,
                converged: true,
            });
        }
        let s_hat = precond.apply(&s)?;
        a.mul_vec_into(&s_hat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        let rn = norm2(&r);
        history.push(rn);
        if !rn.is_finite() || rn > 1e10 * r0n {
            return Err(Error::Diverged {
                iterations: it,
                residual: rn,
                history,
            });
        }
        if rn <= tol {
            return Ok(KrylovOutcome {
                x,
                iterations: it,
                residual_history: history,
                converged: true,
            });
        }
    }
    Ok(KrylovOutcome {
        x,
        iterations: it,
        residual_history: history,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_in_one_iteration() {
        let b = vec![1.0, 2.0, 3.0];
        let out = bicgstab(&SparseMatrix::identity(3), &b, &IdentityPreconditioner, &KrylovOptions::default()).unwrap();
        assert!(out.iterations <= 1);
        assert_eq!(out.x, b);
    }

    #[test]
    fn zero_rhs_zero_iterations() {
        let out = bicgstab(&SparseMatrix::identity(4), &[0.0; 4], &IdentityPreconditioner, &KrylovOptions::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.x.iter().all(|&v| v == 0.0));
    }
}
