use super::direct::DirectSolver;
use super::krylov::Preconditioner;
use super::smoother::{Smoother, SmootherKind};
use super::sparse::SparseMatrix;
use super::transfer::TransferOperator;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultigridConfig {
    pub pre_smooth: usize,
    pub post_smooth: usize,
    pub smoother: SmootherKind,
}

impl Default for MultigridConfig {
    fn default() -> Self {
        MultigridConfig {
            pre_smooth: 3,
            post_smooth: 3,
            smoother: SmootherKind::Jacobi { omega: 0.66 },
        }
    }
}

impl MultigridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pre_smooth == 0 || self.post_smooth == 0 {
            return Err(Error::Config("multigrid smoothing counts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug)]
struct Level {
    a: SparseMatrix,
    smoother: Option<Smoother>,
    fixed: Vec<bool>,
}

/// Geometric V-cycle over level matrices ordered coarse to fine.
///
/// `fixed` flags constrained (identity-row) dofs of each level; coarse
/// residuals and fine corrections vanish there.
#[derive(Debug)]
pub struct Multigrid<'t> {
    levels: Vec<Level>,
    transfers: &'t [TransferOperator],
    coarse: DirectSolver,
    cfg: MultigridConfig,
}

impl<'t> Multigrid<'t> {
    /// `transfers[l]` maps level `l` to level `l + 1`.
    pub fn new(
        matrices: Vec<(SparseMatrix, Vec<bool>)>,
        transfers: &'t [TransferOperator],
        cfg: MultigridConfig,
    ) -> Result<Multigrid<'t>> {
        cfg.validate()?;
        if matrices.is_empty() || transfers.len() + 1 != matrices.len() {
            return Err(Error::InvalidArgument(format!(
                "{} level matrices but {} transfers",
                matrices.len(),
                transfers.len()
            )));
        }
        for (l, t) in transfers.iter().enumerate() {
            if t.prolongation.ncols != matrices[l].0.nrows || t.prolongation.nrows != matrices[l + 1].0.nrows {
                return Err(Error::SpaceMismatch(format!("transfer {l} does not match level sizes")));
            }
        }
        let coarse = DirectSolver::factor(&matrices[0].0)?;
        let levels = matrices
            .into_iter()
            .enumerate()
            .map(|(l, (a, fixed))| {
                let smoother = if l == 0 { None } else { Some(Smoother::new(cfg.smoother, &a)?) };
                Ok(Level { a, smoother, fixed })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Multigrid {
            levels,
            transfers,
            coarse,
            cfg,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn finest_matrix(&self) -> &SparseMatrix {
        &self.levels.last().expect("nonempty").a
    }

    /// One V-cycle for A z = r from z = 0.
    pub fn vcycle(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.cycle(self.levels.len() - 1, r)
    }

    fn cycle(&self, l: usize, b: &[f64]) -> Result<Vec<f64>> {
        if l == 0 {
            return self.coarse.solve(b);
        }
        let lev = &self.levels[l];
        let sm = lev.smoother.as_ref().expect("smoother on fine levels");
        let mut x = vec![0.0; b.len()];
        sm.smooth(&lev.a, &mut x, b, self.cfg.pre_smooth);
        let ax = lev.a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let t = &self.transfers[l - 1];
        let mut rc = t.restrict(&r);
        for (v, &f) in rc.iter_mut().zip(&self.levels[l - 1].fixed) {
            if f {
                *v = 0.0;
            }
        }
        let xc = self.cycle(l - 1, &rc)?;
        let corr = t.prolong(&xc);
        for i in 0..x.len() {
            if !lev.fixed[i] {
                x[i] += corr[i];
            }
        }
        sm.smooth(&lev.a, &mut x, b, self.cfg.post_smooth);
        Ok(x)
    }
}

impl Preconditioner for Multigrid<'_> {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.vcycle(r)
    }
}
