//! Sparse linear algebra: storage, direct and Krylov solvers, smoothers and
//! geometric multigrid.

mod dense;
mod direct;
mod krylov;
mod multigrid;
mod smoother;
mod sparse;
mod transfer;

pub use dense::DenseLu;
pub use direct::{lu_solve, DirectSolver};
pub use krylov::{bicgstab, IdentityPreconditioner, KrylovOptions, KrylovOutcome, Preconditioner};
pub use multigrid::{Multigrid, MultigridConfig};
pub use smoother::{smoother_apply, Ilu0, Smoother, SmootherKind};
pub use sparse::{dot, norm2, norm_inf, PatternBuilder, SparseMatrix};
pub use transfer::{mixed_prolongation, p1_prolongation, p2_prolongation, vector_prolongation, TransferOperator};
