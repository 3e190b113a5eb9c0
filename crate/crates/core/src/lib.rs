pub mod adjoint;
pub mod config;
pub mod discretization;
pub mod driver;
pub mod error;
pub mod extension;
pub mod fem;
pub mod flow;
pub mod linalg;
pub mod mesh;
pub mod newton;
pub mod objective;
pub mod optimizer;
pub mod solve;
pub mod vtk;

pub use error::{Error, Result, Stage};
