use std::fmt;

/// Pipeline stage tag attached to errors raised inside the gradient chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Extension,
    State,
    AdjointFlow,
    AdjointDisplacement,
    ReducedGradient,
    Optimizer,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Extension => "extension",
            Stage::State => "state",
            Stage::AdjointFlow => "adjoint flow",
            Stage::AdjointDisplacement => "adjoint displacement",
            Stage::ReducedGradient => "reduced gradient",
            Stage::Optimizer => "optimizer",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("no boundary marker configured for physical id {0}")]
    MissingMarker(i64),

    #[error("non-conforming mesh: {0}")]
    NonConforming(String),

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("conflicting Dirichlet values for dof {dof}: {first} vs {second}")]
    ConflictingDirichlet { dof: usize, first: f64, second: f64 },

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("zero diagonal entry in row {0}")]
    ZeroDiagonal(usize),

    #[error("zero pivot in ILU(0) at row {0}")]
    ZeroPivot(usize),

    #[error("BiCGStab breakdown after {iterations} iterations")]
    Breakdown { iterations: usize },

    #[error("BiCGStab diverged after {iterations} iterations (residual {residual:e})")]
    Diverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("inverted geometry: min det(DF) = {0:e}")]
    InvertedGeometry(f64),

    #[error("Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonStagnation {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{0}")]
    InvalidArgument(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn at_stage(self, stage: Stage) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Innermost error with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
