use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
///
/// Node and column indices carried here are 0-based; the `Display` output
/// reports them 1-based, matching the serialized formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("matrix is not positive definite: non-positive pivot at index {}", .pivot + 1)]
    NotPositiveDefinite { pivot: usize },

    #[error("column {} has zero sample variance", .column + 1)]
    ConstantColumn { column: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("solver did not converge after {iterations} iterations (KKT violation {violation:.3e})")]
    Convergence { iterations: usize, violation: f64 },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("residual variance of node {} is below {floor:e}", .node + 1)]
    DegenerateResidual { node: usize, floor: f64 },

    #[error("node {}: {source}", .node + 1)]
    Node {
        node: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("penalty grid point j={grid_index}: {source}")]
    Tuning {
        grid_index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("replication {replication}: {source}")]
    Replication {
        replication: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input or configuration, as opposed to
    /// numerical failures inside the solvers.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Domain(_)
            | Error::Parameter(_)
            | Error::InsufficientData(_)
            | Error::ConstantColumn { .. }
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::Json(_) => true,
            Error::NotPositiveDefinite { .. }
            | Error::Convergence { .. }
            | Error::Infeasible
            | Error::DegenerateResidual { .. } => false,
            Error::Node { source, .. }
            | Error::Tuning { source, .. }
            | Error::Replication { source, .. } => source.is_input_error(),
        }
    }

    pub(crate) fn at_node(self, node: usize) -> Error {
        Error::Node {
            node,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
