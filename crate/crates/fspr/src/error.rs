//! Error type shared by all solvers and I/O paths.

use std::fmt;

/// Errors produced by graph construction, solvers, metrics, and file I/O.
#[derive(Debug)]
pub enum Error {
    /// A graph must contain at least one node.
    EmptyGraph,
    /// Duplicate edge found while deduplication is disabled.
    DuplicateEdge { source: u32, target: u32 },
    /// An edge references a node id outside `[0, node_count)`.
    NodeOutOfRange { node: u32, node_count: usize },
    /// Vector length does not match what the operation expects.
    DimensionMismatch { expected: usize, got: usize },
    /// An iterative solver exhausted its iteration budget.
    NoConvergence {
        iterations: usize,
        residual: f64,
        /// Residual per iteration, oldest first. Empty when the solver does
        /// not track a history.
        history: Vec<f64>,
    },
    /// Dense operations refuse graphs above the configured node cap.
    GraphTooLargeForDense { nodes: usize, cap: usize },
    /// The dense linear system could not be factorized. Cannot occur for
    /// teleport probabilities in (0, 1].
    SingularSystem,
    /// No jump distribution can reach the requested protected mass.
    Infeasible { target: f64, min: f64, max: f64 },
    /// A nonempty group has total in-degree zero, so its degree-proportional
    /// jump mass is undefined.
    DegenerateGroup { protected: bool },
    /// No node has out-degree >= 1, so the moment <k_in^2 / k_out> is empty.
    EmptyMoment,
    /// Correlation input with zero variance (or equivalent degeneracy).
    DegenerateInput(&'static str),
    /// Score files being compared do not cover the same node ids.
    NodeSetMismatch,
    /// The sampled degree sequence could not be wired into a simple graph
    /// within the rewiring budget.
    InfeasibleDegreeSequence(String),
    /// A parameter is outside its documented domain.
    InvalidParameter(String),
    /// Score data violates the distribution invariants.
    InvalidScores(String),
    /// A node referenced by the edge list is missing from the label file.
    MissingLabel { node: u64 },
    /// Malformed line in an input file.
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyGraph => write!(f, "graph has no nodes"),
            Error::DuplicateEdge { source, target } => {
                write!(f, "duplicate edge {source} -> {target} (deduplication disabled)")
            }
            Error::NodeOutOfRange { node, node_count } => {
                write!(f, "node id {node} out of range for {node_count} nodes")
            }
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::NoConvergence {
                iterations,
                residual,
                ..
            } => write!(
                f,
                "no convergence after {iterations} iterations (residual {residual:.3e})"
            ),
            Error::GraphTooLargeForDense { nodes, cap } => write!(
                f,
                "graph has {nodes} nodes, above the dense cap of {cap}; use the gmres method"
            ),
            Error::SingularSystem => write!(f, "dense system is singular"),
            Error::Infeasible { target, min, max } => write!(
                f,
                "protected-mass target {target} outside achievable range [{min}, {max}]"
            ),
            Error::DegenerateGroup { protected } => {
                let name = if *protected { "protected" } else { "unprotected" };
                write!(f, "{name} group is nonempty but has total in-degree 0")
            }
            Error::EmptyMoment => write!(f, "no node with out-degree >= 1"),
            Error::DegenerateInput(what) => write!(f, "degenerate input: {what}"),
            Error::NodeSetMismatch => write!(f, "score files do not share the same node ids"),
            Error::InfeasibleDegreeSequence(msg) => {
                write!(f, "degree sequence not realizable as a simple graph: {msg}")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::InvalidScores(msg) => write!(f, "invalid scores: {msg}"),
            Error::MissingLabel { node } => write!(f, "node {node} has no group label"),
            Error::Parse { path, line, msg } => write!(f, "{path}:{line}: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
