use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph is disconnected: vertex {unreachable} is not reachable from vertex 0")]
    DisconnectedGraph { unreachable: usize },
    #[error("vertex {vertex} out of range for a graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(usize, usize),
    #[error("observable count {observable} must lie in 1..={n}")]
    InvalidObservableCount { observable: usize, n: usize },
    #[error("hidden vertex count {hidden} must be below 1 + 2^alpha = {bound}")]
    TooManyHiddenVertices { hidden: usize, bound: f64 },
    #[error("invalid anchor: {0}")]
    InvalidAnchor(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("conductivity must be positive, found {value} at vertex {vertex}")]
    NonpositiveConductivity { vertex: usize, value: f64 },
    #[error("row {0} of the interaction matrix has nonpositive sum")]
    ZeroRowSum(usize),
    #[error("invalid start vertex {start} for a chain with {n} states")]
    InvalidStart { start: usize, n: usize },
    #[error("observable set is empty")]
    EmptyObservableSet,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("gauge matrix is singular (numerical rank {rank} < {size})")]
    SingularGauge { rank: usize, size: usize },
    #[error("matrix is rank deficient: rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("no gauge relates the two matrices (residual {residual:.3e})")]
    NoSolution { residual: f64 },
    #[error("conditions (P1)-(P3) violated: {0}")]
    ConditionsViolated(String),
    #[error("nonpositive entry at ({0}, {1})")]
    NonpositiveEntry(usize, usize),
    #[error("degenerate triple ({0}, {1}, {2}): vertices must be distinct")]
    DegenerateTriple(usize, usize, usize),
    #[error("degenerate pair ({0}, {1}): need a third vertex")]
    DegeneratePair(usize, usize),
    #[error("cannot separate leaves from their neighbours: {0}")]
    NotClassifiable(String),
    #[error("distance {value} between {x} and {y} is not an integer")]
    NonIntegerDistance { x: usize, y: usize, value: f64 },
    #[error("recovered distances are not a graph metric: {0}")]
    MetricViolation(String),
    #[error("sigma matrix is not rank one (relative residual {0:.3e})")]
    RankDefect(f64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of a numerical step (rank, integrality, metric)
    /// rather than of input validation.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularGauge { .. }
                | Error::RankDeficient { .. }
                | Error::NoSolution { .. }
                | Error::NotClassifiable(_)
                | Error::NonIntegerDistance { .. }
                | Error::MetricViolation(_)
                | Error::RankDefect(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
