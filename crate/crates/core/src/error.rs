use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid membership function: {0}")]
    InvalidMembership(String),

    #[error("invalid linguistic variable: {0}")]
    InvalidVariable(String),

    #[error("invalid fuzzy unit: {0}")]
    InvalidUnit(String),

    #[error("arity mismatch: expected {expected} inputs, got {got}")]
    Arity { expected: usize, got: usize },

    /// No rule fires for the given input. The input most likely lies outside
    /// the universes covered by the unit's terms.
    #[error("zero firing strength{}{}", fmt_row(*.row), fmt_node(*.node))]
    ZeroFiring {
        row: Option<usize>,
        node: Option<usize>,
    },

    #[error("partition error: {0}")]
    Partition(String),

    #[error("rule count overflows u64")]
    CountOverflow,

    #[error("unsupported membership kind for {operation}: {kind}")]
    UnsupportedKind {
        operation: &'static str,
        kind: &'static str,
    },

    #[error("training diverged at epoch {epoch} (non-finite SSE)")]
    Divergence { epoch: usize },

    #[error("invalid training data: {0}")]
    InvalidData(String),

    #[error("invalid hierarchy: {0}")]
    InvalidHierarchy(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("target unreachable at phase {phase}: hip-ankle distance {distance} outside leg reach {reach}")]
    Unreachable {
        phase: f64,
        distance: f64,
        reach: f64,
    },

    #[error("unknown or unusable signal: {0}")]
    Signal(String),

    #[error("controller {controller}/{output}: {source}")]
    Controller {
        controller: String,
        output: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn fmt_row(row: Option<usize>) -> String {
    row.map(|r| format!(" at row {r}")).unwrap_or_default()
}

fn fmt_node(node: Option<usize>) -> String {
    node.map(|n| format!(" in node {n}")).unwrap_or_default()
}

impl Error {
    /// True for errors that stem from numerical failure rather than bad input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::ZeroFiring { .. } | Error::Divergence { .. } | Error::CountOverflow => true,
            Error::Controller { source, .. } => source.is_numeric(),
            _ => false,
        }
    }

    pub(crate) fn at_row(self, row: usize) -> Self {
        match self {
            Error::ZeroFiring { node, .. } => Error::ZeroFiring {
                row: Some(row),
                node,
            },
            other => other,
        }
    }
}
