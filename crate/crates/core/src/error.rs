use std::path::PathBuf;

use thiserror::Error;

use crate::graph::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node {0} is out of range for a graph with {1} nodes")]
    NodeOutOfRange(NodeId, usize),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(NodeId, NodeId),
    #[error("graph contains a directed cycle")]
    Cycle,
    #[error("ordering is not a permutation of {0} nodes")]
    NotAPermutation(usize),
    #[error("ordering is not topological: edge {0} -> {1} goes backwards")]
    NotTopological(NodeId, NodeId),
    #[error("node sets must be pairwise disjoint")]
    OverlappingSets,

    #[error("invalid Bayesian network: {0}")]
    InvalidNetwork(String),
    #[error("assignment space of {0} exceeds the cap of {1}")]
    SpaceTooLarge(u128, u128),
    #[error("family size must be in 2..=7, got {0}")]
    FamilyOutOfRange(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
    #[error("dangling node reference {0}")]
    DanglingRef(usize),
    #[error("state {state} out of range for variable {var} with {cardinality} states")]
    StateOutOfRange {
        var: usize,
        state: usize,
        cardinality: usize,
    },
    #[error("wrong pipeline stage: expected {expected}, found {found}")]
    WrongStage {
        expected: &'static str,
        found: &'static str,
    },
    #[error("compiler invariant broken: {0}")]
    Compiler(String),
    #[error("simplification did not reach a fixpoint within {0} passes")]
    NoFixpoint(usize),

    #[error("decompilation failed: {0}")]
    Decompile(String),
    #[error("ambiguous provenance: {0}")]
    AmbiguousProvenance(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
