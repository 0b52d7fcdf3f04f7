//! Compile Bayesian networks into sum-product networks and decompile them
//! back, with the graph machinery (d-separation, moral closure) and the
//! brute-force probability oracles used to check both directions.

pub mod assign;
pub mod bayesnet;
pub mod circuit;
pub mod cli;
pub mod compiler;
pub mod decompiler;
pub mod error;
pub mod graph;
pub mod models;
pub mod verify;

pub use bayesnet::{BayesNet, Cpt, JointTable, Variable, VariableKind};
pub use circuit::{Circuit, CircuitBuilder, CircuitNode, NodeRef, Stage};
pub use compiler::{bn2spn, Normalization};
pub use error::{Error, Result};
pub use graph::{Dag, NodeId, Ordering};
pub use decompiler::{spn2bn, Decompilation, RegionMode};
pub use verify::{roundtrip, MarginalizationPolicy};
