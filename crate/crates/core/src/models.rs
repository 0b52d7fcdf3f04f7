//! Ready-made networks used by the examples, tests and CLI demos.

use crate::bayesnet::{random_cpts_named, BayesNet};
use crate::error::Result;
use crate::graph::{Dag, NodeId};

/// Hidden Markov model with `steps` binary hidden states `H1..` and one
/// binary observation `O1..` per step. Hidden variables come first.
pub fn hmm(steps: usize, seed: u64) -> Result<BayesNet> {
    let mut edges = Vec::new();
    for t in 0..steps {
        if t + 1 < steps {
            edges.push((NodeId(t), NodeId(t + 1)));
        }
        edges.push((NodeId(t), NodeId(steps + t)));
    }
    let names: Vec<String> = (1..=steps)
        .map(|t| format!("H{t}"))
        .chain((1..=steps).map(|t| format!("O{t}")))
        .collect();
    let dag = Dag::new(2 * steps, edges)?;
    random_cpts_named(&dag, &vec![2; 2 * steps], &names, seed)
}

/// `A -> B -> E <- D <- C`, binary.
pub fn five_node_collider(seed: u64) -> Result<BayesNet> {
    let names: Vec<String> = ["A", "B", "C", "D", "E"].iter().map(|s| s.to_string()).collect();
    let dag = Dag::new(
        5,
        [(0, 1), (1, 4), (2, 3), (3, 4)].map(|(a, b)| (NodeId(a), NodeId(b))),
    )?;
    random_cpts_named(&dag, &[2; 5], &names, seed)
}

/// Binary chain `X1 -> X2 -> ... -> Xn`.
pub fn chain(n: usize, seed: u64) -> Result<BayesNet> {
    let dag = Dag::new(n, (1..n).map(|i| (NodeId(i - 1), NodeId(i))))?;
    crate::bayesnet::random_cpts(&dag, &vec![2; n], seed)
}
