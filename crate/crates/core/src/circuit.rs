//! Arithmetic circuits and sum-product networks.
//!
//! One node table serves every pipeline stage. Nodes are stored so that
//! every child index is smaller than its parent's index, which makes all
//! bottom-up passes a single forward sweep and all top-down passes a single
//! backward sweep.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bayesnet::{Variable, VariableKind, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::graph::{escape, NodeId};

/// Index of a node inside a [`Circuit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeRef(pub usize);

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CircuitNode {
    /// Weighted sum; one weight per child edge.
    Sum { children: Vec<(NodeRef, f64)> },
    Product { children: Vec<NodeRef> },
    /// `λ_{var = state}`.
    Indicator { var: NodeId, state: usize },
    /// Numeric CPT parameter (arithmetic-circuit stage only).
    Param { value: f64 },
    /// Univariate distribution over `var`.
    Terminal { var: NodeId, distribution: Vec<f64> },
    /// Constant 1, produced while marginalizing.
    One,
}

impl CircuitNode {
    pub fn children(&self) -> Box<dyn Iterator<Item = NodeRef> + '_> {
        match self {
            CircuitNode::Sum { children } => Box::new(children.iter().map(|&(c, _)| c)),
            CircuitNode::Product { children } => Box::new(children.iter().copied()),
            _ => Box::new(std::iter::empty()),
        }
    }

    pub fn is_sum(&self) -> bool {
        matches!(self, CircuitNode::Sum { .. })
    }

    pub fn is_product(&self) -> bool {
        matches!(self, CircuitNode::Product { .. })
    }

    /// Indicator or terminal.
    pub fn is_leaf_distribution(&self) -> bool {
        matches!(
            self,
            CircuitNode::Indicator { .. } | CircuitNode::Terminal { .. }
        )
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            CircuitNode::Sum { .. } => "sum",
            CircuitNode::Product { .. } => "product",
            CircuitNode::Indicator { .. } => "indicator",
            CircuitNode::Param { .. } => "param",
            CircuitNode::Terminal { .. } => "terminal",
            CircuitNode::One => "one",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    /// Arithmetic circuit: unit-weight sums over parameter-carrying products.
    Ac,
    /// Sum-product network: normalized weights, no parameters.
    Spn,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ac => "ac",
            Stage::Spn => "spn",
        }
    }
}

pub type Scope = BTreeSet<NodeId>;

/// Partial assignment indexed by variable; `None` leaves a variable free.
pub type Evidence = [Option<usize>];

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    variables: Vec<Variable>,
    nodes: Vec<CircuitNode>,
    root: NodeRef,
    stage: Stage,
    provenance: Vec<Option<NodeId>>,
}

/// Append-only node table used to assemble circuits.
#[derive(Debug, Default, Clone)]
pub struct CircuitBuilder {
    nodes: Vec<CircuitNode>,
    provenance: Vec<Option<NodeId>>,
}

impl CircuitBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a node; its children must already be in the builder.
    pub fn add(&mut self, node: CircuitNode) -> NodeRef {
        self.add_with_provenance(node, None)
    }

    pub fn add_with_provenance(&mut self, node: CircuitNode, origin: Option<NodeId>) -> NodeRef {
        let id = NodeRef(self.nodes.len());
        debug_assert!(node.children().all(|c| c.0 < id.0), "child added after parent");
        self.nodes.push(node);
        self.provenance.push(origin);
        id
    }

    pub fn node(&self, r: NodeRef) -> &CircuitNode {
        &self.nodes[r.0]
    }

    pub fn provenance(&self, r: NodeRef) -> Option<NodeId> {
        self.provenance[r.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops nodes unreachable from `root` and renumbers the rest in
    /// depth-first post-order.
    pub fn finish(self, variables: Vec<Variable>, root: NodeRef, stage: Stage) -> Circuit {
        self.finish_with_map(variables, root, stage).0
    }

    /// Like [`finish`](Self::finish), also returning where each builder
    /// node ended up (`None` if it was dropped).
    pub fn finish_with_map(
        self,
        variables: Vec<Variable>,
        root: NodeRef,
        stage: Stage,
    ) -> (Circuit, Vec<Option<NodeRef>>) {
        let n = self.nodes.len();
        let mut new_index: Vec<Option<usize>> = vec![None; n];
        let mut order = Vec::new();
        // Iterative post-order DFS, children visited in listed order.
        let mut stack: Vec<(usize, bool)> = vec![(root.0, false)];
        while let Some((v, expanded)) = stack.pop() {
            if new_index[v].is_some() {
                continue;
            }
            if expanded {
                new_index[v] = Some(order.len());
                order.push(v);
                continue;
            }
            stack.push((v, true));
            let kids: Vec<NodeRef> = self.nodes[v].children().collect();
            for c in kids.into_iter().rev() {
                if new_index[c.0].is_none() {
                    stack.push((c.0, false));
                }
            }
        }
        let remap = |r: NodeRef| NodeRef(new_index[r.0].expect("reachable child"));
        let mut nodes = Vec::with_capacity(order.len());
        let mut provenance = Vec::with_capacity(order.len());
        for &old in &order {
            let node = match &self.nodes[old] {
                CircuitNode::Sum { children } => CircuitNode::Sum {
                    children: children.iter().map(|&(c, w)| (remap(c), w)).collect(),
                },
                CircuitNode::Product { children } => CircuitNode::Product {
                    children: children.iter().map(|&c| remap(c)).collect(),
                },
                other => other.clone(),
            };
            nodes.push(node);
            provenance.push(self.provenance[old]);
        }
        let circuit = Circuit {
            variables,
            root: remap(root),
            nodes,
            stage,
            provenance,
        };
        (circuit, new_index.into_iter().map(|i| i.map(NodeRef)).collect())
    }
}

impl Circuit {
    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable_count(&self) -> usize {
        self.variables.len()
    }

    pub fn cardinality(&self, var: NodeId) -> usize {
        self.variables[var.0].cardinality
    }

    pub fn nodes(&self) -> &[CircuitNode] {
        &self.nodes
    }

    pub fn node(&self, r: NodeRef) -> &CircuitNode {
        &self.nodes[r.0]
    }

    pub fn get(&self, r: NodeRef) -> Result<&CircuitNode> {
        self.nodes.get(r.0).ok_or(Error::DanglingRef(r.0))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> NodeRef {
        self.root
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    /// Variable whose elimination created `r`, if recorded.
    pub fn provenance(&self, r: NodeRef) -> Option<NodeId> {
        self.provenance[r.0]
    }

    pub fn refs(&self) -> impl DoubleEndedIterator<Item = NodeRef> {
        (0..self.nodes.len()).map(NodeRef)
    }

    pub fn sums(&self) -> impl Iterator<Item = NodeRef> + '_ {
        self.refs().filter(|&r| self.node(r).is_sum())
    }

    pub fn count_where(&self, f: impl Fn(&CircuitNode) -> bool) -> usize {
        self.nodes.iter().filter(|n| f(n)).count()
    }

    pub(crate) fn require_stage(&self, expected: Stage) -> Result<()> {
        if self.stage == expected {
            Ok(())
        } else {
            Err(Error::WrongStage {
                expected: expected.name(),
                found: self.stage.name(),
            })
        }
    }

    /// Returns a builder holding a copy of this circuit's nodes.
    pub fn to_builder(&self) -> CircuitBuilder {
        CircuitBuilder {
            nodes: self.nodes.clone(),
            provenance: self.provenance.clone(),
        }
    }

    pub(crate) fn with_stage(mut self, stage: Stage) -> Circuit {
        self.stage = stage;
        self
    }

    /// Parent lists, deduplicated and sorted.
    pub fn parents(&self) -> Vec<Vec<NodeRef>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for r in self.refs() {
            for c in self.node(r).children() {
                out[c.0].push(r);
            }
        }
        for list in &mut out {
            list.dedup();
        }
        out
    }

    /// Scope of every node.
    pub fn scopes(&self) -> Vec<Scope> {
        let mut out: Vec<Scope> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let s = match node {
                CircuitNode::Indicator { var, .. } | CircuitNode::Terminal { var, .. } => {
                    BTreeSet::from([*var])
                }
                CircuitNode::Param { .. } | CircuitNode::One => BTreeSet::new(),
                _ => {
                    let mut s = BTreeSet::new();
                    for c in node.children() {
                        s.extend(out[c.0].iter().copied());
                    }
                    s
                }
            };
            out.push(s);
        }
        out
    }

    pub fn scope(&self, r: NodeRef) -> Result<Scope> {
        self.get(r)?;
        Ok(self.scopes().swap_remove(r.0))
    }

    /// Completeness and decomposability report.
    pub fn check_valid(&self) -> ValidityReport {
        let scopes = self.scopes();
        let mut violations = Vec::new();
        for r in self.refs() {
            match self.node(r) {
                CircuitNode::Sum { children } => {
                    if let Some(&(first, _)) = children.first() {
                        if children.iter().any(|&(c, _)| scopes[c.0] != scopes[first.0]) {
                            violations.push(Violation {
                                node: r,
                                kind: ViolationKind::Incomplete,
                            });
                        }
                    }
                }
                CircuitNode::Product { children } => {
                    let mut seen = BTreeSet::new();
                    let overlapping = children
                        .iter()
                        .any(|c| scopes[c.0].iter().any(|v| !seen.insert(*v)));
                    if overlapping {
                        violations.push(Violation {
                            node: r,
                            kind: ViolationKind::NotDecomposable,
                        });
                    }
                }
                _ => {}
            }
        }
        ValidityReport {
            complete: !violations
                .iter()
                .any(|v| v.kind == ViolationKind::Incomplete),
            decomposable: !violations
                .iter()
                .any(|v| v.kind == ViolationKind::NotDecomposable),
            violations,
        }
    }

    /// Value of every node under `evidence`.
    pub fn evaluate_all(&self, evidence: &Evidence) -> Result<Vec<f64>> {
        for (i, e) in evidence.iter().enumerate() {
            if let Some(state) = *e {
                let cardinality = self.variables.get(i).map_or(0, |v| v.cardinality);
                if state >= cardinality {
                    return Err(Error::StateOutOfRange {
                        var: i,
                        state,
                        cardinality,
                    });
                }
            }
        }
        let observed = |var: NodeId| evidence.get(var.0).copied().flatten();
        let mut val = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node {
                CircuitNode::Sum { children } => {
                    children.iter().map(|&(c, w)| w * val[c.0]).sum::<f64>()
                }
                CircuitNode::Product { children } => children.iter().map(|c| val[c.0]).product(),
                CircuitNode::Indicator { var, state } => match observed(*var) {
                    Some(s) if s != *state => 0.0,
                    _ => 1.0,
                },
                CircuitNode::Param { value } => *value,
                CircuitNode::Terminal { var, distribution } => match observed(*var) {
                    Some(s) => distribution[s],
                    None => 1.0,
                },
                CircuitNode::One => 1.0,
            };
            val.push(v);
        }
        Ok(val)
    }

    /// Value of the root under `evidence`.
    pub fn evaluate(&self, evidence: &Evidence) -> Result<f64> {
        Ok(self.evaluate_all(evidence)?[self.root.0])
    }

    /// Canonical digest, invariant under child reordering. Weights and
    /// numeric leaves are rounded to 12 decimals.
    pub fn fingerprint(&self) -> String {
        let digests = self.node_digests();
        hex::encode(digests[self.root.0])
    }

    fn node_digests(&self) -> Vec<[u8; 32]> {
        let mut out: Vec<[u8; 32]> = Vec::with_capacity(self.nodes.len());
        let num = |x: f64| format!("{:.12}", x + 0.0);
        for node in &self.nodes {
            let text = match node {
                CircuitNode::Sum { children } => {
                    let mut parts: Vec<String> = children
                        .iter()
                        .map(|&(c, w)| format!("{}*{}", num(w), hex::encode(out[c.0])))
                        .collect();
                    parts.sort();
                    format!("S({})", parts.join(","))
                }
                CircuitNode::Product { children } => {
                    let mut parts: Vec<String> =
                        children.iter().map(|c| hex::encode(out[c.0])).collect();
                    parts.sort();
                    format!("P({})", parts.join(","))
                }
                CircuitNode::Indicator { var, state } => format!("I({var}={state})"),
                CircuitNode::Param { value } => format!("C({})", num(*value)),
                CircuitNode::Terminal { var, distribution } => {
                    let d: Vec<String> = distribution.iter().map(|&p| num(p)).collect();
                    format!("T({var}:{})", d.join(","))
                }
                CircuitNode::One => "1".to_string(),
            };
            out.push(Sha256::digest(text.as_bytes()).into());
        }
        out
    }

    /// DOT rendering: `+` circles for sums, `×` circles for products, boxes
    /// for leaves.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph spn {\n");
        let name = |v: &NodeId| {
            self.variables
                .get(v.0)
                .map_or_else(|| format!("X{}", v.0), |x| x.name.clone())
        };
        for r in self.refs() {
            let (shape, label) = match self.node(r) {
                CircuitNode::Sum { .. } => ("circle", "+".to_string()),
                CircuitNode::Product { .. } => ("circle", "×".to_string()),
                CircuitNode::Indicator { var, state } => ("box", format!("λ {}={}", name(var), state)),
                CircuitNode::Param { value } => ("box", format!("θ {value:.4}")),
                CircuitNode::Terminal { var, distribution } => {
                    let d: Vec<String> = distribution.iter().map(|p| format!("{p:.3}")).collect();
                    ("box", format!("{} [{}]", name(var), d.join(", ")))
                }
                CircuitNode::One => ("box", "1".to_string()),
            };
            let _ = writeln!(
                out,
                "  n{} [shape={shape}, label=\"{}\"];",
                r.0,
                escape(&label)
            );
        }
        for r in self.refs() {
            match self.node(r) {
                CircuitNode::Sum { children } => {
                    for &(c, w) in children {
                        let _ = writeln!(out, "  n{} -> n{} [label=\"{w:.3}\"];", r.0, c.0);
                    }
                }
                CircuitNode::Product { children } => {
                    for c in children {
                        let _ = writeln!(out, "  n{} -> n{};", r.0, c.0);
                    }
                }
                _ => {}
            }
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Incomplete,
    NotDecomposable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub node: NodeRef,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityReport {
    pub complete: bool,
    pub decomposable: bool,
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

// ---------------------------------------------------------------------------
// JSON format

#[derive(Debug, Serialize, Deserialize)]
struct SpnFile {
    #[serde(default = "default_stage")]
    stage: Stage,
    #[serde(default)]
    variables: Vec<VarJson>,
    root: usize,
    nodes: Vec<NodeJson>,
}

fn default_stage() -> Stage {
    Stage::Spn
}

#[derive(Debug, Serialize, Deserialize)]
struct VarJson {
    name: String,
    cardinality: usize,
    #[serde(default, skip_serializing_if = "is_observable")]
    kind: VariableKind,
}

fn is_observable(k: &VariableKind) -> bool {
    *k == VariableKind::Observable
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct NodeJson {
    id: usize,
    #[serde(rename = "type")]
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    children: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    variable: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    distribution: Option<Vec<f64>>,
    /// Variable whose elimination created the node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<usize>,
}

impl Circuit {
    pub fn to_json(&self) -> String {
        let nodes = self
            .refs()
            .map(|r| {
                let mut j = NodeJson {
                    id: r.0,
                    kind: self.node(r).kind_name().to_string(),
                    origin: self.provenance(r).map(|v| v.0),
                    ..Default::default()
                };
                match self.node(r) {
                    CircuitNode::Sum { children } => {
                        j.children = Some(children.iter().map(|&(c, _)| c.0).collect());
                        j.weights = Some(children.iter().map(|&(_, w)| w).collect());
                    }
                    CircuitNode::Product { children } => {
                        j.children = Some(children.iter().map(|c| c.0).collect());
                    }
                    CircuitNode::Indicator { var, state } => {
                        j.variable = Some(var.0);
                        j.value = Some(*state as f64);
                    }
                    CircuitNode::Param { value } => j.value = Some(*value),
                    CircuitNode::Terminal { var, distribution } => {
                        j.variable = Some(var.0);
                        j.distribution = Some(distribution.clone());
                    }
                    CircuitNode::One => {}
                }
                j
            })
            .collect();
        let file = SpnFile {
            stage: self.stage,
            variables: self
                .variables
                .iter()
                .map(|v| VarJson {
                    name: v.name.clone(),
                    cardinality: v.cardinality,
                    kind: v.kind,
                })
                .collect(),
            root: self.root.0,
            nodes,
        };
        serde_json::to_string_pretty(&file).expect("serializable") + "\n"
    }

    /// Parses the JSON node list. Node ids may be arbitrary and in any
    /// order; the result is renumbered children-first. When `variables` is
    /// absent, binary variables `X0..` are assumed.
    pub fn from_json(text: &str) -> Result<Circuit> {
        let file: SpnFile = serde_json::from_str(text)?;
        let mut by_id: HashMap<usize, usize> = HashMap::new();
        for (pos, n) in file.nodes.iter().enumerate() {
            if by_id.insert(n.id, pos).is_some() {
                return Err(Error::Format(format!("duplicate node id {}", n.id)));
            }
        }
        let lookup = |id: usize| -> Result<usize> {
            by_id
                .get(&id)
                .copied()
                .ok_or_else(|| Error::Format(format!("dangling node id {id}")))
        };

        let mut variables: Vec<Variable> = file
            .variables
            .iter()
            .map(|v| Variable {
                name: v.name.clone(),
                cardinality: v.cardinality,
                kind: v.kind,
            })
            .collect();
        let implicit_vars = variables.is_empty();

        // Children-first order over positions in `file.nodes`.
        let mut order = Vec::with_capacity(file.nodes.len());
        let mut state = vec![0u8; file.nodes.len()]; // 0 new, 1 open, 2 done
        let mut stack = vec![(lookup(file.root)?, false)];
        while let Some((p, expanded)) = stack.pop() {
            if expanded {
                state[p] = 2;
                order.push(p);
                continue;
            }
            match state[p] {
                2 => continue,
                1 => return Err(Error::Format("circuit contains a cycle".into())),
                _ => {}
            }
            state[p] = 1;
            stack.push((p, true));
            for &c in file.nodes[p].children.iter().flatten().rev() {
                let cp = lookup(c)?;
                match state[cp] {
                    1 => return Err(Error::Format("circuit contains a cycle".into())),
                    0 => stack.push((cp, false)),
                    _ => {}
                }
            }
        }

        let mut builder = CircuitBuilder::new();
        let mut built: HashMap<usize, NodeRef> = HashMap::new();
        for &p in &order {
            let j = &file.nodes[p];
            let kids = || -> Result<Vec<NodeRef>> {
                j.children
                    .as_ref()
                    .ok_or_else(|| Error::Format(format!("node {} has no children", j.id)))?
                    .iter()
                    .map(|c| Ok(built[&lookup(*c)?]))
                    .collect()
            };
            let var = || -> Result<NodeId> {
                j.variable
                    .map(NodeId)
                    .ok_or_else(|| Error::Format(format!("node {} has no variable", j.id)))
            };
            let node = match j.kind.as_str() {
                "sum" => {
                    let children = kids()?;
                    let weights = j.weights.clone().unwrap_or_else(|| vec![1.0; children.len()]);
                    if weights.len() != children.len() {
                        return Err(Error::Format(format!("node {}: weight count", j.id)));
                    }
                    CircuitNode::Sum {
                        children: children.into_iter().zip(weights).collect(),
                    }
                }
                "product" => CircuitNode::Product { children: kids()? },
                "indicator" => {
                    let v = j
                        .value
                        .filter(|v| *v >= 0.0 && v.fract() == 0.0)
                        .ok_or_else(|| Error::Format(format!("node {}: bad state", j.id)))?;
                    CircuitNode::Indicator {
                        var: var()?,
                        state: v as usize,
                    }
                }
                "param" => CircuitNode::Param {
                    value: j
                        .value
                        .ok_or_else(|| Error::Format(format!("node {}: missing value", j.id)))?,
                },
                "terminal" => CircuitNode::Terminal {
                    var: var()?,
                    distribution: j.distribution.clone().ok_or_else(|| {
                        Error::Format(format!("node {}: missing distribution", j.id))
                    })?,
                },
                "one" => CircuitNode::One,
                other => return Err(Error::Format(format!("unknown node type {other:?}"))),
            };
            if let CircuitNode::Indicator { var, state } = &node {
                if implicit_vars {
                    while variables.len() <= var.0 {
                        let i = variables.len();
                        variables.push(Variable::observable(format!("X{i}"), 2));
                    }
                    variables[var.0].cardinality = variables[var.0].cardinality.max(state + 1);
                }
            }
            if let CircuitNode::Terminal { var, distribution } = &node {
                if implicit_vars {
                    while variables.len() <= var.0 {
                        let i = variables.len();
                        variables.push(Variable::observable(format!("X{i}"), 2));
                    }
                    variables[var.0].cardinality = distribution.len();
                }
            }
            let r = builder.add_with_provenance(node, j.origin.map(NodeId));
            built.insert(p, r);
        }
        let root = built[&lookup(file.root)?];
        let circuit = builder.finish(variables, root, file.stage);
        circuit.check_leaves()?;
        if circuit.stage == Stage::Spn {
            circuit.check_spn_weights()?;
        }
        Ok(circuit)
    }

    fn check_leaves(&self) -> Result<()> {
        for r in self.refs() {
            match self.node(r) {
                CircuitNode::Indicator { var, state } => {
                    let card = self.variables.get(var.0).map(|v| v.cardinality).ok_or_else(|| {
                        Error::InvalidCircuit(format!("{r}: unknown variable {var}"))
                    })?;
                    if *state >= card {
                        return Err(Error::StateOutOfRange {
                            var: var.0,
                            state: *state,
                            cardinality: card,
                        });
                    }
                }
                CircuitNode::Terminal { var, distribution } => {
                    let card = self.variables.get(var.0).map(|v| v.cardinality).ok_or_else(|| {
                        Error::InvalidCircuit(format!("{r}: unknown variable {var}"))
                    })?;
                    if distribution.len() != card
                        || distribution.iter().any(|&p| !(p >= 0.0))
                        || (distribution.iter().sum::<f64>() - 1.0).abs() > DEFAULT_TOL
                    {
                        return Err(Error::InvalidCircuit(format!(
                            "{r}: terminal is not a distribution over {card} states"
                        )));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Every sum has non-negative weights summing to 1 and there are no
    /// parameter leaves.
    pub(crate) fn check_spn_weights(&self) -> Result<()> {
        for r in self.refs() {
            match self.node(r) {
                CircuitNode::Sum { children } => {
                    if children.iter().any(|&(_, w)| !(w >= 0.0)) {
                        return Err(Error::InvalidCircuit(format!("{r}: negative weight")));
                    }
                    let total: f64 = children.iter().map(|&(_, w)| w).sum();
                    if (total - 1.0).abs() > DEFAULT_TOL {
                        return Err(Error::InvalidCircuit(format!(
                            "{r}: weights sum to {total}"
                        )));
                    }
                }
                CircuitNode::Param { .. } => {
                    return Err(Error::InvalidCircuit(format!("{r}: parameter in an SPN")))
                }
                _ => {}
            }
        }
        Ok(())
    }
}
