//! Discrete Bayesian networks, brute-force joint tables and the
//! independence oracles built on them.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assign::{assignments, flat_index, space_size};
use crate::error::{Error, Result};
use crate::graph::{escape, Dag, NodeId};

/// Default cap on the number of joint assignments materialized at once.
pub const DEFAULT_SPACE_CAP: u128 = 1 << 20;

/// Default tolerance for independence and normalization checks.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    #[default]
    Observable,
    Latent,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Variable {
    pub name: String,
    pub cardinality: usize,
    pub kind: VariableKind,
}

impl Variable {
    pub fn observable(name: impl Into<String>, cardinality: usize) -> Self {
        Variable {
            name: name.into(),
            cardinality,
            kind: VariableKind::Observable,
        }
    }

    pub fn latent(name: impl Into<String>, cardinality: usize) -> Self {
        Variable {
            name: name.into(),
            cardinality,
            kind: VariableKind::Latent,
        }
    }
}

/// `P(child | parents)`. Rows are indexed by the parent assignment, first
/// parent most significant; parents are kept in ascending id order.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub child: NodeId,
    pub parents: Vec<NodeId>,
    pub table: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn row(&self, parent_states: &[usize], cards: &[usize]) -> &[f64] {
        let pc: Vec<usize> = self.parents.iter().map(|p| cards[p.0]).collect();
        &self.table[flat_index(&pc, parent_states)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesNet {
    variables: Vec<Variable>,
    dag: Dag,
    cpts: Vec<Cpt>,
}

impl BayesNet {
    pub fn new(variables: Vec<Variable>, dag: Dag, cpts: Vec<Cpt>) -> Result<Self> {
        let n = variables.len();
        if dag.node_count() != n {
            return Err(Error::InvalidNetwork(format!(
                "{} variables but the graph has {} nodes",
                n,
                dag.node_count()
            )));
        }
        let mut names = HashSet::new();
        for v in &variables {
            if !names.insert(v.name.as_str()) {
                return Err(Error::InvalidNetwork(format!("duplicate name {:?}", v.name)));
            }
            let min = match v.kind {
                VariableKind::Observable => 2,
                VariableKind::Latent => 1,
            };
            if v.cardinality < min {
                return Err(Error::InvalidNetwork(format!(
                    "variable {:?} has cardinality {}",
                    v.name, v.cardinality
                )));
            }
        }
        if cpts.len() != n {
            return Err(Error::InvalidNetwork(format!(
                "expected {} CPTs, got {}",
                n,
                cpts.len()
            )));
        }
        let cards: Vec<usize> = variables.iter().map(|v| v.cardinality).collect();
        for (i, cpt) in cpts.iter().enumerate() {
            let name = &variables[i].name;
            if cpt.child != NodeId(i) {
                return Err(Error::InvalidNetwork(format!("CPT {i} is not for {name:?}")));
            }
            if cpt.parents != dag.parents(NodeId(i)) {
                return Err(Error::InvalidNetwork(format!(
                    "CPT parents of {name:?} differ from the graph"
                )));
            }
            let rows: usize = cpt.parents.iter().map(|p| cards[p.0]).product();
            if cpt.table.len() != rows {
                return Err(Error::InvalidNetwork(format!(
                    "CPT of {name:?} has {} rows, expected {rows}",
                    cpt.table.len()
                )));
            }
            for row in &cpt.table {
                if row.len() != cards[i] {
                    return Err(Error::InvalidNetwork(format!(
                        "CPT row of {name:?} has length {}",
                        row.len()
                    )));
                }
                if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                    return Err(Error::InvalidNetwork(format!(
                        "CPT of {name:?} has a negative or non-finite entry"
                    )));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > DEFAULT_TOL {
                    return Err(Error::InvalidNetwork(format!(
                        "CPT row of {name:?} sums to {total}"
                    )));
                }
            }
        }
        Ok(BayesNet {
            variables,
            dag,
            cpts,
        })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn cpt(&self, v: NodeId) -> &Cpt {
        &self.cpts[v.0]
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.cardinality).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<NodeId> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .map(NodeId)
    }

    /// Probability of one full assignment as a product of CPT entries.
    pub fn probability(&self, states: &[usize]) -> f64 {
        let cards = self.cardinalities();
        self.cpts
            .iter()
            .map(|cpt| {
                let ps: Vec<usize> = cpt.parents.iter().map(|p| states[p.0]).collect();
                cpt.row(&ps, &cards)[states[cpt.child.0]]
            })
            .product()
    }

    pub fn to_dot(&self) -> String {
        self.dag.to_dot(Some(&self.names()))
    }
}

/// Explicit table over all assignments of an ordered variable list.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    variables: Vec<Variable>,
    probabilities: Vec<f64>,
}

impl JointTable {
    pub fn new(variables: Vec<Variable>, probabilities: Vec<f64>) -> Result<Self> {
        let cards: Vec<usize> = variables.iter().map(|v| v.cardinality).collect();
        let size = space_size(&cards).unwrap_or(u128::MAX);
        if size != probabilities.len() as u128 {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for an assignment space of {size}",
                probabilities.len()
            )));
        }
        if probabilities.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidNetwork("negative joint entry".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > DEFAULT_TOL {
            return Err(Error::InvalidNetwork(format!("joint mass is {total}")));
        }
        Ok(JointTable {
            variables,
            probabilities,
        })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.cardinality).collect()
    }

    pub fn entry(&self, states: &[usize]) -> f64 {
        self.probabilities[flat_index(&self.cardinalities(), states)]
    }

    /// Marginal table over `vars` (kept in the given order).
    pub fn marginal(&self, vars: &[NodeId]) -> Vec<f64> {
        let cards = self.cardinalities();
        let sub: Vec<usize> = vars.iter().map(|v| cards[v.0]).collect();
        let mut out = vec![0.0; sub.iter().product()];
        for (states, &p) in assignments(&cards).zip(&self.probabilities) {
            let proj: Vec<usize> = vars.iter().map(|v| states[v.0]).collect();
            out[flat_index(&sub, &proj)] += p;
        }
        out
    }

    /// Sum of entries consistent with a partial assignment.
    pub fn mass(&self, evidence: &[Option<usize>]) -> f64 {
        assignments(&self.cardinalities())
            .zip(&self.probabilities)
            .filter(|(s, _)| {
                evidence
                    .iter()
                    .zip(s)
                    .all(|(e, &x)| e.is_none_or(|e| e == x))
            })
            .map(|(_, &p)| p)
            .sum()
    }
}

/// Brute-force joint distribution: the product of all CPTs.
pub fn joint_of_bn(bn: &BayesNet, cap: u128) -> Result<JointTable> {
    let cards = bn.cardinalities();
    let size = space_size(&cards).unwrap_or(u128::MAX);
    if size > cap {
        return Err(Error::SpaceTooLarge(size, cap));
    }
    let probabilities = assignments(&cards).map(|s| bn.probability(&s)).collect();
    JointTable::new(bn.variables.clone(), probabilities)
}

/// Whether `P(x, y | z) = P(x | z) P(y | z)` for every assignment with
/// `P(z) > tol`, within `tol`.
pub fn is_independent(
    j: &JointTable,
    x: &BTreeSet<NodeId>,
    z: &BTreeSet<NodeId>,
    y: &BTreeSet<NodeId>,
    tol: f64,
) -> bool {
    let cards = j.cardinalities();
    let xs: Vec<NodeId> = x.iter().copied().collect();
    let ys: Vec<NodeId> = y.iter().copied().collect();
    let zs: Vec<NodeId> = z.iter().copied().collect();
    let all: Vec<NodeId> = xs.iter().chain(&ys).chain(&zs).copied().collect();
    let pxyz = j.marginal(&all);
    let card_of = |vs: &[NodeId]| -> Vec<usize> { vs.iter().map(|v| cards[v.0]).collect() };
    let (cx, cy, cz) = (card_of(&xs), card_of(&ys), card_of(&zs));
    let nx: usize = cx.iter().product();
    let ny: usize = cy.iter().product();
    let nz: usize = cz.iter().product();
    // all = x ++ y ++ z, so the flat index is (ix * ny + iy) * nz + iz.
    for iz in 0..nz {
        let pz: f64 = (0..nx * ny).map(|ixy| pxyz[ixy * nz + iz]).sum();
        if pz <= tol {
            continue;
        }
        for ix in 0..nx {
            let pxz: f64 = (0..ny).map(|iy| pxyz[(ix * ny + iy) * nz + iz]).sum();
            for iy in 0..ny {
                let pyz: f64 = (0..nx).map(|jx| pxyz[(jx * ny + iy) * nz + iz]).sum();
                let joint = pxyz[(ix * ny + iy) * nz + iz] / pz;
                if (joint - (pxz / pz) * (pyz / pz)).abs() > tol {
                    return false;
                }
            }
        }
    }
    true
}

/// Every d-separation statement of `dag` holds in `j`. Scans every
/// disjoint triple `(X, Z, Y)` with `X`, `Y` nonempty.
pub fn is_imap(dag: &Dag, j: &JointTable, tol: f64) -> Result<bool> {
    Ok(first_imap_violation(dag, j, tol)?.is_none())
}

/// A d-separation statement of `dag` that fails in `j`, if any.
pub fn first_imap_violation(
    dag: &Dag,
    j: &JointTable,
    tol: f64,
) -> Result<Option<(BTreeSet<NodeId>, BTreeSet<NodeId>, BTreeSet<NodeId>)>> {
    let n = dag.node_count();
    if n != j.variables().len() {
        return Err(Error::DimensionMismatch(format!(
            "graph has {n} nodes, joint has {} variables",
            j.variables().len()
        )));
    }
    let total = 4usize.pow(n as u32);
    for code in 0..total {
        let mut x = BTreeSet::new();
        let mut y = BTreeSet::new();
        let mut z = BTreeSet::new();
        let mut c = code;
        for v in 0..n {
            match c % 4 {
                1 => x.insert(NodeId(v)),
                2 => y.insert(NodeId(v)),
                3 => z.insert(NodeId(v)),
                _ => false,
            };
            c /= 4;
        }
        // Symmetric in X and Y: only look at the half where X holds the
        // smallest node.
        match (x.first(), y.first()) {
            (Some(a), Some(b)) if a < b => {}
            _ => continue,
        }
        if dag.d_separated(&x, &z, &y)? && !is_independent(j, &x, &z, &y, tol) {
            return Ok(Some((x, z, y)));
        }
    }
    Ok(None)
}

/// Edges whose removal leaves `dag` an I-map of `j`.
pub fn removable_edges(dag: &Dag, j: &JointTable, tol: f64) -> Result<Vec<(NodeId, NodeId)>> {
    let mut out = Vec::new();
    for &e in dag.edges() {
        if is_imap(&dag.without_edge(e), j, tol)? {
            out.push(e);
        }
    }
    Ok(out)
}

/// An I-map from which no single edge can be deleted.
pub fn is_minimal_imap(dag: &Dag, j: &JointTable, tol: f64) -> Result<bool> {
    if !is_imap(dag, j, tol)? {
        return Err(Error::Precondition("graph is not an I-map of the joint".into()));
    }
    for &e in dag.edges() {
        if is_imap(&dag.without_edge(e), j, tol)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every DAG over `0..n` in which each node `i >= 1` has a nonempty parent
/// set drawn from `0..i`. There are `prod_{k=1}^{n-1} (2^k - 1)` of them.
pub fn enumerate_family(n: usize) -> Result<Vec<Dag>> {
    if !(2..=7).contains(&n) {
        return Err(Error::FamilyOutOfRange(n));
    }
    let count = family_size(n) as usize;
    let mut out = Vec::with_capacity(count);
    // masks[i - 1] is the parent mask of node i; node 1 is the slowest digit.
    let mut masks: Vec<u32> = vec![1; n - 1];
    loop {
        let mut edges = Vec::new();
        for (k, &mask) in masks.iter().enumerate() {
            let child = k + 1;
            for p in 0..child {
                if mask & (1 << p) != 0 {
                    edges.push((NodeId(p), NodeId(child)));
                }
            }
        }
        out.push(Dag::new(n, edges).expect("parents precede children"));

        let mut k = n - 1;
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            let limit = (1u32 << (k + 1)) - 1;
            if masks[k] < limit {
                masks[k] += 1;
                break;
            }
            masks[k] = 1;
        }
    }
}

/// The member of [`enumerate_family`]`(n)` at position `index`, decoded
/// directly so large families can be sampled.
pub fn family_member(n: usize, index: u64) -> Result<Dag> {
    if !(2..=7).contains(&n) {
        return Err(Error::FamilyOutOfRange(n));
    }
    if index >= family_size(n) {
        return Err(Error::Precondition(format!(
            "family member {index} out of range for n = {n}"
        )));
    }
    let mut rest = index;
    let mut edges = Vec::new();
    // Node n-1 is the fastest digit; radix of node i is 2^i - 1.
    for child in (1..n).rev() {
        let radix = (1u64 << child) - 1;
        let mask = rest % radix + 1;
        rest /= radix;
        for p in 0..child {
            if mask & (1 << p) != 0 {
                edges.push((NodeId(p), NodeId(child)));
            }
        }
    }
    Dag::new(n, edges)
}

/// `prod_{k=1}^{n-1} (2^k - 1)`.
pub fn family_size(n: usize) -> u64 {
    (1..n as u32).map(|k| (1u64 << k) - 1).product()
}

/// Names `X1..Xn` (1-based, as in the family's ordering).
pub fn default_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("X{i}")).collect()
}

/// Strictly positive random CPTs for `dag`. Entries are drawn from
/// `[1e-3, 1)` and each row is normalized.
pub fn random_cpts(dag: &Dag, cards: &[usize], seed: u64) -> Result<BayesNet> {
    random_cpts_named(dag, cards, &default_names(dag.node_count()), seed)
}

pub fn random_cpts_named(
    dag: &Dag,
    cards: &[usize],
    names: &[String],
    seed: u64,
) -> Result<BayesNet> {
    if cards.len() != dag.node_count() || names.len() != dag.node_count() {
        return Err(Error::DimensionMismatch(
            "one cardinality and one name per node".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cpts = Vec::with_capacity(cards.len());
    for v in dag.nodes() {
        let parents = dag.parents(v).to_vec();
        let rows: usize = parents.iter().map(|p| cards[p.0]).product();
        let table = (0..rows)
            .map(|_| {
                let raw: Vec<f64> = (0..cards[v.0]).map(|_| rng.gen_range(1e-3..1.0)).collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|p| p / total).collect()
            })
            .collect();
        cpts.push(Cpt {
            child: v,
            parents,
            table,
        });
    }
    let variables = names
        .iter()
        .zip(cards)
        .map(|(n, &c)| Variable::observable(n.clone(), c))
        .collect();
    BayesNet::new(variables, dag.clone(), cpts)
}

// ---------------------------------------------------------------------------
// JSON format

#[derive(Debug, Serialize, Deserialize)]
struct BnFile {
    variables: Vec<VariableJson>,
    #[serde(default)]
    edges: Vec<[NodeRefJson; 2]>,
    cpts: BTreeMap<String, CptJson>,
}

#[derive(Debug, Serialize, Deserialize)]
struct VariableJson {
    name: String,
    cardinality: usize,
    #[serde(default, skip_serializing_if = "is_observable")]
    kind: VariableKind,
}

fn is_observable(k: &VariableKind) -> bool {
    *k == VariableKind::Observable
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum NodeRefJson {
    Index(usize),
    Name(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct CptJson {
    #[serde(default)]
    parents: Vec<String>,
    table: Vec<Vec<f64>>,
}

impl BayesNet {
    pub fn to_json(&self) -> String {
        let names = self.names();
        let file = BnFile {
            variables: self
                .variables
                .iter()
                .map(|v| VariableJson {
                    name: v.name.clone(),
                    cardinality: v.cardinality,
                    kind: v.kind,
                })
                .collect(),
            edges: self
                .dag
                .edges()
                .iter()
                .map(|&(a, b)| {
                    [
                        NodeRefJson::Name(names[a.0].clone()),
                        NodeRefJson::Name(names[b.0].clone()),
                    ]
                })
                .collect(),
            cpts: self
                .cpts
                .iter()
                .map(|c| {
                    (
                        names[c.child.0].clone(),
                        CptJson {
                            parents: c.parents.iter().map(|p| names[p.0].clone()).collect(),
                            table: c.table.clone(),
                        },
                    )
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("serializable") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: BnFile = serde_json::from_str(text)?;
        let variables: Vec<Variable> = file
            .variables
            .iter()
            .map(|v| Variable {
                name: v.name.clone(),
                cardinality: v.cardinality,
                kind: v.kind,
            })
            .collect();
        let index: BTreeMap<&str, usize> = variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.as_str(), i))
            .collect();
        let resolve = |r: &NodeRefJson| -> Result<NodeId> {
            match r {
                NodeRefJson::Index(i) if *i < variables.len() => Ok(NodeId(*i)),
                NodeRefJson::Index(i) => Err(Error::Format(format!("edge endpoint {i} out of range"))),
                NodeRefJson::Name(n) => index
                    .get(n.as_str())
                    .map(|&i| NodeId(i))
                    .ok_or_else(|| Error::Format(format!("unknown variable {n:?}"))),
            }
        };
        let mut edges = Vec::new();
        for [a, b] in &file.edges {
            edges.push((resolve(a)?, resolve(b)?));
        }
        let dag = Dag::new(variables.len(), edges)?;
        let cards: Vec<usize> = variables.iter().map(|v| v.cardinality).collect();

        let mut cpts = Vec::with_capacity(variables.len());
        for (i, var) in variables.iter().enumerate() {
            let cj = file
                .cpts
                .get(&var.name)
                .ok_or_else(|| Error::Format(format!("missing CPT for {:?}", var.name)))?;
            let listed: Vec<NodeId> = cj
                .parents
                .iter()
                .map(|p| resolve(&NodeRefJson::Name(p.clone())))
                .collect::<Result<_>>()?;
            let mut sorted = listed.clone();
            sorted.sort_unstable();
            if sorted != dag.parents(NodeId(i)) {
                return Err(Error::Format(format!(
                    "CPT parents of {:?} do not match the edge list",
                    var.name
                )));
            }
            let listed_cards: Vec<usize> = listed.iter().map(|p| cards[p.0]).collect();
            let sorted_cards: Vec<usize> = sorted.iter().map(|p| cards[p.0]).collect();
            if cj.table.len() != listed_cards.iter().product::<usize>() {
                return Err(Error::Format(format!(
                    "CPT of {:?} has {} rows",
                    var.name,
                    cj.table.len()
                )));
            }
            // Reorder rows so parents are in ascending id order.
            let table = assignments(&sorted_cards)
                .map(|states| {
                    let listed_states: Vec<usize> = listed
                        .iter()
                        .map(|p| states[sorted.iter().position(|s| s == p).unwrap()])
                        .collect();
                    cj.table[flat_index(&listed_cards, &listed_states)].clone()
                })
                .collect();
            cpts.push(Cpt {
                child: NodeId(i),
                parents: sorted,
                table,
            });
        }
        BayesNet::new(variables, dag, cpts)
    }
}

/// DOT for a network with CPT sizes in the labels.
pub fn bn_to_dot(bn: &BayesNet) -> String {
    let mut out = String::from("digraph bn {\n");
    for (i, v) in bn.variables().iter().enumerate() {
        let shape = match v.kind {
            VariableKind::Observable => "ellipse",
            VariableKind::Latent => "box",
        };
        let _ = writeln!(
            out,
            "  n{i} [label=\"{}\", shape={shape}];",
            escape(&v.name)
        );
    }
    for &(a, b) in bn.dag().edges() {
        let _ = writeln!(out, "  n{} -> n{};", a.0, b.0);
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[usize]) -> BTreeSet<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    fn dag(n: usize, e: &[(usize, usize)]) -> Dag {
        Dag::new(n, e.iter().map(|&(a, b)| (NodeId(a), NodeId(b)))).unwrap()
    }

    fn two_node(pa0: f64, pb0_given_a0: f64) -> BayesNet {
        let g = dag(2, &[(0, 1)]);
        BayesNet::new(
            vec![Variable::observable("A", 2), Variable::observable("B", 2)],
            g,
            vec![
                Cpt {
                    child: NodeId(0),
                    parents: vec![],
                    table: vec![vec![pa0, 1.0 - pa0]],
                },
                Cpt {
                    child: NodeId(1),
                    parents: vec![NodeId(0)],
                    table: vec![vec![pb0_given_a0, 1.0 - pb0_given_a0], vec![0.5, 0.5]],
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn joint_entry_is_product_of_cpt_entries() {
        let bn = two_node(0.3, 0.2);
        let j = joint_of_bn(&bn, DEFAULT_SPACE_CAP).unwrap();
        assert!((j.entry(&[0, 0]) - 0.06).abs() < 1e-15);
        assert!((j.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_cpts_give_one_point_mass() {
        let bn = two_node(1.0, 0.0);
        let j = joint_of_bn(&bn, DEFAULT_SPACE_CAP).unwrap();
        let nonzero: Vec<_> = j.probabilities().iter().filter(|&&p| p > 0.0).collect();
        assert_eq!(nonzero, vec![&1.0]);
    }

    #[test]
    fn uniform_cpts_give_uniform_joint() {
        let g = dag(3, &[(0, 1), (1, 2)]);
        let cpts = g
            .nodes()
            .map(|v| Cpt {
                child: v,
                parents: g.parents(v).to_vec(),
                table: vec![vec![0.5, 0.5]; 1 << g.parents(v).len()],
            })
            .collect();
        let vars = default_names(3)
            .into_iter()
            .map(|n| Variable::observable(n, 2))
            .collect();
        let bn = BayesNet::new(vars, g, cpts).unwrap();
        let j = joint_of_bn(&bn, DEFAULT_SPACE_CAP).unwrap();
        assert!(j.probabilities().iter().all(|&p| p == 0.125));
    }

    #[test]
    fn joint_respects_cap() {
        let bn = random_cpts(&Dag::empty(4), &[2; 4], 1).unwrap();
        assert!(matches!(joint_of_bn(&bn, 8), Err(Error::SpaceTooLarge(16, 8))));
    }

    #[test]
    fn independence_oracle_cases() {
        let chain = random_cpts(&dag(3, &[(0, 1), (1, 2)]), &[2, 3, 2], 7).unwrap();
        let j = joint_of_bn(&chain, DEFAULT_SPACE_CAP).unwrap();
        assert!(is_independent(&j, &ids(&[0]), &ids(&[1]), &ids(&[2]), 1e-12));
        assert!(!is_independent(&j, &ids(&[0]), &ids(&[]), &ids(&[2]), 1e-12));

        let coins = random_cpts(&Dag::empty(2), &[2, 2], 3).unwrap();
        let j = joint_of_bn(&coins, DEFAULT_SPACE_CAP).unwrap();
        assert!(is_independent(&j, &ids(&[0]), &ids(&[]), &ids(&[1]), 1e-12));

        let vars = vec![Variable::observable("A", 2), Variable::observable("B", 2)];
        let correlated = JointTable::new(vars, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!(!is_independent(&correlated, &ids(&[0]), &ids(&[]), &ids(&[1]), 1e-9));
    }

    #[test]
    fn imap_cases() {
        let vars = vec![Variable::observable("A", 2), Variable::observable("B", 2)];
        let correlated = JointTable::new(vars, vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        assert!(is_imap(&dag(2, &[(0, 1)]), &correlated, 1e-9).unwrap());
        assert!(!is_imap(&Dag::empty(2), &correlated, 1e-9).unwrap());
        assert!(is_imap(&Dag::empty(3), &correlated, 1e-9).is_err());
    }

    #[test]
    fn minimal_imap_cases() {
        let g = dag(3, &[(0, 1), (1, 2)]);
        let j = joint_of_bn(&random_cpts(&g, &[2; 3], 11).unwrap(), DEFAULT_SPACE_CAP).unwrap();
        assert!(is_minimal_imap(&g, &j, 1e-9).unwrap());

        let coins = joint_of_bn(&random_cpts(&Dag::empty(2), &[2, 2], 5).unwrap(), DEFAULT_SPACE_CAP)
            .unwrap();
        assert!(!is_minimal_imap(&dag(2, &[(0, 1)]), &coins, 1e-9).unwrap());
        assert!(is_minimal_imap(&Dag::empty(2), &coins, 1e-9).unwrap());

        let vars = vec![Variable::observable("A", 2), Variable::observable("B", 2)];
        let correlated = JointTable::new(vars, vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        assert!(matches!(
            is_minimal_imap(&Dag::empty(2), &correlated, 1e-9),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn family_counts_match_product_formula() {
        for (n, expected) in [(2, 1), (3, 3), (4, 21), (5, 315), (6, 9765)] {
            assert_eq!(enumerate_family(n).unwrap().len(), expected, "n = {n}");
            assert_eq!(family_size(n), expected as u64);
        }
        assert_eq!(family_size(7), 615_195);
        assert!(enumerate_family(1).is_err());
        assert!(enumerate_family(8).is_err());
    }

    #[test]
    fn family_members_are_rooted_and_connected() {
        let fam = enumerate_family(5).unwrap();
        let distinct: BTreeSet<_> = fam.iter().map(|d| d.edges().clone()).collect();
        assert_eq!(distinct.len(), fam.len());
        for d in &fam {
            let roots: Vec<_> = d.nodes().filter(|&v| d.parents(v).is_empty()).collect();
            assert_eq!(roots, vec![NodeId(0)]);
            assert!(d.is_connected());
            assert!(d.is_topological(&crate::graph::Ordering::identity(5)));
        }
    }

    #[test]
    fn random_cpts_are_seeded_and_normalized() {
        let g = dag(3, &[(0, 1), (0, 2), (1, 2)]);
        let a = random_cpts(&g, &[2, 3, 2], 42).unwrap();
        let b = random_cpts(&g, &[2, 3, 2], 42).unwrap();
        let c = random_cpts(&g, &[2, 3, 2], 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for cpt in a.cpts() {
            for row in &cpt.table {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|&p| p > 0.0));
            }
        }
    }

    #[test]
    fn invalid_networks_are_rejected() {
        let g = dag(2, &[(0, 1)]);
        let bad_row = vec![
            Cpt {
                child: NodeId(0),
                parents: vec![],
                table: vec![vec![0.5, 0.6]],
            },
            Cpt {
                child: NodeId(1),
                parents: vec![NodeId(0)],
                table: vec![vec![0.5, 0.5]; 2],
            },
        ];
        let vars = vec![Variable::observable("A", 2), Variable::observable("B", 2)];
        assert!(BayesNet::new(vars.clone(), g.clone(), bad_row).is_err());

        let wrong_parents = vec![
            Cpt {
                child: NodeId(0),
                parents: vec![],
                table: vec![vec![0.5, 0.5]],
            },
            Cpt {
                child: NodeId(1),
                parents: vec![],
                table: vec![vec![0.5, 0.5]],
            },
        ];
        assert!(BayesNet::new(vars.clone(), g.clone(), wrong_parents).is_err());

        let dup = vec![Variable::observable("A", 2), Variable::observable("A", 2)];
        let bn = random_cpts(&g, &[2, 2], 0).unwrap();
        assert!(BayesNet::new(dup, g, bn.cpts().to_vec()).is_err());
    }

    #[test]
    fn json_accepts_unsorted_parents_and_index_edges() {
        let text = r#"{
            "variables": [{"name":"A","cardinality":2},{"name":"B","cardinality":2},{"name":"C","cardinality":2}],
            "edges": [[0,2],["B","C"]],
            "cpts": {
                "A": {"parents": [], "table": [[0.3,0.7]]},
                "B": {"table": [[0.6,0.4]]},
                "C": {"parents": ["B","A"], "table": [[0.1,0.9],[0.2,0.8],[0.3,0.7],[0.4,0.6]]}
            }
        }"#;
        let bn = BayesNet::from_json(text).unwrap();
        // Listed order (B, A): row (B=1, A=0) is [0.3, 0.7]; ascending order
        // (A, B) puts it at index 1.
        assert_eq!(bn.cpt(NodeId(2)).table[1], vec![0.3, 0.7]);
        let again = BayesNet::from_json(&bn.to_json()).unwrap();
        assert_eq!(again, bn);
    }

    #[test]
    fn json_rejects_mismatched_parents() {
        let text = r#"{
            "variables": [{"name":"A","cardinality":2},{"name":"B","cardinality":2}],
            "edges": [["A","B"]],
            "cpts": {"A": {"table": [[0.5,0.5]]}, "B": {"table": [[0.5,0.5]]}}
        }"#;
        assert!(matches!(BayesNet::from_json(text), Err(Error::Format(_))));
    }

    #[test]
    fn family_member_matches_enumeration() {
        for n in 2..=5 {
            let all = enumerate_family(n).unwrap();
            for (i, g) in all.iter().enumerate() {
                assert_eq!(&family_member(n, i as u64).unwrap(), g);
            }
            assert!(family_member(n, all.len() as u64).is_err());
        }
    }

}
