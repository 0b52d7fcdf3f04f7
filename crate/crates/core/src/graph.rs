//! Directed acyclic graphs over variable indices.
//!
//! This is the structural layer shared by Bayesian networks, the compiler
//! and the decompiler: relatives, v-structures, d-separation, orderings and
//! the moral closure. Iteration is always in ascending [`NodeId`] order so
//! every result is reproducible.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a vertex (and of the variable it stands for).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i)
    }
}

pub type Edge = (NodeId, NodeId);

/// A directed acyclic graph stored as an edge set, with adjacency lists
/// derived from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    node_count: usize,
    edges: BTreeSet<Edge>,
    parents: Vec<Vec<NodeId>>,
    children: Vec<Vec<NodeId>>,
}

/// Parents, children, ancestors and descendants of one vertex.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Relatives {
    pub parents: BTreeSet<NodeId>,
    pub children: BTreeSet<NodeId>,
    pub ancestors: BTreeSet<NodeId>,
    pub descendants: BTreeSet<NodeId>,
}

impl Dag {
    /// Builds a DAG, rejecting self-loops, duplicate edges and cycles.
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (from, to) in edges {
            for v in [from, to] {
                if v.0 >= node_count {
                    return Err(Error::NodeOutOfRange(v, node_count));
                }
            }
            if from == to {
                return Err(Error::SelfLoop(from));
            }
            if !set.insert((from, to)) {
                return Err(Error::DuplicateEdge(from, to));
            }
        }
        let dag = Self::from_edge_set(node_count, set);
        if dag.topological_order().is_none() {
            return Err(Error::Cycle);
        }
        Ok(dag)
    }

    /// A graph with no edges.
    pub fn empty(node_count: usize) -> Self {
        Self::from_edge_set(node_count, BTreeSet::new())
    }

    fn from_edge_set(node_count: usize, edges: BTreeSet<Edge>) -> Self {
        let mut parents = vec![Vec::new(); node_count];
        let mut children = vec![Vec::new(); node_count];
        for &(from, to) in &edges {
            parents[to.0].push(from);
            children[from.0].push(to);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }
        Dag {
            node_count,
            edges,
            parents,
            children,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.node_count).map(NodeId)
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.edges.contains(&(from, to))
    }

    pub fn adjacent(&self, a: NodeId, b: NodeId) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    /// Sorted parents of `v`. Panics if `v` is out of range.
    pub fn parents(&self, v: NodeId) -> &[NodeId] {
        &self.parents[v.0]
    }

    /// Sorted children of `v`. Panics if `v` is out of range.
    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.children[v.0]
    }

    pub fn check_node(&self, v: NodeId) -> Result<()> {
        if v.0 < self.node_count {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange(v, self.node_count))
        }
    }

    /// Returns a copy with `edge` removed (no-op if absent).
    pub fn without_edge(&self, edge: Edge) -> Dag {
        let mut edges = self.edges.clone();
        edges.remove(&edge);
        Self::from_edge_set(self.node_count, edges)
    }

    /// Returns a copy with the extra edges added; fails if a cycle appears.
    pub fn with_edges(&self, extra: impl IntoIterator<Item = Edge>) -> Result<Dag> {
        let mut edges = self.edges.clone();
        edges.extend(extra);
        Dag::new(self.node_count, edges)
    }

    pub fn relatives(&self, v: NodeId) -> Result<Relatives> {
        self.check_node(v)?;
        Ok(Relatives {
            parents: self.parents(v).iter().copied().collect(),
            children: self.children(v).iter().copied().collect(),
            ancestors: self.closure_from(v, |u| self.parents(u)),
            descendants: self.closure_from(v, |u| self.children(u)),
        })
    }

    pub fn ancestors(&self, v: NodeId) -> BTreeSet<NodeId> {
        self.closure_from(v, |u| self.parents(u))
    }

    pub fn descendants(&self, v: NodeId) -> BTreeSet<NodeId> {
        self.closure_from(v, |u| self.children(u))
    }

    fn closure_from<'a, F>(&'a self, v: NodeId, next: F) -> BTreeSet<NodeId>
    where
        F: Fn(NodeId) -> &'a [NodeId],
    {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<NodeId> = next(v).to_vec();
        while let Some(u) = stack.pop() {
            if seen.insert(u) {
                stack.extend_from_slice(next(u));
            }
        }
        seen
    }

    /// Every `(p1, collider, p2)` with `p1 < p2` both parents of `collider`
    /// and not adjacent to each other.
    pub fn v_structures(&self) -> BTreeSet<(NodeId, NodeId, NodeId)> {
        let mut out = BTreeSet::new();
        for c in self.nodes() {
            let pa = self.parents(c);
            for (i, &p1) in pa.iter().enumerate() {
                for &p2 in &pa[i + 1..] {
                    if !self.adjacent(p1, p2) {
                        out.insert((p1, c, p2));
                    }
                }
            }
        }
        out
    }

    /// Smallest topological order in lexicographic terms (Kahn's algorithm
    /// with a min-queue), or `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Ordering> {
        let mut indegree: Vec<usize> = (0..self.node_count).map(|v| self.parents[v].len()).collect();
        let mut ready: BTreeSet<NodeId> = self.nodes().filter(|v| indegree[v.0] == 0).collect();
        let mut seq = Vec::with_capacity(self.node_count);
        while let Some(v) = ready.pop_first() {
            seq.push(v);
            for &c in self.children(v) {
                indegree[c.0] -= 1;
                if indegree[c.0] == 0 {
                    ready.insert(c);
                }
            }
        }
        (seq.len() == self.node_count).then_some(Ordering(seq))
    }

    /// The reverse of [`Dag::topological_order`]: the default elimination
    /// order of the compiler.
    pub fn default_reverse_topological(&self) -> Ordering {
        self.topological_order()
            .expect("Dag invariant: acyclic")
            .reversed()
    }

    /// All orderings that place every node after all of its children, in
    /// lexicographic order.
    pub fn reverse_topological_orderings(&self) -> Vec<Ordering> {
        let mut out = Vec::new();
        let mut placed = vec![false; self.node_count];
        let mut seq = Vec::with_capacity(self.node_count);
        self.extend_reverse_topological(&mut placed, &mut seq, &mut out);
        out
    }

    fn extend_reverse_topological(
        &self,
        placed: &mut [bool],
        seq: &mut Vec<NodeId>,
        out: &mut Vec<Ordering>,
    ) {
        if seq.len() == self.node_count {
            out.push(Ordering(seq.clone()));
            return;
        }
        for v in self.nodes() {
            if placed[v.0] || self.children(v).iter().any(|c| !placed[c.0]) {
                continue;
            }
            placed[v.0] = true;
            seq.push(v);
            self.extend_reverse_topological(placed, seq, out);
            seq.pop();
            placed[v.0] = false;
        }
    }

    /// Whether `order` lists every node before all of its children.
    pub fn is_topological(&self, order: &Ordering) -> bool {
        self.check_topological(order).is_ok()
    }

    fn check_topological(&self, order: &Ordering) -> Result<()> {
        if order.len() != self.node_count {
            return Err(Error::NotAPermutation(self.node_count));
        }
        let pos = order.positions();
        for &(from, to) in &self.edges {
            if pos[from.0] > pos[to.0] {
                return Err(Error::NotTopological(from, to));
            }
        }
        Ok(())
    }

    /// Linear-time d-separation test by reachability along active trails.
    ///
    /// Returns true iff `z` d-separates `x` from `y`.
    pub fn d_separated(
        &self,
        x: &BTreeSet<NodeId>,
        z: &BTreeSet<NodeId>,
        y: &BTreeSet<NodeId>,
    ) -> Result<bool> {
        for v in x.iter().chain(y).chain(z) {
            self.check_node(*v)?;
        }
        if !x.is_disjoint(y) || !x.is_disjoint(z) || !y.is_disjoint(z) {
            return Err(Error::OverlappingSets);
        }
        if x.is_empty() || y.is_empty() {
            return Err(Error::Precondition("x and y must be nonempty".into()));
        }

        let n = self.node_count;
        let mut in_z = vec![false; n];
        for v in z {
            in_z[v.0] = true;
        }
        // Z together with its ancestors: colliders here are opened.
        let mut opens = in_z.clone();
        let mut stack: Vec<NodeId> = z.iter().copied().collect();
        while let Some(v) = stack.pop() {
            for &p in self.parents(v) {
                if !opens[p.0] {
                    opens[p.0] = true;
                    stack.push(p);
                }
            }
        }

        // (node, arrived_from_child): travelling "up" vs "down".
        let mut visited = vec![[false; 2]; n];
        let mut queue: VecDeque<(NodeId, bool)> = x.iter().map(|&v| (v, true)).collect();
        while let Some((v, up)) = queue.pop_front() {
            let slot = usize::from(up);
            if visited[v.0][slot] {
                continue;
            }
            visited[v.0][slot] = true;
            if !in_z[v.0] && y.contains(&v) {
                return Ok(false);
            }
            if up {
                if !in_z[v.0] {
                    queue.extend(self.parents(v).iter().map(|&p| (p, true)));
                    queue.extend(self.children(v).iter().map(|&c| (c, false)));
                }
            } else {
                if !in_z[v.0] {
                    queue.extend(self.children(v).iter().map(|&c| (c, false)));
                }
                if opens[v.0] {
                    queue.extend(self.parents(v).iter().map(|&p| (p, true)));
                }
            }
        }
        Ok(true)
    }

    /// Single pass of directed moralization edges: for every pair of
    /// non-adjacent parents sharing a child, the edge from the earlier to
    /// the later one under `prec`.
    pub fn moralization_edges(&self, prec: &Ordering) -> Result<BTreeSet<Edge>> {
        self.check_topological(prec)?;
        let pos = prec.positions();
        let mut out = BTreeSet::new();
        for c in self.nodes() {
            let pa = self.parents(c);
            for (i, &a) in pa.iter().enumerate() {
                for &b in &pa[i + 1..] {
                    if self.adjacent(a, b) {
                        continue;
                    }
                    out.insert(if pos[a.0] < pos[b.0] { (a, b) } else { (b, a) });
                }
            }
        }
        Ok(out)
    }

    /// Fixpoint of adding moralization edges under `prec`.
    pub fn moral_closure(&self, prec: &Ordering) -> Result<Dag> {
        let mut current = self.clone();
        loop {
            let extra = current.moralization_edges(prec)?;
            if extra.is_empty() {
                return Ok(current);
            }
            current = current.with_edges(extra)?;
        }
    }

    /// Whether the underlying undirected graph is connected.
    pub fn is_connected(&self) -> bool {
        if self.node_count == 0 {
            return true;
        }
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![NodeId(0)];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &u in self.parents(v).iter().chain(self.children(v)) {
                if !seen[u.0] {
                    seen[u.0] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == self.node_count
    }

    /// DOT rendering; nodes are emitted in index order, edges sorted.
    pub fn to_dot(&self, names: Option<&[String]>) -> String {
        let label = |v: NodeId| match names {
            Some(names) => names[v.0].clone(),
            None => format!("X{}", v.0),
        };
        let mut out = String::from("digraph bn {\n");
        for v in self.nodes() {
            let _ = writeln!(out, "  n{} [label=\"{}\"];", v.0, escape(&label(v)));
        }
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "  n{} -> n{};", a.0, b.0);
        }
        out.push_str("}\n");
        out
    }
}

pub(crate) fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// A permutation of node ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ordering(Vec<NodeId>);

impl Ordering {
    /// Validates that `seq` is a permutation of `0..node_count`.
    pub fn new(seq: Vec<NodeId>, node_count: usize) -> Result<Self> {
        if seq.len() != node_count {
            return Err(Error::NotAPermutation(node_count));
        }
        let mut seen = vec![false; node_count];
        for v in &seq {
            if v.0 >= node_count || std::mem::replace(&mut seen[v.0], true) {
                return Err(Error::NotAPermutation(node_count));
            }
        }
        Ok(Ordering(seq))
    }

    pub fn identity(node_count: usize) -> Self {
        Ordering((0..node_count).map(NodeId).collect())
    }

    pub fn as_slice(&self) -> &[NodeId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.0.iter().copied()
    }

    pub fn reversed(&self) -> Ordering {
        Ordering(self.0.iter().rev().copied().collect())
    }

    /// `positions()[v]` is the index of `v` in the sequence.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.0.len()];
        for (i, v) in self.0.iter().enumerate() {
            pos[v.0] = i;
        }
        pos
    }
}

impl fmt::Display for Ordering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.0.to_string()).collect();
        f.write_str(&parts.join(" "))
    }
}
