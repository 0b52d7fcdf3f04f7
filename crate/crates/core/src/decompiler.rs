//! Sum-product network to Bayesian network decompilation.
//!
//! Sums are grouped into regions (same depth and scope), each region gets a
//! latent variable, the circuit is augmented with the latents' indicators
//! and twin sums, and the latent / observable dependencies are read off the
//! conditioning sums of every node.

use std::collections::{BTreeMap, BTreeSet};

use crate::assign::{assignments, space_size};
use crate::bayesnet::{BayesNet, Cpt, JointTable, Variable, DEFAULT_TOL};
use crate::circuit::{Circuit, CircuitBuilder, CircuitNode, NodeRef, Scope, Stage};
use crate::error::{Error, Result};
use crate::graph::{Dag, NodeId};

/// How sums are grouped into regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegionMode {
    /// Same depth and same scope.
    #[default]
    LayerLocal,
    /// Same scope, whatever the depth: the first depth at which a scope is
    /// seen claims it.
    Global,
}

impl RegionMode {
    pub fn name(self) -> &'static str {
        match self {
            RegionMode::LayerLocal => "layer-local",
            RegionMode::Global => "global",
        }
    }
}

impl std::str::FromStr for RegionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "layer-local" => Ok(RegionMode::LayerLocal),
            "global" => Ok(RegionMode::Global),
            other => Err(Error::Format(format!("unknown region mode `{other}`"))),
        }
    }
}

/// Sums sharing one latent variable.
#[derive(Debug, Clone, PartialEq)]
pub struct SumRegion {
    pub depth: usize,
    pub scope: Scope,
    /// Ascending refs into the decompiled circuit.
    pub members: Vec<NodeRef>,
    /// Number of children of every member.
    pub cardinality: usize,
}

/// Longest-path sum depth of every node: the number of sums strictly above
/// it on the longest path from the root.
pub fn sum_depths(spn: &Circuit) -> Vec<usize> {
    let mut depth = vec![0usize; spn.len()];
    for r in spn.refs().rev() {
        let below = depth[r.0] + usize::from(spn.node(r).is_sum());
        for c in spn.node(r).children() {
            depth[c.0] = depth[c.0].max(below);
        }
    }
    depth
}

pub fn sum_depth(spn: &Circuit, s: NodeRef) -> Result<usize> {
    if !spn.get(s)?.is_sum() {
        return Err(Error::Precondition(format!("{s} is not a sum")));
    }
    Ok(sum_depths(spn)[s.0])
}

/// Sums grouped by depth, shallowest first.
pub fn sum_layers(spn: &Circuit) -> Vec<Vec<NodeRef>> {
    let depth = sum_depths(spn);
    let mut layers: BTreeMap<usize, Vec<NodeRef>> = BTreeMap::new();
    for s in spn.sums() {
        layers.entry(depth[s.0]).or_default().push(s);
    }
    layers.into_values().collect()
}

/// Groups sums into regions, scanning layers top-down. Regions are
/// numbered in order of first appearance.
pub fn assign_latents(spn: &Circuit, mode: RegionMode) -> Result<Vec<SumRegion>> {
    let scopes = spn.scopes();
    let depth = sum_depths(spn);
    let mut index: BTreeMap<(Option<usize>, Scope), usize> = BTreeMap::new();
    let mut regions: Vec<SumRegion> = Vec::new();
    for layer in sum_layers(spn) {
        for s in layer {
            let CircuitNode::Sum { children } = spn.node(s) else {
                unreachable!()
            };
            let key_depth = match mode {
                RegionMode::LayerLocal => Some(depth[s.0]),
                RegionMode::Global => None,
            };
            let key = (key_depth, scopes[s.0].clone());
            match index.get(&key) {
                Some(&k) => {
                    let region = &mut regions[k];
                    if region.cardinality != children.len() {
                        return Err(Error::Decompile(format!(
                            "sums {} and {s} share a region but have {} and {} children",
                            region.members[0],
                            region.cardinality,
                            children.len()
                        )));
                    }
                    region.members.push(s);
                }
                None => {
                    index.insert(key, regions.len());
                    regions.push(SumRegion {
                        depth: depth[s.0],
                        scope: scopes[s.0].clone(),
                        members: vec![s],
                        cardinality: children.len(),
                    });
                }
            }
        }
    }
    Ok(regions)
}

/// A circuit with the latent variables made explicit.
#[derive(Debug, Clone)]
pub struct Augmented {
    pub circuit: Circuit,
    /// Variable id of each region's latent in `circuit`.
    pub latent_vars: Vec<NodeId>,
    /// Where each node of the input circuit ended up.
    pub node_map: Vec<NodeRef>,
    /// `indicators[k][j]` is `λ_{Z_k = j}`.
    pub indicators: Vec<Vec<NodeRef>>,
    /// Twin sum of each region, if one was needed.
    pub twins: Vec<Option<NodeRef>>,
    /// Region of each node of `circuit` that is a region member.
    pub region_of: Vec<Option<usize>>,
}

impl Augmented {
    /// Region member refs in the augmented circuit.
    pub fn members(&self, regions: &[SumRegion], k: usize) -> Vec<NodeRef> {
        regions[k].members.iter().map(|m| self.node_map[m.0]).collect()
    }
}

fn latent_name(k: usize, taken: &BTreeSet<String>) -> String {
    let mut name = format!("Z{}", k + 1);
    while taken.contains(&name) {
        name.insert(0, '_');
    }
    name
}

/// Multiplies `λ_{Z=j}` into the `j`-th child of every region member and
/// twin sums into every sum child that misses a latent its siblings reach.
pub fn augment(spn: &Circuit, regions: &[SumRegion]) -> Result<Augmented> {
    spn.require_stage(Stage::Spn)?;
    let mut region_of = vec![None; spn.len()];
    for (k, r) in regions.iter().enumerate() {
        for &m in &r.members {
            region_of[m.0] = Some(k);
        }
    }
    // Regions with a member in each node's sub-circuit.
    let mut reach: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); spn.len()];
    for r in spn.refs() {
        let mut set: BTreeSet<usize> = spn
            .node(r)
            .children()
            .flat_map(|c| reach[c.0].iter().copied())
            .collect();
        set.extend(region_of[r.0]);
        reach[r.0] = set;
    }

    let base = spn.variable_count();
    let latent_vars: Vec<NodeId> = (0..regions.len()).map(|k| NodeId(base + k)).collect();
    let taken: BTreeSet<String> = spn.variables().iter().map(|v| v.name.clone()).collect();
    let mut variables = spn.variables().to_vec();
    variables.extend(
        regions
            .iter()
            .enumerate()
            .map(|(k, r)| Variable::latent(latent_name(k, &taken), r.cardinality)),
    );

    let mut b = CircuitBuilder::new();
    let indicators: Vec<Vec<NodeRef>> = regions
        .iter()
        .enumerate()
        .map(|(k, r)| {
            (0..r.cardinality)
                .map(|j| b.add(CircuitNode::Indicator { var: latent_vars[k], state: j }))
                .collect()
        })
        .collect();
    let mut twins: Vec<Option<NodeRef>> = vec![None; regions.len()];
    let mut map: Vec<NodeRef> = Vec::with_capacity(spn.len());

    for r in spn.refs() {
        let prov = spn.provenance(r);
        let new = match spn.node(r) {
            CircuitNode::Sum { children } => {
                let all: BTreeSet<usize> = children
                    .iter()
                    .flat_map(|&(c, _)| reach[c.0].iter().copied())
                    .collect();
                let mut out = Vec::with_capacity(children.len());
                for (j, &(c, w)) in children.iter().enumerate() {
                    let mut parts = vec![map[c.0]];
                    if let Some(k) = region_of[r.0] {
                        parts.push(indicators[k][j]);
                    }
                    for &z in all.difference(&reach[c.0]) {
                        let twin = *twins[z].get_or_insert_with(|| {
                            let u = 1.0 / regions[z].cardinality as f64;
                            b.add(CircuitNode::Sum {
                                children: indicators[z].iter().map(|&l| (l, u)).collect(),
                            })
                        });
                        parts.push(twin);
                    }
                    let child = if parts.len() == 1 {
                        parts[0]
                    } else {
                        b.add(CircuitNode::Product { children: parts })
                    };
                    out.push((child, w));
                }
                b.add_with_provenance(CircuitNode::Sum { children: out }, prov)
            }
            CircuitNode::Product { children } => b.add_with_provenance(
                CircuitNode::Product {
                    children: children.iter().map(|c| map[c.0]).collect(),
                },
                prov,
            ),
            other => b.add_with_provenance(other.clone(), prov),
        };
        map.push(new);
    }

    let (circuit, where_) = b.finish_with_map(variables, map[spn.root().0], Stage::Spn);
    let relocate = |r: NodeRef| where_[r.0].expect("augmented node is reachable");
    let node_map: Vec<NodeRef> = map.into_iter().map(relocate).collect();
    let indicators: Vec<Vec<NodeRef>> = indicators
        .into_iter()
        .map(|row| row.into_iter().map(relocate).collect())
        .collect();
    let twins: Vec<Option<NodeRef>> = twins.into_iter().map(|t| t.map(relocate)).collect();
    let mut aug_region = vec![None; circuit.len()];
    for (k, r) in regions.iter().enumerate() {
        for &m in &r.members {
            aug_region[node_map[m.0].0] = Some(k);
        }
    }

    let report = circuit.check_valid();
    if !report.is_valid() {
        return Err(Error::Decompile(format!(
            "augmentation produced an invalid circuit ({} violations, first at {})",
            report.violations.len(),
            report.violations[0].node
        )));
    }
    Ok(Augmented {
        circuit,
        latent_vars,
        node_map,
        indicators,
        twins,
        region_of: aug_region,
    })
}

/// `out[m]` is true iff `target` is `m` or below it.
fn reaches(c: &Circuit, target: Option<NodeRef>) -> Vec<bool> {
    let mut out = vec![false; c.len()];
    let Some(t) = target else { return out };
    for r in c.refs() {
        out[r.0] = r == t || c.node(r).children().any(|ch| out[ch.0]);
    }
    out
}

/// Ancestor sums of `target` whose children do not all reach the same
/// subset of `{target, twin}`.
pub fn conditioning_ancestors(
    aug: &Circuit,
    target: NodeRef,
    twin: Option<NodeRef>,
) -> Result<BTreeSet<NodeRef>> {
    match aug.get(target)? {
        CircuitNode::Sum { .. } | CircuitNode::Terminal { .. } | CircuitNode::Indicator { .. } => {}
        other => {
            return Err(Error::Precondition(format!(
                "{target} is a {} node, not a sum or leaf",
                other.kind_name()
            )))
        }
    }
    let to_target = reaches(aug, Some(target));
    let to_twin = reaches(aug, twin);
    let mut out = BTreeSet::new();
    for s in aug.sums() {
        if s == target || !to_target[s.0] {
            continue;
        }
        let CircuitNode::Sum { children } = aug.node(s) else {
            unreachable!()
        };
        let key = |c: NodeRef| (to_target[c.0], to_twin[c.0]);
        let first = key(children[0].0);
        if children.iter().any(|&(c, _)| key(c) != first) {
            out.insert(s);
        }
    }
    Ok(out)
}

/// What a node of the decompiled network stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnOrigin {
    /// Latent of the region with this index.
    Region(usize),
    /// Observable variable of the input circuit.
    Observable(NodeId),
}

/// Everything produced by decompiling one circuit.
#[derive(Debug, Clone)]
pub struct Decompilation {
    pub mode: RegionMode,
    pub regions: Vec<SumRegion>,
    pub augmented: Augmented,
    /// Latents first (by region), then observables by ascending id.
    pub bn: BayesNet,
    pub origins: Vec<BnOrigin>,
}

impl Decompilation {
    pub fn dag(&self) -> &Dag {
        self.bn.dag()
    }

    /// BN node of region `k`'s latent.
    pub fn latent_node(&self, k: usize) -> NodeId {
        NodeId(k)
    }

    fn augmented_var(&self, node: NodeId) -> NodeId {
        match self.origins[node.0] {
            BnOrigin::Region(k) => self.augmented.latent_vars[k],
            BnOrigin::Observable(x) => x,
        }
    }

    /// Joint over the BN's nodes defined by the augmented circuit.
    pub fn augmented_joint(&self, cap: u128) -> Result<JointTable> {
        let cards = self.bn.cardinalities();
        let size = space_size(&cards).unwrap_or(u128::MAX);
        if size > cap {
            return Err(Error::SpaceTooLarge(size, cap));
        }
        let c = &self.augmented.circuit;
        let targets: Vec<NodeId> = self.bn.dag().nodes().map(|v| self.augmented_var(v)).collect();
        let mut evidence = vec![None; c.variable_count()];
        let mut probabilities = Vec::with_capacity(size as usize);
        for states in assignments(&cards) {
            for (v, s) in targets.iter().zip(&states) {
                evidence[v.0] = Some(*s);
            }
            probabilities.push(c.evaluate(&evidence)?);
        }
        JointTable::new(self.bn.variables().to_vec(), probabilities)
    }

    /// Regions owning a sum strictly above some member of region `k`.
    pub fn ancestor_regions(&self, k: usize) -> BTreeSet<usize> {
        let c = &self.augmented.circuit;
        let mut below = vec![false; c.len()];
        for m in self.augmented.members(&self.regions, k) {
            below[m.0] = true;
        }
        let mut reach = vec![false; c.len()];
        for r in c.refs() {
            reach[r.0] = below[r.0] || c.node(r).children().any(|ch| reach[ch.0]);
        }
        c.refs()
            .filter(|&r| reach[r.0] && !below[r.0])
            .filter_map(|r| self.augmented.region_of[r.0])
            .collect()
    }
}

/// Decompiles with the default region mode.
pub fn spn2bn(spn: &Circuit) -> Result<Decompilation> {
    spn2bn_with(spn, RegionMode::default())
}

pub fn spn2bn_with(spn: &Circuit, mode: RegionMode) -> Result<Decompilation> {
    spn.require_stage(Stage::Spn)?;
    let report = spn.check_valid();
    if !report.is_valid() {
        return Err(Error::Decompile(format!(
            "input circuit is not complete and decomposable ({} violations)",
            report.violations.len()
        )));
    }
    let regions = assign_latents(spn, mode)?;
    let augmented = augment(spn, &regions)?;
    let (dag, origins) = build_imap(spn, &regions, &augmented)?;
    let bn = extract_cpts(spn, &regions, &augmented, dag, &origins)?;
    Ok(Decompilation {
        mode,
        regions,
        augmented,
        bn,
        origins,
    })
}

/// Observable leaves of the augmented circuit, grouped by variable.
fn observable_leaves(aug: &Augmented, observable_count: usize) -> BTreeMap<NodeId, Vec<NodeRef>> {
    let mut out: BTreeMap<NodeId, Vec<NodeRef>> = BTreeMap::new();
    for r in aug.circuit.refs() {
        match aug.circuit.node(r) {
            CircuitNode::Terminal { var, .. } | CircuitNode::Indicator { var, .. }
                if var.0 < observable_count =>
            {
                out.entry(*var).or_default().push(r);
            }
            _ => {}
        }
    }
    out
}

/// Structure of the decompiled network: an edge from the latent of every
/// conditioning sum of a node to that node's BN variable.
pub fn build_imap(
    spn: &Circuit,
    regions: &[SumRegion],
    aug: &Augmented,
) -> Result<(Dag, Vec<BnOrigin>)> {
    let leaves = observable_leaves(aug, spn.variable_count());
    let mut origins: Vec<BnOrigin> = (0..regions.len()).map(BnOrigin::Region).collect();
    let mut observable_node: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for &x in leaves.keys() {
        observable_node.insert(x, NodeId(origins.len()));
        origins.push(BnOrigin::Observable(x));
    }

    let mut targets: Vec<(NodeRef, Option<NodeRef>, NodeId)> = Vec::new();
    for k in 0..regions.len() {
        for m in aug.members(regions, k) {
            targets.push((m, aug.twins[k], NodeId(k)));
        }
    }
    for (x, refs) in &leaves {
        for &r in refs {
            targets.push((r, None, observable_node[x]));
        }
    }

    let mut edges = BTreeSet::new();
    for (target, twin, node) in targets {
        for s in conditioning_ancestors(&aug.circuit, target, twin)? {
            let k = aug.region_of[s.0]
                .ok_or_else(|| Error::Decompile(format!("conditioning sum {s} has no latent")))?;
            if NodeId(k) == node {
                return Err(Error::Decompile(format!(
                    "latent Z{} conditions its own region; the region mode merged nested sums",
                    k + 1
                )));
            }
            edges.insert((NodeId(k), node));
        }
    }
    let dag = Dag::new(origins.len(), edges)
        .map_err(|e| Error::Decompile(format!("decompiled structure is not a DAG: {e}")))?;
    Ok((dag, origins))
}

/// Nodes reachable from the root when every sum of a region in `fixed`
/// only follows the child selected for its latent.
fn constrained_reach(aug: &Augmented, fixed: &BTreeMap<usize, usize>) -> Vec<bool> {
    let c = &aug.circuit;
    let mut seen = vec![false; c.len()];
    seen[c.root().0] = true;
    for r in c.refs().rev() {
        if !seen[r.0] {
            continue;
        }
        match (c.node(r), aug.region_of[r.0].and_then(|k| fixed.get(&k))) {
            (CircuitNode::Sum { children }, Some(&j)) => seen[children[j].0 .0] = true,
            (node, _) => {
                for ch in node.children() {
                    seen[ch.0] = true;
                }
            }
        }
    }
    seen
}

fn agree(rows: &[Vec<f64>]) -> bool {
    rows.windows(2).all(|w| {
        w[0].len() == w[1].len()
            && w[0].iter().zip(&w[1]).all(|(a, b)| (a - b).abs() <= DEFAULT_TOL)
    })
}

/// Conditional tables read off the weights and leaves selected by each
/// assignment of a node's parents.
pub fn extract_cpts(
    spn: &Circuit,
    regions: &[SumRegion],
    aug: &Augmented,
    dag: Dag,
    origins: &[BnOrigin],
) -> Result<BayesNet> {
    let c = &aug.circuit;
    let mut variables = Vec::with_capacity(origins.len());
    for origin in origins {
        variables.push(match *origin {
            BnOrigin::Region(k) => c.variables()[aug.latent_vars[k].0].clone(),
            BnOrigin::Observable(x) => {
                let mut v = spn.variables()[x.0].clone();
                v.kind = crate::bayesnet::VariableKind::Observable;
                v
            }
        });
    }
    let cards: Vec<usize> = variables.iter().map(|v| v.cardinality).collect();

    let mut cpts = Vec::with_capacity(origins.len());
    for v in dag.nodes() {
        let parents = dag.parents(v).to_vec();
        let parent_regions: Vec<usize> = parents
            .iter()
            .map(|p| match origins[p.0] {
                BnOrigin::Region(k) => Ok(k),
                BnOrigin::Observable(_) => Err(Error::Decompile("observable parent".into())),
            })
            .collect::<Result<_>>()?;
        let pc: Vec<usize> = parents.iter().map(|p| cards[p.0]).collect();
        let mut table = Vec::new();
        for states in assignments(&pc) {
            let fixed: BTreeMap<usize, usize> =
                parent_regions.iter().copied().zip(states.iter().copied()).collect();
            let seen = constrained_reach(aug, &fixed);
            let mut rows: Vec<Vec<f64>> = Vec::new();
            match origins[v.0] {
                BnOrigin::Region(k) => {
                    for m in aug.members(regions, k) {
                        if seen[m.0] {
                            let CircuitNode::Sum { children } = c.node(m) else {
                                unreachable!()
                            };
                            rows.push(children.iter().map(|&(_, w)| w).collect());
                        }
                    }
                    if let Some(t) = aug.twins[k] {
                        if seen[t.0] {
                            rows.push(vec![1.0 / cards[v.0] as f64; cards[v.0]]);
                        }
                    }
                    if rows.is_empty() {
                        rows.push(vec![1.0 / cards[v.0] as f64; cards[v.0]]);
                    }
                }
                BnOrigin::Observable(x) => {
                    for r in c.refs().filter(|r| seen[r.0]) {
                        match c.node(r) {
                            CircuitNode::Terminal { var, distribution } if *var == x => {
                                rows.push(distribution.clone())
                            }
                            CircuitNode::Indicator { var, state } if *var == x => {
                                let mut row = vec![0.0; cards[v.0]];
                                row[*state] = 1.0;
                                rows.push(row);
                            }
                            _ => {}
                        }
                    }
                    if rows.is_empty() {
                        return Err(Error::Decompile(format!(
                            "no leaf of {} is selected by a parent assignment",
                            variables[v.0].name
                        )));
                    }
                }
            }
            if !agree(&rows) {
                return Err(Error::Decompile(format!(
                    "parents of {} do not determine its distribution (assignment {states:?})",
                    variables[v.0].name
                )));
            }
            table.push(rows.swap_remove(0));
        }
        cpts.push(Cpt {
            child: v,
            parents,
            table,
        });
    }
    BayesNet::new(variables, dag, cpts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayesnet::{joint_of_bn, DEFAULT_SPACE_CAP};
    use crate::compiler::{bn2spn, internal_variables};
    use crate::models;

    fn compiled_hmm(seed: u64) -> Circuit {
        let bn = models::hmm(3, seed).unwrap();
        bn2spn(
            &bn,
            &bn.dag().default_reverse_topological(),
            &internal_variables(&bn),
        )
        .unwrap()
    }

    fn edge_names(d: &Decompilation) -> BTreeSet<(String, String)> {
        let names = d.bn.names();
        d.dag()
            .edges()
            .iter()
            .map(|&(a, b)| (names[a.0].clone(), names[b.0].clone()))
            .collect()
    }

    fn set(pairs: &[(&str, &str)]) -> BTreeSet<(String, String)> {
        pairs.iter().map(|&(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn hmm_depths_and_layers() {
        let spn = compiled_hmm(1);
        assert_eq!(sum_depth(&spn, spn.root()).unwrap(), 0);
        let layers = sum_layers(&spn);
        let sizes: Vec<usize> = layers.iter().map(|l| l.len()).collect();
        assert_eq!(sizes, vec![1, 2, 2]);
        for &s in &layers[2] {
            assert_eq!(sum_depth(&spn, s).unwrap(), 2);
        }
        let leaf = spn
            .refs()
            .find(|&r| matches!(spn.node(r), CircuitNode::Terminal { .. }))
            .unwrap();
        assert!(sum_depth(&spn, leaf).is_err());
    }

    #[test]
    fn hmm_regions() {
        let spn = compiled_hmm(1);
        let regions = assign_latents(&spn, RegionMode::LayerLocal).unwrap();
        assert_eq!(regions.len(), 3);
        let sizes: Vec<usize> = regions.iter().map(|r| r.members.len()).collect();
        assert_eq!(sizes, vec![1, 2, 2]);
        assert!(regions.iter().all(|r| r.cardinality == 2));
        let global = assign_latents(&spn, RegionMode::Global).unwrap();
        assert_eq!(global, regions);
    }

    #[test]
    fn hmm_decompiles_to_chain_with_emissions() {
        let d = spn2bn(&compiled_hmm(2)).unwrap();
        assert_eq!(d.bn.names(), vec!["Z1", "Z2", "Z3", "O1", "O2", "O3"]);
        assert_eq!(
            edge_names(&d),
            set(&[
                ("Z1", "Z2"),
                ("Z2", "Z3"),
                ("Z1", "O1"),
                ("Z2", "O2"),
                ("Z3", "O3")
            ])
        );
        assert!(d.augmented.twins.iter().all(Option::is_none));
    }

    #[test]
    fn augmentation_preserves_observable_marginal() {
        let spn = compiled_hmm(3);
        let d = spn2bn(&spn).unwrap();
        let aug = &d.augmented.circuit;
        for s in assignments(&[3; 3]) {
            let mut e = vec![None; spn.variable_count()];
            for (k, &x) in s.iter().enumerate() {
                e[3 + k] = (x < 2).then_some(x);
            }
            let mut ea = e.clone();
            ea.resize(aug.variable_count(), None);
            assert!((spn.evaluate(&e).unwrap() - aug.evaluate(&ea).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn cpts_multiply_to_augmented_joint() {
        let d = spn2bn(&compiled_hmm(4)).unwrap();
        let aug = d.augmented_joint(DEFAULT_SPACE_CAP).unwrap();
        let prod = joint_of_bn(&d.bn, DEFAULT_SPACE_CAP).unwrap();
        for (a, b) in aug.probabilities().iter().zip(prod.probabilities()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn root_latent_cpt_is_root_weights() {
        let spn = compiled_hmm(5);
        let d = spn2bn(&spn).unwrap();
        let CircuitNode::Sum { children } = spn.node(spn.root()) else {
            panic!()
        };
        let w: Vec<f64> = children.iter().map(|&(_, w)| w).collect();
        assert!(d.dag().parents(NodeId(0)).is_empty());
        assert_eq!(d.bn.cpt(NodeId(0)).table, vec![w]);
    }

    fn two_terminal_sum() -> Circuit {
        let mut b = CircuitBuilder::new();
        let t0 = b.add(CircuitNode::Terminal { var: NodeId(0), distribution: vec![0.9, 0.1] });
        let t1 = b.add(CircuitNode::Terminal { var: NodeId(0), distribution: vec![0.2, 0.8] });
        let s = b.add(CircuitNode::Sum { children: vec![(t0, 0.4), (t1, 0.6)] });
        b.finish(vec![Variable::observable("X", 2)], s, Stage::Spn)
    }

    #[test]
    fn single_sum_gives_latent_parent() {
        let spn = two_terminal_sum();
        let d = spn2bn(&spn).unwrap();
        assert_eq!(d.regions.len(), 1);
        assert_eq!(d.regions[0].cardinality, 2);
        assert_eq!(edge_names(&d), set(&[("Z1", "X")]));
        assert_eq!(d.bn.cpt(NodeId(1)).table, vec![vec![0.9, 0.1], vec![0.2, 0.8]]);
        assert!(d.augmented.twins[0].is_none());
        let t = d
            .augmented
            .circuit
            .refs()
            .find(|&r| matches!(d.augmented.circuit.node(r), CircuitNode::Terminal { .. }))
            .unwrap();
        let cond = conditioning_ancestors(&d.augmented.circuit, t, None).unwrap();
        assert_eq!(cond, BTreeSet::from([d.augmented.circuit.root()]));
    }

    #[test]
    fn single_terminal_is_one_node() {
        let mut b = CircuitBuilder::new();
        let t = b.add(CircuitNode::Terminal { var: NodeId(0), distribution: vec![0.3, 0.7] });
        let spn = b.finish(vec![Variable::observable("X", 2)], t, Stage::Spn);
        let d = spn2bn(&spn).unwrap();
        assert_eq!(d.bn.len(), 1);
        assert_eq!(d.dag().edge_count(), 0);
        assert_eq!(d.bn.cpt(NodeId(0)).table, vec![vec![0.3, 0.7]]);
    }

    #[test]
    fn single_child_root_never_conditions() {
        let mut b = CircuitBuilder::new();
        let t = b.add(CircuitNode::Terminal { var: NodeId(0), distribution: vec![0.3, 0.7] });
        let s = b.add(CircuitNode::Sum { children: vec![(t, 1.0)] });
        let spn = b.finish(vec![Variable::observable("X", 2)], s, Stage::Spn);
        let d = spn2bn(&spn).unwrap();
        assert_eq!(d.regions[0].cardinality, 1);
        assert_eq!(d.dag().edge_count(), 0);
    }

    #[test]
    fn same_scope_sums_in_one_layer_share_a_latent() {
        let mut b = CircuitBuilder::new();
        let x0 = b.add(CircuitNode::Indicator { var: NodeId(0), state: 0 });
        let x1 = b.add(CircuitNode::Indicator { var: NodeId(0), state: 1 });
        let ya = b.add(CircuitNode::Terminal { var: NodeId(1), distribution: vec![0.5, 0.5] });
        let yb = b.add(CircuitNode::Terminal { var: NodeId(1), distribution: vec![0.1, 0.9] });
        let s1 = b.add(CircuitNode::Sum { children: vec![(ya, 0.3), (yb, 0.7)] });
        let s2 = b.add(CircuitNode::Sum { children: vec![(ya, 0.6), (yb, 0.4)] });
        let p1 = b.add(CircuitNode::Product { children: vec![x0, s1] });
        let p2 = b.add(CircuitNode::Product { children: vec![x1, s2] });
        let root = b.add(CircuitNode::Sum { children: vec![(p1, 0.5), (p2, 0.5)] });
        let vars = vec![Variable::observable("X", 2), Variable::observable("Y", 2)];
        let spn = b.finish(vars, root, Stage::Spn);
        let regions = assign_latents(&spn, RegionMode::LayerLocal).unwrap();
        assert_eq!(regions.len(), 2);
        assert_eq!(regions[1].members.len(), 2);
        let d = spn2bn(&spn).unwrap();
        assert_eq!(
            edge_names(&d),
            set(&[("Z1", "Z2"), ("Z1", "X"), ("Z2", "Y")])
        );
        assert_eq!(d.bn.cpt(NodeId(1)).table, vec![vec![0.3, 0.7], vec![0.6, 0.4]]);
    }

    #[test]
    fn mismatched_child_counts_are_rejected() {
        let mut b = CircuitBuilder::new();
        let x0 = b.add(CircuitNode::Indicator { var: NodeId(0), state: 0 });
        let x1 = b.add(CircuitNode::Indicator { var: NodeId(0), state: 1 });
        let ya = b.add(CircuitNode::Terminal { var: NodeId(1), distribution: vec![0.5, 0.5] });
        let yb = b.add(CircuitNode::Terminal { var: NodeId(1), distribution: vec![0.1, 0.9] });
        let s1 = b.add(CircuitNode::Sum { children: vec![(ya, 0.3), (yb, 0.7)] });
        let s2 = b.add(CircuitNode::Sum { children: vec![(ya, 1.0)] });
        let p1 = b.add(CircuitNode::Product { children: vec![x0, s1] });
        let p2 = b.add(CircuitNode::Product { children: vec![x1, s2] });
        let root = b.add(CircuitNode::Sum { children: vec![(p1, 0.5), (p2, 0.5)] });
        let vars = vec![Variable::observable("X", 2), Variable::observable("Y", 2)];
        let spn = b.finish(vars, root, Stage::Spn);
        assert!(matches!(
            assign_latents(&spn, RegionMode::LayerLocal),
            Err(Error::Decompile(_))
        ));
    }

    #[test]
    fn twin_attached_where_a_child_misses_the_region() {
        // Root sum: one child holds a sum over Y, the other a terminal.
        let mut b = CircuitBuilder::new();
        let ya = b.add(CircuitNode::Terminal { var: NodeId(0), distribution: vec![0.5, 0.5] });
        let yb = b.add(CircuitNode::Terminal { var: NodeId(0), distribution: vec![0.1, 0.9] });
        let yc = b.add(CircuitNode::Terminal { var: NodeId(0), distribution: vec![0.7, 0.3] });
        let inner = b.add(CircuitNode::Sum { children: vec![(ya, 0.2), (yb, 0.8)] });
        let root = b.add(CircuitNode::Sum { children: vec![(inner, 0.4), (yc, 0.6)] });
        let spn = b.finish(vec![Variable::observable("Y", 2)], root, Stage::Spn);
        let d = spn2bn(&spn).unwrap();
        assert!(d.augmented.twins[1].is_some());
        assert!(d.augmented.circuit.check_valid().is_valid());
        assert_eq!(
            edge_names(&d),
            set(&[("Z1", "Z2"), ("Z1", "Y"), ("Z2", "Y")])
        );
        // Z2 is uniform when the root picks the twin side.
        assert_eq!(d.bn.cpt(NodeId(1)).table, vec![vec![0.2, 0.8], vec![0.5, 0.5]]);
        let aug = d.augmented_joint(DEFAULT_SPACE_CAP).unwrap();
        let prod = joint_of_bn(&d.bn, DEFAULT_SPACE_CAP).unwrap();
        for (a, b) in aug.probabilities().iter().zip(prod.probabilities()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conditioning_rejects_products() {
        let d = spn2bn(&compiled_hmm(1)).unwrap();
        let c = &d.augmented.circuit;
        let p = c.refs().find(|&r| c.node(r).is_product()).unwrap();
        assert!(conditioning_ancestors(c, p, None).is_err());
    }

    #[test]
    fn region_mode_parses() {
        assert_eq!("global".parse::<RegionMode>().unwrap(), RegionMode::Global);
        assert!("other".parse::<RegionMode>().is_err());
    }
}
