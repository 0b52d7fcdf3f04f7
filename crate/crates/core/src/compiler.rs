//! Bayesian network to sum-product network compilation.
//!
//! The pipeline is: variable elimination into an arithmetic circuit,
//! folding of parameters into sum weights, marginalization of a chosen
//! variable set, then the terminal / flatten / lump rewrites iterated to a
//! fixpoint.

use std::collections::{BTreeSet, HashMap};

use crate::assign::{assignments, flat_index};
use crate::bayesnet::{BayesNet, DEFAULT_TOL};
use crate::circuit::{Circuit, CircuitBuilder, CircuitNode, NodeRef, Stage};
use crate::error::{Error, Result};
use crate::graph::{NodeId, Ordering};

/// Pass cap for [`simplify_fixpoint`].
pub const MAX_SIMPLIFY_PASSES: usize = 1000;

/// A factor of variable elimination whose entries are circuit nodes.
#[derive(Debug, Clone)]
pub struct SymbolicFactor {
    /// Ascending variable ids.
    pub variables: Vec<NodeId>,
    /// One node per assignment, first variable most significant.
    pub entries: Vec<NodeRef>,
}

impl SymbolicFactor {
    fn entry(&self, cards: &[usize], full: &[usize]) -> NodeRef {
        let fc: Vec<usize> = self.variables.iter().map(|v| cards[v.0]).collect();
        let states: Vec<usize> = self.variables.iter().map(|v| full[v.0]).collect();
        self.entries[flat_index(&fc, &states)]
    }
}

/// What to do when folded sum weights are not normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Fail: the weights of a reverse-topological compilation are always
    /// normalized, so anything else points at a bad order or input.
    #[default]
    Strict,
    /// Renormalize bottom-up so every node computes its value divided by
    /// its total mass. Exact when the root's mass is 1.
    Renormalize,
}

/// Compiles `bn` into an arithmetic circuit by eliminating variables in
/// `sigma` order.
pub fn compile_to_ac(bn: &BayesNet, sigma: &Ordering) -> Result<Circuit> {
    if bn.is_empty() {
        return Err(Error::InvalidNetwork("empty network".into()));
    }
    Ordering::new(sigma.as_slice().to_vec(), bn.len())?;
    let cards = bn.cardinalities();
    let mut b = CircuitBuilder::new();

    let indicators: Vec<Vec<NodeRef>> = (0..bn.len())
        .map(|v| {
            (0..cards[v])
                .map(|x| b.add(CircuitNode::Indicator { var: NodeId(v), state: x }))
                .collect()
        })
        .collect();

    let mut factors: Vec<SymbolicFactor> = Vec::with_capacity(bn.len());
    for cpt in bn.cpts() {
        let mut variables = cpt.parents.clone();
        variables.push(cpt.child);
        variables.sort_unstable();
        let fc: Vec<usize> = variables.iter().map(|v| cards[v.0]).collect();
        let entries = assignments(&fc)
            .map(|states| {
                let mut full = vec![0; bn.len()];
                for (v, s) in variables.iter().zip(&states) {
                    full[v.0] = *s;
                }
                let ps: Vec<usize> = cpt.parents.iter().map(|p| full[p.0]).collect();
                let x = full[cpt.child.0];
                let theta = b.add(CircuitNode::Param {
                    value: cpt.row(&ps, &cards)[x],
                });
                b.add(CircuitNode::Product {
                    children: vec![theta, indicators[cpt.child.0][x]],
                })
            })
            .collect();
        factors.push(SymbolicFactor { variables, entries });
    }

    for x in sigma.iter() {
        let (mut bucket, rest): (Vec<_>, Vec<_>) = std::mem::take(&mut factors)
            .into_iter()
            .partition(|f| f.variables.contains(&x));
        factors = rest;
        bucket.sort_by(|a, b| a.variables.cmp(&b.variables));
        if bucket.is_empty() {
            return Err(Error::Compiler(format!("no factor mentions variable {x}")));
        }

        let scope: BTreeSet<NodeId> = bucket.iter().flat_map(|f| f.variables.iter().copied()).collect();
        let remaining: Vec<NodeId> = scope.iter().copied().filter(|&v| v != x).collect();
        let rc: Vec<usize> = remaining.iter().map(|v| cards[v.0]).collect();

        let entries = assignments(&rc)
            .map(|states| {
                let mut full = vec![0; bn.len()];
                for (v, s) in remaining.iter().zip(&states) {
                    full[v.0] = *s;
                }
                let children = (0..cards[x.0])
                    .map(|state| {
                        full[x.0] = state;
                        let parts: Vec<NodeRef> =
                            bucket.iter().map(|f| f.entry(&cards, &full)).collect();
                        let node = if parts.len() == 1 {
                            parts[0]
                        } else {
                            b.add(CircuitNode::Product { children: parts })
                        };
                        (node, 1.0)
                    })
                    .collect();
                b.add_with_provenance(CircuitNode::Sum { children }, Some(x))
            })
            .collect();
        factors.push(SymbolicFactor {
            variables: remaining,
            entries,
        });
    }

    // Only empty-scope factors are left: one per connected component.
    let tops: Vec<NodeRef> = factors.iter().map(|f| f.entries[0]).collect();
    let root = if tops.len() == 1 {
        tops[0]
    } else {
        b.add(CircuitNode::Product { children: tops })
    };
    Ok(b.finish(bn.variables().to_vec(), root, Stage::Ac))
}

/// Folds parameter leaves into the weights of the sum edges above them.
pub fn redistribute_parameters(ac: &Circuit) -> Result<Circuit> {
    redistribute_parameters_with(ac, Normalization::Strict)
}

pub fn redistribute_parameters_with(ac: &Circuit, mode: Normalization) -> Result<Circuit> {
    let (flat, _) = flatten_pass(ac);
    let mut b = CircuitBuilder::new();
    let mut map: Vec<NodeRef> = Vec::with_capacity(flat.len());
    let mut one: Option<NodeRef> = None;
    let mut one_ref = |b: &mut CircuitBuilder| *one.get_or_insert_with(|| b.add(CircuitNode::One));

    for r in flat.refs() {
        let node = flat.node(r);
        let new = match node {
            CircuitNode::Sum { children } => {
                let mut folded = Vec::with_capacity(children.len());
                for &(c, w) in children {
                    match flat.node(c) {
                        CircuitNode::Param { value } => folded.push((one_ref(&mut b), w * value)),
                        CircuitNode::Product { children: kids } => {
                            let mut factor = 1.0;
                            let mut rest = Vec::new();
                            for &k in kids {
                                match flat.node(k) {
                                    CircuitNode::Param { value } => factor *= value,
                                    _ => rest.push(map[k.0]),
                                }
                            }
                            let child = match rest.len() {
                                0 => one_ref(&mut b),
                                1 => rest[0],
                                _ => b.add_with_provenance(
                                    CircuitNode::Product { children: rest },
                                    flat.provenance(c),
                                ),
                            };
                            folded.push((child, w * factor));
                        }
                        _ => folded.push((map[c.0], w)),
                    }
                }
                b.add_with_provenance(CircuitNode::Sum { children: folded }, flat.provenance(r))
            }
            CircuitNode::Product { children } => b.add_with_provenance(
                CircuitNode::Product {
                    children: children.iter().map(|c| map[c.0]).collect(),
                },
                flat.provenance(r),
            ),
            other => b.add_with_provenance(other.clone(), flat.provenance(r)),
        };
        map.push(new);
    }
    let out = b.finish(flat.variables().to_vec(), map[flat.root().0], Stage::Spn);
    if let Some(r) = out.refs().find(|&r| matches!(out.node(r), CircuitNode::Param { .. })) {
        return Err(Error::Compiler(format!(
            "parameter {r} is not below a sum edge and cannot be folded"
        )));
    }
    match mode {
        Normalization::Strict => {
            out.check_spn_weights()
                .map_err(|e| Error::Compiler(format!("folded weights are not normalized: {e}")))?;
            Ok(out)
        }
        Normalization::Renormalize => normalize_weights(&out),
    }
}

/// Rescales sum weights so that every node is normalized while the root's
/// distribution is unchanged. Fails if the root's total mass is not 1.
pub fn normalize_weights(c: &Circuit) -> Result<Circuit> {
    let mass = c.evaluate_all(&[])?;
    let total = mass[c.root().0];
    if (total - 1.0).abs() > DEFAULT_TOL {
        return Err(Error::Compiler(format!("circuit mass is {total}, not 1")));
    }
    let mut nodes: Vec<CircuitNode> = c.nodes().to_vec();
    for r in c.refs() {
        if let CircuitNode::Sum { children } = &mut nodes[r.0] {
            let z = mass[r.0];
            if z > 0.0 {
                for (child, w) in children.iter_mut() {
                    *w = *w * mass[child.0] / z;
                }
            }
        }
    }
    let mut b = CircuitBuilder::new();
    for (r, node) in c.refs().zip(nodes) {
        b.add_with_provenance(node, c.provenance(r));
    }
    Ok(b.finish(c.variables().to_vec(), c.root(), Stage::Spn))
}

/// Sets the indicators (and terminals) of `vars` to 1 and folds constants.
pub fn marginalize(spn: &Circuit, vars: &BTreeSet<NodeId>) -> Result<Circuit> {
    spn.require_stage(Stage::Spn)?;
    let root_scope = spn.scope(spn.root())?;
    if let Some(v) = vars.iter().find(|v| !root_scope.contains(v)) {
        return Err(Error::Precondition(format!("variable {v} is not in the root scope")));
    }
    if vars.is_empty() {
        return Ok(spn.clone());
    }
    let mut b = CircuitBuilder::new();
    let mut map: Vec<NodeRef> = Vec::with_capacity(spn.len());
    let mut is_one: Vec<bool> = Vec::with_capacity(spn.len());
    let one = b.add(CircuitNode::One);

    for r in spn.refs() {
        let prov = spn.provenance(r);
        let new = match spn.node(r) {
            CircuitNode::Indicator { var, .. } | CircuitNode::Terminal { var, .. }
                if vars.contains(var) =>
            {
                one
            }
            CircuitNode::One => one,
            CircuitNode::Product { children } => {
                let kept: Vec<NodeRef> = children
                    .iter()
                    .filter(|c| !is_one[c.0])
                    .map(|c| map[c.0])
                    .collect();
                match kept.len() {
                    0 => one,
                    1 => kept[0],
                    _ => b.add_with_provenance(CircuitNode::Product { children: kept }, prov),
                }
            }
            CircuitNode::Sum { children } => {
                let total: f64 = children.iter().map(|&(_, w)| w).sum();
                if children.iter().all(|&(c, _)| is_one[c.0]) && (total - 1.0).abs() <= DEFAULT_TOL
                {
                    one
                } else {
                    b.add_with_provenance(
                        CircuitNode::Sum {
                            children: children.iter().map(|&(c, w)| (map[c.0], w)).collect(),
                        },
                        prov,
                    )
                }
            }
            other => b.add_with_provenance(other.clone(), prov),
        };
        is_one.push(new == one);
        map.push(new);
    }
    Ok(b.finish(spn.variables().to_vec(), map[spn.root().0], Stage::Spn))
}

/// Replaces every sum whose children are all indicators of one variable by
/// a terminal distribution over that variable.
pub fn add_terminal_nodes(spn: &Circuit) -> Result<Circuit> {
    spn.require_stage(Stage::Spn)?;
    Ok(terminal_pass(spn)?.0)
}

fn terminal_pass(spn: &Circuit) -> Result<(Circuit, bool)> {
    let mut fired = false;
    let mut b = CircuitBuilder::new();
    let mut map: Vec<NodeRef> = Vec::with_capacity(spn.len());
    for r in spn.refs() {
        let prov = spn.provenance(r);
        let new = match spn.node(r) {
            CircuitNode::Sum { children }
                if children
                    .iter()
                    .all(|&(c, _)| matches!(spn.node(c), CircuitNode::Indicator { .. })) =>
            {
                let vars: BTreeSet<NodeId> = children
                    .iter()
                    .map(|&(c, _)| match spn.node(c) {
                        CircuitNode::Indicator { var, .. } => *var,
                        _ => unreachable!(),
                    })
                    .collect();
                if vars.len() != 1 {
                    return Err(Error::InvalidCircuit(format!(
                        "sum {r} mixes indicators of {} variables",
                        vars.len()
                    )));
                }
                let var = *vars.first().unwrap();
                let mut distribution = vec![0.0; spn.cardinality(var)];
                for &(c, w) in children {
                    if let CircuitNode::Indicator { state, .. } = spn.node(c) {
                        distribution[*state] += w;
                    }
                }
                fired = true;
                b.add_with_provenance(CircuitNode::Terminal { var, distribution }, prov)
            }
            other => b.add_with_provenance(remap_children(other, &map), prov),
        };
        map.push(new);
    }
    let out = b.finish(spn.variables().to_vec(), map[spn.root().0], spn.stage());
    Ok((out, fired))
}

/// Merges products of products into single products.
pub fn flatten_products(spn: &Circuit) -> Circuit {
    flatten_pass(spn).0
}

fn flatten_pass(c: &Circuit) -> (Circuit, bool) {
    let mut fired = false;
    let mut b = CircuitBuilder::new();
    let mut map: Vec<NodeRef> = Vec::with_capacity(c.len());
    for r in c.refs() {
        let prov = c.provenance(r);
        let new = match c.node(r) {
            CircuitNode::Product { children } => {
                let mut merged = Vec::with_capacity(children.len());
                for ch in children {
                    match b.node(map[ch.0]) {
                        CircuitNode::Product { children: inner } => {
                            fired = true;
                            merged.extend_from_slice(inner);
                        }
                        _ => merged.push(map[ch.0]),
                    }
                }
                b.add_with_provenance(CircuitNode::Product { children: merged }, prov)
            }
            other => b.add_with_provenance(remap_children(other, &map), prov),
        };
        map.push(new);
    }
    (b.finish(c.variables().to_vec(), map[c.root().0], c.stage()), fired)
}

/// Shares one product node among all products over the same child multiset.
pub fn lump_products(spn: &Circuit) -> Circuit {
    lump_pass(spn).0
}

fn lump_pass(c: &Circuit) -> (Circuit, bool) {
    let mut fired = false;
    let mut b = CircuitBuilder::new();
    let mut map: Vec<NodeRef> = Vec::with_capacity(c.len());
    let mut seen: HashMap<Vec<NodeRef>, NodeRef> = HashMap::new();
    for r in c.refs() {
        let prov = c.provenance(r);
        let new = match c.node(r) {
            CircuitNode::Product { children } => {
                let kids: Vec<NodeRef> = children.iter().map(|ch| map[ch.0]).collect();
                let mut key = kids.clone();
                key.sort_unstable();
                match seen.get(&key) {
                    Some(&existing) => {
                        fired = true;
                        existing
                    }
                    None => {
                        let id = b.add_with_provenance(CircuitNode::Product { children: kids }, prov);
                        seen.insert(key, id);
                        id
                    }
                }
            }
            other => b.add_with_provenance(remap_children(other, &map), prov),
        };
        map.push(new);
    }
    (b.finish(c.variables().to_vec(), map[c.root().0], c.stage()), fired)
}

fn remap_children(node: &CircuitNode, map: &[NodeRef]) -> CircuitNode {
    match node {
        CircuitNode::Sum { children } => CircuitNode::Sum {
            children: children.iter().map(|&(c, w)| (map[c.0], w)).collect(),
        },
        CircuitNode::Product { children } => CircuitNode::Product {
            children: children.iter().map(|c| map[c.0]).collect(),
        },
        other => other.clone(),
    }
}

/// Outcome of [`simplify_fixpoint`].
#[derive(Debug, Clone)]
pub struct Simplified {
    pub circuit: Circuit,
    /// Number of passes, including the final pass in which nothing fired.
    pub passes: usize,
}

/// Applies the terminal, flatten and lump rewrites, in that order, until a
/// pass changes nothing.
pub fn simplify_fixpoint(spn: &Circuit) -> Result<Circuit> {
    Ok(simplify_fixpoint_traced(spn)?.circuit)
}

pub fn simplify_fixpoint_traced(spn: &Circuit) -> Result<Simplified> {
    spn.require_stage(Stage::Spn)?;
    let mut current = spn.clone();
    for pass in 1..=MAX_SIMPLIFY_PASSES {
        let before = current.fingerprint();
        let (c, terminals) = terminal_pass(&current)?;
        let (c, flattened) = flatten_pass(&c);
        let (c, lumped) = lump_pass(&c);
        current = c;
        if !(terminals || flattened || lumped) {
            if current.fingerprint() != before {
                return Err(Error::Compiler(
                    "rewrite pass changed the circuit without reporting it".into(),
                ));
            }
            return Ok(Simplified {
                circuit: current,
                passes: pass,
            });
        }
    }
    Err(Error::NoFixpoint(MAX_SIMPLIFY_PASSES))
}

/// Full compilation: eliminate in `sigma` order, fold parameters,
/// marginalize `marg`, simplify.
pub fn bn2spn(bn: &BayesNet, sigma: &Ordering, marg: &BTreeSet<NodeId>) -> Result<Circuit> {
    bn2spn_with(bn, sigma, marg, Normalization::Strict)
}

pub fn bn2spn_with(
    bn: &BayesNet,
    sigma: &Ordering,
    marg: &BTreeSet<NodeId>,
    mode: Normalization,
) -> Result<Circuit> {
    let ac = compile_to_ac(bn, sigma)?;
    let spn = redistribute_parameters_with(&ac, mode)?;
    let spn = marginalize(&spn, marg)?;
    let spn = simplify_fixpoint(&spn)?;
    let report = spn.check_valid();
    if !report.is_valid() {
        return Err(Error::Compiler(format!(
            "compiled circuit is invalid: {:?}",
            report.violations
        )));
    }
    Ok(spn.with_stage(Stage::Spn))
}

/// Variables with at least one child.
pub fn internal_variables(bn: &BayesNet) -> BTreeSet<NodeId> {
    bn.dag()
        .nodes()
        .filter(|&v| !bn.dag().children(v).is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assign::assignments;
    use crate::bayesnet::{joint_of_bn, random_cpts, BayesNet, Cpt, Variable, DEFAULT_SPACE_CAP};
    use crate::graph::Dag;
    use crate::models;

    fn ids(v: &[usize]) -> BTreeSet<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    fn order(v: &[usize]) -> Ordering {
        Ordering::new(v.iter().map(|&i| NodeId(i)).collect(), v.len()).unwrap()
    }

    fn two_node() -> BayesNet {
        let g = Dag::new(2, [(NodeId(0), NodeId(1))]).unwrap();
        BayesNet::new(
            vec![Variable::observable("A", 2), Variable::observable("B", 2)],
            g,
            vec![
                Cpt {
                    child: NodeId(0),
                    parents: vec![],
                    table: vec![vec![0.3, 0.7]],
                },
                Cpt {
                    child: NodeId(1),
                    parents: vec![NodeId(0)],
                    table: vec![vec![0.2, 0.8], vec![0.6, 0.4]],
                },
            ],
        )
        .unwrap()
    }

    fn full(states: &[usize]) -> Vec<Option<usize>> {
        states.iter().map(|&s| Some(s)).collect()
    }

    fn assert_matches_joint(bn: &BayesNet, c: &Circuit, tol: f64) {
        let j = joint_of_bn(bn, DEFAULT_SPACE_CAP).unwrap();
        for s in assignments(&bn.cardinalities()) {
            let v = c.evaluate(&full(&s)).unwrap();
            assert!((v - j.entry(&s)).abs() < tol, "{s:?}: {v} vs {}", j.entry(&s));
        }
    }

    #[test]
    fn ac_of_two_nodes_matches_joint() {
        let bn = two_node();
        let ac = compile_to_ac(&bn, &order(&[1, 0])).unwrap();
        assert_eq!(ac.stage(), Stage::Ac);
        assert_matches_joint(&bn, &ac, 1e-15);
    }

    #[test]
    fn ac_of_single_variable() {
        let bn = random_cpts(&Dag::empty(1), &[3], 4).unwrap();
        let ac = compile_to_ac(&bn, &order(&[0])).unwrap();
        let CircuitNode::Sum { children } = ac.node(ac.root()) else {
            panic!("root is not a sum")
        };
        assert_eq!(children.len(), 3);
        for &(c, w) in children {
            assert_eq!(w, 1.0);
            assert!(ac.node(c).is_product());
        }
        assert!((ac.evaluate(&[None]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ac_of_hmm_matches_joint_on_all_assignments() {
        let bn = models::hmm(3, 9).unwrap();
        let sigma = bn.dag().default_reverse_topological();
        let ac = compile_to_ac(&bn, &sigma).unwrap();
        assert_matches_joint(&bn, &ac, 1e-14);
    }

    #[test]
    fn compile_rejects_bad_orders() {
        let bn = two_node();
        assert!(compile_to_ac(&bn, &Ordering::identity(3)).is_err());
    }

    #[test]
    fn redistribution_folds_root_prior() {
        let bn = two_node();
        let spn = redistribute_parameters(&compile_to_ac(&bn, &order(&[1, 0])).unwrap()).unwrap();
        assert_eq!(spn.count_where(|n| matches!(n, CircuitNode::Param { .. })), 0);
        let CircuitNode::Sum { children } = spn.node(spn.root()) else {
            panic!("root is not a sum")
        };
        let w: Vec<f64> = children.iter().map(|&(_, w)| w).collect();
        assert_eq!(w, vec![0.3, 0.7]);
    }

    #[test]
    fn redistribution_preserves_evaluation() {
        let bn = models::five_node_collider(2).unwrap();
        let ac = compile_to_ac(&bn, &bn.dag().default_reverse_topological()).unwrap();
        let spn = redistribute_parameters(&ac).unwrap();
        for s in assignments(&bn.cardinalities()) {
            let e = full(&s);
            assert!((ac.evaluate(&e).unwrap() - spn.evaluate(&e).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn redistribution_without_params_is_a_no_op() {
        let spn = redistribute_parameters(&compile_to_ac(&two_node(), &order(&[1, 0])).unwrap())
            .unwrap();
        let again = redistribute_parameters(&spn.clone().with_stage(Stage::Ac)).unwrap();
        assert_eq!(again.fingerprint(), spn.fingerprint());
    }

    #[test]
    fn strict_redistribution_rejects_non_reverse_topological_orders() {
        let bn = two_node();
        let ac = compile_to_ac(&bn, &order(&[0, 1])).unwrap();
        assert!(matches!(redistribute_parameters(&ac), Err(Error::Compiler(_))));
        let spn = redistribute_parameters_with(&ac, Normalization::Renormalize).unwrap();
        assert_matches_joint(&bn, &spn, 1e-12);
        assert!(spn.check_spn_weights().is_ok());
    }

    #[test]
    fn marginalize_edge_cases() {
        let bn = models::hmm(3, 1).unwrap();
        let spn = redistribute_parameters(
            &compile_to_ac(&bn, &bn.dag().default_reverse_topological()).unwrap(),
        )
        .unwrap();
        let same = marginalize(&spn, &BTreeSet::new()).unwrap();
        assert_eq!(same.fingerprint(), spn.fingerprint());

        let hidden = marginalize(&spn, &ids(&[0, 1, 2])).unwrap();
        assert_eq!(hidden.scope(hidden.root()).unwrap(), ids(&[3, 4, 5]));

        let everything = marginalize(&spn, &ids(&[0, 1, 2, 3, 4, 5])).unwrap();
        assert_eq!(everything.len(), 1);
        assert!(matches!(everything.node(everything.root()), CircuitNode::One));

        let ac = compile_to_ac(&bn, &bn.dag().default_reverse_topological()).unwrap();
        assert!(matches!(marginalize(&ac, &ids(&[0])), Err(Error::WrongStage { .. })));
        let partial = marginalize(&spn, &ids(&[0])).unwrap();
        assert!(marginalize(&partial, &ids(&[0])).is_err());
    }

    #[test]
    fn marginalized_evaluation_matches_brute_force() {
        let bn = models::hmm(3, 5).unwrap();
        let j = joint_of_bn(&bn, DEFAULT_SPACE_CAP).unwrap();
        let spn = redistribute_parameters(
            &compile_to_ac(&bn, &bn.dag().default_reverse_topological()).unwrap(),
        )
        .unwrap();
        let m = marginalize(&spn, &ids(&[0, 1, 2])).unwrap();
        for s in assignments(&[3, 3, 3]) {
            let mut e = vec![None; 6];
            for (k, &x) in s.iter().enumerate() {
                e[3 + k] = (x < 2).then_some(x);
            }
            assert!((m.evaluate(&e).unwrap() - j.mass(&e)).abs() < 1e-12);
        }
    }

    fn indicator_sum(weights: &[f64]) -> Circuit {
        let mut b = CircuitBuilder::new();
        let kids: Vec<(NodeRef, f64)> = weights
            .iter()
            .enumerate()
            .map(|(s, &w)| (b.add(CircuitNode::Indicator { var: NodeId(0), state: s }), w))
            .collect();
        let root = b.add(CircuitNode::Sum { children: kids });
        b.finish(vec![Variable::observable("B", weights.len())], root, Stage::Spn)
    }

    #[test]
    fn terminal_from_indicator_sum() {
        let t = add_terminal_nodes(&indicator_sum(&[0.2, 0.8])).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(
            t.node(t.root()),
            &CircuitNode::Terminal {
                var: NodeId(0),
                distribution: vec![0.2, 0.8]
            }
        );
        let again = add_terminal_nodes(&t).unwrap();
        assert_eq!(again, t);
    }

    #[test]
    fn terminal_rejects_mixed_variables() {
        let mut b = CircuitBuilder::new();
        let a = b.add(CircuitNode::Indicator { var: NodeId(0), state: 0 });
        let c = b.add(CircuitNode::Indicator { var: NodeId(1), state: 0 });
        let s = b.add(CircuitNode::Sum { children: vec![(a, 0.5), (c, 0.5)] });
        let vars = vec![Variable::observable("A", 2), Variable::observable("B", 2)];
        let bad = b.finish(vars, s, Stage::Spn);
        assert!(matches!(add_terminal_nodes(&bad), Err(Error::InvalidCircuit(_))));
    }

    #[test]
    fn terminals_of_two_node_rows_are_conditionals() {
        let bn = two_node();
        let spn = bn2spn(&bn, &order(&[1, 0]), &BTreeSet::new()).unwrap();
        let mut rows: Vec<Vec<f64>> = spn
            .nodes()
            .iter()
            .filter_map(|n| match n {
                CircuitNode::Terminal { var, distribution } if *var == NodeId(1) => {
                    Some(distribution.clone())
                }
                _ => None,
            })
            .collect();
        rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(rows, vec![vec![0.2, 0.8], vec![0.6, 0.4]]);
    }

    #[test]
    fn flatten_and_lump() {
        let mut b = CircuitBuilder::new();
        let a = b.add(CircuitNode::Indicator { var: NodeId(0), state: 0 });
        let bb = b.add(CircuitNode::Indicator { var: NodeId(1), state: 0 });
        let c = b.add(CircuitNode::Indicator { var: NodeId(2), state: 0 });
        let inner = b.add(CircuitNode::Product { children: vec![a, bb] });
        let outer = b.add(CircuitNode::Product { children: vec![inner, c] });
        let vars: Vec<Variable> = (0..3).map(|i| Variable::observable(format!("V{i}"), 2)).collect();
        let nested = b.finish(vars.clone(), outer, Stage::Spn);
        let flat = flatten_products(&nested);
        assert_eq!(flat.len(), 4);
        let CircuitNode::Product { children } = flat.node(flat.root()) else {
            panic!()
        };
        assert_eq!(children.len(), 3);
        assert_eq!(flatten_products(&flat).fingerprint(), flat.fingerprint());

        let mut b = CircuitBuilder::new();
        let a0 = b.add(CircuitNode::Indicator { var: NodeId(0), state: 0 });
        let a1 = b.add(CircuitNode::Indicator { var: NodeId(0), state: 1 });
        let t = b.add(CircuitNode::Terminal { var: NodeId(1), distribution: vec![0.5, 0.5] });
        let p0 = b.add(CircuitNode::Product { children: vec![a0, t] });
        let p0_copy = b.add(CircuitNode::Product { children: vec![t, a0] });
        let p1 = b.add(CircuitNode::Product { children: vec![a1, t] });
        let s1 = b.add(CircuitNode::Sum { children: vec![(p0, 0.5), (p1, 0.5)] });
        let s2 = b.add(CircuitNode::Sum { children: vec![(p0_copy, 0.1), (p1, 0.9)] });
        let top = b.add(CircuitNode::Product { children: vec![s1, s2] });
        let dup = b.finish(vars, top, Stage::Spn);
        let lumped = lump_products(&dup);
        assert_eq!(lumped.len(), dup.len() - 1);
        let distinct = lump_products(&lumped);
        assert_eq!(distinct, lumped);
    }

    #[test]
    fn fixpoint_is_idempotent_and_preserves_marginals() {
        let bn = models::five_node_collider(8).unwrap();
        let spn = redistribute_parameters(
            &compile_to_ac(&bn, &bn.dag().default_reverse_topological()).unwrap(),
        )
        .unwrap();
        let once = simplify_fixpoint_traced(&spn).unwrap();
        assert!(once.passes <= spn.len());
        let twice = simplify_fixpoint(&once.circuit).unwrap();
        assert_eq!(twice.fingerprint(), once.circuit.fingerprint());
        assert_matches_joint(&bn, &once.circuit, 1e-12);
    }

    #[test]
    fn single_variable_pipeline_is_one_terminal() {
        let bn = random_cpts(&Dag::empty(1), &[2], 3).unwrap();
        let spn = bn2spn(&bn, &order(&[0]), &BTreeSet::new()).unwrap();
        assert_eq!(spn.len(), 1);
        assert!(matches!(spn.node(spn.root()), CircuitNode::Terminal { .. }));
    }

    #[test]
    fn disconnected_network_gets_product_root() {
        let bn = random_cpts(&Dag::empty(2), &[2, 2], 3).unwrap();
        let spn = bn2spn(&bn, &order(&[1, 0]), &BTreeSet::new()).unwrap();
        assert!(spn.node(spn.root()).is_product());
        assert_matches_joint(&bn, &spn, 1e-12);
    }

    #[test]
    fn internal_variables_of_hmm() {
        let bn = models::hmm(3, 0).unwrap();
        assert_eq!(internal_variables(&bn), ids(&[0, 1, 2]));
    }
}
