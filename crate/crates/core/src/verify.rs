//! Compile/decompile roundtrips checked against the moral closure, plus the
//! enumeration experiment over the connected-DAG family.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bayesnet::{
    family_member, family_size, is_imap, random_cpts, random_cpts_named, removable_edges,
    BayesNet, DEFAULT_SPACE_CAP, DEFAULT_TOL,
};
use crate::circuit::{Circuit, CircuitBuilder, CircuitNode};
use crate::compiler::{bn2spn_with, internal_variables, Normalization};
use crate::decompiler::{spn2bn_with, BnOrigin, Decompilation, RegionMode};
use crate::error::{Error, Result};
use crate::graph::{Dag, Edge, NodeId, Ordering};

/// Which variables are summed out before decompiling.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum MarginalizationPolicy {
    /// Every variable with at least one child.
    #[default]
    InternalOnly,
    None,
    Explicit(BTreeSet<NodeId>),
}

impl MarginalizationPolicy {
    pub fn label(&self) -> String {
        match self {
            MarginalizationPolicy::InternalOnly => "internal".into(),
            MarginalizationPolicy::None => "none".into(),
            MarginalizationPolicy::Explicit(vars) => {
                let ids: Vec<String> = vars.iter().map(|v| v.to_string()).collect();
                format!("explicit:{}", ids.join("+"))
            }
        }
    }

    pub fn variables(&self, bn: &BayesNet) -> BTreeSet<NodeId> {
        match self {
            MarginalizationPolicy::InternalOnly => internal_variables(bn),
            MarginalizationPolicy::None => BTreeSet::new(),
            MarginalizationPolicy::Explicit(vars) => vars.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RoundtripOptions {
    pub normalization: Normalization,
    pub regions: RegionMode,
}

/// Original variable behind each node of a decompiled network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Correspondence {
    pub map: Vec<NodeId>,
}

impl Correspondence {
    /// Reads the correspondence off the compiler's provenance records.
    /// Latent and observable nodes may share a variable only when that
    /// variable was left unmarginalized.
    pub fn from_provenance(
        spn: &Circuit,
        d: &Decompilation,
        marginalized: &BTreeSet<NodeId>,
    ) -> Result<Self> {
        let mut map = Vec::with_capacity(d.origins.len());
        let mut owner: BTreeMap<NodeId, (usize, bool)> = BTreeMap::new();
        for (i, origin) in d.origins.iter().enumerate() {
            let (var, latent) = match *origin {
                BnOrigin::Observable(x) => (x, false),
                BnOrigin::Region(k) => {
                    let found: BTreeSet<Option<NodeId>> = d.regions[k]
                        .members
                        .iter()
                        .map(|&m| spn.provenance(m))
                        .collect();
                    match found.into_iter().collect::<Vec<_>>().as_slice() {
                        [Some(x)] => (*x, true),
                        other => {
                            return Err(Error::AmbiguousProvenance(format!(
                                "region of latent {} came from {other:?}",
                                d.bn.variables()[i].name
                            )))
                        }
                    }
                }
            };
            if let Some(&(j, other_latent)) = owner.get(&var) {
                let allowed = latent != other_latent && !marginalized.contains(&var);
                if !allowed {
                    return Err(Error::AmbiguousProvenance(format!(
                        "nodes {} and {} both stand for variable {var}",
                        d.bn.variables()[j].name,
                        d.bn.variables()[i].name
                    )));
                }
            } else {
                owner.insert(var, (i, latent));
            }
            map.push(var);
        }
        Ok(Correspondence { map })
    }

    /// Maps edges onto original variables, dropping self loops.
    pub fn map_edges(&self, dag: &Dag) -> BTreeSet<Edge> {
        dag.edges()
            .iter()
            .map(|&(a, b)| (self.map[a.0], self.map[b.0]))
            .filter(|(a, b)| a != b)
            .collect()
    }
}

/// Result of compiling and decompiling one network.
#[derive(Debug, Clone)]
pub struct Roundtrip {
    pub spn: Circuit,
    pub decompilation: Decompilation,
    pub correspondence: Correspondence,
    /// Decompiled edges over the original variables.
    pub edges: BTreeSet<Edge>,
}

pub fn roundtrip(
    bn: &BayesNet,
    sigma: &Ordering,
    policy: &MarginalizationPolicy,
) -> Result<Roundtrip> {
    roundtrip_with(bn, sigma, policy, RoundtripOptions::default())
}

pub fn roundtrip_with(
    bn: &BayesNet,
    sigma: &Ordering,
    policy: &MarginalizationPolicy,
    options: RoundtripOptions,
) -> Result<Roundtrip> {
    let marginalized = policy.variables(bn);
    let spn = bn2spn_with(bn, sigma, &marginalized, options.normalization)?;
    let decompilation = spn2bn_with(&spn, options.regions)?;
    let correspondence = Correspondence::from_provenance(&spn, &decompilation, &marginalized)?;
    let edges = correspondence.map_edges(decompilation.dag());
    Ok(Roundtrip {
        spn,
        decompilation,
        correspondence,
        edges,
    })
}

/// The ordering that orients moralization edges for an elimination order:
/// its reverse when that is topological, otherwise the smallest topological
/// order of the graph.
pub fn closure_precedence(dag: &Dag, sigma: &Ordering) -> Ordering {
    let reversed = sigma.reversed();
    if dag.is_topological(&reversed) {
        reversed
    } else {
        dag.topological_order().expect("a DAG has a topological order")
    }
}

/// One compile/decompile trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialRecord {
    pub n: usize,
    pub bn_index: u64,
    #[serde(serialize_with = "ordering_text")]
    pub sigma: Ordering,
    pub sigma_is_reverse_topological: bool,
    pub marginalization_policy: String,
    pub closure_match: bool,
    pub notes: String,
}

fn ordering_text<S: serde::Serializer>(o: &Ordering, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&o.to_string())
}

/// Whether sums at different depths share a scope.
pub fn layers_share_scope(spn: &Circuit) -> bool {
    let scopes = spn.scopes();
    let mut first_depth: BTreeMap<&BTreeSet<NodeId>, usize> = BTreeMap::new();
    for (depth, layer) in crate::decompiler::sum_layers(spn).into_iter().enumerate() {
        for s in layer {
            if *first_depth.entry(&scopes[s.0]).or_insert(depth) != depth {
                return true;
            }
        }
    }
    false
}

/// Roundtrips `bn` and compares the mapped edges with its moral closure.
/// Non-reverse-topological orders are compiled with renormalized weights.
pub fn verify_moral_closure(
    bn: &BayesNet,
    sigma: &Ordering,
    policy: &MarginalizationPolicy,
) -> Result<TrialRecord> {
    let rev_topo = bn.dag().is_topological(&sigma.reversed());
    let expected = bn.dag().moral_closure(&closure_precedence(bn.dag(), sigma))?;
    let options = RoundtripOptions {
        normalization: if rev_topo {
            Normalization::Strict
        } else {
            Normalization::Renormalize
        },
        ..Default::default()
    };
    let mut notes = Vec::new();
    if !rev_topo {
        notes.push("renormalized".to_string());
    }
    let closure_match = match roundtrip_with(bn, sigma, policy, options) {
        Ok(rt) => {
            if layers_share_scope(&rt.spn) {
                notes.push("layers share scope".into());
            }
            let ok = &rt.edges == expected.edges();
            if !ok {
                let extra: Vec<String> = rt
                    .edges
                    .difference(expected.edges())
                    .map(|(a, b)| format!("{a}->{b}"))
                    .collect();
                let missing: Vec<String> = expected
                    .edges()
                    .difference(&rt.edges)
                    .map(|(a, b)| format!("{a}->{b}"))
                    .collect();
                notes.push(format!("extra [{}] missing [{}]", extra.join(" "), missing.join(" ")));
            }
            ok
        }
        Err(e) => {
            notes.push(format!("error: {e}"));
            false
        }
    };
    Ok(TrialRecord {
        n: bn.len(),
        bn_index: 0,
        sigma: sigma.clone(),
        sigma_is_reverse_topological: rev_topo,
        marginalization_policy: policy.label(),
        closure_match,
        notes: notes.join("; "),
    })
}

/// Roundtrips the moral closure of `bn` (w.r.t. the reverse of `sigma`,
/// which must be reverse-topological) with fresh CPTs and checks that the
/// closure comes back unchanged.
pub fn verify_idempotence(
    bn: &BayesNet,
    sigma: &Ordering,
    policy: &MarginalizationPolicy,
    seed: u64,
) -> Result<bool> {
    let prec = sigma.reversed();
    if !bn.dag().is_topological(&prec) {
        return Err(Error::Precondition(
            "idempotence needs a reverse-topological order".into(),
        ));
    }
    let closure = bn.dag().moral_closure(&prec)?;
    let closed = random_cpts_named(&closure, &bn.cardinalities(), &bn.names(), seed)?;
    let rt = roundtrip(&closed, sigma, policy)?;
    Ok(&rt.edges == closure.edges())
}

/// I-map and single-edge-deletion checks of a decompiled network against
/// the joint its augmented circuit defines.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimalityReport {
    pub is_imap: bool,
    /// Edges whose deletion still leaves an I-map.
    pub removable: Vec<Edge>,
}

impl MinimalityReport {
    pub fn is_minimal_imap(&self) -> bool {
        self.is_imap && self.removable.is_empty()
    }
}

pub fn check_minimal_imap(d: &Decompilation) -> Result<MinimalityReport> {
    let joint = d.augmented_joint(DEFAULT_SPACE_CAP)?;
    let ok = is_imap(d.dag(), &joint, DEFAULT_TOL)?;
    let removable = if ok {
        removable_edges(d.dag(), &joint, DEFAULT_TOL)?
    } else {
        Vec::new()
    };
    Ok(MinimalityReport {
        is_imap: ok,
        removable,
    })
}

/// The same circuit with every sum's weights and every terminal's
/// distribution redrawn at random. Decompiling it gives the same structure,
/// but its augmented joint carries no accidental independences.
pub fn reweight(spn: &Circuit, seed: u64) -> Circuit {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |k: usize| -> Vec<f64> {
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(1e-3..1.0)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / total).collect()
    };
    let mut b = CircuitBuilder::new();
    for r in spn.refs() {
        let node = match spn.node(r) {
            CircuitNode::Sum { children } => CircuitNode::Sum {
                children: children
                    .iter()
                    .map(|&(c, _)| c)
                    .zip(draw(children.len()))
                    .collect(),
            },
            CircuitNode::Terminal { var, distribution } => CircuitNode::Terminal {
                var: *var,
                distribution: draw(distribution.len()),
            },
            other => other.clone(),
        };
        b.add_with_provenance(node, spn.provenance(r));
    }
    b.finish(spn.variables().to_vec(), spn.root(), spn.stage())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentLemma {
    /// Region index of the latent.
    pub latent: usize,
    /// Regions with a sum above the latent's sums.
    pub ancestors: BTreeSet<usize>,
    /// Regions of the latent's parents in the decompiled network.
    pub conditioning: BTreeSet<usize>,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub latents: Vec<LatentLemma>,
    pub max_deviation: f64,
}

impl LemmaReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_deviation <= tol
    }
}

/// `max |P(Z | Z_A) - P(Z | Z_C)|` for every latent `Z`, where `A` are the
/// latents above `Z`'s sums and `C` its parents, over assignments of `A`
/// with positive probability.
pub fn verify_lemma(spn: &Circuit, mode: RegionMode) -> Result<LemmaReport> {
    let d = spn2bn_with(spn, mode)?;
    lemma_of(&d)
}

pub fn lemma_of(d: &Decompilation) -> Result<LemmaReport> {
    let joint = d.augmented_joint(DEFAULT_SPACE_CAP)?;
    let cards = d.bn.cardinalities();
    let mut latents = Vec::new();
    let mut overall: f64 = 0.0;
    for k in 0..d.regions.len() {
        let ancestors = d.ancestor_regions(k);
        let conditioning: BTreeSet<usize> = d
            .dag()
            .parents(d.latent_node(k))
            .iter()
            .map(|p| match d.origins[p.0] {
                BnOrigin::Region(r) => Ok(r),
                BnOrigin::Observable(_) => Err(Error::Decompile("observable parent".into())),
            })
            .collect::<Result<_>>()?;
        if !conditioning.is_subset(&ancestors) {
            return Err(Error::Decompile(format!(
                "parents of Z{} are not all above it",
                k + 1
            )));
        }
        let a: Vec<NodeId> = ancestors.iter().map(|&r| d.latent_node(r)).collect();
        let c: Vec<NodeId> = conditioning.iter().map(|&r| d.latent_node(r)).collect();
        let z = d.latent_node(k);
        let kz = cards[z.0];

        let with = |vars: &[NodeId]| {
            let mut v = vars.to_vec();
            v.push(z);
            joint.marginal(&v)
        };
        let ma = with(&a);
        let mc = with(&c);
        let ac: Vec<usize> = a.iter().map(|v| cards[v.0]).collect();
        let cc: Vec<usize> = c.iter().map(|v| cards[v.0]).collect();
        // Position of each conditioning variable inside `a`.
        let pos: Vec<usize> = c.iter().map(|v| a.iter().position(|x| x == v).unwrap()).collect();

        let mut worst: f64 = 0.0;
        for (ai, states) in crate::assign::assignments(&ac).enumerate() {
            let row_a = &ma[ai * kz..(ai + 1) * kz];
            let mass_a: f64 = row_a.iter().sum();
            if mass_a <= 0.0 {
                continue;
            }
            let proj: Vec<usize> = pos.iter().map(|&p| states[p]).collect();
            let ci = crate::assign::flat_index(&cc, &proj);
            let row_c = &mc[ci * kz..(ci + 1) * kz];
            let mass_c: f64 = row_c.iter().sum();
            for j in 0..kz {
                worst = worst.max((row_a[j] / mass_a - row_c[j] / mass_c).abs());
            }
        }
        overall = overall.max(worst);
        latents.push(LatentLemma {
            latent: k,
            ancestors,
            conditioning,
            max_deviation: worst,
        });
    }
    Ok(LemmaReport {
        latents,
        max_deviation: overall,
    })
}

/// Which elimination orders the enumeration experiment tries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrderingMode {
    /// Every permutation of nodes `2..n` followed by node 1 (1-based).
    #[default]
    Node1Last,
    /// Every reverse-topological order of each network.
    ReverseTopological,
}

impl std::str::FromStr for OrderingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "node1-last" => Ok(OrderingMode::Node1Last),
            "rev-topo" => Ok(OrderingMode::ReverseTopological),
            other => Err(Error::Format(format!("unknown ordering mode `{other}`"))),
        }
    }
}

/// All permutations of `1..n` in lexicographic order, each followed by 0.
pub fn node1_last_orderings(n: usize) -> Vec<Ordering> {
    fn permute(rest: &mut Vec<usize>, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..rest.len() {
            let v = rest.remove(i);
            prefix.push(v);
            permute(rest, prefix, out);
            prefix.pop();
            rest.insert(i, v);
        }
    }
    let mut out = Vec::new();
    permute(&mut (1..n).collect(), &mut Vec::new(), &mut out);
    out.into_iter()
        .map(|mut p| {
            p.push(0);
            Ordering::new(p.into_iter().map(NodeId).collect(), n).expect("a permutation")
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TableConfig {
    pub n: usize,
    pub orderings: OrderingMode,
    pub policy: MarginalizationPolicy,
    /// Worker threads; `None` uses rayon's default.
    pub jobs: Option<usize>,
    /// Number of (network, order) pairs to draw instead of the full sweep.
    pub sample: Option<usize>,
    pub seed: u64,
}

impl TableConfig {
    pub fn new(n: usize) -> Self {
        TableConfig {
            n,
            orderings: OrderingMode::default(),
            policy: MarginalizationPolicy::default(),
            jobs: None,
            sample: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TableSummary {
    pub n: usize,
    pub bn_count: u64,
    /// Orders per network; `None` when it varies (reverse-topological mode).
    pub ordering_count: Option<u64>,
    pub trial_count: u64,
    pub match_count: u64,
    pub rev_topo_trials: u64,
    pub rev_topo_matches: u64,
    pub records: Vec<TrialRecord>,
}

impl TableSummary {
    /// Every reverse-topological trial matched the moral closure.
    pub fn must_pass_ok(&self) -> bool {
        self.rev_topo_matches == self.rev_topo_trials
    }

    pub fn write_csv(&self, w: impl std::io::Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            out.serialize(r)?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// CPT seed of the `index`-th family member.
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index)
}

/// Runs the enumeration experiment: every family network of size `n`
/// against every order of the chosen mode.
pub fn run_table_experiment(config: &TableConfig) -> Result<TableSummary> {
    let n = config.n;
    if !(2..=7).contains(&n) {
        return Err(Error::FamilyOutOfRange(n));
    }
    let bn_count = family_size(n);
    let shared = node1_last_orderings(n);

    // (bn index, order index) pairs to run.
    let pairs: Vec<(u64, Option<usize>)> = match (config.orderings, config.sample) {
        (OrderingMode::Node1Last, None) => (0..bn_count)
            .flat_map(|b| (0..shared.len()).map(move |s| (b, Some(s))))
            .collect(),
        (OrderingMode::Node1Last, Some(k)) => {
            let total = bn_count * shared.len() as u64;
            sample_indices(total, k, config.seed)
                .into_iter()
                .map(|t| (t / shared.len() as u64, Some((t % shared.len() as u64) as usize)))
                .collect()
        }
        (OrderingMode::ReverseTopological, None) => (0..bn_count).map(|b| (b, None)).collect(),
        (OrderingMode::ReverseTopological, Some(k)) => sample_indices(bn_count, k, config.seed)
            .into_iter()
            .map(|b| (b, None))
            .collect(),
    };

    let run = |&(b, s): &(u64, Option<usize>)| -> Result<Vec<TrialRecord>> {
        let dag = family_member(n, b)?;
        let bn = random_cpts(&dag, &vec![2; n], trial_seed(config.seed, b))?;
        let sigmas = match s {
            Some(i) => vec![shared[i].clone()],
            None => dag.reverse_topological_orderings(),
        };
        sigmas
            .iter()
            .map(|sigma| {
                let mut r = verify_moral_closure(&bn, sigma, &config.policy)?;
                r.bn_index = b;
                Ok(r)
            })
            .collect()
    };
    let work = || -> Result<Vec<Vec<TrialRecord>>> { pairs.par_iter().map(run).collect() };
    let nested = match config.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let records: Vec<TrialRecord> = nested.into_iter().flatten().collect();

    let count = |f: &dyn Fn(&TrialRecord) -> bool| records.iter().filter(|r| f(r)).count() as u64;
    Ok(TableSummary {
        n,
        bn_count: if config.sample.is_some() {
            records.iter().map(|r| r.bn_index).collect::<BTreeSet<_>>().len() as u64
        } else {
            bn_count
        },
        ordering_count: match config.orderings {
            OrderingMode::Node1Last => Some(shared.len() as u64),
            OrderingMode::ReverseTopological => None,
        },
        trial_count: records.len() as u64,
        match_count: count(&|r| r.closure_match),
        rev_topo_trials: count(&|r| r.sigma_is_reverse_topological),
        rev_topo_matches: count(&|r| r.sigma_is_reverse_topological && r.closure_match),
        records,
    })
}

/// `k` distinct indices below `total`, ascending.
fn sample_indices(total: u64, k: usize, seed: u64) -> Vec<u64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = (k as u64).min(total);
    let mut chosen = BTreeSet::new();
    while (chosen.len() as u64) < k {
        chosen.insert(rng.gen_range(0..total));
    }
    chosen.into_iter().collect()
}
