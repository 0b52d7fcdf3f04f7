//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Informational lines start with `info`.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use bnspn::assign::assignments;
use bnspn::bayesnet::{enumerate_family, joint_of_bn, random_cpts, DEFAULT_SPACE_CAP};
use bnspn::compiler::{bn2spn, simplify_fixpoint};
use bnspn::decompiler::spn2bn;
use bnspn::graph::Edge;
use bnspn::verify::{
    check_minimal_imap, lemma_of, reweight, roundtrip, run_table_experiment, trial_seed,
    verify_idempotence, MarginalizationPolicy, TableConfig, TableSummary,
};
use bnspn::{models, BayesNet, Error, NodeId, Ordering, Result};

const TOL: f64 = 1e-9;
const POLICIES: [MarginalizationPolicy; 2] =
    [MarginalizationPolicy::InternalOnly, MarginalizationPolicy::None];

/// Every family network of size `2..=max_n` with its seeded CPTs and every
/// reverse-topological order.
fn pipelines(max_n: usize) -> Vec<(BayesNet, Ordering)> {
    let mut out = Vec::new();
    for n in 2..=max_n {
        for (i, dag) in enumerate_family(n).unwrap().iter().enumerate() {
            let bn = random_cpts(dag, &vec![2; n], trial_seed(0, i as u64)).unwrap();
            for sigma in dag.reverse_topological_orderings() {
                out.push((bn.clone(), sigma));
            }
        }
    }
    out
}

struct Report {
    failures: usize,
}

impl Report {
    fn criterion(&mut self, id: u32, title: &str, check: impl FnOnce() -> Result<(bool, String)>) {
        let start = Instant::now();
        let (ok, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} criterion {id}: {title}: {detail} ({secs:.1}s)",
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            self.failures += 1;
        }
    }
}

fn tables() -> Result<Vec<TableSummary>> {
    (2..=5).map(|n| run_table_experiment(&TableConfig::new(n))).collect()
}

fn main() -> ExitCode {
    let mut report = Report { failures: 0 };
    let summaries = tables();

    report.criterion(1, "table counts", || {
        let s = summaries.as_ref().map_err(|e| Error::Precondition(e.to_string()))?;
        let got: Vec<(u64, u64, u64)> = s
            .iter()
            .map(|t| (t.bn_count, t.ordering_count.unwrap_or(0), t.trial_count))
            .collect();
        let want = vec![(1, 1, 1), (3, 2, 6), (21, 6, 126), (315, 24, 7560)];
        Ok((got == want, format!("{got:?}")))
    });

    report.criterion(2, "table outcome, reverse-topological trials", || {
        let s = summaries.as_ref().map_err(|e| Error::Precondition(e.to_string()))?;
        let parts: Vec<String> = s
            .iter()
            .map(|t| format!("n={} {}/{}", t.n, t.rev_topo_matches, t.rev_topo_trials))
            .collect();
        Ok((s.iter().all(TableSummary::must_pass_ok), parts.join(", ")))
    });
    if let Ok(s) = &summaries {
        let parts: Vec<String> = s
            .iter()
            .map(|t| format!("n={} {}/{}", t.n, t.match_count, t.trial_count))
            .collect();
        println!("info criterion 2: all node1-last orders (report-only): {}", parts.join(", "));
    }

    report.criterion(3, "moral closure of the worked example", || {
        let bn = models::five_node_collider(0)?;
        let sigma = bn.dag().default_reverse_topological();
        let rt = roundtrip(&bn, &sigma, &MarginalizationPolicy::InternalOnly)?;
        let names = bn.names();
        let want: BTreeSet<(String, String)> =
            [("A", "B"), ("B", "E"), ("C", "D"), ("D", "E"), ("B", "D"), ("B", "C")]
                .iter()
                .map(|&(a, b)| (a.to_string(), b.to_string()))
                .collect();
        let got: BTreeSet<(String, String)> = rt
            .edges
            .iter()
            .map(|&(a, b)| (names[a.0].clone(), names[b.0].clone()))
            .collect();
        Ok((got == want, format!("{got:?}")))
    });

    report.criterion(4, "idempotence on closures, k <= 5", || {
        let all = pipelines(5);
        let mut ok = 0;
        for (i, (bn, sigma)) in all.iter().enumerate() {
            ok += usize::from(verify_idempotence(
                bn,
                sigma,
                &MarginalizationPolicy::InternalOnly,
                i as u64,
            )?);
        }
        Ok((ok == all.len(), format!("{ok}/{} closures unchanged", all.len())))
    });

    report.criterion(5, "HMM exemplar", || {
        let bn = models::hmm(3, 0)?;
        let rt = roundtrip(&bn, &bn.dag().default_reverse_topological(), &MarginalizationPolicy::InternalOnly)?;
        let d = &rt.decompilation;
        let chain: BTreeSet<Edge> = [(0, 1), (1, 2), (0, 3), (1, 4), (2, 5)]
            .iter()
            .map(|&(a, b)| (NodeId(a), NodeId(b)))
            .collect();
        let ok = d.regions.len() == 3 && d.dag().edges() == &chain && &rt.edges == bn.dag().edges();
        let names = d.bn.names();
        let shown: Vec<String> = d
            .dag()
            .edges()
            .iter()
            .map(|&(a, b)| format!("{}->{}", names[a.0], names[b.0]))
            .collect();
        Ok((ok, format!("{} latents, edges {}", d.regions.len(), shown.join(" "))))
    });

    report.criterion(6, "distribution preservation, k <= 4", || {
        let mut worst: f64 = 0.0;
        let mut checks = 0usize;
        for (bn, sigma) in pipelines(4) {
            let joint = joint_of_bn(&bn, DEFAULT_SPACE_CAP)?;
            for policy in &POLICIES {
                let marg = policy.variables(&bn);
                let spn = bn2spn(&bn, &sigma, &marg)?;
                let cards: Vec<usize> = bn.cardinalities().iter().map(|c| c + 1).collect();
                for s in assignments(&cards) {
                    let e: Vec<Option<usize>> = s
                        .iter()
                        .enumerate()
                        .map(|(v, &x)| (x < 2 && !marg.contains(&NodeId(v))).then_some(x))
                        .collect();
                    worst = worst.max((spn.evaluate(&e)? - joint.mass(&e)).abs());
                    checks += 1;
                }
            }
        }
        Ok((worst <= TOL, format!("{checks} evidence checks, max error {worst:.1e}")))
    });

    report.criterion(7, "minimal I-map against the augmented joint, k <= 4", || {
        let all = pipelines(4);
        let (mut imap, mut minimal) = (0, 0);
        let mut removable = Vec::new();
        for (bn, sigma) in &all {
            let rt = roundtrip(bn, sigma, &MarginalizationPolicy::InternalOnly)?;
            let r = check_minimal_imap(&rt.decompilation)?;
            imap += usize::from(r.is_imap);
            minimal += usize::from(r.is_minimal_imap());
            let names = rt.decompilation.bn.names();
            removable.extend(r.removable.iter().map(|&(a, b)| format!("{}->{}", names[a.0], names[b.0])));
        }
        let n = all.len();
        Ok((
            imap == n && minimal == n,
            format!("{imap}/{n} I-maps, {minimal}/{n} minimal; removable edges {removable:?}"),
        ))
    });
    {
        let all = pipelines(4);
        let mut minimal = 0;
        for (bn, sigma) in &all {
            let rt = roundtrip(bn, sigma, &MarginalizationPolicy::InternalOnly).unwrap();
            let d = spn2bn(&reweight(&rt.spn, 1)).unwrap();
            minimal += usize::from(check_minimal_imap(&d).unwrap().is_minimal_imap());
        }
        println!(
            "info criterion 7: same circuits with random weights: {minimal}/{} minimal",
            all.len()
        );
    }

    report.criterion(8, "latent conditional independence, HMM and k <= 4", || {
        let hmm = models::hmm(3, 0)?;
        let mut all = vec![(hmm.clone(), hmm.dag().default_reverse_topological())];
        all.extend(pipelines(4));
        let mut worst: f64 = 0.0;
        for (bn, sigma) in &all {
            for policy in &POLICIES {
                let rt = roundtrip(bn, sigma, policy)?;
                worst = worst.max(lemma_of(&rt.decompilation)?.max_deviation);
            }
        }
        Ok((worst <= TOL, format!("{} pipelines, max deviation {worst:.1e}", 2 * all.len())))
    });

    report.criterion(9, "validity and fixpoint idempotence, k <= 5", || {
        let all = pipelines(5);
        let (mut valid, mut stable, mut total) = (0, 0, 0);
        for (bn, sigma) in &all {
            for policy in &POLICIES {
                let spn = bn2spn(bn, sigma, &policy.variables(bn))?;
                total += 1;
                valid += usize::from(spn.check_valid().violations.is_empty());
                stable += usize::from(simplify_fixpoint(&spn)?.fingerprint() == spn.fingerprint());
            }
        }
        Ok((
            valid == total && stable == total,
            format!("{valid}/{total} valid, {stable}/{total} fixpoints"),
        ))
    });

    if report.failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", report.failures);
        ExitCode::FAILURE
    }
}
