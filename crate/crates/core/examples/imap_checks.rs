//! Decompiles every family network up to size 4 and checks the result
//! against the joint of its augmented circuit: I-map, minimality, and the
//! conditional-independence property of the latents.
//!
//! cargo run --release --example imap_checks

use bnspn::bayesnet::{enumerate_family, random_cpts};
use bnspn::decompiler::RegionMode;
use bnspn::verify::{check_minimal_imap, lemma_of, roundtrip_with, MarginalizationPolicy, RoundtripOptions};

fn main() -> bnspn::Result<()> {
    for mode in [RegionMode::LayerLocal, RegionMode::Global] {
        for policy in [MarginalizationPolicy::InternalOnly, MarginalizationPolicy::None] {
            let (mut runs, mut errors, mut imaps, mut minimal, mut lemma_ok) = (0, 0, 0, 0, 0);
            let mut worst: f64 = 0.0;
            for n in 2..=4 {
                for (i, dag) in enumerate_family(n)?.into_iter().enumerate() {
                    let bn = random_cpts(&dag, &vec![2; n], i as u64)?;
                    for sigma in dag.reverse_topological_orderings() {
                        runs += 1;
                        let options = RoundtripOptions { regions: mode, ..Default::default() };
                        let rt = match roundtrip_with(&bn, &sigma, &policy, options) {
                            Ok(rt) => rt,
                            Err(e) => {
                                errors += 1;
                                if errors <= 3 {
                                    println!("  n={n} bn={i} sigma={sigma}: {e}");
                                }
                                continue;
                            }
                        };
                        let m = check_minimal_imap(&rt.decompilation)?;
                        imaps += usize::from(m.is_imap);
                        minimal += usize::from(m.is_minimal_imap());
                        let l = lemma_of(&rt.decompilation)?;
                        worst = worst.max(l.max_deviation);
                        lemma_ok += usize::from(l.passes(1e-9));
                    }
                }
            }
            println!(
                "{:<12} {:<9} runs {runs:>3}  errors {errors:>3}  i-map {imaps:>3}  minimal {minimal:>3}  lemma {lemma_ok:>3} (max dev {worst:.2e})",
                mode.name(),
                policy.label()
            );
        }
    }
    Ok(())
}
