//! Compiles a three-step HMM, prints the circuit shape and evaluates a few
//! queries against the network.
//!
//! cargo run --example compile_hmm

use bnspn::bayesnet::{joint_of_bn, DEFAULT_SPACE_CAP};
use bnspn::compiler::{bn2spn, internal_variables};
use bnspn::decompiler::sum_layers;
use bnspn::models;

fn main() -> bnspn::Result<()> {
    let bn = models::hmm(3, 7)?;
    let sigma = bn.dag().default_reverse_topological();
    let marg = internal_variables(&bn);
    let spn = bn2spn(&bn, &sigma, &marg)?;

    let names = bn.names();
    let summed: Vec<&str> = marg.iter().map(|v| names[v.0].as_str()).collect();
    println!("order {sigma}, summing out {summed:?}");
    println!("{} nodes, {} sums", spn.len(), spn.sums().count());
    for (depth, layer) in sum_layers(&spn).iter().enumerate() {
        println!("  sum layer {depth}: {} nodes", layer.len());
    }

    // Evidence over (H1, H2, H3, O1, O2, O3). Hidden variables are summed out.
    let joint = joint_of_bn(&bn, DEFAULT_SPACE_CAP)?;
    for obs in [[0, 0, 0], [1, 0, 1], [1, 1, 1]] {
        let e = vec![None, None, None, Some(obs[0]), Some(obs[1]), Some(obs[2])];
        println!("P(O = {obs:?}) = {:.6}  (network {:.6})", spn.evaluate(&e)?, joint.mass(&e));
    }
    Ok(())
}
