//! Decompiles a compiled HMM and prints the latent regions and the
//! recovered network with its CPTs.
//!
//! cargo run --example decompile_hmm

use bnspn::compiler::{bn2spn, internal_variables};
use bnspn::decompiler::spn2bn;
use bnspn::models;

fn main() -> bnspn::Result<()> {
    let bn = models::hmm(3, 7)?;
    let spn = bn2spn(&bn, &bn.dag().default_reverse_topological(), &internal_variables(&bn))?;
    let d = spn2bn(&spn)?;

    for (k, r) in d.regions.iter().enumerate() {
        println!(
            "Z{}: depth {}, {} sums, scope {:?}",
            k + 1,
            r.depth,
            r.members.len(),
            r.scope.iter().map(|v| v.0).collect::<Vec<_>>()
        );
    }
    let names = d.bn.names();
    for &(a, b) in d.dag().edges() {
        println!("{} -> {}", names[a.0], names[b.0]);
    }
    for (v, cpt) in d.bn.cpts().iter().enumerate() {
        println!("P({} | parents) = {:?}", names[v], cpt.table);
    }
    println!();
    print!("{}", d.bn.to_dot());
    Ok(())
}
