//! The five-node collider A -> B -> E <- D <- C. Compiling and decompiling
//! returns its moral closure: B-D marries the parents of E and B-C then
//! marries the parents of D.
//!
//! cargo run --example moral_closure

use bnspn::models;
use bnspn::verify::{roundtrip, verify_idempotence, MarginalizationPolicy};

fn main() -> bnspn::Result<()> {
    let bn = models::five_node_collider(3)?;
    let names = bn.names();
    let sigma = bn.dag().default_reverse_topological();
    let show = |edges: &std::collections::BTreeSet<bnspn::graph::Edge>| {
        edges
            .iter()
            .map(|&(a, b)| format!("{}->{}", names[a.0], names[b.0]))
            .collect::<Vec<_>>()
            .join(" ")
    };

    println!("input:   {}", show(bn.dag().edges()));
    let closure = bn.dag().moral_closure(&sigma.reversed())?;
    println!("closure: {}", show(closure.edges()));

    let rt = roundtrip(&bn, &sigma, &MarginalizationPolicy::InternalOnly)?;
    println!("decompiled: {}", show(&rt.edges));
    assert_eq!(&rt.edges, closure.edges());

    // Feeding the closure back in returns it unchanged.
    let stable = verify_idempotence(&bn, &sigma, &MarginalizationPolicy::InternalOnly, 5)?;
    println!("closure is a fixpoint: {stable}");
    Ok(())
}
