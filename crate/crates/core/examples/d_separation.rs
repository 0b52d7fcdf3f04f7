//! d-separation queries on the collider, checked against the joint of a
//! network with random CPTs.
//!
//! cargo run --example d_separation

use std::collections::BTreeSet;

use bnspn::bayesnet::{is_independent, joint_of_bn, DEFAULT_SPACE_CAP};
use bnspn::{models, NodeId};

fn main() -> bnspn::Result<()> {
    let bn = models::five_node_collider(11)?;
    let joint = joint_of_bn(&bn, DEFAULT_SPACE_CAP)?;
    let id = |name: &str| bn.index_of(name).unwrap();
    let set = |names: &[&str]| names.iter().map(|n| id(n)).collect::<BTreeSet<NodeId>>();

    let queries: [(&[&str], &[&str], &[&str]); 5] = [
        (&["A"], &[], &["C"]),
        (&["A"], &["E"], &["C"]),
        (&["A"], &["B"], &["E"]),
        (&["A"], &["B", "E"], &["D"]),
        (&["B"], &["D", "E"], &["C"]),
    ];
    for (x, z, y) in queries {
        let (xs, zs, ys) = (set(x), set(z), set(y));
        let sep = bn.dag().d_separated(&xs, &zs, &ys)?;
        let ind = is_independent(&joint, &xs, &zs, &ys, 1e-9);
        println!("{x:?} _|_ {y:?} | {z:?}: d-separated {sep}, independent {ind}");
        assert_eq!(sep, ind);
    }
    Ok(())
}
