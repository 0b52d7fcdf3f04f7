//! Writes the bundled models as BN JSON, compiles one, and reads both
//! files back.
//!
//! cargo run --example json_io -- /tmp/models

use std::path::PathBuf;

use bnspn::compiler::{bn2spn, internal_variables};
use bnspn::{models, BayesNet, Circuit};

fn main() -> bnspn::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "models".into()));
    std::fs::create_dir_all(&dir).expect("create output directory");

    let hmm = models::hmm(3, 1)?;
    let collider = models::five_node_collider(1)?;
    for (name, bn) in [("hmm", &hmm), ("collider", &collider)] {
        let path = dir.join(format!("{name}.json"));
        std::fs::write(&path, bn.to_json()).expect("write BN");
        let back = BayesNet::from_json(&std::fs::read_to_string(&path).expect("read BN"))?;
        assert_eq!(&back, bn);
        println!("{}: {} variables, {} edges", path.display(), back.len(), back.dag().edge_count());
    }

    let spn = bn2spn(&hmm, &hmm.dag().default_reverse_topological(), &internal_variables(&hmm))?;
    let path = dir.join("hmm_spn.json");
    std::fs::write(&path, spn.to_json()).expect("write SPN");
    let back = Circuit::from_json(&std::fs::read_to_string(&path).expect("read SPN"))?;
    assert_eq!(back.fingerprint(), spn.fingerprint());
    println!("{}: {} nodes, fingerprint {}", path.display(), back.len(), &back.fingerprint()[..16]);
    Ok(())
}
