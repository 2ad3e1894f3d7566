//! Prints each dataset's joint layout and the order in which the regression
//! module visits joints.
//!
//! cargo run -p handpose --example topology [-- nyu]

use handpose::topology::{hmt_order, topology_for, DatasetId, FINGERS};

fn main() -> handpose::Result<()> {
    let which: Vec<DatasetId> = match std::env::args().nth(1) {
        Some(name) => vec![name.parse()?],
        None => DatasetId::ALL.to_vec(),
    };
    for id in which {
        let t = topology_for(id);
        println!("== {id}: {} joints, root {} ({})", t.joint_count, t.root, t.joint_names[t.root]);
        for (finger, chain) in FINGERS.iter().zip(&t.chains) {
            let names: Vec<&str> = chain.iter().map(|&j| t.joint_names[j].as_str()).collect();
            println!("  {finger:<6} {chain:?}  {}", names.join(" -> "));
        }
        let order: Vec<String> = hmt_order(&t).iter().map(|(j, p)| format!("{p}->{j}")).collect();
        println!("  visit order: {}", order.join(" "));
        println!("  descriptor:\n{}", t.to_descriptor().lines().map(|l| format!("    {l}")).collect::<Vec<_>>().join("\n"));
    }
    Ok(())
}
