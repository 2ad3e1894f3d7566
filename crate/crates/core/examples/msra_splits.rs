//! Leave-one-subject-out partitions over a descriptor with nine subjects.
//!
//! cargo run -p handpose --example msra_splits

use handpose::data::{generate_synthetic, msra_splits, SyntheticSpec};
use handpose::topology::DatasetId;

fn main() -> handpose::Result<()> {
    let spec = SyntheticSpec { subjects: 9, ..SyntheticSpec::for_dataset(DatasetId::Msra, 0) };
    let data = generate_synthetic(&spec, 36)?;
    for (k, (train, test)) in msra_splits(&data.descriptor)?.iter().enumerate() {
        println!("fold {k}: train {:2} frames, test P{k} {:?}", train.len(), test);
    }
    Ok(())
}
