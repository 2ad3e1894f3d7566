//! Inference throughput of the desk-scale network at a few batch sizes.
//!
//! cargo run --release -p handpose --example bench -- 500

use handpose::bench::bench_inference;
use handpose::network::{Network, NetworkConfig};
use handpose::topology::DatasetId;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> handpose::Result<()> {
    let frames = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let net = Network::build(&NetworkConfig::desk(DatasetId::Msra), &mut ChaCha8Rng::seed_from_u64(0))?;
    for batch in [1, 4, 16] {
        println!("{}\n", bench_inference(&net, frames, batch, 0)?);
    }
    Ok(())
}
