//! Loads a TOML run configuration with command-line style overrides and
//! prints the resolved settings.
//!
//! cargo run -p handpose --example run_config -- configs/default.toml train.epochs=3 network.use_hmt=false

use handpose::config::RunConfig;

fn main() -> handpose::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "configs/default.toml".into());
    let overrides: Vec<String> = args.collect();
    let cfg = RunConfig::load(&path, &overrides)?;
    println!("# {path} with {} override(s)\n{}", overrides.len(), cfg.to_toml()?);
    println!("variant {}", cfg.network.variant_name());
    Ok(())
}
