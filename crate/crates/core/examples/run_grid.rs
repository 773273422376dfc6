//! Run an experiment file through the library and print the summary, the
//! same work `legup run` followed by `legup summarize` does.
//!
//! cargo run --release --example run_grid -- crates/core/examples/configs/quick.toml

use legup::runner::{self, ExperimentConfig};

fn main() -> legup::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "crates/core/examples/configs/quick.toml".into());
    let experiment = runner::validate(&ExperimentConfig::load(path)?)?;
    let outcome = runner::run(&experiment)?;
    for f in &outcome.failures {
        eprintln!("failed: {f}");
    }
    println!("{}", runner::summarize(&outcome.reports));
    println!("reports in {}", outcome.output_dir.display());
    Ok(())
}
