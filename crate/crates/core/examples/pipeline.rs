//! Run the full flow from a TOML config and print the summary table.
//!
//! `cargo run --example pipeline [config.toml]` (defaults to data/pipeline.toml;
//! data/pooled.toml shares one PE ladder across two applications)

use pe_dse::pipeline::{run_pipeline, PipelineConfig};
use std::path::PathBuf;

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/pipeline.toml"));
    let cfg = PipelineConfig::load(&path)?;
    let summary = run_pipeline(&cfg)?;
    println!("{:<14} {:<4} {:<14} {:>5} {:>8} {:>10} {:>9}", "ladder", "pe", "app", "PEs", "pe_area", "total", "E/op");
    for r in &summary.rows {
        println!(
            "{:<14} pe{:<2} {:<14} {:>5} {:>8} {:>10} {:>9.4}",
            r.ladder, r.variant, r.application, r.pe_count, r.pe_area, r.total_area, r.energy_per_op
        );
    }
    println!("outputs in {}", cfg.out_dir.display());
    Ok(())
}
