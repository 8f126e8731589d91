//! Area breakdown of the PE variant ladder for an application, under the
//! default cost table and a custom one loaded from JSON.
//!
//! `cargo run --example cost_variants [costs.json]`

use pe_dse::cost::{block_area, pe_area, spec_mux_area, CostTable};
use pe_dse::fixtures;
use pe_dse::merger::build_pe_variants;
use pe_dse::miner::{mine_frequent_subgraphs, region_ops, MiningConfig};
use pe_dse::mis::{analyze, rank_patterns, DEFAULT_EXACT_THRESHOLD};
use pe_dse::op::OpKind;
use pe_dse::pe_spec::generate_pe_spec;

fn main() -> anyhow::Result<()> {
    let costs = match std::env::args().nth(1) {
        Some(path) => {
            let t: CostTable = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            t.validate()?;
            t
        }
        None => CostTable::default(),
    };
    let app = fixtures::convolution();
    let cfg = MiningConfig::default();
    let mined = mine_frequent_subgraphs(&app, &cfg)?;
    let ranked = rank_patterns(mined.iter().map(|m| analyze(m, DEFAULT_EXACT_THRESHOLD)).collect())?;
    let baseline = OpKind::ALL.into_iter().filter(|o| o.is_compute()).collect();
    let variants = build_pe_variants(&ranked, &baseline, &region_ops(&app, &cfg), 4, &costs)?;
    println!("cost table {}", costs.version);
    println!("{:<4} {:>8} {:>8} {:>6} {:>8}", "pe", "blocks", "muxes", "bits", "area");
    for (i, dp) in variants.iter().enumerate() {
        let spec = generate_pe_spec(dp)?;
        println!(
            "pe{:<2} {:>8} {:>8} {:>6} {:>8}",
            i + 1,
            block_area(dp, &costs)?,
            spec_mux_area(&spec, &costs),
            spec.config_bits,
            pe_area(&spec, &costs)?
        );
    }
    Ok(())
}
