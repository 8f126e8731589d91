//! Mine the convolution kernel for recurring subgraphs and list the ten most
//! frequent ones.
//!
//! `cargo run --example mine_patterns [graph.json]`

use pe_dse::fixtures;
use pe_dse::graph::parse_graph;
use pe_dse::miner::{mine_frequent_subgraphs, MiningConfig};

fn main() -> anyhow::Result<()> {
    let g = match std::env::args().nth(1) {
        Some(path) => parse_graph(&std::fs::read_to_string(path)?)?,
        None => fixtures::convolution(),
    };
    let mut mined = mine_frequent_subgraphs(&g, &MiningConfig::default())?;
    mined.sort_by(|a, b| b.frequency.cmp(&a.frequency).then(b.pattern.node_count().cmp(&a.pattern.node_count())));
    println!("{} patterns with support >= 2", mined.len());
    for m in mined.iter().take(10) {
        let ops: Vec<String> = m.pattern.graph.nodes().iter().map(|n| n.op.to_string()).collect();
        println!("  freq {:>2}  nodes {}  {}", m.frequency, m.pattern.node_count(), ops.join(","));
    }
    Ok(())
}
