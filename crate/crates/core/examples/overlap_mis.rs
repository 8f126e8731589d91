//! Occurrences of a pattern can share nodes. Counting only a non-overlapping
//! set gives the number of times the pattern can actually be used.

use pe_dse::fixtures;
use pe_dse::miner::{mine_frequent_subgraphs, MiningConfig};
use pe_dse::mis::{analyze, build_overlap_graph, rank_patterns, DEFAULT_EXACT_THRESHOLD};

fn main() -> anyhow::Result<()> {
    let g = fixtures::convolution_core();
    let mined = mine_frequent_subgraphs(&g, &MiningConfig::default())?;
    let ranked = rank_patterns(mined.iter().map(|m| analyze(m, DEFAULT_EXACT_THRESHOLD)).collect())?;
    println!("{:>4} {:>4} {:>6}  ops", "freq", "mis", "edges");
    for r in ranked.iter().take(8) {
        let og = build_overlap_graph(&pe_dse::miner::MinedPattern {
            pattern: r.pattern.clone(),
            frequency: r.frequency,
            embeddings: r.embeddings.clone(),
        });
        let ops: Vec<String> = r.pattern.graph.nodes().iter().map(|n| n.op.to_string()).collect();
        println!("{:>4} {:>4} {:>6}  {}", r.frequency, r.mis_size, og.edges.len(), ops.join(","));
    }
    Ok(())
}
