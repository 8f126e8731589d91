//! Evaluate an application graph on one input vector and report per-op
//! activity.
//!
//! `cargo run --example simulate_graph [graph.json]`

use pe_dse::fixtures;
use pe_dse::graph::parse_graph;
use pe_dse::sim::{required_inputs, simulate, InputVector};

fn main() -> anyhow::Result<()> {
    let g = match std::env::args().nth(1) {
        Some(path) => parse_graph(&std::fs::read_to_string(path)?)?,
        None => fixtures::convolution(),
    };
    let x: InputVector = required_inputs(&g)
        .into_iter()
        .enumerate()
        .map(|(i, k)| (k, i as u16 + 1))
        .collect();
    let r = simulate(&g, &x)?;
    println!("inputs  {x:?}");
    println!("outputs {:?}", r.outputs);
    println!("{r:#?}");
    Ok(())
}
