//! Merge two small datapaths, print the chosen merge opportunities and the
//! resulting hardware as Graphviz.

use pe_dse::cost::CostTable;
use pe_dse::fixtures;
use pe_dse::merger::{merge_pair, MergeOpportunity};

fn main() -> anyhow::Result<()> {
    let out = merge_pair(&fixtures::merge_left(), &fixtures::merge_right(), &CostTable::default())?;
    println!(
        "{} opportunities, clique of {} with weight {}",
        out.compatibility.opportunities.len(),
        out.clique.len(),
        out.clique_weight
    );
    for &i in &out.clique {
        match &out.compatibility.opportunities[i] {
            MergeOpportunity::Node { a, b, weight } => println!("  node {a} ~ {b} saves {weight}"),
            MergeOpportunity::Edge { a_src, a_dst, b_src, b_dst, weight, .. } => {
                println!("  edge {a_src}->{a_dst} ~ {b_src}->{b_dst} saves {weight}")
            }
        }
    }
    println!("{}", out.datapath.to_dot());
    Ok(())
}
