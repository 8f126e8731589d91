//! Generate a PE specification from a merged datapath, check every
//! configuration against its source pattern and print the JSON.

use pe_dse::cost::{pe_area, CostTable};
use pe_dse::fixtures;
use pe_dse::merger::merge_pair;
use pe_dse::pe_spec::generate_pe_spec;
use rand::SeedableRng;

fn main() -> anyhow::Result<()> {
    let costs = CostTable::default();
    let dp = merge_pair(&fixtures::merge_left(), &fixtures::merge_right(), &costs)?.datapath;
    let spec = generate_pe_spec(&dp)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let failures = spec.verify(200, &mut rng);
    anyhow::ensure!(failures.is_empty(), "{failures:?}");
    eprintln!(
        "{} configurations, {} muxes, {} config bits, area {}",
        spec.configurations.len(),
        spec.mux_count,
        spec.config_bits,
        pe_area(&spec, &costs)?
    );
    println!("{}", spec.to_json());
    Ok(())
}
