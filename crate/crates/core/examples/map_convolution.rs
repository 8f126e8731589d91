//! Map the convolution onto a plain add/mul PE and onto one that also fuses
//! multiply-add-add, then check both netlists against the application.

use pe_dse::cost::{evaluate_mapping, CostTable};
use pe_dse::datapath::MergedDatapath;
use pe_dse::fixtures;
use pe_dse::mapper::{map_application, simulate_mapping};
use pe_dse::merger::merge_into;
use pe_dse::op::OpKind;
use pe_dse::pe_spec::generate_pe_spec;
use pe_dse::sim::{random_inputs, simulate};
use rand::SeedableRng;
use std::collections::BTreeSet;

fn main() -> anyhow::Result<()> {
    let costs = CostTable::default();
    let app = fixtures::convolution_with_weights([3, 5, 7, 11]);
    let base = MergedDatapath::single_unit("pe", &BTreeSet::from([OpKind::Add, OpKind::Mul]));
    let mac = merge_into(&base, &fixtures::mul_add_add(), "mac", &costs)?.datapath;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for (label, dp) in [("add/mul", &base), ("mac", &mac)] {
        let spec = generate_pe_spec(dp)?;
        let m = map_application(&app, &spec)?;
        let keys = m.required_inputs();
        let mut traces = Vec::new();
        for _ in 0..100 {
            let x = random_inputs(&keys, &mut rng);
            let got = simulate_mapping(&m, &spec, &x)?;
            anyhow::ensure!(got.outputs == simulate(&app, &x)?.outputs, "mismatch on {x:?}");
            traces.push(got);
        }
        let report = evaluate_mapping(&m, &spec, &traces, &costs, None)?;
        println!(
            "{label:<8} {} PEs {:?}  total area {}  energy/op {:.3}",
            m.pe_count(),
            m.histogram(),
            report.total_area,
            report.energy_per_op
        );
    }
    Ok(())
}
