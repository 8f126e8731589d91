mod common;

use common::{brute_embeddings, brute_mis, embedding_sets};
use pe_dse::canon::canonical_key;
use pe_dse::cost::{evaluate_mapping, pe_area, CostError, CostTable};
use pe_dse::datapath::MergedDatapath;
use pe_dse::fixtures;
use pe_dse::graph::{parse_graph, serialize_graph, DataflowGraph, GraphBuilder};
use pe_dse::iso::find_embeddings;
use pe_dse::mapper::{emit_netlist, map_application, parse_netlist, Mapping};
use pe_dse::merger::{build_pe_variants, merge_many, merge_pair, MergeError};
use pe_dse::miner::{mine_frequent_subgraphs, region_ops, MiningConfig};
use pe_dse::mis::{analyze, build_overlap_graph, rank_patterns, DEFAULT_EXACT_THRESHOLD};
use pe_dse::op::OpKind;
use pe_dse::pe_spec::{enumerate_configurations, generate_pe_spec, single_op_graph};
use pe_dse::pipeline::{run_pipeline, PipelineConfig};
use pe_dse::sim::{simulate, InputVector, SimResult};
use std::collections::{BTreeMap, BTreeSet};

fn inputs(pairs: &[(&str, u16)]) -> InputVector {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn ops(list: &[OpKind]) -> BTreeSet<OpKind> {
    list.iter().copied().collect()
}

#[test]
fn convolution_sums_inputs() {
    let g = fixtures::convolution();
    let x = inputs(&[("i0", 1), ("i1", 2), ("i2", 3), ("i3", 4), ("c", 0)]);
    assert_eq!(simulate(&g, &x).unwrap().outputs["out"], 10);
}

#[test]
fn merged_datapath_computes_right_configuration() {
    let out = merge_pair(&fixtures::merge_left(), &fixtures::merge_right(), &CostTable::default()).unwrap();
    let dp = out.datapath;
    let cfg = dp.configuration("b").unwrap();
    let binding = dp.input_binding(cfg);
    // b1 reads the constant on port 0 and its operand on port 1; b3 adds two operands
    let src = inputs(&[("b1.1", 3), ("b3.0", 4), ("b3.1", 5)]);
    let x: InputVector = binding.iter().map(|(k, d)| (d.clone(), src[k])).collect();
    let mut values = cfg.values.clone();
    values.insert(cfg.node_map["b0"].clone(), 2);
    let r = dp
        .simulate_config(&cfg.name, &cfg.op_selects, &cfg.mux_settings, &values, &x)
        .unwrap();
    assert_eq!(r.outputs[&cfg.node_map["b2"]], 15);
}

#[test]
fn pe_area_examples() {
    let costs = CostTable::default();
    let single = MergedDatapath::from_graph("a", &single_op_graph("a", OpKind::Add)).unwrap();
    assert_eq!(pe_area(&generate_pe_spec(&single).unwrap(), &costs).unwrap(), 80.0);
    let merged = merge_pair(&fixtures::merge_left(), &fixtures::merge_right(), &costs).unwrap();
    assert_eq!(pe_area(&generate_pe_spec(&merged.datapath).unwrap(), &costs).unwrap(), 702.0);
    let empty = MergedDatapath::assemble(Vec::new(), Vec::new());
    assert_eq!(pe_area::cost_of_empty(&empty, &costs), 0.0);
}

mod pe_area {
    use super::*;
    pub fn cost_of_empty(dp: &MergedDatapath, costs: &CostTable) -> f64 {
        pe_dse::cost::block_area(dp, costs).unwrap() + pe_dse::cost::mux_area(dp, costs)
    }
}

#[test]
fn single_add_energy_is_alu_energy() {
    let costs = CostTable::default();
    let g = GraphBuilder::new().node("a", OpKind::Add).build().unwrap();
    let spec = generate_pe_spec(&MergedDatapath::single_unit("pe", &ops(&[OpKind::Add]))).unwrap();
    let m = map_application(&g, &spec).unwrap();
    let trace = pe_dse::mapper::simulate_mapping(&m, &spec, &inputs(&[("a.0", 1), ("a.1", 2)])).unwrap();
    let report = evaluate_mapping(&m, &spec, &[trace], &costs, Some("nominal".into())).unwrap();
    assert_eq!(report.pe_count, 1);
    assert!((report.energy_per_op - 0.8).abs() < 1e-12);
    assert_eq!(report.frequency_label.as_deref(), Some("nominal"));
    assert_eq!(report.cost_table.version, costs.version);
}

#[test]
fn degenerate_traces_are_errors() {
    let costs = CostTable::default();
    let spec = generate_pe_spec(&MergedDatapath::single_unit("pe", &ops(&[OpKind::Add]))).unwrap();
    let g = GraphBuilder::new().node("a", OpKind::Add).build().unwrap();
    let m = map_application(&g, &spec).unwrap();
    assert_eq!(evaluate_mapping(&m, &spec, &[], &costs, None), Err(CostError::EmptyTraces));
    assert_eq!(
        evaluate_mapping(&m, &spec, &[SimResult::default()], &costs, None),
        Err(CostError::DivisionByZeroOps)
    );
}

#[test]
fn specialised_pe_beats_baseline_area_when_cheap_enough() {
    let costs = CostTable::default();
    let conv = fixtures::convolution();
    let base = generate_pe_spec(&MergedDatapath::single_unit("pe", &ops(&[OpKind::Add, OpKind::Mul]))).unwrap();
    let mac_dp = pe_dse::merger::merge_into(&base.datapath, &fixtures::mul_add_add(), "mac", &costs)
        .unwrap()
        .datapath;
    let mac = generate_pe_spec(&mac_dp).unwrap();
    let m_base = map_application(&conv, &base).unwrap();
    let m_mac = map_application(&conv, &mac).unwrap();
    assert_eq!(m_base.pe_count(), 8);
    assert_eq!(m_mac.pe_count(), 4);
    let a_base = pe_area(&base, &costs).unwrap();
    let a_mac = pe_area(&mac, &costs).unwrap();
    assert!(a_mac < 2.0 * a_base);
    assert!(a_mac * 4.0 < a_base * 8.0);
}

#[test]
fn fused_multiply_add_spec() {
    let dp = MergedDatapath::from_graph("fma", &fixtures::const_fma()).unwrap();
    let spec = generate_pe_spec(&dp).unwrap();
    assert_eq!(spec.inputs.len(), 2);
    assert_eq!(spec.const_registers.len(), 1);
    assert_eq!(spec.op_set, ops(&[OpKind::Const, OpKind::Mul, OpKind::Add]));
}

#[test]
fn merged_left_right_configurations() {
    let merged = merge_pair(&fixtures::merge_left(), &fixtures::merge_right(), &CostTable::default()).unwrap();
    let configs = enumerate_configurations(&merged.datapath);
    assert_eq!(configs.len(), 2);
    let keys: BTreeSet<_> = configs.iter().map(|c| canonical_key(&c.source).unwrap()).collect();
    assert_eq!(keys.len(), 2);
}

#[test]
fn two_op_alu_has_two_configurations() {
    let dp = MergedDatapath::single_unit("alu", &ops(&[OpKind::Add, OpKind::Sub]));
    assert_eq!(enumerate_configurations(&dp).len(), 2);
}

#[test]
fn merge_many_examples() {
    let costs = CostTable::default();
    let pair = merge_many(
        &[
            ("a".into(), fixtures::merge_left()),
            ("b".into(), fixtures::merge_right()),
        ],
        &costs,
    )
    .unwrap();
    let direct = merge_pair(&fixtures::merge_left(), &fixtures::merge_right(), &costs).unwrap();
    assert_eq!(pair.nodes, direct.datapath.nodes);
    assert_eq!(pair.edges, direct.datapath.edges);

    let g = fixtures::mul_add_add();
    let single = merge_many(&[("g".into(), g.clone())], &costs).unwrap();
    assert_eq!(single.configurations.len(), 1);
    let triple = merge_many(&[("x".into(), g.clone()), ("y".into(), g.clone()), ("z".into(), g.clone())], &costs).unwrap();
    assert_eq!(triple.configurations.len(), 3);
    assert_eq!(triple.units().count(), 3);
    assert_eq!(triple.muxes().count(), 0);
    let maps: BTreeSet<_> = triple.configurations.iter().map(|c| c.node_map.values().cloned().collect::<Vec<_>>()).collect();
    assert_eq!(maps.len(), 1);
    assert_eq!(
        merge_many(&[], &costs),
        Err(MergeError::EmptyPatternList)
    );
}

#[test]
fn variant_ladder_examples() {
    let costs = CostTable::default();
    let conv = fixtures::convolution();
    let cfg = MiningConfig::default();
    let mined = mine_frequent_subgraphs(&conv, &cfg).unwrap();
    let ranked = rank_patterns(mined.iter().map(|m| analyze(m, DEFAULT_EXACT_THRESHOLD)).collect()).unwrap();
    let all: BTreeSet<OpKind> = OpKind::ALL.into_iter().filter(|o| o.is_compute()).collect();
    let v = build_pe_variants(&ranked, &all, &region_ops(&conv, &cfg), 2, &costs).unwrap();
    assert_eq!(v.len(), 2);
    assert_eq!(v[0].op_set(), ops(&[OpKind::Add, OpKind::Mul]));
    assert!(v[1].units().count() > 1);
    let one = build_pe_variants(&ranked, &all, &region_ops(&conv, &cfg), 1, &costs).unwrap();
    assert_eq!(one.len(), 1);

    let adds = GraphBuilder::new()
        .node("a", OpKind::Add)
        .node("b", OpKind::Add)
        .edge("a", "b", 0)
        .build()
        .unwrap();
    let v = build_pe_variants(&[], &all, &region_ops(&adds, &cfg), 1, &costs).unwrap();
    assert_eq!(v[0].op_set(), ops(&[OpKind::Add]));
}

#[test]
fn mapping_small_examples() {
    let spec = generate_pe_spec(&MergedDatapath::single_unit("pe", &ops(&[OpKind::Add]))).unwrap();
    let empty = map_application(&DataflowGraph::default(), &spec).unwrap();
    assert_eq!(
        empty,
        Mapping {
            instances: vec![],
            mem_instances: vec![],
            const_sources: vec![],
            connections: vec![],
            sinks: BTreeMap::new(),
        }
    );
    assert_eq!(parse_netlist(&emit_netlist(&empty)).unwrap(), empty);

    let with_mem = GraphBuilder::new()
        .node("x", OpKind::Input)
        .node("a", OpKind::Add)
        .node("m", OpKind::Mem)
        .node("o", OpKind::Output)
        .edge("x", "a", 0)
        .edge("a", "m", 0)
        .edge("m", "o", 0)
        .build()
        .unwrap();
    let m = map_application(&with_mem, &spec).unwrap();
    assert_eq!(m.mem_instances, vec!["m".to_string()]);
    assert_eq!(m.pe_count(), 1);
    let x = inputs(&[("x", 5), ("a.1", 6)]);
    let got = pe_dse::mapper::simulate_mapping(&m, &spec, &x).unwrap();
    assert_eq!(got.outputs, simulate(&with_mem, &x).unwrap().outputs);
}

#[test]
fn overlap_graph_agrees_with_exhaustive_mis() {
    let g = fixtures::convolution_core();
    let mined = mine_frequent_subgraphs(&g, &MiningConfig::default()).unwrap();
    for m in &mined {
        let og = build_overlap_graph(m);
        if og.vertices > 20 {
            continue;
        }
        let r = analyze(m, DEFAULT_EXACT_THRESHOLD);
        assert_eq!(r.mis_size, brute_mis(og.vertices, &og.edges));
    }
}

#[test]
fn embeddings_agree_with_exhaustive_search() {
    let g = fixtures::convolution();
    for pattern in [fixtures::mul_add_add(), fixtures::const_fma(), fixtures::merge_right()] {
        assert_eq!(
            embedding_sets(&find_embeddings(&pattern, &g)),
            brute_embeddings(&pattern, &g)
        );
    }
}

#[test]
fn bundled_data_files_load() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    for name in ["convolution", "convolution_core", "merge_left", "merge_right", "mul_add_add", "const_fma", "blend"] {
        let text = std::fs::read_to_string(dir.join(format!("{name}.json"))).unwrap();
        let g = parse_graph(&text).unwrap();
        assert_eq!(parse_graph(&serialize_graph(&g)).unwrap(), g);
    }
    let costs: CostTable = serde_json::from_str(&std::fs::read_to_string(dir.join("costs.json")).unwrap()).unwrap();
    assert_eq!(costs, CostTable::default());
}

fn write_app(dir: &std::path::Path, name: &str, g: &DataflowGraph) {
    std::fs::write(dir.join(name), serialize_graph(g)).unwrap();
}

#[test]
fn pipeline_single_variant_is_baseline_only() {
    let dir = tempfile::tempdir().unwrap();
    write_app(dir.path(), "conv.json", &fixtures::convolution());
    let cfg = PipelineConfig::from_toml("applications = [\"conv.json\"]\nk = 1\nvectors = 10\n", dir.path()).unwrap();
    let summary = run_pipeline(&cfg).unwrap();
    assert_eq!(summary.rows.len(), 1);
    assert_eq!(summary.rows[0].pe_count, 8);
    assert!(dir.path().join("out/conv/pe1/pe.json").exists());
}

#[test]
fn pooling_duplicate_apps_matches_single_app() {
    let dir = tempfile::tempdir().unwrap();
    write_app(dir.path(), "conv.json", &fixtures::convolution());
    std::fs::create_dir(dir.path().join("copy")).unwrap();
    write_app(&dir.path().join("copy"), "conv.json", &fixtures::convolution());
    let single = PipelineConfig::from_toml("applications = [\"conv.json\"]\nout_dir = \"single\"\nvectors = 10\n", dir.path()).unwrap();
    let pooled = PipelineConfig::from_toml(
        "applications = [\"conv.json\", \"copy/conv.json\"]\ncross_application = true\nout_dir = \"pooled\"\nvectors = 10\n",
        dir.path(),
    )
    .unwrap();
    let a = run_pipeline(&single).unwrap();
    let b = run_pipeline(&pooled).unwrap();
    for variant in 1..=2 {
        let x = a.row("conv", variant, "conv").unwrap();
        for app in ["conv", "conv_2"] {
            let y = b.row("pooled", variant, app).unwrap();
            assert_eq!((x.pe_count, x.total_area), (y.pe_count, y.total_area));
        }
    }
    assert_eq!(
        std::fs::read(dir.path().join("single/conv/pe2/pe.json")).unwrap(),
        std::fs::read(dir.path().join("pooled/pooled/pe2/pe.json")).unwrap()
    );
}

#[test]
fn pipeline_reports_stage_on_failure() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\"nodes\": [}").unwrap();
    let cfg = PipelineConfig::from_toml("applications = [\"bad.json\"]\n", dir.path()).unwrap();
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.stage, "load");
    assert!(err.input.ends_with("bad.json"));
}
