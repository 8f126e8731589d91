use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use pe_dse::cost::{evaluate_mapping, CostTable};
use pe_dse::datapath::MergedDatapath;
use pe_dse::graph::{parse_graph, DataflowGraph};
use pe_dse::mapper::{emit_netlist, map_application, parse_netlist, simulate_mapping};
use pe_dse::merger::{build_pe_variants, merge_many};
use pe_dse::miner::{mine_frequent_subgraphs, region_ops, MinedPattern, MiningConfig};
use pe_dse::mis::{analyze, rank_patterns, MisReport, DEFAULT_EXACT_THRESHOLD};
use pe_dse::op::OpKind;
use pe_dse::pe_spec::{generate_pe_spec, PeSpec};
use pe_dse::pipeline::{run_pipeline, PipelineConfig};
use pe_dse::sim::{self, InputVector, SimTraces};
use rand::SeedableRng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "pe-dse", version, about = "PE design space exploration for CGRAs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine frequent subgraphs of an application graph
    Mine {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 2)]
        min_support: usize,
        #[arg(long, default_value_t = 8)]
        max_nodes: usize,
        /// Leave constants out of mined patterns
        #[arg(long)]
        no_const: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank mined patterns by non-overlapping occurrence count
    Mis {
        #[arg(long)]
        patterns: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EXACT_THRESHOLD)]
        exact_threshold: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge graphs into one datapath, or build PE variants from ranked patterns
    Merge {
        /// Graphs merged left to right
        #[arg(long, num_args = 1.., conflicts_with = "ranked")]
        graphs: Vec<PathBuf>,
        /// Ranked patterns from `mis`; writes pe1.json .. pe<k>.json
        #[arg(long, requires = "graph")]
        ranked: Option<PathBuf>,
        /// Application whose ops prune the baseline
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Comma separated baseline ops; all compute ops by default
        #[arg(long, value_delimiter = ',')]
        baseline: Vec<OpKind>,
        #[arg(long)]
        costs: Option<PathBuf>,
        /// Output file for --graphs, output directory for --ranked
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn a merged datapath into a PE spec
    Genpe {
        #[arg(long)]
        datapath: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cover an application with PE instances
    Map {
        #[arg(long)]
        graph: PathBuf,
        /// PE spec or merged datapath
        #[arg(long)]
        pe: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a graph, or a mapped netlist against its PE spec
    Simulate {
        #[arg(long, required_unless_present = "netlist")]
        graph: Option<PathBuf>,
        #[arg(long, requires = "pe")]
        netlist: Option<PathBuf>,
        #[arg(long)]
        pe: Option<PathBuf>,
        /// JSON list of input vectors; random vectors when absent
        #[arg(long)]
        inputs: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        random: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Area and energy of a mapped application
    Cost {
        #[arg(long)]
        netlist: PathBuf,
        #[arg(long)]
        pe: PathBuf,
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        costs: Option<PathBuf>,
        #[arg(long)]
        frequency_label: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage from a TOML config
    Pipeline {
        #[arg(long)]
        config: PathBuf,
    },
    /// Graphviz rendering of a graph, datapath or PE spec
    Dot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_graph(path: &Path) -> Result<DataflowGraph> {
    parse_graph(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn save<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    save_text(path, &serde_json::to_string_pretty(value)?)
}

fn save_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display()))
}

fn load_costs(path: Option<&Path>) -> Result<CostTable> {
    let Some(p) = path else {
        return Ok(CostTable::default());
    };
    let t: CostTable = load(p)?;
    t.validate()?;
    Ok(t)
}

/// Accepts a PE spec or a merged datapath.
fn load_spec(path: &Path) -> Result<PeSpec> {
    let value: serde_json::Value = load(path)?;
    if value.get("inputs").is_some() {
        Ok(serde_json::from_value(value).with_context(|| format!("parsing {}", path.display()))?)
    } else {
        let dp: MergedDatapath =
            serde_json::from_value(value).with_context(|| format!("parsing {}", path.display()))?;
        Ok(generate_pe_spec(&dp)?)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Mine {
            graph,
            min_support,
            max_nodes,
            no_const,
            out,
        } => {
            let g = load_graph(&graph).context("mine")?;
            let cfg = MiningConfig {
                min_support,
                max_pattern_nodes: max_nodes,
                include_const_nodes: !no_const,
            };
            let mined = mine_frequent_subgraphs(&g, &cfg).context("mine")?;
            log::info!("{} patterns", mined.len());
            save(&out, &mined)
        }
        Command::Mis {
            patterns,
            exact_threshold,
            out,
        } => {
            let mined: Vec<MinedPattern> = load(&patterns).context("mis")?;
            let reports = mined.iter().map(|m| analyze(m, exact_threshold)).collect();
            save(&out, &rank_patterns(reports).context("mis")?)
        }
        Command::Merge {
            graphs,
            ranked,
            graph,
            k,
            baseline,
            costs,
            out,
        } => {
            let costs = load_costs(costs.as_deref()).context("merge")?;
            match ranked {
                Some(ranked) => {
                    let reports: Vec<MisReport> = load(&ranked).context("merge")?;
                    let app = load_graph(graph.as_deref().expect("clap requires graph")).context("merge")?;
                    let baseline = if baseline.is_empty() {
                        OpKind::ALL.into_iter().filter(|o| o.is_compute()).collect()
                    } else {
                        baseline.into_iter().collect()
                    };
                    let app_ops = region_ops(&app, &MiningConfig::default());
                    let variants = build_pe_variants(&reports, &baseline, &app_ops, k, &costs).context("merge")?;
                    for (i, dp) in variants.iter().enumerate() {
                        save(&out.join(format!("pe{}.json", i + 1)), dp)?;
                    }
                    Ok(())
                }
                None => {
                    if graphs.is_empty() {
                        bail!("merge: give --graphs or --ranked");
                    }
                    let named = graphs
                        .iter()
                        .map(|p| {
                            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                            load_graph(p).map(|g| (name, g))
                        })
                        .collect::<Result<Vec<_>>>()
                        .context("merge")?;
                    save(&out, &merge_many(&named, &costs).context("merge")?)
                }
            }
        }
        Command::Genpe { datapath, out } => {
            let dp: MergedDatapath = load(&datapath).context("genpe")?;
            save_text(&out, &generate_pe_spec(&dp).context("genpe")?.to_json())
        }
        Command::Map { graph, pe, out } => {
            let app = load_graph(&graph).context("map")?;
            let spec = load_spec(&pe).context("map")?;
            let m = map_application(&app, &spec).context("map")?;
            log::info!("{} PE instances", m.pe_count());
            save_text(&out, &emit_netlist(&m))
        }
        Command::Simulate {
            graph,
            netlist,
            pe,
            inputs,
            random,
            seed,
            out,
        } => {
            let target = match (&netlist, &graph) {
                (Some(n), _) => {
                    let m = parse_netlist(&read(n)?).context("simulate")?;
                    let spec = load_spec(pe.as_deref().expect("clap requires pe")).context("simulate")?;
                    Err((m, spec))
                }
                (None, Some(g)) => Ok(load_graph(g).context("simulate")?),
                (None, None) => unreachable!("clap requires one of --graph/--netlist"),
            };
            let vectors: Vec<InputVector> = match &inputs {
                Some(p) => load(p).context("simulate")?,
                None => {
                    let keys = match &target {
                        Ok(g) => sim::required_inputs(g),
                        Err((m, _)) => m.required_inputs(),
                    };
                    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                    (0..random).map(|_| sim::random_inputs(&keys, &mut rng)).collect()
                }
            };
            let mut traces = Vec::with_capacity(vectors.len());
            for x in &vectors {
                let r = match &target {
                    Ok(g) => sim::simulate(g, x).context("simulate")?,
                    Err((m, spec)) => simulate_mapping(m, spec, x).context("simulate")?,
                };
                traces.push(r);
            }
            save(&out, &SimTraces { vectors, traces })
        }
        Command::Cost {
            netlist,
            pe,
            traces,
            costs,
            frequency_label,
            out,
        } => {
            let m = parse_netlist(&read(&netlist)?).context("cost")?;
            let spec = load_spec(&pe).context("cost")?;
            let t: SimTraces = load(&traces).context("cost")?;
            let costs = load_costs(costs.as_deref()).context("cost")?;
            let report = evaluate_mapping(&m, &spec, &t.traces, &costs, frequency_label).context("cost")?;
            save(&out, &report)
        }
        Command::Pipeline { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let summary = run_pipeline(&cfg)?;
            for r in &summary.rows {
                println!(
                    "{:<16} pe{} {:<16} pe_count={:<4} total_area={:<10} energy_per_op={:.4}",
                    r.ladder, r.variant, r.application, r.pe_count, r.total_area, r.energy_per_op
                );
            }
            Ok(())
        }
        Command::Dot { input, out } => {
            let value: serde_json::Value = load(&input).context("dot")?;
            let dot = if value.get("inputs").is_some() {
                serde_json::from_value::<PeSpec>(value)?.to_dot()
            } else if value.get("configurations").is_some() {
                serde_json::from_value::<MergedDatapath>(value)?.to_dot()
            } else {
                parse_graph(&read(&input)?)?.to_dot()
            };
            match out {
                Some(p) => save_text(&p, dot.trim_end()),
                None => {
                    print!("{dot}");
                    Ok(())
                }
            }
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
