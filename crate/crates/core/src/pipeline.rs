//! End-to-end exploration driven by one TOML file.
//!
//! Output layout under `out_dir`:
//!
//! ```text
//! apps/<app>/patterns.json      mined patterns
//! apps/<app>/ranked.json        MIS reports in rank order
//! <ladder>/pe<i>/datapath.json  merged datapath of variant i
//! <ladder>/pe<i>/pe.json        PE spec of variant i
//! <ladder>/pe<i>/<app>/netlist.json, results.json, report.json
//! summary.json
//! ```
//!
//! Each application gets its own ladder named after it, unless
//! `cross_application` pools every application's patterns into a single
//! ladder called `pooled`.

use crate::cost::{evaluate_mapping, CostReport, CostTable};
use crate::graph::{parse_graph, DataflowGraph};
use crate::mapper::{emit_netlist, map_application, simulate_mapping};
use crate::merger::{build_pe_variants, variant_candidates};
use crate::miner::{mine_frequent_subgraphs, region_ops, MinedPattern, MiningConfig};
use crate::mis::{analyze, rank_patterns, MisReport, DEFAULT_EXACT_THRESHOLD};
use crate::op::OpKind;
use crate::pe_spec::generate_pe_spec;
use crate::sim::{self, SimTraces};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::error::Error as StdError;
use std::fs;
use std::path::{Path, PathBuf};

fn default_support() -> usize {
    2
}
fn default_max_nodes() -> usize {
    8
}
fn default_k() -> usize {
    2
}
fn default_true() -> bool {
    true
}
fn default_vectors() -> usize {
    100
}
fn default_threshold() -> usize {
    DEFAULT_EXACT_THRESHOLD
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub applications: Vec<PathBuf>,
    #[serde(default = "default_support")]
    pub min_support: usize,
    #[serde(default = "default_max_nodes")]
    pub max_pattern_nodes: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Defaults to every compute operation.
    #[serde(default)]
    pub baseline_ops: Option<BTreeSet<OpKind>>,
    /// Cost table JSON; the built-in table when absent.
    #[serde(default)]
    pub costs: Option<PathBuf>,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub include_const_nodes: bool,
    #[serde(default = "default_vectors")]
    pub vectors: usize,
    #[serde(default = "default_threshold")]
    pub exact_mis_threshold: usize,
    #[serde(default)]
    pub cross_application: bool,
}

impl PipelineConfig {
    /// Parse a TOML config; relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| PipelineError::new("config", base.display(), e))?;
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.applications.iter_mut().for_each(fix);
        if let Some(c) = cfg.costs.as_mut() {
            fix(c);
        }
        fix(&mut cfg.out_dir);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::new("config", path.display(), e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn mining(&self) -> MiningConfig {
        MiningConfig {
            min_support: self.min_support,
            max_pattern_nodes: self.max_pattern_nodes,
            include_const_nodes: self.include_const_nodes,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage}: {input}: {source}")]
pub struct PipelineError {
    pub stage: &'static str,
    pub input: String,
    #[source]
    pub source: Box<dyn StdError + Send + Sync>,
}

impl PipelineError {
    pub fn new(
        stage: &'static str,
        input: impl std::fmt::Display,
        source: impl Into<Box<dyn StdError + Send + Sync>>,
    ) -> Self {
        PipelineError {
            stage,
            input: input.to_string(),
            source: source.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub ladder: String,
    pub variant: usize,
    pub application: String,
    pub pe_count: usize,
    pub pe_area: f64,
    pub total_area: f64,
    pub energy_per_op: f64,
    pub configurations: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cost_table: String,
    pub seed: u64,
    /// Candidate patterns merged into each ladder, by canonical key.
    pub merged_patterns: BTreeMap<String, Vec<String>>,
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    pub fn row(&self, ladder: &str, variant: usize, app: &str) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.ladder == ladder && r.variant == variant && r.application == app)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::new("write", path.display(), e))?;
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| PipelineError::new("write", dir.display(), e))?;
    }
    fs::write(path, format!("{text}\n")).map_err(|e| PipelineError::new("write", path.display(), e))
}

fn app_names(paths: &[PathBuf]) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    paths
        .iter()
        .map(|p| {
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "app".into());
            let n = seen.entry(stem.clone()).or_default();
            *n += 1;
            if *n == 1 {
                stem
            } else {
                format!("{stem}_{n}")
            }
        })
        .collect()
}

/// Deduplicate by canonical key (first occurrence wins) and rank by the sum
/// of per-application MIS sizes.
pub fn pool_reports(per_app: &[Vec<MisReport>]) -> Vec<MisReport> {
    let mut pooled: BTreeMap<String, MisReport> = BTreeMap::new();
    let mut order = Vec::new();
    for reports in per_app {
        for r in reports {
            let key = r.key().to_string();
            match pooled.get_mut(&key) {
                Some(p) => p.mis_size += r.mis_size,
                None => {
                    order.push(key.clone());
                    pooled.insert(key, r.clone());
                }
            }
        }
    }
    let all: Vec<MisReport> = order.into_iter().map(|k| pooled.remove(&k).expect("pooled")).collect();
    rank_patterns(all).unwrap_or_default()
}

struct App {
    name: String,
    path: PathBuf,
    graph: DataflowGraph,
}

/// Run every stage and write all artifacts; returns the summary.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Summary, PipelineError> {
    if cfg.applications.is_empty() {
        return Err(PipelineError::new("config", "applications", "at least one application is required"));
    }
    if cfg.k == 0 {
        return Err(PipelineError::new("config", "k", "k must be at least 1"));
    }
    let costs = match &cfg.costs {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| PipelineError::new("cost", p.display(), e))?;
            let t: CostTable = serde_json::from_str(&text).map_err(|e| PipelineError::new("cost", p.display(), e))?;
            t.validate().map_err(|e| PipelineError::new("cost", p.display(), e))?;
            t
        }
        None => CostTable::default(),
    };
    let baseline = cfg
        .baseline_ops
        .clone()
        .unwrap_or_else(|| OpKind::ALL.into_iter().filter(|o| o.is_compute()).collect());
    let mining = cfg.mining();

    let mut apps = Vec::new();
    for (name, path) in app_names(&cfg.applications).into_iter().zip(&cfg.applications) {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::new("load", path.display(), e))?;
        let graph = parse_graph(&text).map_err(|e| PipelineError::new("load", path.display(), e))?;
        apps.push(App {
            name,
            path: path.clone(),
            graph,
        });
    }

    let mut ranked_per_app = Vec::new();
    for app in &apps {
        log::info!("mining {}", app.name);
        let mined: Vec<MinedPattern> =
            mine_frequent_subgraphs(&app.graph, &mining).map_err(|e| PipelineError::new("mine", app.path.display(), e))?;
        let dir = cfg.out_dir.join("apps").join(&app.name);
        write_json(&dir.join("patterns.json"), &mined)?;
        let reports: Vec<MisReport> = mined.iter().map(|m| analyze(m, cfg.exact_mis_threshold)).collect();
        let ranked = if reports.is_empty() {
            Vec::new()
        } else {
            rank_patterns(reports).map_err(|e| PipelineError::new("mis", app.path.display(), e))?
        };
        write_json(&dir.join("ranked.json"), &ranked)?;
        ranked_per_app.push(ranked);
    }

    // (ladder name, ranked patterns, app indices)
    let ladders: Vec<(String, Vec<MisReport>, Vec<usize>)> = if cfg.cross_application {
        vec![("pooled".into(), pool_reports(&ranked_per_app), (0..apps.len()).collect())]
    } else {
        apps.iter()
            .enumerate()
            .map(|(i, a)| (a.name.clone(), ranked_per_app[i].clone(), vec![i]))
            .collect()
    };

    let mut summary = Summary {
        cost_table: costs.version.clone(),
        seed: cfg.seed,
        merged_patterns: BTreeMap::new(),
        rows: Vec::new(),
    };
    for (ladder, ranked, members) in &ladders {
        let app_ops: BTreeSet<OpKind> = members
            .iter()
            .flat_map(|&i| region_ops(&apps[i].graph, &mining))
            .collect();
        let variants = build_pe_variants(ranked, &baseline, &app_ops, cfg.k, &costs)
            .map_err(|e| PipelineError::new("merge", ladder, e))?;
        summary.merged_patterns.insert(
            ladder.clone(),
            variant_candidates(ranked)
                .iter()
                .take(variants.len() - 1)
                .map(|r| r.key().to_string())
                .collect(),
        );
        for (vi, dp) in variants.iter().enumerate() {
            let variant = vi + 1;
            let vdir = cfg.out_dir.join(ladder).join(format!("pe{variant}"));
            write_json(&vdir.join("datapath.json"), dp)?;
            let spec = generate_pe_spec(dp).map_err(|e| PipelineError::new("genpe", vdir.display(), e))?;
            write_text(&vdir.join("pe.json"), &spec.to_json())?;
            for &ai in members {
                let app = &apps[ai];
                let adir = vdir.join(&app.name);
                let mapping =
                    map_application(&app.graph, &spec).map_err(|e| PipelineError::new("map", app.path.display(), e))?;
                write_text(&adir.join("netlist.json"), &emit_netlist(&mapping))?;
                let traces = simulate_app(app, &mapping, &spec, cfg, ai)?;
                write_json(&adir.join("results.json"), &traces)?;
                let report: CostReport = evaluate_mapping(&mapping, &spec, &traces.traces, &costs, None)
                    .map_err(|e| PipelineError::new("cost", app.path.display(), e))?;
                write_json(&adir.join("report.json"), &report)?;
                summary.rows.push(SummaryRow {
                    ladder: ladder.clone(),
                    variant,
                    application: app.name.clone(),
                    pe_count: report.pe_count,
                    pe_area: report.pe_area,
                    total_area: report.total_area,
                    energy_per_op: report.energy_per_op,
                    configurations: mapping.histogram(),
                });
            }
        }
    }
    write_json(&cfg.out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn simulate_app(
    app: &App,
    mapping: &crate::mapper::Mapping,
    spec: &crate::pe_spec::PeSpec,
    cfg: &PipelineConfig,
    index: usize,
) -> Result<SimTraces, PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(index as u64));
    let keys = sim::required_inputs(&app.graph);
    let mut out = SimTraces::default();
    for _ in 0..cfg.vectors {
        let x = sim::random_inputs(&keys, &mut rng);
        let expected = sim::simulate(&app.graph, &x).map_err(|e| PipelineError::new("simulate", app.path.display(), e))?;
        let got = simulate_mapping(mapping, spec, &x).map_err(|e| PipelineError::new("simulate", app.path.display(), e))?;
        if got.outputs != expected.outputs {
            return Err(PipelineError::new(
                "simulate",
                app.path.display(),
                format!("mapped netlist disagrees with the application on {x:?}"),
            ));
        }
        out.vectors.push(x);
        out.traces.push(got);
    }
    Ok(out)
}
