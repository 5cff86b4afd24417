use std::fmt::Display;
use std::path::{Path, PathBuf};

use costa_core::eval::{format_sig9, EvalError, OracleReport};
use costa_core::search::{node_values, SearchStatus};
use costa_core::synth::{generate_instances, instances_to_json, load_instances};
use costa_core::toolgraph::{build_tdg, build_tool_subgraph, GraphError};
use costa_core::{
    astar_search, brute_force_optimal, build_planner_prompt, load_benchmark, load_mdt, load_subtask_tree, pareto_csv,
    parse_subtask_tree, precompute_heuristics, request_tree, sweep_alpha, Alpha, BenchmarkTable, HttpPlanner,
    SearchConfig, SimExecutor, SimulatorSpec, SubtaskKind, SubtaskTree, ToolSubgraph,
};
use serde::Serialize;
use serde_json::json;

use crate::manifest::{sibling, RunManifest};
use crate::{GraphArgs, GraphFormat, InputArgs, PlanArgs, SearchArgs, SweepArgs, SynthArgs, VerifyArgs};

#[derive(Debug)]
pub enum Failure {
    Input(String),
    Exhausted,
    PathExplosion(String),
    Verification(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Exhausted => 2,
            Failure::PathExplosion(_) => 3,
            Failure::Verification(_) => 4,
        }
    }
}

fn input(e: impl Display) -> Failure {
    Failure::Input(e.to_string())
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Input(format!("writing {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_manifest(
    artifact: &Path,
    argv: &[String],
    config: &impl Serialize,
    inputs: &[PathBuf],
    seed: u64,
) -> Result<(), Failure> {
    let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    RunManifest::new(argv, config, &refs, seed)
        .and_then(|m| m.write(&sibling(artifact, "manifest.json")))
        .map_err(|e| Failure::Input(format!("writing manifest: {e}")))
}

struct Loaded {
    benchmark: BenchmarkTable,
    graph: ToolSubgraph,
    inputs: Vec<PathBuf>,
}

fn load_tree(a: &InputArgs) -> Result<SubtaskTree, Failure> {
    if let Some(path) = &a.tree {
        return load_subtask_tree(path).map_err(input);
    }
    let Some(task) = &a.task else {
        return Err(Failure::Input(
            "--tree is required unless --task is given with a planner endpoint".into(),
        ));
    };
    let client = match &a.planner_endpoint {
        Some(url) => HttpPlanner::new(url.clone()),
        None => HttpPlanner::from_env(),
    }
    .map_err(|_| Failure::Input("--task needs --planner-endpoint or COSTA_PLANNER_URL".into()))?;
    let prompt = build_planner_prompt(task, &SubtaskKind::PLANNER).map_err(input)?;
    let text = request_tree(&client, &prompt).map_err(input)?;
    parse_subtask_tree(&text, &SubtaskKind::PLANNER).map_err(input)
}

fn expand(tree: &SubtaskTree, mdt: &costa_core::ModelDescriptionTable) -> Result<ToolSubgraph, Failure> {
    build_tool_subgraph(tree, mdt, &build_tdg(mdt)).map_err(input)
}

fn load_inputs(a: &InputArgs) -> Result<Loaded, Failure> {
    let mdt = load_mdt(&a.mdt).map_err(input)?;
    let mut benchmark = load_benchmark(&a.benchmark, &mdt).map_err(input)?;
    if a.unit_quality {
        benchmark = benchmark.with_unit_quality();
    }
    let tree = load_tree(a)?;
    let graph = expand(&tree, &mdt)?;
    let mut inputs = vec![a.mdt.clone(), a.benchmark.clone()];
    inputs.extend(a.tree.clone());
    Ok(Loaded {
        benchmark,
        graph,
        inputs,
    })
}

fn load_sim(s: &SearchArgs, inputs: &mut Vec<PathBuf>) -> Result<SimulatorSpec, Failure> {
    match &s.sim {
        Some(path) => {
            inputs.push(path.clone());
            SimulatorSpec::load(path).map_err(input)
        }
        None => Ok(SimulatorSpec::deterministic()),
    }
}

fn search_config(s: &SearchArgs, alpha: Alpha) -> Result<SearchConfig, Failure> {
    if !(0.0..=1.0).contains(&s.quality_threshold) {
        return Err(Failure::Input(format!(
            "quality threshold {} outside [0, 1]",
            s.quality_threshold
        )));
    }
    if s.queue_cap == 0 {
        return Err(Failure::Input("queue cap must be positive".into()));
    }
    Ok(SearchConfig {
        alpha,
        quality_threshold: s.quality_threshold,
        max_retries: s.max_retries,
        queue_cap: s.queue_cap,
        seed: s.seed,
    })
}

fn parse_alphas(list: &str) -> Result<Vec<Alpha>, Failure> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let v: f64 = s.parse().map_err(|_| Failure::Input(format!("bad alpha {s:?}")))?;
            Alpha::new(v).map_err(|_| Failure::Input(format!("AlphaOutOfRange: {v} is outside [0, 2]")))
        })
        .collect()
}

pub fn plan(a: &PlanArgs, argv: &[String]) -> Result<(), Failure> {
    let alpha =
        Alpha::new(a.alpha).map_err(|_| Failure::Input(format!("AlphaOutOfRange: {} is outside [0, 2]", a.alpha)))?;
    let cfg = search_config(&a.search, alpha)?;
    let Loaded {
        benchmark,
        graph,
        mut inputs,
    } = load_inputs(&a.input)?;
    let spec = load_sim(&a.search, &mut inputs)?;
    let h = precompute_heuristics(&graph, &benchmark, alpha).map_err(input)?;
    let exec = SimExecutor::new(spec.clone(), &benchmark).map_err(input)?;
    let result = astar_search(&graph, &h, &exec, &cfg).map_err(input)?;
    let json = result.to_json(&graph) + "\n";
    emit(a.out.as_deref(), &json)?;
    if let Some(out) = &a.out {
        write_file(&sibling(out, "trace.json"), &(result.trace.to_json() + "\n"))?;
        let config = json!({"command": "plan", "search": cfg, "sim": spec, "unit_quality": a.input.unit_quality});
        write_manifest(out, argv, &config, &inputs, cfg.seed)?;
    }
    match result.status {
        SearchStatus::Found => Ok(()),
        SearchStatus::Exhausted => {
            eprintln!("search exhausted: every path failed the quality check");
            Err(Failure::Exhausted)
        }
    }
}

pub fn sweep(a: &SweepArgs, argv: &[String]) -> Result<(), Failure> {
    let alphas = parse_alphas(&a.alphas)?;
    let base = search_config(&a.search, Alpha::new(1.0).expect("in range"))?;
    let Loaded {
        benchmark,
        graph,
        mut inputs,
    } = load_inputs(&a.input)?;
    let spec = load_sim(&a.search, &mut inputs)?;
    let points = match sweep_alpha(&graph, &benchmark, &spec, &base, &alphas) {
        Ok(p) => p,
        Err(EvalError::Exhausted(alpha)) => {
            eprintln!("search exhausted at alpha {alpha}");
            return Err(Failure::Exhausted);
        }
        Err(e) => return Err(input(e)),
    };
    emit(a.csv.as_deref(), &pareto_csv(&points, true))?;
    if let Some(csv) = &a.csv {
        let alphas: Vec<f64> = alphas.iter().map(|a| a.value()).collect();
        let config = json!({"command": "sweep", "alphas": alphas, "search": base, "sim": spec, "unit_quality": a.input.unit_quality});
        write_manifest(csv, argv, &config, &inputs, base.seed)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct VerifyEntry {
    name: String,
    unit_quality: bool,
    /// alpha = 1 with unit quality, where the search must be exact.
    corner: bool,
    #[serde(flatten)]
    report: OracleReport,
}

#[derive(Serialize)]
struct VerifySummary {
    instances: usize,
    corner_instances: usize,
    corner_failures: usize,
    gap_tolerance: f64,
    max_gap: f64,
    nonzero_gaps: usize,
}

#[derive(Serialize)]
struct VerifyReport {
    summary: VerifySummary,
    instances: Vec<VerifyEntry>,
}

fn verify_one(
    name: String,
    graph: &ToolSubgraph,
    benchmark: &BenchmarkTable,
    alpha: Alpha,
    a: &VerifyArgs,
) -> Result<VerifyEntry, Failure> {
    let values = node_values(graph, benchmark).map_err(input)?;
    let unit_quality = values.iter().all(|&(_, q)| q == 1.0);
    let report = match brute_force_optimal(graph, benchmark, alpha, a.quality_threshold, a.paths_cap) {
        Ok(r) => r,
        Err(EvalError::Graph(e @ GraphError::PathExplosion { .. })) => {
            return Err(Failure::PathExplosion(format!("{name}: {e}")))
        }
        Err(e) => return Err(Failure::Input(format!("{name}: {e}"))),
    };
    Ok(VerifyEntry {
        name,
        unit_quality,
        corner: unit_quality && alpha.value() == 1.0,
        report,
    })
}

fn gap_csv(entries: &[VerifyEntry]) -> String {
    let mut out = String::from("instance,alpha,unit_quality,paths_enumerated,best_objective,astar_objective,gap\n");
    for e in entries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            e.name,
            format_sig9(e.report.alpha),
            e.unit_quality,
            e.report.paths_enumerated,
            format_sig9(e.report.best_objective),
            format_sig9(e.report.astar_objective),
            format_sig9(e.report.gap)
        ));
    }
    out
}

pub fn verify(a: &VerifyArgs, argv: &[String]) -> Result<(), Failure> {
    let alphas = parse_alphas(&a.alphas)?;
    if alphas.is_empty() {
        return Err(Failure::Input("--alphas is empty".into()));
    }
    let mut inputs = Vec::new();
    let mut entries = Vec::new();
    if let Some(path) = &a.instances {
        inputs.push(path.clone());
        for (i, inst) in load_instances(path).map_err(input)?.into_iter().enumerate() {
            let bt = if a.unit_quality {
                inst.benchmark.with_unit_quality()
            } else {
                inst.benchmark
            };
            entries.push(verify_one(inst.name, &inst.graph, &bt, alphas[i % alphas.len()], a)?);
        }
    } else {
        let (Some(mdt_path), Some(bt_path)) = (&a.mdt, &a.benchmark) else {
            return Err(Failure::Input(
                "--mdt and --benchmark are required without --instances".into(),
            ));
        };
        let Some(tree_path) = &a.tree else {
            return Err(Failure::Input("--tree is required without --instances".into()));
        };
        let mdt = load_mdt(mdt_path).map_err(input)?;
        let mut bt = load_benchmark(bt_path, &mdt).map_err(input)?;
        if a.unit_quality {
            bt = bt.with_unit_quality();
        }
        let tree = load_subtask_tree(tree_path).map_err(input)?;
        let graph = expand(&tree, &mdt)?;
        inputs.extend([mdt_path.clone(), bt_path.clone(), tree_path.clone()]);
        for &alpha in &alphas {
            let name = tree_path
                .file_stem()
                .map_or("tree".into(), |s| s.to_string_lossy().into_owned());
            entries.push(verify_one(name, &graph, &bt, alpha, a)?);
        }
    }

    let corner_failures = entries
        .iter()
        .filter(|e| e.corner && e.report.gap > a.gap_tolerance)
        .count();
    let report = VerifyReport {
        summary: VerifySummary {
            instances: entries.len(),
            corner_instances: entries.iter().filter(|e| e.corner).count(),
            corner_failures,
            gap_tolerance: a.gap_tolerance,
            max_gap: entries.iter().map(|e| e.report.gap).fold(0.0, f64::max),
            nonzero_gaps: entries.iter().filter(|e| e.report.gap != 0.0).count(),
        },
        instances: entries,
    };
    let text = serde_json::to_string_pretty(&report).map_err(input)? + "\n";
    emit(a.out.as_deref(), &text)?;
    if let Some(csv) = &a.csv {
        write_file(csv, &gap_csv(&report.instances))?;
    }
    if let Some(artifact) = a.out.as_ref().or(a.csv.as_ref()) {
        let alphas: Vec<f64> = alphas.iter().map(|a| a.value()).collect();
        let config = json!({
            "command": "verify",
            "alphas": alphas,
            "quality_threshold": a.quality_threshold,
            "paths_cap": a.paths_cap,
            "gap_tolerance": a.gap_tolerance,
            "unit_quality": a.unit_quality,
        });
        write_manifest(artifact, argv, &config, &inputs, 0)?;
    }
    eprintln!(
        "verified {} instances: max gap {}, {} corner failures",
        report.summary.instances,
        format_sig9(report.summary.max_gap),
        corner_failures
    );
    if corner_failures > 0 {
        return Err(Failure::Verification(format!(
            "{corner_failures} corner instances exceed gap tolerance {}",
            a.gap_tolerance
        )));
    }
    Ok(())
}

pub fn graph(a: &GraphArgs) -> Result<(), Failure> {
    let mdt = load_mdt(&a.mdt).map_err(input)?;
    let text = match &a.tree {
        Some(tree) => {
            let g = expand(&load_subtask_tree(tree).map_err(input)?, &mdt)?;
            match a.format {
                GraphFormat::Dot => g.to_dot(),
                GraphFormat::Json => g.to_json() + "\n",
            }
        }
        None => {
            let tdg = build_tdg(&mdt);
            match a.format {
                GraphFormat::Dot => tdg.to_dot(),
                GraphFormat::Json => tdg.to_json() + "\n",
            }
        }
    };
    emit(a.out.as_deref(), &text)
}

pub fn synth(a: &SynthArgs, argv: &[String]) -> Result<(), Failure> {
    if a.max_nodes < 2 {
        return Err(Failure::Input("--max-nodes must be at least 2".into()));
    }
    let instances = generate_instances(a.seed, a.count, a.max_nodes);
    write_file(&a.out, &(instances_to_json(&instances) + "\n"))?;
    let config = json!({"command": "synth", "count": a.count, "max_nodes": a.max_nodes});
    write_manifest(&a.out, argv, &config, &[], a.seed)
}
