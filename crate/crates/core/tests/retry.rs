mod common;

use common::*;
use costa_core::planning::SubtaskInstance;
use costa_core::search::SearchStatus;
use costa_core::sim::{Decision, ScriptEntry};
use costa_core::toolgraph::ToolStep;
use costa_core::{
    astar_search, compute_g, precompute_heuristics, retry_node, Alpha, BenchmarkTable, SearchConfig, SimExecutor,
    SimulatorSpec, SubtaskKind, ToolId, ToolSubgraph,
};

fn cfg(max_retries: u32) -> SearchConfig {
    SearchConfig {
        max_retries,
        ..SearchConfig::new(Alpha::new(1.0).unwrap())
    }
}

fn entry(tool: &str, subtask: SubtaskKind, attempt: u32, time: f64, quality: f64) -> ScriptEntry {
    ScriptEntry {
        tool: tool.into(),
        subtask,
        attempt,
        time,
        quality,
    }
}

fn script_all(tool: &str, subtask: SubtaskKind, n: u32, time: f64, quality: f64) -> Vec<ScriptEntry> {
    (1..=n).map(|a| entry(tool, subtask, a, time, quality)).collect()
}

const DET: SubtaskKind = SubtaskKind::ObjectDetection;
const SEG: SubtaskKind = SubtaskKind::ObjectSegmentation;
const REM: SubtaskKind = SubtaskKind::ObjectRemoval;

#[test]
fn fail_once_then_pass() {
    let (g, bt) = detection();
    let yolo = (0..g.len()).find(|&v| g.node(v).tool_name() == "YOLOv7").unwrap();
    let spec = SimulatorSpec::scripted(vec![
        entry("YOLOv7", DET, 1, 0.01, 0.5),
        entry("YOLOv7", DET, 2, 0.02, 0.9),
    ]);
    let exec = SimExecutor::new(spec, &bt).unwrap();
    let out = retry_node(g.node(yolo), &exec, &cfg(3)).unwrap();
    assert!(out.succeeded);
    assert_eq!(out.attempts, 2);
    assert_eq!(out.final_quality, 0.9);
    assert_eq!(out.extra_time, 0.02);
}

#[test]
fn zero_retries_means_one_invocation() {
    let (g, bt) = detection();
    let yolo = (0..g.len()).find(|&v| g.node(v).tool_name() == "YOLOv7").unwrap();
    let exec = SimExecutor::new(SimulatorSpec::scripted(vec![]), &bt).unwrap();
    let out = retry_node(g.node(yolo), &exec, &cfg(0)).unwrap();
    assert!(!out.succeeded);
    assert_eq!(out.attempts, 1);
    assert!(out.outcomes.is_empty());
}

/// Both detectors scripted; YOLOv7 always fails.
fn failing_yolo_script(max_retries: u32) -> Vec<ScriptEntry> {
    let n = max_retries + 1;
    let mut s = script_all("YOLOv7", DET, n, 0.0062, 0.1);
    s.extend(script_all("Grounding DINO", DET, n, 0.119, 1.0));
    s.extend(script_all("SAM", SEG, n, 0.046, 1.0));
    s.extend(script_all("Stable Diffusion Inpaint", REM, n, 12.1, 0.93));
    s
}

#[test]
fn exhausted_retries_drop_path_and_sibling_wins() {
    let (g, bt) = detection();
    let c = SearchConfig {
        alpha: Alpha::new(2.0).unwrap(),
        ..cfg(3)
    };
    let h = precompute_heuristics(&g, &bt, c.alpha).unwrap();
    let exec = SimExecutor::new(SimulatorSpec::scripted(failing_yolo_script(3)), &bt).unwrap();
    let r = astar_search(&g, &h, &exec, &c).unwrap();
    assert_eq!(r.status, SearchStatus::Found);
    assert_eq!(tools(&g, &r.path.node_ids())[1], "Grounding DINO");
    let yolo = (0..g.len()).find(|&v| g.node(v).tool_name() == "YOLOv7").unwrap();
    assert_eq!(r.trace.attempts_for(yolo), 4);
    let yolo_events: Vec<_> = r.trace.events.iter().filter(|e| e.node == yolo).collect();
    assert_eq!(yolo_events.last().unwrap().decision, Decision::Dropped);
    assert!(r.path.steps.iter().all(|s| s.node != yolo));

    // Trace time covers every invocation, failed ones included.
    let sum: f64 = r.trace.events.iter().map(|e| e.time_seconds).sum();
    assert!((r.trace.totals.time_seconds - sum).abs() < 1e-12);
    assert!(r.trace.totals.time_seconds >= r.path.cum_time + 4.0 * 0.0062 - 1e-12);
}

#[test]
fn retry_accounting_recorded() {
    let (g, bt) = detection();
    let mut script = failing_yolo_script(3);
    script.retain(|e| !(e.tool == "YOLOv7" && e.attempt == 3));
    script.push(entry("YOLOv7", DET, 3, 0.0062, 0.85));
    let c = SearchConfig {
        alpha: Alpha::new(2.0).unwrap(),
        ..cfg(3)
    };
    let h = precompute_heuristics(&g, &bt, c.alpha).unwrap();
    let exec = SimExecutor::new(SimulatorSpec::scripted(script), &bt).unwrap();
    let r = astar_search(&g, &h, &exec, &c).unwrap();
    let yolo_step = r.path.steps[1];
    assert_eq!(g.node(yolo_step.node).tool_name(), "YOLOv7");
    assert_eq!(yolo_step.attempts, 3);
    assert_eq!(yolo_step.q, 0.85);
    assert!((yolo_step.c - 3.0 * 0.0062).abs() < 1e-15);
    let acct = r
        .trace
        .events
        .iter()
        .find_map(|e| (e.node == yolo_step.node).then_some(e.retry).flatten())
        .unwrap();
    let a = c.alpha;
    assert!((acct.extra_time - 0.0124).abs() < 1e-15);
    assert_eq!(acct.g_new, compute_g(0.0062, 0.1, a));
    assert_eq!(acct.g_new2, compute_g(acct.extra_time, 0.85, a));
    assert_eq!(acct.g_final_sum, acct.g_new + acct.g_new2);
    assert_eq!(acct.g_path, compute_g(0.0062 + acct.extra_time, 0.85, a));
}

#[test]
fn always_failing_chain_is_exhausted() {
    let step = ToolStep {
        tool: ToolId::new("DeblurGAN").unwrap(),
        subtask: SubtaskKind::ImageDeblurring,
        instance: SubtaskInstance::new(SubtaskKind::ImageDeblurring, None, 1),
    };
    let g = ToolSubgraph::from_parts(vec![step], &[(0, 1)]).unwrap();
    let bt = BenchmarkTable::from_rows(&[], None).unwrap();
    let spec = SimulatorSpec::scripted(script_all("DeblurGAN", SubtaskKind::ImageDeblurring, 4, 0.85, 0.2));
    let exec = SimExecutor::new(spec, &bt).unwrap();
    let h = vec![costa_core::HeuristicEntry::LEAF; 2];
    let r = astar_search(&g, &h, &exec, &cfg(3)).unwrap();
    assert_eq!(r.status, SearchStatus::Exhausted);
    assert_eq!(r.trace.totals.invocations, 4);
    assert!((r.trace.totals.time_seconds - 3.4).abs() < 1e-12);
}

#[test]
fn threshold_boundary_accepts_equal_quality() {
    let (g, bt) = detection();
    let mut script = failing_yolo_script(0);
    for e in &mut script {
        e.quality = 0.8;
    }
    let c = cfg(0);
    let h = precompute_heuristics(&g, &bt, c.alpha).unwrap();
    let exec = SimExecutor::new(SimulatorSpec::scripted(script), &bt).unwrap();
    let r = astar_search(&g, &h, &exec, &c).unwrap();
    assert_eq!(r.status, SearchStatus::Found);
    assert_eq!(r.trace.totals.failed_invocations, 0);
}
