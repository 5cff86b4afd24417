#![allow(dead_code)]

use std::path::PathBuf;

use costa_core::registry::{load_benchmark, load_mdt};
use costa_core::toolgraph::{build_tdg, build_tool_subgraph};
use costa_core::{load_subtask_tree, BenchmarkTable, ModelDescriptionTable, SubtaskTree, ToolSubgraph};

pub fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

pub fn full_mdt() -> ModelDescriptionTable {
    load_mdt(data("mdt_full.json")).unwrap()
}

pub fn full_benchmark(mdt: &ModelDescriptionTable) -> BenchmarkTable {
    load_benchmark(data("benchmark_full.json"), mdt).unwrap()
}

pub fn tree(name: &str) -> SubtaskTree {
    load_subtask_tree(data(&format!("trees/{name}.json"))).unwrap()
}

pub fn expand(tree: &SubtaskTree, mdt: &ModelDescriptionTable) -> ToolSubgraph {
    build_tool_subgraph(tree, mdt, &build_tdg(mdt)).unwrap()
}

/// YOLOv7 or Grounding DINO, then SAM, then SD-Inpaint removal.
pub fn detection() -> (ToolSubgraph, BenchmarkTable) {
    let mdt = load_mdt(data("fixtures/detection_mdt.json")).unwrap();
    let tree = load_subtask_tree(data("fixtures/detection_tree.json")).unwrap();
    let g = expand(&tree, &mdt);
    let bt = full_benchmark(&full_mdt());
    (g, bt)
}

pub fn tools(g: &ToolSubgraph, path: &[usize]) -> Vec<String> {
    path.iter().map(|&v| g.node(v).tool_name().to_string()).collect()
}
