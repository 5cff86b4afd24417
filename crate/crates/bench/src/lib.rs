//! Fixtures shared by the planner benchmarks.

use std::path::PathBuf;

use costa_core::toolgraph::{build_tdg, build_tool_subgraph};
use costa_core::{
    load_benchmark, load_mdt, load_subtask_tree, BenchmarkTable, ModelDescriptionTable, SubtaskTree, ToolSubgraph,
};

pub fn data_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

pub struct Fixture {
    pub mdt: ModelDescriptionTable,
    pub benchmark: BenchmarkTable,
    pub tree: SubtaskTree,
    pub graph: ToolSubgraph,
}

/// Full tables plus the expanded subgraph for one tree under `data/trees`.
pub fn fixture(tree: &str) -> Fixture {
    let mdt = load_mdt(data_path("mdt_full.json")).expect("mdt loads");
    let benchmark = load_benchmark(data_path("benchmark_full.json"), &mdt).expect("benchmark loads");
    let tree = load_subtask_tree(data_path(&format!("trees/{tree}.json"))).expect("tree loads");
    let graph = build_tool_subgraph(&tree, &mdt, &build_tdg(&mdt)).expect("tree expands");
    Fixture {
        mdt,
        benchmark,
        tree,
        graph,
    }
}
