//! Cost-sensitive toolpath planning for multi-step image editing.
//!
//! A composite task is decomposed into a subtask tree, each subtask is
//! expanded into the tools able to perform it (plus the tools producing their
//! inputs), and an A* search over the resulting tool subgraph picks a path
//! trading execution time against output quality through the exponent α.

pub mod dag;
pub mod eval;
pub mod planning;
pub mod registry;
pub mod search;
pub mod sim;
pub mod synth;
pub mod toolgraph;
pub mod vocab;

pub use dag::{CycleDetected, DagView};
pub use eval::{
    brute_force_optimal, overall_accuracy, pareto_csv, pareto_filter, sweep_alpha, task_accuracy, AccuracyRecord,
    EvalError, OracleReport, ParetoPoint,
};
pub use planning::{
    build_planner_prompt, load_subtask_tree, parse_subtask_tree, request_tree, HttpPlanner, PlannerClient,
    PlanningError, StubPlanner, SubtaskInstance, SubtaskTree,
};
pub use registry::{
    load_benchmark, load_mdt, lookup_models, BenchmarkTable, ModelDescriptionTable, RegistryError, ResourceType, ToolId,
};
pub use search::{
    astar_search, compute_g, precompute_heuristics, retry_node, Alpha, HeuristicEntry, PathState, PlanResult,
    SearchConfig, SearchError, SearchStatus,
};
pub use sim::{
    validate_quality, ExecError, ExecutionOutcome, ExecutionTrace, Executor, SimExecutor, SimulatorSpec, Verdict,
};
pub use toolgraph::{
    build_tdg, build_tool_subgraph, enumerate_paths, GraphError, PlanNode, ToolDependencyGraph, ToolSubgraph,
};
pub use vocab::SubtaskKind;
