//! Cost/quality weighted A* over a tool subgraph.
//!
//! A path's realized objective is
//! `g = (Σ c)^α · (2 − Π q)^(2−α)`, with `g = 0` for the ROOT-only path.
//! The heuristic of a node looks one step ahead greedily: it picks the
//! successor minimizing the same expression over its own best-case suffix and
//! inherits that successor's accumulated time and quality.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dag::DagView;
use crate::registry::{BenchmarkTable, ToolId};
use crate::sim::{
    record_trace, validate_quality, Decision, ExecError, ExecutionOutcome, ExecutionTrace, Executor, RetryAccounting,
    TraceEvent, Verdict,
};
use crate::toolgraph::{PlanNode, ToolSubgraph};
use crate::vocab::SubtaskKind;

pub const DEFAULT_QUALITY_THRESHOLD: f64 = 0.8;
pub const DEFAULT_MAX_RETRIES: u32 = 3;
pub const DEFAULT_QUEUE_CAP: usize = 100_000;
pub const DEFAULT_SEED: u64 = 0x00C0_57A5;

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("alpha {0} outside [0, 2]")]
    AlphaOutOfRange(f64),
    #[error("no benchmark entry for {tool} / {subtask}")]
    MissingBenchmark { tool: ToolId, subtask: SubtaskKind },
    #[error("heuristic table has {got} entries for a graph of {want} nodes")]
    HeuristicMismatch { got: usize, want: usize },
    #[error("priority queue exceeded its cap of {0} paths")]
    QueueOverflow(usize),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// Trade-off exponent; 2 weighs only time, 0 only quality.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Self, SearchError> {
        if (0.0..=2.0).contains(&value) {
            Ok(Alpha(value))
        } else {
            Err(SearchError::AlphaOutOfRange(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Alpha {
    type Error = SearchError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Alpha::new(value)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.0
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

// powf already yields 1 for 0^0.
fn combine(time: f64, quality: f64, alpha: Alpha) -> f64 {
    time.powf(alpha.0) * (2.0 - quality).powf(2.0 - alpha.0)
}

/// Objective for an accumulated prefix.
pub fn compute_g(cum_time: f64, cum_quality: f64, alpha: Alpha) -> f64 {
    if cum_time == 0.0 {
        0.0
    } else {
        combine(cum_time, cum_quality, alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicEntry {
    pub h: f64,
    pub h_c: f64,
    pub h_q: f64,
    /// Successor the estimate follows; `None` for leaves.
    pub via: Option<usize>,
}

impl HeuristicEntry {
    pub const LEAF: HeuristicEntry = HeuristicEntry {
        h: 0.0,
        h_c: 0.0,
        h_q: 1.0,
        via: None,
    };
}

/// Benchmark `(C, Q)` per node, ROOT as `(0, 1)`.
pub fn node_values(g: &ToolSubgraph, bt: &BenchmarkTable) -> Result<Vec<(f64, f64)>, SearchError> {
    g.nodes()
        .iter()
        .map(|n| match n.step() {
            None => Ok((0.0, 1.0)),
            Some(s) => bt
                .get(&s.tool, s.subtask)
                .map(|e| (e.time_seconds, e.quality_norm))
                .ok_or_else(|| SearchError::MissingBenchmark {
                    tool: s.tool.clone(),
                    subtask: s.subtask,
                }),
        })
        .collect()
}

pub fn precompute_heuristics(
    g: &ToolSubgraph,
    bt: &BenchmarkTable,
    alpha: Alpha,
) -> Result<Vec<HeuristicEntry>, SearchError> {
    let values = node_values(g, bt)?;
    let mut table = vec![HeuristicEntry::LEAF; g.len()];
    for &x in g.topological_order().iter().rev() {
        let mut best: Option<HeuristicEntry> = None;
        for &y in DagView::successors(g, x) {
            let (c, q) = values[y];
            let h_c = table[y].h_c + c;
            let h_q = q * table[y].h_q;
            let h = combine(h_c, h_q, alpha);
            if best.is_none_or(|b| h < b.h) {
                best = Some(HeuristicEntry {
                    h,
                    h_c,
                    h_q,
                    via: Some(y),
                });
            }
        }
        if let Some(b) = best {
            table[x] = b;
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub node: usize,
    pub c: f64,
    pub q: f64,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathState {
    pub steps: Vec<PathStep>,
    pub cum_time: f64,
    pub cum_quality: f64,
    pub g: f64,
    pub f: f64,
}

impl PathState {
    pub fn root(h_root: f64) -> Self {
        PathState {
            steps: vec![PathStep {
                node: ToolSubgraph::ROOT,
                c: 0.0,
                q: 1.0,
                attempts: 0,
            }],
            cum_time: 0.0,
            cum_quality: 1.0,
            g: 0.0,
            f: h_root,
        }
    }

    pub fn node_ids(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.node).collect()
    }

    pub fn last(&self) -> usize {
        self.steps.last().expect("paths start at ROOT").node
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub alpha: Alpha,
    pub quality_threshold: f64,
    pub max_retries: u32,
    pub queue_cap: usize,
    pub seed: u64,
}

impl SearchConfig {
    pub fn new(alpha: Alpha) -> Self {
        SearchConfig {
            alpha,
            quality_threshold: DEFAULT_QUALITY_THRESHOLD,
            max_retries: DEFAULT_MAX_RETRIES,
            queue_cap: DEFAULT_QUEUE_CAP,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchStatus {
    Found,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub status: SearchStatus,
    pub alpha: Alpha,
    /// The returned path; the ROOT-only path when exhausted.
    pub path: PathState,
    pub trace: ExecutionTrace,
    /// Non-leaf paths popped from the queue.
    pub expanded_count: usize,
    /// f of every popped path, in pop order.
    pub popped_f: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStepDocument {
    pub node: usize,
    pub tool: String,
    pub subtask: Option<SubtaskKind>,
    pub c: f64,
    pub q: f64,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanTotals {
    pub time: f64,
    pub quality_product: f64,
    pub g: f64,
    pub f: f64,
}

/// Wire form of a [`PlanResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub status: SearchStatus,
    pub alpha: f64,
    pub path: Vec<PlanStepDocument>,
    pub totals: PlanTotals,
    pub expanded_count: usize,
}

impl PlanResult {
    pub fn to_document(&self, g: &ToolSubgraph) -> PlanDocument {
        PlanDocument {
            status: self.status,
            alpha: self.alpha.value(),
            path: self
                .path
                .steps
                .iter()
                .map(|s| {
                    let n = g.node(s.node);
                    PlanStepDocument {
                        node: s.node,
                        tool: n.tool_name().to_string(),
                        subtask: n.step().map(|st| st.subtask),
                        c: s.c,
                        q: s.q,
                        attempts: s.attempts,
                    }
                })
                .collect(),
            totals: PlanTotals {
                time: self.path.cum_time,
                quality_product: self.path.cum_quality,
                g: self.path.g,
                f: self.path.f,
            },
            expanded_count: self.expanded_count,
        }
    }

    pub fn to_json(&self, g: &ToolSubgraph) -> String {
        serde_json::to_string_pretty(&self.to_document(g)).expect("plan serializes")
    }

    pub fn tools(&self, g: &ToolSubgraph) -> Vec<String> {
        self.path
            .steps
            .iter()
            .map(|s| g.node(s.node).tool_name().to_string())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryOutcome {
    pub succeeded: bool,
    /// Time of the retries only, excluding the first attempt.
    pub extra_time: f64,
    pub final_quality: f64,
    /// Total invocations including the first one.
    pub attempts: u32,
    pub outcomes: Vec<ExecutionOutcome>,
}

/// Re-runs a node that failed its first attempt, up to `max_retries` times.
pub fn retry_node(node: &PlanNode, exec: &dyn Executor, cfg: &SearchConfig) -> Result<RetryOutcome, ExecError> {
    let mut out = RetryOutcome {
        succeeded: false,
        extra_time: 0.0,
        final_quality: 0.0,
        attempts: 1,
        outcomes: Vec::new(),
    };
    for attempt in 2..=cfg.max_retries.saturating_add(1) {
        let o = exec.execute(node, attempt, cfg.seed)?;
        out.extra_time += o.time_seconds;
        out.final_quality = o.quality;
        out.attempts = attempt;
        out.outcomes.push(o);
        if validate_quality(&o, cfg.quality_threshold) == Verdict::Pass {
            out.succeeded = true;
            break;
        }
    }
    Ok(out)
}

struct QueueEntry {
    f: f64,
    seq: u64,
    path: PathState,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.seq.cmp(&self.seq))
    }
}

fn event(node: &PlanNode, o: &ExecutionOutcome, decision: Decision) -> TraceEvent {
    TraceEvent {
        node: node.id,
        tool: node.tool_name().to_string(),
        subtask: node.step().map(|s| s.subtask),
        attempt: o.attempt,
        time_seconds: o.time_seconds,
        quality: o.quality,
        decision,
        retry: None,
    }
}

pub fn astar_search(
    g: &ToolSubgraph,
    h: &[HeuristicEntry],
    exec: &dyn Executor,
    cfg: &SearchConfig,
) -> Result<PlanResult, SearchError> {
    if h.len() != g.len() {
        return Err(SearchError::HeuristicMismatch {
            got: h.len(),
            want: g.len(),
        });
    }
    let alpha = cfg.alpha;
    let mut events = Vec::new();
    let mut best_g = vec![f64::INFINITY; g.len()];
    let mut best_q = vec![f64::NEG_INFINITY; g.len()];
    let mut popped_f = Vec::new();
    let mut expanded_count = 0;
    let mut seq = 0u64;
    let mut queue = BinaryHeap::new();
    queue.push(QueueEntry {
        f: h[ToolSubgraph::ROOT].h,
        seq,
        path: PathState::root(h[ToolSubgraph::ROOT].h),
    });
    best_g[ToolSubgraph::ROOT] = 0.0;
    best_q[ToolSubgraph::ROOT] = 1.0;

    while let Some(QueueEntry { f, path, .. }) = queue.pop() {
        popped_f.push(f);
        let x = path.last();
        if g.is_leaf(x) {
            log::debug!("leaf {x} reached after {expanded_count} expansions");
            return Ok(PlanResult {
                status: SearchStatus::Found,
                alpha,
                path,
                trace: record_trace(events),
                expanded_count,
                popped_f,
            });
        }
        expanded_count += 1;
        for &y in g.successors(x) {
            let node = g.node(y);
            let first = exec.execute(node, 1, cfg.seed)?;
            let time1 = path.cum_time + first.time_seconds;
            let quality1 = path.cum_quality * first.quality;
            let g_new = compute_g(time1, quality1, alpha);
            let (step, cum_time, cum_quality, g_path) =
                if validate_quality(&first, cfg.quality_threshold) == Verdict::Pass {
                    events.push(event(node, &first, Decision::Accepted));
                    let step = PathStep {
                        node: y,
                        c: first.time_seconds,
                        q: first.quality,
                        attempts: 1,
                    };
                    (step, time1, quality1, g_new)
                } else {
                    events.push(event(node, &first, Decision::Retry));
                    let retry = retry_node(node, exec, cfg)?;
                    let last = retry.outcomes.len().saturating_sub(1);
                    for (i, o) in retry.outcomes.iter().enumerate() {
                        let decision = match (i == last, retry.succeeded) {
                            (true, true) => Decision::Accepted,
                            (true, false) => Decision::Dropped,
                            _ => Decision::Retry,
                        };
                        events.push(event(node, o, decision));
                    }
                    if !retry.succeeded {
                        if retry.outcomes.is_empty() {
                            events.last_mut().expect("first attempt logged").decision = Decision::Dropped;
                        }
                        log::debug!("node {y} dropped after {} attempts", retry.attempts);
                        continue;
                    }
                    let cum_time = time1 + retry.extra_time;
                    let cum_quality = path.cum_quality * retry.final_quality;
                    let g_new2 = compute_g(retry.extra_time, retry.final_quality, alpha);
                    let g_path = compute_g(cum_time, cum_quality, alpha);
                    events.last_mut().expect("retry logged").retry = Some(RetryAccounting {
                        extra_time: retry.extra_time,
                        g_new,
                        g_new2,
                        g_final_sum: g_new + g_new2,
                        g_path,
                    });
                    let step = PathStep {
                        node: y,
                        c: first.time_seconds + retry.extra_time,
                        q: retry.final_quality,
                        attempts: retry.attempts,
                    };
                    (step, cum_time, cum_quality, g_path)
                };

            if g_path > best_g[y] && cum_quality <= best_q[y] {
                continue;
            }
            if g_path < best_g[y] {
                best_g[y] = g_path;
                best_q[y] = cum_quality;
            }
            if queue.len() >= cfg.queue_cap {
                return Err(SearchError::QueueOverflow(cfg.queue_cap));
            }
            let mut steps = path.steps.clone();
            steps.push(step);
            let f_new = g_path + h[y].h;
            seq += 1;
            queue.push(QueueEntry {
                f: f_new,
                seq,
                path: PathState {
                    steps,
                    cum_time,
                    cum_quality,
                    g: g_path,
                    f: f_new,
                },
            });
        }
    }
    Ok(PlanResult {
        status: SearchStatus::Exhausted,
        alpha,
        path: PathState::root(h[ToolSubgraph::ROOT].h),
        trace: record_trace(events),
        expanded_count,
        popped_f,
    })
}
