//! Seeded random search instances for oracle comparisons and benchmarks.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dag;
use crate::planning::SubtaskInstance;
use crate::registry::{BenchmarkRow, BenchmarkTable, RegistryError, ToolId};
use crate::toolgraph::{GraphError, SubgraphDocument, ToolStep, ToolSubgraph};
use crate::vocab::SubtaskKind;

pub const MIN_TIME: f64 = 0.001;
pub const MAX_TIME: f64 = 20.0;
pub const DEFAULT_MAX_PATHS: u128 = 10_000;

// Synthetic tools share a few kinds so quality normalization keeps spread.
const KIND_POOL: [SubtaskKind; 4] = [
    SubtaskKind::ObjectDetection,
    SubtaskKind::ObjectSegmentation,
    SubtaskKind::ObjectRemoval,
    SubtaskKind::ImageUpscaling,
];

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("instance file: {0}")]
    Parse(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthInstance {
    pub name: String,
    pub graph: ToolSubgraph,
    pub benchmark: BenchmarkTable,
    pub unit_quality: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDocument {
    pub name: String,
    #[serde(default)]
    pub unit_quality: bool,
    #[serde(flatten)]
    pub graph: SubgraphDocument,
    pub benchmark: Vec<BenchmarkRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub instances: Vec<InstanceDocument>,
}

impl SynthInstance {
    pub fn to_document(&self) -> InstanceDocument {
        InstanceDocument {
            name: self.name.clone(),
            unit_quality: self.unit_quality,
            graph: self.graph.to_document(),
            benchmark: self.benchmark.to_rows(),
        }
    }

    pub fn from_document(doc: &InstanceDocument) -> Result<Self, SynthError> {
        Ok(SynthInstance {
            name: doc.name.clone(),
            graph: ToolSubgraph::from_document(&doc.graph)?,
            benchmark: BenchmarkTable::from_rows(&doc.benchmark, None)?,
            unit_quality: doc.unit_quality,
        })
    }
}

pub fn instances_to_json(instances: &[SynthInstance]) -> String {
    let file = InstanceFile {
        instances: instances.iter().map(SynthInstance::to_document).collect(),
    };
    serde_json::to_string_pretty(&file).expect("instances serialize")
}

pub fn instances_from_json(text: &str) -> Result<Vec<SynthInstance>, SynthError> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| SynthError::Parse(e.to_string()))?;
    file.instances.iter().map(SynthInstance::from_document).collect()
}

pub fn load_instances(path: impl AsRef<Path>) -> Result<Vec<SynthInstance>, SynthError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SynthError::Io {
        path: path.display().to_string(),
        source,
    })?;
    instances_from_json(&text)
}

/// Edges of a random DAG on `0..=n` rooted at 0. Every node `j >= 1` gets at
/// least one parent among `0..j`.
pub fn random_dag_edges<R: Rng + ?Sized>(rng: &mut R, n: usize, edge_prob: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for j in 1..=n {
        let before = edges.len();
        for i in 0..j {
            if rng.random_bool(edge_prob) {
                edges.push((i, j));
            }
        }
        if edges.len() == before {
            edges.push((rng.random_range(0..j), j));
        }
    }
    edges
}

/// A random subgraph with `n` tool nodes and at most `max_paths` maximal
/// paths, with a matching benchmark. Times are log-uniform in
/// `[MIN_TIME, MAX_TIME]`, qualities uniform in `[0.5, 1]` or exactly 1.
pub fn random_instance<R: Rng + ?Sized>(
    rng: &mut R,
    name: impl Into<String>,
    n: usize,
    unit_quality: bool,
    max_paths: u128,
) -> SynthInstance {
    let edge_prob = rng.random_range(0.15..0.5);
    let edges = loop {
        let edges = random_dag_edges(rng, n, edge_prob);
        let mut adj = vec![Vec::new(); n + 1];
        for &(a, b) in &edges {
            adj[a].push(b);
        }
        if dag::count_maximal_paths(&adj, 0).expect("forward edges only") <= max_paths {
            break edges;
        }
    };
    let mut steps = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    let (lo, hi) = (MIN_TIME.ln(), MAX_TIME.ln());
    for i in 1..=n {
        let kind = KIND_POOL[rng.random_range(0..KIND_POOL.len())];
        let tool = format!("T{i}");
        let time_seconds = rng.random_range(lo..=hi).exp();
        let quality = if unit_quality { 1.0 } else { rng.random_range(0.5..=1.0) };
        rows.push(BenchmarkRow {
            tool: tool.clone(),
            subtask: kind.name().to_string(),
            time_seconds,
            quality,
        });
        steps.push(ToolStep {
            tool: ToolId::new(tool).expect("non-empty name"),
            subtask: kind,
            instance: SubtaskInstance::new(kind, None, i as u32),
        });
    }
    SynthInstance {
        name: name.into(),
        graph: ToolSubgraph::from_parts(steps, &edges).expect("generator yields rooted DAGs"),
        benchmark: BenchmarkTable::from_rows(&rows, None).expect("generated rows are valid"),
        unit_quality,
    }
}

/// `count` instances of 2..=`max_nodes` tool nodes. Every other instance,
/// starting with the first, has unit quality.
pub fn generate_instances(seed: u64, count: usize, max_nodes: usize) -> Vec<SynthInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n = rng.random_range(2..=max_nodes.max(2));
            random_instance(&mut rng, format!("synth-{i:04}"), n, i % 2 == 0, DEFAULT_MAX_PATHS)
        })
        .collect()
}
