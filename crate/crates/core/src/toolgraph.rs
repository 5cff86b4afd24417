//! Tool dependency graph and tool subgraph construction.
//!
//! The tool dependency graph (TDG) has an edge `a -> b` whenever some output
//! of `a` is an input of `b`. A tool subgraph replaces every node of a subtask
//! tree by the tools able to perform it, each preceded by the prerequisite
//! tools needed to produce its inputs, and hangs the result under a virtual
//! ROOT that provides the input image.
//!
//! Prerequisites are resolved against the resources guaranteed to exist on
//! every path reaching a subtask instance. For each missing input the
//! cheapest producer is spliced in, where a producer costs one node plus the
//! cost of its own missing inputs; ties go to the smaller tool name, then the
//! smaller subtask name. Chains of alternatives for the same instance share
//! common prefixes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dag::{self, CycleDetected, DagView};
use crate::planning::{parse_label, SubtaskInstance, SubtaskTree};
use crate::registry::{ModelDescriptionTable, ResourceType, ToolId, ToolRecord};
use crate::vocab::SubtaskKind;

/// Default cap on enumerated ROOT-to-leaf paths.
pub const DEFAULT_PATH_CAP: usize = 1_000_000;

/// Label used for the virtual root in exports.
pub const ROOT_LABEL: &str = "ROOT";

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("no tool supports subtask {0}")]
    NoToolForSubtask(String),
    #[error("no producer chain yields {resource} for {tool} ({instance})")]
    UnsatisfiableDependency {
        tool: ToolId,
        resource: String,
        instance: String,
    },
    #[error("spliced dependency {from} -> {to} is not an edge of the tool dependency graph")]
    NotInTdg { from: ToolId, to: ToolId },
    #[error(transparent)]
    Cycle(#[from] CycleDetected),
    #[error("{count} paths exceed the cap of {cap}")]
    PathExplosion { count: u128, cap: usize },
    #[error("invalid subgraph: {0}")]
    Invalid(String),
}

/// Directed graph over tools; `a -> b` when `b` consumes something `a` makes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ToolDependencyGraph {
    nodes: BTreeSet<ToolId>,
    edges: BTreeSet<(ToolId, ToolId)>,
}

impl ToolDependencyGraph {
    pub fn nodes(&self) -> &BTreeSet<ToolId> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<(ToolId, ToolId)> {
        &self.edges
    }

    pub fn has_edge(&self, from: &ToolId, to: &ToolId) -> bool {
        self.edges.contains(&(from.clone(), to.clone()))
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph tdg {\n  node [shape=box];\n");
        for n in &self.nodes {
            let _ = writeln!(out, "  \"{}\";", escape(n.as_str()));
        }
        for (a, b) in &self.edges {
            let _ = writeln!(out, "  \"{}\" -> \"{}\";", escape(a.as_str()), escape(b.as_str()));
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            nodes: Vec<&'a str>,
            edges: Vec<[&'a str; 2]>,
        }
        let doc = Doc {
            nodes: self.nodes.iter().map(ToolId::as_str).collect(),
            edges: self.edges.iter().map(|(a, b)| [a.as_str(), b.as_str()]).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("tdg serializes")
    }
}

pub fn build_tdg(mdt: &ModelDescriptionTable) -> ToolDependencyGraph {
    let nodes: BTreeSet<ToolId> = mdt.tools().into_iter().cloned().collect();
    let io: Vec<_> = nodes
        .iter()
        .map(|t| (t, mdt.tool_outputs(t), mdt.tool_inputs(t)))
        .collect();
    let mut edges = BTreeSet::new();
    for (a, outputs, _) in &io {
        for (b, _, inputs) in &io {
            if a != b && !outputs.is_disjoint(inputs) {
                edges.insert(((*a).clone(), (*b).clone()));
            }
        }
    }
    ToolDependencyGraph { nodes, edges }
}

/// A tool applied in service of one subtask instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolStep {
    pub tool: ToolId,
    /// The subtask the tool performs (its benchmark key).
    pub subtask: SubtaskKind,
    /// The subtask-tree instance this step serves.
    pub instance: SubtaskInstance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Root,
    Tool(ToolStep),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanNode {
    pub id: usize,
    pub kind: NodeKind,
}

impl PlanNode {
    pub fn is_root(&self) -> bool {
        matches!(self.kind, NodeKind::Root)
    }

    pub fn step(&self) -> Option<&ToolStep> {
        match &self.kind {
            NodeKind::Root => None,
            NodeKind::Tool(s) => Some(s),
        }
    }

    pub fn tool_name(&self) -> &str {
        self.step().map_or(ROOT_LABEL, |s| s.tool.as_str())
    }

    pub fn subtask_name(&self) -> Option<&'static str> {
        self.step().map(|s| s.subtask.name())
    }
}

/// The search space: a DAG of tool steps rooted at node 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolSubgraph {
    nodes: Vec<PlanNode>,
    succ: Vec<Vec<usize>>,
}

impl DagView for ToolSubgraph {
    fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn successors(&self, node: usize) -> &[usize] {
        &self.succ[node]
    }
}

impl ToolSubgraph {
    pub const ROOT: usize = 0;

    /// Builds a subgraph from steps and edges. Node 0 is the root; the other
    /// nodes get ids 1.. in order. Fails unless the result is a DAG with every
    /// node reachable from the root.
    pub fn from_parts(steps: Vec<ToolStep>, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut nodes = vec![PlanNode {
            id: 0,
            kind: NodeKind::Root,
        }];
        nodes.extend(steps.into_iter().enumerate().map(|(i, s)| PlanNode {
            id: i + 1,
            kind: NodeKind::Tool(s),
        }));
        let n = nodes.len();
        let mut succ = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(GraphError::Invalid(format!("edge ({a}, {b}) out of range")));
            }
            if b == Self::ROOT {
                return Err(GraphError::Invalid("edge into ROOT".into()));
            }
            succ[a].push(b);
        }
        for s in &mut succ {
            s.sort_unstable();
            s.dedup();
        }
        let g = ToolSubgraph { nodes, succ };
        dag::validate_dag(&g)?;
        let mut seen = vec![false; n];
        let mut stack = vec![Self::ROOT];
        seen[Self::ROOT] = true;
        while let Some(v) = stack.pop() {
            for &w in &g.succ[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(GraphError::Invalid(format!("node {orphan} unreachable from ROOT")));
        }
        Ok(g)
    }

    pub fn nodes(&self) -> &[PlanNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &PlanNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn successors(&self, id: usize) -> &[usize] {
        &self.succ[id]
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.succ[id].is_empty()
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_leaf(i)).collect()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(a, s)| s.iter().map(move |&b| (a, b)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn topological_order(&self) -> Vec<usize> {
        dag::topological_order(self).expect("validated at construction")
    }

    pub fn path_count(&self) -> u128 {
        dag::count_maximal_paths(self, Self::ROOT).expect("validated at construction")
    }

    pub fn to_document(&self) -> SubgraphDocument {
        SubgraphDocument {
            nodes: self
                .nodes
                .iter()
                .map(|n| match n.step() {
                    None => NodeDocument {
                        id: n.id,
                        tool: ROOT_LABEL.into(),
                        subtask: None,
                        argument: None,
                        ordinal: None,
                        instance: None,
                    },
                    Some(s) => NodeDocument {
                        id: n.id,
                        tool: s.tool.to_string(),
                        subtask: Some(s.subtask.name().into()),
                        argument: s.instance.argument.clone(),
                        ordinal: Some(s.instance.ordinal),
                        instance: Some(s.instance.label()),
                    },
                })
                .collect(),
            edges: self.edges().into_iter().map(|(a, b)| [a, b]).collect(),
        }
    }

    pub fn from_document(doc: &SubgraphDocument) -> Result<Self, GraphError> {
        let mut docs: Vec<&NodeDocument> = doc.nodes.iter().collect();
        docs.sort_by_key(|n| n.id);
        if docs.iter().enumerate().any(|(i, n)| n.id != i) {
            return Err(GraphError::Invalid("node ids must be dense from 0".into()));
        }
        match docs.first() {
            Some(root) if root.tool == ROOT_LABEL && root.subtask.is_none() => {}
            _ => return Err(GraphError::Invalid("node 0 must be ROOT".into())),
        }
        let steps = docs[1..]
            .iter()
            .map(|n| {
                let subtask_name = n
                    .subtask
                    .as_deref()
                    .ok_or_else(|| GraphError::Invalid(format!("node {} has no subtask", n.id)))?;
                let subtask = SubtaskKind::from_name(subtask_name)
                    .ok_or_else(|| GraphError::Invalid(format!("unknown subtask {subtask_name:?}")))?;
                let instance_kind = match &n.instance {
                    Some(label) => SubtaskKind::from_name(&parse_label(label).kind)
                        .ok_or_else(|| GraphError::Invalid(format!("bad instance label {label:?}")))?,
                    None => subtask,
                };
                let tool = ToolId::new(n.tool.as_str()).map_err(|e| GraphError::Invalid(e.to_string()))?;
                Ok(ToolStep {
                    tool,
                    subtask,
                    instance: SubtaskInstance {
                        kind: instance_kind,
                        argument: n.argument.clone(),
                        ordinal: n.ordinal.unwrap_or(0),
                    },
                })
            })
            .collect::<Result<Vec<_>, GraphError>>()?;
        let edges: Vec<(usize, usize)> = doc.edges.iter().map(|e| (e[0], e[1])).collect();
        Self::from_parts(steps, &edges)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("subgraph serializes")
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph tool_subgraph {\n  node [shape=box];\n");
        for n in &self.nodes {
            let label = match n.step() {
                None => ROOT_LABEL.to_string(),
                Some(s) => format!(
                    "{}\\n{}\\n{}",
                    escape(s.tool.as_str()),
                    s.subtask,
                    escape(&s.instance.label())
                ),
            };
            let _ = writeln!(out, "  n{} [label=\"{}\"];", n.id, label);
        }
        for (a, b) in self.edges() {
            let _ = writeln!(out, "  n{a} -> n{b};");
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Wire form of a tool subgraph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphDocument {
    pub nodes: Vec<NodeDocument>,
    pub edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDocument {
    pub id: usize,
    pub tool: String,
    pub subtask: Option<String>,
    pub argument: Option<String>,
    pub ordinal: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<String>,
}

/// Kahn check on any graph view.
pub fn validate_dag<G: DagView + ?Sized>(g: &G) -> Result<(), CycleDetected> {
    dag::validate_dag(g)
}

/// All ROOT-to-leaf paths in lexicographic node-id order.
pub fn enumerate_paths(g: &ToolSubgraph, cap: usize) -> Result<Vec<Vec<usize>>, GraphError> {
    dag::maximal_paths(g, ToolSubgraph::ROOT, cap).map_err(|count| GraphError::PathExplosion { count, cap })
}

/// Cheapest known producer for each resource, given what is already
/// available.
struct ProducerIndex<'a> {
    best: BTreeMap<ResourceType, (u32, &'a ToolRecord)>,
}

const UNREACHABLE: u32 = u32::MAX;

impl<'a> ProducerIndex<'a> {
    fn new(mdt: &'a ModelDescriptionTable, available: &BTreeSet<ResourceType>) -> Self {
        let mut best: BTreeMap<ResourceType, (u32, &'a ToolRecord)> = BTreeMap::new();
        let cost_of = |best: &BTreeMap<ResourceType, (u32, &ToolRecord)>, r: &ResourceType| -> u32 {
            if available.contains(r) {
                0
            } else {
                best.get(r).map_or(UNREACHABLE, |(c, _)| *c)
            }
        };
        loop {
            let mut changed = false;
            for rec in mdt.records() {
                let mut cost = 1u32;
                for input in &rec.inputs {
                    cost = cost.saturating_add(cost_of(&best, input));
                }
                if cost == UNREACHABLE {
                    continue;
                }
                for out in &rec.outputs {
                    if available.contains(out) {
                        continue;
                    }
                    let better = match best.get(out) {
                        None => true,
                        Some((c, cur)) => {
                            cost < *c || (cost == *c && (&rec.tool, rec.subtask) < (&cur.tool, cur.subtask))
                        }
                    };
                    if better {
                        best.insert(out.clone(), (cost, rec));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        ProducerIndex { best }
    }

    fn producer(&self, r: &ResourceType) -> Option<&'a ToolRecord> {
        self.best.get(r).map(|(_, rec)| *rec)
    }
}

fn splice<'a>(
    record: &'a ToolRecord,
    index: &ProducerIndex<'a>,
    produced: &mut BTreeSet<ResourceType>,
    chain: &mut Vec<&'a ToolRecord>,
    instance: &SubtaskInstance,
    candidate: &ToolRecord,
) -> Result<(), GraphError> {
    for input in &record.inputs {
        if produced.contains(input) {
            continue;
        }
        let producer = index
            .producer(input)
            .ok_or_else(|| GraphError::UnsatisfiableDependency {
                tool: candidate.tool.clone(),
                resource: input.label().to_string(),
                instance: instance.label(),
            })?;
        splice(producer, index, produced, chain, instance, candidate)?;
    }
    chain.push(record);
    produced.extend(record.outputs.iter().cloned());
    Ok(())
}

/// Expands a subtask tree into its tool subgraph.
pub fn build_tool_subgraph(
    tree: &SubtaskTree,
    mdt: &ModelDescriptionTable,
    tdg: &ToolDependencyGraph,
) -> Result<ToolSubgraph, GraphError> {
    let n = tree.len();
    // Resources guaranteed on every path leaving each instance's expansion.
    let mut guaranteed_out: Vec<Option<BTreeSet<ResourceType>>> = vec![None; n];
    let mut entries: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut exits: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut steps: Vec<ToolStep> = Vec::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();

    for i in tree.topological_order() {
        let instance = &tree.nodes()[i];
        let available: BTreeSet<ResourceType> = if tree.parents(i).is_empty() {
            BTreeSet::from([ResourceType::input_image()])
        } else {
            let mut sets = tree
                .parents(i)
                .iter()
                .map(|&p| guaranteed_out[p].as_ref().expect("parents expand first"));
            let first = sets.next().unwrap().clone();
            sets.fold(first, |acc, s| acc.intersection(s).cloned().collect())
        };

        let candidates = mdt.records_for(instance.kind);
        if candidates.is_empty() {
            return Err(GraphError::NoToolForSubtask(instance.label()));
        }
        let index = ProducerIndex::new(mdt, &available);
        let mut common: Option<BTreeSet<ResourceType>> = None;
        // (parent trie node, tool, subtask) -> node id
        let mut trie: BTreeMap<(usize, ToolId, SubtaskKind), usize> = BTreeMap::new();
        for candidate in candidates {
            let mut produced = available.clone();
            let mut chain = Vec::new();
            splice(candidate, &index, &mut produced, &mut chain, instance, candidate)?;
            for pair in chain.windows(2) {
                let (a, b) = (&pair[0].tool, &pair[1].tool);
                if a != b && !tdg.has_edge(a, b) && !pair[0].outputs.is_disjoint(&pair[1].inputs) {
                    return Err(GraphError::NotInTdg {
                        from: a.clone(),
                        to: b.clone(),
                    });
                }
            }
            let mut parent = usize::MAX;
            for rec in &chain {
                let key = (parent, rec.tool.clone(), rec.subtask);
                let id = *trie.entry(key).or_insert_with(|| {
                    steps.push(ToolStep {
                        tool: rec.tool.clone(),
                        subtask: rec.subtask,
                        instance: instance.clone(),
                    });
                    let id = steps.len();
                    if parent == usize::MAX {
                        entries[i].push(id);
                    } else {
                        edges.push((parent, id));
                    }
                    id
                });
                parent = id;
            }
            exits[i].push(parent);
            common = Some(match common {
                None => produced,
                Some(c) => c.intersection(&produced).cloned().collect(),
            });
        }
        guaranteed_out[i] = common;

        if tree.parents(i).is_empty() {
            edges.extend(entries[i].iter().map(|&e| (ToolSubgraph::ROOT, e)));
        } else {
            for &p in tree.parents(i) {
                for &x in &exits[p] {
                    edges.extend(entries[i].iter().map(|&e| (x, e)));
                }
            }
        }
    }
    ToolSubgraph::from_parts(steps, &edges)
}
