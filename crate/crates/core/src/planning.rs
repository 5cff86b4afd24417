//! Subtask trees: the planner prompt, the planner endpoint, and parsing of the
//! JSON tree the planner returns.
//!
//! A tree node label has the shape `<Kind> (<Argument>)(<ordinal>)`, e.g.
//! `Object Replacement (Cat -> Rabbit)(3)`. The argument is optional; a
//! missing ordinal is replaced by a fresh one larger than every explicit
//! ordinal in the tree.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dag::{self, DagView};
use crate::vocab::SubtaskKind;

/// Environment variable holding the planner endpoint base URL.
pub const PLANNER_URL_ENV: &str = "COSTA_PLANNER_URL";

/// Token standing in for the image in the planner prompt.
pub const IMAGE_PLACEHOLDER: &str = "<input_image>";

#[derive(Debug, thiserror::Error)]
pub enum PlanningError {
    #[error("task description is empty")]
    EmptyTask,
    #[error("malformed subtask tree: {0}")]
    Parse(String),
    #[error("unknown subtask {0:?}")]
    UnknownSubtask(String),
    #[error("subtask tree has no nodes")]
    EmptyTree,
    #[error("duplicate subtask node {0:?}")]
    DuplicateNode(String),
    #[error("node {node:?} names missing parent {parent:?}")]
    DanglingParent { node: String, parent: String },
    #[error("subtask tree has a cycle: {}", .0.join(" -> "))]
    CycleDetected(Vec<String>),
    #[error("root-to-leaf chain {chain:?} does not cover required subtask {missing:?}")]
    MissingRequirement { chain: Vec<String>, missing: String },
    #[error("no planner endpoint configured (set {PLANNER_URL_ENV})")]
    EndpointUnavailable,
    #[error("planner request failed: {0}")]
    Transport(String),
}

/// One labeled occurrence of a subtask inside a tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubtaskInstance {
    pub kind: SubtaskKind,
    pub argument: Option<String>,
    pub ordinal: u32,
}

impl SubtaskInstance {
    pub fn new(kind: SubtaskKind, argument: Option<&str>, ordinal: u32) -> Self {
        SubtaskInstance {
            kind,
            argument: argument.map(str::to_string),
            ordinal,
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for SubtaskInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.argument {
            Some(arg) => write!(f, "{} ({})({})", self.kind, arg, self.ordinal),
            None => write!(f, "{}({})", self.kind, self.ordinal),
        }
    }
}

/// A label split into its parts, before vocabulary lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedLabel {
    pub kind: String,
    pub argument: Option<String>,
    pub ordinal: Option<u32>,
}

/// Splits `Kind (Argument)(N)`. Parenthesized groups are matched from the
/// end, so arguments may contain nested parentheses.
pub fn parse_label(label: &str) -> ParsedLabel {
    let mut rest = label.trim();
    let mut ordinal = None;
    let mut argument = None;
    if let Some((head, inner)) = trailing_group(rest) {
        if !inner.is_empty() && inner.chars().all(|c| c.is_ascii_digit()) {
            ordinal = inner.parse().ok();
            rest = head;
        }
    }
    if let Some((head, inner)) = trailing_group(rest) {
        if !head.trim().is_empty() {
            argument = Some(inner.trim().to_string());
            rest = head;
        }
    }
    ParsedLabel {
        kind: rest.trim().to_string(),
        argument,
        ordinal,
    }
}

// `s` ending in a balanced "(...)" group -> (text before the group, group contents)
fn trailing_group(s: &str) -> Option<(&str, &str)> {
    let s = s.trim_end();
    if !s.ends_with(')') {
        return None;
    }
    let mut depth = 0i32;
    for (i, c) in s.char_indices().rev() {
        match c {
            ')' => depth += 1,
            '(' => {
                depth -= 1;
                if depth == 0 {
                    return Some((&s[..i], &s[i + 1..s.len() - 1]));
                }
            }
            _ => {}
        }
    }
    None
}

/// A DAG of subtask instances. Nodes without parents are roots; every
/// root-to-leaf chain is one admissible ordering of the subtasks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtaskTree {
    task: String,
    nodes: Vec<SubtaskInstance>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl DagView for SubtaskTree {
    fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn successors(&self, node: usize) -> &[usize] {
        &self.children[node]
    }
}

impl SubtaskTree {
    /// Builds a tree from instances and parent index lists, checking
    /// uniqueness and acyclicity.
    pub fn new(
        task: impl Into<String>,
        nodes: Vec<SubtaskInstance>,
        parents: Vec<Vec<usize>>,
    ) -> Result<Self, PlanningError> {
        if nodes.is_empty() {
            return Err(PlanningError::EmptyTree);
        }
        assert_eq!(nodes.len(), parents.len(), "one parent list per node");
        let mut seen = BTreeSet::new();
        for n in &nodes {
            if !seen.insert(n) {
                return Err(PlanningError::DuplicateNode(n.label()));
            }
        }
        let mut children = vec![Vec::new(); nodes.len()];
        let mut parents = parents;
        for (child, ps) in parents.iter_mut().enumerate() {
            ps.sort_unstable();
            ps.dedup();
            for &p in ps.iter() {
                children[p].push(child);
            }
        }
        let tree = SubtaskTree {
            task: task.into(),
            nodes,
            parents,
            children,
        };
        if let Err(e) = dag::validate_dag(&tree) {
            return Err(PlanningError::CycleDetected(
                e.cycle.iter().map(|&i| tree.nodes[i].label()).collect(),
            ));
        }
        Ok(tree)
    }

    pub fn task(&self) -> &str {
        &self.task
    }

    pub fn nodes(&self) -> &[SubtaskInstance] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn parents(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn roots(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.parents[i].is_empty()).collect()
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.children[i].is_empty()).collect()
    }

    /// Topological order, smallest index first among ready nodes.
    pub fn topological_order(&self) -> Vec<usize> {
        dag::topological_order(self).expect("validated at construction")
    }

    /// Every root-to-leaf chain, roots in index order.
    pub fn chains(&self) -> Vec<Vec<usize>> {
        self.roots()
            .into_iter()
            .flat_map(|r| dag::maximal_paths(self, r, usize::MAX).expect("no cap"))
            .collect()
    }

    /// Number of root-to-leaf chains.
    pub fn chain_count(&self) -> u128 {
        self.roots()
            .into_iter()
            .map(|r| dag::count_maximal_paths(self, r).expect("validated"))
            .fold(0u128, u128::saturating_add)
    }

    /// Checks that every root-to-leaf chain visits each required
    /// (kind, argument) pair at least once.
    pub fn check_requirements(&self, required: &[(SubtaskKind, Option<String>)]) -> Result<(), PlanningError> {
        for chain in self.chains() {
            for (kind, arg) in required {
                let covered = chain
                    .iter()
                    .any(|&i| self.nodes[i].kind == *kind && &self.nodes[i].argument == arg);
                if !covered {
                    return Err(PlanningError::MissingRequirement {
                        chain: chain.iter().map(|&i| self.nodes[i].label()).collect(),
                        missing: match arg {
                            Some(a) => format!("{kind} ({a})"),
                            None => kind.to_string(),
                        },
                    });
                }
            }
        }
        Ok(())
    }

    pub fn to_document(&self) -> TreeDocument {
        TreeDocument {
            task: self.task.clone(),
            subtask_tree: self
                .nodes
                .iter()
                .zip(&self.parents)
                .map(|(n, ps)| TreeNodeDocument {
                    subtask: n.label(),
                    parent: ps.iter().map(|&p| self.nodes[p].label()).collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("tree serializes")
    }
}

/// Wire form of a subtask tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    #[serde(default)]
    pub task: String,
    pub subtask_tree: Vec<TreeNodeDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNodeDocument {
    pub subtask: String,
    #[serde(default, deserialize_with = "null_as_empty")]
    pub parent: Vec<String>,
}

fn null_as_empty<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    Ok(Option::<Vec<String>>::deserialize(d)?.unwrap_or_default())
}

// Planner responses sometimes arrive inside a markdown fence or as bare
// object members without the enclosing braces.
fn extract_json(text: &str) -> String {
    let mut body = text.trim();
    if let Some(start) = body.find("```") {
        let after = &body[start + 3..];
        let after = after.strip_prefix("json").unwrap_or(after);
        body = match after.find("```") {
            Some(end) => &after[..end],
            None => after,
        };
        body = body.trim();
    }
    if body.starts_with('{') {
        body.to_string()
    } else if let (Some(a), Some(b)) = (body.find('{'), body.rfind('}')) {
        if body[..a].contains("\"subtask_tree\"") || body[..a].contains("\"task\"") {
            format!("{{{body}}}")
        } else {
            body[a..=b].to_string()
        }
    } else {
        format!("{{{body}}}")
    }
}

/// Parses a planner response into a validated tree. Subtask kinds must come
/// from `vocabulary`.
pub fn parse_subtask_tree(json_text: &str, vocabulary: &[SubtaskKind]) -> Result<SubtaskTree, PlanningError> {
    let doc: TreeDocument =
        serde_json::from_str(&extract_json(json_text)).map_err(|e| PlanningError::Parse(e.to_string()))?;
    tree_from_document(&doc, vocabulary)
}

pub fn tree_from_document(doc: &TreeDocument, vocabulary: &[SubtaskKind]) -> Result<SubtaskTree, PlanningError> {
    if doc.subtask_tree.is_empty() {
        return Err(PlanningError::EmptyTree);
    }
    let parsed: Vec<ParsedLabel> = doc.subtask_tree.iter().map(|n| parse_label(&n.subtask)).collect();
    let kinds = parsed
        .iter()
        .map(|p| {
            SubtaskKind::from_name(&p.kind)
                .filter(|k| vocabulary.contains(k))
                .ok_or_else(|| PlanningError::UnknownSubtask(p.kind.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut next_ordinal = parsed.iter().filter_map(|p| p.ordinal).max().unwrap_or(0) + 1;
    let nodes: Vec<SubtaskInstance> = parsed
        .iter()
        .zip(&kinds)
        .map(|(p, &kind)| {
            let ordinal = p.ordinal.unwrap_or_else(|| {
                next_ordinal += 1;
                next_ordinal - 1
            });
            SubtaskInstance {
                kind,
                argument: p.argument.clone(),
                ordinal,
            }
        })
        .collect();

    let raw_index: BTreeMap<&str, usize> = doc
        .subtask_tree
        .iter()
        .enumerate()
        .map(|(i, n)| (n.subtask.trim(), i))
        .collect();
    let resolve = |label: &str| -> Option<usize> {
        if let Some(&i) = raw_index.get(label.trim()) {
            return Some(i);
        }
        let p = parse_label(label);
        let kind = SubtaskKind::from_name(&p.kind)?;
        let mut hits = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.kind == kind && n.argument == p.argument && p.ordinal.is_none_or(|o| o == n.ordinal));
        let first = hits.next()?;
        hits.next().is_none().then_some(first.0)
    };
    let parents = doc
        .subtask_tree
        .iter()
        .map(|n| {
            n.parent
                .iter()
                .map(|label| {
                    resolve(label).ok_or_else(|| PlanningError::DanglingParent {
                        node: n.subtask.clone(),
                        parent: label.clone(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    SubtaskTree::new(doc.task.clone(), nodes, parents)
}

pub fn load_subtask_tree(path: impl AsRef<Path>) -> Result<SubtaskTree, PlanningError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| PlanningError::Parse(format!("{}: {e}", path.display())))?;
    parse_subtask_tree(&text, &SubtaskKind::PLANNER)
}

/// The fully assembled planner prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannerPrompt {
    pub text: String,
}

const PROMPT_HEAD: &str = "\
You decompose an image editing request into a subtask tree. Produce a well-formed tree that orders every step needed to satisfy the user prompt.

## What a subtask tree is
Each node is one atomic operation on the image. A node that depends on another node must come after it.

## How to build it
1. List every subtask the prompt requires.
2. Order them so that dependent operations come later on the path.
3. Label each subtask with the object it acts on, as (Obj1 -> Obj2) when Obj1 becomes Obj2, (Obj -> new color) for recoloring, and (Obj) for removal.
4. Independent subtasks may be ordered several ways, so one subtask can appear on different branches. Number every occurrence distinctly, e.g. Subtask1(1), Subtask1(2).
5. A request can have several valid approaches. Replacing a cat with a pink dog can be Object Replacement (Cat -> Pink Dog), or Object Replacement (Cat -> Dog) followed by Object Recoloration (Dog -> Pink Dog).

## Ordering constraints
- If an object is replaced and then segmented, the segmentation comes after the replacement.
- Every subtask builds on the output of the one before it.

## Supported Subtasks
";

const PROMPT_FORMAT: &str = "\
Use only the subtasks listed above.

## Output format
Return JSON with the task text and a \"subtask_tree\" array. Each element has \"subtask\" (name with object label) and \"parent\" (labels of the subtasks it depends on, empty for the first step).

## Example 1
Prompt: Detect the pedestrians, remove the car and replacement the cat with rabbit and recolor the dog to pink
{\"task\": \"Detect the pedestrians, remove the car and replacement the cat with rabbit and recolor the dog to pink\", \"subtask_tree\": [
  {\"subtask\": \"Object Detection (Pedestrian)(1)\", \"parent\": []},
  {\"subtask\": \"Object Removal (Car)(2)\", \"parent\": [\"Object Detection (Pedestrian)(1)\"]},
  {\"subtask\": \"Object Replacement (Cat -> Rabbit)(3)\", \"parent\": [\"Object Removal (Car)(2)\"]},
  {\"subtask\": \"Object Replacement (Cat -> Rabbit)(4)\", \"parent\": [\"Object Detection (Pedestrian)(1)\"]},
  {\"subtask\": \"Object Removal (Car)(5)\", \"parent\": [\"Object Replacement (Cat -> Rabbit)(4)\"]},
  {\"subtask\": \"Object Recoloration (Dog -> Pink Dog)(6)\", \"parent\": [\"Object Replacement (Cat -> Rabbit)(3)\", \"Object Removal (Car)(5)\"]}
]}

## Example 2
Prompt: Update the closed signage to open while detecting the trash can and pedestrian crossing for better scene understanding. Also, remove the people for clarity.
{\"task\": \"Update the closed signage to open while detecting the trash can and pedestrian crossing for better scene understanding. Also, remove the people for clarity.\", \"subtask_tree\": [
  {\"subtask\": \"Text Replacement (CLOSED -> OPEN)(1)\", \"parent\": []},
  {\"subtask\": \"Object Detection (Pedestrian Crossing)(2)\", \"parent\": [\"Text Replacement (CLOSED -> OPEN)(1)\"]},
  {\"subtask\": \"Object Detection (Trash Can)(3)\", \"parent\": [\"Text Replacement (CLOSED -> OPEN)(1)\"]},
  {\"subtask\": \"Object Detection (Pedestrian Crossing)(4)\", \"parent\": [\"Object Detection (Trash Can)(3)\"]},
  {\"subtask\": \"Object Detection (Trash Can)(5)\", \"parent\": [\"Object Detection (Pedestrian Crossing)(2)\"]},
  {\"subtask\": \"Object Removal (People)(6)\", \"parent\": [\"Object Detection (Pedestrian Crossing)(4)\", \"Object Detection (Trash Can)(5)\"]}
]}

## Your task
Keep the ordering logical, label subtasks by object where needed, and answer with the JSON tree only. Every path through the tree must include all required subtasks.
";

/// Assembles the planner prompt for `task_text` offering `vocabulary`.
pub fn build_planner_prompt(task_text: &str, vocabulary: &[SubtaskKind]) -> Result<PlannerPrompt, PlanningError> {
    let task = task_text.trim();
    if task.is_empty() {
        return Err(PlanningError::EmptyTask);
    }
    let list = vocabulary.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ");
    let text = format!(
        "{PROMPT_HEAD}{list}\n\n{PROMPT_FORMAT}\nImage: {IMAGE_PLACEHOLDER}\nPrompt: {task}\nSupported Subtasks: see the list above\n"
    );
    Ok(PlannerPrompt { text })
}

/// Something that turns a planner prompt into response text.
pub trait PlannerClient {
    fn complete(&self, prompt: &PlannerPrompt) -> Result<String, PlanningError>;
}

/// Returns a canned response.
#[derive(Debug, Clone)]
pub struct StubPlanner {
    response: String,
}

impl StubPlanner {
    pub fn new(response: impl Into<String>) -> Self {
        StubPlanner {
            response: response.into(),
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, PlanningError> {
        std::fs::read_to_string(path.as_ref())
            .map(Self::new)
            .map_err(|e| PlanningError::Transport(e.to_string()))
    }
}

impl PlannerClient for StubPlanner {
    fn complete(&self, _prompt: &PlannerPrompt) -> Result<String, PlanningError> {
        Ok(self.response.clone())
    }
}

/// POSTs `{"prompt": ...}` to a planner endpoint and reads `{"text": ...}`.
#[derive(Debug, Clone)]
pub struct HttpPlanner {
    url: String,
}

#[derive(Serialize)]
struct PlannerRequest<'a> {
    prompt: &'a str,
}

#[derive(Deserialize)]
struct PlannerResponse {
    text: String,
}

impl HttpPlanner {
    pub fn new(url: impl Into<String>) -> Result<Self, PlanningError> {
        let url = url.into();
        if url.trim().is_empty() {
            return Err(PlanningError::EndpointUnavailable);
        }
        Ok(HttpPlanner { url })
    }

    pub fn from_env() -> Result<Self, PlanningError> {
        match std::env::var(PLANNER_URL_ENV) {
            Ok(url) => Self::new(url),
            Err(_) => Err(PlanningError::EndpointUnavailable),
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl PlannerClient for HttpPlanner {
    fn complete(&self, prompt: &PlannerPrompt) -> Result<String, PlanningError> {
        let mut response = ureq::post(&self.url)
            .send_json(PlannerRequest { prompt: &prompt.text })
            .map_err(|e| PlanningError::Transport(e.to_string()))?;
        let body: PlannerResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| PlanningError::Transport(e.to_string()))?;
        Ok(body.text)
    }
}

/// One attempt against the planner; no retries.
pub fn request_tree(client: &dyn PlannerClient, prompt: &PlannerPrompt) -> Result<String, PlanningError> {
    client.complete(prompt)
}
