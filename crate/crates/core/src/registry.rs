//! Model description table (which tool does what, consuming and producing
//! which resources) and the benchmark table of expected time and quality per
//! (tool, subtask) pair.
//!
//! Both tables are immutable once loaded and are shared read-only by every
//! downstream stage.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::vocab::SubtaskKind;

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {what}: {source}")]
    Parse {
        what: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("unknown subtask {0:?}")]
    UnknownSubtask(String),
    #[error("tool name must not be empty")]
    EmptyToolName,
    #[error("duplicate entry for ({tool}, {subtask})")]
    DuplicateEntry { tool: ToolId, subtask: SubtaskKind },
    #[error("no benchmark row for ({tool}, {subtask})")]
    MissingBenchmark { tool: ToolId, subtask: SubtaskKind },
    #[error("negative or non-finite time {time} for ({tool}, {subtask})")]
    NegativeTime {
        tool: ToolId,
        subtask: SubtaskKind,
        time: f64,
    },
    #[error("non-positive quality {quality} for ({tool}, {subtask})")]
    NonPositiveQuality {
        tool: ToolId,
        subtask: SubtaskKind,
        quality: f64,
    },
}

/// Name of a tool, unique within a registry.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ToolId(String);

impl ToolId {
    pub fn new(name: impl Into<String>) -> Result<Self, RegistryError> {
        let name = name.into().trim().to_string();
        if name.is_empty() {
            return Err(RegistryError::EmptyToolName);
        }
        Ok(ToolId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ToolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An artifact category flowing between tools ("Bounding Boxes",
/// "Extracted Text", ...).
///
/// Equality, ordering and hashing use a matching key: lowercased, whitespace
/// collapsed, and a single trailing `s` dropped, so "Segmentation Mask" and
/// "Segmentation Masks" name the same resource.
#[derive(Debug, Clone)]
pub struct ResourceType {
    label: String,
    key: String,
}

impl ResourceType {
    pub const INPUT_IMAGE: &'static str = "Input Image";

    pub fn new(label: &str) -> Self {
        let label = label.split_whitespace().collect::<Vec<_>>().join(" ");
        ResourceType {
            key: match_key(&label),
            label,
        }
    }

    pub fn input_image() -> Self {
        Self::new(Self::INPUT_IMAGE)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn key(&self) -> &str {
        &self.key
    }
}

/// Matching key used for resource comparison.
pub fn match_key(label: &str) -> String {
    let mut key = label.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    if key.ends_with('s') {
        key.pop();
    }
    key
}

impl PartialEq for ResourceType {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for ResourceType {}

impl std::hash::Hash for ResourceType {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.key.hash(state)
    }
}

impl PartialOrd for ResourceType {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ResourceType {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.cmp(&other.key)
    }
}

impl fmt::Display for ResourceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// One (tool, subtask) capability with the resources it needs and produces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolRecord {
    pub tool: ToolId,
    pub subtask: SubtaskKind,
    pub inputs: BTreeSet<ResourceType>,
    pub outputs: BTreeSet<ResourceType>,
}

/// On-disk row of the model description table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdtRow {
    pub tool: String,
    pub subtasks: Vec<String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

/// The model description table, exploded into one record per
/// (tool, subtask) pair. Rows listing several subtasks share their I/O sets.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ModelDescriptionTable {
    records: Vec<ToolRecord>,
}

impl ModelDescriptionTable {
    pub fn from_rows(rows: &[MdtRow]) -> Result<Self, RegistryError> {
        let mut records = Vec::new();
        let mut seen = BTreeSet::new();
        for row in rows {
            let tool = ToolId::new(row.tool.as_str())?;
            let inputs: BTreeSet<_> = row.inputs.iter().map(|s| ResourceType::new(s)).collect();
            let outputs: BTreeSet<_> = row.outputs.iter().map(|s| ResourceType::new(s)).collect();
            for name in &row.subtasks {
                let subtask = SubtaskKind::from_name(name)
                    .ok_or_else(|| RegistryError::UnknownSubtask(name.trim().to_string()))?;
                if !seen.insert((tool.clone(), subtask)) {
                    return Err(RegistryError::DuplicateEntry {
                        tool: tool.clone(),
                        subtask,
                    });
                }
                records.push(ToolRecord {
                    tool: tool.clone(),
                    subtask,
                    inputs: inputs.clone(),
                    outputs: outputs.clone(),
                });
            }
        }
        Ok(ModelDescriptionTable { records })
    }

    pub fn from_json(text: &str) -> Result<Self, RegistryError> {
        let rows: Vec<MdtRow> = serde_json::from_str(text).map_err(|source| RegistryError::Parse {
            what: "model description table".into(),
            source,
        })?;
        Self::from_rows(&rows)
    }

    /// One row per record, in table order.
    pub fn to_rows(&self) -> Vec<MdtRow> {
        self.records
            .iter()
            .map(|r| MdtRow {
                tool: r.tool.to_string(),
                subtasks: vec![r.subtask.name().to_string()],
                inputs: r.inputs.iter().map(|x| x.label().to_string()).collect(),
                outputs: r.outputs.iter().map(|x| x.label().to_string()).collect(),
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_rows()).expect("rows serialize")
    }

    pub fn records(&self) -> &[ToolRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn tools(&self) -> BTreeSet<&ToolId> {
        self.records.iter().map(|r| &r.tool).collect()
    }

    pub fn record(&self, tool: &ToolId, subtask: SubtaskKind) -> Option<&ToolRecord> {
        self.records.iter().find(|r| &r.tool == tool && r.subtask == subtask)
    }

    /// Records of tools able to perform `subtask`, ordered by tool name.
    pub fn records_for(&self, subtask: SubtaskKind) -> Vec<&ToolRecord> {
        let mut out: Vec<_> = self.records.iter().filter(|r| r.subtask == subtask).collect();
        out.sort_by(|a, b| a.tool.cmp(&b.tool));
        out
    }

    /// Union of a tool's inputs over all its records.
    pub fn tool_inputs(&self, tool: &ToolId) -> BTreeSet<ResourceType> {
        self.records
            .iter()
            .filter(|r| &r.tool == tool)
            .flat_map(|r| r.inputs.iter().cloned())
            .collect()
    }

    /// Union of a tool's outputs over all its records.
    pub fn tool_outputs(&self, tool: &ToolId) -> BTreeSet<ResourceType> {
        self.records
            .iter()
            .filter(|r| &r.tool == tool)
            .flat_map(|r| r.outputs.iter().cloned())
            .collect()
    }

    /// Planner-facing subtasks no tool supports.
    pub fn coverage_gaps(&self) -> Vec<SubtaskKind> {
        SubtaskKind::PLANNER
            .into_iter()
            .filter(|k| !self.records.iter().any(|r| r.subtask == *k))
            .collect()
    }
}

/// Tools able to perform `subtask`.
pub fn lookup_models(mdt: &ModelDescriptionTable, subtask: SubtaskKind) -> BTreeSet<ToolId> {
    mdt.records
        .iter()
        .filter(|r| r.subtask == subtask)
        .map(|r| r.tool.clone())
        .collect()
}

fn read(path: &Path) -> Result<String, RegistryError> {
    fs::read_to_string(path).map_err(|source| RegistryError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_mdt(path: impl AsRef<Path>) -> Result<ModelDescriptionTable, RegistryError> {
    let mdt = ModelDescriptionTable::from_json(&read(path.as_ref())?)?;
    let gaps = mdt.coverage_gaps();
    if !gaps.is_empty() {
        log::warn!(
            "{} subtask(s) have no supporting tool: {}",
            gaps.len(),
            gaps.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
        );
    }
    Ok(mdt)
}

/// On-disk row of the benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub tool: String,
    pub subtask: String,
    pub time_seconds: f64,
    pub quality: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchmarkEntry {
    pub time_seconds: f64,
    pub quality_raw: f64,
    /// Quality divided by the best raw quality for the same subtask.
    pub quality_norm: f64,
}

pub type PairKey = (ToolId, SubtaskKind);

/// Expected time and normalized quality for every (tool, subtask) pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchmarkTable {
    entries: BTreeMap<PairKey, BenchmarkEntry>,
}

impl BenchmarkTable {
    /// Builds the table from raw rows, normalizing quality per subtask.
    ///
    /// When `mdt` is given, every (tool, subtask) pair of the MDT must have a
    /// row; rows for pairs the MDT does not list take part in normalization
    /// and are then dropped.
    pub fn from_rows(rows: &[BenchmarkRow], mdt: Option<&ModelDescriptionTable>) -> Result<Self, RegistryError> {
        let mut raw = BTreeMap::new();
        let mut times = BTreeMap::new();
        for row in rows {
            let tool = ToolId::new(row.tool.as_str())?;
            let subtask = SubtaskKind::from_name(&row.subtask)
                .ok_or_else(|| RegistryError::UnknownSubtask(row.subtask.trim().to_string()))?;
            let key = (tool.clone(), subtask);
            if !(row.time_seconds >= 0.0 && row.time_seconds.is_finite()) {
                return Err(RegistryError::NegativeTime {
                    tool,
                    subtask,
                    time: row.time_seconds,
                });
            }
            if raw.insert(key.clone(), row.quality).is_some() {
                return Err(RegistryError::DuplicateEntry { tool, subtask });
            }
            times.insert(key, row.time_seconds);
        }
        let norm = normalize_quality(&raw)?;
        let mut entries: BTreeMap<PairKey, BenchmarkEntry> = raw
            .iter()
            .map(|(key, &quality_raw)| {
                (
                    key.clone(),
                    BenchmarkEntry {
                        time_seconds: times[key],
                        quality_raw,
                        quality_norm: norm[key],
                    },
                )
            })
            .collect();
        if let Some(mdt) = mdt {
            for r in mdt.records() {
                if !entries.contains_key(&(r.tool.clone(), r.subtask)) {
                    return Err(RegistryError::MissingBenchmark {
                        tool: r.tool.clone(),
                        subtask: r.subtask,
                    });
                }
            }
            entries.retain(|(tool, subtask), _| mdt.record(tool, *subtask).is_some());
        }
        Ok(BenchmarkTable { entries })
    }

    pub fn from_json(text: &str, mdt: Option<&ModelDescriptionTable>) -> Result<Self, RegistryError> {
        let rows: Vec<BenchmarkRow> = serde_json::from_str(text).map_err(|source| RegistryError::Parse {
            what: "benchmark table".into(),
            source,
        })?;
        Self::from_rows(&rows, mdt)
    }

    /// Rows carrying the normalized quality, so reloading is the identity.
    pub fn to_rows(&self) -> Vec<BenchmarkRow> {
        self.entries
            .iter()
            .map(|((tool, subtask), e)| BenchmarkRow {
                tool: tool.to_string(),
                subtask: subtask.name().to_string(),
                time_seconds: e.time_seconds,
                quality: e.quality_norm,
            })
            .collect()
    }

    pub fn get(&self, tool: &ToolId, subtask: SubtaskKind) -> Option<&BenchmarkEntry> {
        // BTreeMap lookups need an owned key; the table is small.
        self.entries.get(&(tool.clone(), subtask))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&PairKey, &BenchmarkEntry)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Copy with every normalized quality set to 1.
    pub fn with_unit_quality(&self) -> Self {
        let mut out = self.clone();
        for e in out.entries.values_mut() {
            e.quality_raw = 1.0;
            e.quality_norm = 1.0;
        }
        out
    }

    /// Copy with every time multiplied by `factor`.
    pub fn with_scaled_times(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for e in out.entries.values_mut() {
            e.time_seconds *= factor;
        }
        out
    }
}

pub fn load_benchmark(path: impl AsRef<Path>, mdt: &ModelDescriptionTable) -> Result<BenchmarkTable, RegistryError> {
    BenchmarkTable::from_json(&read(path.as_ref())?, Some(mdt))
}

/// Divides each quality by the maximum quality of its subtask.
pub fn normalize_quality(raw: &BTreeMap<PairKey, f64>) -> Result<BTreeMap<PairKey, f64>, RegistryError> {
    let mut best: BTreeMap<SubtaskKind, f64> = BTreeMap::new();
    for ((tool, subtask), &q) in raw {
        if !(q > 0.0 && q.is_finite()) {
            return Err(RegistryError::NonPositiveQuality {
                tool: tool.clone(),
                subtask: *subtask,
                quality: q,
            });
        }
        let slot = best.entry(*subtask).or_insert(q);
        if q > *slot {
            *slot = q;
        }
    }
    Ok(raw
        .iter()
        .map(|(key, &q)| {
            let max = best[&key.1];
            let v = if q == max { 1.0 } else { q / max };
            (key.clone(), v)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tool(s: &str) -> ToolId {
        ToolId::new(s).unwrap()
    }

    fn row(tool: &str, subtasks: &[&str], inputs: &[&str], outputs: &[&str]) -> MdtRow {
        MdtRow {
            tool: tool.into(),
            subtasks: subtasks.iter().map(|s| s.to_string()).collect(),
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn resource_matching_tolerates_plural_and_case() {
        assert_eq!(
            ResourceType::new("Segmentation Mask"),
            ResourceType::new("segmentation   masks")
        );
        assert_ne!(
            ResourceType::new("Text Bounding Box"),
            ResourceType::new("Text Region Bounding Box")
        );
        assert_eq!(ResourceType::new(" Input  Image ").label(), "Input Image");
    }

    #[test]
    fn empty_table_reports_every_planner_subtask_as_gap() {
        let mdt = ModelDescriptionTable::from_json("[]").unwrap();
        assert!(mdt.is_empty());
        assert_eq!(mdt.coverage_gaps().len(), 24);
    }

    #[test]
    fn unknown_subtask_rejected() {
        let rows = [row("X", &["Object Teleportation"], &["Input Image"], &["Edited Image"])];
        assert!(matches!(
            ModelDescriptionTable::from_rows(&rows),
            Err(RegistryError::UnknownSubtask(s)) if s == "Object Teleportation"
        ));
    }

    #[test]
    fn duplicate_pair_rejected_but_same_tool_other_subtask_allowed() {
        let ok = [
            row(
                "DALL-E",
                &["Object Replacement"],
                &["Segmentation Masks"],
                &["Edited Image"],
            ),
            row(
                "DALL-E",
                &["Text Removal"],
                &["Text Region Bounding Box"],
                &["Image with Removed Text"],
            ),
        ];
        let mdt = ModelDescriptionTable::from_rows(&ok).unwrap();
        assert_eq!(mdt.records().len(), 2);
        assert_eq!(mdt.tools().len(), 1);
        assert_eq!(mdt.tool_inputs(&tool("DALL-E")).len(), 2);

        let dup = [
            row(
                "SAM",
                &["Object Segmentation"],
                &["Bounding Boxes"],
                &["Segmentation Masks"],
            ),
            row(
                "SAM",
                &["Object Segmentation"],
                &["Bounding Boxes"],
                &["Segmentation Masks"],
            ),
        ];
        assert!(matches!(
            ModelDescriptionTable::from_rows(&dup),
            Err(RegistryError::DuplicateEntry { .. })
        ));
    }

    #[test]
    fn multi_subtask_rows_are_exploded() {
        let rows = [row(
            "Stable Diffusion Inpaint",
            &["Object Removal", "Object Replacement", "Object Recoloration"],
            &["Segmentation Mask"],
            &["Edited Image"],
        )];
        let mdt = ModelDescriptionTable::from_rows(&rows).unwrap();
        assert_eq!(mdt.records().len(), 3);
        assert!(mdt.records().iter().all(|r| r.inputs.len() == 1));
    }

    #[test]
    fn normalize_examples() {
        let s = SubtaskKind::ObjectRemoval;
        let mk = |pairs: &[(&str, f64)]| -> BTreeMap<PairKey, f64> {
            pairs.iter().map(|(t, q)| ((tool(t), s), *q)).collect()
        };
        let out = normalize_quality(&mk(&[("A", 0.5), ("B", 1.0)])).unwrap();
        assert_eq!(out[&(tool("A"), s)], 0.5);
        assert_eq!(out[&(tool("B"), s)], 1.0);

        let out = normalize_quality(&mk(&[("A", 40.0), ("B", 50.0)])).unwrap();
        assert!((out[&(tool("A"), s)] - 0.8).abs() < 1e-15);
        assert_eq!(out[&(tool("B"), s)], 1.0);

        let out = normalize_quality(&mk(&[("A", 7.0)])).unwrap();
        assert_eq!(out[&(tool("A"), s)], 1.0);

        assert!(matches!(
            normalize_quality(&mk(&[("A", 0.0)])),
            Err(RegistryError::NonPositiveQuality { .. })
        ));
    }

    #[test]
    fn benchmark_requires_every_mdt_pair() {
        let mdt = ModelDescriptionTable::from_rows(&[row(
            "SAM",
            &["Object Segmentation"],
            &["Bounding Boxes"],
            &["Segmentation Masks"],
        )])
        .unwrap();
        let err = BenchmarkTable::from_json("[]", Some(&mdt)).unwrap_err();
        assert!(matches!(err, RegistryError::MissingBenchmark { .. }));
    }

    #[test]
    fn negative_time_rejected() {
        let rows = [BenchmarkRow {
            tool: "SAM".into(),
            subtask: "Object Segmentation".into(),
            time_seconds: -1.0,
            quality: 1.0,
        }];
        assert!(matches!(
            BenchmarkTable::from_rows(&rows, None),
            Err(RegistryError::NegativeTime { .. })
        ));
    }

    #[test]
    fn extra_rows_normalize_then_drop() {
        let mdt = ModelDescriptionTable::from_rows(&[row(
            "Stable Diffusion Inpaint",
            &["Object Removal"],
            &["Segmentation Masks"],
            &["Edited Image"],
        )])
        .unwrap();
        let rows = [
            BenchmarkRow {
                tool: "Stable Diffusion Inpaint".into(),
                subtask: "Object Removal".into(),
                time_seconds: 12.1,
                quality: 0.93,
            },
            BenchmarkRow {
                tool: "Stable Diffusion Erase".into(),
                subtask: "Object Removal".into(),
                time_seconds: 13.8,
                quality: 1.0,
            },
        ];
        let bt = BenchmarkTable::from_rows(&rows, Some(&mdt)).unwrap();
        assert_eq!(bt.len(), 1);
        let e = bt
            .get(&tool("Stable Diffusion Inpaint"), SubtaskKind::ObjectRemoval)
            .unwrap();
        assert_eq!(e.quality_norm, 0.93);
    }
}
