//! Simulated tool execution.
//!
//! No real models run here. An executor turns a plan node and an attempt
//! number into an observed `(time, quality)` pair, either by replaying the
//! benchmark, by perturbing it with seeded noise, or from a script.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::registry::{BenchmarkTable, ToolId};
use crate::toolgraph::PlanNode;
use crate::vocab::SubtaskKind;

pub const DEFAULT_TIME_SIGMA: f64 = 0.1;
pub const DEFAULT_QUALITY_SIGMA: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum ExecError {
    #[error("no benchmark entry for {tool} / {subtask}")]
    MissingBenchmark { tool: ToolId, subtask: SubtaskKind },
    #[error("script has no entry for {tool} / {subtask} attempt {attempt}")]
    ScriptGap {
        tool: ToolId,
        subtask: SubtaskKind,
        attempt: u32,
    },
    #[error("invalid simulator spec: {0}")]
    InvalidSpec(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub time_seconds: f64,
    pub quality: f64,
    pub attempt: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    #[default]
    Deterministic,
    Stochastic,
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub tool: String,
    pub subtask: SubtaskKind,
    pub attempt: u32,
    pub time: f64,
    pub quality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatorSpec {
    pub mode: SimMode,
    #[serde(default = "default_time_sigma")]
    pub time_noise_sigma: f64,
    #[serde(default = "default_quality_sigma")]
    pub quality_noise_sigma: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub script: Vec<ScriptEntry>,
}

fn default_time_sigma() -> f64 {
    DEFAULT_TIME_SIGMA
}

fn default_quality_sigma() -> f64 {
    DEFAULT_QUALITY_SIGMA
}

impl Default for SimulatorSpec {
    fn default() -> Self {
        Self::deterministic()
    }
}

impl SimulatorSpec {
    pub fn deterministic() -> Self {
        SimulatorSpec {
            mode: SimMode::Deterministic,
            time_noise_sigma: DEFAULT_TIME_SIGMA,
            quality_noise_sigma: DEFAULT_QUALITY_SIGMA,
            script: Vec::new(),
        }
    }

    pub fn stochastic(time_noise_sigma: f64, quality_noise_sigma: f64) -> Self {
        SimulatorSpec {
            mode: SimMode::Stochastic,
            time_noise_sigma,
            quality_noise_sigma,
            script: Vec::new(),
        }
    }

    pub fn scripted(script: Vec<ScriptEntry>) -> Self {
        SimulatorSpec {
            mode: SimMode::Scripted,
            script,
            ..Self::deterministic()
        }
    }

    pub fn validate(&self) -> Result<(), ExecError> {
        if !(self.time_noise_sigma >= 0.0 && self.quality_noise_sigma >= 0.0) {
            return Err(ExecError::InvalidSpec("noise sigmas must be non-negative".into()));
        }
        for e in &self.script {
            if e.attempt == 0 {
                return Err(ExecError::InvalidSpec("script attempts start at 1".into()));
            }
            if e.time.is_nan() || e.time < 0.0 || !(0.0..=1.0).contains(&e.quality) {
                return Err(ExecError::InvalidSpec(format!(
                    "script entry for {} attempt {} out of range",
                    e.tool, e.attempt
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ExecError> {
        let spec: SimulatorSpec = serde_json::from_str(text).map_err(|e| ExecError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExecError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ExecError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Produces the observed cost and quality of running one node.
pub trait Executor {
    fn execute(&self, node: &PlanNode, attempt: u32, seed: u64) -> Result<ExecutionOutcome, ExecError>;
}

/// Benchmark-backed simulator.
#[derive(Debug, Clone)]
pub struct SimExecutor<'a> {
    spec: SimulatorSpec,
    benchmark: &'a BenchmarkTable,
    script: BTreeMap<(ToolId, SubtaskKind, u32), (f64, f64)>,
}

impl<'a> SimExecutor<'a> {
    pub fn new(spec: SimulatorSpec, benchmark: &'a BenchmarkTable) -> Result<Self, ExecError> {
        spec.validate()?;
        let mut script = BTreeMap::new();
        for e in &spec.script {
            let tool = ToolId::new(e.tool.as_str()).map_err(|err| ExecError::InvalidSpec(err.to_string()))?;
            script.insert((tool, e.subtask, e.attempt), (e.time, e.quality));
        }
        Ok(SimExecutor {
            spec,
            benchmark,
            script,
        })
    }

    pub fn deterministic(benchmark: &'a BenchmarkTable) -> Self {
        Self::new(SimulatorSpec::deterministic(), benchmark).expect("default spec is valid")
    }

    pub fn spec(&self) -> &SimulatorSpec {
        &self.spec
    }
}

impl Executor for SimExecutor<'_> {
    fn execute(&self, node: &PlanNode, attempt: u32, seed: u64) -> Result<ExecutionOutcome, ExecError> {
        let Some(step) = node.step() else {
            return Ok(ExecutionOutcome {
                time_seconds: 0.0,
                quality: 1.0,
                attempt,
            });
        };
        if self.spec.mode == SimMode::Scripted {
            let key = (step.tool.clone(), step.subtask, attempt);
            let &(time_seconds, quality) = self.script.get(&key).ok_or_else(|| ExecError::ScriptGap {
                tool: step.tool.clone(),
                subtask: step.subtask,
                attempt,
            })?;
            return Ok(ExecutionOutcome {
                time_seconds,
                quality,
                attempt,
            });
        }
        let entry = self
            .benchmark
            .get(&step.tool, step.subtask)
            .ok_or_else(|| ExecError::MissingBenchmark {
                tool: step.tool.clone(),
                subtask: step.subtask,
            })?;
        let (c, q) = (entry.time_seconds, entry.quality_norm);
        match self.spec.mode {
            SimMode::Deterministic => Ok(ExecutionOutcome {
                time_seconds: c,
                quality: q,
                attempt,
            }),
            _ => {
                let mut rng = keyed_rng(seed, node.id as u64, attempt);
                let z1: f64 = StandardNormal.sample(&mut rng);
                let z2: f64 = StandardNormal.sample(&mut rng);
                Ok(ExecutionOutcome {
                    time_seconds: c * (self.spec.time_noise_sigma * z1).exp(),
                    quality: (q + self.spec.quality_noise_sigma * z2).clamp(0.0, 1.0),
                    attempt,
                })
            }
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// A fresh stream per `(seed, node, attempt)`, independent of call order.
pub fn keyed_rng(seed: u64, node: u64, attempt: u32) -> ChaCha8Rng {
    let k = splitmix64(splitmix64(splitmix64(seed) ^ node) ^ u64::from(attempt));
    ChaCha8Rng::seed_from_u64(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

pub fn validate_quality(outcome: &ExecutionOutcome, threshold: f64) -> Verdict {
    if outcome.quality >= threshold {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// What the search did with an invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accepted,
    Retry,
    Dropped,
}

/// Bookkeeping attached to the final invocation of a retried node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryAccounting {
    pub extra_time: f64,
    pub g_new: f64,
    pub g_new2: f64,
    /// `g_new + g_new2`.
    pub g_final_sum: f64,
    /// Path objective after absorbing the retries.
    pub g_path: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub node: usize,
    pub tool: String,
    pub subtask: Option<SubtaskKind>,
    pub attempt: u32,
    pub time_seconds: f64,
    pub quality: f64,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retry: Option<RetryAccounting>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceTotals {
    pub time_seconds: f64,
    pub invocations: usize,
    pub failed_invocations: usize,
    /// Nodes invoked with an attempt number above 1.
    pub retried_nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub events: Vec<TraceEvent>,
    pub totals: TraceTotals,
}

impl ExecutionTrace {
    pub fn attempts_for(&self, node: usize) -> usize {
        self.events.iter().filter(|e| e.node == node).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}

pub fn record_trace(events: impl IntoIterator<Item = TraceEvent>) -> ExecutionTrace {
    let events: Vec<TraceEvent> = events.into_iter().collect();
    let mut totals = TraceTotals::default();
    for e in &events {
        totals.time_seconds += e.time_seconds;
        totals.invocations += 1;
        if e.decision != Decision::Accepted {
            totals.failed_invocations += 1;
        }
        if e.attempt > 1 && !totals.retried_nodes.contains(&e.node) {
            totals.retried_nodes.push(e.node);
        }
    }
    totals.retried_nodes.sort_unstable();
    ExecutionTrace { events, totals }
}
