//! Brute-force oracle, accuracy aggregation and Pareto utilities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::registry::BenchmarkTable;
use crate::search::{
    astar_search, compute_g, node_values, precompute_heuristics, Alpha, SearchConfig, SearchError, SearchStatus,
};
use crate::sim::{SimExecutor, SimulatorSpec};
use crate::toolgraph::{enumerate_paths, GraphError, ToolSubgraph};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("no path clears the quality threshold")]
    NoFeasiblePath,
    #[error("search exhausted at alpha {0}")]
    Exhausted(f64),
    #[error("accuracy record is empty")]
    EmptyRecord,
    #[error("score {0} is not an allowed rating")]
    InvalidScore(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub alpha: f64,
    pub best_path: Vec<usize>,
    pub best_objective: f64,
    pub astar_path: Vec<usize>,
    pub astar_objective: f64,
    pub gap: f64,
    pub paths_enumerated: usize,
}

/// Objective of a whole path from benchmark values.
pub fn path_objective(values: &[(f64, f64)], path: &[usize], alpha: Alpha) -> f64 {
    let (time, quality) = path_totals(values, path);
    compute_g(time, quality, alpha)
}

pub fn path_totals(values: &[(f64, f64)], path: &[usize]) -> (f64, f64) {
    path.iter()
        .fold((0.0, 1.0), |(t, q), &v| (t + values[v].0, q * values[v].1))
}

/// Enumerates every ROOT-to-leaf path, keeps those whose nodes all clear
/// `quality_threshold`, and compares the best objective with what a
/// deterministic A* run returns.
pub fn brute_force_optimal(
    g: &ToolSubgraph,
    bt: &BenchmarkTable,
    alpha: Alpha,
    quality_threshold: f64,
    cap: usize,
) -> Result<OracleReport, EvalError> {
    let values = node_values(g, bt)?;
    let paths = enumerate_paths(g, cap)?;
    let best = paths
        .iter()
        .filter(|p| p.iter().all(|&v| values[v].1 >= quality_threshold))
        .map(|p| (path_objective(&values, p, alpha), p))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or(EvalError::NoFeasiblePath)?;

    let h = precompute_heuristics(g, bt, alpha)?;
    let exec = SimExecutor::deterministic(bt);
    let cfg = SearchConfig {
        quality_threshold,
        ..SearchConfig::new(alpha)
    };
    let result = astar_search(g, &h, &exec, &cfg)?;
    if result.status != SearchStatus::Found {
        return Err(EvalError::Exhausted(alpha.value()));
    }
    let astar_path = result.path.node_ids();
    let astar_objective = path_objective(&values, &astar_path, alpha);
    Ok(OracleReport {
        alpha: alpha.value(),
        best_path: best.1.clone(),
        best_objective: best.0,
        astar_path,
        astar_objective,
        gap: astar_objective - best.0,
        paths_enumerated: paths.len(),
    })
}

/// The rating scale used for per-subtask correctness.
pub const SCORE_VOCABULARY: [f64; 8] = [0.0, 0.1, 0.3, 0.5, 0.7, 0.8, 0.9, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRecord {
    subtask_scores: Vec<f64>,
}

impl AccuracyRecord {
    pub fn new(subtask_scores: Vec<f64>) -> Result<Self, EvalError> {
        if let Some(&bad) = subtask_scores.iter().find(|s| !SCORE_VOCABULARY.contains(s)) {
            return Err(EvalError::InvalidScore(bad));
        }
        Ok(AccuracyRecord { subtask_scores })
    }

    pub fn scores(&self) -> &[f64] {
        &self.subtask_scores
    }
}

fn mean(xs: &[f64]) -> Result<f64, EvalError> {
    if xs.is_empty() {
        return Err(EvalError::EmptyRecord);
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn task_accuracy(record: &AccuracyRecord) -> Result<f64, EvalError> {
    mean(&record.subtask_scores)
}

pub fn overall_accuracy(task_scores: &[f64]) -> Result<f64, EvalError> {
    mean(task_scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub alpha: f64,
    pub total_time: f64,
    pub quality_product: f64,
    pub g_final: f64,
}

impl ParetoPoint {
    pub fn dominates(&self, other: &ParetoPoint) -> bool {
        self.total_time <= other.total_time
            && self.quality_product >= other.quality_product
            && (self.total_time < other.total_time || self.quality_product > other.quality_product)
    }
}

/// `true` for points no other point dominates.
pub fn pareto_mask(points: &[ParetoPoint]) -> Vec<bool> {
    points.iter().map(|p| !points.iter().any(|o| o.dominates(p))).collect()
}

pub fn pareto_filter(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    points
        .iter()
        .zip(pareto_mask(points))
        .filter_map(|(p, keep)| keep.then_some(*p))
        .collect()
}

/// One search per alpha, run in parallel; output follows `alphas`.
pub fn sweep_alpha(
    g: &ToolSubgraph,
    bt: &BenchmarkTable,
    spec: &SimulatorSpec,
    base: &SearchConfig,
    alphas: &[Alpha],
) -> Result<Vec<ParetoPoint>, EvalError> {
    alphas
        .par_iter()
        .map(|&alpha| {
            let h = precompute_heuristics(g, bt, alpha)?;
            let exec = SimExecutor::new(spec.clone(), bt).map_err(SearchError::from)?;
            let cfg = SearchConfig { alpha, ..*base };
            let r = astar_search(g, &h, &exec, &cfg)?;
            if r.status != SearchStatus::Found {
                return Err(EvalError::Exhausted(alpha.value()));
            }
            Ok(ParetoPoint {
                alpha: alpha.value(),
                total_time: r.path.cum_time,
                quality_product: r.path.cum_quality,
                g_final: r.path.g,
            })
        })
        .collect()
}

/// Formats like C's `%.9g`.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp) as usize;
    trim_fraction(&format!("{x:.decimals$}")).to_string()
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub const PARETO_HEADER: &str = "alpha,total_time,quality_product,g_final";

/// Pareto CSV, optionally with a `non_dominated` column.
pub fn pareto_csv(points: &[ParetoPoint], flag_column: bool) -> String {
    let mut out = String::from(PARETO_HEADER);
    if flag_column {
        out.push_str(",non_dominated");
    }
    out.push('\n');
    let mask = pareto_mask(points);
    for (p, keep) in points.iter().zip(mask) {
        out.push_str(&format!(
            "{},{},{},{}",
            format_sig9(p.alpha),
            format_sig9(p.total_time),
            format_sig9(p.quality_product),
            format_sig9(p.g_final)
        ));
        if flag_column {
            out.push_str(if keep { ",true" } else { ",false" });
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(t: f64, q: f64) -> ParetoPoint {
        ParetoPoint {
            alpha: 1.0,
            total_time: t,
            quality_product: q,
            g_final: 0.0,
        }
    }

    #[test]
    fn accuracy_means() {
        let r = AccuracyRecord::new(vec![1.0, 0.9, 0.5]).unwrap();
        assert!((task_accuracy(&r).unwrap() - 0.8).abs() < 1e-12);
        assert!((overall_accuracy(&[0.8, 1.0]).unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(overall_accuracy(&[0.94]).unwrap(), 0.94);
        assert!(matches!(overall_accuracy(&[]), Err(EvalError::EmptyRecord)));
        assert!(matches!(
            AccuracyRecord::new(vec![0.4]),
            Err(EvalError::InvalidScore(_))
        ));
        let empty = AccuracyRecord::new(vec![]).unwrap();
        assert!(matches!(task_accuracy(&empty), Err(EvalError::EmptyRecord)));
    }

    #[test]
    fn pareto_examples() {
        let pts = [pt(1.0, 0.9), pt(2.0, 0.95), pt(1.5, 0.85)];
        assert_eq!(pareto_filter(&pts), vec![pts[0], pts[1]]);
        assert_eq!(pareto_filter(&pts[..1]), vec![pts[0]]);
        assert_eq!(pareto_filter(&[pts[0], pts[0]]).len(), 2);
    }

    #[test]
    fn sig9_matches_printf() {
        let cases = [
            (0.061596, "0.061596"),
            (0.00272484, "0.00272484"),
            (12.1522, "12.1522"),
            (1.0, "1"),
            (2.0 / 3.0, "0.666666667"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (0.00001234, "1.234e-05"),
            (9.9999999999, "10"),
            (-0.5, "-0.5"),
            (0.0001, "0.0001"),
        ];
        for (x, want) in cases {
            assert_eq!(format_sig9(x), want, "{x}");
        }
    }

    #[test]
    fn csv_has_header_and_flags() {
        let csv = pareto_csv(&[pt(1.0, 0.9), pt(1.5, 0.85)], true);
        assert_eq!(
            csv,
            "alpha,total_time,quality_product,g_final,non_dominated\n1,1,0.9,0,true\n1,1.5,0.85,0,false\n"
        );
    }
}
