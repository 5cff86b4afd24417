//! Small DAG helpers shared by subtask trees and tool subgraphs.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Read-only adjacency view over dense node ids.
pub trait DagView {
    fn node_count(&self) -> usize;
    fn successors(&self, node: usize) -> &[usize];
}

impl DagView for [Vec<usize>] {
    fn node_count(&self) -> usize {
        self.len()
    }

    fn successors(&self, node: usize) -> &[usize] {
        &self[node]
    }
}

impl DagView for Vec<Vec<usize>> {
    fn node_count(&self) -> usize {
        self.len()
    }

    fn successors(&self, node: usize) -> &[usize] {
        &self[node]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cycle detected through nodes {cycle:?}")]
pub struct CycleDetected {
    /// Node ids along one cycle, first node repeated at the end.
    pub cycle: Vec<usize>,
}

/// Kahn's algorithm, always releasing the smallest ready id first.
pub fn topological_order<G: DagView + ?Sized>(g: &G) -> Result<Vec<usize>, CycleDetected> {
    let n = g.node_count();
    let mut indegree = vec![0usize; n];
    for v in 0..n {
        for &w in g.successors(v) {
            indegree[w] += 1;
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&v| indegree[v] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(v)) = ready.pop() {
        order.push(v);
        for &w in g.successors(v) {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                ready.push(Reverse(w));
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err(CycleDetected {
            cycle: find_cycle(g, &indegree),
        })
    }
}

pub fn validate_dag<G: DagView + ?Sized>(g: &G) -> Result<(), CycleDetected> {
    topological_order(g).map(|_| ())
}

// Nodes Kahn could not release are on a cycle or reachable from one, so a DFS
// started from them meets a back edge.
fn find_cycle<G: DagView + ?Sized>(g: &G, residual: &[usize]) -> Vec<usize> {
    const WHITE: u8 = 0;
    const GREY: u8 = 1;
    const BLACK: u8 = 2;
    let n = g.node_count();
    let mut color = vec![WHITE; n];
    for start in (0..n).filter(|&v| residual[v] > 0) {
        if color[start] != WHITE {
            continue;
        }
        // (node, next successor index)
        let mut stack = vec![(start, 0usize)];
        color[start] = GREY;
        while let Some(&mut (v, ref mut i)) = stack.last_mut() {
            let succ = g.successors(v);
            if *i < succ.len() {
                let w = succ[*i];
                *i += 1;
                match color[w] {
                    WHITE => {
                        color[w] = GREY;
                        stack.push((w, 0));
                    }
                    GREY => {
                        let pos = stack.iter().position(|&(u, _)| u == w).unwrap();
                        let mut cycle: Vec<usize> = stack[pos..].iter().map(|&(u, _)| u).collect();
                        cycle.push(w);
                        return cycle;
                    }
                    _ => {}
                }
            } else {
                color[v] = BLACK;
                stack.pop();
            }
        }
    }
    Vec::new()
}

/// Number of maximal paths from `start` (paths ending at a node without
/// successors). Saturates instead of overflowing.
pub fn count_maximal_paths<G: DagView + ?Sized>(g: &G, start: usize) -> Result<u128, CycleDetected> {
    let order = topological_order(g)?;
    let mut count = vec![0u128; g.node_count()];
    for &v in order.iter().rev() {
        let succ = g.successors(v);
        count[v] = if succ.is_empty() {
            1
        } else {
            succ.iter().fold(0u128, |acc, &w| acc.saturating_add(count[w]))
        };
    }
    Ok(count[start])
}

/// All maximal paths from `start`, visiting successors in the order stored.
/// Returns `Err(count)` when there are more than `cap` of them.
pub fn maximal_paths<G: DagView + ?Sized>(g: &G, start: usize, cap: usize) -> Result<Vec<Vec<usize>>, u128> {
    let total = count_maximal_paths(g, start).unwrap_or(u128::MAX);
    if total > cap as u128 {
        return Err(total);
    }
    let mut out = Vec::with_capacity(total as usize);
    let mut path = vec![start];
    let mut cursor = vec![0usize];
    while let Some(&v) = path.last() {
        let succ = g.successors(v);
        if succ.is_empty() {
            out.push(path.clone());
        }
        let i = cursor.last_mut().unwrap();
        if *i < succ.len() {
            let w = succ[*i];
            *i += 1;
            path.push(w);
            cursor.push(0);
        } else {
            path.pop();
            cursor.pop();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_graph_is_a_dag() {
        let g: Vec<Vec<usize>> = Vec::new();
        assert_eq!(topological_order(&g), Ok(vec![]));
    }

    #[test]
    fn back_edge_reports_cycle() {
        let g = vec![vec![1], vec![2], vec![3, 1], vec![]];
        let err = validate_dag(&g).unwrap_err();
        assert_eq!(err.cycle, vec![1, 2, 1]);
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let g = vec![vec![0]];
        assert_eq!(validate_dag(&g).unwrap_err().cycle, vec![0, 0]);
    }

    #[test]
    fn diamond_has_two_paths() {
        let g = vec![vec![1, 2], vec![3], vec![3], vec![]];
        assert_eq!(count_maximal_paths(&g, 0), Ok(2));
        assert_eq!(maximal_paths(&g, 0, 10).unwrap(), vec![vec![0, 1, 3], vec![0, 2, 3]]);
        assert_eq!(maximal_paths(&g, 0, 1), Err(2));
    }

    #[test]
    fn chain_of_four_has_one_path() {
        let g = vec![vec![1], vec![2], vec![3], vec![]];
        assert_eq!(maximal_paths(&g, 0, 10).unwrap(), vec![vec![0, 1, 2, 3]]);
    }
}
