//! Exact max-flow / min-cut on directed networks with real capacities.
//!
//! Dinic's algorithm (level graph + blocking flow) with an epsilon floor on
//! residuals so floating-point crumbs never reopen saturated arcs. For a
//! fixed arc insertion order the result is deterministic.

use crate::{Error, Result};

/// Residuals at or below this are treated as saturated.
const RESIDUAL_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    capacity: f64,
    residual: f64,
}

/// A directed flow network. Every `add_arc` also inserts the zero-capacity
/// reverse arc needed for residual bookkeeping.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    arcs: Vec<Arc>,
    adjacency: Vec<Vec<usize>>,
}

/// Result of a max-flow computation.
#[derive(Debug, Clone)]
pub struct MaxFlowOutcome {
    /// Total flow value, equal to the minimum cut capacity.
    pub value: f64,
    /// `true` for nodes reachable from the source in the final residual
    /// graph. Nodes isolated from both terminals stay on the sink side.
    pub source_side: Vec<bool>,
}

impl FlowNetwork {
    pub fn new(node_count: usize) -> Self {
        Self {
            arcs: Vec::new(),
            adjacency: vec![Vec::new(); node_count],
        }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn add_arc(&mut self, from: usize, to: usize, capacity: f64) -> Result<()> {
        if from >= self.node_count() || to >= self.node_count() {
            return Err(Error::invalid("arc endpoint out of range"));
        }
        if !capacity.is_finite() || capacity < 0.0 {
            return Err(Error::invalid(format!(
                "arc capacity {capacity} must be finite and non-negative"
            )));
        }
        let fwd = self.arcs.len();
        self.arcs.push(Arc {
            to,
            capacity,
            residual: capacity,
        });
        self.arcs.push(Arc {
            to: from,
            capacity: 0.0,
            residual: 0.0,
        });
        self.adjacency[from].push(fwd);
        self.adjacency[to].push(fwd ^ 1);
        Ok(())
    }

    /// Flow currently on the k-th inserted arc (for conservation checks).
    pub fn arc_flow(&self, index: usize) -> (usize, usize, f64) {
        let fwd = &self.arcs[index * 2];
        let from = self.arcs[index * 2 + 1].to;
        (from, fwd.to, fwd.capacity - fwd.residual)
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len() / 2
    }

    fn bfs_levels(&self, source: usize, sink: usize, levels: &mut [u32]) -> bool {
        levels.fill(u32::MAX);
        levels[source] = 0;
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(source);
        while let Some(node) = queue.pop_front() {
            for &arc_idx in &self.adjacency[node] {
                let arc = &self.arcs[arc_idx];
                if arc.residual > RESIDUAL_EPS && levels[arc.to] == u32::MAX {
                    levels[arc.to] = levels[node] + 1;
                    queue.push_back(arc.to);
                }
            }
        }
        levels[sink] != u32::MAX
    }

    fn push_blocking(
        &mut self,
        node: usize,
        sink: usize,
        limit: f64,
        levels: &[u32],
        next: &mut [usize],
    ) -> f64 {
        if node == sink {
            return limit;
        }
        while next[node] < self.adjacency[node].len() {
            let arc_idx = self.adjacency[node][next[node]];
            let (to, residual) = {
                let arc = &self.arcs[arc_idx];
                (arc.to, arc.residual)
            };
            if residual > RESIDUAL_EPS && levels[to] == levels[node] + 1 {
                let pushed =
                    self.push_blocking(to, sink, limit.min(residual), levels, next);
                if pushed > 0.0 {
                    self.arcs[arc_idx].residual -= pushed;
                    self.arcs[arc_idx ^ 1].residual += pushed;
                    return pushed;
                }
            }
            next[node] += 1;
        }
        0.0
    }

    /// Runs max-flow from `source` to `sink`, consuming residual capacity.
    pub fn max_flow(&mut self, source: usize, sink: usize) -> Result<MaxFlowOutcome> {
        if source == sink || source >= self.node_count() || sink >= self.node_count() {
            return Err(Error::invalid("max-flow terminals invalid"));
        }
        let n = self.node_count();
        let mut value = 0.0;
        let mut levels = vec![u32::MAX; n];
        let mut next = vec![0usize; n];
        while self.bfs_levels(source, sink, &mut levels) {
            next.fill(0);
            loop {
                let pushed = self.push_blocking(source, sink, f64::INFINITY, &levels, &mut next);
                if pushed <= 0.0 {
                    break;
                }
                value += pushed;
            }
        }
        // Source component of the residual graph.
        let mut source_side = vec![false; n];
        source_side[source] = true;
        let mut stack = vec![source];
        while let Some(node) = stack.pop() {
            for &arc_idx in &self.adjacency[node] {
                let arc = &self.arcs[arc_idx];
                if arc.residual > RESIDUAL_EPS && !source_side[arc.to] {
                    source_side[arc.to] = true;
                    stack.push(arc.to);
                }
            }
        }
        Ok(MaxFlowOutcome { value, source_side })
    }
}

/// Superpixels whose node sits on the source side are labeled foreground.
pub fn cut_to_labels(source_side: &[bool], node_of_superpixel: &[usize]) -> Vec<bool> {
    node_of_superpixel
        .iter()
        .map(|node| source_side[*node])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_arc() {
        let mut net = FlowNetwork::new(2);
        net.add_arc(0, 1, 3.0).unwrap();
        let out = net.max_flow(0, 1).unwrap();
        assert_eq!(out.value, 3.0);
        assert_eq!(out.source_side, vec![true, false]);
    }

    #[test]
    fn diamond_graph() {
        // s=0, a=1, b=2, t=3
        let mut net = FlowNetwork::new(4);
        net.add_arc(0, 1, 3.0).unwrap();
        net.add_arc(0, 2, 2.0).unwrap();
        net.add_arc(1, 3, 2.0).unwrap();
        net.add_arc(2, 3, 3.0).unwrap();
        net.add_arc(1, 2, 1.0).unwrap();
        let out = net.max_flow(0, 3).unwrap();
        assert!((out.value - 4.0).abs() < 1e-12);
    }

    #[test]
    fn unreachable_sink() {
        let mut net = FlowNetwork::new(4);
        net.add_arc(0, 1, 5.0).unwrap();
        // node 2, 3 disconnected from 0 and 1
        net.add_arc(2, 3, 1.0).unwrap();
        let out = net.max_flow(0, 3).unwrap();
        assert_eq!(out.value, 0.0);
        assert_eq!(out.source_side, vec![true, true, false, false]);
    }

    #[test]
    fn rejects_negative_capacity() {
        let mut net = FlowNetwork::new(2);
        assert!(net.add_arc(0, 1, -1.0).is_err());
        assert!(net.add_arc(0, 1, f64::NAN).is_err());
    }

    #[test]
    fn cut_labels_follow_source_side() {
        assert_eq!(
            cut_to_labels(&[true, false, true], &[0, 1, 2]),
            vec![true, false, true]
        );
        assert_eq!(cut_to_labels(&[true, true], &[0, 0, 1]), vec![true; 3]);
        assert_eq!(cut_to_labels(&[true, false], &[1, 1]), vec![false; 2]);
    }

    /// Exhaustive minimum s-t cut of a small arc list.
    fn brute_force_min_cut(n: usize, arcs: &[(usize, usize, f64)], s: usize, t: usize) -> f64 {
        let interior: Vec<usize> = (0..n).filter(|v| *v != s && *v != t).collect();
        let mut best = f64::INFINITY;
        for mask in 0..(1usize << interior.len()) {
            let mut in_source = vec![false; n];
            in_source[s] = true;
            for (bit, v) in interior.iter().enumerate() {
                in_source[*v] = mask & (1 << bit) != 0;
            }
            let cut: f64 = arcs
                .iter()
                .filter(|(from, to, _)| in_source[*from] && !in_source[*to])
                .map(|(_, _, c)| c)
                .sum();
            best = best.min(cut);
        }
        best
    }

    #[test]
    fn matches_exhaustive_cut_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for case in 0..200 {
            let n = rng.random_range(4..=12);
            let arc_count = rng.random_range(n..4 * n);
            let arcs: Vec<(usize, usize, f64)> = (0..arc_count)
                .filter_map(|_| {
                    let from = rng.random_range(0..n);
                    let to = rng.random_range(0..n);
                    (from != to).then_some((from, to, rng.random_range(0.0..5.0)))
                })
                .collect();
            let mut net = FlowNetwork::new(n);
            for (from, to, c) in &arcs {
                net.add_arc(*from, *to, *c).unwrap();
            }
            let out = net.max_flow(0, n - 1).unwrap();
            let brute = brute_force_min_cut(n, &arcs, 0, n - 1);
            assert!(
                (out.value - brute).abs() <= 1e-9,
                "case {case}: flow {} vs brute cut {brute}",
                out.value
            );

            // Flow conservation at every non-terminal node.
            let mut balance = vec![0.0f64; n];
            for k in 0..net.arc_count() {
                let (from, to, flow) = net.arc_flow(k);
                balance[from] -= flow;
                balance[to] += flow;
            }
            for v in 1..n - 1 {
                assert!(balance[v].abs() <= 1e-9, "node {v} imbalance {}", balance[v]);
            }

            // The induced cut's capacity matches the flow value.
            let cut: f64 = arcs
                .iter()
                .filter(|(from, to, _)| out.source_side[*from] && !out.source_side[*to])
                .map(|(_, _, c)| c)
                .sum();
            assert!(
                (cut - out.value).abs() <= 1e-9,
                "case {case}: induced cut {cut} vs flow {}",
                out.value
            );
        }
    }
}
