//! Minimum-cost maximum-flow on small dense networks, by successive
//! shortest augmenting paths (Bellman-Ford queue search). Costs are real
//! distances; capacities are integral, so flows stay integral. A small
//! epsilon guards relaxations against floating-point fuzz.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

const EPS: f64 = 1e-12;

pub(crate) struct MinCostFlow {
    n_nodes: usize,
    to: Vec<u32>,
    cap: Vec<i64>,
    cost: Vec<f64>,
    adj: Vec<Vec<u32>>,
}

impl MinCostFlow {
    pub fn new(n_nodes: usize) -> Self {
        MinCostFlow {
            n_nodes,
            to: Vec::new(),
            cap: Vec::new(),
            cost: Vec::new(),
            adj: vec![Vec::new(); n_nodes],
        }
    }

    /// Adds the arc and its residual twin; returns the forward arc index.
    pub fn add_arc(&mut self, from: usize, to: usize, cap: i64, cost: f64) -> usize {
        let idx = self.to.len();
        self.to.push(to as u32);
        self.cap.push(cap);
        self.cost.push(cost);
        self.adj[from].push(idx as u32);
        self.to.push(from as u32);
        self.cap.push(0);
        self.cost.push(-cost);
        self.adj[to].push((idx + 1) as u32);
        idx
    }

    /// Units pushed through forward arc `idx`.
    pub fn flow_on(&self, idx: usize) -> i64 {
        self.cap[idx ^ 1]
    }

    /// Augments along successive shortest paths until the sink is
    /// unreachable; returns (total flow, total cost).
    pub fn solve(&mut self, source: usize, sink: usize) -> (i64, f64) {
        let mut total_flow = 0;
        let mut total_cost = 0.0;
        loop {
            let mut dist = vec![f64::INFINITY; self.n_nodes];
            let mut parent_arc = vec![usize::MAX; self.n_nodes];
            let mut in_queue = vec![false; self.n_nodes];
            dist[source] = 0.0;
            let mut queue = VecDeque::new();
            queue.push_back(source);
            in_queue[source] = true;
            while let Some(u) = queue.pop_front() {
                in_queue[u] = false;
                let du = dist[u];
                for &arc in &self.adj[u] {
                    let arc = arc as usize;
                    if self.cap[arc] <= 0 {
                        continue;
                    }
                    let v = self.to[arc] as usize;
                    let nd = du + self.cost[arc];
                    if nd < dist[v] - EPS {
                        dist[v] = nd;
                        parent_arc[v] = arc;
                        if !in_queue[v] {
                            queue.push_back(v);
                            in_queue[v] = true;
                        }
                    }
                }
            }
            if !dist[sink].is_finite() {
                return (total_flow, total_cost);
            }
            // Bottleneck along the path.
            let mut bottleneck = i64::MAX;
            let mut v = sink;
            while v != source {
                let arc = parent_arc[v];
                bottleneck = bottleneck.min(self.cap[arc]);
                v = self.to[arc ^ 1] as usize;
            }
            let mut v = sink;
            while v != source {
                let arc = parent_arc[v];
                self.cap[arc] -= bottleneck;
                self.cap[arc ^ 1] += bottleneck;
                total_cost += self.cost[arc] * bottleneck as f64;
                v = self.to[arc ^ 1] as usize;
            }
            total_flow += bottleneck;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn routes_cheapest_assignment() {
        // Two sources of work, two sinks; classic 2x2 assignment.
        // Costs: a->x 1, a->y 10, b->x 10, b->y 1. Optimal total = 2.
        let mut net = MinCostFlow::new(6);
        let s = 0;
        let t = 5;
        net.add_arc(s, 1, 1, 0.0);
        net.add_arc(s, 2, 1, 0.0);
        let ax = net.add_arc(1, 3, 1, 1.0);
        net.add_arc(1, 4, 1, 10.0);
        net.add_arc(2, 3, 1, 10.0);
        let by = net.add_arc(2, 4, 1, 1.0);
        net.add_arc(3, t, 1, 0.0);
        net.add_arc(4, t, 1, 0.0);
        let (flow, cost) = net.solve(s, t);
        assert_eq!(flow, 2);
        assert!((cost - 2.0).abs() < 1e-9);
        assert_eq!(net.flow_on(ax), 1);
        assert_eq!(net.flow_on(by), 1);
    }

    #[test]
    fn respects_capacity() {
        let mut net = MinCostFlow::new(3);
        net.add_arc(0, 1, 3, 1.0);
        net.add_arc(1, 2, 2, 1.0);
        let (flow, cost) = net.solve(0, 2);
        assert_eq!(flow, 2);
        assert!((cost - 4.0).abs() < 1e-9);
    }

    #[test]
    fn prefers_cheap_detour_over_direct() {
        let mut net = MinCostFlow::new(4);
        net.add_arc(0, 3, 1, 10.0);
        net.add_arc(0, 1, 1, 1.0);
        net.add_arc(1, 2, 1, 1.0);
        net.add_arc(2, 3, 1, 1.0);
        let (flow, cost) = net.solve(0, 3);
        assert_eq!(flow, 2);
        assert!((cost - 13.0).abs() < 1e-9);
    }
}
