//! Minimum-cost-flow transportation solve backing the size-constrained
//! cluster assignment step.
//!
//! Points supply one unit each; cluster `j` exposes `min_size` mandatory
//! slots that only points can fill and `max_size - min_size` optional slots
//! that a zero-cost dummy supply may also fill, so per-cluster lower and
//! upper bounds reduce to a plain balanced transportation problem with
//! non-negative arc costs. Successive shortest paths with potentials then
//! yields an exact integral optimum.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    rev: usize,
    cap: i64,
    cost: f64,
}

struct Mcmf {
    graph: Vec<Vec<Edge>>,
}

impl Mcmf {
    fn new(n: usize) -> Self {
        Mcmf {
            graph: vec![Vec::new(); n],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: f64) {
        let rev_from = self.graph[to].len();
        let rev_to = self.graph[from].len();
        self.graph[from].push(Edge {
            to,
            rev: rev_from,
            cap,
            cost,
        });
        self.graph[to].push(Edge {
            to: from,
            rev: rev_to,
            cap: 0,
            cost: -cost,
        });
    }

    /// Pushes exactly `want` units from `s` to `t`; returns the total cost,
    /// or `None` if the flow cannot be realized.
    fn run(&mut self, s: usize, t: usize, want: i64) -> Option<f64> {
        let n = self.graph.len();
        let mut potential = vec![0.0f64; n];
        let mut remaining = want;
        let mut total_cost = 0.0;
        while remaining > 0 {
            // Dijkstra on reduced costs; ties broken by node index for
            // deterministic augmenting paths.
            let mut dist = vec![f64::INFINITY; n];
            let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
            let mut done = vec![false; n];
            dist[s] = 0.0;
            let mut heap = BinaryHeap::new();
            heap.push(Reverse(HeapItem { dist: 0.0, node: s }));
            while let Some(Reverse(item)) = heap.pop() {
                let u = item.node;
                if done[u] {
                    continue;
                }
                done[u] = true;
                for (ei, e) in self.graph[u].iter().enumerate() {
                    if e.cap <= 0 || done[e.to] {
                        continue;
                    }
                    let nd = dist[u] + e.cost + potential[u] - potential[e.to];
                    if nd < dist[e.to] {
                        dist[e.to] = nd;
                        prev[e.to] = Some((u, ei));
                        heap.push(Reverse(HeapItem {
                            dist: nd,
                            node: e.to,
                        }));
                    }
                }
            }
            if dist[t].is_infinite() {
                return None;
            }
            for v in 0..n {
                if dist[v].is_finite() {
                    potential[v] += dist[v];
                }
            }
            // Bottleneck along the shortest path, then augment.
            let mut bottleneck = remaining;
            let mut v = t;
            while let Some((u, ei)) = prev[v] {
                bottleneck = bottleneck.min(self.graph[u][ei].cap);
                v = u;
            }
            let mut v = t;
            while let Some((u, ei)) = prev[v] {
                let rev = self.graph[u][ei].rev;
                self.graph[u][ei].cap -= bottleneck;
                total_cost += bottleneck as f64 * self.graph[u][ei].cost;
                self.graph[v][rev].cap += bottleneck;
                v = u;
            }
            remaining -= bottleneck;
        }
        Some(total_cost)
    }
}

#[derive(PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.node.cmp(&other.node))
    }
}

/// Optimal assignment of `m` points to `k` clusters with per-cluster size
/// bounds, minimizing the summed per-point costs (`costs` is row-major
/// `m x k`, all entries finite and non-negative up to a shared offset).
/// Returns `None` when `k * min_size <= m <= k * max_size` fails to hold or
/// the flow is otherwise infeasible.
pub(crate) fn min_cost_assignment(
    costs: &[f64],
    m: usize,
    k: usize,
    min_size: usize,
    max_size: usize,
) -> Option<Vec<usize>> {
    debug_assert_eq!(costs.len(), m * k);
    if min_size > max_size || k * min_size > m || m > k * max_size {
        return None;
    }
    // Node layout: source, m points, k mandatory slots, k optional slots,
    // dummy supply, sink.
    let source = 0;
    let point = |i: usize| 1 + i;
    let mandatory = |j: usize| 1 + m + j;
    let optional = |j: usize| 1 + m + k + j;
    let dummy = 1 + m + 2 * k;
    let sink = dummy + 1;
    let n_nodes = sink + 1;

    let total_mandatory = (k * min_size) as i64;
    let total_optional = (k * (max_size - min_size)) as i64;
    let dummy_supply = total_mandatory + total_optional - m as i64;

    let mut net = Mcmf::new(n_nodes);
    for i in 0..m {
        net.add_edge(source, point(i), 1, 0.0);
        for j in 0..k {
            let c = costs[i * k + j];
            if min_size > 0 {
                net.add_edge(point(i), mandatory(j), 1, c);
            }
            if max_size > min_size {
                net.add_edge(point(i), optional(j), 1, c);
            }
        }
    }
    if dummy_supply > 0 {
        net.add_edge(source, dummy, dummy_supply, 0.0);
    }
    for j in 0..k {
        if min_size > 0 {
            net.add_edge(mandatory(j), sink, min_size as i64, 0.0);
        }
        if max_size > min_size {
            net.add_edge(optional(j), sink, (max_size - min_size) as i64, 0.0);
            net.add_edge(dummy, optional(j), (max_size - min_size) as i64, 0.0);
        }
    }

    net.run(source, sink, total_mandatory + total_optional)?;

    let mut labels = vec![usize::MAX; m];
    for i in 0..m {
        for e in &net.graph[point(i)] {
            if e.cap == 0 && e.cost >= 0.0 && e.to != source {
                let j = if e.to >= optional(0) && e.to < dummy {
                    e.to - optional(0)
                } else {
                    e.to - mandatory(0)
                };
                labels[i] = j;
                break;
            }
        }
        if labels[i] == usize::MAX {
            return None;
        }
    }
    Some(labels)
}
