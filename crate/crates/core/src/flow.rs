//! Integral minimum-cost maximum flow and the uncapacitated fixed-degree
//! subgraph problem built on it.
//!
//! The solver is successive shortest paths: Dijkstra over reduced costs with
//! Johnson potentials, augmenting by the bottleneck each round. All arc costs
//! are nonnegative, so the initial potentials are zero.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::instance::{CostMatrix, Weight};
use crate::multiplicity::Multiplicity;

/// Arc capacity; `None` means unbounded.
pub type Capacity = Option<u64>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowArc {
    pub from: usize,
    pub to: usize,
    pub cap: Capacity,
    pub cost: u64,
}

/// Directed network with a distinguished source and sink.
#[derive(Clone, Debug)]
pub struct FlowNetwork {
    nodes: usize,
    source: usize,
    sink: usize,
    arcs: Vec<FlowArc>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowResult {
    pub value: u64,
    pub cost: Weight,
    /// Flow on each arc, indexed like [`FlowNetwork::arcs`].
    pub flow: Vec<u64>,
}

impl FlowNetwork {
    pub fn new(nodes: usize, source: usize, sink: usize) -> Self {
        assert!(source < nodes && sink < nodes && source != sink);
        FlowNetwork {
            nodes,
            source,
            sink,
            arcs: Vec::new(),
        }
    }

    /// Adds an arc and returns its index.
    pub fn add_arc(&mut self, from: usize, to: usize, cap: Capacity, cost: u64) -> usize {
        assert!(from < self.nodes && to < self.nodes);
        self.arcs.push(FlowArc { from, to, cap, cost });
        self.arcs.len() - 1
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn arcs(&self) -> &[FlowArc] {
        &self.arcs
    }

    /// Finite stand-in for unbounded capacities: no flow can exceed the total
    /// finite capacity leaving the source.
    fn infinity_clamp(&self) -> u64 {
        self.arcs
            .iter()
            .filter(|a| a.from == self.source)
            .filter_map(|a| a.cap)
            .fold(0u64, u64::saturating_add)
    }
}

struct Residual {
    head: Vec<usize>,
    cap: Vec<u64>,
    cost: Vec<i128>,
    adj: Vec<Vec<usize>>,
}

impl Residual {
    fn build(net: &FlowNetwork) -> Self {
        let clamp = net.infinity_clamp();
        let m = net.arcs.len();
        let mut r = Residual {
            head: Vec::with_capacity(2 * m),
            cap: Vec::with_capacity(2 * m),
            cost: Vec::with_capacity(2 * m),
            adj: vec![Vec::new(); net.nodes],
        };
        for a in &net.arcs {
            let id = r.head.len();
            r.head.extend([a.to, a.from]);
            r.cap.extend([a.cap.unwrap_or(clamp), 0]);
            r.cost.extend([a.cost as i128, -(a.cost as i128)]);
            r.adj[a.from].push(id);
            r.adj[a.to].push(id + 1);
        }
        r
    }
}

/// A maximum flow of minimum cost among maximum flows.
pub fn min_cost_max_flow(net: &FlowNetwork) -> FlowResult {
    let mut res = Residual::build(net);
    let n = net.nodes;
    let (s, t) = (net.source, net.sink);
    let mut potential = vec![0i128; n];
    let mut dist = vec![i128::MAX; n];
    let mut via = vec![usize::MAX; n];
    let mut value = 0u64;
    let mut cost: i128 = 0;
    let mut heap = BinaryHeap::new();

    loop {
        dist.fill(i128::MAX);
        via.fill(usize::MAX);
        dist[s] = 0;
        heap.push(Reverse((0i128, s)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &e in &res.adj[u] {
                if res.cap[e] == 0 {
                    continue;
                }
                let v = res.head[e];
                let nd = d + res.cost[e] + potential[u] - potential[v];
                if nd < dist[v] {
                    dist[v] = nd;
                    via[v] = e;
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        if dist[t] == i128::MAX {
            break;
        }
        for v in 0..n {
            if dist[v] != i128::MAX {
                potential[v] += dist[v];
            }
        }
        let mut push = u64::MAX;
        let mut v = t;
        while v != s {
            let e = via[v];
            push = push.min(res.cap[e]);
            v = res.head[e ^ 1];
        }
        let mut v = t;
        while v != s {
            let e = via[v];
            res.cap[e] -= push;
            res.cap[e ^ 1] += push;
            cost += res.cost[e] * push as i128;
            v = res.head[e ^ 1];
        }
        value += push;
    }

    let flow = (0..net.arcs.len()).map(|i| res.cap[2 * i + 1]).collect();
    FlowResult {
        value,
        cost: cost as Weight,
        flow,
    }
}

/// Node layout of the degree network: `s = 0`, `t = 1`, `v^O = 2 + v`,
/// `v^I = 2 + n + v`.
pub fn out_node(v: usize) -> usize {
    2 + v
}

pub fn in_node(n: usize, v: usize) -> usize {
    2 + n + v
}

/// Network whose full flows are exactly the degree-exact multigraphs over
/// finite-cost edges. Returns it with the arc index of every finite `(u, v)`.
pub fn degree_network(
    d: &CostMatrix,
    in_demand: &[u64],
    out_demand: &[u64],
) -> (FlowNetwork, Vec<(usize, usize, usize)>) {
    let n = d.n();
    let mut net = FlowNetwork::new(2 + 2 * n, 0, 1);
    for v in 0..n {
        net.add_arc(0, out_node(v), Some(out_demand[v]), 0);
    }
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if let Some(c) = d.get(u, v) {
                let id = net.add_arc(out_node(u), in_node(n, v), None, c);
                edges.push((u, v, id));
            }
        }
    }
    for v in 0..n {
        net.add_arc(in_node(n, v), 1, Some(in_demand[v]), 0);
    }
    (net, edges)
}

/// Cheapest multigraph with the exact in- and out-degrees, ignoring
/// connectivity. `None` when no such multigraph uses only finite edges.
pub fn solve_fixed_degree_subgraph(
    d: &CostMatrix,
    in_demand: &[u64],
    out_demand: &[u64],
) -> Option<Multiplicity> {
    let n = d.n();
    assert_eq!(in_demand.len(), n);
    assert_eq!(out_demand.len(), n);
    let total_in: u128 = in_demand.iter().map(|&x| x as u128).sum();
    let total_out: u128 = out_demand.iter().map(|&x| x as u128).sum();
    if total_in != total_out {
        return None;
    }
    let (net, edges) = degree_network(d, in_demand, out_demand);
    let result = min_cost_max_flow(&net);
    if result.value as u128 != total_out {
        return None;
    }
    let mut m = Multiplicity::zeros(n);
    for (u, v, id) in edges {
        m.set(u, v, result.flow[id]);
    }
    Some(m)
}
