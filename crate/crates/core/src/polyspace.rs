//! Layered-guessing exact engine.
//!
//! Strip the leaves of an optimal solution's outbranching `K` times. What
//! survives is a core `R` holding the root, and the stripped vertices fall
//! into layers `L_1, ..., L_K` of non-increasing size. The engine guesses the
//! core, the core's out-tree degree sequence and its leaves `L_{K+1}`, and
//! the layer of every other vertex. A flow network then completes the
//! degrees while giving each stripped vertex exactly one parent from the
//! core or a later layer, which reconnects it to the root.

use rayon::prelude::*;

use crate::dp::{engine_root, rooted_order, solve_single_vertex, OutTree, OutTreeSolver, MAX_VERTICES};
use crate::engine::{SolveError, Solved};
use crate::flow::{min_cost_max_flow, FlowNetwork};
use crate::instance::{CostMatrix, FdcsInstance, Weight};
use crate::multiplicity::Multiplicity;

pub const DEFAULT_LAYERS: usize = 4;

/// Leaf layers `L_1 .. L_{k+1}` of an outbranching on `0..n`, and the core
/// `R = V \ (L_1 .. L_k)`.
pub fn leaf_layers(tree: &OutTree, n: usize, k: usize) -> (Vec<Vec<usize>>, Vec<usize>) {
    let mut alive = vec![true; n];
    let mut layers = Vec::with_capacity(k + 1);
    for _ in 0..=k {
        let remaining = alive.iter().filter(|&&a| a).count();
        if remaining <= 1 {
            layers.push(Vec::new());
            continue;
        }
        let mut has_child = vec![false; n];
        for &(u, v) in &tree.edges {
            if alive[u] && alive[v] {
                has_child[u] = true;
            }
        }
        let leaves: Vec<usize> = (0..n).filter(|&v| alive[v] && !has_child[v]).collect();
        layers.push(leaves);
        if layers.len() <= k {
            for &v in layers.last().unwrap() {
                alive[v] = false;
            }
        }
    }
    let core = (0..n).filter(|&v| alive[v]).collect();
    (layers, core)
}

/// Completion network for one guess, with the arc ids needed to read a
/// multiplicity matrix back out of a flow.
pub struct GuessNetwork {
    pub net: FlowNetwork,
    /// `(u, v, arc)` for `u^O -> v^I`.
    pub to_in: Vec<(usize, usize, usize)>,
    /// `(u, v, arc)` for `u^O -> v^C`.
    pub to_connector: Vec<(usize, usize, usize)>,
}

/// Builds the completion network. `layer[v]` is `0` for core vertices and
/// `i` for `v` in `L_i`. Fails when a stripped vertex has no in-demand left
/// for its parent edge.
pub fn create_network(
    d: &CostMatrix,
    layer: &[usize],
    out_residual: &[u64],
    in_residual: &[u64],
) -> Result<GuessNetwork, PreconditionViolated> {
    let n = d.n();
    let stripped: Vec<usize> = (0..n).filter(|&v| layer[v] > 0).collect();
    if stripped.iter().any(|&v| in_residual[v] < 1) {
        return Err(PreconditionViolated);
    }
    // s = 0, t = 1, v^O = 2 + v, v^I = 2 + n + v, connectors after that
    let mut connector = vec![usize::MAX; n];
    for (i, &v) in stripped.iter().enumerate() {
        connector[v] = 2 + 2 * n + i;
    }
    let mut net = FlowNetwork::new(2 + 2 * n + stripped.len(), 0, 1);
    for v in 0..n {
        net.add_arc(0, 2 + v, Some(out_residual[v]), 0);
    }
    for v in 0..n {
        let cap = if layer[v] > 0 { in_residual[v] - 1 } else { in_residual[v] };
        net.add_arc(2 + n + v, 1, Some(cap), 0);
    }
    for &v in &stripped {
        net.add_arc(connector[v], 1, Some(1), 0);
    }
    let mut to_in = Vec::new();
    let mut to_connector = Vec::new();
    for u in 0..n {
        for v in 0..n {
            let Some(c) = d.get(u, v) else { continue };
            to_in.push((u, v, net.add_arc(2 + u, 2 + n + v, None, c)));
            // parents come from the core or a later layer
            if layer[v] > 0 && (layer[u] == 0 || layer[u] > layer[v]) {
                to_connector.push((u, v, net.add_arc(2 + u, connector[v], None, c)));
            }
        }
    }
    Ok(GuessNetwork { net, to_in, to_connector })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PreconditionViolated;

/// Completes one guess: core tree `tree` (cost `tree_cost`) and layer
/// labels. Returns the total cost and solution of a full flow, if any.
pub(crate) fn evaluate_guess(
    inst: &FdcsInstance,
    tree: &OutTree,
    tree_cost: Weight,
    layer: &[usize],
) -> Option<(Weight, Multiplicity)> {
    let n = inst.n();
    let mut out_residual = inst.out_demand().to_vec();
    let mut in_residual = inst.in_demand().to_vec();
    for &(u, v) in &tree.edges {
        out_residual[u] = out_residual[u].checked_sub(1)?;
        in_residual[v] = in_residual[v].checked_sub(1)?;
    }
    let g = create_network(inst.costs(), layer, &out_residual, &in_residual).ok()?;
    let flow = min_cost_max_flow(&g.net);
    let full: u64 = out_residual.iter().sum();
    if flow.value != full {
        return None;
    }
    let mut m = Multiplicity::zeros(n);
    for &(u, v) in &tree.edges {
        m.add(u, v, 1);
    }
    for &(u, v, arc) in g.to_in.iter().chain(&g.to_connector) {
        m.add(u, v, flow.flow[arc]);
    }
    Some((flow.cost + tree_cost, m))
}

/// Compositions of `total` into `parts` positive integers.
fn compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
    fn rec(i: usize, left: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        let parts = cur.len();
        if i + 1 == parts {
            cur[i] = left;
            out.push(cur.clone());
            return;
        }
        let still = (parts - i - 1) as u64;
        for x in 1..=left - still {
            cur[i] = x;
            rec(i + 1, left - x, cur, out);
        }
    }
    let mut out = Vec::new();
    if parts == 0 {
        if total == 0 {
            out.push(Vec::new());
        }
    } else if total >= parts as u64 {
        rec(0, total, &mut vec![0; parts], &mut out);
    }
    out
}

/// Layer labels `1..=k` for `free` vertices with non-increasing layer sizes
/// that never drop below `floor`.
fn layer_assignments(free: &[usize], n: usize, k: usize, floor: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut labels = vec![1usize; free.len()];
    loop {
        let mut sizes = vec![0usize; k + 1];
        for &l in &labels {
            sizes[l] += 1;
        }
        if (1..k).all(|i| sizes[i] >= sizes[i + 1]) && sizes[k] >= floor {
            let mut layer = vec![0usize; n];
            for (&v, &l) in free.iter().zip(&labels) {
                layer[v] = l;
            }
            out.push(layer);
        }
        let mut i = 0;
        loop {
            if i == labels.len() {
                return out;
            }
            labels[i] += 1;
            if labels[i] <= k {
                break;
            }
            labels[i] = 1;
            i += 1;
        }
    }
}

fn subsets_of(items: &[usize], min: usize, max: usize) -> Vec<Vec<usize>> {
    (0u64..1 << items.len())
        .filter(|s| (min..=max).contains(&(s.count_ones() as usize)))
        .map(|s| (0..items.len()).filter(|&i| s >> i & 1 == 1).map(|i| items[i]).collect())
        .collect()
}

/// Best candidate over every guess with core `core` (root first).
fn best_for_core(inst: &FdcsInstance, core: &[usize], k: usize) -> (Option<(Weight, Multiplicity)>, u64) {
    let n = inst.n();
    let r = core.len();
    let free: Vec<usize> = (0..n).filter(|v| !core.contains(v)).collect();
    if free.iter().any(|&v| inst.in_demand()[v] < 1) {
        return (None, 0);
    }
    let mut trees = OutTreeSolver::new(inst.costs(), core.to_vec());
    let mut best: Option<(Weight, Multiplicity)> = None;
    let leaf_sets = if r == 1 {
        vec![Vec::new()]
    } else {
        subsets_of(&core[1..], 1, (n - r) / k)
    };
    for leaves in leaf_sets {
        // positive outdegrees everywhere in the core except its leaves
        let inner: Vec<usize> = (0..r).filter(|&i| !leaves.contains(&core[i])).collect();
        for parts in compositions(r as u64 - 1, if r == 1 { 0 } else { inner.len() }) {
            let mut delta = vec![0u64; r];
            for (&i, &x) in inner.iter().zip(&parts) {
                delta[i] = x;
            }
            if core.iter().zip(&delta).any(|(&v, &x)| inst.out_demand()[v] < x)
                || core[1..].iter().any(|&v| inst.in_demand()[v] < 1)
            {
                continue;
            }
            let found = if r == 1 {
                Some((0, OutTree { root: core[0], edges: Vec::new() }))
            } else {
                trees.best_spanning(&delta)
            };
            let Some((tree_cost, tree)) = found else { continue };
            for layer in layer_assignments(&free, n, k, leaves.len()) {
                if let Some((cost, m)) = evaluate_guess(inst, &tree, tree_cost, &layer) {
                    if best.as_ref().is_none_or(|b| cost < b.0) {
                        best = Some((cost, m));
                    }
                }
            }
        }
    }
    (best, trees.memo_states() as u64)
}

/// Exact optimum by layered guessing with `k` layers.
pub fn solve_polyspace(inst: &FdcsInstance, k: usize) -> Result<Solved, SolveError> {
    assert!(k >= 1, "at least one layer");
    let n = inst.n();
    if n > MAX_VERTICES {
        return Err(SolveError::Unsupported(format!("at most {MAX_VERTICES} vertices")));
    }
    let root = engine_root(inst)?;
    if n == 1 {
        return solve_single_vertex(inst);
    }
    let order = rooted_order(n, root);
    let others = &order[1..];
    let cores: Vec<Vec<usize>> = (0u64..1 << others.len())
        .map(|s| {
            std::iter::once(root)
                .chain((0..others.len()).filter(|&i| s >> i & 1 == 1).map(|i| others[i]))
                .collect()
        })
        .collect();
    let results: Vec<_> = cores.par_iter().map(|core| best_for_core(inst, core, k)).collect();
    let memo_states = results.iter().map(|r| r.1).sum();
    let (cost, multiplicity) = results
        .into_iter()
        .filter_map(|r| r.0)
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .ok_or(SolveError::NoSolution)?;
    Ok(Solved { cost, multiplicity, memo_states: Some(memo_states) })
}
