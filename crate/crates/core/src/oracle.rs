//! Exhaustive reference solvers and enumerators for cross-checking the
//! engines on small inputs.

use crate::algebraic::BlowupGraph;
use crate::dp::OutTree;
use crate::engine::{SolveError, Solved};
use crate::instance::{CostMatrix, Family, FdcsInstance, MvtspInstance, Weight};
use crate::multiplicity::{check_fdcs, Multiplicity};

#[derive(Clone, Debug)]
pub struct OracleOptions {
    /// Refuse instances whose `prod (out(v) + 1)` exceeds this.
    pub budget: u128,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { budget: 10_000_000 }
    }
}

struct Search<'a> {
    inst: &'a FdcsInstance,
    n: usize,
    m: Multiplicity,
    rem_out: Vec<u64>,
    rem_in: Vec<u64>,
    best: Option<(Weight, Multiplicity)>,
}

impl Search<'_> {
    fn bound(&self) -> Weight {
        self.best.as_ref().map_or(Weight::MAX, |b| b.0)
    }

    /// Cells in row-major order, values ascending, so the first optimum
    /// found is the lexicographically smallest.
    fn run(&mut self, cell: usize, cost: Weight) {
        if cost >= self.bound() {
            return;
        }
        let n = self.n;
        if cell == n * n {
            if self.rem_in.iter().all(|&x| x == 0) && check_fdcs(self.inst, &self.m).is_ok() {
                self.best = Some((cost, self.m.clone()));
            }
            return;
        }
        let (u, v) = (cell / n, cell % n);
        let last_in_row = v == n - 1;
        let cap = self.rem_out[u].min(self.rem_in[v]);
        let Some(c) = self.inst.costs().get(u, v) else {
            if !last_in_row || self.rem_out[u] == 0 {
                self.run(cell + 1, cost);
            }
            return;
        };
        let lo = if last_in_row { self.rem_out[u] } else { 0 };
        if lo > cap {
            return;
        }
        for x in lo..=cap {
            self.m.set(u, v, x);
            self.rem_out[u] -= x;
            self.rem_in[v] -= x;
            self.run(cell + 1, cost + c as Weight * x as Weight);
            self.rem_out[u] += x;
            self.rem_in[v] += x;
        }
        self.m.set(u, v, 0);
    }
}

/// Exact optimum of a fixed-degree instance (any family) by enumerating
/// every degree-exact multiplicity matrix.
pub fn brute_force_fdcs(inst: &FdcsInstance, opts: &OracleOptions) -> Result<Solved, SolveError> {
    let size = inst
        .out_demand()
        .iter()
        .try_fold(1u128, |acc, &k| acc.checked_mul(k as u128 + 1))
        .unwrap_or(u128::MAX);
    if size > opts.budget {
        return Err(SolveError::BudgetExceeded(opts.budget));
    }
    let n = inst.n();
    let mut search = Search {
        inst,
        n,
        m: Multiplicity::zeros(n),
        rem_out: inst.out_demand().to_vec(),
        rem_in: inst.in_demand().to_vec(),
        best: None,
    };
    search.run(0, 0);
    let (cost, multiplicity) = search.best.ok_or(SolveError::NoSolution)?;
    Ok(Solved { cost, multiplicity, memo_states: None })
}

/// Exact many-visits optimum; the lexicographically smallest optimal
/// matrix is returned.
pub fn brute_force_mvtsp(inst: &MvtspInstance, opts: &OracleOptions) -> Result<Solved, SolveError> {
    brute_force_fdcs(&inst.to_fdcs(Family::OrientedTrees), opts)
}

/// Every out-tree on `vertices` rooted at `root` whose outdegrees are
/// `delta` (indexed like `vertices`).
pub fn enumerate_out_trees(vertices: &[usize], delta: &[u64], root: usize) -> Vec<OutTree> {
    let r = vertices.len();
    assert_eq!(delta.len(), r);
    assert!(r <= 7, "exhaustive out-tree enumeration is limited to 7 vertices");
    let Some(root_pos) = vertices.iter().position(|&v| v == root) else {
        return Vec::new();
    };
    let others: Vec<usize> = (0..r).filter(|&i| i != root_pos).collect();
    let mut out = Vec::new();
    let mut parent = vec![0usize; others.len()];
    loop {
        let edges: Vec<(usize, usize)> = others
            .iter()
            .zip(&parent)
            .map(|(&child, &p)| (vertices[p], vertices[child]))
            .collect();
        let tree = OutTree { root, edges };
        let mut deg = vec![0u64; r];
        for &p in &parent {
            deg[p] += 1;
        }
        if deg == delta && tree.spans(vertices) {
            out.push(tree);
        }
        let mut i = 0;
        loop {
            if i == parent.len() {
                return out;
            }
            parent[i] += 1;
            if parent[i] < r {
                break;
            }
            parent[i] = 0;
            i += 1;
        }
    }
}

/// Every perfect matching of `b` (as edge ids, ascending) whose contraction
/// is connected.
pub fn enumerate_connected_pms(b: &BlowupGraph) -> Vec<Vec<usize>> {
    assert!(b.in_size() <= 8, "exhaustive matching enumeration is limited to 8 copies");
    if b.in_size() != b.out_size() {
        return Vec::new();
    }
    let mut by_out: Vec<Vec<usize>> = vec![Vec::new(); b.out_size()];
    for (e, edge) in b.edges().iter().enumerate() {
        by_out[edge.out_copy].push(e);
    }
    fn rec(
        b: &BlowupGraph,
        by_out: &[Vec<usize>],
        row: usize,
        used: &mut Vec<bool>,
        chosen: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if row == by_out.len() {
            if crate::algebraic::is_connected_perfect_matching(b, chosen) {
                let mut pm = chosen.clone();
                pm.sort_unstable();
                out.push(pm);
            }
            return;
        }
        for &e in &by_out[row] {
            let col = b.edges()[e].in_copy;
            if !used[col] {
                used[col] = true;
                chosen.push(e);
                rec(b, by_out, row + 1, used, chosen, out);
                chosen.pop();
                used[col] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(b, &by_out, 0, &mut vec![false; b.in_size()], &mut Vec::new(), &mut out);
    out
}

/// Whether the finite off-diagonal edges contain a directed cycle through
/// every vertex. Held-Karp over subsets.
pub fn has_hamiltonian_cycle(d: &CostMatrix) -> bool {
    let n = d.n();
    if n == 1 {
        return d.is_finite(0, 0);
    }
    assert!(n <= 20);
    // reach[S] = set of end vertices v such that a path 0 -> ... -> v covers S
    let mut reach = vec![0u32; 1 << n];
    reach[1] = 1;
    for s in 1usize..1 << n {
        if s & 1 == 0 || reach[s] == 0 {
            continue;
        }
        for u in 0..n {
            if reach[s] >> u & 1 == 0 {
                continue;
            }
            for v in 0..n {
                if s >> v & 1 == 0 && d.is_finite(u, v) {
                    reach[s | 1 << v] |= 1 << v;
                }
            }
        }
    }
    let full = (1 << n) - 1;
    (1..n).any(|v| reach[full] >> v & 1 == 1 && d.is_finite(v, 0))
}
