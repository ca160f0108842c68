//! Exponential-space exact engine.
//!
//! For every outdegree sequence of an outbranching, the cheapest out-tree
//! with exactly that sequence is found by a memoized recursion that removes
//! the smallest leaf and guesses its parent. The remaining degrees are then
//! filled in by a min-cost flow, and the best combination wins.
//!
//! Vertices are relabeled so the root is index 0. States are pairs
//! `(S, delta)`: a vertex set containing the root and the outdegrees still
//! owed inside it.

use rustc_hash::FxHashMap;

use crate::engine::{SolveError, Solved};
use crate::flow::solve_fixed_degree_subgraph;
use crate::instance::{CostMatrix, ExtCost, Family, FdcsInstance, Weight};
use crate::multiplicity::{cost_of, Multiplicity};

/// Largest vertex set the packed state key can describe.
pub const MAX_VERTICES: usize = 21;

const BITS: u32 = 6;
const FIELD: u128 = (1 << BITS) - 1;
const INF: Weight = Weight::MAX;

/// An out-tree given by its edges, oriented away from `root`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutTree {
    pub root: usize,
    pub edges: Vec<(usize, usize)>,
}

impl OutTree {
    pub fn cost(&self, d: &CostMatrix) -> ExtCost {
        self.edges.iter().fold(ExtCost::Finite(0), |acc, &(u, v)| {
            acc.saturating_add(d.get(u, v).map_or(ExtCost::Infinite, |c| ExtCost::Finite(c as Weight)))
        })
    }

    pub fn as_multiplicity(&self, n: usize) -> Multiplicity {
        let mut m = Multiplicity::zeros(n);
        for &(u, v) in &self.edges {
            m.add(u, v, 1);
        }
        m
    }

    /// Outdegree of every vertex in `0..n`.
    pub fn outdegrees(&self, n: usize) -> Vec<u64> {
        let mut deg = vec![0; n];
        for &(u, _) in &self.edges {
            deg[u] += 1;
        }
        deg
    }

    /// True iff the edges form an out-tree rooted at `root` spanning exactly
    /// `vertices`.
    pub fn spans(&self, vertices: &[usize]) -> bool {
        if !vertices.contains(&self.root) || self.edges.len() + 1 != vertices.len() {
            return false;
        }
        let mut parent = FxHashMap::default();
        for &(u, v) in &self.edges {
            if !vertices.contains(&u) || !vertices.contains(&v) || v == self.root {
                return false;
            }
            if parent.insert(v, u).is_some() {
                return false;
            }
        }
        // every vertex reaches the root through parents without cycling
        vertices.iter().all(|&v| {
            let mut cur = v;
            for _ in 0..vertices.len() {
                if cur == self.root {
                    return true;
                }
                cur = parent[&cur];
            }
            false
        })
    }
}

fn pack(delta: &[u64]) -> u128 {
    assert!(delta.len() <= MAX_VERTICES);
    delta.iter().enumerate().fold(0, |acc, (v, &x)| {
        assert!(x <= FIELD as u64, "outdegree {x} does not fit the state key");
        acc | (x as u128) << (BITS * v as u32)
    })
}

#[inline]
fn field(packed: u128, v: usize) -> u64 {
    ((packed >> (BITS * v as u32)) & FIELD) as u64
}

#[inline]
fn unit(v: usize) -> u128 {
    1 << (BITS * v as u32)
}

/// Whether `(S, delta)` is a state the recursion can reach from `S = V`.
/// Labels are internal: the root is 0 and `delta` is indexed by vertex, with
/// entries outside `S` ignored.
pub fn is_reachable_state(mask: u32, delta: &[u64], n: usize) -> bool {
    if mask & 1 == 0 {
        return false;
    }
    let members: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
    let sum: u64 = members.iter().map(|&v| delta[v]).sum();
    if delta[0] < 1 || sum + 1 != members.len() as u64 {
        return false;
    }
    let last_removed = (0..n).rev().find(|&v| mask >> v & 1 == 0);
    let bad = match last_removed {
        None => 0,
        Some(l) => members.iter().filter(|&&v| v < l && delta[v] == 0).count(),
    };
    bad <= 1
}

/// Cheapest out-trees with prescribed outdegrees over a fixed vertex list,
/// memoized across queries.
pub struct OutTreeSolver {
    /// Original labels; `vertices[0]` is the root.
    vertices: Vec<usize>,
    /// Internal-label costs, row-major.
    cost: Vec<Option<u64>>,
    memo: FxHashMap<(u32, u128), (Weight, u8)>,
}

impl OutTreeSolver {
    /// `vertices[0]` is the root.
    pub fn new(d: &CostMatrix, vertices: Vec<usize>) -> Self {
        let r = vertices.len();
        assert!((1..=MAX_VERTICES).contains(&r), "out-tree solver supports 1..={MAX_VERTICES} vertices");
        let cost = (0..r * r).map(|i| d.get(vertices[i / r], vertices[i % r])).collect();
        OutTreeSolver {
            vertices,
            cost,
            memo: FxHashMap::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    /// Number of distinct states stored so far.
    pub fn memo_states(&self) -> usize {
        self.memo.len()
    }

    /// Every stored state as `(S, delta)` in internal labels.
    pub fn memo_keys(&self) -> impl Iterator<Item = (u32, Vec<u64>)> + '_ {
        let r = self.len();
        self.memo
            .keys()
            .map(move |&(mask, packed)| (mask, (0..r).map(|v| field(packed, v)).collect()))
    }

    #[inline]
    fn edge(&self, u: usize, v: usize) -> Option<u64> {
        self.cost[u * self.len() + v]
    }

    fn first_leaf(mask: u32, packed: u128) -> usize {
        let mut rest = mask;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            if field(packed, v) == 0 {
                return v;
            }
            rest &= rest - 1;
        }
        panic!("state without a leaf");
    }

    fn best_cost(&mut self, mask: u32, packed: u128) -> Weight {
        if let Some(&(c, _)) = self.memo.get(&(mask, packed)) {
            return c;
        }
        let leaf = Self::first_leaf(mask, packed);
        let entry = if mask.count_ones() == 2 {
            (self.edge(0, leaf).map_or(INF, |c| c as Weight), 0)
        } else {
            let rest = mask & !(1 << leaf);
            let mut best = (INF, u8::MAX);
            let mut ws = rest;
            while ws != 0 {
                let w = ws.trailing_zeros() as usize;
                ws &= ws - 1;
                let dw = field(packed, w);
                let allowed = if w == 0 { dw >= 2 } else { dw >= 1 };
                if !allowed {
                    continue;
                }
                let Some(c) = self.edge(w, leaf) else { continue };
                let sub = self.best_cost(rest, packed - unit(w));
                if sub != INF && sub + (c as Weight) < best.0 {
                    best = (sub + c as Weight, w as u8);
                }
            }
            best
        };
        self.memo.insert((mask, packed), entry);
        entry.0
    }

    /// Cheapest out-tree spanning internal set `mask` with outdegrees
    /// `delta` (internal labels), returned in original labels.
    pub fn best_outbranching(&mut self, mask: u32, delta: &[u64]) -> Option<(Weight, OutTree)> {
        let r = self.len();
        assert!(
            is_reachable_state(mask, delta, r),
            "({mask:#b}, {delta:?}) is not a reachable state"
        );
        if mask == 1 {
            return Some((0, OutTree { root: self.vertices[0], edges: vec![] }));
        }
        let masked: Vec<u64> = (0..r).map(|v| if mask >> v & 1 == 1 { delta[v] } else { 0 }).collect();
        let mut packed = pack(&masked);
        let total = self.best_cost(mask, packed);
        if total == INF {
            return None;
        }
        let mut edges = Vec::with_capacity(mask.count_ones() as usize - 1);
        let mut mask = mask;
        loop {
            let leaf = Self::first_leaf(mask, packed);
            if mask.count_ones() == 2 {
                edges.push((self.vertices[0], self.vertices[leaf]));
                break;
            }
            let w = self.memo[&(mask, packed)].1 as usize;
            edges.push((self.vertices[w], self.vertices[leaf]));
            mask &= !(1 << leaf);
            packed -= unit(w);
        }
        edges.reverse();
        Some((total, OutTree { root: self.vertices[0], edges }))
    }

    /// Cheapest out-tree spanning all vertices with outdegrees `delta`
    /// (internal labels).
    pub fn best_spanning(&mut self, delta: &[u64]) -> Option<(Weight, OutTree)> {
        let full = if self.len() == 32 { u32::MAX } else { (1u32 << self.len()) - 1 };
        self.best_outbranching(full, delta)
    }
}

/// Every outdegree sequence of an outbranching on `n >= 2` vertices rooted at
/// 0: root degree at least one, total `n - 1`. Reverse lexicographic order.
pub fn outbranching_sequences(n: usize) -> Vec<Vec<u64>> {
    assert!(n >= 1);
    fn rec(i: usize, left: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.clone());
            return;
        }
        let lo = u64::from(i == 0);
        for x in (lo..=left).rev() {
            cur[i] = x;
            rec(i + 1, left - x, cur, out);
        }
    }
    let mut out = Vec::new();
    if n == 1 {
        out.push(vec![0]);
    } else {
        rec(0, n as u64 - 1, &mut vec![0; n], &mut out);
    }
    out
}

/// Number of length-`n` nonnegative sequences summing to at most `n - 1`,
/// counted by enumeration. Every reachable state pads out to one of these.
pub fn count_extended_sequences(n: usize) -> u64 {
    fn rec(slots: usize, left: u64) -> u64 {
        if slots == 0 {
            return 1;
        }
        (0..=left).map(|x| rec(slots - 1, left - x)).sum()
    }
    if n == 0 {
        return 0;
    }
    rec(n, n as u64 - 1)
}

/// Relabeling with the root first, for an instance that pins a root.
pub(crate) fn rooted_order(n: usize, root: usize) -> Vec<usize> {
    std::iter::once(root).chain((0..n).filter(|&v| v != root)).collect()
}

/// The root an outbranching engine should use, if the instance's family
/// allows one.
pub(crate) fn engine_root(inst: &FdcsInstance) -> Result<usize, SolveError> {
    match inst.family() {
        Family::OutbranchingRootedAt(r) => Ok(r),
        // with balanced degrees, weak connectivity gives an outbranching from anywhere
        Family::OrientedTrees if inst.in_demand() == inst.out_demand() => Ok(0),
        Family::OrientedTrees => Err(SolveError::Unsupported(
            "oriented-tree family with unbalanced demands needs the algebraic engine".into(),
        )),
    }
}

/// One-vertex instances: only the loop is available.
pub(crate) fn solve_single_vertex(inst: &FdcsInstance) -> Result<Solved, SolveError> {
    let k = inst.out_demand()[0];
    let mut m = Multiplicity::zeros(1);
    m.set(0, 0, k);
    match cost_of(&m, inst.costs()) {
        ExtCost::Finite(cost) => Ok(Solved { cost, multiplicity: m, memo_states: Some(0) }),
        ExtCost::Infinite => Err(SolveError::NoSolution),
    }
}

/// Exact optimum by out-tree sequences and flow completion.
pub fn solve_expspace(inst: &FdcsInstance) -> Result<Solved, SolveError> {
    let n = inst.n();
    if n > MAX_VERTICES {
        return Err(SolveError::Unsupported(format!("at most {MAX_VERTICES} vertices")));
    }
    let root = engine_root(inst)?;
    if n == 1 {
        return solve_single_vertex(inst);
    }
    let order = rooted_order(n, root);
    let mut trees = OutTreeSolver::new(inst.costs(), order.clone());
    let (ins, outs) = (inst.in_demand(), inst.out_demand());
    let mut best: Option<(Weight, Multiplicity)> = None;
    let mut residual_in = vec![0u64; n];
    let mut residual_out = vec![0u64; n];
    for delta in outbranching_sequences(n) {
        let feasible = order.iter().enumerate().all(|(i, &v)| {
            outs[v] >= delta[i] && (v == root || ins[v] >= 1)
        });
        if !feasible {
            continue;
        }
        let Some((tree_cost, tree)) = trees.best_spanning(&delta) else { continue };
        for (i, &v) in order.iter().enumerate() {
            residual_out[v] = outs[v] - delta[i];
            residual_in[v] = ins[v] - u64::from(v != root);
        }
        let Some(rest) = solve_fixed_degree_subgraph(inst.costs(), &residual_in, &residual_out) else {
            continue;
        };
        let total = tree_cost + cost_of(&rest, inst.costs()).finite().expect("flow uses finite edges");
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, rest.plus(&tree.as_multiplicity(n))));
        }
    }
    let (cost, multiplicity) = best.ok_or(SolveError::NoSolution)?;
    Ok(Solved {
        cost,
        multiplicity,
        memo_states: Some(trees.memo_states() as u64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::MvtspInstance;
    use crate::multiplicity::{is_feasible_fdcs, is_outtree_sequence};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn triangle() -> CostMatrix {
        let mut d = CostMatrix::filled(3, Some(1));
        for v in 0..3 {
            d.set(v, v, None);
        }
        d
    }

    fn binom(n: u64, k: u64) -> u64 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    /// All parent functions on `0..n` rooted at 0 that form trees.
    fn all_trees(n: usize) -> Vec<OutTree> {
        let mut out = Vec::new();
        let others = n - 1;
        for code in 0..n.pow(others as u32) {
            let mut c = code;
            let edges: Vec<(usize, usize)> = (1..n)
                .map(|v| {
                    let p = c % n;
                    c /= n;
                    (p, v)
                })
                .collect();
            let t = OutTree { root: 0, edges };
            if t.spans(&(0..n).collect::<Vec<_>>()) {
                out.push(t);
            }
        }
        out
    }

    #[test]
    fn reachable_state_examples() {
        assert!(is_reachable_state(0b111, &[2, 0, 0], 3));
        assert!(is_reachable_state(0b101, &[1, 0, 0], 3));
        assert!(is_reachable_state(0b1001, &[1, 0, 0, 0], 4));
        assert!(is_reachable_state(0b1011, &[2, 0, 0, 0], 4));
        // two leaves below the last removed vertex
        assert!(!is_reachable_state(0b10111, &[3, 0, 0, 0, 0], 5));
        assert!(!is_reachable_state(0b110, &[1, 1, 0], 3));
        assert!(!is_reachable_state(0b111, &[0, 1, 1], 3));
    }

    #[test]
    fn sequence_enumeration() {
        assert_eq!(outbranching_sequences(2), vec![vec![1, 0]]);
        assert_eq!(
            outbranching_sequences(3),
            vec![vec![2, 0, 0], vec![1, 1, 0], vec![1, 0, 1]]
        );
        for n in 2..=9 {
            let seqs = outbranching_sequences(n);
            assert_eq!(seqs.len() as u64, binom(2 * n as u64 - 3, n as u64 - 2));
            assert!(seqs.iter().all(|d| is_outtree_sequence(d, 0)));
        }
    }

    #[test]
    fn two_vertex_tree() {
        let d = CostMatrix::filled(2, Some(4));
        let mut s = OutTreeSolver::new(&d, vec![0, 1]);
        let (c, t) = s.best_spanning(&[1, 0]).unwrap();
        assert_eq!((c, t.edges), (4, vec![(0, 1)]));
    }

    #[test]
    fn star_on_triangle() {
        let mut s = OutTreeSolver::new(&triangle(), vec![0, 1, 2]);
        let (c, t) = s.best_spanning(&[2, 0, 0]).unwrap();
        assert_eq!(c, 2);
        let mut e = t.edges.clone();
        e.sort();
        assert_eq!(e, vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn relabeled_root() {
        let d = CostMatrix::from_rows(vec![
            vec![None, Some(1), Some(9)],
            vec![Some(5), None, Some(2)],
            vec![Some(3), Some(7), None],
        ])
        .unwrap();
        let mut s = OutTreeSolver::new(&d, vec![2, 0, 1]);
        // root 2 with one child, which has one child
        let (c, t) = s.best_spanning(&[1, 1, 0]).unwrap();
        assert_eq!(c, 3 + 1);
        assert_eq!(t.edges, vec![(2, 0), (0, 1)]);
        assert!(t.spans(&[0, 1, 2]));
    }

    #[test]
    fn matches_exhaustive_trees_and_keys_are_reachable() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for n in 2..=5 {
            let trees = all_trees(n);
            for _ in 0..10 {
                let cells = (0..n * n)
                    .map(|_| rng.gen_bool(0.85).then(|| rng.gen_range(0..=9)))
                    .collect();
                let d = CostMatrix::new(n, cells);
                let mut s = OutTreeSolver::new(&d, (0..n).collect());
                for delta in outbranching_sequences(n) {
                    let expect = trees
                        .iter()
                        .filter(|t| t.outdegrees(n) == delta)
                        .filter_map(|t| t.cost(&d).finite())
                        .min();
                    let got = s.best_spanning(&delta);
                    assert_eq!(got.as_ref().map(|g| g.0), expect);
                    if let Some((c, t)) = got {
                        assert!(t.spans(&(0..n).collect::<Vec<_>>()));
                        assert_eq!(t.outdegrees(n), delta);
                        assert_eq!(t.cost(&d), ExtCost::Finite(c));
                    }
                }
                for (mask, delta) in s.memo_keys() {
                    assert!(is_reachable_state(mask, &delta, n), "{mask:#b} {delta:?}");
                }
            }
        }
    }

    fn mvtsp(d: CostMatrix, k: Vec<u64>) -> FdcsInstance {
        MvtspInstance::new(d, k).unwrap().to_fdcs(Family::OutbranchingRootedAt(0))
    }

    #[test]
    fn expspace_examples() {
        assert_eq!(solve_expspace(&mvtsp(triangle(), vec![1; 3])).unwrap().cost, 3);
        let i2l = CostMatrix::from_rows(vec![vec![Some(5), Some(2)], vec![Some(3), Some(4)]]).unwrap();
        let s = solve_expspace(&mvtsp(i2l, vec![2, 1])).unwrap();
        assert_eq!(s.cost, 10);
        let single = CostMatrix::filled(1, Some(4));
        assert_eq!(solve_expspace(&mvtsp(single, vec![3])).unwrap().cost, 12);
        let one_way = CostMatrix::from_rows(vec![vec![None, Some(2)], vec![None, None]]).unwrap();
        assert_eq!(solve_expspace(&mvtsp(one_way, vec![1, 1])), Err(SolveError::NoSolution));
    }

    #[test]
    fn expspace_outputs_are_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..100 {
            let n = rng.gen_range(1..=5);
            let cells = (0..n * n)
                .map(|_| rng.gen_bool(0.7).then(|| rng.gen_range(0..=9)))
                .collect();
            let k = (0..n).map(|_| rng.gen_range(1..=3)).collect();
            let root = rng.gen_range(0..n);
            let inst = MvtspInstance::new(CostMatrix::new(n, cells), k)
                .unwrap()
                .to_fdcs(Family::OutbranchingRootedAt(root));
            if let Ok(s) = solve_expspace(&inst) {
                assert!(is_feasible_fdcs(&inst, &s.multiplicity));
                assert_eq!(cost_of(&s.multiplicity, inst.costs()), ExtCost::Finite(s.cost));
            }
        }
    }
}
