//! Solutions as edge-multiplicity matrices, their cost, feasibility, and
//! conversion into explicit tours.

use thiserror::Error;

use crate::instance::{CostMatrix, ExtCost, FdcsInstance, Family, MvtspInstance, Weight};

/// `m(u, v)`: how many times the solution traverses the edge `(u, v)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Multiplicity {
    n: usize,
    cells: Vec<u64>,
}

impl Multiplicity {
    pub fn zeros(n: usize) -> Self {
        Multiplicity {
            n,
            cells: vec![0; n * n],
        }
    }

    /// Returns `None` unless `rows` is square.
    pub fn from_rows(rows: &[Vec<u64>]) -> Option<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return None;
        }
        Some(Multiplicity {
            n,
            cells: rows.concat(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> u64 {
        self.cells[u * self.n + v]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: u64) {
        self.cells[u * self.n + v] = value;
    }

    #[inline]
    pub fn add(&mut self, u: usize, v: usize, value: u64) {
        self.cells[u * self.n + v] += value;
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        (0..self.n)
            .map(|u| self.cells[u * self.n..(u + 1) * self.n].to_vec())
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.cells.iter().all(|&c| c == 0)
    }

    pub fn out_degree(&self, u: usize) -> u64 {
        self.cells[u * self.n..(u + 1) * self.n].iter().sum()
    }

    pub fn in_degree(&self, v: usize) -> u64 {
        (0..self.n).map(|u| self.get(u, v)).sum()
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().sum()
    }

    /// Edges with positive multiplicity, with their counts.
    pub fn support(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(move |(i, &c)| (i / self.n, i % self.n, c))
    }

    /// Pointwise sum. Panics on a shape mismatch.
    pub fn plus(&self, other: &Multiplicity) -> Multiplicity {
        assert_eq!(self.n, other.n, "multiplicity shapes differ");
        Multiplicity {
            n: self.n,
            cells: self.cells.iter().zip(&other.cells).map(|(a, b)| a + b).collect(),
        }
    }
}

/// `d(m) = sum over (u, v) of d(u, v) * m(u, v)`; infinite if `m` uses an
/// infinite edge.
pub fn cost_of(m: &Multiplicity, d: &CostMatrix) -> ExtCost {
    assert_eq!(m.n(), d.n(), "multiplicity and cost matrix shapes differ");
    let mut total: Weight = 0;
    for (u, v, count) in m.support() {
        match d.get(u, v) {
            Some(c) => total += c as Weight * count as Weight,
            None => return ExtCost::Infinite,
        }
    }
    ExtCost::Finite(total)
}

/// Why a multiplicity matrix fails to be a solution.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("matrix is {found}x{found} but the instance has {expected} vertices")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("edge ({0}, {1}) is used but has infinite cost")]
    InfiniteEdge(usize, usize),
    #[error("degrees of vertex {0} do not match its demands")]
    DegreeMismatch(usize),
    #[error("support is not connected")]
    NotConnected,
    #[error("support has no outbranching rooted at {0}")]
    NoOutbranching(usize),
}

impl Violation {
    /// Stable kebab-case name used in verification reports.
    pub fn reason(&self) -> &'static str {
        match self {
            Violation::ShapeMismatch { .. } => "shape-mismatch",
            Violation::InfiniteEdge(..) => "infinite-edge",
            Violation::DegreeMismatch(_) => "degree-mismatch",
            Violation::NotConnected => "not-connected",
            Violation::NoOutbranching(_) => "no-outbranching",
        }
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Support of `m` viewed as an undirected graph (loops ignored) spans and
/// connects all `n` vertices.
pub fn support_is_connected(m: &Multiplicity) -> bool {
    let n = m.n();
    let mut ds = DisjointSet::new(n);
    let mut components = n;
    for (u, v, _) in m.support() {
        if u != v && ds.union(u, v) {
            components -= 1;
        }
    }
    components <= 1
}

/// Every vertex is reachable from `root` along support edges.
pub fn support_has_outbranching(m: &Multiplicity, root: usize) -> bool {
    let n = m.n();
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut stack = vec![root];
    while let Some(u) = stack.pop() {
        for v in 0..n {
            if !seen[v] && m.get(u, v) > 0 {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn check_degrees(
    m: &Multiplicity,
    d: &CostMatrix,
    in_demand: &[u64],
    out_demand: &[u64],
) -> Result<(), Violation> {
    if m.n() != d.n() {
        return Err(Violation::ShapeMismatch {
            expected: d.n(),
            found: m.n(),
        });
    }
    if let Some((u, v, _)) = m.support().find(|&(u, v, _)| !d.is_finite(u, v)) {
        return Err(Violation::InfiniteEdge(u, v));
    }
    for v in 0..m.n() {
        if m.out_degree(v) != out_demand[v] || m.in_degree(v) != in_demand[v] {
            return Err(Violation::DegreeMismatch(v));
        }
    }
    Ok(())
}

/// Full feasibility check for a many-visits solution.
pub fn check_mvtsp(inst: &MvtspInstance, m: &Multiplicity) -> Result<(), Violation> {
    check_degrees(m, inst.costs(), inst.visits(), inst.visits())?;
    if !support_is_connected(m) {
        return Err(Violation::NotConnected);
    }
    Ok(())
}

pub fn is_feasible_mvtsp(inst: &MvtspInstance, m: &Multiplicity) -> bool {
    check_mvtsp(inst, m).is_ok()
}

/// Full feasibility check for a fixed-degree instance, including its family.
pub fn check_fdcs(inst: &FdcsInstance, m: &Multiplicity) -> Result<(), Violation> {
    check_degrees(m, inst.costs(), inst.in_demand(), inst.out_demand())?;
    match inst.family() {
        Family::OrientedTrees => {
            if !support_is_connected(m) {
                return Err(Violation::NotConnected);
            }
        }
        Family::OutbranchingRootedAt(root) => {
            if !support_has_outbranching(m, root) {
                return Err(Violation::NoOutbranching(root));
            }
        }
    }
    Ok(())
}

pub fn is_feasible_fdcs(inst: &FdcsInstance, m: &Multiplicity) -> bool {
    check_fdcs(inst, m).is_ok()
}

/// A closed walk given as its vertex sequence; the last vertex connects back
/// to the first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tour(pub Vec<usize>);

impl Tour {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Multiset of cyclically consecutive pairs.
    pub fn edge_multiset(&self, n: usize) -> Multiplicity {
        let mut m = Multiplicity::zeros(n);
        let len = self.0.len();
        for i in 0..len {
            m.add(self.0[i], self.0[(i + 1) % len], 1);
        }
        m
    }

    /// `d` summed over cyclically consecutive pairs.
    pub fn cost(&self, d: &CostMatrix) -> ExtCost {
        cost_of(&self.edge_multiset(d.n()), d)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("multiplicity is not a connected Eulerian multigraph for this instance: {0}")]
pub struct NotEulerian(pub Violation);

/// Eulerian circuit of the thick graph `G_m`, starting at vertex 0.
pub fn reconstruct_tour(inst: &MvtspInstance, m: &Multiplicity) -> Result<Tour, NotEulerian> {
    check_mvtsp(inst, m).map_err(NotEulerian)?;
    let n = m.n();
    let mut remaining = m.clone();
    let mut next = vec![0usize; n];
    let mut stack = vec![0usize];
    let mut circuit = Vec::with_capacity(m.total() as usize + 1);
    while let Some(&u) = stack.last() {
        while next[u] < n && remaining.get(u, next[u]) == 0 {
            next[u] += 1;
        }
        if next[u] < n {
            let v = next[u];
            remaining.set(u, v, remaining.get(u, v) - 1);
            stack.push(v);
        } else {
            circuit.push(u);
            stack.pop();
        }
    }
    circuit.reverse();
    circuit.pop();
    Ok(Tour(circuit))
}

/// Whether `delta` (indexed over the vertices of `X`) is the outdegree
/// sequence of some out-tree spanning `X` rooted at `root`.
///
/// For `|X| >= 2` this holds iff the root has outdegree at least one and
/// the outdegrees sum to `|X| - 1`. A single vertex is an out-tree only
/// with outdegree zero.
pub fn is_outtree_sequence(delta: &[u64], root: usize) -> bool {
    match delta.len() {
        0 => false,
        1 => delta[0] == 0 && root == 0,
        len => delta[root] >= 1 && delta.iter().sum::<u64>() == len as u64 - 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn i2() -> MvtspInstance {
        MvtspInstance::new(
            CostMatrix::from_rows(vec![vec![None, Some(2)], vec![Some(3), None]]).unwrap(),
            vec![1, 1],
        )
        .unwrap()
    }

    fn i2l() -> MvtspInstance {
        MvtspInstance::new(
            CostMatrix::from_rows(vec![vec![Some(5), Some(2)], vec![Some(3), Some(4)]]).unwrap(),
            vec![2, 1],
        )
        .unwrap()
    }

    fn t3() -> MvtspInstance {
        let mut d = CostMatrix::filled(3, Some(1));
        for v in 0..3 {
            d.set(v, v, None);
        }
        MvtspInstance::new(d, vec![1, 1, 1]).unwrap()
    }

    fn mat(rows: &[&[u64]]) -> Multiplicity {
        Multiplicity::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn costs() {
        assert_eq!(cost_of(&Multiplicity::zeros(2), i2().costs()), ExtCost::Finite(0));
        assert_eq!(cost_of(&mat(&[&[0, 1], &[1, 0]]), i2().costs()), ExtCost::Finite(5));
        assert_eq!(cost_of(&mat(&[&[1, 1], &[1, 0]]), i2l().costs()), ExtCost::Finite(10));
        assert_eq!(cost_of(&mat(&[&[1, 0], &[0, 0]]), i2().costs()), ExtCost::Infinite);
    }

    #[test]
    fn wide_costs_do_not_overflow() {
        let d = CostMatrix::filled(2, Some(1 << 40));
        let m = mat(&[&[1 << 20, 1 << 20], &[1 << 20, 1 << 20]]);
        assert_eq!(cost_of(&m, &d), ExtCost::Finite(4u128 << 60));
    }

    #[test]
    fn feasibility() {
        assert!(is_feasible_mvtsp(&i2(), &mat(&[&[0, 1], &[1, 0]])));
        assert!(!is_feasible_mvtsp(&i2(), &mat(&[&[1, 0], &[0, 1]])));
        let l = MvtspInstance::new(CostMatrix::filled(2, Some(1)), vec![1, 1]).unwrap();
        assert_eq!(check_mvtsp(&l, &mat(&[&[1, 0], &[0, 1]])), Err(Violation::NotConnected));
        assert!(is_feasible_mvtsp(&t3(), &mat(&[&[0, 1, 0], &[0, 0, 1], &[1, 0, 0]])));
        assert_eq!(
            check_mvtsp(&t3(), &mat(&[&[0, 1, 0], &[1, 0, 0], &[0, 0, 0]])),
            Err(Violation::DegreeMismatch(2))
        );
    }

    #[test]
    fn tours() {
        let tour = reconstruct_tour(&t3(), &mat(&[&[0, 1, 0], &[0, 0, 1], &[1, 0, 0]])).unwrap();
        assert_eq!(tour.0, vec![0, 1, 2]);

        let m = mat(&[&[1, 1], &[1, 0]]);
        let tour = reconstruct_tour(&i2l(), &m).unwrap();
        assert_eq!(tour.len(), 3);
        assert_eq!(tour.edge_multiset(2), m);

        let single = MvtspInstance::new(CostMatrix::filled(1, Some(4)), vec![3]).unwrap();
        let tour = reconstruct_tour(&single, &mat(&[&[3]])).unwrap();
        assert_eq!(tour.0, vec![0, 0, 0]);

        assert!(reconstruct_tour(&i2(), &mat(&[&[0, 1], &[0, 0]])).is_err());
    }

    #[test]
    fn outtree_sequences() {
        assert!(is_outtree_sequence(&[2, 0, 0], 0));
        assert!(!is_outtree_sequence(&[0, 1, 1], 0));
        assert!(!is_outtree_sequence(&[1, 1, 1], 0));
        assert!(is_outtree_sequence(&[0], 0));
    }

    #[test]
    fn outbranching_reachability() {
        let m = mat(&[&[0, 1, 0], &[0, 0, 1], &[0, 0, 0]]);
        assert!(support_has_outbranching(&m, 0));
        assert!(!support_has_outbranching(&m, 1));
        assert!(support_is_connected(&m));
    }
}
