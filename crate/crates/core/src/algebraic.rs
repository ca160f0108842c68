//! Randomized engine over GF(2^t).
//!
//! Demands are expanded into a bipartite graph with one node per unit of
//! in- or out-demand; its perfect matchings are exactly the degree-exact
//! multigraphs. Summing `det(A_X) * det(A_{V \ X})` over all vertex sets `X`
//! containing vertex 0 counts every matching once per split of its connected
//! components that keeps vertex 0's component on the `X` side, which is
//! `2^(components - 1)` times. In characteristic two only connected matchings
//! survive.
//!
//! For weights each matrix entry carries `y^cost`. The coefficient of `y^w`
//! is nonzero (as a polynomial in the edge variables) exactly when a
//! connected solution of weight `w` exists. Coefficients are recovered by
//! evaluating at many `y` and interpolating. Before interpolating, the known
//! range `[W_lo, W_hi]` of perfect-matching weights is used to shift the
//! polynomial down so only `W_hi - W_lo + 1` evaluations are needed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{SolveError, Solved};
use crate::flow::{min_cost_max_flow, FlowNetwork};
use crate::gf::{det_in_place, shared_interpolator, FieldCtx, FieldElement};
use crate::instance::{CostMatrix, Family, FdcsInstance, MvtspInstance, Weight};
use crate::kernel::{kernelize, lift};
use crate::multiplicity::{check_fdcs, cost_of, support_is_connected, Multiplicity};

/// Largest vertex count; the subset sum is exponential in it.
pub const MAX_VERTICES: usize = 24;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AlgebraicError {
    #[error("GF(2^{t}) is too small for {points} interpolation points")]
    FieldTooSmall { t: u32, points: u128 },
    #[error("witness extraction made no progress")]
    ExtractionStalled,
}

/// One edge `u^O_i -- v^I_j` of the blow-up.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlowupEdge {
    pub from: usize,
    pub to: usize,
    /// Global index of the out-copy of `from`.
    pub out_copy: usize,
    /// Global index of the in-copy of `to`.
    pub in_copy: usize,
    pub weight: u64,
}

/// Bipartite graph with `out(v)` out-copies and `in(v)` in-copies of every
/// vertex, and every copy pair joined when the underlying edge is finite.
/// Edge indices double as variable identifiers.
#[derive(Clone, Debug)]
pub struct BlowupGraph {
    n: usize,
    out_start: Vec<usize>,
    in_start: Vec<usize>,
    edges: Vec<BlowupEdge>,
    max_weight: u64,
}

fn prefix_sums(xs: &[u64]) -> Vec<usize> {
    let mut out = Vec::with_capacity(xs.len() + 1);
    out.push(0);
    for &x in xs {
        out.push(out.last().unwrap() + x as usize);
    }
    out
}

/// The blow-up of `(d, in, out)`.
pub fn build_blowup(d: &CostMatrix, in_demand: &[u64], out_demand: &[u64]) -> BlowupGraph {
    let n = d.n();
    assert_eq!(in_demand.len(), n);
    assert_eq!(out_demand.len(), n);
    let out_start = prefix_sums(out_demand);
    let in_start = prefix_sums(in_demand);
    let mut edges = Vec::new();
    let mut max_weight = 0;
    for u in 0..n {
        for v in 0..n {
            let Some(w) = d.get(u, v) else { continue };
            max_weight = max_weight.max(w);
            for out_copy in out_start[u]..out_start[u + 1] {
                for in_copy in in_start[v]..in_start[v + 1] {
                    edges.push(BlowupEdge { from: u, to: v, out_copy, in_copy, weight: w });
                }
            }
        }
    }
    BlowupGraph { n, out_start, in_start, edges, max_weight }
}

impl BlowupGraph {
    pub fn from_instance(inst: &FdcsInstance) -> Self {
        build_blowup(inst.costs(), inst.in_demand(), inst.out_demand())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `|I|`, the number of in-copies.
    pub fn in_size(&self) -> usize {
        self.in_start[self.n]
    }

    /// `|O|`, the number of out-copies.
    pub fn out_size(&self) -> usize {
        self.out_start[self.n]
    }

    pub fn edges(&self) -> &[BlowupEdge] {
        &self.edges
    }

    /// Largest edge weight, or 0 without edges.
    pub fn max_weight(&self) -> u64 {
        self.max_weight
    }

    pub fn out_copies(&self, v: usize) -> std::ops::Range<usize> {
        self.out_start[v]..self.out_start[v + 1]
    }

    pub fn in_copies(&self, v: usize) -> std::ops::Range<usize> {
        self.in_start[v]..self.in_start[v + 1]
    }

    fn side_sizes(&self, mask: u64) -> (usize, usize) {
        (0..self.n)
            .filter(|&v| mask >> v & 1 == 1)
            .fold((0, 0), |(o, i), v| (o + self.out_copies(v).len(), i + self.in_copies(v).len()))
    }
}

/// Multiplicity matrix counting the matching's edges per vertex pair.
pub fn contract_matching(b: &BlowupGraph, matching: &[usize]) -> Multiplicity {
    let mut m = Multiplicity::zeros(b.n());
    for &e in matching {
        let edge = b.edges[e];
        m.add(edge.from, edge.to, 1);
    }
    m
}

/// Whether the edge set is a perfect matching whose contraction is
/// connected.
pub fn is_connected_perfect_matching(b: &BlowupGraph, matching: &[usize]) -> bool {
    if b.in_size() != b.out_size() || matching.len() != b.in_size() {
        return false;
    }
    let mut out_used = vec![false; b.out_size()];
    let mut in_used = vec![false; b.in_size()];
    for &e in matching {
        let edge = b.edges[e];
        if std::mem::replace(&mut out_used[edge.out_copy], true)
            || std::mem::replace(&mut in_used[edge.in_copy], true)
        {
            return false;
        }
    }
    support_is_connected(&contract_matching(b, matching))
}

/// Values of the edge variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    ctx: FieldCtx,
    values: Vec<FieldElement>,
}

impl Assignment {
    /// Uniform values over the whole field for every edge.
    pub fn random(ctx: FieldCtx, edges: usize, rng: &mut ChaCha8Rng) -> Self {
        let values = (0..edges).map(|_| ctx.random(rng)).collect();
        Assignment { ctx, values }
    }

    pub fn from_values(ctx: FieldCtx, values: Vec<FieldElement>) -> Self {
        Assignment { ctx, values }
    }

    pub fn ctx(&self) -> FieldCtx {
        self.ctx
    }

    pub fn values(&self) -> &[FieldElement] {
        &self.values
    }

    /// The same values with every edge outside `keep` set to zero.
    pub fn restricted(&self, keep: &[bool]) -> Assignment {
        let values = self
            .values
            .iter()
            .zip(keep)
            .map(|(&x, &k)| if k { x } else { FieldElement::ZERO })
            .collect();
        Assignment { ctx: self.ctx, values }
    }
}

/// Evaluates the cut-and-count sum for one graph and reuses its buffers.
struct Evaluator<'a> {
    b: &'a BlowupGraph,
    ctx: FieldCtx,
    weights: Vec<u64>,
    weight_index: Vec<usize>,
    matrix: Vec<FieldElement>,
    scratch: Vec<FieldElement>,
    powers: Vec<FieldElement>,
}

impl<'a> Evaluator<'a> {
    fn new(b: &'a BlowupGraph, ctx: FieldCtx) -> Self {
        assert!(b.n <= MAX_VERTICES, "too many vertices for the subset sum");
        let mut weights: Vec<u64> = b.edges.iter().map(|e| e.weight).collect();
        weights.sort_unstable();
        weights.dedup();
        let weight_index = b
            .edges
            .iter()
            .map(|e| weights.binary_search(&e.weight).unwrap())
            .collect();
        let powers = vec![FieldElement::ONE; weights.len()];
        Evaluator {
            b,
            ctx,
            weights,
            weight_index,
            matrix: vec![FieldElement::ZERO; b.out_size() * b.in_size()],
            scratch: Vec::new(),
            powers,
        }
    }

    /// Fills the `|O| x |I|` matrix with `x_e * y^w(e)` (or `x_e` when `y`
    /// is absent).
    fn load(&mut self, x: &[FieldElement], y: Option<FieldElement>) {
        let ctx = self.ctx;
        if let Some(y) = y {
            for (p, &w) in self.powers.iter_mut().zip(&self.weights) {
                *p = ctx.pow(y, w as u128);
            }
        }
        self.matrix.fill(FieldElement::ZERO);
        let cols = self.b.in_size();
        for (e, edge) in self.b.edges.iter().enumerate() {
            if x[e].is_zero() {
                continue;
            }
            let value = match y {
                Some(_) => ctx.mul(x[e], self.powers[self.weight_index[e]]),
                None => x[e],
            };
            self.matrix[edge.out_copy * cols + edge.in_copy] = value;
        }
    }

    /// Determinant of the loaded matrix restricted to the copies of `mask`.
    fn det_of(&mut self, mask: u64) -> FieldElement {
        let (rows, cols) = self.b.side_sizes(mask);
        if rows != cols {
            return FieldElement::ZERO;
        }
        let dim = rows;
        self.scratch.clear();
        let width = self.b.in_size();
        let members: Vec<usize> = (0..self.b.n).filter(|&v| mask >> v & 1 == 1).collect();
        for &u in &members {
            for r in self.b.out_copies(u) {
                for &v in &members {
                    let row = &self.matrix[r * width..(r + 1) * width];
                    self.scratch.extend_from_slice(&row[self.b.in_copies(v)]);
                }
            }
        }
        det_in_place(&self.ctx, &mut self.scratch, dim)
    }

    /// The cut-and-count sum for the loaded matrix, with vertex 0 pinned to
    /// the first side.
    fn subset_sum(&mut self) -> FieldElement {
        let n = self.b.n;
        if n == 0 {
            return FieldElement::ONE;
        }
        let full = (1u64 << n) - 1;
        let mut total = FieldElement::ZERO;
        for rest in 0..(1u64 << (n - 1)) {
            let x = 1 | rest << 1;
            let a = self.det_of(x);
            if a.is_zero() {
                continue;
            }
            let c = self.det_of(full ^ x);
            total = self.ctx.add(total, self.ctx.mul(a, c));
        }
        total
    }

    fn eval(&mut self, x: &[FieldElement], y: Option<FieldElement>) -> FieldElement {
        self.load(x, y);
        self.subset_sum()
    }
}

/// Determinant of the edge-variable matrix between the copies of the
/// vertices in `mask` (a bitmask over vertices).
pub fn eval_px(b: &BlowupGraph, mask: u64, asg: &Assignment) -> FieldElement {
    let mut ev = Evaluator::new(b, asg.ctx);
    ev.load(&asg.values, None);
    ev.det_of(mask)
}

/// The cut-and-count polynomial at `asg`: the sum over connected perfect
/// matchings of the product of their edge values.
pub fn eval_p(b: &BlowupGraph, asg: &Assignment) -> FieldElement {
    Evaluator::new(b, asg.ctx).eval(&asg.values, None)
}

/// Field for the unweighted decision: `2^t >= 2 n M`, and `t >= 2`.
pub fn decision_field(b: &BlowupGraph) -> FieldCtx {
    let m = (0..b.n)
        .map(|v| b.out_copies(v).len().max(b.in_copies(v).len()))
        .max()
        .unwrap_or(0)
        .max(1);
    let t = FieldCtx::degree_for_size(2 * (b.n as u128) * m as u128, 2);
    FieldCtx::new(t).expect("decision field degree is small")
}

/// Field for weighted evaluation: large enough both for the
/// `|I| * D + 1` interpolation points and for error at most one half.
pub fn weighted_field(b: &BlowupGraph) -> FieldCtx {
    let i = b.in_size() as u128;
    let d = b.max_weight as u128;
    let size = (2 * i * (d + 1)).max(i * d + 2);
    let t = FieldCtx::degree_for_size(size, 1);
    FieldCtx::new(t).expect("weighted field degree fits in 63 bits")
}

/// One-sided test for a connected perfect matching; "yes" is always right.
pub fn decide_connected_pm(b: &BlowupGraph, trials: u32, seed: u64) -> bool {
    assert!(trials >= 1);
    if b.in_size() != b.out_size() {
        return false;
    }
    let ctx = decision_field(b);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ev = Evaluator::new(b, ctx);
    (0..trials).any(|_| {
        let asg = Assignment::random(ctx, b.edges.len(), &mut rng);
        !ev.eval(&asg.values, None).is_zero()
    })
}

/// Minimum and maximum weight of a perfect matching using only the edges in
/// `keep`, or `None` if there is none.
pub fn matching_weight_range(b: &BlowupGraph, keep: &[bool]) -> Option<(Weight, Weight)> {
    let (o, i) = (b.out_size(), b.in_size());
    if o != i {
        return None;
    }
    let top = b.max_weight;
    let solve = |flip: bool| {
        let mut net = FlowNetwork::new(2 + o + i, 0, 1);
        for c in 0..o {
            net.add_arc(0, 2 + c, Some(1), 0);
        }
        for c in 0..i {
            net.add_arc(2 + o + c, 1, Some(1), 0);
        }
        for (e, edge) in b.edges.iter().enumerate() {
            if keep[e] {
                let w = if flip { top - edge.weight } else { edge.weight };
                net.add_arc(2 + edge.out_copy, 2 + o + edge.in_copy, Some(1), w);
            }
        }
        let r = min_cost_max_flow(&net);
        (r.value as usize == i).then_some(r.cost)
    };
    let lo = solve(false)?;
    let hi = i as Weight * top as Weight - solve(true)?;
    Some((lo, hi))
}

/// Point count actually used for `needed` points: rounded up on a coarse
/// geometric grid so interpolators are shared between queries.
fn grid_points(needed: usize) -> usize {
    let mut g = 1usize;
    while g < needed {
        g = (g + 1).max(g + g / 4);
    }
    g
}

/// Coefficients `R'_0 .. R'_{|I| D}` of the weighted cut-and-count
/// polynomial at the edge values of `asg`.
pub fn eval_weighted_coeffs(b: &BlowupGraph, asg: &Assignment) -> Result<Vec<FieldElement>, AlgebraicError> {
    let ctx = asg.ctx;
    let len = b.in_size() as u128 * b.max_weight as u128 + 1;
    if len >= 1u128 << ctx.t() {
        return Err(AlgebraicError::FieldTooSmall { t: ctx.t(), points: len });
    }
    let mut coeffs = vec![FieldElement::ZERO; len as usize];
    let Some((lo, hi)) = matching_weight_range(b, &vec![true; b.edges.len()]) else {
        return Ok(coeffs);
    };
    let mut ev = Evaluator::new(b, ctx);
    let ys = shifted_values(&mut ev, &asg.values, lo, (hi - lo + 1) as usize);
    let interp = shared_interpolator(ctx, ys.len());
    for (j, c) in interp.coefficients(&ys).into_iter().enumerate() {
        if !c.is_zero() {
            coeffs[lo as usize + j] = c;
        }
    }
    Ok(coeffs)
}

/// Values of `P(y) / y^lo` at the grid points `1, 2, ...`.
fn shifted_values(ev: &mut Evaluator<'_>, x: &[FieldElement], lo: Weight, needed: usize) -> Vec<FieldElement> {
    let ctx = ev.ctx;
    let points = grid_points(needed).min((1usize << ctx.t().min(62)) - 1);
    (1..=points as u64)
        .map(|i| {
            let y = ctx.element(i);
            let p = ev.eval(x, Some(y));
            if p.is_zero() || lo == 0 {
                return p;
            }
            let shift = ctx.pow(ctx.inv(y).expect("nonzero point"), lo);
            ctx.mul(p, shift)
        })
        .collect()
}

/// Randomized queries about connected perfect matchings of given weight
/// inside edge subsets of one blow-up.
pub struct WeightOracle<'a> {
    ev: Evaluator<'a>,
    rng: ChaCha8Rng,
    amplification: u32,
    queries: u64,
}

impl<'a> WeightOracle<'a> {
    pub fn new(b: &'a BlowupGraph, seed: u64, amplification: u32) -> Self {
        WeightOracle {
            ev: Evaluator::new(b, weighted_field(b)),
            rng: ChaCha8Rng::seed_from_u64(seed),
            amplification: amplification.max(1),
            queries: 0,
        }
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    fn fresh_values(&mut self, keep: &[bool]) -> Vec<FieldElement> {
        let ctx = self.ev.ctx;
        keep.iter()
            .map(|&k| {
                let x = ctx.random(&mut self.rng);
                if k { x } else { FieldElement::ZERO }
            })
            .collect()
    }

    /// Smallest weight whose coefficient is nonzero at one random point, or
    /// `None` if all are zero there.
    pub fn lowest_weight(&mut self, keep: &[bool]) -> Option<Weight> {
        let (lo, hi) = matching_weight_range(self.ev.b, keep)?;
        let x = self.fresh_values(keep);
        let ys = shifted_values(&mut self.ev, &x, lo, (hi - lo + 1) as usize);
        let interp = shared_interpolator(self.ev.ctx, ys.len());
        interp.lowest_nonzero(&ys).map(|j| lo + j as Weight)
    }

    /// Whether `keep` contains a connected perfect matching of weight
    /// `target`. "Yes" is always right; "no" errs with probability at most
    /// `2^-amplification`.
    pub fn contains(&mut self, keep: &[bool], target: Weight) -> bool {
        self.queries += 1;
        let Some((lo, hi)) = matching_weight_range(self.ev.b, keep) else {
            return false;
        };
        if target < lo || target > hi {
            return false;
        }
        let needed = (hi - lo + 1) as usize;
        let interp = shared_interpolator(self.ev.ctx, grid_points(needed));
        let row = interp.coefficient_row((target - lo) as usize);
        for _ in 0..self.amplification {
            let x = self.fresh_values(keep);
            let ys = shifted_values(&mut self.ev, &x, lo, needed);
            if !interp.dot(&row, &ys).is_zero() {
                return true;
            }
        }
        false
    }
}

#[derive(Clone, Debug)]
pub struct ExtractOptions {
    pub amplification: u32,
    /// Try dropping all copies of a vertex pair at once before going edge
    /// by edge.
    pub pair_pass: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions { amplification: 2, pair_pass: true }
    }
}

/// Edge ids of a connected perfect matching of weight `target`, found by
/// deleting edges the oracle says are unnecessary.
pub fn extract_witness(
    b: &BlowupGraph,
    target: Weight,
    seed: u64,
    opts: &ExtractOptions,
) -> Result<Vec<usize>, AlgebraicError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut oracle = WeightOracle::new(b, rand::Rng::gen(&mut rng), opts.amplification);
    let mut keep = vec![true; b.edges.len()];
    let goal = b.in_size();
    let mut alive = b.edges.len();

    if opts.pair_pass {
        let n = b.n;
        let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (0..n).map(move |v| (u, v))).collect();
        pairs.shuffle(&mut rng);
        for (u, v) in pairs {
            let ids: Vec<usize> = (0..b.edges.len())
                .filter(|&e| keep[e] && b.edges[e].from == u && b.edges[e].to == v)
                .collect();
            if ids.is_empty() || alive - ids.len() < goal {
                continue;
            }
            ids.iter().for_each(|&e| keep[e] = false);
            if oracle.contains(&keep, target) {
                alive -= ids.len();
            } else {
                ids.iter().for_each(|&e| keep[e] = true);
            }
        }
    }

    while alive > goal {
        let mut order: Vec<usize> = (0..b.edges.len()).filter(|&e| keep[e]).collect();
        order.shuffle(&mut rng);
        let before = alive;
        for e in order {
            if alive == goal {
                break;
            }
            keep[e] = false;
            if oracle.contains(&keep, target) {
                alive -= 1;
            } else {
                keep[e] = true;
            }
        }
        if alive == before {
            return Err(AlgebraicError::ExtractionStalled);
        }
    }

    let witness: Vec<usize> = (0..b.edges.len()).filter(|&e| keep[e]).collect();
    let weight: Weight = witness.iter().map(|&e| b.edges[e].weight as Weight).sum();
    if weight != target || !is_connected_perfect_matching(b, &witness) {
        return Err(AlgebraicError::ExtractionStalled);
    }
    Ok(witness)
}

/// Independent evaluations needed so that a one-sided test with error at
/// most 1/2 reaches `confidence`.
pub fn runs_for_confidence(confidence: f64) -> u32 {
    if confidence.is_nan() || confidence <= 0.0 {
        return 1;
    }
    if confidence >= 1.0 {
        return 64;
    }
    ((1.0 / (1.0 - confidence)).log2().ceil() as u32).clamp(1, 64)
}

#[derive(Clone, Debug)]
pub struct AlgebraicOptions {
    pub seed: u64,
    pub confidence: f64,
    pub extract: ExtractOptions,
    /// Fresh-seed attempts when extraction or verification fails.
    pub retries: u32,
    pub kernelize: bool,
}

impl Default for AlgebraicOptions {
    fn default() -> Self {
        AlgebraicOptions {
            seed: 0,
            confidence: 0.99,
            extract: ExtractOptions::default(),
            retries: 8,
            kernelize: true,
        }
    }
}

/// Many-visits solve: the instance as a connected fixed-degree problem.
pub fn solve_algebraic(inst: &MvtspInstance, opts: &AlgebraicOptions) -> Result<Solved, SolveError> {
    solve_algebraic_fdcs(&inst.to_fdcs(Family::OrientedTrees), opts)
}

/// Connected fixed-degree solve. Rooted families are accepted when demands
/// are balanced, since a connected balanced multigraph has an outbranching
/// from every vertex.
pub fn solve_algebraic_fdcs(inst: &FdcsInstance, opts: &AlgebraicOptions) -> Result<Solved, SolveError> {
    if inst.root().is_some() && inst.in_demand() != inst.out_demand() {
        return Err(SolveError::Unsupported(
            "rooted outbranchings with unbalanced demands".into(),
        ));
    }
    if inst.n() > MAX_VERTICES {
        return Err(SolveError::Unsupported(format!("at most {MAX_VERTICES} vertices")));
    }
    let (reduced, offset) = if opts.kernelize {
        let k = kernelize(inst).ok_or(SolveError::NoSolution)?;
        (k.reduced, k.offset)
    } else {
        (inst.clone(), Multiplicity::zeros(inst.n()))
    };
    let b = BlowupGraph::from_instance(&reduced);
    let everything = vec![true; b.edges.len()];
    if matching_weight_range(&b, &everything).is_none() {
        return Err(SolveError::NoSolution);
    }

    let mut seeds = ChaCha8Rng::seed_from_u64(opts.seed);
    let runs = runs_for_confidence(opts.confidence);
    let mut oracle = WeightOracle::new(&b, rand::Rng::gen(&mut seeds), 1);
    let target = (0..runs)
        .filter_map(|_| oracle.lowest_weight(&everything))
        .min()
        .ok_or(SolveError::NoSolution)?;

    for _ in 0..opts.retries.max(1) {
        let Ok(witness) = extract_witness(&b, target, rand::Rng::gen(&mut seeds), &opts.extract) else {
            continue;
        };
        let m = lift(&contract_matching(&b, &witness), &offset);
        if check_fdcs(inst, &m).is_ok() {
            let cost = cost_of(&m, inst.costs()).finite().expect("verified solutions are finite");
            return Ok(Solved { cost, multiplicity: m, memo_states: None });
        }
    }
    Err(SolveError::RetriesExhausted(opts.retries.max(1)))
}
