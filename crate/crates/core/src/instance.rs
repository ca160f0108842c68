//! Problem instances and their validation.
//!
//! Two problem shapes are supported. A [`MvtspInstance`] asks for a closed
//! tour visiting every city `v` exactly `k(v)` times. A [`FdcsInstance`]
//! asks for an edge-multiplicity matrix with prescribed in/out degrees whose
//! support contains a spanning member of a connectivity [`Family`].

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Total cost of a multiplicity function. Wide enough for demands up to
/// `2^20` times costs up to `2^40` summed over any realistic matrix.
pub type Weight = u128;

/// A cost that may be infinite. `Finite` values order below `Infinite`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtCost {
    Finite(Weight),
    Infinite,
}

impl ExtCost {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtCost::Finite(_))
    }

    pub fn finite(self) -> Option<Weight> {
        match self {
            ExtCost::Finite(w) => Some(w),
            ExtCost::Infinite => None,
        }
    }

    pub fn saturating_add(self, other: ExtCost) -> ExtCost {
        match (self, other) {
            (ExtCost::Finite(a), ExtCost::Finite(b)) => match a.checked_add(b) {
                Some(s) => ExtCost::Finite(s),
                None => ExtCost::Infinite,
            },
            _ => ExtCost::Infinite,
        }
    }
}

impl fmt::Display for ExtCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtCost::Finite(w) => write!(f, "{w}"),
            ExtCost::Infinite => write!(f, "inf"),
        }
    }
}

/// Square matrix of edge costs; `None` marks an infinite (absent) edge.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CostMatrix {
    n: usize,
    cells: Vec<Option<u64>>,
}

impl CostMatrix {
    /// Builds a matrix from row-major cells. Panics if `cells.len() != n * n`.
    pub fn new(n: usize, cells: Vec<Option<u64>>) -> Self {
        assert_eq!(cells.len(), n * n, "cost matrix must be n x n");
        CostMatrix { n, cells }
    }

    pub fn from_rows(rows: Vec<Vec<Option<u64>>>) -> Result<Self, ValidationError> {
        let n = rows.len();
        let mut cells = Vec::with_capacity(n * n);
        for (u, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(ValidationError::ShapeMismatch(format!(
                    "cost row {u} has length {} but n = {n}",
                    row.len()
                )));
            }
            cells.extend(row);
        }
        Ok(CostMatrix { n, cells })
    }

    /// Every entry equal to `value`.
    pub fn filled(n: usize, value: Option<u64>) -> Self {
        CostMatrix {
            n,
            cells: vec![value; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Option<u64> {
        self.cells[u * self.n + v]
    }

    #[inline]
    pub fn is_finite(&self, u: usize, v: usize) -> bool {
        self.cells[u * self.n + v].is_some()
    }

    pub fn set(&mut self, u: usize, v: usize, cost: Option<u64>) {
        self.cells[u * self.n + v] = cost;
    }

    /// Largest finite entry, or 0 when every entry is infinite.
    pub fn max_finite(&self) -> u64 {
        self.cells.iter().flatten().copied().max().unwrap_or(0)
    }

    /// Sorted distinct finite entries.
    pub fn distinct_finite(&self) -> Vec<u64> {
        let mut values: Vec<u64> = self.cells.iter().flatten().copied().collect();
        values.sort_unstable();
        values.dedup();
        values
    }

    pub fn rows(&self) -> Vec<Vec<Option<u64>>> {
        self.cells.chunks(self.n.max(1)).map(|r| r.to_vec()).take(self.n).collect()
    }

    /// Applies `f` to every finite entry; `f` may turn an entry infinite.
    pub fn map_finite(&self, mut f: impl FnMut(u64) -> Option<u64>) -> CostMatrix {
        CostMatrix {
            n: self.n,
            cells: self.cells.iter().map(|c| c.and_then(&mut f)).collect(),
        }
    }
}

/// Connectivity requirement of a fixed-degree instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    /// The support must be weakly connected (contain a spanning oriented tree).
    OrientedTrees,
    /// The support must contain an outbranching rooted at the given vertex.
    OutbranchingRootedAt(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MvtspInstance {
    costs: CostMatrix,
    visits: Vec<u64>,
}

impl MvtspInstance {
    pub fn new(costs: CostMatrix, visits: Vec<u64>) -> Result<Self, ValidationError> {
        let n = costs.n();
        if n == 0 {
            return Err(ValidationError::EmptyInstance);
        }
        if visits.len() != n {
            return Err(ValidationError::ShapeMismatch(format!(
                "visits has length {} but n = {n}",
                visits.len()
            )));
        }
        if let Some(v) = visits.iter().position(|&k| k == 0) {
            return Err(ValidationError::ZeroVisit(v));
        }
        Ok(MvtspInstance { costs, visits })
    }

    pub fn n(&self) -> usize {
        self.costs.n()
    }

    pub fn costs(&self) -> &CostMatrix {
        &self.costs
    }

    pub fn visits(&self) -> &[u64] {
        &self.visits
    }

    /// Tour length, the sum of all visit counts.
    pub fn tour_length(&self) -> u64 {
        self.visits.iter().sum()
    }

    /// Largest finite distance.
    pub fn max_cost(&self) -> u64 {
        self.costs.max_finite()
    }

    /// The same problem as a fixed-degree instance with `in = out = k`.
    pub fn to_fdcs(&self, family: Family) -> FdcsInstance {
        FdcsInstance {
            costs: self.costs.clone(),
            in_demand: self.visits.clone(),
            out_demand: self.visits.clone(),
            family,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FdcsInstance {
    costs: CostMatrix,
    in_demand: Vec<u64>,
    out_demand: Vec<u64>,
    family: Family,
}

impl FdcsInstance {
    pub fn new(
        costs: CostMatrix,
        in_demand: Vec<u64>,
        out_demand: Vec<u64>,
        family: Family,
    ) -> Result<Self, ValidationError> {
        let n = costs.n();
        if n == 0 {
            return Err(ValidationError::EmptyInstance);
        }
        if in_demand.len() != n || out_demand.len() != n {
            return Err(ValidationError::ShapeMismatch(format!(
                "demand vectors must have length n = {n}"
            )));
        }
        let total_in: u128 = in_demand.iter().map(|&x| x as u128).sum();
        let total_out: u128 = out_demand.iter().map(|&x| x as u128).sum();
        if total_in != total_out {
            return Err(ValidationError::DemandMismatch {
                total_in,
                total_out,
            });
        }
        if let Family::OutbranchingRootedAt(r) = family {
            if r >= n {
                return Err(ValidationError::BadRoot(r));
            }
        }
        Ok(FdcsInstance {
            costs,
            in_demand,
            out_demand,
            family,
        })
    }

    pub fn n(&self) -> usize {
        self.costs.n()
    }

    pub fn costs(&self) -> &CostMatrix {
        &self.costs
    }

    pub fn in_demand(&self) -> &[u64] {
        &self.in_demand
    }

    pub fn out_demand(&self) -> &[u64] {
        &self.out_demand
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn root(&self) -> Option<usize> {
        match self.family {
            Family::OutbranchingRootedAt(r) => Some(r),
            Family::OrientedTrees => None,
        }
    }

    /// `M`: the largest single in- or out-demand.
    pub fn max_demand(&self) -> u64 {
        self.in_demand
            .iter()
            .chain(&self.out_demand)
            .copied()
            .max()
            .unwrap_or(0)
    }

    pub fn total_demand(&self) -> u64 {
        self.out_demand.iter().sum()
    }

    pub fn with_family(&self, family: Family) -> FdcsInstance {
        FdcsInstance {
            family,
            ..self.clone()
        }
    }

    pub fn with_costs(&self, costs: CostMatrix) -> FdcsInstance {
        assert_eq!(costs.n(), self.n());
        FdcsInstance {
            costs,
            ..self.clone()
        }
    }

    /// Returns the visit vector when this is a many-visits instance in disguise.
    pub fn as_visits(&self) -> Option<&[u64]> {
        (self.in_demand == self.out_demand && self.in_demand.iter().all(|&k| k > 0))
            .then_some(&self.in_demand[..])
    }
}

/// A validated instance of either kind.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Instance {
    Mvtsp(MvtspInstance),
    Fdcs(FdcsInstance),
}

impl Instance {
    pub fn n(&self) -> usize {
        match self {
            Instance::Mvtsp(i) => i.n(),
            Instance::Fdcs(i) => i.n(),
        }
    }

    pub fn costs(&self) -> &CostMatrix {
        match self {
            Instance::Mvtsp(i) => i.costs(),
            Instance::Fdcs(i) => i.costs(),
        }
    }

    /// Fixed-degree view; many-visits instances become rooted at vertex 0.
    pub fn to_fdcs(&self) -> FdcsInstance {
        match self {
            Instance::Mvtsp(i) => i.to_fdcs(Family::OutbranchingRootedAt(0)),
            Instance::Fdcs(i) => i.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("instance has no vertices")]
    EmptyInstance,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("negative cost at ({0}, {1})")]
    NegativeCost(usize, usize),
    #[error("negative demand at vertex {0}")]
    NegativeDemand(usize),
    #[error("vertex {0} has zero visits")]
    ZeroVisit(usize),
    #[error("total in-demand {total_in} differs from total out-demand {total_out}")]
    DemandMismatch { total_in: u128, total_out: u128 },
    #[error("root {0} is not a vertex")]
    BadRoot(usize),
    #[error("family `outbranching` requires a root")]
    MissingRoot,
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("instance must give either `visits` or both `in` and `out`")]
    AmbiguousKind,
}

/// JSON-shaped instance description, prior to validation.
///
/// Costs are signed so that negative entries surface as [`ValidationError`]s
/// instead of parse failures; `null` stands for an infinite cost.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawInstance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n: usize,
    pub costs: Vec<Vec<Option<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visits: Option<Vec<i64>>,
    #[serde(rename = "in", default, skip_serializing_if = "Option::is_none")]
    pub in_demand: Option<Vec<i64>>,
    #[serde(rename = "out", default, skip_serializing_if = "Option::is_none")]
    pub out_demand: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
}

fn nonnegative(values: &[i64], err: impl Fn(usize) -> ValidationError) -> Result<Vec<u64>, ValidationError> {
    values
        .iter()
        .enumerate()
        .map(|(i, &x)| u64::try_from(x).map_err(|_| err(i)))
        .collect()
}

/// Checks a raw description and produces a typed instance.
pub fn validate(raw: &RawInstance) -> Result<Instance, ValidationError> {
    if raw.n == 0 {
        return Err(ValidationError::EmptyInstance);
    }
    if raw.costs.len() != raw.n {
        return Err(ValidationError::ShapeMismatch(format!(
            "costs has {} rows but n = {}",
            raw.costs.len(),
            raw.n
        )));
    }
    let mut rows = Vec::with_capacity(raw.n);
    for (u, row) in raw.costs.iter().enumerate() {
        let mut out = Vec::with_capacity(row.len());
        for (v, c) in row.iter().enumerate() {
            out.push(match c {
                None => None,
                Some(x) => Some(u64::try_from(*x).map_err(|_| ValidationError::NegativeCost(u, v))?),
            });
        }
        rows.push(out);
    }
    let costs = CostMatrix::from_rows(rows)?;

    match (&raw.visits, &raw.in_demand, &raw.out_demand) {
        (Some(visits), None, None) => {
            if raw.root.is_some() || raw.family.is_some() {
                return Err(ValidationError::AmbiguousKind);
            }
            if visits.len() != raw.n {
                return Err(ValidationError::ShapeMismatch(format!(
                    "visits has length {} but n = {}",
                    visits.len(),
                    raw.n
                )));
            }
            let visits = nonnegative(visits, ValidationError::NegativeDemand)?;
            Ok(Instance::Mvtsp(MvtspInstance::new(costs, visits)?))
        }
        (None, Some(ins), Some(outs)) => {
            let ins = nonnegative(ins, ValidationError::NegativeDemand)?;
            let outs = nonnegative(outs, ValidationError::NegativeDemand)?;
            let family = match (raw.family.as_deref(), raw.root) {
                (None, None) | (Some("oriented-trees"), None) => Family::OrientedTrees,
                (None, Some(r)) | (Some("outbranching"), Some(r)) => Family::OutbranchingRootedAt(r),
                (Some("outbranching"), None) => return Err(ValidationError::MissingRoot),
                (Some("oriented-trees"), Some(_)) => return Err(ValidationError::AmbiguousKind),
                (Some(other), _) => return Err(ValidationError::UnknownFamily(other.to_string())),
            };
            Ok(Instance::Fdcs(FdcsInstance::new(costs, ins, outs, family)?))
        }
        _ => Err(ValidationError::AmbiguousKind),
    }
}

fn signed_rows(costs: &CostMatrix) -> Vec<Vec<Option<i64>>> {
    costs
        .rows()
        .into_iter()
        .map(|r| r.into_iter().map(|c| c.map(|x| x as i64)).collect())
        .collect()
}

fn signed(values: &[u64]) -> Vec<i64> {
    values.iter().map(|&x| x as i64).collect()
}

impl From<&Instance> for RawInstance {
    fn from(inst: &Instance) -> Self {
        match inst {
            Instance::Mvtsp(i) => RawInstance {
                n: i.n(),
                costs: signed_rows(i.costs()),
                visits: Some(signed(i.visits())),
                ..Default::default()
            },
            Instance::Fdcs(i) => RawInstance {
                n: i.n(),
                costs: signed_rows(i.costs()),
                in_demand: Some(signed(i.in_demand())),
                out_demand: Some(signed(i.out_demand())),
                root: i.root(),
                family: Some(
                    match i.family() {
                        Family::OrientedTrees => "oriented-trees",
                        Family::OutbranchingRootedAt(_) => "outbranching",
                    }
                    .to_string(),
                ),
                ..Default::default()
            },
        }
    }
}
