//! Independent checking of a claimed solution against its instance.

use thiserror::Error;

use crate::instance::{ExtCost, Instance, Weight};
use crate::multiplicity::{check_fdcs, check_mvtsp, cost_of, Multiplicity, Tour, Violation};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum VerifyFailure {
    #[error(transparent)]
    Infeasible(#[from] Violation),
    #[error("claimed cost {claimed} but the matrix costs {actual}")]
    CostMismatch { claimed: Weight, actual: Weight },
    #[error("tour does not traverse the claimed multiplicities")]
    TourMismatch,
}

impl VerifyFailure {
    /// Stable kebab-case name used in reports.
    pub fn reason(&self) -> &'static str {
        match self {
            VerifyFailure::Infeasible(v) => v.reason(),
            VerifyFailure::CostMismatch { .. } => "cost-mismatch",
            VerifyFailure::TourMismatch => "tour-mismatch",
        }
    }
}

/// Checks shape, finite edges, degrees, connectivity, then the claimed cost
/// and tour. Returns the recomputed cost.
pub fn verify_solution(
    inst: &Instance,
    m: &Multiplicity,
    claimed_cost: Weight,
    tour: Option<&Tour>,
) -> Result<Weight, VerifyFailure> {
    match inst {
        Instance::Mvtsp(i) => check_mvtsp(i, m)?,
        Instance::Fdcs(i) => check_fdcs(i, m)?,
    }
    let ExtCost::Finite(actual) = cost_of(m, inst.costs()) else {
        unreachable!("feasible solutions use finite edges only");
    };
    if actual != claimed_cost {
        return Err(VerifyFailure::CostMismatch { claimed: claimed_cost, actual });
    }
    if let Some(t) = tour {
        if t.0.iter().any(|&v| v >= inst.n()) || t.edge_multiset(inst.n()) != *m {
            return Err(VerifyFailure::TourMismatch);
        }
    }
    Ok(actual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{CostMatrix, MvtspInstance};

    fn t3() -> Instance {
        let mut d = CostMatrix::filled(3, Some(1));
        for v in 0..3 {
            d.set(v, v, None);
        }
        Instance::Mvtsp(MvtspInstance::new(d, vec![1; 3]).unwrap())
    }

    fn cycle() -> Multiplicity {
        Multiplicity::from_rows(&[vec![0, 1, 0], vec![0, 0, 1], vec![1, 0, 0]]).unwrap()
    }

    #[test]
    fn accepts_optimum() {
        assert_eq!(verify_solution(&t3(), &cycle(), 3, Some(&Tour(vec![0, 1, 2]))), Ok(3));
    }

    #[test]
    fn named_failures() {
        let fail = |m: &Multiplicity, c, t: Option<&Tour>| verify_solution(&t3(), m, c, t).unwrap_err().reason();
        assert_eq!(fail(&cycle(), 4, None), "cost-mismatch");
        assert_eq!(fail(&Multiplicity::zeros(2), 0, None), "shape-mismatch");
        let looped = Multiplicity::from_rows(&[vec![1, 0, 0], vec![0, 0, 1], vec![0, 1, 0]]).unwrap();
        assert_eq!(fail(&looped, 3, None), "infinite-edge");
        assert_eq!(fail(&Multiplicity::zeros(3), 0, None), "degree-mismatch");
        assert_eq!(fail(&cycle(), 3, Some(&Tour(vec![0, 2, 1]))), "tour-mismatch");
    }

    #[test]
    fn disconnected_support() {
        let mut d = CostMatrix::filled(4, Some(1));
        for v in 0..4 {
            d.set(v, v, None);
        }
        let inst = Instance::Mvtsp(MvtspInstance::new(d, vec![1; 4]).unwrap());
        let m = Multiplicity::from_rows(&[vec![0, 1, 0, 0], vec![1, 0, 0, 0], vec![0, 0, 0, 1], vec![0, 0, 1, 0]])
            .unwrap();
        assert_eq!(verify_solution(&inst, &m, 4, None).unwrap_err().reason(), "not-connected");
    }
}
