//! Demand reduction for fixed-degree connected problems.
//!
//! An optimal relaxed solution `r` (degrees only) is computed by flow. Any
//! edge that `r` uses more than `n` times is also used heavily by some
//! connected optimum, so all but `n` of those copies can be fixed in advance.
//! What remains has every demand at most `n^2`.

use crate::flow::solve_fixed_degree_subgraph;
use crate::instance::FdcsInstance;
use crate::multiplicity::Multiplicity;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelResult {
    pub reduced: FdcsInstance,
    /// Edge copies fixed in advance; add back with [`lift`].
    pub offset: Multiplicity,
}

/// Edges in a spanning oriented tree or outbranching on `n` vertices.
fn tree_size(n: usize) -> u64 {
    n as u64 - 1
}

/// Reduces `inst` to an equivalent instance with demands at most `n^2`.
/// `None` when even the degree relaxation is infeasible.
pub fn kernelize(inst: &FdcsInstance) -> Option<KernelResult> {
    let n = inst.n();
    let relaxed = solve_fixed_degree_subgraph(inst.costs(), inst.in_demand(), inst.out_demand())?;
    let s = tree_size(n);
    let mut offset = Multiplicity::zeros(n);
    for (u, v, r) in relaxed.support() {
        let fixed = r.saturating_sub(s).saturating_sub(1);
        offset.set(u, v, fixed);
    }
    let in_reduced: Vec<u64> = (0..n).map(|v| inst.in_demand()[v] - offset.in_degree(v)).collect();
    let out_reduced: Vec<u64> = (0..n).map(|v| inst.out_demand()[v] - offset.out_degree(v)).collect();
    let reduced = FdcsInstance::new(inst.costs().clone(), in_reduced, out_reduced, inst.family())
        .expect("offset removes equal in and out totals");
    Some(KernelResult { reduced, offset })
}

/// Solution of the original instance from a solution of the reduced one.
pub fn lift(reduced_solution: &Multiplicity, offset: &Multiplicity) -> Multiplicity {
    reduced_solution.plus(offset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{CostMatrix, ExtCost, Family};
    use crate::multiplicity::cost_of;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn triangle() -> CostMatrix {
        let mut d = CostMatrix::filled(3, Some(1));
        for v in 0..3 {
            d.set(v, v, None);
        }
        d
    }

    #[test]
    fn small_demands_are_untouched() {
        let inst = FdcsInstance::new(triangle(), vec![1; 3], vec![1; 3], Family::OrientedTrees).unwrap();
        let k = kernelize(&inst).unwrap();
        assert!(k.offset.is_zero());
        assert_eq!(k.reduced, inst);
    }

    #[test]
    fn huge_demands_shrink() {
        let big = 1_000_000;
        let inst =
            FdcsInstance::new(triangle(), vec![big; 3], vec![big; 3], Family::OutbranchingRootedAt(0)).unwrap();
        let k = kernelize(&inst).unwrap();
        assert!(k.reduced.max_demand() <= 9);
        assert_eq!(k.reduced.family(), Family::OutbranchingRootedAt(0));
        // any degree-exact solution on the triangle costs the total demand
        assert_eq!(cost_of(&k.offset, &triangle()).finite().unwrap() + k.reduced.total_demand() as u128, 3 * big as u128);
    }

    #[test]
    fn infeasible_relaxation() {
        let d = CostMatrix::from_rows(vec![vec![None, Some(2)], vec![None, None]]).unwrap();
        let inst = FdcsInstance::new(d, vec![1, 1], vec![1, 1], Family::OrientedTrees).unwrap();
        assert_eq!(kernelize(&inst), None);
    }

    #[test]
    fn lift_is_pointwise_sum() {
        let d = CostMatrix::filled(2, Some(3));
        let a = Multiplicity::from_rows(&[vec![1, 2], vec![0, 4]]).unwrap();
        let z = Multiplicity::zeros(2);
        assert_eq!(lift(&a, &z), a);
        assert_eq!(lift(&z, &a), a);
        let both = lift(&a, &a);
        assert_eq!(cost_of(&both, &d), ExtCost::Finite(2 * 21));
    }

    #[test]
    fn demand_bound_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let n = rng.gen_range(1..=5);
            let cells = (0..n * n)
                .map(|_| rng.gen_bool(0.8).then(|| rng.gen_range(0..=9)))
                .collect();
            let d = CostMatrix::new(n, cells);
            let k: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=1_000_000)).collect();
            let inst = FdcsInstance::new(d, k.clone(), k, Family::OrientedTrees).unwrap();
            if let Some(res) = kernelize(&inst) {
                assert!(res.reduced.max_demand() <= (n * n) as u64);
                for v in 0..n {
                    assert_eq!(res.reduced.in_demand()[v] + res.offset.in_degree(v), inst.in_demand()[v]);
                    assert_eq!(res.reduced.out_demand()[v] + res.offset.out_degree(v), inst.out_demand()[v]);
                }
            }
        }
    }
}
