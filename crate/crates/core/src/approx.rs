//! `(1 + eps)`-approximation by guessing the most expensive edge of an
//! optimum and rounding costs down to a small range for the algebraic
//! engine.

use num_bigint::BigUint;
use num_traits::float::FloatCore;
use num_traits::ToPrimitive;

use crate::algebraic::{solve_algebraic_fdcs, AlgebraicOptions};
use crate::engine::{SolveError, Solved};
use crate::flow::solve_fixed_degree_subgraph;
use crate::instance::{CostMatrix, ExtCost, FdcsInstance, Family, MvtspInstance, Weight};
use crate::kernel::{kernelize, lift};
use crate::multiplicity::{check_fdcs, cost_of, Multiplicity};

/// Costs rounded for one guess of the most expensive edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundedInstance {
    pub costs: CostMatrix,
    /// Guessed most expensive edge cost.
    pub max_edge: u64,
    /// Demand factor: every demand is at most `factor * n^2`.
    pub factor: u64,
    /// `ceil(factor * n^3 / eps)`, the rounded cost of an edge costing exactly `max_edge`.
    pub cap: u64,
}

/// Exact `num / den` for a positive finite `eps`.
fn eps_ratio(eps: f64) -> (BigUint, BigUint) {
    assert!(eps.is_finite() && eps > 0.0, "eps must be positive and finite");
    let (mantissa, exponent, _) = FloatCore::integer_decode(eps);
    let mantissa = BigUint::from(mantissa);
    if exponent >= 0 {
        (mantissa << exponent as usize, BigUint::from(1u8))
    } else {
        (mantissa, BigUint::from(1u8) << (-exponent) as usize)
    }
}

fn ceil_div(a: &BigUint, b: &BigUint) -> BigUint {
    (a + b - 1u8) / b
}

/// Costs at most `max_edge` scale to `ceil(factor n^3 d / (eps max_edge))`;
/// the rest become infinite. A zero `max_edge` keeps only the free edges.
pub fn round_costs(d: &CostMatrix, max_edge: u64, eps: f64, factor: u64) -> RoundedInstance {
    let n = d.n() as u64;
    let (eps_num, eps_den) = eps_ratio(eps);
    let numer = BigUint::from(factor) * BigUint::from(n).pow(3) * eps_den;
    let cap = ceil_div(&numer, &eps_num).to_u64().expect("rounded costs fit in u64");
    let costs = d.map_finite(|c| {
        if c > max_edge {
            None
        } else if c == 0 {
            Some(0)
        } else {
            let top = &numer * BigUint::from(c);
            let bottom = &eps_num * BigUint::from(max_edge);
            Some(ceil_div(&top, &bottom).to_u64().expect("rounded costs fit in u64"))
        }
    });
    RoundedInstance { costs, max_edge, factor, cap }
}

/// Smallest `factor >= 1` with every demand at most `factor * n^2`.
pub fn demand_factor(inst: &FdcsInstance) -> u64 {
    let n2 = (inst.n() as u64).pow(2);
    inst.max_demand().div_ceil(n2).max(1)
}

#[derive(Clone, Debug)]
pub struct ApproxOptions {
    pub eps: f64,
    pub seed: u64,
    pub confidence: f64,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        ApproxOptions { eps: 0.1, seed: 0, confidence: 0.99 }
    }
}

/// Cheapest solution of `inst` using only edges with cost at most `limit`,
/// ignoring connectivity. A lower bound for every connected solution there.
fn relaxed_bound(inst: &FdcsInstance, limit: u64) -> Option<Weight> {
    let d = inst.costs().map_finite(|c| (c <= limit).then_some(c));
    let m = solve_fixed_degree_subgraph(&d, inst.in_demand(), inst.out_demand())?;
    cost_of(&m, &d).finite()
}

pub fn solve_approx(inst: &MvtspInstance, opts: &ApproxOptions) -> Result<Solved, SolveError> {
    solve_approx_fdcs(&inst.to_fdcs(Family::OrientedTrees), opts)
}

/// Best verified solution over every guess of the most expensive edge.
pub fn solve_approx_fdcs(inst: &FdcsInstance, opts: &ApproxOptions) -> Result<Solved, SolveError> {
    if inst.family() != Family::OrientedTrees {
        return Err(SolveError::Unsupported("approximation needs connected subgraphs".into()));
    }
    let kernel = kernelize(inst).ok_or(SolveError::NoSolution)?;
    let reduced = &kernel.reduced;
    let factor = demand_factor(reduced);
    let total_edges: u64 = reduced.out_demand().iter().sum();
    let Some(lower) = relaxed_bound(reduced, u64::MAX) else {
        return Err(SolveError::NoSolution);
    };

    // best: (cost of the reduced part under the true costs, reduced solution)
    let mut best: Option<(Weight, Multiplicity)> = None;
    for (i, e) in reduced.costs().distinct_finite().into_iter().enumerate() {
        // an optimum's dearest edge costs at least an average edge
        if (e as Weight) * (total_edges as Weight) < lower {
            continue;
        }
        if let Some((b, _)) = &best {
            // the dearest edge of an optimum costs at most the optimum
            if e as Weight > *b {
                break;
            }
            match relaxed_bound(reduced, e) {
                Some(lb) if lb < *b => {}
                _ => continue,
            }
        } else if relaxed_bound(reduced, e).is_none() {
            continue;
        }
        let rounded = round_costs(reduced.costs(), e, opts.eps, factor);
        let sub = reduced.with_costs(rounded.costs);
        let alg = AlgebraicOptions {
            seed: opts.seed.wrapping_add(i as u64),
            confidence: opts.confidence,
            kernelize: false,
            ..AlgebraicOptions::default()
        };
        let Ok(found) = solve_algebraic_fdcs(&sub, &alg) else { continue };
        let Some(true_cost) = cost_of(&found.multiplicity, reduced.costs()).finite() else { continue };
        if best.as_ref().is_none_or(|(b, _)| true_cost < *b) {
            best = Some((true_cost, found.multiplicity));
        }
    }

    let (_, m) = best.ok_or(SolveError::NoSolution)?;
    let m = lift(&m, &kernel.offset);
    check_fdcs(inst, &m).map_err(|_| SolveError::NoSolution)?;
    let ExtCost::Finite(cost) = cost_of(&m, inst.costs()) else {
        return Err(SolveError::NoSolution);
    };
    Ok(Solved { cost, multiplicity: m, memo_states: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{brute_force_mvtsp, OracleOptions};
    use proptest::prelude::*;
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
    fn rounding_examples() {
        let d = CostMatrix::from_rows(vec![vec![Some(0), Some(7)], vec![Some(10), Some(3)]]).unwrap();
        let r = round_costs(&d, 7, 0.5, 1);
        // 8 / 0.5 = 16
        assert_eq!(r.cap, 16);
        assert_eq!(r.costs.get(0, 0), Some(0));
        assert_eq!(r.costs.get(0, 1), Some(16));
        assert_eq!(r.costs.get(1, 0), None);
        // ceil(16 * 3 / 7) = 7
        assert_eq!(r.costs.get(1, 1), Some(7));
    }

    #[test]
    fn eps_is_exact() {
        // 0.1 is slightly above one tenth in binary, so 8 / 0.1 rounds up to 80
        let d = CostMatrix::filled(2, Some(1));
        assert_eq!(round_costs(&d, 1, 0.1, 1).cap, 80);
        assert_eq!(round_costs(&d, 1, 0.25, 1).cap, 32);
    }

    #[test]
    fn factor_tracks_demands() {
        let inst = MvtspInstance::new(triangle(), vec![1, 9, 10]).unwrap().to_fdcs(Family::OrientedTrees);
        assert_eq!(demand_factor(&inst), 2);
        let inst = MvtspInstance::new(triangle(), vec![1; 3]).unwrap().to_fdcs(Family::OrientedTrees);
        assert_eq!(demand_factor(&inst), 1);
    }

    #[test]
    fn examples() {
        let t3 = MvtspInstance::new(triangle(), vec![1; 3]).unwrap();
        let opts = ApproxOptions { eps: 0.5, ..ApproxOptions::default() };
        assert_eq!(solve_approx(&t3, &opts).unwrap().cost, 3);

        let d = CostMatrix::from_rows(vec![vec![Some(5), Some(2)], vec![Some(3), Some(4)]]).unwrap();
        let i2l = MvtspInstance::new(d, vec![2, 1]).unwrap();
        let opts = ApproxOptions { eps: 0.1, ..ApproxOptions::default() };
        let got = solve_approx(&i2l, &opts).unwrap().cost;
        assert!((10..=11).contains(&got), "{got}");

        let d = CostMatrix::from_rows(vec![vec![None, Some(1)], vec![None, None]]).unwrap();
        let one_way = MvtspInstance::new(d, vec![1, 1]).unwrap();
        assert_eq!(solve_approx(&one_way, &opts), Err(SolveError::NoSolution));
    }

    #[test]
    fn bracket_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for i in 0..12 {
            let n = rng.gen_range(2..=3);
            let cells = (0..n * n).map(|_| rng.gen_bool(0.85).then(|| rng.gen_range(0..=1_000_000))).collect();
            let k = (0..n).map(|_| rng.gen_range(1..=2)).collect();
            let inst = MvtspInstance::new(CostMatrix::new(n, cells), k).unwrap();
            let exact = brute_force_mvtsp(&inst, &OracleOptions::default()).map(|s| s.cost);
            let eps = if i % 2 == 0 { 0.5 } else { 0.05 };
            let got = solve_approx(&inst, &ApproxOptions { eps, seed: i, confidence: 0.99 });
            match (exact, got) {
                (Err(_), got) => assert!(got.is_err()),
                (Ok(opt), Ok(s)) => {
                    assert!(s.cost >= opt);
                    assert!(s.cost as f64 <= (1.0 + eps) * opt as f64 + 1e-9, "{} vs {opt}", s.cost);
                }
                (Ok(_), Err(e)) => panic!("approximation failed: {e}"),
            }
        }
    }

    proptest! {
        #[test]
        fn rounding_is_monotone(
            a in proptest::collection::vec(0u64..1000, 9),
            bump in proptest::collection::vec(0u64..1000, 9),
            e in 1u64..2000,
            eps in 0.01f64..2.0,
        ) {
            let d1 = CostMatrix::new(3, a.iter().map(|&x| Some(x)).collect());
            let d2 = CostMatrix::new(3, a.iter().zip(&bump).map(|(&x, &y)| Some(x + y)).collect());
            let r1 = round_costs(&d1, e, eps, 1);
            let r2 = round_costs(&d2, e, eps, 1);
            for u in 0..3 {
                for v in 0..3 {
                    let lo = r1.costs.get(u, v).map_or(ExtCost::Infinite, |c| ExtCost::Finite(c as Weight));
                    let hi = r2.costs.get(u, v).map_or(ExtCost::Infinite, |c| ExtCost::Finite(c as Weight));
                    prop_assert!(lo <= hi);
                    if let Some(c) = r2.costs.get(u, v) {
                        prop_assert!(c <= r2.cap);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_max_edge_keeps_free_edges() {
        let d = CostMatrix::from_rows(vec![vec![Some(0), Some(4)], vec![Some(0), None]]).unwrap();
        let r = round_costs(&d, 0, 0.5, 1);
        assert_eq!(r.costs.rows(), vec![vec![Some(0), None], vec![Some(0), None]]);
        assert_eq!(r.cap, 16);
    }
}
