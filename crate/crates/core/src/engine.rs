//! Shared result types and engine dispatch.

use thiserror::Error;

use crate::algebraic::{solve_algebraic_fdcs, AlgebraicOptions};
use crate::approx::{solve_approx_fdcs, ApproxOptions};
use crate::dp::solve_expspace;
use crate::instance::{FdcsInstance, Family, Instance, Weight};
use crate::kernel::{kernelize, lift};
use crate::multiplicity::{cost_of, Multiplicity};
use crate::oracle::{brute_force_fdcs, OracleOptions};
use crate::polyspace::solve_polyspace;

/// An optimal (or, for randomized engines, best found) solution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solved {
    pub cost: Weight,
    pub multiplicity: Multiplicity,
    /// Distinct dynamic-programming states touched, where applicable.
    pub memo_states: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("instance has no feasible solution")]
    NoSolution,
    #[error("search space exceeds the budget of {0} candidates")]
    BudgetExceeded(u128),
    #[error("no verified witness after {0} attempts")]
    RetriesExhausted(u32),
    #[error("engine does not support this instance: {0}")]
    Unsupported(String),
}

/// Which solver to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Engine {
    /// Exponential-space dynamic programming up to [`EngineOptions::auto_threshold`]
    /// vertices, the algebraic engine beyond.
    Auto,
    Algebraic,
    Expspace,
    Polyspace,
    Approx,
    Brute,
}

impl Engine {
    pub const ALL: [Engine; 6] =
        [Engine::Auto, Engine::Algebraic, Engine::Expspace, Engine::Polyspace, Engine::Approx, Engine::Brute];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Auto => "auto",
            Engine::Algebraic => "algebraic",
            Engine::Expspace => "expspace",
            Engine::Polyspace => "polyspace",
            Engine::Approx => "approx",
            Engine::Brute => "brute",
        }
    }
}

impl std::str::FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Engine::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown engine {s:?}"))
    }
}

#[derive(Clone, Debug)]
pub struct EngineOptions {
    pub seed: u64,
    pub eps: f64,
    pub layers: usize,
    /// Extraction attempts for the algebraic engine.
    pub trials: u32,
    pub confidence: f64,
    /// Reduce demands before the exact engines run.
    pub kernelize: bool,
    pub auto_threshold: usize,
    pub budget: u128,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            seed: 0,
            eps: 0.1,
            layers: crate::polyspace::DEFAULT_LAYERS,
            trials: 8,
            confidence: 0.99,
            kernelize: true,
            auto_threshold: 12,
            budget: 10_000_000,
        }
    }
}

/// Runs the selected engine. Returns the engine that actually ran (never
/// `Auto`) with its solution.
pub fn solve(inst: &Instance, engine: Engine, opts: &EngineOptions) -> Result<(Engine, Solved), SolveError> {
    let engine = match engine {
        Engine::Auto if inst.n() <= opts.auto_threshold => Engine::Expspace,
        Engine::Auto => Engine::Algebraic,
        e => e,
    };
    // many-visits instances as connected fixed-degree problems
    let connected = match inst {
        Instance::Mvtsp(i) => i.to_fdcs(Family::OrientedTrees),
        Instance::Fdcs(i) => i.clone(),
    };
    let solved = match engine {
        Engine::Brute => brute_force_fdcs(&inst.to_fdcs(), &OracleOptions { budget: opts.budget })?,
        Engine::Algebraic => {
            let alg = AlgebraicOptions {
                seed: opts.seed,
                confidence: opts.confidence,
                retries: opts.trials,
                kernelize: opts.kernelize,
                ..AlgebraicOptions::default()
            };
            solve_algebraic_fdcs(&connected, &alg)?
        }
        Engine::Approx => {
            let approx = ApproxOptions { eps: opts.eps, seed: opts.seed, confidence: opts.confidence };
            solve_approx_fdcs(&connected, &approx)?
        }
        Engine::Expspace | Engine::Polyspace => {
            let rooted = inst.to_fdcs();
            let layers = opts.layers;
            let run = |i: &FdcsInstance| match engine {
                Engine::Expspace => solve_expspace(i),
                _ => solve_polyspace(i, layers),
            };
            if opts.kernelize {
                let k = kernelize(&rooted).ok_or(SolveError::NoSolution)?;
                let s = run(&k.reduced)?;
                let multiplicity = lift(&s.multiplicity, &k.offset);
                let cost = cost_of(&multiplicity, rooted.costs()).finite().expect("lifted solution is finite");
                Solved { cost, multiplicity, memo_states: s.memo_states }
            } else {
                run(&rooted)?
            }
        }
        Engine::Auto => unreachable!(),
    };
    Ok((engine, solved))
}
