//! Solvers for the Many Visits Travelling Salesman Problem and the Fixed
//! Degree Connected Subgraph problem.

pub mod algebraic;
pub mod approx;
pub mod dp;
pub mod engine;
pub mod flow;
pub mod generate;
pub mod gf;
pub mod instance;
pub mod kernel;
pub mod multiplicity;
pub mod oracle;
pub mod polyspace;
pub mod verify;

pub use instance::{
    validate, CostMatrix, ExtCost, FdcsInstance, Family, Instance, MvtspInstance, RawInstance,
    ValidationError, Weight,
};
pub use engine::{solve, Engine, EngineOptions, SolveError, Solved};
pub use multiplicity::{cost_of, reconstruct_tour, Multiplicity, Tour, Violation};
