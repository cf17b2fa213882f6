//! Subgradient-type method for equilibrium problems over fixed point sets of
//! firmly nonexpansive mappings, together with certified bounds on its
//! convergence and empirical checks of those bounds.

pub mod counter;
pub mod equilibrium;
pub mod error;
pub mod operators;
pub mod rates;
pub mod regularity;
pub mod solver;
pub mod verify;
pub mod vector;

pub use counter::Counterfunction;
pub use equilibrium::EquilibriumProblem;
pub use error::*;
pub use operators::{FirmOp, NonexpansiveMap};
pub use rates::{Bound, RateCalculator, RateInputs};
pub use regularity::{OmegaContext, RegularityModulus};
pub use solver::{SolverConfig, Trajectory};
pub use vector::Vector;
pub use verify::{CheckReport, Status};
