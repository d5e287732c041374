//! hkdlab: numerical verification of (h,k)-dichotomies for evolution
//! operators on finite-dimensional spaces.
//!
//! The crate constructs closed-form evolution systems with projector
//! families, builds two Lyapunov-type norm families by grid suprema,
//! estimates minimal admissible dichotomy/growth envelopes, and checks the
//! norm-family characterizations of dichotomy as testable numerical
//! properties.
//!
//! The user guide under `book/` walks through the concepts; its code
//! listings compile and run as this crate's doc-tests (see [`guide`]).

pub mod cli;
pub mod error;
pub mod grid;
pub mod linops;
pub mod norms;
pub mod rates;
pub mod report;
pub mod systems;
pub mod verify;

pub use error::{Error, Result};
pub use grid::Grid;
pub use linops::{BaseNorm, OperatorMatrix, StateSpace, StateVector};
pub use norms::{NormFamily, NormKind};
pub use rates::GrowthRate;
pub use systems::{EvolutionSystem, GalleryExample, GridSystem, UProfile};
