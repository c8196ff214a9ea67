//! klab: a numerical laboratory for the two-parameter evolution operators
//! generated by second-order elliptic operators with unbounded coefficients.
//!
//! The crate builds the evolution operator by domain exhaustion (Dirichlet
//! problems on growing boxes), evaluates the explicit constants entering the
//! pointwise and uniform derivative estimates, classifies one-dimensional
//! problems by tail integrability, constructs tight families of measures,
//! and verifies functional inequalities and decay rates on desk-scale
//! examples.

pub mod catalogue;
pub mod coeff;
pub mod constants;
pub mod datum;
pub mod error;
pub mod feller;
pub mod grid;
pub mod inequalities;
pub mod linalg;
pub mod measures;
pub mod operator;
pub mod oracles;
pub mod quad;
pub mod report;
pub mod scenario;
pub mod solver;
pub mod verifier;

pub use error::{KlabError, Result};
pub use grid::GridFunction;
pub use operator::{HypothesisProfile, OperatorSpec, SamplingWindow};
