//! Contact Lagrangian and Hamiltonian mechanics in a single global chart
//! `(q, v, z)`.
//!
//! The crate computes Herglotz vector fields, Hamiltonian and Reeb fields of
//! contact forms, and the machinery for reparametrizing the action
//! coordinate (`ζ`-charts). On top of that it provides sampled residual
//! checkers for equivalence of contact systems and for the inverse problem,
//! an RK4 integrator with the Herglotz action functional, and a JSON-driven
//! command line front end.

pub mod cli;
pub mod contact;
pub mod dynamics;
pub mod equivalence;
pub mod error;
pub mod expr;
pub mod extended;
pub mod inverse;
pub mod lagrangian;
pub mod report;
pub mod sampling;

pub use error::{Error, Result};
pub use expr::{Coord, Expr, ParamSet, StatePoint};
