//! Explicit exponential Runge-Kutta (EERK) integrators for gradient flows,
//! together with the stage energy-dissipation analysis of their tableaux.

pub mod catalog;
pub mod dissipation;
pub mod error;
pub mod expr;
pub mod integrator;
pub mod phi;
pub mod scalar;
pub mod spatial;

pub use catalog::{get_method, DiffTableau, MethodId, Tableau};
pub use error::{Error, Result};
pub use expr::PhiExpr;
pub use phi::phi;
pub use scalar::Scalar;
