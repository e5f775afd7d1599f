//! Numerical laboratory for bounded solutions of the nonlinear
//! Cauchy-Riemann equations u_s - J(u_t - F(t, u)) = 0 on a truncated
//! cylinder: a Newton-Krylov boundary-value solver, winding-number traces of
//! solution pairs, and classification of limit behaviour under the
//! s-translation flow.

pub mod axioms;
pub mod equilibria;
pub mod error;
pub mod field;
pub mod generate;
pub mod fourier;
pub mod grid;
pub mod io;
pub mod limitset;
pub mod ops;
pub mod plane;
pub mod rng;
pub mod solver;
pub mod vectorfield;
pub mod winding;

pub use error::{Error, Result};
