//! Numerical toolkit for bipartite quantum steering.
//!
//! The crate builds the state families used to separate entanglement,
//! steering and Bell nonlocality under general measurements, and decides
//! finite-measurement versions of local hidden state (LHS) and local hidden
//! variable (LHV) membership with a built-in conic interior-point solver.
//!
//! Every unsteerability or locality verdict produced here concerns a
//! finite measurement family. It is a necessary condition for a model to
//! exist for all measurements, never a proof of one.

pub mod detect;
pub mod error;
pub mod ineq;
pub mod io;
pub mod lhs;
pub mod maps;
pub mod meas;
pub mod qmat;
pub mod random;
pub mod states;

pub use error::{Error, Result};
