//! Linear (Lyapunov) and Jacobi (KCC) stability analysis of dynamical
//! systems.
//!
//! The crate is organised bottom-up:
//!
//! | module | purpose |
//! |---|---|
//! | [`expr`] | expression language for user-defined right-hand sides |
//! | [`autodiff`] | second-order forward-mode jets |
//! | [`sode`] | planar fields, semisprays and variable elimination |
//! | [`linstab`] | fixed points and eigenvalue classification |
//! | [`kcc`] | KCC invariants and Jacobi stability |
//! | [`flow`] | trajectories, deviation vectors, limit cycles |
//! | [`models`] | built-in gravitational and cosmological models |
//! | [`sweep`] | parameter sweeps and threshold location |
//! | [`cli`] | reports and the `kccstab` command surface |

pub mod autodiff;
pub mod cli;
pub mod error;
pub mod expr;
pub mod flow;
pub mod kcc;
pub mod linstab;
pub mod models;
pub mod sode;
pub mod sweep;

pub use error::{Error, Result};
