//! Concurrent identification of an uncertain LTI model together with a
//! stabilizing gain, a robust positive invariant tube cross-section and a
//! positively invariant terminal set for tube-based robust MPC.
//!
//! The crate is `no_std` + `alloc` compatible. Every optimization problem is
//! expressed as a [`cone::ConeProgram`] and handed to a [`cone::ConeSolver`];
//! the `clarabel` feature (on by default) provides an interior-point backend.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(non_snake_case)]

extern crate alloc;

pub mod cone;
pub mod control;
pub mod inclusion;
pub mod init;
pub mod linalg;
pub mod lmi;
pub mod model_set;
pub mod plant;
pub mod polytope;
pub mod scp;
pub mod setup;
pub mod tube_mpc;

#[cfg(feature = "clarabel")]
pub mod clarabel_backend;

pub use cone::{ConeProgram, ConeSolver, SolveResult, SolveStatus};
pub use polytope::{Ellipsoid, SymPolytope};

/// Strictness margin applied to every PSD block (`M ⪰ EPS_PSD·I`).
pub const EPS_PSD: f64 = 1e-7;
/// Margin used to turn strict scalar inequalities into closed ones.
pub const EPS_POS: f64 = 1e-9;
