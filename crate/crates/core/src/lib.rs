//! Cycles of projections onto closed convex sets in `R^n`.
//!
//! For sets `C_1, ..., C_m` with projections `P_1, ..., P_m`, a cycle is a
//! tuple `z` with `z_1 = P_1 z_m, z_2 = P_2 z_1, ..., z_m = P_m z_{m-1}`.
//! This crate computes cycles, the gap displacement `d` and the gap vector
//! `v`, and checks the characterization
//!
//! ```text
//! {z_m : z is a cycle} = C_m ∩ (C_{m-1} + v_{m-1}) ∩ ... ∩ (C_1 + v_1 + ... + v_{m-1})
//! ```
//!
//! numerically.

pub mod error;
pub mod gap;
pub mod hilbert;
pub mod operators;
pub mod scenario;
pub mod sets;
pub mod verify;

pub use error::{Error, Result};
pub use gap::{CycleResult, GapResult, SolverSettings};
pub use hilbert::{DenseMatrix, ProductVector, Tolerances, Vector};
pub use operators::CycleOps;
pub use scenario::{CheckGroup, Report, Scenario};
pub use sets::{ConvexSet, ExtendedReal};
pub use verify::{CheckRecord, VerifySettings};
