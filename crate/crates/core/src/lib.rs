//! Spectral flow of self-adjoint operator paths, Maslov indices of
//! Lagrangian pairs, and a numerical check of the spectral flow formula for
//! first-order boundary value problems on an interval.

pub mod bvp1d;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod maslov;
pub mod sample;
pub mod specflow;
pub mod sympcore;
pub mod tol;
pub mod tracking;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec};
pub use sympcore::{SubspaceFrame, SubspaceKind, SymplecticSpace, UnitaryGenerator};
pub use tol::Tolerances;
