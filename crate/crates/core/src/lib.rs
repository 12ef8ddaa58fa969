//! Indirect shooting for bang-bang optimal control problems.
//!
//! The discontinuous control law `u = ½[(u_max+u_min) − (u_max−u_min)·sgn(S)]`
//! is replaced by a smooth filter of the switching function `S`, which turns
//! the two-point boundary-value problem into a smooth root-finding problem
//! solvable with a damped Newton method. A decade continuation on the filter
//! constant ([`continuation`]) then tightens the approximation.
//!
//! Two benchmark problems are provided: a minimal-time oscillator
//! ([`oscillator`]) and a minimal-fuel GTO→GEO low-thrust transfer in modified
//! equinoctial elements ([`lowthrust`]).

pub mod artifacts;
pub mod config;
pub mod continuation;
pub mod error;
pub mod harness;
pub mod lowthrust;
pub mod numerics;
pub mod oscillator;
pub mod problem;
pub mod smoothing;

pub use error::{Error, Result};
