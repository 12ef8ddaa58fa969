//! Minimal-fuel low-thrust transfer with fixed final time, in modified
//! equinoctial elements.
//!
//! The thrust direction is eliminated analytically, `α = −Mᵀλ/‖Mᵀλ‖`, and
//! the throttle follows the smoothed switching law on
//! `S = 1 − c‖Mᵀλ‖/m − λ_m`. Integration runs in [`Units`] chosen by the
//! caller, canonical (GEO radius, `μ = 1`, initial mass) by default.

mod mee;
mod transfer;

pub use mee::{count_revolutions, mee_matrices, thrust_direction, MeeState, DEGENERATE_NORM};
pub use transfer::{
    convert_costates, lowthrust_aug_dynamics, lowthrust_hamiltonian, switching_function, thrust_control, GtoGeo,
    ScaledConstants, SpacecraftParams, TargetOrbit, ThrustControl, TransferBoundary, Units, CANONICAL_LENGTH_KM,
};
