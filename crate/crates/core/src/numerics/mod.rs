//! Propagation, event refinement, finite-difference Jacobians and the damped
//! Newton solver that together evaluate and solve shooting functions.

mod crossing;
mod integrate;
mod jacobian;
mod newton;
mod trajectory;

pub use crossing::{count_sign_changes, refine_zero_crossings};
pub use integrate::{integrate, integrate_final, propagate, propagate_with_event, IntegratorConfig};
pub use jacobian::{fd_jacobian, fd_jacobian_with_steps};
pub(crate) use newton::infinite_as_null;
pub use newton::{solve_root, Globalization, RootSolveConfig, SolveReport, Termination};
pub use trajectory::{Trajectory, TrajectoryTable};
