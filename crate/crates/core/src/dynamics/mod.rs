//! Time evolution of the product matrix `P_mn = C_m conj(C_n)`.

mod initial;
mod integrate;
pub mod lu;
mod matrix;
mod system;

pub use initial::{initial_amplitudes, initial_state, initial_state_padded, InitialKind, DEFAULT_PAD};
pub use integrate::{
    dominant_eigenstate, evolve, evolve_with, RunStats, Sample, SolverConfig, Step, Trajectory, Verdict,
};
pub use matrix::CoefficientMatrix;
pub use system::{Dynamics, LinearSystem, SolveMethod, SolveReport};
