//! Independent reference computations used to validate the spectral solver.

mod amplitude;
mod closed_form;
mod grid;
mod quadrature;

pub use amplitude::{amplitude_derivative, amplitude_evolve, AmplitudeSample};
pub use closed_form::lse_closed_form;
pub use grid::{
    grid_derivative, grid_evolve, max_stable_dt, nonlinear_stable_dt, GridPotential, GridSample, GridState, GridTrajectory,
    RK4_IMAGINARY_LIMIT,
};
pub use quadrature::{quadrature_inner, quadrature_overlap, simpson};
