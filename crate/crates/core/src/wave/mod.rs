//! Forward solvers for the nonlocal wave equation.
//!
//! * [`solve_linear_modal`]: eigen-expansion with a trapezoid Duhamel integral,
//!   zero potential.
//! * [`solve_with_potential_picard`]: fixed-point iteration on the modal solver.
//! * [`solve_newmark`]: explicit central differences, used as an independent
//!   check and for semilinear problems.
//!
//! Exterior data enter through [`lift_exterior`]: `v = u - φ` solves a
//! zero-exterior problem with source `-(A_full φ)|_Ω`.

mod field;
mod modal;
mod newmark;
mod picard;
mod residual;

pub use field::{windowed_sine, CauchyData, ExteriorControl, NodeSet, SpaceTimeField};
pub use modal::{
    data_norm, duhamel_coefficient, energy_constant, energy_sup, lift_exterior, modal_field, reassemble,
    solve_linear_modal, ModalSolution,
};
pub use newmark::{solve_newmark, spectral_bound, stable_dt, Reaction, CFL_MARGIN};
pub use picard::{solve_with_potential_picard, PicardOptions, PicardReport};
pub use residual::{distributional_residual, very_weak_residual, SeparableTest};
