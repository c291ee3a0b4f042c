//! Pseudo-spectral toolkit for small perturbations of the constant state
//! `ψ = 1` of the Gross–Pitaevskii equation: Fourier multipliers for the
//! Bogoliubov operators, a time stepper, the quadratic normal form and a
//! final-state (wave operator) iteration.
//!
//! Everything numerical is generic over [`Real`]; the `*64` aliases below
//! fix `f64`, which is what the identity checks are calibrated for.

pub mod analysis;
pub mod datum;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod multiplier;
pub mod normal_form;
pub mod norms;
pub mod operators;
pub mod scalar;
pub mod scattering;
pub mod testing;
pub mod trajectory;
pub mod verify;

pub use error::{Error, Result};
pub use field::{Field, Representation};
pub use grid::{make_grid, Grid};
pub use scalar::Real;
pub use trajectory::{Trajectory, VariableTag};

pub type Grid64 = Grid<f64>;
pub type Field64 = Field<f64>;
pub type Trajectory64 = Trajectory<f64>;
