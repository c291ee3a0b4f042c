//! Symbol calculus, the diagonalizing maps and the bilinear phases.

pub mod linear;
pub mod phase;
pub mod symbols;

pub use linear::{
    propagate, propagate_in_place, v_inverse_map, v_inverse_with, v_map, v_map_with, Mapped, PropagatorTable,
    SymbolTables, VSplit,
};
pub use phase::{
    angle_identity, h_addition_identity, phase_gradient, phase_hessian, phase_radial_derivs, phase_value, PhaseKind,
};
pub use symbols::{
    bracket, dispersion, dispersion_d1, dispersion_d2, dispersion_d3, japanese, symbol_derivatives, symbol_value,
    HDerivatives, SymbolId,
};
