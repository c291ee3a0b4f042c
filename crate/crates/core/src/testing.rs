//! Deterministic random test data.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::Field;
use crate::grid::Grid;
use crate::scalar::Real;

/// Complex field with i.i.d. uniform `[-1, 1]` real and imaginary parts.
pub fn random_field<T: Real>(grid: &Grid<T>, seed: u64) -> Field<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len())
        .map(|_| Complex::new(T::lit(rng.gen_range(-1.0..1.0)), T::lit(rng.gen_range(-1.0..1.0))))
        .collect();
    Field::from_values(grid, values, crate::field::Representation::Physical).expect("length matches grid")
}

/// Random field with Gaussian-damped spectrum, well resolved on the grid.
pub fn random_smooth_field<T: Real>(grid: &Grid<T>, seed: u64, width: T) -> Field<T> {
    let rough = random_field(grid, seed).into_spectral();
    let w2 = width * width;
    let mut out = rough;
    let xi2: Vec<T> = grid.xi_norm2().to_vec();
    for (v, r2) in out.values_mut().iter_mut().zip(xi2) {
        *v = *v * (-(r2 * w2)).exp();
    }
    out.into_physical()
}
