//! Fourier multipliers: pointwise scaling of spectral coefficients.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::scalar::Real;

/// A Fourier symbol `m(ξ)`.
pub trait SymbolFn<T: Real> {
    /// Value at frequency `xi` with `r = |ξ|`. Never called at `r = 0`
    /// for symbols that report [`SymbolFn::singular_at_origin`].
    fn eval(&self, xi: &[T; 3], r: T) -> Complex<T>;

    fn singular_at_origin(&self) -> bool {
        false
    }
}

/// Radial real symbol given by a closure of `|ξ|`.
pub struct Radial<F>(pub F);

impl<T: Real, F: Fn(T) -> T> SymbolFn<T> for Radial<F> {
    fn eval(&self, _xi: &[T; 3], r: T) -> Complex<T> {
        Complex::new((self.0)(r), T::zero())
    }
}

/// General symbol given by a closure of the frequency vector.
pub struct VectorSymbol<F>(pub F);

impl<T: Real, F: Fn(&[T; 3]) -> Complex<T>> SymbolFn<T> for VectorSymbol<F> {
    fn eval(&self, xi: &[T; 3], _r: T) -> Complex<T> {
        (self.0)(xi)
    }
}

/// Laplacian as the multiplier `-|ξ|²`.
pub struct Laplacian;

impl<T: Real> SymbolFn<T> for Laplacian {
    fn eval(&self, _xi: &[T; 3], r: T) -> Complex<T> {
        Complex::new(-r * r, T::zero())
    }
}

/// What to do with the `ξ = 0` coefficient when a symbol is singular there.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ZeroModePolicy {
    /// Output zero mode is set to 0; the dropped input mean is reported.
    Drop,
    /// Fail if the input mean exceeds the tolerance in modulus.
    Reject { tolerance: f64 },
}

/// Output of [`apply_multiplier`].
#[derive(Clone, Debug)]
pub struct Multiplied<T: Real> {
    pub field: Field<T>,
    /// Mean of the input that was discarded at `ξ = 0` (zero for regular symbols).
    pub dropped_mean: Complex<T>,
}

/// Multiplies the spectral coefficients of `f` by `m(ξ)`, returning the
/// result in the representation `f` was given in.
pub fn apply_multiplier<T: Real>(f: &Field<T>, m: &dyn SymbolFn<T>, policy: ZeroModePolicy) -> Result<Multiplied<T>> {
    let repr = f.representation();
    let mut s = f.clone().into_spectral();
    let grid = s.grid().clone();
    let mut dropped = Complex::new(T::zero(), T::zero());
    let xi2 = grid.xi_norm2();
    let singular = m.singular_at_origin();
    for (i, v) in s.values_mut().iter_mut().enumerate() {
        let r = xi2[i].sqrt();
        if singular && r == T::zero() {
            dropped = *v / grid.volume();
            if let ZeroModePolicy::Reject { tolerance } = policy {
                if dropped.norm().to_f64_lossy() > tolerance {
                    return Err(Error::SingularZeroMode(dropped.norm().to_f64_lossy()));
                }
            }
            *v = Complex::new(T::zero(), T::zero());
        } else {
            *v = *v * m.eval(&grid.xi(i), r);
        }
    }
    Ok(Multiplied {
        field: s.into_representation(repr),
        dropped_mean: dropped,
    })
}

impl<T: Real> Field<T> {
    /// [`apply_multiplier`] with [`ZeroModePolicy::Drop`], discarding the report.
    pub fn multiply(&self, m: &dyn SymbolFn<T>) -> Field<T> {
        apply_multiplier(self, m, ZeroModePolicy::Drop)
            .expect("drop policy cannot fail")
            .field
    }

    /// Multiplies spectral coefficients by a precomputed table, in place.
    /// The field must be spectral.
    pub fn apply_table(&mut self, table: &RadialTable<T>) {
        debug_assert!(self.is_spectral());
        for (v, m) in self.values_mut().iter_mut().zip(&table.values) {
            *v = *v * *m;
        }
    }

    pub fn with_table(&self, table: &RadialTable<T>) -> Field<T> {
        let repr = self.representation();
        let mut s = self.clone().into_spectral();
        s.apply_table(table);
        s.into_representation(repr)
    }
}

/// A real symbol tabulated on every lattice frequency of a grid.
#[derive(Clone, Debug)]
pub struct RadialTable<T: Real> {
    pub values: Vec<T>,
}

impl<T: Real> RadialTable<T> {
    /// Tabulates `f(|ξ|)`; `at_origin` replaces the value at `ξ = 0`.
    pub fn new(grid: &Grid<T>, f: impl Fn(T) -> T, at_origin: Option<T>) -> Self {
        let values = grid
            .xi_norm2()
            .iter()
            .map(|&r2| {
                if r2 == T::zero() {
                    if let Some(v) = at_origin {
                        return v;
                    }
                }
                f(r2.sqrt())
            })
            .collect();
        Self { values }
    }
}

