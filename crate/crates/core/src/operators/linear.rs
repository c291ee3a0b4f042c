//! Real-linear diagonalization `V` and the linear propagator `e^{-iHt}`.

use num_complex::Complex;

use crate::field::{Field, Representation};
use crate::grid::Grid;
use crate::multiplier::RadialTable;
use crate::operators::symbols::SymbolId;
use crate::scalar::{cis, Real};

/// Tabulated symbols for a grid, reused by the time steppers and the
/// scattering iteration.
#[derive(Clone, Debug)]
pub struct SymbolTables<T: Real> {
    pub u: RadialTable<T>,
    /// `U^{-1}` with 0 at the origin.
    pub u_inv: RadialTable<T>,
    pub h: RadialTable<T>,
    pub p: RadialTable<T>,
    pub q: RadialTable<T>,
    pub inv_two_minus_lap: RadialTable<T>,
    pub one: RadialTable<T>,
}

impl<T: Real> SymbolTables<T> {
    pub fn new(grid: &Grid<T>) -> Self {
        let tab = |id: SymbolId, origin: Option<T>| RadialTable::new(grid, |r| id.value_unchecked(r), origin);
        Self {
            u: tab(SymbolId::U, None),
            u_inv: tab(SymbolId::Uinv, Some(T::zero())),
            h: tab(SymbolId::H, None),
            p: tab(SymbolId::P, None),
            q: tab(SymbolId::Q, None),
            inv_two_minus_lap: tab(SymbolId::InvTwoMinusLap, None),
            one: RadialTable::new(grid, |_| T::one(), None),
        }
    }
}

/// Result of a map that passes through `U^{-1}`.
#[derive(Clone, Debug)]
pub struct Mapped<T: Real> {
    pub field: Field<T>,
    /// Mean of the real part that `U^{-1}` discarded.
    pub dropped_mean: T,
}

/// `V^{-1}u = U^{-1} Re u + i Im u`, zero mode of `Re u` dropped and reported.
pub fn v_inverse_map<T: Real>(u: &Field<T>) -> Mapped<T> {
    let tables = SymbolTables::new(u.grid());
    v_inverse_with(u, &tables)
}

pub fn v_inverse_with<T: Real>(u: &Field<T>, tables: &SymbolTables<T>) -> Mapped<T> {
    let repr = u.representation();
    let s = u.in_representation(Representation::Spectral);
    let dropped = s.values()[0].re / u.grid().volume();
    Mapped {
        field: s.real_linear(&tables.u_inv.values, &tables.one.values).into_representation(repr),
        dropped_mean: dropped,
    }
}

/// `V v = U Re v + i Im v`.
pub fn v_map<T: Real>(v: &Field<T>) -> Field<T> {
    let tables = SymbolTables::new(v.grid());
    v_map_with(v, &tables)
}

pub fn v_map_with<T: Real>(v: &Field<T>, tables: &SymbolTables<T>) -> Field<T> {
    let repr = v.representation();
    let s = v.in_representation(Representation::Spectral);
    s.real_linear(&tables.u.values, &tables.one.values).into_representation(repr)
}

/// Real and imaginary parts `(u₁, u₂)` of a field, kept together.
#[derive(Clone, Debug)]
pub struct VSplit<T: Real> {
    pub real_part: Field<T>,
    pub imag_part: Field<T>,
}

impl<T: Real> VSplit<T> {
    pub fn new(u: &Field<T>) -> Self {
        let (real_part, imag_part) = u.split();
        Self { real_part, imag_part }
    }

    pub fn recompose(&self) -> Field<T> {
        Field::compose(&self.real_part, &self.imag_part)
    }
}

/// `e^{-iHt} f`, in the representation `f` was given in.
pub fn propagate<T: Real>(f: &Field<T>, t: T) -> Field<T> {
    let repr = f.representation();
    let mut s = f.clone().into_spectral();
    propagate_in_place(&mut s, t);
    s.into_representation(repr)
}

/// In-place `e^{-iHt}` on a spectral field.
pub fn propagate_in_place<T: Real>(f: &mut Field<T>, t: T) {
    debug_assert!(f.is_spectral());
    let xi2 = f.grid().xi_norm2().to_vec();
    for (v, r2) in f.values_mut().iter_mut().zip(xi2) {
        let h = r2.sqrt() * (T::lit(2.0) + r2).sqrt();
        *v = *v * cis(-h * t);
    }
}

/// `e^{-iHt}` tabulated, for repeated fixed-step use.
#[derive(Clone, Debug)]
pub struct PropagatorTable<T: Real> {
    pub values: Vec<Complex<T>>,
}

impl<T: Real> PropagatorTable<T> {
    pub fn new(tables: &SymbolTables<T>, t: T) -> Self {
        Self {
            values: tables.h.values.iter().map(|&h| cis(-h * t)).collect(),
        }
    }

    pub fn apply(&self, f: &mut Field<T>) {
        debug_assert!(f.is_spectral());
        for (v, e) in f.values_mut().iter_mut().zip(&self.values) {
            *v = *v * *e;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::sobolev_norm;
    use crate::testing::random_field;

    #[test]
    fn imaginary_fields_are_fixed_by_v_inverse() {
        let g = Grid::<f64>::new(2, 16, 6.0).unwrap();
        let u = random_field(&g, 4).imag_part().scale(Complex::new(0.0, 1.0));
        let v = v_inverse_map(&u);
        assert!(v.field.relative_max_diff(&u) < 1e-13);
        assert!(v.dropped_mean.abs() < 1e-14);
    }

    #[test]
    fn v_round_trip_drops_only_the_real_mean() {
        let g = Grid::<f64>::new(2, 16, 6.0).unwrap();
        let u = random_field(&g, 9);
        let mapped = v_inverse_map(&u);
        let back = v_map(&mapped.field);
        let expected = u.map(|c| c - Complex::new(mapped.dropped_mean, 0.0));
        assert!(back.relative_max_diff(&expected) < 1e-12);
        assert!((mapped.dropped_mean - u.mean().re).abs() < 1e-14);
    }

    #[test]
    fn v_inverse_scales_unit_cosine_by_sqrt3() {
        let g = Grid::<f64>::new(2, 16, std::f64::consts::TAU).unwrap();
        let u = Field::from_real_fn(&g, |x| x[0].cos());
        let v = v_inverse_map(&u).field;
        let expected = u.scale_real(3f64.sqrt());
        assert!(v.relative_max_diff(&expected) < 1e-12);
    }

    #[test]
    fn propagator_group_law_and_unitarity() {
        let g = Grid::<f64>::new(2, 16, 5.0).unwrap();
        let f = random_field(&g, 2);
        assert!(propagate(&f, 0.0).relative_max_diff(&f) < 1e-14);
        let a = propagate(&propagate(&f, 0.7), 1.9);
        let b = propagate(&f, 2.6);
        assert!(a.relative_max_diff(&b) < 1e-12);
        let n0 = sobolev_norm(&f, 1.0, true);
        let n1 = sobolev_norm(&propagate(&f, 7.3), 1.0, true);
        assert!((n0 - n1).abs() <= 1e-12 * n0);
    }
}
