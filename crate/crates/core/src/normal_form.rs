//! Quadratic normal form `z = V^{-1}(u + P|u|²/2)` with `P = 2/(2-Δ)`,
//! its inversion, the nonlinearities `N²`, `N³` of the `z` equation
//! `ż = -iHz + N²(u) + N³(u)` and a Duhamel residual check.
//!
//! On the torus `U^{-1}` forgets the mean `c` of `u₁ + P|u|²/2`, which is
//! `charge / (2·vol)` and hence conserved. It is returned alongside `z` and
//! accepted back by the inversion. The `ξ = 0` mode of `z₂` obeys the
//! continuum equation plus `-2c`, which [`duhamel_residual`] accounts for.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::field::{Field, Representation};
use crate::grid::Grid;
use crate::norms::sobolev_norm;
use crate::operators::linear::{v_inverse_with, SymbolTables};
use crate::scalar::{cis, Real};
use crate::trajectory::{Trajectory, VariableTag};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAXITER: usize = 50;

/// Output of [`to_normal_form`].
#[derive(Clone, Debug)]
pub struct NormalForm<T: Real> {
    /// `z`, physical.
    pub z: Field<T>,
    /// Mean of `u₁ + P|u|²/2` discarded by `U^{-1}`.
    pub dropped_mean: T,
}

/// Result of inverting the normal form.
#[derive(Clone, Debug)]
pub struct NormalFormPair<T: Real> {
    pub z: Field<T>,
    /// `u`, physical.
    pub u: Field<T>,
    pub converged: bool,
    pub fixed_point_iters: usize,
    /// `L²` distance between successive iterates.
    pub differences: Vec<T>,
}

/// Spectral coefficients of a real pointwise quantity.
fn real_spectrum<T: Real>(grid: &Grid<T>, values: impl Iterator<Item = T>) -> Field<T> {
    let v: Vec<Complex<T>> = values.map(|x| Complex::new(x, T::zero())).collect();
    Field::from_values(grid, v, Representation::Physical)
        .expect("length matches grid")
        .into_spectral()
}

/// `P|u|²/2` as spectral coefficients, `u` physical.
fn half_p_modulus<T: Real>(u: &Field<T>, tables: &SymbolTables<T>) -> Field<T> {
    let mut a = real_spectrum(u.grid(), u.values().iter().map(|c| c.norm_sqr()));
    let half = T::lit(0.5);
    for (x, p) in a.values_mut().iter_mut().zip(&tables.p.values) {
        *x = *x * (*p * half);
    }
    a
}

/// `z = U^{-1}(u₁ + P|u|²/2) + iu₂`; `u` must be physical.
pub fn to_normal_form<T: Real>(u: &Field<T>) -> Result<NormalForm<T>> {
    u.expect(Representation::Physical)?;
    let tables = SymbolTables::new(u.grid());
    let w = u.clone().into_spectral() + half_p_modulus(u, &tables);
    let mapped = v_inverse_with(&w, &tables);
    Ok(NormalForm {
        z: mapped.field.into_physical(),
        dropped_mean: mapped.dropped_mean,
    })
}

/// One sweep of the inversion map: `Vz + c - P|u|²/2` (physical).
pub fn normal_form_update<T: Real>(z: &Field<T>, u: &Field<T>, mean: T, tables: &SymbolTables<T>) -> Field<T> {
    let zs = z.in_representation(Representation::Spectral);
    let base = vz_with_mean(&zs, mean, tables);
    (base - half_p_modulus(&u.in_representation(Representation::Physical), tables)).into_physical()
}

fn vz_with_mean<T: Real>(zs: &Field<T>, mean: T, tables: &SymbolTables<T>) -> Field<T> {
    let mut base = zs.real_linear(&tables.u.values, &tables.one.values);
    base.values_mut()[0] += Complex::new(mean * zs.grid().volume(), T::zero());
    base
}

/// Solves `u = Vz - P|u|²/2` by fixed-point iteration from `u = Vz`,
/// with the mean of `u₁ + P|u|²/2` taken to be zero.
pub fn from_normal_form<T: Real>(z: &Field<T>, tol: T, maxiter: usize) -> NormalFormPair<T> {
    from_normal_form_with_mean(z, T::zero(), tol, maxiter)
}

/// [`from_normal_form`] restoring a known dropped mean `c`.
///
/// Stops once the successive `L²` difference is at most `tol·(1 + ‖u‖_{L²})`.
pub fn from_normal_form_with_mean<T: Real>(z: &Field<T>, mean: T, tol: T, maxiter: usize) -> NormalFormPair<T> {
    let tables = SymbolTables::new(z.grid());
    let zs = z.in_representation(Representation::Spectral);
    let base = vz_with_mean(&zs, mean, &tables);
    let mut u = base.clone().into_physical();
    let mut differences = Vec::new();
    let mut converged = false;
    for _ in 0..maxiter.max(1) {
        let next = (&base - &half_p_modulus(&u, &tables)).into_physical();
        let diff = sobolev_norm(&(&next - &u), T::zero(), false);
        let size = sobolev_norm(&next, T::zero(), false);
        differences.push(diff);
        u = next;
        if diff <= tol * (T::one() + size) {
            converged = true;
            break;
        }
        if !diff.is_finite() {
            break;
        }
    }
    NormalFormPair {
        z: zs.into_representation(z.representation()),
        u,
        converged,
        fixed_point_iters: differences.len(),
        differences,
    }
}

/// Spectral evaluator of `N²` and `N³` for one grid.
#[derive(Clone, Debug)]
pub struct Nonlinearity<T: Real> {
    grid: Grid<T>,
    tables: SymbolTables<T>,
    /// `-2PU^{-1}` with the divergence's `i` folded in: `-4i/(r[r])`, 0 at the origin.
    div_factor: Vec<T>,
    xi: Vec<[T; 3]>,
    dealias: bool,
}

impl<T: Real> Nonlinearity<T> {
    pub fn new(grid: &Grid<T>, dealias: bool) -> Self {
        let tables = SymbolTables::new(grid);
        let div_factor = grid
            .xi_norm2()
            .iter()
            .map(|&r2| {
                if r2 == T::zero() {
                    T::zero()
                } else {
                    -T::lit(4.0) / (r2.sqrt() * (T::lit(2.0) + r2).sqrt())
                }
            })
            .collect();
        Self {
            xi: (0..grid.len()).map(|i| grid.xi(i)).collect(),
            grid: grid.clone(),
            tables,
            div_factor,
            dealias,
        }
    }

    pub fn tables(&self) -> &SymbolTables<T> {
        &self.tables
    }

    /// `(N²(u), N³(u))` as spectral fields; `u` physical.
    pub fn eval(&self, u: &Field<T>) -> Result<(Field<T>, Field<T>)> {
        u.expect(Representation::Physical)?;
        let grid = &self.grid;
        let vals = u.values();
        let i = Complex::new(T::zero(), T::one());

        let u2_hat = real_spectrum(grid, vals.iter().map(|c| c.im));
        let mut n2 = Field::zeros(grid, Representation::Spectral);
        for a in 0..grid.dim() {
            let mut d = u2_hat.clone();
            for (x, k) in d.values_mut().iter_mut().zip(&self.xi) {
                *x = *x * Complex::new(T::zero(), k[a]);
            }
            let d = d.into_physical();
            let g = real_spectrum(grid, vals.iter().zip(d.values()).map(|(c, e)| c.re * e.re));
            for ((acc, x), k) in n2.values_mut().iter_mut().zip(g.values()).zip(&self.xi) {
                *acc += *x * k[a];
            }
        }
        for (acc, f) in n2.values_mut().iter_mut().zip(&self.div_factor) {
            *acc = *acc * i * *f;
        }
        // -2i u₁²
        let sq = real_spectrum(grid, vals.iter().map(|c| -T::lit(2.0) * c.re * c.re));
        for (acc, x) in n2.values_mut().iter_mut().zip(sq.values()) {
            *acc += *x * i;
        }

        // -i|u|²u₁ + U(|u|²u₂)
        let a = real_spectrum(grid, vals.iter().map(|c| -c.norm_sqr() * c.re));
        let b = real_spectrum(grid, vals.iter().map(|c| c.norm_sqr() * c.im));
        let mut n3 = a;
        for ((x, y), w) in n3.values_mut().iter_mut().zip(b.values()).zip(&self.tables.u.values) {
            *x = *x * i + *y * *w;
        }
        if self.dealias {
            n2 = n2.dealias();
            n3 = n3.dealias();
        }
        Ok((n2, n3))
    }

    /// `N²(u) + N³(u)`, spectral.
    pub fn total(&self, u: &Field<T>) -> Result<Field<T>> {
        let (a, b) = self.eval(u)?;
        Ok(a + b)
    }
}

/// `N²(u) = -2iu₁² - 2PU^{-1}∇·(u₁∇u₂)`, physical in and out.
pub fn n2<T: Real>(u: &Field<T>) -> Result<Field<T>> {
    Ok(Nonlinearity::new(u.grid(), false).eval(u)?.0.into_physical())
}

/// `N³(u) = -i|u|²u₁ + U(|u|²u₂)`, physical in and out.
pub fn n3<T: Real>(u: &Field<T>) -> Result<Field<T>> {
    Ok(Nonlinearity::new(u.grid(), false).eval(u)?.1.into_physical())
}

/// Torus source of the `z` equation: `N² + N³` plus `-2ic` at `ξ = 0`.
fn torus_source<T: Real>(nl: &Nonlinearity<T>, u: &Field<T>) -> Result<Field<T>> {
    let phys = u.in_representation(Representation::Physical);
    let mut n = nl.total(&phys)?;
    let len = T::from_usize_lossy(phys.values().len());
    let c = phys.values().iter().map(|v| v.re + v.norm_sqr() / T::lit(2.0)).sum::<T>() / len;
    let vol = phys.grid().volume();
    n.values_mut()[0] += Complex::new(T::zero(), -T::lit(2.0) * c * vol);
    Ok(n)
}

/// Largest `L²` mismatch, over the samples `t ≥ T`, between `z(t)` and
/// `e^{-iH(t-T)}z(T) + ∫_T^t e^{-iH(t-s)}[N²(u)+N³(u)](s) ds`, the integral
/// taken by the composite trapezoid rule on the sample times.
///
/// `T` must be one of the sample times.
pub fn duhamel_residual<T: Real>(ztraj: &Trajectory<T>, utraj: &Trajectory<T>, t0: T) -> Result<T> {
    if !ztraj.same_times(utraj) {
        return Err(Error::GridMismatch);
    }
    let times = ztraj.times();
    let scale = T::one().max(t0.abs());
    let start = times
        .iter()
        .position(|&t| (t - t0).abs() <= T::lit(1e-12) * scale)
        .ok_or_else(|| invalid(format!("T = {t0} is not a sample time")))?;
    let grid = ztraj.grid();
    let nl = Nonlinearity::new(grid, false);
    let sources: Vec<Field<T>> = utraj.fields()[start..]
        .par_iter()
        .map(|u| torus_source(&nl, u))
        .collect::<Result<_>>()?;
    let h = &nl.tables.h.values;
    let zs: Vec<Field<T>> = ztraj.fields()[start..]
        .iter()
        .map(|z| z.in_representation(Representation::Spectral))
        .collect();

    let mut free = zs[0].clone();
    let mut integral = Field::zeros(grid, Representation::Spectral);
    let mut worst = T::zero();
    let half = T::lit(0.5);
    for j in 1..zs.len() {
        let dt = times[start + j] - times[start + j - 1];
        let w = half * dt;
        for k in 0..h.len() {
            let e = cis(-h[k] * dt);
            let prev = integral.values()[k] + sources[j - 1].values()[k] * w;
            integral.values_mut()[k] = prev * e + sources[j].values()[k] * w;
            free.values_mut()[k] = free.values()[k] * e;
        }
        let mut r = zs[j].clone();
        for ((x, f), s) in r.values_mut().iter_mut().zip(free.values()).zip(integral.values()) {
            *x = *x - *f - *s;
        }
        worst = worst.max(sobolev_norm(&r, T::zero(), false));
    }
    Ok(worst)
}

/// Maps a `u` trajectory to its normal form, keeping the times.
pub fn normal_form_trajectory<T: Real>(utraj: &Trajectory<T>) -> Result<Trajectory<T>> {
    let fields: Vec<Field<T>> = utraj
        .fields()
        .par_iter()
        .map(|u| to_normal_form(&u.in_representation(Representation::Physical)).map(|nf| nf.z))
        .collect::<Result<_>>()?;
    Trajectory::from_parts(utraj.grid(), VariableTag::Z, utraj.times().to_vec(), fields)
}
