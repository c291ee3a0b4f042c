//! Complex scalar fields on a [`Grid`] and their Fourier pair.
//!
//! Normalization: the forward transform carries the quadrature weight,
//! `f̂(ξ_k) = h^d Σ_j f(x_j) e^{-i ξ_k·x_j}`, so spectral coefficients
//! approximate the continuum Fourier transform. The inverse is
//! `f(x_j) = L^{-d} Σ_k f̂(ξ_k) e^{i ξ_k·x_j}` and Parseval reads
//! `h^d Σ_j |f|² = L^{-d} Σ_k |f̂|²`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Representation {
    Physical,
    Spectral,
}

impl Representation {
    pub fn name(self) -> &'static str {
        match self {
            Representation::Physical => "physical",
            Representation::Spectral => "spectral",
        }
    }
}

/// Complex field sampled on a grid, in physical or spectral form.
#[derive(Clone, Debug)]
pub struct Field<T: Real> {
    grid: Grid<T>,
    values: Vec<Complex<T>>,
    repr: Representation,
}

impl<T: Real> Field<T> {
    pub fn zeros(grid: &Grid<T>, repr: Representation) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![Complex::new(T::zero(), T::zero()); grid.len()],
            repr,
        }
    }

    pub fn from_values(grid: &Grid<T>, values: Vec<Complex<T>>, repr: Representation) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
            repr,
        })
    }

    /// Samples `f(x)` at every grid point (physical representation).
    pub fn from_fn(grid: &Grid<T>, f: impl Fn([T; 3]) -> Complex<T>) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self {
            grid: grid.clone(),
            values,
            repr: Representation::Physical,
        }
    }

    /// Sets spectral coefficients from `f(ξ)`.
    pub fn from_spectral_fn(grid: &Grid<T>, f: impl Fn([T; 3]) -> Complex<T>) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.xi(i))).collect();
        Self {
            grid: grid.clone(),
            values,
            repr: Representation::Spectral,
        }
    }

    /// Real field from real samples.
    pub fn from_real_fn(grid: &Grid<T>, f: impl Fn([T; 3]) -> T) -> Self {
        Self::from_fn(grid, |x| Complex::new(f(x), T::zero()))
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    pub fn is_physical(&self) -> bool {
        self.repr == Representation::Physical
    }

    pub fn is_spectral(&self) -> bool {
        self.repr == Representation::Spectral
    }

    /// Forward transform; errors if already spectral.
    pub fn to_spectral(&self) -> Result<Self> {
        self.expect(Representation::Physical)?;
        Ok(self.clone().into_spectral())
    }

    /// Inverse transform; errors if already physical.
    pub fn to_physical(&self) -> Result<Self> {
        self.expect(Representation::Spectral)?;
        Ok(self.clone().into_physical())
    }

    /// Forward transform, no-op if already spectral.
    pub fn into_spectral(mut self) -> Self {
        if self.repr == Representation::Spectral {
            return self;
        }
        self.grid.forward_in_place(&mut self.values);
        self.repr = Representation::Spectral;
        self
    }

    /// Inverse transform, no-op if already physical.
    pub fn into_physical(mut self) -> Self {
        if self.repr == Representation::Physical {
            return self;
        }
        self.grid.inverse_in_place(&mut self.values);
        self.repr = Representation::Physical;
        self
    }

    /// Copy in the requested representation.
    pub fn in_representation(&self, repr: Representation) -> Self {
        match repr {
            Representation::Physical => self.clone().into_physical(),
            Representation::Spectral => self.clone().into_spectral(),
        }
    }

    pub fn into_representation(self, repr: Representation) -> Self {
        match repr {
            Representation::Physical => self.into_physical(),
            Representation::Spectral => self.into_spectral(),
        }
    }

    pub(crate) fn expect(&self, repr: Representation) -> Result<()> {
        if self.repr != repr {
            return Err(Error::WrongRepresentation {
                expected: repr.name(),
                found: self.repr.name(),
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            repr: self.repr,
        }
    }

    pub fn map_in_place(&mut self, f: impl Fn(Complex<T>) -> Complex<T>) {
        for v in &mut self.values {
            *v = f(*v);
        }
    }

    /// Pointwise combination of two fields in the same representation.
    pub fn zip_map(&self, other: &Self, f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>) -> Self {
        assert!(self.grid.same_as(&other.grid), "grid mismatch");
        assert_eq!(self.repr, other.repr, "representation mismatch");
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
            repr: self.repr,
        }
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        self.map(|v| v * c)
    }

    pub fn scale_real(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: Complex<T>, other: &Self) -> Self {
        self.zip_map(other, |x, y| x + y * a)
    }

    /// Pointwise product; both fields are taken to physical space first.
    pub fn product(&self, other: &Self) -> Self {
        let a = self.in_representation(Representation::Physical);
        let b = other.in_representation(Representation::Physical);
        a.zip_map(&b, |x, y| x * y)
    }

    pub fn conj(&self) -> Self {
        match self.repr {
            Representation::Physical => self.map(|v| v.conj()),
            Representation::Spectral => {
                let g = &self.grid;
                let values = (0..g.len()).map(|i| self.values[g.mirror(i)].conj()).collect();
                Self {
                    grid: g.clone(),
                    values,
                    repr: self.repr,
                }
            }
        }
    }

    /// Real part as a (real-valued) field, in the same representation.
    pub fn real_part(&self) -> Self {
        match self.repr {
            Representation::Physical => self.map(|v| Complex::new(v.re, T::zero())),
            Representation::Spectral => {
                let half = T::lit(0.5);
                let g = &self.grid;
                let values = (0..g.len())
                    .map(|i| (self.values[i] + self.values[g.mirror(i)].conj()) * half)
                    .collect();
                Self {
                    grid: g.clone(),
                    values,
                    repr: self.repr,
                }
            }
        }
    }

    /// Imaginary part as a (real-valued) field, in the same representation.
    pub fn imag_part(&self) -> Self {
        match self.repr {
            Representation::Physical => self.map(|v| Complex::new(v.im, T::zero())),
            Representation::Spectral => {
                let g = &self.grid;
                // (a - conj(a(-ξ))) / (2i)
                let factor = Complex::new(T::zero(), -T::lit(0.5));
                let values = (0..g.len())
                    .map(|i| (self.values[i] - self.values[g.mirror(i)].conj()) * factor)
                    .collect();
                Self {
                    grid: g.clone(),
                    values,
                    repr: self.repr,
                }
            }
        }
    }

    /// Splits `f` into the real fields `(Re f, Im f)`.
    pub fn split(&self) -> (Self, Self) {
        (self.real_part(), self.imag_part())
    }

    /// `re + i·im` for real-valued fields `re`, `im`.
    pub fn compose(re: &Self, im: &Self) -> Self {
        re.axpy(Complex::new(T::zero(), T::one()), im)
    }

    /// `A Re f + i B Im f` for even real symbols `A`, `B` given as lattice
    /// tables, computed in one pass over the spectral coefficients.
    /// `f` must be spectral.
    pub fn real_linear(&self, re_symbol: &[T], im_symbol: &[T]) -> Self {
        debug_assert!(self.is_spectral());
        let mut values = vec![Complex::new(T::zero(), T::zero()); self.values.len()];
        real_linear_into(&self.grid, &self.values, re_symbol, im_symbol, &mut values);
        Self {
            grid: self.grid.clone(),
            values,
            repr: self.repr,
        }
    }

    /// Spatial mean `L^{-d} ∫ f`.
    pub fn mean(&self) -> Complex<T> {
        match self.repr {
            Representation::Spectral => self.values[0] / self.grid.volume(),
            Representation::Physical => {
                let s = self.values.iter().fold(Complex::new(T::zero(), T::zero()), |a, &b| a + b);
                s / T::from_usize_lossy(self.values.len())
            }
        }
    }

    /// Largest modulus over all stored values (grid points or coefficients).
    pub fn max_abs(&self) -> T {
        self.values.iter().map(|v| v.norm()).fold(T::zero(), T::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// `‖a - b‖_∞ / ‖b‖_∞` on stored values; 0 when both vanish.
    pub fn relative_max_diff(&self, reference: &Self) -> T {
        let a = self.in_representation(reference.repr);
        let num = a
            .values
            .iter()
            .zip(&reference.values)
            .map(|(x, y)| (*x - *y).norm())
            .fold(T::zero(), T::max);
        let den = reference.max_abs();
        if den == T::zero() {
            num
        } else {
            num / den
        }
    }

    /// Zeroes every coefficient with some axis index `|k| > n/3`.
    pub fn dealias(&self) -> Self {
        let repr = self.repr;
        let mut s = self.clone().into_spectral();
        dealias_in_place(&mut s);
        s.into_representation(repr)
    }
}

/// Raw-slice form of [`Field::real_linear`].
pub(crate) fn real_linear_into<T: Real>(
    grid: &Grid<T>,
    src: &[Complex<T>],
    re_symbol: &[T],
    im_symbol: &[T],
    dst: &mut [Complex<T>],
) {
    let half = T::lit(0.5);
    for (i, out) in dst.iter_mut().enumerate() {
        let a = src[i];
        let b = src[grid.mirror(i)].conj();
        *out = ((a + b) * re_symbol[i] + (a - b) * im_symbol[i]) * half;
    }
}

pub(crate) fn dealias_values<T: Real>(grid: &Grid<T>, values: &mut [Complex<T>]) {
    for (v, &keep) in values.iter_mut().zip(grid.dealias_keep()) {
        if !keep {
            *v = Complex::new(T::zero(), T::zero());
        }
    }
}

pub(crate) fn dealias_in_place<T: Real>(f: &mut Field<T>) {
    debug_assert!(f.is_spectral());
    let g = f.grid.clone();
    for (v, &keep) in f.values.iter_mut().zip(g.dealias_keep()) {
        if !keep {
            *v = Complex::new(T::zero(), T::zero());
        }
    }
}

impl<'a, T: Real> Add<&'a Field<T>> for &'a Field<T> {
    type Output = Field<T>;
    fn add(self, rhs: &'a Field<T>) -> Field<T> {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl<'a, T: Real> Sub<&'a Field<T>> for &'a Field<T> {
    type Output = Field<T>;
    fn sub(self, rhs: &'a Field<T>) -> Field<T> {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl<T: Real> Add for Field<T> {
    type Output = Field<T>;
    fn add(mut self, rhs: Field<T>) -> Field<T> {
        self += &rhs;
        self
    }
}

impl<T: Real> Sub for Field<T> {
    type Output = Field<T>;
    fn sub(mut self, rhs: Field<T>) -> Field<T> {
        self -= &rhs;
        self
    }
}

impl<'a, T: Real> AddAssign<&'a Field<T>> for Field<T> {
    fn add_assign(&mut self, rhs: &'a Field<T>) {
        assert!(self.grid.same_as(&rhs.grid), "grid mismatch");
        assert_eq!(self.repr, rhs.repr, "representation mismatch");
        for (a, b) in self.values.iter_mut().zip(&rhs.values) {
            *a = *a + *b;
        }
    }
}

impl<'a, T: Real> SubAssign<&'a Field<T>> for Field<T> {
    fn sub_assign(&mut self, rhs: &'a Field<T>) {
        assert!(self.grid.same_as(&rhs.grid), "grid mismatch");
        assert_eq!(self.repr, rhs.repr, "representation mismatch");
        for (a, b) in self.values.iter_mut().zip(&rhs.values) {
            *a = *a - *b;
        }
    }
}

impl<T: Real> Neg for Field<T> {
    type Output = Field<T>;
    fn neg(mut self) -> Field<T> {
        self.map_in_place(|v| -v);
        self
    }
}

impl<T: Real> Mul<Complex<T>> for &Field<T> {
    type Output = Field<T>;
    fn mul(self, rhs: Complex<T>) -> Field<T> {
        self.scale(rhs)
    }
}

impl<T: Real> Mul<T> for &Field<T> {
    type Output = Field<T>;
    fn mul(self, rhs: T) -> Field<T> {
        self.scale_real(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::random_field;

    fn grid2() -> Grid<f64> {
        Grid::new(2, 16, 7.0).unwrap()
    }

    #[test]
    fn constant_has_all_mass_at_origin() {
        let g = grid2();
        let f = Field::from_fn(&g, |_| Complex::new(2.5, -1.0)).into_spectral();
        let vol = g.volume();
        assert!((f.values()[0] - Complex::new(2.5 * vol, -vol)).norm() < 1e-12 * vol);
        for v in &f.values()[1..] {
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn plane_wave_is_single_coefficient() {
        let g = grid2();
        let k = [3i64, -2];
        let target = g.flat_from_lattice(&k);
        let xi0 = g.xi(target);
        let f = Field::from_fn(&g, |x| crate::scalar::cis(x[0] * xi0[0] + x[1] * xi0[1])).into_spectral();
        for (i, v) in f.values().iter().enumerate() {
            if i == target {
                assert!((v.norm() - g.volume()).abs() < 1e-10);
            } else {
                assert!(v.norm() < 1e-10, "leak at {i}: {v}");
            }
        }
    }

    #[test]
    fn round_trip_and_errors() {
        let g = Grid::<f64>::new(3, 8, 2.0).unwrap();
        let f = random_field(&g, 3);
        let back = f.to_spectral().unwrap().to_physical().unwrap();
        assert!(back.relative_max_diff(&f) <= 1e-12);
        assert!(f.to_physical().is_err());
        assert!(f.to_spectral().unwrap().to_spectral().is_err());
    }

    #[test]
    fn spectral_split_matches_physical_split() {
        let g = grid2();
        let f = random_field(&g, 11);
        let (re, im) = f.to_spectral().unwrap().split();
        let re = re.into_physical();
        let im = im.into_physical();
        for ((a, r), i) in f.values().iter().zip(re.values()).zip(im.values()) {
            assert!((a.re - r.re).abs() < 1e-12 && r.im.abs() < 1e-12);
            assert!((a.im - i.re).abs() < 1e-12 && i.im.abs() < 1e-12);
        }
    }

    #[test]
    fn dealias_behaviour() {
        let g = grid2();
        let low = Field::from_spectral_fn(&g, |xi| {
            let r2 = xi[0] * xi[0] + xi[1] * xi[1];
            Complex::new((-r2).exp(), 0.0)
        });
        let k_cut = g.frequency_step() * (g.n() as f64 / 3.0);
        let supported = low.map(|v| v);
        let mut supported = supported;
        for i in 0..g.len() {
            let xi = g.xi(i);
            if xi[0].abs() > k_cut || xi[1].abs() > k_cut {
                supported.values_mut()[i] = Complex::new(0.0, 0.0);
            }
        }
        assert!(supported.dealias().relative_max_diff(&supported) == 0.0);

        let nyq = g.flat_from_lattice(&[-8, 0]);
        let mut f = Field::zeros(&g, Representation::Spectral);
        f.values_mut()[nyq] = Complex::new(1.0, 0.0);
        assert_eq!(f.dealias().max_abs(), 0.0);

        let r = random_field(&g, 5).into_spectral();
        let once = r.dealias();
        let twice = once.dealias();
        assert_eq!(once.relative_max_diff(&twice), 0.0);
    }
}
