//! Radial symbols of the linearized Gross–Pitaevskii operators.

use num_complex::Complex;

use crate::error::{invalid, Result};
use crate::multiplier::SymbolFn;
use crate::scalar::Real;

/// Named radial symbols, `r = |ξ|`, `[r] = √(2+r²)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SymbolId {
    /// `r/[r]`
    U,
    /// `[r]/r`, singular at the origin
    Uinv,
    /// `r[r]`, the Bogoliubov dispersion
    H,
    /// `2/[r]²`
    P,
    /// `r²/[r]²`
    Q,
    /// `1/[r]²`
    InvTwoMinusLap,
}

impl SymbolId {
    pub const ALL: [SymbolId; 6] = [
        SymbolId::U,
        SymbolId::Uinv,
        SymbolId::H,
        SymbolId::P,
        SymbolId::Q,
        SymbolId::InvTwoMinusLap,
    ];

    /// Closed-form value; `Uinv` at `r = 0` is rejected.
    pub fn value<T: Real>(self, r: T) -> Result<T> {
        if r < T::zero() || !r.is_finite() {
            return Err(invalid(format!("symbol argument must be finite and >= 0, got {r}")));
        }
        if self == SymbolId::Uinv && r == T::zero() {
            return Err(invalid("U^{-1} is singular at r = 0"));
        }
        Ok(self.value_unchecked(r))
    }

    /// Closed-form value without argument checks.
    #[inline]
    pub fn value_unchecked<T: Real>(self, r: T) -> T {
        let two = T::lit(2.0);
        let r2 = r * r;
        match self {
            SymbolId::U => r / bracket(r),
            SymbolId::Uinv => bracket(r) / r,
            SymbolId::H => r * bracket(r),
            SymbolId::P => two / (two + r2),
            SymbolId::Q => r2 / (two + r2),
            SymbolId::InvTwoMinusLap => T::one() / (two + r2),
        }
    }
}

impl<T: Real> SymbolFn<T> for SymbolId {
    fn eval(&self, _xi: &[T; 3], r: T) -> Complex<T> {
        Complex::new(self.value_unchecked(r), T::zero())
    }

    fn singular_at_origin(&self) -> bool {
        *self == SymbolId::Uinv
    }
}

/// `symbol_value` in free-function form.
pub fn symbol_value<T: Real>(id: SymbolId, r: T) -> Result<T> {
    id.value(r)
}

/// `[r] = √(2 + r²)`.
#[inline]
pub fn bracket<T: Real>(r: T) -> T {
    (T::lit(2.0) + r * r).sqrt()
}

/// Japanese bracket `⟨r⟩ = √(1 + r²)`.
#[inline]
pub fn japanese<T: Real>(r: T) -> T {
    (T::one() + r * r).sqrt()
}

/// `H(r) = r[r]`.
#[inline]
pub fn dispersion<T: Real>(r: T) -> T {
    r * bracket(r)
}

/// `H'(r) = 2(1+r²)/[r]`, continuous at `r = 0` with value `√2`.
#[inline]
pub fn dispersion_d1<T: Real>(r: T) -> T {
    T::lit(2.0) * (T::one() + r * r) / bracket(r)
}

#[inline]
pub fn dispersion_d2<T: Real>(r: T) -> T {
    T::lit(2.0) * r * (T::lit(3.0) + r * r) / bracket(r).powi(3)
}

#[inline]
pub fn dispersion_d3<T: Real>(r: T) -> T {
    T::lit(12.0) / bracket(r).powi(5)
}

/// Derivatives of `H` and of `I(r) = H''(r)/r - H'(r)/r²` at `r > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HDerivatives<T> {
    pub h1: T,
    pub h2: T,
    pub h3: T,
    pub h4: T,
    pub i: T,
    pub i1: T,
}

/// The six closed forms; `r` must be positive.
pub fn symbol_derivatives<T: Real>(r: T) -> Result<HDerivatives<T>> {
    if !(r > T::zero()) || !r.is_finite() {
        return Err(invalid(format!("derivatives need r > 0, got {r}")));
    }
    let b = bracket(r);
    let r2 = r * r;
    Ok(HDerivatives {
        h1: dispersion_d1(r),
        h2: dispersion_d2(r),
        h3: dispersion_d3(r),
        h4: -T::lit(60.0) * r / b.powi(7),
        i: -T::lit(4.0) / (r2 * b.powi(3)),
        i1: T::lit(4.0) * (T::lit(4.0) + T::lit(5.0) * r2) / (r2 * r * b.powi(5)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        assert!((SymbolId::H.value(1.0f64).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert!((SymbolId::H.value(1.0f64).unwrap() - 1.7320508).abs() < 1e-7);
        assert_eq!(SymbolId::P.value(0.0f64).unwrap(), 1.0);
        assert_eq!(SymbolId::Q.value(0.0f64).unwrap(), 0.0);
        assert!(SymbolId::Uinv.value(0.0f64).is_err());
        assert!(SymbolId::U.value(-1.0f64).is_err());
        for k in 0..50 {
            let r = 10f64.powf(-3.0 + 6.0 * k as f64 / 49.0);
            let prod = SymbolId::U.value(r).unwrap() * SymbolId::Uinv.value(r).unwrap();
            assert!((prod - 1.0).abs() < 1e-14);
            let pq = SymbolId::P.value(r).unwrap() + SymbolId::Q.value(r).unwrap();
            assert!((pq - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn derivative_reference_values() {
        let d = symbol_derivatives(1.0f64).unwrap();
        assert!((d.h2 - 8.0 / (3.0 * 3f64.sqrt())).abs() < 1e-14);
        assert!((d.h2 - 1.5396007).abs() < 1e-7);
        assert!((d.i + 4.0 / 3f64.powf(1.5)).abs() < 1e-14);
        assert!((d.i + 0.7698004).abs() < 1e-7);
        assert!((dispersion_d1(0.0f64) - 2f64.sqrt()).abs() < 1e-15);
        assert!((dispersion_d1(1e-9f64) - 1.4142136).abs() < 1e-7);
        assert!(symbol_derivatives(0.0f64).is_err());
        assert!(symbol_derivatives(-1.0f64).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let h = SymbolId::H.value(1.0f32).unwrap();
        assert!((h - 3f32.sqrt()).abs() < 1e-6);
    }
}
