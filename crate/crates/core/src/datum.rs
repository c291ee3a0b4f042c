//! Initial data for experiments.

use num_complex::Complex;

use crate::error::{invalid, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::scalar::Real;

/// `a e^{-|x-c|²/(2w²)} e^{ik·(x-c)}`; `k = 0` gives a real Gaussian.
pub fn gaussian_datum<T: Real>(grid: &Grid<T>, amplitude: f64, width: f64, center: [f64; 3], wavevector: [f64; 3]) -> Result<Field<T>> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(invalid(format!("width must be positive, got {width}")));
    }
    if !amplitude.is_finite() {
        return Err(invalid(format!("amplitude must be finite, got {amplitude}")));
    }
    let half = grid.box_length().to_f64_lossy() / 2.0;
    let d = grid.dim();
    if center[..d].iter().any(|c| !(c.abs() < half)) || center[d..].iter().any(|&c| c != 0.0) {
        return Err(invalid(format!("center {center:?} lies outside the box [-{half}, {half})^{d}")));
    }
    let w2 = 2.0 * width * width;
    Ok(Field::from_fn(grid, |x: [T; 3]| {
        let y: [f64; 3] = std::array::from_fn(|i| x[i].to_f64_lossy() - center[i]);
        let r2: f64 = y.iter().map(|v| v * v).sum();
        let phase: f64 = y.iter().zip(&wavevector).map(|(a, b)| a * b).sum();
        let z = Complex::from_polar(amplitude * (-r2 / w2).exp(), phase);
        Complex::new(T::lit(z.re), T::lit(z.im))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::{besov_norm, sobolev_norm};

    #[test]
    fn zero_amplitude_and_l2_norm() {
        let g = Grid::<f64>::new(2, 64, 40.0).unwrap();
        let z = gaussian_datum(&g, 0.0, 2.0, [0.0; 3], [0.0; 3]).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        for (dim, n, l) in [(2, 64, 40.0), (3, 32, 24.0)] {
            let g = Grid::<f64>::new(dim, n, l).unwrap();
            let (a, w) = (0.3, 1.5);
            let f = gaussian_datum(&g, a, w, [1.0, -0.5, 0.0], [0.7, 0.0, 0.0]).unwrap();
            // ‖f‖² = a² ∫ e^{-r²/w²} = a² (πw²)^{d/2}
            let exact_l2 = a * (std::f64::consts::PI * w * w).powf(dim as f64 / 4.0);
            assert!((sobolev_norm(&f, 0.0, false) - exact_l2).abs() < 1e-6 * exact_l2);
        }
    }

    #[test]
    fn besov_is_linear_in_amplitude() {
        let g = Grid::<f64>::new(2, 64, 40.0).unwrap();
        let b1 = besov_norm(&gaussian_datum(&g, 1e-3, 2.0, [0.0; 3], [0.0; 3]).unwrap(), 1.0, 1.0, 1.0).unwrap();
        let b3 = besov_norm(&gaussian_datum(&g, 3e-3, 2.0, [0.0; 3], [0.0; 3]).unwrap(), 1.0, 1.0, 1.0).unwrap();
        assert!((b3 / b1 - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = Grid::<f64>::new(2, 16, 10.0).unwrap();
        assert!(gaussian_datum(&g, 1.0, 0.0, [0.0; 3], [0.0; 3]).is_err());
        assert!(gaussian_datum(&g, 1.0, 1.0, [6.0, 0.0, 0.0], [0.0; 3]).is_err());
        assert!(gaussian_datum(&g, 1.0, 1.0, [0.0, 0.0, 1.0], [0.0; 3]).is_err());
    }
}
