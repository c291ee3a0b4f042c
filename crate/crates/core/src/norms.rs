//! Spatial norms: Lebesgue, Sobolev and Besov.

use num_complex::Complex;

use crate::error::{invalid, Result};
use crate::field::{Field, Representation};
use crate::grid::Grid;
use crate::scalar::Real;

/// Exponent of a Lebesgue norm; `Infinity` selects the max modulus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_infinite() && p > 0.0 {
            Ok(Exponent::Infinity)
        } else if p >= 1.0 {
            Ok(Exponent::Finite(p))
        } else {
            Err(invalid(format!("Lebesgue exponent must be >= 1, got {p}")))
        }
    }
}

/// Riemann-sum `L^p` norm `(Σ |f|^p h^d)^{1/p}` of a physical field.
pub fn lp_norm<T: Real>(f: &Field<T>, p: f64) -> Result<T> {
    f.expect(Representation::Physical)?;
    Ok(lp_norm_values(f.grid(), f.values(), Exponent::new(p)?))
}

pub(crate) fn lp_norm_values<T: Real>(grid: &Grid<T>, values: &[Complex<T>], p: Exponent) -> T {
    match p {
        Exponent::Infinity => values.iter().map(|v| v.norm()).fold(T::zero(), T::max),
        Exponent::Finite(p) if p == 2.0 => {
            let s: T = values.iter().map(|v| v.norm_sqr()).sum();
            (s * grid.cell_volume()).sqrt()
        }
        Exponent::Finite(p) => {
            let pt = T::lit(p);
            let s: T = values.iter().map(|v| v.norm().powf(pt)).sum();
            (s * grid.cell_volume()).powf(T::one() / pt)
        }
    }
}

/// `L^p` norm of any field, transforming to physical space if needed.
pub fn lp_norm_any<T: Real>(f: &Field<T>, p: f64) -> Result<T> {
    let exp = Exponent::new(p)?;
    if f.is_physical() {
        Ok(lp_norm_values(f.grid(), f.values(), exp))
    } else {
        let phys = f.clone().into_physical();
        Ok(lp_norm_values(phys.grid(), phys.values(), exp))
    }
}

/// `(L^{-d} Σ_ξ w(ξ)² |f̂(ξ)|²)^{1/2}` with `w = |ξ|^s` (zero mode dropped)
/// or `w = ⟨ξ⟩^s`.
pub fn sobolev_norm<T: Real>(f: &Field<T>, s: T, homogeneous: bool) -> T {
    let spec = f.in_representation(Representation::Spectral);
    let grid = spec.grid();
    let sum: T = spec
        .values()
        .iter()
        .zip(grid.xi_norm2())
        .map(|(v, &r2)| {
            let w2 = if homogeneous {
                if r2 == T::zero() {
                    return T::zero();
                }
                r2.powf(s)
            } else {
                (T::one() + r2).powf(s)
            };
            w2 * v.norm_sqr()
        })
        .sum();
    (sum / grid.volume()).sqrt()
}

/// `‖⟨∇⟩^s f‖_{L^q}`, the Bessel-potential norm `H^s_q`.
pub fn bessel_lq_norm<T: Real>(f: &Field<T>, s: T, q: f64) -> Result<T> {
    let exp = Exponent::new(q)?;
    let mut spec = f.in_representation(Representation::Spectral);
    let xi2 = spec.grid().xi_norm2().to_vec();
    for (v, r2) in spec.values_mut().iter_mut().zip(xi2) {
        *v = *v * (T::one() + r2).powf(s / T::lit(2.0));
    }
    let phys = spec.into_physical();
    Ok(lp_norm_values(phys.grid(), phys.values(), exp))
}

/// Physical-space gradient components `∂_a f`, `a < d`.
pub fn gradient<T: Real>(f: &Field<T>) -> Vec<Field<T>> {
    let spec = f.in_representation(Representation::Spectral);
    let grid = spec.grid().clone();
    (0..grid.dim())
        .map(|a| {
            let mut g = spec.clone();
            for (i, v) in g.values_mut().iter_mut().enumerate() {
                let xi = grid.xi(i)[a];
                *v = *v * Complex::new(T::zero(), xi);
            }
            g.into_physical()
        })
        .collect()
}

/// `‖|∇f|‖_{L^p}` with `|∇f|² = Σ_a |∂_a f|²`.
pub fn gradient_lp_norm<T: Real>(f: &Field<T>, p: f64) -> Result<T> {
    let exp = Exponent::new(p)?;
    let grads = gradient(f);
    let grid = f.grid();
    let mags: Vec<Complex<T>> = (0..grid.len())
        .map(|i| {
            let s: T = grads.iter().map(|g| g.values()[i].norm_sqr()).sum();
            Complex::new(s.sqrt(), T::zero())
        })
        .collect();
    Ok(lp_norm_values(grid, &mags, exp))
}

/// Smooth dyadic partition on the nonzero lattice frequencies.
///
/// Block `j` starts from a bump in `s = log2|ξ| - j`: equal to one on
/// `|s| ≤ (1-τ)/2`, a `cos²` taper across `|s| ∈ [(1-τ)/2, (1+τ)/2]` and zero
/// beyond, so `supp χ_j ⊂ {2^{j-1} ≤ |ξ| ≤ 2^{j+1}}`. The bumps are then
/// normalized so that `Σ_j χ_j² = 1`, which makes `Ḃ⁰_{2,2}` and `Ḣ⁰` agree
/// exactly while keeping the blocks smooth.
#[derive(Clone, Debug)]
pub struct DyadicPartition<T: Real> {
    pub j_min: i32,
    pub j_max: i32,
    pub taper: T,
    /// `blocks[j - j_min][flat]`.
    blocks: Vec<Vec<T>>,
}

/// Default taper width in octaves.
pub const DEFAULT_TAPER: f64 = 1.0;

fn bump<T: Real>(s: T, taper: T) -> T {
    let half = T::lit(0.5);
    let a = s.abs();
    let lo = half * (T::one() - taper);
    let hi = half * (T::one() + taper);
    if a <= lo {
        T::one()
    } else if a >= hi {
        T::zero()
    } else {
        let theta = T::FRAC_PI_2() * (a - lo) / (hi - lo);
        theta.cos().powi(2)
    }
}

impl<T: Real> DyadicPartition<T> {
    pub fn new(grid: &Grid<T>) -> Self {
        Self::with_taper(grid, T::lit(DEFAULT_TAPER))
    }

    pub fn with_taper(grid: &Grid<T>, taper: T) -> Self {
        let xi2 = grid.xi_norm2();
        let r_min = grid.frequency_step();
        let r_max = xi2.iter().fold(T::zero(), |a, &b| a.max(b)).sqrt();
        let j_min = r_min.log2().round().to_f64_lossy() as i32 - 1;
        let j_max = r_max.log2().round().to_f64_lossy() as i32 + 1;
        let mut blocks = vec![vec![T::zero(); grid.len()]; (j_max - j_min + 1) as usize];
        for (i, &r2) in xi2.iter().enumerate() {
            if r2 == T::zero() {
                continue;
            }
            let l = r2.sqrt().log2();
            let mut total = T::zero();
            for (b, j) in (j_min..=j_max).enumerate() {
                let v = bump(l - T::lit(j as f64), taper);
                blocks[b][i] = v;
                total = total + v * v;
            }
            if total > T::zero() {
                let norm = total.sqrt();
                for block in blocks.iter_mut() {
                    block[i] = block[i] / norm;
                }
            }
        }
        Self {
            j_min,
            j_max,
            taper,
            blocks,
        }
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Symbol `χ_j` tabulated on the lattice.
    pub fn block(&self, j: i32) -> Option<&[T]> {
        if j < self.j_min || j > self.j_max {
            return None;
        }
        Some(&self.blocks[(j - self.j_min) as usize])
    }

    /// `Δ_j f` in physical space.
    pub fn project(&self, f: &Field<T>, j: i32) -> Option<Field<T>> {
        let chi = self.block(j)?;
        let mut s = f.in_representation(Representation::Spectral);
        for (v, c) in s.values_mut().iter_mut().zip(chi) {
            *v = *v * *c;
        }
        Some(s.into_physical())
    }

    /// Maximum of `|Σ_j χ_j(ξ)² - 1|` over nonzero lattice frequencies.
    pub fn partition_defect(&self, grid: &Grid<T>) -> T {
        let mut worst = T::zero();
        for (i, &r2) in grid.xi_norm2().iter().enumerate() {
            if r2 == T::zero() {
                continue;
            }
            let s: T = self.blocks.iter().map(|b| b[i] * b[i]).sum();
            worst = worst.max((s - T::one()).abs());
        }
        worst
    }
}

/// `ℓ^q_j (2^{js} ‖Δ_j f‖_{L^p})` over the blocks of `partition`.
pub fn besov_norm_with<T: Real>(f: &Field<T>, s: T, p: f64, q: f64, partition: &DyadicPartition<T>) -> Result<T> {
    let pe = Exponent::new(p)?;
    let qe = Exponent::new(q)?;
    let spec = f.in_representation(Representation::Spectral);
    let mut terms = Vec::with_capacity(partition.block_count());
    for j in partition.j_min..=partition.j_max {
        let block = partition.project(&spec, j).expect("j in range");
        let lp = lp_norm_values(block.grid(), block.values(), pe);
        terms.push(T::lit(2.0).powf(s * T::lit(j as f64)) * lp);
    }
    Ok(match qe {
        Exponent::Infinity => terms.into_iter().fold(T::zero(), T::max),
        Exponent::Finite(q) => {
            let qt = T::lit(q);
            let sum: T = terms.into_iter().map(|t| t.powf(qt)).sum();
            sum.powf(T::one() / qt)
        }
    })
}

/// Homogeneous Besov norm `Ḃ^s_{p,q}` with the default partition for the
/// field's grid. The zero mode is ignored.
pub fn besov_norm<T: Real>(f: &Field<T>, s: T, p: f64, q: f64) -> Result<T> {
    let partition = DyadicPartition::new(f.grid());
    besov_norm_with(f, s, p, q, &partition)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cis;
    use crate::testing::random_field;

    #[test]
    fn constant_l2_and_plane_wave_sup() {
        let g = Grid::<f64>::new(2, 16, 3.0).unwrap();
        let c = Complex::new(0.6, 0.8);
        let f = Field::from_fn(&g, |_| c);
        let l2 = lp_norm(&f, 2.0).unwrap();
        assert!((l2 - 1.0 * g.volume().sqrt()).abs() < 1e-12);
        let xi0 = g.xi(g.flat_from_lattice(&[2, 1]));
        let w = Field::from_fn(&g, |x| cis(x[0] * xi0[0] + x[1] * xi0[1]));
        assert!((lp_norm(&w, f64::INFINITY).unwrap() - 1.0).abs() < 1e-14);
        assert!(lp_norm(&w, 0.5).is_err());
        assert!(lp_norm(&w.to_spectral().unwrap(), 2.0).is_err());
    }

    #[test]
    fn gaussian_l2() {
        // ∫ e^{-|x|²} dx = π in 2D
        let g = Grid::<f64>::new(2, 256, 40.0).unwrap();
        let f = Field::from_real_fn(&g, |x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp());
        let l2 = lp_norm(&f, 2.0).unwrap();
        assert!((l2 - std::f64::consts::PI.sqrt()).abs() < 1e-6);
        assert!((l2 - 1.772454).abs() < 1e-6);
    }

    #[test]
    fn sobolev_consistency() {
        let g = Grid::<f64>::new(2, 16, 5.0).unwrap();
        let f = random_field(&g, 1);
        let h0 = sobolev_norm(&f, 0.0, false);
        assert!((h0 - lp_norm(&f, 2.0).unwrap()).abs() <= 1e-12 * h0);

        let g = Grid::<f64>::new(2, 16, std::f64::consts::TAU).unwrap();
        let w = Field::from_fn(&g, |x| cis(x[0]));
        let a = sobolev_norm(&w, 1.0, true);
        let b = sobolev_norm(&w, 0.0, true);
        assert!((a - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn gaussian_h1_seminorm() {
        // φ = e^{-|x|²/2}: ‖∇φ‖² = ∫ |x|² e^{-|x|²} = π in 2D
        let g = Grid::<f64>::new(2, 128, 30.0).unwrap();
        let f = Field::from_real_fn(&g, |x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp());
        let h1 = sobolev_norm(&f, 1.0, true);
        let exact = std::f64::consts::PI.sqrt();
        assert!((h1 - exact).abs() <= 1e-6 * exact);
    }

    #[test]
    fn partition_is_exact_and_supported() {
        let g = Grid::<f64>::new(2, 64, 20.0).unwrap();
        let part = DyadicPartition::new(&g);
        assert!(part.partition_defect(&g) < 1e-12);
        for j in part.j_min..=part.j_max {
            let b = part.block(j).unwrap();
            for (i, &r2) in g.xi_norm2().iter().enumerate() {
                if b[i] > 0.0 {
                    let r = r2.sqrt();
                    assert!(r >= 2f64.powi(j - 1) * (1.0 - 1e-12) && r <= 2f64.powi(j + 1) * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn besov_single_block_and_l2() {
        let g = Grid::<f64>::new(2, 32, std::f64::consts::TAU).unwrap();
        // |ξ0| = 4 = 2^2 sits in the flat top of block 2
        let w = Field::from_fn(&g, |x| cis(4.0 * x[0]));
        for s in [0.0, 0.5, 1.0, -1.0] {
            let b = besov_norm(&w, s, 2.0, 1.0).unwrap();
            let direct = 2f64.powf(2.0 * s) * lp_norm(&w, 2.0).unwrap();
            assert!((b - direct).abs() <= 0.05 * direct);
        }
        assert_eq!(besov_norm(&Field::zeros(&g, Representation::Physical), 1.0, 1.0, 1.0).unwrap(), 0.0);

        let g = Grid::<f64>::new(2, 128, 40.0).unwrap();
        let f = Field::from_real_fn(&g, |x| (-(x[0] * x[0] + x[1] * x[1]) / 4.0).exp());
        let b = besov_norm(&f, 0.0, 2.0, 2.0).unwrap();
        let h = sobolev_norm(&f, 0.0, true);
        assert!((b - h).abs() <= 1e-2 * h, "besov {b} vs sobolev {h}");
    }

    /// With smooth blocks the torus `Ḃ¹_{1,1}` norm of a fixed Gaussian
    /// converges geometrically as the box grows: each doubling adds one
    /// low-frequency block of roughly half the previous weight.
    #[test]
    fn besov_l1_converges_with_box() {
        let norms: Vec<(f64, f64)> = [(64, 40.0), (128, 80.0), (256, 160.0)]
            .iter()
            .map(|&(n, l)| {
                let g = Grid::<f64>::new(2, n, l).unwrap();
                let f = Field::from_real_fn(&g, |x| (-(x[0] * x[0] + x[1] * x[1]) / 8.0).exp());
                (besov_norm(&f, 1.0, 1.0, 1.0).unwrap(), gradient_lp_norm(&f, 1.0).unwrap())
            })
            .collect();
        for &(b, g1) in &norms {
            assert!(b >= g1, "{norms:?}");
        }
        let (d1, d2) = (norms[1].0 - norms[0].0, norms[2].0 - norms[1].0);
        assert!(d2 > 0.0 && d2 < 0.75 * d1, "{norms:?}");
    }
}
