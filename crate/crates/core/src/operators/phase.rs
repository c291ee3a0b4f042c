//! Bilinear phases `Φ(ξ, η)` and their `η`-derivatives.
//!
//! Vectors are `[T; 3]`; planar problems leave the third component at 0.

use crate::error::{invalid, Result};
use crate::operators::symbols::{bracket, dispersion, dispersion_d1, dispersion_d2, dispersion_d3};
use crate::scalar::Real;

/// Distance from `η = 0` and `η = ξ` below which derivatives are refused.
pub const GUARD_RADIUS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PhaseKind {
    /// `H(ξ) + H(η) - H(η-ξ)`
    Phi0,
    /// `H(ξ) - H(η) - H(η-ξ)`
    PhiPlus,
    /// `H(ξ) + H(η) + H(η-ξ)`
    PhiMinus,
}

impl PhaseKind {
    pub const ALL: [PhaseKind; 3] = [PhaseKind::Phi0, PhaseKind::PhiPlus, PhaseKind::PhiMinus];

    /// Signs `(σ_η, σ_{η-ξ})` multiplying `H(η)` and `H(η-ξ)`.
    fn signs<T: Real>(self) -> (T, T) {
        match self {
            PhaseKind::Phi0 => (T::one(), -T::one()),
            PhaseKind::PhiPlus => (-T::one(), -T::one()),
            PhaseKind::PhiMinus => (T::one(), T::one()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PhaseKind::Phi0 => "phi0",
            PhaseKind::PhiPlus => "phi_plus",
            PhaseKind::PhiMinus => "phi_minus",
        }
    }
}

impl std::str::FromStr for PhaseKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phi0" | "Phi0" => Ok(PhaseKind::Phi0),
            "phi_plus" | "phi+" | "PhiPlus" => Ok(PhaseKind::PhiPlus),
            "phi_minus" | "phi-" | "PhiMinus" => Ok(PhaseKind::PhiMinus),
            other => Err(invalid(format!("unknown phase kind {other:?}"))),
        }
    }
}

pub fn norm<T: Real>(v: &[T; 3]) -> T {
    dot(v, v).sqrt()
}

pub fn dot<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn sub<T: Real>(a: &[T; 3], b: &[T; 3]) -> [T; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn unit<T: Real>(v: &[T; 3]) -> [T; 3] {
    let n = norm(v);
    [v[0] / n, v[1] / n, v[2] / n]
}

pub fn phase_value<T: Real>(kind: PhaseKind, xi: &[T; 3], eta: &[T; 3]) -> T {
    let (a, b) = kind.signs::<T>();
    dispersion(norm(xi)) + a * dispersion(norm(eta)) + b * dispersion(norm(&sub(eta, xi)))
}

fn guard<T: Real>(xi: &[T; 3], eta: &[T; 3]) -> Result<()> {
    let g = T::lit(GUARD_RADIUS);
    if norm(eta) < g || norm(&sub(eta, xi)) < g {
        return Err(invalid("phase derivatives are undefined at eta = 0 and eta = xi"));
    }
    Ok(())
}

/// `∇_η Φ(ξ, η)`.
pub fn phase_gradient<T: Real>(kind: PhaseKind, xi: &[T; 3], eta: &[T; 3]) -> Result<[T; 3]> {
    guard(xi, eta)?;
    let (a, b) = kind.signs::<T>();
    let d = sub(eta, xi);
    let (ue, ud) = (unit(eta), unit(&d));
    let (ge, gd) = (a * dispersion_d1(norm(eta)), b * dispersion_d1(norm(&d)));
    Ok([0, 1, 2].map(|k| ge * ue[k] + gd * ud[k]))
}

/// `∇²_η Φ(ξ, η)`, using `∇²H(|v|) = H'' v̂v̂ᵀ + (H'/|v|)(1 - v̂v̂ᵀ)`.
pub fn phase_hessian<T: Real>(kind: PhaseKind, xi: &[T; 3], eta: &[T; 3]) -> Result<[[T; 3]; 3]> {
    guard(xi, eta)?;
    let (a, b) = kind.signs::<T>();
    let mut out = [[T::zero(); 3]; 3];
    for (sign, v) in [(a, *eta), (b, sub(eta, xi))] {
        let r = norm(&v);
        let u = unit(&v);
        let (h1, h2) = (dispersion_d1(r), dispersion_d2(r));
        for i in 0..3 {
            for j in 0..3 {
                let delta = if i == j { T::one() } else { T::zero() };
                out[i][j] = out[i][j] + sign * (h2 * u[i] * u[j] + h1 / r * (delta - u[i] * u[j]));
            }
        }
    }
    Ok(out)
}

/// `k`-th derivative of `s ↦ H(|v + s a|)` at `s = 0`, with `c = a·v̂`.
fn directional<T: Real>(r: T, c: T, order: u32) -> T {
    match order {
        0 => dispersion(r),
        1 => dispersion_d1(r) * c,
        2 => dispersion_d2(r) * c * c + dispersion_d1(r) / r * (T::one() - c * c),
        _ => {
            let i = dispersion_d2(r) / r - dispersion_d1(r) / (r * r);
            dispersion_d3(r) * c * c * c + T::lit(3.0) * c * (T::one() - c * c) * i
        }
    }
}

/// `∂_r^k Φ(ξ, η)` in the direction `a = η̂`, `k ≤ 3`; `k = 0` is the value.
pub fn phase_radial_derivs<T: Real>(kind: PhaseKind, xi: &[T; 3], eta: &[T; 3], order: u32) -> Result<T> {
    if order > 3 {
        return Err(invalid(format!("radial derivative order must be <= 3, got {order}")));
    }
    if order == 0 {
        return Ok(phase_value(kind, xi, eta));
    }
    guard(xi, eta)?;
    let (a, b) = kind.signs::<T>();
    let d = sub(eta, xi);
    let c = dot(&unit(eta), &unit(&d));
    Ok(a * directional(norm(eta), T::one(), order) + b * directional(norm(&d), c, order))
}

/// Both sides of `H(a+b) - H(a) - H(b) = ab(2a+b)/([a+b]+[a]) + ab(a+2b)/([a+b]+[b])`.
pub fn h_addition_identity<T: Real>(a: T, b: T) -> (T, T) {
    let lhs = dispersion(a + b) - dispersion(a) - dispersion(b);
    let two = T::lit(2.0);
    let s = bracket(a + b);
    let rhs = a * b * (two * a + b) / (s + bracket(a)) + a * b * (a + two * b) / (s + bracket(b));
    (lhs, rhs)
}

/// Both sides of `|η̂ - (η-ξ)^|² |η||η-ξ| = |ξ|² - (|η| - |η-ξ|)²`.
pub fn angle_identity<T: Real>(xi: &[T; 3], eta: &[T; 3]) -> (T, T) {
    let d = sub(eta, xi);
    let (ne, nd) = (norm(eta), norm(&d));
    let diff = sub(&unit(eta), &unit(&d));
    let lhs = dot(&diff, &diff) * ne * nd;
    let gap = ne - nd;
    (lhs, dot(xi, xi) - gap * gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> [f64; 3] {
        [rng.gen_range(-scale..scale), rng.gen_range(-scale..scale), 0.0]
    }

    fn fd_gradient(kind: PhaseKind, xi: &[f64; 3], eta: &[f64; 3]) -> [f64; 3] {
        let h = 1e-5 * norm(eta).max(1e-3);
        [0, 1, 2].map(|k| {
            let (mut p, mut m) = (*eta, *eta);
            p[k] += h;
            m[k] -= h;
            (phase_value(kind, xi, &p) - phase_value(kind, xi, &m)) / (2.0 * h)
        })
    }

    #[test]
    fn reference_values() {
        let xi: [f64; 3] = [0.7, -0.3, 0.0];
        assert!(phase_value(PhaseKind::PhiPlus, &xi, &xi).abs() < 1e-15);
        let h = dispersion(norm(&xi));
        assert!((phase_value(PhaseKind::Phi0, &xi, &xi) - 2.0 * h).abs() < 1e-14);
        let (lhs, rhs) = h_addition_identity(1.0f64, 1.0);
        assert!((lhs - (2.0 * 6f64.sqrt() - 2.0 * 3f64.sqrt())).abs() < 1e-14);
        assert!((lhs - 1.4348782).abs() < 1e-6);
        assert!((rhs - 6.0 / (6f64.sqrt() + 3f64.sqrt())).abs() < 1e-14);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn phi_plus_small_frequency_midpoint() {
        let xi: [f64; 3] = [0.1, 0.0, 0.0];
        let eta = [0.05, 0.0, 0.0];
        let p = phase_value(PhaseKind::PhiPlus, &xi, &eta);
        let expected = 0.1 * 2.01f64.sqrt() - 0.1 * 2.0025f64.sqrt();
        assert!((p - expected).abs() < 1e-15);
        assert!((p - 2.65e-4).abs() < 1e-6);
        let ratio = p * super::super::symbols::japanese(0.1) / 1e-3;
        assert!((ratio - 0.27).abs() < 0.01);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for kind in PhaseKind::ALL {
            for _ in 0..100 {
                let xi = random_vec(&mut rng, 3.0);
                let eta = random_vec(&mut rng, 3.0);
                let g = phase_gradient(kind, &xi, &eta).unwrap();
                let fd = fd_gradient(kind, &xi, &eta);
                let scale = norm(&g).max(1.0);
                for k in 0..3 {
                    assert!((g[k] - fd[k]).abs() <= 1e-6 * scale, "{kind:?} {g:?} {fd:?}");
                }
            }
        }
    }

    #[test]
    fn radial_derivatives_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in PhaseKind::ALL {
            for _ in 0..50 {
                let xi = random_vec(&mut rng, 2.0);
                let eta = random_vec(&mut rng, 2.0);
                let a = unit(&eta);
                let f = |s: f64| phase_value(kind, &xi, &[eta[0] + s * a[0], eta[1] + s * a[1], 0.0]);
                let h = 1e-3;
                let d1 = (f(h) - f(-h)) / (2.0 * h);
                let d2 = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
                let d3 = (f(2.0 * h) - 2.0 * f(h) + 2.0 * f(-h) - f(-2.0 * h)) / (2.0 * h * h * h);
                let fd = [d1, d2, d3];
                for (k, want) in fd.iter().enumerate() {
                    let got = phase_radial_derivs(kind, &xi, &eta, k as u32 + 1).unwrap();
                    assert!((got - want).abs() <= 1e-3 * got.abs().max(1.0), "order {} {got} {want}", k + 1);
                }
            }
        }
    }

    #[test]
    fn hessian_is_gradient_of_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for kind in PhaseKind::ALL {
            let xi = random_vec(&mut rng, 2.0);
            let eta = random_vec(&mut rng, 2.0);
            let hess = phase_hessian(kind, &xi, &eta).unwrap();
            let h = 1e-6;
            for j in 0..2 {
                let (mut p, mut m) = (eta, eta);
                p[j] += h;
                m[j] -= h;
                let gp = phase_gradient(kind, &xi, &p).unwrap();
                let gm = phase_gradient(kind, &xi, &m).unwrap();
                for i in 0..2 {
                    let fd = (gp[i] - gm[i]) / (2.0 * h);
                    assert!((hess[i][j] - fd).abs() < 1e-6 * hess[i][j].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn guard_rejects_degenerate_points() {
        let xi = [1.0, 0.0, 0.0];
        assert!(phase_gradient(PhaseKind::Phi0, &xi, &[0.0; 3]).is_err());
        assert!(phase_gradient(PhaseKind::Phi0, &xi, &xi).is_err());
        assert!(phase_radial_derivs(PhaseKind::Phi0, &xi, &[0.5, 0.5, 0.0], 4).is_err());
    }

    #[test]
    fn angle_identity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let xi = random_vec(&mut rng, 5.0);
            let eta = random_vec(&mut rng, 5.0);
            let (l, r) = angle_identity(&xi, &eta);
            assert!((l - r).abs() < 1e-10 * (1.0 + r.abs()));
        }
    }
}
