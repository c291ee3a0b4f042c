//! Weighted time-Lebesgue norms `𝒲^{s,b}_T`, the critical norm `X^ε_T`,
//! the bootstrap norms `𝒵_T`, `𝒵'_T`, `𝒵²_T` and the data norm `‖φ‖_𝒩`.
//!
//! All suprema over `S ≥ T` are taken over dyadic `S = 2^j T` whose window
//! fits inside the sampled range, so they bound the continuum value from below.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::{Field, Representation};
use crate::norms::{bessel_lq_norm, gradient_lp_norm, lp_norm_any, sobolev_norm};
use crate::scalar::Real;
use crate::trajectory::Trajectory;

/// Nodes required inside each time window.
pub const MIN_WINDOW_NODES: usize = 8;

const EDGE: f64 = 1e-9;

/// Samples of `v` restricted to `[a, b]`, with linearly interpolated end points.
fn window(times: &[f64], values: &[f64], a: f64, b: f64) -> (Vec<(f64, f64)>, usize) {
    let tol = EDGE * b.abs().max(1.0);
    let mut pts = Vec::new();
    let mut interior = 0;
    let interp = |x: f64| -> f64 {
        let j = times.partition_point(|&t| t < x);
        if j == 0 {
            values[0]
        } else if j >= times.len() {
            values[times.len() - 1]
        } else {
            let w = (x - times[j - 1]) / (times[j] - times[j - 1]);
            values[j - 1] * (1.0 - w) + values[j] * w
        }
    };
    if !times.iter().any(|&t| (t - a).abs() <= tol) {
        pts.push((a, interp(a)));
    }
    for (&t, &v) in times.iter().zip(values) {
        if t >= a - tol && t <= b + tol {
            pts.push((t, v));
            interior += 1;
        }
    }
    if !times.iter().any(|&t| (t - b).abs() <= tol) {
        pts.push((b, interp(b)));
    }
    (pts, interior)
}

/// `‖v‖_{L^{1/b}}` over the samples; `b = 0` is the max.
fn time_lebesgue(pts: &[(f64, f64)], b: f64) -> f64 {
    if b == 0.0 {
        return pts.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    }
    let sup = pts.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    if sup == 0.0 || !sup.is_finite() {
        return sup;
    }
    // scaled by the sup so that large exponents neither underflow nor overflow
    let p = 1.0 / b;
    let integral: f64 = pts
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * ((w[0].1.abs() / sup).powf(p) + (w[1].1.abs() / sup).powf(p)))
        .sum();
    sup * integral.powf(b)
}

fn dyadic_starts(t0: f64, t_last: f64, need_double: bool) -> Vec<f64> {
    let mut out = Vec::new();
    let mut s = t0;
    let tol = EDGE * t_last.max(1.0);
    while if need_double { 2.0 * s <= t_last + tol } else { s < t_last - tol } {
        out.push(s);
        s *= 2.0;
    }
    out
}

/// `sup_S S^s ‖v‖_{L^{1/b}(S, 2S)}` for a sampled scalar series.
pub fn wl_norm_series(times: &[f64], values: &[f64], s: f64, b: f64, t0: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&b) {
        return Err(crate::error::invalid(format!("b must lie in [0, 1], got {b}")));
    }
    let t_last = *times.last().unwrap_or(&0.0);
    let starts = dyadic_starts(t0, t_last, true);
    if starts.is_empty() {
        return Err(Error::InsufficientSampling(format!(
            "no dyadic window [S, 2S] with S >= {t0} fits below {t_last}"
        )));
    }
    let mut best = 0.0f64;
    for s0 in starts {
        let (pts, interior) = window(times, values, s0, 2.0 * s0);
        if interior < MIN_WINDOW_NODES {
            return Err(Error::InsufficientSampling(format!(
                "{interior} nodes in [{s0}, {}], need {MIN_WINDOW_NODES}",
                2.0 * s0
            )));
        }
        best = best.max(s0.powf(s) * time_lebesgue(&pts, b));
    }
    Ok(best)
}

/// `‖·‖_{𝒲^{s,b}_T X}` of a trajectory for a spatial norm `X`.
pub fn wl_norm<T: Real>(traj: &Trajectory<T>, s: f64, b: f64, t0: f64, spatial: impl Fn(&Field<T>) -> f64) -> Result<f64> {
    let times: Vec<f64> = traj.times().iter().map(|t| t.to_f64_lossy()).collect();
    let values: Vec<f64> = traj.fields().iter().map(spatial).collect();
    wl_norm_series(&times, &values, s, b, t0)
}

/// Exponents `(p, q)` of `X^ε`: `1/p = 10ε`, `1/q = 1/3 - ε`.
pub fn x_eps_exponents(eps: f64) -> (f64, f64) {
    let p = if eps == 0.0 { f64::INFINITY } else { 1.0 / (10.0 * eps) };
    (p, 1.0 / (1.0 / 3.0 - eps))
}

/// `sup_S S^{1/2-8ε} ‖v‖_{L^p(S, T_max)}` for a sampled series of `H¹_q` norms.
pub fn x_eps_norm_series(times: &[f64], values: &[f64], eps: f64, t0: f64) -> Result<f64> {
    let (p, _) = x_eps_exponents(eps);
    let t_last = *times.last().unwrap_or(&0.0);
    let starts = dyadic_starts(t0, t_last, false);
    if starts.is_empty() {
        return Err(Error::InsufficientSampling(format!("no sample beyond T = {t0}")));
    }
    let b = if p.is_infinite() { 0.0 } else { 1.0 / p };
    let mut best = 0.0f64;
    for s0 in starts {
        let (pts, interior) = window(times, values, s0, t_last);
        if interior < MIN_WINDOW_NODES {
            return Err(Error::InsufficientSampling(format!(
                "{interior} nodes in [{s0}, {t_last}], need {MIN_WINDOW_NODES}"
            )));
        }
        best = best.max(s0.powf(0.5 - 8.0 * eps) * time_lebesgue(&pts, b));
    }
    Ok(best)
}

/// `X^ε_T` norm of a trajectory (3D exponents).
pub fn x_eps_norm<T: Real>(traj: &Trajectory<T>, eps: f64, t0: f64) -> Result<f64> {
    let (_, q) = x_eps_exponents(eps);
    let times: Vec<f64> = traj.times().iter().map(|t| t.to_f64_lossy()).collect();
    let values = traj
        .fields()
        .iter()
        .map(|f| bessel_lq_norm(f, T::one(), q).map(|x| x.to_f64_lossy()))
        .collect::<Result<Vec<_>>>()?;
    x_eps_norm_series(&times, &values, eps, t0)
}

/// Exponents of the bootstrap norms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Weights {
    pub alpha: f64,
    pub beta: f64,
}

/// Per-node spatial norms entering `𝒵'`: `‖u‖_{L⁴}`, `‖Re u‖_{L²}`, `‖∇u‖_{L²}`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ZPrimeSeries {
    pub l4: Vec<f64>,
    pub re_l2: Vec<f64>,
    pub grad_l2: Vec<f64>,
}

impl ZPrimeSeries {
    pub fn push<T: Real>(&mut self, u: &Field<T>) {
        let phys = u.in_representation(Representation::Physical);
        self.l4.push(lp_norm_any(&phys, 4.0).expect("valid exponent").to_f64_lossy());
        let re: T = phys.values().iter().map(|c| c.re * c.re).sum::<T>() * phys.grid().cell_volume();
        self.re_l2.push(re.sqrt().to_f64_lossy());
        self.grad_l2.push(sobolev_norm(u, T::one(), true).to_f64_lossy());
    }
}

/// Per-node spatial norms entering `𝒵²`: `‖z‖_{Ḣ¹}`, `‖z‖_{Ḣ^{1/2}}`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Z2Series {
    pub h1: Vec<f64>,
    pub h_half: Vec<f64>,
}

impl Z2Series {
    pub fn push<T: Real>(&mut self, z: &Field<T>) {
        self.h1.push(sobolev_norm(z, T::one(), true).to_f64_lossy());
        self.h_half.push(sobolev_norm(z, T::lit(0.5), true).to_f64_lossy());
    }
}

/// Per-node norms of the free part of `𝒵`: `‖u⁰‖_{L⁴}`, `‖Re u⁰‖_{L^∞}`, `‖∇u⁰‖_{L^∞}`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FreeSeries {
    pub l4: Vec<f64>,
    pub re_linf: Vec<f64>,
    pub grad_linf: Vec<f64>,
}

impl FreeSeries {
    pub fn push<T: Real>(&mut self, u0: &Field<T>) {
        let phys = u0.in_representation(Representation::Physical);
        self.l4.push(lp_norm_any(&phys, 4.0).expect("valid exponent").to_f64_lossy());
        self.re_linf
            .push(phys.values().iter().map(|c| c.re.abs()).fold(T::zero(), T::max).to_f64_lossy());
        self.grad_linf
            .push(gradient_lp_norm(&phys, f64::INFINITY).expect("valid exponent").to_f64_lossy());
    }
}

/// Constituents and total of `‖·‖_{𝒵'_T}`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ZPrimeNorm {
    pub l4: f64,
    pub re_l2: f64,
    pub grad_l2: f64,
}

impl ZPrimeNorm {
    pub fn total(&self) -> f64 {
        self.l4 + self.re_l2 + self.grad_l2
    }
}

/// Constituents and total of `‖·‖_{𝒵_T}`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ZNorm {
    pub free_l4: f64,
    pub free_re_linf: f64,
    pub free_grad_linf: f64,
    pub remainder: ZPrimeNorm,
}

impl ZNorm {
    pub fn free(&self) -> f64 {
        self.free_l4 + self.free_re_linf + self.free_grad_linf
    }

    pub fn total(&self) -> f64 {
        self.free() + self.remainder.total()
    }
}

/// Constituents and total of `‖·‖_{𝒵²_T}`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Z2Norm {
    pub h1: f64,
    pub h_half: f64,
}

impl Z2Norm {
    pub fn total(&self) -> f64 {
        self.h1 + self.h_half
    }
}

pub fn z_prime_norm(times: &[f64], s: &ZPrimeSeries, w: Weights, t0: f64) -> Result<ZPrimeNorm> {
    Ok(ZPrimeNorm {
        l4: wl_norm_series(times, &s.l4, w.beta, 0.0, t0)?,
        re_l2: wl_norm_series(times, &s.re_l2, w.alpha, 0.0, t0)?,
        grad_l2: wl_norm_series(times, &s.grad_l2, w.alpha, 0.0, t0)?,
    })
}

pub fn z2_norm(times: &[f64], s: &Z2Series, w: Weights, t0: f64) -> Result<Z2Norm> {
    Ok(Z2Norm {
        h1: wl_norm_series(times, &s.h1, w.alpha, 0.0, t0)?,
        h_half: wl_norm_series(times, &s.h_half, w.beta, 0.0, t0)?,
    })
}

pub fn z_norm(times: &[f64], free: &FreeSeries, remainder: &ZPrimeSeries, w: Weights, t0: f64) -> Result<ZNorm> {
    Ok(ZNorm {
        free_l4: wl_norm_series(times, &free.l4, 0.5, 0.0, t0)?,
        free_re_linf: wl_norm_series(times, &free.re_linf, 1.0, 0.0, t0)?,
        free_grad_linf: wl_norm_series(times, &free.grad_linf, 1.0, 0.0, t0)?,
        remainder: z_prime_norm(times, remainder, w, t0)?,
    })
}

/// `𝒵_T` norm of `u` given the free profile `u⁰` on the same nodes.
pub fn script_z_norms<T: Real>(utraj: &Trajectory<T>, u0traj: &Trajectory<T>, w: Weights, t0: f64) -> Result<ZNorm> {
    if !utraj.same_times(u0traj) {
        return Err(Error::GridMismatch);
    }
    let times: Vec<f64> = utraj.times().iter().map(|t| t.to_f64_lossy()).collect();
    let mut free = FreeSeries::default();
    let mut rem = ZPrimeSeries::default();
    for (u, u0) in utraj.fields().iter().zip(u0traj.fields()) {
        free.push(u0);
        let d = u.in_representation(Representation::Physical) - u0.in_representation(Representation::Physical);
        rem.push(&d);
    }
    z_norm(&times, &free, &rem, w, t0)
}

/// `𝒵²_T` norm of a `z` trajectory.
pub fn script_z2_norm<T: Real>(ztraj: &Trajectory<T>, w: Weights, t0: f64) -> Result<Z2Norm> {
    let times: Vec<f64> = ztraj.times().iter().map(|t| t.to_f64_lossy()).collect();
    let mut s = Z2Series::default();
    for z in ztraj.fields() {
        s.push(z);
    }
    z2_norm(&times, &s, w, t0)
}

/// Fraction of `‖φ‖²_{L²}` allowed outside the middle half of the box
/// before `∂_ξ` via multiplication by `x` is refused.
pub const LOCALIZATION_TOL: f64 = 1e-6;

/// `‖φ‖_𝒩 = ‖φ‖_{H¹} + Σ_{|k|≤2} ‖⟨ξ⟩^{-1/2}|ξ|^{|k|}∂^k_ξ φ̂‖_{L²∩L^∞}`, with
/// `‖·‖_{L²∩L^∞}` the sum of the two and the `ξ`-space `L²` normalised by
/// Parseval. `∂^k_ξ φ̂` is the transform of `(-ix)^k φ`.
pub fn data_norm_n<T: Real>(phi: &Field<T>) -> Result<f64> {
    let phys = phi.in_representation(Representation::Physical);
    let grid = phys.grid().clone();
    let quarter = grid.box_length() / T::lit(4.0);
    let mut outside = T::zero();
    let mut total = T::zero();
    for (i, v) in phys.values().iter().enumerate() {
        let x = grid.point(i);
        let m = v.norm_sqr();
        total += m;
        if (0..grid.dim()).any(|a| x[a].abs() > quarter) {
            outside += m;
        }
    }
    if total > T::zero() && (outside / total).to_f64_lossy() > LOCALIZATION_TOL {
        return Err(crate::error::invalid(format!(
            "datum is not localized in the middle half of the box ({:e} of its mass lies outside)",
            (outside / total).to_f64_lossy()
        )));
    }
    let mut sum = sobolev_norm(&phys, T::one(), false).to_f64_lossy();
    let d = grid.dim();
    let mut multi: Vec<Vec<usize>> = vec![vec![]];
    for a in 0..d {
        multi.push(vec![a]);
    }
    for a in 0..d {
        for b in a..d {
            multi.push(vec![a, b]);
        }
    }
    let minus_i = Complex::new(T::zero(), -T::one());
    for k in multi {
        let values = phys
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let x = grid.point(i);
                k.iter().fold(*v, |c, &a| c * minus_i * x[a])
            })
            .collect();
        let g = Field::from_values(&grid, values, Representation::Physical)?;
        let mut spec = g.into_spectral();
        let order = k.len() as i32;
        for (c, &r2) in spec.values_mut().iter_mut().zip(grid.xi_norm2()) {
            let w = (T::one() + r2).powf(-T::lit(0.25)) * r2.sqrt().powi(order);
            *c = *c * w;
        }
        let l2: T = (spec.values().iter().map(|c| c.norm_sqr()).sum::<T>() / grid.volume()).sqrt();
        let linf = spec.max_abs();
        sum += (l2 + linf).to_f64_lossy();
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::trajectory::VariableTag;
    use proptest::prelude::*;

    fn geometric(t0: f64, t1: f64, k: usize) -> Vec<f64> {
        (0..k).map(|j| t0 * (t1 / t0).powf(j as f64 / (k - 1) as f64)).collect()
    }

    #[test]
    fn power_profile_cancels() {
        let g = make_grid(2, 16, 10.0).unwrap();
        let f = crate::testing::random_smooth_field(&g, 1, 0.5);
        let norm = sobolev_norm(&f, 0.0, false);
        let times = geometric(10.0, 80.0, 49);
        for s in [0.5, 1.0, 1.5] {
            let fields = times.iter().map(|&t| f.scale_real(t.powf(-s))).collect();
            let traj = Trajectory::from_parts(&g, VariableTag::U, times.clone(), fields).unwrap();
            let w = wl_norm(&traj, s, 0.0, 10.0, |x| sobolev_norm(x, 0.0, false)).unwrap();
            assert!((w / norm - 1.0).abs() < 0.05);
            assert!(w.is_finite());
        }
    }

    #[test]
    fn b_zero_is_window_sup() {
        let times = geometric(1.0, 8.0, 61);
        let values: Vec<f64> = times.iter().map(|t| (t * 3.0).sin().abs() + 0.1).collect();
        let w = wl_norm_series(&times, &values, 0.0, 0.0, 1.0).unwrap();
        let max = values.iter().cloned().fold(0.0, f64::max);
        assert!((w - max).abs() < 1e-15);
    }

    #[test]
    fn l1_in_time() {
        let times: Vec<f64> = (0..=64).map(|j| 2.0 + 2.0 * j as f64 / 64.0).collect();
        let values = vec![3.0; times.len()];
        let w = wl_norm_series(&times, &values, 0.0, 1.0, 2.0).unwrap();
        assert!((w - 6.0).abs() < 1e-12);
    }

    #[test]
    fn sparse_sampling_rejected() {
        let times = geometric(1.0, 8.0, 10);
        let values = vec![1.0; 10];
        assert!(matches!(
            wl_norm_series(&times, &values, 0.0, 0.0, 1.0),
            Err(Error::InsufficientSampling(_))
        ));
        assert!(wl_norm_series(&times, &values, 0.0, 0.0, 5.0).is_err());
    }

    #[test]
    fn x_eps_critical_is_weighted_sup() {
        let times = geometric(1.0, 16.0, 81);
        let values: Vec<f64> = times.iter().map(|t| t.powf(-0.5)).collect();
        let x = x_eps_norm_series(&times, &values, 0.0, 1.0).unwrap();
        assert!((x - 1.0).abs() < 1e-12);
        let (p, q) = x_eps_exponents(3.0 / 68.0);
        assert!((p - 68.0 / 30.0).abs() < 1e-12);
        assert!((1.0 / q - (1.0 / 3.0 - 3.0 / 68.0)).abs() < 1e-15);
    }

    #[test]
    fn data_norm_requires_localization() {
        let g = make_grid(2, 64, 40.0).unwrap();
        let tight = Field::from_fn(&g, |x: [f64; 3]| Complex::new((-(x[0] * x[0] + x[1] * x[1]) / 4.0).exp(), 0.0));
        let n = data_norm_n(&tight).unwrap();
        assert!(n.is_finite() && n > 0.0);
        let twice = data_norm_n(&tight.scale_real(2.0)).unwrap();
        assert!((twice / n - 2.0).abs() < 1e-12);
        let wide = Field::from_fn(&g, |x: [f64; 3]| Complex::new((-(x[0] * x[0] + x[1] * x[1]) / 80.0).exp(), 0.0));
        assert!(data_norm_n(&wide).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// `𝒲^{s₁,b₁} × 𝒲^{s₂,b₂} ⊂ 𝒲^{s₁+s₂,b₁+b₂}` on sampled products.
        #[test]
        fn holder_for_products(
            s1 in 0.0f64..1.5, s2 in 0.0f64..1.5,
            b1 in 0.0f64..0.5, b2 in 0.0f64..0.5,
            a1 in 0.2f64..3.0, a2 in 0.2f64..3.0,
            k1 in 0.0f64..2.0, k2 in 0.0f64..2.0,
        ) {
            let times = geometric(2.0, 32.0, 257);
            let u: Vec<f64> = times.iter().map(|t| t.powf(-k1) * (1.0 + 0.5 * (a1 * t).sin())).collect();
            let v: Vec<f64> = times.iter().map(|t| t.powf(-k2) * (1.0 + 0.5 * (a2 * t).cos())).collect();
            let uv: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a * b).collect();
            let lhs = wl_norm_series(&times, &uv, s1 + s2, b1 + b2, 2.0).unwrap();
            let rhs = wl_norm_series(&times, &u, s1, b1, 2.0).unwrap() * wl_norm_series(&times, &v, s2, b2, 2.0).unwrap();
            prop_assert!(lhs <= 1.1 * rhs, "{lhs} > 1.1 * {rhs}");
        }
    }
}
