//! Decay-rate fits, the `η`-regions of the bilinear phase analysis with
//! sampled lower bounds for the phase derivatives, and a brute-force
//! evaluation of bilinear Duhamel coefficients used as an oracle for the
//! spectral path.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::field::{Field, Representation};
use crate::grid::Grid;
use crate::norms::lp_norm;
use crate::operators::linear::{propagate, SymbolTables};
use crate::operators::phase::{dot, norm, phase_gradient, phase_radial_derivs, phase_value, sub, unit, PhaseKind};
use crate::operators::symbols::{bracket, dispersion, japanese};
use crate::scalar::Real;
use crate::scattering::DuhamelIntegrator;

/// Minimum number of samples accepted by [`decay_fit`].
pub const MIN_FIT_SAMPLES: usize = 8;

/// Least-squares fit `log v = intercept + exponent · log t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

pub fn decay_fit(times: &[f64], values: &[f64]) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(invalid(format!("{} times but {} values", times.len(), values.len())));
    }
    if times.len() < MIN_FIT_SAMPLES {
        return Err(invalid(format!("need at least {MIN_FIT_SAMPLES} samples, got {}", times.len())));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(invalid(format!("decay fit needs positive finite values, got {v}")));
    }
    if let Some(t) = times.iter().find(|t| !(**t > 0.0)) {
        return Err(invalid(format!("decay fit needs positive times, got {t}")));
    }
    let x: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("decay fit needs at least two distinct times"));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    let (lo, hi) = times.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    Ok(DecayFit {
        exponent,
        intercept,
        r_squared,
        window: (lo, hi),
    })
}

/// Fits the decay of `‖e^{-itH}φ‖_{L^q}` over `times`.
pub fn linear_decay_experiment<T: Real>(phi: &Field<T>, q: f64, times: &[f64]) -> Result<DecayFit> {
    if times.len() < MIN_FIT_SAMPLES {
        return Err(invalid(format!("window too short: {} samples, need {MIN_FIT_SAMPLES}", times.len())));
    }
    let spec = phi.in_representation(Representation::Spectral);
    let values: Vec<f64> = times
        .par_iter()
        .map(|&t| lp_norm(&propagate(&spec, T::lit(t)).into_physical(), q).map(|v| v.to_f64_lossy()))
        .collect::<Result<_>>()?;
    decay_fit(times, &values)
}

/// `η`-regions of the phase analysis for fixed `ξ ≠ 0`, with
/// `λ = |η| + |η-ξ| - |ξ|` and `μ = |η| - |η-ξ|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RegionId {
    /// `μ > (1-2δ)|ξ|`
    Dplus,
    /// `|μ| < (1-δ)|ξ|`
    Dzero,
    /// `μ < -(1-2δ)|ξ|`
    Dminus,
    /// `λ ≥ |ξ|/δ`
    DF,
    /// `λ ≤ 2|ξ|³/(δ⟨ξ⟩)`, `λ < 2|ξ|/δ`, inside `D₊`
    DTplus,
    /// as `DTplus` but inside `D₀` and with `λ ≥ δ|ξ|³/⟨ξ⟩²`
    DTzero,
    /// `|ξ|³/(δ⟨ξ⟩) ≤ λ < 2|ξ|/δ`
    DX,
}

impl RegionId {
    pub const ALL: [RegionId; 7] = [
        RegionId::Dplus,
        RegionId::Dzero,
        RegionId::Dminus,
        RegionId::DF,
        RegionId::DTplus,
        RegionId::DTzero,
        RegionId::DX,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RegionId::Dplus => "D+",
            RegionId::Dzero => "D0",
            RegionId::Dminus => "D-",
            RegionId::DF => "DF",
            RegionId::DTplus => "DT+",
            RegionId::DTzero => "DT0",
            RegionId::DX => "DX",
        }
    }

    /// Range of `λ` allowed for `|ξ| = c`, before the `μ` condition.
    fn lambda_range(self, c: f64, delta: f64) -> (f64, f64) {
        let jc = japanese(c);
        let t_hi = (2.0 * c.powi(3) / (delta * jc)).min(2.0 * c / delta);
        match self {
            RegionId::Dplus | RegionId::Dzero | RegionId::Dminus => (0.0, f64::INFINITY),
            RegionId::DF => (c / delta, f64::INFINITY),
            RegionId::DTplus => (0.0, t_hi),
            RegionId::DTzero => (delta * c.powi(3) / (jc * jc), t_hi),
            RegionId::DX => (c.powi(3) / (delta * jc), 2.0 * c / delta),
        }
    }

    /// Range of `μ / |ξ|`.
    fn mu_range(self, delta: f64) -> (f64, f64) {
        match self {
            RegionId::Dplus | RegionId::DTplus => (1.0 - 2.0 * delta, 1.0),
            RegionId::Dzero | RegionId::DTzero => (-(1.0 - delta), 1.0 - delta),
            RegionId::Dminus => (-1.0, -(1.0 - 2.0 * delta)),
            RegionId::DF | RegionId::DX => (-1.0, 1.0),
        }
    }
}

impl std::str::FromStr for RegionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RegionId::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s) || format!("{r:?}").eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid(format!("unknown region {s:?}")))
    }
}

/// A region together with its width parameter `δ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Region {
    pub id: RegionId,
    pub delta: f64,
}

impl Region {
    pub fn new(id: RegionId, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 0.1) {
            return Err(invalid(format!("delta must lie in (0, 0.1], got {delta}")));
        }
        Ok(Self { id, delta })
    }

    pub fn contains(&self, xi: &[f64; 3], eta: &[f64; 3]) -> bool {
        let c = norm(xi);
        if c == 0.0 {
            return false;
        }
        let (a, b) = (norm(eta), norm(&sub(eta, xi)));
        let lambda = a + b - c;
        let mu = (a - b) / c;
        let (l0, l1) = self.id.lambda_range(c, self.delta);
        let (m0, m1) = self.id.mu_range(self.delta);
        let lambda_ok = match self.id {
            RegionId::DF | RegionId::DTzero | RegionId::DX => lambda >= l0,
            _ => true,
        } && match self.id {
            RegionId::DTplus | RegionId::DTzero => lambda <= l1,
            RegionId::DX => lambda < l1,
            _ => true,
        };
        let mu_ok = match self.id {
            RegionId::Dplus | RegionId::DTplus => mu > m0,
            RegionId::Dzero | RegionId::DTzero => mu > m0 && mu < m1,
            RegionId::Dminus => mu < m1,
            _ => true,
        };
        lambda_ok && mu_ok
    }
}

/// `(ξ, η)` with `|ξ| = c`, `|η| = a`, `|η-ξ| = b` in the plane, rotated by `theta`.
fn triangle(c: f64, a: f64, b: f64, theta: f64, flip: bool) -> ([f64; 3], [f64; 3]) {
    let e = [theta.cos(), theta.sin(), 0.0];
    let p = [-e[1], e[0], 0.0];
    let x = (a * a - b * b + c * c) / (2.0 * c);
    let y = ((a - x) * (a + x)).max(0.0).sqrt() * if flip { -1.0 } else { 1.0 };
    ([c * e[0], c * e[1], 0.0], [x * e[0] + y * p[0], x * e[1] + y * p[1], 0.0])
}

/// Inclusive range of `|ξ|` and `|η|` used by the scans.
pub const SCAN_RANGE: (f64, f64) = (1e-3, 1e3);
/// `|η-ξ|` below which a sample is redrawn, above the phase guard radius.
const MIN_SEPARATION: f64 = 1e-7;

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Draws `(ξ, η)` in the region: `|ξ|` log-uniform, `λ` log-uniform within
/// the region's bounds and `μ` uniform, with `|η|` confined to [`SCAN_RANGE`].
fn sample_region(rng: &mut ChaCha8Rng, region: &Region, xi_range: (f64, f64)) -> Option<([f64; 3], [f64; 3])> {
    let (lo, hi) = SCAN_RANGE;
    for _ in 0..1000 {
        let c = log_uniform(rng, xi_range.0, xi_range.1);
        let (l0, l1) = region.id.lambda_range(c, region.delta);
        let l0 = l0.max(1e-9 * c);
        let l1 = l1.min(2.0 * hi);
        if !(l1 > l0) {
            continue;
        }
        let lambda = log_uniform(rng, l0, l1);
        let (m0, m1) = region.id.mu_range(region.delta);
        let mu = c * rng.gen_range(m0..m1);
        let a = (c + lambda + mu) / 2.0;
        let b = (c + lambda - mu) / 2.0;
        if a < lo || a > hi || b < MIN_SEPARATION {
            continue;
        }
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let (xi, eta) = triangle(c, a, b, theta, rng.gen_bool(0.5));
        if region.contains(&xi, &eta) {
            return Some((xi, eta));
        }
    }
    None
}

fn reflect(xi: &[f64; 3], eta: &[f64; 3]) -> [f64; 3] {
    sub(xi, eta)
}

/// Ratio of a phase derivative to the lower bound claimed for it on the
/// region; `None` for pairs without a stated bound.
pub fn phase_ratio(kind: PhaseKind, region: RegionId, xi: &[f64; 3], eta: &[f64; 3]) -> Result<Option<f64>> {
    let c = norm(xi);
    let jc = japanese(c);
    let ratio = match (kind, region) {
        (PhaseKind::Phi0, RegionId::Dplus) => {
            let a = norm(eta);
            phase_radial_derivs(kind, xi, eta, 1)? / (a * c / japanese(a))
        }
        (PhaseKind::Phi0, RegionId::Dzero) => {
            let a = norm(eta);
            norm(&phase_gradient(kind, xi, eta)?) / (japanese(a) * c / a)
        }
        (PhaseKind::PhiPlus, RegionId::DF | RegionId::DTplus | RegionId::DTzero) => {
            // Φ₊ is symmetric under η ↦ ξ - η; work where |η| ≥ |η-ξ|
            let eta = if norm(eta) >= norm(&sub(eta, xi)) { *eta } else { reflect(xi, eta) };
            let d = -phase_radial_derivs(kind, xi, &eta, 1)?;
            let comparator = match region {
                RegionId::DF => japanese(norm(&eta)),
                _ => c * c / jc,
            };
            d / comparator
        }
        (PhaseKind::PhiPlus, RegionId::DX) => {
            let half = [xi[0] / 2.0, xi[1] / 2.0, xi[2] / 2.0];
            let mut zeta = sub(eta, &half);
            let mut eta = *eta;
            if dot(&zeta, xi) < 0.0 {
                eta = reflect(xi, &eta);
                zeta = sub(&eta, &half);
            }
            let l = norm(&zeta);
            let cos_w = (dot(&zeta, xi) / (l * c)).clamp(-1.0, 1.0);
            let grad = phase_gradient(kind, xi, &eta)?;
            if cos_w >= 0.25 {
                let m = norm(&eta).min(norm(&sub(&eta, xi)));
                let w = cos_w.acos();
                dot(&grad, &unit(&zeta)).abs() / ((jc * l / m) * (w * w + m * c / (jc * jc)))
            } else {
                norm(&grad) / (jc * l / c)
            }
        }
        _ => return Ok(None),
    };
    Ok(Some(ratio))
}

/// The `(kind, region)` pairs with a lower bound to sample.
pub const BOUNDED_PAIRS: [(PhaseKind, RegionId); 6] = [
    (PhaseKind::Phi0, RegionId::Dplus),
    (PhaseKind::Phi0, RegionId::Dzero),
    (PhaseKind::PhiPlus, RegionId::DF),
    (PhaseKind::PhiPlus, RegionId::DTplus),
    (PhaseKind::PhiPlus, RegionId::DTzero),
    (PhaseKind::PhiPlus, RegionId::DX),
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanResult {
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `(ξ, η)` at the minimum.
    pub argmin: ([f64; 3], [f64; 3]),
    pub samples: usize,
}

fn scan_with(
    n_samples: usize,
    seed: u64,
    draw: impl Fn(&mut ChaCha8Rng) -> Option<([f64; 3], [f64; 3])> + Sync,
    ratio: impl Fn(&[f64; 3], &[f64; 3]) -> Result<f64> + Sync,
) -> Result<ScanResult> {
    if n_samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    // fixed chunking keeps results independent of the thread count
    const CHUNK: usize = 4096;
    let chunks = n_samples.div_ceil(CHUNK);
    let parts: Vec<ScanResult> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let count = CHUNK.min(n_samples - k * CHUNK);
            let mut best = ScanResult {
                min_ratio: f64::INFINITY,
                max_ratio: f64::NEG_INFINITY,
                argmin: ([0.0; 3], [0.0; 3]),
                samples: 0,
            };
            for _ in 0..count {
                let (xi, eta) = draw(&mut rng).ok_or_else(|| invalid("region is empty for the drawn parameters"))?;
                let r = ratio(&xi, &eta)?;
                if !r.is_finite() {
                    return Err(invalid(format!("non-finite ratio at xi = {xi:?}, eta = {eta:?}")));
                }
                if r < best.min_ratio {
                    best.min_ratio = r;
                    best.argmin = (xi, eta);
                }
                best.max_ratio = best.max_ratio.max(r);
                best.samples += 1;
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    Ok(parts
        .into_iter()
        .reduce(|a, b| ScanResult {
            min_ratio: a.min_ratio.min(b.min_ratio),
            max_ratio: a.max_ratio.max(b.max_ratio),
            argmin: if b.min_ratio < a.min_ratio { b.argmin } else { a.argmin },
            samples: a.samples + b.samples,
        })
        .expect("at least one chunk"))
}

/// Samples the ratio of [`phase_ratio`] over the region.
pub fn phase_lower_bound_scan(kind: PhaseKind, region: RegionId, n_samples: usize, delta: f64, seed: u64) -> Result<ScanResult> {
    let reg = Region::new(region, delta)?;
    if phase_ratio(kind, region, &[1.0, 0.0, 0.0], &[0.3, 0.7, 0.0])?.is_none() {
        return Err(invalid(format!("no lower bound is stated for {} on {}", kind.name(), region.name())));
    }
    scan_with(
        n_samples,
        seed,
        |rng| sample_region(rng, &reg, SCAN_RANGE),
        |xi, eta| Ok(phase_ratio(kind, region, xi, eta)?.expect("pair checked above")),
    )
}

/// Both cases of the time-nonresonance bound `|Φ₊| ≳ |ξ|³/⟨ξ⟩` in `D_X`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeBoundScan {
    /// `-Φ₊⟨ξ⟩/|ξ|³` for `λ ≥ |ξ|³/(δ⟨ξ⟩)`, `|ξ| ≤ 1`.
    pub large_lambda: ScanResult,
    /// `Φ₊⟨ξ⟩/|ξ|³` for `λ ≤ κδ|ξ|³/⟨ξ⟩²`, `||η|-|η-ξ|| ≤ (1-δ)|ξ|`.
    pub small_lambda: ScanResult,
    pub min_ratio: f64,
}

/// At small `|ξ|`, `Φ₊ ≈ 3|η||η-ξ||ξ|/(4√2) - √2λ`, so the second case holds
/// only for `κ` below roughly `0.18`; `κ = 1` exhibits sign changes.
pub fn phi_plus_time_bound_scan(n_samples: usize, delta: f64, kappa: f64, seed: u64) -> Result<TimeBoundScan> {
    if !(kappa > 0.0) {
        return Err(invalid(format!("kappa must be positive, got {kappa}")));
    }
    let dx = Region::new(RegionId::DX, delta)?;
    let ratio = |sign: f64| {
        move |xi: &[f64; 3], eta: &[f64; 3]| {
            let c = norm(xi);
            Ok(sign * phase_value(PhaseKind::PhiPlus, xi, eta) * japanese(c) / c.powi(3))
        }
    };
    let large = scan_with(n_samples, seed, |rng| sample_region(rng, &dx, (SCAN_RANGE.0, 1.0)), ratio(-1.0))?;
    let small_draw = |rng: &mut ChaCha8Rng| -> Option<([f64; 3], [f64; 3])> {
        for _ in 0..1000 {
            let c = log_uniform(rng, SCAN_RANGE.0, SCAN_RANGE.1);
            let jc = japanese(c);
            let l1 = kappa * delta * c.powi(3) / (jc * jc);
            let lambda = log_uniform(rng, 1e-6 * l1, l1);
            let mu = c * rng.gen_range(-(1.0 - delta)..(1.0 - delta));
            let (a, b) = ((c + lambda + mu) / 2.0, (c + lambda - mu) / 2.0);
            if a < SCAN_RANGE.0 || a > SCAN_RANGE.1 || b < MIN_SEPARATION {
                continue;
            }
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            return Some(triangle(c, a, b, theta, rng.gen_bool(0.5)));
        }
        None
    };
    let small = scan_with(n_samples, seed.wrapping_add(1), small_draw, ratio(1.0))?;
    Ok(TimeBoundScan {
        min_ratio: large.min_ratio.min(small.min_ratio),
        large_lambda: large,
        small_lambda: small,
    })
}

/// Quadratic terms of the normal form whose Duhamel coefficients are
/// analysed: `u₁²` and `PU^{-1}∇·(u₁∇u₂)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BilinearTerm {
    U1Sq,
    Cross,
}

/// `M(ξ, η)` of the term.
pub fn bilinear_multiplier(term: BilinearTerm, xi: &[f64; 3], eta: &[f64; 3]) -> f64 {
    let d = sub(eta, xi);
    let (a, b) = (norm(eta), norm(&d));
    match term {
        BilinearTerm::U1Sq => a * b / (bracket(a) * bracket(b)),
        BilinearTerm::Cross => {
            let c = norm(xi);
            if c == 0.0 {
                return 0.0;
            }
            dot(xi, &d) / c * a / (bracket(c) * bracket(a))
        }
    }
}

/// `G(ξ, η)` built from the transforms of the two data according to the
/// phase: `φ̂(ξ-η)·conj ψ̂(-η)` for `Φ₀`, `φ̂(ξ-η)·ψ̂(η)` for `Φ₊`,
/// `conj φ̂(η-ξ)·conj ψ̂(-η)` for `Φ₋`.
fn pair_weight(
    kind: PhaseKind,
    phihat: &dyn Fn(&[f64; 3]) -> Complex<f64>,
    psihat: &dyn Fn(&[f64; 3]) -> Complex<f64>,
    xi: &[f64; 3],
    eta: &[f64; 3],
) -> Complex<f64> {
    let neg = |v: &[f64; 3]| [-v[0], -v[1], -v[2]];
    let d = sub(xi, eta);
    match kind {
        PhaseKind::Phi0 => phihat(&d) * psihat(&neg(eta)).conj(),
        PhaseKind::PhiPlus => phihat(&d) * psihat(eta),
        PhaseKind::PhiMinus => phihat(&neg(&d)).conj() * psihat(&neg(eta)).conj(),
    }
}

/// Relative amplitude below which `F` counts as outside its support.
const SUPPORT_FLOOR: f64 = 1e-14;
/// Largest `|∇_ηΦ| h_η` on the support of `F` and `|Φ| Δs` per panel.
pub const RESOLUTION_LIMIT: f64 = 0.5;

/// 4-point Gauss–Legendre nodes and weights on `[-1, 1]`.
const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// `L^{-d} Σ_η ∫_{t_lo}^{t_hi} e^{iΦ(ξ,η)s} M(ξ,η) G(ξ,η) ds` by direct
/// summation over the frequency lattice of `grid` and composite
/// Gauss–Legendre quadrature in `s`.
///
/// Fails unless `|∇_ηΦ| h_η ≤ 0.5` on the support of `F`; time panels are
/// chosen so that `|Φ| Δs ≤ 0.5` there.
#[allow(clippy::too_many_arguments)]
pub fn bilinear_integral_direct(
    phihat: &(dyn Fn(&[f64; 3]) -> Complex<f64> + Sync),
    psihat: &(dyn Fn(&[f64; 3]) -> Complex<f64> + Sync),
    kind: PhaseKind,
    term: BilinearTerm,
    xi: &[f64; 3],
    t_lo: f64,
    t_hi: f64,
    grid: &Grid<f64>,
) -> Result<Complex<f64>> {
    direct_with(
        &|eta| phase_value(kind, xi, eta),
        &|eta| phase_gradient(kind, xi, eta).ok().map(|g| norm(&g)),
        &|eta| bilinear_multiplier(term, xi, eta) * pair_weight(kind, phihat, psihat, xi, eta),
        t_lo,
        t_hi,
        grid,
    )
}

/// [`bilinear_integral_direct`] for an arbitrary phase, gradient magnitude and
/// amplitude `F(η)` at fixed `ξ`.
pub fn direct_with(
    phase: &(dyn Fn(&[f64; 3]) -> f64 + Sync),
    grad_norm: &(dyn Fn(&[f64; 3]) -> Option<f64> + Sync),
    amplitude: &(dyn Fn(&[f64; 3]) -> Complex<f64> + Sync),
    t_lo: f64,
    t_hi: f64,
    grid: &Grid<f64>,
) -> Result<Complex<f64>> {
    if !(t_hi > t_lo) {
        return Err(invalid(format!("need t_lo < t_hi, got [{t_lo}, {t_hi}]")));
    }
    let pts: Vec<(f64, Complex<f64>)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let eta = grid.xi(i);
            (phase(&eta), amplitude(&eta))
        })
        .collect();
    let fmax = pts.iter().map(|p| p.1.norm()).fold(0.0, f64::max);
    if fmax == 0.0 {
        return Ok(Complex::new(0.0, 0.0));
    }
    let h_eta = grid.frequency_step();
    let mut phi_max = 0.0f64;
    for (i, p) in pts.iter().enumerate() {
        if p.1.norm() <= SUPPORT_FLOOR * fmax {
            continue;
        }
        phi_max = phi_max.max(p.0.abs());
        let eta = grid.xi(i);
        if let Some(g) = grad_norm(&eta) {
            if g * h_eta > RESOLUTION_LIMIT {
                return Err(invalid(format!("eta grid too coarse: |grad phi| h = {} at eta = {eta:?}", g * h_eta)));
            }
        }
    }
    let panels = ((phi_max * (t_hi - t_lo) / RESOLUTION_LIMIT).ceil() as usize).max(1);
    let h = (t_hi - t_lo) / panels as f64;
    let nodes: Vec<(f64, f64)> = (0..panels)
        .flat_map(|p| {
            let mid = t_lo + (p as f64 + 0.5) * h;
            GAUSS4.iter().map(move |&(x, w)| (mid + 0.5 * h * x, 0.5 * h * w))
        })
        .collect();
    // collected before summing so the result does not depend on the thread count
    let terms: Vec<Complex<f64>> = pts
        .par_iter()
        .filter(|p| p.1 != Complex::new(0.0, 0.0))
        .map(|&(phase, f)| {
            let s: Complex<f64> = nodes.iter().map(|&(s, w)| Complex::from_polar(w, phase * s)).sum();
            f * s
        })
        .collect();
    let sum: Complex<f64> = terms.iter().sum();
    Ok(sum / grid.volume())
}

/// The same coefficients as [`bilinear_integral_direct`] at the lattice
/// frequencies `xi_indices`, computed the way the final-state iteration does:
/// propagate both data, form the product in physical space, and integrate
/// with the Duhamel integrator on `nodes` uniform times, Richardson
/// extrapolated against `(nodes + 1)/2` times.
#[allow(clippy::too_many_arguments)]
pub fn bilinear_integral_spectral(
    phi: &Field<f64>,
    psi: &Field<f64>,
    kind: PhaseKind,
    term: BilinearTerm,
    xi_indices: &[usize],
    t_lo: f64,
    t_hi: f64,
    nodes: usize,
) -> Result<Vec<Complex<f64>>> {
    if nodes < 3 || nodes % 2 == 0 {
        return Err(invalid(format!("nodes must be odd and at least 3, got {nodes}")));
    }
    if !(t_hi > t_lo) {
        return Err(invalid(format!("need t_lo < t_hi, got [{t_lo}, {t_hi}]")));
    }
    let grid = phi.grid().clone();
    if psi.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    let tables = SymbolTables::new(&grid);
    let phi_s = phi.in_representation(Representation::Spectral);
    let psi_s = psi.in_representation(Representation::Spectral);
    let (conj_f, conj_g) = match kind {
        PhaseKind::Phi0 => (false, true),
        PhaseKind::PhiPlus => (false, false),
        PhaseKind::PhiMinus => (true, true),
    };
    let maybe_conj = |f: Field<f64>, c: bool| if c { f.map(|v| v.conj()) } else { f };
    let source = |s: f64| -> Field<f64> {
        let f = propagate(&phi_s, s);
        let g = maybe_conj(propagate(&psi_s, s).with_table(&tables.u).into_physical(), conj_g);
        match term {
            BilinearTerm::U1Sq => {
                let f = maybe_conj(f.with_table(&tables.u).into_physical(), conj_f);
                f.zip_map(&g, |a, b| a * b).into_spectral()
            }
            BilinearTerm::Cross => {
                let mut total = Field::zeros(&grid, Representation::Spectral);
                for k in 0..grid.dim() {
                    let mut dk = f.clone();
                    for (i, v) in dk.values_mut().iter_mut().enumerate() {
                        *v = *v * Complex::new(0.0, grid.xi(i)[k]);
                    }
                    let dk = maybe_conj(dk.into_physical(), conj_f);
                    let mut prod = dk.zip_map(&g, |a, b| a * b).into_spectral();
                    for (i, v) in prod.values_mut().iter_mut().enumerate() {
                        let x = grid.xi(i);
                        let c = norm(&x);
                        *v = if c == 0.0 { Complex::new(0.0, 0.0) } else { *v * Complex::new(0.0, x[k] / (c * bracket(c))) };
                    }
                    total = &total + &prod;
                }
                total
            }
        }
    };
    let integ = DuhamelIntegrator::new(&grid);
    let run = |count: usize| -> Result<Vec<Complex<f64>>> {
        let times: Vec<f64> = (0..count).map(|j| t_lo + (t_hi - t_lo) * j as f64 / (count - 1) as f64).collect();
        let mut first = None;
        integ.stream(
            &times,
            |j| Ok(source(times[j])),
            |j, d| {
                if j == 0 {
                    first = Some(d.clone());
                }
                Ok(())
            },
        )?;
        let d = first.expect("node 0 emitted");
        // ∫ e^{iH(ξ)s} N̂(ξ, s) ds = -e^{iH(ξ)t_lo} D(t_lo)
        Ok(xi_indices
            .iter()
            .map(|&i| -Complex::from_polar(1.0, dispersion(norm(&grid.xi(i))) * t_lo) * d.values()[i])
            .collect())
    };
    let fine = run(nodes)?;
    let coarse = run(nodes.div_ceil(2))?;
    Ok(fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect())
}
