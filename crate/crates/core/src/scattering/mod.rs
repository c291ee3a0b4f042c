//! Final-state construction on `[T, T_max]`: free profiles, the
//! decomposition of the Duhamel term into `Tri`, `Dif`, `Asy`, the
//! correction terms `z'` and `ν`, and the Jacobi fixed-point iteration
//!
//! ```text
//! z₍ₖ₊₁₎ = z⁰ + Tri(u₍ₖ₎) + Dif(u₍ₖ₎) + Asy(u⁰)
//! u₍ₖ₊₁₎ = Vz₍ₖ₎ - P|u₍ₖ₎|²/2
//! ```
//!
//! started from `z₍₀₎ = z⁰ = e^{-iHt}φ`, `u₍₀₎ = u⁰ = Vz⁰`.

pub mod duhamel;
pub mod weighted;

use num_complex::Complex;
use rayon::prelude::*;

use crate::dynamics::{GpState, Solver, SolverConfig, OVERFLOW_LIMIT};
use crate::error::{invalid, Error, Result};
use crate::field::{Field, Representation};
use crate::normal_form::{normal_form_update, Nonlinearity};
use crate::norms::{besov_norm, sobolev_norm};
use crate::operators::linear::{propagate, v_inverse_with, v_map_with, SymbolTables};
use crate::scalar::Real;
use crate::trajectory::{Trajectory, VariableTag};

pub use duhamel::{duhamel_from_infinity, Dispersion, DuhamelIntegrator, DuhamelOutput, DuhamelValue, TailEstimate};
pub use weighted::{
    data_norm_n, script_z2_norm, script_z_norms, wl_norm, wl_norm_series, x_eps_exponents, x_eps_norm,
    x_eps_norm_series, Weights, Z2Norm, ZNorm, ZPrimeNorm,
};

use weighted::{z2_norm, z_norm, z_prime_norm, FreeSeries, Z2Series, ZPrimeSeries};

/// `ε` used for 2D decay reporting.
pub const DEFAULT_EPS_2D: f64 = 0.1;
/// `ε = 3/68`, sufficient for the 3D construction.
pub const DEFAULT_EPS_3D: f64 = 3.0 / 68.0;
/// Consecutive increases of `D_k` that count as divergence.
pub const DIVERGENCE_RUN: usize = 3;

/// Per-sweep record of the fixed-point iteration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationDiagnostics {
    /// `D_k`
    pub differences: Vec<f64>,
    /// `E_k`
    pub sizes: Vec<f64>,
    /// `D_k / D_{k-1}`
    pub contraction_ratios: Vec<f64>,
}

impl IterationDiagnostics {
    fn push(&mut self, d: f64, e: f64) {
        if let Some(&prev) = self.differences.last() {
            self.contraction_ratios.push(if prev > 0.0 { d / prev } else { 0.0 });
        }
        self.differences.push(d);
        self.sizes.push(e);
    }

    fn increasing_run(&self) -> usize {
        self.differences.windows(2).rev().take_while(|w| w[1] > w[0]).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeSpacing {
    Geometric,
    Uniform,
}

/// `count` nodes from `t0` to `t1`, both included.
pub fn time_nodes(t0: f64, t1: f64, count: usize, spacing: NodeSpacing) -> Result<Vec<f64>> {
    if count < 2 || !(t1 > t0) || !(t0 > 0.0) {
        return Err(invalid(format!("need 0 < t0 < t1 and at least two nodes, got [{t0}, {t1}] with {count}")));
    }
    let last = (count - 1) as f64;
    let mut out: Vec<f64> = (0..count)
        .map(|j| match spacing {
            NodeSpacing::Geometric => t0 * (t1 / t0).powf(j as f64 / last),
            NodeSpacing::Uniform => t0 + (t1 - t0) * j as f64 / last,
        })
        .collect();
    out[count - 1] = t1;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScatteringConfig {
    /// `T`
    pub t_start: f64,
    pub t_max: f64,
    pub time_nodes: Vec<f64>,
    pub sweeps: usize,
    /// Absolute tolerance on `D_k`.
    pub tol: f64,
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub dim: usize,
    pub eps: f64,
    pub dealias: bool,
}

impl ScatteringConfig {
    /// Geometric nodes and the default exponents `α = 0.7`, `β = 0.45`, `κ = 0.1`.
    pub fn new(dim: usize, t_start: f64, t_max: f64, nodes: usize) -> Result<Self> {
        let cfg = Self {
            t_start,
            t_max,
            time_nodes: time_nodes(t_start, t_max, nodes, NodeSpacing::Geometric)?,
            sweeps: 12,
            tol: 1e-8,
            alpha: 0.7,
            beta: 0.45,
            kappa: 0.1,
            dim,
            eps: if dim == 3 { DEFAULT_EPS_3D } else { DEFAULT_EPS_2D },
            dealias: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn weights(&self) -> Weights {
        Weights {
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b, k) = (self.alpha, self.beta, self.kappa);
        let fail = |field: &str, msg: String| Err(invalid(format!("{field}: {msg}")));
        if self.dim != 2 && self.dim != 3 {
            return fail("dim", format!("must be 2 or 3, got {}", self.dim));
        }
        if !(self.t_start >= 1.0) {
            return fail("T", format!("must be >= 1, got {}", self.t_start));
        }
        if !(self.t_max > self.t_start) {
            return fail("T_max", format!("must exceed T = {}, got {}", self.t_start, self.t_max));
        }
        let n = &self.time_nodes;
        if n.len() < 2 || n.windows(2).any(|w| !(w[1] > w[0])) {
            return fail("time_nodes", "must be strictly increasing with at least two entries".into());
        }
        if n[0] != self.t_start || n[n.len() - 1] != self.t_max {
            return fail("time_nodes", "must start at T and end at T_max".into());
        }
        if self.sweeps == 0 {
            return fail("sweeps", "must be positive".into());
        }
        if !(self.tol > 0.0) {
            return fail("tol", format!("must be positive, got {}", self.tol));
        }
        if !(b < 0.5) {
            return fail("beta", format!("need beta < 1/2, got {b}"));
        }
        if !(1.0 - b < a && a < 2.0 * b) {
            return fail("alpha", format!("need 1 - beta < alpha < 2 beta, got alpha = {a}, beta = {b}"));
        }
        if !(k > 0.0 && k < 0.25) {
            return fail("kappa", format!("need 0 < kappa < 1/4, got {k}"));
        }
        if !(0.5 + k < a && a < 2.0 * b - k) {
            return fail("alpha", format!("need 1/2 + kappa < alpha < 2 beta - kappa, got alpha = {a}"));
        }
        if !(self.eps >= 0.0) {
            return fail("eps", format!("must be >= 0, got {}", self.eps));
        }
        Ok(())
    }
}

fn node_times<T: Real>(times: &[f64]) -> Vec<T> {
    times.iter().map(|&t| T::lit(t)).collect()
}

/// `z⁰(t) = e^{-iHt}φ` (spectral) and `u⁰ = Vz⁰` (physical) at each time.
pub fn free_profile<T: Real>(phi: &Field<T>, times: &[T]) -> Result<(Trajectory<T>, Trajectory<T>)> {
    let grid = phi.grid();
    let tables = SymbolTables::new(grid);
    let spec = phi.in_representation(Representation::Spectral);
    let pairs: Vec<(Field<T>, Field<T>)> = times
        .par_iter()
        .map(|&t| {
            let z = propagate(&spec, t);
            let u = v_map_with(&z, &tables).into_physical();
            (z, u)
        })
        .collect();
    let (zs, us): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok((
        Trajectory::from_parts(grid, VariableTag::Z, times.to_vec(), zs)?,
        Trajectory::from_parts(grid, VariableTag::U, times.to_vec(), us)?,
    ))
}

fn physical<T: Real>(f: &Field<T>) -> Field<T> {
    f.in_representation(Representation::Physical)
}

fn duhamel_of<T: Real>(
    traj: &Trajectory<T>,
    source: impl Fn(&Nonlinearity<T>, usize) -> Result<Field<T>> + Sync,
) -> Result<DuhamelOutput<T>> {
    let grid = traj.grid();
    let nl = Nonlinearity::new(grid, false);
    let integ = DuhamelIntegrator::new(grid);
    let times = traj.times().to_vec();
    let mut out: Vec<Option<Field<T>>> = vec![None; times.len()];
    let tail = integ.stream(
        &times,
        |j| source(&nl, j),
        |j, d| {
            out[j] = Some(d.clone());
            Ok(())
        },
    )?;
    let fields = out.into_iter().map(|f| f.expect("every node emitted")).collect();
    Ok(DuhamelOutput {
        traj: Trajectory::from_parts(grid, VariableTag::Z, times, fields)?,
        tail,
    })
}

/// `Tri(u) = ∫_∞^t e^{-iH(t-s)} N³(u) ds` at every node.
pub fn tri_term<T: Real>(utraj: &Trajectory<T>) -> Result<DuhamelOutput<T>> {
    duhamel_of(utraj, |nl, j| Ok(nl.eval(&physical(&utraj.fields()[j]))?.1))
}

/// `Dif(u) = ∫_∞^t e^{-iH(t-s)} [N²(u) - N²(u⁰)] ds` at every node.
pub fn dif_term<T: Real>(utraj: &Trajectory<T>, u0traj: &Trajectory<T>) -> Result<DuhamelOutput<T>> {
    if !utraj.same_times(u0traj) {
        return Err(Error::GridMismatch);
    }
    duhamel_of(utraj, |nl, j| {
        let a = nl.eval(&physical(&utraj.fields()[j]))?.0;
        let b = nl.eval(&physical(&u0traj.fields()[j]))?.0;
        Ok(a - b)
    })
}

/// `Asy(u⁰) = ∫_∞^t e^{-iH(t-s)} N²(u⁰) ds` at every node.
pub fn asy_term<T: Real>(u0traj: &Trajectory<T>) -> Result<DuhamelOutput<T>> {
    duhamel_of(u0traj, |nl, j| Ok(nl.eval(&physical(&u0traj.fields()[j]))?.0))
}

/// `z' = i∫_∞^t e^{-iH(t-s)} |Uz⁰|² ds` at every node of `z0traj`.
pub fn z_prime<T: Real>(z0traj: &Trajectory<T>) -> Result<DuhamelOutput<T>> {
    let grid = z0traj.grid();
    let tables = SymbolTables::new(grid);
    duhamel_of(z0traj, |_, j| {
        let uz = z0traj.fields()[j]
            .in_representation(Representation::Spectral)
            .with_table(&tables.u)
            .into_physical();
        Ok(uz.map(|c| Complex::new(T::zero(), c.norm_sqr())).into_spectral())
    })
}

/// `ν = (2-Δ)^{-1}U^{-1}|u|²` with the `ξ = 0` coefficient dropped.
#[derive(Clone, Debug)]
pub struct NuField<T: Real> {
    /// Spectral.
    pub field: Field<T>,
    /// Mean of `|u|²` that `U^{-1}` discarded.
    pub dropped_mean: T,
}

pub fn nu_field<T: Real>(u: &Field<T>) -> NuField<T> {
    let tables = SymbolTables::new(u.grid());
    nu_with(u, &tables)
}

fn nu_with<T: Real>(u: &Field<T>, tables: &SymbolTables<T>) -> NuField<T> {
    let abs2 = physical(u).map(|c| Complex::new(c.norm_sqr(), T::zero())).into_spectral();
    let dropped = abs2.values()[0].re / u.grid().volume();
    let mut field = abs2;
    for ((x, a), b) in field
        .values_mut()
        .iter_mut()
        .zip(&tables.inv_two_minus_lap.values)
        .zip(&tables.u_inv.values)
    {
        *x = *x * (*a * *b);
    }
    NuField {
        field,
        dropped_mean: dropped,
    }
}

/// Output of [`iterate`].
#[derive(Clone, Debug)]
pub struct ScatteringResult<T: Real> {
    /// `z` on the nodes, spectral.
    pub z: Trajectory<T>,
    /// `u` on the nodes, physical.
    pub u: Trajectory<T>,
    /// Free profile `z⁰`, spectral.
    pub z0: Trajectory<T>,
    /// Cached `Asy(u⁰)`, spectral.
    pub asy: Trajectory<T>,
    pub diagnostics: IterationDiagnostics,
    pub converged: bool,
    pub sweeps: usize,
    /// Tail estimate of the last Duhamel evaluation.
    pub tail: TailEstimate,
    /// `‖φ‖_{Ḃ¹_{1,1}}`
    pub data_besov: f64,
}

fn diverged(diag: &IterationDiagnostics) -> Error {
    Error::Diverged(Box::new(diag.clone()))
}

/// Runs the Jacobi iteration until `D_k ≤ tol` or the sweep budget is spent.
///
/// Sweep `k` forms `u₍ₖ₊₁₎`, records `D_k` and `E_k`, and if not yet
/// converged forms `z₍ₖ₊₁₎`. On convergence the returned pair is
/// `(z₍ₖ₎, u₍ₖ₊₁₎)`, which satisfies `u = Vz - P|u|²/2` up to `D_k`.
/// Fails with [`Error::Diverged`] after [`DIVERGENCE_RUN`] consecutive
/// increases of `D_k`, on non-finite values, or when `‖u‖_∞` exceeds the
/// overflow limit.
pub fn iterate<T: Real>(phi: &Field<T>, cfg: &ScatteringConfig) -> Result<ScatteringResult<T>> {
    cfg.validate()?;
    let grid = phi.grid().clone();
    if grid.dim() != cfg.dim {
        return Err(invalid(format!("dim: config says {}, datum lives in {} dimensions", cfg.dim, grid.dim())));
    }
    let times_f = cfg.time_nodes.clone();
    let times: Vec<T> = node_times(&times_f);
    let k_nodes = times.len();
    let w = cfg.weights();
    let t0 = cfg.t_start;
    let nl = Nonlinearity::new(&grid, cfg.dealias);
    let tables = nl.tables().clone();
    let integ = DuhamelIntegrator::new(&grid);

    let (z0, u0) = free_profile(phi, &times)?;
    let z0f = z0.fields();
    let u0f = u0.fields();
    let n2_u0: Vec<Field<T>> = u0f.par_iter().map(|u| nl.eval(u).map(|p| p.0)).collect::<Result<_>>()?;

    let mut asy: Vec<Option<Field<T>>> = vec![None; k_nodes];
    integ.stream(
        &times,
        |j| Ok(n2_u0[j].clone()),
        |j, d| {
            asy[j] = Some(d.clone());
            Ok(())
        },
    )?;
    let asy: Vec<Field<T>> = asy.into_iter().map(|f| f.expect("every node emitted")).collect();

    let mut free = FreeSeries::default();
    for u in u0f {
        free.push(u);
    }

    // z₍ₖ₊₁₎ = z⁰ + Asy + D[N(u₍ₖ₎) - N²(u⁰)]
    let build = |u: &[Field<T>]| -> Result<(Vec<Field<T>>, TailEstimate)> {
        let mut out: Vec<Option<Field<T>>> = vec![None; k_nodes];
        let tail = integ.stream(
            &times,
            |j| {
                let (a, b) = nl.eval(&u[j])?;
                Ok(a + b - n2_u0[j].clone())
            },
            |j, d| {
                out[j] = Some(&(&z0f[j] + &asy[j]) + d);
                Ok(())
            },
        )?;
        Ok((out.into_iter().map(|f| f.expect("every node emitted")).collect(), tail))
    };
    let update = |z: &[Field<T>], u: &[Field<T>]| -> Vec<Field<T>> {
        z.par_iter()
            .zip(u.par_iter())
            .map(|(z, u)| normal_form_update(z, u, T::zero(), &tables))
            .collect()
    };
    let z2_diff = |a: &[Field<T>], b: &[Field<T>]| -> Z2Series {
        let mut s = Z2Series::default();
        for (x, y) in a.iter().zip(b) {
            s.push(&(x - y));
        }
        s
    };
    let zp_diff = |a: &[Field<T>], b: &[Field<T>]| -> ZPrimeSeries {
        let mut s = ZPrimeSeries::default();
        for (x, y) in a.iter().zip(b) {
            s.push(&(x - y));
        }
        s
    };

    let (mut z_cur, mut tail) = build(u0f)?;
    let mut dz = z2_diff(&z_cur, z0f);
    let mut u_cur = update(z0f, u0f);

    let mut diag = IterationDiagnostics::default();
    let mut converged = false;
    let mut sweeps = 0;
    let mut result_u = None;
    for k in 1..=cfg.sweeps {
        sweeps = k;
        let u_next = update(&z_cur, &u_cur);
        let umax = u_next.iter().map(|u| u.max_abs().to_f64_lossy()).fold(0.0, f64::max);
        let du = zp_diff(&u_next, &u_cur);
        let d = z2_norm(&times_f, &dz, w, t0)?.total() + z_prime_norm(&times_f, &du, w, t0)?.total();
        let e = z_norm(&times_f, &free, &zp_diff(&u_cur, u0f), w, t0)?.total();
        diag.push(d, e);
        if !d.is_finite() || !e.is_finite() || !(umax <= OVERFLOW_LIMIT) {
            return Err(diverged(&diag));
        }
        if d <= cfg.tol {
            converged = true;
            result_u = Some(u_next);
            break;
        }
        if diag.increasing_run() >= DIVERGENCE_RUN {
            return Err(diverged(&diag));
        }
        if k == cfg.sweeps {
            result_u = Some(u_next);
            break;
        }
        let (z_next, t) = build(&u_cur)?;
        tail = t;
        dz = z2_diff(&z_next, &z_cur);
        z_cur = z_next;
        u_cur = u_next;
    }
    let u_final = result_u.expect("at least one sweep");
    let data_besov = besov_norm(&physical(phi), T::one(), 1.0, 1.0)?.to_f64_lossy();
    Ok(ScatteringResult {
        z: Trajectory::from_parts(&grid, VariableTag::Z, times.clone(), z_cur)?,
        u: Trajectory::from_parts(&grid, VariableTag::U, times.clone(), u_final)?,
        z0,
        asy: Trajectory::from_parts(&grid, VariableTag::Z, times, asy)?,
        diagnostics: diag,
        converged,
        sweeps,
        tail,
        data_besov,
    })
}

/// Forward-evolved `u(T)` compared with the constructed `u(T_max)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForwardBackward {
    /// `‖u_fwd(T_max) - u(T_max)‖_{H¹} / ‖u(T_max)‖_{H¹}`
    pub relative_h1: f64,
    pub steps: usize,
}

pub fn forward_backward_check<T: Real>(result: &ScatteringResult<T>, dt: T) -> Result<ForwardBackward> {
    let (t_start, u_start) = result.u.get(0);
    let (t_end, u_end) = result.u.last().expect("nonempty trajectory");
    let mut solver = Solver::new(result.u.grid(), SolverConfig::new(dt))?;
    let evo = solver.evolve(&GpState::from_u(&physical(u_start)), t_start, t_end)?;
    let (_, fwd) = evo.u.last().expect("final sample");
    let num = sobolev_norm(&(fwd - &physical(u_end)), T::one(), false);
    let den = sobolev_norm(u_end, T::one(), false);
    Ok(ForwardBackward {
        relative_h1: if den > T::zero() { (num / den).to_f64_lossy() } else { num.to_f64_lossy() },
        steps: evo.steps,
    })
}

/// One row of the correction-term decay report.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayRow {
    pub t: f64,
    pub z_prime_h1: f64,
    pub z_prime_h_eps: f64,
    /// `‖ν‖_{Ḣ¹} + ‖ν‖_{Ḣ²}`
    pub nu_h1_h2: f64,
    pub nu_h1: f64,
    pub nu_h_eps: f64,
    pub z_second_h1: f64,
}

/// Norms of `z'`, `ν` and `z'' = V^{-1}u - z⁰ + ν - z'` at every node, with
/// the zero mode of `z''` removed.
pub fn correction_report<T: Real>(result: &ScatteringResult<T>, eps: f64) -> Result<Vec<DecayRow>> {
    let zp = z_prime(&result.z0)?;
    let tables = SymbolTables::new(result.u.grid());
    let e = T::lit(eps);
    let rows = (0..result.u.len())
        .into_par_iter()
        .map(|j| {
            let (t, u) = result.u.get(j);
            let nu = nu_with(u, &tables).field;
            let zpj = &zp.traj.fields()[j];
            let vinv = v_inverse_with(&u.in_representation(Representation::Spectral), &tables).field;
            let mut z2 = &(&(&vinv - &result.z0.fields()[j]) + &nu) - zpj;
            // V^{-1} cannot see the ξ = 0 coefficient of z
            z2.values_mut()[0] = Complex::new(T::zero(), T::zero());
            let nu_h1 = sobolev_norm(&nu, T::one(), true).to_f64_lossy();
            DecayRow {
                t: t.to_f64_lossy(),
                z_prime_h1: sobolev_norm(zpj, T::one(), true).to_f64_lossy(),
                z_prime_h_eps: sobolev_norm(zpj, e, true).to_f64_lossy(),
                nu_h1_h2: nu_h1 + sobolev_norm(&nu, T::lit(2.0), true).to_f64_lossy(),
                nu_h1,
                nu_h_eps: sobolev_norm(&nu, e, true).to_f64_lossy(),
                z_second_h1: sobolev_norm(&z2, T::one(), false).to_f64_lossy(),
            }
        })
        .collect();
    Ok(rows)
}

/// One run of [`contraction_radius`].
#[derive(Clone, Debug, PartialEq)]
pub struct RadiusRun {
    pub scale: f64,
    pub data_besov: f64,
    pub converged: bool,
    pub diagnostics: IterationDiagnostics,
}

/// Measured smallness threshold: the largest `‖λφ‖_{Ḃ¹_{1,1}}` over the
/// given scales for which the iteration converged.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiusScan {
    pub runs: Vec<RadiusRun>,
    pub largest_converged: Option<f64>,
}

pub fn contraction_radius<T: Real>(phi: &Field<T>, scales: &[f64], cfg: &ScatteringConfig) -> Result<RadiusScan> {
    let mut runs = Vec::new();
    for &s in scales {
        let scaled = phi.scale_real(T::lit(s));
        let besov = besov_norm(&physical(&scaled), T::one(), 1.0, 1.0)?.to_f64_lossy();
        let run = match iterate(&scaled, cfg) {
            Ok(r) => RadiusRun {
                scale: s,
                data_besov: besov,
                converged: r.converged,
                diagnostics: r.diagnostics,
            },
            Err(Error::Diverged(d)) => RadiusRun {
                scale: s,
                data_besov: besov,
                converged: false,
                diagnostics: *d,
            },
            Err(e) => return Err(e),
        };
        runs.push(run);
    }
    let largest_converged = runs
        .iter()
        .filter(|r| r.converged)
        .map(|r| r.data_besov)
        .fold(None, |acc: Option<f64>, b| Some(acc.map_or(b, |a| a.max(b))));
    Ok(RadiusScan { runs, largest_converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Grid};

    fn gaussian(g: &Grid<f64>, a: f64, w: f64) -> Field<f64> {
        Field::from_fn(g, |x: [f64; 3]| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            Complex::new(a * (-r2 / (2.0 * w * w)).exp(), 0.0)
        })
    }

    fn small_cfg() -> ScatteringConfig {
        let mut c = ScatteringConfig::new(2, 2.0, 8.0, 41).unwrap();
        c.tol = 1e-10;
        c
    }

    #[test]
    fn config_validation() {
        let good = ScatteringConfig::new(2, 10.0, 80.0, 100).unwrap();
        assert!(good.validate().is_ok());
        for (field, edit) in [
            ("beta", Box::new(|c: &mut ScatteringConfig| c.beta = 0.5) as Box<dyn Fn(&mut ScatteringConfig)>),
            ("alpha", Box::new(|c: &mut ScatteringConfig| c.alpha = 0.52)),
            ("kappa", Box::new(|c: &mut ScatteringConfig| c.kappa = 0.3)),
            ("T", Box::new(|c: &mut ScatteringConfig| c.t_start = 0.5)),
            ("dim", Box::new(|c: &mut ScatteringConfig| c.dim = 4)),
            ("time_nodes", Box::new(|c: &mut ScatteringConfig| c.time_nodes.swap(1, 2))),
        ] {
            let mut c = good.clone();
            edit(&mut c);
            let err = c.validate().unwrap_err().to_string();
            assert!(err.contains(field), "{err}");
        }
        assert!(time_nodes(1.0, 1.0, 5, NodeSpacing::Uniform).is_err());
    }

    #[test]
    fn zero_datum_converges_at_once() {
        let g = make_grid(2, 16, 20.0).unwrap();
        let phi = Field::zeros(&g, Representation::Physical);
        let r = iterate(&phi, &small_cfg()).unwrap();
        assert!(r.converged);
        assert_eq!(r.sweeps, 1);
        assert!(r.z.fields().iter().chain(r.u.fields()).all(|f| f.max_abs() == 0.0));
    }

    #[test]
    fn free_profile_is_unitary() {
        let g = make_grid(2, 32, 20.0).unwrap();
        let phi = gaussian(&g, 0.1, 1.5);
        let times: Vec<f64> = (0..6).map(|k| 1.0 + k as f64).collect();
        let (z, u) = free_profile(&phi, &times).unwrap();
        let n0 = sobolev_norm(&phi, 0.0, false);
        for f in z.fields() {
            assert!((sobolev_norm(f, 0.0, false) / n0 - 1.0).abs() < 1e-12);
        }
        assert!(u.fields().iter().all(|f| f.is_physical()));
    }

    #[test]
    fn term_identities() {
        let g = make_grid(2, 32, 20.0).unwrap();
        let phi = gaussian(&g, 0.1, 1.5);
        let times: Vec<f64> = time_nodes(2.0, 6.0, 9, NodeSpacing::Geometric).unwrap();
        let (z0, u0) = free_profile(&phi, &times).unwrap();
        let dif = dif_term(&u0, &u0).unwrap();
        assert!(dif.traj.fields().iter().all(|f| f.max_abs() == 0.0));
        let asy = asy_term(&u0).unwrap();
        let (_, u0x2) = free_profile(&phi.scale_real(2.0), &times).unwrap();
        let asy2 = asy_term(&u0x2).unwrap();
        for (a, b) in asy.traj.fields().iter().zip(asy2.traj.fields()) {
            assert!((&a.scale_real(4.0) - b).max_abs() <= 1e-10 * b.max_abs());
        }
        let zp = z_prime(&z0).unwrap();
        let (z0x2, _) = free_profile(&phi.scale_real(2.0), &times).unwrap();
        let zp2 = z_prime(&z0x2).unwrap();
        for (a, b) in zp.traj.fields().iter().zip(zp2.traj.fields()) {
            assert!((&a.scale_real(4.0) - b).max_abs() <= 1e-10 * b.max_abs());
        }
        let zero = Trajectory::from_parts(&g, VariableTag::U, times.clone(), vec![Field::zeros(&g, Representation::Physical); times.len()]).unwrap();
        assert!(asy_term(&zero).unwrap().traj.fields().iter().all(|f| f.max_abs() == 0.0));
        // Tri with u⁰ = 0 is the pure cubic integral of u
        let tri = tri_term(&u0).unwrap();
        let direct = duhamel_of(&u0, |nl, j| Ok(nl.eval(&u0.fields()[j])?.1)).unwrap();
        assert!((&tri.traj.fields()[0] - &direct.traj.fields()[0]).max_abs() == 0.0);
    }

    /// `i∂_t z' - Hz' + |Uz⁰|² = 0`, checked by centred differences.
    #[test]
    fn z_prime_solves_its_equation() {
        let g = make_grid(2, 32, 20.0).unwrap();
        let phi = gaussian(&g, 0.1, 1.5);
        let residual = |dt: f64| -> f64 {
            let times: Vec<f64> = (0..=(4.0 / dt).round() as usize).map(|k| 2.0 + k as f64 * dt).collect();
            let (z0, _) = free_profile(&phi, &times).unwrap();
            let zp = z_prime(&z0).unwrap().traj;
            let tables = SymbolTables::new(&g);
            let j = times.len() / 2;
            let dzdt = (&zp.fields()[j + 1] - &zp.fields()[j - 1]).scale_real(1.0 / (2.0 * dt));
            let hz = zp.fields()[j].with_table(&tables.h);
            let uz = z0.fields()[j].with_table(&tables.u).into_physical();
            let src = uz.map(|c| Complex::new(c.norm_sqr(), 0.0)).into_spectral();
            let r = &(&dzdt.scale(Complex::new(0.0, 1.0)) - &hz) + &src;
            sobolev_norm(&r, 0.0, false)
        };
        let (a, b) = (residual(0.05), residual(0.025));
        assert!(a / b > 3.5, "{a} {b}");
    }

    #[test]
    fn nu_reports_dropped_mean() {
        let g = make_grid(2, 32, 20.0).unwrap();
        let u = gaussian(&g, 0.2, 1.5);
        let nu = nu_field(&u);
        assert_eq!(nu.field.values()[0], Complex::new(0.0, 0.0));
        let mean = u.values().iter().map(|c| c.norm_sqr()).sum::<f64>() / g.len() as f64;
        assert!((nu.dropped_mean - mean).abs() < 1e-14);
        assert_eq!(nu_field(&Field::zeros(&g, Representation::Physical)).field.max_abs(), 0.0);
    }

    #[test]
    fn small_datum_contracts() {
        let g = make_grid(2, 32, 40.0).unwrap();
        let phi = gaussian(&g, 0.05, 2.0);
        let r = iterate(&phi, &small_cfg()).unwrap();
        assert!(r.converged, "{:?}", r.diagnostics);
        // z₍ₖ₊₁₎ sees only u₍ₖ₎, so odd and even sweeps form two chains
        // and the contraction shows in D_{k+2}/D_k
        let d = &r.diagnostics.differences;
        for w in d.windows(3) {
            assert!(w[2] < 0.5 * w[0], "{:?}", r.diagnostics);
        }
        // the limit satisfies the normal-form relation to the final D_k
        let tables = SymbolTables::new(&g);
        for (z, u) in r.z.fields().iter().zip(r.u.fields()) {
            let again = normal_form_update(z, u, 0.0, &tables);
            assert!(sobolev_norm(&(&again - u), 0.0, false) < 1e-8);
        }
    }

    #[test]
    fn wrong_dimension_rejected() {
        let g = make_grid(3, 8, 20.0).unwrap();
        let phi = Field::zeros(&g, Representation::Physical);
        let err = iterate(&phi, &small_cfg()).unwrap_err().to_string();
        assert!(err.contains("dim"));
    }
}
