//! Time integration of the perturbation equation
//! `i∂_t u + Δu - 2Re u = F(u)` in the diagonal variable `v = V^{-1}u`.
//!
//! `U^{-1}` forgets the mean of `u₁`, so the state carries it separately as
//! `m`. On the torus the `ξ = 0` mode then obeys `ṁ = ⟨Im F⟩` and the zero
//! mode of `v₂` picks up an extra `-2m` alongside `-⟨Re F⟩`.

use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::field::{dealias_values, real_linear_into, Field, Representation};
use crate::grid::Grid;
use crate::operators::linear::{v_inverse_with, SymbolTables};
use crate::scalar::{cis, Real};
use crate::trajectory::{Trajectory, VariableTag};

/// Abort threshold on `‖u‖_∞`.
pub const OVERFLOW_LIMIT: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Fourth-order Runge–Kutta in the interaction picture, exact linear half steps.
    StrangRk4,
    /// Two-stage exponential time differencing (Cox–Matthews).
    EtdRk2,
}

#[derive(Clone, Debug)]
pub struct SolverConfig<T: Real> {
    pub dt: T,
    pub scheme: Scheme,
    pub dealias: bool,
    /// Absolute output times; empty means start and end only.
    pub sample_times: Vec<T>,
    /// Set to `false` to integrate the linear flow only.
    pub nonlinear: bool,
}

impl<T: Real> SolverConfig<T> {
    pub fn new(dt: T) -> Self {
        Self {
            dt,
            scheme: Scheme::StrangRk4,
            dealias: true,
            sample_times: Vec::new(),
            nonlinear: true,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_samples(mut self, times: Vec<T>) -> Self {
        self.sample_times = times;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.sample_times.iter().any(|t| *t < T::zero()) {
            return Err(invalid("sample times must be nonnegative"));
        }
        if self.sample_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("sample times must be strictly increasing"));
        }
        Ok(())
    }
}

/// `v` (spectral) together with the mean of `u₁`.
#[derive(Clone, Debug)]
pub struct GpState<T: Real> {
    pub v: Field<T>,
    pub mean_u1: T,
}

impl<T: Real> GpState<T> {
    pub fn from_u(u: &Field<T>) -> Self {
        let tables = SymbolTables::new(u.grid());
        let mapped = v_inverse_with(u, &tables);
        Self {
            v: mapped.field.into_spectral(),
            mean_u1: mapped.dropped_mean,
        }
    }

    /// State with `v` given and zero mean of `u₁`.
    pub fn from_v(v: &Field<T>) -> Self {
        Self {
            v: v.in_representation(Representation::Spectral),
            mean_u1: T::zero(),
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        self.v.grid()
    }

    /// `u = U v₁ + m + i v₂`, physical.
    pub fn to_u(&self) -> Field<T> {
        let tables = SymbolTables::new(self.grid());
        u_from_state(&self.v, self.mean_u1, &tables).into_physical()
    }
}

fn u_from_state<T: Real>(v: &Field<T>, m: T, tables: &SymbolTables<T>) -> Field<T> {
    let v = v.in_representation(Representation::Spectral);
    let mut u = v.real_linear(&tables.u.values, &tables.one.values);
    let vol = v.grid().volume();
    u.values_mut()[0] += Complex::new(m * vol, T::zero());
    u
}

/// `F(u) = u² + 2|u|² + |u|²u` pointwise; `u` must be physical.
pub fn nonlinearity_f<T: Real>(u: &Field<T>, dealias: bool) -> Result<Field<T>> {
    u.expect(Representation::Physical)?;
    let f = u.map(pointwise_f);
    Ok(if dealias { f.dealias() } else { f })
}

#[inline]
fn pointwise_f<T: Real>(u: Complex<T>) -> Complex<T> {
    let a = u.norm_sqr();
    u * u + Complex::new(T::lit(2.0) * a, T::zero()) + u * a
}

/// `∂_t v = -iHv - V^{-1}(iF(Vv))` for `v` with zero mean of `u₁`.
/// The result is returned in the representation of `v`.
pub fn rhs_v<T: Real>(v: &Field<T>, dealias: bool) -> Field<T> {
    let repr = v.representation();
    let rhs = Rhs::new(v.grid(), dealias, true);
    let spec = v.in_representation(Representation::Spectral);
    let (n, _, _) = rhs.nonlinear(&spec, T::zero());
    let mut out = spec;
    for (x, h) in out.values_mut().iter_mut().zip(&rhs.tables.h.values) {
        *x = *x * Complex::new(T::zero(), -*h);
    }
    (out + n).into_representation(repr)
}

/// `∂_t u = i(Δu - 2Re u - F(u))`, physical in and out.
pub fn u_time_derivative<T: Real>(u: &Field<T>, dealias: bool) -> Result<Field<T>> {
    let f = nonlinearity_f(u, dealias)?;
    let lap = u.multiply(&crate::multiplier::Laplacian);
    let i = Complex::new(T::zero(), T::one());
    Ok(lap.zip_map(&f, |l, fv| l - fv).zip_map(u, |a, uv| (a - Complex::new(T::lit(2.0) * uv.re, T::zero())) * i))
}

/// `∫ |∇u|² + (|u|² + 2Re u)²/2`.
pub fn energy<T: Real>(u: &Field<T>) -> T {
    let phys = u.in_representation(Representation::Physical);
    let spec = u.in_representation(Representation::Spectral);
    let grad: T = spec
        .values()
        .iter()
        .zip(spec.grid().xi_norm2())
        .map(|(c, &r2)| r2 * c.norm_sqr())
        .sum::<T>()
        / spec.grid().volume();
    let pot: T = phys
        .values()
        .iter()
        .map(|c| {
            let w = c.norm_sqr() + T::lit(2.0) * c.re;
            w * w
        })
        .sum::<T>()
        * phys.grid().cell_volume()
        / T::lit(2.0);
    grad + pot
}

/// `∫ |u|² + 2Re u`.
pub fn charge<T: Real>(u: &Field<T>) -> T {
    let phys = u.in_representation(Representation::Physical);
    phys.values()
        .iter()
        .map(|c| c.norm_sqr() + T::lit(2.0) * c.re)
        .sum::<T>()
        * phys.grid().cell_volume()
}

type Buf<T> = Vec<Complex<T>>;

/// Nonlinear part of the `(v, m)` system and the tabulated symbols it needs.
#[derive(Clone, Debug)]
struct Rhs<T: Real> {
    grid: Grid<T>,
    tables: SymbolTables<T>,
    neg_u_inv: Vec<T>,
    neg_one: Vec<T>,
    dealias: bool,
    nonlinear: bool,
}

impl<T: Real> Rhs<T> {
    fn new(grid: &Grid<T>, dealias: bool, nonlinear: bool) -> Self {
        let tables = SymbolTables::new(grid);
        Self {
            grid: grid.clone(),
            neg_u_inv: tables.u_inv.values.iter().map(|&x| -x).collect(),
            neg_one: vec![-T::one(); grid.len()],
            tables,
            dealias,
            nonlinear,
        }
    }

    /// Writes `N_v` for spectral `v` into `out`; returns `(ṁ, ‖u‖_∞)`.
    fn eval(&self, v: &[Complex<T>], m: T, out: &mut [Complex<T>], work: &mut Buf<T>, lines: &mut Buf<T>) -> (T, T) {
        let grid = &self.grid;
        let vol = grid.volume();
        work.resize(v.len(), Complex::new(T::zero(), T::zero()));
        real_linear_into(grid, v, &self.tables.u.values, &self.tables.one.values, work);
        work[0] += Complex::new(m * vol, T::zero());
        grid.inverse_with(work, lines);
        let umax = work.iter().map(|c| c.norm_sqr()).fold(T::zero(), T::max).sqrt();
        let zero_mode = Complex::new(T::zero(), -T::lit(2.0) * m * vol);
        if !self.nonlinear {
            out.iter_mut().for_each(|x| *x = Complex::new(T::zero(), T::zero()));
            out[0] = zero_mode;
            return (T::zero(), umax);
        }
        let i = Complex::new(T::zero(), T::one());
        for c in work.iter_mut() {
            *c = pointwise_f(*c) * i;
        }
        grid.forward_with(work, lines);
        if self.dealias {
            dealias_values(grid, work);
        }
        let dm = -work[0].re / vol;
        // -U^{-1} Re G - i Im G
        real_linear_into(grid, work, &self.neg_u_inv, &self.neg_one, out);
        out[0] += zero_mode;
        (dm, umax)
    }

    /// Allocating convenience wrapper around [`Rhs::eval`].
    fn nonlinear(&self, v: &Field<T>, m: T) -> (Field<T>, T, T) {
        let mut out = vec![Complex::new(T::zero(), T::zero()); v.values().len()];
        let (dm, umax) = self.eval(v.values(), m, &mut out, &mut Vec::new(), &mut Vec::new());
        let field = Field::from_values(v.grid(), out, Representation::Spectral).expect("length matches grid");
        (field, dm, umax)
    }
}

/// Tabulated exponentials for one step size.
#[derive(Clone, Debug)]
struct StepTables<T: Real> {
    dt: T,
    half: Vec<Complex<T>>,
    full: Vec<Complex<T>>,
    phi1: Vec<Complex<T>>,
    phi2: Vec<Complex<T>>,
}

fn phi_functions<T: Real>(z: Complex<T>) -> (Complex<T>, Complex<T>) {
    if z.norm() < T::lit(1e-2) {
        // φ₁ = Σ z^k/(k+1)!, φ₂ = Σ z^k/(k+2)!
        let mut p1 = Complex::new(T::zero(), T::zero());
        let mut p2 = p1;
        let mut term = Complex::new(T::one(), T::zero());
        let mut fact = T::one();
        for k in 0..8usize {
            fact *= T::from_usize_lossy(k + 1);
            p1 += term / fact;
            p2 += term / (fact * T::from_usize_lossy(k + 2));
            term *= z;
        }
        (p1, p2)
    } else {
        let e = z.exp();
        let one = Complex::new(T::one(), T::zero());
        ((e - one) / z, (e - one - z) / (z * z))
    }
}

impl<T: Real> StepTables<T> {
    fn new(tables: &SymbolTables<T>, dt: T) -> Self {
        let half_dt = dt / T::lit(2.0);
        let h = &tables.h.values;
        Self {
            dt,
            half: h.iter().map(|&h| cis(-h * half_dt)).collect(),
            full: h.iter().map(|&h| cis(-h * dt)).collect(),
            phi1: h.iter().map(|&h| phi_functions(Complex::new(T::zero(), -h * dt)).0).collect(),
            phi2: h.iter().map(|&h| phi_functions(Complex::new(T::zero(), -h * dt)).1).collect(),
        }
    }
}

/// Reusable buffers for one solver.
#[derive(Clone, Debug, Default)]
struct Workspace<T: Real> {
    a: Buf<T>,
    k1: Buf<T>,
    k2: Buf<T>,
    k3: Buf<T>,
    k4: Buf<T>,
    tmp: Buf<T>,
    work: Buf<T>,
    lines: Buf<T>,
}

impl<T: Real> Workspace<T> {
    fn ensure(&mut self, len: usize) {
        for b in [&mut self.a, &mut self.k1, &mut self.k2, &mut self.k3, &mut self.k4, &mut self.tmp] {
            b.resize(len, Complex::new(T::zero(), T::zero()));
        }
    }
}

/// Fixed-configuration integrator for one grid.
#[derive(Clone, Debug)]
pub struct Solver<T: Real> {
    config: SolverConfig<T>,
    rhs: Rhs<T>,
    cache: Option<StepTables<T>>,
    ws: Workspace<T>,
}

/// Output of [`Solver::evolve`].
#[derive(Clone, Debug)]
pub struct Evolution<T: Real> {
    /// `u` at the sample times.
    pub u: Trajectory<T>,
    /// Full state at the sample times.
    pub states: Vec<GpState<T>>,
    pub energy: Vec<T>,
    pub charge: Vec<T>,
    pub steps: usize,
}

impl<T: Real> Evolution<T> {
    /// `v` at the sample times.
    pub fn v(&self) -> Trajectory<T> {
        let fields = self.states.iter().map(|s| s.v.clone()).collect();
        Trajectory::from_parts(self.u.grid(), VariableTag::V, self.u.times().to_vec(), fields)
            .expect("sample times increase")
    }

    pub fn final_state(&self) -> &GpState<T> {
        self.states.last().expect("at least one sample")
    }

    /// `max_t |E(t) - E(t₀)| / |E(t₀)|`.
    pub fn energy_drift(&self) -> T {
        relative_drift(&self.energy)
    }

    pub fn charge_drift(&self) -> T {
        relative_drift(&self.charge)
    }
}

fn relative_drift<T: Real>(series: &[T]) -> T {
    let Some(&first) = series.first() else {
        return T::zero();
    };
    let d = series.iter().map(|&x| (x - first).abs()).fold(T::zero(), T::max);
    if first == T::zero() {
        d
    } else {
        d / first.abs()
    }
}

impl<T: Real> Solver<T> {
    pub fn new(grid: &Grid<T>, config: SolverConfig<T>) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            rhs: Rhs::new(grid, config.dealias, config.nonlinear),
            config,
            cache: None,
            ws: Workspace::default(),
        })
    }

    pub fn config(&self) -> &SolverConfig<T> {
        &self.config
    }

    fn refresh_tables(&mut self, dt: T) {
        let stale = match &self.cache {
            Some(c) => c.dt != dt,
            None => true,
        };
        if stale {
            self.cache = Some(StepTables::new(&self.rhs.tables, dt));
        }
    }

    fn guard(&self, t: T, umax: T, v: &[Complex<T>]) -> Result<()> {
        if !umax.is_finite() || v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NumericalAbort {
                time: t.to_f64_lossy(),
                reason: "non-finite values".into(),
            });
        }
        if umax > T::lit(OVERFLOW_LIMIT) {
            return Err(Error::NumericalAbort {
                time: t.to_f64_lossy(),
                reason: format!("|u| reached {umax:e}, above {OVERFLOW_LIMIT:e}"),
            });
        }
        Ok(())
    }

    /// Advances `state` by `dt` at time `t` (the time is used for diagnostics only).
    pub fn step(&mut self, state: &GpState<T>, t: T, dt: T) -> Result<GpState<T>> {
        let mut v = state.v.in_representation(Representation::Spectral);
        let mut m = state.mean_u1;
        self.step_in_place(v.values_mut(), &mut m, t, dt)?;
        Ok(GpState { v, mean_u1: m })
    }

    fn step_in_place(&mut self, v: &mut [Complex<T>], m: &mut T, t: T, dt: T) -> Result<()> {
        if !(dt > T::zero()) {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        self.refresh_tables(dt);
        self.ws.ensure(v.len());
        let umax = match self.config.scheme {
            Scheme::StrangRk4 => self.rk4ip(v, m, dt),
            Scheme::EtdRk2 => self.etdrk2(v, m, dt),
        };
        self.guard(t, umax, v)
    }

    fn rk4ip(&mut self, v: &mut [Complex<T>], m: &mut T, dt: T) -> T {
        let tabs = self.cache.as_ref().expect("tables refreshed");
        let ws = &mut self.ws;
        let rhs = &self.rhs;
        let half = &tabs.half;
        let h2 = dt / T::lit(2.0);
        let sixth = dt / T::lit(6.0);
        let m0 = *m;

        for ((a, x), e) in ws.a.iter_mut().zip(v.iter()).zip(half) {
            *a = *x * *e;
        }
        let (dm1, umax) = rhs.eval(v, m0, &mut ws.k1, &mut ws.work, &mut ws.lines);
        for (k, e) in ws.k1.iter_mut().zip(half) {
            *k = *k * *e;
        }
        for ((t, a), k) in ws.tmp.iter_mut().zip(&ws.a).zip(&ws.k1) {
            *t = *a + *k * h2;
        }
        let (dm2, _) = rhs.eval(&ws.tmp, m0 + h2 * dm1, &mut ws.k2, &mut ws.work, &mut ws.lines);
        for ((t, a), k) in ws.tmp.iter_mut().zip(&ws.a).zip(&ws.k2) {
            *t = *a + *k * h2;
        }
        let (dm3, _) = rhs.eval(&ws.tmp, m0 + h2 * dm2, &mut ws.k3, &mut ws.work, &mut ws.lines);
        for (((t, a), k), e) in ws.tmp.iter_mut().zip(&ws.a).zip(&ws.k3).zip(half) {
            *t = (*a + *k * dt) * *e;
        }
        let (dm4, _) = rhs.eval(&ws.tmp, m0 + dt * dm3, &mut ws.k4, &mut ws.work, &mut ws.lines);
        let two = T::lit(2.0);
        for (i, x) in v.iter_mut().enumerate() {
            let acc = ws.a[i] + (ws.k1[i] + (ws.k2[i] + ws.k3[i]) * two) * sixth;
            *x = acc * half[i] + ws.k4[i] * sixth;
        }
        *m = m0 + sixth * (dm1 + two * dm2 + two * dm3 + dm4);
        umax
    }

    fn etdrk2(&mut self, v: &mut [Complex<T>], m: &mut T, dt: T) -> T {
        let tabs = self.cache.as_ref().expect("tables refreshed");
        let ws = &mut self.ws;
        let rhs = &self.rhs;
        let m0 = *m;
        let (dm0, umax) = rhs.eval(v, m0, &mut ws.k1, &mut ws.work, &mut ws.lines);
        for i in 0..v.len() {
            ws.a[i] = v[i] * tabs.full[i] + ws.k1[i] * tabs.phi1[i] * dt;
        }
        let ma = m0 + dt * dm0;
        let (dma, _) = rhs.eval(&ws.a, ma, &mut ws.k2, &mut ws.work, &mut ws.lines);
        for i in 0..v.len() {
            v[i] = ws.a[i] + (ws.k2[i] - ws.k1[i]) * tabs.phi2[i] * dt;
        }
        *m = ma + dt * (dma - dm0) / T::lit(2.0);
        umax
    }

    /// Integrates from `t_start` to `t_end`, recording the configured samples
    /// inside `[t_start, t_end]` (both ends always included).
    pub fn evolve(&mut self, initial: &GpState<T>, t_start: T, t_end: T) -> Result<Evolution<T>> {
        if !(t_end > t_start) {
            return Err(invalid(format!("final time {t_end} must exceed start {t_start}")));
        }
        let mut samples: Vec<T> = vec![t_start];
        samples.extend(self.config.sample_times.iter().copied().filter(|&s| s > t_start && s < t_end));
        samples.push(t_end);

        let grid = initial.grid().clone();
        let mut u_traj = Trajectory::new(&grid, VariableTag::U);
        let mut states = Vec::with_capacity(samples.len());
        let mut energies = Vec::with_capacity(samples.len());
        let mut charges = Vec::with_capacity(samples.len());
        let tables = self.rhs.tables.clone();
        let mut record = |t: T, s: &GpState<T>, traj: &mut Trajectory<T>| -> Result<()> {
            let u = u_from_state(&s.v, s.mean_u1, &tables).into_physical();
            energies.push(energy(&u));
            charges.push(charge(&u));
            traj.push(t, u)?;
            states.push(s.clone());
            Ok(())
        };

        let mut state = GpState {
            v: initial.v.in_representation(Representation::Spectral),
            mean_u1: initial.mean_u1,
        };
        record(t_start, &state, &mut u_traj)?;
        let mut steps = 0usize;
        let mut t = t_start;
        for w in samples.windows(2) {
            let gap = w[1] - w[0];
            let count = (gap / self.config.dt - T::lit(1e-9)).ceil().max(T::one());
            let nsteps = count.to_usize().unwrap_or(1);
            let h = gap / count;
            for k in 0..nsteps {
                self.step_in_place(state.v.values_mut(), &mut state.mean_u1, t, h)?;
                steps += 1;
                t = w[0] + h * T::from_usize_lossy(k + 1);
            }
            t = w[1];
            record(t, &state, &mut u_traj)?;
        }
        Ok(Evolution {
            u: u_traj,
            states,
            energy: energies,
            charge: charges,
            steps,
        })
    }
}

/// Evolves `v0` (with zero mean of `u₁`) from 0 to `t_end`.
pub fn evolve<T: Real>(v0: &Field<T>, t_end: T, config: SolverConfig<T>) -> Result<Evolution<T>> {
    let mut solver = Solver::new(v0.grid(), config)?;
    solver.evolve(&GpState::from_v(v0), T::zero(), t_end)
}
