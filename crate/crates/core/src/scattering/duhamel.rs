//! Truncated Duhamel integrals from infinity,
//! `D[N](t) = -∫_t^{T_max} e^{-iH(t-s)} N(s) ds`, by the composite trapezoid
//! rule on a node grid with every node propagated exactly.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::field::{Field, Representation};
use crate::grid::Grid;
use crate::norms::sobolev_norm;
use crate::operators::symbols::dispersion;
use crate::scalar::{cis, Real};
use crate::trajectory::{Trajectory, VariableTag};

/// Dispersion used inside the integral; `Zero` is a test hook.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dispersion {
    Bogoliubov,
    Zero,
}

/// Estimate of the neglected `∫_{T_max}^∞`, from a power-law fit
/// `‖N(s)‖_{L²} ≈ ‖N(T_max)‖ (T_max/s)^γ` over the nodes in `[T_max/2, T_max]`.
/// The bound ignores oscillation; it is infinite when `γ ≤ 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailEstimate {
    pub last_source_norm: f64,
    pub exponent: f64,
    pub bound: f64,
}

impl TailEstimate {
    fn from_samples(times: &[f64], norms: &[f64]) -> Self {
        let last_t = *times.last().unwrap_or(&1.0);
        let last = *norms.last().unwrap_or(&0.0);
        let pts: Vec<(f64, f64)> = times
            .iter()
            .zip(norms)
            .filter(|(t, n)| **t >= last_t / 2.0 && **n > 0.0)
            .map(|(t, n)| (t.ln(), n.ln()))
            .collect();
        if last == 0.0 {
            return Self {
                last_source_norm: 0.0,
                exponent: f64::NAN,
                bound: 0.0,
            };
        }
        let exponent = if pts.len() >= 2 {
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            if sxx > 0.0 {
                -sxy / sxx
            } else {
                f64::NAN
            }
        } else {
            f64::NAN
        };
        let bound = if exponent > 1.0 {
            last * last_t / (exponent - 1.0)
        } else {
            f64::INFINITY
        };
        Self {
            last_source_norm: last,
            exponent,
            bound,
        }
    }
}

/// Duhamel increments at every node of a grid of times.
#[derive(Clone, Debug)]
pub struct DuhamelOutput<T: Real> {
    /// Spectral fields, one per node.
    pub traj: Trajectory<T>,
    pub tail: TailEstimate,
}

/// A single Duhamel value.
#[derive(Clone, Debug)]
pub struct DuhamelValue<T: Real> {
    pub field: Field<T>,
    pub tail: TailEstimate,
}

#[derive(Clone, Debug)]
pub struct DuhamelIntegrator<T: Real> {
    grid: Grid<T>,
    h: Vec<T>,
}

impl<T: Real> DuhamelIntegrator<T> {
    pub fn new(grid: &Grid<T>) -> Self {
        Self::with_dispersion(grid, Dispersion::Bogoliubov)
    }

    pub fn with_dispersion(grid: &Grid<T>, kind: Dispersion) -> Self {
        let h = match kind {
            Dispersion::Bogoliubov => grid.xi_norm2().iter().map(|&r2| dispersion(r2.sqrt())).collect(),
            Dispersion::Zero => vec![T::zero(); grid.len()],
        };
        Self { grid: grid.clone(), h }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    /// Backward recurrence over all nodes. `source(j)` returns the spectral
    /// source at node `j` and is called once per node, from the last node down;
    /// `emit(j, d)` receives `D[N](t_j)`.
    pub fn stream(
        &self,
        times: &[T],
        source: impl Fn(usize) -> Result<Field<T>> + Sync,
        mut emit: impl FnMut(usize, &Field<T>) -> Result<()>,
    ) -> Result<TailEstimate> {
        check_nodes(times)?;
        let k = times.len();
        let half = T::lit(0.5);
        let mut acc = Field::zeros(&self.grid, Representation::Spectral);
        let mut norm_times = Vec::new();
        let mut norms = Vec::new();
        let t_last = times[k - 1];
        let mut next: Option<Field<T>> = None;
        // sources are independent: evaluate a few nodes at a time in parallel
        let chunk = 2 * rayon::current_num_threads().max(1);
        let mut hi = k;
        while hi > 0 {
            let lo = hi.saturating_sub(chunk);
            let batch: Vec<Field<T>> = (lo..hi)
                .into_par_iter()
                .map(|j| source(j).map(Field::into_spectral))
                .collect::<Result<_>>()?;
            for (j, s) in (lo..hi).zip(batch).rev() {
                if !s.grid().same_as(&self.grid) {
                    return Err(Error::GridMismatch);
                }
                if times[j] >= t_last / T::lit(2.0) {
                    norm_times.push(times[j].to_f64_lossy());
                    norms.push(sobolev_norm(&s, T::zero(), false).to_f64_lossy());
                }
                if let Some(sn) = &next {
                    let dt = times[j + 1] - times[j];
                    let w = half * dt;
                    for (((a, x), y), h) in acc.values_mut().iter_mut().zip(sn.values()).zip(s.values()).zip(&self.h) {
                        *a = (*a + *x * w) * cis(*h * dt) + *y * w;
                    }
                }
                let out = -acc.clone();
                emit(j, &out)?;
                next = Some(s);
            }
            hi = lo;
        }
        norm_times.reverse();
        norms.reverse();
        Ok(TailEstimate::from_samples(&norm_times, &norms))
    }

    /// `D[N]` at every node of `ntraj`.
    pub fn all(&self, ntraj: &Trajectory<T>) -> Result<DuhamelOutput<T>> {
        let times = ntraj.times().to_vec();
        let mut fields: Vec<Option<Field<T>>> = vec![None; times.len()];
        let tail = self.stream(
            &times,
            |j| Ok(ntraj.fields()[j].in_representation(Representation::Spectral)),
            |j, d| {
                fields[j] = Some(d.clone());
                Ok(())
            },
        )?;
        let fields = fields.into_iter().map(|f| f.expect("every node emitted")).collect();
        Ok(DuhamelOutput {
            traj: Trajectory::from_parts(&self.grid, VariableTag::Z, times, fields)?,
            tail,
        })
    }

    /// `D[N](t)` for a single `t` in the node range, integrating up to
    /// `t_max` (a node). If `t` is not a node, `N(t)` is interpolated linearly.
    pub fn at(&self, ntraj: &Trajectory<T>, t: T, t_max: T) -> Result<DuhamelValue<T>> {
        let times = ntraj.times();
        check_nodes(times)?;
        let first = times[0];
        let last = times[times.len() - 1];
        if t < first || t > t_max || t_max > last {
            return Err(invalid(format!("t = {t}, T_max = {t_max} outside node range [{first}, {last}]")));
        }
        let end = times
            .iter()
            .position(|&s| s == t_max)
            .ok_or_else(|| invalid(format!("T_max = {t_max} is not a node")))?;
        let spec = |j: usize| ntraj.fields()[j].in_representation(Representation::Spectral);
        let mut pts: Vec<(T, Field<T>)> = Vec::new();
        match times.iter().position(|&s| s >= t) {
            Some(j) if times[j] == t => pts.push((t, spec(j))),
            Some(j) => {
                let (a, b) = (times[j - 1], times[j]);
                let w = (t - a) / (b - a);
                let f = spec(j - 1).scale_real(T::one() - w) + spec(j).scale_real(w);
                pts.push((t, f));
            }
            None => unreachable!("t within range"),
        }
        for j in 0..=end {
            if times[j] > t {
                pts.push((times[j], spec(j)));
            }
        }
        let mut acc = Field::zeros(&self.grid, Representation::Spectral);
        let half = T::lit(0.5);
        let weight = |i: usize| -> T {
            let left = if i > 0 { pts[i].0 - pts[i - 1].0 } else { T::zero() };
            let right = if i + 1 < pts.len() { pts[i + 1].0 - pts[i].0 } else { T::zero() };
            half * (left + right)
        };
        for (i, (s, f)) in pts.iter().enumerate() {
            let w = weight(i);
            let lag = *s - t;
            for ((a, x), h) in acc.values_mut().iter_mut().zip(f.values()).zip(&self.h) {
                *a += *x * cis(*h * lag) * w;
            }
        }
        let tail_times: Vec<f64> = times[..=end].iter().map(|x| x.to_f64_lossy()).collect();
        let tail_norms: Vec<f64> = (0..=end)
            .map(|j| sobolev_norm(&ntraj.fields()[j], T::zero(), false).to_f64_lossy())
            .collect();
        Ok(DuhamelValue {
            field: -acc,
            tail: TailEstimate::from_samples(&tail_times, &tail_norms),
        })
    }
}

fn check_nodes<T: Real>(times: &[T]) -> Result<()> {
    if times.len() < 2 {
        return Err(invalid("a Duhamel integral needs at least two nodes"));
    }
    Ok(())
}

/// `D[N](t)` with the Bogoliubov propagator.
pub fn duhamel_from_infinity<T: Real>(ntraj: &Trajectory<T>, t: T, t_max: T) -> Result<DuhamelValue<T>> {
    DuhamelIntegrator::new(ntraj.grid()).at(ntraj, t, t_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use num_complex::Complex;
    use crate::operators::linear::propagate;
    use crate::testing::random_smooth_field;

    fn nodes(t0: f64, t1: f64, k: usize) -> Vec<f64> {
        (0..k).map(|j| t0 + (t1 - t0) * j as f64 / (k - 1) as f64).collect()
    }

    fn traj_of(g: &Grid<f64>, times: &[f64], f: impl Fn(f64) -> Field<f64>) -> Trajectory<f64> {
        Trajectory::from_parts(g, VariableTag::Z, times.to_vec(), times.iter().map(|&t| f(t)).collect()).unwrap()
    }

    #[test]
    fn zero_source() {
        let g = make_grid(2, 16, 10.0).unwrap();
        let times = nodes(1.0, 5.0, 9);
        let n = traj_of(&g, &times, |_| Field::zeros(&g, Representation::Spectral));
        let out = DuhamelIntegrator::new(&g).all(&n).unwrap();
        assert!(out.traj.fields().iter().all(|f| f.max_abs() == 0.0));
        assert_eq!(out.tail.bound, 0.0);
    }

    #[test]
    fn constant_source_without_dispersion() {
        let g = make_grid(2, 16, 10.0).unwrap();
        let times = nodes(2.0, 6.0, 5);
        let f = random_smooth_field(&g, 1, 0.5).into_spectral();
        let n = traj_of(&g, &times, |_| f.clone());
        let integ = DuhamelIntegrator::with_dispersion(&g, Dispersion::Zero);
        let out = integ.all(&n).unwrap();
        for (t, d) in out.traj.times().iter().zip(out.traj.fields()) {
            let expect = f.scale_real(-(6.0 - t));
            assert!((d - &expect).max_abs() < 1e-12 * f.max_abs());
        }
        let single = integ.at(&n, 3.3, 6.0).unwrap();
        assert!((&single.field - &f.scale_real(-2.7)).max_abs() < 1e-12 * f.max_abs());
    }

    #[test]
    fn single_node_matches_recurrence() {
        let g = make_grid(2, 16, 10.0).unwrap();
        let times = nodes(1.0, 3.0, 11);
        let f = random_smooth_field(&g, 3, 0.5).into_spectral();
        let n = traj_of(&g, &times, |t| f.scale_real(1.0 / t));
        let integ = DuhamelIntegrator::new(&g);
        let all = integ.all(&n).unwrap();
        let one = integ.at(&n, times[3], 3.0).unwrap();
        assert!((&one.field - &all.traj.fields()[3]).max_abs() < 1e-12);
    }

    /// `N(s) = e^{-iHs}g/s²` integrates in closed form: `D(t) = -e^{-iHt}g(1/t - 1/T_max)`.
    #[test]
    fn quadrature_self_convergence() {
        let g = make_grid(2, 16, 10.0).unwrap();
        let base = random_smooth_field(&g, 5, 0.6).into_spectral();
        let src = |s: f64| propagate(&base, s).scale(Complex::new((0.3 * s).cos(), 0.0)).scale_real(1.0 / (s * s));
        let t_max = 8.0;
        let exact_at = |k: usize| -> f64 {
            let times = nodes(2.0, t_max, k);
            let n = traj_of(&g, &times, src);
            let d = DuhamelIntegrator::new(&g).all(&n).unwrap();
            let fine_times = nodes(2.0, t_max, 4097);
            let nf = traj_of(&g, &fine_times, src);
            let reference = DuhamelIntegrator::new(&g).at(&nf, 2.0, t_max).unwrap().field;
            sobolev_norm(&(&d.traj.fields()[0] - &reference), 0.0, false)
        };
        let coarse = exact_at(33);
        let fine = exact_at(65);
        assert!(coarse / fine >= 3.8, "ratio {}", coarse / fine);
    }

    #[test]
    fn rejects_bad_ranges() {
        let g = make_grid(2, 16, 10.0).unwrap();
        let times = nodes(1.0, 2.0, 3);
        let n = traj_of(&g, &times, |_| Field::zeros(&g, Representation::Spectral));
        let integ = DuhamelIntegrator::new(&g);
        assert!(integ.at(&n, 0.5, 2.0).is_err());
        assert!(integ.at(&n, 1.2, 1.7).is_err());
    }
}
